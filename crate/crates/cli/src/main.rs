use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mollify::oracle::QuadratureSpec;
use mollify::SmootherKind;
use mollify_cli::commands::{
    cmd_auc_demo, cmd_oracle_check, cmd_run, cmd_validate_schedules, verdict_exit_code,
    AucDemoArgs, OracleCheckArgs, RunOutput, ValidateArgs,
};
use mollify_cli::config::parse_override;
use mollify_cli::oracle_check::SE_THRESHOLD;
use mollify_cli::CliError;

#[derive(Parser)]
#[command(
    name = "mollify",
    version,
    about = "Gaussian-smoothing optimizer for noisy, discontinuous objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run(RunArgs),
    /// Classify power-law step and smoothing schedules.
    ValidateSchedules(ValidateCli),
    /// Compare Monte-Carlo estimates against quadrature on a grid.
    OracleCheck(OracleCli),
    /// Rank synthetic separable data by optimizing the AUC risk.
    AucDemo(AucCli),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override a config value, e.g. `--set schedule.iota=0.6`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmootherArg {
    Mean,
    Exp,
}

impl From<SmootherArg> for SmootherKind {
    fn from(s: SmootherArg) -> Self {
        match s {
            SmootherArg::Mean => SmootherKind::MeanSmooth,
            SmootherArg::Exp => SmootherKind::ExpSmooth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Stochastic,
    Deterministic,
}

#[derive(Args)]
struct ValidateCli {
    #[arg(long)]
    iota: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    c_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_gamma: f64,
    #[arg(long, value_enum, default_value = "exp")]
    smoother: SmootherArg,
    /// Read alpha, beta, eta and the mode from a built-in objective.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Noise moment order; `inf` when all moments are finite.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct OracleCli {
    #[arg(long)]
    objective: String,
    #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01")]
    gammas: Vec<f64>,
    /// Per-axis grid `lo:hi:count`, expanded to a tensor grid.
    #[arg(long, default_value = "-1:1:5")]
    grid: String,
    /// Smoother to check; both when omitted.
    #[arg(long, value_enum)]
    smoother: Option<SmootherArg>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct AucCli {
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    n_data: usize,
    #[arg(long, default_value_t = 32)]
    n_batch: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: u64,
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    /// Target effective sample size; defaults to half the samples.
    #[arg(long)]
    target_ess: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "auc-demo")]
    output: PathBuf,
}

fn print_run(out: &RunOutput) {
    let s = &out.summary;
    println!(
        "objective: {} ({} smoother, d = {})",
        s.objective, s.smoother, s.dim
    );
    println!("verdict: {}", s.verdict.level);
    println!("final theta: {:?}", s.final_theta);
    println!("running min grad norm: {:.6e}", s.running_min_grad_norm);
    if let Some(r) = s.final_auc_risk {
        println!("final AUC risk: {r:.6}");
    }
    println!("wall time: {:.3} s", s.wall_time_secs);
    println!("trace: {}", out.trace_path.display());
    println!("summary: {}", out.summary_path.display());
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(a) => {
            let mut overrides = a
                .set
                .iter()
                .map(|s| parse_override(s))
                .collect::<Result<Vec<_>, _>>()?;
            let extra = [
                ("run.seed", a.seed.map(|v| v.to_string())),
                ("run.threads", a.threads.map(|v| v.to_string())),
                ("output.dir", a.output.map(|v| v.display().to_string())),
                ("run.n_iterations", a.iterations.map(|v| v.to_string())),
            ];
            overrides.extend(
                extra
                    .into_iter()
                    .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
            );
            print_run(&cmd_run(&a.config, &overrides)?);
            Ok(0)
        }
        Command::ValidateSchedules(a) => {
            let verdict = cmd_validate_schedules(&ValidateArgs {
                iota: a.iota,
                kappa: a.kappa,
                c_beta: a.c_beta,
                c_gamma: a.c_gamma,
                smoother: a.smoother.into(),
                objective: a.objective,
                alpha: a.alpha,
                beta_upper: a.beta,
                eta: a.eta,
                deterministic: a.mode.map(|m| matches!(m, ModeArg::Deterministic)),
            })?;
            print!("{verdict}");
            Ok(verdict_exit_code(&verdict))
        }
        Command::OracleCheck(a) => {
            let smoothers = match a.smoother {
                Some(s) => vec![s.into()],
                None => vec![SmootherKind::MeanSmooth, SmootherKind::ExpSmooth],
            };
            let report = cmd_oracle_check(&OracleCheckArgs {
                objective: a.objective,
                gammas: a.gammas,
                grid: a.grid,
                smoothers,
                n_samples: a.samples,
                seed: a.seed,
                spec: QuadratureSpec {
                    n_nodes: a.nodes,
                    ..QuadratureSpec::default()
                },
            })?;
            for c in &report.comparisons {
                if a.verbose || c.grad_units() > SE_THRESHOLD {
                    println!("{c}");
                }
            }
            println!(
                "{} comparisons, max deviation {:.3} standard errors: {}",
                report.comparisons.len(),
                report.max_units(),
                if report.passed() { "ok" } else { "FAILED" }
            );
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::AucDemo(a) => {
            let args = AucDemoArgs {
                p: a.p,
                n_data: a.n_data,
                n_batch: a.n_batch,
                separation: a.separation,
                margin: a.margin,
                n_iterations: a.iterations,
                n_samples: a.samples,
                target_ess: Some(a.target_ess.unwrap_or(a.samples as f64 / 2.0)),
                seed: a.seed,
                threads: a.threads,
                output: a.output,
                ..AucDemoArgs::default()
            };
            print_run(&cmd_auc_demo(&args)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
