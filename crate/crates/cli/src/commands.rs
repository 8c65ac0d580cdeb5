//! Subcommand implementations. `main` only parses arguments and maps
//! [`CliError`] to exit codes.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mollify::auc::{
    auc_objective, empirical_auc_risk, load_csv, save_csv, stereographic_inverse, synthetic_blobs,
    Dataset,
};
use mollify::oracle::{oracle_moments, AtNoise, QuadratureSpec};
use mollify::{
    objective_by_descriptor, run, validate_schedules, ConvergenceLevel, ConvergenceVerdict, Mode,
    NoisyObjective, Point, RegularityProfile, RunTrace, ScheduleCheck, SmootherKind, Substream,
};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ObjectiveSource};
use crate::oracle_check::{
    compare_with_oracle, fixed_noise, grid_points, parse_grid, Comparison, SE_THRESHOLD,
};
use crate::output::{write_summary_file, write_trace_file, RunSummary, VerdictSummary};

/// Overrides `run.threads` when set.
pub const THREADS_ENV: &str = "MOLLIFY_THREADS";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] mollify::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

/// Thread count from the environment, falling back to the configured value.
/// Zero lets rayon choose.
pub fn resolve_threads(configured: usize) -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        _ => Ok(configured),
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

struct Built {
    objective: Arc<dyn NoisyObjective>,
    dataset: Option<Arc<Dataset>>,
}

fn build_objective(cfg: &ExperimentConfig, base: &Path) -> Result<Built, CliError> {
    match &cfg.objective {
        ObjectiveSource::Builtin(desc) => Ok(Built {
            objective: objective_by_descriptor(desc)
                .map_err(|e| CliError::Config(e.to_string()))?,
            dataset: None,
        }),
        ObjectiveSource::Dataset { path, n_batch } => {
            let data = Arc::new(
                load_csv(resolve(base, path)).map_err(|e| CliError::Config(e.to_string()))?,
            );
            let obj = auc_objective(data.clone(), *n_batch)
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Built {
                objective: Arc::new(obj),
                dataset: Some(data),
            })
        }
    }
}

pub fn verdict_for(
    cfg: &ExperimentConfig,
    profile: RegularityProfile,
) -> mollify::Result<ConvergenceVerdict> {
    validate_schedules(&ScheduleCheck {
        iota: cfg.iota,
        kappa: cfg.kappa,
        c_beta: cfg.c_beta,
        c_gamma: cfg.c_gamma,
        profile,
        mode: if profile.deterministic {
            Mode::Deterministic
        } else {
            Mode::Stochastic
        },
        smoother: cfg.smoother,
    })
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: RunTrace,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Run an experiment; relative paths in `cfg` resolve against `base`.
pub fn execute(cfg: &ExperimentConfig, base: &Path) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let run_config = cfg.run_config()?;
    let built = build_objective(cfg, base)?;
    let obj = built.objective.as_ref();
    if cfg.theta0.len() != obj.dim() {
        return Err(CliError::Config(format!(
            "theta0 has {} coordinates but objective '{}' has dimension {}",
            cfg.theta0.len(),
            obj.name(),
            obj.dim()
        )));
    }
    if let (SmootherKind::ExpSmooth, Some(t)) = (cfg.smoother, cfg.target_ess) {
        if !(t > 1.0 && t < cfg.n_samples as f64) {
            return Err(CliError::Config(format!(
                "target_ess must lie in (1, n_samples), got {t}"
            )));
        }
    }
    let theta0 = Point::new(cfg.theta0.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let verdict = verdict_for(cfg, obj.profile()).map_err(|e| CliError::Config(e.to_string()))?;
    let threads = resolve_threads(cfg.threads)?;
    let pool = thread_pool(threads)?;

    let start = Instant::now();
    let trace = pool.install(|| run(obj, &theta0, &run_config))?;
    let wall = start.elapsed().as_secs_f64();

    let final_auc_risk = match &built.dataset {
        Some(data) => Some(empirical_auc_risk(
            &stereographic_inverse(trace.final_theta.coords()),
            data,
        )?),
        None => None,
    };
    let summary = RunSummary {
        objective: obj.name(),
        smoother: cfg.smoother.to_string(),
        dim: obj.dim(),
        n_iterations: cfg.n_iterations,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        threads: pool.current_num_threads(),
        final_theta: trace.final_theta.coords().to_vec(),
        running_min_grad_norm: trace.running_min_grad_norm,
        final_value: trace.records.last().map_or(f64::NAN, |r| r.value),
        final_auc_risk,
        verdict: VerdictSummary::from(&verdict),
        wall_time_secs: wall,
    };

    let out_dir = resolve(base, &cfg.output);
    std::fs::create_dir_all(&out_dir)?;
    let trace_path = out_dir.join(TRACE_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_trace_file(&trace_path, &trace)?;
    write_summary_file(&summary_path, &summary)?;
    Ok(RunOutput {
        summary,
        trace,
        trace_path,
        summary_path,
    })
}

pub fn cmd_run(config_path: &Path, overrides: &[(String, String)]) -> Result<RunOutput, CliError> {
    let cfg = ExperimentConfig::load(config_path, overrides)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    execute(&cfg, base)
}

#[derive(Debug, Clone)]
pub struct ValidateArgs {
    pub iota: f64,
    pub kappa: f64,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub smoother: SmootherKind,
    /// Take alpha, beta, eta and the mode from this objective.
    pub objective: Option<String>,
    pub alpha: Option<f64>,
    pub beta_upper: Option<f64>,
    pub eta: Option<f64>,
    pub deterministic: Option<bool>,
}

pub fn cmd_validate_schedules(args: &ValidateArgs) -> Result<ConvergenceVerdict, CliError> {
    let base = match &args.objective {
        Some(desc) => Some(
            objective_by_descriptor(desc)
                .map_err(|e| CliError::Config(e.to_string()))?
                .profile(),
        ),
        None => None,
    };
    let alpha = args
        .alpha
        .or(base.map(|p| p.alpha))
        .ok_or_else(|| CliError::Config("give --alpha or --objective".into()))?;
    let beta_upper = args
        .beta_upper
        .or(base.map(|p| p.beta_upper))
        .unwrap_or(alpha);
    let eta = args.eta.or(base.map(|p| p.eta)).unwrap_or(f64::INFINITY);
    let deterministic = args
        .deterministic
        .or(base.map(|p| p.deterministic))
        .unwrap_or(false);
    let profile = RegularityProfile::new(alpha, beta_upper, eta, deterministic)
        .map_err(|e| CliError::Config(e.to_string()))?;
    validate_schedules(&ScheduleCheck {
        iota: args.iota,
        kappa: args.kappa,
        c_beta: args.c_beta,
        c_gamma: args.c_gamma,
        profile,
        mode: if deterministic {
            Mode::Deterministic
        } else {
            Mode::Stochastic
        },
        smoother: args.smoother,
    })
    .map_err(|e| CliError::Config(e.to_string()))
}

/// Exit status of `validate-schedules`: 0 when convergence is guaranteed.
pub fn verdict_exit_code(v: &ConvergenceVerdict) -> i32 {
    match v.level {
        ConvergenceLevel::FullConvergence | ConvergenceLevel::SubsequenceOnly => 0,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct OracleCheckArgs {
    pub objective: String,
    pub gammas: Vec<f64>,
    pub grid: String,
    pub smoothers: Vec<SmootherKind>,
    pub n_samples: usize,
    pub seed: u64,
    pub spec: QuadratureSpec,
}

#[derive(Debug)]
pub struct OracleReport {
    pub comparisons: Vec<Comparison>,
}

impl OracleReport {
    pub fn max_units(&self) -> f64 {
        self.comparisons
            .iter()
            .map(Comparison::grad_units)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_units() <= SE_THRESHOLD
    }
}

pub fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<OracleReport, CliError> {
    let obj =
        objective_by_descriptor(&args.objective).map_err(|e| CliError::Config(e.to_string()))?;
    let (lo, hi, count) = parse_grid(&args.grid).map_err(|e| CliError::Config(e.to_string()))?;
    if args.gammas.is_empty() || args.gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(CliError::Config("gammas must be positive".into()));
    }
    if args.n_samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }
    let u = fixed_noise(obj.as_ref(), args.seed);
    let field = AtNoise::new(obj.as_ref(), &u);
    let mut comparisons = Vec::new();
    for &gamma in &args.gammas {
        for theta in grid_points(obj.dim(), lo, hi, count) {
            let oracle = oracle_moments(&field, &theta, gamma, &args.spec)?;
            for &kind in &args.smoothers {
                comparisons.push(compare_with_oracle(
                    obj.as_ref(),
                    &u,
                    &theta,
                    gamma,
                    kind,
                    args.n_samples,
                    args.seed,
                    &oracle,
                )?);
            }
        }
    }
    Ok(OracleReport { comparisons })
}

#[derive(Debug, Clone)]
pub struct AucDemoArgs {
    pub p: usize,
    pub n_data: usize,
    pub n_batch: usize,
    pub separation: f64,
    pub margin: f64,
    pub n_iterations: u64,
    pub n_samples: usize,
    pub target_ess: Option<f64>,
    pub c_beta: f64,
    pub iota: f64,
    pub c_gamma: f64,
    pub kappa: f64,
    pub seed: u64,
    pub record_every: u64,
    pub threads: usize,
    pub output: PathBuf,
}

impl Default for AucDemoArgs {
    fn default() -> Self {
        AucDemoArgs {
            p: 5,
            n_data: 200,
            n_batch: 32,
            separation: 4.0,
            margin: 0.5,
            n_iterations: 2000,
            n_samples: 1024,
            target_ess: Some(512.0),
            c_beta: 0.2,
            iota: 0.5,
            c_gamma: 0.2,
            kappa: 0.2,
            seed: 42,
            record_every: 10,
            threads: 0,
            output: PathBuf::from("auc-demo"),
        }
    }
}

pub const DATA_FILE: &str = "data.csv";
pub const CONFIG_FILE: &str = "experiment.conf";

/// Generate separable blobs, write them with a matching config into the
/// output directory, then run the exponential smoother on them.
pub fn cmd_auc_demo(args: &AucDemoArgs) -> Result<RunOutput, CliError> {
    let data = synthetic_blobs(
        args.p,
        args.n_data,
        args.separation,
        args.margin,
        &mut Substream::new(args.seed, 0, "data").rng(),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(&args.output)?;
    save_csv(&data, args.output.join(DATA_FILE))?;
    let cfg = ExperimentConfig {
        objective: ObjectiveSource::Dataset {
            path: PathBuf::from(DATA_FILE),
            n_batch: args.n_batch,
        },
        smoother: SmootherKind::ExpSmooth,
        n_samples: args.n_samples,
        target_ess: args.target_ess,
        c_beta: args.c_beta,
        iota: args.iota,
        c_gamma: args.c_gamma,
        kappa: args.kappa,
        theta0: vec![0.0; args.p - 1],
        n_iterations: args.n_iterations,
        seed: args.seed,
        record_every: args.record_every,
        threads: args.threads,
        output: PathBuf::from("."),
    };
    cfg.validate()?;
    std::fs::write(args.output.join(CONFIG_FILE), cfg.to_config_string())?;
    execute(&cfg, &args.output)
}
