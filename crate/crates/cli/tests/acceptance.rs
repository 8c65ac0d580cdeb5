//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured quantities, then asserts. Run with `--nocapture` to see them.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mollify::auc::{
    empirical_auc_risk, minibatch_auc_loss, stereographic_inverse, Dataset, PairBatch,
};
use mollify::objectives::StepPlusQuadratic;
use mollify::oracle::{oracle_mean_grad, oracle_moments, AtNoise, QuadratureSpec};
use mollify::smoothers::{normalized_weights, DEFAULT_ESS_TOL};
use mollify::{
    builtin_corpus, ess, moment_match_run, rescale_to_target_ess, run, validate_schedules,
    ConvergenceLevel, Mode, Noise, NoisyObjective, Point, RegularityProfile, RunConfig, Schedule,
    ScheduleCheck, SmootherKind,
};
use mollify_cli::commands::{cmd_auc_demo, AucDemoArgs};
use mollify_cli::oracle_check::{compare_with_oracle, fixed_noise, SE_THRESHOLD};
use mollify_cli::output::write_trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};

const SEED: u64 = 42;
const GAMMAS: [f64; 3] = [1.0, 0.1, 0.01];
const GRID_1D: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

fn report(id: u32, title: &str, ok: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

/// Five points per objective: the 1-d grid, or `(t, t/2)` in two dimensions.
fn grid(dim: usize) -> Vec<Vec<f64>> {
    GRID_1D
        .iter()
        .map(|&t| match dim {
            1 => vec![t],
            2 => vec![t, 0.5 * t],
            _ => unreachable!("corpus is at most two-dimensional"),
        })
        .collect()
}

fn low_dim_corpus() -> Vec<Arc<dyn NoisyObjective>> {
    builtin_corpus()
        .into_iter()
        .filter(|o| o.dim() <= 2)
        .collect()
}

struct Agreement {
    worst: f64,
    worst_at: String,
    coords: usize,
}

fn oracle_agreement(kind: SmootherKind) -> Agreement {
    let spec = QuadratureSpec::default();
    let mut out = Agreement {
        worst: 0.0,
        worst_at: String::new(),
        coords: 0,
    };
    for obj in low_dim_corpus() {
        let u = fixed_noise(obj.as_ref(), SEED);
        let field = AtNoise::new(obj.as_ref(), &u);
        for gamma in GAMMAS {
            for theta in grid(obj.dim()) {
                let oracle = oracle_moments(&field, &theta, gamma, &spec).unwrap();
                let c = compare_with_oracle(
                    obj.as_ref(),
                    &u,
                    &theta,
                    gamma,
                    kind,
                    100_000,
                    SEED,
                    &oracle,
                )
                .unwrap();
                out.coords += theta.len();
                if c.grad_units() >= out.worst {
                    out.worst = c.grad_units();
                    out.worst_at = format!("{} gamma={gamma} theta={theta:?}", obj.name());
                }
            }
        }
    }
    out
}

#[test]
fn criterion_01_mean_smooth_oracle_agreement() {
    let start = Instant::now();
    let a = oracle_agreement(SmootherKind::MeanSmooth);
    let elapsed = start.elapsed();
    report(
        1,
        "mean-smoothing gradient vs quadrature",
        a.worst <= SE_THRESHOLD && elapsed < Duration::from_secs(60),
        &format!(
            "max {:.3} SE over {} coordinates (at {}), {:.1} s",
            a.worst,
            a.coords,
            a.worst_at,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_exp_smooth_oracle_agreement() {
    let start = Instant::now();
    let a = oracle_agreement(SmootherKind::ExpSmooth);
    let elapsed = start.elapsed();

    // quadratic closed form grad = theta / (1 + gamma)
    let spec = QuadratureSpec::default();
    let q = builtin_corpus()
        .into_iter()
        .find(|o| o.name().starts_with("quadratic"))
        .unwrap();
    let field = AtNoise::new(q.as_ref(), &Noise::None);
    let mut closed_err: f64 = 0.0;
    let mut closed_units: f64 = 0.0;
    for gamma in GAMMAS {
        for theta in grid(q.dim()) {
            let oracle = oracle_moments(&field, &theta, gamma, &spec).unwrap();
            for (g, t) in oracle.exp_grad.iter().zip(&theta) {
                closed_err = closed_err.max((g - t / (1.0 + gamma)).abs());
            }
            let c = compare_with_oracle(
                q.as_ref(),
                &Noise::None,
                &theta,
                gamma,
                SmootherKind::ExpSmooth,
                100_000,
                SEED,
                &oracle,
            )
            .unwrap();
            for ((m, se), t) in c.mc_grad.iter().zip(&c.grad_se_exact).zip(&theta) {
                closed_units = closed_units.max((m - t / (1.0 + gamma)).abs() / se);
            }
        }
    }
    report(
        2,
        "exp-smoothing gradient vs quadrature",
        a.worst <= SE_THRESHOLD
            && closed_err <= 1e-8
            && closed_units <= SE_THRESHOLD
            && elapsed < Duration::from_secs(60),
        &format!(
            "max {:.3} SE over {} coordinates (at {}); quadratic closed form: oracle error {:.2e}, MC {:.3} SE; {:.1} s",
            a.worst,
            a.coords,
            a.worst_at,
            closed_err,
            closed_units,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_discontinuous_convergence() {
    let start = Instant::now();
    let obj = StepPlusQuadratic { weight: 0.05 };
    let field = AtNoise::new(&obj, &Noise::None);
    let spec = QuadratureSpec::default();
    let theta0 = Point::new(vec![-1.0]).unwrap();
    let mut mins = Vec::new();
    for kind in [SmootherKind::MeanSmooth, SmootherKind::ExpSmooth] {
        let cfg = RunConfig {
            beta: Schedule::new(0.2, 0.5).unwrap(),
            gamma: Schedule::new(0.2, 0.2).unwrap(),
            smoother: kind,
            n_iterations: 5000,
            n_samples: 512,
            target_ess: None,
            master_seed: SEED,
            record_every: 10,
        };
        let trace = run(&obj, &theta0, &cfg).unwrap();
        let min = trace
            .records
            .iter()
            .map(|r| {
                let g = oracle_mean_grad(&field, r.theta.coords(), r.gamma, &spec).unwrap();
                g[0].abs()
            })
            .fold(f64::INFINITY, f64::min);
        mins.push((kind, min, trace.final_theta.coords()[0]));
    }
    let elapsed = start.elapsed();
    report(
        3,
        "step plus quadratic, running min of oracle gradient norm",
        mins.iter().all(|m| m.1 < 0.05) && elapsed < Duration::from_secs(120),
        &format!(
            "{}; {:.1} s",
            mins.iter()
                .map(|(k, m, t)| format!("{k}: {m:.3e} (final theta {t:.4})"))
                .collect::<Vec<_>>()
                .join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_moment_matching_equality() {
    let obj = StepPlusQuadratic { weight: 0.05 };
    let theta0 = Point::new(vec![-1.0]).unwrap();
    let gamma = Schedule::new(0.2, 0.2).unwrap();
    let cfg = RunConfig {
        beta: gamma,
        gamma,
        smoother: SmootherKind::ExpSmooth,
        n_iterations: 200,
        n_samples: 512,
        target_ess: None,
        master_seed: SEED,
        record_every: 1,
    };
    let a = run(&obj, &theta0, &cfg).unwrap();
    let b = moment_match_run(&obj, &theta0, &gamma, 200, 512, SEED).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_trace(&mut csv_a, &a).unwrap();
    write_trace(&mut csv_b, &b).unwrap();
    let bitwise = a.records.len() == b.records.len()
        && a.records.iter().zip(&b.records).all(|(x, y)| {
            x.theta
                .coords()
                .iter()
                .zip(y.theta.coords())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        })
        && a.final_theta.coords()[0].to_bits() == b.final_theta.coords()[0].to_bits();
    report(
        4,
        "beta = gamma recovers moment matching",
        bitwise && a == b && csv_a == csv_b,
        &format!(
            "{} records, final theta {} vs {}",
            a.records.len(),
            a.final_theta.coords()[0],
            b.final_theta.coords()[0]
        ),
    );
}

#[test]
fn criterion_05_schedule_validator() {
    let stochastic = RegularityProfile::new(0.0, 0.0, f64::INFINITY, false).unwrap();
    let deterministic = RegularityProfile::new(0.0, 0.0, f64::INFINITY, true).unwrap();
    let check = |iota, kappa, c_beta, c_gamma, profile: RegularityProfile, smoother| {
        validate_schedules(&ScheduleCheck {
            iota,
            kappa,
            c_beta,
            c_gamma,
            profile,
            mode: if profile.deterministic {
                Mode::Deterministic
            } else {
                Mode::Stochastic
            },
            smoother,
        })
        .unwrap()
    };
    let exp = SmootherKind::ExpSmooth;
    let paper = check(0.5, 0.2, 0.2, 0.2, stochastic, exp);
    let short = check(0.3, 0.2, 0.2, 0.2, stochastic, exp);
    // kappa (1 - alpha/2) = iota with c_beta c_gamma^{-1} = 1 and 3
    let below = check(0.5, 0.5, 1.0, 1.0, deterministic, exp);
    let above = check(0.5, 0.5, 3.0, 1.0, deterministic, exp);
    let ok = paper.level == ConvergenceLevel::FullConvergence
        && short.level == ConvergenceLevel::NoGuarantee
        && below.level == ConvergenceLevel::SubsequenceOnly
        && below.c_star_used == Some(2.0)
        && above.level == ConvergenceLevel::NoGuarantee
        && above.c_star_used == Some(2.0);
    report(
        5,
        "schedule validator",
        ok,
        &format!(
            "(0.5, 0.2) {}; (0.3, 0.2) {}; boundary c=1 {} / c=3 {} with c_star {:?}",
            paper.level, short.level, below.level, above.level, above.c_star_used
        ),
    );
}

#[test]
fn criterion_06_gamma_scaling_law() {
    let step = builtin_corpus()
        .into_iter()
        .find(|o| o.name() == "step")
        .unwrap();
    let field = AtNoise::new(step.as_ref(), &Noise::None);
    let spec = QuadratureSpec::default();
    let thetas: Vec<f64> = (0..=400).map(|k| -2.0 + 0.01 * k as f64).collect();
    let gammas = [1.0, 0.1, 0.01, 0.001];
    let pts: Vec<(f64, f64)> = gammas
        .iter()
        .map(|&g| {
            let max = thetas
                .iter()
                .map(|&t| oracle_mean_grad(&field, &[t], g, &spec).unwrap()[0].abs())
                .fold(0.0, f64::max);
            (g.ln(), max.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    report(
        6,
        "gamma scaling of the step gradient",
        (-0.6..=-0.4).contains(&slope),
        &format!("log-log slope {slope:.4} over gamma in {gammas:?}"),
    );
}

#[test]
fn criterion_07_ess_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let target = 512.0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let shift = rng.gen_range(-50.0..50.0);
        let losses: Vec<f64> = (0..1024)
            .map(|_| {
                let x: f64 = match case % 4 {
                    0 => StandardNormal.sample(&mut rng),
                    1 => Exp::new(1.0).unwrap().sample(&mut rng),
                    2 => LogNormal::new(0.0, 1.0).unwrap().sample(&mut rng),
                    _ => rng.gen_range(0.0..1.0),
                };
                shift + scale * x
            })
            .collect();
        let lambda = rescale_to_target_ess(&losses, target, DEFAULT_ESS_TOL).unwrap();
        let achieved = ess(&normalized_weights(&losses, lambda).unwrap()).unwrap();
        worst = worst.max((achieved - target).abs() / target);
    }
    report(
        7,
        "ESS rescaling",
        worst <= 0.01,
        &format!("worst relative ESS error {worst:.2e} over 100 loss vectors"),
    );
}

#[test]
fn criterion_08_auc_desk_scale() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5 {
        let args = AucDemoArgs {
            seed,
            output: dir.path().join(format!("seed{seed}")),
            ..AucDemoArgs::default()
        };
        assert_eq!(
            (args.p, args.n_data, args.n_batch, args.n_samples),
            (5, 200, 32, 1024)
        );
        let out = cmd_auc_demo(&args).unwrap();
        let data = mollify::auc::load_csv(args.output.join("data.csv")).unwrap();
        let first_hit = out.trace.records.iter().find_map(|r| {
            let risk = empirical_auc_risk(&stereographic_inverse(r.theta.coords()), &data).unwrap();
            (risk <= 0.02).then_some(r.n)
        });
        let final_risk = out.summary.final_auc_risk.unwrap();
        ok &= first_hit.is_some() && final_risk <= 0.02;
        lines.push(format!(
            "seed {seed}: first <= 0.02 at n={first_hit:?}, final {final_risk:.4}"
        ));
    }
    let elapsed = start.elapsed();
    report(
        8,
        "AUC ranking on separable blobs",
        ok && elapsed < Duration::from_secs(30),
        &format!("{}; {:.1} s", lines.join("; "), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_09_sandwich() {
    let spec = QuadratureSpec::default();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for obj in builtin_corpus() {
        let u = fixed_noise(obj.as_ref(), SEED);
        let field = AtNoise::new(obj.as_ref(), &u);
        for gamma in GAMMAS {
            for theta in grid(obj.dim()) {
                let m = oracle_moments(&field, &theta, gamma, &spec).unwrap();
                // positive values are violations
                worst = worst
                    .max(m.posterior_mean_loss - m.exp_value)
                    .max(m.exp_value - m.mean_value);
                checked += 1;
            }
        }
    }
    report(
        9,
        "posterior mean loss <= exp value <= mean value",
        worst <= 1e-8,
        &format!("largest violation {worst:.3e} over {checked} points"),
    );
}

#[test]
fn criterion_10_minibatch_factor() {
    let data = Dataset::new(
        vec![
            vec![1.0, 0.2],
            vec![0.3, -0.8],
            vec![-0.5, 0.9],
            vec![0.1, -1.2],
        ],
        vec![1, 1, -1, -1],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let exhaustive = PairBatch::exhaustive(&data);
    let mut mismatches = 0;
    let mut nonzero = 0;
    for _ in 0..20 {
        let theta = [rng.gen_range(-3.0..3.0)];
        let risk = empirical_auc_risk(&stereographic_inverse(&theta), &data).unwrap();
        let full = minibatch_auc_loss(&theta, &exhaustive, &data).unwrap();
        // mean over every single-pair batch
        let singles: f64 = exhaustive
            .pairs
            .iter()
            .map(|&p| minibatch_auc_loss(&theta, &PairBatch { pairs: vec![p] }, &data).unwrap())
            .sum::<f64>()
            / exhaustive.len() as f64;
        if full != 2.0 * risk || singles != 2.0 * risk {
            mismatches += 1;
        }
        if risk > 0.0 {
            nonzero += 1;
        }
    }
    report(
        10,
        "exhaustive mini-batch loss equals twice the empirical risk",
        mismatches == 0 && nonzero > 0,
        &format!("20 random theta, {mismatches} mismatches, {nonzero} with non-zero risk"),
    );
}

fn run_binary(config: &Path, threads: &str, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_mollify"))
        .arg("run")
        .arg(config)
        .arg("--output")
        .arg(out)
        .env("MOLLIFY_THREADS", threads)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(out.join("trace.csv")).unwrap()
}

#[test]
fn criterion_11_thread_count_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.conf");
    std::fs::write(
        &config,
        "[objective]\nname = noisy-quadratic:2\n\n[smoother]\nkind = exp\nn_samples = 1024\ntarget_ess = 512\n\n\
         [schedule]\nc_beta = 0.2\niota = 0.5\nc_gamma = 0.2\nkappa = 0.2\n\n\
         [run]\ntheta0 = 1.5, -0.5\nn_iterations = 300\nseed = 42\nrecord_every = 1\n\n[output]\ndir = unused\n",
    )
    .unwrap();
    let one = run_binary(&config, "1", &dir.path().join("t1"));
    let four = run_binary(&config, "4", &dir.path().join("t4"));
    report(
        11,
        "byte-identical traces across thread counts",
        one == four && !one.is_empty(),
        &format!(
            "{} bytes, 1 vs 4 threads {}",
            one.len(),
            if one == four { "identical" } else { "differ" }
        ),
    );
}
