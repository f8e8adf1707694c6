//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::time::{Duration, Instant};

use common::*;
use reweighted_rpca::admm::{self, RpcaProblem, SolveReport, SolverConfig, Termination};
use reweighted_rpca::datagen::{self, SyntheticSpec};
use reweighted_rpca::linalg::{ObservationMask, RngSeed, WeightSpec};
use reweighted_rpca::norms::{Regularizer, RegularizerKind};
use reweighted_rpca::reweight::{self, EpsFloor, ReweightConfig};
use reweighted_rpca::verify::{self, CheckReport};
use reweighted_rpca::{cli, Result};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn summarize(reports: &[CheckReport]) -> String {
    reports
        .iter()
        .map(|r| format!("{}:{}/{}", r.name, r.violations, r.trials))
        .collect::<Vec<_>>()
        .join(" ")
}

fn stiefel_suite() -> Result<Verdict> {
    let mut reports = Vec::new();
    for case in verify::default_stiefel_cases() {
        reports.push(verify::check_stiefel_inequality(12, 5, case, 1000, RngSeed(1))?);
    }
    let pass = reports.len() == 6 && reports.iter().all(CheckReport::passed);
    Ok(verdict(pass, summarize(&reports)))
}

fn factorization_suite() -> Result<Verdict> {
    let mut reports = Vec::new();
    for kind in RegularizerKind::ALL {
        reports.push(verify::check_factorization(12, 10, 4, Regularizer::of_kind(kind), 200, RngSeed(2))?);
    }
    let pass = reports
        .iter()
        .all(|r| r.passed() && r.equality_attained.is_some_and(|n| n >= 1));
    let attained: Vec<String> = reports.iter().map(|r| format!("{:?}", r.equality_attained)).collect();
    Ok(verdict(pass, format!("{} attained={}", summarize(&reports), attained.join(","))))
}

fn prox_suite() -> Result<Verdict> {
    let reports = verify::check_prox_oracles(100, RngSeed(3))?;
    let pass = reports.len() == verify::PROX_OPERATORS.len() && reports.iter().all(CheckReport::passed);
    let worst = reports.iter().map(|r| r.worst_slack).fold(f64::INFINITY, f64::min);
    Ok(verdict(pass, format!("{} worst_slack={worst:.2e}", summarize(&reports))))
}

fn stationarity_problem(kind: RegularizerKind, trial: u64) -> RpcaProblem {
    let m = gaussian(1000 + trial, 7, 6);
    let mask = ObservationMask::new(7, 6, (0..42).filter(|k| k % 5 != 2).map(|k| (k / 6, k % 6))).unwrap();
    let w = if trial.is_multiple_of(2) { vec![1.0; 3] } else { vec![4.0, 1.5, 0.3] };
    RpcaProblem::new(m, mask, 0.4, 3, WeightSpec::new(w).unwrap(), Regularizer::of_kind(kind)).unwrap()
}

/// Scalar penalty of one singular value on the given side: `c·x²`, `c·x` or
/// `c·log(x + ε)`.
fn side_penalty(kind: RegularizerKind, a_side: bool, eps: f64) -> Box<dyn Fn(f64) -> f64> {
    match (kind, a_side) {
        (RegularizerKind::WeightedNuclear, _) => Box::new(|x| 0.5 * x * x),
        (RegularizerKind::WeightedSchattenHalf, _) => Box::new(|x| 0.5 * x),
        (RegularizerKind::WeightedSchattenTwoThirds, true) => Box::new(|x| x * x / 3.0),
        (RegularizerKind::WeightedSchattenTwoThirds, false) => Box::new(|x| 2.0 * x / 3.0),
        (RegularizerKind::WeightedLog, _) => Box::new(move |x| 0.5 * (x + eps).ln()),
    }
}

/// Singular-value grid oracle for `argmin t·h(Z) + ½‖Z − T‖²`.
fn spectral_grid_gap(out: &Mat, target: &Mat, t: f64, h: &dyn Fn(f64) -> f64) -> f64 {
    let so = oracle_singular_values(out);
    let st = oracle_singular_values(target);
    so.iter()
        .zip(&st)
        .map(|(&x, &y)| {
            let f = |v: f64| 0.5 * (v - y) * (v - y) + t * h(v);
            f(x) - grid_min(0.0, y + 1.0, 1e-4, f).1
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn stationarity_suite() -> Result<Verdict> {
    let mut worst_fd = 0.0f64;
    let mut worst_grid = f64::NEG_INFINITY;
    for trial in 0..20u64 {
        let p = stationarity_problem(RegularizerKind::WeightedNuclear, trial);
        let st = random_state(&p, 2000 + trial, 0.3 + 0.4 * trial as f64);
        for block in 0..3 {
            let updated = match block {
                0 => admm::update_a(&st, &p)?,
                1 => admm::update_b(&st, &p)?,
                _ => admm::update_x(&st, &p)?,
            };
            let set = |v: &Mat| {
                let mut s = st.clone();
                match block {
                    0 => s.a = v.clone(),
                    1 => s.b = v.clone(),
                    _ => s.x = v.clone(),
                }
                s
            };
            let g = fd_gradient(&updated, 1e-2, |v| smooth_lagrangian(&set(v), &p));
            worst_fd = worst_fd.max(g.norm() / (1.0 + updated.norm()));
        }

        let s = admm::update_s(&st, &p)?;
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let on = p.mask.contains(i, j);
                let c = st.x[(i, j)] - p.observed[(i, j)];
                let f = |v: f64| {
                    let r = c + v;
                    (if on { v.abs() } else { 0.0 }) + st.y4[(i, j)] * r + 0.5 * st.rho * r * r
                };
                let (_, best) = grid_min(s[(i, j)] - 2.0, s[(i, j)] + 2.0, 1e-4, f);
                worst_grid = worst_grid.max(f(s[(i, j)]) - best);
            }
        }

        for kind in RegularizerKind::ALL {
            let p = stationarity_problem(kind, trial);
            let t = p.lambda / st.rho;
            let eps = p.regularizer.eps_log();
            let a_target = p.weights.scale_columns(&st.a, -1.0) - &st.y1 / st.rho;
            let b_target = &st.b - &st.y2 / st.rho;
            let a_hat = admm::update_a_hat(&st, &p)?;
            let b_hat = admm::update_b_hat(&st, &p)?;
            worst_grid = worst_grid.max(spectral_grid_gap(&a_hat, &a_target, t, &*side_penalty(kind, true, eps)));
            worst_grid = worst_grid.max(spectral_grid_gap(&b_hat, &b_target, t, &*side_penalty(kind, false, eps)));
        }
    }
    let pass = worst_fd <= 1e-8 && worst_grid <= 1e-6;
    Ok(verdict(pass, format!("fd_rel_grad={worst_fd:.2e} grid_gap={worst_grid:.2e}")))
}

fn relative_error(x_hat: &Mat, x_true: &Mat) -> f64 {
    (x_hat - x_true).norm() / x_true.norm()
}

fn noiseless_spec() -> SyntheticSpec {
    SyntheticSpec {
        m: 50,
        n: 40,
        true_rank: 3,
        corruption_fraction: 0.0,
        corruption_magnitude: 1.0,
        observe_fraction: 1.0,
        seed: RngSeed(5),
    }
}

fn noiseless_recovery() -> Result<Verdict> {
    let g = datagen::generate(&noiseless_spec())?;
    let p = RpcaProblem::new(g.observed, g.mask, 1e-3, 3, WeightSpec::identity(3), Regularizer::nuclear())?;
    let rep = admm::solve(&p, &SolverConfig::default())?;
    let err = relative_error(&rep.x_hat, &g.x_true);
    let res = rep.final_residuals().unwrap_or([f64::INFINITY; 4]);
    let worst = res.iter().copied().fold(0.0, f64::max);
    let pass = err <= 1e-6 && rep.iterations <= 300 && worst <= 1e-7;
    Ok(verdict(
        pass,
        format!("rel_error={err:.2e} iterations={} max_residual={worst:.2e}", rep.iterations),
    ))
}

struct RobustRun {
    kind: RegularizerKind,
    seed: u64,
    lambda: f64,
    eps: f64,
    report: SolveReport,
    error: f64,
}

fn robust_runs() -> Result<Vec<RobustRun>> {
    let mut runs = Vec::new();
    for seed in 1..=3u64 {
        let g = datagen::generate(&SyntheticSpec {
            m: 100,
            n: 100,
            true_rank: 5,
            corruption_fraction: 0.05,
            corruption_magnitude: 5.0,
            observe_fraction: 0.9,
            seed: RngSeed(seed),
        })?;
        for kind in RegularizerKind::ALL {
            let reg = Regularizer::of_kind(kind);
            let p = RpcaProblem::with_defaults(g.observed.clone(), g.mask.clone(), 5, reg)?;
            let report = admm::solve(&p, &SolverConfig { max_iter: 500, ..SolverConfig::default() })?;
            let error = relative_error(&report.x_hat, &g.x_true);
            runs.push(RobustRun {
                kind,
                seed,
                lambda: p.lambda,
                eps: reg.eps_log(),
                report,
                error,
            });
        }
    }
    Ok(runs)
}

fn robust_recovery(runs: &[RobustRun]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let res = run.report.final_residuals().unwrap_or([f64::INFINITY; 4]);
        let worst = res.iter().copied().fold(0.0, f64::max);
        let needs_accuracy = matches!(run.kind, RegularizerKind::WeightedNuclear | RegularizerKind::WeightedLog);
        let ok = worst <= 1e-6
            && run.report.termination != Termination::NumericalFailure
            && (!needs_accuracy || (run.error <= 1e-2 && run.report.iterations <= 500));
        pass &= ok;
        parts.push(format!(
            "{}/{}:err={:.1e},it={},res={:.1e}",
            run.kind.name(),
            run.seed,
            run.error,
            run.report.iterations,
            worst
        ));
    }
    verdict(pass, parts.join(" "))
}

fn log_dual_bound(runs: &[RobustRun]) -> Verdict {
    let mut worst_margin = f64::INFINITY;
    let mut largest = 0.0f64;
    let mut count = 0;
    for run in runs.iter().filter(|r| r.kind == RegularizerKind::WeightedLog) {
        let bound = run.lambda / run.eps + 1e-8;
        for rec in &run.report.history {
            count += 1;
            largest = largest.max(rec.y1_spectral);
            worst_margin = worst_margin.min(bound - rec.y1_spectral);
        }
    }
    verdict(
        count > 0 && worst_margin >= 0.0,
        format!("iterations={count} max_norm={largest:.3e} min_margin={worst_margin:.3e}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Factor width two above the true rank: with `r` equal to the true rank
/// every variant recovers to the stopping tolerance and the comparison only
/// measures stopping noise.
const REWEIGHT_WIDTH: usize = 6;

fn reweighting_effect() -> Result<Verdict> {
    let cfg = ReweightConfig {
        outer_rounds: 3,
        ..ReweightConfig::default()
    };
    let floor = 1e-3;
    let (mut identity, mut reweighted, mut oracle_wins) = (Vec::new(), Vec::new(), 0);
    for seed in 100..110u64 {
        let g = datagen::generate(&SyntheticSpec {
            m: 80,
            n: 60,
            true_rank: 4,
            corruption_fraction: 0.05,
            corruption_magnitude: 5.0,
            observe_fraction: 0.9,
            seed: RngSeed(seed),
        })?;
        let p = RpcaProblem::with_defaults(g.observed.clone(), g.mask.clone(), REWEIGHT_WIDTH, Regularizer::nuclear())?;
        let rw = reweight::reweighted_solve(&p, &cfg)?;
        let e0 = relative_error(&rw.rounds[0].x_hat, &g.x_true);
        let e3 = relative_error(&rw.report.x_hat, &g.x_true);

        let sigma1 = reweighted_rpca::linalg::spectral_norm(&g.x_true)?;
        let w = reweight::oracle_weights(&g.x_true, REWEIGHT_WIDTH, EpsFloor::Relative(floor).resolve(sigma1))?;
        let oracle = admm::solve(&p.with_weights(w)?, &cfg.inner)?;
        let eo = relative_error(&oracle.x_hat, &g.x_true);
        oracle_wins += (eo <= e0) as usize;
        identity.push(e0);
        reweighted.push(e3);
    }
    let (m0, m3) = (median(identity), median(reweighted));
    let part_a = m3 <= m0;
    let part_b = oracle_wins >= 7;
    Ok(verdict(
        part_a && part_b,
        format!(
            "median_round0={m0:.4e} median_round3={m3:.4e} ({}) oracle_wins={oracle_wins}/10 ({})",
            if part_a { "ok" } else { "worse" },
            if part_b { "ok" } else { "short" }
        ),
    ))
}

fn determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| reweighted_rpca::RpcaError::InvalidArgument(e.to_string()))?;
    let base = dir.path();
    let (sink_out, sink_err) = (&mut Vec::new(), &mut Vec::new());
    let gen_args = [
        "rrpca", "gen", "--m", "50", "--n", "40", "--rank", "3", "--seed", "5", "--out",
    ];
    let mut args: Vec<String> = gen_args.iter().map(|s| s.to_string()).collect();
    args.push(base.display().to_string());
    let mut codes = vec![cli::run(&args, sink_out, sink_err)];
    let mut histories = Vec::new();
    for run in ["first", "second"] {
        let cfg = base.join(format!("{run}.cfg"));
        std::fs::write(&cfg, format!("observed = M.txt\nrank = 3\nlambda = 1e-3\nseed = 5\noutput_dir = {run}\n"))?;
        codes.push(cli::run(["rrpca", "solve", "--config", cfg.to_str().unwrap()], sink_out, sink_err));
        histories.push(std::fs::read(base.join(run).join("history.txt"))?);
    }
    let identical = histories[0] == histories[1];
    Ok(verdict(
        identical && codes.iter().all(|c| *c == 0) && !histories[0].is_empty(),
        format!("exit_codes={codes:?} history_bytes={} identical={identical}", histories[0].len()),
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, limit: Option<Duration>, run: &mut dyn FnMut() -> Result<Verdict>| {
        let start = Instant::now();
        let v = run().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = v.pass && in_time;
        failed += (!pass) as usize;
        let budget = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        println!(
            "criterion {n} {name}: {} [{:.2}s{budget}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        );
    };
    let secs = |s| Some(Duration::from_secs(s));

    report(1, "stiefel_inequality", secs(30), &mut stiefel_suite);
    report(2, "factorization", secs(60), &mut factorization_suite);
    report(3, "prox_oracles", secs(30), &mut prox_suite);
    report(4, "closed_form_stationarity", secs(60), &mut stationarity_suite);
    report(5, "noiseless_recovery", secs(10), &mut noiseless_recovery);

    let start = Instant::now();
    let runs = robust_runs();
    let runs_time = start.elapsed();
    match runs {
        Ok(runs) => {
            report(6, "robust_recovery", secs(120), &mut || {
                // The runs are shared with the next criterion; charge their time here.
                let v = robust_recovery(&runs);
                Ok(Verdict {
                    pass: v.pass && runs_time <= Duration::from_secs(120),
                    detail: format!("solve_time={:.2}s {}", runs_time.as_secs_f64(), v.detail),
                })
            });
            report(7, "log_dual_bound", None, &mut || Ok(log_dual_bound(&runs)));
        }
        Err(e) => {
            report(6, "robust_recovery", None, &mut || Ok(verdict(false, format!("error: {e}"))));
            report(7, "log_dual_bound", None, &mut || Ok(verdict(false, "no runs")));
        }
    }
    report(8, "reweighting_effect", secs(180), &mut reweighting_effect);
    report(9, "determinism", None, &mut determinism);

    println!("acceptance: {} of 9 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
