//! `rrpca` subcommands: `gen`, `solve`, `verify`, `metrics`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::admm::{self, IterationRecord, RpcaProblem, SolveReport, Termination};
use crate::config::RunConfig;
use crate::datagen::{self, GroundTruth, RecoveryMetrics, SyntheticSpec};
use crate::error::{Result, RpcaError};
use crate::format;
use crate::linalg::{ObservationMask, RngSeed, WeightSpec};
use crate::norms::{Regularizer, RegularizerKind, SchattenExponent};
use crate::reweight;
use crate::verify::{self, CheckReport, StiefelCase};
use crate::FORMAT_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rrpca", version, about = "Robust PCA with weighted factorized quasi-norm surrogates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic low-rank plus sparse instance.
    Gen(GenArgs),
    /// Run the solver described by a config file.
    Solve(SolveArgs),
    /// Run the randomized verification checks.
    Verify(VerifyArgs),
    /// Compare a recovery with ground truth.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rank: usize,
    /// Fraction of corrupted entries.
    #[arg(long, default_value_t = 0.0)]
    pub corrupt: f64,
    /// Corruption values are uniform on [-magnitude, magnitude].
    #[arg(long, default_value_t = 5.0)]
    pub magnitude: f64,
    /// Fraction of observed entries.
    #[arg(long, default_value_t = 1.0)]
    pub observe: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub stiefel: bool,
    #[arg(long)]
    pub factorization: bool,
    #[arg(long)]
    pub prox: bool,
    /// Trials per case; defaults to 1000 (Stiefel), 200 (factorization), 100 (prox).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict the Stiefel check to one exponent: 2, 1, 2/3 or 1/2.
    #[arg(long)]
    pub q: Option<String>,
    /// Restrict to one regularizer kind (`log` also selects the log Stiefel cases).
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub x_true: PathBuf,
    #[arg(long)]
    pub s_true: PathBuf,
    #[arg(long)]
    pub x_hat: PathBuf,
    #[arg(long)]
    pub s_hat: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
/// Output goes to `out`; diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Metrics(a) => cmd_metrics(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &RpcaError) -> i32 {
    match e {
        RpcaError::Numerical(_) => EXIT_NUMERICAL,
        RpcaError::Round { source, .. } => exit_code_for(source),
        _ => EXIT_BAD_INPUT,
    }
}

pub fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => EXIT_OK,
        Termination::MaxIter | Termination::RhoCapped => EXIT_NOT_CONVERGED,
        Termination::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RpcaError {
    RpcaError::InvalidArgument(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn manifest(lines: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let spec = SyntheticSpec {
        m: a.m,
        n: a.n,
        true_rank: a.rank,
        corruption_fraction: a.corrupt,
        corruption_magnitude: a.magnitude,
        observe_fraction: a.observe,
        seed: RngSeed(a.seed),
    };
    let truth = datagen::generate(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let files = [
        ("M.txt", format::matrix_to_string(&truth.observed)),
        ("mask.txt", format::mask_to_string(&truth.mask)),
        ("X_true.txt", format::matrix_to_string(&truth.x_true)),
        ("S_true.txt", format::matrix_to_string(&truth.s_true)),
    ];
    for (name, text) in &files {
        write_file(&a.out.join(name), text)?;
    }
    let args = format!(
        "gen --m {} --n {} --rank {} --corrupt {} --magnitude {} --observe {} --seed {}",
        a.m, a.n, a.rank, a.corrupt, a.magnitude, a.observe, a.seed
    );
    let lines = vec![
        kv("format_version", FORMAT_VERSION),
        kv("command", "gen"),
        kv("args", args),
        kv("m", a.m),
        kv("n", a.n),
        kv("rank", a.rank),
        kv("corrupt", a.corrupt),
        kv("magnitude", a.magnitude),
        kv("observe", a.observe),
        kv("seed", a.seed),
        kv("observed_entries", truth.mask.len()),
        kv("corrupted_entries", spec.corrupted_count()),
    ];
    write_file(&a.out.join("manifest.txt"), &manifest(&lines))?;
    let _ = writeln!(out, "wrote instance to {}", a.out.display());
    Ok(EXIT_OK)
}

pub const HISTORY_HEADER: &str =
    "# round iter rho res_a_hat res_b_hat res_ab_x res_x_s_m lagrangian y1_spectral y3_frobenius";

fn history_line(round: usize, r: &IterationRecord) -> String {
    format!(
        "{round} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        r.iter,
        r.rho,
        r.residuals[0],
        r.residuals[1],
        r.residuals[2],
        r.residuals[3],
        r.lagrangian,
        r.y1_spectral,
        r.y3_frobenius
    )
}

/// History file contents for a sequence of rounds.
pub fn history_text(rounds: &[SolveReport]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for (k, rep) in rounds.iter().enumerate() {
        for r in &rep.history {
            s.push_str(&history_line(k, r));
            s.push('\n');
        }
    }
    s
}

fn weights_text(weights: &[WeightSpec]) -> String {
    let mut s = String::from("# one line per round\n");
    for w in weights {
        let row: Vec<String> = w.as_slice().iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn metric_lines(m: &RecoveryMetrics) -> Vec<(String, String)> {
    vec![
        kv("metrics.x_rel_error", format!("{:e}", m.x_rel_error)),
        kv("metrics.s_rel_error", format!("{:e}", m.s_rel_error)),
        kv("metrics.x_rank", m.x_rank),
        kv("metrics.support_precision", m.support_precision),
        kv("metrics.support_recall", m.support_recall),
    ]
}

fn truth_from_files(x_true: &Path, s_true: &Path) -> Result<GroundTruth> {
    let x_true = format::read_matrix(x_true)?;
    let s_true = format::read_matrix(s_true)?;
    if x_true.shape() != s_true.shape() {
        return Err(RpcaError::DimensionMismatch("X_true and S_true shapes differ".into()));
    }
    let (m, n) = x_true.shape();
    Ok(GroundTruth {
        observed: &x_true + &s_true,
        mask: ObservationMask::full(m, n),
        x_true,
        s_true,
    })
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let observed = format::read_matrix(&cfg.observed).map_err(|e| RpcaError::InvalidArgument(format!("config key 'observed': {e}")))?;
    let (m, n) = observed.shape();
    let mask = match &cfg.mask {
        Some(p) => format::read_mask(p).map_err(|e| RpcaError::InvalidArgument(format!("config key 'mask': {e}")))?,
        None => ObservationMask::full(m, n),
    };
    if cfg.rank > m.min(n) {
        return Err(RpcaError::InvalidArgument(format!(
            "config key 'rank': {} exceeds min(rows, cols) = {}",
            cfg.rank,
            m.min(n)
        )));
    }
    let lambda = cfg.lambda.unwrap_or_else(|| admm::default_lambda(m, n));
    let problem = RpcaProblem::new(observed, mask, lambda, cfg.rank, WeightSpec::identity(cfg.rank), cfg.regularizer)
        .map_err(|e| RpcaError::InvalidArgument(format!("config key 'mask': {e}")))?;

    let rw = reweight::reweighted_solve(&problem, &cfg.reweight)?;
    let report = &rw.report;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let dir = &cfg.output_dir;
    write_file(&dir.join("X_hat.txt"), &format::matrix_to_string(&report.x_hat))?;
    write_file(&dir.join("S_hat.txt"), &format::matrix_to_string(&report.s_hat))?;
    write_file(&dir.join("weights.txt"), &weights_text(&rw.weights))?;
    write_file(&dir.join("history.txt"), &history_text(&rw.rounds))?;

    let mut lines = vec![
        kv("format_version", FORMAT_VERSION),
        kv("command", "solve"),
        kv("observed", cfg.observed.display()),
        kv("mask", cfg.mask.as_ref().map_or("full".to_string(), |p| p.display().to_string())),
        kv("rows", m),
        kv("cols", n),
    ];
    lines.extend(cfg.parameter_lines(lambda));
    lines.push(kv("termination", report.termination.name()));
    lines.push(kv("iterations", report.iterations));
    lines.push(kv(
        "total_iterations",
        rw.rounds.iter().map(|r| r.iterations).sum::<usize>(),
    ));
    if let Some(res) = report.final_residuals() {
        let r: Vec<String> = res.iter().map(|v| format!("{v:e}")).collect();
        lines.push(kv("final_residuals", r.join(" ")));
    }
    if let (Some(x), Some(s)) = (&cfg.x_true, &cfg.s_true) {
        let truth = truth_from_files(x, s)?;
        let metrics = datagen::recovery_metrics(&truth, &report.x_hat, &report.s_hat)?;
        lines.extend(metric_lines(&metrics));
    }
    write_file(&dir.join("manifest.txt"), &manifest(&lines))?;

    let _ = writeln!(
        out,
        "{} after {} iterations; outputs in {}",
        report.termination.name(),
        report.iterations,
        dir.display()
    );
    if let Some(msg) = &report.failure {
        let _ = writeln!(out, "failure: {msg}");
    }
    Ok(exit_code(report.termination))
}

pub const STIEFEL_DIMS: (usize, usize) = (12, 5);
pub const FACTORIZATION_DIMS: (usize, usize, usize) = (12, 10, 4);

/// Checkers selected by the verify flags.
pub fn verify_reports(a: &VerifyArgs) -> Result<Vec<CheckReport>> {
    let any = a.stiefel || a.factorization || a.prox;
    let (do_stiefel, do_fact, do_prox) = if a.all || !any {
        (true, true, true)
    } else {
        (a.stiefel, a.factorization, a.prox)
    };
    let kind = a.kind.as_deref().map(RegularizerKind::parse).transpose()?;
    let q = a.q.as_deref().map(SchattenExponent::parse).transpose()?;
    let seed = RngSeed(a.seed);
    let mut reports = Vec::new();

    if do_stiefel {
        let cases: Vec<StiefelCase> = verify::default_stiefel_cases()
            .into_iter()
            .filter(|c| match (c, q, kind) {
                (StiefelCase::Schatten(e), Some(q), _) => *e == q,
                (StiefelCase::Log { .. }, Some(_), _) => false,
                (StiefelCase::Log { .. }, None, Some(k)) => k == RegularizerKind::WeightedLog,
                (StiefelCase::Schatten(_), None, Some(k)) => k != RegularizerKind::WeightedLog,
                _ => true,
            })
            .collect();
        let trials = a.trials.unwrap_or(1000);
        for case in cases {
            reports.push(verify::check_stiefel_inequality(STIEFEL_DIMS.0, STIEFEL_DIMS.1, case, trials, seed)?);
        }
    }
    if do_fact {
        let kinds: Vec<RegularizerKind> = match kind {
            Some(k) => vec![k],
            None => RegularizerKind::ALL.to_vec(),
        };
        let trials = a.trials.unwrap_or(200);
        let (m, n, r) = FACTORIZATION_DIMS;
        for k in kinds {
            reports.push(verify::check_factorization(m, n, r, Regularizer::of_kind(k), trials, seed)?);
        }
    }
    if do_prox {
        reports.extend(verify::check_prox_oracles(a.trials.unwrap_or(100), seed)?);
    }
    Ok(reports)
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let _ = writeln!(out, "# name trials violations worst_slack");
    let reports = verify_reports(a)?;
    for r in &reports {
        let _ = writeln!(out, "{r}");
    }
    Ok(if reports.iter().all(CheckReport::passed) { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_metrics(a: &MetricsArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let truth = truth_from_files(&a.x_true, &a.s_true)?;
    let x_hat = format::read_matrix(&a.x_hat)?;
    let s_hat = format::read_matrix(&a.s_hat)?;
    let m = datagen::recovery_metrics(&truth, &x_hat, &s_hat)?;
    let _ = write!(out, "{}", manifest(&metric_lines(&m)));
    Ok(EXIT_OK)
}
