//! Command-line front end: configuration, the `study`, `solve` and `check`
//! commands, and the CSV/VTK writers.

pub mod config;
pub mod output;

use std::io::Write;
use std::time::Instant;

use ldgpflow::checks::{constitutive_suite, operator_suite};
use ldgpflow::system::reconstruct_auxiliary;
use ldgpflow::verification::{compute_errors, patch_test, run_convergence_study_with, solve_level, ManufacturedSolution, StudyReport};

pub use config::{Mode, RunConfig};
pub use output::{emit_table, emit_vtk, Table, TableRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(ldgpflow::Error),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// Some property check failed.
    #[error("{0} check(s) failed")]
    Check(usize),
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(ldgpflow::Error::Io(_)) => 4,
            CliError::Solver(ldgpflow::Error::Config(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) | CliError::Parse(_) => 4,
            CliError::Check(_) => 1,
        }
    }

    pub(crate) fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Parse(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

impl From<ldgpflow::Error> for CliError {
    fn from(e: ldgpflow::Error) -> Self {
        match e {
            ldgpflow::Error::Config(m) => CliError::Config(m),
            ldgpflow::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

/// Rejects a malformed `LDGPFLOW_THREADS`.
pub fn check_thread_env() -> Result<(), CliError> {
    match std::env::var("LDGPFLOW_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(CliError::Config(format!("LDGPFLOW_THREADS = {v:?}: expected a positive integer"))),
        },
        Err(_) => Ok(()),
    }
}

/// Runs the refinement study and writes the table. Progress goes to `log`.
pub fn run_study(cfg: &RunConfig, log: &mut dyn Write) -> Result<StudyReport, CliError> {
    cfg.validate(Mode::Study)?;
    let start = Instant::now();
    let report = run_convergence_study_with(&cfg.study, |l| {
        let e = &l.errors;
        let _ = writeln!(
            log,
            "level {}: h {:.4e}, e_L {:.4e}, e_jump {:.4e}, e_S {:.4e}, e_q {:.4e}, {} Newton iterations, {:.1} s",
            e.level,
            e.h,
            e.e_l,
            e.e_jump,
            e.e_s,
            e.e_q,
            e.newton_iterations,
            start.elapsed().as_secs_f64()
        );
    })?;
    emit_table(&report, &cfg.table)?;
    Ok(report)
}

/// Solves one level, writes the VTK file and returns a summary line.
pub fn run_solve(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate(Mode::Solve)?;
    let (disc, solution, data, exact, log) = solve_level(&cfg.study, cfg.level)?;
    let aux = reconstruct_auxiliary(&solution, &data, &disc)?;
    let e = compute_errors(&solution, &aux, &exact, &disc)?;
    emit_vtk(&solution, &aux, &disc, &cfg.vtk)?;
    Ok(format!(
        "level {}: {} cells, {} Newton iterations, e_L {:.4e}, e_jump {:.4e}, e_S {:.4e}, e_q {:.4e}, wrote {}",
        cfg.level,
        disc.num_cells(),
        log.iterations(),
        e.e_l,
        e.e_jump,
        e.e_s,
        e.e_q,
        cfg.vtk.display()
    ))
}

/// Runs the property suites, printing one line per check.
pub fn run_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate(Mode::Check)?;
    let mut failed = 0;
    let mut line = |ok: bool, text: String| {
        failed += usize::from(!ok);
        let _ = writeln!(out, "[{}] {text}", if ok { "PASS" } else { "FAIL" });
    };
    let c = constitutive_suite(cfg.seed, 10_000, 1_000)?;
    line(c.min_monotonicity >= -1e-12, format!("monotonicity: min {:.2e} over {} pairs", c.min_monotonicity, c.monotonicity_pairs));
    line(c.max_jacobian_error <= 1e-6, format!("stress Jacobian: max relative error {:.2e}", c.max_jacobian_error));
    line(c.max_roundtrip_error <= 1e-10, format!("conjugate round trip: max error {:.2e}", c.max_roundtrip_error));
    let o = operator_suite(cfg.seed, cfg.study.n0, 2, cfg.samples, cfg.study.p)?;
    line(o.lifting_adjointness <= 1e-11, format!("lifting adjointness: {:.2e} over {} fields", o.lifting_adjointness, o.lifting_samples));
    line(o.gradient_consistency <= 1e-12, format!("DG gradient of conforming fields: {:.2e}", o.gradient_consistency));
    line(o.divergence_identity <= 1e-11, format!("divergence identity: {:.2e}", o.divergence_identity));
    line(o.korn_ratios[1] <= 1.1 * o.korn_ratios[0], format!("Korn ratios: {:.4?}", o.korn_ratios));
    line(
        o.norm_equivalence_ratios[1] <= 1.1 * o.norm_equivalence_ratios[0],
        format!("norm equivalence ratios: {:.4?}", o.norm_equivalence_ratios),
    );
    line(
        o.projection_idempotence <= 1e-12 && o.projection_symmetry <= 1e-12,
        format!("projection: idempotence {:.2e}, symmetry {:.2e}", o.projection_idempotence, o.projection_symmetry),
    );
    let p = patch_test(cfg.study.n0, 1)?;
    line(
        p.final_residual <= 1e-9 && p.solution_error <= 1e-9 && p.newton_iterations == 1,
        format!("patch test: residual {:.2e}, error {:.2e}, {} iteration(s)", p.final_residual, p.solution_error, p.newton_iterations),
    );
    match failed {
        0 => Ok(()),
        n => Err(CliError::Check(n)),
    }
}

/// `ρ p'/2` for the configured study.
pub fn reference_rate(cfg: &RunConfig) -> Result<f64, CliError> {
    let law = ldgpflow::constitutive::StressLaw::from_parts(cfg.study.p, cfg.study.delta)?;
    Ok(ManufacturedSolution::new(law, cfg.study.rho)?.expected_rate())
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod guide_cli {}
