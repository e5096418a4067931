use super::assembly::Assembler;
use super::linear::{gmres_solve, DirectSolver};
use super::{DiscreteSolution, ProblemData};
use crate::error::{Error, IterationLog, Result};
use crate::femspace::Discretization;

/// How Newton corrections are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearStrategy {
    /// Sparse LU below `krylov_threshold` unknowns, preconditioned GMRES above.
    Auto,
    Direct,
    Krylov,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub max_iter: usize,
    /// Armijo backtracking on `‖F‖₂`.
    pub line_search: bool,
    pub linear: LinearStrategy,
    pub krylov_threshold: usize,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Compares the Jacobian with central differences at every iterate.
    pub check_jacobian: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tau_abs: 1e-8,
            tau_rel: 1e-10,
            max_iter: 50,
            line_search: false,
            linear: LinearStrategy::Auto,
            krylov_threshold: 10_000,
            gmres_restart: 80,
            gmres_max_iter: 2000,
            check_jacobian: false,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_abs >= 0.0 && self.tau_rel >= 0.0 && (self.tau_abs > 0.0 || self.tau_rel > 0.0)) {
            return Err(Error::Config("Newton tolerances must be nonnegative and not both zero".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("newton max_iter must be >= 1".into()));
        }
        if self.gmres_restart == 0 {
            return Err(Error::Config("gmres_restart must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub solution: DiscreteSolution,
    pub log: IterationLog,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the discrete problem by Newton's method.
pub fn newton_solve(initial: &DiscreteSolution, data: &ProblemData, disc: &Discretization, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    opts.validate()?;
    let asm = Assembler::new(disc, data)?;
    let mut x = initial.to_vector();
    let mut r = asm.residual(&x)?;
    let mut norm = norm2(&r);
    let mut log = IterationLog { residual_norms: vec![norm], ..Default::default() };
    let tol = opts.tau_abs.max(opts.tau_rel * norm);
    let krylov = match opts.linear {
        LinearStrategy::Auto => asm.len() > opts.krylov_threshold,
        LinearStrategy::Direct => false,
        LinearStrategy::Krylov => true,
    };
    let mut direct = DirectSolver::default();
    while norm > tol {
        if log.iterations() >= opts.max_iter {
            return Err(Error::NonConvergence { level: None, log });
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (dx, inner) = if krylov {
            let a = asm.assemble_with_blocks(&x)?;
            let jac = a.jacobian.expect("requested");
            if opts.check_jacobian {
                check_jacobian(&asm, &x, &jac)?;
            }
            let blocks = a.blocks.expect("requested");
            match gmres_solve(&jac, &rhs, &blocks, opts.gmres_restart, opts.gmres_max_iter) {
                Ok((dx, stats)) => (dx, stats.iterations),
                Err(Error::Solver(_)) => (direct.solve(&jac, &rhs)?, 1),
                Err(e) => return Err(e),
            }
        } else {
            let jac = asm.assemble(&x, true)?.jacobian.expect("requested");
            if opts.check_jacobian {
                check_jacobian(&asm, &x, &jac)?;
            }
            (direct.solve(&jac, &rhs)?, 1)
        };
        let mut t = 1.0;
        let mut trial: Vec<f64>;
        let mut r_new;
        let mut n_new;
        loop {
            trial = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            r_new = asm.residual(&trial)?;
            n_new = norm2(&r_new);
            if !opts.line_search || n_new <= (1.0 - 1e-4 * t) * norm || t < 1e-3 {
                break;
            }
            t *= 0.5;
        }
        x = trial;
        r = r_new;
        norm = n_new;
        log.residual_norms.push(norm);
        log.linear_iterations.push(inner);
        log.step_lengths.push(t);
        if !norm.is_finite() {
            return Err(Error::NonConvergence { level: None, log });
        }
    }
    Ok(NewtonOutcome { solution: DiscreteSolution::from_vector(disc, &x)?, log })
}

/// Central-difference check of `J d` for a deterministic direction `d`.
fn check_jacobian(asm: &Assembler<'_>, x: &[f64], jac: &super::CscMatrix) -> Result<()> {
    let n = x.len();
    // A fixed quasi-random direction.
    let d: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5).collect();
    let scale = 1e-6 * (1.0 + norm2(x) / (n as f64).sqrt());
    let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + scale * b).collect();
    let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - scale * b).collect();
    let (rp, rm) = (asm.residual(&xp)?, asm.residual(&xm)?);
    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * scale)).collect();
    let jd = jac.matvec(&d);
    let err = norm2(&jd.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
    let rel = err / norm2(&jd).max(f64::MIN_POSITIVE);
    if rel > 1e-6 {
        return Err(Error::Solver(format!("Jacobian disagrees with finite differences (relative error {rel:.3e})")));
    }
    Ok(())
}
