use std::fmt;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. `t < 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or unsupported configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mesh connectivity is not a conforming triangulation.
    #[error("topology error: {message} (edge {edge:?})")]
    Topology { message: String, edge: [usize; 2] },

    /// Degenerate or inverted cell geometry.
    #[error("geometry error in cell {cell}: {message}")]
    Geometry { cell: usize, message: String },

    /// Objects built on different meshes or incompatible spaces were combined.
    #[error("space mismatch: {0}")]
    Mismatch(String),

    /// A non-finite value appeared during assembly.
    #[error("non-finite value in {term} on cell {cell}")]
    NonFinite { cell: usize, term: &'static str },

    /// Linear solver failure (singular matrix, residual contract missed).
    #[error("linear solver error: {0}")]
    Solver(String),

    /// Newton iteration did not reach the tolerance.
    #[error("Newton iteration did not converge{}: {log}", level.map(|l| format!(" on level {l}")).unwrap_or_default())]
    NonConvergence { level: Option<usize>, log: IterationLog },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Residual history of a Newton solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationLog {
    /// `residual_norms[0]` is the initial residual; entry `i` follows update `i`.
    pub residual_norms: Vec<f64>,
    /// Inner linear-solver iterations per Newton step (1 for direct solves).
    pub linear_iterations: Vec<usize>,
    /// Damping factor used for each Newton update.
    pub step_lengths: Vec<f64>,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_norms.last().copied()
    }
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} iterations, residuals [", self.iterations())?;
        for (i, r) in self.residual_norms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{r:.3e}")?;
        }
        write!(f, "]")
    }
}
