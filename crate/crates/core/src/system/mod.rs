//! The discrete problem: residual and Jacobian assembly, Newton's method,
//! linear solves and recovery of the auxiliary LDG variables.
//!
//! Unknowns are ordered as velocity coefficients (the broken vector space
//! numbering), then pressure nodes, then one Lagrange multiplier enforcing
//! `∫_Ω q_h = 0`.

mod assembly;
mod auxiliary;
pub mod linear;
mod newton;

use std::fmt;
use std::sync::Arc;

pub use assembly::{Assembler, Assembled};
pub use auxiliary::{prolongate, reconstruct_auxiliary, AuxiliaryFields};
pub use linear::{linear_solve, CscMatrix};
pub use newton::{newton_solve, LinearStrategy, NewtonOptions, NewtonOutcome};

use crate::constitutive::{StressLaw, Tensor2};
use crate::error::{Error, Result};
use crate::femspace::{Discretization, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    /// Drops both convective terms.
    PStokes,
    PNavierStokes,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::PStokes => "p-stokes",
            Model::PNavierStokes => "p-navier-stokes",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "p-stokes" | "pstokes" | "stokes" => Ok(Model::PStokes),
            "p-navier-stokes" | "pnavierstokes" | "navier-stokes" => Ok(Model::PNavierStokes),
            _ => Err(Error::Config(format!("unknown model {s:?} (expected p-stokes or p-navier-stokes)"))),
        }
    }
}

pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn([f64; 2]) -> Tensor2 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Coefficients and data of the discrete problem.
#[derive(Clone)]
pub struct ProblemData {
    pub law: StressLaw,
    /// Penalty parameter `α > 0`.
    pub alpha: f64,
    pub model: Model,
    /// Momentum source `b`.
    pub body_force: VectorFn,
    /// Tensor source `G`, tested against `G_h z`.
    pub tensor_force: TensorFn,
    /// Prescribed divergence `g`.
    pub divergence: ScalarFn,
    /// Extension `v*` of the boundary values.
    pub boundary: VectorFn,
    /// `∇v*`.
    pub boundary_gradient: TensorFn,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("law", &self.law)
            .field("alpha", &self.alpha)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// All data zero.
    pub fn homogeneous(law: StressLaw, alpha: f64, model: Model) -> Result<Self> {
        let data = Self {
            law,
            alpha,
            model,
            body_force: Arc::new(|_| [0.0, 0.0]),
            tensor_force: Arc::new(|_| Tensor2::ZERO),
            divergence: Arc::new(|_| 0.0),
            boundary: Arc::new(|_| [0.0, 0.0]),
            boundary_gradient: Arc::new(|_| Tensor2::ZERO),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// `∫_Ω g − ∫_∂Ω v*·n`, which must vanish for a solvable problem.
    pub fn compatibility_defect(&self, disc: &Discretization) -> f64 {
        let mut s = 0.0;
        for cell in 0..disc.num_cells() {
            let geo = &disc.geometry[cell];
            for (xi, w) in disc.rule.points.iter().zip(&disc.rule.weights) {
                s += w * geo.det * (self.divergence)(geo.map(*xi));
            }
        }
        for (f, face) in disc.faces.faces.iter().enumerate() {
            if !face.is_boundary() {
                continue;
            }
            for (q, w) in disc.face_rule.weights.iter().enumerate() {
                let v = (self.boundary)(disc.face_point(f, q));
                s -= w * face.length * (v[0] * face.normal[0] + v[1] * face.normal[1]);
            }
        }
        s
    }
}

/// Velocity, pressure and the multiplier of the mean constraint.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub velocity: Field,
    pub pressure: Field,
    pub multiplier: f64,
}

impl DiscreteSolution {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            velocity: Field::zeros(disc.velocity.clone()),
            pressure: Field::zeros(disc.pressure.clone()),
            multiplier: 0.0,
        }
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.velocity.coeffs().len() + self.pressure.coeffs().len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend_from_slice(self.velocity.coeffs());
        x.extend_from_slice(self.pressure.coeffs());
        x.push(self.multiplier);
        x
    }

    pub fn from_vector(disc: &Discretization, x: &[f64]) -> Result<Self> {
        let nv = disc.velocity.ndofs();
        let np = disc.pressure.ndofs();
        if x.len() != nv + np + 1 {
            return Err(Error::Mismatch(format!("state vector has length {}, expected {}", x.len(), nv + np + 1)));
        }
        Ok(Self {
            velocity: Field::new(disc.velocity.clone(), x[..nv].to_vec())?,
            pressure: Field::new(disc.pressure.clone(), x[nv..nv + np].to_vec())?,
            multiplier: x[nv + np],
        })
    }

    /// `⟨q_h⟩_Ω`.
    pub fn pressure_mean(&self, disc: &Discretization) -> f64 {
        let c = disc.pressure_integrals();
        let area: f64 = c.iter().sum();
        c.iter().zip(self.pressure.coeffs()).map(|(c, q)| c * q).sum::<f64>() / area
    }
}

/// Residual of the discrete problem at `state`.
pub fn assemble_residual(state: &DiscreteSolution, data: &ProblemData, disc: &Discretization) -> Result<Vec<f64>> {
    let asm = Assembler::new(disc, data)?;
    Ok(asm.assemble(&state.to_vector(), false)?.residual)
}

/// Jacobian of the discrete problem at `state`.
pub fn assemble_jacobian(state: &DiscreteSolution, data: &ProblemData, disc: &Discretization) -> Result<CscMatrix> {
    let asm = Assembler::new(disc, data)?;
    Ok(asm.assemble(&state.to_vector(), true)?.jacobian.expect("requested"))
}

/// Worker threads for assembly: `LDGPFLOW_THREADS` if set to a positive
/// integer, otherwise the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("LDGPFLOW_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
