//! Local discontinuous Galerkin discretization of the steady p-Stokes and
//! p-Navier–Stokes equations on triangulations of the square, with a
//! manufactured-solution convergence harness.

// Index loops mirror the tensor notation; `!(x > 0.0)` deliberately catches NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod constitutive;
pub mod dgops;
pub mod error;
pub mod femspace;
pub mod mesh;
pub mod nfunctions;
pub mod system;
pub mod verification;

pub use error::{Error, IterationLog, Result};

// Compiles and runs the guide's snippets as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/nfunctions.md")]
    mod nfunctions {}
    #[doc = include_str!("../../../book/src/constitutive.md")]
    mod constitutive {}
    #[doc = include_str!("../../../book/src/mesh.md")]
    mod mesh {}
    #[doc = include_str!("../../../book/src/dg.md")]
    mod dg {}
    #[doc = include_str!("../../../book/src/system.md")]
    mod system {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
