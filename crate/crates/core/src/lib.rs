//! Spectral solvers for nonlinear Schrödinger equations in a strong magnetic
//! field with a confining potential in one direction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod coupling;
pub mod error;
pub mod field;
pub mod grid;
pub mod hermite;
pub mod propagate;
pub mod snapshot;
pub mod solvers;

pub use averaging::{
    f_av, identity_residual, identity_residual_sup, Averager, IdentityAccumulator, ThetaRule,
};
pub use coupling::{Coupling, CouplingExpr};
pub use error::{Error, Result};
pub use field::{pointwise_nonlin, random_field, Nonlinearity, SpectralField};
pub use grid::Grid;
pub use hermite::HermiteBasis;
pub use propagate::{flow_full_linear, flow_h, flow_y, DisplacementTable};
pub use solvers::{
    compare_to_effective, filter_trajectory, polarized_exact, solve_effective, solve_full,
    ModelParams, StepPlan, Trajectory,
};

/// The guide's chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/basis.md")]
    mod basis {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/propagators.md")]
    mod propagators {}
    #[doc = include_str!("../../../book/src/averaging.md")]
    mod averaging {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/couplings.md")]
    mod couplings {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
