//! Recovery of targets from invariant estimates: closed-form bispectrum
//! inversion in 1D and least-squares fitting of steerable coefficients in 2D.

mod bfgs;
mod cost;
mod oned;
mod twod;

pub use bfgs::{minimize, MinimizeReport, Objective, OptimizerOptions, Termination};
pub use cost::{cost_binned, cost_unbinned, grad_binned, grad_unbinned, BinnedTarget, UnbinnedTarget};
pub use oned::{
    align_error_1d, align_error_2d, bispectrum_direct, bispectrum_from_v, invert_bispectrum, Alignment2D, Bispectrum1D,
    PhaseMethod,
};
pub use twod::{recover_2d, RecoveryReport, RunSummary, Target2D};
