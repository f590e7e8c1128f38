//! Invariant features of targets and the matching statistics of measurements.
//!
//! 1D lag arrays over `{−2n, …, 2n − 1}²` and 2D lag/frequency tensors over
//! `𝒳 × 𝒳` use the wrapped storage of [`crate::lattice`]; a 1D pair
//! `(x₁, x₂)` lives at `wrap(x₁)·4n + wrap(x₂)` and a 2D pair at
//! `wrap2(x₁)·(4n)² + wrap2(x₂)`.

mod autocorr2d;
mod bins;
mod oned;
mod steerable;

pub use autocorr2d::{autocorr3_2d, autocorr3_2d_masked, in_support_2d};
pub use bins::{bin_key, bin_map, BinKey, BinMap, DEFAULT_B1, DEFAULT_B2};
pub use oned::{auto2_u, auto3_v, autocorr3_1d, lag_index_1d, mean_t, Invariant1D};
pub use steerable::{s_hat_truth, AngularDesign, ForwardModel, InvariantTensor2D, OrbitTable};
