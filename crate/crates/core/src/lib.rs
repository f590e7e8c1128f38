pub mod basis;
pub mod bessel;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod invariants;
pub mod io;
pub mod lattice;
pub mod model;
pub mod recover;
pub mod selftest;

pub use error::{Error, Result};
