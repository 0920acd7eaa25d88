pub mod ansatz;
pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod models;
pub mod numerics;
pub mod observables;
pub mod optimizer;
pub mod reference;
pub mod runner;
pub mod sampler;

pub use error::{Error, Result};
