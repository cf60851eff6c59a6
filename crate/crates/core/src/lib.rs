pub mod error;
pub mod expm;
pub mod fockspace;
pub mod liouvillian;
pub mod model;
pub mod perturbation;
pub mod spectral;

pub use error::{Error, Result};
