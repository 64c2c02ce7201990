pub mod analysis;
pub mod error;
pub mod field;
pub mod fbm_kernel;
pub mod harmonics;
pub mod quadrature;
pub mod spectral_sampler;

pub use error::{Error, Result};
