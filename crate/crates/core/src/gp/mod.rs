//! Gaussian-process fields with a compactly supported kernel, location-error
//! marginalisation and mixture moments.

pub mod field;
pub mod kernel;
pub mod mixture;
pub mod srom;

pub use field::{GaussianField, Observation};
pub use kernel::{assemble_covariance, prior_kernel, taper, CovarianceMode, Kernel, KernelParams};
pub use mixture::mixture_moments;
pub use srom::{marginalize_location, LocationSrom};
