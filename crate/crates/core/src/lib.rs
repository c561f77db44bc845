//! Numerics for n-fold convolutions of exponential radial densities and the
//! compound Poisson measures built from them.

pub mod density;
pub mod error;
pub mod oracle;
pub mod poisson;
pub mod aux;
pub mod config;
pub mod constants;
pub mod quad;
pub mod records;
pub mod sampler;
pub mod suites;
pub mod special;
pub mod table;
pub mod wright;

pub use density::{DensitySpec, Variant};
pub use error::{Error, Result};
pub use constants::ConstantsBundle;
pub use records::BoundCheckRecord;
pub use wright::{WrightEval, WrightRegime};
