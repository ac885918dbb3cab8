//! Numerical laboratory for the critical p-Laplace equation
//! -Δ_p u = κ u^{p*-1} on R^n with radial data.

pub mod bubble;
pub mod deficit;
pub mod envelope;
pub mod error;
pub mod extraction;
pub mod field;
pub mod grid;
pub mod jet;
pub mod kappa;
pub mod lab;
pub mod norms;
pub mod optimize;
pub mod params;
pub mod pfunction;
pub mod quad;

pub use bubble::{Bubble, SobolevLevel, TalentiElement};
pub use error::{LabError, Result};
pub use field::{Decay, RadialField};
pub use kappa::KappaField;
pub use params::Params;
pub use quad::{IntegralResult, QuadConfig, TailPolicy};
