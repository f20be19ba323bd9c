//! Spectral analysis of Hill operators -y'' + q y with complex 1-periodic q.

pub mod discriminant;
pub mod eigen;
pub mod expansion;
pub mod error;
pub mod ode;
pub mod oracle;
pub mod potential;
pub mod quad;
pub mod roots;
pub mod singular;
pub mod spectrum;
mod tableau;

pub use error::{HillError, Result};
pub use num_complex::Complex64;
pub use ode::{FundamentalSolution, Monodromy, MonodromyJet};
pub use potential::Potential;
