//! Fixtures shared by the criterion benches.

use hillspec_core::expansion::SourceFunction;
use hillspec_core::{Complex64 as C64, Potential};

/// q = 2cos 2πx.
pub fn mathieu() -> Potential {
    Potential::fourier(&[(1, C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.0))]).expect("finite")
}

/// q = e^{2πix}, whose band edges are all spectral singularities.
pub fn gasymov() -> Potential {
    Potential::fourier(&[(1, C64::new(1.0, 0.0))]).expect("finite")
}

/// A genuinely non-self-adjoint potential with both Fourier directions.
pub fn complex() -> Potential {
    Potential::fourier(&[(1, C64::new(0.5, 0.5)), (-1, C64::new(0.1, 0.0))]).expect("finite")
}

pub fn bump() -> SourceFunction {
    SourceFunction::bump(0.0, 1.0)
}
