//! Physical constants (CODATA, SI units).

use std::f64::consts::PI;

/// Magnetic constant (H/m), fixed at the conventional 4π×10⁻⁷.
pub const MU_0: f64 = 4.0e-7 * PI;

/// μ0 / 4π (H/m).
pub const MU0_OVER_4PI: f64 = 1.0e-7;

/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Magnetic flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Read-only bundle of the constants above, for callers that want them as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub mu0: f64,
    pub mu_b: f64,
    pub phi0: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        mu0: MU_0,
        mu_b: BOHR_MAGNETON,
        phi0: FLUX_QUANTUM,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}
