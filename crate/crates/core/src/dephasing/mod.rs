//! Spin-echo dephasing under 1/f flux noise and the spectroscopy pipeline
//! that turns a qubit spectrum plus echo traces into √A_Φ.
//!
//! Flux is measured in units of Φ₀ throughout this module, so A_Φ is in Φ₀²
//! and spectrum slopes are in rad/s per Φ₀.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

mod fit;
pub mod io;
mod synth;

pub use fit::{
    extract_noise_amplitude, fit_echo_decay, fit_hyperbola, spectrum_slope, AmplitudeExtraction,
    BranchEstimate, DecayFit, DecayTrace, DephasingPair, Estimate, ExtractionConfig, HyperbolaFit,
    SpectrumPoint,
};
pub use synth::{
    run_pipeline, synthesize_qubit_dataset, PipelineResult, SamplingPlan, SynthesisTruth,
    SynthesizedDataset, TraceInput, TraceResult,
};

/// Spin-echo filter function `(sin²(ωt/4) / (ωt/4))²`.
pub fn echo_filter_function(omega: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "echo time must be positive, got {t}"
        )));
    }
    Ok(filter_of_phase(omega * t / 4.0))
}

fn filter_of_phase(u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let s = u.sin();
    let v = s * s / u;
    v * v
}

/// ∫₀^∞ (dω/ω) g_E(ω, t), which equals ln 2 for every t.
///
/// With u = ωt/4 the integrand is sin⁴u/u³. Panels of width π/2 are summed
/// up to `u = 4000π`; the remainder uses the mean of sin⁴ (3/8), giving a
/// tail of 3/(16U²).
pub fn filter_log_integral(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "echo time must be positive, got {t}"
        )));
    }
    let gl = GaussLegendre::new(12);
    let panels = 8000;
    let h = 0.5 * PI;
    let body: f64 = (0..panels)
        .map(|k| {
            let a = k as f64 * h;
            gl.integrate(a, a + h, |u| filter_of_phase(u) / u.max(f64::MIN_POSITIVE))
        })
        .sum();
    let upper = panels as f64 * h;
    Ok(body + 3.0 / (16.0 * upper * upper))
}

/// Echo coherence `exp(−t² slope² A_Φ ln 2)`.
pub fn echo_envelope(t: f64, a_phi: f64, slope: f64) -> f64 {
    (-t * t * slope * slope * a_phi * LN_2).exp()
}

/// Γ_φ = √(A_Φ ln 2)·|slope| (s⁻¹).
pub fn pure_dephasing_rate(a_phi: f64, slope: f64) -> Result<f64> {
    if !(a_phi >= 0.0) {
        return Err(Error::Domain(format!(
            "A_Φ must be non-negative, got {a_phi}"
        )));
    }
    Ok((a_phi * LN_2).sqrt() * slope.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn filter_values() {
        assert_eq!(echo_filter_function(0.0, 1e-6).unwrap(), 0.0);
        assert!(echo_filter_function(1e-3, 1e-6).unwrap() < 1e-18);
        assert_relative_eq!(
            echo_filter_function(2.0 * PI / 1e-6, 1e-6).unwrap(),
            4.0 / (PI * PI),
            max_relative = 1e-12
        );
        assert!(echo_filter_function(1.0, 0.0).is_err());
    }

    #[test]
    fn filter_maximum() {
        // scan ωt over (0, 12] on a fine grid
        let (mut best, mut arg) = (0.0, 0.0);
        for i in 1..=120_000 {
            let x = i as f64 * 1e-4;
            let g = echo_filter_function(x, 1.0).unwrap();
            if g > best {
                best = g;
                arg = x;
            }
        }
        assert!((best - 0.525).abs() < 1e-3, "max {best}");
        assert!((arg - 4.662).abs() < 1e-2, "at {arg}");
    }

    #[test]
    fn log_integral_is_ln2() {
        for t in [1e-6, 10e-6, 100e-6] {
            assert!((filter_log_integral(t).unwrap() - LN_2).abs() < 1e-6);
        }
    }

    #[test]
    fn dephasing_rate_reference() {
        let a = 2.5e-6f64.powi(2);
        let r = pure_dephasing_rate(a, 2.0 * PI * 1e9).unwrap();
        assert_relative_eq!(r, 1.308e4, max_relative = 1e-3);
        assert_eq!(pure_dephasing_rate(a, 0.0).unwrap(), 0.0);
        let r2 = pure_dephasing_rate(4.0 * a, 2.0 * PI * 1e9).unwrap();
        assert_relative_eq!(r2, 2.0 * r, max_relative = 1e-12);
        assert!(pure_dephasing_rate(-1.0, 1.0).is_err());
    }

    #[test]
    fn envelope_limits() {
        assert_eq!(echo_envelope(0.0, 1e-12, 1e10), 1.0);
        assert_eq!(echo_envelope(1e-6, 1e-12, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn envelope_matches_rate(t in 0.0f64..1e-5, amp in 1e-7f64..1e-5, slope in -1e12f64..1e12) {
            let a = amp * amp;
            let g = pure_dephasing_rate(a, slope).unwrap();
            let e = echo_envelope(t, a, slope);
            prop_assert!((e - (-(g * t).powi(2)).exp()).abs() < 1e-12);
        }

        #[test]
        fn envelope_monotone(t in 0.0f64..1e-5, dt in 0.0f64..1e-6, amp in 1e-7f64..1e-5, slope in 0.0f64..1e12, ds in 0.0f64..1e11) {
            let a = amp * amp;
            prop_assert!(echo_envelope(t + dt, a, slope) <= echo_envelope(t, a, slope));
            prop_assert!(echo_envelope(t, a, -(slope + ds)) <= echo_envelope(t, a, slope));
        }
    }
}
