use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fit::{
    extract_noise_amplitude, fit_echo_decay, fit_hyperbola, spectrum_slope, AmplitudeExtraction,
    DecayFit, DecayTrace, DephasingPair, ExtractionConfig, HyperbolaFit, SpectrumPoint,
};
use super::pure_dephasing_rate;
use crate::error::{Error, Result};

/// Qubit and noise parameters used to generate synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisTruth {
    /// √A_Φ (µΦ₀).
    pub sqrt_a_uphi0: f64,
    /// Δ/h (Hz).
    pub delta_hz: f64,
    /// c/h (Hz per Φ₀).
    pub slope_coeff_hz_per_phi0: f64,
    /// Relaxation time (s); the echo decays exponentially at 1/(2T1).
    pub t1_s: f64,
    pub sweet_spot_flux: f64,
}

impl Default for SynthesisTruth {
    fn default() -> Self {
        Self {
            sqrt_a_uphi0: 2.5,
            delta_hz: 4.6e9,
            slope_coeff_hz_per_phi0: 300e9,
            t1_s: 20e-6,
            sweet_spot_flux: 0.5,
        }
    }
}

impl SynthesisTruth {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("sqrt_a_uphi0", self.sqrt_a_uphi0),
            ("delta_hz", self.delta_hz),
            ("slope_coeff_hz_per_phi0", self.slope_coeff_hz_per_phi0),
            ("t1_s", self.t1_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn omega(&self, flux: f64) -> f64 {
        let d = flux - self.sweet_spot_flux;
        2.0 * PI * self.delta_hz.hypot(self.slope_coeff_hz_per_phi0 * d)
    }

    pub fn slope(&self, flux: f64) -> f64 {
        let d = flux - self.sweet_spot_flux;
        let c = 2.0 * PI * self.slope_coeff_hz_per_phi0;
        c * c * d / self.omega(flux)
    }

    pub fn a_phi(&self) -> f64 {
        (self.sqrt_a_uphi0 * 1e-6).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    pub spectrum_points: usize,
    /// Half-width of the spectrum flux window (Φ₀).
    pub flux_window: f64,
    /// Reported spectrum uncertainty (Hz).
    pub spectrum_sigma_hz: f64,
    /// Standard deviation of the frequency jitter actually applied (Hz).
    pub spectrum_jitter_hz: f64,
    /// Decay traces are taken at sweet spot ± each offset (Φ₀).
    pub decay_offsets: Vec<f64>,
    pub time_points: usize,
    /// Trace length in units of 1/(Γ_exp + Γ_φ).
    pub span_factor: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Gaussian noise on each population (absolute).
    pub population_noise: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            spectrum_points: 41,
            flux_window: 0.02,
            spectrum_sigma_hz: 100e3,
            spectrum_jitter_hz: 0.0,
            decay_offsets: (1..=8).map(|k| 0.002 * k as f64).collect(),
            time_points: 60,
            span_factor: 3.0,
            amplitude: 0.45,
            offset: 0.5,
            population_noise: 0.02,
        }
    }
}

impl SamplingPlan {
    fn validate(&self) -> Result<()> {
        if self.spectrum_points < 4 || self.decay_offsets.is_empty() || self.time_points < 6 {
            return Err(Error::Config(
                "sampling plan needs ≥ 4 spectrum points, ≥ 1 decay offset and ≥ 6 time points"
                    .into(),
            ));
        }
        if self.decay_offsets.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("decay offsets must be positive".into()));
        }
        let non_negative = [
            self.spectrum_sigma_hz,
            self.spectrum_jitter_hz,
            self.population_noise,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0))
            || !(self.flux_window > 0.0)
            || !(self.span_factor > 0.0)
            || !(self.amplitude > 0.0)
        {
            return Err(Error::Config("sampling plan has invalid magnitudes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInput {
    pub trace: DecayTrace,
    pub t1_guess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedDataset {
    pub spectrum: Vec<SpectrumPoint>,
    pub traces: Vec<TraceInput>,
}

/// Deterministic synthetic spectrum and echo traces for `seed`.
pub fn synthesize_qubit_dataset(
    truth: &SynthesisTruth,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<SynthesizedDataset> {
    truth.validate()?;
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let n = plan.spectrum_points;
    let spectrum = (0..n)
        .map(|i| {
            let flux = truth.sweet_spot_flux - plan.flux_window
                + 2.0 * plan.flux_window * i as f64 / (n - 1) as f64;
            let jitter = 2.0 * PI * plan.spectrum_jitter_hz * unit.sample(&mut rng);
            SpectrumPoint {
                flux,
                omega: truth.omega(flux) + jitter,
                sigma_omega: 2.0 * PI * plan.spectrum_sigma_hz,
            }
        })
        .collect();

    let gamma_exp = 1.0 / (2.0 * truth.t1_s);
    let mut fluxes: Vec<f64> = plan
        .decay_offsets
        .iter()
        .rev()
        .map(|d| truth.sweet_spot_flux - d)
        .chain(plan.decay_offsets.iter().map(|d| truth.sweet_spot_flux + d))
        .collect();
    fluxes.dedup();
    let sigma = if plan.population_noise > 0.0 {
        plan.population_noise
    } else {
        1e-3
    };
    let traces = fluxes
        .into_iter()
        .map(|flux| {
            let gamma_phi = pure_dephasing_rate(truth.a_phi(), truth.slope(flux))?;
            let t_max = plan.span_factor / (gamma_exp + gamma_phi);
            let m = plan.time_points;
            let times: Vec<f64> = (0..m).map(|i| t_max * i as f64 / (m - 1) as f64).collect();
            let populations = times
                .iter()
                .map(|&t| {
                    let clean = plan.offset
                        + plan.amplitude * (-gamma_exp * t - (gamma_phi * t).powi(2)).exp();
                    (clean + plan.population_noise * unit.sample(&mut rng)).clamp(0.0, 1.0)
                })
                .collect();
            Ok(TraceInput {
                trace: DecayTrace {
                    flux,
                    times,
                    populations,
                    sigma: vec![sigma; m],
                },
                t1_guess: truth.t1_s,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SynthesizedDataset { spectrum, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResult {
    pub flux: f64,
    pub slope: f64,
    pub fit: DecayFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub hyperbola: HyperbolaFit,
    pub traces: Vec<TraceResult>,
    pub extraction: AmplitudeExtraction,
}

/// Hyperbola fit, one decay fit per trace, then the slope/rate extraction.
pub fn run_pipeline(
    spectrum: &[SpectrumPoint],
    traces: &[TraceInput],
    config: &ExtractionConfig,
) -> Result<PipelineResult> {
    let hyperbola = fit_hyperbola(spectrum)?;
    let results = traces
        .iter()
        .map(|t| {
            Ok(TraceResult {
                flux: t.trace.flux,
                slope: spectrum_slope(&hyperbola, t.trace.flux),
                fit: fit_echo_decay(&t.trace, t.t1_guess)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<DephasingPair> = results
        .iter()
        .map(|r| DephasingPair {
            slope: r.slope,
            gamma_phi: r.fit.gamma_phi,
            gamma_phi_error: r.fit.gamma_phi_error,
        })
        .collect();
    let extraction = extract_noise_amplitude(&pairs, config)?;
    Ok(PipelineResult {
        hyperbola,
        traces: results,
        extraction,
    })
}
