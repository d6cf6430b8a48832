use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LeastSquaresProblem, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Bias flux (Φ₀).
    pub flux: f64,
    /// Transition frequency (rad/s).
    pub omega: f64,
    /// Uncertainty of `omega` (rad/s).
    pub sigma_omega: f64,
}

/// ħω(Φ) = √(Δ² + c²(Φ − Φ_s)²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbolaFit {
    /// Δ (J).
    pub delta: f64,
    /// c (J per Φ₀).
    pub slope_coeff: f64,
    /// Φ_s (Φ₀).
    pub sweet_spot_flux: f64,
    /// Covariance of (Δ, c, Φ_s) in (J, J/Φ₀, Φ₀).
    pub covariance: [[f64; 3]; 3],
    pub reduced_chi2: f64,
}

impl HyperbolaFit {
    /// Δ/ħ (rad/s).
    pub fn delta_omega(&self) -> f64 {
        self.delta / HBAR
    }

    /// c/ħ (rad/s per Φ₀).
    pub fn slope_omega(&self) -> f64 {
        self.slope_coeff / HBAR
    }

    pub fn omega_at(&self, flux: f64) -> f64 {
        let d = flux - self.sweet_spot_flux;
        self.delta_omega().hypot(self.slope_omega() * d)
    }

    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }
}

/// ∂ω/∂Φ of the fitted hyperbola (rad/s per Φ₀).
pub fn spectrum_slope(fit: &HyperbolaFit, flux: f64) -> f64 {
    let d = flux - fit.sweet_spot_flux;
    if d == 0.0 {
        return 0.0;
    }
    let c = fit.slope_omega();
    c * c * d / fit.omega_at(flux)
}

struct HyperbolaProblem<'a> {
    points: &'a [SpectrumPoint],
    scale: f64,
    sigma: Vec<f64>,
}

impl HyperbolaProblem<'_> {
    fn model(&self, p: &[f64], flux: f64) -> (f64, [f64; 3]) {
        let d = flux - p[2];
        let w = p[0].hypot(p[1] * d);
        // derivatives of the scaled model w = √(Δ̃² + c̃² d²)
        let grad = [p[0] / w, p[1] * d * d / w, -p[1] * p[1] * d / w];
        (w, grad)
    }
}

impl LeastSquaresProblem for HyperbolaProblem<'_> {
    fn num_params(&self) -> usize {
        3
    }
    fn num_residuals(&self) -> usize {
        self.points.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, pt) in self.points.iter().enumerate() {
            out[i] = (pt.omega / self.scale - self.model(p, pt.flux).0) / self.sigma[i];
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for (i, pt) in self.points.iter().enumerate() {
            let (_, g) = self.model(p, pt.flux);
            for j in 0..3 {
                out[(i, j)] = -g[j] / self.sigma[i];
            }
        }
    }
}

/// Per-point σ, replacing non-positive values by `fallback`.
fn sigmas(values: impl Iterator<Item = f64>, fallback: f64) -> Vec<f64> {
    values
        .map(|s| {
            if s > 0.0 && s.is_finite() {
                s
            } else {
                fallback
            }
        })
        .collect()
}

pub fn fit_hyperbola(points: &[SpectrumPoint]) -> Result<HyperbolaFit> {
    if points.len() < 4 {
        return Err(Error::Domain(format!(
            "hyperbola fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.omega > 0.0 && p.flux.is_finite()))
    {
        return Err(Error::Domain(
            "spectrum frequencies must be positive".into(),
        ));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.flux.total_cmp(&b.flux));
    let imin = (0..sorted.len())
        .min_by(|&a, &b| sorted[a].omega.total_cmp(&sorted[b].omega))
        .expect("non-empty");
    if imin == 0 || imin == sorted.len() - 1 {
        return Err(Error::Domain(
            "spectrum does not bracket the sweet spot (minimum at an end point)".into(),
        ));
    }
    let scale = sorted[imin].omega;
    let phi_s = sorted[imin].flux;
    let (first, last) = (&sorted[0], &sorted[sorted.len() - 1]);
    let outer = if (first.flux - phi_s).abs() >= (last.flux - phi_s).abs() {
        first
    } else {
        last
    };
    let secant = ((outer.omega - scale) / (outer.flux - phi_s)).abs() / scale;
    // For a hyperbola the outer secant underestimates c; its far-field limit is c.
    let d = (outer.flux - phi_s).abs();
    let ratio = outer.omega / scale;
    let c0 = if ratio > 1.0 {
        ((ratio * ratio - 1.0).sqrt() / d).max(secant)
    } else {
        secant.max(1.0)
    };

    let sigma = sigmas(sorted.iter().map(|p| p.sigma_omega / scale), 1.0);
    let problem = HyperbolaProblem {
        points: &sorted,
        scale,
        sigma,
    };
    let opts = LmOptions {
        lower: Some(vec![0.0, 0.0, f64::NEG_INFINITY]),
        ..LmOptions::default()
    };
    let rep = levenberg_marquardt(&problem, &[1.0, c0, phi_s], &opts)?;
    let p = &rep.params;
    if !(p[0] > 0.0) {
        return Err(Error::Fit(format!(
            "fitted gap is not positive (chi2 = {:.3e})",
            rep.chi2
        )));
    }
    let unit = [HBAR * scale, HBAR * scale, 1.0];
    let all_default = points.iter().all(|p| !(p.sigma_omega > 0.0));
    let s = if all_default { rep.reduced_chi2() } else { 1.0 };
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rep.covariance[(i, j)] * unit[i] * unit[j] * s;
        }
    }
    Ok(HyperbolaFit {
        delta: p[0] * unit[0],
        slope_coeff: p[1] * unit[1],
        sweet_spot_flux: p[2],
        covariance,
        reduced_chi2: rep.reduced_chi2(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    /// Bias flux (Φ₀).
    pub flux: f64,
    /// Echo delay times (s), strictly increasing.
    pub times: Vec<f64>,
    pub populations: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DecayTrace {
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.populations.len() != n || self.sigma.len() != n {
            return Err(Error::Domain("trace columns differ in length".into()));
        }
        if n < 6 {
            return Err(Error::Domain(format!(
                "decay fit needs at least 6 points, got {n}"
            )));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "trace times must be strictly increasing".into(),
            ));
        }
        if self.populations.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("trace populations must be finite".into()));
        }
        Ok(())
    }
}

/// p(t) = a·exp(−Γ_exp t − (Γ_φ t)²) + c
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub offset: f64,
    pub gamma_exp: f64,
    pub gamma_exp_error: f64,
    pub gamma_phi: f64,
    pub gamma_phi_error: f64,
    pub reduced_chi2: f64,
}

struct DecayProblem<'a> {
    tau: Vec<f64>,
    trace: &'a DecayTrace,
    sigma: Vec<f64>,
}

impl DecayProblem<'_> {
    /// Parameters: a, g = Γ_exp·T, q = (Γ_φ·T)², c with τ = t/T.
    fn eval(p: &[f64], tau: f64) -> (f64, [f64; 4]) {
        let e = (-p[1] * tau - p[2] * tau * tau).exp();
        let v = p[0] * e + p[3];
        (v, [e, -p[0] * tau * e, -p[0] * tau * tau * e, 1.0])
    }
}

impl LeastSquaresProblem for DecayProblem<'_> {
    fn num_params(&self) -> usize {
        4
    }
    fn num_residuals(&self) -> usize {
        self.tau.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, r) in out.iter_mut().enumerate() {
            *r = (self.trace.populations[i] - Self::eval(p, self.tau[i]).0) / self.sigma[i];
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for i in 0..self.tau.len() {
            let (_, g) = Self::eval(p, self.tau[i]);
            for j in 0..4 {
                out[(i, j)] = -g[j] / self.sigma[i];
            }
        }
    }
}

pub fn fit_echo_decay(trace: &DecayTrace, t1_guess: f64) -> Result<DecayFit> {
    trace.validate()?;
    if !(t1_guess > 0.0) {
        return Err(Error::Domain(format!(
            "T1 guess must be positive, got {t1_guess}"
        )));
    }
    let p = &trace.populations;
    let (lo, hi) = p
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::Fit("flat trace carries no decay information".into()));
    }
    let t_scale = *trace.times.last().expect("validated");
    let tau: Vec<f64> = trace.times.iter().map(|t| t / t_scale).collect();

    let n = p.len();
    let tail = (n / 8).max(1);
    let c0 = p[n - tail..].iter().sum::<f64>() / tail as f64;
    let a0 = p[0] - c0;
    let g0 = t_scale / (2.0 * t1_guess);
    // Gaussian guess from where the signal first falls below 1/e of a0.
    let t_e = tau
        .iter()
        .zip(p)
        .find(|(_, &v)| (v - c0) / a0 < (-1.0f64).exp())
        .map(|(t, _)| *t)
        .unwrap_or(1.0);
    let q0 = (1.0 / (t_e * t_e) - g0 / t_e).max(1e-3);

    let sigma = sigmas(trace.sigma.iter().copied(), 1e-3);
    let problem = DecayProblem { tau, trace, sigma };
    let opts = LmOptions {
        lower: Some(vec![
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            0.0,
            f64::NEG_INFINITY,
        ]),
        ..LmOptions::default()
    };
    let rep = levenberg_marquardt(&problem, &[a0, g0, q0, c0], &opts)?;
    let err = rep.std_errors(false);
    let q = rep.params[2].max(0.0);
    let gamma_phi = q.sqrt() / t_scale;
    let q_err = err[2];
    // σ_Γφ from σ_q; near q = 0 the linearisation fails and √σ_q is used.
    let gamma_phi_error = if q > q_err {
        q_err / (2.0 * q.sqrt()) / t_scale
    } else {
        q_err.sqrt() / t_scale
    };
    Ok(DecayFit {
        amplitude: rep.params[0],
        offset: rep.params[3],
        gamma_exp: rep.params[1] / t_scale,
        gamma_exp_error: err[1] / t_scale,
        gamma_phi,
        gamma_phi_error,
        reduced_chi2: rep.reduced_chi2(),
    })
}

/// One (slope, Γ_φ) measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingPair {
    /// ∂ω/∂Φ (rad/s per Φ₀); negative on the left of the sweet spot.
    pub slope: f64,
    pub gamma_phi: f64,
    pub gamma_phi_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    /// Pairs with |slope| below this are excluded (rad/s per Φ₀).
    pub min_abs_slope: f64,
    /// Inflate branch errors by the Birge ratio when it exceeds one.
    pub birge_scaling: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            min_abs_slope: 0.0,
            birge_scaling: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    /// √A_Φ (µΦ₀).
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchEstimate {
    pub estimate: Estimate,
    pub points: usize,
    pub reduced_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeExtraction {
    pub left: Option<BranchEstimate>,
    pub right: Option<BranchEstimate>,
    pub combined: Estimate,
    pub flags: Vec<String>,
}

fn branch_fit(pairs: &[&DephasingPair], birge: bool) -> BranchEstimate {
    let floor = |p: &DephasingPair| {
        let s = p.gamma_phi_error;
        let min = 1e-9 * p.gamma_phi.abs().max(f64::MIN_POSITIVE);
        if s.is_finite() && s > min {
            s
        } else {
            min
        }
    };
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in pairs {
        let w = floor(p).powi(-2);
        let s = p.slope.abs();
        sxy += w * s * p.gamma_phi;
        sxx += w * s * s;
    }
    let k = sxy / sxx;
    let mut err = 1.0 / sxx.sqrt();
    let chi2: f64 = pairs
        .iter()
        .map(|p| ((p.gamma_phi - k * p.slope.abs()) / floor(p)).powi(2))
        .sum();
    let dof = pairs.len().saturating_sub(1).max(1);
    let reduced = chi2 / dof as f64;
    if birge && reduced > 1.0 {
        err *= reduced.sqrt();
    }
    let to_micro = 1e6 / LN_2.sqrt();
    BranchEstimate {
        estimate: Estimate {
            value: k * to_micro,
            error: err * to_micro,
        },
        points: pairs.len(),
        reduced_chi2: reduced,
    }
}

/// Zero-intercept fit Γ_φ = k|slope| on each side of the sweet spot, then an
/// inverse-variance average of the two branches.
pub fn extract_noise_amplitude(
    pairs: &[DephasingPair],
    config: &ExtractionConfig,
) -> Result<AmplitudeExtraction> {
    let usable: Vec<&DephasingPair> = pairs
        .iter()
        .filter(|p| p.slope.is_finite() && p.gamma_phi.is_finite())
        .filter(|p| p.slope != 0.0 && p.slope.abs() >= config.min_abs_slope)
        .collect();
    let mut flags = Vec::new();
    let mut branch = |name: &str, negative: bool| {
        let pts: Vec<&DephasingPair> = usable
            .iter()
            .copied()
            .filter(|p| (p.slope < 0.0) == negative)
            .collect();
        if pts.len() < 2 {
            flags.push(format!(
                "{name} branch omitted: {} usable point(s)",
                pts.len()
            ));
            None
        } else {
            Some(branch_fit(&pts, config.birge_scaling))
        }
    };
    let left = branch("left", true);
    let right = branch("right", false);
    let present: Vec<Estimate> = [left, right].iter().flatten().map(|b| b.estimate).collect();
    if present.is_empty() {
        return Err(Error::Fit("no branch has at least 2 usable points".into()));
    }
    let wsum: f64 = present.iter().map(|e| e.error.powi(-2)).sum();
    let value = present
        .iter()
        .map(|e| e.value * e.error.powi(-2))
        .sum::<f64>()
        / wsum;
    Ok(AmplitudeExtraction {
        left,
        right,
        combined: Estimate {
            value,
            error: wsum.sqrt().recip(),
        },
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephasing::{echo_envelope, pure_dephasing_rate};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const DELTA: f64 = 2.0 * PI * 4.6e9;
    const SLOPE: f64 = 2.0 * PI * 300e9;

    fn spectrum(jitter: f64, seed: u64) -> Vec<SpectrumPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, jitter.max(f64::MIN_POSITIVE)).unwrap();
        (0..41)
            .map(|i| {
                let flux = 0.48 + 0.001 * i as f64;
                let d = flux - 0.5;
                let omega = DELTA.hypot(SLOPE * d)
                    + if jitter > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                SpectrumPoint {
                    flux,
                    omega,
                    sigma_omega: jitter,
                }
            })
            .collect()
    }

    #[test]
    fn exact_hyperbola_recovered() {
        let fit = fit_hyperbola(&spectrum(0.0, 0)).unwrap();
        assert_relative_eq!(fit.delta_omega(), DELTA, max_relative = 1e-8);
        assert_relative_eq!(fit.slope_omega(), SLOPE, max_relative = 1e-8);
        assert!((fit.sweet_spot_flux - 0.5).abs() < 1e-8);
        assert_relative_eq!(
            fit.delta / (2.0 * PI * crate::constants::HBAR),
            4.6e9,
            max_relative = 1e-8
        );
    }

    #[test]
    fn jittered_hyperbola_within_five_sigma() {
        let jitter = 2.0 * PI * 100e3;
        for seed in 0..20 {
            let fit = fit_hyperbola(&spectrum(jitter, seed)).unwrap();
            let err = fit.std_errors()[0] / HBAR;
            assert!((fit.delta_omega() - DELTA).abs() < 5.0 * err, "seed {seed}");
        }
    }

    #[test]
    fn one_sided_spectrum_rejected() {
        let pts: Vec<_> = spectrum(0.0, 0)
            .into_iter()
            .filter(|p| p.flux > 0.5005)
            .collect();
        assert!(matches!(fit_hyperbola(&pts), Err(Error::Domain(_))));
        assert!(fit_hyperbola(&spectrum(0.0, 0)[..3]).is_err());
    }

    #[test]
    fn slope_properties() {
        let fit = fit_hyperbola(&spectrum(0.0, 0)).unwrap();
        let s = fit.sweet_spot_flux;
        assert_eq!(spectrum_slope(&fit, s), 0.0);
        for d in [1e-4, 3e-3, 0.01] {
            assert_relative_eq!(
                spectrum_slope(&fit, s + d),
                -spectrum_slope(&fit, s - d),
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            spectrum_slope(&fit, s + 10.0),
            fit.slope_omega(),
            max_relative = 1e-4
        );
    }

    fn trace(gamma_exp: f64, gamma_phi: f64, noise: f64, seed: u64) -> DecayTrace {
        trace_with(gamma_exp, gamma_phi, noise, seed, 60, 3.0)
    }

    fn trace_with(
        gamma_exp: f64,
        gamma_phi: f64,
        noise: f64,
        seed: u64,
        points: usize,
        span: f64,
    ) -> DecayTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
        let total = gamma_exp + gamma_phi;
        let times: Vec<f64> = (0..points)
            .map(|i| span / total * i as f64 / (points - 1) as f64)
            .collect();
        let populations = times
            .iter()
            .map(|&t| {
                let v = 0.45 * (-gamma_exp * t - (gamma_phi * t).powi(2)).exp() + 0.5;
                v + if noise > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        DecayTrace {
            flux: 0.51,
            sigma: vec![noise.max(1e-3); times.len()],
            times,
            populations,
        }
    }

    #[test]
    fn pure_exponential_gives_no_gaussian_rate() {
        let fit = fit_echo_decay(&trace(2.5e4, 0.0, 0.0, 0), 20e-6).unwrap();
        assert!(fit.gamma_phi <= 3.0 * fit.gamma_phi_error + 1.0, "{fit:?}");
        assert_relative_eq!(fit.gamma_exp, 2.5e4, max_relative = 1e-6);
    }

    #[test]
    fn pure_gaussian_recovers_rates() {
        let fit = fit_echo_decay(&trace(0.0, 1e6, 0.0, 0), 20e-6).unwrap();
        assert_relative_eq!(fit.gamma_phi, 1e6, max_relative = 1e-6);
        assert!(fit.gamma_exp.abs() < 1e-3 * 1e6);
    }

    #[test]
    fn mixed_noisy_trace_within_five_percent() {
        // comparable rates and a long, dense trace so that both are resolved
        for seed in 0..10 {
            let t = trace_with(4e5, 3e5, 0.01, seed, 400, 4.0);
            let fit = fit_echo_decay(&t, 1.25e-6).unwrap();
            assert!(
                (fit.gamma_phi / 3e5 - 1.0).abs() < 0.05,
                "seed {seed}: {fit:?}"
            );
            assert!(
                (fit.gamma_exp / 4e5 - 1.0).abs() < 0.05,
                "seed {seed}: {fit:?}"
            );
        }
    }

    #[test]
    fn degenerate_traces_rejected() {
        let mut t = trace(2e5, 5e5, 0.0, 0);
        t.populations.iter_mut().for_each(|p| *p = 0.5);
        assert!(matches!(fit_echo_decay(&t, 20e-6), Err(Error::Fit(_))));
        let mut short = trace(2e5, 5e5, 0.0, 0);
        short.times.truncate(5);
        short.populations.truncate(5);
        short.sigma.truncate(5);
        assert!(fit_echo_decay(&short, 20e-6).is_err());
        assert!(fit_echo_decay(&trace(2e5, 5e5, 0.0, 0), 0.0).is_err());
    }

    fn exact_pairs(sqrt_a: f64) -> Vec<DephasingPair> {
        [-8e11, -5e11, -2e11, 2e11, 5e11, 8e11]
            .iter()
            .map(|&s| DephasingPair {
                slope: s,
                gamma_phi: pure_dephasing_rate(sqrt_a * sqrt_a, s).unwrap(),
                gamma_phi_error: 0.0,
            })
            .collect()
    }

    #[test]
    fn noiseless_inversion() {
        let ex =
            extract_noise_amplitude(&exact_pairs(2.5e-6), &ExtractionConfig::default()).unwrap();
        assert_relative_eq!(ex.left.unwrap().estimate.value, 2.5, max_relative = 1e-9);
        assert_relative_eq!(ex.right.unwrap().estimate.value, 2.5, max_relative = 1e-9);
        assert_relative_eq!(ex.combined.value, 2.5, max_relative = 1e-9);
        assert!(ex.flags.is_empty());
    }

    #[test]
    fn combined_lies_between_branches() {
        let mut pairs = exact_pairs(3.65e-6);
        let right = exact_pairs(3.83e-6);
        for (p, r) in pairs.iter_mut().zip(&right) {
            if p.slope > 0.0 {
                *p = *r;
            }
            p.gamma_phi_error = 0.02 * p.gamma_phi;
        }
        let ex = extract_noise_amplitude(&pairs, &ExtractionConfig::default()).unwrap();
        assert!(ex.combined.value > 3.65 && ex.combined.value < 3.83);
        let l = ex.left.unwrap().estimate.error;
        let r = ex.right.unwrap().estimate.error;
        assert!(ex.combined.error <= l.min(r));
    }

    #[test]
    fn heteroscedastic_errors_shrink_when_combined() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pairs = exact_pairs(2.5e-6);
        for (i, p) in pairs.iter_mut().enumerate() {
            let rel = 0.01 * (1 + i) as f64;
            p.gamma_phi_error = rel * p.gamma_phi;
            p.gamma_phi += Normal::new(0.0, p.gamma_phi_error)
                .unwrap()
                .sample(&mut rng);
        }
        let ex = extract_noise_amplitude(&pairs, &ExtractionConfig::default()).unwrap();
        let l = ex.left.unwrap().estimate.error;
        let r = ex.right.unwrap().estimate.error;
        assert!(ex.combined.error <= l.min(r));
    }

    #[test]
    fn missing_branch_is_flagged() {
        let pairs: Vec<_> = exact_pairs(2.5e-6)
            .into_iter()
            .filter(|p| p.slope > -3e11)
            .collect();
        let ex = extract_noise_amplitude(&pairs, &ExtractionConfig::default()).unwrap();
        assert!(ex.left.is_none());
        assert_eq!(ex.flags.len(), 1);
        assert_relative_eq!(ex.combined.value, 2.5, max_relative = 1e-9);
        let none: Vec<_> = pairs.into_iter().take(1).collect();
        assert!(matches!(
            extract_noise_amplitude(&none, &ExtractionConfig::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn slope_cut_excludes_points() {
        let cfg = ExtractionConfig {
            min_abs_slope: 3e11,
            ..ExtractionConfig::default()
        };
        let ex = extract_noise_amplitude(&exact_pairs(2.5e-6), &cfg).unwrap();
        assert_eq!(ex.left.unwrap().points, 2);
    }

    proptest::proptest! {
        #[test]
        fn rescaling_invariance(c in 0.01f64..100.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = exact_pairs(2.5e-6);
            for p in pairs.iter_mut() {
                p.gamma_phi_error = 0.03 * p.gamma_phi;
                p.gamma_phi *= 1.0 + Normal::new(0.0, 0.03).unwrap().sample(&mut rng);
            }
            let scaled: Vec<_> = pairs.iter().map(|p| DephasingPair {
                slope: c * p.slope,
                gamma_phi: c * p.gamma_phi,
                gamma_phi_error: c * p.gamma_phi_error,
            }).collect();
            let a = extract_noise_amplitude(&pairs, &ExtractionConfig::default()).unwrap();
            let b = extract_noise_amplitude(&scaled, &ExtractionConfig::default()).unwrap();
            proptest::prop_assert!((a.combined.value - b.combined.value).abs() < 1e-9 * a.combined.value);
        }
    }

    #[test]
    fn envelope_trace_matches_rate() {
        let a = 2.5e-6f64.powi(2);
        let slope = 5e11;
        let g = pure_dephasing_rate(a, slope).unwrap();
        let t = 1.0 / g;
        assert_relative_eq!(
            echo_envelope(t, a, slope),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }
}
