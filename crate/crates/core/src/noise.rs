//! Flux variance from surface defects and the single-parameter fit of m²σ.
//!
//! A loop is treated as four isolated straight strips. Each strip contributes
//! `length · ∫dx (B/I)²` per unit defect moment squared and density, and the
//! random spin orientation contributes a factor 1/3.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{E, LN_2, PI};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_MAGNETON, FLUX_QUANTUM, MU_0};
use crate::dataset::QubitRecord;
use crate::error::{Error, Result};
use crate::field::{interface_profiles, FieldConfig, FieldProfile, InterfaceKind};
use crate::geometry::{FilmParams, SquidGeometry};
use crate::strip::{
    discretize_cross_section, solve_current_distribution, CrossSectionGrid, SolverParams,
    DEFAULT_LENGTH_FACTOR, DEFAULT_PATCH_CAP,
};

/// Effective spin moment quoted alongside the Bohr-magneton estimate.
pub const ALTERNATE_MOMENT_BOHR: f64 = 1.8;

/// Normalised surface current K/K0 across a thin strip, `xbar = x/W - 1/2`.
pub fn surface_current_profile(xbar: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Domain(format!(
            "eps must lie in (0, 1/2), got {eps}"
        )));
    }
    let a = xbar.abs();
    if !(a <= 0.5) {
        return Err(Error::Domain(format!(
            "|xbar| must not exceed 1/2, got {xbar}"
        )));
    }
    if a <= 0.5 * (1.0 - eps) {
        Ok(1.0 / (1.0 - 4.0 * a * a).sqrt())
    } else {
        Ok((E / (2.0 * eps)).sqrt() * ((a - 0.5) / eps).exp())
    }
}

/// Thin-film ∫dx (B/I)² over one face of a strip (T² m / A²).
pub fn analytic_variance_integral(width: f64, thickness: f64, lambda: f64) -> Result<f64> {
    let eps = lambda * lambda / (thickness * width);
    if !(eps < 0.5) || !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Validity(format!(
            "λ²/(bW) = {eps} is outside the thin-film regime (must be below 1/2)"
        )));
    }
    let bracket = ((2.0 / eps).ln() + (E - 1.0)) / (2.0 * PI);
    Ok(MU_0 * MU_0 / (PI * width) * bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    AnalyticTop,
    NumericTop,
    NumericAll,
}

impl ModelVariant {
    pub fn interfaces(self) -> &'static [InterfaceKind] {
        match self {
            ModelVariant::AnalyticTop | ModelVariant::NumericTop => &[InterfaceKind::Top],
            ModelVariant::NumericAll => &InterfaceKind::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::AnalyticTop => "analytic_top",
            ModelVariant::NumericTop => "numeric_top",
            ModelVariant::NumericAll => "numeric_all",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic_top" => Ok(ModelVariant::AnalyticTop),
            "numeric_top" => Ok(ModelVariant::NumericTop),
            "numeric_all" => Ok(ModelVariant::NumericAll),
            _ => Err(Error::Config(format!("unknown model variant {s:?}"))),
        }
    }
}

/// Per-interface ∫dx (B/I)² for one strip cross-section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBreakdown {
    pub width: f64,
    pub thickness: f64,
    pub penetration_depth: f64,
    pub per_interface: BTreeMap<InterfaceKind, f64>,
    pub total: f64,
}

impl VarianceBreakdown {
    fn from_map(
        width: f64,
        thickness: f64,
        penetration_depth: f64,
        per_interface: BTreeMap<InterfaceKind, f64>,
    ) -> Self {
        let total = per_interface.values().sum();
        Self {
            width,
            thickness,
            penetration_depth,
            per_interface,
            total,
        }
    }

    /// Total with each interface scaled by its relative defect density
    /// (missing entries count as 1).
    pub fn weighted_total(&self, weights: Option<&BTreeMap<InterfaceKind, f64>>) -> f64 {
        match weights {
            None => self.total,
            Some(w) => self
                .per_interface
                .iter()
                .map(|(k, v)| w.get(k).copied().unwrap_or(1.0) * v)
                .sum(),
        }
    }

    /// Fraction of the total carried by the two side faces.
    pub fn side_share(&self) -> f64 {
        let sides: f64 = self
            .per_interface
            .iter()
            .filter(|(k, _)| k.is_side())
            .map(|(_, v)| v)
            .sum();
        sides / self.total
    }
}

/// Sums the profiles required by `variant`. Profiles for other interfaces
/// are ignored.
pub fn numeric_variance_integral(
    profiles: &[FieldProfile],
    variant: ModelVariant,
    thickness: f64,
    penetration_depth: f64,
) -> Result<VarianceBreakdown> {
    if variant == ModelVariant::AnalyticTop {
        return Err(Error::Config("analytic_top has no numeric profiles".into()));
    }
    let mut per_interface = BTreeMap::new();
    for &kind in variant.interfaces() {
        let p = profiles
            .iter()
            .find(|p| p.spec.kind == kind)
            .ok_or_else(|| Error::Config(format!("{} needs a {kind} profile", variant.as_str())))?;
        per_interface.insert(kind, p.variance_integral());
    }
    let width = profiles
        .iter()
        .find(|p| matches!(p.spec.kind, InterfaceKind::Top | InterfaceKind::Bottom))
        .map(|p| p.weights.iter().sum())
        .unwrap_or(f64::NAN);
    Ok(VarianceBreakdown::from_map(
        width,
        thickness,
        penetration_depth,
        per_interface,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectParams {
    /// m²σ (J² T⁻² m⁻²).
    pub m2sigma: f64,
    /// Relative defect density per interface; absent means equal densities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_interface_weights: Option<BTreeMap<InterfaceKind, f64>>,
}

impl DefectParams {
    pub fn new(m2sigma: f64) -> Result<Self> {
        let d = Self {
            m2sigma,
            per_interface_weights: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_moment(moment: f64, sigma: f64) -> Result<Self> {
        Self::new(moment * moment * sigma)
    }

    pub fn with_weights(mut self, weights: BTreeMap<InterfaceKind, f64>) -> Result<Self> {
        self.per_interface_weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m2sigma >= 0.0 && self.m2sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "m²σ must be non-negative, got {}",
                self.m2sigma
            )));
        }
        if let Some(w) = &self.per_interface_weights {
            if let Some((k, v)) = w.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Domain(format!(
                    "weight for {k} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// σ for a given moment (m⁻²).
    pub fn sigma_for_moment(&self, moment: f64) -> f64 {
        self.m2sigma / (moment * moment)
    }
}

/// Discretisation used by the numeric variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    /// Target patch edge as a fraction of λ.
    pub patch_over_lambda: f64,
    pub patch_cap: usize,
    /// Strip length as a multiple of max(W, b).
    pub length_factor: f64,
    pub field: FieldConfig,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            patch_over_lambda: 0.5,
            patch_cap: DEFAULT_PATCH_CAP,
            length_factor: DEFAULT_LENGTH_FACTOR,
            field: FieldConfig::default(),
        }
    }
}

/// Variance integrals of one strip cross-section under `variant`.
pub fn strip_variance(
    width: f64,
    thickness: f64,
    lambda: f64,
    variant: ModelVariant,
    config: &NumericConfig,
) -> Result<VarianceBreakdown> {
    if variant == ModelVariant::AnalyticTop {
        let v = analytic_variance_integral(width, thickness, lambda)?;
        let map = BTreeMap::from([(InterfaceKind::Top, v)]);
        return Ok(VarianceBreakdown::from_map(width, thickness, lambda, map));
    }
    let target = config.patch_over_lambda * lambda;
    let grid = discretize_cross_section(width, thickness, target, config.patch_cap)?;
    variance_on_grid(&grid, lambda, variant, config)
}

/// Numeric variance integrals on an explicit cross-section grid.
pub fn variance_on_grid(
    grid: &CrossSectionGrid,
    lambda: f64,
    variant: ModelVariant,
    config: &NumericConfig,
) -> Result<VarianceBreakdown> {
    let (width, thickness) = (grid.width(), grid.thickness());
    let params = SolverParams {
        strip_length: config.length_factor * width.max(thickness),
        ..SolverParams::for_strip(width, thickness, lambda)
    };
    let dist = solve_current_distribution(grid, &params)?;
    let specs = config.field.specs(variant.interfaces(), grid);
    let profiles = interface_profiles(&dist, &specs)?;
    let mut b = numeric_variance_integral(&profiles, variant, thickness, lambda)?;
    b.width = width;
    Ok(b)
}

type StripKey = (u64, u64, u64);

fn strip_key(width: f64, thickness: f64, lambda: f64) -> StripKey {
    (width.to_bits(), thickness.to_bits(), lambda.to_bits())
}

/// Flux-noise model for one variant, caching strip solves by cross-section.
#[derive(Debug)]
pub struct NoiseModel {
    variant: ModelVariant,
    config: NumericConfig,
    cache: Mutex<HashMap<StripKey, VarianceBreakdown>>,
}

impl NoiseModel {
    pub fn new(variant: ModelVariant) -> Self {
        Self::with_config(variant, NumericConfig::default())
    }

    pub fn with_config(variant: ModelVariant, config: NumericConfig) -> Self {
        Self {
            variant,
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn config(&self) -> &NumericConfig {
        &self.config
    }

    pub fn cached_solves(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    pub fn breakdown(&self, width: f64, film: &FilmParams) -> Result<VarianceBreakdown> {
        let key = strip_key(width, film.thickness, film.penetration_depth);
        if let Some(b) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(b.clone());
        }
        let b = strip_variance(
            width,
            film.thickness,
            film.penetration_depth,
            self.variant,
            &self.config,
        )?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, b.clone());
        Ok(b)
    }

    /// Solves every distinct arm cross-section of `geometries` concurrently.
    pub fn prepare<'a>(
        &self,
        geometries: impl IntoIterator<Item = &'a SquidGeometry>,
    ) -> Result<()> {
        let mut wanted: Vec<(f64, FilmParams)> = Vec::new();
        for g in geometries {
            for arm in g.arm_segments() {
                let film = g.film();
                if !wanted.iter().any(|(w, f)| {
                    strip_key(*w, f.thickness, f.penetration_depth)
                        == strip_key(arm.width, film.thickness, film.penetration_depth)
                }) {
                    wanted.push((arm.width, film));
                }
            }
        }
        wanted
            .par_iter()
            .map(|(w, f)| self.breakdown(*w, f).map(|_| ()))
            .collect()
    }

    /// Σ_arms length · weighted ∫(B/I)² (T² m² / A²).
    pub fn loop_integral(
        &self,
        g: &SquidGeometry,
        weights: Option<&BTreeMap<InterfaceKind, f64>>,
    ) -> Result<f64> {
        let film = g.film();
        let mut sum = 0.0;
        for arm in g.arm_segments() {
            sum += arm.length * self.breakdown(arm.width, &film)?.weighted_total(weights);
        }
        Ok(sum)
    }

    /// ⟨Φ²⟩ (Wb²).
    pub fn flux_variance(&self, g: &SquidGeometry, d: &DefectParams) -> Result<f64> {
        d.validate()?;
        Ok(d.m2sigma / 3.0 * self.loop_integral(g, d.per_interface_weights.as_ref())?)
    }

    /// A_Φ per unit m²σ (Wb² per J² T⁻² m⁻²).
    pub fn geometry_factor(
        &self,
        g: &SquidGeometry,
        weights: Option<&BTreeMap<InterfaceKind, f64>>,
    ) -> Result<f64> {
        Ok(self.loop_integral(g, weights)? / 3.0 / (2.0 * LN_2))
    }

    /// Predicted √A_Φ in µΦ₀.
    pub fn predict_amplitude(&self, g: &SquidGeometry, d: &DefectParams) -> Result<f64> {
        Ok(wb_to_micro_phi0(variance_to_amplitude(
            self.flux_variance(g, d)?,
        )?))
    }
}

/// √A_Φ (Wb) from ⟨Φ²⟩ = 2 A_Φ ln 2.
pub fn variance_to_amplitude(var: f64) -> Result<f64> {
    if !(var >= 0.0) {
        return Err(Error::Domain(format!(
            "flux variance must be non-negative, got {var}"
        )));
    }
    Ok((var / (2.0 * LN_2)).sqrt())
}

pub fn amplitude_to_variance(amplitude: f64) -> f64 {
    2.0 * LN_2 * amplitude * amplitude
}

pub fn wb_to_micro_phi0(flux: f64) -> f64 {
    flux / FLUX_QUANTUM * 1e6
}

pub fn micro_phi0_to_wb(flux: f64) -> f64 {
    flux * 1e-6 * FLUX_QUANTUM
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSpace {
    /// Least squares on A_Φ.
    #[default]
    Power,
    /// Least squares on √A_Φ.
    Amplitude,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub space: FitSpace,
    /// One weight per input record; equal weights when absent.
    pub weights: Option<Vec<f64>>,
    /// Relative interface densities used for the geometry factors.
    pub per_interface_weights: Option<BTreeMap<InterfaceKind, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecordResult {
    pub sample: String,
    pub qubit: u32,
    pub perimeter_um: f64,
    pub mean_width_um: f64,
    pub measured_uphi0: f64,
    pub predicted_uphi0: f64,
    /// Measured minus predicted, in the fit space (Wb² or Wb).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseFitResult {
    pub variant: ModelVariant,
    pub space: FitSpace,
    pub m2sigma: f64,
    pub sigma_for_mu_b: f64,
    pub sigma_for_1p8_mu_b: f64,
    /// Weighted sum of squared residuals in the fit space.
    pub chi2: f64,
    pub records: Vec<FitRecordResult>,
}

/// Closed-form single-parameter fit of m²σ to the eligible records.
pub fn fit_defect_density(
    model: &NoiseModel,
    records: &[QubitRecord],
    film: FilmParams,
    config: &FitConfig,
) -> Result<NoiseFitResult> {
    if let Some(w) = &config.weights {
        if w.len() != records.len() {
            return Err(Error::Config(format!(
                "{} weights for {} records",
                w.len(),
                records.len()
            )));
        }
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("fit weights must be non-negative".into()));
        }
    }
    let mut eligible = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(a) = r.measured_power() {
            let w = config.weights.as_ref().map_or(1.0, |w| w[i]);
            eligible.push((r, r.geometry(film)?, a, w));
        }
    }
    if eligible.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 records with measured amplitudes, got {}",
            eligible.len()
        )));
    }
    model.prepare(eligible.iter().map(|e| &e.1))?;
    let weights = config.per_interface_weights.as_ref();
    let factors: Vec<f64> = eligible
        .iter()
        .map(|e| model.geometry_factor(&e.1, weights))
        .collect::<Result<_>>()?;
    if factors.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::Numerical("non-positive geometry factor".into()));
    }

    let (mut num, mut den) = (0.0, 0.0);
    for ((_, _, a, w), g) in eligible.iter().zip(&factors) {
        match config.space {
            FitSpace::Power => {
                num += w * a * g;
                den += w * g * g;
            }
            FitSpace::Amplitude => {
                num += w * a.sqrt() * g.sqrt();
                den += w * g;
            }
        }
    }
    if den <= 0.0 {
        return Err(Error::Fit("all fit weights are zero".into()));
    }
    let m2sigma = match config.space {
        FitSpace::Power => num / den,
        FitSpace::Amplitude => (num / den).powi(2),
    };

    let mut chi2 = 0.0;
    let results = eligible
        .iter()
        .zip(&factors)
        .map(|((r, g, a, w), f)| {
            let predicted = m2sigma * f;
            let residual = match config.space {
                FitSpace::Power => a - predicted,
                FitSpace::Amplitude => a.sqrt() - predicted.sqrt(),
            };
            chi2 += w * residual * residual;
            FitRecordResult {
                sample: r.sample.clone(),
                qubit: r.qubit,
                perimeter_um: g.perimeter() * 1e6,
                mean_width_um: g.mean_width() * 1e6,
                measured_uphi0: wb_to_micro_phi0(a.sqrt()),
                predicted_uphi0: wb_to_micro_phi0(predicted.sqrt()),
                residual,
            }
        })
        .collect();

    let d = DefectParams::new(m2sigma)?;
    Ok(NoiseFitResult {
        variant: model.variant(),
        space: config.space,
        m2sigma,
        sigma_for_mu_b: d.sigma_for_moment(BOHR_MAGNETON),
        sigma_for_1p8_mu_b: d.sigma_for_moment(ALTERNATE_MOMENT_BOHR * BOHR_MAGNETON),
        chi2,
        records: results,
    })
}
