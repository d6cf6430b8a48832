//! Discretisation studies of the numeric variance integrals.
//!
//! Each check recomputes the per-interface integrals with one numerical
//! parameter refined and reports the largest relative change over the
//! interfaces and the total.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::InterfaceKind;
use crate::noise::{variance_on_grid, ModelVariant, NumericConfig, VarianceBreakdown};
use crate::strip::{discretize_cross_section, CrossSectionGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// Cross-section and thresholds for a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub width: f64,
    pub thickness: f64,
    pub penetration_depth: f64,
    pub variant: ModelVariant,
    /// Override of the baseline column count.
    pub nx: Option<usize>,
    /// Override of the baseline row count.
    pub ny: Option<usize>,
    pub numeric: NumericConfig,
    pub grid_threshold: f64,
    pub length_threshold: f64,
    pub standoff_threshold: f64,
    pub resolution_threshold: f64,
    pub extent_threshold: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            width: 1e-6,
            thickness: 190e-9,
            penetration_depth: 40e-9,
            variant: ModelVariant::NumericAll,
            nx: None,
            ny: None,
            numeric: NumericConfig::default(),
            grid_threshold: 0.02,
            length_threshold: 0.01,
            standoff_threshold: 0.02,
            resolution_threshold: 0.01,
            extent_threshold: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub name: String,
    pub baseline_parameter: f64,
    pub refined_parameter: f64,
    pub baseline: BTreeMap<InterfaceKind, f64>,
    pub refined: BTreeMap<InterfaceKind, f64>,
    pub baseline_total: f64,
    pub refined_total: f64,
    /// Largest relative change over the interfaces and the total.
    pub relative_delta: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub width: f64,
    pub thickness: f64,
    pub penetration_depth: f64,
    pub variant: ModelVariant,
    pub nx: usize,
    pub ny: usize,
    pub checks: Vec<ConvergenceCheck>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn check(&self, name: &str) -> Option<&ConvergenceCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn relative_delta(a: &VarianceBreakdown, b: &VarianceBreakdown) -> f64 {
    let rel = |x: f64, y: f64| ((y - x) / x).abs();
    a.per_interface
        .iter()
        .map(|(k, v)| rel(*v, b.per_interface[k]))
        .fold(rel(a.total, b.total), f64::max)
}

fn check(
    name: &str,
    params: (f64, f64),
    base: &VarianceBreakdown,
    refined: &VarianceBreakdown,
    threshold: f64,
) -> ConvergenceCheck {
    let relative_delta = relative_delta(base, refined);
    ConvergenceCheck {
        name: name.into(),
        baseline_parameter: params.0,
        refined_parameter: params.1,
        baseline: base.per_interface.clone(),
        refined: refined.per_interface.clone(),
        baseline_total: base.total,
        refined_total: refined.total,
        relative_delta,
        threshold,
        passed: relative_delta < threshold,
    }
}

fn baseline_grid(cfg: &ConvergenceConfig) -> Result<CrossSectionGrid> {
    let auto = discretize_cross_section(
        cfg.width,
        cfg.thickness,
        cfg.numeric.patch_over_lambda * cfg.penetration_depth,
        cfg.numeric.patch_cap,
    )?;
    let nx = cfg.nx.unwrap_or(auto.nx());
    let ny = cfg.ny.unwrap_or(auto.ny());
    CrossSectionGrid::with_counts(cfg.width, cfg.thickness, nx, ny)
}

/// Runs the grid, strip-length, standoff, evaluation-resolution and
/// substrate-extent refinements.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.variant == ModelVariant::AnalyticTop {
        return Err(Error::Config("convergence needs a numeric variant".into()));
    }
    let lambda = cfg.penetration_depth;
    let grid = baseline_grid(cfg)?;
    let fine_grid =
        CrossSectionGrid::with_counts(cfg.width, cfg.thickness, 2 * grid.nx(), 2 * grid.ny())?;
    let base = variance_on_grid(&grid, lambda, cfg.variant, &cfg.numeric)?;
    let mut checks = Vec::new();

    let fine = variance_on_grid(&fine_grid, lambda, cfg.variant, &cfg.numeric)?;
    checks.push(check(
        "grid_doubling",
        (grid.nx() as f64, fine_grid.nx() as f64),
        &base,
        &fine,
        cfg.grid_threshold,
    ));

    let mut longer = cfg.numeric;
    longer.length_factor *= 2.0;
    let long = variance_on_grid(&grid, lambda, cfg.variant, &longer)?;
    checks.push(check(
        "strip_length_doubling",
        (cfg.numeric.length_factor, longer.length_factor),
        &base,
        &long,
        cfg.length_threshold,
    ));

    let mut closer = cfg.numeric;
    closer.field.standoff *= 0.5;
    let close = variance_on_grid(&grid, lambda, cfg.variant, &closer)?;
    checks.push(check(
        "standoff_halving",
        (cfg.numeric.field.standoff, closer.field.standoff),
        &base,
        &close,
        cfg.standoff_threshold,
    ));

    let mut denser = cfg.numeric;
    denser.field.points_per_patch *= 2;
    denser.field.substrate_resolution *= 2;
    let dense = variance_on_grid(&grid, lambda, cfg.variant, &denser)?;
    checks.push(check(
        "resolution_doubling",
        (
            cfg.numeric.field.points_per_patch as f64,
            denser.field.points_per_patch as f64,
        ),
        &base,
        &dense,
        cfg.resolution_threshold,
    ));

    if cfg.variant == ModelVariant::NumericAll {
        let mut wider = cfg.numeric;
        wider.field.substrate_extent_factor *= 2.0;
        wider.field.substrate_resolution =
            wider.field.substrate_resolution + wider.field.substrate_resolution / 8;
        let wide = variance_on_grid(&grid, lambda, cfg.variant, &wider)?;
        // only the total is gated: the substrate strips change by construction
        let mut c = check(
            "substrate_extent_doubling",
            (
                cfg.numeric.field.substrate_extent_factor,
                wider.field.substrate_extent_factor,
            ),
            &base,
            &wide,
            cfg.extent_threshold,
        );
        c.relative_delta = ((wide.total - base.total) / base.total).abs();
        c.passed = c.relative_delta < c.threshold;
        checks.push(c);
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        width: cfg.width,
        thickness: cfg.thickness,
        penetration_depth: lambda,
        variant: cfg.variant,
        nx: grid.nx(),
        ny: grid.ny(),
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::strip_variance;

    #[test]
    fn reference_geometry_converges() {
        let r = run_convergence(&ConvergenceConfig::default()).unwrap();
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        assert_eq!((r.nx, r.ny), (50, 10));
        for c in &r.checks {
            assert!(c.passed, "{} changed by {}", c.name, c.relative_delta);
        }
        assert!(r.passed);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"schema_version\":1"));
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let cfg = ConvergenceConfig {
            nx: Some(4),
            ..ConvergenceConfig::default()
        };
        let r = run_convergence(&cfg).unwrap();
        assert!(!r.check("grid_doubling").unwrap().passed);
        assert!(!r.passed);
    }

    #[test]
    fn staggered_evaluation_grids_agree() {
        let base = NumericConfig::default();
        let mut other = base;
        other.field.points_per_patch = 3;
        other.field.substrate_resolution = 200;
        let a = strip_variance(1e-6, 190e-9, 40e-9, ModelVariant::NumericAll, &base).unwrap();
        let b = strip_variance(1e-6, 190e-9, 40e-9, ModelVariant::NumericAll, &other).unwrap();
        for (k, v) in &a.per_interface {
            assert!(((b.per_interface[k] - v) / v).abs() < 0.02, "{k}");
        }
    }

    #[test]
    fn side_faces_grow_with_thickness() {
        let cfg = NumericConfig::default();
        let thin = strip_variance(1e-6, 20e-9, 40e-9, ModelVariant::NumericAll, &cfg).unwrap();
        let thick = strip_variance(1e-6, 190e-9, 40e-9, ModelVariant::NumericAll, &cfg).unwrap();
        assert!(thick.side_share() > thin.side_share());
        let sides = thin.per_interface[&InterfaceKind::SideLeft]
            + thin.per_interface[&InterfaceKind::SideRight];
        assert!(sides < 0.2 * thin.per_interface[&InterfaceKind::Top]);
    }

    #[test]
    fn analytic_variant_rejected() {
        let cfg = ConvergenceConfig {
            variant: ModelVariant::AnalyticTop,
            ..ConvergenceConfig::default()
        };
        assert!(matches!(run_convergence(&cfg), Err(Error::Config(_))));
    }
}
