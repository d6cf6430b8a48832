//! JSON run configuration. Every section is optional; unknown keys are
//! rejected. Lengths are in metres unless a field name says otherwise.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use squidnoise::convergence::ConvergenceConfig;
use squidnoise::dephasing::{ExtractionConfig, SamplingPlan, SynthesisTruth};
use squidnoise::noise::{FitConfig, ModelVariant, NumericConfig};
use squidnoise::{Error, FilmParams, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub geometry: GeometrySection,
    pub solver: NumericConfig,
    pub sweep: SweepSection,
    pub fit: FitSection,
    pub synthesis: SynthesisSection,
    pub extraction: ExtractionConfig,
    pub convergence: ConvergenceConfig,
}

/// Strip cross-section used by `solve`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub width: f64,
    pub film: FilmParams,
    pub variant: ModelVariant,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            width: 1e-6,
            film: FilmParams::default(),
            variant: ModelVariant::NumericAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Inner perimeter 2X+2Y (µm) at fixed W and aspect ratio.
    Perimeter,
    /// Wire width W (µm) at fixed inner perimeter and aspect ratio.
    Width,
    /// Film thickness b (nm) at fixed W.
    Thickness,
    /// Aspect ratio X/Y at fixed inner perimeter and W.
    Aspect,
}

impl SweepKind {
    pub fn column(self) -> &'static str {
        match self {
            SweepKind::Perimeter => "inner_perimeter_um",
            SweepKind::Width => "width_um",
            SweepKind::Thickness => "thickness_nm",
            SweepKind::Aspect => "aspect",
        }
    }
}

/// Swept values are in the unit named by [`SweepKind::column`]; the fixed
/// loop parameters are in metres.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub kind: Option<SweepKind>,
    pub values: Vec<f64>,
    pub variants: Vec<ModelVariant>,
    pub width: f64,
    pub inner_perimeter: f64,
    pub aspect: f64,
    pub film: FilmParams,
    /// Surface spin density (m⁻²) used for the √A_Φ column, with m = µB.
    pub sigma: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: None,
            values: Vec::new(),
            variants: vec![
                ModelVariant::AnalyticTop,
                ModelVariant::NumericTop,
                ModelVariant::NumericAll,
            ],
            width: 1e-6,
            inner_perimeter: 34.32e-6,
            aspect: 9.16 / 8.0,
            film: FilmParams::default(),
            sigma: 1.2e17,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub dataset: Option<PathBuf>,
    pub variant: ModelVariant,
    pub film: FilmParams,
    pub options: FitConfig,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            dataset: None,
            variant: ModelVariant::AnalyticTop,
            film: FilmParams::default(),
            options: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub truth: SynthesisTruth,
    pub plan: SamplingPlan,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
