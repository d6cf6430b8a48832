//! Rectangular SQUID loop geometry and the effective-width bookkeeping for
//! shadow-evaporated vertical arms.
//!
//! All lengths are SI metres. `inner_x`/`inner_y` are measured along the
//! inner edge of the loop; the centre-line perimeter is `2X + 2Y + 4W`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default film thickness of the bilayer aluminium (m).
pub const DEFAULT_THICKNESS: f64 = 190e-9;
/// Default London penetration depth of aluminium (m).
pub const DEFAULT_PENETRATION_DEPTH: f64 = 40e-9;
/// Default widening of the vertical arms from the double-angle evaporation (m).
pub const DEFAULT_SHADOW_OFFSET: f64 = 350e-9;

/// Film properties shared by every loop on a chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmParams {
    /// Film thickness b (m).
    pub thickness: f64,
    /// Penetration depth λ (m).
    pub penetration_depth: f64,
    /// Extra width on the vertical arms (m). Zero disables the correction.
    pub shadow_offset: f64,
}

impl Default for FilmParams {
    fn default() -> Self {
        Self {
            thickness: DEFAULT_THICKNESS,
            penetration_depth: DEFAULT_PENETRATION_DEPTH,
            shadow_offset: DEFAULT_SHADOW_OFFSET,
        }
    }
}

impl FilmParams {
    pub fn without_shadow(self) -> Self {
        Self {
            shadow_offset: 0.0,
            ..self
        }
    }
}

/// Validated rectangular SQUID loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SquidGeometry {
    inner_x: f64,
    inner_y: f64,
    width: f64,
    film: FilmParams,
}

/// One straight arm of the loop, including its share of the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmSegment {
    pub orientation: ArmOrientation,
    /// Centre-line length attributed to this arm (m).
    pub length: f64,
    /// Effective width of this arm (m).
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmOrientation {
    Horizontal,
    Vertical,
}

impl SquidGeometry {
    pub fn new(inner_x: f64, inner_y: f64, width: f64, film: FilmParams) -> Result<Self> {
        let FilmParams {
            thickness,
            penetration_depth,
            shadow_offset,
        } = film;
        let positive = [
            ("X", inner_x),
            ("Y", inner_y),
            ("W", width),
            ("b", thickness),
            ("lambda", penetration_depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(shadow_offset.is_finite() && shadow_offset >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "shadow offset must be non-negative, got {shadow_offset}"
            )));
        }
        if inner_x < width || inner_y < width {
            return Err(Error::InvalidGeometry(format!(
                "inner sides must be at least the wire width (X={inner_x}, Y={inner_y}, W={width})"
            )));
        }
        let min_width = 2.0 * penetration_depth * penetration_depth / thickness;
        if width <= min_width {
            return Err(Error::InvalidGeometry(format!(
                "W={width} must exceed 2λ²/b={min_width} so that λ²/(bW) < 1/2"
            )));
        }
        Ok(Self {
            inner_x,
            inner_y,
            width,
            film,
        })
    }

    /// Geometry from dimensions in micrometres with default film parameters.
    pub fn from_um(x_um: f64, y_um: f64, w_um: f64) -> Result<Self> {
        Self::new(x_um * 1e-6, y_um * 1e-6, w_um * 1e-6, FilmParams::default())
    }

    pub fn inner_x(&self) -> f64 {
        self.inner_x
    }

    pub fn inner_y(&self) -> f64 {
        self.inner_y
    }

    /// Nominal wire width W (m).
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn film(&self) -> FilmParams {
        self.film
    }

    pub fn thickness(&self) -> f64 {
        self.film.thickness
    }

    pub fn penetration_depth(&self) -> f64 {
        self.film.penetration_depth
    }

    pub fn shadow_offset(&self) -> f64 {
        self.film.shadow_offset
    }

    pub fn with_film(&self, film: FilmParams) -> Result<Self> {
        Self::new(self.inner_x, self.inner_y, self.width, film)
    }

    /// Centre-line perimeter `2X + 2Y + 4W` (m), always at nominal width.
    pub fn perimeter(&self) -> f64 {
        2.0 * self.inner_x + 2.0 * self.inner_y + 4.0 * self.width
    }

    /// The four arms. Each arm owns one corner's worth of length (W), so the
    /// lengths sum to the perimeter; vertical arms carry the shadow offset.
    pub fn arm_segments(&self) -> [ArmSegment; 4] {
        let horizontal = ArmSegment {
            orientation: ArmOrientation::Horizontal,
            length: self.inner_x + self.width,
            width: self.width,
        };
        let vertical = ArmSegment {
            orientation: ArmOrientation::Vertical,
            length: self.inner_y + self.width,
            width: self.width + self.film.shadow_offset,
        };
        [horizontal, vertical, horizontal, vertical]
    }

    /// Length-weighted mean arm width ⟨W⟩ (m).
    pub fn mean_width(&self) -> f64 {
        if self.film.shadow_offset == 0.0 {
            return self.width;
        }
        let arms = self.arm_segments();
        let total: f64 = arms.iter().map(|a| a.length).sum();
        arms.iter().map(|a| a.length * a.width).sum::<f64>() / total
    }
}

/// Free-function form of [`SquidGeometry::perimeter`].
pub fn perimeter(g: &SquidGeometry) -> f64 {
    g.perimeter()
}

pub fn arm_segments(g: &SquidGeometry) -> [ArmSegment; 4] {
    g.arm_segments()
}

pub fn mean_width(g: &SquidGeometry) -> f64 {
    g.mean_width()
}
