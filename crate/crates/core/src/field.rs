//! Magnetic field of a solved strip on the interfaces around it.
//!
//! Each patch carries a uniform current along z. Far from a patch (more than
//! three patch diagonals) it is treated as a finite straight filament at its
//! centre; closer in, the exact two-dimensional field of a uniform
//! rectangular bar is used. Only the in-plane components (B_x, B_y) exist.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::MU_0;
use crate::error::{Error, Result};
use crate::strip::{CrossSectionGrid, CurrentDistribution, Patch};

/// Near-field cut-over, in patch diagonals.
pub const NEAR_FIELD_DIAGONALS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    /// Aluminium–vacuum, above the film.
    Top,
    /// Silicon–aluminium, under the film.
    Bottom,
    SideLeft,
    SideRight,
    /// Silicon–vacuum beside the strip, x < 0.
    SubstrateLeft,
    /// Silicon–vacuum beside the strip, x > W.
    SubstrateRight,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 6] = [
        InterfaceKind::Top,
        InterfaceKind::Bottom,
        InterfaceKind::SideLeft,
        InterfaceKind::SideRight,
        InterfaceKind::SubstrateLeft,
        InterfaceKind::SubstrateRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceKind::Top => "top",
            InterfaceKind::Bottom => "bottom",
            InterfaceKind::SideLeft => "side_left",
            InterfaceKind::SideRight => "side_right",
            InterfaceKind::SubstrateLeft => "substrate_left",
            InterfaceKind::SubstrateRight => "substrate_right",
        }
    }

    pub fn is_substrate(self) -> bool {
        matches!(
            self,
            InterfaceKind::SubstrateLeft | InterfaceKind::SubstrateRight
        )
    }

    pub fn is_side(self) -> bool {
        matches!(self, InterfaceKind::SideLeft | InterfaceKind::SideRight)
    }
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where and how densely to sample one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub kind: InterfaceKind,
    /// Distance of the sampling line from the material surface (m).
    pub standoff: f64,
    /// Lateral reach of substrate interfaces (m); ignored otherwise.
    pub extent: f64,
    /// Number of evaluation points.
    pub resolution: usize,
}

impl InterfaceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.standoff > 0.0 && self.standoff.is_finite()) {
            return Err(Error::Config(format!(
                "{}: standoff must be positive, got {}",
                self.kind, self.standoff
            )));
        }
        if self.resolution < 16 {
            return Err(Error::Config(format!(
                "{}: resolution must be at least 16, got {}",
                self.kind, self.resolution
            )));
        }
        if self.kind.is_substrate() && !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::Config(format!(
                "{}: extent must be positive, got {}",
                self.kind, self.extent
            )));
        }
        Ok(())
    }
}

/// Sampling defaults shared by all interfaces of one strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Standoff from the material surface (m).
    pub standoff: f64,
    /// Substrate reach as a multiple of the strip width.
    pub substrate_extent_factor: f64,
    /// Evaluation points per patch along faces of the strip.
    pub points_per_patch: usize,
    /// Evaluation points on each substrate strip.
    pub substrate_resolution: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            standoff: 1e-9,
            substrate_extent_factor: 20.0,
            points_per_patch: 4,
            substrate_resolution: 256,
        }
    }
}

impl FieldConfig {
    pub fn spec(&self, kind: InterfaceKind, grid: &CrossSectionGrid) -> InterfaceSpec {
        let along = match kind {
            InterfaceKind::Top | InterfaceKind::Bottom => grid.nx(),
            InterfaceKind::SideLeft | InterfaceKind::SideRight => grid.ny(),
            _ => 0,
        };
        let resolution = if kind.is_substrate() {
            self.substrate_resolution
        } else {
            (self.points_per_patch * along).max(16)
        };
        InterfaceSpec {
            kind,
            standoff: self.standoff,
            extent: self.substrate_extent_factor * grid.width(),
            resolution,
        }
    }

    pub fn specs(&self, kinds: &[InterfaceKind], grid: &CrossSectionGrid) -> Vec<InterfaceSpec> {
        kinds.iter().map(|&k| self.spec(k, grid)).collect()
    }
}

/// |B|/I sampled along one interface, with the quadrature weight of each
/// sample (the length of the cell it stands for).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldProfile {
    pub spec: InterfaceSpec,
    /// Position along the interface (m): x for horizontal interfaces, y for
    /// side faces.
    pub coordinates: Vec<f64>,
    /// Cell length attached to each coordinate (m).
    pub weights: Vec<f64>,
    /// |B|/I (T/A).
    pub field_over_current: Vec<f64>,
    /// Total strip current the field is normalised to (A).
    pub reference_current: f64,
}

impl FieldProfile {
    /// ∫ (B/I)² along the interface (T² m / A²).
    pub fn variance_integral(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.field_over_current)
            .map(|(w, b)| w * b * b)
            .sum()
    }

    /// Appends `interface,coord_m,B_over_I_T_per_A` rows (no header).
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        for (c, b) in self.coordinates.iter().zip(&self.field_over_current) {
            writeln!(w, "{},{:e},{:e}", self.spec.kind, c, b)?;
        }
        Ok(())
    }
}

pub const PROFILE_CSV_HEADER: &str = "interface,coord_m,B_over_I_T_per_A";

/// Antiderivative used for the rectangular-bar field:
/// ∂²G/∂a∂b = b / (a² + b²), dropping terms linear in `a`.
fn bar_primitive(a: f64, b: f64) -> f64 {
    let r2 = a * a + b * b;
    let log_term = if a == 0.0 { 0.0 } else { 0.5 * a * r2.ln() };
    let atan_term = if b == 0.0 { 0.0 } else { b * (a / b).atan() };
    log_term + atan_term
}

/// Field (T) at `(x, y)` of a uniform current `current` (A) along +z in the
/// infinitely long rectangular bar `patch`.
pub fn rectangular_bar_field(patch: &Patch, current: f64, x: f64, y: f64) -> [f64; 2] {
    let (x1, x2) = (
        patch.x_center - 0.5 * patch.dx,
        patch.x_center + 0.5 * patch.dx,
    );
    let (y1, y2) = (
        patch.y_center - 0.5 * patch.dy,
        patch.y_center + 0.5 * patch.dy,
    );
    let (u1, u2) = (x - x2, x - x1);
    let (v1, v2) = (y - y2, y - y1);
    let corners = |f: &dyn Fn(f64, f64) -> f64| f(u2, v2) - f(u1, v2) - f(u2, v1) + f(u1, v1);
    let sx = corners(&|u, v| bar_primitive(u, v));
    let sy = corners(&|u, v| bar_primitive(v, u));
    let k = MU_0 * current / patch.area / (2.0 * PI);
    [-k * sx, k * sy]
}

/// Field (T) at `(x, y)` in the mid-plane of a straight filament of length
/// `length` through `(xc, yc)`.
pub fn filament_field(xc: f64, yc: f64, current: f64, length: f64, x: f64, y: f64) -> [f64; 2] {
    let (rx, ry) = (x - xc, y - yc);
    let d2 = rx * rx + ry * ry;
    let half = 0.5 * length;
    let finite = half / (half * half + d2).sqrt();
    let k = MU_0 * current / (2.0 * PI * d2) * finite;
    [-k * ry, k * rx]
}

fn check_outside(grid: &CrossSectionGrid, x: f64, y: f64) -> Result<()> {
    if (0.0..=grid.width()).contains(&x) && (0.0..=grid.thickness()).contains(&y) {
        return Err(Error::Domain(format!(
            "evaluation point ({x:e}, {y:e}) lies inside the strip"
        )));
    }
    Ok(())
}

fn field_unchecked(dist: &CurrentDistribution, x: f64, y: f64) -> [f64; 2] {
    let grid = dist.grid();
    let near = NEAR_FIELD_DIAGONALS * grid.diagonal();
    let near2 = near * near;
    let mut b = [0.0, 0.0];
    for (p, &i) in grid.patches().iter().zip(dist.patch_currents()) {
        let (rx, ry) = (x - p.x_center, y - p.y_center);
        let f = if rx * rx + ry * ry > near2 {
            filament_field(p.x_center, p.y_center, i, dist.strip_length(), x, y)
        } else {
            rectangular_bar_field(p, i, x, y)
        };
        b[0] += f[0];
        b[1] += f[1];
    }
    b
}

/// (B_x, B_y) in tesla at each point. Points must lie outside the strip.
pub fn biot_savart_at_points(
    dist: &CurrentDistribution,
    points: &[(f64, f64)],
) -> Result<Vec<[f64; 2]>> {
    for &(x, y) in points {
        check_outside(dist.grid(), x, y)?;
    }
    Ok(points
        .par_iter()
        .map(|&(x, y)| field_unchecked(dist, x, y))
        .collect())
}

struct Samples {
    points: Vec<(f64, f64)>,
    coordinates: Vec<f64>,
    weights: Vec<f64>,
}

fn uniform_cells(start: f64, length: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = length / n as f64;
    (
        (0..n).map(|i| start + (i as f64 + 0.5) * h).collect(),
        vec![h; n],
    )
}

/// Cells on (0, extent], the first of width `first`, then growing
/// geometrically. Returns distances from the edge and cell widths.
fn graded_cells(first: f64, extent: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let first = first.min(extent / n as f64);
    let ratio = (extent / first).powf(1.0 / (n - 1) as f64);
    let mut bounds = vec![0.0];
    for k in 0..n {
        bounds.push(first * ratio.powi(k as i32));
    }
    bounds[n] = extent;
    let mids = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let widths = bounds.windows(2).map(|w| w[1] - w[0]).collect();
    (mids, widths)
}

fn sample(spec: &InterfaceSpec, grid: &CrossSectionGrid) -> Samples {
    let (w, b, s, n) = (
        grid.width(),
        grid.thickness(),
        spec.standoff,
        spec.resolution,
    );
    let (points, coordinates, weights) = match spec.kind {
        InterfaceKind::Top | InterfaceKind::Bottom => {
            let y = if spec.kind == InterfaceKind::Top {
                b + s
            } else {
                -s
            };
            let (xs, ws) = uniform_cells(0.0, w, n);
            (xs.iter().map(|&x| (x, y)).collect(), xs, ws)
        }
        InterfaceKind::SideLeft | InterfaceKind::SideRight => {
            let x = if spec.kind == InterfaceKind::SideLeft {
                -s
            } else {
                w + s
            };
            let (ys, ws) = uniform_cells(0.0, b, n);
            (ys.iter().map(|&y| (x, y)).collect(), ys, ws)
        }
        InterfaceKind::SubstrateLeft | InterfaceKind::SubstrateRight => {
            let first = 0.25 * grid.dx().min(grid.dy());
            let (us, ws) = graded_cells(first, spec.extent, n);
            let xs: Vec<f64> = if spec.kind == InterfaceKind::SubstrateLeft {
                us.iter().map(|u| -u).collect()
            } else {
                us.iter().map(|u| w + u).collect()
            };
            (xs.iter().map(|&x| (x, -s)).collect(), xs, ws)
        }
    };
    Samples {
        points,
        coordinates,
        weights,
    }
}

/// Samples |B|/I on each requested interface.
pub fn interface_profiles(
    dist: &CurrentDistribution,
    specs: &[InterfaceSpec],
) -> Result<Vec<FieldProfile>> {
    let current = dist.total_current();
    specs
        .iter()
        .map(|spec| {
            spec.validate()?;
            let s = sample(spec, dist.grid());
            let field = biot_savart_at_points(dist, &s.points)?;
            let field_over_current = field.iter().map(|b| b[0].hypot(b[1]) / current).collect();
            Ok(FieldProfile {
                spec: *spec,
                coordinates: s.coordinates,
                weights: s.weights,
                field_over_current,
                reference_current: current,
            })
        })
        .collect()
}

/// ∫(B/I)² per interface.
pub fn variance_by_interface(profiles: &[FieldProfile]) -> BTreeMap<InterfaceKind, f64> {
    profiles
        .iter()
        .map(|p| (p.spec.kind, p.variance_integral()))
        .collect()
}
