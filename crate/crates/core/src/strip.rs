//! Static current distribution over the rectangular cross-section of a long
//! superconducting strip.
//!
//! The cross-section `[0, W] × [0, b]` is tiled by rectangular patches, each a
//! straight filament of length `strip_length` along z. Every filament sees
//! the same voltage, so the currents solve
//!
//! ```text
//! (L + diag(L_kin)) I = c · 1,    Σ I = 1 A
//! ```
//!
//! where `L` holds the magnetic partial inductances and `L_kin = μ0 λ² l / A_k`
//! is the London kinetic inductance of patch `k`. With no normal-fluid
//! channel the problem is real and independent of frequency.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::MU_0;
use crate::error::{Error, Result};
use crate::inductance::{parallel_filament_factor, rectangle_gmd};

/// Default cap on the number of patches in one cross-section.
pub const DEFAULT_PATCH_CAP: usize = 20_000;
/// Default strip length as a multiple of `max(W, b)`.
pub const DEFAULT_LENGTH_FACTOR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Patch {
    pub x_center: f64,
    pub y_center: f64,
    pub dx: f64,
    pub dy: f64,
    pub area: f64,
}

/// Uniform tiling of the strip cross-section. Patch `k = j·nx + i` sits in
/// column `i` (along the width) and row `j` (along the thickness).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectionGrid {
    patches: Vec<Patch>,
    width: f64,
    thickness: f64,
    nx: usize,
    ny: usize,
}

fn even_at_least_two(n: usize) -> usize {
    (n + n % 2).max(2)
}

/// Ceiling that ignores floating-point dust just above an integer.
fn safe_ceil(v: f64) -> usize {
    (v * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

impl CrossSectionGrid {
    /// Grid with explicit (even) patch counts.
    pub fn with_counts(width: f64, thickness: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(width > 0.0 && thickness > 0.0 && width.is_finite() && thickness.is_finite()) {
            return Err(Error::Config(format!(
                "strip dimensions must be positive (W={width}, b={thickness})"
            )));
        }
        if nx < 2 || ny < 2 || !nx.is_multiple_of(2) || !ny.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "patch counts must be even and at least 2 (nx={nx}, ny={ny})"
            )));
        }
        let dx = width / nx as f64;
        let dy = thickness / ny as f64;
        let mut patches = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                patches.push(Patch {
                    x_center: (i as f64 + 0.5) * dx,
                    y_center: (j as f64 + 0.5) * dy,
                    dx,
                    dy,
                    area: dx * dy,
                });
            }
        }
        Ok(Self {
            patches,
            width,
            thickness,
            nx,
            ny,
        })
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.thickness / self.ny as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Patch diagonal (m).
    pub fn diagonal(&self) -> f64 {
        self.dx().hypot(self.dy())
    }
}

/// Uniform grid with patch sides at most `target_patch`, coarsened (keeping
/// the aspect of the counts) until `nx·ny ≤ cap`. Counts are even so both
/// mirror axes fall on patch boundaries.
pub fn discretize_cross_section(
    width: f64,
    thickness: f64,
    target_patch: f64,
    cap: usize,
) -> Result<CrossSectionGrid> {
    if !(target_patch > 0.0 && target_patch.is_finite()) {
        return Err(Error::Config(format!(
            "target patch size must be positive, got {target_patch}"
        )));
    }
    if !(width > 0.0 && thickness > 0.0) {
        return Err(Error::Config(format!(
            "strip dimensions must be positive (W={width}, b={thickness})"
        )));
    }
    if cap < 4 {
        return Err(Error::Config(format!(
            "patch cap {cap} cannot hold the minimum 2×2 grid"
        )));
    }
    let mut nx = even_at_least_two(safe_ceil(width / target_patch));
    let mut ny = even_at_least_two(safe_ceil(thickness / target_patch));
    if nx * ny > cap {
        let shrink = ((nx * ny) as f64 / cap as f64).sqrt();
        let even_floor = |n: usize| {
            let m = (n as f64 / shrink).floor() as usize;
            (m - m % 2).max(2)
        };
        nx = even_floor(nx);
        ny = even_floor(ny);
        while nx * ny > cap {
            if nx >= ny && nx > 2 {
                nx -= 2;
            } else {
                ny -= 2;
            }
        }
    }
    CrossSectionGrid::with_counts(width, thickness, nx, ny)
}

/// Physical and numerical parameters of one strip solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Filament length used in the partial-inductance formulas (m).
    pub strip_length: f64,
    /// Normal-fluid conductivity (S/m). Only the superfluid limit (0) is solved.
    pub normal_conductivity: f64,
    /// London penetration depth (m).
    pub penetration_depth: f64,
}

impl SolverParams {
    /// Default length `1000 · max(W, b)`.
    pub fn for_strip(width: f64, thickness: f64, penetration_depth: f64) -> Self {
        Self {
            strip_length: DEFAULT_LENGTH_FACTOR * width.max(thickness),
            normal_conductivity: 0.0,
            penetration_depth,
        }
    }

    fn validate(&self, grid: &CrossSectionGrid) -> Result<()> {
        let min_len = 100.0 * grid.width().max(grid.thickness());
        if !(self.strip_length >= min_len) {
            return Err(Error::Config(format!(
                "strip length {} must be at least 100·max(W, b) = {min_len}",
                self.strip_length
            )));
        }
        if !(self.penetration_depth > 0.0 && self.penetration_depth.is_finite()) {
            return Err(Error::Config(format!(
                "penetration depth must be positive, got {}",
                self.penetration_depth
            )));
        }
        if self.normal_conductivity != 0.0 {
            return Err(Error::Config(
                "a normal-fluid channel makes the distribution frequency dependent; \
                 only normal_conductivity = 0 is supported"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Magnetic partial-inductance matrix in units of μ0·l/2π (dimensionless).
fn partial_inductance_factors(grid: &CrossSectionGrid, length: f64) -> Result<DMatrix<f64>> {
    let patches = grid.patches();
    let n = patches.len();
    let mut data = vec![0.0; n * n];
    // Column-major: column m occupies data[m*n .. (m+1)*n].
    data.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(m, col)| -> Result<()> {
            let pm = &patches[m];
            for (k, out) in col.iter_mut().enumerate() {
                let pk = &patches[k];
                let d = if k == m {
                    rectangle_gmd(pk.dx, pk.dy)
                } else {
                    (pk.x_center - pm.x_center).hypot(pk.y_center - pm.y_center)
                };
                if d <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "patches {k} and {m} have coincident centres"
                    )));
                }
                *out = parallel_filament_factor(length, d);
            }
            Ok(())
        })?;
    Ok(DMatrix::from_vec(n, n, data))
}

/// Partial-inductance matrix (H): filament mutuals between patch centres,
/// GMD self terms on the diagonal.
pub fn partial_inductance_matrix(
    grid: &CrossSectionGrid,
    params: &SolverParams,
) -> Result<DMatrix<f64>> {
    params.validate(grid)?;
    let scale = MU_0 * params.strip_length / (2.0 * PI);
    Ok(partial_inductance_factors(grid, params.strip_length)? * scale)
}

/// Kinetic inductance of each patch (H): `μ0 λ² l / A_k`.
pub fn kinetic_diagonal(grid: &CrossSectionGrid, params: &SolverParams) -> Vec<f64> {
    let lam2 = params.penetration_depth * params.penetration_depth;
    grid.patches()
        .iter()
        .map(|p| MU_0 * lam2 * params.strip_length / p.area)
        .collect()
}

/// Patch currents for unit total current.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentDistribution {
    grid: CrossSectionGrid,
    patch_currents: Vec<f64>,
    strip_length: f64,
}

impl CurrentDistribution {
    /// Distribution from explicit patch currents, rescaled to 1 A total.
    pub fn from_currents(
        grid: CrossSectionGrid,
        currents: Vec<f64>,
        strip_length: f64,
    ) -> Result<Self> {
        if currents.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} currents for {} patches",
                currents.len(),
                grid.len()
            )));
        }
        let total: f64 = currents.iter().sum();
        if !(total.is_finite() && total != 0.0) {
            return Err(Error::Numerical(format!(
                "total current {total} cannot be normalised"
            )));
        }
        let patch_currents = currents.into_iter().map(|i| i / total).collect();
        Ok(Self {
            grid,
            patch_currents,
            strip_length,
        })
    }

    /// Uniform volume density (currents proportional to patch area).
    pub fn uniform(grid: CrossSectionGrid, strip_length: f64) -> Self {
        let currents = grid.patches().iter().map(|p| p.area).collect();
        Self::from_currents(grid, currents, strip_length).expect("patch areas are positive")
    }

    pub fn grid(&self) -> &CrossSectionGrid {
        &self.grid
    }

    /// Current in each patch (A), summing to 1.
    pub fn patch_currents(&self) -> &[f64] {
        &self.patch_currents
    }

    pub fn strip_length(&self) -> f64 {
        self.strip_length
    }

    pub fn total_current(&self) -> f64 {
        self.patch_currents.iter().sum()
    }

    /// Volume current density of patch `k` (A/m²).
    pub fn volume_density(&self, k: usize) -> f64 {
        self.patch_currents[k] / self.grid.patches()[k].area
    }

    /// Volume density at the patch containing `(x, y)`, if inside the strip.
    pub fn density_at(&self, x: f64, y: f64) -> Option<f64> {
        let g = &self.grid;
        if !(0.0..=g.width()).contains(&x) || !(0.0..=g.thickness()).contains(&y) {
            return None;
        }
        let i = ((x / g.dx()) as usize).min(g.nx() - 1);
        let j = ((y / g.dy()) as usize).min(g.ny() - 1);
        Some(self.volume_density(g.index(i, j)))
    }

    /// Largest relative deviation from the x ↔ W−x and y ↔ b−y mirror images.
    pub fn symmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let scale = self
            .patch_currents
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let v = self.patch_currents[g.index(i, j)];
                let mx = self.patch_currents[g.index(g.nx() - 1 - i, j)];
                let my = self.patch_currents[g.index(i, g.ny() - 1 - j)];
                worst = worst.max((v - mx).abs()).max((v - my).abs());
            }
        }
        worst / scale
    }

    /// Writes `x_m,y_m,J_A_per_m2` at every patch centre.
    pub fn write_density_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_m,y_m,J_A_per_m2")?;
        for (k, p) in self.grid.patches().iter().enumerate() {
            writeln!(
                w,
                "{:e},{:e},{:e}",
                p.x_center,
                p.y_center,
                self.volume_density(k)
            )?;
        }
        Ok(())
    }
}

/// Solves the equal-voltage filament system by dense Cholesky factorisation.
pub fn solve_current_distribution(
    grid: &CrossSectionGrid,
    params: &SolverParams,
) -> Result<CurrentDistribution> {
    params.validate(grid)?;
    // Work in units of μ0 l/2π: L_kin/(μ0 l/2π) = 2π λ²/A.
    let mut system = partial_inductance_factors(grid, params.strip_length)?;
    let lam2 = params.penetration_depth * params.penetration_depth;
    for (k, p) in grid.patches().iter().enumerate() {
        system[(k, k)] += 2.0 * PI * lam2 / p.area;
    }
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::Numerical("impedance matrix is not positive definite".into()))?;
    let rhs = DVector::from_element(grid.len(), 1.0);
    let currents = chol.solve(&rhs);
    if currents.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite patch currents".into()));
    }
    CurrentDistribution::from_currents(
        grid.clone(),
        currents.as_slice().to_vec(),
        params.strip_length,
    )
}

/// Sheet current density K(x) obtained by summing each column over the
/// thickness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceCurrent {
    /// Column centres (m).
    pub x: Vec<f64>,
    /// K(x) (A/m).
    pub density: Vec<f64>,
    /// Column width (m).
    pub dx: f64,
}

impl SurfaceCurrent {
    /// ∫K dx (A).
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dx
    }
}

pub fn surface_current_density(dist: &CurrentDistribution) -> SurfaceCurrent {
    let g = dist.grid();
    let dx = g.dx();
    let x = (0..g.nx()).map(|i| (i as f64 + 0.5) * dx).collect();
    let density = (0..g.nx())
        .map(|i| {
            (0..g.ny())
                .map(|j| dist.patch_currents()[g.index(i, j)])
                .sum::<f64>()
                / dx
        })
        .collect();
    SurfaceCurrent { x, density, dx }
}
