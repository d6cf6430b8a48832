//! Closed-form partial inductances of straight parallel filaments.

use std::f64::consts::PI;

use crate::constants::MU_0;

/// Geometric mean distance of a rectangular cross-section from itself,
/// `0.2235 (a + b)`.
pub fn rectangle_gmd(dx: f64, dy: f64) -> f64 {
    0.2235 * (dx + dy)
}

/// Mutual partial inductance of two aligned parallel filaments of length
/// `length` at separation `distance`, in units of μ0·length/2π.
///
/// `asinh(l/d) - sqrt(1 + (d/l)²) + d/l`
pub fn parallel_filament_factor(length: f64, distance: f64) -> f64 {
    let ratio = distance / length;
    (length / distance).asinh() - (1.0 + ratio * ratio).sqrt() + ratio
}

/// Mutual partial inductance (H) of two aligned parallel filaments.
pub fn parallel_filament_mutual(length: f64, distance: f64) -> f64 {
    MU_0 * length / (2.0 * PI) * parallel_filament_factor(length, distance)
}

/// Partial self inductance (H) of a straight bar of rectangular cross-section,
/// using the filament formula at the cross-section's GMD.
pub fn rectangular_bar_self(length: f64, dx: f64, dy: f64) -> f64 {
    parallel_filament_mutual(length, rectangle_gmd(dx, dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    /// Neumann double line integral (μ0/4π) ∫∫ dz1 dz2 / |r1 - r2|, evaluated
    /// numerically with panels graded towards the diagonal.
    fn neumann_oracle(length: f64, d: f64) -> f64 {
        let gl = GaussLegendre::new(12);
        let inner = |z1: f64| {
            let mut breaks = vec![0.0, length];
            let mut s = d;
            while s < length {
                for b in [z1 - s, z1 + s] {
                    if b > 0.0 && b < length {
                        breaks.push(b);
                    }
                }
                s *= 4.0;
            }
            breaks.push(z1);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            gl.integrate_panels(&breaks, |z2| 1.0 / (d * d + (z1 - z2).powi(2)).sqrt())
        };
        let outer: Vec<f64> = (0..=64).map(|k| length * k as f64 / 64.0).collect();
        1e-7 * gl.integrate_panels(&outer, inner)
    }

    #[test]
    fn mutual_matches_neumann_quadrature() {
        for (l, d) in [
            (100e-6, 20e-9),
            (100e-6, 1e-6),
            (1e-3, 50e-9),
            (10e-6, 2e-6),
        ] {
            let closed = parallel_filament_mutual(l, d);
            let oracle = neumann_oracle(l, d);
            assert!(
                ((closed - oracle) / oracle).abs() < 1e-3,
                "l={l} d={d}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn long_filament_limit() {
        let (l, d) = (1e-3, 20e-9);
        let approx = MU_0 * l / (2.0 * PI) * ((2.0 * l / d).ln() - 1.0);
        let exact = parallel_filament_mutual(l, d);
        assert!(((exact - approx) / exact).abs() < 1e-3);
    }

    #[test]
    fn mutual_decreases_with_distance() {
        let l = 100e-6;
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let m = parallel_filament_mutual(l, k as f64 * 10e-9);
            assert!(m < prev);
            prev = m;
        }
    }
}
