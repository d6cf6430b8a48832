//! Small dense Levenberg–Marquardt solver with box bounds.
//!
//! Problems supply weighted residuals `(y_i - f_i(p)) / σ_i` and their
//! Jacobian. Bounds are enforced by projecting each trial step onto the box.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;
    fn num_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Row-major `num_residuals × num_params` derivative of the residuals.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative chi² reduction below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative step size below which the iteration stops.
    pub xtol: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-13,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ at the solution, not rescaled by the reduced chi².
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl LmReport {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            0.0
        } else {
            self.chi2 / self.dof as f64
        }
    }

    /// Standard errors, scaled by √(χ²/dof) when `scale` is set.
    pub fn std_errors(&self, scale: bool) -> Vec<f64> {
        let s = if scale { self.reduced_chi2() } else { 1.0 };
        (0..self.params.len())
            .map(|i| (self.covariance[(i, i)].max(0.0) * s).sqrt())
            .collect()
    }
}

fn project(p: &mut [f64], opts: &LmOptions) {
    if let Some(lo) = &opts.lower {
        for (x, l) in p.iter_mut().zip(lo) {
            *x = x.max(*l);
        }
    }
    if let Some(hi) = &opts.upper {
        for (x, h) in p.iter_mut().zip(hi) {
            *x = x.min(*h);
        }
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<P: LeastSquaresProblem>(
    problem: &P,
    initial: &[f64],
    opts: &LmOptions,
) -> Result<LmReport> {
    let n = problem.num_params();
    let m = problem.num_residuals();
    if initial.len() != n {
        return Err(Error::Config(format!(
            "expected {n} initial parameters, got {}",
            initial.len()
        )));
    }
    if m < n {
        return Err(Error::Fit(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut p = initial.to_vec();
    project(&mut p, opts);
    let mut r = vec![0.0; m];
    let mut trial_r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut chi2 = sum_sq(&r);
    if !chi2.is_finite() {
        return Err(Error::Fit(
            "non-finite residuals at the initial guess".into(),
        ));
    }
    let mut jac = DMatrix::zeros(m, n);
    let mut damping = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        // Parameters sitting on a bound with the descent direction pointing
        // outwards are frozen for this step.
        let frozen: Vec<bool> = (0..n)
            .map(|i| {
                let at_lower = opts.lower.as_ref().is_some_and(|lo| p[i] <= lo[i]);
                let at_upper = opts.upper.as_ref().is_some_and(|hi| p[i] >= hi[i]);
                (at_lower && g[i] > 0.0) || (at_upper && g[i] < 0.0)
            })
            .collect();
        let mut g = g;
        for i in (0..n).filter(|&i| frozen[i]) {
            g[i] = 0.0;
        }
        if chi2 == 0.0 || g.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while damping < 1e20 {
            let mut damped = a.clone();
            for i in 0..n {
                if frozen[i] {
                    for j in 0..n {
                        damped[(i, j)] = 0.0;
                        damped[(j, i)] = 0.0;
                    }
                    damped[(i, i)] = 1.0;
                    continue;
                }
                let d = a[(i, i)].max(1e-300);
                damped[(i, i)] += damping * d;
            }
            let step = match damped.cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            project(&mut trial, opts);
            problem.residuals(&trial, &mut trial_r);
            let trial_chi2 = sum_sq(&trial_r);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let reduction = (chi2 - trial_chi2) / chi2.max(f64::MIN_POSITIVE);
                let step_norm = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + opts.xtol))
                    .fold(0.0, f64::max);
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                chi2 = trial_chi2;
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if reduction < opts.ftol || step_norm < opts.xtol {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: stationary to machine precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "no convergence after {iterations} iterations (chi2 = {chi2:.6e})"
        )));
    }
    problem.jacobian(&p, &mut jac);
    let a = jac.transpose() * &jac;
    let covariance = a
        .clone()
        .try_inverse()
        .or_else(|| a.pseudo_inverse(1e-300).ok())
        .ok_or_else(|| Error::Numerical("singular normal matrix".into()))?;
    Ok(LmReport {
        params: p,
        covariance,
        chi2,
        dof: m - n,
        iterations,
    })
}
