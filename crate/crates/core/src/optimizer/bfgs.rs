//! Projected BFGS with finite-difference gradients and Armijo backtracking.

use nalgebra::{DMatrix, DVector};

use super::{gradient_with, Bounds, OptReport, OptimizerSettings};
use crate::error::{Error, Result};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Indices whose bound is active with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], bounds: &Bounds) -> Vec<bool> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| (xi <= bounds.lower[i] && gi > 0.0) || (xi >= bounds.upper[i] && gi < 0.0))
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial_inverse_hessian(n: usize, g: &[f64]) -> DMatrix<f64> {
    DMatrix::identity(n, n) / inf_norm(g).max(1.0)
}

enum LineSearch {
    Accepted(Vec<f64>, f64),
    /// Finite trial points existed but none decreased enough.
    NoDecrease,
    /// Every trial point was infeasible.
    NoFinite,
}

fn line_search<F>(f: &F, x: &[f64], fx: f64, g: &[f64], d: &[f64], bounds: &Bounds, evals: &mut usize) -> LineSearch
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut alpha = 1.0;
    let mut saw_finite = false;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        bounds.project(&mut trial);
        if trial == x {
            break;
        }
        let ft = f(&trial);
        *evals += 1;
        if ft.is_finite() {
            saw_finite = true;
            let decrease: f64 = g.iter().zip(&trial).zip(x).map(|((gi, t), xi)| gi * (t - xi)).sum();
            if ft <= fx + ARMIJO_C1 * decrease && ft < fx {
                return LineSearch::Accepted(trial, ft);
            }
        }
        alpha *= 0.5;
    }
    if saw_finite {
        LineSearch::NoDecrease
    } else {
        LineSearch::NoFinite
    }
}

/// Minimizes `f` over `bounds` starting from `x0`.
///
/// Quasi-Newton (BFGS inverse-Hessian update) on the free variables, with
/// iterates projected onto the box. Stops when the projected gradient's
/// infinity norm drops below `convergence_tol`, when no descent step can be
/// found, or after `max_iterations`.
pub fn minimize<F>(f: &F, x0: &[f64], bounds: &Bounds, settings: &OptimizerSettings) -> Result<OptReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    settings.validate()?;
    bounds.check_dim(x0.len())?;
    if !bounds.contains(x0) {
        return Err(Error::InvalidInput(format!("start point {x0:?} is outside the bounds")));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    if !fx.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let grad = |x: &[f64], fx: f64, evals: &mut usize| -> Result<Vec<f64>> {
        let (g, e) = gradient_with(f, x, fx, settings.gradient_step, settings.central_differences, bounds)?;
        *evals += e;
        Ok(g)
    };
    let mut g = grad(&x, fx, &mut evals)?;
    let mut h_inv = initial_inverse_hessian(n, &g);
    let mut fresh = true;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        let active = active_set(&x, &g, bounds);
        let pg: Vec<f64> = g
            .iter()
            .zip(&active)
            .map(|(gi, a)| if *a { 0.0 } else { *gi })
            .collect();
        if inf_norm(&pg) < settings.convergence_tol {
            converged = true;
            break;
        }
        let pg_vec = DVector::from_vec(pg.clone());
        let mut d: Vec<f64> = (-(&h_inv * &pg_vec)).iter().copied().collect();
        for (di, a) in d.iter_mut().zip(&active) {
            if *a {
                *di = 0.0;
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h_inv = initial_inverse_hessian(n, &pg);
            fresh = true;
            d = (-(&h_inv * &pg_vec)).iter().copied().collect();
        }

        let step = match line_search(f, &x, fx, &g, &d, bounds, &mut evals) {
            LineSearch::Accepted(xt, ft) => Some((xt, ft)),
            outcome if !fresh => {
                // retry once along the scaled steepest-descent direction
                h_inv = initial_inverse_hessian(n, &pg);
                fresh = true;
                let d: Vec<f64> = (-(&h_inv * &pg_vec)).iter().copied().collect();
                match line_search(f, &x, fx, &g, &d, bounds, &mut evals) {
                    LineSearch::Accepted(xt, ft) => Some((xt, ft)),
                    LineSearch::NoFinite if matches!(outcome, LineSearch::NoFinite) => {
                        return Err(Error::NoFiniteStep { best: x });
                    }
                    _ => None,
                }
            }
            LineSearch::NoFinite => return Err(Error::NoFiniteStep { best: x }),
            LineSearch::NoDecrease => None,
        };
        let Some((xt, ft)) = step else {
            break;
        };
        iterations += 1;

        let gt = grad(&xt, ft, &mut evals)?;
        let s = DVector::from_iterator(n, xt.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gt.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h_inv = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
            fresh = false;
        }
        x = xt;
        fx = ft;
        g = gt;
    }

    Ok(OptReport {
        minimizer: x,
        objective_value: fx,
        iterations,
        converged,
        objective_evals: evals,
    })
}
