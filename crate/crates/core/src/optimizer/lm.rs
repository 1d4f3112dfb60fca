//! Levenberg–Marquardt with Tikhonov regularization and optional box bounds.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{fd_step, perturbed, Bounds, OptReport, OptimizerSettings};
use crate::error::{Error, Result};

const DAMPING_START: f64 = 1e-3;
const DAMPING_MAX: f64 = 1e16;

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn cost(r: &[f64], theta: &[f64], target: &[f64], weight: f64) -> f64 {
    let data: f64 = r.iter().map(|v| v * v).sum();
    let reg: f64 = theta.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    data + weight * reg
}

/// Forward-difference Jacobian, one column per parameter, computed in parallel.
fn jacobian<F>(
    res: &F,
    theta: &[f64],
    r0: &[f64],
    step: f64,
    central: bool,
    bounds: &Bounds,
) -> Result<(DMatrix<f64>, usize)>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let m = r0.len();
    let cols: Vec<Result<(Vec<f64>, usize)>> = (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let h = fd_step(theta[i], step);
            let mut tp = theta.to_vec();
            if central {
                tp[i] = theta[i] + h;
                let rp = res(&tp);
                tp[i] = theta[i] - h;
                let rm = res(&tp);
                if rp.len() != m || rm.len() != m || !all_finite(&rp) || !all_finite(&rm) {
                    return Err(Error::NonFiniteDifference { coordinate: i });
                }
                Ok((rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect(), 2))
            } else {
                tp[i] = perturbed(theta[i], h, bounds.upper[i]);
                let dx = tp[i] - theta[i];
                let rp = res(&tp);
                if rp.len() != m || !all_finite(&rp) {
                    return Err(Error::NonFiniteDifference { coordinate: i });
                }
                Ok((rp.iter().zip(r0).map(|(a, b)| (a - b) / dx).collect(), 1))
            }
        })
        .collect();
    let mut jac = DMatrix::zeros(m, theta.len());
    let mut evals = 0;
    for (i, col) in cols.into_iter().enumerate() {
        let (c, e) = col?;
        jac.set_column(i, &DVector::from_vec(c));
        evals += e;
    }
    Ok((jac, evals))
}

/// Minimizes `‖r(θ)‖² + w‖θ − target‖²` from `theta0`, with
/// `w = settings.regularization_weight`.
///
/// Marquardt scaling: the damping term is `μ·diag(JᵀJ + wI)`, starting at
/// `μ = 1e-3`, multiplied by 10 on rejected steps and divided by 10 on
/// accepted ones. Stops when an accepted step lowers the cost by less than
/// `convergence_tol` relative, when no damping yields a decrease, or after
/// `max_iterations`. The reported `objective_value` is the full regularized
/// cost at the minimizer.
pub fn least_squares<F>(
    res: &F,
    theta0: &[f64],
    target: &[f64],
    bounds: Option<&Bounds>,
    settings: &OptimizerSettings,
) -> Result<OptReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    settings.validate()?;
    let n = theta0.len();
    if target.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: target.len(),
        });
    }
    let free = Bounds::unbounded(n);
    let bounds = bounds.unwrap_or(&free);
    bounds.check_dim(n)?;
    let w = settings.regularization_weight;

    let mut theta = bounds.projected(theta0);
    let mut r = res(&theta);
    let mut evals = 1;
    if r.is_empty() || !all_finite(&r) {
        return Err(Error::NonFiniteStart);
    }
    let m = r.len();
    let mut c = cost(&r, &theta, target, w);
    let mut mu = DAMPING_START;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        if c == 0.0 {
            converged = true;
            break;
        }
        let (jac, e) = jacobian(
            res,
            &theta,
            &r,
            settings.gradient_step,
            settings.central_differences,
            bounds,
        )?;
        evals += e;
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        for i in 0..n {
            normal[(i, i)] += w;
        }
        let rv = DVector::from_column_slice(&r);
        let reg = DVector::from_iterator(n, theta.iter().zip(target).map(|(a, b)| w * (a - b)));
        let grad = &jt * &rv + reg;
        let diag_floor = normal.diagonal().max().max(1.0) * 1e-15;

        let mut accepted = None;
        while mu <= DAMPING_MAX {
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += mu * normal[(i, i)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let mut trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            bounds.project(&mut trial);
            if trial == theta {
                break;
            }
            let rt = res(&trial);
            evals += 1;
            if rt.len() == m && all_finite(&rt) {
                let ct = cost(&rt, &trial, target, w);
                if ct < c {
                    accepted = Some((trial, rt, ct));
                    mu = (mu / 10.0).max(1e-20);
                    break;
                }
            }
            mu *= 10.0;
        }
        let Some((trial, rt, ct)) = accepted else {
            // no damping level decreases the cost: a local minimum to FD precision
            converged = true;
            break;
        };
        iterations += 1;
        let rel = (c - ct) / c;
        theta = trial;
        r = rt;
        c = ct;
        if rel < settings.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(OptReport {
        minimizer: theta,
        objective_value: c,
        iterations,
        converged,
        objective_evals: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain() -> OptimizerSettings {
        OptimizerSettings {
            regularization_weight: 0.0,
            ..OptimizerSettings::default()
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let res = |p: &[f64]| xs.iter().map(|x| p[0] * x + p[1] - (2.0 * x - 1.0)).collect::<Vec<_>>();
        let r = least_squares(&res, &[0.0, 0.0], &[0.0, 0.0], None, &plain()).unwrap();
        assert!(
            (r.minimizer[0] - 2.0).abs() < 1e-7 && (r.minimizer[1] + 1.0).abs() < 1e-7,
            "{r:?}"
        );
        assert!(r.converged);
    }

    #[test]
    fn regularization_splits_the_difference() {
        // minimize (θ-4)² + 1·θ² → θ = 2
        let res = |p: &[f64]| vec![p[0] - 4.0];
        let s = OptimizerSettings {
            regularization_weight: 1.0,
            ..OptimizerSettings::default()
        };
        let r = least_squares(&res, &[0.0], &[0.0], None, &s).unwrap();
        assert!((r.minimizer[0] - 2.0).abs() < 1e-6, "{r:?}");
        assert!((r.objective_value - 8.0).abs() < 1e-9);
    }

    #[test]
    fn zero_residual_start_returns_immediately() {
        let res = |p: &[f64]| vec![p[0] - 1.0, p[1] + 2.0];
        let r = least_squares(&res, &[1.0, -2.0], &[1.0, -2.0], None, &OptimizerSettings::default()).unwrap();
        assert_eq!(r.minimizer, vec![1.0, -2.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.objective_value, 0.0);
    }

    #[test]
    fn nonlinear_exponential_fit() {
        let ts: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
        let model = |a: f64, k: f64, t: f64| a * (-k * t).exp();
        let res = |p: &[f64]| {
            ts.iter()
                .map(|&t| model(p[0], p[1], t) - model(3.0, 0.7, t))
                .collect::<Vec<_>>()
        };
        let r = least_squares(&res, &[1.0, 0.1], &[0.0, 0.0], None, &plain()).unwrap();
        assert!(
            (r.minimizer[0] - 3.0).abs() < 1e-6 && (r.minimizer[1] - 0.7).abs() < 1e-6,
            "{r:?}"
        );
    }

    #[test]
    fn bounds_are_respected() {
        let res = |p: &[f64]| vec![p[0] - 5.0];
        let b = Bounds::new(vec![0.0], vec![3.0]).unwrap();
        let r = least_squares(&res, &[1.0], &[0.0], Some(&b), &plain()).unwrap();
        assert_eq!(r.minimizer, vec![3.0]);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let res = |_: &[f64]| vec![f64::NAN];
        assert!(matches!(
            least_squares(&res, &[0.0], &[0.0], None, &plain()),
            Err(Error::NonFiniteStart)
        ));
    }

    #[test]
    fn objective_matches_reevaluation() {
        let res = |p: &[f64]| vec![p[0] * p[0] - 2.0, p[0] - p[1]];
        let s = OptimizerSettings::default();
        let r = least_squares(&res, &[1.0, 0.0], &[0.0, 0.0], None, &s).unwrap();
        let again = cost(&res(&r.minimizer), &r.minimizer, &[0.0, 0.0], s.regularization_weight);
        assert_eq!(r.objective_value, again);
    }
}
