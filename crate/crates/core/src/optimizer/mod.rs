//! Smooth bound-constrained minimization and regularized nonlinear least
//! squares, both driven by finite-difference derivatives.
//!
//! Objectives are plain `Fn(&[f64]) -> f64` closures. A non-finite value marks
//! a point as infeasible: line searches and damping loops reject it and
//! shorten the step. Callers map model errors inside the search region to
//! `f64::INFINITY` and surface genuine errors by evaluating the start point
//! themselves.

mod bfgs;
mod lm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bfgs::minimize;
pub use lm::least_squares;

/// Box constraints. Infinite entries mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput(format!(
                "bounds need lower <= upper elementwise: {lower:?} / {upper:?}"
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Bounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// `center ± fraction·|center|` elementwise.
    pub fn relative(center: &[f64], fraction: f64) -> Self {
        let half: Vec<f64> = center.iter().map(|c| c.abs() * fraction).collect();
        Bounds {
            lower: center.iter().zip(&half).map(|(c, h)| c - h).collect(),
            upper: center.iter().zip(&half).map(|(c, h)| c + h).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn projected(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.project(&mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, l), u)| *l <= *v && *v <= *u)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: n,
                got: self.dim(),
            })
        }
    }
}

/// Tuning shared by [`minimize`] and [`least_squares`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative finite-difference step; the absolute step for coordinate
    /// `i` is `gradient_step · max(|x_i|, 1)`.
    pub gradient_step: f64,
    pub convergence_tol: f64,
    /// Tikhonov weight toward the regularization target (least squares).
    pub regularization_weight: f64,
    /// Central instead of forward differences.
    pub central_differences: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 200,
            gradient_step: 1.5e-8,
            convergence_tol: 1e-10,
            regularization_weight: 1e-6,
            central_differences: false,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_step > 0.0 && self.convergence_tol > 0.0) {
            return Err(Error::InvalidInput(
                "gradient_step and convergence_tol must be positive".into(),
            ));
        }
        if !(self.regularization_weight >= 0.0) {
            return Err(Error::InvalidInput("regularization_weight must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub minimizer: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_evals: usize,
}

/// Absolute finite-difference step for coordinate value `x`.
pub(crate) fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Perturbed coordinate value: forward unless that leaves the upper bound.
pub(crate) fn perturbed(x: f64, h: f64, upper: f64) -> f64 {
    if x + h <= upper {
        x + h
    } else {
        x - h
    }
}

/// Forward-difference gradient (central when `central` is set).
pub fn fd_gradient<F>(f: &F, x: &[f64], step: f64, central: bool) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let f0 = if central { 0.0 } else { f(x) };
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    gradient_with(f, x, f0, step, central, &Bounds::unbounded(x.len())).map(|(g, _)| g)
}

/// Gradient at `x` given `f0 = f(x)`, staying inside `bounds` where
/// possible. Returns the gradient and the number of evaluations spent.
pub(crate) fn gradient_with<F>(
    f: &F,
    x: &[f64],
    f0: f64,
    step: f64,
    central: bool,
    bounds: &Bounds,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let parts: Vec<Result<(f64, usize)>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = fd_step(x[i], step);
            let mut xp = x.to_vec();
            if central {
                xp[i] = x[i] + h;
                let fp = f(&xp);
                xp[i] = x[i] - h;
                let fm = f(&xp);
                if !(fp.is_finite() && fm.is_finite()) {
                    return Err(Error::NonFiniteDifference { coordinate: i });
                }
                Ok(((fp - fm) / (2.0 * h), 2))
            } else {
                xp[i] = perturbed(x[i], h, bounds.upper[i]);
                let fp = f(&xp);
                if !fp.is_finite() {
                    return Err(Error::NonFiniteDifference { coordinate: i });
                }
                Ok(((fp - f0) / (xp[i] - x[i]), 1))
            }
        })
        .collect();
    let mut grad = Vec::with_capacity(x.len());
    let mut evals = 0;
    for p in parts {
        let (g, e) = p?;
        grad.push(g);
        evals += e;
    }
    Ok((grad, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gradient_of_sum_and_constant() {
        let g = fd_gradient(&|x: &[f64]| x.iter().sum(), &[0.3, -2.0, 7.0], 1.5e-8, false).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-9 * 1e2, "{v}");
        }
        let g = fd_gradient(&|_: &[f64]| 4.2, &[1.0, 2.0], 1.5e-8, false).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_perturbation_names_coordinate() {
        let f = |x: &[f64]| if x[1] > 1.0 { f64::NAN } else { x[0] };
        let err = fd_gradient(&f, &[0.0, 1.0], 1e-6, false).unwrap_err();
        assert!(matches!(err, Error::NonFiniteDifference { coordinate: 1 }));
    }

    #[test]
    fn bounds_validation_and_projection() {
        assert!(Bounds::new(vec![0.0], vec![-1.0]).is_err());
        let b = Bounds::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(b.projected(&[-3.0, 5.0]), vec![0.0, 2.0]);
        assert!(b.contains(&[0.5, 1.5]));
        let r = Bounds::relative(&[10.0, -2.0], 0.1);
        assert_eq!(r.lower, vec![9.0, -2.2]);
    }

    fn quadratic(q: &[[f64; 3]; 3], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += x[i] * q[i][j] * x[j];
            }
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quadratic_gradient_matches_analytic(
            a in proptest::collection::vec(-2.0f64..2.0, 9),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            // symmetric Q = (A + Aᵀ)/2
            let q: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (a[3 * i + j] + a[3 * j + i])));
            let f = |v: &[f64]| quadratic(&q, v);
            let g = fd_gradient(&f, &x, 1.5e-8, false).unwrap();
            let exact: Vec<f64> = (0..3).map(|i| 2.0 * (0..3).map(|j| q[i][j] * x[j]).sum::<f64>()).collect();
            let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                prop_assert!((g[i] - exact[i]).abs() <= 1e-5 * scale, "{} vs {}", g[i], exact[i]);
            }
            // forward and central agree to O(step)
            let gc = fd_gradient(&f, &x, 1e-5, true).unwrap();
            let gf = fd_gradient(&f, &x, 1e-5, false).unwrap();
            for i in 0..3 {
                prop_assert!((gc[i] - gf[i]).abs() <= 1e-3 * scale);
            }
        }
    }
}
