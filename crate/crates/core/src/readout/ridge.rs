//! Ridge regression with an unpenalised intercept, solved through the SVD of
//! the centred design so a whole regularisation grid reuses one factorisation.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub coef: DVector<f64>,
    pub bias: f64,
    pub lambda: f64,
    /// Set when λ = 0 and the design was rank deficient (minimum-norm solution).
    pub rank_deficient: bool,
}

impl RidgeFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        if self.coef.is_empty() {
            return vec![self.bias; x.nrows()];
        }
        (x * &self.coef).iter().map(|v| v + self.bias).collect()
    }

    /// Weights laid out for a design with a trailing bias column.
    pub fn with_bias(&self) -> DVector<f64> {
        let mut w = DVector::zeros(self.coef.len() + 1);
        w.rows_mut(0, self.coef.len()).copy_from(&self.coef);
        w[self.coef.len()] = self.bias;
        w
    }
}

pub struct RidgeSolver {
    x_mean: DVector<f64>,
    y_mean: f64,
    v: DMatrix<f64>,
    singular: DVector<f64>,
    uty: DVector<f64>,
}

impl RidgeSolver {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (n, p) = x.shape();
        if n != y.len() {
            return Err(Error::config(format!("{n} feature rows but {} targets", y.len())));
        }
        if n == 0 {
            return Err(Error::insufficient("ridge fit on zero rows"));
        }
        let x_mean = DVector::from_fn(p, |j, _| x.column(j).mean());
        let y_mean = y.iter().sum::<f64>() / n as f64;
        if p == 0 {
            return Ok(Self {
                x_mean,
                y_mean,
                v: DMatrix::zeros(0, 0),
                singular: DVector::zeros(0),
                uty: DVector::zeros(0),
            });
        }
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= x_mean.transpose();
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = xc.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        Ok(Self { x_mean, y_mean, v: v_t.transpose(), singular: svd.singular_values, uty: u.transpose() * yc })
    }

    pub fn solve(&self, lambda: f64) -> RidgeFit {
        let p = self.x_mean.len();
        if p == 0 {
            return RidgeFit { coef: DVector::zeros(0), bias: self.y_mean, lambda, rank_deficient: false };
        }
        let s_max = self.singular.max();
        let tol = s_max * (self.v.nrows().max(self.uty.len()) as f64) * f64::EPSILON;
        let mut rank_deficient = false;
        let shrink = DVector::from_fn(self.singular.len(), |i, _| {
            let s = self.singular[i];
            if lambda > 0.0 {
                s / (s * s + lambda)
            } else if s > tol {
                1.0 / s
            } else {
                rank_deficient = true;
                0.0
            }
        });
        let coef = &self.v * shrink.component_mul(&self.uty);
        let bias = self.y_mean - self.x_mean.dot(&coef);
        RidgeFit { coef, bias, lambda, rank_deficient }
    }
}

/// `argmin ‖y − Xw − b‖² + λ‖w‖²`.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(RidgeSolver::new(x, y)?.solve(lambda))
}

/// Log-spaced grid `10^lo ..= 10^hi` with `n` points.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}
