//! Principal component analysis fitted on training rows only.
//!
//! Two equivalent routes are provided: [`Pca`] works on explicit feature rows
//! and keeps the loadings; [`project_with_gram`] works from the Gram matrix of
//! the rows and returns component scores directly, which is far cheaper for
//! wide tapped-delay features.

use crate::error::Result;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue
/// (stable for ties).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Number of leading components whose cumulative share reaches `var_frac`,
/// ignoring numerically-zero eigenvalues. Returns `(count, total)`.
fn components_needed(eigenvalues: &[f64], var_frac: f64) -> (usize, f64) {
    let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let floor = top * 1e-12;
    let positive: Vec<f64> = eigenvalues.iter().copied().take_while(|&v| v > floor).collect();
    let total: f64 = positive.iter().sum();
    if positive.is_empty() || total <= 0.0 {
        return (0, 0.0);
    }
    let target = var_frac * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (i, v) in positive.iter().enumerate() {
        cum += v;
        if cum >= target {
            return (i + 1, total);
        }
    }
    (positive.len(), total)
}

fn is_degenerate(centered_trace: f64, raw_sq: f64) -> bool {
    centered_trace <= 1e-24 * raw_sq.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// Orthonormal loadings, one column per retained component.
    pub basis: DMatrix<f64>,
    /// Variance share of each retained component.
    pub explained: Vec<f64>,
    /// Set when the training rows have no variance; `basis` then has zero columns.
    pub zero_variance: bool,
}

impl Pca {
    pub fn fit(x: &DMatrix<f64>, var_frac: f64) -> Result<Self> {
        let (n, dim) = x.shape();
        if n < 2 {
            return Err(crate::Error::insufficient(format!("PCA needs >= 2 rows, got {n}")));
        }
        if !(var_frac > 0.0 && var_frac <= 1.0) {
            return Err(crate::Error::config(format!("var_frac must lie in (0, 1], got {var_frac}")));
        }
        let mean = DVector::from_fn(dim, |j, _| x.column(j).mean());
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= mean.transpose();
        }
        let trace = xc.norm_squared();
        if is_degenerate(trace, x.norm_squared()) {
            return Ok(Self { mean, basis: DMatrix::zeros(dim, 0), explained: vec![], zero_variance: true });
        }

        let (values, mut basis) = if dim <= n {
            let (values, vectors) = sorted_eigen(xc.transpose() * &xc);
            (values, vectors)
        } else {
            let (values, alphas) = sorted_eigen(&xc * xc.transpose());
            let mut b = xc.transpose() * alphas;
            for (j, mut col) in b.column_iter_mut().enumerate() {
                if values[j] > 0.0 {
                    col /= values[j].sqrt();
                }
            }
            (values, b)
        };
        let (c, total) = components_needed(&values, var_frac);
        if c == 0 {
            return Ok(Self { mean, basis: DMatrix::zeros(dim, 0), explained: vec![], zero_variance: true });
        }
        basis = basis.columns(0, c).into_owned();
        for mut col in basis.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
            let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
            if col[imax] < 0.0 {
                col.neg_mut();
            }
        }
        let explained = values[..c].iter().map(|v| v / total).collect();
        Ok(Self { mean, basis, explained, zero_variance: false })
    }

    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn explained_total(&self) -> f64 {
        self.explained.iter().sum()
    }

    /// Component scores of `x` (rows are samples).
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= self.mean.transpose();
        }
        xc * &self.basis
    }
}

/// Result of [`project_with_gram`].
#[derive(Debug, Clone)]
pub struct GramProjection {
    /// Scores of the requested rows, one column per component.
    pub scores: DMatrix<f64>,
    pub explained: Vec<f64>,
    pub zero_variance: bool,
}

/// PCA scores computed from a Gram matrix `G[i, j] = ⟨x_i, x_j⟩`.
///
/// The basis is fitted on the rows listed in `train` (indices into `gram`), and
/// the rows listed in `project` are scored against it. Equivalent to
/// `Pca::fit(train rows).transform(project rows)` up to component signs.
pub fn project_with_gram(gram: &DMatrix<f64>, train: &[usize], project: &[usize], var_frac: f64) -> Result<GramProjection> {
    let n = train.len();
    if n < 2 {
        return Err(crate::Error::insufficient(format!("PCA needs >= 2 rows, got {n}")));
    }
    let inv_n = 1.0 / n as f64;
    let row_mean = |r: usize| -> f64 { train.iter().map(|&t| gram[(r, t)]).sum::<f64>() * inv_n };
    let train_means: Vec<f64> = train.iter().map(|&t| row_mean(t)).collect();
    let grand = train_means.iter().sum::<f64>() * inv_n;

    let k_tt = DMatrix::from_fn(n, n, |i, j| gram[(train[i], train[j])] - train_means[i] - train_means[j] + grand);
    let trace: f64 = (0..n).map(|i| k_tt[(i, i)]).sum();
    let raw: f64 = train.iter().map(|&t| gram[(t, t)]).sum();
    let empty = |p: &[usize]| GramProjection { scores: DMatrix::zeros(p.len(), 0), explained: vec![], zero_variance: true };
    if is_degenerate(trace, raw) {
        return Ok(empty(project));
    }
    let (values, alphas) = sorted_eigen(k_tt);
    let (c, total) = components_needed(&values, var_frac);
    if c == 0 {
        return Ok(empty(project));
    }
    let mut coeffs = alphas.columns(0, c).into_owned();
    for (j, mut col) in coeffs.column_iter_mut().enumerate() {
        col /= values[j].sqrt();
    }
    let k_pt = DMatrix::from_fn(project.len(), n, |i, j| {
        let r = project[i];
        gram[(r, train[j])] - row_mean(r) - train_means[j] + grand
    });
    Ok(GramProjection {
        scores: k_pt * coeffs,
        explained: values[..c].iter().map(|v| v / total).collect(),
        zero_variance: false,
    })
}
