//! Linear readout: tapped-delay embedding, temporal splits, PCA, ridge
//! regression and the prediction / memory metrics built on them.

pub mod metrics;
pub mod pca;
pub mod ridge;

use crate::error::{Error, Result};
use crate::reservoir::StateTrajectory;
use metrics::{median, nrmse, pearson, r_squared};
use nalgebra::DMatrix;
use pca::{project_with_gram, Pca};
use rayon::prelude::*;
use ridge::{log_grid, RidgeFit, RidgeSolver};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    /// Share of training variance the PCA basis must explain.
    pub var_frac: f64,
    /// Variance share kept for memory-curve readouts.
    pub memory_var_frac: f64,
    pub lambda_grid: Vec<f64>,
    /// Train / validation / test fractions.
    pub ratios: [f64; 3],
    pub n_offsets: usize,
    pub d_max: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self { var_frac: 0.95, memory_var_frac: 1.0, lambda_grid: log_grid(-8.0, 2.0, 11), ratios: [0.70, 0.15, 0.15], n_offsets: 6, d_max: 50 }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("var_frac", self.var_frac), ("memory_var_frac", self.memory_var_frac)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::config("lambda_grid is empty"));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::config(format!("lambda_grid contains invalid value {l}")));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0)) || (self.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios must be positive and sum to 1, got {:?}", self.ratios)));
        }
        if self.n_offsets == 0 {
            return Err(Error::config("n_offsets must be >= 1"));
        }
        Ok(())
    }

    pub fn split_spec(&self, offset_index: usize) -> SplitSpec {
        SplitSpec { ratios: self.ratios, n_offsets: self.n_offsets, offset_index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub n_offsets: usize,
    pub offset_index: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { ratios: [0.70, 0.15, 0.15], n_offsets: 6, offset_index: 0 }
    }
}

/// Row indices (into the unrotated row sequence) of each part, in time order
/// after rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn all(&self) -> Vec<usize> {
        self.train.iter().chain(&self.val).chain(&self.test).copied().collect()
    }
}

/// Rotate `n_rows` rows by `offset_index * n_rows / n_offsets`, drop the `k`
/// rows just after the seam (their delay taps reach across it), then cut
/// contiguous train / val / test blocks: floor, floor, remainder.
pub fn split(n_rows: usize, k: usize, spec: &SplitSpec) -> Result<Split> {
    if spec.n_offsets == 0 || spec.offset_index >= spec.n_offsets {
        return Err(Error::config(format!("offset index {} outside 0..{}", spec.offset_index, spec.n_offsets)));
    }
    let shift = spec.offset_index * n_rows / spec.n_offsets;
    let mut order: Vec<usize> = (shift..n_rows).collect();
    let wrapped_from = if shift > 0 { k.min(shift) } else { 0 };
    order.extend(wrapped_from..shift);
    let m = order.len();
    let n_train = (spec.ratios[0] * m as f64 + 1e-9).floor() as usize;
    let n_val = (spec.ratios[1] * m as f64 + 1e-9).floor() as usize;
    let n_test = m.saturating_sub(n_train + n_val);
    if n_train < 2 || n_val < 2 || n_test < 2 {
        return Err(Error::insufficient(format!(
            "{n_rows} rows give a {n_train}/{n_val}/{n_test} split; each part needs at least 2"
        )));
    }
    Ok(Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Tapped-delay features `φ[n] = [r[n]; r[n−1]; …; r[n−k]]` for `n = k..len`.
pub fn embed(states: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if k >= states.len() {
        return Err(Error::config(format!("embedding depth {k} needs more than {} states", states.len())));
    }
    let dim = states[0].len();
    let rows = states.len() - k;
    Ok(DMatrix::from_fn(rows, (k + 1) * dim, |i, j| {
        let lag = j / dim;
        states[i + k - lag][j % dim]
    }))
}

/// `y[n] = u[n + h]` for every `n` that has a future value.
pub fn make_targets(u: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::config("horizon must be >= 1"));
    }
    if h >= u.len() {
        return Err(Error::config(format!("horizon {h} needs more than {} inputs", u.len())));
    }
    Ok(u[h..].to_vec())
}

/// Pick the candidate with the lowest validation NRMSE; near-ties go to the
/// larger λ. Returns the fit and its validation score.
pub fn select_lambda(candidates: &[f64], solver: &RidgeSolver, val_x: &DMatrix<f64>, val_y: &[f64]) -> Result<(RidgeFit, f64)> {
    let mut sorted = candidates.to_vec();
    if sorted.is_empty() {
        return Err(Error::config("no lambda candidates"));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best: Option<(RidgeFit, f64)> = None;
    for &lambda in &sorted {
        let fit = solver.solve(lambda);
        let score = nrmse(&fit.predict(val_x), val_y)?;
        let better = match &best {
            None => true,
            Some((_, b)) => score < b * (1.0 - 1e-9) - 1e-12,
        };
        if better {
            best = Some((fit, score));
        }
    }
    Ok(best.expect("non-empty grid"))
}

fn take_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Fitted PCA + ridge readout.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    pub pca: Pca,
    pub ridge: RidgeFit,
    pub lambda: f64,
    pub k: usize,
    pub h: usize,
}

impl ReadoutModel {
    /// Predictions for embedded feature rows.
    pub fn predict(&self, features: &DMatrix<f64>) -> Vec<f64> {
        self.ridge.predict(&self.pca.transform(features))
    }

    /// Prediction from the most recent `k + 1` states, newest last.
    pub fn predict_from_history(&self, history: &[Vec<f64>]) -> Result<f64> {
        if history.len() < self.k + 1 {
            return Err(Error::insufficient(format!("need {} states, got {}", self.k + 1, history.len())));
        }
        let tail = &history[history.len() - self.k - 1..];
        Ok(self.predict(&embed(tail, self.k)?)[0])
    }
}

/// Test-set outcome for one (H, k, offset).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub h: usize,
    pub k: usize,
    pub offset: usize,
    pub lambda: f64,
    pub n_components: usize,
    pub nrmse: f64,
    /// NaN when the readout prediction is constant.
    pub correlation: f64,
}

/// Per-offset records plus their medians.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub h: usize,
    pub k: usize,
    pub records: Vec<EvalRecord>,
    pub median_nrmse: f64,
    pub median_correlation: f64,
    pub median_lambda: f64,
    pub median_components: f64,
}

impl Evaluation {
    fn from_records(h: usize, k: usize, records: Vec<EvalRecord>) -> Self {
        let col = |f: fn(&EvalRecord) -> f64| -> Vec<f64> { records.iter().map(f).filter(|v| v.is_finite()).collect() };
        Self {
            h,
            k,
            median_nrmse: median(&col(|r| r.nrmse)),
            median_correlation: median(&col(|r| r.correlation)),
            median_lambda: median(&col(|r| r.lambda)),
            median_components: median(&col(|r| r.n_components as f64)),
            records,
        }
    }
}

/// Pearson correlation, or NaN for a constant prediction.
fn correlation_or_nan(pred: &[f64], target: &[f64]) -> Result<f64> {
    match pearson(pred, target) {
        Ok(r) => Ok(r),
        Err(Error::Metric(_)) if metrics::std_dev(target) > 0.0 => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

struct Outcome {
    lambda: f64,
    n_components: usize,
    pred: Vec<f64>,
    target: Vec<f64>,
}

/// PCA on train rows, λ chosen on val rows, scored on test rows. Row `i` of
/// the task is row `i + base` of `gram`.
fn fit_on_gram(gram: &DMatrix<f64>, base: usize, targets: &[f64], split: &Split, var_frac: f64, cfg: &ReadoutConfig) -> Result<Outcome> {
    let to_gram = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|i| i + base).collect() };
    let all = split.all();
    let proj = project_with_gram(gram, &to_gram(&split.train), &to_gram(&all), var_frac)?;
    let n_tr = split.train.len();
    let n_va = split.val.len();
    let z_tr = proj.scores.rows(0, n_tr).into_owned();
    let z_va = proj.scores.rows(n_tr, n_va).into_owned();
    let z_te = proj.scores.rows(n_tr + n_va, split.test.len()).into_owned();
    let solver = RidgeSolver::new(&z_tr, &pick(targets, &split.train))?;
    let (fit, _) = select_lambda(&cfg.lambda_grid, &solver, &z_va, &pick(targets, &split.val))?;
    Ok(Outcome {
        lambda: fit.lambda,
        n_components: proj.scores.ncols(),
        pred: fit.predict(&z_te),
        target: pick(targets, &split.test),
    })
}

/// Inner products of mean-removed states, shared by every task on one trajectory.
pub struct StateGram {
    base: DMatrix<f64>,
}

impl StateGram {
    pub fn new(states: &[Vec<f64>]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::insufficient("empty trajectory"));
        }
        let dim = states[0].len();
        let n = states.len();
        let mut mean = vec![0.0; dim];
        for s in states {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centred = DMatrix::from_fn(n, dim, |i, j| states[i][j] - mean[j]);
        Ok(Self { base: &centred * centred.transpose() })
    }

    pub fn len(&self) -> usize {
        self.base.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gram matrix of the depth-`k` embedding; row `i` is time `i + k`.
    pub fn lagged(&self, k: usize) -> Result<DMatrix<f64>> {
        let n = self.len();
        if k >= n {
            return Err(Error::config(format!("embedding depth {k} needs more than {n} states")));
        }
        let mut g = self.base.clone();
        for depth in 1..=k {
            let m = n - depth;
            g = DMatrix::from_fn(m, m, |i, j| self.base[(i, j)] + g[(i + 1, j + 1)]);
        }
        Ok(g)
    }
}

fn target_rows(traj: &StateTrajectory, h: usize, k: usize) -> Result<Vec<f64>> {
    let len = traj.len();
    if k >= len {
        return Err(Error::config(format!("embedding depth {k} needs more than {len} states")));
    }
    if h + k >= len {
        return Err(Error::insufficient(format!("k = {k} and H = {h} leave no rows out of {len}")));
    }
    // row i is time i + k; target u[i + k + h]
    Ok(traj.inputs[k + h..].to_vec())
}

fn evaluate_offset(lagged: &DMatrix<f64>, targets: &[f64], h: usize, k: usize, offset: usize, cfg: &ReadoutConfig) -> Result<EvalRecord> {
    let split = split(targets.len(), k, &cfg.split_spec(offset))?;
    let out = fit_on_gram(lagged, 0, targets, &split, cfg.var_frac, cfg)?;
    Ok(EvalRecord {
        h,
        k,
        offset,
        lambda: out.lambda,
        n_components: out.n_components,
        nrmse: nrmse(&out.pred, &out.target)?,
        correlation: correlation_or_nan(&out.pred, &out.target)?,
    })
}

/// Predict `u[n + h]` from the depth-`k` embedding at every split offset.
/// `h = 0` reconstructs the current input.
pub fn evaluate(traj: &StateTrajectory, h: usize, k: usize, cfg: &ReadoutConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let targets = target_rows(traj, h, k)?;
    let lagged = StateGram::new(&traj.states)?.lagged(k)?;
    let records = (0..cfg.n_offsets)
        .into_par_iter()
        .map(|o| evaluate_offset(&lagged, &targets, h, k, o, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_records(h, k, records))
}

/// All (H, k) pairs, sorted by H then k, offsets evaluated in parallel.
pub fn sweep(traj: &StateTrajectory, h_list: &[usize], k_list: &[usize], cfg: &ReadoutConfig) -> Result<Vec<Evaluation>> {
    cfg.validate()?;
    let mut hs = h_list.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let gram = StateGram::new(&traj.states)?;
    let lagged = ks.par_iter().map(|&k| gram.lagged(k)).collect::<Result<Vec<_>>>()?;
    let mut tasks = Vec::new();
    for &h in &hs {
        for (ki, &k) in ks.iter().enumerate() {
            let targets = target_rows(traj, h, k)?;
            for o in 0..cfg.n_offsets {
                tasks.push((h, ki, k, o, targets.clone()));
            }
        }
    }
    let records = tasks
        .par_iter()
        .map(|(h, ki, k, o, targets)| evaluate_offset(&lagged[*ki], targets, *h, *k, *o, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let mut it = records.into_iter();
    for &h in &hs {
        for &k in &ks {
            let recs: Vec<_> = it.by_ref().take(cfg.n_offsets).collect();
            out.push(Evaluation::from_records(h, k, recs));
        }
    }
    Ok(out)
}

/// Explicit-basis fit for one (H, k, offset); returns the model and its test record.
pub fn fit_readout(traj: &StateTrajectory, h: usize, k: usize, offset: usize, cfg: &ReadoutConfig) -> Result<(ReadoutModel, EvalRecord)> {
    cfg.validate()?;
    let targets = target_rows(traj, h, k)?;
    let features = embed(&traj.states, k)?;
    let split = split(targets.len(), k, &cfg.split_spec(offset))?;
    let pca = Pca::fit(&take_rows(&features, &split.train), cfg.var_frac)?;
    let z = |idx: &[usize]| pca.transform(&take_rows(&features, idx));
    let solver = RidgeSolver::new(&z(&split.train), &pick(&targets, &split.train))?;
    let (ridge, _) = select_lambda(&cfg.lambda_grid, &solver, &z(&split.val), &pick(&targets, &split.val))?;
    let pred = ridge.predict(&z(&split.test));
    let target = pick(&targets, &split.test);
    let record = EvalRecord {
        h,
        k,
        offset,
        lambda: ridge.lambda,
        n_components: pca.n_components(),
        nrmse: nrmse(&pred, &target)?,
        correlation: correlation_or_nan(&pred, &target)?,
    };
    Ok((ReadoutModel { lambda: ridge.lambda, pca, ridge, k, h }, record))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryCurve {
    /// `r2[d - 1]` is the clipped R² for delay `d`.
    pub r2: Vec<f64>,
    pub mc: f64,
}

/// Reconstruct `u[n − d]` from `r[n]` for `d = 1..=d_max`, scoring R² on test rows.
pub fn memory_curve(traj: &StateTrajectory, d_max: usize, cfg: &ReadoutConfig) -> Result<MemoryCurve> {
    cfg.validate()?;
    if d_max == 0 {
        return Ok(MemoryCurve { r2: vec![], mc: 0.0 });
    }
    if d_max >= traj.len() {
        return Err(Error::insufficient(format!("d_max = {d_max} needs more than {} states", traj.len())));
    }
    let gram = StateGram::new(&traj.states)?;
    let spec = cfg.split_spec(0);
    // fail early, before any fitting
    split(traj.len() - d_max, 0, &spec)?;
    let r2 = (1..=d_max)
        .into_par_iter()
        .map(|d| {
            let rows = traj.len() - d;
            let targets = &traj.inputs[..rows];
            let out = fit_on_gram(&gram.base, d, targets, &split(rows, 0, &spec)?, cfg.memory_var_frac, cfg)?;
            Ok(r_squared(&out.pred, &out.target)?.clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mc = r2.iter().sum();
    Ok(MemoryCurve { r2, mc })
}
