//! Mackey–Glass input generation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Initial history on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum History {
    Constant(f64),
    /// Values on the integration grid from `-tau` to `0` inclusive.
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgParams {
    pub beta: f64,
    pub gamma: f64,
    pub n_exp: f64,
    pub tau: f64,
    pub dt_int: f64,
    pub history: History,
    /// Integration time discarded before sampling (MG time units).
    pub transient: f64,
    /// Integration steps between consecutive samples.
    pub stride: usize,
    pub out_range: [f64; 2],
}

impl Default for MgParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            n_exp: 10.0,
            tau: 17.0,
            dt_int: 0.1,
            history: History::Constant(1.2),
            transient: 1000.0,
            stride: 10,
            out_range: [0.0, 1.0],
        }
    }
}

impl MgParams {
    /// Delay expressed in integration steps.
    pub fn delay_steps(&self) -> Result<usize> {
        if !(self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::config("signal: beta and gamma must be > 0"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("signal.tau must be >= 0, got {}", self.tau)));
        }
        if !(self.dt_int > 0.0 && self.dt_int.is_finite()) {
            return Err(Error::config(format!("signal.dt_int must be > 0, got {}", self.dt_int)));
        }
        let ratio = self.tau / self.dt_int;
        let d = ratio.round();
        if (ratio - d).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(format!(
                "signal.dt_int = {} does not divide tau = {}",
                self.dt_int, self.tau
            )));
        }
        if let History::Samples(v) = &self.history {
            if v.len() != d as usize + 1 {
                return Err(Error::config(format!(
                    "signal.history needs {} samples on [-tau, 0], got {}",
                    d as usize + 1,
                    v.len()
                )));
            }
        }
        Ok(d as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.delay_steps()?;
        if self.stride == 0 {
            return Err(Error::config("signal.stride must be >= 1"));
        }
        if !(self.transient >= 0.0) {
            return Err(Error::config("signal.transient must be >= 0"));
        }
        if !(self.out_range[0] < self.out_range[1]) {
            return Err(Error::config("signal.out_range must be increasing"));
        }
        Ok(())
    }

    fn rhs(&self, x: f64, delayed: f64) -> f64 {
        self.beta * delayed / (1.0 + delayed.powf(self.n_exp)) - self.gamma * x
    }

    pub fn transient_steps(&self) -> usize {
        (self.transient / self.dt_int).round() as usize
    }
}

/// Stored solution: value and derivative at every grid point, history included.
struct Trace {
    x: Vec<f64>,
    dx: Vec<f64>,
    /// Index of t = 0 within the vectors.
    origin: usize,
    /// Slope of the solution just after t = 0; `dx[origin]` keeps the history's slope.
    origin_right_slope: f64,
}

impl Trace {
    fn value(&self, k: isize) -> (f64, f64) {
        let i = (k + self.origin as isize) as usize;
        (self.x[i], self.dx[i])
    }

    /// Value at grid index `k` plus `theta` steps, `theta ∈ [0, 1]`, by cubic
    /// Hermite interpolation from the stored values and slopes.
    fn at(&self, k: isize, theta: f64, h: f64) -> f64 {
        if theta == 0.0 {
            return self.value(k).0;
        }
        if theta == 1.0 {
            return self.value(k + 1).0;
        }
        let (x0, mut f0) = self.value(k);
        if k == 0 {
            f0 = self.origin_right_slope;
        }
        let (x1, f1) = self.value(k + 1);
        let t = theta;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * h * f0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * h * f1
    }
}

/// Integrate the delay equation with RK4 for `n_steps` steps.
/// Returns `n_steps + 1` values, the first being `x(0)`.
pub fn generate(params: &MgParams, n_steps: usize) -> Result<Vec<f64>> {
    let d = params.delay_steps()?;
    let h = params.dt_int;

    let (hist_x, hist_dx): (Vec<f64>, Vec<f64>) = match &params.history {
        History::Constant(c) => (vec![*c; d + 1], vec![0.0; d + 1]),
        History::Samples(v) => {
            let slopes = (0..v.len())
                .map(|i| {
                    if v.len() < 2 {
                        0.0
                    } else if i == 0 {
                        (v[1] - v[0]) / h
                    } else if i + 1 == v.len() {
                        (v[i] - v[i - 1]) / h
                    } else {
                        (v[i + 1] - v[i - 1]) / (2.0 * h)
                    }
                })
                .collect();
            (v.clone(), slopes)
        }
    };

    let x0 = hist_x[d];
    let lag0 = hist_x[0];
    let mut trace = Trace { x: hist_x, dx: hist_dx, origin: d, origin_right_slope: params.rhs(x0, lag0) };
    trace.x.reserve(n_steps);
    trace.dx.reserve(n_steps);

    let mut x = x0;
    for k in 0..n_steps as isize {
        let x_next = if d == 0 {
            let f = |y: f64| params.rhs(y, y);
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        } else {
            let j = k - d as isize;
            let lag0 = trace.at(j, 0.0, h);
            let lag_half = trace.at(j, 0.5, h);
            let lag1 = trace.at(j, 1.0, h);
            let k1 = params.rhs(x, lag0);
            let k2 = params.rhs(x + 0.5 * h * k1, lag_half);
            let k3 = params.rhs(x + 0.5 * h * k2, lag_half);
            let k4 = params.rhs(x + h * k3, lag1);
            x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        x = x_next;
        let lag = if d == 0 { x } else { trace.value(k + 1 - d as isize).0 };
        trace.x.push(x);
        trace.dx.push(params.rhs(x, lag));
    }
    Ok(trace.x.split_off(d))
}

/// Decimate after a transient and rescale affinely onto `out_range`.
/// A constant segment maps to the middle of the range.
pub fn sample_and_normalize(raw: &[f64], transient: usize, stride: usize, out_range: [f64; 2]) -> Result<Vec<f64>> {
    if stride == 0 {
        return Err(Error::config("stride must be >= 1"));
    }
    let retained: Vec<f64> = raw.iter().skip(transient).step_by(stride).copied().collect();
    if retained.is_empty() {
        return Err(Error::config("no samples left after discarding the transient"));
    }
    let lo = retained.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = retained.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let [a, b] = out_range;
    if hi - lo <= 0.0 {
        return Ok(vec![0.5 * (a + b); retained.len()]);
    }
    let span = hi - lo;
    Ok(retained.iter().map(|v| (a + (v - lo) / span * (b - a)).clamp(a, b)).collect())
}

/// Normalised input sequence of exactly `n_samples` values.
pub fn input_sequence(params: &MgParams, n_samples: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::config("requested an empty input sequence"));
    }
    let transient = params.transient_steps();
    let n_steps = transient + (n_samples - 1) * params.stride;
    let raw = generate(params, n_steps)?;
    let u = sample_and_normalize(&raw, transient, params.stride, params.out_range)?;
    debug_assert_eq!(u.len(), n_samples);
    Ok(u)
}

pub fn write_sequence_csv<W: Write>(u: &[f64], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "u")?;
    for v in u {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

pub fn read_sequence_csv<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "u" => {}
        _ => return Err(Error::schema("sequence CSV must start with header `u`")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            line.trim()
                .parse()
                .map_err(|_| Error::schema(format!("line {}: not a number: {line:?}", i + 2)))?,
        );
    }
    Ok(out)
}
