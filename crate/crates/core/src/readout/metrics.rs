use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Metric(format!("length mismatch: {} vs {}", pred.len(), target.len())));
    }
    if target.len() < 2 {
        return Err(Error::Metric("need at least two samples".into()));
    }
    Ok(())
}

/// RMSE divided by the population standard deviation of the target.
pub fn nrmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let sd = std_dev(target);
    if sd == 0.0 {
        return Err(Error::Metric("target has zero variance".into()));
    }
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / target.len() as f64;
    Ok(mse.sqrt() / sd)
}

/// Sample Pearson correlation.
pub fn pearson(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let mp = mean(pred);
    let mt = mean(target);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let dp = p - mp;
        let dt = t - mt;
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Coefficient of determination `1 - SS_res / SS_tot` (can be negative).
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let mt = mean(target);
    let ss_tot: f64 = target.iter().map(|t| (t - mt).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("target has zero variance".into()));
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Median; even counts average the two middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
