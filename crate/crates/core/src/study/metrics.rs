//! Posterior-draw bias/RMSE and per-day prediction RMSE.

use crate::error::{Error, Result};

/// `(mean(s) − truth, √mean((s − truth)²))`.
pub fn compute_param_metrics(samples: &[f64], truth: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::config("parameter metrics need at least one sample"));
    }
    let n = samples.len() as f64;
    let bias = samples.iter().map(|s| s - truth).sum::<f64>() / n;
    let mse = samples.iter().map(|s| (s - truth).powi(2)).sum::<f64>() / n;
    Ok((bias, mse.sqrt()))
}

/// RMSE over locations, one value per day. `pred[t][l]` and `truth[t][l]`.
pub fn compute_pred_rmse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::config(format!(
            "prediction has {} days but truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    pred.iter()
        .zip(truth)
        .enumerate()
        .map(|(t, (p, y))| {
            if p.len() != y.len() || p.is_empty() {
                return Err(Error::config(format!(
                    "day {}: {} predictions for {} truth locations",
                    t + 1,
                    p.len(),
                    y.len()
                )));
            }
            let mse = p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64;
            Ok(mse.sqrt())
        })
        .collect()
}
