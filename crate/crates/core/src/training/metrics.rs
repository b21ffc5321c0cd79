use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tcn::Generator;
use crate::windows::{WindowPair, VIDEO_WINDOW};

/// Mean squared error, mean absolute error and inter-frame MSE.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub int_mse: f64,
}

/// MSE and MAE are element-wise means. Int-MSE averages the squared norm of
/// `(Y_i - Y_{i-1}) - (Yhat_i - Yhat_{i-1})` over the n - 1 frame pairs.
pub fn evaluate(target: &Array2<f64>, pred: &Array2<f64>) -> Result<MetricsReport> {
    if target.dim() != pred.dim() {
        return Err(Error::ShapeMismatch {
            expected: target.dim(),
            got: pred.dim(),
        });
    }
    let n = target.nrows();
    if n < 2 {
        return Err(Error::SequenceTooShort(n));
    }
    let count = target.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (t, p) in target.iter().zip(pred.iter()) {
        se += (t - p) * (t - p);
        ae += (t - p).abs();
    }
    let int = super::interframe_loss(target, pred)?;
    Ok(MetricsReport {
        mse: se / count,
        mae: ae / count,
        int_mse: int / (n - 1) as f64,
    })
}

/// Metrics averaged over windows, each predicted independently.
pub fn evaluate_windows(model: &Generator, windows: &[WindowPair]) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let mut sum = MetricsReport::default();
    for w in windows {
        let m = evaluate(&w.mouth, &model.forward(&w.audio)?)?;
        sum.mse += m.mse;
        sum.mae += m.mae;
        sum.int_mse += m.int_mse;
    }
    let n = windows.len() as f64;
    Ok(MetricsReport {
        mse: sum.mse / n,
        mae: sum.mae / n,
        int_mse: sum.int_mse / n,
    })
}

pub const MIN_PROFILE_WINDOWS: usize = 10;

/// Squared error per output position (mean over feature dims), averaged
/// across windows. Always 50 values.
pub fn per_frame_error_profile(model: &Generator, windows: &[WindowPair]) -> Result<Vec<f64>> {
    if windows.len() < MIN_PROFILE_WINDOWS {
        return Err(Error::InsufficientData {
            got: windows.len(),
            need: MIN_PROFILE_WINDOWS,
        });
    }
    let mut profile = vec![0.0; VIDEO_WINDOW];
    for w in windows {
        let pred = model.forward(&w.audio)?;
        if pred.dim() != w.mouth.dim() {
            return Err(Error::ShapeMismatch {
                expected: w.mouth.dim(),
                got: pred.dim(),
            });
        }
        for (i, acc) in profile.iter_mut().enumerate() {
            let row = (&pred.row(i) - &w.mouth.row(i)).mapv(|e| e * e);
            *acc += row.mean().unwrap_or(0.0);
        }
    }
    let n = windows.len() as f64;
    profile.iter_mut().for_each(|v| *v /= n);
    Ok(profile)
}

/// Splits positions into head {0-3}, interior {10-39} and tail {42-49} and
/// returns `(mean(head and tail), mean(interior))`.
pub fn edge_and_interior_means(profile: &[f64]) -> (f64, f64) {
    let edge: Vec<f64> = profile[..4].iter().chain(&profile[42..50]).copied().collect();
    let interior = &profile[10..40];
    (
        edge.iter().sum::<f64>() / edge.len() as f64,
        interior.iter().sum::<f64>() / interior.len() as f64,
    )
}
