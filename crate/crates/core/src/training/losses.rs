//! Regression, inter-frame and adversarial losses, each with the gradient
//! the trainer needs.

use ndarray::{s, Array2};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const GAN_EPS: f64 = 1e-7;

/// Weights of the L2 and inter-frame terms in the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 100.0,
            lambda2: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative, got ({lambda1}, {lambda2})"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }
}

fn same_shape(target: &Array2<f64>, pred: &Array2<f64>) -> Result<()> {
    if target.dim() != pred.dim() {
        return Err(Error::ShapeMismatch {
            expected: target.dim(),
            got: pred.dim(),
        });
    }
    Ok(())
}

/// Squared Frobenius norm of `target - pred`.
pub fn l2_loss(target: &Array2<f64>, pred: &Array2<f64>) -> Result<f64> {
    same_shape(target, pred)?;
    Ok(target
        .iter()
        .zip(pred.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum())
}

/// d l2 / d pred.
pub fn l2_grad(target: &Array2<f64>, pred: &Array2<f64>) -> Array2<f64> {
    (pred - target) * 2.0
}

/// `(target_t - target_{t-1}) - (pred_t - pred_{t-1})` for t = 1..T.
fn delta_error(target: &Array2<f64>, pred: &Array2<f64>) -> Array2<f64> {
    let dt = &target.slice(s![1.., ..]) - &target.slice(s![..-1, ..]);
    let dp = &pred.slice(s![1.., ..]) - &pred.slice(s![..-1, ..]);
    dt - dp
}

/// Squared Frobenius norm of the difference of first-order temporal
/// differences, summed over the T - 1 consecutive-frame pairs.
pub fn interframe_loss(target: &Array2<f64>, pred: &Array2<f64>) -> Result<f64> {
    same_shape(target, pred)?;
    if target.nrows() < 2 {
        return Err(Error::SequenceTooShort(target.nrows()));
    }
    Ok(delta_error(target, pred).iter().map(|e| e * e).sum())
}

/// d interframe / d pred.
pub fn interframe_grad(target: &Array2<f64>, pred: &Array2<f64>) -> Array2<f64> {
    let e = delta_error(target, pred);
    let mut g = Array2::zeros(pred.raw_dim());
    // e_t depends on pred_t with sign -1 and pred_{t-1} with sign +1.
    {
        let mut tail = g.slice_mut(s![1.., ..]);
        tail -= &(&e * 2.0);
    }
    {
        let mut head = g.slice_mut(s![..-1, ..]);
        head += &(&e * 2.0);
    }
    g
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(GAN_EPS, 1.0 - GAN_EPS)
}

/// Discriminator loss `-[log D(real) + log(1 - D(fake))]` and the
/// non-saturating generator loss `-log D(fake)`.
pub fn gan_losses(d_real: f64, d_fake: f64) -> (f64, f64) {
    let (r, f) = (clamp_prob(d_real), clamp_prob(d_fake));
    (-(r.ln() + (1.0 - f).ln()), -f.ln())
}

/// `g_gan + lambda1 * l2 + lambda2 * interframe` for one window.
pub fn combined_generator_loss(
    weights: LossWeights,
    target: &Array2<f64>,
    pred: &Array2<f64>,
    d_fake: f64,
) -> Result<f64> {
    let (_, g_gan) = gan_losses(0.5, d_fake);
    Ok(g_gan
        + weights.lambda1 * l2_loss(target, pred)?
        + weights.lambda2 * interframe_loss(target, pred)?)
}
