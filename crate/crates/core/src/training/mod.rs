//! Losses, the alternating adversarial training loop and evaluation metrics.

mod adam;
mod losses;
mod metrics;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use losses::{
    combined_generator_loss, gan_losses, interframe_grad, interframe_loss, l2_grad, l2_loss,
    LossWeights, GAN_EPS,
};
pub use metrics::{
    edge_and_interior_means, evaluate, evaluate_windows, per_frame_error_profile, MetricsReport,
    MIN_PROFILE_WINDOWS,
};

use crate::error::{Error, Result};
use crate::tcn::{Discriminator, Generator, Mode, Parameters};
use crate::windows::WindowPair;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// When set, the rate follows a cosine from `learning_rate` at the first
    /// epoch down to this value at the last. `None` keeps it constant.
    pub final_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Trailing share of the (time-ordered) windows held out for validation.
    /// When it rounds to zero windows, validation runs on the training set.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-4,
            final_learning_rate: None,
            beta1: 0.5,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            None => self.learning_rate,
            Some(end) => {
                let span = self.epochs.saturating_sub(1).max(1) as f64;
                let t = (epoch.saturating_sub(1) as f64 / span).min(1.0);
                end + 0.5 * (self.learning_rate - end) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid training config: {what}")));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(f) = self.final_learning_rate {
            if !(f > 0.0 && f <= self.learning_rate) {
                return bad("final_learning_rate must lie in (0, learning_rate]");
            }
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Per-epoch means of every loss component plus validation metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub l2: f64,
    pub int: f64,
    pub g_gan: f64,
    pub d_loss: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub val_int_mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub const HEADER: [&'static str; 8] = [
        "epoch",
        "l2",
        "int",
        "g_gan",
        "d_loss",
        "val_mse",
        "val_mae",
        "val_int_mse",
    ];

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::HEADER)?;
        for e in &self.epochs {
            out.write_record([
                e.epoch.to_string(),
                e.l2.to_string(),
                e.int.to_string(),
                e.g_gan.to_string(),
                e.d_loss.to_string(),
                e.val_mse.to_string(),
                e.val_mae.to_string(),
                e.val_int_mse.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub log: TrainingLog,
}

/// Splits time-ordered windows into (train, validation).
pub fn split_windows(windows: &[WindowPair], validation_fraction: f64) -> (&[WindowPair], &[WindowPair]) {
    let n_val = (windows.len() as f64 * validation_fraction).floor() as usize;
    let (train, val) = windows.split_at(windows.len() - n_val.min(windows.len().saturating_sub(1)));
    if val.is_empty() {
        (train, train)
    } else {
        (train, val)
    }
}

pub fn train(
    generator: Generator,
    discriminator: Discriminator,
    windows: &[WindowPair],
    weights: LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(generator, discriminator, windows, weights, cfg, |_| {})
}

fn check_finite(component: &'static str, value: f64, epoch: usize, batch: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            component,
            epoch,
            batch,
        })
    }
}

#[derive(Default)]
struct Sums {
    l2: f64,
    int: f64,
    g_gan: f64,
    d_loss: f64,
}

/// Alternates one discriminator and one generator update per batch.
/// `on_epoch` sees each log row as it is produced.
pub fn train_with_progress(
    mut g: Generator,
    mut d: Discriminator,
    windows: &[WindowPair],
    weights: LossWeights,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    LossWeights::new(weights.lambda1, weights.lambda2)?;
    if windows.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let (train_set, val_set) = split_windows(windows, cfg.validation_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt_g = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut opt_d = opt_g.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        opt_g.learning_rate = cfg.learning_rate_at(epoch);
        opt_d.learning_rate = opt_g.learning_rate;
        let mut sums = Sums::default();
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;

            d.zero_grad();
            let mut d_loss = 0.0;
            for &i in batch {
                let w = &train_set[i];
                let fake = g.forward(&w.audio)?;
                let p_real = d.forward_train(&w.audio, &w.mouth, Mode::Train(&mut rng))?;
                d.backward((p_real - 1.0) * scale)?;
                let p_fake = d.forward_train(&w.audio, &fake, Mode::Train(&mut rng))?;
                d.backward(p_fake * scale)?;
                d_loss += gan_losses(p_real, p_fake).0 * scale;
            }
            check_finite("d_loss", d_loss, epoch, bi)?;
            opt_d.step(&mut d);

            g.zero_grad();
            let (mut l2, mut int, mut g_gan) = (0.0, 0.0, 0.0);
            for &i in batch {
                let w = &train_set[i];
                let pred = g.forward_train(&w.audio, Mode::Train(&mut rng))?;
                let p = d.forward_train(&w.audio, &pred, Mode::Train(&mut rng))?;
                let mut grad = d.backward((p - 1.0) * scale)?;
                grad.scaled_add(weights.lambda1 * scale, &l2_grad(&w.mouth, &pred));
                grad.scaled_add(weights.lambda2 * scale, &interframe_grad(&w.mouth, &pred));
                g.backward(&grad)?;
                l2 += l2_loss(&w.mouth, &pred)? * scale;
                int += interframe_loss(&w.mouth, &pred)? * scale;
                g_gan += gan_losses(0.5, p).1 * scale;
            }
            check_finite("l2", l2, epoch, bi)?;
            check_finite("int", int, epoch, bi)?;
            check_finite("g_gan", g_gan, epoch, bi)?;
            opt_g.step(&mut g);
            d.zero_grad();

            sums.l2 += l2;
            sums.int += int;
            sums.g_gan += g_gan;
            sums.d_loss += d_loss;
        }
        let batches = order.len().div_ceil(cfg.batch_size) as f64;
        let val = evaluate_windows(&g, val_set)?;
        let row = EpochLog {
            epoch,
            l2: sums.l2 / batches,
            int: sums.int / batches,
            g_gan: sums.g_gan / batches,
            d_loss: sums.d_loss / batches,
            val_mse: val.mse,
            val_mae: val.mae,
            val_int_mse: val.int_mse,
        };
        on_epoch(&row);
        log.epochs.push(row);
    }
    Ok(TrainOutcome {
        generator: g,
        discriminator: d,
        log,
    })
}
