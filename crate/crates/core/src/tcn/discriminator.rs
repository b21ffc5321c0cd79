use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{TcnStack, TcnTrace};
use super::checkpoint::{Checkpoint, ConfigCodec, KIND_DISCRIMINATOR};
use super::layers::{
    join, relu, relu_backward, sigmoid, Conv1d, ConvCache, Mode, Padding, Param, Parameters,
};
use super::TcnBlockSpec;
use crate::error::{Error, Result};
use crate::features::{AUDIO_DIM, DEFAULT_PCA_DIMS, RATE_RATIO};
use crate::windows::{AUDIO_WINDOW, VIDEO_WINDOW};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub audio_dim: usize,
    pub mouth_dim: usize,
    /// Audio branch; the last entry is the channel count joined with the mouth.
    pub down_filters: Vec<usize>,
    pub down_strides: Vec<usize>,
    pub down_kernel: usize,
    pub tcn: TcnBlockSpec,
    pub dropout: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            audio_dim: AUDIO_DIM,
            mouth_dim: DEFAULT_PCA_DIMS,
            down_filters: vec![64, 128, 256, 64],
            down_strides: vec![2, 2, 1, 1],
            down_kernel: 5,
            tcn: TcnBlockSpec {
                filters: 128,
                ..TcnBlockSpec::default()
            },
            dropout: 0.05,
        }
    }
}

impl DiscriminatorConfig {
    pub fn compact() -> Self {
        Self {
            down_filters: vec![16, 32, 32, 16],
            tcn: TcnBlockSpec {
                filters: 32,
                ..TcnBlockSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn reduced() -> Self {
        Self {
            down_filters: vec![8, 8, 8, 8],
            tcn: TcnBlockSpec {
                filters: 8,
                dilations: vec![1, 2],
                ..TcnBlockSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tcn.validate()?;
        if self.down_filters.len() != self.down_strides.len() || self.down_filters.is_empty() {
            return Err(Error::Config("downsampling filters/strides length mismatch".into()));
        }
        if self.down_strides.iter().product::<usize>() != RATE_RATIO {
            return Err(Error::Config("discriminator strides must multiply to 4".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

impl ConfigCodec for DiscriminatorConfig {
    fn encode(&self) -> Vec<f64> {
        let mut v = vec![
            self.audio_dim as f64,
            self.mouth_dim as f64,
            self.down_kernel as f64,
            self.down_filters.len() as f64,
        ];
        for (&f, &s) in self.down_filters.iter().zip(&self.down_strides) {
            v.extend([f as f64, s as f64]);
        }
        self.tcn.encode_into(&mut v);
        v.push(self.dropout);
        v
    }

    fn decode(v: &[f64]) -> Result<Self> {
        let mut it = v.iter().copied();
        let mut next =
            || it.next().ok_or_else(|| Error::Format("short discriminator config".into()));
        let audio_dim = next()? as usize;
        let mouth_dim = next()? as usize;
        let down_kernel = next()? as usize;
        let n = next()? as usize;
        let mut down_filters = Vec::with_capacity(n);
        let mut down_strides = Vec::with_capacity(n);
        for _ in 0..n {
            down_filters.push(next()? as usize);
            down_strides.push(next()? as usize);
        }
        let tcn = TcnBlockSpec::decode_from(&mut next)?;
        let cfg = Self {
            audio_dim,
            mouth_dim,
            down_filters,
            down_strides,
            down_kernel,
            tcn,
            dropout: next()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scores an (audio, mouth) window pair: the audio branch is downsampled to
/// video rate, joined channel-wise with the mouth sequence, passed through a
/// TCN block, mean-pooled over time and mapped to a probability.
#[derive(Debug)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    down: Vec<Conv1d>,
    tcn: TcnStack,
    head: Conv1d,
    trace: Option<DiscriminatorTrace>,
}

impl Clone for Discriminator {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            down: self.down.clone(),
            tcn: self.tcn.clone(),
            head: self.head.clone(),
            trace: None,
        }
    }
}

struct DiscriminatorTrace {
    down: Vec<(ConvCache, Array2<f64>)>,
    audio_channels: usize,
    tcn: TcnTrace,
    frames: usize,
    head: ConvCache,
}

impl std::fmt::Debug for DiscriminatorTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DiscriminatorTrace")
    }
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cin = config.audio_dim;
        let down = config
            .down_filters
            .iter()
            .zip(&config.down_strides)
            .map(|(&f, &s)| {
                let c = Conv1d::new(
                    cin,
                    f,
                    config.down_kernel,
                    s,
                    1,
                    Padding::Same,
                    false,
                    2f64.sqrt(),
                    &mut rng,
                );
                cin = f;
                c
            })
            .collect();
        let tcn = TcnStack::new(cin + config.mouth_dim, config.tcn.clone(), config.dropout, &mut rng);
        let head = Conv1d::dense(config.tcn.filters, 1, 1.0, &mut rng);
        Ok(Self {
            config,
            down,
            tcn,
            head,
            trace: None,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    fn check(&self, audio: &Array2<f64>, mouth: &Array2<f64>) -> Result<()> {
        if audio.dim() != (AUDIO_WINDOW, self.config.audio_dim) {
            return Err(Error::ShapeMismatch {
                expected: (AUDIO_WINDOW, self.config.audio_dim),
                got: audio.dim(),
            });
        }
        if mouth.dim() != (VIDEO_WINDOW, self.config.mouth_dim) {
            return Err(Error::ShapeMismatch {
                expected: (VIDEO_WINDOW, self.config.mouth_dim),
                got: mouth.dim(),
            });
        }
        Ok(())
    }

    /// Returns the pre-sigmoid logit.
    fn run(
        &self,
        audio: &Array2<f64>,
        mouth: &Array2<f64>,
        mode: &mut Mode<'_>,
    ) -> (f64, DiscriminatorTrace) {
        let mut h = audio.clone();
        let mut down = Vec::with_capacity(self.down.len());
        for conv in &self.down {
            let (y, cache) = conv.forward(&h);
            h = relu(y);
            down.push((cache, h.clone()));
        }
        let audio_channels = h.ncols();
        let joined = concatenate(Axis(1), &[h.view(), mouth.view()]).expect("equal lengths");
        let (h, tcn) = self.tcn.forward(&joined, mode);
        let frames = h.nrows();
        let pooled = h.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        let (logit, head) = self.head.forward(&pooled);
        (
            logit[[0, 0]],
            DiscriminatorTrace {
                down,
                audio_channels,
                tcn,
                frames,
                head,
            },
        )
    }

    /// Probability that the pair is real, in (0, 1).
    pub fn forward(&self, audio: &Array2<f64>, mouth: &Array2<f64>) -> Result<f64> {
        self.check(audio, mouth)?;
        Ok(sigmoid(self.run(audio, mouth, &mut Mode::Eval).0))
    }

    /// Records the pass for `backward` and returns the probability.
    pub fn forward_train(
        &mut self,
        audio: &Array2<f64>,
        mouth: &Array2<f64>,
        mut mode: Mode<'_>,
    ) -> Result<f64> {
        self.check(audio, mouth)?;
        let (logit, trace) = self.run(audio, mouth, &mut mode);
        self.trace = Some(trace);
        Ok(sigmoid(logit))
    }

    /// Back-propagates `d loss / d logit` of the last recorded pass,
    /// accumulating parameter gradients. Returns `d loss / d mouth`.
    pub fn backward(&mut self, grad_logit: f64) -> Result<Array2<f64>> {
        let t = self.trace.take().ok_or(Error::BackwardBeforeForward)?;
        let d_pooled = self
            .head
            .backward(&t.head, &Array2::from_elem((1, 1), grad_logit));
        let d_h = Array2::from_shape_fn((t.frames, d_pooled.ncols()), |(_, c)| {
            d_pooled[[0, c]] / t.frames as f64
        });
        let d_joined = self.tcn.backward(&t.tcn, &d_h);
        let d_mouth = d_joined.slice(s![.., t.audio_channels..]).to_owned();
        let mut d = d_joined.slice(s![.., ..t.audio_channels]).to_owned();
        for (conv, (cache, act)) in self.down.iter_mut().zip(&t.down).rev() {
            d = relu_backward(act, d);
            d = conv.backward(cache, &d);
        }
        Ok(d_mouth)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(KIND_DISCRIMINATOR, &self.config, self)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg: DiscriminatorConfig = ckpt.config(KIND_DISCRIMINATOR)?;
        let mut model = Self::new(cfg, 0)?;
        ckpt.load_into(&mut model)?;
        Ok(model)
    }
}

impl Parameters for Discriminator {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        for (i, c) in self.down.iter().enumerate() {
            c.visit(&join(prefix, &format!("down{i}")), f);
        }
        self.tcn.visit(&join(prefix, "tcn"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, c) in self.down.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("down{i}")), f);
        }
        self.tcn.visit_mut(&join(prefix, "tcn"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pair(seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            Array2::from_shape_simple_fn((200, 13), || rng.gen_range(-1.0..1.0)),
            Array2::from_shape_simple_fn((50, 10), || rng.gen_range(-1.0..1.0)),
        )
    }

    #[test]
    fn output_is_a_probability() {
        let d = Discriminator::new(DiscriminatorConfig::compact(), 3).unwrap();
        for s in 0..10 {
            let (a, m) = pair(s);
            let p = d.forward(&a, &m).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn zero_head_gives_one_half() {
        let mut d = Discriminator::new(DiscriminatorConfig::compact(), 3).unwrap();
        d.visit_mut("", &mut |n, p| {
            if n.starts_with("head.") {
                p.value.fill(0.0);
            }
        });
        let (a, m) = pair(1);
        assert_eq!(d.forward(&a, &m).unwrap(), 0.5);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let d1 = Discriminator::new(DiscriminatorConfig::compact(), 5).unwrap();
        let d2 = Discriminator::new(DiscriminatorConfig::compact(), 5).unwrap();
        let (a, m) = pair(2);
        assert_eq!(
            d1.forward(&a, &m).unwrap().to_bits(),
            d2.forward(&a, &m).unwrap().to_bits()
        );
        assert!(d1.forward(&a, &Array2::zeros((49, 10))).is_err());
        assert!(d1.forward(&Array2::zeros((200, 12)), &m).is_err());
    }

    #[test]
    fn mouth_gradient_matches_finite_differences() {
        let mut d = Discriminator::new(DiscriminatorConfig::reduced(), 8).unwrap();
        let (a, m) = pair(4);
        // loss = -log D
        let p = d.forward_train(&a, &m, Mode::Eval).unwrap();
        let dm = d.backward(p - 1.0).unwrap();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (t, c) = (rng.gen_range(0..50), rng.gen_range(0..10));
            let mut mp = m.clone();
            mp[[t, c]] += h;
            let mut mm = m.clone();
            mm[[t, c]] -= h;
            let lp = -d.forward(&a, &mp).unwrap().ln();
            let lm = -d.forward(&a, &mm).unwrap().ln();
            let num = (lp - lm) / (2.0 * h);
            let rel = (num - dm[[t, c]]).abs() / (num.abs() + dm[[t, c]].abs()).max(1e-8);
            assert!(rel < 1e-4, "({t},{c}): {num} vs {}", dm[[t, c]]);
        }
    }
}
