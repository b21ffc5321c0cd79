use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{TcnStack, TcnTrace};
use super::checkpoint::{Checkpoint, ConfigCodec};
use super::layers::{join, relu, relu_backward, Conv1d, ConvCache, Mode, Padding, Param, Parameters};
use super::TcnBlockSpec;
use crate::error::{Error, Result};
use crate::features::{AUDIO_DIM, DEFAULT_PCA_DIMS, RATE_RATIO};
use crate::windows::{AUDIO_WINDOW, VIDEO_WINDOW};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub audio_dim: usize,
    pub output_dim: usize,
    /// Filters of the downsampling convolutions (100 Hz -> 25 Hz).
    pub down_filters: Vec<usize>,
    pub down_strides: Vec<usize>,
    pub down_kernel: usize,
    pub tcn: TcnBlockSpec,
    /// Width of the first position-wise fully connected layer.
    pub fc_hidden: usize,
    pub dropout: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            audio_dim: AUDIO_DIM,
            output_dim: DEFAULT_PCA_DIMS,
            down_filters: vec![64, 128, 256, 256],
            down_strides: vec![2, 2, 1, 1],
            down_kernel: 5,
            tcn: TcnBlockSpec::default(),
            fc_hidden: 64,
            dropout: 0.05,
        }
    }
}

impl GeneratorConfig {
    /// Same topology at desk-scale width (32 channels).
    pub fn compact() -> Self {
        Self {
            down_filters: vec![16, 32, 32, 32],
            tcn: TcnBlockSpec {
                filters: 32,
                ..TcnBlockSpec::default()
            },
            fc_hidden: 32,
            ..Self::default()
        }
    }

    /// 8 filters, dilations [1, 2]: small enough for exhaustive gradient checks.
    pub fn reduced() -> Self {
        Self {
            down_filters: vec![8, 8, 8, 8],
            tcn: TcnBlockSpec {
                filters: 8,
                dilations: vec![1, 2],
                ..TcnBlockSpec::default()
            },
            fc_hidden: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tcn.validate()?;
        if self.down_filters.len() != self.down_strides.len() || self.down_filters.is_empty() {
            return Err(Error::Config("downsampling filters/strides length mismatch".into()));
        }
        if self.down_strides.iter().product::<usize>() != RATE_RATIO {
            return Err(Error::Config(format!(
                "downsampling strides {:?} must multiply to {RATE_RATIO}",
                self.down_strides
            )));
        }
        if self.down_kernel % 2 == 0 {
            return Err(Error::Config("downsampling kernel must be odd".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

impl ConfigCodec for GeneratorConfig {
    fn encode(&self) -> Vec<f64> {
        let mut v = vec![
            self.audio_dim as f64,
            self.output_dim as f64,
            self.down_kernel as f64,
            self.down_filters.len() as f64,
        ];
        for (&f, &s) in self.down_filters.iter().zip(&self.down_strides) {
            v.extend([f as f64, s as f64]);
        }
        self.tcn.encode_into(&mut v);
        v.extend([self.fc_hidden as f64, self.dropout]);
        v
    }

    fn decode(v: &[f64]) -> Result<Self> {
        let mut it = v.iter().copied();
        let mut next = || it.next().ok_or_else(|| Error::Format("short generator config".into()));
        let audio_dim = next()? as usize;
        let output_dim = next()? as usize;
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
            output_dim,
            down_filters,
            down_strides,
            down_kernel,
            tcn,
            fc_hidden: next()? as usize,
            dropout: next()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Audio features (T x 13) -> mouth features (T/4 x output_dim): four
/// downsampling convolutions, a TCN block and two position-wise dense layers.
#[derive(Debug)]
pub struct Generator {
    config: GeneratorConfig,
    down: Vec<Conv1d>,
    tcn: TcnStack,
    fc1: Conv1d,
    fc2: Conv1d,
    trace: Option<GeneratorTrace>,
}

impl Clone for Generator {
    /// Clones parameters and gradients; a recorded forward pass is not copied.
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            down: self.down.clone(),
            tcn: self.tcn.clone(),
            fc1: self.fc1.clone(),
            fc2: self.fc2.clone(),
            trace: None,
        }
    }
}

struct GeneratorTrace {
    down: Vec<(ConvCache, Array2<f64>)>,
    tcn: TcnTrace,
    fc1: (ConvCache, Array2<f64>),
    fc2: ConvCache,
}

impl std::fmt::Debug for GeneratorTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GeneratorTrace")
    }
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
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
        let tcn = TcnStack::new(cin, config.tcn.clone(), config.dropout, &mut rng);
        let fc1 = Conv1d::dense(config.tcn.filters, config.fc_hidden, 2f64.sqrt(), &mut rng);
        let fc2 = Conv1d::dense(config.fc_hidden, config.output_dim, 1.0, &mut rng);
        Ok(Self {
            config,
            down,
            tcn,
            fc1,
            fc2,
            trace: None,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    fn check_input(&self, audio: &Array2<f64>) -> Result<()> {
        if audio.ncols() != self.config.audio_dim
            || audio.nrows() == 0
            || audio.nrows() % RATE_RATIO != 0
        {
            return Err(Error::ShapeMismatch {
                expected: (
                    RATE_RATIO * (audio.nrows() / RATE_RATIO).max(1),
                    self.config.audio_dim,
                ),
                got: audio.dim(),
            });
        }
        Ok(())
    }

    fn run(&self, audio: &Array2<f64>, mode: &mut Mode<'_>) -> (Array2<f64>, GeneratorTrace) {
        let mut h = audio.clone();
        let mut down = Vec::with_capacity(self.down.len());
        for conv in &self.down {
            let (y, cache) = conv.forward(&h);
            h = relu(y);
            down.push((cache, h.clone()));
        }
        let (h, tcn) = self.tcn.forward(&h, mode);
        let (y1, c1) = self.fc1.forward(&h);
        let a1 = relu(y1);
        let (out, c2) = self.fc2.forward(&a1);
        (
            out,
            GeneratorTrace {
                down,
                tcn,
                fc1: (c1, a1),
                fc2: c2,
            },
        )
    }

    /// One training window: exactly 200 x 13 in, 50 x output_dim out.
    pub fn forward(&self, audio: &Array2<f64>) -> Result<Array2<f64>> {
        if audio.dim() != (AUDIO_WINDOW, self.config.audio_dim) {
            return Err(Error::ShapeMismatch {
                expected: (AUDIO_WINDOW, self.config.audio_dim),
                got: audio.dim(),
            });
        }
        let out = self.run(audio, &mut Mode::Eval).0;
        debug_assert_eq!(out.nrows(), VIDEO_WINDOW);
        Ok(out)
    }

    /// Any length divisible by 4 (single pass over a whole sequence).
    pub fn forward_sequence(&self, audio: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(audio)?;
        Ok(self.run(audio, &mut Mode::Eval).0)
    }

    /// Forward pass that records what `backward` needs.
    pub fn forward_train(&mut self, audio: &Array2<f64>, mut mode: Mode<'_>) -> Result<Array2<f64>> {
        self.check_input(audio)?;
        let (out, trace) = self.run(audio, &mut mode);
        self.trace = Some(trace);
        Ok(out)
    }

    /// Accumulates parameter gradients for `d loss / d output` of the last
    /// recorded forward pass and returns `d loss / d audio`.
    pub fn backward(&mut self, grad_out: &Array2<f64>) -> Result<Array2<f64>> {
        let trace = self.trace.take().ok_or(Error::BackwardBeforeForward)?;
        let t = &trace;
        let d = self.fc2.backward(&t.fc2, grad_out);
        let d = relu_backward(&t.fc1.1, d);
        let d = self.fc1.backward(&t.fc1.0, &d);
        let mut d = self.tcn.backward(&t.tcn, &d);
        for (conv, (cache, act)) in self.down.iter_mut().zip(&t.down).rev() {
            d = relu_backward(act, d);
            d = conv.backward(cache, &d);
        }
        Ok(d)
    }

    /// (past, future) reach of one output frame, in audio frames, measured
    /// from audio frame `4 * i`.
    pub fn audio_reach(&self) -> (usize, usize) {
        let mut scale = 1;
        let (mut past, mut future) = (0, 0);
        for conv in &self.down {
            let (p, f) = conv.reach();
            past += p * scale;
            future += f * scale;
            scale *= conv.stride;
        }
        let (p, f) = self.tcn.reach();
        (past + p * scale, future + f * scale)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(super::checkpoint::KIND_GENERATOR, &self.config, self)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg: GeneratorConfig = ckpt.config(super::checkpoint::KIND_GENERATOR)?;
        let mut model = Self::new(cfg, 0)?;
        ckpt.load_into(&mut model)?;
        Ok(model)
    }
}

impl Parameters for Generator {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        for (i, c) in self.down.iter().enumerate() {
            c.visit(&join(prefix, &format!("down{i}")), f);
        }
        self.tcn.visit(&join(prefix, "tcn"), f);
        self.fc1.visit(&join(prefix, "fc1"), f);
        self.fc2.visit(&join(prefix, "fc2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, c) in self.down.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("down{i}")), f);
        }
        self.tcn.visit_mut(&join(prefix, "tcn"), f);
        self.fc1.visit_mut(&join(prefix, "fc1"), f);
        self.fc2.visit_mut(&join(prefix, "fc2"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_audio(len: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((len, AUDIO_DIM), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn shape_contract() {
        let g = Generator::new(GeneratorConfig::compact(), 1).unwrap();
        assert_eq!(g.forward(&random_audio(200, 2)).unwrap().dim(), (50, 10));
        assert!(matches!(
            g.forward(&random_audio(196, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(g.forward(&Array2::zeros((200, 12))).is_err());
        assert_eq!(g.forward_sequence(&random_audio(320, 3)).unwrap().dim(), (80, 10));
        assert!(g.forward_sequence(&random_audio(201, 3)).is_err());
    }

    #[test]
    fn zero_final_layer_gives_zero_output() {
        let mut g = Generator::new(GeneratorConfig::compact(), 4).unwrap();
        g.visit_mut("", &mut |name, p| {
            if name.starts_with("fc2.") {
                p.value.fill(0.0);
            }
        });
        let out = g.forward(&random_audio(200, 5)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = Generator::new(GeneratorConfig::compact(), 9).unwrap();
        let b = Generator::new(GeneratorConfig::compact(), 9).unwrap();
        let x = random_audio(200, 6);
        let ya = a.forward(&x).unwrap();
        let yb = b.forward(&x).unwrap();
        assert!(ya.iter().zip(yb.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn backward_requires_forward() {
        let mut g = Generator::new(GeneratorConfig::reduced(), 1).unwrap();
        assert!(matches!(
            g.backward(&Array2::zeros((50, 10))),
            Err(Error::BackwardBeforeForward)
        ));
        g.forward_train(&random_audio(200, 1), Mode::Eval).unwrap();
        assert!(g.backward(&Array2::zeros((50, 10))).is_ok());
        // The trace is consumed.
        assert!(g.backward(&Array2::zeros((50, 10))).is_err());
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut g = Generator::new(GeneratorConfig::reduced(), 2).unwrap();
        g.forward_train(&random_audio(200, 2), Mode::Eval).unwrap();
        g.backward(&Array2::zeros((50, 10))).unwrap();
        g.visit("", &mut |_, p| assert!(p.grad.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn reach_of_default_generator() {
        let g = Generator::new(GeneratorConfig::compact(), 1).unwrap();
        // 2 + 2*2 + 4*2 + 4*2 from the kernel-5 convs, 4 * 30 from the TCN.
        assert_eq!(g.audio_reach(), (142, 142));
    }
}
