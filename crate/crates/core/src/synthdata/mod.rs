//! Synthetic corpora with known ground truth: a linear audio-to-mouth oracle,
//! a parametric 68-point face and a planted-spectrum landmark corpus.

mod face;

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use face::{
    planted_landmark_corpus, render_portrait, synth_speech, PlantedCorpus, SyntheticFace,
    PLANTED_COMPONENTS,
};

use crate::error::{Error, Result};
use crate::features::{AudioFeatureSequence, MouthFeatureSequence, AUDIO_DIM, DEFAULT_PCA_DIMS, RATE_RATIO};

/// Audio frames before the aligned frame that feed one mouth frame.
pub const KERNEL_PAST: usize = 12;
/// Audio frames after the aligned frame that feed one mouth frame.
pub const KERNEL_FUTURE: usize = 24;
pub const KERNEL_LEN: usize = KERNEL_PAST + 1 + KERNEL_FUTURE;
/// Width of the moving average that smooths the raw audio noise.
pub const AUDIO_SMOOTHING: usize = 5;

/// Ground-truth generative mapping of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    /// 10 x 13: mouth = mixing . filtered audio.
    pub mixing: Array2<f64>,
    /// Weights over audio offsets -12..=24; sums to 1.
    pub kernel: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// `exp(k / 2)` into the past, `exp(-k / 6)` into the future, normalized.
pub fn default_kernel() -> Vec<f64> {
    let raw: Vec<f64> = (-(KERNEL_PAST as i64)..=KERNEL_FUTURE as i64)
        .map(|k| {
            if k < 0 {
                (k as f64 / 2.0).exp()
            } else {
                (-k as f64 / 6.0).exp()
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Variance of one filtered audio channel, from the moving-average
/// autocovariance `max(0, 5 - |lag|) / 25`.
fn filtered_variance(kernel: &[f64]) -> f64 {
    let m = AUDIO_SMOOTHING as f64;
    let mut v = 0.0;
    for (i, a) in kernel.iter().enumerate() {
        for (j, b) in kernel.iter().enumerate() {
            let lag = i.abs_diff(j) as f64;
            v += a * b * (m - lag).max(0.0) / (m * m);
        }
    }
    v
}

impl OracleSpec {
    /// Default kernel and a seeded Gaussian mixing matrix scaled so every
    /// mouth dimension has unit variance before noise.
    pub fn new(seed: u64, noise_sigma: f64) -> Self {
        let kernel = default_kernel();
        let scale = 1.0 / (AUDIO_DIM as f64 * filtered_variance(&kernel)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mixing = Array2::from_shape_simple_fn((DEFAULT_PCA_DIMS, AUDIO_DIM), || {
            scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        Self {
            mixing,
            kernel,
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mixing.ncols() != AUDIO_DIM {
            return Err(Error::DimensionMismatch {
                expected: AUDIO_DIM,
                got: self.mixing.ncols(),
            });
        }
        if self.kernel.len() != KERNEL_LEN {
            return Err(Error::DimensionMismatch {
                expected: KERNEL_LEN,
                got: self.kernel.len(),
            });
        }
        if (self.kernel.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("oracle kernel must sum to 1".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    /// Noise-free mouth frame for aligned audio frame `t` of `padded`, where
    /// `padded` holds at least 12 frames before and 24 after `t`.
    pub fn clean_frame(&self, padded: &Array2<f64>, t: usize) -> Array1<f64> {
        let mut filtered = Array1::zeros(AUDIO_DIM);
        for (j, w) in self.kernel.iter().enumerate() {
            filtered.scaled_add(*w, &padded.row(t + j - KERNEL_PAST));
        }
        self.mixing.dot(&filtered)
    }
}

/// Irreducible per-element MSE of any predictor: `noise_sigma^2`.
pub fn oracle_floor(spec: &OracleSpec) -> f64 {
    spec.noise_sigma * spec.noise_sigma
}

/// What the oracle knows about a generated corpus.
#[derive(Debug, Clone)]
pub struct OracleTruth {
    /// Audio with 12 frames of lead-in and 24 of run-out around the stored
    /// stream; aligned frame `t` lives at row `t + 12`.
    pub padded_audio: Array2<f64>,
    /// Mouth frames before noise.
    pub clean_mouth: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub audio: AudioFeatureSequence,
    pub mouth: MouthFeatureSequence,
    pub truth: OracleTruth,
}

/// Seeded corpus: smoothed Gaussian audio at 100 Hz and mouth frames
/// `mixing . sum_k kernel_k audio_{4i+k} + noise` at 25 Hz.
pub fn generate_corpus(spec: &OracleSpec, minutes: f64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    if !(minutes > 0.0 && minutes.is_finite()) {
        return Err(Error::Config(format!("corpus length {minutes} min must be positive")));
    }
    let video = (minutes * 60.0 * 25.0).round().max(1.0) as usize;
    let audio_len = RATE_RATIO * video;
    let padded_len = audio_len + KERNEL_PAST + KERNEL_FUTURE;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let raw = Array2::from_shape_simple_fn((padded_len + AUDIO_SMOOTHING - 1, AUDIO_DIM), || {
        StandardNormal.sample(&mut rng)
    });
    let mut padded = Array2::zeros((padded_len, AUDIO_DIM));
    for t in 0..padded_len {
        let mean = raw.slice(s![t..t + AUDIO_SMOOTHING, ..]).sum_axis(ndarray::Axis(0))
            / AUDIO_SMOOTHING as f64;
        padded.row_mut(t).assign(&mean);
    }

    let mut clean = Array2::zeros((video, spec.mixing.nrows()));
    for i in 0..video {
        clean
            .row_mut(i)
            .assign(&spec.clean_frame(&padded, KERNEL_PAST + RATE_RATIO * i));
    }
    let mut mouth = clean.clone();
    if spec.noise_sigma > 0.0 {
        mouth.mapv_inplace(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + spec.noise_sigma * n
        });
    }
    let audio = padded.slice(s![KERNEL_PAST..KERNEL_PAST + audio_len, ..]).to_owned();
    Ok(SyntheticCorpus {
        audio: AudioFeatureSequence::new(audio)?,
        mouth: MouthFeatureSequence::new(mouth),
        truth: OracleTruth {
            padded_audio: padded,
            clean_mouth: clean,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_future_heavy() {
        let k = default_kernel();
        assert_eq!(k.len(), 37);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let past: f64 = k[..KERNEL_PAST].iter().sum();
        let future: f64 = k[KERNEL_PAST + 1..].iter().sum();
        assert!(future > past);
    }

    #[test]
    fn noiseless_corpus_matches_loop_oracle() {
        let spec = OracleSpec::new(3, 0.0);
        let c = generate_corpus(&spec, 0.1).unwrap();
        assert_eq!(c.mouth.len(), 150);
        assert_eq!(c.audio.len(), 600);
        let pad = &c.truth.padded_audio;
        for i in 0..c.mouth.len() {
            for d in 0..10 {
                let mut v = 0.0;
                for k in -12i64..=24 {
                    let row = (12 + 4 * i as i64 + k) as usize;
                    let w = spec.kernel[(k + 12) as usize];
                    for a in 0..13 {
                        v += spec.mixing[[d, a]] * w * pad[[row, a]];
                    }
                }
                assert!((v - c.mouth.frames()[[i, d]]).abs() < 1e-12);
            }
        }
        assert_eq!(
            c.audio.frames(),
            &pad.slice(s![12..612, ..]).to_owned()
        );
    }

    #[test]
    fn seeds_are_deterministic() {
        let spec = OracleSpec::new(5, 0.05);
        let (a, b) = (generate_corpus(&spec, 0.05).unwrap(), generate_corpus(&spec, 0.05).unwrap());
        assert_eq!(a.audio, b.audio);
        assert_eq!(a.mouth, b.mouth);
        let other = generate_corpus(&OracleSpec::new(6, 0.05), 0.05).unwrap();
        assert_ne!(a.audio, other.audio);
    }

    #[test]
    fn zero_mixing_gives_zero_mouth() {
        let mut spec = OracleSpec::new(1, 0.0);
        spec.mixing.fill(0.0);
        let c = generate_corpus(&spec, 0.05).unwrap();
        assert!(c.mouth.frames().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn floor_values() {
        assert_eq!(oracle_floor(&OracleSpec::new(0, 0.0)), 0.0);
        assert!((oracle_floor(&OracleSpec::new(0, 0.05)) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn empirical_floor_matches_sigma_squared() {
        let spec = OracleSpec::new(11, 0.05);
        let c = generate_corpus(&spec, 10.0).unwrap();
        let diff = c.mouth.frames() - &c.truth.clean_mouth;
        let mse = diff.mapv(|v| v * v).mean().unwrap();
        assert!((mse / 0.0025 - 1.0).abs() < 0.05, "mse {mse}");
    }

    #[test]
    fn mouth_has_unit_scale() {
        let c = generate_corpus(&OracleSpec::new(2, 0.0), 10.0).unwrap();
        let var = c.mouth.frames().mapv(|v| v * v).mean().unwrap();
        assert!((0.6..1.4).contains(&var), "variance {var}");
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = OracleSpec::new(0, 0.0);
        assert!(generate_corpus(&spec, 0.0).is_err());
        spec.kernel[0] += 0.5;
        assert!(generate_corpus(&spec, 1.0).is_err());
        let mut spec = OracleSpec::new(0, -1.0);
        assert!(spec.validate().is_err());
        spec.noise_sigma = 0.0;
        spec.kernel.pop();
        assert!(spec.validate().is_err());
    }
}
