//! MFCC front end: 25 ms periodic-Hann frames every 10 ms, power spectrum,
//! 26 triangular mel filters over 0 Hz..Nyquist, floored natural log and an
//! orthonormal type-II DCT truncated to 13 coefficients.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioFeatureSequence;
use crate::error::{Error, Result};

pub const NUM_COEFFS: usize = 13;
pub const NUM_MEL_FILTERS: usize = 26;
pub const LOG_FLOOR: f64 = 1e-10;
pub const WINDOW_SECONDS: f64 = 0.025;
pub const HOP_SECONDS: f64 = 0.010;
pub const MIN_SAMPLE_RATE: u32 = 8000;

/// Interleaved 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcm {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
    pub channels: u16,
}

impl Pcm {
    pub fn mono(samples: Vec<i16>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            channels: 1,
        }
    }

    pub fn read_wav(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::Format("expected 16-bit integer PCM wav".into()));
        }
        let samples = reader.samples::<i16>().collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            samples,
            sample_rate: spec.sample_rate,
            channels: spec.channels,
        })
    }

    pub fn write_wav(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: self.channels,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample(s)?;
        }
        writer.finalize()?;
        Ok(())
    }
}

/// Frame geometry derived from the sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub window: usize,
    pub hop: usize,
    pub fft_len: usize,
}

impl FrameLayout {
    pub fn for_rate(sample_rate: u32) -> Self {
        let window = (WINDOW_SECONDS * sample_rate as f64).round() as usize;
        let hop = (HOP_SECONDS * sample_rate as f64).round() as usize;
        Self {
            window,
            hop,
            fft_len: window.next_power_of_two(),
        }
    }

    pub fn frame_count(&self, num_samples: usize) -> usize {
        if num_samples < self.window {
            0
        } else {
            (num_samples - self.window) / self.hop + 1
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann taper of length `n`.
pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Triangular filter weights evaluated at the centre frequency of every
/// non-negative FFT bin. Rows are filters, columns bins `0..=fft_len/2`.
pub fn mel_filterbank(sample_rate: u32, fft_len: usize, num_filters: usize) -> Array2<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bins = fft_len / 2 + 1;
    Array2::from_shape_fn((num_filters, bins), |(m, k)| {
        let f = k as f64 * sample_rate as f64 / fft_len as f64;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        if f <= lo || f >= hi {
            0.0
        } else if f <= mid {
            (f - lo) / (mid - lo)
        } else {
            (hi - f) / (hi - mid)
        }
    })
}

/// Orthonormal DCT-II basis restricted to the first `keep` outputs.
pub fn dct_basis(n: usize, keep: usize) -> Array2<f64> {
    Array2::from_shape_fn((keep, n), |(k, i)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
    })
}

/// Reusable extractor for one sample rate.
pub struct MfccExtractor {
    layout: FrameLayout,
    window: Vec<f64>,
    filters: Array2<f64>,
    dct: Array2<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(sample_rate: u32) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::SampleRate(sample_rate));
        }
        let layout = FrameLayout::for_rate(sample_rate);
        let fft = FftPlanner::new().plan_fft_forward(layout.fft_len);
        Ok(Self {
            layout,
            window: periodic_hann(layout.window),
            filters: mel_filterbank(sample_rate, layout.fft_len, NUM_MEL_FILTERS),
            dct: dct_basis(NUM_MEL_FILTERS, NUM_COEFFS),
            fft,
        })
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    /// Coefficients for one frame of `window` samples (already scaled to [-1, 1)).
    fn frame(&self, samples: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.layout.fft_len];
        for ((b, &s), &w) in buf.iter_mut().zip(samples).zip(&self.window) {
            b.re = s * w;
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.layout.fft_len / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        let log_mel: Vec<f64> = self
            .filters
            .rows()
            .into_iter()
            .map(|row| {
                let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        for (o, basis) in out.iter_mut().zip(self.dct.rows()) {
            *o = basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum();
        }
    }

    pub fn extract(&self, samples: &[i16]) -> Result<AudioFeatureSequence> {
        let n = self.layout.frame_count(samples.len());
        if n == 0 {
            return Err(Error::AudioTooShort {
                samples: samples.len(),
                window: self.layout.window,
            });
        }
        let scaled: Vec<f64> = samples.iter().map(|&s| s as f64 / 32768.0).collect();
        let mut frames = Array2::zeros((n, NUM_COEFFS));
        for (t, mut row) in frames.rows_mut().into_iter().enumerate() {
            let start = t * self.layout.hop;
            self.frame(
                &scaled[start..start + self.layout.window],
                row.as_slice_mut().expect("row-major"),
            );
        }
        AudioFeatureSequence::new(frames)
    }
}

/// 13-D MFCC at 100 Hz; frame count is `floor((n - window) / hop) + 1`.
pub fn extract_mfcc(pcm: &Pcm) -> Result<AudioFeatureSequence> {
    if pcm.channels != 1 {
        return Err(Error::NotMono(pcm.channels));
    }
    MfccExtractor::new(pcm.sample_rate)?.extract(&pcm.samples)
}

/// MFCC aligned to video timing: the tail is zero-padded by `window - hop`
/// samples so that frame `k` starts at sample `k * hop` and the frame count is
/// `floor(n / hop)`. Used by the pipeline so audio and 25 fps video stay 4:1.
pub fn extract_mfcc_aligned(pcm: &Pcm) -> Result<AudioFeatureSequence> {
    if pcm.channels != 1 {
        return Err(Error::NotMono(pcm.channels));
    }
    let ex = MfccExtractor::new(pcm.sample_rate)?;
    let layout = ex.layout();
    if pcm.samples.len() < layout.window {
        return Err(Error::AudioTooShort {
            samples: pcm.samples.len(),
            window: layout.window,
        });
    }
    let mut padded = pcm.samples.clone();
    padded.resize(pcm.samples.len() + layout.window - layout.hop, 0);
    let mut seq = ex.extract(&padded)?;
    let keep = pcm.samples.len() / layout.hop;
    seq.truncate(keep);
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, seconds: f64, rate: u32) -> Vec<i16> {
        let n = (seconds * rate as f64) as usize;
        (0..n)
            .map(|i| {
                (0.5 * 32767.0 * (2.0 * PI * freq * i as f64 / rate as f64).sin()).round() as i16
            })
            .collect()
    }

    /// Explicit O(N^2) DFT, mel weights recomputed per bin, explicit DCT sum.
    fn oracle_frame(samples: &[i16], rate: u32) -> Vec<f64> {
        let window = (0.025 * rate as f64).round() as usize;
        let nfft = window.next_power_of_two();
        let x: Vec<f64> = (0..nfft)
            .map(|i| {
                if i < window {
                    let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / window as f64).cos();
                    samples[i] as f64 / 32768.0 * w
                } else {
                    0.0
                }
            })
            .collect();
        let power: Vec<f64> = (0..=nfft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i) as f64 / nfft as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re * re + im * im
            })
            .collect();
        let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
        let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let top = mel(rate as f64 / 2.0);
        let energies: Vec<f64> = (0..26)
            .map(|m| {
                let lo = inv(top * m as f64 / 27.0);
                let mid = inv(top * (m + 1) as f64 / 27.0);
                let hi = inv(top * (m + 2) as f64 / 27.0);
                let mut e = 0.0;
                for (k, p) in power.iter().enumerate() {
                    let f = k as f64 * rate as f64 / nfft as f64;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    e += w * p;
                }
                e.max(1e-10).ln()
            })
            .collect();
        (0..13)
            .map(|k| {
                let s = if k == 0 { (1.0f64 / 26.0).sqrt() } else { (2.0f64 / 26.0).sqrt() };
                s * energies
                    .iter()
                    .enumerate()
                    .map(|(i, e)| e * (PI * k as f64 * (2 * i + 1) as f64 / 52.0).cos())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn two_seconds_gives_198_frames() {
        let pcm = Pcm::mono(sine(300.0, 2.0, 16000), 16000);
        let seq = extract_mfcc(&pcm).unwrap();
        assert_eq!(seq.len(), 198);
        assert_eq!(seq.frames().ncols(), 13);
        let aligned = extract_mfcc_aligned(&pcm).unwrap();
        assert_eq!(aligned.len(), 200);
        // The aligned variant only appends frames; shared prefix is identical.
        assert_eq!(aligned.frames().row(10), seq.frames().row(10));
    }

    #[test]
    fn silence_is_log_floor_constant() {
        let pcm = Pcm::mono(vec![0; 16000], 16000);
        let seq = extract_mfcc(&pcm).unwrap();
        let floor = LOG_FLOOR.ln();
        for row in seq.frames().rows() {
            assert!((row[0] - floor * (NUM_MEL_FILTERS as f64).sqrt()).abs() < 1e-9);
            for &c in row.iter().skip(1) {
                assert!(c.abs() < 1e-9);
            }
            assert_eq!(row, seq.frames().row(0));
        }
    }

    #[test]
    fn sine_matches_direct_dft_oracle() {
        let rate = 16000;
        let samples = sine(440.0, 1.0, rate);
        let seq = extract_mfcc(&Pcm::mono(samples.clone(), rate)).unwrap();
        for t in [0, 1, 17, 50, seq.len() - 1] {
            let expect = oracle_frame(&samples[t * 160..t * 160 + 400], rate);
            for (a, b) in seq.frames().row(t).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-6, "frame {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_short_stereo_and_low_rate() {
        assert!(matches!(
            extract_mfcc(&Pcm::mono(vec![0; 399], 16000)),
            Err(Error::AudioTooShort { .. })
        ));
        let stereo = Pcm {
            samples: vec![0; 32000],
            sample_rate: 16000,
            channels: 2,
        };
        assert!(matches!(extract_mfcc(&stereo), Err(Error::NotMono(2))));
        assert!(matches!(
            extract_mfcc(&Pcm::mono(vec![0; 32000], 4000)),
            Err(Error::SampleRate(4000))
        ));
    }

    #[test]
    fn deterministic() {
        let pcm = Pcm::mono(sine(123.0, 0.5, 22050), 22050);
        let a = extract_mfcc(&pcm).unwrap();
        let b = extract_mfcc(&pcm).unwrap();
        assert!(a
            .frames()
            .iter()
            .zip(b.frames().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
