//! Fixed-length training windows and overlap-stitch inference planning.
//!
//! A window spans 200 audio frames (2 s at 100 Hz) and the matching 50 video
//! frames. At inference consecutive windows overlap by `output_overlap` video
//! frames on each side; the overlapped frames, which see zero padding inside
//! the network, are discarded before the predictions are concatenated.

use std::ops::Range;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::features::{AudioFeatureSequence, MouthFeatureSequence, RATE_RATIO};

pub const AUDIO_WINDOW: usize = 200;
pub const VIDEO_WINDOW: usize = 50;
pub const DEFAULT_OUTPUT_OVERLAP: usize = 10;
pub const DEFAULT_TRAIN_HOP: usize = 5;

/// One aligned training example.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub audio: Array2<f64>,
    pub mouth: Array2<f64>,
    pub start_audio_frame: usize,
}

impl WindowPair {
    pub fn start_video_frame(&self) -> usize {
        self.start_audio_frame / RATE_RATIO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapConfig {
    output_overlap: usize,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            output_overlap: DEFAULT_OUTPUT_OVERLAP,
        }
    }
}

impl OverlapConfig {
    pub fn new(output_overlap: usize) -> Result<Self> {
        if output_overlap >= VIDEO_WINDOW / 2 {
            return Err(Error::Config(format!(
                "output overlap {output_overlap} must be below {}",
                VIDEO_WINDOW / 2
            )));
        }
        Ok(Self { output_overlap })
    }

    pub fn output_overlap(&self) -> usize {
        self.output_overlap
    }

    pub fn input_overlap(&self) -> usize {
        RATE_RATIO * self.output_overlap
    }

    /// Video frames between consecutive window starts.
    pub fn advance(&self) -> usize {
        VIDEO_WINDOW - 2 * self.output_overlap
    }
}

/// Cuts aligned streams into windows at video offsets `0, hop, 2*hop, ...`.
pub fn make_training_windows(
    audio: &AudioFeatureSequence,
    mouth: &MouthFeatureSequence,
    hop_video_frames: usize,
) -> Result<Vec<WindowPair>> {
    if hop_video_frames == 0 {
        return Err(Error::Config("training hop must be at least 1".into()));
    }
    if audio.len() != RATE_RATIO * mouth.len() {
        return Err(Error::RateAlignment {
            audio: audio.len(),
            mouth: mouth.len(),
        });
    }
    if mouth.len() < VIDEO_WINDOW {
        return Err(Error::SequenceTooShort(mouth.len()));
    }
    let windows = (0..=mouth.len() - VIDEO_WINDOW)
        .step_by(hop_video_frames)
        .map(|v| {
            let a = RATE_RATIO * v;
            WindowPair {
                audio: audio.frames().slice(s![a..a + AUDIO_WINDOW, ..]).to_owned(),
                mouth: mouth.frames().slice(s![v..v + VIDEO_WINDOW, ..]).to_owned(),
                start_audio_frame: a,
            }
        })
        .collect();
    Ok(windows)
}

/// Window start (video frames) and the absolute frames it contributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedWindow {
    pub start: usize,
    pub keep: Range<usize>,
}

impl PlannedWindow {
    pub fn audio_start(&self) -> usize {
        RATE_RATIO * self.start
    }
}

/// Plans overlapping inference windows whose keep ranges partition
/// `[0, total)`. The first window keeps its head and the last its tail; a
/// final window that would overrun is anchored at `total - 50` and keeps
/// only what its predecessor did not.
pub fn plan_inference_windows(total: usize, cfg: OverlapConfig) -> Result<Vec<PlannedWindow>> {
    if total < VIDEO_WINDOW {
        return Err(Error::SequenceTooShort(total));
    }
    let ov = cfg.output_overlap();
    let mut starts: Vec<usize> = (0..=total - VIDEO_WINDOW).step_by(cfg.advance()).collect();
    if starts.last().map_or(true, |&s| s + VIDEO_WINDOW < total) {
        starts.push(total - VIDEO_WINDOW);
    }
    let last = starts.len() - 1;
    let mut plan = Vec::with_capacity(starts.len());
    let mut keep_start = 0;
    for (i, &start) in starts.iter().enumerate() {
        let keep_end = if i == last {
            total
        } else {
            start + VIDEO_WINDOW - ov
        };
        plan.push(PlannedWindow {
            start,
            keep: keep_start..keep_end,
        });
        keep_start = keep_end;
    }
    Ok(plan)
}

/// Concatenates the kept frames of each window prediction.
pub fn stitch(predictions: &[Array2<f64>], plan: &[PlannedWindow]) -> Result<MouthFeatureSequence> {
    if predictions.len() != plan.len() {
        return Err(Error::PlanMismatch {
            plan: plan.len(),
            predictions: predictions.len(),
        });
    }
    let dims = predictions.first().map_or(0, |p| p.ncols());
    let total = plan.last().map_or(0, |w| w.keep.end);
    let mut out = Array2::zeros((total, dims));
    for (pred, w) in predictions.iter().zip(plan) {
        if pred.nrows() != VIDEO_WINDOW || pred.ncols() != dims {
            return Err(Error::ShapeMismatch {
                expected: (VIDEO_WINDOW, dims),
                got: pred.dim(),
            });
        }
        if w.keep.start < w.start || w.keep.end > w.start + VIDEO_WINDOW {
            return Err(Error::Config(format!(
                "keep range {:?} outside window starting at {}",
                w.keep, w.start
            )));
        }
        let local = w.keep.start - w.start..w.keep.end - w.start;
        out.slice_mut(s![w.keep.clone(), ..])
            .assign(&pred.slice(s![local, ..]));
    }
    Ok(MouthFeatureSequence::new(out))
}

/// Runs `predict` over every planned window of `audio` and stitches the results.
pub fn infer_overlapped<F>(
    audio: &Array2<f64>,
    cfg: OverlapConfig,
    mut predict: F,
) -> Result<MouthFeatureSequence>
where
    F: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
{
    let total = audio.nrows() / RATE_RATIO;
    if total < VIDEO_WINDOW {
        return Err(Error::SequenceTooShort(total));
    }
    let plan = plan_inference_windows(total, cfg)?;
    let preds = plan
        .iter()
        .map(|w| {
            let a = w.audio_start();
            predict(&audio.slice(s![a..a + AUDIO_WINDOW, ..]).to_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    stitch(&preds, &plan)
}
