//! Feature spaces of the pipeline: 13-D MFCC audio frames at 100 Hz,
//! normalized 20-point mouth shapes and their 10-D PCA codes at 25 Hz.

mod io;
pub mod landmarks;
pub mod mfcc;
pub mod pca;

use ndarray::{s, Array2};

use crate::error::{Error, Result};

pub use io::{
    read_audio_csv, read_landmark_csv, read_matrix_csv, read_mouth_coords_csv, read_mouth_csv,
    write_audio_csv, write_landmark_csv, write_matrix_csv, write_mouth_coords_csv,
    write_mouth_csv,
};
pub use landmarks::{
    normalize_landmarks, normalize_with, LandmarkFrame, MouthCoordinates, NormalizeOptions,
    Placement, Point, JAW, MOUTH_START, NUM_LANDMARKS, NUM_MOUTH_POINTS,
};
pub use mfcc::{extract_mfcc, extract_mfcc_aligned, Pcm};
pub use pca::{fit_pca, fit_pca_dims, PcaModel, COORD_DIM};

pub const AUDIO_DIM: usize = 13;
pub const AUDIO_RATE_HZ: u32 = 100;
pub const MOUTH_RATE_HZ: u32 = 25;
/// Audio frames per video frame.
pub const RATE_RATIO: usize = 4;
pub const DEFAULT_PCA_DIMS: usize = 10;

/// 13-D MFCC frames at 100 Hz, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureSequence {
    frames: Array2<f64>,
}

impl AudioFeatureSequence {
    pub fn new(frames: Array2<f64>) -> Result<Self> {
        if frames.ncols() != AUDIO_DIM {
            return Err(Error::DimensionMismatch {
                expected: AUDIO_DIM,
                got: frames.ncols(),
            });
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite audio feature".into()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate_hz(&self) -> u32 {
        AUDIO_RATE_HZ
    }

    pub fn truncate(&mut self, len: usize) {
        if len < self.len() {
            self.frames = self.frames.slice(s![..len, ..]).to_owned();
        }
    }
}

/// PCA mouth codes at 25 Hz, one row per video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MouthFeatureSequence {
    frames: Array2<f64>,
}

impl MouthFeatureSequence {
    pub fn new(frames: Array2<f64>) -> Self {
        Self { frames }
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.frames.ncols()
    }

    pub fn rate_hz(&self) -> u32 {
        MOUTH_RATE_HZ
    }

    pub fn truncate(&mut self, len: usize) {
        if len < self.len() {
            self.frames = self.frames.slice(s![..len, ..]).to_owned();
        }
    }
}

/// Trims both streams to the longest prefix where audio is exactly 4x mouth.
pub fn align_streams(audio: &mut AudioFeatureSequence, mouth: &mut MouthFeatureSequence) {
    let video = mouth.len().min(audio.len() / RATE_RATIO);
    mouth.truncate(video);
    audio.truncate(video * RATE_RATIO);
}
