use std::io;

use thiserror::Error;

/// Errors produced anywhere in the lip-sync pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("audio too short: {samples} samples, need at least {window}")]
    AudioTooShort { samples: usize, window: usize },

    #[error("audio must be mono, got {0} channels")]
    NotMono(u16),

    #[error("unsupported sample rate {0} Hz (minimum 8000)")]
    SampleRate(u32),

    #[error("cannot estimate roll: outer eye corners coincide")]
    CannotEstimateRoll,

    #[error("invalid landmark frame: {0}")]
    InvalidLandmarks(String),

    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("zero-variance corpus: all samples are identical")]
    ZeroVariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("rate alignment violated: {audio} audio frames vs {mouth} mouth frames")]
    RateAlignment { audio: usize, mouth: usize },

    #[error("sequence shorter than one window: {0} frames")]
    SequenceTooShort(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("plan/prediction count mismatch: {plan} windows planned, {predictions} predictions")]
    PlanMismatch { plan: usize, predictions: usize },

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("non-finite loss in {component} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        component: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("empty image")]
    EmptyImage,

    #[error("degenerate mouth-shape data")]
    DegenerateMouthShapes,

    #[error("placement out of bounds")]
    PlacementOutOfBounds,

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
