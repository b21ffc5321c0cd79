//! Audio-driven lip-sync pipeline: MFCC and mouth-shape features, a TCN
//! generator trained adversarially, overlap-stitched inference and facial
//! map rendering for a downstream image-to-image renderer.

pub mod error;
pub mod facegeo;
pub mod features;
pub mod synthdata;
pub mod tcn;
pub mod training;
pub mod windows;

pub use error::{Error, Result};
pub use features::{AudioFeatureSequence, LandmarkFrame, MouthCoordinates, MouthFeatureSequence, PcaModel};
pub use tcn::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, TcnBlockSpec};
pub use training::{LossWeights, MetricsReport, TrainConfig};
pub use windows::{OverlapConfig, WindowPair};
