//! Non-causal dilated TCN generator and discriminator on a small explicit
//! forward/backward substrate.

mod block;
mod checkpoint;
mod discriminator;
mod generator;
pub mod layers;

pub use block::{ResidualBlock, TcnStack};
pub use checkpoint::{Checkpoint, Tensor};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig};
pub use layers::{Mode, Param, Parameters};

use crate::error::{Error, Result};

/// Shape of a TCN block: one residual block per dilation factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcnBlockSpec {
    pub kernel_size: usize,
    pub filters: usize,
    pub dilations: Vec<usize>,
    pub causal: bool,
    pub convs_per_block: usize,
}

impl Default for TcnBlockSpec {
    fn default() -> Self {
        Self {
            kernel_size: 3,
            filters: 256,
            dilations: vec![1, 2, 4, 8],
            causal: false,
            convs_per_block: 2,
        }
    }
}

impl TcnBlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel size {} must be odd",
                self.kernel_size
            )));
        }
        if self.filters == 0 || self.convs_per_block == 0 || self.dilations.is_empty() {
            return Err(Error::Config("empty TCN block".into()));
        }
        let mut prev = 0;
        for &d in &self.dilations {
            if !d.is_power_of_two() || d <= prev {
                return Err(Error::Config(format!(
                    "dilations {:?} must be strictly increasing powers of two",
                    self.dilations
                )));
            }
            prev = d;
        }
        Ok(())
    }

    /// One-sided influence radius in frames: the sum over every dilated
    /// convolution of `d * (k - 1) / 2`. A causal block reaches twice as far,
    /// into the past only.
    pub fn radius(&self) -> usize {
        let per_tap = (self.kernel_size - 1) / 2;
        self.convs_per_block * per_tap * self.dilations.iter().sum::<usize>()
    }

    /// Total receptive field `1 + 2 * radius` (61 for the default block).
    pub fn receptive_field(&self) -> usize {
        1 + 2 * self.radius()
    }
}

/// Closed-form receptive field of a TCN block in frames.
pub fn receptive_field(spec: &TcnBlockSpec) -> usize {
    spec.receptive_field()
}
