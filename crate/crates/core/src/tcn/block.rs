//! Residual TCN block: per dilation, two weight-normalized dilated
//! convolutions with ReLU and dropout, a residual path (1x1 projection when
//! the channel count changes) and a ReLU after the sum.

use ndarray::Array2;
use rand::RngCore;

use super::layers::{
    dropout, dropout_backward, join, relu, relu_backward, Conv1d, ConvCache, Mode, Padding,
    Parameters,
};
use super::TcnBlockSpec;

#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub convs: Vec<Conv1d>,
    pub projection: Option<Conv1d>,
    pub dropout: f64,
}

struct ConvStep {
    cache: ConvCache,
    activated: Array2<f64>,
    mask: Option<Array2<f64>>,
}

pub struct ResidualTrace {
    steps: Vec<ConvStep>,
    projection: Option<ConvCache>,
    out: Array2<f64>,
}

impl ResidualBlock {
    pub fn new(
        in_channels: usize,
        spec: &TcnBlockSpec,
        dilation: usize,
        dropout: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let padding = if spec.causal {
            Padding::Causal
        } else {
            Padding::Same
        };
        let convs = (0..spec.convs_per_block)
            .map(|i| {
                let cin = if i == 0 { in_channels } else { spec.filters };
                Conv1d::new(
                    cin,
                    spec.filters,
                    spec.kernel_size,
                    1,
                    dilation,
                    padding,
                    true,
                    2f64.sqrt(),
                    rng,
                )
            })
            .collect();
        let projection = (in_channels != spec.filters)
            .then(|| Conv1d::dense(in_channels, spec.filters, 1.0, rng));
        Self {
            convs,
            projection,
            dropout,
        }
    }

    pub fn forward(&self, x: &Array2<f64>, mode: &mut Mode<'_>) -> (Array2<f64>, ResidualTrace) {
        let mut h = x.clone();
        let mut steps = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (y, cache) = conv.forward(&h);
            let activated = relu(y);
            let mut out = activated.clone();
            let mask = dropout(&mut out, self.dropout, mode);
            steps.push(ConvStep {
                cache,
                activated,
                mask,
            });
            h = out;
        }
        let (residual, projection) = match &self.projection {
            Some(p) => {
                let (r, c) = p.forward(x);
                (r, Some(c))
            }
            None => (x.clone(), None),
        };
        let out = relu(h + residual);
        (
            out.clone(),
            ResidualTrace {
                steps,
                projection,
                out,
            },
        )
    }

    pub fn backward(&mut self, trace: &ResidualTrace, dy: &Array2<f64>) -> Array2<f64> {
        let g = relu_backward(&trace.out, dy.clone());
        let mut dx = match (&mut self.projection, &trace.projection) {
            (Some(p), Some(c)) => p.backward(c, &g),
            _ => g.clone(),
        };
        let mut dh = g;
        for (conv, step) in self.convs.iter_mut().zip(&trace.steps).rev() {
            let d = dropout_backward(step.mask.as_ref(), dh);
            let d = relu_backward(&step.activated, d);
            dh = conv.backward(&step.cache, &d);
        }
        dx += &dh;
        dx
    }

    /// (past, future) reach in frames.
    pub fn reach(&self) -> (usize, usize) {
        self.convs.iter().fold((0, 0), |(p, f), c| {
            let (cp, cf) = c.reach();
            (p + cp, f + cf)
        })
    }
}

impl Parameters for ResidualBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &super::layers::Param)) {
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&join(prefix, &format!("conv{i}")), f);
        }
        if let Some(p) = &self.projection {
            p.visit(&join(prefix, "proj"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut super::layers::Param)) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("conv{i}")), f);
        }
        if let Some(p) = &mut self.projection {
            p.visit_mut(&join(prefix, "proj"), f);
        }
    }
}

/// One residual block per dilation factor.
#[derive(Debug, Clone)]
pub struct TcnStack {
    pub spec: TcnBlockSpec,
    pub blocks: Vec<ResidualBlock>,
}

pub struct TcnTrace {
    blocks: Vec<ResidualTrace>,
}

impl TcnStack {
    pub fn new(in_channels: usize, spec: TcnBlockSpec, dropout: f64, rng: &mut dyn RngCore) -> Self {
        let mut cin = in_channels;
        let blocks = spec
            .dilations
            .iter()
            .map(|&d| {
                let b = ResidualBlock::new(cin, &spec, d, dropout, rng);
                cin = spec.filters;
                b
            })
            .collect();
        Self { spec, blocks }
    }

    pub fn forward(&self, x: &Array2<f64>, mode: &mut Mode<'_>) -> (Array2<f64>, TcnTrace) {
        let mut h = x.clone();
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, t) = b.forward(&h, mode);
            traces.push(t);
            h = y;
        }
        (h, TcnTrace { blocks: traces })
    }

    pub fn backward(&mut self, trace: &TcnTrace, dy: &Array2<f64>) -> Array2<f64> {
        let mut d = dy.clone();
        for (b, t) in self.blocks.iter_mut().zip(&trace.blocks).rev() {
            d = b.backward(t, &d);
        }
        d
    }

    pub fn reach(&self) -> (usize, usize) {
        self.blocks.iter().fold((0, 0), |(p, f), b| {
            let (bp, bf) = b.reach();
            (p + bp, f + bf)
        })
    }
}

impl Parameters for TcnStack {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &super::layers::Param)) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut super::layers::Param)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("block{i}")), f);
        }
    }
}
