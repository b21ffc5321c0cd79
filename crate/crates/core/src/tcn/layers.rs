//! Layer primitives with explicit forward caches and backward passes.
//!
//! Sequences are `time x channels` matrices. Convolutions are lowered to a
//! single matrix product over an im2col buffer, which the cache keeps for the
//! weight gradient.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Visitor over named parameters, in a fixed order.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.len());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Forward mode. Training mode carries the RNG that draws dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train(rng) => Mode::Train(&mut **rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Symmetric zero padding of `dilation * (k - 1) / 2` on both ends.
    Same,
    /// All padding on the past side.
    Causal,
}

/// 1-D convolution over time, optionally weight-normalized per output
/// channel (`w = g * v / |v|`).
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: Padding,
    /// `(kernel * in_channels) x out_channels`; tap-major rows.
    pub weight: Param,
    pub bias: Param,
    pub gain: Option<Param>,
}

pub struct ConvCache {
    cols: Array2<f64>,
    in_len: usize,
    effective: Option<Array2<f64>>,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        padding: Padding,
        weight_norm: bool,
        init_gain: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let fan_in = (kernel * in_channels) as f64;
        let std = init_gain / fan_in.sqrt();
        let weight = Array2::from_shape_simple_fn((kernel * in_channels, out_channels), || {
            std * rng.sample::<f64, _>(StandardNormal)
        });
        let gain = weight_norm.then(|| {
            let norms = weight.map_axis(Axis(0), |c| c.dot(&c).sqrt());
            Param::new(norms.insert_axis(Axis(0)))
        });
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            dilation,
            padding,
            weight: Param::new(weight),
            bias: Param::new(Array2::zeros((1, out_channels))),
            gain,
        }
    }

    /// Position-wise dense layer (kernel 1).
    pub fn dense(inp: usize, out: usize, init_gain: f64, rng: &mut dyn RngCore) -> Self {
        Self::new(inp, out, 1, 1, 1, Padding::Same, false, init_gain, rng)
    }

    pub fn pad_left(&self) -> usize {
        let span = self.dilation * (self.kernel - 1);
        match self.padding {
            Padding::Same => span / 2,
            Padding::Causal => span,
        }
    }

    pub fn pad_right(&self) -> usize {
        let span = self.dilation * (self.kernel - 1);
        match self.padding {
            Padding::Same => span - span / 2,
            Padding::Causal => 0,
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        let padded = in_len + self.pad_left() + self.pad_right();
        let span = self.dilation * (self.kernel - 1) + 1;
        if padded < span {
            0
        } else {
            (padded - span) / self.stride + 1
        }
    }

    /// Input frames on the (past, future) side that reach one output frame,
    /// in units of this layer's input rate.
    pub fn reach(&self) -> (usize, usize) {
        (self.pad_left(), self.pad_right())
    }

    fn effective_weight(&self) -> Option<Array2<f64>> {
        let g = self.gain.as_ref()?;
        let mut w = self.weight.value.clone();
        for (mut col, &gain) in w.axis_iter_mut(Axis(1)).zip(g.value.iter()) {
            let norm = col.dot(&col).sqrt();
            col *= gain / norm;
        }
        Some(w)
    }

    fn im2col(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (t_in, c) = x.dim();
        let t_out = self.out_len(t_in);
        let pl = self.pad_left() as isize;
        let mut cols = Array2::zeros((t_out, self.kernel * c));
        let xs = x.as_slice().expect("row-major input");
        let cs = cols.as_slice_mut().expect("fresh array");
        let width = self.kernel * c;
        for t in 0..t_out {
            for j in 0..self.kernel {
                let src = (self.stride * t) as isize - pl + (j * self.dilation) as isize;
                if src >= 0 && (src as usize) < t_in {
                    let src = src as usize;
                    let dst = t * width + j * c;
                    cs[dst..dst + c].copy_from_slice(&xs[src * c..(src + 1) * c]);
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, ConvCache) {
        debug_assert_eq!(x.ncols(), self.in_channels);
        let x = x.as_standard_layout();
        let cols = self.im2col(x.view());
        let effective = self.effective_weight();
        let w = effective.as_ref().unwrap_or(&self.weight.value);
        let mut y = cols.dot(w);
        y += &self.bias.value;
        (
            y,
            ConvCache {
                cols,
                in_len: x.nrows(),
                effective,
            },
        )
    }

    pub fn forward_eval(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x).0
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &ConvCache, dy: &Array2<f64>) -> Array2<f64> {
        let dw = cache.cols.t().dot(dy);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        match self.gain.as_mut() {
            None => self.weight.grad += &dw,
            Some(g) => {
                for (o, dw_col) in dw.axis_iter(Axis(1)).enumerate() {
                    let v = self.weight.value.column(o);
                    let norm = v.dot(&v).sqrt();
                    let gain = g.value[[0, o]];
                    let dg = dw_col.dot(&v) / norm;
                    g.grad[[0, o]] += dg;
                    let mut vg = self.weight.grad.column_mut(o);
                    for ((acc, &d), &vi) in vg.iter_mut().zip(dw_col.iter()).zip(v.iter()) {
                        *acc += gain / norm * d - gain * dg / (norm * norm) * vi;
                    }
                }
            }
        }
        let w = cache.effective.as_ref().unwrap_or(&self.weight.value);
        let dcols = dy.dot(&w.t());
        self.col2im(&dcols, cache.in_len)
    }

    fn col2im(&self, dcols: &Array2<f64>, t_in: usize) -> Array2<f64> {
        let c = self.in_channels;
        let mut dx = Array2::zeros((t_in, c));
        let pl = self.pad_left() as isize;
        let width = self.kernel * c;
        let ds = dcols.as_slice().expect("row-major");
        let xs = dx.as_slice_mut().expect("fresh array");
        for t in 0..dcols.nrows() {
            for j in 0..self.kernel {
                let src = (self.stride * t) as isize - pl + (j * self.dilation) as isize;
                if src >= 0 && (src as usize) < t_in {
                    let src = src as usize;
                    let off = t * width + j * c;
                    for (d, &g) in xs[src * c..(src + 1) * c].iter_mut().zip(&ds[off..off + c]) {
                        *d += g;
                    }
                }
            }
        }
        dx
    }
}

impl Parameters for Conv1d {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        let wname = if self.gain.is_some() { "v" } else { "weight" };
        f(&join(prefix, wname), &self.weight);
        if let Some(g) = &self.gain {
            f(&join(prefix, "g"), g);
        }
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        let wname = if self.gain.is_some() { "v" } else { "weight" };
        f(&join(prefix, wname), &mut self.weight);
        if let Some(g) = &mut self.gain {
            f(&join(prefix, "g"), g);
        }
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// In-place ReLU; returns the activation (its positivity is the mask).
pub fn relu(mut x: Array2<f64>) -> Array2<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

pub fn relu_backward(activated: &Array2<f64>, mut dy: Array2<f64>) -> Array2<f64> {
    ndarray::Zip::from(&mut dy)
        .and(activated)
        .for_each(|d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
    dy
}

/// Inverted dropout. `None` when inactive.
pub fn dropout(x: &mut Array2<f64>, rate: f64, mode: &mut Mode<'_>) -> Option<Array2<f64>> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
                if rng.gen::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            });
            *x *= &mask;
            Some(mask)
        }
        _ => None,
    }
}

pub fn dropout_backward(mask: Option<&Array2<f64>>, mut dy: Array2<f64>) -> Array2<f64> {
    if let Some(m) = mask {
        dy *= m;
    }
    dy
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    /// Direct convolution sum, independent of the im2col path.
    fn naive_conv(conv: &Conv1d, x: &Array2<f64>) -> Array2<f64> {
        let w = conv.effective_weight().unwrap_or(conv.weight.value.clone());
        let t_out = conv.out_len(x.nrows());
        Array2::from_shape_fn((t_out, conv.out_channels), |(t, o)| {
            let mut acc = conv.bias.value[[0, o]];
            for j in 0..conv.kernel {
                let src = (conv.stride * t + j * conv.dilation) as isize - conv.pad_left() as isize;
                if src < 0 || src as usize >= x.nrows() {
                    continue;
                }
                for c in 0..conv.in_channels {
                    acc += w[[j * conv.in_channels + c, o]] * x[[src as usize, c]];
                }
            }
            acc
        })
    }

    #[test]
    fn output_lengths() {
        let mut r = rng();
        let c = Conv1d::new(13, 4, 5, 2, 1, Padding::Same, false, 1.0, &mut r);
        assert_eq!(c.out_len(200), 100);
        assert_eq!(c.out_len(100), 50);
        let c = Conv1d::new(4, 4, 3, 1, 8, Padding::Same, true, 1.0, &mut r);
        assert_eq!(c.out_len(50), 50);
        let c = Conv1d::new(4, 4, 3, 1, 8, Padding::Causal, true, 1.0, &mut r);
        assert_eq!(c.out_len(50), 50);
        assert_eq!(c.reach(), (16, 0));
    }

    #[test]
    fn matches_naive_convolution() {
        let mut r = rng();
        for (k, s, d, pad, wn) in [
            (5, 2, 1, Padding::Same, false),
            (3, 1, 4, Padding::Same, true),
            (3, 1, 2, Padding::Causal, true),
            (1, 1, 1, Padding::Same, false),
        ] {
            let mut conv = Conv1d::new(3, 4, k, s, d, pad, wn, 1.0, &mut r);
            conv.bias.value.mapv_inplace(|_| r.gen_range(-1.0..1.0));
            if let Some(g) = &mut conv.gain {
                g.value.mapv_inplace(|v| v * 1.7);
            }
            let x = Array2::from_shape_simple_fn((20, 3), || r.gen_range(-1.0..1.0));
            let fast = conv.forward_eval(&x);
            let slow = naive_conv(&conv, &x);
            assert_eq!(fast.dim(), slow.dim());
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_norm_starts_at_identity_reparametrization() {
        let mut r = rng();
        let conv = Conv1d::new(3, 5, 3, 1, 1, Padding::Same, true, 1.0, &mut r);
        let w = conv.effective_weight().unwrap();
        for (a, b) in w.iter().zip(conv.weight.value.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut r = rng();
        let mut conv = Conv1d::new(2, 3, 3, 2, 2, Padding::Same, true, 1.0, &mut r);
        let x = Array2::from_shape_simple_fn((12, 2), || r.gen_range(-1.0..1.0));
        let target = Array2::from_shape_simple_fn((conv.out_len(12), 3), || r.gen_range(-1.0..1.0));
        let loss = |c: &Conv1d, x: &Array2<f64>| -> f64 {
            (&c.forward_eval(x) - &target).mapv(|v| v * v).sum()
        };
        let (y, cache) = conv.forward(&x);
        let dy = (&y - &target) * 2.0;
        let dx = conv.backward(&cache, &dy);
        let h = 1e-6;
        for i in 0..x.len() {
            let (t, c) = (i / 2, i % 2);
            let mut xp = x.clone();
            xp[[t, c]] += h;
            let mut xm = x.clone();
            xm[[t, c]] -= h;
            let num = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * h);
            assert!((num - dx[[t, c]]).abs() < 1e-6 * (1.0 + num.abs()));
        }
        let mut analytic = Vec::new();
        conv.visit("", &mut |_, p| analytic.extend(p.grad.iter().copied()));
        let mut idx = 0;
        let mut probe = conv.clone();
        let mut names = Vec::new();
        probe.visit("", &mut |n, p| names.push((n.to_string(), p.len())));
        for (name, len) in names {
            for k in 0..len {
                let bump = |c: &mut Conv1d, delta: f64| {
                    c.visit_mut("", &mut |n, p| {
                        if n == name {
                            let s = p.value.as_slice_mut().unwrap();
                            s[k] += delta;
                        }
                    })
                };
                bump(&mut probe, h);
                let lp = loss(&probe, &x);
                bump(&mut probe, -2.0 * h);
                let lm = loss(&probe, &x);
                bump(&mut probe, h);
                let num = (lp - lm) / (2.0 * h);
                assert!(
                    (num - analytic[idx]).abs() < 1e-6 * (1.0 + num.abs()),
                    "{name}[{k}]: {num} vs {}",
                    analytic[idx]
                );
                idx += 1;
            }
        }
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let mut x = Array2::from_elem((4, 4), 2.0);
        assert!(dropout(&mut x, 0.5, &mut Mode::Eval).is_none());
        assert!(x.iter().all(|&v| v == 2.0));
        let mut r = rng();
        let mask = dropout(&mut x, 0.5, &mut Mode::Train(&mut r)).unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
