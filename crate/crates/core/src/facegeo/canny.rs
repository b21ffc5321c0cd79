//! Canny edge detection in exact integer arithmetic. The blur is the 5x5
//! binomial-like kernel with weights summing to 159 (sigma about 1.4);
//! blurred values stay scaled by 159 so no rounding happens anywhere.

use std::collections::VecDeque;

use image::GrayImage;

use crate::error::{Error, Result};

pub const DEFAULT_LOW: f64 = 50.0;
pub const DEFAULT_HIGH: f64 = 150.0;

pub const BLUR_KERNEL: [[i64; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
pub const BLUR_NORM: i64 = 159;

/// Binary edge raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    pixels: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![false; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.pixels[(y * self.width + x) as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Edge pixels in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }
}

fn clamp_index(v: i64, n: u32) -> usize {
    v.clamp(0, n as i64 - 1) as usize
}

/// Sector step along the gradient: horizontal, vertical or one of the two
/// diagonals, signed so it points toward increasing intensity. The 22.5
/// degree boundaries are tested exactly via `|g| / |gx| <= sqrt(2) - 1`
/// squared out.
fn gradient_step(gx: i64, gy: i64) -> (i64, i64) {
    let (ax, ay) = (gx.abs(), gy.abs());
    let s = (ax + ay) * (ax + ay);
    if s <= 2 * ax * ax {
        (gx.signum(), 0)
    } else if s <= 2 * ay * ay {
        (0, gy.signum())
    } else {
        (gx.signum(), gy.signum())
    }
}

/// Edges of `image` with hysteresis thresholds on the gradient magnitude of
/// the blurred image (8-bit intensity units).
pub fn canny(image: &GrayImage, low: f64, high: f64) -> Result<EdgeMap> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    if !(low > 0.0 && high >= low && high.is_finite()) {
        return Err(Error::Config(format!(
            "canny thresholds need high >= low > 0, got low={low}, high={high}"
        )));
    }
    let (wu, hu) = (w as usize, h as usize);
    let px = |x: usize, y: usize| image.as_raw()[y * wu + x] as i64;

    let mut blur = vec![0i64; wu * hu];
    for y in 0..hu {
        for x in 0..wu {
            let mut acc = 0;
            for (ky, row) in BLUR_KERNEL.iter().enumerate() {
                let sy = clamp_index(y as i64 + ky as i64 - 2, h);
                for (kx, k) in row.iter().enumerate() {
                    acc += k * px(clamp_index(x as i64 + kx as i64 - 2, w), sy);
                }
            }
            blur[y * wu + x] = acc;
        }
    }

    let b = |x: i64, y: i64| blur[clamp_index(y, h) * wu + clamp_index(x, w)];
    let mut grad = vec![(0i64, 0i64); wu * hu];
    let mut mag = vec![0i64; wu * hu];
    for y in 0..hu as i64 {
        for x in 0..wu as i64 {
            let gx = b(x + 1, y - 1) + 2 * b(x + 1, y) + b(x + 1, y + 1)
                - b(x - 1, y - 1)
                - 2 * b(x - 1, y)
                - b(x - 1, y + 1);
            let gy = b(x - 1, y + 1) + 2 * b(x, y + 1) + b(x + 1, y + 1)
                - b(x - 1, y - 1)
                - 2 * b(x, y - 1)
                - b(x + 1, y - 1);
            let i = y as usize * wu + x as usize;
            grad[i] = (gx, gy);
            mag[i] = gx * gx + gy * gy;
        }
    }

    let m = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= wu as i64 || y >= hu as i64 {
            0
        } else {
            mag[y as usize * wu + x as usize]
        }
    };
    let norm = BLUR_NORM as f64;
    let (low_sq, high_sq) = ((low * norm).powi(2), (high * norm).powi(2));
    // 0 = suppressed or below low, 1 = weak, 2 = strong.
    let mut class = vec![0u8; wu * hu];
    for y in 0..hu as i64 {
        for x in 0..wu as i64 {
            let i = y as usize * wu + x as usize;
            let v = mag[i];
            if (v as f64) < low_sq {
                continue;
            }
            let (gx, gy) = grad[i];
            let (dx, dy) = gradient_step(gx, gy);
            if v > m(x + dx, y + dy) && v >= m(x - dx, y - dy) {
                class[i] = if v as f64 >= high_sq { 2 } else { 1 };
            }
        }
    }

    let mut edges = EdgeMap::empty(w, h);
    let mut queue: VecDeque<usize> = (0..wu * hu).filter(|&i| class[i] == 2).collect();
    for &i in &queue {
        edges.pixels[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % wu) as i64, (i / wu) as i64);
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if nx < 0 || ny < 0 || nx >= wu as i64 || ny >= hu as i64 {
                    continue;
                }
                let j = ny as usize * wu + nx as usize;
                if class[j] == 1 && !edges.pixels[j] {
                    edges.pixels[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(edges)
}
