//! Minimal line plot of a per-position error profile.

use image::{Rgb, RgbImage};

const W: u32 = 640;
const H: u32 = 400;
const MARGIN: i64 = 40;

fn line(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), color: Rgb<u8>) {
    let (mut x, mut y) = a;
    let (dx, dy) = ((b.0 - x).abs(), -(b.1 - y).abs());
    let (sx, sy) = (if x < b.0 { 1 } else { -1 }, if y < b.1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        if (0..W as i64).contains(&x) && (0..H as i64).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// White canvas, black axes, grey interior band (positions 10-39) and the
/// profile as a blue polyline scaled to its maximum.
pub fn profile_plot(profile: &[f64]) -> RgbImage {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let (x0, x1) = (MARGIN, W as i64 - MARGIN);
    let (y0, y1) = (H as i64 - MARGIN, MARGIN);
    let n = profile.len().max(2);
    let xs = |i: usize| x0 + ((x1 - x0) as f64 * i as f64 / (n - 1) as f64).round() as i64;
    for x in xs(10.min(n - 1))..=xs(39.min(n - 1)) {
        line(&mut img, (x, y1), (x, y0), Rgb([235, 235, 235]));
    }
    line(&mut img, (x0, y0), (x1, y0), Rgb([0, 0, 0]));
    line(&mut img, (x0, y0), (x0, y1), Rgb([0, 0, 0]));
    for i in 0..n {
        line(&mut img, (xs(i), y0), (xs(i), y0 + 4), Rgb([0, 0, 0]));
    }
    let max = profile.iter().copied().fold(0.0, f64::max);
    let ys = |v: f64| {
        let t = if max > 0.0 { v / max } else { 0.0 };
        y0 - ((y0 - y1) as f64 * t).round() as i64
    };
    for (i, pair) in profile.windows(2).enumerate() {
        line(&mut img, (xs(i), ys(pair[0])), (xs(i + 1), ys(pair[1])), Rgb([20, 60, 200]));
    }
    img
}
