//! One-pixel polylines and polygon masks on a fixed-size raster.

use crate::features::Point;

pub(crate) fn to_pixel(p: Point) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Integer line stepping from `a` to `b`, inclusive; `plot` sees every
/// visited pixel, including those off the raster.
pub(crate) fn line(a: (i64, i64), b: (i64, i64), plot: &mut impl FnMut(i64, i64)) {
    let (mut x, mut y) = a;
    let dx = (b.0 - x).abs();
    let dy = -(b.1 - y).abs();
    let sx = if x < b.0 { 1 } else { -1 };
    let sy = if y < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x, y);
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

pub(crate) fn polyline(points: &[Point], closed: bool, plot: &mut impl FnMut(i64, i64)) {
    let px: Vec<_> = points.iter().map(|&p| to_pixel(p)).collect();
    for pair in px.windows(2) {
        line(pair[0], pair[1], plot);
    }
    if closed && px.len() > 2 {
        line(px[px.len() - 1], px[0], plot);
    }
}

/// Even-odd test at pixel centres.
pub(crate) fn fill_polygon(poly: &[Point], width: u32, height: u32, mut plot: impl FnMut(u32, u32)) {
    if poly.len() < 3 {
        return;
    }
    for y in 0..height {
        let cy = y as f64;
        let mut xs = Vec::new();
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            if (a.y <= cy) != (b.y <= cy) {
                xs.push(a.x + (cy - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let start = span[0].ceil().max(0.0) as u32;
            let end = span[1].floor().min(width as f64 - 1.0);
            if end < 0.0 {
                continue;
            }
            for x in start..=end as u32 {
                plot(x, y);
            }
        }
    }
}
