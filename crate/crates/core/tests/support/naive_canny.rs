//! Textbook Canny written independently of the library: floating-point
//! convolutions, angle quantization through `atan2`, recursive hysteresis.
//! Blurred values are left unnormalized (x159) so everything stays exact.

use image::GrayImage;

const GAUSS: [[f64; 5]; 5] = [
    [2.0, 4.0, 5.0, 4.0, 2.0],
    [4.0, 9.0, 12.0, 9.0, 4.0],
    [5.0, 12.0, 15.0, 12.0, 5.0],
    [4.0, 9.0, 12.0, 9.0, 4.0],
    [2.0, 4.0, 5.0, 4.0, 2.0],
];
const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Row-major edge flags.
pub fn naive_canny(img: &GrayImage, low: f64, high: f64) -> Vec<Vec<bool>> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let at = |grid: &Vec<Vec<f64>>, x: i64, y: i64| grid[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];

    let src: Vec<Vec<f64>> = (0..h)
        .map(|y| (0..w).map(|x| img.get_pixel(x as u32, y as u32)[0] as f64).collect())
        .collect();

    let mut blur = vec![vec![0.0; w as usize]; h as usize];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for j in 0..5 {
                for i in 0..5 {
                    s += GAUSS[j][i] * at(&src, x + i as i64 - 2, y + j as i64 - 2);
                }
            }
            blur[y as usize][x as usize] = s;
        }
    }

    let mut gx = vec![vec![0.0; w as usize]; h as usize];
    let mut gy = gx.clone();
    let mut mag = gx.clone();
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = at(&blur, x + i as i64 - 1, y + j as i64 - 1);
                    sx += SOBEL_X[j][i] * v;
                    sy += SOBEL_Y[j][i] * v;
                }
            }
            let (yu, xu) = (y as usize, x as usize);
            gx[yu][xu] = sx;
            gy[yu][xu] = sy;
            mag[yu][xu] = (sx * sx + sy * sy).sqrt();
        }
    }

    let (lo, hi) = (low * 159.0, high * 159.0);
    let mag_at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            mag[y as usize][x as usize]
        }
    };
    // Direction of increasing intensity, image y pointing down.
    const DIRS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let mut strong = vec![vec![false; w as usize]; h as usize];
    let mut weak = strong.clone();
    for y in 0..h {
        for x in 0..w {
            let m = mag[y as usize][x as usize];
            if m < lo {
                continue;
            }
            let angle = gy[y as usize][x as usize].atan2(gx[y as usize][x as usize]).to_degrees();
            let k = ((angle / 45.0).round() as i64).rem_euclid(8) as usize;
            let (dx, dy) = DIRS[k];
            if m > mag_at(x + dx, y + dy) && m >= mag_at(x - dx, y - dy) {
                if m >= hi {
                    strong[y as usize][x as usize] = true;
                } else {
                    weak[y as usize][x as usize] = true;
                }
            }
        }
    }

    fn grow(x: i64, y: i64, w: i64, h: i64, weak: &Vec<Vec<bool>>, out: &mut Vec<Vec<bool>>) {
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let (xu, yu) = (nx as usize, ny as usize);
                if weak[yu][xu] && !out[yu][xu] {
                    out[yu][xu] = true;
                    grow(nx, ny, w, h, weak, out);
                }
            }
        }
    }

    let mut out = strong.clone();
    for y in 0..h {
        for x in 0..w {
            if strong[y as usize][x as usize] {
                grow(x, y, w, h, &weak, &mut out);
            }
        }
    }
    out
}

/// 64x64 black image with a filled white 32x32 square in the middle.
pub fn white_square() -> GrayImage {
    GrayImage::from_fn(64, 64, |x, y| {
        let inside = (16..48).contains(&x) && (16..48).contains(&y);
        image::Luma([if inside { 255 } else { 0 }])
    })
}

/// Random test images: pure noise, blocky shapes and noisy blocks.
pub fn random_image(seed: u64) -> GrayImage {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let kind = seed % 3;
    let rects: Vec<(u32, u32, u32, u32, u8)> = (0..6)
        .map(|_| {
            let (x0, y0) = (rng.gen_range(0..56), rng.gen_range(0..56));
            (x0, y0, x0 + rng.gen_range(4..24), y0 + rng.gen_range(4..24), rng.gen())
        })
        .collect();
    GrayImage::from_fn(64, 64, |x, y| {
        let mut v: i32 = 40;
        if kind != 0 {
            for &(x0, y0, x1, y1, c) in &rects {
                if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
                    v = c as i32;
                }
            }
        }
        if kind != 1 {
            v += rng.gen_range(-60..=60) * if kind == 0 { 2 } else { 1 };
        }
        image::Luma([v.clamp(0, 255) as u8])
    })
}

pub fn to_rows(map: &lipsync_core::facegeo::EdgeMap) -> Vec<Vec<bool>> {
    (0..map.height())
        .map(|y| (0..map.width()).map(|x| map.contains(x, y)).collect())
        .collect()
}
