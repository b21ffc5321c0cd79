use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::Result;
use crate::facegeo::raster::fill_polygon;
use crate::facegeo::{mouth_wh, JAW_POINTS, MAP_SIZE};
use crate::features::{LandmarkFrame, MouthCoordinates, Pcm, Placement, Point, JAW, NUM_LANDMARKS};

/// Mouth centre height below the nose, in inter-ocular units.
const MOUTH_Y: f64 = 0.38;

/// Parametric 68-point face in normalized coordinates (nose centre at the
/// origin, outer eye corners at (-0.5, -0.3) and (0.5, -0.3)). The jaw is a
/// planted linear function of the mouth's (w, h).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFace {
    pub neutral: Vec<Point>,
    pub jaw_coefficients: [[[f64; 3]; 2]; JAW_POINTS],
    pub rest_wh: (f64, f64),
}

impl SyntheticFace {
    pub fn standard() -> Self {
        let rest_wh = (0.6, 0.1);
        let mut pts = vec![Point::default(); NUM_LANDMARKS];
        let mut coef = [[[0.0; 3]; 2]; JAW_POINTS];
        for j in JAW {
            let phi = PI * j as f64 / 16.0;
            pts[j] = Point::new(-0.78 * phi.cos(), -0.25 + 1.15 * phi.sin());
            coef[j][0] = [0.25 * phi.cos() * rest_wh.0, -0.25 * phi.cos(), 0.0];
            coef[j][1] = [-0.8 * phi.sin() * rest_wh.1, 0.0, 0.8 * phi.sin()];
        }
        for k in 0..5 {
            let t = k as f64 / 4.0;
            let y = -0.5 - 0.06 * (PI * t).sin();
            pts[17 + k] = Point::new(-0.62 + 0.48 * t, y);
            pts[26 - k] = Point::new(0.62 - 0.48 * t, y);
        }
        for k in 0..4 {
            pts[27 + k] = Point::new(0.0, -0.36 + 0.09 * k as f64);
        }
        let nose = [(-0.14, -0.02), (-0.07, 0.01), (0.0, 0.02), (0.07, 0.01), (0.14, -0.02)];
        let eye = [(-0.5, -0.3), (-0.4, -0.35), (-0.28, -0.35), (-0.18, -0.3), (-0.28, -0.26), (-0.4, -0.26)];
        for (k, &(x, y)) in nose.iter().enumerate() {
            pts[31 + k] = Point::new(x, y);
        }
        for (k, &(x, y)) in eye.iter().enumerate() {
            pts[36 + k] = Point::new(x, y);
            // Mirror image of the right eye, keeping the corner-to-corner order.
            pts[42 + [3, 2, 1, 0, 5, 4][k]] = Point::new(-x, y);
        }
        let mut face = Self {
            neutral: pts,
            jaw_coefficients: coef,
            rest_wh,
        };
        let mouth = face.rest_mouth();
        face.neutral[48..68].copy_from_slice(&mouth.points);
        face
    }

    /// Lip contours for width `w` (corner to corner) and height `h` (outer
    /// mid-lip to mid-lip).
    pub fn mouth(&self, w: f64, h: f64) -> MouthCoordinates {
        let a = w / 2.0;
        let (top, bottom) = (0.4 * h, 0.6 * h);
        let mut pts = [Point::default(); 20];
        for k in 0..7 {
            let phi = PI - k as f64 * PI / 6.0;
            pts[k] = Point::new(a * phi.cos(), MOUTH_Y - top * phi.sin());
        }
        for k in 0..5 {
            let phi = -(k as f64 + 1.0) * PI / 6.0;
            pts[7 + k] = Point::new(a * phi.cos(), MOUTH_Y - bottom * phi.sin());
        }
        let (ia, it, ib) = (0.8 * a, (top - 0.03).max(0.0), (bottom - 0.03).max(0.0));
        for k in 0..4 {
            let phi = PI - k as f64 * PI / 4.0;
            pts[12 + k] = Point::new(ia * phi.cos(), MOUTH_Y - it * phi.sin());
        }
        for k in 0..4 {
            let phi = -(k as f64) * PI / 4.0;
            pts[16 + k] = Point::new(ia * phi.cos(), MOUTH_Y - ib * phi.sin());
        }
        MouthCoordinates::new(pts)
    }

    pub fn rest_mouth(&self) -> MouthCoordinates {
        self.mouth(self.rest_wh.0, self.rest_wh.1)
    }

    /// Ground-truth jaw for a mouth of size (w, h).
    pub fn jaw(&self, (w, h): (f64, f64)) -> Vec<Point> {
        let eval = |c: &[f64; 3]| c[0] + c[1] * w + c[2] * h;
        JAW.map(|j| {
            let [cx, cy] = &self.jaw_coefficients[j];
            self.neutral[j] + Point::new(eval(cx), eval(cy))
        })
        .collect()
    }

    /// Pixel landmarks of the face with this mouth, placed in the image.
    pub fn landmarks(
        &self,
        mouth: &MouthCoordinates,
        placement: &Placement,
        frame_index: usize,
        image_size: (u32, u32),
    ) -> Result<LandmarkFrame> {
        let mut pts = self.neutral.clone();
        pts[48..68].copy_from_slice(&mouth.points);
        for (j, p) in self.jaw(mouth_wh(mouth)).into_iter().enumerate() {
            pts[j] = p;
        }
        let frame = LandmarkFrame::new(
            frame_index,
            pts.into_iter().map(|p| placement.to_pixels(p)).collect(),
            image_size,
        )?;
        frame.validate()?;
        Ok(frame)
    }
}

pub const PLANTED_COMPONENTS: usize = 10;

/// Landmark frames whose normalized mouth coordinates have a planted
/// spectrum: 10 decaying principal variances plus isotropic noise sized so
/// the top 10 components explain 99% of the variance in expectation.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub frames: Vec<LandmarkFrame>,
    pub mean: Vec<f64>,
    /// 10 x 40, orthonormal rows.
    pub basis: Array2<f64>,
    pub variances: Vec<f64>,
    pub noise_variance: f64,
}

impl PlantedCorpus {
    /// Expected share of variance in the planted subspace.
    pub fn expected_ratio(&self) -> f64 {
        let s: f64 = self.variances.iter().sum();
        let dims = self.basis.ncols() as f64;
        let k = self.basis.nrows() as f64;
        (s + k * self.noise_variance) / (s + dims * self.noise_variance)
    }
}

pub fn planted_landmark_corpus(frames: usize, seed: u64) -> Result<PlantedCorpus> {
    let face = SyntheticFace::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 40;
    let g = DMatrix::from_fn(dims, PLANTED_COMPONENTS, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    let basis = Array2::from_shape_fn((PLANTED_COMPONENTS, dims), |(r, c)| q[(c, r)]);
    let variances: Vec<f64> = (0..PLANTED_COMPONENTS).map(|j| 2e-3 * 0.6f64.powi(j as i32)).collect();
    let total: f64 = variances.iter().sum();
    // (S + 10 s2) / (S + 40 s2) = 0.99
    let noise_variance = total * 0.01 / (0.99 * dims as f64 - PLANTED_COMPONENTS as f64);
    let mean = face.mouth(0.6, 0.15).to_flat();
    let noise = Normal::new(0.0, noise_variance.sqrt()).expect("finite sigma");

    let mut out = Vec::with_capacity(frames);
    for i in 0..frames {
        let mut flat = mean.clone();
        for (j, var) in variances.iter().enumerate() {
            let c = var.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            for (v, b) in flat.iter_mut().zip(basis.row(j)) {
                *v += c * b;
            }
        }
        flat.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        let placement = Placement {
            nose: Point::new(256.0 + rng.gen_range(-15.0..15.0), 250.0 + rng.gen_range(-15.0..15.0)),
            roll: rng.gen_range(-0.15..0.15),
            scale: rng.gen_range(130.0..170.0),
        };
        let mouth = MouthCoordinates::from_flat(&flat)?;
        out.push(face.landmarks(&mouth, &placement, i, (MAP_SIZE, MAP_SIZE))?);
    }
    Ok(PlantedCorpus {
        frames: out,
        mean,
        basis,
        variances,
        noise_variance,
    })
}

/// Flat-shaded 512x512 portrait for a landmark frame: graded background, a
/// bright window, shoulders, skin, eyes and lips.
pub fn render_portrait(frame: &LandmarkFrame) -> RgbImage {
    let mut img = RgbImage::from_fn(MAP_SIZE, MAP_SIZE, |_, y| {
        let v = 30 + (y / 16) as u8;
        Rgb([v, v, v + 10])
    });
    let mut fill = |poly: &[Point], color: [u8; 3]| {
        fill_polygon(poly, MAP_SIZE, MAP_SIZE, |x, y| img.put_pixel(x, y, Rgb(color)));
    };
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
        [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
    };
    fill(&rect(20.0, 30.0, 120.0, 200.0), [220, 220, 200]);
    fill(&rect(96.0, 460.0, 416.0, 520.0), [150, 150, 190]);
    let p = &frame.points;
    let face: Vec<Point> = JAW.map(|i| p[i]).chain((17..=26).rev().map(|i| p[i])).collect();
    fill(&face, [200, 170, 150]);
    fill(&p[36..42], [60, 50, 50]);
    fill(&p[42..48], [60, 50, 50]);
    fill(&p[48..60], [150, 70, 80]);
    fill(&p[60..68], [40, 20, 20]);
    img
}

/// Mono 16-bit harmonic "speech" with a 4 Hz syllable envelope.
pub fn synth_speech(seconds: f64, sample_rate: u32, seed: u64) -> Pcm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sample_rate as f64).round() as usize;
    let dt = 1.0 / sample_rate as f64;
    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let f0 = 120.0 + 20.0 * (2.0 * PI * 0.5 * t).sin();
            phase += 2.0 * PI * f0 * dt;
            let env = 0.5 * (1.0 + (2.0 * PI * 4.0 * t).sin());
            let voiced: f64 = (1..=5).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            (6000.0 * (env * voiced + 0.05 * noise)).round().clamp(-32768.0, 32767.0) as i16
        })
        .collect();
    Pcm {
        samples,
        sample_rate,
        channels: 1,
    }
}
