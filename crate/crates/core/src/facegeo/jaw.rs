//! Multi-linear regression from mouth (w, h) to per-landmark jaw offsets.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{LandmarkFrame, MouthCoordinates, NormalizeOptions, Placement, Point, JAW};

pub const JAW_POINTS: usize = 17;
const MAGIC: &[u8; 4] = b"JAW1";
const MIN_SAMPLES: usize = 4;

/// Mouth width (corners 48-54) and height (outer mid-lips 51-57).
pub fn mouth_wh(coords: &MouthCoordinates) -> (f64, f64) {
    (
        coords.landmark(48).distance(coords.landmark(54)),
        coords.landmark(51).distance(coords.landmark(57)),
    )
}

/// One training pair: mouth shape and the 17 jaw offsets it came with.
#[derive(Debug, Clone, PartialEq)]
pub struct JawSample {
    pub wh: (f64, f64),
    pub offsets: Vec<Point>,
}

/// `offset[j].{x,y} = c0 + c1 * w + c2 * h` for each jaw landmark `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct JawRegressor {
    pub coefficients: [[[f64; 3]; 2]; JAW_POINTS],
}

impl JawRegressor {
    pub fn zero() -> Self {
        Self {
            coefficients: [[[0.0; 3]; 2]; JAW_POINTS],
        }
    }

    pub fn predict(&self, w: f64, h: f64) -> Vec<Point> {
        let eval = |c: &[f64; 3]| c[0] + c[1] * w + c[2] * h;
        self.coefficients
            .iter()
            .map(|[cx, cy]| Point::new(eval(cx), eval(cy)))
            .collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in self.coefficients.iter().flatten().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let expected = 4 + JAW_POINTS * 6 * 8;
        if bytes.len() != expected || &bytes[..4] != MAGIC {
            return Err(Error::Format(format!(
                "jaw model must be JAW1 + {} floats ({expected} bytes), got {} bytes",
                JAW_POINTS * 6,
                bytes.len()
            )));
        }
        let mut values = bytes[4..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut reg = Self::zero();
        for v in reg.coefficients.iter_mut().flatten().flatten() {
            *v = values.next().expect("length checked");
        }
        Ok(reg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Ordinary least squares on the design `[1, w, h]`, one fit per jaw
/// coordinate.
pub fn fit_jaw(samples: &[JawSample]) -> Result<JawRegressor> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    for s in samples {
        if s.offsets.len() != JAW_POINTS {
            return Err(Error::DimensionMismatch {
                expected: JAW_POINTS,
                got: s.offsets.len(),
            });
        }
    }
    let n = samples.len();
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => samples[i].wh.0,
        _ => samples[i].wh.1,
    });
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(Error::DegenerateMouthShapes);
    }
    let mut reg = JawRegressor::zero();
    for j in 0..JAW_POINTS {
        for axis in 0..2 {
            let y = DVector::from_fn(n, |i, _| {
                let p = samples[i].offsets[j];
                if axis == 0 {
                    p.x
                } else {
                    p.y
                }
            });
            let beta = svd
                .solve(&y, 0.0)
                .map_err(|e| Error::Format(format!("least squares failed: {e}")))?;
            reg.coefficients[j][axis] = [beta[0], beta[1], beta[2]];
        }
    }
    Ok(reg)
}

/// Template jaw plus the offsets predicted for this mouth's (w, h). Both the
/// jaw and the mouth are in normalized coordinates.
pub fn correct_jaw(reg: &JawRegressor, template_jaw: &[Point], mouth: &MouthCoordinates) -> Vec<Point> {
    let (w, h) = mouth_wh(mouth);
    template_jaw
        .iter()
        .zip(reg.predict(w, h))
        .map(|(&p, d)| p + d)
        .collect()
}

/// Training pairs from footage: normalized mouth (w, h) against the
/// normalized jaw minus its mean over all frames.
pub fn harvest_jaw_samples(frames: &[LandmarkFrame]) -> Result<Vec<JawSample>> {
    let mut shapes = Vec::with_capacity(frames.len());
    for f in frames {
        let placement = Placement::from_frame(f, NormalizeOptions::default())?;
        let norm = |p: &Point| placement.to_normalized(*p);
        let mouth = MouthCoordinates::from_slice(&f.mouth().iter().map(norm).collect::<Vec<_>>())?;
        let jaw: Vec<Point> = f.points[JAW].iter().map(norm).collect();
        shapes.push((mouth_wh(&mouth), jaw));
    }
    if shapes.is_empty() {
        return Ok(Vec::new());
    }
    let mut mean = vec![Point::default(); JAW_POINTS];
    for (_, jaw) in &shapes {
        for (m, p) in mean.iter_mut().zip(jaw) {
            *m = *m + *p;
        }
    }
    let inv = 1.0 / shapes.len() as f64;
    mean.iter_mut().for_each(|m| *m = *m * inv);
    Ok(shapes
        .into_iter()
        .map(|(wh, jaw)| JawSample {
            wh,
            offsets: jaw.iter().zip(&mean).map(|(&p, &m)| p - m).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn mouth_from(points: &[(usize, Point)]) -> MouthCoordinates {
        let mut pts = [Point::default(); 20];
        for &(i, p) in points {
            pts[i - 48] = p;
        }
        MouthCoordinates::new(pts)
    }

    #[test]
    fn mouth_wh_hand_example() {
        let m = mouth_from(&[
            (48, Point::new(-1.0, 0.0)),
            (54, Point::new(1.0, 0.0)),
            (51, Point::new(0.0, 0.5)),
            (57, Point::new(0.0, -0.5)),
        ]);
        assert_eq!(mouth_wh(&m), (2.0, 1.0));
        let closed = mouth_from(&[
            (48, Point::new(-1.0, 0.0)),
            (54, Point::new(1.0, 0.0)),
            (51, Point::new(0.0, 0.2)),
            (57, Point::new(0.0, 0.2)),
        ]);
        assert_eq!(mouth_wh(&closed).1, 0.0);
    }

    fn planted(n: usize, rng: &mut ChaCha8Rng, f: impl Fn(f64, f64, usize, usize) -> f64) -> Vec<JawSample> {
        (0..n)
            .map(|_| {
                let (w, h) = (rng.gen_range(0.4..0.8), rng.gen_range(0.0..0.4));
                JawSample {
                    wh: (w, h),
                    offsets: (0..17).map(|j| Point::new(f(w, h, j, 0), f(w, h, j, 1))).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn recovers_planted_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reg = fit_jaw(&planted(30, &mut rng, |w, h, _, _| 0.3 * w + 0.1 * h + 2.0)).unwrap();
        for c in reg.coefficients.iter().flatten() {
            assert!((c[0] - 2.0).abs() < 1e-8 && (c[1] - 0.3).abs() < 1e-8 && (c[2] - 0.1).abs() < 1e-8);
        }
        let constant = fit_jaw(&planted(10, &mut rng, |_, _, j, a| j as f64 - a as f64)).unwrap();
        for (j, pair) in constant.coefficients.iter().enumerate() {
            for (a, c) in pair.iter().enumerate() {
                assert!((c[0] - (j as f64 - a as f64)).abs() < 1e-8);
                assert!(c[1].abs() < 1e-8 && c[2].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn residual_rms_tracks_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut samples = planted(4000, &mut rng, |w, h, _, _| 0.5 * w - 0.2 * h);
        for s in &mut samples {
            for p in &mut s.offsets {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
            }
        }
        let reg = fit_jaw(&samples).unwrap();
        let mut sq = 0.0;
        for s in &samples {
            for (p, q) in s.offsets.iter().zip(reg.predict(s.wh.0, s.wh.1)) {
                sq += (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
            }
        }
        let rms = (sq / (samples.len() * 34) as f64).sqrt();
        assert!((rms / 0.02 - 1.0).abs() < 0.05, "rms {rms}");
    }

    #[test]
    fn centered_fit_predicts_zero_at_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut samples = planted(50, &mut rng, |w, h, j, _| j as f64 * w + h * h);
        let mut mean = vec![Point::default(); 17];
        for s in &samples {
            for (m, p) in mean.iter_mut().zip(&s.offsets) {
                *m = *m + *p * (1.0 / 50.0);
            }
        }
        for s in &mut samples {
            for (p, m) in s.offsets.iter_mut().zip(&mean) {
                *p = *p - *m;
            }
        }
        let (mw, mh) = samples
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + s.wh.0 / 50.0, b + s.wh.1 / 50.0));
        for p in fit_jaw(&samples).unwrap().predict(mw, mh) {
            assert!(p.x.abs() < 1e-10 && p.y.abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let same = vec![
            JawSample {
                wh: (0.5, 0.2),
                offsets: vec![Point::default(); 17]
            };
            6
        ];
        assert!(matches!(fit_jaw(&same), Err(Error::DegenerateMouthShapes)));
        let collinear: Vec<_> = (0..6)
            .map(|i| JawSample {
                wh: (i as f64, 2.0 * i as f64),
                offsets: vec![Point::default(); 17],
            })
            .collect();
        assert!(matches!(fit_jaw(&collinear), Err(Error::DegenerateMouthShapes)));
        assert!(matches!(fit_jaw(&same[..3]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn correct_jaw_cases() {
        let jaw: Vec<Point> = (0..17).map(|i| Point::new(i as f64, -(i as f64))).collect();
        let m = mouth_from(&[(48, Point::new(-0.3, 0.4)), (54, Point::new(0.3, 0.4))]);
        assert_eq!(correct_jaw(&JawRegressor::zero(), &jaw, &m), jaw);
        let mut shift = JawRegressor::zero();
        for pair in &mut shift.coefficients {
            pair[0][0] = 0.25;
            pair[1][0] = -1.0;
        }
        for (a, b) in correct_jaw(&shift, &jaw, &m).iter().zip(&jaw) {
            assert_eq!(*a - *b, Point::new(0.25, -1.0));
        }
    }

    #[test]
    fn binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut reg = JawRegressor::zero();
        reg.coefficients.iter_mut().flatten().flatten().for_each(|v| *v = rng.gen());
        let mut buf = Vec::new();
        reg.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 102 * 8);
        assert_eq!(JawRegressor::read_from(buf.as_slice()).unwrap(), reg);
        assert!(JawRegressor::read_from(&buf[..100]).is_err());
    }
}
