//! 68-point landmark frames and the roll/translation/scale normalization of
//! the mouth region.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 68;
pub const NUM_MOUTH_POINTS: usize = 20;
pub const MOUTH_START: usize = 48;
pub const JAW: std::ops::RangeInclusive<usize> = 0..=16;
pub const RIGHT_EYE_OUTER: usize = 36;
pub const LEFT_EYE_OUTER: usize = 45;
/// Nostril line, averaged to give the nose centre.
pub const NOSE_CENTER: std::ops::RangeInclusive<usize> = 31..=35;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

fn centroid(points: impl IntoIterator<Item = Point>) -> Point {
    let (mut sum, mut n) = (Point::default(), 0usize);
    for p in points {
        sum = sum + p;
        n += 1;
    }
    sum * (1.0 / n as f64)
}

/// One video frame of 68 landmarks in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: usize,
    pub points: Vec<Point>,
    pub image_size: (u32, u32),
}

impl LandmarkFrame {
    pub fn new(frame_index: usize, points: Vec<Point>, image_size: (u32, u32)) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::InvalidLandmarks(format!(
                "expected {NUM_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        Ok(Self {
            frame_index,
            points,
            image_size,
        })
    }

    /// Points are finite and inside the image.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != NUM_LANDMARKS {
            return Err(Error::InvalidLandmarks(format!(
                "expected {NUM_LANDMARKS} points, got {}",
                self.points.len()
            )));
        }
        let (w, h) = (self.image_size.0 as f64, self.image_size.1 as f64);
        for (i, p) in self.points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidLandmarks(format!("point {i} is not finite")));
            }
            if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                return Err(Error::InvalidLandmarks(format!(
                    "point {i} ({}, {}) outside {}x{} image",
                    p.x, p.y, self.image_size.0, self.image_size.1
                )));
            }
        }
        Ok(())
    }

    pub fn mouth(&self) -> &[Point] {
        &self.points[MOUTH_START..]
    }

    pub fn jaw(&self) -> &[Point] {
        &self.points[JAW]
    }
}

/// The 20 mouth landmarks (68-scheme indices 48..=67), nose-centred and
/// roll-free.
#[derive(Debug, Clone, PartialEq)]
pub struct MouthCoordinates {
    pub points: [Point; NUM_MOUTH_POINTS],
}

impl MouthCoordinates {
    pub fn new(points: [Point; NUM_MOUTH_POINTS]) -> Self {
        Self { points }
    }

    pub fn from_slice(points: &[Point]) -> Result<Self> {
        let points: [Point; NUM_MOUTH_POINTS] =
            points.try_into().map_err(|_| Error::DimensionMismatch {
                expected: NUM_MOUTH_POINTS,
                got: points.len(),
            })?;
        Ok(Self { points })
    }

    /// Interleaved `x0, y0, x1, y1, ...`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * NUM_MOUTH_POINTS {
            return Err(Error::DimensionMismatch {
                expected: 2 * NUM_MOUTH_POINTS,
                got: flat.len(),
            });
        }
        let mut points = [Point::default(); NUM_MOUTH_POINTS];
        for (p, xy) in points.iter_mut().zip(flat.chunks_exact(2)) {
            *p = Point::new(xy[0], xy[1]);
        }
        Ok(Self { points })
    }

    /// Point by its index in the 68-point scheme (48..=67).
    pub fn landmark(&self, index68: usize) -> Point {
        self.points[index68 - MOUTH_START]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Divide by the outer-eye-corner distance.
    pub scale: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self { scale: true }
    }
}

/// Rigid frame of a face: nose anchor, roll angle and scale. Maps between
/// pixel coordinates and normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub nose: Point,
    pub roll: f64,
    pub scale: f64,
}

impl Placement {
    pub fn from_frame(frame: &LandmarkFrame, opts: NormalizeOptions) -> Result<Self> {
        if frame.points.len() != NUM_LANDMARKS {
            return Err(Error::InvalidLandmarks(format!(
                "expected {NUM_LANDMARKS} points, got {}",
                frame.points.len()
            )));
        }
        let eye = frame.points[LEFT_EYE_OUTER] - frame.points[RIGHT_EYE_OUTER];
        let dist = eye.norm();
        if !(dist > 1e-12) {
            return Err(Error::CannotEstimateRoll);
        }
        Ok(Self {
            nose: centroid(NOSE_CENTER.map(|i| frame.points[i])),
            roll: eye.y.atan2(eye.x),
            scale: if opts.scale { dist } else { 1.0 },
        })
    }

    pub fn to_normalized(&self, p: Point) -> Point {
        (p - self.nose).rotate(-self.roll) * (1.0 / self.scale)
    }

    pub fn to_pixels(&self, p: Point) -> Point {
        (p * self.scale).rotate(self.roll) + self.nose
    }
}

pub fn normalize_with(frame: &LandmarkFrame, opts: NormalizeOptions) -> Result<MouthCoordinates> {
    frame.validate()?;
    let placement = Placement::from_frame(frame, opts)?;
    let mut points = [Point::default(); NUM_MOUTH_POINTS];
    for (dst, &src) in points.iter_mut().zip(frame.mouth()) {
        *dst = placement.to_normalized(src);
    }
    Ok(MouthCoordinates { points })
}

/// Removes roll, centres on the nose and (by default) scales by the
/// outer-eye-corner distance, returning the 20 mouth points.
pub fn normalize_landmarks(frame: &LandmarkFrame) -> Result<MouthCoordinates> {
    normalize_with(frame, NormalizeOptions::default())
}
