//! Face-side geometry: Canny edges, jaw correction and facial-map rendering.

mod canny;
mod jaw;
pub(crate) mod raster;

use std::path::Path;

use image::{DynamicImage, GrayImage, Rgb, RgbImage};

pub use canny::{canny, EdgeMap, BLUR_KERNEL, BLUR_NORM, DEFAULT_HIGH, DEFAULT_LOW};
pub use jaw::{
    correct_jaw, fit_jaw, harvest_jaw_samples, mouth_wh, JawRegressor, JawSample, JAW_POINTS,
};

use crate::error::{Error, Result};
use crate::features::{
    read_landmark_csv, LandmarkFrame, MouthCoordinates, PcaModel, Placement, Point, JAW,
};

pub const MAP_SIZE: u32 = 512;
pub const EDGE_CHANNEL: usize = 0;
pub const FACE_CHANNEL: usize = 1;
pub const MOUTH_CHANNEL: usize = 2;
/// Pixels around the face contour also cleared from the edge channel.
const MASK_MARGIN: i64 = 3;

const BROWS: [std::ops::RangeInclusive<usize>; 2] = [17..=21, 22..=26];
const NOSE: [std::ops::RangeInclusive<usize>; 2] = [27..=30, 31..=35];
const EYES: [std::ops::RangeInclusive<usize>; 2] = [36..=41, 42..=47];
const OUTER_LIP: std::ops::RangeInclusive<usize> = 48..=59;
const INNER_LIP: std::ops::RangeInclusive<usize> = 60..=67;

/// A template video frame: 512x512 crop, its landmarks and Canny edges.
#[derive(Debug, Clone)]
pub struct TemplateFrame {
    pub image: RgbImage,
    pub landmarks: LandmarkFrame,
    pub edges: EdgeMap,
}

impl TemplateFrame {
    pub fn new(image: RgbImage, landmarks: LandmarkFrame, low: f64, high: f64) -> Result<Self> {
        if image.dimensions() != (MAP_SIZE, MAP_SIZE) {
            return Err(Error::ShapeMismatch {
                expected: (MAP_SIZE as usize, MAP_SIZE as usize),
                got: (image.height() as usize, image.width() as usize),
            });
        }
        landmarks.validate()?;
        let edges = canny(&to_gray(&image), low, high)?;
        Ok(Self {
            image,
            landmarks,
            edges,
        })
    }
}

/// Integer luma: (299 R + 587 G + 114 B) / 1000, rounded.
pub fn to_gray(image: &RgbImage) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        let Rgb([r, g, b]) = *image.get_pixel(x, y);
        let v = (299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000;
        image::Luma([v as u8])
    })
}

/// Reads `frame_*.png` (sorted by name) and `landmarks.csv` from `dir`.
pub fn load_template_dir(dir: impl AsRef<Path>, low: f64, high: f64) -> Result<Vec<TemplateFrame>> {
    let dir = dir.as_ref();
    let mut pngs: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "png")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("frame_"))
        })
        .collect();
    pngs.sort();
    let landmarks = read_landmark_csv(dir.join("landmarks.csv"), (MAP_SIZE, MAP_SIZE))?;
    if pngs.len() != landmarks.len() {
        return Err(Error::Format(format!(
            "template has {} frames but {} landmark rows",
            pngs.len(),
            landmarks.len()
        )));
    }
    pngs.iter()
        .zip(landmarks)
        .map(|(p, lm)| TemplateFrame::new(image::open(p)?.to_rgb8(), lm, low, high))
        .collect()
}

/// Three-channel binary conditioning raster (0 or 255 per channel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacialMap {
    pub raster: RgbImage,
}

impl FacialMap {
    fn blank() -> Self {
        Self {
            raster: RgbImage::new(MAP_SIZE, MAP_SIZE),
        }
    }

    fn mark(&mut self, channel: usize, x: i64, y: i64) {
        if (0..MAP_SIZE as i64).contains(&x) && (0..MAP_SIZE as i64).contains(&y) {
            self.raster.get_pixel_mut(x as u32, y as u32).0[channel] = 255;
        }
    }

    fn polyline(&mut self, channel: usize, points: &[Point], closed: bool) {
        raster::polyline(points, closed, &mut |x, y| self.mark(channel, x, y));
    }

    /// Set pixels of one channel as (x, y).
    pub fn channel_pixels(&self, channel: usize) -> Vec<(u32, u32)> {
        self.raster
            .enumerate_pixels()
            .filter(|(_, _, p)| p.0[channel] != 0)
            .map(|(x, y, _)| (x, y))
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        DynamicImage::ImageRgb8(self.raster.clone()).save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(self.raster.clone()).write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }
}

/// Face contour: jaw 0..16 then brows 26 back to 17.
fn face_polygon(points: &[Point]) -> Vec<Point> {
    JAW.map(|i| points[i]).chain((17..=26).rev().map(|i| points[i])).collect()
}

fn face_mask(points: &[Point]) -> Vec<bool> {
    let n = MAP_SIZE as usize;
    let mut mask = vec![false; n * n];
    let poly = face_polygon(points);
    raster::fill_polygon(&poly, MAP_SIZE, MAP_SIZE, |x, y| mask[y as usize * n + x as usize] = true);
    raster::polyline(&poly, true, &mut |x, y| {
        for yy in y - MASK_MARGIN..=y + MASK_MARGIN {
            for xx in x - MASK_MARGIN..=x + MASK_MARGIN {
                if (0..n as i64).contains(&xx) && (0..n as i64).contains(&yy) {
                    mask[yy as usize * n + xx as usize] = true;
                }
            }
        }
    });
    mask
}

/// Draws the facial map for one generated mouth (normalized coordinates).
/// `placement` is the template frame's nose anchor, roll and scale.
pub fn compose_map(
    template: &TemplateFrame,
    mouth: &MouthCoordinates,
    regressor: &JawRegressor,
    placement: &Placement,
) -> Result<FacialMap> {
    let mouth_px: Vec<Point> = mouth.points.iter().map(|&p| placement.to_pixels(p)).collect();
    let inside = |p: &Point| {
        let (x, y) = raster::to_pixel(*p);
        (0..MAP_SIZE as i64).contains(&x) && (0..MAP_SIZE as i64).contains(&y)
    };
    if !mouth_px.iter().all(inside) {
        return Err(Error::PlacementOutOfBounds);
    }
    let lm = &template.landmarks.points;
    let template_jaw: Vec<Point> = JAW.map(|i| placement.to_normalized(lm[i])).collect();
    let jaw_px: Vec<Point> = correct_jaw(regressor, &template_jaw, mouth)
        .into_iter()
        .map(|p| placement.to_pixels(p))
        .collect();

    let mut map = FacialMap::blank();
    let mask = face_mask(lm);
    for (x, y) in template.edges.iter() {
        if !mask[(y * MAP_SIZE + x) as usize] {
            map.mark(EDGE_CHANNEL, x as i64, y as i64);
        }
    }
    for r in BROWS.iter().chain(&NOSE) {
        map.polyline(FACE_CHANNEL, &lm[r.clone()], false);
    }
    for r in &EYES {
        map.polyline(FACE_CHANNEL, &lm[r.clone()], true);
    }
    let base = OUTER_LIP.start();
    map.polyline(MOUTH_CHANNEL, &mouth_px[OUTER_LIP.start() - base..=OUTER_LIP.end() - base], true);
    map.polyline(MOUTH_CHANNEL, &mouth_px[INNER_LIP.start() - base..=INNER_LIP.end() - base], true);
    map.polyline(MOUTH_CHANNEL, &jaw_px, false);
    Ok(map)
}

/// `compose_map` for a PCA mouth feature row.
pub fn compose_map_from_features(
    template: &TemplateFrame,
    features: &[f64],
    pca: &PcaModel,
    regressor: &JawRegressor,
    placement: &Placement,
) -> Result<FacialMap> {
    let mouth = pca.inverse(features)?;
    compose_map(template, &mouth, regressor, placement)
}
