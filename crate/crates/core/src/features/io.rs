//! CSV encodings of the feature streams. Floats are written with Rust's
//! shortest round-trip formatting, so a read after write is bit-exact.

use std::path::Path;

use ndarray::Array2;

use super::landmarks::{LandmarkFrame, MouthCoordinates, Point, NUM_LANDMARKS};
use super::{AudioFeatureSequence, MouthFeatureSequence, AUDIO_DIM};
use crate::error::{Error, Result};

/// Writes a matrix with header `{prefix}0, {prefix}1, ...`.
pub fn write_matrix_csv(path: impl AsRef<Path>, prefix: &str, m: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.ncols()).map(|j| format!("{prefix}{j}")))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headed numeric CSV. `cols` pins the expected width when given.
pub fn read_matrix_csv(path: impl AsRef<Path>, cols: Option<usize>) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if let Some(c) = cols {
        if c != width {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: width,
            });
        }
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {field:?} on row {rows}")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, width), data).expect("csv rows have header width"))
}

pub fn write_audio_csv(path: impl AsRef<Path>, seq: &AudioFeatureSequence) -> Result<()> {
    write_matrix_csv(path, "c", seq.frames())
}

pub fn read_audio_csv(path: impl AsRef<Path>) -> Result<AudioFeatureSequence> {
    AudioFeatureSequence::new(read_matrix_csv(path, Some(AUDIO_DIM))?)
}

pub fn write_mouth_csv(path: impl AsRef<Path>, seq: &MouthFeatureSequence) -> Result<()> {
    write_matrix_csv(path, "m", seq.frames())
}

pub fn read_mouth_csv(path: impl AsRef<Path>) -> Result<MouthFeatureSequence> {
    Ok(MouthFeatureSequence::new(read_matrix_csv(path, None)?))
}

/// Normalized mouth coordinates, 40 interleaved columns per row.
pub fn write_mouth_coords_csv(path: impl AsRef<Path>, coords: &[MouthCoordinates]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..20).flat_map(|i| [format!("x{i}"), format!("y{i}")]))?;
    for c in coords {
        w.write_record(c.to_flat().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mouth_coords_csv(path: impl AsRef<Path>) -> Result<Vec<MouthCoordinates>> {
    let m = read_matrix_csv(path, Some(40))?;
    m.rows()
        .into_iter()
        .map(|r| MouthCoordinates::from_flat(r.as_slice().expect("row-major")))
        .collect()
}

/// `frame_index, x0, y0, ..., x67, y67` with a header row.
pub fn write_landmark_csv(path: impl AsRef<Path>, frames: &[LandmarkFrame]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header = std::iter::once("frame_index".to_string())
        .chain((0..NUM_LANDMARKS).flat_map(|i| [format!("x{i}"), format!("y{i}")]));
    w.write_record(header)?;
    for f in frames {
        let row = std::iter::once(f.frame_index.to_string())
            .chain(f.points.iter().flat_map(|p| [p.x.to_string(), p.y.to_string()]));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_landmark_csv(
    path: impl AsRef<Path>,
    image_size: (u32, u32),
) -> Result<Vec<LandmarkFrame>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width != 1 + 2 * NUM_LANDMARKS {
        return Err(Error::Format(format!(
            "landmark CSV needs {} columns, found {width}",
            1 + 2 * NUM_LANDMARKS
        )));
    }
    let mut frames = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad value {:?} on row {row}", &rec[i])))
        };
        let index = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad frame index on row {row}")))?;
        let points = (0..NUM_LANDMARKS)
            .map(|i| Ok(Point::new(num(1 + 2 * i)?, num(2 + 2 * i)?)))
            .collect::<Result<Vec<_>>>()?;
        frames.push(LandmarkFrame::new(index, points, image_size)?);
    }
    Ok(frames)
}
