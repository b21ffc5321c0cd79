//! Principal component model of flattened mouth shapes.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use super::landmarks::{MouthCoordinates, NUM_MOUTH_POINTS};
use crate::error::{Error, Result};

pub const COORD_DIM: usize = 2 * NUM_MOUTH_POINTS;
const MAGIC: &[u8; 4] = b"PCA1";

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// One orthonormal component per row, `dims x 40`.
    pub components: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Fits the top `dims` principal components of the mean-centred corpus.
pub fn fit_pca_dims(corpus: &[MouthCoordinates], dims: usize) -> Result<PcaModel> {
    if dims == 0 || dims > COORD_DIM {
        return Err(Error::Config(format!("PCA dimension {dims} not in [1, {COORD_DIM}]")));
    }
    if corpus.len() < dims + 1 {
        return Err(Error::InsufficientData {
            got: corpus.len(),
            need: dims + 1,
        });
    }
    let n = corpus.len() as f64;
    let data = DMatrix::from_row_iterator(
        corpus.len(),
        COORD_DIM,
        corpus.iter().flat_map(|c| c.to_flat()),
    );
    let mean = data.row_mean();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n - 1.0);
    let total: f64 = cov.trace();
    let scale = 1.0 + mean.norm_squared();
    if !(total > 1e-20 * scale) {
        return Err(Error::ZeroVariance);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..COORD_DIM).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Array2::zeros((dims, COORD_DIM));
    let mut ratios = Vec::with_capacity(dims);
    for (k, &idx) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(idx);
        // Sign convention: largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (j, &x) in v.iter().enumerate() {
            components[[k, j]] = sign * x;
        }
        ratios.push((eig.eigenvalues[idx].max(0.0) / total).clamp(0.0, 1.0));
    }
    // Eigenvalues are sorted, but rounding can still nudge equal ones.
    for k in 1..ratios.len() {
        if ratios[k] > ratios[k - 1] {
            ratios[k] = ratios[k - 1];
        }
    }

    Ok(PcaModel {
        mean: Array1::from_iter(mean.iter().copied()),
        components,
        explained_variance_ratio: ratios,
    })
}

/// Ten-component fit; needs at least 11 samples.
pub fn fit_pca(corpus: &[MouthCoordinates]) -> Result<PcaModel> {
    fit_pca_dims(corpus, super::DEFAULT_PCA_DIMS)
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform_flat(&self, flat: &[f64]) -> Result<Array1<f64>> {
        if flat.len() != COORD_DIM {
            return Err(Error::DimensionMismatch {
                expected: COORD_DIM,
                got: flat.len(),
            });
        }
        let x = Array1::from_iter(flat.iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok(self.components.dot(&x))
    }

    pub fn transform(&self, coords: &MouthCoordinates) -> Result<Array1<f64>> {
        self.transform_flat(&coords.to_flat())
    }

    pub fn inverse_flat(&self, feature: &[f64]) -> Result<Array1<f64>> {
        if feature.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: feature.len(),
            });
        }
        let f = Array1::from_iter(feature.iter().copied());
        Ok(&self.mean + &self.components.t().dot(&f))
    }

    pub fn inverse(&self, feature: &[f64]) -> Result<MouthCoordinates> {
        let flat = self.inverse_flat(feature)?;
        MouthCoordinates::from_flat(flat.as_slice().expect("contiguous"))
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    /// `PCA1`, mean (40 f64), components (dims x 40 f64, row-major), ratios
    /// (dims f64); all little-endian. With the default 10 dimensions this is
    /// exactly 4 + 450 * 8 bytes.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        let values = self
            .mean
            .iter()
            .chain(self.components.iter())
            .chain(self.explained_variance_ratio.iter());
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing PCA1 magic".into()));
        }
        let body = &bytes[4..];
        if body.len() % 8 != 0 {
            return Err(Error::Format("truncated PCA model".into()));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let rest = values.len().checked_sub(COORD_DIM).unwrap_or(usize::MAX);
        if rest == usize::MAX || rest % (COORD_DIM + 1) != 0 || rest == 0 {
            return Err(Error::Format(format!(
                "PCA model has {} values, not 40 + 41k",
                values.len()
            )));
        }
        let dims = rest / (COORD_DIM + 1);
        let mean = Array1::from_iter(values[..COORD_DIM].iter().copied());
        let comp_end = COORD_DIM + dims * COORD_DIM;
        let components = Array2::from_shape_vec(
            (dims, COORD_DIM),
            values[COORD_DIM..comp_end].to_vec(),
        )
        .expect("shape checked");
        Ok(Self {
            mean,
            components,
            explained_variance_ratio: values[comp_end..].to_vec(),
        })
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

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Samples `mean + B z` with a random 40 x `rank` basis `B`.
    fn subspace_corpus(n: usize, rank: usize, noise: f64, seed: u64) -> Vec<MouthCoordinates> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis: Vec<f64> = (0..COORD_DIM * rank).map(|_| rng.sample(StandardNormal)).collect();
        let mean: Vec<f64> = (0..COORD_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
                let flat: Vec<f64> = (0..COORD_DIM)
                    .map(|i| {
                        let s: f64 = (0..rank).map(|k| basis[i * rank + k] * z[k]).sum();
                        mean[i] + s + noise * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                MouthCoordinates::from_flat(&flat).unwrap()
            })
            .collect()
    }

    #[test]
    fn exact_subspace_explains_everything() {
        let model = fit_pca(&subspace_corpus(200, 10, 0.0, 1)).unwrap();
        assert!((model.cumulative_ratio() - 1.0).abs() < 1e-9);
        let gram = model.components.dot(&model.components.t());
        for i in 0..10 {
            for j in 0..10 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expect).abs() < 1e-8);
            }
        }
        for w in model.explained_variance_ratio.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn mean_maps_to_origin() {
        let model = fit_pca(&subspace_corpus(50, 12, 0.01, 2)).unwrap();
        let f = model.transform_flat(model.mean.as_slice().unwrap()).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn in_subspace_round_trip() {
        let corpus = subspace_corpus(100, 10, 0.0, 3);
        let model = fit_pca(&corpus).unwrap();
        for c in corpus.iter().take(20) {
            let f = model.transform(c).unwrap();
            let back = model.inverse(f.as_slice().unwrap()).unwrap();
            for (a, b) in back.to_flat().iter().zip(c.to_flat()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn round_trip_is_least_squares_projection() {
        let model = fit_pca(&subspace_corpus(100, 15, 0.1, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Normal-equations oracle: solve (B^T B) z = B^T (x - mean), B = components^T.
        let b = DMatrix::from_fn(COORD_DIM, 10, |i, k| model.components[[k, i]]);
        for _ in 0..10 {
            let x: Vec<f64> = (0..COORD_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let centered = DVector::from_iterator(
                COORD_DIM,
                x.iter().zip(model.mean.iter()).map(|(a, m)| a - m),
            );
            let z = (b.transpose() * &b)
                .lu()
                .solve(&(b.transpose() * centered))
                .unwrap();
            let proj = &b * z;
            let f = model.transform_flat(&x).unwrap();
            let back = model.inverse_flat(f.as_slice().unwrap()).unwrap();
            for i in 0..COORD_DIM {
                assert!((back[i] - (model.mean[i] + proj[i])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transform_after_inverse_is_identity() {
        let model = fit_pca(&subspace_corpus(80, 20, 0.0, 6)).unwrap();
        let f = [0.3, -1.0, 2.0, 0.0, 0.5, 0.25, -0.75, 1.5, -2.0, 0.1];
        let back = model.transform(&model.inverse(&f).unwrap()).unwrap();
        for (a, b) in back.iter().zip(f) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let few = subspace_corpus(10, 10, 0.0, 7);
        assert!(matches!(
            fit_pca(&few),
            Err(Error::InsufficientData { got: 10, need: 11 })
        ));
        let same = vec![few[0].clone(); 30];
        assert!(matches!(fit_pca(&same), Err(Error::ZeroVariance)));
        let model = fit_pca(&subspace_corpus(30, 10, 0.0, 8)).unwrap();
        assert!(model.inverse(&[0.0; 9]).is_err());
        assert!(model.transform_flat(&[0.0; 39]).is_err());
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let model = fit_pca(&subspace_corpus(60, 12, 0.05, 9)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + (40 + 400 + 10) * 8);
        assert_eq!(&buf[..4], b"PCA1");
        let back = PcaModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        assert!(PcaModel::read_from(&b"PCA2"[..]).is_err());
    }
}
