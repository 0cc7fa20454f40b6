//! Principal component analysis of mouth shapes.
//!
//! The covariance (divisor N−1) is diagonalized with cyclic Jacobi rotations,
//! which is exact to rounding for the small symmetric matrices used here and
//! fully deterministic. Components are sorted by descending variance and each
//! is signed so that its largest-magnitude entry is positive (lowest index on
//! ties).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MouthShape40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub k: usize,
    pub mean: Vec<f64>,
    /// `k` orthonormal rows, descending variance.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub total_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaCoeffs(pub Vec<f64>);

pub fn fit_pca(samples: &[Vec<f64>], k: usize) -> Result<PcaBasis> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParams(format!("PCA needs at least 2 samples, got {n}")));
    }
    let dim = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "sample of length {} among length-{dim} samples",
            bad.len()
        )));
    }
    if k == 0 || k > dim {
        return Err(Error::BadRank { k, max: dim });
    }

    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for s in samples {
        for ((c, v), m) in centered.iter_mut().zip(s).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            for j in i..dim {
                cov[i * dim + j] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }

    let total_variance: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if !(total_variance > 1e-12) {
        return Err(Error::DegenerateData(total_variance));
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut row: Vec<f64> = (0..dim).map(|r| eigenvectors[r * dim + idx]).collect();
        let mut pivot = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = i;
            }
        }
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        variances.push(eigenvalues[idx].max(0.0));
    }

    Ok(PcaBasis {
        k,
        mean,
        components,
        variances,
        total_variance,
    })
}

/// Eigen-decomposition of a symmetric row-major `n×n` matrix.
/// Returns eigenvalues and the row-major matrix whose columns are eigenvectors.
fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i * n + i]).collect();
    (eigenvalues, v)
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_ratios(&self) -> Vec<f64> {
        self.variances.iter().map(|v| v / self.total_variance).collect()
    }

    pub fn cumulative_ratio(&self, top: usize) -> f64 {
        self.explained_ratios().iter().take(top).sum()
    }

    pub fn project(&self, shape: &[f64]) -> Result<PcaCoeffs> {
        if shape.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "basis dimension {} vs vector of length {}",
                self.dim(),
                shape.len()
            )));
        }
        let values = self
            .components
            .iter()
            .map(|row| {
                row.iter()
                    .zip(shape.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect();
        Ok(PcaCoeffs(values))
    }

    pub fn reconstruct(&self, coeffs: &PcaCoeffs) -> Result<Vec<f64>> {
        if coeffs.0.len() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a rank-{} basis",
                coeffs.0.len(),
                self.k
            )));
        }
        let mut out = self.mean.clone();
        for (row, &a) in self.components.iter().zip(&coeffs.0) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += a * c;
            }
        }
        Ok(out)
    }

    pub fn project_shape(&self, shape: &MouthShape40) -> Result<PcaCoeffs> {
        self.project(shape.as_slice())
    }

    pub fn reconstruct_shape(&self, coeffs: &PcaCoeffs) -> Result<MouthShape40> {
        MouthShape40::new(self.reconstruct(coeffs)?)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let ok = self.k >= 1
            && self.k <= dim
            && self.components.len() == self.k
            && self.variances.len() == self.k
            && self.components.iter().all(|r| r.len() == dim);
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "inconsistent PCA basis: k={}, dim={dim}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("PCA basis serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let basis: PcaBasis = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        basis.validate()?;
        Ok(basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64)).collect())
            .collect()
    }

    #[test]
    fn equal_samples_are_degenerate() {
        let s = vec![vec![0.5; 40]; 10];
        assert!(matches!(fit_pca(&s, 3), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn rank_bounds() {
        let s = random_samples(1, 10, 40);
        assert!(matches!(fit_pca(&s, 0), Err(Error::BadRank { .. })));
        assert!(matches!(fit_pca(&s, 41), Err(Error::BadRank { .. })));
        assert!(fit_pca(&s[..1], 1).is_err());
    }

    #[test]
    fn rank_one_line() {
        let mean: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let dir: Vec<f64> = (0..40)
            .map(|i| if i == 7 { -3.0 } else { (i % 3) as f64 * 0.5 })
            .collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let samples: Vec<Vec<f64>> = [-2.0, -0.5, 0.3, 1.0, 4.0]
            .iter()
            .map(|t| mean.iter().zip(&dir).map(|(m, d)| m + t * d).collect())
            .collect();
        let b = fit_pca(&samples, 1).unwrap();
        assert!((b.explained_ratios()[0] - 1.0).abs() < 1e-12);
        // largest-magnitude entry of d is −3 at index 7, so the convention flips d
        for (c, d) in b.components[0].iter().zip(&dir) {
            assert!((c + d / norm).abs() < 1e-10);
        }
    }

    #[test]
    fn project_mean_and_components() {
        let b = fit_pca(&random_samples(2, 60, 40), 5).unwrap();
        assert!(b.project(&b.mean).unwrap().0.iter().all(|v| v.abs() < 1e-15));
        let shifted: Vec<f64> = b.mean.iter().zip(&b.components[0]).map(|(m, c)| m + c).collect();
        let c = b.project(&shifted).unwrap().0;
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(b.reconstruct(&PcaCoeffs(vec![0.0; 5])).unwrap(), b.mean);
    }

    #[test]
    fn full_rank_round_trip() {
        let s = random_samples(3, 80, 40);
        let b = fit_pca(&s, 40).unwrap();
        for x in &s[..5] {
            let back = b.reconstruct(&b.project(x).unwrap()).unwrap();
            for (a, y) in back.iter().zip(x) {
                assert!((a - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn orthonormal_rows_and_ordering() {
        let b = fit_pca(&random_samples(4, 100, 40), 40).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let d: f64 = b.components[i].iter().zip(&b.components[j]).map(|(x, y)| x * y).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-8);
            }
        }
        assert!(b.variances.windows(2).all(|w| w[0] >= w[1]));
        assert!((b.cumulative_ratio(40) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn length_mismatches() {
        let b = fit_pca(&random_samples(5, 20, 40), 3).unwrap();
        assert!(b.project(&[0.0; 39]).is_err());
        assert!(b.reconstruct(&PcaCoeffs(vec![0.0; 4])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let b = fit_pca(&random_samples(6, 20, 40), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pca_basis.json");
        b.save(&p).unwrap();
        assert_eq!(PcaBasis::load(&p).unwrap(), b);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        for key in ["k", "mean", "components", "variances", "total_variance"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
