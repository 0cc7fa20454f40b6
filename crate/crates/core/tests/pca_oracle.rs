//! PCA against an independent dense eigensolver and the synthetic corpus.

use lipsync_core::synth::sample_corpus;
use lipsync_core::{fit_pca, mouth_shape, normalize, PcaBasis, PcaCoeffs};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus_shapes(seed: u64, n: usize, latents: usize) -> Vec<Vec<f64>> {
    sample_corpus(seed, n, latents)
        .unwrap()
        .iter()
        .map(|s| mouth_shape(&normalize(&s.landmarks).unwrap()).0)
        .collect()
}

/// Samples with a decaying spectrum so that leading eigenvalue gaps are wide.
fn spread_samples(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|j| rng.gen_range(-1.0..1.0) * 0.8f64.powi(j as i32) + 0.1 * j as f64)
                .collect()
        })
        .collect()
}

/// Top-`k` eigenpairs of the N−1 covariance, descending, via nalgebra.
fn oracle(samples: &[Vec<f64>], k: usize) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let (n, dim) = (samples.len(), samples[0].len());
    let x = DMatrix::from_fn(n, dim, |i, j| samples[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, dim, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(k, dim, |r, c| eig.eigenvectors[(c, order[r])]);
    (values[..k].to_vec(), vecs, values)
}

/// Sine of the largest principal angle between two row spaces.
fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let dim = a.ncols();
    let proj_b = b.transpose() * b;
    let residual = (DMatrix::identity(dim, dim) - proj_b) * a.transpose();
    residual.singular_values().max()
}

fn basis_rows(basis: &PcaBasis) -> DMatrix<f64> {
    DMatrix::from_fn(basis.k, basis.dim(), |r, c| basis.components[r][c])
}

#[test]
fn subspace_matches_dense_eigensolver() {
    for (seed, n) in [(1, 50), (2, 20), (3, 8)] {
        let samples = spread_samples(seed, n, 40);
        for k in 1..=5 {
            let (values, vecs, all) = oracle(&samples, k);
            let gap = (0..k).map(|i| all[i] - all[i + 1]).fold(f64::INFINITY, f64::min);
            assert!(gap > 1e-6, "test data must have separated eigenvalues");
            let basis = fit_pca(&samples, k).unwrap();
            let angle = max_principal_angle(&basis_rows(&basis), &vecs);
            assert!(angle < 1e-6, "seed {seed} k {k}: angle {angle:e}");
            for (got, want) in basis.variances.iter().zip(&values) {
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn corpus_subspace_matches_dense_eigensolver() {
    let samples = corpus_shapes(8, 50, 5);
    let (_, vecs, _) = oracle(&samples, 5);
    let basis = fit_pca(&samples, 5).unwrap();
    assert!(max_principal_angle(&basis_rows(&basis), &vecs) < 1e-6);
}

#[test]
fn three_latent_corpus_is_three_dimensional() {
    let basis = fit_pca(&corpus_shapes(3, 500, 3), 3).unwrap();
    let r = basis.cumulative_ratio(3);
    assert!(r >= 0.999, "top-3 ratio {r}");
}

#[test]
fn five_latent_corpus_top_five_explain_98_percent() {
    let basis = fit_pca(&corpus_shapes(5, 500, 5), 5).unwrap();
    let r = basis.cumulative_ratio(5);
    assert!(r >= 0.98, "top-5 ratio {r}");
}

#[test]
fn one_latent_corpus_is_nearly_one_dimensional() {
    let basis = fit_pca(&corpus_shapes(1, 200, 1), 1).unwrap();
    let r = basis.cumulative_ratio(1);
    assert!(r > 0.999, "top-1 ratio {r}");
}

#[test]
fn full_rank_round_trip_on_training_samples() {
    let samples = corpus_shapes(9, 500, 5);
    let basis = fit_pca(&samples, 40).unwrap();
    for x in samples.iter().step_by(37) {
        let back = basis.reconstruct(&basis.project(x).unwrap()).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "round-trip error {err:e}");
    }
}

#[test]
fn mean_plus_component_projects_to_unit_vector() {
    let basis = fit_pca(&spread_samples(4, 30, 40), 4).unwrap();
    assert!(basis.project(&basis.mean).unwrap().0.iter().all(|&c| c.abs() < 1e-12));
    let x: Vec<f64> = basis
        .mean
        .iter()
        .zip(&basis.components[0])
        .map(|(m, c)| m + c)
        .collect();
    let c = basis.project(&x).unwrap().0;
    assert!((c[0] - 1.0).abs() < 1e-10 && c[1..].iter().all(|v| v.abs() < 1e-10));
    assert_eq!(basis.reconstruct(&PcaCoeffs(vec![0.0; 4])).unwrap(), basis.mean);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_invariants(seed in 0u64..1000, n in 3usize..60, k in 1usize..=10) {
        let samples = spread_samples(seed, n, 40);
        let basis = fit_pca(&samples, k).unwrap();
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = basis.components[i].iter().zip(&basis.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-8);
            }
            // largest-magnitude entry positive
            let row = &basis.components[i];
            let big = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let first = row.iter().find(|v| v.abs() == big).unwrap();
            prop_assert!(*first > 0.0);
        }
        prop_assert!(basis.variances.windows(2).all(|w| w[0] >= w[1]));
        let ratios = basis.explained_ratios();
        prop_assert!(ratios.iter().all(|r| (0.0..=1.0).contains(r)));
        prop_assert!(basis.cumulative_ratio(k) <= 1.0 + 1e-10);

        let c = PcaCoeffs((0..k).map(|i| (i as f64 * 0.37).sin()).collect());
        let back = basis.project(&basis.reconstruct(&c).unwrap()).unwrap();
        for (a, b) in c.0.iter().zip(&back.0) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
