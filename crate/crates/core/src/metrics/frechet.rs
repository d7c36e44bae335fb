//! Fréchet (Wasserstein-2) distance between Gaussians fitted to feature
//! clouds: `|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2})`, with the cross
//! term evaluated through the symmetric product `S2^{1/2} S1 S2^{1/2}` so
//! the square root stays symmetric PSD.

#![allow(clippy::needless_range_loop)]

use super::{FeatureCloud, MetricsError};
use crate::linalg::{clamp_nonnegative, psd_sqrt, sym_eigen, Mat};
use crate::scalar::Scalar;

/// Relative clamp threshold for slightly negative eigenvalues.
const EIG_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary<T> {
    pub mean: Vec<T>,
    pub cov: Mat<T>,
}

impl<T: Scalar> GaussianSummary<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Add `eps` to the diagonal; used when a cloud has fewer samples than
    /// features and the covariance is rank-deficient.
    pub fn add_ridge(&mut self, eps: T) {
        for i in 0..self.cov.rows() {
            let v = self.cov.get(i, i) + eps;
            self.cov.set(i, i, v);
        }
    }
}

/// Sample mean and `1/(n-1)`-normalized covariance, symmetrized.
pub fn fit_gaussian<T: Scalar>(cloud: &FeatureCloud<T>) -> Result<GaussianSummary<T>, MetricsError> {
    let n = cloud.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { n });
    }
    let dim = cloud.dim();
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); dim];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(cloud.row(i)) {
            *m += v * inv_n;
        }
    }
    let denom = T::one() / T::from_usize_lossy(n - 1);
    let mut cov = Mat::zeros(dim, dim);
    let mut centered = vec![T::zero(); dim];
    for i in 0..n {
        for (c, (&v, &m)) in centered.iter_mut().zip(cloud.row(i).iter().zip(&mean)) {
            *c = v - m;
        }
        for a in 0..dim {
            let ca = centered[a];
            if ca == T::zero() {
                continue;
            }
            for b in a..dim {
                cov.add_at(a, b, ca * centered[b] * denom);
            }
        }
    }
    // mirror the upper triangle; (S + S^T)/2 is exact here
    for a in 0..dim {
        for b in (a + 1)..dim {
            cov.set(b, a, cov.get(a, b));
        }
    }
    Ok(GaussianSummary { mean, cov })
}

/// Squared Fréchet distance between two Gaussians.
pub fn frechet_distance<T: Scalar>(
    g1: &GaussianSummary<T>,
    g2: &GaussianSummary<T>,
) -> Result<T, MetricsError> {
    if g1.dim() != g2.dim() {
        return Err(MetricsError::DimensionMismatch {
            a: g1.dim(),
            b: g2.dim(),
        });
    }
    let rel_tol = T::from_f64_lossy(EIG_REL_TOL);
    let mean_term: T = g1
        .mean
        .iter()
        .zip(&g2.mean)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();

    let s2 = psd_sqrt(&g2.cov, rel_tol)?;
    let mut product = s2.matmul(&g1.cov).matmul(&s2);
    // symmetrize against roundoff before the eigensolve
    for i in 0..product.rows() {
        for j in (i + 1)..product.cols() {
            let avg = (product.get(i, j) + product.get(j, i)) / T::from_f64_lossy(2.0);
            product.set(i, j, avg);
            product.set(j, i, avg);
        }
    }
    let eig = sym_eigen(&product)?;
    let trace_sqrt: T = clamp_nonnegative(&eig.values, rel_tol)?
        .into_iter()
        .map(|v| v.sqrt())
        .sum();

    let two = T::from_f64_lossy(2.0);
    let fd = mean_term + g1.cov.trace() + g2.cov.trace() - two * trace_sqrt;
    Ok(fd.max(T::zero()))
}

/// Fréchet scoring against a fixed reference summary, with optional ridge
/// regularization applied to rank-deficient clouds (`n < f`).
#[derive(Debug, Clone)]
pub struct FrechetScorer<T> {
    reference: GaussianSummary<T>,
    ridge: Option<T>,
}

impl<T: Scalar> FrechetScorer<T> {
    pub const DEFAULT_RIDGE: f64 = 1e-6;

    pub fn new(reference: GaussianSummary<T>, ridge: Option<T>) -> Self {
        FrechetScorer { reference, ridge }
    }

    pub fn from_cloud(cloud: &FeatureCloud<T>, ridge: Option<T>) -> Result<Self, MetricsError> {
        let mut reference = fit_gaussian(cloud)?;
        if let Some(eps) = ridge {
            if cloud.len() < cloud.dim() {
                reference.add_ridge(eps);
            }
        }
        Ok(FrechetScorer { reference, ridge })
    }

    pub fn reference(&self) -> &GaussianSummary<T> {
        &self.reference
    }

    pub fn score(&self, cloud: &FeatureCloud<T>) -> Result<T, MetricsError> {
        let mut g = fit_gaussian(cloud)?;
        if let Some(eps) = self.ridge {
            if cloud.len() < cloud.dim() {
                g.add_ridge(eps);
            }
        }
        frechet_distance(&g, &self.reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rows: Vec<Vec<f64>>) -> FeatureCloud<f64> {
        let dim = rows[0].len();
        FeatureCloud::from_rows(dim, rows, "test")
    }

    #[test]
    fn two_point_fit() {
        let g = fit_gaussian(&cloud(vec![vec![0.0, 0.0], vec![2.0, 2.0]])).unwrap();
        assert_eq!(g.mean, vec![1.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.cov.get(i, j) - 2.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_cloud_has_zero_covariance() {
        let g = fit_gaussian(&cloud(vec![vec![1.5, -2.0]; 4])).unwrap();
        assert!(g.cov.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_requires_two_samples() {
        assert!(matches!(
            fit_gaussian(&cloud(vec![vec![1.0]])),
            Err(MetricsError::TooFewSamples { n: 1 })
        ));
    }

    #[test]
    fn fit_matches_naive_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 40;
        let dim = 5;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let g = fit_gaussian(&cloud(rows.clone())).unwrap();
        // naive loops, entry by entry
        for a in 0..dim {
            let mu_a: f64 = rows.iter().map(|r| r[a]).sum::<f64>() / n as f64;
            assert!((g.mean[a] - mu_a).abs() < 1e-12);
            for b in 0..dim {
                let mu_b: f64 = rows.iter().map(|r| r[b]).sum::<f64>() / n as f64;
                let cov_ab: f64 = rows
                    .iter()
                    .map(|r| (r[a] - mu_a) * (r[b] - mu_b))
                    .sum::<f64>()
                    / (n - 1) as f64;
                assert!(
                    (g.cov.get(a, b) - cov_ab).abs() < 1e-12,
                    "cov[{a}][{b}] mismatch"
                );
            }
        }
    }

    #[test]
    fn identical_gaussians_have_zero_distance() {
        let g = fit_gaussian(&cloud(vec![
            vec![0.0, 1.0],
            vec![1.0, 3.0],
            vec![-1.0, 2.0],
            vec![0.5, 0.5],
        ]))
        .unwrap();
        let d = frechet_distance(&g, &g).unwrap();
        assert!(d.abs() < 1e-8);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // mu 0 vs 3, variance 1 vs 4: 9 + (1 + 4 - 2*2) = 10
        let g1 = GaussianSummary {
            mean: vec![0.0],
            cov: Mat::from_rows(1, 1, vec![1.0]),
        };
        let g2 = GaussianSummary {
            mean: vec![3.0],
            cov: Mat::from_rows(1, 1, vec![4.0]),
        };
        let d: f64 = frechet_distance(&g1, &g2).unwrap();
        assert!((d - 10.0).abs() < 1e-8);
    }

    #[test]
    fn commuting_diagonal_case_matches_per_axis_sum() {
        let g1 = GaussianSummary {
            mean: vec![0.0, 1.0, -2.0],
            cov: Mat::from_rows(3, 3, vec![1.0, 0., 0., 0., 4.0, 0., 0., 0., 0.25]),
        };
        let g2 = GaussianSummary {
            mean: vec![1.0, -1.0, 0.0],
            cov: Mat::from_rows(3, 3, vec![9.0, 0., 0., 0., 1.0, 0., 0., 0., 1.0]),
        };
        // per-axis: (dmu)^2 + (sigma1 - sigma2)^2
        let expect: f64 = [(0.0 - 1.0), (1.0 + 1.0), (-2.0 - 0.0)]
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            + [(1.0f64, 9.0f64), (4.0, 1.0), (0.25, 1.0)]
                .iter()
                .map(|&(a, b)| (a.sqrt() - b.sqrt()).powi(2))
                .sum::<f64>();
        let d = frechet_distance(&g1, &g2).unwrap();
        assert!((d - expect).abs() < 1e-8, "{d} vs {expect}");
    }

    #[test]
    fn distance_is_symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let dim = rng.random_range(1..5);
            let make = |rng: &mut ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..dim + 3)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                fit_gaussian(&cloud(rows)).unwrap()
            };
            let g1 = make(&mut rng);
            let g2 = make(&mut rng);
            let d12 = frechet_distance(&g1, &g2).unwrap();
            let d21 = frechet_distance(&g2, &g1).unwrap();
            assert!(d12 >= 0.0);
            assert!((d12 - d21).abs() < 1e-8, "{d12} vs {d21}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g1 = GaussianSummary {
            mean: vec![0.0],
            cov: Mat::from_rows(1, 1, vec![1.0]),
        };
        let g2 = GaussianSummary {
            mean: vec![0.0, 0.0],
            cov: Mat::identity(2),
        };
        assert!(matches!(
            frechet_distance(&g1, &g2),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scorer_applies_ridge_to_deficient_clouds() {
        // 2 samples in 3 dims: rank deficient; ridge keeps the distance finite
        let reference = cloud(vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]);
        let scorer = FrechetScorer::from_cloud(&reference, Some(1e-6)).unwrap();
        let probe = cloud(vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.5, 0.0]]);
        let d = scorer.score(&probe).unwrap();
        assert!(d.is_finite() && d >= 0.0);
    }
}
