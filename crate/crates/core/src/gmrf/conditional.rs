//! Gaussian laws in canonical (precision) form and their sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::cholesky::{CholeskyFactor, SelectedInverse};

/// `N(mean, Q⁻¹)` with `Q` held as a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    mean: Vec<f64>,
    factor: CholeskyFactor,
}

impl GaussianConditional {
    pub fn new(mean: Vec<f64>, factor: CholeskyFactor) -> Self {
        assert_eq!(mean.len(), factor.dim());
        GaussianConditional { mean, factor }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// One draw: `mean + L⁻ᵀ z` for a standard normal `z`.
    pub fn sample_with<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let mut x = self.factor.transform_standard_normal(&z);
        for (xi, mi) in x.iter_mut().zip(&self.mean) {
            *xi += mi;
        }
        x
    }

    pub fn selected_inverse(&self) -> SelectedInverse {
        self.factor.selected_inverse()
    }

    /// Variance of the linear combination `Σ w_i u_i`, read from the
    /// selected inverse where the pairs are available and from a solve
    /// otherwise.
    pub fn linear_variance(&self, sel: &SelectedInverse, h: &[(usize, f64)]) -> f64 {
        let mut acc = 0.0;
        for (a, &(i, wi)) in h.iter().enumerate() {
            for &(j, wj) in &h[a..] {
                match sel.get(i, j) {
                    Some(v) => {
                        acc += if i == j {
                            wi * wi * v
                        } else {
                            2.0 * wi * wj * v
                        }
                    }
                    None => return self.linear_variance_by_solve(h),
                }
            }
        }
        acc
    }

    pub fn linear_variance_by_solve(&self, h: &[(usize, f64)]) -> f64 {
        let mut b = vec![0.0; self.dim()];
        for &(i, w) in h {
            b[i] += w;
        }
        self.factor.inverse_quad_form(&b)
    }
}

/// `n` independent draws, reproducible from `seed`.
pub fn sample_gmrf(cond: &GaussianConditional, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| cond.sample_with(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrf::{factorize, SparseSym};

    fn identity_cond(n: usize, mean: Vec<f64>) -> GaussianConditional {
        GaussianConditional::new(mean, factorize(&SparseSym::identity(n)).unwrap())
    }

    #[test]
    fn identity_precision_gives_identity_covariance() {
        let c = identity_cond(3, vec![0.0; 3]);
        let draws = sample_gmrf(&c, 10_000, 7);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = draws.iter().map(|d| d[i] * d[j]).sum::<f64>() / draws.len() as f64;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 0.05, "({i},{j}) {s}");
            }
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let c = identity_cond(4, vec![1.0; 4]);
        assert_eq!(sample_gmrf(&c, 5, 42), sample_gmrf(&c, 5, 42));
        assert_ne!(sample_gmrf(&c, 5, 42), sample_gmrf(&c, 5, 43));
    }

    #[test]
    fn sample_mean_near_mean() {
        let q = SparseSym::from_triplets(2, &[(0, 0, 2.0), (1, 1, 2.0), (1, 0, 0.8)]).unwrap();
        let mu = vec![3.0, -1.0];
        let c = GaussianConditional::new(mu.clone(), factorize(&q).unwrap());
        let n = 4000;
        let draws = sample_gmrf(&c, n, 1);
        let cov = q.to_dense().try_inverse().unwrap();
        for i in 0..2 {
            let m: f64 = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!((m - mu[i]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn linear_variance_paths_agree() {
        let q = SparseSym::from_triplets(
            3,
            &[
                (0, 0, 2.0),
                (1, 1, 3.0),
                (2, 2, 2.5),
                (1, 0, 0.5),
                (2, 1, -0.4),
            ],
        )
        .unwrap();
        let c = GaussianConditional::new(vec![0.0; 3], factorize(&q).unwrap());
        let sel = c.selected_inverse();
        let h = [(0, 0.3), (2, 0.7), (1, -1.0)];
        let dense = q.to_dense().try_inverse().unwrap();
        let hv = nalgebra::DVector::from_row_slice(&[0.3, -1.0, 0.7]);
        let oracle = (hv.transpose() * dense * &hv)[(0, 0)];
        assert!((c.linear_variance(&sel, &h) - oracle).abs() < 1e-12);
        assert!((c.linear_variance_by_solve(&h) - oracle).abs() < 1e-12);
    }
}
