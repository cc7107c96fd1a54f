//! Liu-West kernel resampling.
//!
//! Ancestors are drawn multinomially, shrunk toward the cloud mean by `a`
//! and jittered with a Gaussian of covariance `(1 - a^2) Sigma`, which keeps
//! the first two moments of the cloud unchanged in expectation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::ParticleCloud;

/// Upper bound on perturbation redraws for a single particle before it
/// falls back to the shrunk ancestor position (which always has `g > 0`).
const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LiuWest {
    /// Shrinkage toward the mean; the jitter variance is `1 - a^2`.
    pub a: f64,
    /// Resample once `ess < ess_fraction * N`.
    pub ess_fraction: f64,
}

impl Default for LiuWest {
    fn default() -> Self {
        Self {
            a: 0.98,
            ess_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resampling {
    Disabled,
    LiuWest(LiuWest),
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::LiuWest(LiuWest::default())
    }
}

/// Lower-triangular Cholesky factor of a 2x2 covariance, or `None` when it
/// is not positive definite.
fn cholesky2(cov: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let (a, b, d) = (cov[0][0], cov[1][0], cov[1][1]);
    if !(a > 0.0 && d > 0.0 && a * d - b * b > 0.0) {
        return None;
    }
    let l00 = a.sqrt();
    let l10 = b / l00;
    let l11 = (d - l10 * l10).max(0.0).sqrt();
    if l11 > 0.0 {
        Some([[l00, 0.0], [l10, l11]])
    } else {
        None
    }
}

/// Indices of `n` ancestors drawn with probability proportional to `weights`.
pub(crate) fn multinomial_ancestors<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let last = weights.len() - 1;
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

impl ParticleCloud {
    /// Resamples to uniform weights using the Liu-West kernel. Falls back to
    /// plain multinomial resampling when the cloud covariance is singular.
    pub fn resample_liu_west<R: Rng + ?Sized>(&mut self, a: f64, rng: &mut R) {
        let n = self.len();
        let summary = self.summarize();
        let mean = [summary.mean_g, summary.mean_omega];
        let h2 = 1.0 - a * a;
        let scaled = [
            [h2 * summary.covariance[0][0], h2 * summary.covariance[0][1]],
            [h2 * summary.covariance[1][0], h2 * summary.covariance[1][1]],
        ];
        let ancestors = multinomial_ancestors(&self.weights, n, rng);

        let (g, omega): (Vec<f64>, Vec<f64>) = match cholesky2(scaled) {
            None => ancestors.iter().map(|&i| (self.g[i], self.omega[i])).unzip(),
            Some(l) => ancestors
                .iter()
                .map(|&i| {
                    let cg = a * self.g[i] + (1.0 - a) * mean[0];
                    let cw = a * self.omega[i] + (1.0 - a) * mean[1];
                    for _ in 0..MAX_REDRAWS {
                        let z0: f64 = StandardNormal.sample(rng);
                        let z1: f64 = StandardNormal.sample(rng);
                        let g = cg + l[0][0] * z0;
                        if g > 0.0 {
                            return (g, cw + l[1][0] * z0 + l[1][1] * z1);
                        }
                    }
                    (cg, cw)
                })
                .unzip(),
        };
        self.g = g;
        self.omega = omega;
        self.weights = vec![1.0 / n as f64; n];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::SystemParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_reconstructs() {
        let cov = [[2.0, 0.6], [0.6, 1.0]];
        let l = cholesky2(cov).unwrap();
        assert!((l[0][0] * l[0][0] - 2.0).abs() < 1e-14);
        assert!((l[1][0] * l[0][0] - 0.6).abs() < 1e-14);
        assert!((l[1][0] * l[1][0] + l[1][1] * l[1][1] - 1.0).abs() < 1e-14);
        assert!(cholesky2([[1.0, 1.0], [1.0, 1.0]]).is_none());
        assert!(cholesky2([[0.0, 0.0], [0.0, 1.0]]).is_none());
    }

    #[test]
    fn multinomial_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = multinomial_ancestors(&[0.0, 1.0, 0.0], 200, &mut rng);
        assert!(idx.iter().all(|&i| i == 1));
    }

    #[test]
    fn singular_cloud_falls_back_to_plain_resampling() {
        let p = |g, w| (SystemParams { g, omega_r: w }, 0.25);
        // all particles share omega, so the covariance is singular
        let mut cloud =
            ParticleCloud::from_weighted(vec![p(1.0, 2.0), p(2.0, 2.0), p(3.0, 2.0), p(4.0, 2.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        cloud.resample_liu_west(0.98, &mut rng);
        for s in cloud.iter() {
            assert_eq!(s.0.omega_r, 2.0);
            assert!([1.0, 2.0, 3.0, 4.0].contains(&s.0.g));
        }
    }
}
