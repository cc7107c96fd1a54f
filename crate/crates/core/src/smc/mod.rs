//! Sequential Monte Carlo posterior over `(g, omega_r)`.
//!
//! The posterior is a fixed-size weighted particle cloud. Each shot
//! multiplies the weights by the outcome likelihood and renormalizes; when
//! the effective sample size drops too far the cloud is resampled with the
//! Liu-West kernel so the particles follow the shrinking posterior.

mod prior;
mod resample;

use std::io::Write;

use rand::Rng;
use serde::Serialize;

pub use prior::PriorSpec;
pub use resample::{LiuWest, Resampling};

use crate::error::{Error, Result};
use crate::format::sci;
use crate::physics::{outcome_likelihood, ControlSetting, NoiseParams, SystemParams};

/// Below this many particles the likelihood pass is not worth splitting
/// across threads.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_PARTICLES: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    g: Vec<f64>,
    omega: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub mean_g: f64,
    pub mean_omega: f64,
    pub std_g: f64,
    pub std_omega: f64,
    /// Weighted covariance, ordered `(g, omega_r)`.
    pub covariance: [[f64; 2]; 2],
    pub ess: f64,
}

/// What a single Bayes update did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateReport {
    /// `P(d)`: the weight sum before renormalization.
    pub evidence: f64,
    pub resampled: bool,
}

impl ParticleCloud {
    /// `n` i.i.d. prior draws with uniform weights.
    pub fn from_prior<R: Rng + ?Sized>(prior: &PriorSpec, n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n_particles", format!("need at least 2, got {n}")));
        }
        let (gd, wd) = prior.distributions()?;
        let mut g = Vec::with_capacity(n);
        let mut omega = Vec::with_capacity(n);
        for _ in 0..n {
            g.push(rand_distr::Distribution::sample(&gd, rng));
            omega.push(rand_distr::Distribution::sample(&wd, rng));
        }
        Ok(Self {
            g,
            omega,
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Builds a cloud from explicit particles; weights are normalized.
    pub fn from_weighted(particles: Vec<(SystemParams, f64)>) -> Result<Self> {
        if particles.len() < 2 {
            return Err(Error::invalid("particles", "need at least 2"));
        }
        let mut total = 0.0;
        for (p, w) in &particles {
            SystemParams::new(p.g, p.omega_r)?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::invalid("weight", format!("must be finite and >= 0, got {w}")));
            }
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior { total });
        }
        Ok(Self {
            g: particles.iter().map(|(p, _)| p.g).collect(),
            omega: particles.iter().map(|(p, _)| p.omega_r).collect(),
            weights: particles.iter().map(|(_, w)| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (SystemParams, f64)> + '_ {
        (0..self.len()).map(|i| {
            (
                SystemParams {
                    g: self.g[i],
                    omega_r: self.omega[i],
                },
                self.weights[i],
            )
        })
    }

    /// Multiplies every weight by `likelihood(particle)` and renormalizes.
    /// Returns the pre-normalization sum. On a zero or non-finite total the
    /// cloud is left untouched.
    pub fn apply_likelihood<F>(&mut self, likelihood: F) -> Result<f64>
    where
        F: Fn(&SystemParams) -> f64 + Sync,
    {
        let mut updated = vec![0.0; self.len()];
        let g = &self.g;
        let omega = &self.omega;
        let weights = &self.weights;
        let kernel = |i: usize| {
            weights[i]
                * likelihood(&SystemParams {
                    g: g[i],
                    omega_r: omega[i],
                })
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if updated.len() >= PARALLEL_MIN_PARTICLES {
                updated.par_iter_mut().enumerate().for_each(|(i, w)| *w = kernel(i));
            } else {
                updated.iter_mut().enumerate().for_each(|(i, w)| *w = kernel(i));
            }
        }
        #[cfg(not(feature = "parallel"))]
        updated.iter_mut().enumerate().for_each(|(i, w)| *w = kernel(i));

        // sequential sum keeps the result independent of thread count
        let total: f64 = updated.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegeneratePosterior { total });
        }
        for w in &mut updated {
            *w /= total;
        }
        self.weights = updated;
        Ok(total)
    }

    /// Bayes update for one observed bit, followed by resampling when the
    /// policy asks for it.
    pub fn bayes_update<R: Rng + ?Sized>(
        &mut self,
        outcome: bool,
        setting: &ControlSetting,
        noise: &NoiseParams,
        resampling: &Resampling,
        rng: &mut R,
    ) -> Result<UpdateReport> {
        let evidence = self.apply_likelihood(|p| outcome_likelihood(outcome, p, setting, noise))?;
        let resampled = match resampling {
            Resampling::LiuWest(lw) if self.effective_sample_size() < lw.ess_fraction * self.len() as f64 => {
                self.resample_liu_west(lw.a, rng);
                true
            }
            _ => false,
        };
        Ok(UpdateReport { evidence, resampled })
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn summarize(&self) -> PosteriorSummary {
        let mut mean_g = 0.0;
        let mut mean_omega = 0.0;
        for i in 0..self.len() {
            mean_g += self.weights[i] * self.g[i];
            mean_omega += self.weights[i] * self.omega[i];
        }
        let (mut vgg, mut vgw, mut vww) = (0.0, 0.0, 0.0);
        for i in 0..self.len() {
            let dg = self.g[i] - mean_g;
            let dw = self.omega[i] - mean_omega;
            vgg += self.weights[i] * dg * dg;
            vgw += self.weights[i] * dg * dw;
            vww += self.weights[i] * dw * dw;
        }
        PosteriorSummary {
            mean_g,
            mean_omega,
            std_g: vgg.sqrt(),
            std_omega: vww.sqrt(),
            covariance: [[vgg, vgw], [vgw, vww]],
            ess: self.effective_sample_size().clamp(1.0, self.len() as f64),
        }
    }

    /// Columnar snapshot: `g,omega_r,weight`, one particle per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["g", "omega_r", "weight"])?;
        for (p, weight) in self.iter() {
            w.write_record([sci(p.g), sci(p.omega_r), sci(weight)])?;
        }
        w.flush()?;
        Ok(())
    }
}
