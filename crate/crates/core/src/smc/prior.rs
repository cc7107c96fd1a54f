use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::physics::SystemParams;

/// Factorized prior: `g` log-normal with arithmetic mean `mu_g` and standard
/// deviation `sigma_g`, `omega_r` normal `N(mu_omega, sigma_omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorSpec {
    pub mu_g: f64,
    pub sigma_g: f64,
    pub mu_omega: f64,
    pub sigma_omega: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            mu_g: 1.0,
            sigma_g: 0.25,
            mu_omega: 0.0,
            sigma_omega: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn new(mu_g: f64, sigma_g: f64, mu_omega: f64, sigma_omega: f64) -> Result<Self> {
        let prior = Self {
            mu_g,
            sigma_g,
            mu_omega,
            sigma_omega,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("prior.mu_g", self.mu_g)?;
        positive("prior.sigma_g", self.sigma_g)?;
        positive("prior.sigma_omega", self.sigma_omega)?;
        if !self.mu_omega.is_finite() {
            return Err(Error::invalid("prior.mu_omega", "must be finite"));
        }
        Ok(())
    }

    /// Same widths, new centre. Used when the prior is rebuilt around an estimate.
    pub fn recentered(&self, mu_g: f64, mu_omega: f64) -> Result<Self> {
        Self::new(mu_g, self.sigma_g, mu_omega, self.sigma_omega)
    }

    /// `(mu, sigma)` of the normal underlying the log-normal `g` marginal.
    pub fn log_normal_params(&self) -> (f64, f64) {
        let var = (1.0 + (self.sigma_g / self.mu_g).powi(2)).ln();
        (self.mu_g.ln() - 0.5 * var, var.sqrt())
    }

    pub(crate) fn distributions(&self) -> Result<(LogNormal<f64>, Normal<f64>)> {
        self.validate()?;
        let (mu, sigma) = self.log_normal_params();
        let g = LogNormal::new(mu, sigma).map_err(|e| Error::invalid("prior.sigma_g", e.to_string()))?;
        let w = Normal::new(self.mu_omega, self.sigma_omega)
            .map_err(|e| Error::invalid("prior.sigma_omega", e.to_string()))?;
        Ok((g, w))
    }

    /// One draw; `g` is sampled before `omega_r`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SystemParams> {
        let (g, w) = self.distributions()?;
        Ok(SystemParams {
            g: g.sample(rng),
            omega_r: w.sample(rng),
        })
    }
}
