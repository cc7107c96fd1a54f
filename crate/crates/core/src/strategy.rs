//! Measurement-setting design.
//!
//! The adaptive rule waits `t ~ 1/sigma_g` and probes `omega_q` within a few
//! `sigma_omega` of the current resonator estimate. During the first `m0`
//! shots both knobs are spread uniformly instead, which keeps the early
//! posterior unimodal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::baseline::GridSpec;
use crate::error::{Error, Result};
use crate::physics::ControlSetting;
use crate::smc::PosteriorSummary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrategyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Number of warm-up shots.
    pub m0: usize,
    /// Hard upper bound on the waiting time.
    pub t_max: f64,
    /// Repetitions of each chosen setting before re-adapting.
    pub shots_per_setting: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            a: 1.57,
            b: 0.518,
            c: 3.0,
            m0: 15,
            t_max: 1e6,
            shots_per_setting: 1,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::invalid("strategy.a", "must be > 0"));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::invalid("strategy.b", "must be >= 0"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invalid("strategy.c", "must be > 0"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::invalid("strategy.t_max", "must be > 0"));
        }
        if self.shots_per_setting == 0 {
            return Err(Error::invalid("strategy.shots_per_setting", "must be >= 1"));
        }
        Ok(())
    }
}

/// The random inputs of one adaptive step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Draws {
    /// `r1, r2` uniform on `[0, 1]`.
    WarmUp { r1: f64, r2: f64 },
    /// `z` standard normal, `r2` uniform on `[0, 1]`.
    Focused { z: f64, r2: f64 },
}

impl Draws {
    /// Consumes `r1` (or `z`), then `r2`, from `rng`.
    pub fn sample<R: Rng + ?Sized>(shot_index: usize, params: &StrategyParams, rng: &mut R) -> Self {
        if shot_index <= params.m0 {
            let r1 = rng.random::<f64>();
            let r2 = rng.random::<f64>();
            Draws::WarmUp { r1, r2 }
        } else {
            let z: f64 = StandardNormal.sample(rng);
            let r2 = rng.random::<f64>();
            Draws::Focused { z, r2 }
        }
    }
}

/// Deterministic part of the adaptive rule, given the draws.
pub fn setting_from_draws(summary: &PosteriorSummary, params: &StrategyParams, draws: Draws) -> Result<ControlSetting> {
    let sigma_g = summary.std_g;
    if !(sigma_g > 0.0 && sigma_g.is_finite()) {
        return Err(Error::CollapsedPosterior);
    }
    let (t, omega_q) = match draws {
        Draws::WarmUp { r1, r2 } => (params.a * r1 / sigma_g, summary.mean_omega + (r2 - 0.5) * summary.mean_g),
        Draws::Focused { z, r2 } => (
            (params.a + params.b * z).abs() / sigma_g,
            summary.mean_omega + params.c * (r2 - 0.5) * summary.std_omega,
        ),
    };
    ControlSetting::new(omega_q, t.min(params.t_max))
}

/// Chooses the setting for shot number `shot_index` (1-based) from the
/// current posterior.
pub fn next_setting<R: Rng + ?Sized>(
    summary: &PosteriorSummary,
    shot_index: usize,
    params: &StrategyParams,
    rng: &mut R,
) -> Result<ControlSetting> {
    if !(summary.std_g > 0.0 && summary.std_g.is_finite()) {
        return Err(Error::CollapsedPosterior);
    }
    let draws = Draws::sample(shot_index, params, rng);
    setting_from_draws(summary, params, draws)
}

/// Setting number `index` of an evenly spaced `(omega_q, t)` rectangle,
/// enumerated row-major with `omega_q` as the row.
pub fn grid_setting(index: usize, grid: &GridSpec) -> Result<ControlSetting> {
    let size = grid.n_settings();
    if index >= size {
        return Err(Error::GridIndexOutOfRange { index, size });
    }
    let (row, col) = (index / grid.n_t, index % grid.n_t);
    ControlSetting::new(grid.omega_at(row), grid.t_at(col))
}

/// How a session picks its settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Adaptive(StrategyParams),
    /// Always the same setting; useful for controlled checks.
    Fixed { setting: ControlSetting },
    /// Cycles through a grid in enumeration order.
    Grid { grid: GridSpec },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Adaptive(StrategyParams::default())
    }
}

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Adaptive(p) => p.validate(),
            Strategy::Fixed { setting } => ControlSetting::new(setting.omega_q, setting.t).map(|_| ()),
            Strategy::Grid { grid } => grid.validate(),
        }
    }

    pub fn shots_per_setting(&self) -> usize {
        match self {
            Strategy::Adaptive(p) => p.shots_per_setting,
            _ => 1,
        }
    }

    pub fn setting<R: Rng + ?Sized>(
        &self,
        summary: &PosteriorSummary,
        shot_index: usize,
        rng: &mut R,
    ) -> Result<ControlSetting> {
        match self {
            Strategy::Adaptive(p) => next_setting(summary, shot_index, p, rng),
            Strategy::Fixed { setting } => Ok(*setting),
            Strategy::Grid { grid } => grid_setting((shot_index - 1) % grid.n_settings(), grid),
        }
    }
}
