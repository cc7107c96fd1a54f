//! Flat `section.key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated,
//! infinities are written `inf`, and `auto` selects a derived default where
//! a key allows it. The resolved configuration can be written back out in
//! the same format (sorted by key) for provenance.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::baseline::GridSpec;
use crate::error::{Error, Result};
use crate::format::sci;
use crate::physics::{NoiseParams, Relaxation, SystemParams};
use crate::session::{OutlierProtocol, SessionConfig};
use crate::sim::{EnsembleConfig, SweepAxis};
use crate::smc::{LiuWest, PriorSpec, Resampling};
use crate::strategy::{Strategy, StrategyParams};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub threads: usize,
    pub prior: PriorSpec,
    pub t1: f64,
    pub p_e: f64,
    pub strategy: StrategyParams,
    pub particles: usize,
    pub resample: bool,
    pub resample_a: f64,
    pub resample_threshold: f64,
    pub shots: usize,
    pub outlier_protocol: bool,
    pub protocol: OutlierProtocol,
    /// `None` = `prior.mu_g`.
    pub omega_scale: Option<f64>,
    pub n_runs: usize,
    pub thresholds: Vec<f64>,
    pub checkpoints: Vec<usize>,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub sweep_targets: Vec<f64>,
    pub grid: GridSpec,
    pub grid_exact: bool,
    pub grid_input: Option<String>,
    /// `None` = drawn from the prior (run, baseline) or the prior mean (spectrum).
    pub truth_g: Option<f64>,
    pub truth_omega_r: Option<f64>,
    pub spectrum_delta: (f64, f64),
    pub spectrum_n_delta: usize,
    pub spectrum_t_max: f64,
    pub spectrum_n_t: usize,
}

impl Default for Config {
    fn default() -> Self {
        let protocol = OutlierProtocol::default();
        Self {
            seed: 0,
            threads: 0,
            prior: PriorSpec::default(),
            t1: f64::INFINITY,
            p_e: 0.0,
            strategy: StrategyParams::default(),
            particles: 5_000,
            resample: true,
            resample_a: LiuWest::default().a,
            resample_threshold: LiuWest::default().ess_fraction,
            shots: 600,
            outlier_protocol: false,
            protocol,
            omega_scale: None,
            n_runs: 200,
            thresholds: vec![1e-10, 1e-7, 1e-4],
            checkpoints: vec![150, 300, 600],
            sweep_axis: SweepAxis::PE,
            sweep_values: vec![0.0, 0.05, 0.1],
            sweep_targets: vec![1e-4, 1e-7, 1e-10],
            grid: GridSpec {
                omega_min: -3.0,
                omega_max: 3.0,
                n_omega: 30,
                t_min: 0.0,
                t_max: 4.0 * PI,
                n_t: 30,
                m_r: 100,
            },
            grid_exact: false,
            grid_input: None,
            truth_g: None,
            truth_omega_r: None,
            spectrum_delta: (-3.0, 3.0),
            spectrum_n_delta: 61,
            spectrum_t_max: 4.0 * PI,
            spectrum_n_t: 201,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::invalid("value", format!("`{key}`: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::invalid("value", format!("`{key}`: `{v}` is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::invalid("value", format!("`{key}`: `{v}` is not a boolean"))),
    }
}

fn parse_auto(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

fn parse_list<T>(key: &str, v: &str, item: fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| item(key, s)).collect()
}

fn join<T>(items: &[T], f: fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), sci)
}

impl Config {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let f = |v: &str| parse_f64(key, v);
        let u = |v: &str| parse_usize(key, v);
        match key {
            "seed" => self.seed = v.parse().map_err(|_| Error::invalid("seed", format!("`{v}` is not a u64")))?,
            "threads" => self.threads = u(v)?,
            "prior.mu_g" => self.prior.mu_g = f(v)?,
            "prior.sigma_g" => self.prior.sigma_g = f(v)?,
            "prior.mu_omega" => self.prior.mu_omega = f(v)?,
            "prior.sigma_omega" => self.prior.sigma_omega = f(v)?,
            "noise.t1" => self.t1 = f(v)?,
            "noise.p_e" => self.p_e = f(v)?,
            "strategy.a" => self.strategy.a = f(v)?,
            "strategy.b" => self.strategy.b = f(v)?,
            "strategy.c" => self.strategy.c = f(v)?,
            "strategy.m0" => self.strategy.m0 = u(v)?,
            "strategy.t_max" => self.strategy.t_max = f(v)?,
            "strategy.shots_per_setting" => self.strategy.shots_per_setting = u(v)?,
            "smc.particles" => self.particles = u(v)?,
            "smc.resample" => self.resample = parse_bool(key, v)?,
            "smc.resample_a" => self.resample_a = f(v)?,
            "smc.resample_threshold" => self.resample_threshold = f(v)?,
            "session.shots" => self.shots = u(v)?,
            "session.outlier_protocol" => self.outlier_protocol = parse_bool(key, v)?,
            "session.checkpoint_shots" => self.protocol.checkpoint_shots = u(v)?,
            "session.verify_shots" => self.protocol.verify_shots = u(v)?,
            "session.agreement_threshold" => self.protocol.agreement_threshold = f(v)?,
            "session.max_restarts" => self.protocol.max_restarts = u(v)?,
            "metrics.omega_scale" => self.omega_scale = parse_auto(key, v)?,
            "ensemble.n_runs" => self.n_runs = u(v)?,
            "ensemble.thresholds" => self.thresholds = parse_list(key, v, parse_f64)?,
            "ensemble.checkpoints" => self.checkpoints = parse_list(key, v, parse_usize)?,
            "sweep.axis" => self.sweep_axis = SweepAxis::parse(v)?,
            "sweep.values" => self.sweep_values = parse_list(key, v, parse_f64)?,
            "sweep.targets" => self.sweep_targets = parse_list(key, v, parse_f64)?,
            "grid.omega_min" => self.grid.omega_min = f(v)?,
            "grid.omega_max" => self.grid.omega_max = f(v)?,
            "grid.n_omega" => self.grid.n_omega = u(v)?,
            "grid.t_min" => self.grid.t_min = f(v)?,
            "grid.t_max" => self.grid.t_max = f(v)?,
            "grid.n_t" => self.grid.n_t = u(v)?,
            "grid.m_r" => self.grid.m_r = u(v)? as u64,
            "grid.exact" => self.grid_exact = parse_bool(key, v)?,
            "grid.input" => self.grid_input = if v.is_empty() { None } else { Some(v.to_string()) },
            "truth.g" => self.truth_g = parse_auto(key, v)?,
            "truth.omega_r" => self.truth_omega_r = parse_auto(key, v)?,
            "spectrum.delta_min" => self.spectrum_delta.0 = f(v)?,
            "spectrum.delta_max" => self.spectrum_delta.1 = f(v)?,
            "spectrum.n_delta" => self.spectrum_n_delta = u(v)?,
            "spectrum.t_max" => self.spectrum_t_max = f(v)?,
            "spectrum.n_t" => self.spectrum_n_t = u(v)?,
            _ => return Err(Error::invalid("key", format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Config {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key with its resolved value.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let b = |v: bool| v.to_string();
        let mut m = BTreeMap::new();
        m.insert("seed", self.seed.to_string());
        m.insert("threads", self.threads.to_string());
        m.insert("prior.mu_g", sci(self.prior.mu_g));
        m.insert("prior.sigma_g", sci(self.prior.sigma_g));
        m.insert("prior.mu_omega", sci(self.prior.mu_omega));
        m.insert("prior.sigma_omega", sci(self.prior.sigma_omega));
        m.insert("noise.t1", sci(self.t1));
        m.insert("noise.p_e", sci(self.p_e));
        m.insert("strategy.a", sci(self.strategy.a));
        m.insert("strategy.b", sci(self.strategy.b));
        m.insert("strategy.c", sci(self.strategy.c));
        m.insert("strategy.m0", self.strategy.m0.to_string());
        m.insert("strategy.t_max", sci(self.strategy.t_max));
        m.insert("strategy.shots_per_setting", self.strategy.shots_per_setting.to_string());
        m.insert("smc.particles", self.particles.to_string());
        m.insert("smc.resample", b(self.resample));
        m.insert("smc.resample_a", sci(self.resample_a));
        m.insert("smc.resample_threshold", sci(self.resample_threshold));
        m.insert("session.shots", self.shots.to_string());
        m.insert("session.outlier_protocol", b(self.outlier_protocol));
        m.insert("session.checkpoint_shots", self.protocol.checkpoint_shots.to_string());
        m.insert("session.verify_shots", self.protocol.verify_shots.to_string());
        m.insert("session.agreement_threshold", sci(self.protocol.agreement_threshold));
        m.insert("session.max_restarts", self.protocol.max_restarts.to_string());
        m.insert("metrics.omega_scale", auto(self.omega_scale));
        m.insert("ensemble.n_runs", self.n_runs.to_string());
        m.insert("ensemble.thresholds", join(&self.thresholds, |v| sci(*v)));
        m.insert("ensemble.checkpoints", join(&self.checkpoints, |v| v.to_string()));
        m.insert("sweep.axis", self.sweep_axis.name().to_string());
        m.insert("sweep.values", join(&self.sweep_values, |v| sci(*v)));
        m.insert("sweep.targets", join(&self.sweep_targets, |v| sci(*v)));
        m.insert("grid.omega_min", sci(self.grid.omega_min));
        m.insert("grid.omega_max", sci(self.grid.omega_max));
        m.insert("grid.n_omega", self.grid.n_omega.to_string());
        m.insert("grid.t_min", sci(self.grid.t_min));
        m.insert("grid.t_max", sci(self.grid.t_max));
        m.insert("grid.n_t", self.grid.n_t.to_string());
        m.insert("grid.m_r", self.grid.m_r.to_string());
        m.insert("grid.exact", b(self.grid_exact));
        m.insert("grid.input", self.grid_input.clone().unwrap_or_default());
        m.insert("truth.g", auto(self.truth_g));
        m.insert("truth.omega_r", auto(self.truth_omega_r));
        m.insert("spectrum.delta_min", sci(self.spectrum_delta.0));
        m.insert("spectrum.delta_max", sci(self.spectrum_delta.1));
        m.insert("spectrum.n_delta", self.spectrum_n_delta.to_string());
        m.insert("spectrum.t_max", sci(self.spectrum_t_max));
        m.insert("spectrum.n_t", self.spectrum_n_t.to_string());
        m
    }

    /// The resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        NoiseParams::new(Relaxation::from_t1(self.t1)?, self.p_e)
    }

    pub fn session(&self) -> Result<SessionConfig> {
        let resampling = if self.resample {
            Resampling::LiuWest(LiuWest {
                a: self.resample_a,
                ess_fraction: self.resample_threshold,
            })
        } else {
            Resampling::Disabled
        };
        let session = SessionConfig {
            prior: self.prior,
            noise: self.noise()?,
            strategy: Strategy::Adaptive(self.strategy),
            n_particles: self.particles,
            resampling,
            shots: self.shots,
            outlier: self.outlier_protocol.then_some(OutlierProtocol {
                omega_scale: self.omega_scale,
                ..self.protocol
            }),
            seed: self.seed,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        let ensemble = EnsembleConfig {
            n_runs: self.n_runs,
            session: self.session()?,
            truth_prior: None,
            thresholds: self.thresholds.clone(),
            checkpoints: self.checkpoints.clone(),
            omega_scale: self.omega_scale,
            seed: self.seed,
            threads: self.threads,
        };
        ensemble.validate()?;
        Ok(ensemble)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.grid.validate()?;
        Ok(self.grid)
    }

    /// Fixed truth, if both components are given.
    pub fn truth(&self) -> Result<Option<SystemParams>> {
        match (self.truth_g, self.truth_omega_r) {
            (Some(g), Some(w)) => SystemParams::new(g, w).map(Some),
            (None, None) => Ok(None),
            _ => Err(Error::invalid("truth.g", "set both truth.g and truth.omega_r, or neither")),
        }
    }
}

impl Serialize for Config {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let text = "# comment\nstrategy.a = 2.5\nnoise.t1=inf  # trailing\nensemble.thresholds = 1e-8, 1e-4\nsession.outlier_protocol = true\n";
        let c = Config::from_text(text).unwrap();
        assert_eq!(c.strategy.a, 2.5);
        assert_eq!(c.t1, f64::INFINITY);
        assert_eq!(c.thresholds, vec![1e-8, 1e-4]);
        assert!(c.session().unwrap().outlier.is_some());
        let again = Config::from_text(&c.to_text()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn every_key_round_trips() {
        let c = Config::default();
        let mut d = Config::default();
        for (k, v) in c.entries() {
            d.set(k, &v).unwrap();
        }
        assert_eq!(c, d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::from_text("seed = 1\nbogus.key = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = Config::from_text("strategy.a 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        assert!(Config::from_text("smc.particles = -3").is_err());
    }

    #[test]
    fn truth_needs_both_components() {
        let mut c = Config::default();
        c.set("truth.g", "1.2").unwrap();
        assert!(c.truth().is_err());
        c.set("truth.omega_r", "0.5").unwrap();
        assert_eq!(c.truth().unwrap(), Some(SystemParams { g: 1.2, omega_r: 0.5 }));
    }
}
