//! One complete estimation run: the measure, update, adapt loop, plus the
//! optional verify-and-restart protocol that weeds out runs which locked
//! onto a wrong posterior mode.
//!
//! With the protocol enabled a run searches for `checkpoint_shots` from the
//! current prior, then rebuilds the prior around that estimate with the
//! original widths and spends `verify_shots` more. If the two estimates
//! agree the second is accepted; otherwise the search restarts from a prior
//! whose centre is a fresh draw from the original prior.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sci;
use crate::physics::{ControlSetting, NoiseParams, SystemParams};
use crate::rng::stream_rng;
use crate::smc::{ParticleCloud, PosteriorSummary, PriorSpec, Resampling};
use crate::strategy::Strategy;

/// Anything that can answer "what bit did the qubit report at this setting".
pub trait OutcomeSource {
    fn measure(&mut self, setting: &ControlSetting) -> bool;
}

impl<F: FnMut(&ControlSetting) -> bool> OutcomeSource for F {
    fn measure(&mut self, setting: &ControlSetting) -> bool {
        self(setting)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutlierProtocol {
    pub checkpoint_shots: usize,
    pub verify_shots: usize,
    /// Estimates agree when both `|dg| / g1` and `|domega| / omega_scale`
    /// are below this.
    pub agreement_threshold: f64,
    /// Normalization of the `omega_r` difference; `None` means `prior.mu_g`.
    pub omega_scale: Option<f64>,
    pub max_restarts: usize,
}

impl Default for OutlierProtocol {
    fn default() -> Self {
        Self {
            checkpoint_shots: 300,
            verify_shots: 300,
            agreement_threshold: 1e-2,
            omega_scale: None,
            max_restarts: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionConfig {
    pub prior: PriorSpec,
    /// Noise model assumed by the likelihood.
    pub noise: NoiseParams,
    pub strategy: Strategy,
    pub n_particles: usize,
    pub resampling: Resampling,
    /// Shot budget of a plain run (protocol disabled).
    pub shots: usize,
    pub outlier: Option<OutlierProtocol>,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::default(),
            noise: NoiseParams::ideal(),
            strategy: Strategy::default(),
            n_particles: 50_000,
            resampling: Resampling::default(),
            shots: 600,
            outlier: None,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        NoiseParams::new(self.noise.t1, self.noise.p_e)?;
        self.strategy.validate()?;
        if self.n_particles < 2 {
            return Err(Error::invalid("smc.particles", "must be >= 2"));
        }
        if let Resampling::LiuWest(lw) = self.resampling {
            if !(lw.a > 0.0 && lw.a < 1.0) {
                return Err(Error::invalid("smc.resample_a", "must lie in (0, 1)"));
            }
            if !(0.0..=1.0).contains(&lw.ess_fraction) {
                return Err(Error::invalid("smc.resample_threshold", "must lie in [0, 1]"));
            }
        }
        match &self.outlier {
            None if self.shots == 0 => Err(Error::invalid("session.shots", "must be >= 1")),
            Some(p) if p.checkpoint_shots == 0 || p.verify_shots == 0 => {
                Err(Error::invalid("session.checkpoint_shots", "phases need >= 1 shot"))
            }
            Some(p) if !(p.agreement_threshold > 0.0) => {
                Err(Error::invalid("session.agreement_threshold", "must be > 0"))
            }
            Some(OutlierProtocol {
                omega_scale: Some(s), ..
            }) if !(*s > 0.0) => Err(Error::invalid("session.omega_scale", "must be > 0")),
            _ => Ok(()),
        }
    }

    /// Shots a run consumes when nothing goes wrong.
    pub fn nominal_shots(&self) -> usize {
        match &self.outlier {
            None => self.shots,
            Some(p) => p.checkpoint_shots + p.verify_shots,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Search,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotRecord {
    /// 1-based, counted over the whole run.
    pub shot: usize,
    pub attempt: usize,
    pub phase: Phase,
    pub setting: ControlSetting,
    pub outcome: bool,
    pub mean_g: f64,
    pub std_g: f64,
    pub mean_omega: f64,
    pub std_omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    /// Plain run that used its full budget.
    Completed,
    /// The posterior width collapsed to zero before the budget ran out.
    Converged,
    /// Verify phase agreed on the first attempt.
    AcceptedAfterVerify,
    /// Verify phase agreed after this many restarts.
    Restarted { restarts: usize },
    /// Restart budget exhausted; the estimate is the best attempt seen.
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptEnd {
    Finished,
    Agreed,
    Disagreed,
    Degenerate,
    Collapsed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Attempt {
    pub search_prior: PriorSpec,
    pub verify_prior: Option<PriorSpec>,
    pub checkpoint_estimate: Option<SystemParams>,
    pub final_estimate: Option<SystemParams>,
    /// `(|dg| / g1, |domega| / omega_scale)`.
    pub disagreement: Option<(f64, f64)>,
    pub end: AttemptEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub status: RunStatus,
    pub estimate: SystemParams,
    pub final_summary: PosteriorSummary,
    pub restarts: usize,
    pub total_shots: usize,
    pub attempts: Vec<Attempt>,
    pub shots: Vec<ShotRecord>,
    #[serde(skip)]
    pub final_cloud: Option<ParticleCloud>,
}

impl RunRecord {
    /// JSON document `{"provenance": .., "run": ..}`; `provenance` should carry
    /// the resolved configuration.
    pub fn to_json(&self, provenance: &impl Serialize) -> Result<String> {
        let doc = serde_json::json!({ "provenance": provenance, "run": self });
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write_shots_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["shot", "omega_q", "t", "outcome", "mean_g", "std_g", "mean_omega", "std_omega"])?;
        for s in &self.shots {
            w.write_record([
                s.shot.to_string(),
                sci(s.setting.omega_q),
                sci(s.setting.t),
                u8::from(s.outcome).to_string(),
                sci(s.mean_g),
                sci(s.std_g),
                sci(s.mean_omega),
                sci(s.std_omega),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

enum PhaseStop {
    Done,
    Degenerate,
    Collapsed,
}

struct Runner<'a, O: ?Sized, R> {
    config: &'a SessionConfig,
    oracle: &'a mut O,
    rng: &'a mut R,
    shots: Vec<ShotRecord>,
    cloud: Option<ParticleCloud>,
    summary: Option<PosteriorSummary>,
}

impl<O: OutcomeSource + ?Sized, R: Rng> Runner<'_, O, R> {
    /// Builds a fresh cloud from `prior` and spends up to `budget` shots on it.
    fn phase(&mut self, prior: &PriorSpec, budget: usize, attempt: usize, phase: Phase) -> Result<PhaseStop> {
        let cfg = self.config;
        let mut cloud = ParticleCloud::from_prior(prior, cfg.n_particles, self.rng)?;
        let mut summary = cloud.summarize();
        let repeat = cfg.strategy.shots_per_setting();
        let mut m = 1;
        let stop = 'outer: loop {
            if m > budget {
                break PhaseStop::Done;
            }
            let setting = match cfg.strategy.setting(&summary, m, self.rng) {
                Ok(s) => s,
                Err(Error::CollapsedPosterior) => break PhaseStop::Collapsed,
                Err(e) => return Err(e),
            };
            for _ in 0..repeat {
                if m > budget {
                    break 'outer PhaseStop::Done;
                }
                let outcome = self.oracle.measure(&setting);
                match cloud.bayes_update(outcome, &setting, &cfg.noise, &cfg.resampling, self.rng) {
                    Ok(_) => {}
                    Err(Error::DegeneratePosterior { .. }) => break 'outer PhaseStop::Degenerate,
                    Err(e) => return Err(e),
                }
                summary = cloud.summarize();
                self.shots.push(ShotRecord {
                    shot: self.shots.len() + 1,
                    attempt,
                    phase,
                    setting,
                    outcome,
                    mean_g: summary.mean_g,
                    std_g: summary.std_g,
                    mean_omega: summary.mean_omega,
                    std_omega: summary.std_omega,
                });
                m += 1;
            }
        };
        self.summary = Some(summary);
        self.cloud = Some(cloud);
        Ok(stop)
    }

    fn estimate(&self) -> SystemParams {
        let s = self.summary.expect("phase ran");
        SystemParams {
            g: s.mean_g,
            omega_r: s.mean_omega,
        }
    }

    fn finish(self, status: RunStatus, estimate: SystemParams, restarts: usize, attempts: Vec<Attempt>) -> RunRecord {
        RunRecord {
            status,
            estimate,
            final_summary: self.summary.expect("phase ran"),
            restarts,
            total_shots: self.shots.len(),
            attempts,
            shots: self.shots,
            final_cloud: self.cloud,
        }
    }

    fn plain(mut self) -> Result<RunRecord> {
        let cfg = self.config;
        let mut attempts = Vec::new();
        let mut restarts = 0;
        loop {
            let remaining = cfg.shots - self.shots.len();
            let stop = self.phase(&cfg.prior, remaining, attempts.len(), Phase::Search)?;
            let estimate = self.estimate();
            let end = match stop {
                PhaseStop::Done => AttemptEnd::Finished,
                PhaseStop::Collapsed => AttemptEnd::Collapsed,
                PhaseStop::Degenerate => AttemptEnd::Degenerate,
            };
            attempts.push(Attempt {
                search_prior: cfg.prior,
                verify_prior: None,
                checkpoint_estimate: None,
                final_estimate: Some(estimate),
                disagreement: None,
                end,
            });
            match stop {
                PhaseStop::Done => return Ok(self.finish(RunStatus::Completed, estimate, restarts, attempts)),
                PhaseStop::Collapsed => return Ok(self.finish(RunStatus::Converged, estimate, restarts, attempts)),
                PhaseStop::Degenerate if restarts < self.config.outlier_restarts() => restarts += 1,
                PhaseStop::Degenerate => return Ok(self.finish(RunStatus::Failed, estimate, restarts, attempts)),
            }
        }
    }

    fn with_protocol(mut self, protocol: OutlierProtocol) -> Result<RunRecord> {
        let original = self.config.prior;
        let omega_scale = protocol.omega_scale.unwrap_or(original.mu_g);
        let mut search_prior = original;
        let mut attempts: Vec<Attempt> = Vec::new();
        let mut restarts = 0;
        // (worst relative disagreement, estimate) of the best attempt so far
        let mut best: Option<(f64, SystemParams)> = None;

        loop {
            let index = attempts.len();
            let mut attempt = Attempt {
                search_prior,
                verify_prior: None,
                checkpoint_estimate: None,
                final_estimate: None,
                disagreement: None,
                end: AttemptEnd::Degenerate,
            };
            let stop = self.phase(&search_prior, protocol.checkpoint_shots, index, Phase::Search)?;
            if let PhaseStop::Done = stop {
                let first = self.estimate();
                attempt.checkpoint_estimate = Some(first);
                let verify_prior = original.recentered(first.g, first.omega_r)?;
                attempt.verify_prior = Some(verify_prior);
                let stop = self.phase(&verify_prior, protocol.verify_shots, index, Phase::Verify)?;
                if let PhaseStop::Done = stop {
                    let second = self.estimate();
                    attempt.final_estimate = Some(second);
                    let dg = (second.g - first.g).abs() / first.g;
                    let dw = (second.omega_r - first.omega_r).abs() / omega_scale;
                    attempt.disagreement = Some((dg, dw));
                    let agreed = dg < protocol.agreement_threshold && dw < protocol.agreement_threshold;
                    attempt.end = if agreed { AttemptEnd::Agreed } else { AttemptEnd::Disagreed };
                    attempts.push(attempt);
                    if agreed {
                        let status = if restarts == 0 {
                            RunStatus::AcceptedAfterVerify
                        } else {
                            RunStatus::Restarted { restarts }
                        };
                        return Ok(self.finish(status, second, restarts, attempts));
                    }
                    let score = dg.max(dw);
                    if best.is_none_or(|(b, _)| score < b) {
                        best = Some((score, second));
                    }
                } else {
                    attempt.end = end_of(&stop);
                    attempts.push(attempt);
                }
            } else {
                attempt.end = end_of(&stop);
                attempts.push(attempt);
            }
            if let Some(Attempt {
                end: AttemptEnd::Collapsed,
                ..
            }) = attempts.last()
            {
                let estimate = self.estimate();
                return Ok(self.finish(RunStatus::Converged, estimate, restarts, attempts));
            }
            if restarts == protocol.max_restarts {
                let estimate = best.map_or_else(|| self.estimate(), |(_, e)| e);
                return Ok(self.finish(RunStatus::Failed, estimate, restarts, attempts));
            }
            restarts += 1;
            let centre = original.sample(self.rng)?;
            search_prior = original.recentered(centre.g, centre.omega_r)?;
        }
    }
}

fn end_of(stop: &PhaseStop) -> AttemptEnd {
    match stop {
        PhaseStop::Done => AttemptEnd::Finished,
        PhaseStop::Degenerate => AttemptEnd::Degenerate,
        PhaseStop::Collapsed => AttemptEnd::Collapsed,
    }
}

impl SessionConfig {
    fn outlier_restarts(&self) -> usize {
        self.outlier.map_or(OutlierProtocol::default().max_restarts, |p| p.max_restarts)
    }
}

/// Runs one session with randomness drawn from `rng` (strategy draws,
/// resampling and restart centres, in loop order).
pub fn run_estimation_with_rng<O, R>(config: &SessionConfig, oracle: &mut O, rng: &mut R) -> Result<RunRecord>
where
    O: OutcomeSource + ?Sized,
    R: Rng,
{
    config.validate()?;
    let runner = Runner {
        config,
        oracle,
        rng,
        shots: Vec::with_capacity(config.nominal_shots()),
        cloud: None,
        summary: None,
    };
    match config.outlier {
        None => runner.plain(),
        Some(protocol) => runner.with_protocol(protocol),
    }
}

/// Runs one session seeded from `config.seed`.
pub fn run_estimation<O: OutcomeSource + ?Sized>(config: &SessionConfig, oracle: &mut O) -> Result<RunRecord> {
    let mut rng = stream_rng(config.seed, 0);
    run_estimation_with_rng(config, oracle, &mut rng)
}
