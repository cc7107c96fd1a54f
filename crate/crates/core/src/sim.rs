//! Simulated experiments and ensemble benchmarks.
//!
//! An ensemble draws true parameters from `truth_prior`, runs a full
//! session against a simulated qubit for each draw, and aggregates the
//! per-shot squared errors of the posterior mean across runs. Run `i` draws
//! its truth and session randomness from stream `2i` of the master seed and
//! its measurement outcomes from stream `2i + 1`, so results do not depend
//! on how runs are scheduled over threads.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sci;
use crate::physics::{outcome_likelihood, ControlSetting, NoiseParams, Relaxation, SystemParams};
use crate::rng::stream_rng;
use crate::session::{run_estimation_with_rng, OutcomeSource, RunStatus, SessionConfig};
use crate::smc::PriorSpec;

/// One simulated single-shot readout.
pub fn sample_outcome<R: Rng + ?Sized>(
    truth: &SystemParams,
    setting: &ControlSetting,
    noise: &NoiseParams,
    rng: &mut R,
) -> bool {
    rng.random::<f64>() < outcome_likelihood(true, truth, setting, noise)
}

/// A simulated qubit with fixed true parameters.
#[derive(Clone, Debug)]
pub struct SimulatedExperiment {
    pub truth: SystemParams,
    pub noise: NoiseParams,
    rng: ChaCha8Rng,
}

impl SimulatedExperiment {
    /// Outcomes are drawn from stream 1 of `seed`.
    pub fn new(truth: SystemParams, noise: NoiseParams, seed: u64) -> Self {
        Self::with_rng(truth, noise, stream_rng(seed, 1))
    }

    pub fn with_rng(truth: SystemParams, noise: NoiseParams, rng: ChaCha8Rng) -> Self {
        Self { truth, noise, rng }
    }
}

impl OutcomeSource for SimulatedExperiment {
    fn measure(&mut self, setting: &ControlSetting) -> bool {
        sample_outcome(&self.truth, setting, &self.noise, &mut self.rng)
    }
}

/// `(((g - g0) / g0)^2, ((omega - omega0) / omega_scale)^2)`.
pub fn relative_errors(estimate: &SystemParams, truth: &SystemParams, omega_scale: f64) -> (f64, f64) {
    let eg = (estimate.g - truth.g) / truth.g;
    let ew = (estimate.omega_r - truth.omega_r) / omega_scale;
    (eg * eg, ew * ew)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub session: SessionConfig,
    /// Distribution of the true parameters; `None` uses the session prior.
    pub truth_prior: Option<PriorSpec>,
    /// Squared-error thresholds for outlier counting, ascending.
    pub thresholds: Vec<f64>,
    /// Shot counts at which outliers are counted in plain runs.
    pub checkpoints: Vec<usize>,
    /// Normalization of the `omega_r` error; `None` uses the truth prior's `mu_g`.
    pub omega_scale: Option<f64>,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_runs: 200,
            session: SessionConfig {
                n_particles: 5_000,
                ..SessionConfig::default()
            },
            truth_prior: None,
            thresholds: vec![1e-10, 1e-7, 1e-4],
            checkpoints: vec![150, 300, 600],
            omega_scale: None,
            seed: 0,
            threads: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::invalid("ensemble.n_runs", "must be >= 1"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0)) || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ensemble.thresholds", "must be positive and strictly ascending"));
        }
        if self.checkpoints.contains(&0) {
            return Err(Error::invalid("ensemble.checkpoints", "shot counts start at 1"));
        }
        if let Some(s) = self.omega_scale {
            if !(s > 0.0) {
                return Err(Error::invalid("ensemble.omega_scale", "must be > 0"));
            }
        }
        if let Some(p) = &self.truth_prior {
            p.validate()?;
        }
        self.session.validate()
    }

    pub fn truth_prior(&self) -> PriorSpec {
        self.truth_prior.unwrap_or(self.session.prior)
    }

    fn omega_scale(&self) -> f64 {
        self.omega_scale.unwrap_or(self.truth_prior().mu_g)
    }
}

/// Error history of one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub truth: SystemParams,
    pub estimate: SystemParams,
    pub status: RunStatus,
    pub restarts: usize,
    pub total_shots: usize,
    /// Squared error of the posterior mean after each of the first
    /// `nominal_shots` shots (padded with the last value if the run stopped early).
    pub eps2_g: Vec<f64>,
    pub eps2_omega: Vec<f64>,
    pub final_eps2_g: f64,
    pub final_eps2_omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutlierRow {
    pub threshold: f64,
    pub shots: usize,
    pub outlier_count: usize,
    pub n_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub median_eps2_g: Vec<f64>,
    pub median_eps2_omega: Vec<f64>,
    pub mean_eps2_g: Vec<f64>,
    pub mean_eps2_omega: Vec<f64>,
    pub n_runs: usize,
    pub n_failed: usize,
    pub outliers: Vec<OutlierRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub traces: Vec<RunTrace>,
    pub curve: ErrorCurve,
}

fn run_member(config: &EnsembleConfig, index: usize) -> Result<RunTrace> {
    let mut rng = stream_rng(config.seed, 2 * index as u64);
    let truth = config.truth_prior().sample(&mut rng)?;
    let mut oracle = SimulatedExperiment::with_rng(truth, config.session.noise, stream_rng(config.seed, 2 * index as u64 + 1));
    let record = run_estimation_with_rng(&config.session, &mut oracle, &mut rng)?;
    let scale = config.omega_scale();
    let len = config.session.nominal_shots();
    let prior = config.session.prior;
    let mut last = relative_errors(
        &SystemParams {
            g: prior.mu_g,
            omega_r: prior.mu_omega,
        },
        &truth,
        scale,
    );
    let mut eps2_g = Vec::with_capacity(len);
    let mut eps2_omega = Vec::with_capacity(len);
    for k in 0..len {
        if let Some(s) = record.shots.get(k) {
            last = relative_errors(
                &SystemParams {
                    g: s.mean_g,
                    omega_r: s.mean_omega,
                },
                &truth,
                scale,
            );
        }
        eps2_g.push(last.0);
        eps2_omega.push(last.1);
    }
    let (final_eps2_g, final_eps2_omega) = relative_errors(&record.estimate, &truth, scale);
    Ok(RunTrace {
        truth,
        estimate: record.estimate,
        status: record.status,
        restarts: record.restarts,
        total_shots: record.total_shots,
        eps2_g,
        eps2_omega,
        final_eps2_g,
        final_eps2_omega,
    })
}

/// Median of a slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl ErrorCurve {
    /// Aggregates member traces. `protocol` switches outlier counting from
    /// per-checkpoint trace values to the final (post-protocol) estimates.
    pub fn from_traces(traces: &[RunTrace], thresholds: &[f64], checkpoints: &[usize], protocol: bool) -> Self {
        let len = traces.first().map_or(0, |t| t.eps2_g.len());
        let column = |k: usize, pick: fn(&RunTrace) -> &Vec<f64>| -> Vec<f64> { traces.iter().map(|t| pick(t)[k]).collect() };
        let mut curve = ErrorCurve {
            median_eps2_g: Vec::with_capacity(len),
            median_eps2_omega: Vec::with_capacity(len),
            mean_eps2_g: Vec::with_capacity(len),
            mean_eps2_omega: Vec::with_capacity(len),
            n_runs: traces.len(),
            n_failed: traces.iter().filter(|t| t.status == RunStatus::Failed).count(),
            outliers: Vec::new(),
        };
        for k in 0..len {
            let g = column(k, |t| &t.eps2_g);
            let w = column(k, |t| &t.eps2_omega);
            curve.median_eps2_g.push(median(&g));
            curve.median_eps2_omega.push(median(&w));
            curve.mean_eps2_g.push(mean(&g));
            curve.mean_eps2_omega.push(mean(&w));
        }
        for &threshold in thresholds {
            if protocol {
                curve.outliers.push(OutlierRow {
                    threshold,
                    shots: len,
                    outlier_count: traces.iter().filter(|t| t.final_eps2_g > threshold).count(),
                    n_runs: traces.len(),
                });
            } else {
                for &shots in checkpoints.iter().filter(|&&c| c <= len) {
                    curve.outliers.push(OutlierRow {
                        threshold,
                        shots,
                        outlier_count: traces.iter().filter(|t| t.eps2_g[shots - 1] > threshold).count(),
                        n_runs: traces.len(),
                    });
                }
            }
        }
        curve
    }

    pub fn len(&self) -> usize {
        self.median_eps2_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median_eps2_g.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["shot", "median_eps2_g", "median_eps2_omega", "mean_eps2_g", "mean_eps2_omega", "n_failed"])?;
        for k in 0..self.len() {
            w.write_record([
                (k + 1).to_string(),
                sci(self.median_eps2_g[k]),
                sci(self.median_eps2_omega[k]),
                sci(self.mean_eps2_g[k]),
                sci(self.mean_eps2_omega[k]),
                self.n_failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_outliers_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "shots", "outlier_count", "n_runs"])?;
        for r in &self.outliers {
            w.write_record([sci(r.threshold), r.shots.to_string(), r.outlier_count.to_string(), r.n_runs.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `f` on a pool of `threads` workers (0 = runtime default). Without
/// the `parallel` feature `f` simply runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

#[cfg(feature = "parallel")]
fn run_members(config: &EnsembleConfig) -> Result<Vec<RunTrace>> {
    use rayon::prelude::*;
    with_threads(config.threads, || (0..config.n_runs).into_par_iter().map(|i| run_member(config, i)).collect())?
}

#[cfg(not(feature = "parallel"))]
fn run_members(config: &EnsembleConfig) -> Result<Vec<RunTrace>> {
    (0..config.n_runs).map(|i| run_member(config, i)).collect()
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let traces = run_members(config)?;
    let curve = ErrorCurve::from_traces(
        &traces,
        &config.thresholds,
        &config.checkpoints,
        config.session.outlier.is_some(),
    );
    Ok(Ensemble { traces, curve })
}

/// Shots needed to bring the `g` error below a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotsToTarget {
    pub target: f64,
    /// Mean over runs of the first shot with `eps2_g <= target`; runs that
    /// never get there count as the full budget.
    pub mean_shots: f64,
    pub stderr_shots: f64,
    pub median_shots: f64,
    /// Runs that never met the target.
    pub n_capped: usize,
    pub n_runs: usize,
    /// First shot where the ensemble-mean error curve meets the target.
    pub mean_curve_shots: Option<usize>,
    /// First shot where the ensemble-median error curve meets the target.
    pub median_curve_shots: Option<usize>,
}

impl ShotsToTarget {
    pub fn from_ensemble(ensemble: &Ensemble, target: f64) -> Self {
        let traces = &ensemble.traces;
        let first_hits: Vec<(f64, bool)> = traces
            .iter()
            .map(|t| match t.eps2_g.iter().position(|&e| e <= target) {
                Some(k) => ((k + 1) as f64, false),
                None => (t.eps2_g.len() as f64, true),
            })
            .collect();
        let shots: Vec<f64> = first_hits.iter().map(|h| h.0).collect();
        let n = shots.len() as f64;
        let m = mean(&shots);
        let var = if shots.len() > 1 {
            shots.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let first_below = |curve: &[f64]| curve.iter().position(|&e| e <= target).map(|k| k + 1);
        ShotsToTarget {
            target,
            mean_shots: m,
            stderr_shots: (var / n).sqrt(),
            median_shots: median(&shots),
            n_capped: first_hits.iter().filter(|h| h.1).count(),
            n_runs: shots.len(),
            mean_curve_shots: first_below(&ensemble.curve.mean_eps2_g),
            median_curve_shots: first_below(&ensemble.curve.median_eps2_g),
        }
    }
}

pub fn shots_to_threshold(config: &EnsembleConfig, target: f64) -> Result<ShotsToTarget> {
    if !(target > 0.0) {
        return Err(Error::invalid("target", "must be > 0"));
    }
    Ok(ShotsToTarget::from_ensemble(&run_ensemble(config)?, target))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PE,
    T1,
    SigmaG,
    SigmaOmega,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PE => "p_e",
            SweepAxis::T1 => "t1",
            SweepAxis::SigmaG => "sigma_g",
            SweepAxis::SigmaOmega => "sigma_omega",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p_e" => Ok(SweepAxis::PE),
            "t1" => Ok(SweepAxis::T1),
            "sigma_g" => Ok(SweepAxis::SigmaG),
            "sigma_omega" => Ok(SweepAxis::SigmaOmega),
            other => Err(Error::invalid("sweep.axis", format!("unknown axis `{other}`"))),
        }
    }

    /// `config` with this axis set to `value`. Prior widths move both the
    /// initial prior and the truth distribution.
    pub fn apply(self, config: &EnsembleConfig, value: f64) -> Result<EnsembleConfig> {
        let mut c = config.clone();
        let mut truth = c.truth_prior();
        match self {
            SweepAxis::PE => c.session.noise = NoiseParams::new(c.session.noise.t1, value)?,
            SweepAxis::T1 => c.session.noise = NoiseParams::new(Relaxation::from_t1(value)?, c.session.noise.p_e)?,
            SweepAxis::SigmaG => {
                c.session.prior.sigma_g = value;
                truth.sigma_g = value;
                c.truth_prior = Some(truth);
            }
            SweepAxis::SigmaOmega => {
                c.session.prior.sigma_omega = value;
                truth.sigma_omega = value;
                c.truth_prior = Some(truth);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub stats: ShotsToTarget,
}

/// Shots-to-target for every `(value, target)` pair; one ensemble per value.
pub fn sweep(config: &EnsembleConfig, axis: SweepAxis, values: &[f64], targets: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * targets.len());
    for &value in values {
        let ensemble = run_ensemble(&axis.apply(config, value)?)?;
        for &target in targets {
            rows.push(SweepRow {
                axis,
                value,
                stats: ShotsToTarget::from_ensemble(&ensemble, target),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "axis",
        "value",
        "target",
        "mean_shots",
        "stderr_shots",
        "median_shots",
        "n_capped",
        "n_runs",
        "mean_curve_shots",
        "median_curve_shots",
    ])?;
    let opt = |v: Option<usize>| v.map_or_else(String::new, |s| s.to_string());
    for r in rows {
        let s = &r.stats;
        w.write_record([
            r.axis.name().to_string(),
            sci(r.value),
            sci(s.target),
            sci(s.mean_shots),
            sci(s.stderr_shots),
            sci(s.median_shots),
            s.n_capped.to_string(),
            s.n_runs.to_string(),
            opt(s.mean_curve_shots),
            opt(s.median_curve_shots),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line through `(x, y)` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

fn window(curve: &[f64], first: usize, last: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    (first..=last.min(curve.len())).map(move |shot| (shot as f64, curve[shot - 1].max(f64::MIN_POSITIVE).ln()))
}

/// `ln(curve)` against shot number over the 1-based inclusive shot window;
/// an exponential decay is a straight line here.
pub fn fit_log_linear(curve: &[f64], first: usize, last: usize) -> LineFit {
    let (x, y): (Vec<f64>, Vec<f64>) = window(curve, first, last).unzip();
    fit_line(&x, &y)
}

/// `ln(curve)` against `ln(shot)`; a power law is a straight line here.
pub fn fit_log_log(curve: &[f64], first: usize, last: usize) -> LineFit {
    let (x, y): (Vec<f64>, Vec<f64>) = window(curve, first, last).map(|(s, v)| (s.ln(), v)).unzip();
    fit_line(&x, &y)
}
