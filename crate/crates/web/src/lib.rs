//! Browser bindings: the analytic swap spectrum, a steppable adaptive
//! estimator, and snapshots of its particle cloud.

use rescoup::physics::excitation_probability_damped;
use rescoup::rng::{stream_rng, StreamRng};
use rescoup::sim::sample_outcome;
use rescoup::strategy::next_setting;
use rescoup::{ControlSetting, NoiseParams, ParticleCloud, PriorSpec, Relaxation, Resampling, StrategyParams, SystemParams};
use wasm_bindgen::prelude::*;

/// Values per row of [`Estimator::trace`].
pub const TRACE_STRIDE: usize = 8;

fn js(e: rescoup::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn noise(t1: f64, p_e: f64) -> Result<NoiseParams, rescoup::Error> {
    NoiseParams::new(Relaxation::from_t1(t1)?, p_e)
}

fn spectrum_values(g: f64, t1: f64, delta_max: f64, n_delta: usize, t_max: f64, n_t: usize) -> Result<Vec<f64>, rescoup::Error> {
    let truth = SystemParams::new(g, 0.0)?;
    let noise = noise(t1, 0.0)?;
    let axis = |n: usize, i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n_delta * n_t);
    for i in 0..n_delta {
        let delta = delta_max * (2.0 * axis(n_delta, i) - 1.0);
        for j in 0..n_t {
            let setting = ControlSetting {
                omega_q: 2.0 * g * delta,
                t: t_max * axis(n_t, j),
            };
            out.push(excitation_probability_damped(&truth, &setting, &noise));
        }
    }
    Ok(out)
}

/// Excited-state probability on an `n_delta x n_t` grid, rows by detuning
/// `delta = (omega_q - omega_r) / 2g` in `[-delta_max, delta_max]` and
/// columns by waiting time in `[0, t_max]`. Pass `t1 = Infinity` for no
/// relaxation.
#[wasm_bindgen]
pub fn spectrum(g: f64, t1: f64, delta_max: f64, n_delta: usize, t_max: f64, n_t: usize) -> Result<Vec<f64>, JsError> {
    spectrum_values(g, t1, delta_max, n_delta, t_max, n_t).map_err(js)
}

/// An adaptive estimation session against a simulated qubit, advanced
/// shot by shot from the page.
#[wasm_bindgen]
pub struct Estimator {
    truth: SystemParams,
    noise: NoiseParams,
    params: StrategyParams,
    resampling: Resampling,
    cloud: ParticleCloud,
    rng: StreamRng,
    oracle: StreamRng,
    trace: Vec<f64>,
}

impl Estimator {
    fn build(seed: u32, truth_g: f64, truth_omega: f64, p_e: f64, t1: f64, particles: usize) -> Result<Self, rescoup::Error> {
        let mut rng = stream_rng(u64::from(seed), 0);
        let cloud = ParticleCloud::from_prior(&PriorSpec::default(), particles, &mut rng)?;
        Ok(Self {
            truth: SystemParams::new(truth_g, truth_omega)?,
            noise: noise(t1, p_e)?,
            params: StrategyParams::default(),
            resampling: Resampling::default(),
            cloud,
            rng,
            oracle: stream_rng(u64::from(seed), 1),
            trace: Vec::new(),
        })
    }

    fn advance(&mut self, shots: usize) -> Result<usize, rescoup::Error> {
        for done in 0..shots {
            let shot = self.shots() + 1;
            let setting = match next_setting(&self.cloud.summarize(), shot, &self.params, &mut self.rng) {
                Ok(s) => s,
                Err(rescoup::Error::CollapsedPosterior) => return Ok(done),
                Err(e) => return Err(e),
            };
            let outcome = sample_outcome(&self.truth, &setting, &self.noise, &mut self.oracle);
            self.cloud.bayes_update(outcome, &setting, &self.noise, &self.resampling, &mut self.rng)?;
            let s = self.cloud.summarize();
            self.trace.extend_from_slice(&[
                shot as f64,
                setting.omega_q,
                setting.t,
                f64::from(u8::from(outcome)),
                s.mean_g,
                s.std_g,
                s.mean_omega,
                s.std_omega,
            ]);
        }
        Ok(shots)
    }
}

#[wasm_bindgen]
impl Estimator {
    /// Prior: g log-normal with mean 1 and std 0.25, omega_r normal(0, 1).
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, truth_g: f64, truth_omega: f64, p_e: f64, t1: f64, particles: usize) -> Result<Estimator, JsError> {
        Self::build(seed, truth_g, truth_omega, p_e, t1, particles).map_err(js)
    }

    /// Measures and updates `shots` times; returns how many shots ran (fewer
    /// if the posterior collapsed).
    pub fn step(&mut self, shots: usize) -> Result<usize, JsError> {
        self.advance(shots).map_err(js)
    }

    pub fn shots(&self) -> usize {
        self.trace.len() / TRACE_STRIDE
    }

    /// Flat rows of `shot, omega_q, t, outcome, mean_g, std_g, mean_omega, std_omega`.
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }

    /// Flat `g, omega_r, weight` triples for at most `max_points` particles,
    /// taken at an even stride through the cloud.
    pub fn cloud(&self, max_points: usize) -> Vec<f64> {
        let stride = self.cloud.len().div_ceil(max_points.max(1)).max(1);
        self.cloud
            .iter()
            .step_by(stride)
            .flat_map(|(p, w)| [p.g, p.omega_r, w])
            .collect()
    }

    /// `mean_g, std_g, mean_omega, std_omega, ess`.
    pub fn summary(&self) -> Vec<f64> {
        let s = self.cloud.summarize();
        vec![s.mean_g, s.std_g, s.mean_omega, s.std_omega, s.ess]
    }

    pub fn truth_g(&self) -> f64 {
        self.truth.g
    }

    pub fn truth_omega(&self) -> f64 {
        self.truth.omega_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_grid_shape_and_resonance() {
        let v = spectrum_values(1.0, f64::INFINITY, 2.0, 5, std::f64::consts::PI, 3).unwrap();
        assert_eq!(v.len(), 15);
        // middle row is delta = 0: 1, then full swap at t = pi/2, back at pi
        assert!((v[6] - 1.0).abs() < 1e-15 && v[7] < 1e-15 && (v[8] - 1.0).abs() < 1e-12);
        assert!(spectrum_values(-1.0, 1.0, 1.0, 2, 1.0, 2).is_err());
    }

    #[test]
    fn estimator_converges_and_repeats() {
        let mut a = Estimator::build(3, 1.1, 0.3, 0.0, f64::INFINITY, 2000).unwrap();
        let mut b = Estimator::build(3, 1.1, 0.3, 0.0, f64::INFINITY, 2000).unwrap();
        assert_eq!(a.advance(200).unwrap(), 200);
        b.advance(120).unwrap();
        b.advance(80).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.shots(), 200);
        let s = a.summary();
        assert!((s[0] - 1.1).abs() < 1e-3, "{s:?}");
        assert_eq!(a.cloud(100).len(), 3 * 100);
    }
}
