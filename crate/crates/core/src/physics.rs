//! Single-shot outcome model for a qubit coupled to a resonator.
//!
//! The qubit starts in `|1>` with the resonator empty. Because the
//! Jaynes-Cummings interaction conserves excitation number, the evolution
//! stays in the `{|10>, |01>}` subspace where the effective Hamiltonian is
//! `(dw/2) eta_z + g eta_x` with detuning `dw = omega_q - omega_r`. All
//! frequencies are angular frequencies in one consistent (arbitrary) unit,
//! and times are in the inverse of that unit.
//!
//! Relaxation of the qubit is handled in the secular (rotating-wave)
//! approximation, valid while the decay rate is much smaller than `g`.
//! Readout error is a symmetric bit flip applied to the projective outcome.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Hypothesized or true system parameters: the coupling `g` and the
/// resonator frequency `omega_r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g: f64,
    pub omega_r: f64,
}

impl SystemParams {
    pub fn new(g: f64, omega_r: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::invalid("g", format!("must be finite and > 0, got {g}")));
        }
        if !omega_r.is_finite() {
            return Err(Error::invalid("omega_r", "must be finite"));
        }
        Ok(Self { g, omega_r })
    }
}

/// The experimenter's knobs for one shot: qubit frequency and waiting time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSetting {
    pub omega_q: f64,
    pub t: f64,
}

impl ControlSetting {
    pub fn new(omega_q: f64, t: f64) -> Result<Self> {
        if !omega_q.is_finite() {
            return Err(Error::invalid("omega_q", "must be finite"));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        Ok(Self { omega_q, t })
    }
}

/// Qubit energy relaxation. `None` is the exact `T1 = inf` limit, kept
/// distinct from any large finite value so the undamped formula is used
/// verbatim.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Relaxation {
    #[default]
    None,
    T1(f64),
}

impl Relaxation {
    /// Maps `f64::INFINITY` to [`Relaxation::None`].
    pub fn from_t1(t1: f64) -> Result<Self> {
        if t1 == f64::INFINITY {
            Ok(Relaxation::None)
        } else if t1.is_finite() && t1 > 0.0 {
            Ok(Relaxation::T1(t1))
        } else {
            Err(Error::invalid("t1", format!("must be > 0 or inf, got {t1}")))
        }
    }

    pub fn t1(self) -> f64 {
        match self {
            Relaxation::None => f64::INFINITY,
            Relaxation::T1(t1) => t1,
        }
    }
}

impl Serialize for Relaxation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Relaxation::None => s.serialize_str("inf"),
            Relaxation::T1(t1) => s.serialize_f64(*t1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct NoiseParams {
    pub t1: Relaxation,
    /// Probability that the reported bit is flipped.
    pub p_e: f64,
}

impl NoiseParams {
    pub fn new(t1: Relaxation, p_e: f64) -> Result<Self> {
        if let Relaxation::T1(v) = t1 {
            Relaxation::from_t1(v)?;
        }
        if !(0.0..=1.0).contains(&p_e) {
            return Err(Error::invalid("p_e", format!("must lie in [0, 1], got {p_e}")));
        }
        Ok(Self { t1, p_e })
    }

    pub fn ideal() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedFrequencies {
    pub delta_omega: f64,
    pub omega_rabi: f64,
}

#[inline]
pub fn derived_frequencies(params: &SystemParams, setting: &ControlSetting) -> DerivedFrequencies {
    let delta_omega = setting.omega_q - params.omega_r;
    let omega_rabi = (delta_omega * delta_omega + 4.0 * params.g * params.g).sqrt();
    DerivedFrequencies {
        delta_omega,
        omega_rabi,
    }
}

/// Probability of finding the qubit excited after waiting `t`, without relaxation.
///
/// Evaluated as `1 - (4g^2/w_R^2) sin^2(w_R t / 2)`.
#[inline]
pub fn excitation_probability(params: &SystemParams, setting: &ControlSetting) -> f64 {
    let omega_rabi = derived_frequencies(params, setting).omega_rabi;
    let swing = (omega_rabi * setting.t / 2.0).sin();
    let p = 1.0 - 4.0 * params.g * params.g / (omega_rabi * omega_rabi) * swing * swing;
    p.clamp(0.0, 1.0)
}

/// Excitation probability including qubit relaxation during the wait.
///
/// The two dressed states decay at `Gamma (w_R +- dw) / (2 w_R)` and their
/// coherence at `Gamma / 2`. Readout error is not applied here.
#[inline]
pub fn excitation_probability_damped(
    params: &SystemParams,
    setting: &ControlSetting,
    noise: &NoiseParams,
) -> f64 {
    let t1 = match noise.t1 {
        Relaxation::None => return excitation_probability(params, setting),
        Relaxation::T1(t1) => t1,
    };
    let DerivedFrequencies {
        delta_omega,
        omega_rabi,
    } = derived_frequencies(params, setting);
    let t = setting.t;
    let plus = omega_rabi + delta_omega;
    let minus = omega_rabi - delta_omega;
    let two_wr = 2.0 * omega_rabi;
    let upper = (plus / two_wr).powi(2) * (-plus * t / (two_wr * t1)).exp();
    let lower = (minus / two_wr).powi(2) * (-minus * t / (two_wr * t1)).exp();
    let coherence = 2.0 * params.g * params.g / (omega_rabi * omega_rabi)
        * (-t / (2.0 * t1)).exp()
        * (omega_rabi * t).cos();
    (upper + lower + coherence).clamp(0.0, 1.0)
}

/// Pushes an ideal excitation probability through the readout channel and
/// returns the probability of reporting `outcome` (`true` = excited).
#[inline]
pub fn readout_likelihood(outcome: bool, p_excited: f64, p_e: f64) -> f64 {
    let reported_one = p_excited * (1.0 - p_e) + (1.0 - p_excited) * p_e;
    if outcome {
        reported_one
    } else {
        1.0 - reported_one
    }
}

/// `P(outcome | params)` for one shot at `setting`.
#[inline]
pub fn outcome_likelihood(
    outcome: bool,
    params: &SystemParams,
    setting: &ControlSetting,
    noise: &NoiseParams,
) -> f64 {
    readout_likelihood(
        outcome,
        excitation_probability_damped(params, setting, noise),
        noise.p_e,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sp(g: f64, omega_r: f64) -> SystemParams {
        SystemParams::new(g, omega_r).unwrap()
    }

    fn cs(omega_q: f64, t: f64) -> ControlSetting {
        ControlSetting::new(omega_q, t).unwrap()
    }

    #[test]
    fn derived_frequency_examples() {
        let d = derived_frequencies(&sp(1.0, 10.0), &cs(10.0, 0.0));
        assert_eq!((d.delta_omega, d.omega_rabi), (0.0, 2.0));
        let d = derived_frequencies(&sp(1.0, 10.0), &cs(13.0, 0.0));
        assert_eq!(d.delta_omega, 3.0);
        assert!((d.omega_rabi - 13f64.sqrt()).abs() < 1e-15);
        let d = derived_frequencies(&sp(2.0, 5.0), &cs(5.0, 0.0));
        assert_eq!((d.delta_omega, d.omega_rabi), (0.0, 4.0));
    }

    #[test]
    fn resonant_swap() {
        let p = sp(1.0, 3.0);
        assert_eq!(excitation_probability(&p, &cs(3.0, 0.0)), 1.0);
        assert!(excitation_probability(&p, &cs(3.0, PI / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn damped_examples() {
        let noise = NoiseParams::new(Relaxation::T1(10.0), 0.0).unwrap();
        for (g, w, q) in [(1.0, 0.0, 0.0), (0.3, 2.0, -1.0), (2.0, 5.0, 9.0)] {
            let p = excitation_probability_damped(&sp(g, w), &cs(q, 0.0), &noise);
            assert!((p - 1.0).abs() < 1e-15);
        }
        let p = excitation_probability_damped(&sp(1.0, 0.0), &cs(0.0, PI / 2.0), &noise);
        assert!(p.abs() < 1e-15, "{p}");
    }

    #[test]
    fn likelihood_examples() {
        let p = sp(1.0, 0.0);
        assert_eq!(outcome_likelihood(true, &p, &cs(0.7, 0.0), &NoiseParams::ideal()), 1.0);
        let noisy = NoiseParams::new(Relaxation::None, 0.1).unwrap();
        assert!((outcome_likelihood(true, &p, &cs(0.7, 0.0), &noisy) - 0.9).abs() < 1e-15);
        let l0 = outcome_likelihood(false, &p, &cs(0.0, PI / 4.0), &noisy);
        assert!((l0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(SystemParams::new(0.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, f64::NAN).is_err());
        assert!(ControlSetting::new(1.0, -1e-9).is_err());
        assert!(NoiseParams::new(Relaxation::None, 1.5).is_err());
        assert!(NoiseParams::new(Relaxation::T1(-2.0), 0.0).is_err());
        assert!(NoiseParams::new(Relaxation::T1(0.0), 0.0).is_err());
        assert_eq!(Relaxation::from_t1(f64::INFINITY).unwrap(), Relaxation::None);
    }

    #[test]
    fn relaxation_serializes_infinity_as_string() {
        let n = NoiseParams::ideal();
        assert_eq!(serde_json::to_string(&n).unwrap(), r#"{"t1":"inf","p_e":0.0}"#);
    }
}
