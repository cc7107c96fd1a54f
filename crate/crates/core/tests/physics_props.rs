use proptest::prelude::*;
use rescoup::physics::{derived_frequencies, excitation_probability, excitation_probability_damped, outcome_likelihood};
use rescoup::{ControlSetting, NoiseParams, Relaxation, SystemParams};

fn params() -> impl Strategy<Value = SystemParams> {
    (0.01f64..10.0, -50.0f64..50.0).prop_map(|(g, omega_r)| SystemParams { g, omega_r })
}

fn setting() -> impl Strategy<Value = ControlSetting> {
    (-60.0f64..60.0, 0.0f64..200.0).prop_map(|(omega_q, t)| ControlSetting { omega_q, t })
}

fn noise() -> impl Strategy<Value = NoiseParams> {
    (prop_oneof![Just(f64::INFINITY), 0.1f64..1e4], 0.0f64..=1.0)
        .prop_map(|(t1, p_e)| NoiseParams::new(Relaxation::from_t1(t1).unwrap(), p_e).unwrap())
}

proptest! {
    #[test]
    fn probability_is_bounded(p in params(), s in setting(), n in noise()) {
        let ideal = excitation_probability(&p, &s);
        let damped = excitation_probability_damped(&p, &s, &n);
        prop_assert!((0.0..=1.0).contains(&ideal));
        prop_assert!((0.0..=1.0).contains(&damped));
    }

    #[test]
    fn starts_excited(p in params(), omega_q in -60.0f64..60.0, n in noise()) {
        let s = ControlSetting { omega_q, t: 0.0 };
        prop_assert_eq!(excitation_probability(&p, &s), 1.0);
        prop_assert!((excitation_probability_damped(&p, &s, &n) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn detuning_sign_is_irrelevant(p in params(), s in setting()) {
        let mirrored = ControlSetting { omega_q: 2.0 * p.omega_r - s.omega_q, t: s.t };
        let a = excitation_probability(&p, &s);
        let b = excitation_probability(&p, &mirrored);
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn undamped_is_periodic(p in params(), s in setting()) {
        let period = 2.0 * std::f64::consts::PI / derived_frequencies(&p, &s).omega_rabi;
        let later = ControlSetting { t: s.t + period, ..s };
        let a = excitation_probability(&p, &s);
        let b = excitation_probability(&p, &later);
        // phase rounding grows with omega_rabi * t
        let tol = 1e-12f64.max(4.0 * f64::EPSILON * derived_frequencies(&p, &later).omega_rabi * later.t);
        prop_assert!((a - b).abs() <= tol, "{} vs {}", a, b);
    }

    #[test]
    fn channel_is_normalized(p in params(), s in setting(), n in noise()) {
        let sum = outcome_likelihood(false, &p, &s, &n) + outcome_likelihood(true, &p, &s, &n);
        prop_assert_eq!(sum, 1.0);
    }

    #[test]
    fn rabi_frequency_bounds(p in params(), s in setting()) {
        let d = derived_frequencies(&p, &s);
        prop_assert!(d.omega_rabi >= 2.0 * p.g);
        prop_assert!(d.omega_rabi >= d.delta_omega.abs());
    }
}
