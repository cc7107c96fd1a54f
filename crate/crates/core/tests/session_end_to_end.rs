use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescoup::session::{AttemptEnd, Phase};
use rescoup::sim::SimulatedExperiment;
use rescoup::{run_estimation, ControlSetting, NoiseParams, OutlierProtocol, PriorSpec, RunStatus, SessionConfig, SystemParams};

fn protocol_config(seed: u64, n_particles: usize) -> SessionConfig {
    SessionConfig {
        n_particles,
        outlier: Some(OutlierProtocol::default()),
        seed,
        ..SessionConfig::default()
    }
}

#[test]
fn noiseless_truth_at_prior_mean_is_accepted() {
    let config = protocol_config(7, 5000);
    let truth = SystemParams { g: 1.0, omega_r: 0.0 };
    let mut oracle = SimulatedExperiment::new(truth, NoiseParams::ideal(), 7);
    let rec = run_estimation(&config, &mut oracle).unwrap();
    assert_eq!(rec.status, RunStatus::AcceptedAfterVerify);
    assert_eq!(rec.total_shots, 600);
    assert!((rec.estimate.g - 1.0).abs() < 1e-3, "{:?}", rec.estimate);
    let verify = rec.attempts[0].verify_prior.unwrap();
    let original = PriorSpec::default();
    assert_eq!((verify.sigma_g, verify.sigma_omega), (original.sigma_g, original.sigma_omega));
    assert_eq!(rec.shots.iter().filter(|s| s.phase == Phase::Verify).count(), 300);
}

#[test]
fn random_bits_are_not_accepted() {
    let runs = 100;
    let mut false_accepts = 0;
    for seed in 0..runs {
        let config = SessionConfig {
            outlier: Some(OutlierProtocol {
                agreement_threshold: 1e-4,
                max_restarts: 2,
                ..OutlierProtocol::default()
            }),
            ..protocol_config(seed, 1000)
        };
        let mut bits = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let mut oracle = |_: &ControlSetting| bits.random_bool(0.5);
        let rec = run_estimation(&config, &mut oracle).unwrap();
        if !matches!(rec.status, RunStatus::Failed) {
            false_accepts += 1;
        }
        if rec.status == RunStatus::Failed {
            assert!(rec.attempts.iter().all(|a| a.end != AttemptEnd::Agreed));
        }
    }
    assert!(false_accepts * 20 < runs, "{false_accepts} of {runs} random-bit runs accepted");
}

#[test]
fn identical_seeds_give_identical_records() {
    let config = protocol_config(3, 2000);
    let truth = SystemParams { g: 0.8, omega_r: 0.4 };
    let a = run_estimation(&config, &mut SimulatedExperiment::new(truth, NoiseParams::ideal(), 3)).unwrap();
    let b = run_estimation(&config, &mut SimulatedExperiment::new(truth, NoiseParams::ideal(), 3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn restart_centres_come_from_the_original_prior() {
    let config = SessionConfig {
        outlier: Some(OutlierProtocol {
            checkpoint_shots: 20,
            verify_shots: 20,
            agreement_threshold: 1e-12,
            max_restarts: 30,
            ..OutlierProtocol::default()
        }),
        ..protocol_config(5, 500)
    };
    let truth = SystemParams { g: 1.0, omega_r: 0.0 };
    let rec = run_estimation(&config, &mut SimulatedExperiment::new(truth, NoiseParams::ideal(), 5)).unwrap();
    assert_eq!(rec.status, RunStatus::Failed);
    assert_eq!(rec.total_shots, 31 * 40);
    let original = PriorSpec::default();
    let centres: Vec<_> = rec.attempts[1..].iter().map(|a| a.search_prior).collect();
    for p in &centres {
        assert_eq!((p.sigma_g, p.sigma_omega), (original.sigma_g, original.sigma_omega));
    }
    // 30 draws of the centre: sample moments consistent with the prior
    let n = centres.len() as f64;
    let mean_g = centres.iter().map(|p| p.mu_g).sum::<f64>() / n;
    let mean_w = centres.iter().map(|p| p.mu_omega).sum::<f64>() / n;
    assert!((mean_g - 1.0).abs() < 4.0 * 0.25 / n.sqrt(), "{mean_g}");
    assert!(mean_w.abs() < 4.0 / n.sqrt(), "{mean_w}");
}
