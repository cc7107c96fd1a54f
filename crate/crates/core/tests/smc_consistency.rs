mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescoup::physics::outcome_likelihood;
use rescoup::sim::sample_outcome;
use rescoup::smc::LiuWest;
use rescoup::strategy::next_setting;
use rescoup::{ControlSetting, NoiseParams, ParticleCloud, PriorSpec, Relaxation, Resampling, StrategyParams, SystemParams};

fn random_data(rng: &mut ChaCha8Rng, shots: usize) -> Vec<(bool, ControlSetting)> {
    (0..shots)
        .map(|_| {
            let s = ControlSetting {
                omega_q: rng.random_range(-2.0..2.0),
                t: rng.random_range(0.0..8.0),
            };
            (rng.random_bool(0.5), s)
        })
        .collect()
}

fn check_against_oracle(n: usize, shots: usize, noise: NoiseParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = ParticleCloud::from_prior(&PriorSpec::default(), n, &mut rng).unwrap();
    let particles: Vec<SystemParams> = cloud.iter().map(|(p, _)| p).collect();
    let prior_weights = cloud.weights().to_vec();
    let data = random_data(&mut rng, shots);
    for (outcome, s) in &data {
        cloud.bayes_update(*outcome, s, &noise, &Resampling::Disabled, &mut rng).unwrap();
    }
    let likelihoods: Vec<Vec<f64>> = data
        .iter()
        .map(|(o, s)| particles.iter().map(|p| outcome_likelihood(*o, p, s, &noise)).collect())
        .collect();
    let expected = oracles::posterior_product(&prior_weights, &likelihoods);
    for (i, (got, want)) in cloud.weights().iter().zip(&expected).enumerate() {
        assert!((got - want).abs() < 1e-12, "particle {i}: {got} vs {want}");
    }
    assert_eq!(cloud.iter().map(|(p, _)| p).collect::<Vec<_>>(), particles);
}

#[test]
fn five_updates_match_brute_force_product() {
    check_against_oracle(20, 5, NoiseParams::ideal(), 1);
}

#[test]
fn twenty_noisy_updates_match_brute_force_product() {
    let noise = NoiseParams::new(Relaxation::T1(40.0), 0.1).unwrap();
    check_against_oracle(20, 20, noise, 2);
}

#[test]
fn prior_moments_and_determinism() {
    let prior = PriorSpec::default();
    let a = ParticleCloud::from_prior(&prior, 50_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = ParticleCloud::from_prior(&prior, 50_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    let s = a.summarize();
    let se = 0.25 / 50_000f64.sqrt();
    assert!((s.mean_g - 1.0).abs() < 3.0 * se, "{}", s.mean_g);
    assert!((s.std_g - 0.25).abs() < 0.01);
    assert!(s.mean_omega.abs() < 4.0 / 50_000f64.sqrt());
    assert!((s.std_omega - 1.0).abs() < 0.02);
}

fn weighted_cloud(seed: u64) -> ParticleCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = ParticleCloud::from_prior(&PriorSpec::default(), 1000, &mut rng).unwrap();
    let s = ControlSetting { omega_q: 0.2, t: 2.0 };
    for o in [true, false, true] {
        cloud.bayes_update(o, &s, &NoiseParams::ideal(), &Resampling::Disabled, &mut rng).unwrap();
    }
    cloud
}

#[test]
fn liu_west_preserves_first_two_moments() {
    let cloud = weighted_cloud(4);
    let before = cloud.summarize();
    let reps = 40;
    let mut mean = [0.0; 2];
    let mut cov = [[0.0; 2]; 2];
    for r in 0..reps {
        let mut c = cloud.clone();
        c.resample_liu_west(0.98, &mut ChaCha8Rng::seed_from_u64(100 + r));
        assert_eq!(c.len(), 1000);
        assert!(c.iter().all(|(p, _)| p.g > 0.0));
        let s = c.summarize();
        mean[0] += s.mean_g / reps as f64;
        mean[1] += s.mean_omega / reps as f64;
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += s.covariance[i][j] / reps as f64;
            }
        }
    }
    let se_g = before.std_g / (1000.0 * reps as f64).sqrt();
    let se_w = before.std_omega / (1000.0 * reps as f64).sqrt();
    assert!((mean[0] - before.mean_g).abs() < 5.0 * se_g);
    assert!((mean[1] - before.mean_omega).abs() < 5.0 * se_w);
    for i in 0..2 {
        let rel = (cov[i][i] - before.covariance[i][i]).abs() / before.covariance[i][i];
        assert!(rel < 0.15, "variance {i}: {rel}");
    }
}

#[test]
fn liu_west_is_deterministic() {
    let cloud = weighted_cloud(5);
    let mut a = cloud.clone();
    let mut b = cloud.clone();
    a.resample_liu_west(0.98, &mut ChaCha8Rng::seed_from_u64(9));
    b.resample_liu_west(0.98, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    assert!(a.weights().iter().all(|&w| w == 1.0 / 1000.0));
}

#[test]
fn concentrated_cloud_keeps_its_mean() {
    let particles: Vec<_> = (0..500)
        .map(|i| {
            let x = i as f64 / 500.0 - 0.5;
            (SystemParams { g: 2.0 + 1e-6 * x, omega_r: 5.0 - 1e-6 * x }, 1.0)
        })
        .collect();
    let mut cloud = ParticleCloud::from_weighted(particles).unwrap();
    let before = cloud.summarize();
    cloud.resample_liu_west(0.98, &mut ChaCha8Rng::seed_from_u64(1));
    let after = cloud.summarize();
    assert!((after.mean_g - before.mean_g).abs() < 5.0 * before.std_g / 500f64.sqrt());
    assert!((after.mean_omega - before.mean_omega).abs() < 5.0 * before.std_omega / 500f64.sqrt());
}

/// Posterior width shrinks and keeps the truth inside +-4 sigma on noiseless
/// simulated data with adaptive settings.
#[test]
fn bayesian_consistency_on_simulated_data() {
    let prior = PriorSpec::default();
    let params = StrategyParams::default();
    let resampling = Resampling::LiuWest(LiuWest::default());
    let noise = NoiseParams::ideal();
    let mut misses = 0;
    for run in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
        let truth = prior.sample(&mut rng).unwrap();
        let mut cloud = ParticleCloud::from_prior(&prior, 2000, &mut rng).unwrap();
        let mut stds = Vec::with_capacity(300);
        for shot in 1..=300 {
            let s = next_setting(&cloud.summarize(), shot, &params, &mut rng).unwrap();
            let o = sample_outcome(&truth, &s, &noise, &mut rng);
            cloud.bayes_update(o, &s, &noise, &resampling, &mut rng).unwrap();
            stds.push(cloud.summarize().std_g);
        }
        for w in stds.windows(100).step_by(50) {
            assert!(w[99] <= 2.0 * w[0], "run {run}: std_g grew from {} to {}", w[0], w[99]);
        }
        let s = cloud.summarize();
        if (s.mean_g - truth.g).abs() > 4.0 * s.std_g {
            misses += 1;
        }
    }
    // a rare run locks onto a wrong mode; the restart protocol exists for those
    assert!(misses <= 2, "{misses} of 20 runs exclude the truth");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_stay_normalized(seed in 0u64..10_000, shots in 1usize..30, resample in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = ParticleCloud::from_prior(&PriorSpec::default(), 200, &mut rng).unwrap();
        let policy = if resample { Resampling::default() } else { Resampling::Disabled };
        for (o, s) in random_data(&mut rng, shots) {
            if cloud.bayes_update(o, &s, &NoiseParams::ideal(), &policy, &mut rng).is_err() {
                break;
            }
            let sum: f64 = cloud.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(cloud.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(cloud.iter().all(|(p, _)| p.g > 0.0));
            prop_assert_eq!(cloud.len(), 200);
            let sm = cloud.summarize();
            prop_assert!(sm.ess >= 1.0 && sm.ess <= 200.0);
            prop_assert!(sm.std_g >= 0.0 && sm.std_omega >= 0.0);
            let c = sm.covariance;
            prop_assert!((c[0][1] - c[1][0]).abs() < 1e-12);
            prop_assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= -1e-9);
        }
    }
}
