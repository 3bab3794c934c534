use paranoia_core::risk::{cvar_discrete, evar_discrete, paradox_threshold, trust_factor};
use paranoia_core::DiscreteDistribution;
use paranoia_core::Game;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn random_dist(rng: &mut ChaCha8Rng) -> DiscreteDistribution {
    let n = rng.random_range(3..=8);
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    DiscreteDistribution::new(w.iter().map(|&wi| (rng.random_range(-1.0..1.0), wi / s)).collect()).unwrap()
}

#[test]
fn dominance_chain_on_random_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let d = random_dist(&mut rng);
        let level = rng.random_range(0.01..0.99);
        let cvar = cvar_discrete(&d, level).unwrap();
        let evar = evar_discrete(&d, level).unwrap();
        assert!(-d.mean() <= cvar + TOL, "mean {} cvar {cvar}", -d.mean());
        assert!(cvar <= evar + TOL, "cvar {cvar} evar {evar} at {level}: {d:?}");
        assert!(evar <= d.worst_loss() + TOL);
    }
}

#[test]
fn evar_coherence_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let d = random_dist(&mut rng);
        let beta = rng.random_range(0.01..0.99);
        let base = evar_discrete(&d, beta).unwrap();

        // monotone: a pointwise larger return has a smaller risk
        let bumps: Vec<f64> = d.outcomes().iter().map(|_| rng.random_range(0.0..0.5)).collect();
        let larger =
            DiscreteDistribution::new(d.outcomes().iter().zip(&bumps).map(|(&(x, p), b)| (x + b, p)).collect())
                .unwrap();
        assert!(evar_discrete(&larger, beta).unwrap() <= base + TOL);

        let c = rng.random_range(-3.0..3.0);
        let shifted = evar_discrete(&d.map(|x| x + c), beta).unwrap();
        assert!(
            (shifted - (base - c)).abs() <= TOL,
            "translation {shifted} vs {}",
            base - c
        );

        let lambda = rng.random_range(0.1..10.0);
        let scaled = evar_discrete(&d.map(|x| lambda * x), beta).unwrap();
        assert!(
            (scaled - lambda * base).abs() <= TOL * lambda.max(1.0),
            "homogeneity {scaled} vs {}",
            lambda * base
        );
    }
}

#[test]
fn evar_level_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let d = random_dist(&mut rng);
        let low = evar_discrete(&d, 1e-18).unwrap();
        assert!((low + d.mean()).abs() <= TOL, "{low} vs {}", -d.mean());
        let high = evar_discrete(&d, 1.0 - 1e-12).unwrap();
        assert!((high - d.worst_loss()).abs() <= TOL);
    }
}

#[test]
fn evar_low_level_limit_on_wide_outcomes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let scale = rng.random_range(1.0..100.0);
        let d = random_dist(&mut rng).map(|x| scale * x);
        let low = evar_discrete(&d, 1e-18).unwrap();
        assert!((low + d.mean()).abs() <= TOL * scale, "{low} vs {}", -d.mean());
    }
}

#[test]
fn evar_increases_with_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let d = random_dist(&mut rng);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let v = evar_discrete(&d, k as f64 / 20.0).unwrap();
            assert!(v >= prev - TOL);
            prev = v;
        }
    }
}

fn arb_game() -> impl Strategy<Value = Game> {
    (-10.0..10.0f64, 0.01..10.0f64, 0.01..10.0f64)
        .prop_map(|(r_s, a, b)| Game::new("g", r_s + a + b, r_s + a, r_s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn paradox_ordering(g in arb_game()) {
        let p = g.critical_threshold();
        for beta in [0.1, 0.5, 1.0] {
            prop_assert!(paradox_threshold(&g, beta).unwrap() > p);
            prop_assert!(p > g.predicted_basin_threshold(beta).unwrap());
        }
    }

    #[test]
    fn trust_factor_decreasing(s in 1e-3..0.25f64, b in 0.0..20.0f64, ds in 1e-3..0.1f64, db in 1e-3..5.0f64) {
        let s2 = (s + ds).min(0.25);
        if s2 > s {
            prop_assert!(trust_factor(s2, b + db).unwrap() < trust_factor(s, b + db).unwrap());
        }
        prop_assert!(trust_factor(s, b + db).unwrap() < trust_factor(s, b).unwrap());
        let t = trust_factor(s, -b.min(3.9)).unwrap();
        prop_assert!(t >= 1.0);
    }
}
