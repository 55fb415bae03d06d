use evcharge::domain::{soc_after_charge, validate_distribution, walk_time, DiscreteDistribution, Location};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_matches_probabilities(w in weights(), seed in any::<u64>()) {
        let total: f64 = w.iter().sum();
        let pairs: Vec<(String, f64)> = w.iter().enumerate().map(|(i, x)| (format!("l{i}"), x / total)).collect();
        let d = DiscreteDistribution::new(pairs.clone()).unwrap();
        prop_assert!(validate_distribution(&d).is_ok());
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = std::collections::BTreeMap::<String, usize>::new();
        for _ in 0..n {
            *counts.entry(d.sample(&mut rng).to_string()).or_default() += 1;
        }
        for label in counts.keys() {
            prop_assert!(pairs.iter().any(|(l, _)| l == label), "foreign label {}", label);
        }
        for (label, p) in &pairs {
            let freq = *counts.get(label).unwrap_or(&0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            prop_assert!((freq - p).abs() <= 4.0 * se, "{}: {} vs {}", label, freq, p);
        }
    }
}

proptest! {
    #[test]
    fn soc_stays_in_unit_interval(soc in 0.0f64..=1.0, cap in 1.0f64..120.0, e in 0.0f64..200.0) {
        let s = soc_after_charge(soc, cap, e).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn soc_is_monotone_in_energy(soc in 0.0f64..=1.0, cap in 1.0f64..120.0, e in 0.0f64..100.0, d in 0.0f64..50.0) {
        prop_assert!(soc_after_charge(soc, cap, e + d).unwrap() >= soc_after_charge(soc, cap, e).unwrap());
    }

    #[test]
    fn walk_time_is_symmetric(ax in -20.0f64..20.0, ay in -20.0f64..20.0, bx in -20.0f64..20.0, by in -20.0f64..20.0, s in 0.5f64..10.0) {
        let a = Location::new(ax, ay, "A");
        let b = Location::new(bx, by, "B");
        prop_assert_eq!(walk_time(&a, &b, s).unwrap(), walk_time(&b, &a, s).unwrap());
    }

    #[test]
    fn walk_time_scales_inversely_with_speed(ax in -20.0f64..20.0, bx in -20.0f64..20.0, s in 0.5f64..10.0, k in 1u32..6, f in 0.1f64..10.0) {
        let a = Location::new(ax, 1.0, "A");
        let b = Location::new(bx, -2.0, "B");
        let base = walk_time(&a, &b, s).unwrap();
        // powers of two keep the division exact
        let two = f64::from(1u32 << k);
        prop_assert_eq!(walk_time(&a, &b, s * two).unwrap(), base / two);
        let t = walk_time(&a, &b, s * f).unwrap();
        prop_assert!((t - base / f).abs() <= 1e-12 * base.max(1.0));
    }
}

#[test]
fn soc_rejects_bad_arguments() {
    assert!(soc_after_charge(0.5, 40.0, -1.0).is_err());
    assert!(soc_after_charge(0.5, 0.0, 1.0).is_err());
    assert!(soc_after_charge(1.5, 40.0, 1.0).is_err());
}

#[test]
fn bad_distributions_are_rejected() {
    assert!(DiscreteDistribution::new([("a", 0.5), ("b", 0.4)]).is_err());
    assert!(DiscreteDistribution::new([("a", 1.2), ("b", -0.2)]).is_err());
    assert!(DiscreteDistribution::new(Vec::<(String, f64)>::new()).is_err());
}
