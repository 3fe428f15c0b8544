use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparsebandit::hard_instances::{rho, rho_inverse, zeta, zeta_inverse};
use sparsebandit::harness::{run, ExperimentConfig};
use sparsebandit::protocol::{argmax_first, pseudo_regret_step};
use sparsebandit::sampling::{sample_l1_ball, sample_l2_ball};

fn cosine_uniform(n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"environment": {{"type": "cosine", "beta": 2.0, "k": 3, "sigma": 0.5, "support": [1, 3], "weights": [0.5, -0.5]}},
            "policy": {{"kind": "uniform"}}, "n": {n}, "seeds": [{seed}]}}"#
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regret_is_nonnegative_and_cumulative(n in 1usize..60, seed in any::<u64>()) {
        let out = run(&cosine_uniform(n, seed)).unwrap();
        let t = &out.traces[0];
        prop_assert_eq!(t.len(), n);
        let mut acc = 0.0;
        for (r, c) in t.instant.iter().zip(&t.cumulative) {
            prop_assert!(*r >= 0.0);
            acc += r;
            prop_assert!((acc - c).abs() < 1e-12);
        }
        prop_assert!(t.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn csv_round_trips(n in 1usize..40, seed in any::<u64>()) {
        let t = &run(&cosine_uniform(n, seed)).unwrap().traces[0];
        let csv = t.to_csv();
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        prop_assert_eq!(rows.len(), n);
        for (i, row) in rows.iter().enumerate() {
            prop_assert_eq!(row[0].parse::<u64>().unwrap(), seed);
            prop_assert_eq!(row[1].parse::<usize>().unwrap(), i + 1);
            prop_assert_eq!(row[2].parse::<f64>().unwrap(), t.instant[i]);
            prop_assert_eq!(row[3].parse::<f64>().unwrap(), t.cumulative[i]);
        }
    }

    #[test]
    fn rho_round_trips(i in 1usize..1_000_000, len in 1usize..500) {
        let (b, o) = rho(i, len);
        prop_assert!(b >= 1 && (1..=len).contains(&o));
        prop_assert_eq!(rho_inverse(b, o, len), i);
    }

    #[test]
    fn zeta_round_trips(k in 2usize..6, len in 1usize..7, frac in 0.0f64..1.0) {
        let max = k.pow(len as u32);
        let i = 1 + ((max - 1) as f64 * frac) as usize;
        let digits = zeta(i, k, len).unwrap();
        prop_assert_eq!(digits.len(), len);
        prop_assert!(digits.iter().all(|d| (1..=k).contains(d)));
        prop_assert_eq!(zeta_inverse(&digits, k).unwrap(), i);
        prop_assert!(zeta(max + 1, k, len).is_err());
    }

    #[test]
    fn ball_samplers_stay_inside(dim in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let w: Vec<f64> = sample_l1_ball(dim, &mut rng);
            prop_assert_eq!(w.len(), dim);
            prop_assert!(w.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 + 1e-12);
            let v: Vec<f64> = sample_l2_ball(dim, &mut rng);
            prop_assert!(v.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn argmax_is_shift_and_scale_invariant(
        values in prop::collection::vec(-1.0f64..1.0, 2..10),
        shift in -5.0f64..5.0,
        scale in 0.1f64..10.0,
    ) {
        let (i, best) = argmax_first(&values);
        prop_assert!(values.iter().all(|v| *v <= best));
        prop_assert!(values[..i].iter().all(|v| *v < best));
        // Quantised so the affine map cannot merge or split ties.
        let q: Vec<f64> = values.iter().map(|v| (v * 64.0).round() / 64.0).collect();
        let moved: Vec<f64> = q.iter().map(|v| v * scale + shift).collect();
        let (j, _) = argmax_first(&q);
        prop_assert_eq!(argmax_first(&moved).0, j);
        prop_assert_eq!(pseudo_regret_step(&q, j).unwrap(), 0.0);
        for a in 0..q.len() {
            prop_assert!(pseudo_regret_step(&q, a).unwrap() >= 0.0);
        }
    }
}
