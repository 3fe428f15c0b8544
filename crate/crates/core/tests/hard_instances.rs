use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparsebandit::baselines::UniformPolicy;
use sparsebandit::features::audit_decay;
use sparsebandit::fgts::FgtsConfig;
use sparsebandit::hard_instances::{
    actions_from_offsets, admissibility_threshold, build, build_countable_exp, build_countable_poly,
    build_packing, build_uncountable, delta_value, lower_bound_value, min_pairwise_distance, zeta, BuildPath,
    HardInstanceSpec, HardKind,
};
use sparsebandit::model::{eval_all_actions, eval_reward};
use sparsebandit::sampling::{l1_norm, l2_norm};
use sparsebandit::{run_episode, Error, Features, FgtsPolicy, Item, Prior, SparseParam};

#[test]
fn polynomial_example() {
    assert_eq!(admissibility_threshold(HardKind::CountablePoly, 2, 4, 2.0, 0), 1024.0);
    let h = build_countable_poly::<f64>(2, 4, 2.0, 1024, None, 3).unwrap();
    assert_eq!(h.delta, 0.0625);
    assert!(h.delta <= 8f64.powf(-1.0));
    assert_eq!(h.instance.horizon(), 2048);
    assert_eq!(h.path, BuildPath::SingleDigit);
    let SparseParam::Countable(w) = &h.instance.truth else { panic!("countable") };
    assert_eq!(w.sparsity(), 2);
    assert_eq!(l1_norm(w.weights()), 1.0);
    let ctx = &h.instance.schedule[0];
    for a in 0..4 {
        let v = eval_reward(&h.instance.truth, &h.instance.features, ctx, a).unwrap();
        assert_eq!(v, if a == h.good_actions[0] { 0.03125 } else { 0.0 });
    }
    assert!(matches!(build_countable_poly::<f64>(2, 4, 2.0, 1023, None, 3), Err(Error::InstanceTooSmall(_))));
    assert!(matches!(build_countable_poly::<f64>(2, 4, 1.0, 2048, None, 3), Err(Error::BetaOutOfRange(_))));
    assert!(matches!(
        build_countable_poly::<f64>(2, 4, 2.0, 1024, Some(vec![1]), 3),
        Err(Error::BadActionSequence(_))
    ));
    assert!(matches!(
        build_countable_poly::<f64>(2, 4, 2.0, 1024, Some(vec![1, 4]), 3),
        Err(Error::BadActionSequence(_))
    ));
}

#[test]
fn exponential_examples() {
    let t = admissibility_threshold(HardKind::CountableExp, 1, 2, 1.0, 0);
    assert!((t - 2.0 * 1f64.exp().powi(2)).abs() < 1e-12);
    let h = build_countable_exp::<f64>(1, 2, 1.0, 16, None, 0).unwrap();
    assert!((h.delta - (2.0f64 / 64.0).sqrt()).abs() < 1e-15);
    assert!(h.delta <= (-1.0f64).exp());
    assert_eq!(h.path, BuildPath::SingleDigit);

    let t = admissibility_threshold(HardKind::CountableExp, 1, 2, 0.5, 0);
    let h = build_countable_exp::<f64>(1, 2, 0.5, t.ceil() as usize, None, 0).unwrap();
    assert_eq!(h.path, BuildPath::MultiDigit);
    assert_eq!(h.good_actions.len(), 2);
    let Features::Countable(f) = &h.instance.features else { panic!("countable") };
    let tokens: Vec<Item<f64>> = (0..4).map(Item::Token).collect();
    let active = (1..20).filter(|&j| tokens.iter().any(|z| f.eval(j, z).unwrap() != 0.0)).count();
    assert_eq!(active, 4);
    assert!(matches!(build_countable_exp::<f64>(1, 2, 0.0, 100, None, 0), Err(Error::BetaOutOfRange(_))));
}

#[test]
fn uncountable_example() {
    assert_eq!(admissibility_threshold(HardKind::Uncountable, 1, 2, 0.0, 2), 8.0);
    let h = build_uncountable::<f64>(1, 2, 2, 8, None, 4).unwrap();
    assert_eq!(h.delta, 0.25);
    assert_eq!(h.instance.horizon(), 16);
    let p = h.packing.as_ref().unwrap();
    assert_eq!(p.points.len(), 4);
    assert!(p.points.iter().all(|x| l2_norm(x) <= 1.0));
    assert!(min_pairwise_distance(&p.points) > 0.25);
    assert!(p.audit(0.25));
    assert!(matches!(build_uncountable::<f64>(1, 2, 2, 7, None, 4), Err(Error::InstanceTooSmall(_))));
}

#[test]
fn packing_builder() {
    let p = build_packing(2, 16, 2, delta_value(2, 4, 512), 1).unwrap();
    assert_eq!(p.points.len(), 32);
    assert!(p.audit(delta_value(2, 4, 512)));
    // Forty points more than 0.9 apart cannot fit in the unit disc.
    assert!(matches!(build_packing(4, 10, 2, 0.9, 1), Err(Error::PackingFailed { .. })));
}

#[test]
fn lower_bound_examples() {
    assert_eq!(lower_bound_value(HardKind::CountablePoly, 2, 4, 0, 2.0, 2048).unwrap(), 16.0);
    assert_eq!(lower_bound_value(HardKind::Uncountable, 1, 2, 2, 0.0, 16).unwrap(), 1.0);
    let m = admissibility_threshold(HardKind::CountableExp, 1, 2, 0.5, 0).ceil() as usize;
    let n = 2 * m;
    let lb = lower_bound_value(HardKind::CountableExp, 1, 2, 0, 0.5, n).unwrap();
    assert!((lb - (2.0 * 2.0 * n as f64).sqrt() / 8.0).abs() < 1e-12);
    assert!(matches!(
        lower_bound_value(HardKind::CountablePoly, 2, 4, 0, 2.0, 2047),
        Err(Error::InstanceTooSmall(_))
    ));
    assert!(matches!(
        lower_bound_value(HardKind::CountablePoly, 2, 4, 0, 2.0, 1024),
        Err(Error::InstanceTooSmall(_))
    ));
}

/// Every built instance, at several sizes and all good-action choices,
/// matches `(Δ/s) 1{a = b_i}` exactly and passes its decay audit.
#[test]
fn closed_form_rewards_and_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let specs = [
        (HardKind::CountablePoly, 2, 3, 2.0, 0),
        (HardKind::CountablePoly, 1, 4, 1.5, 0),
        (HardKind::CountableExp, 2, 2, 1.0, 0),
        (HardKind::CountableExp, 2, 3, 0.5, 0),
        (HardKind::CountableExp, 1, 3, 0.3, 0),
        (HardKind::Uncountable, 2, 3, 0.0, 2),
        (HardKind::Uncountable, 2, 2, 0.0, 1),
    ];
    for (kind, s, k, beta, dim) in specs {
        let mut spec = HardInstanceSpec { kind, s, k, beta, dim, m: 1, good_actions: None };
        spec.m = spec.threshold().ceil() as usize;
        for seed in 0..6 {
            let h = build::<f64>(&spec, seed).unwrap();
            assert_eq!(actions_from_offsets(&h.omega, k, spec.block_len()).unwrap(), h.good_actions);
            for (i, &b) in h.good_actions.iter().enumerate() {
                let values = eval_all_actions(&h.instance.truth, &h.instance.features, &h.instance.schedule[i * spec.m])
                    .unwrap();
                for (a, v) in values.into_iter().enumerate() {
                    assert_eq!(v, if a == b { h.delta / s as f64 } else { 0.0 }, "{kind:?} phase {i} action {a}");
                }
            }
            if let Features::Countable(f) = &h.instance.features {
                let max_index = s * k.pow(spec.block_len() as u32) + 5;
                assert!(audit_decay(f.as_ref(), max_index, 400, &mut rng).unwrap() <= 0.0);
                assert!(h.delta <= f.decay().envelope(max_index - 5));
            }
        }
    }
}

#[test]
fn zeta_decodes_every_offset() {
    for k in 2..=3usize {
        for l in 1..=2usize {
            let mut seen = std::collections::HashSet::new();
            for i in 1..=k.pow(l as u32) {
                assert!(seen.insert(zeta(i, k, l).unwrap()));
            }
        }
    }
    assert!(matches!(zeta(10, 3, 2), Err(Error::IndexOutOfRange { .. })));
}

#[test]
fn regret_decomposes_over_phases() {
    let h = build_countable_poly::<f64>(2, 3, 2.0, 432, None, 2).unwrap();
    assert_eq!(h.spec.m, 432);
    let n = h.instance.horizon();
    let config = FgtsConfig::new(0.25, 0.05).unwrap().with_sweeps(5);
    let mut fgts = FgtsPolicy::new(h.instance.features.clone(), Prior::countable(6).unwrap(), config).unwrap();
    for trace in [
        run_episode(&h.instance, &mut UniformPolicy, n, 1).unwrap(),
        run_episode(&h.instance, &mut fgts, n, 1).unwrap(),
    ] {
        let mut per_phase = vec![0.0; h.spec.num_phases()];
        for (t, r) in trace.instant.iter().enumerate() {
            per_phase[h.phase_of_round(t + 1) - 1] += r;
        }
        assert_eq!(per_phase, trace.block_regrets(h.spec.m));
        // Same terms, different summation order.
        assert!((per_phase.iter().sum::<f64>() - trace.total()).abs() < 1e-9);
    }
}

#[test]
fn summary_and_tables() {
    let h = build_uncountable::<f64>(1, 2, 2, 8, Some(vec![1, 0]), 0).unwrap();
    let s = h.summary();
    assert_eq!(s["kind"], "uncountable");
    assert_eq!(s["lower_bound"], 1.0);
    assert_eq!(s["delta"], 0.25);
    assert_eq!(s["good_actions"], serde_json::json!([1, 0]));
    let table = h.feature_table_csv().unwrap();
    assert!(table.starts_with("block,offset,phase,action,value\n"));

    let h = build_countable_poly::<f64>(1, 2, 2.0, 8, Some(vec![1]), 0).unwrap();
    let table = h.feature_table_csv().unwrap();
    // One nonzero entry per (feature, action) pair of the single phase.
    assert_eq!(table.lines().count(), 1 + 2);
    assert_eq!(h.summary()["path"], "single_digit");
}
