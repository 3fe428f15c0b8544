use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparsebandit::baselines::{
    build_baseline, uniform_policy, BaselineConfig, BaselineKind, EpsilonGreedyPolicy, RidgeUcbPolicy, UniformPolicy,
};
use sparsebandit::features::{ContextSpace, CosineFamily, CountableFeatures, GaussianBumpMap};
use sparsebandit::hard_instances::build_countable_poly;
use sparsebandit::oracles::{mc_regret, rep_seeds};
use sparsebandit::protocol::NoiseSpec;
use sparsebandit::{
    run_episode, BanditInstance, ContextSlice, CountableParam, DecayProfile, Error, Features, FgtsConfig, Item,
    Policy, Prior, SparseParam,
};

fn family() -> Arc<dyn CountableFeatures<f64>> {
    Arc::new(CosineFamily::new(DecayProfile::polynomial(2.0).unwrap(), 1).unwrap())
}

fn cosine_env(truth: SparseParam<f64>, n: usize, k: usize, sigma: f64, seed: u64) -> BanditInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BanditInstance {
        name: "cosine".into(),
        schedule: (1..=n).map(|t| ContextSpace::UnitCube(1).sample_context(t, k, &mut rng).unwrap()).collect(),
        truth,
        features: Features::Countable(family()),
        noise: NoiseSpec::gaussian(sigma).unwrap(),
    }
}

#[test]
fn uniform_frequencies() {
    for k in [2usize, 4] {
        let ctx = ContextSlice::<f64>::new(1, (0..k).map(Item::Token).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut counts = vec![0usize; k];
        let n = 100_000;
        for _ in 0..n {
            counts[uniform_policy(&ctx, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / k as f64).abs() < 0.01);
        }
    }
}

#[test]
fn uniform_on_hard_instance_matches_closed_form() {
    let h = build_countable_poly::<f64>(2, 4, 2.0, 1024, None, 5).unwrap();
    let est = mc_regret(|| Ok(Box::new(UniformPolicy) as Box<dyn Policy<f64>>), &h.instance, 2048, 300, 1).unwrap();
    assert_eq!(h.spec.uniform_regret(), 48.0);
    assert!((est.mean - 48.0).abs() <= 3.0 * est.stderr, "{est:?}");
}

#[test]
fn ridge_ucb_breaks_ties_to_first_action() {
    let mut policy = RidgeUcbPolicy::new(family(), 5, 1.0, 1.0).unwrap();
    let item = Item::Point(vec![0.3]);
    let ctx = ContextSlice::new(1, vec![item.clone(), item.clone(), item]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(policy.select(&[], &ctx, &mut rng).unwrap(), 0);
}

#[test]
fn ridge_ucb_learns_noiseless_one_sparse_instance() {
    let truth = SparseParam::Countable(CountableParam::new(vec![2], vec![1.0]).unwrap());
    let mut optimal = 0;
    let mut total = 0;
    for seed in 0..20 {
        let env = cosine_env(truth.clone(), 250, 4, 0.0, seed);
        let mut policy = RidgeUcbPolicy::new(family(), 4, 1.0, 1.0).unwrap();
        let trace = run_episode(&env, &mut policy, 250, seed).unwrap();
        optimal += trace.instant[50..].iter().filter(|&&r| r < 1e-9).count();
        total += 200;
    }
    let rate = optimal as f64 / total as f64;
    assert!(rate >= 0.95, "{rate}");
}

#[test]
fn ridge_baselines_reject_parametric_features() {
    let bump = Features::parametric(GaussianBumpMap::<f64>::new(1.0, 2).unwrap());
    let fgts = FgtsConfig::new(0.25, 0.1).unwrap();
    for kind in [BaselineKind::RidgeUcb, BaselineKind::EpsilonGreedy] {
        let r = build_baseline(&BaselineConfig::new(kind), &bump, Prior::atomic(2, 4).unwrap(), 4, fgts);
        assert!(matches!(r, Err(Error::UnsupportedModel(_))));
    }
    let r = build_baseline(&BaselineConfig::new(BaselineKind::Uniform), &bump, Prior::atomic(2, 4).unwrap(), 4, fgts);
    assert_eq!(r.unwrap().name(), "uniform");
}

#[test]
fn baselines_are_deterministic_and_in_range() {
    let truth = SparseParam::Countable(CountableParam::new(vec![1, 3], vec![0.5, -0.5]).unwrap());
    let env = cosine_env(truth, 200, 3, 0.5, 9);
    let features = Features::Countable(family());
    let fgts = FgtsConfig::new(0.25, 0.1).unwrap().with_sweeps(10);
    for kind in [BaselineKind::Uniform, BaselineKind::EpsilonGreedy, BaselineKind::RidgeUcb, BaselineKind::VanillaTs] {
        let config = BaselineConfig::new(kind);
        let make = || build_baseline(&config, &features, Prior::countable(6).unwrap(), 6, fgts).unwrap();
        let a = run_episode(&env, &mut make(), 200, 3).unwrap();
        let b = run_episode(&env, &mut make(), 200, 3).unwrap();
        assert_eq!(a, b, "{kind:?}");
        assert!(a.actions.iter().all(|&x| x < 3));
    }
}

#[test]
fn epsilon_greedy_with_full_exploration_is_uniform() {
    let truth = SparseParam::Countable(CountableParam::new(vec![1], vec![0.8]).unwrap());
    let env = cosine_env(truth, 1, 4, 0.5, 1);
    let mut counts = [0usize; 4];
    for seed in rep_seeds(7, 8_000) {
        let mut p = EpsilonGreedyPolicy::new(family(), 3, 1.0, 1.0).unwrap();
        counts[run_episode(&env, &mut p, 1, seed).unwrap().actions[0]] += 1;
    }
    for c in counts {
        assert!((c as f64 / 8_000.0 - 0.25).abs() < 0.02, "{counts:?}");
    }
    assert!(EpsilonGreedyPolicy::new(family(), 3, 1.0, 1.5).is_err());
}

#[test]
fn baseline_config_bounds() {
    let mut c = BaselineConfig::new(BaselineKind::EpsilonGreedy);
    assert!(c.validate().is_ok());
    c.epsilon = -0.1;
    assert!(c.validate().is_err());
    let mut c = BaselineConfig::new(BaselineKind::RidgeUcb);
    c.alpha = 0.0;
    assert!(c.validate().is_err());
}
