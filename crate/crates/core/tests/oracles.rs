use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsebandit::baselines::UniformPolicy;
use sparsebandit::features::{ContextSpace, CosineFamily};
use sparsebandit::hard_instances::build_countable_poly;
use sparsebandit::model::{eval_all_actions, eval_best, eval_reward};
use sparsebandit::oracles::{
    enumerate_posterior, grid_prior, mc_regret, normalize_log, toy_features, toy_history, tv_distance, CellMass,
    GridSpec, GRID_ATOM_BUDGET,
};
use sparsebandit::protocol::{argmax_first, NoiseSpec};
use sparsebandit::{
    BanditInstance, ContextSlice, CountableParam, DecayProfile, Error, Features, HistoryRecord, Item, Policy, Result,
    SparseParam,
};

#[test]
fn empty_history_gives_the_grid_prior() {
    for cell_mass in [CellMass::Exact, CellMass::Equal] {
        let grid = GridSpec::new(2, 11).unwrap().with_cell_mass(cell_mass);
        let dist = enumerate_posterior(&grid, &[], 0.25, 0.5, &toy_features()).unwrap();
        let (_, log_prior) = grid_prior(&grid).unwrap();
        let prior = normalize_log(&log_prior);
        assert!(tv_distance(&dist.masses, &prior).unwrap() < 1e-14);
    }
}

#[test]
fn subset_masses_are_exact() {
    // Sizes 1 and 2 on [2]: masses 1/3 per singleton, 1/3 for the pair.
    let grid = GridSpec::new(2, 21).unwrap();
    let dist = enumerate_posterior(&grid, &[], 0.25, 0.0, &toy_features()).unwrap();
    for support in [vec![1], vec![2], vec![1, 2]] {
        let mass: f64 =
            dist.keys.iter().zip(&dist.masses).filter(|(k, _)| k.support == support).map(|(_, m)| m).sum();
        assert!((mass - 1.0 / 3.0).abs() < 1e-12, "{support:?}: {mass}");
    }
}

#[test]
fn masses_sum_to_one() {
    for (d, points, seed) in [(1, 41, 1), (2, 21, 2), (3, 11, 3)] {
        let grid = GridSpec::new(d, points).unwrap();
        let history = toy_history(8, 3, seed).unwrap();
        let dist = enumerate_posterior(&grid, &history, 0.25, 0.3, &toy_features()).unwrap();
        assert!((dist.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(dist.atoms.iter().all(|a| a.weights().iter().map(|w| w.abs()).sum::<f64>() <= 1.0));
    }
}

#[test]
fn sharp_likelihood_concentrates_on_the_fitting_atom() {
    // Grid step 1: atoms ±1 on either feature. Only w = 1 on feature 1 fits
    // the record; the next best misses by 1/2.
    let grid = GridSpec::new(2, 3).unwrap();
    let features = toy_features();
    let truth = SparseParam::Countable(CountableParam::new(vec![1], vec![1.0]).unwrap());
    let ctx = ContextSlice::new(1, vec![Item::Point(vec![0.0]), Item::Point(vec![0.5])]).unwrap();
    let y = eval_reward(&truth, &features, &ctx, 0).unwrap();
    let rec = HistoryRecord::new(ctx, 0, y).unwrap();
    let dist = enumerate_posterior(&grid, &[rec], 50.0, 0.0, &features).unwrap();
    let (top, mass) = argmax_first(&dist.masses);
    assert_eq!(dist.atoms[top], truth);
    assert!(mass > 0.99, "{mass}");
}

#[test]
fn feel_good_weight_tilts_toward_large_best_values() {
    let grid = GridSpec::new(2, 21).unwrap();
    let features = toy_features();
    let history = toy_history(5, 3, 17).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for lambda in [0.0, 0.5, 1.0] {
        let dist = enumerate_posterior(&grid, &history, 0.25, lambda, &features).unwrap();
        let mean = dist.expect(|nu| history.iter().map(|r| eval_best(nu, &features, &r.context).unwrap().1).sum());
        assert!(mean >= prev, "λ = {lambda}: {mean} < {prev}");
        prev = mean;
    }
}

#[test]
fn grid_guards() {
    assert!(GridSpec::new(4, 5).is_err());
    assert!(GridSpec::new(2, 4).is_err());
    let huge = GridSpec::new(3, 201).unwrap();
    assert!(matches!(grid_prior(&huge), Err(Error::GridTooLarge { budget: GRID_ATOM_BUDGET, .. })));
}

#[test]
fn tv_examples() {
    assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
    assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
    assert!(matches!(tv_distance(&[1.0], &[0.5, 0.5]), Err(Error::SupportMismatch(1, 2))));
}

/// Knows the truth and always plays its best action.
struct Oracle {
    truth: SparseParam<f64>,
    features: Features<f64>,
}

impl Policy<f64> for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn select(&mut self, _: &[HistoryRecord<f64>], ctx: &ContextSlice<f64>, _: &mut dyn RngCore) -> Result<usize> {
        Ok(argmax_first(&eval_all_actions(&self.truth, &self.features, ctx)?).0)
    }
}

fn cosine_env(n: usize, sigma: f64, seed: u64) -> BanditInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BanditInstance {
        name: "cosine".into(),
        schedule: (1..=n).map(|t| ContextSpace::UnitCube(1).sample_context(t, 3, &mut rng).unwrap()).collect(),
        truth: SparseParam::Countable(CountableParam::new(vec![1, 3], vec![0.5, -0.5]).unwrap()),
        features: Features::countable(CosineFamily::new(DecayProfile::polynomial(2.0).unwrap(), 1).unwrap()),
        noise: NoiseSpec::gaussian(sigma).unwrap(),
    }
}

#[test]
fn mc_regret_trivial_cases() {
    let mut env = cosine_env(100, 0.5, 1);
    let zero_gap = {
        let mut e = env.clone();
        for (t, ctx) in e.schedule.iter_mut().enumerate() {
            let item = ctx.items()[0].clone();
            *ctx = ContextSlice::new(t + 1, vec![item.clone(), item.clone(), item]).unwrap();
        }
        e
    };
    let est = mc_regret(|| Ok(Box::new(UniformPolicy) as Box<dyn Policy<f64>>), &zero_gap, 100, 20, 3).unwrap();
    assert_eq!((est.mean, est.stderr), (0.0, 0.0));

    env.noise = NoiseSpec::gaussian(0.0).unwrap();
    let (truth, features) = (env.truth.clone(), env.features.clone());
    let make = || Ok(Box::new(Oracle { truth: truth.clone(), features: features.clone() }) as Box<dyn Policy<f64>>);
    let est = mc_regret(make, &env, 100, 20, 3).unwrap();
    assert_eq!((est.mean, est.stderr), (0.0, 0.0));

    assert!(mc_regret(|| Ok(Box::new(UniformPolicy) as Box<dyn Policy<f64>>), &env, 10, 1, 0).is_err());
}

#[test]
fn mc_regret_is_reproducible() {
    let env = cosine_env(200, 0.5, 2);
    let run = |seed| mc_regret(|| Ok(Box::new(UniformPolicy) as Box<dyn Policy<f64>>), &env, 200, 64, seed).unwrap();
    let (a, b) = (run(5), run(5));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    assert_ne!(a.mean, run(6).mean);
}

#[test]
fn mc_regret_uniform_on_hard_instance() {
    let h = build_countable_poly::<f64>(2, 4, 2.0, 1024, None, 1).unwrap();
    let est = mc_regret(|| Ok(Box::new(UniformPolicy) as Box<dyn Policy<f64>>), &h.instance, 2048, 1000, 9).unwrap();
    assert!((est.mean - 48.0).abs() <= 3.0 * est.stderr, "{est:?}");
    assert!(est.stderr < 0.5);
}
