mod common;

use common::oracles::{brute_force_best, impurity, random_train_set};

use proptest::prelude::*;
use rand::Rng;
use treeimpute::boosting::{fit_gbm, GbmParams, Loss};
use treeimpute::forest::{fit_forest, ForestParams, Mtry};
use treeimpute::resampling::{BandwidthRule, ResamplerKind};
use treeimpute::rng::SeededRng;
use treeimpute::tree::{fit_tree, FeatureKind, LeafValue, Node, Response, TrainSet, TreeParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn root_split_matches_brute_force(seed in any::<u64>(), n in 2usize..=12, classification in any::<bool>(), min_node in 1usize..3) {
        let ts = random_train_set(seed, n, classification);
        let params = TreeParams { mtry: None, min_node, max_depth: 1 };
        let tree = fit_tree(&ts, &params, &mut SeededRng::new(seed, 0)).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let parent = impurity(&all, ts.response());
        let best = brute_force_best(&ts, min_node);
        let tol = 1e-9 * parent.max(1.0);
        let splits = n >= 2 * min_node && best.is_some_and(|b| b < parent - tol);
        match tree.root() {
            Node::Leaf { .. } => prop_assert!(!splits, "brute force finds {best:?} below {parent}"),
            Node::Split { .. } => {
                prop_assert!(splits);
                let root_left = match tree.root() { Node::Split { left, .. } => *left, _ => unreachable!() };
                let left: Vec<usize> = (0..n).filter(|&i| tree.leaf_index(&ts.row(i)) == root_left).collect();
                let right: Vec<usize> = (0..n).filter(|i| !left.contains(i)).collect();
                let s = impurity(&left, ts.response()) + impurity(&right, ts.response());
                prop_assert!((s - best.unwrap()).abs() <= tol, "tree {s} vs brute force {best:?}");
            }
        }
    }

    #[test]
    fn unlimited_tree_memorizes(seed in any::<u64>(), n in 1usize..60, classification in any::<bool>()) {
        let mut rng = common::rng(seed);
        let x: Vec<f64> = (0..n).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let response = if classification {
            Response::Categorical { levels: 3, values: (0..n).map(|_| rng.random_range(0..3)).collect() }
        } else {
            Response::Continuous((0..n).map(|_| rng.random_range(-5.0..5.0)).collect())
        };
        let ts = TrainSet::new(vec![FeatureKind::Continuous; 2], vec![x, z], response.clone()).unwrap();
        let tree = fit_tree(&ts, &TreeParams::unlimited(), &mut SeededRng::new(seed, 1)).unwrap();
        for i in 0..n {
            match (tree.predict(&ts.row(i)), &response) {
                (LeafValue::Mean(v), Response::Continuous(y)) => prop_assert!((v - y[i]).abs() < 1e-9),
                (p @ LeafValue::Probabilities(_), Response::Categorical { values, .. }) => prop_assert_eq!(p.class(), Some(values[i])),
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn pseudo_residuals_match_finite_differences(
        f in prop::collection::vec(-4.0f64..4.0, 1..5),
        y_raw in 0usize..4,
        yc in -5.0f64..5.0,
    ) {
        let k = f.len();
        let (loss, y, f) = match k {
            1 => (Loss::Squared, yc, f),
            2 => (Loss::Bernoulli, (y_raw % 2) as f64, f[..1].to_vec()),
            _ => (Loss::Multinomial, (y_raw % k) as f64, f),
        };
        let r = loss.pseudo_residuals(y, &f);
        for c in 0..f.len() {
            let h = 1e-5;
            let (mut up, mut dn) = (f.clone(), f.clone());
            up[c] += h;
            dn[c] -= h;
            let grad = (loss.value(y, &up) - loss.value(y, &dn)) / (2.0 * h);
            let rel = (r[c] + grad).abs() / grad.abs().max(1e-3);
            prop_assert!(rel < 1e-6, "loss {loss:?} coordinate {c}: residual {} vs gradient {grad}", r[c]);
        }
    }

    #[test]
    fn full_sample_boosting_loss_never_rises(seed in any::<u64>(), n in 10usize..60, kind in 0usize..3) {
        let mut rng = common::rng(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0..3) as f64).collect();
        let response = match kind {
            0 => Response::Continuous(x.iter().map(|v| v * v + rng.random_range(-0.5..0.5)).collect()),
            1 => Response::Categorical { levels: 2, values: x.iter().map(|&v| usize::from(v + rng.random_range(-1.0..1.0) > 0.0)).collect() },
            _ => Response::Categorical { levels: 3, values: (0..n).map(|_| rng.random_range(0..3)).collect() },
        };
        let ts = TrainSet::new(vec![FeatureKind::Continuous, FeatureKind::Ordinal { levels: 3 }], vec![x, z], response).unwrap();
        let params = GbmParams { n_iter: 60, step: 0.05, subsample: 1.0, min_node: 2, max_depth: 3, ..GbmParams::default() };
        let m = fit_gbm(&ts, &params, seed).unwrap();
        let loss = m.train_loss();
        prop_assert_eq!(loss.len(), 60);
        for w in loss.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn forest_is_identical_across_thread_counts() {
    let mut rng = common::rng(11);
    let n = 120;
    let x: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..n).map(|i| x[0][i] * 2.0 + x[1][i]).collect();
    let classes: Vec<usize> = (0..n).map(|i| usize::from(x[2][i] > 0.0) + usize::from(x[3][i] > 0.5)).collect();
    let cont = TrainSet::new(vec![FeatureKind::Continuous; 4], x.clone(), Response::Continuous(y)).unwrap();
    let cat = TrainSet::new(vec![FeatureKind::Continuous; 4], x, Response::Categorical { levels: 3, values: classes }).unwrap();
    let kinds = [
        ResamplerKind::SimpleWithReplacement(None),
        ResamplerKind::SimpleWithoutReplacement(None),
        ResamplerKind::NormalParametric,
        ResamplerKind::KernelSmoothed(BandwidthRule::NormalScale),
    ];
    let run = |threads: usize, ts: &TrainSet, kind: ResamplerKind| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let params = ForestParams { n_trees: 24, mtry: Mtry::Sqrt, ..ForestParams::with_resampler(kind) };
        pool.install(|| fit_forest(ts, &params, 99).unwrap())
    };
    for kind in kinds {
        assert_eq!(run(1, &cont, kind), run(8, &cont, kind), "{kind:?}");
    }
    for kind in [ResamplerKind::Stratified, ResamplerKind::SimpleWithReplacement(None)] {
        assert_eq!(run(1, &cat, kind), run(8, &cat, kind), "{kind:?}");
    }
}
