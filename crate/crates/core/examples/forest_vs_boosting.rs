//! Fit a random forest and a gradient boosting machine on a noisy curve and
//! compare held-out error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeimpute::boosting::{fit_gbm, GbmParams};
use treeimpute::forest::{fit_forest, ForestParams};
use treeimpute::tree::{FeatureKind, Response, TrainSet};

fn main() -> treeimpute::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = |a: f64, b: f64| (2.0 * a).sin() + 0.5 * b * b;
    let draw = |rng: &mut ChaCha8Rng, n: usize| {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| f(a[i], b[i]) + rng.random_range(-0.3..0.3)).collect();
        (a, b, y)
    };
    let (a, b, y) = draw(&mut rng, 300);
    let ts = TrainSet::new(vec![FeatureKind::Continuous; 2], vec![a, b], Response::Continuous(y))?;
    let (ta, tb, _) = draw(&mut rng, 500);

    let forest = fit_forest(&ts, &ForestParams { n_trees: 200, ..Default::default() }, 4)?;
    let gbm = fit_gbm(&ts, &GbmParams { n_iter: 400, step: 0.05, ..Default::default() }, 4)?;
    let mse = |pred: &dyn Fn(&[f64]) -> f64| {
        (0..ta.len()).map(|i| (pred(&[ta[i], tb[i]]) - f(ta[i], tb[i])).powi(2)).sum::<f64>() / ta.len() as f64
    };
    println!("forest MSE {:.4}", mse(&|x| forest.predict(x).value().unwrap()));
    println!("   gbm MSE {:.4}", mse(&|x| gbm.predict(x).value().unwrap()));
    println!("gbm training loss {:.4} -> {:.4}", gbm.train_loss()[0], gbm.train_loss().last().unwrap());
    Ok(())
}
