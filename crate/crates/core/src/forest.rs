//! Random forests over CART trees with a pluggable per-tree resampler.

use rayon::prelude::*;

use crate::data::argmax_first;
use crate::error::{Error, Result};
use crate::resampling::{Drawn, Resampler, ResamplerKind};
use crate::rng::SeededRng;
use crate::tree::{grow, LeafValue, Prediction, Predictor, TrainSet, Tree, TreeParams};

/// Number of covariates tried at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mtry {
    /// `ceil(sqrt(p))` with `p` the number of covariates.
    #[default]
    Sqrt,
    All,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            Mtry::Sqrt => (p as f64).sqrt().ceil() as usize,
            Mtry::All => p,
            Mtry::Fixed(m) => m,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    /// `None` picks 5 for regression, 1 for classification.
    pub min_node: Option<usize>,
    pub max_depth: usize,
    pub resampler: ResamplerKind,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: Mtry::Sqrt,
            min_node: None,
            max_depth: 30,
            resampler: ResamplerKind::default(),
        }
    }
}

impl ForestParams {
    pub fn with_resampler(resampler: ResamplerKind) -> Self {
        Self {
            resampler,
            ..Self::default()
        }
    }

    pub fn tree_params(&self, ts: &TrainSet) -> TreeParams {
        let base = if ts.response().is_categorical() {
            TreeParams::classification()
        } else {
            TreeParams::regression()
        };
        TreeParams {
            mtry: Some(self.mtry.resolve(ts.n_features())),
            min_node: self.min_node.unwrap_or(base.min_node),
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_classes: Option<usize>,
    n_features: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Same trees in a different order.
    pub fn with_tree_order(&self, order: &[usize]) -> Self {
        Self {
            trees: order.iter().map(|&b| self.trees[b].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        match self.n_classes {
            None => {
                let sum: f64 = self
                    .trees
                    .iter()
                    .map(|t| t.predict(x).mean().expect("regression leaf"))
                    .sum();
                Prediction::Value(sum / self.trees.len() as f64)
            }
            Some(k) => {
                let mut votes = vec![0.0; k];
                for t in &self.trees {
                    votes[t.predict(x).class().expect("classification leaf")] += 1.0;
                }
                Prediction::Class(argmax_first(&votes).expect("at least one class"))
            }
        }
    }

    /// Per-tree predictions at `x`.
    pub fn tree_predictions(&self, x: &[f64]) -> Vec<LeafValue> {
        self.trees.iter().map(|t| t.predict(x).clone()).collect()
    }
}

impl Predictor for ForestModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        ForestModel::predict(self, x)
    }
}

/// Fits `n_trees` trees; tree `b` uses its own stream derived from `seed`,
/// so the model does not depend on thread count.
pub fn fit_forest(ts: &TrainSet, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree".into()));
    }
    let tree_params = params.tree_params(ts);
    tree_params.validate(ts.n_features())?;
    let resampler = Resampler::fit(ts, params.resampler)?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeededRng::for_purpose(seed, "forest-tree", &[b as u64]);
            match resampler.draw(ts, &mut rng) {
                Drawn::Rows(rows) => grow(&ts.grow_input(), rows, &tree_params, &mut rng),
                Drawn::Table(t) => grow(&t.grow_input(), (0..t.n_rows()).collect(), &tree_params, &mut rng),
            }
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_classes: ts.response().n_classes(),
        n_features: ts.n_features(),
    })
}

pub fn predict_forest(m: &ForestModel, x: &[f64]) -> Prediction {
    m.predict(x)
}
