//! Stochastic gradient tree boosting with squared, Bernoulli and multinomial
//! losses. Leaf values come from one Newton step and are stored already
//! multiplied by the step size.

use crate::data::{argmax_first, count_ceil};
use crate::error::{Error, Result};
use crate::forest::Mtry;
use crate::rng::SeededRng;
use crate::tree::{grow, GrowInput, LeafValue, Prediction, Predictor, Response, Target, TrainSet, Tree, TreeParams};

/// Floor on class frequencies when forming initial log-scores.
const FREQ_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    Bernoulli,
    Multinomial,
}

impl Loss {
    /// Loss matching a response: squared, Bernoulli for two levels,
    /// multinomial otherwise.
    pub fn for_response(r: &Response) -> Self {
        match r.n_classes() {
            None => Loss::Squared,
            Some(2) => Loss::Bernoulli,
            Some(_) => Loss::Multinomial,
        }
    }

    fn check(&self, r: &Response) -> Result<()> {
        let ok = match (self, r.n_classes()) {
            (Loss::Squared, None) => true,
            (Loss::Bernoulli, Some(2)) => true,
            (Loss::Multinomial, Some(k)) => k >= 2,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Incompatible(format!("{self:?} loss does not fit this response")))
        }
    }

    /// Number of score coordinates for `k` classes.
    pub fn n_scores(&self, k: Option<usize>) -> usize {
        match self {
            Loss::Multinomial => k.unwrap_or(1),
            _ => 1,
        }
    }

    /// Loss of one row. `y` is the response value or class index; `f` the
    /// row's scores.
    pub fn value(&self, y: f64, f: &[f64]) -> f64 {
        match self {
            Loss::Squared => 0.5 * (y - f[0]).powi(2),
            Loss::Bernoulli => softplus(f[0]) - y * f[0],
            Loss::Multinomial => log_sum_exp(f) - f[y as usize],
        }
    }

    /// Negative gradient of [`Loss::value`] with respect to each score.
    pub fn pseudo_residuals(&self, y: f64, f: &[f64]) -> Vec<f64> {
        match self {
            Loss::Squared => vec![y - f[0]],
            Loss::Bernoulli => vec![y - sigmoid(f[0])],
            Loss::Multinomial => {
                let p = softmax(f);
                p.iter()
                    .enumerate()
                    .map(|(k, pk)| if k == y as usize { 1.0 - pk } else { -pk })
                    .collect()
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp(f: &[f64]) -> f64 {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + f.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(f: &[f64]) -> Vec<f64> {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub n_iter: usize,
    pub step: f64,
    pub subsample: f64,
    pub max_depth: usize,
    pub min_node: usize,
    pub mtry: Mtry,
    /// `None` picks the loss from the response.
    pub loss: Option<Loss>,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            step: 0.001,
            subsample: 0.5,
            max_depth: 4,
            min_node: 10,
            mtry: Mtry::All,
            loss: None,
        }
    }
}

impl GbmParams {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!("step {} must be positive", self.step)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample fraction {} outside (0, 1]",
                self.subsample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    loss: Loss,
    n_classes: Option<usize>,
    init: Vec<f64>,
    /// One tree per score coordinate per iteration.
    stages: Vec<Vec<Tree>>,
    train_loss: Vec<f64>,
}

impl GbmModel {
    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn initial_scores(&self) -> &[f64] {
        &self.init
    }

    pub fn stages(&self) -> &[Vec<Tree>] {
        &self.stages
    }

    /// Mean training loss after each iteration.
    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for stage in &self.stages {
            for (fk, t) in f.iter_mut().zip(stage) {
                *fk += t.predict(x).mean().expect("regression leaf");
            }
        }
        f
    }

    /// Class probabilities; `None` for a continuous response.
    pub fn predict_proba(&self, x: &[f64]) -> Option<Vec<f64>> {
        let f = self.scores(x);
        match self.loss {
            Loss::Squared => None,
            Loss::Bernoulli => {
                let p = sigmoid(f[0]);
                Some(vec![1.0 - p, p])
            }
            Loss::Multinomial => Some(softmax(&f)),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let f = self.scores(x);
        match self.loss {
            Loss::Squared => Prediction::Value(f[0]),
            Loss::Bernoulli => Prediction::Class(usize::from(f[0] > 0.0)),
            Loss::Multinomial => Prediction::Class(argmax_first(&f).expect("scores")),
        }
    }
}

impl Predictor for GbmModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        GbmModel::predict(self, x)
    }
}

fn initial_scores(loss: Loss, ts: &TrainSet) -> Vec<f64> {
    let w = ts.weights();
    let wsum: f64 = w.iter().sum();
    match (loss, ts.response()) {
        (Loss::Squared, Response::Continuous(y)) => {
            vec![y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / wsum]
        }
        (_, Response::Categorical { levels, values }) => {
            let mut freq = vec![0.0; *levels];
            for (&c, &wi) in values.iter().zip(w) {
                freq[c] += wi / wsum;
            }
            if loss == Loss::Bernoulli {
                vec![(freq[1].max(FREQ_FLOOR) / freq[0].max(FREQ_FLOOR)).ln()]
            } else {
                freq.iter().map(|p| p.max(FREQ_FLOOR).ln()).collect()
            }
        }
        _ => unreachable!("loss checked against response"),
    }
}

pub fn fit_gbm(ts: &TrainSet, params: &GbmParams, seed: u64) -> Result<GbmModel> {
    params.validate()?;
    let loss = params.loss.unwrap_or_else(|| Loss::for_response(ts.response()));
    loss.check(ts.response())?;
    let tree_params = TreeParams {
        mtry: Some(params.mtry.resolve(ts.n_features())),
        min_node: params.min_node,
        max_depth: params.max_depth,
    };
    tree_params.validate(ts.n_features())?;

    let n = ts.n_rows();
    let n_classes = ts.response().n_classes();
    let k = loss.n_scores(n_classes);
    let init = initial_scores(loss, ts);
    let y: Vec<f64> = (0..n).map(|i| ts.response().value(i)).collect();
    let weights = ts.weights();
    let wsum: f64 = weights.iter().sum();
    let sub_n = count_ceil(params.subsample * n as f64).clamp(1, n);

    // scores[i * k + c]
    let mut scores: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
    let mut residuals = vec![vec![0.0; n]; k];
    let mut rng = SeededRng::for_purpose(seed, "gbm", &[]);
    let mut stages = Vec::with_capacity(params.n_iter);
    let mut train_loss = Vec::with_capacity(params.n_iter);

    for _ in 0..params.n_iter {
        let mut rows = if sub_n == n {
            (0..n).collect::<Vec<_>>()
        } else {
            rand::seq::index::sample(&mut rng, n, sub_n).into_vec()
        };
        rows.sort_unstable();
        for &i in &rows {
            let r = loss.pseudo_residuals(y[i], &scores[i * k..(i + 1) * k]);
            for (c, rc) in r.into_iter().enumerate() {
                residuals[c][i] = rc;
            }
        }

        let mut stage = Vec::with_capacity(k);
        for resid in residuals.iter().take(k) {
            let input = GrowInput {
                features: ts.features(),
                columns: ts.columns(),
                target: Target::Real(resid),
                weights,
            };
            let mut tree = grow(&input, rows.clone(), &tree_params, &mut rng);
            newton_leaves(&mut tree, ts.columns(), &rows, resid, weights, loss, k, params.step);
            stage.push(tree);
        }

        for i in 0..n {
            for (c, t) in stage.iter().enumerate() {
                let leaf = t.leaf_of_row(ts.columns(), i);
                if let crate::tree::Node::Leaf {
                    value: LeafValue::Mean(v),
                    ..
                } = &t.nodes()[leaf]
                {
                    scores[i * k + c] += v;
                }
            }
        }
        stages.push(stage);
        let total: f64 = (0..n)
            .map(|i| weights[i] * loss.value(y[i], &scores[i * k..(i + 1) * k]))
            .sum();
        train_loss.push(total / wsum);
    }

    Ok(GbmModel {
        loss,
        n_classes,
        init,
        stages,
        train_loss,
    })
}

#[allow(clippy::too_many_arguments)]
fn newton_leaves(
    tree: &mut Tree,
    columns: &[Vec<f64>],
    rows: &[usize],
    resid: &[f64],
    weights: &[f64],
    loss: Loss,
    k: usize,
    step: f64,
) {
    let n_nodes = tree.nodes().len();
    let mut num = vec![0.0; n_nodes];
    let mut den = vec![0.0; n_nodes];
    for &i in rows {
        let leaf = tree.leaf_of_row(columns, i);
        let (r, w) = (resid[i], weights[i]);
        num[leaf] += w * r;
        den[leaf] += w
            * match loss {
                Loss::Squared => 1.0,
                // r = y - p, so p (1 - p) = |r| (1 - |r|)
                Loss::Bernoulli | Loss::Multinomial => r.abs() * (1.0 - r.abs()),
            };
    }
    let scale = match loss {
        Loss::Multinomial => (k as f64 - 1.0) / k as f64,
        _ => 1.0,
    };
    for leaf in tree.leaves() {
        let gamma = if den[leaf] > 1e-12 { scale * num[leaf] / den[leaf] } else { 0.0 };
        tree.set_leaf_value(leaf, LeafValue::Mean(step * gamma));
    }
}

pub fn predict_gbm(m: &GbmModel, x: &[f64]) -> Prediction {
    m.predict(x)
}
