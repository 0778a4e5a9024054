//! Iterative column-by-column imputation with pluggable learners.
//!
//! Columns are visited in ascending order of missing count. Each visit trains
//! a learner on the rows where the column is observed, using the current
//! working values of every other column, and overwrites the missing cells.
//! Passes repeat until the change between passes first grows or `max_iter`
//! is reached.
//!
//! ```
//! use treeimpute::data::{Cell, Column, ColumnKind, DataMatrix, Schema};
//! use treeimpute::imputer::{impute, LearnerSpec};
//!
//! let schema = Schema::new(vec![
//!     Column { name: "a".into(), kind: ColumnKind::Continuous },
//!     Column { name: "b".into(), kind: ColumnKind::Continuous },
//! ]).unwrap();
//! let a: Vec<Cell> = (0..20).map(|i| Cell::Real(i as f64)).collect();
//! let mut b: Vec<Cell> = (0..20).map(|i| Cell::Real(2.0 * i as f64)).collect();
//! b[3] = Cell::Missing;
//! let d = DataMatrix::new(schema, vec![a, b]).unwrap();
//! let out = impute(&d, &LearnerSpec::missforest(), 10, 7).unwrap();
//! assert!(out.data.is_complete());
//! ```

use crate::boosting::{fit_gbm, GbmParams};
use crate::data::{initial_impute, missing_order, Cell, ColumnKind, DataMatrix, Mask};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::resampling::{BandwidthRule, ResamplerKind};
use crate::rng::derive_seed;
use crate::tree::{FeatureKind, Prediction, Predictor, Response, TrainSet};

pub const DEFAULT_MAX_ITER: usize = 10;

/// Anything that can be trained on a complete table and then predict.
pub trait ColumnLearner: Send + Sync {
    fn fit(&self, ts: &TrainSet, seed: u64) -> Result<Box<dyn Predictor>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Learner {
    Forest(ForestParams),
    Boosting(GbmParams),
}

impl ColumnLearner for Learner {
    fn fit(&self, ts: &TrainSet, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            Learner::Forest(p) => Box::new(fit_forest(ts, p, seed)?),
            Learner::Boosting(p) => Box::new(fit_gbm(ts, p, seed)?),
        })
    }
}

/// Learner used for continuous columns and learner used for categorical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub continuous: Learner,
    pub categorical: Learner,
}

fn rf(kind: ResamplerKind) -> Learner {
    Learner::Forest(ForestParams::with_resampler(kind))
}

const KERNEL: ResamplerKind = ResamplerKind::KernelSmoothed(BandwidthRule::NormalScale);
const BOOTSTRAP: ResamplerKind = ResamplerKind::SimpleWithReplacement(None);

impl LearnerSpec {
    pub const PRESETS: [&'static str; 6] = ["missforest", "missboopf", "rf-strat", "rf-norm", "rf-kernel", "gbm"];

    /// Plain bootstrap forests for every column.
    pub fn missforest() -> Self {
        Self {
            continuous: rf(BOOTSTRAP),
            categorical: rf(BOOTSTRAP),
        }
    }

    /// Kernel-smoothed forests for continuous columns, boosting for
    /// categorical ones.
    pub fn missboopf() -> Self {
        Self {
            continuous: rf(KERNEL),
            categorical: Learner::Boosting(GbmParams::default()),
        }
    }

    pub fn rf_strat() -> Self {
        Self {
            continuous: rf(BOOTSTRAP),
            categorical: rf(ResamplerKind::Stratified),
        }
    }

    pub fn rf_norm() -> Self {
        Self {
            continuous: rf(ResamplerKind::NormalParametric),
            categorical: rf(BOOTSTRAP),
        }
    }

    pub fn rf_kernel() -> Self {
        Self {
            continuous: rf(KERNEL),
            categorical: rf(KERNEL),
        }
    }

    pub fn gbm() -> Self {
        Self {
            continuous: Learner::Boosting(GbmParams::default()),
            categorical: Learner::Boosting(GbmParams::default()),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "missforest" | "rf" => Self::missforest(),
            "missboopf" => Self::missboopf(),
            "rf-strat" => Self::rf_strat(),
            "rf-norm" => Self::rf_norm(),
            "rf-kernel" => Self::rf_kernel(),
            "gbm" => Self::gbm(),
            _ => return None,
        })
    }

    /// Sets the tree count of every forest learner.
    pub fn with_forest_trees(mut self, n_trees: usize) -> Self {
        for l in [&mut self.continuous, &mut self.categorical] {
            if let Learner::Forest(p) = l {
                p.n_trees = n_trees;
            }
        }
        self
    }

    /// Sets iterations and step of every boosting learner.
    pub fn with_boosting(mut self, n_iter: usize, step: f64) -> Self {
        for l in [&mut self.continuous, &mut self.categorical] {
            if let Learner::Boosting(p) = l {
                p.n_iter = n_iter;
                p.step = step;
            }
        }
        self
    }
}

/// Change between two passes over the originally missing cells.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Delta {
    pub continuous: f64,
    pub categorical: f64,
}

#[derive(Debug, Clone)]
pub struct ImputeResult {
    pub data: DataMatrix,
    /// Passes run, including a final pass that was rolled back.
    pub iterations: usize,
    pub deltas: Vec<Delta>,
    pub column_order: Vec<usize>,
    /// `(pass, column)` for every column fit, in execution order.
    pub trace: Vec<(usize, usize)>,
    /// True when a pass increased the change and the previous pass was returned.
    pub stopped_early: bool,
}

/// Pass-to-pass change on the cells `mask` marks missing:
/// `sum (next - prev)^2 / sum next^2` for continuous cells and the share of
/// changed labels for categorical ones.
pub fn delta(prev: &DataMatrix, next: &DataMatrix, mask: &Mask) -> Result<Delta> {
    if prev.schema() != next.schema()
        || prev.n_rows() != next.n_rows()
        || mask.n_rows() != prev.n_rows()
        || mask.n_cols() != prev.n_cols()
    {
        return Err(Error::ShapeMismatch("delta needs equal shapes and schemas".into()));
    }
    let (mut num, mut den, mut changed, mut cat) = (0.0, 0.0, 0usize, 0usize);
    for j in 0..prev.n_cols() {
        let categorical = prev.kind(j).is_categorical();
        for i in (0..prev.n_rows()).filter(|&i| mask.is_missing(i, j)) {
            match (prev.get(i, j), next.get(i, j)) {
                (Cell::Real(a), Cell::Real(b)) if !categorical => {
                    num += (b - a) * (b - a);
                    den += b * b;
                }
                (Cell::Level(a), Cell::Level(b)) if categorical => {
                    cat += 1;
                    changed += usize::from(a != b);
                }
                _ => return Err(Error::ShapeMismatch(format!("cell ({i}, {j}) is missing or mistyped"))),
            }
        }
    }
    Ok(Delta {
        continuous: if den > 0.0 { num / den } else { 0.0 },
        categorical: if cat > 0 { changed as f64 / cat as f64 } else { 0.0 },
    })
}

/// Imputes `d` with the learners of `spec`.
pub fn impute(d: &DataMatrix, spec: &LearnerSpec, max_iter: usize, seed: u64) -> Result<ImputeResult> {
    let (cont, cat) = (spec.continuous, spec.categorical);
    impute_with(d, &cont, &cat, max_iter, seed)
}

/// Imputes `d` with arbitrary learners for continuous and categorical columns.
pub fn impute_with(
    d: &DataMatrix,
    continuous: &dyn ColumnLearner,
    categorical: &dyn ColumnLearner,
    max_iter: usize,
    seed: u64,
) -> Result<ImputeResult> {
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let mask = d.mask();
    let order = missing_order(d);
    if d.is_complete() {
        return Ok(ImputeResult {
            data: d.clone(),
            iterations: 0,
            deltas: Vec::new(),
            column_order: order,
            trace: Vec::new(),
            stopped_early: false,
        });
    }
    let start = initial_impute(d)?;
    let kinds: Vec<FeatureKind> = d.schema().columns().iter().map(|c| FeatureKind::from(&c.kind)).collect();
    let n = d.n_rows();
    let mut work: Vec<Vec<f64>> = start
        .columns()
        .iter()
        .map(|c| c.iter().map(|v| v.as_f64().expect("complete after initial fill")).collect())
        .collect();
    let has_cont = (0..d.n_cols()).any(|j| !d.kind(j).is_categorical() && d.missing_count(j) > 0);
    let has_cat = (0..d.n_cols()).any(|j| d.kind(j).is_categorical() && d.missing_count(j) > 0);
    let active = |dl: &Delta| match (has_cont, has_cat) {
        (true, true) => dl.continuous + dl.categorical,
        (true, false) => dl.continuous,
        _ => dl.categorical,
    };

    let mut prev = work.clone();
    let mut deltas: Vec<Delta> = Vec::new();
    let mut trace = Vec::new();
    let mut stopped_early = false;
    let mut iterations = 0;
    let mut x = vec![0.0; d.n_cols().saturating_sub(1)];

    for pass in 1..=max_iter {
        iterations = pass;
        for &j in order.iter().filter(|&&j| d.missing_count(j) > 0) {
            trace.push((pass, j));
            let (obs, mis): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| !mask.is_missing(i, j));
            let others: Vec<usize> = (0..d.n_cols()).filter(|&k| k != j).collect();
            let features = others.iter().map(|&k| kinds[k]).collect();
            let columns = others
                .iter()
                .map(|&k| obs.iter().map(|&i| work[k][i]).collect())
                .collect();
            let response = match d.kind(j) {
                ColumnKind::Continuous => Response::Continuous(obs.iter().map(|&i| work[j][i]).collect()),
                kind => Response::Categorical {
                    levels: kind.n_levels(),
                    values: obs.iter().map(|&i| work[j][i] as usize).collect(),
                },
            };
            let ts = TrainSet::new(features, columns, response)?;
            let learner = if d.kind(j).is_categorical() { categorical } else { continuous };
            let model = learner.fit(&ts, derive_seed(seed, "impute", &[pass as u64, j as u64]))?;
            for &i in &mis {
                for (slot, &k) in x.iter_mut().zip(&others) {
                    *slot = work[k][i];
                }
                work[j][i] = match model.predict(&x) {
                    Prediction::Value(v) => v,
                    Prediction::Class(c) => c as f64,
                };
            }
        }
        let dl = numeric_delta(&prev, &work, &mask, d);
        let increased = deltas.last().is_some_and(|last| active(&dl) > active(last));
        deltas.push(dl);
        if increased {
            stopped_early = true;
            work = prev;
            break;
        }
        prev.clone_from(&work);
    }

    Ok(ImputeResult {
        data: to_matrix(d, &work)?,
        iterations,
        deltas,
        column_order: order,
        trace,
        stopped_early,
    })
}

fn numeric_delta(prev: &[Vec<f64>], next: &[Vec<f64>], mask: &Mask, d: &DataMatrix) -> Delta {
    let (mut num, mut den, mut changed, mut cat) = (0.0, 0.0, 0usize, 0usize);
    for j in 0..d.n_cols() {
        let categorical = d.kind(j).is_categorical();
        for i in (0..d.n_rows()).filter(|&i| mask.is_missing(i, j)) {
            let (a, b) = (prev[j][i], next[j][i]);
            if categorical {
                cat += 1;
                changed += usize::from(a != b);
            } else {
                num += (b - a) * (b - a);
                den += b * b;
            }
        }
    }
    Delta {
        continuous: if den > 0.0 { num / den } else { 0.0 },
        categorical: if cat > 0 { changed as f64 / cat as f64 } else { 0.0 },
    }
}

fn to_matrix(d: &DataMatrix, work: &[Vec<f64>]) -> Result<DataMatrix> {
    let columns = work
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let categorical = d.kind(j).is_categorical();
            col.iter()
                .map(|&v| if categorical { Cell::Level(v as usize) } else { Cell::Real(v) })
                .collect()
        })
        .collect();
    DataMatrix::new(d.schema().clone(), columns)
}
