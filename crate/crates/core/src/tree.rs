//! Binary CART trees for regression (variance) and classification (Gini).
//!
//! Covariates are numeric columns; categorical covariates carry their level
//! index. Continuous and ordinal covariates split on `x <= t`, nominal ones on
//! a level subset.

use rand::Rng;

use crate::data::{argmax_first, Cell, ColumnKind, DataMatrix};
use crate::error::{Error, Result};

/// Nominal covariates with at most this many levels present at a node get an
/// exhaustive subset search; larger ones use the ordering shortcut.
pub const EXHAUSTIVE_SUBSET_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    Ordinal { levels: usize },
    Nominal { levels: usize },
}

impl From<&ColumnKind> for FeatureKind {
    fn from(kind: &ColumnKind) -> Self {
        match kind {
            ColumnKind::Continuous => FeatureKind::Continuous,
            ColumnKind::Ordinal(l) => FeatureKind::Ordinal { levels: l.len() },
            ColumnKind::Nominal(l) => FeatureKind::Nominal { levels: l.len() },
        }
    }
}

impl FeatureKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, FeatureKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Continuous(Vec<f64>),
    Categorical { levels: usize, values: Vec<usize> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(v) => v.len(),
            Response::Categorical { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Response::Categorical { .. })
    }

    /// Number of classes, or `None` for a continuous response.
    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Response::Continuous(_) => None,
            Response::Categorical { levels, .. } => Some(*levels),
        }
    }

    /// Numeric encoding of row `i` (level index for categorical responses).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Response::Continuous(v) => v[i],
            Response::Categorical { values, .. } => values[i] as f64,
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            Response::Continuous(v) => Response::Continuous(rows.iter().map(|&i| v[i]).collect()),
            Response::Categorical { levels, values } => Response::Categorical {
                levels: *levels,
                values: rows.iter().map(|&i| values[i]).collect(),
            },
        }
    }
}

/// Complete training table: numeric covariate columns, a response and row
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    features: Vec<FeatureKind>,
    columns: Vec<Vec<f64>>,
    response: Response,
    weights: Vec<f64>,
}

impl TrainSet {
    pub fn new(features: Vec<FeatureKind>, columns: Vec<Vec<f64>>, response: Response) -> Result<Self> {
        let n = response.len();
        let weights = vec![1.0; n];
        Self::with_weights(features, columns, response, weights)
    }

    pub fn with_weights(
        features: Vec<FeatureKind>,
        columns: Vec<Vec<f64>>,
        response: Response,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        if features.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature kinds for {} columns",
                features.len(),
                columns.len()
            )));
        }
        if weights.len() != n || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite, non-negative, one per row".into()));
        }
        for (f, (kind, col)) in features.iter().zip(&columns).enumerate() {
            if col.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "feature {f} has {} rows, response has {n}",
                    col.len()
                )));
            }
            let ok = match kind {
                FeatureKind::Continuous => col.iter().all(|v| v.is_finite()),
                FeatureKind::Ordinal { levels } | FeatureKind::Nominal { levels } => col
                    .iter()
                    .all(|&v| v >= 0.0 && v.fract() == 0.0 && (v as usize) < *levels),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "feature {f} has values outside its kind {kind:?}"
                )));
            }
        }
        match &response {
            Response::Continuous(v) if v.iter().any(|y| !y.is_finite()) => {
                return Err(Error::InvalidParameter("response has non-finite values".into()))
            }
            Response::Categorical { levels, values } if values.iter().any(|&c| c >= *levels) => {
                return Err(Error::InvalidParameter("response level out of range".into()))
            }
            _ => {}
        }
        Ok(Self {
            features,
            columns,
            response,
            weights,
        })
    }

    /// Training table from a complete covariate matrix and a complete response column.
    pub fn from_data(covariates: Option<&DataMatrix>, response: &[Cell], response_kind: &ColumnKind) -> Result<Self> {
        let response = match response_kind {
            ColumnKind::Continuous => Response::Continuous(
                response
                    .iter()
                    .map(|c| match c {
                        Cell::Real(v) => Ok(*v),
                        _ => Err(Error::InvalidParameter("response must be complete and continuous".into())),
                    })
                    .collect::<Result<_>>()?,
            ),
            kind => Response::Categorical {
                levels: kind.n_levels(),
                values: response
                    .iter()
                    .map(|c| match c {
                        Cell::Level(l) => Ok(*l),
                        _ => Err(Error::InvalidParameter("response must be complete and categorical".into())),
                    })
                    .collect::<Result<_>>()?,
            },
        };
        let (features, columns) = match covariates {
            None => (Vec::new(), Vec::new()),
            Some(d) => {
                let features = d.schema().columns().iter().map(|c| FeatureKind::from(&c.kind)).collect();
                let columns = d
                    .columns()
                    .iter()
                    .map(|col| {
                        col.iter()
                            .map(|c| {
                                c.as_f64()
                                    .ok_or_else(|| Error::InvalidParameter("covariates must be complete".into()))
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<_>>()?;
                (features, columns)
            }
        };
        Self::new(features, columns, response)
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureKind] {
        &self.features
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// New table made of rows `rows` (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            response: self.response.select(rows),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Same covariates and weights with a replacement response.
    pub fn with_response(&self, response: Response) -> Result<Self> {
        Self::with_weights(self.features.clone(), self.columns.clone(), response, self.weights.clone())
    }

    pub(crate) fn from_parts_unchecked(
        features: Vec<FeatureKind>,
        columns: Vec<Vec<f64>>,
        response: Response,
        weights: Vec<f64>,
    ) -> Self {
        Self {
            features,
            columns,
            response,
            weights,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Covariates drawn per node; `None` tries all of them.
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub max_depth: usize,
}

impl TreeParams {
    pub fn regression() -> Self {
        Self {
            mtry: None,
            min_node: 5,
            max_depth: 30,
        }
    }

    pub fn classification() -> Self {
        Self {
            mtry: None,
            min_node: 1,
            max_depth: 30,
        }
    }

    /// Fully grown: one row per leaf allowed, no depth cap.
    pub fn unlimited() -> Self {
        Self {
            mtry: None,
            min_node: 1,
            max_depth: usize::MAX,
        }
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_node == 0 || self.max_depth == 0 {
            return Err(Error::InvalidParameter("min_node and max_depth must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || (n_features > 0 && m > n_features) {
                return Err(Error::InvalidParameter(format!(
                    "mtry {m} outside 1..={n_features}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeafValue {
    Mean(f64),
    Probabilities(Vec<f64>),
}

impl LeafValue {
    /// Most probable class, lowest index on ties. `None` for regression leaves.
    pub fn class(&self) -> Option<usize> {
        match self {
            LeafValue::Mean(_) => None,
            LeafValue::Probabilities(p) => argmax_first(p),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            LeafValue::Mean(v) => Some(*v),
            LeafValue::Probabilities(_) => None,
        }
    }
}

/// Where a nominal level goes at a subset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelRoute {
    Left,
    Right,
    /// Level absent from the node during training.
    Unseen,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    Threshold(f64),
    Subset(Vec<LevelRoute>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: LeafValue,
        weight: f64,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
        left_weight: f64,
        right_weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf node reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        self.leaf_by(|f| x[f])
    }

    /// Leaf reached by row `i` of column-major `columns`.
    pub(crate) fn leaf_of_row(&self, columns: &[Vec<f64>], i: usize) -> usize {
        self.leaf_by(|f| columns[f][i])
    }

    fn leaf_by(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                    left_weight,
                    right_weight,
                } => {
                    let v = x(*feature);
                    let go_left = match rule {
                        SplitRule::Threshold(t) if v.is_finite() => v <= *t,
                        SplitRule::Subset(routes) => {
                            let route = (v >= 0.0 && v.fract() == 0.0)
                                .then(|| routes.get(v as usize).copied())
                                .flatten()
                                .unwrap_or(LevelRoute::Unseen);
                            match route {
                                LevelRoute::Left => true,
                                LevelRoute::Right => false,
                                LevelRoute::Unseen => left_weight >= right_weight,
                            }
                        }
                        SplitRule::Threshold(_) => left_weight >= right_weight,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &LeafValue {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, new: LeafValue) {
        if let Node::Leaf { value, .. } = &mut self.nodes[node] {
            *value = new;
        }
    }

    /// Leaf node indices in node order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], Node::Leaf { .. }))
            .collect()
    }
}

/// Point prediction of a fitted model: a real value or a level index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Value(f64),
    Class(usize),
}

impl Prediction {
    pub fn value(self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(v),
            Prediction::Class(_) => None,
        }
    }

    pub fn class(self) -> Option<usize> {
        match self {
            Prediction::Class(c) => Some(c),
            Prediction::Value(_) => None,
        }
    }
}

/// A fitted model mapping a complete covariate row to a prediction.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;
}

pub fn predict_tree<'t>(tree: &'t Tree, x: &[f64]) -> &'t LeafValue {
    tree.predict(x)
}

/// Grows one tree on all rows of `ts`.
pub fn fit_tree<R: Rng + ?Sized>(ts: &TrainSet, params: &TreeParams, rng: &mut R) -> Result<Tree> {
    params.validate(ts.n_features())?;
    Ok(grow(&ts.grow_input(), (0..ts.n_rows()).collect(), params, rng))
}

impl TrainSet {
    pub(crate) fn grow_input(&self) -> GrowInput<'_> {
        let target = match &self.response {
            Response::Continuous(v) => Target::Real(v),
            Response::Categorical { levels, values } => Target::Class {
                levels: *levels,
                values,
            },
        };
        GrowInput {
            features: &self.features,
            columns: &self.columns,
            target,
            weights: &self.weights,
        }
    }
}

pub(crate) enum Target<'a> {
    Real(&'a [f64]),
    Class { levels: usize, values: &'a [usize] },
}

pub(crate) struct GrowInput<'a> {
    pub features: &'a [FeatureKind],
    pub columns: &'a [Vec<f64>],
    pub target: Target<'a>,
    pub weights: &'a [f64],
}

/// Grows a tree on the listed rows (repeats allowed). Parameters must already
/// be validated.
pub(crate) fn grow<R: Rng + ?Sized>(
    input: &GrowInput<'_>,
    mut rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let n_classes = match input.target {
        Target::Real(_) => 0,
        Target::Class { levels, .. } => levels,
    };
    let mut b = Builder {
        input,
        params,
        rng,
        n_classes,
        nodes: Vec::new(),
        pool: (0..input.features.len()).collect(),
        pairs: Vec::new(),
        scratch: Vec::new(),
    };
    b.build(&mut rows, 0);
    Tree { nodes: b.nodes }
}

/// Weighted sufficient statistics of a row set. Regression sums are taken
/// around `offset` to limit cancellation.
#[derive(Debug, Clone)]
struct Acc {
    n: usize,
    w: f64,
    wy: f64,
    wyy: f64,
    counts: Vec<f64>,
}

impl Acc {
    fn empty(n_classes: usize) -> Self {
        Self {
            n: 0,
            w: 0.0,
            wy: 0.0,
            wyy: 0.0,
            counts: vec![0.0; n_classes],
        }
    }

    fn clear(&mut self) {
        self.n = 0;
        self.w = 0.0;
        self.wy = 0.0;
        self.wyy = 0.0;
        self.counts.iter_mut().for_each(|c| *c = 0.0);
    }

    #[inline]
    fn add_real(&mut self, w: f64, y: f64) {
        self.n += 1;
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
    }

    #[inline]
    fn add_class(&mut self, w: f64, c: usize) {
        self.n += 1;
        self.w += w;
        self.counts[c] += w;
    }

    fn merge(&mut self, o: &Acc, sign: f64) {
        if sign > 0.0 {
            self.n += o.n;
        } else {
            self.n -= o.n;
        }
        self.w += sign * o.w;
        self.wy += sign * o.wy;
        self.wyy += sign * o.wyy;
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += sign * b;
        }
    }

    /// Weighted SSE (regression) or weighted Gini `W (1 - sum p_k^2)`.
    fn impurity(&self, classification: bool) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        if classification {
            let ss: f64 = self.counts.iter().map(|c| c * c).sum();
            (self.w - ss / self.w).max(0.0)
        } else {
            (self.wyy - self.wy * self.wy / self.w).max(0.0)
        }
    }
}

struct Candidate {
    feature: usize,
    rule: SplitRule,
    score: f64,
}

struct Builder<'a, 'b, R: Rng + ?Sized> {
    input: &'b GrowInput<'a>,
    params: &'b TreeParams,
    rng: &'b mut R,
    n_classes: usize,
    nodes: Vec<Node>,
    pool: Vec<usize>,
    pairs: Vec<(f64, usize)>,
    scratch: Vec<usize>,
}

impl<R: Rng + ?Sized> Builder<'_, '_, R> {
    fn classification(&self) -> bool {
        self.n_classes > 0
    }

    #[inline]
    fn add_row(&self, acc: &mut Acc, i: usize, offset: f64) {
        let w = self.input.weights[i];
        match self.input.target {
            Target::Real(y) => acc.add_real(w, y[i] - offset),
            Target::Class { values, .. } => acc.add_class(w, values[i]),
        }
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let (acc, offset, pure) = self.node_stats(rows);
        let leaf = self.leaf_value(&acc, offset);
        let id = self.nodes.len();
        let min_node = self.params.min_node;
        if pure
            || rows.len() < 2 * min_node
            || depth >= self.params.max_depth
            || self.input.features.is_empty()
            || acc.w <= 0.0
        {
            self.nodes.push(Node::Leaf { value: leaf, weight: acc.w });
            return id;
        }
        let parent = acc.impurity(self.classification());
        let best = self.find_split(rows, &acc, offset, parent);
        let Some(best) = best else {
            self.nodes.push(Node::Leaf { value: leaf, weight: acc.w });
            return id;
        };

        // stable partition: left rows first
        let col = &self.input.columns[best.feature];
        self.scratch.clear();
        let mut n_left = 0;
        let mut w_left = 0.0;
        for k in 0..rows.len() {
            let i = rows[k];
            if goes_left(&best.rule, col[i]) {
                rows[n_left] = i;
                n_left += 1;
                w_left += self.input.weights[i];
            } else {
                self.scratch.push(i);
            }
        }
        rows[n_left..].copy_from_slice(&self.scratch);

        self.nodes.push(Node::Split {
            feature: best.feature,
            rule: best.rule,
            left: 0,
            right: 0,
            left_weight: w_left,
            right_weight: acc.w - w_left,
        });
        let (l, r) = rows.split_at_mut(n_left);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        if let Node::Split {
            left: ln, right: rn, ..
        } = &mut self.nodes[id]
        {
            *ln = left;
            *rn = right;
        }
        id
    }

    fn node_stats(&self, rows: &[usize]) -> (Acc, f64, bool) {
        let mut acc = Acc::empty(self.n_classes);
        match self.input.target {
            Target::Real(y) => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                let (mut sw, mut swy) = (0.0, 0.0);
                for &i in rows {
                    let w = self.input.weights[i];
                    sw += w;
                    swy += w * y[i];
                    lo = lo.min(y[i]);
                    hi = hi.max(y[i]);
                }
                let offset = if sw > 0.0 { swy / sw } else { 0.0 };
                for &i in rows {
                    self.add_row(&mut acc, i, offset);
                }
                (acc, offset, lo == hi)
            }
            Target::Class { values, .. } => {
                for &i in rows {
                    self.add_row(&mut acc, i, 0.0);
                }
                let first = values[rows[0]];
                let pure = rows.iter().all(|&i| values[i] == first);
                (acc, 0.0, pure)
            }
        }
    }

    fn leaf_value(&self, acc: &Acc, offset: f64) -> LeafValue {
        if self.classification() {
            let p = if acc.w > 0.0 {
                acc.counts.iter().map(|c| c / acc.w).collect()
            } else {
                vec![1.0 / self.n_classes as f64; self.n_classes]
            };
            LeafValue::Probabilities(p)
        } else {
            LeafValue::Mean(if acc.w > 0.0 { offset + acc.wy / acc.w } else { offset })
        }
    }

    fn find_split(&mut self, rows: &[usize], total: &Acc, offset: f64, parent: f64) -> Option<Candidate> {
        let p = self.input.features.len();
        let m = self.params.mtry.unwrap_or(p).min(p);
        let mut candidates: Vec<usize> = if m >= p {
            (0..p).collect()
        } else {
            // partial Fisher-Yates over the feature pool
            self.pool.clear();
            self.pool.extend(0..p);
            for k in 0..m {
                let j = self.rng.random_range(k..p);
                self.pool.swap(k, j);
            }
            self.pool[..m].to_vec()
        };
        candidates.sort_unstable();

        let tol = 1e-12 * parent.abs().max(f64::MIN_POSITIVE);
        let mut best: Option<Candidate> = None;
        for f in candidates {
            let found = match self.input.features[f] {
                FeatureKind::Continuous => self.split_continuous(f, rows, total, offset),
                FeatureKind::Ordinal { levels } => self.split_ordinal(f, levels, rows, total, offset),
                FeatureKind::Nominal { levels } => self.split_nominal(f, levels, rows, total, offset),
            };
            if let Some((score, rule)) = found {
                let better = match &best {
                    None => true,
                    Some(b) => score < b.score - tol,
                };
                if better {
                    best = Some(Candidate { feature: f, rule, score });
                }
            }
        }
        best.filter(|b| b.score < parent - tol)
    }

    fn split_continuous(&mut self, f: usize, rows: &[usize], total: &Acc, offset: f64) -> Option<(f64, SplitRule)> {
        let col = &self.input.columns[f];
        let mut pairs = std::mem::take(&mut self.pairs);
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (col[i], i)));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let cls = self.classification();
        let min_node = self.params.min_node;
        let mut left = Acc::empty(self.n_classes);
        let mut right = total.clone();
        let mut best: Option<(f64, f64)> = None;
        for k in 0..pairs.len() - 1 {
            let i = pairs[k].1;
            let mut one = Acc::empty(0);
            match self.input.target {
                Target::Real(y) => {
                    let w = self.input.weights[i];
                    let v = y[i] - offset;
                    left.add_real(w, v);
                    one.add_real(w, v);
                    right.merge(&one, -1.0);
                }
                Target::Class { values, .. } => {
                    let w = self.input.weights[i];
                    left.add_class(w, values[i]);
                    right.n -= 1;
                    right.w -= w;
                    right.counts[values[i]] -= w;
                }
            }
            if right.n < min_node {
                break;
            }
            if left.n < min_node || pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let score = left.impurity(cls) + right.impurity(cls);
            let tol = 1e-12 * score.abs().max(f64::MIN_POSITIVE);
            if best.is_none_or(|(s, _)| score < s - tol) {
                let t = pairs[k].0 + (pairs[k + 1].0 - pairs[k].0) / 2.0;
                best = Some((score, t));
            }
        }
        self.pairs = pairs;
        best.map(|(s, t)| (s, SplitRule::Threshold(t)))
    }

    fn buckets(&self, f: usize, levels: usize, rows: &[usize], offset: f64) -> Vec<Acc> {
        let col = &self.input.columns[f];
        let mut b = vec![Acc::empty(self.n_classes); levels];
        for &i in rows {
            let l = col[i] as usize;
            self.add_row(&mut b[l], i, offset);
        }
        b
    }

    fn split_ordinal(
        &mut self,
        f: usize,
        levels: usize,
        rows: &[usize],
        total: &Acc,
        offset: f64,
    ) -> Option<(f64, SplitRule)> {
        let buckets = self.buckets(f, levels, rows, offset);
        let present: Vec<usize> = (0..levels).filter(|&l| buckets[l].n > 0).collect();
        self.sweep_prefixes(&present, &buckets, total)
            .map(|(score, k)| {
                let t = (present[k] + present[k + 1]) as f64 / 2.0;
                (score, SplitRule::Threshold(t))
            })
    }

    /// Best split of `order` into a prefix (left) and suffix; returns the
    /// score and the index of the last left element.
    fn sweep_prefixes(&self, order: &[usize], buckets: &[Acc], total: &Acc) -> Option<(f64, usize)> {
        if order.len() < 2 {
            return None;
        }
        let cls = self.classification();
        let min_node = self.params.min_node;
        let mut left = Acc::empty(self.n_classes);
        let mut right = total.clone();
        let mut best: Option<(f64, usize)> = None;
        for k in 0..order.len() - 1 {
            let b = &buckets[order[k]];
            left.merge(b, 1.0);
            right.merge(b, -1.0);
            if right.n < min_node {
                break;
            }
            if left.n < min_node {
                continue;
            }
            let score = left.impurity(cls) + right.impurity(cls);
            let tol = 1e-12 * score.abs().max(f64::MIN_POSITIVE);
            if best.is_none_or(|(s, _)| score < s - tol) {
                best = Some((score, k));
            }
        }
        best
    }

    fn split_nominal(
        &mut self,
        f: usize,
        levels: usize,
        rows: &[usize],
        total: &Acc,
        offset: f64,
    ) -> Option<(f64, SplitRule)> {
        let buckets = self.buckets(f, levels, rows, offset);
        let present: Vec<usize> = (0..levels).filter(|&l| buckets[l].n > 0).collect();
        if present.len() < 2 {
            return None;
        }
        let routes_for = |left_levels: &dyn Fn(usize) -> bool| -> Vec<LevelRoute> {
            (0..levels)
                .map(|l| {
                    if buckets[l].n == 0 {
                        LevelRoute::Unseen
                    } else if left_levels(l) {
                        LevelRoute::Left
                    } else {
                        LevelRoute::Right
                    }
                })
                .collect()
        };

        if present.len() <= EXHAUSTIVE_SUBSET_LEVELS {
            // Left sets range over subsets of all present levels but the last;
            // visiting masks in increasing order gives the tie-break.
            let cls = self.classification();
            let min_node = self.params.min_node;
            let k = present.len() - 1;
            let mut best: Option<(f64, u32)> = None;
            let mut left = Acc::empty(self.n_classes);
            let mut right = Acc::empty(self.n_classes);
            for mask in 1u32..(1u32 << k) {
                left.clear();
                for (b, &l) in present[..k].iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        left.merge(&buckets[l], 1.0);
                    }
                }
                right.clone_from(total);
                right.merge(&left, -1.0);
                if left.n < min_node || right.n < min_node {
                    continue;
                }
                let score = left.impurity(cls) + right.impurity(cls);
                let tol = 1e-12 * score.abs().max(f64::MIN_POSITIVE);
                if best.is_none_or(|(s, _)| score < s - tol) {
                    best = Some((score, mask));
                }
            }
            best.map(|(score, mask)| {
                let in_left = |l: usize| {
                    present[..k]
                        .iter()
                        .position(|&p| p == l)
                        .is_some_and(|b| mask & (1 << b) != 0)
                };
                (score, SplitRule::Subset(routes_for(&in_left)))
            })
        } else {
            // order levels by mean response, or by the share of the node's
            // majority class
            let key = |l: usize| -> f64 {
                let b = &buckets[l];
                if self.classification() {
                    let c = argmax_first(&total.counts).unwrap_or(0);
                    b.counts[c] / b.w.max(f64::MIN_POSITIVE)
                } else {
                    b.wy / b.w.max(f64::MIN_POSITIVE)
                }
            };
            let mut order = present.clone();
            order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
            self.sweep_prefixes(&order, &buckets, total).map(|(score, k)| {
                let left_set = &order[..=k];
                (score, SplitRule::Subset(routes_for(&|l| left_set.contains(&l))))
            })
        }
    }
}

fn goes_left(rule: &SplitRule, v: f64) -> bool {
    match rule {
        SplitRule::Threshold(t) => v <= *t,
        SplitRule::Subset(routes) => routes[v as usize] == LevelRoute::Left,
    }
}
