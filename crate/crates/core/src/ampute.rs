//! Artificial missingness: MCAR (exact count or per-cell Bernoulli), chained
//! logistic MAR and quantile-censoring MNAR.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{count_ceil, count_floor, DataMatrix, Mask};
use crate::error::{Error, Result};
use crate::metrics::quantile_sorted;
use crate::rng::SeededRng;

pub const LOGISTIC_MAX_NEWTON: usize = 25;
const LOGISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    /// Exactly `ceil(r n p)` cells, uniformly without replacement.
    McarExact,
    /// Every cell independently with probability `r`.
    McarBernoulli,
    Mar,
    Mnar,
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" | "mcar-exact" | "mcar_exact" => Ok(Mechanism::McarExact),
            "mcar-bernoulli" | "mcar_bernoulli" => Ok(Mechanism::McarBernoulli),
            "mar" => Ok(Mechanism::Mar),
            "mnar" => Ok(Mechanism::Mnar),
            _ => Err(Error::InvalidParameter(format!("unknown mechanism {s:?}"))),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Mechanism::McarExact => "MCAR",
            Mechanism::McarBernoulli => "MCAR-bernoulli",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmputeConfig {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Amputed {
    pub data: DataMatrix,
    pub mask: Mask,
    /// MAR only: start column followed by its successors in chain order.
    pub chain: Option<Vec<usize>>,
}

pub fn ampute(d: &DataMatrix, cfg: &AmputeConfig) -> Result<Amputed> {
    if !d.is_complete() {
        return Err(Error::InvalidParameter("amputation needs a complete matrix".into()));
    }
    let r = cfg.rate;
    let valid = match cfg.mechanism {
        Mechanism::McarBernoulli => (0.0..1.0).contains(&r),
        _ => r > 0.0 && r < 1.0,
    };
    if !valid {
        return Err(Error::InvalidParameter(format!("missing rate {r} outside (0, 1)")));
    }
    let (mask, chain) = match cfg.mechanism {
        Mechanism::McarExact => (mcar_exact(d.n_rows(), d.n_cols(), r, cfg.seed), None),
        Mechanism::McarBernoulli => (mcar_bernoulli(d.n_rows(), d.n_cols(), r, cfg.seed), None),
        Mechanism::Mar => {
            let (m, c) = mar(d, r, cfg.seed)?;
            (m, Some(c))
        }
        Mechanism::Mnar => (mnar(d, r, cfg.seed)?, None),
    };
    Ok(Amputed {
        data: d.with_mask(&mask)?,
        mask,
        chain,
    })
}

fn mcar_exact(n: usize, p: usize, r: f64, seed: u64) -> Mask {
    let mut rng = SeededRng::for_purpose(seed, "ampute-mcar", &[]);
    let total = n * p;
    let k = count_ceil(r * total as f64).min(total);
    let mut mask = Mask::empty(n, p);
    for c in rand::seq::index::sample(&mut rng, total, k) {
        mask.set(c % n, c / n, true);
    }
    mask
}

fn mcar_bernoulli(n: usize, p: usize, r: f64, seed: u64) -> Mask {
    let mut rng = SeededRng::for_purpose(seed, "ampute-mcar-bernoulli", &[]);
    let mut mask = Mask::empty(n, p);
    for j in 0..p {
        for i in 0..n {
            if rng.random_bool(r) {
                mask.set(i, j, true);
            }
        }
    }
    mask
}

fn per_column_count(n: usize, r: f64) -> Result<usize> {
    let k = count_floor(r * n as f64);
    if k == 0 {
        return Err(Error::DegenerateRate { rate: r, rows: n });
    }
    Ok(k)
}

fn numeric_column(d: &DataMatrix, j: usize) -> Vec<f64> {
    d.column(j).iter().map(|c| c.as_f64().expect("complete matrix")).collect()
}

fn mar(d: &DataMatrix, r: f64, seed: u64) -> Result<(Mask, Vec<usize>)> {
    let (n, p) = (d.n_rows(), d.n_cols());
    let k = per_column_count(n, r)?;
    let mut rng = SeededRng::for_purpose(seed, "ampute-mar", &[]);
    let mut mask = Mask::empty(n, p);

    let start = rng.random_range(0..p);
    for i in 0..n {
        if rng.random_bool(r) {
            mask.set(i, start, true);
        }
    }
    let mut rest: Vec<usize> = (0..p).filter(|&j| j != start).collect();
    rest.shuffle(&mut rng);

    let mut pred = start;
    for &s in &rest {
        let obs: Vec<usize> = (0..n).filter(|&i| !mask.is_missing(i, pred)).collect();
        if obs.len() < k {
            return Err(Error::TooFewRows { needed: k, got: obs.len() });
        }
        let labels: Vec<bool> = obs.iter().map(|_| rng.random_bool(1.0 - r)).collect();
        let col = numeric_column(d, pred);
        let x: Vec<f64> = obs.iter().map(|&i| col[i]).collect();
        let model = logistic_fit(&x, &labels, LOGISTIC_MAX_NEWTON)?;
        let mut ranked: Vec<(f64, usize)> = obs.iter().zip(&x).map(|(&i, &xi)| (model.probability(xi), i)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in &ranked[..k] {
            mask.set(i, s, true);
        }
        pred = s;
    }
    let mut chain = vec![start];
    chain.extend(rest);
    Ok((mask, chain))
}

/// Which block an MNAR anchor opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockDirection {
    Up,
    Down,
}

/// Sorted positions blanked for anchor position `anchor` (0-based) in a
/// column of `n` sorted values, block length `k`. The block is shifted
/// inward when it would run past either end.
pub fn mnar_block(n: usize, k: usize, anchor: usize, dir: BlockDirection) -> std::ops::Range<usize> {
    let start = match dir {
        BlockDirection::Up => anchor.min(n - k),
        BlockDirection::Down => anchor.max(k - 1) + 1 - k,
    };
    start..start + k
}

fn mnar(d: &DataMatrix, r: f64, seed: u64) -> Result<Mask> {
    let (n, p) = (d.n_rows(), d.n_cols());
    let k = per_column_count(n, r)?;
    let mut mask = Mask::empty(n, p);
    for j in 0..p {
        let mut rng = SeededRng::for_purpose(seed, "ampute-mnar", &[j as u64]);
        let col = numeric_column(d, j);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| col[i]).collect();
        let lo = quantile_sorted(&sorted, r);
        let hi = quantile_sorted(&sorted, 1.0 - r);
        let anchor = rng.random_range(0..n);
        let u: f64 = rng.random();
        let x = sorted[anchor];
        let dir = if x < lo {
            BlockDirection::Up
        } else if x > hi {
            BlockDirection::Down
        } else if u < 0.5 {
            BlockDirection::Up
        } else {
            BlockDirection::Down
        };
        for pos in mnar_block(n, k, anchor, dir) {
            mask.set(order[pos], j, true);
        }
    }
    Ok(mask)
}

/// Logistic regression of a binary label on one scalar covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub slope: f64,
    pub iterations: usize,
    pub converged: bool,
    /// One label class only, or classes perfectly separated by the covariate.
    pub separated: bool,
}

impl LogisticModel {
    pub fn probability(&self, x: f64) -> f64 {
        let z = self.intercept + self.slope * x;
        1.0 / (1.0 + (-z).exp())
    }
}

fn log_likelihood(a: f64, b: f64, x: &[f64], y: &[bool]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let z = a + b * xi;
            // log sigma(z) = -softplus(-z)
            let sp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
            if yi {
                -sp(-z)
            } else {
                -sp(z)
            }
        })
        .sum()
}

fn is_separated(x: &[f64], y: &[bool]) -> bool {
    let range = |want: bool| {
        x.iter()
            .zip(y)
            .filter(|(_, &l)| l == want)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    };
    let (lo0, hi0) = range(false);
    let (lo1, hi1) = range(true);
    hi0 <= lo1 || hi1 <= lo0
}

/// Maximum-likelihood fit by Newton (IRLS) steps with step halving. The
/// covariate is standardized internally. Stops when the log-likelihood
/// changes by less than 1e-8 or after `max_newton` steps.
pub fn logistic_fit(x: &[f64], y: &[bool], max_newton: usize) -> Result<LogisticModel> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch("covariate and labels differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let ones = y.iter().filter(|&&v| v).count() as f64;
    let one_class = ones == 0.0 || ones == n;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();

    if sd == 0.0 || !sd.is_finite() {
        let p = (ones / n).clamp(1e-12, 1.0 - 1e-12);
        return Ok(LogisticModel {
            intercept: (p / (1.0 - p)).ln(),
            slope: 0.0,
            iterations: 0,
            converged: !one_class,
            separated: one_class,
        });
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let (mut a, mut b) = (0.0, 0.0);
    let mut ll = log_likelihood(a, b, &z, y);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_newton {
        iterations = it + 1;
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(y) {
            let p = 1.0 / (1.0 + (-(a + b * zi)).exp());
            let r = f64::from(u8::from(yi)) - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * zi;
            h00 += w;
            h01 += w * zi;
            h11 += w * zi * zi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 1e-300) {
            break;
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;
        let mut t = 1.0;
        let mut next = log_likelihood(a + da, b + db, &z, y);
        while next < ll && t > 1e-6 {
            t *= 0.5;
            next = log_likelihood(a + t * da, b + t * db, &z, y);
        }
        a += t * da;
        b += t * db;
        let change = (next - ll).abs();
        ll = next;
        if change < LOGISTIC_TOL {
            converged = true;
            break;
        }
    }
    let slope = b / sd;
    Ok(LogisticModel {
        intercept: a - slope * mean,
        slope,
        iterations,
        converged,
        separated: one_class || is_separated(x, y),
    })
}

/// Cells of `mask` per column.
pub fn column_counts(mask: &Mask) -> Vec<usize> {
    (0..mask.n_cols()).map(|j| mask.column_count(j)).collect()
}

/// Blanks the cells of `d` marked in `mask`.
pub fn apply_mask(d: &DataMatrix, mask: &Mask) -> Result<DataMatrix> {
    d.with_mask(mask)
}
