use rand::Rng;
use statrs::distribution::{Continuous, Normal};
use treeimpute::tree::{FeatureKind, Response, TrainSet};

pub fn impurity(rows: &[usize], resp: &Response) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let n = rows.len() as f64;
    match resp {
        Response::Continuous(y) => {
            let m = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
            rows.iter().map(|&i| (y[i] - m).powi(2)).sum()
        }
        Response::Categorical { levels, values } => {
            let mut c = vec![0.0; *levels];
            for &i in rows {
                c[values[i]] += 1.0;
            }
            n - c.iter().map(|x| x * x).sum::<f64>() / n
        }
    }
}

/// Lowest child impurity over every binary partition a feature can induce.
pub fn brute_force_best(ts: &TrainSet, min_node: usize) -> Option<f64> {
    let n = ts.n_rows();
    let mut best: Option<f64> = None;
    let mut consider = |left: Vec<usize>| {
        let right: Vec<usize> = (0..n).filter(|i| !left.contains(i)).collect();
        if left.len() < min_node || right.len() < min_node {
            return;
        }
        let s = impurity(&left, ts.response()) + impurity(&right, ts.response());
        if best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    };
    for (f, kind) in ts.features().iter().enumerate() {
        let col = &ts.columns()[f];
        let mut vals: Vec<f64> = col.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        match kind {
            FeatureKind::Nominal { .. } => {
                for m in 1u32..(1 << vals.len()) - 1 {
                    let set: Vec<f64> = vals.iter().enumerate().filter(|(b, _)| m & (1 << b) != 0).map(|(_, v)| *v).collect();
                    consider((0..n).filter(|&i| set.contains(&col[i])).collect());
                }
            }
            _ => {
                for t in &vals[..vals.len().saturating_sub(1)] {
                    consider((0..n).filter(|&i| col[i] <= *t).collect());
                }
            }
        }
    }
    best
}

pub fn random_train_set(seed: u64, n: usize, classification: bool) -> TrainSet {
    let mut rng = super::rng(seed);
    let features = vec![
        FeatureKind::Continuous,
        FeatureKind::Ordinal { levels: 4 },
        FeatureKind::Nominal { levels: 4 },
    ];
    let columns = vec![
        (0..n).map(|_| (rng.random_range(0..6) as f64) * 0.5).collect(),
        (0..n).map(|_| rng.random_range(0..4) as f64).collect(),
        (0..n).map(|_| rng.random_range(0..4) as f64).collect(),
    ];
    let response = if classification {
        Response::Categorical {
            levels: 3,
            values: (0..n).map(|_| rng.random_range(0..3)).collect(),
        }
    } else {
        Response::Continuous((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
    };
    TrainSet::new(features, columns, response).unwrap()
}

/// `P(A < B) + P(A = B) / 2` by counting all pairs.
pub fn pairwise_effect(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in a {
        for &y in b {
            s += if x < y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (a.len() * b.len()) as f64
}

/// CDF of the kernel mixture by Simpson integration of its density.
pub fn mixture_cdf_numeric(points: &[f64], h: f64, t: f64) -> f64 {
    let sd = h.sqrt();
    let std = Normal::new(0.0, 1.0).unwrap();
    let dens = |x: f64| points.iter().map(|p| std.pdf((x - p) / sd) / sd).sum::<f64>() / points.len() as f64;
    let lo = points.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * sd;
    if t <= lo {
        return 0.0;
    }
    let m = 4000;
    let step = (t - lo) / m as f64;
    let mut s = dens(lo) + dens(t);
    for k in 1..m {
        s += dens(lo + k as f64 * step) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0
}

