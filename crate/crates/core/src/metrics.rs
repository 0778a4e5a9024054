//! Imputation error measures and the Brunner-Munzel two-sample test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{Cell, DataMatrix, Mask};
use crate::error::{Error, Result};

/// Truth, imputation and the mask that produced the missing cells.
#[derive(Debug, Clone, Copy)]
pub struct EvalTriple<'a> {
    pub truth: &'a DataMatrix,
    pub imputed: &'a DataMatrix,
    pub mask: &'a Mask,
}

impl<'a> EvalTriple<'a> {
    pub fn new(truth: &'a DataMatrix, imputed: &'a DataMatrix, mask: &'a Mask) -> Result<Self> {
        if truth.schema() != imputed.schema()
            || truth.n_rows() != imputed.n_rows()
            || mask.n_rows() != truth.n_rows()
            || mask.n_cols() != truth.n_cols()
        {
            return Err(Error::ShapeMismatch("truth, imputation and mask must share a shape".into()));
        }
        if !truth.is_complete() || !imputed.is_complete() {
            return Err(Error::ShapeMismatch("truth and imputation must be complete".into()));
        }
        Ok(Self { truth, imputed, mask })
    }
}

fn missing_rows(mask: &Mask, j: usize) -> impl Iterator<Item = usize> + '_ {
    mask.column(j).iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
}

/// Pooled normalized RMSE over the missing continuous cells. Each column is
/// centred by the mean of its true values at the missing positions.
pub fn nrmse(e: &EvalTriple) -> Result<f64> {
    let (mut num, mut den, mut count) = (0.0, 0.0, 0usize);
    for j in 0..e.truth.n_cols() {
        if e.truth.kind(j).is_categorical() {
            continue;
        }
        let rows: Vec<usize> = missing_rows(e.mask, j).collect();
        if rows.is_empty() {
            continue;
        }
        let truth: Vec<f64> = rows.iter().map(|&i| e.truth.get(i, j).as_f64().unwrap()).collect();
        let mean = truth.iter().sum::<f64>() / truth.len() as f64;
        for (&i, t) in rows.iter().zip(&truth) {
            let v = e.imputed.get(i, j).as_f64().unwrap();
            num += (v - t).powi(2);
            den += (t - mean).powi(2);
        }
        count += rows.len();
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no missing continuous cells".into()));
    }
    if den <= 0.0 {
        return Err(Error::UndefinedMetric("true values at missing cells have zero spread".into()));
    }
    Ok((num / den).sqrt())
}

/// Share of missing categorical cells imputed with the wrong level.
pub fn pfc(e: &EvalTriple) -> Result<f64> {
    let (mut wrong, mut total) = (0usize, 0usize);
    for j in 0..e.truth.n_cols() {
        if !e.truth.kind(j).is_categorical() {
            continue;
        }
        for i in missing_rows(e.mask, j) {
            total += 1;
            match (e.truth.get(i, j), e.imputed.get(i, j)) {
                (Cell::Level(a), Cell::Level(b)) => wrong += usize::from(a != b),
                _ => return Err(Error::ShapeMismatch("categorical cell without a level".into())),
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("no missing categorical cells".into()));
    }
    Ok(wrong as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Estimate of `P(A < B) + P(A = B) / 2`.
    pub relative_effect: f64,
}

/// Type-7 sample quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Midranks (average ranks for ties), 1-based.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && xs[idx[end + 1]] == xs[idx[k]] {
            end += 1;
        }
        let r = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            ranks[i] = r;
        }
        k = end + 1;
    }
    ranks
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Brunner-Munzel test with the Student-t approximation.
pub fn brunner_munzel(a: &[f64], b: &[f64], alternative: Alternative) -> Result<BmResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n1.min(n2) });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let joint: Vec<f64> = a.iter().chain(b).copied().collect();
    let rc = midranks(&joint);
    let (rc1, rc2) = rc.split_at(n1);
    let (r1, r2) = (midranks(a), midranks(b));
    let (m1, m2) = (mean(rc1), mean(rc2));
    let (f1, f2) = (n1 as f64, n2 as f64);
    let relative_effect = (rc2.iter().sum::<f64>() - f2 * (f2 + 1.0) / 2.0) / (f1 * f2);

    let spread = |rc: &[f64], r: &[f64], m: f64, n: f64| {
        let mr = (n + 1.0) / 2.0;
        rc.iter()
            .zip(r)
            .map(|(c, i)| (c - i - m + mr).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    };
    let s1 = spread(rc1, &r1, m1, f1);
    let s2 = spread(rc2, &r2, m2, f2);
    let v = f1 * s1 + f2 * s2;
    if v <= 0.0 {
        return Err(Error::DegenerateTest { relative_effect });
    }
    let statistic = f1 * f2 * (m2 - m1) / ((f1 + f2) * v.sqrt());
    let df = v * v / ((f1 * s1).powi(2) / (f1 - 1.0) + (f2 * s2).powi(2) / (f2 - 1.0));
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p_value = match alternative {
        Alternative::Less => t.sf(statistic),
        Alternative::Greater => t.cdf(statistic),
        Alternative::TwoSided => (2.0 * t.cdf(statistic).min(t.sf(statistic))).min(1.0),
    };
    Ok(BmResult {
        statistic,
        df,
        p_value,
        relative_effect,
    })
}

/// Significance code: `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnKind, Schema};

    fn one_col(kind: ColumnKind, cells: Vec<Cell>) -> DataMatrix {
        DataMatrix::new(Schema::new(vec![Column { name: "a".into(), kind }]).unwrap(), vec![cells]).unwrap()
    }

    #[test]
    fn nrmse_hand_example() {
        let truth = one_col(ColumnKind::Continuous, vec![Cell::Real(1.0), Cell::Real(3.0), Cell::Real(9.0)]);
        let imp = one_col(ColumnKind::Continuous, vec![Cell::Real(2.0), Cell::Real(2.0), Cell::Real(9.0)]);
        let mut m = Mask::empty(3, 1);
        m.set(0, 0, true);
        m.set(1, 0, true);
        let e = EvalTriple::new(&truth, &imp, &m).unwrap();
        assert_eq!(nrmse(&e).unwrap(), 1.0);
        let e = EvalTriple::new(&truth, &truth, &m).unwrap();
        assert_eq!(nrmse(&e).unwrap(), 0.0);

        let mut single = Mask::empty(3, 1);
        single.set(2, 0, true);
        let e = EvalTriple::new(&truth, &imp, &single).unwrap();
        assert!(matches!(nrmse(&e), Err(Error::UndefinedMetric(_))));
        assert!(matches!(pfc(&e), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn pfc_counts() {
        let levels = ColumnKind::Nominal(vec!["x".into(), "y".into()]);
        let truth = one_col(levels.clone(), vec![Cell::Level(0); 4]);
        let imp = one_col(levels, vec![Cell::Level(0), Cell::Level(1), Cell::Level(0), Cell::Level(0)]);
        let mut m = Mask::empty(4, 1);
        (0..4).for_each(|i| m.set(i, 0, true));
        assert_eq!(pfc(&EvalTriple::new(&truth, &imp, &m).unwrap()).unwrap(), 0.25);
        assert_eq!(pfc(&EvalTriple::new(&truth, &truth, &m).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = brunner_munzel(&a, &a, Alternative::Less).unwrap();
        assert_eq!(r.relative_effect, 0.5);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separated_samples_are_degenerate() {
        let e = brunner_munzel(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap_err();
        assert!(matches!(e, Error::DegenerateTest { relative_effect } if relative_effect == 1.0));
    }

    #[test]
    fn scipy_reference_values() {
        // scipy.stats.brunnermunzel docstring example
        let x1 = [1., 2., 1., 1., 1., 1., 1., 1., 1., 1., 2., 4., 1., 1.];
        let x2 = [3., 3., 4., 3., 1., 2., 3., 1., 1., 5., 4.];
        let r = brunner_munzel(&x1, &x2, Alternative::TwoSided).unwrap();
        assert!((r.statistic - 3.137_467_482_302_950_5).abs() < 1e-12);
        assert!((r.p_value - 0.005_786_208_666_151_537_7).abs() < 1e-10);
    }

    #[test]
    fn quantiles_type7() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-12);
        assert!((quantile_sorted(&s, 0.9) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn star_codes() {
        assert_eq!(stars(0.005), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.1), "");
    }
}
