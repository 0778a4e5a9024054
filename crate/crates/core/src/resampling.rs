//! Per-tree training-set generators: plain bootstrap, subsampling,
//! stratified bootstrap, multivariate normal draws and smoothed bootstrap.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{chol_or_sqrt, empirical_moments, MvNormal, SpdMatrix};
use crate::tree::{FeatureKind, Response, TrainSet};

/// Fraction of rows kept by the default without-replacement subsample.
pub const SUBSAMPLE_FRACTION: f64 = 0.632;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthRule {
    #[default]
    NormalScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplerKind {
    /// `N` uniform draws with replacement; `None` means `N = n`.
    SimpleWithReplacement(Option<usize>),
    /// `N` distinct rows; `None` means `round(0.632 n)`, at least 2.
    SimpleWithoutReplacement(Option<usize>),
    Stratified,
    NormalParametric,
    KernelSmoothed(BandwidthRule),
}

impl Default for ResamplerKind {
    fn default() -> Self {
        ResamplerKind::SimpleWithReplacement(None)
    }
}

/// Kernel bandwidth matrix over the continuous coordinates.
#[derive(Debug, Clone)]
pub struct Bandwidth {
    pub h: SpdMatrix,
}

/// Normal scale rule `(4 / (n (d + 2)))^(2 / (d + 4)) * Sigma` on `rows`.
pub fn normal_scale_bandwidth(rows: &[Vec<f64>]) -> Result<Bandwidth> {
    let (_, sigma) = empirical_moments(rows)?;
    Ok(Bandwidth {
        h: normal_scale_from_cov(&sigma, rows.len()),
    })
}

pub fn normal_scale_factor(n: usize, d: usize) -> f64 {
    let (n, d) = (n as f64, d as f64);
    (4.0 / (n * (d + 2.0))).powf(2.0 / (d + 4.0))
}

fn normal_scale_from_cov(sigma: &SpdMatrix, n: usize) -> SpdMatrix {
    sigma.scaled(normal_scale_factor(n, sigma.dim()))
}

/// Smoothed bootstrap from a Gaussian-kernel density estimate: pick a point
/// uniformly, add `N(0, H)` noise.
#[derive(Debug, Clone)]
pub struct KernelSampler {
    points: Vec<Vec<f64>>,
    bandwidth: SpdMatrix,
    factor: DMatrix<f64>,
}

impl KernelSampler {
    /// Sampler over all-continuous points with the normal scale bandwidth.
    pub fn from_rows(points: Vec<Vec<f64>>) -> Result<Self> {
        let bw = normal_scale_bandwidth(&points)?;
        Self::with_bandwidth(points, bw.h)
    }

    pub fn with_bandwidth(points: Vec<Vec<f64>>, bandwidth: SpdMatrix) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        if points.iter().any(|p| p.len() != bandwidth.dim()) {
            return Err(Error::ShapeMismatch("point dimension differs from bandwidth".into()));
        }
        let factor = chol_or_sqrt(&bandwidth).map_err(|e| Error::DegenerateBandwidth(e.to_string()))?;
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateBandwidth("non-finite bandwidth".into()));
        }
        Ok(Self {
            points,
            bandwidth,
            factor,
        })
    }

    pub fn bandwidth(&self) -> &SpdMatrix {
        &self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.bandwidth.dim()
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Deterministic draw: point `pick` shifted by `H^(1/2) z`.
    pub fn draw_with(&self, pick: usize, z: &[f64]) -> Vec<f64> {
        let mut out = self.points[pick].clone();
        self.add_noise(&mut out, z);
        out
    }

    fn add_noise(&self, out: &mut [f64], z: &[f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o += (0..d).map(|k| self.factor[(i, k)] * z[k]).sum::<f64>();
        }
    }

    /// Draws `count` points; all picks are drawn before any noise.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..self.points.len())).collect();
        let d = self.dim();
        let mut z = vec![0.0; d];
        picks
            .into_iter()
            .map(|p| {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                self.draw_with(p, &z)
            })
            .collect()
    }
}

/// Result of one draw: either row indices into the source table or a new
/// synthetic table.
#[derive(Debug, Clone)]
pub enum Drawn {
    Rows(Vec<usize>),
    Table(TrainSet),
}

impl Drawn {
    pub fn into_train_set(self, source: &TrainSet) -> TrainSet {
        match self {
            Drawn::Rows(rows) => source.select_rows(&rows),
            Drawn::Table(t) => t,
        }
    }
}

/// A resampler prepared for one source table. Fitting the kernel bandwidth or
/// the normal model happens once here; draws are then cheap.
#[derive(Debug, Clone)]
pub struct Resampler {
    kind: ResamplerKind,
    state: State,
}

#[derive(Debug, Clone)]
enum State {
    Plain,
    Strata(Vec<Vec<usize>>),
    Normal(MvNormal),
    Kernel {
        /// Smoothed coordinates of the joint table.
        coords: Vec<Coord>,
        sampler: Option<KernelSampler>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Feature(usize),
    Response,
}

fn joint_row(ts: &TrainSet, coords: &[Coord], i: usize) -> Vec<f64> {
    coords
        .iter()
        .map(|c| match c {
            Coord::Feature(f) => ts.columns()[*f][i],
            Coord::Response => ts.response().value(i),
        })
        .collect()
}

impl Resampler {
    pub fn fit(ts: &TrainSet, kind: ResamplerKind) -> Result<Self> {
        let n = ts.n_rows();
        let state = match kind {
            ResamplerKind::SimpleWithReplacement(size) | ResamplerKind::SimpleWithoutReplacement(size) => {
                if let Some(s) = size {
                    if s == 0 || s > n {
                        return Err(Error::InvalidParameter(format!("resample size {s} outside 1..={n}")));
                    }
                }
                State::Plain
            }
            ResamplerKind::Stratified => match ts.response() {
                Response::Categorical { levels, values } => {
                    let mut strata = vec![Vec::new(); *levels];
                    for (i, &c) in values.iter().enumerate() {
                        strata[c].push(i);
                    }
                    State::Strata(strata)
                }
                Response::Continuous(_) => {
                    return Err(Error::Incompatible(
                        "stratified resampling needs a categorical response".into(),
                    ))
                }
            },
            ResamplerKind::NormalParametric => {
                if ts.response().is_categorical() || !ts.features().iter().all(FeatureKind::is_continuous) {
                    return Err(Error::Incompatible(
                        "normal-parametric resampling needs all columns continuous".into(),
                    ));
                }
                let coords = all_coords(ts, true);
                let rows: Vec<Vec<f64>> = (0..n).map(|i| joint_row(ts, &coords, i)).collect();
                let (mean, sigma) = empirical_moments(&rows)?;
                State::Normal(MvNormal::new(mean, &sigma)?)
            }
            ResamplerKind::KernelSmoothed(BandwidthRule::NormalScale) => {
                let coords = all_coords(ts, false);
                let sampler = if coords.is_empty() {
                    None
                } else {
                    let rows: Vec<Vec<f64>> = (0..n).map(|i| joint_row(ts, &coords, i)).collect();
                    Some(if n < 2 {
                        KernelSampler::with_bandwidth(rows, SpdMatrix::zeros(coords.len()))?
                    } else {
                        KernelSampler::from_rows(rows)?
                    })
                };
                State::Kernel { coords, sampler }
            }
        };
        Ok(Self { kind, state })
    }

    pub fn kind(&self) -> ResamplerKind {
        self.kind
    }

    /// Bandwidth of a fitted kernel resampler.
    pub fn bandwidth(&self) -> Option<&SpdMatrix> {
        match &self.state {
            State::Kernel { sampler: Some(s), .. } => Some(s.bandwidth()),
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, ts: &TrainSet, rng: &mut R) -> Drawn {
        let n = ts.n_rows();
        match (&self.state, self.kind) {
            (State::Plain, ResamplerKind::SimpleWithReplacement(size)) => {
                Drawn::Rows((0..size.unwrap_or(n)).map(|_| rng.random_range(0..n)).collect())
            }
            (State::Plain, ResamplerKind::SimpleWithoutReplacement(size)) => {
                let size = size.unwrap_or_else(|| default_subsample_size(n));
                Drawn::Rows(rand::seq::index::sample(rng, n, size).into_vec())
            }
            (State::Strata(strata), _) => {
                let mut rows = Vec::with_capacity(n);
                for s in strata.iter().filter(|s| !s.is_empty()) {
                    rows.extend((0..s.len()).map(|_| s[rng.random_range(0..s.len())]));
                }
                Drawn::Rows(rows)
            }
            (State::Normal(mvn), _) => {
                let draws: Vec<Vec<f64>> = (0..n).map(|_| mvn.sample(rng)).collect();
                let p = ts.n_features();
                let columns = (0..p).map(|f| draws.iter().map(|r| r[f]).collect()).collect();
                let response = Response::Continuous(draws.iter().map(|r| r[p]).collect());
                Drawn::Table(TrainSet::from_parts_unchecked(
                    ts.features().to_vec(),
                    columns,
                    response,
                    vec![1.0; n],
                ))
            }
            (State::Kernel { coords, sampler }, _) => {
                let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let Some(sampler) = sampler else {
                    return Drawn::Rows(picks);
                };
                let mut table = ts.select_rows(&picks);
                let d = coords.len();
                let mut z = vec![0.0; d];
                let mut noise = vec![0.0; d];
                let mut columns = table.columns().to_vec();
                let mut response = table.response().clone();
                for r in 0..n {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    noise.iter_mut().for_each(|v| *v = 0.0);
                    sampler.add_noise(&mut noise, &z);
                    for (c, e) in coords.iter().zip(&noise) {
                        match c {
                            Coord::Feature(f) => columns[*f][r] += e,
                            Coord::Response => {
                                if let Response::Continuous(v) = &mut response {
                                    v[r] += e;
                                }
                            }
                        }
                    }
                }
                let weights = table.weights().to_vec();
                table = TrainSet::from_parts_unchecked(ts.features().to_vec(), columns, response, weights);
                Drawn::Table(table)
            }
            (State::Plain, _) => unreachable!("plain state only for simple kinds"),
        }
    }
}

fn all_coords(ts: &TrainSet, force: bool) -> Vec<Coord> {
    let mut coords: Vec<Coord> = ts
        .features()
        .iter()
        .enumerate()
        .filter(|(_, k)| force || k.is_continuous())
        .map(|(f, _)| Coord::Feature(f))
        .collect();
    if force || !ts.response().is_categorical() {
        coords.push(Coord::Response);
    }
    coords
}

pub fn default_subsample_size(n: usize) -> usize {
    ((SUBSAMPLE_FRACTION * n as f64).round() as usize).max(2).min(n)
}

/// One resampled training table.
pub fn resample<R: Rng + ?Sized>(ts: &TrainSet, kind: ResamplerKind, rng: &mut R) -> Result<TrainSet> {
    let r = Resampler::fit(ts, kind)?;
    Ok(r.draw(ts, rng).into_train_set(ts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn cont_ts(n: usize, seed: u64) -> TrainSet {
        let mut r = SeededRng::new(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + r.random::<f64>()).collect();
        TrainSet::new(vec![FeatureKind::Continuous], vec![x], Response::Continuous(y)).unwrap()
    }

    #[test]
    fn normal_scale_one_dimension() {
        assert!((normal_scale_factor(100, 1) - (4.0f64 / 300.0).powf(0.4)).abs() < 1e-15);
        assert!((normal_scale_factor(100, 1) - 0.177_818).abs() < 1e-6);
        assert!(normal_scale_factor(1000, 2) < normal_scale_factor(100, 2));
    }

    #[test]
    fn bandwidth_scales_with_covariance() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64 / 10.0]).collect();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * 3.0).collect()).collect();
        let a = normal_scale_bandwidth(&rows).unwrap();
        let b = normal_scale_bandwidth(&scaled).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.h.get(i, j) - 9.0 * a.h.get(i, j)).abs() < 1e-9 * b.h.get(i, j).abs().max(1.0));
            }
        }
    }

    #[test]
    fn stratified_keeps_level_counts() {
        let ts = TrainSet::new(
            vec![FeatureKind::Continuous],
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Response::Categorical { levels: 2, values: vec![0, 0, 0, 1] },
        )
        .unwrap();
        let out = resample(&ts, ResamplerKind::Stratified, &mut SeededRng::new(1, 1)).unwrap();
        let Response::Categorical { values, .. } = out.response() else { panic!() };
        assert_eq!(values.iter().filter(|&&c| c == 0).count(), 3);
        assert_eq!(values.iter().filter(|&&c| c == 1).count(), 1);
        assert!(resample(&cont_ts(5, 1), ResamplerKind::Stratified, &mut SeededRng::new(1, 1)).is_err());
    }

    #[test]
    fn subsample_default_size() {
        let ts = cont_ts(100, 3);
        let r = Resampler::fit(&ts, ResamplerKind::SimpleWithoutReplacement(None)).unwrap();
        let Drawn::Rows(rows) = r.draw(&ts, &mut SeededRng::new(2, 2)) else { panic!() };
        let mut u = rows.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 63);
        assert_eq!(rows.len(), 63);
        assert_eq!(default_subsample_size(2), 2);
    }

    #[test]
    fn normal_parametric_needs_continuous() {
        let ts = TrainSet::new(
            vec![FeatureKind::Nominal { levels: 2 }],
            vec![vec![0.0, 1.0, 1.0]],
            Response::Continuous(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        assert!(matches!(Resampler::fit(&ts, ResamplerKind::NormalParametric), Err(Error::Incompatible(_))));
        let out = resample(&cont_ts(30, 4), ResamplerKind::NormalParametric, &mut SeededRng::new(3, 3)).unwrap();
        assert_eq!(out.n_rows(), 30);
    }

    #[test]
    fn kernel_copies_categorical_coordinates() {
        let ts = TrainSet::new(
            vec![FeatureKind::Nominal { levels: 3 }, FeatureKind::Continuous],
            vec![vec![0.0, 1.0, 2.0, 1.0], vec![0.5, 1.5, 2.5, 3.5]],
            Response::Categorical { levels: 2, values: vec![0, 1, 1, 0] },
        )
        .unwrap();
        let out = resample(&ts, ResamplerKind::KernelSmoothed(BandwidthRule::NormalScale), &mut SeededRng::new(9, 0)).unwrap();
        assert!(out.columns()[0].iter().all(|v| v.fract() == 0.0));
        assert!(out.columns()[1].iter().any(|v| ![0.5, 1.5, 2.5, 3.5].contains(v)));
    }

    #[test]
    fn zero_bandwidth_matches_bootstrap() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let k = KernelSampler::with_bandwidth(pts.clone(), SpdMatrix::zeros(1)).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&k.draw_with(i, &[1.7]), p);
        }
    }
}
