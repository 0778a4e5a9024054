//! Seeded random streams plus the sampling and linear-algebra primitives the
//! resamplers, generators and amputation mechanisms share.
//!
//! Every consumer obtains its own [`SeededRng`] from a master seed and a stream
//! id. Stream ids are derived from a purpose label and an index, so parallel
//! work never shares a generator and results do not depend on scheduling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, LogNormal, Normal, StandardNormal};

use crate::error::{Error, Result};

/// ChaCha20 generator keyed by a master seed, on a chosen stream.
#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha20Rng);

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self(inner)
    }

    /// Generator for `(seed, label, indices)`.
    pub fn for_purpose(seed: u64, label: &str, indices: &[u64]) -> Self {
        Self::new(seed, stream_id(label, indices))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a purpose label and a list of indices (tree number, run
/// number, ...). Platform independent.
pub fn stream_id(label: &str, indices: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

/// Child master seed, for handing a whole sub-computation its own seed space.
pub fn derive_seed(seed: u64, label: &str, indices: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(label, indices))
}

/// Dense symmetric matrix intended to be positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Accepts a square matrix symmetric to within `1e-12` (relative to its
    /// largest entry) and stores its exact symmetrization.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "covariance must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let d = m.nrows();
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("covariance rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }
}

/// Symmetric PSD square root `F` with `F F = m`, via eigendecomposition.
///
/// Eigenvalues below `-1e-6 * trace` are rejected. Smaller negative
/// eigenvalues (rounding) trigger one diagonal jitter of `1e-10 * trace / d`;
/// whatever remains negative after that is clamped to zero.
pub fn chol_or_sqrt(m: &SpdMatrix) -> Result<DMatrix<f64>> {
    let d = m.dim();
    let trace = m.trace();
    let eig = SymmetricEigen::new(m.0.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min < -1e-6 * trace.abs() {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let eig = if min < -1e-10 * max.max(0.0) {
        let mut jittered = m.0.clone();
        let jitter = 1e-10 * trace / d as f64;
        for i in 0..d {
            jittered[(i, i)] += jitter;
        }
        SymmetricEigen::new(jittered)
    } else {
        eig
    };
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let f = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&f + f.transpose()) * 0.5)
}

/// Multivariate normal sampler with a precomputed square-root factor.
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
}

impl MvNormal {
    pub fn new(mean: Vec<f64>, sigma: &SpdMatrix) -> Result<Self> {
        if mean.len() != sigma.dim() {
            return Err(Error::ShapeMismatch(format!(
                "mean has dimension {}, covariance {}",
                mean.len(),
                sigma.dim()
            )));
        }
        Ok(Self {
            mean,
            factor: chol_or_sqrt(sigma)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + F z` for a caller-supplied standard normal vector `z`.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| self.mean[i] + (0..d).map(|k| self.factor[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }
}

/// `count` i.i.d. draws from `N(mu, sigma)`.
pub fn mvnormal_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: &[f64],
    sigma: &SpdMatrix,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    let dist = MvNormal::new(mu.to_vec(), sigma)?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// One Dirichlet draw via normalised Gamma(alpha_k, 1) variates.
pub fn dirichlet_sample<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Dirichlet concentrations must be positive, got {alpha:?}"
        )));
    }
    let draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("validated shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    Ok(draws.into_iter().map(|g| g / total).collect())
}

/// Scalar distributions used by the synthetic designs and amputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarDist {
    ChiSquared { df: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Bernoulli { q: f64 },
}

impl ScalarDist {
    pub fn standard_normal() -> Self {
        ScalarDist::Normal { mean: 0.0, sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarDist::ChiSquared { df } => df > 0.0 && df.is_finite(),
            ScalarDist::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            ScalarDist::Normal { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
            ScalarDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            ScalarDist::Bernoulli { q } => (0.0..=1.0).contains(&q),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            ScalarDist::ChiSquared { df } => df,
            ScalarDist::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            ScalarDist::Normal { mean, .. } => mean,
            ScalarDist::Uniform { low, high } => (low + high) / 2.0,
            ScalarDist::Bernoulli { q } => q,
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            ScalarDist::ChiSquared { df } => {
                let d = ChiSquared::new(df).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            ScalarDist::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            ScalarDist::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            ScalarDist::Uniform { low, high } => {
                (0..count).map(|_| rng.random_range(low..high)).collect()
            }
            ScalarDist::Bernoulli { q } => (0..count)
                .map(|_| if rng.random_bool(q) { 1.0 } else { 0.0 })
                .collect(),
        })
    }
}

/// Sample mean and unbiased (n - 1) covariance of `rows`.
pub fn empirical_moments(rows: &[Vec<f64>]) -> Result<(Vec<f64>, SpdMatrix)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("rows must share a positive dimension".into()));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, SpdMatrix::new(cov)?))
}
