//! Simulation designs D1-D7.
//!
//! D1 and D2 threshold a correlated latent normal vector into 7 nominal and
//! 8 ordinal columns with 4 levels each. D3 is multivariate normal. D4-D7 are
//! `mu + Sigma^(1/2) eps` with raw chi-squared or log-normal noise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Cell, Column, ColumnKind, DataMatrix, Schema};
use crate::error::{Error, Result};
use crate::rng::{chol_or_sqrt, dirichlet_sample, MvNormal, ScalarDist, SeededRng, SpdMatrix};

pub const DEFAULT_ROWS: usize = 250;
pub const N_COLUMNS: usize = 15;
pub const N_NOMINAL: usize = 7;
pub const N_LEVELS: usize = 4;
pub const LATENT_CORRELATION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    D1,
    D2,
    D3,
    /// D3 with diagonal 9 and off-diagonal 6.3 (correlation 0.7).
    D3Rho07,
    D4,
    D5,
    D6,
    D7,
}

impl Design {
    pub const ALL: [Design; 7] = [Design::D1, Design::D2, Design::D3, Design::D4, Design::D5, Design::D6, Design::D7];

    pub fn is_categorical(self) -> bool {
        matches!(self, Design::D1 | Design::D2)
    }

    /// Dirichlet concentration for the level probabilities of D1/D2.
    pub fn dirichlet_alpha(self) -> Option<[f64; N_LEVELS]> {
        match self {
            Design::D1 => Some([100.0; 4]),
            Design::D2 => Some([100.0, 200.0, 500.0, 500.0]),
            _ => None,
        }
    }

    /// Noise law of D4-D7.
    pub fn noise(self) -> Option<ScalarDist> {
        match self {
            Design::D4 => Some(ScalarDist::ChiSquared { df: 3.0 }),
            Design::D5 => Some(ScalarDist::ChiSquared { df: 30.0 }),
            Design::D6 => Some(ScalarDist::LogNormal { mu: 0.0, sigma: 1.0 }),
            Design::D7 => Some(ScalarDist::LogNormal { mu: 0.0, sigma: 2.0 }),
            _ => None,
        }
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "D1" => Design::D1,
            "D2" => Design::D2,
            "D3" => Design::D3,
            "D3-RHO07" | "D3RHO07" => Design::D3Rho07,
            "D4" => Design::D4,
            "D5" => Design::D5,
            "D6" => Design::D6,
            "D7" => Design::D7,
            _ => return Err(Error::InvalidParameter(format!("unknown design {s:?}"))),
        })
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Design::D1 => "D1",
            Design::D2 => "D2",
            Design::D3 => "D3",
            Design::D3Rho07 => "D3-rho07",
            Design::D4 => "D4",
            Design::D5 => "D5",
            Design::D6 => "D6",
            Design::D7 => "D7",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpec {
    pub design: Design,
    pub n: usize,
    pub seed: u64,
}

impl DesignSpec {
    pub fn new(design: Design, seed: u64) -> Self {
        Self {
            design,
            n: DEFAULT_ROWS,
            seed,
        }
    }
}

pub fn generate(spec: &DesignSpec) -> Result<DataMatrix> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("design needs at least one row".into()));
    }
    let mut rng = SeededRng::for_purpose(spec.seed, "design", &[]);
    if spec.design.is_categorical() {
        Ok(gen_categorical(spec.design, spec.n, &mut rng)?.data)
    } else {
        gen_continuous(spec.design, spec.n, &mut rng)
    }
}

/// Schema of D1/D2: `V1..V7` nominal `A..D`, `V8..V15` ordinal `1..4`.
pub fn categorical_schema() -> Schema {
    let nominal: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let ordinal: Vec<String> = (1..=N_LEVELS).map(|l| l.to_string()).collect();
    Schema::new(
        (0..N_COLUMNS)
            .map(|j| Column {
                name: format!("V{}", j + 1),
                kind: if j < N_NOMINAL {
                    ColumnKind::Nominal(nominal.clone())
                } else {
                    ColumnKind::Ordinal(ordinal.clone())
                },
            })
            .collect(),
    )
    .expect("valid schema")
}

pub fn continuous_schema() -> Schema {
    Schema::new(
        (0..N_COLUMNS)
            .map(|j| Column {
                name: format!("V{}", j + 1),
                kind: ColumnKind::Continuous,
            })
            .collect(),
    )
    .expect("valid schema")
}

/// Equicorrelation matrix with unit diagonal.
pub fn latent_correlation() -> SpdMatrix {
    equicorrelated(N_COLUMNS, 1.0, LATENT_CORRELATION)
}

fn equicorrelated(d: usize, diag: f64, off: f64) -> SpdMatrix {
    SpdMatrix::new(nalgebra::DMatrix::from_fn(d, d, |i, j| if i == j { diag } else { off })).expect("symmetric")
}

/// Categorical design draw with its intermediate quantities.
#[derive(Debug, Clone)]
pub struct CategoricalDraw {
    pub data: DataMatrix,
    /// Level probabilities per column.
    pub probabilities: Vec<Vec<f64>>,
    /// Normal-quantile cut points per column (3 each).
    pub thresholds: Vec<Vec<f64>>,
    /// Latent normal rows before thresholding.
    pub latent: Vec<Vec<f64>>,
}

/// Level of `z` given ascending cut points.
pub fn discretize(z: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().filter(|&&t| z > t).count()
}

pub fn gen_categorical<R: Rng + ?Sized>(design: Design, n: usize, rng: &mut R) -> Result<CategoricalDraw> {
    let alpha = design
        .dirichlet_alpha()
        .ok_or_else(|| Error::InvalidParameter(format!("{design} is not a categorical design")))?;
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut probabilities = Vec::with_capacity(N_COLUMNS);
    let mut thresholds = Vec::with_capacity(N_COLUMNS);
    for _ in 0..N_COLUMNS {
        let p = dirichlet_sample(rng, &alpha)?;
        let mut cum = 0.0;
        let cuts: Vec<f64> = p[..N_LEVELS - 1]
            .iter()
            .map(|pk| {
                cum += pk;
                std.inverse_cdf(cum)
            })
            .collect();
        probabilities.push(p);
        thresholds.push(cuts);
    }
    let mvn = MvNormal::new(vec![0.0; N_COLUMNS], &latent_correlation())?;
    let latent: Vec<Vec<f64>> = (0..n).map(|_| mvn.sample(rng)).collect();
    let columns = (0..N_COLUMNS)
        .map(|j| {
            latent
                .iter()
                .map(|row| Cell::Level(discretize(row[j], &thresholds[j])))
                .collect()
        })
        .collect();
    Ok(CategoricalDraw {
        data: DataMatrix::new(categorical_schema(), columns)?,
        probabilities,
        thresholds,
        latent,
    })
}

/// Mean vector `(2, 3, ..., 16)` shared by D3-D7.
pub fn design_mean() -> Vec<f64> {
    (0..N_COLUMNS).map(|k| (k + 2) as f64).collect()
}

/// Covariance used by a continuous design.
pub fn design_covariance(design: Design) -> Result<SpdMatrix> {
    match design {
        Design::D3 => Ok(equicorrelated(N_COLUMNS, 9.0 + 6.3, 6.3)),
        Design::D3Rho07 => Ok(equicorrelated(N_COLUMNS, 9.0, 6.3)),
        Design::D4 | Design::D5 | Design::D6 | Design::D7 => SpdMatrix::new(nalgebra::DMatrix::from_fn(
            N_COLUMNS,
            N_COLUMNS,
            |i, j| {
                let (k, l) = ((i + 1) as f64, (j + 1) as f64);
                if i == j {
                    k
                } else {
                    0.7 * (k * l).sqrt()
                }
            },
        )),
        _ => Err(Error::InvalidParameter(format!("{design} is not a continuous design"))),
    }
}

pub fn gen_continuous<R: Rng + ?Sized>(design: Design, n: usize, rng: &mut R) -> Result<DataMatrix> {
    let mean = design_mean();
    let sigma = design_covariance(design)?;
    let rows: Vec<Vec<f64>> = match design.noise() {
        None => {
            let mvn = MvNormal::new(mean, &sigma)?;
            (0..n).map(|_| mvn.sample(rng)).collect()
        }
        Some(noise) => {
            let root = chol_or_sqrt(&sigma)?;
            (0..n)
                .map(|_| {
                    let eps = noise.sample_n(rng, N_COLUMNS)?;
                    let shifted = &root * nalgebra::DVector::from_vec(eps);
                    Ok(mean.iter().zip(shifted.iter()).map(|(m, s)| m + s).collect())
                })
                .collect::<Result<_>>()?
        }
    };
    let columns = (0..N_COLUMNS)
        .map(|j| rows.iter().map(|r| Cell::Real(r[j])).collect())
        .collect();
    DataMatrix::new(continuous_schema(), columns)
}
