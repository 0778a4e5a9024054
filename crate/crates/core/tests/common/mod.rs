#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeimpute::data::{Cell, Column, ColumnKind, DataMatrix, Mask, Schema};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn levels(k: usize) -> Vec<String> {
    (0..k).map(|l| format!("L{l}")).collect()
}

pub fn continuous_matrix(rows: &[Vec<f64>]) -> DataMatrix {
    let p = rows[0].len();
    let schema = Schema::new(
        (0..p)
            .map(|j| Column {
                name: format!("x{j}"),
                kind: ColumnKind::Continuous,
            })
            .collect(),
    )
    .unwrap();
    let cols = (0..p).map(|j| rows.iter().map(|r| Cell::Real(r[j])).collect()).collect();
    DataMatrix::new(schema, cols).unwrap()
}

/// Random complete matrix; column kinds cycle through continuous, nominal and
/// ordinal when `mixed` is set.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, p: usize, mixed: bool) -> DataMatrix {
    let mut cols = Vec::new();
    let mut schema = Vec::new();
    for j in 0..p {
        let kind = match (mixed, j % 3) {
            (true, 1) => ColumnKind::Nominal(levels(2 + j % 3)),
            (true, 2) => ColumnKind::Ordinal(levels(3)),
            _ => ColumnKind::Continuous,
        };
        let col: Vec<Cell> = (0..n)
            .map(|_| match &kind {
                ColumnKind::Continuous => Cell::Real(rng.random_range(-5.0..5.0)),
                k => Cell::Level(rng.random_range(0..k.n_levels())),
            })
            .collect();
        schema.push(Column {
            name: format!("c{j}"),
            kind,
        });
        cols.push(col);
    }
    DataMatrix::new(Schema::new(schema).unwrap(), cols).unwrap()
}

/// Blanks cells at `rate`, keeping at least one observed cell per column.
pub fn random_mask<R: Rng>(rng: &mut R, n: usize, p: usize, rate: f64) -> Mask {
    let mut m = Mask::empty(n, p);
    for j in 0..p {
        let keep = rng.random_range(0..n);
        for i in 0..n {
            if i != keep && rng.random_bool(rate) {
                m.set(i, j, true);
            }
        }
    }
    m
}
