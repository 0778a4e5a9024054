//! Mixed-type data matrix with per-column schema and missingness mask.
//!
//! Cells are stored column-major. Categorical cells hold an index into the
//! level list of their column; labels only appear at the I/O boundary.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Nominal(Vec<String>),
    Ordinal(Vec<String>),
}

impl ColumnKind {
    pub fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Continuous => None,
            ColumnKind::Nominal(l) | ColumnKind::Ordinal(l) => Some(l),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels().map_or(0, <[String]>::len)
    }

    pub fn is_categorical(&self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Some(levels) = self.levels() {
            if levels.is_empty() {
                return Err(Error::Schema(format!("column {name:?} has no levels")));
            }
            for (i, l) in levels.iter().enumerate() {
                if l.is_empty() {
                    return Err(Error::Schema(format!("column {name:?} has an empty level label")));
                }
                if levels[..i].contains(l) {
                    return Err(Error::Schema(format!("column {name:?} repeats level {l:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered list of named, typed columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("schema has no columns".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::Schema(format!("column {} has an empty name", i + 1)));
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
            c.kind.validate(&c.name)?;
        }
        Ok(Self { columns })
    }

    /// Parses the sidecar format: one `name:kind[:level1,level2,...]` per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ':');
            let name = parts.next().unwrap_or_default().trim().to_string();
            let kind = parts
                .next()
                .ok_or_else(|| Error::Schema(format!("line {}: missing kind", lineno + 1)))?
                .trim()
                .to_ascii_lowercase();
            let levels = parts.next().map(|l| {
                l.split(',')
                    .map(|s| s.trim().to_string())
                    .collect::<Vec<_>>()
            });
            let kind = match (kind.as_str(), levels) {
                ("continuous", None) => ColumnKind::Continuous,
                ("continuous", Some(_)) => {
                    return Err(Error::Schema(format!(
                        "line {}: continuous column {name:?} cannot list levels",
                        lineno + 1
                    )))
                }
                ("nominal", Some(l)) => ColumnKind::Nominal(l),
                ("ordinal", Some(l)) => ColumnKind::Ordinal(l),
                ("nominal" | "ordinal", None) => {
                    return Err(Error::Schema(format!(
                        "line {}: categorical column {name:?} needs a level list",
                        lineno + 1
                    )))
                }
                (other, _) => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown column kind {other:?}",
                        lineno + 1
                    )))
                }
            };
            columns.push(Column { name, kind });
        }
        Self::new(columns)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Schema with column `j` removed.
    pub fn without(&self, j: usize) -> Option<Self> {
        let columns: Vec<_> = self
            .columns
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, c)| c.clone())
            .collect();
        (!columns.is_empty()).then_some(Self { columns })
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.columns {
            match &c.kind {
                ColumnKind::Continuous => writeln!(f, "{}:continuous", c.name)?,
                ColumnKind::Nominal(l) => writeln!(f, "{}:nominal:{}", c.name, l.join(","))?,
                ColumnKind::Ordinal(l) => writeln!(f, "{}:ordinal:{}", c.name, l.join(","))?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Real(f64),
    Level(usize),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Numeric encoding used by the learners: the value itself, or the level index.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Real(v) => Some(v),
            Cell::Level(l) => Some(l as f64),
            Cell::Missing => None,
        }
    }
}

/// Missingness indicator, `true` where a cell is missing (`R_ij = 0`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    n_rows: usize,
    n_cols: usize,
    missing: Vec<bool>,
}

impl Mask {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            missing: vec![false; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[j * self.n_rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, missing: bool) {
        self.missing[j * self.n_rows + i] = missing;
    }

    pub fn column(&self, j: usize) -> &[bool] {
        &self.missing[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn column_count(&self, j: usize) -> usize {
        self.column(j).iter().filter(|&&m| m).count()
    }

    /// FNV-1a digest of the mask bits, used to check that several methods saw
    /// the same amputed matrix.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in (self.n_rows as u64)
            .to_le_bytes()
            .into_iter()
            .chain((self.n_cols as u64).to_le_bytes())
            .chain(self.missing.iter().map(|&m| m as u8))
        {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// Row index sets of one column: observed (`i^obs_j`) and missing (`i^mis_j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPartition {
    pub col: usize,
    pub obs_idx: Vec<usize>,
    pub mis_idx: Vec<usize>,
}

/// The four blocks of one column split: response and covariates, each on the
/// observed and missing rows of that column.
#[derive(Debug, Clone)]
pub struct ObservedSplit {
    pub partition: ColumnPartition,
    pub response_obs: Vec<Cell>,
    pub covariates_obs: Option<DataMatrix>,
    pub response_mis: Vec<Cell>,
    pub covariates_mis: Option<DataMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    schema: Schema,
    n_rows: usize,
    columns: Vec<Vec<Cell>>,
}

impl DataMatrix {
    /// Builds a validated matrix from column-major cells.
    pub fn new(schema: Schema, columns: Vec<Vec<Cell>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        for (col, cells) in schema.columns().iter().zip(&columns) {
            if cells.len() != n_rows {
                return Err(Error::ShapeMismatch(format!(
                    "column {:?} has {} rows, expected {n_rows}",
                    col.name,
                    cells.len()
                )));
            }
            for (i, cell) in cells.iter().enumerate() {
                let ok = match (cell, &col.kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Real(v), ColumnKind::Continuous) => v.is_finite(),
                    (Cell::Level(l), kind) if kind.is_categorical() => *l < kind.n_levels(),
                    _ => false,
                };
                if !ok {
                    return Err(Error::ShapeMismatch(format!(
                        "row {}, column {:?}: cell {cell:?} does not fit the column kind",
                        i + 1,
                        col.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.columns[j][i]
    }

    pub fn column(&self, j: usize) -> &[Cell] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<Cell>] {
        &self.columns
    }

    pub fn kind(&self, j: usize) -> &ColumnKind {
        &self.schema.column(j).kind
    }

    /// Overwrites one cell. The cell must fit the column kind.
    pub fn set(&mut self, i: usize, j: usize, cell: Cell) -> Result<()> {
        let kind = &self.schema.column(j).kind;
        let ok = match (&cell, kind) {
            (Cell::Missing, _) => true,
            (Cell::Real(v), ColumnKind::Continuous) => v.is_finite(),
            (Cell::Level(l), k) if k.is_categorical() => *l < k.n_levels(),
            _ => false,
        };
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "cell {cell:?} does not fit column {:?}",
                self.schema.column(j).name
            )));
        }
        self.columns[j][i] = cell;
        Ok(())
    }

    pub fn missing_count(&self, j: usize) -> usize {
        self.columns[j].iter().filter(|c| c.is_missing()).count()
    }

    pub fn total_missing(&self) -> usize {
        (0..self.n_cols()).map(|j| self.missing_count(j)).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().flatten().all(|c| !c.is_missing())
    }

    pub fn mask(&self) -> Mask {
        let mut mask = Mask::empty(self.n_rows, self.n_cols());
        for (j, col) in self.columns.iter().enumerate() {
            for (i, c) in col.iter().enumerate() {
                if c.is_missing() {
                    mask.set(i, j, true);
                }
            }
        }
        mask
    }

    /// Copy of `self` with every cell flagged in `mask` set to missing.
    pub fn with_mask(&self, mask: &Mask) -> Result<Self> {
        if mask.n_rows() != self.n_rows || mask.n_cols() != self.n_cols() {
            return Err(Error::ShapeMismatch("mask shape differs from data".into()));
        }
        let mut out = self.clone();
        for (j, col) in out.columns.iter_mut().enumerate() {
            for (i, c) in col.iter_mut().enumerate() {
                if mask.is_missing(i, j) {
                    *c = Cell::Missing;
                }
            }
        }
        Ok(out)
    }

    pub fn partition(&self, j: usize) -> ColumnPartition {
        let (mis_idx, obs_idx): (Vec<usize>, Vec<usize>) =
            (0..self.n_rows).partition(|&i| self.columns[j][i].is_missing());
        ColumnPartition {
            col: j,
            obs_idx,
            mis_idx,
        }
    }

    /// Rows `rows` (in the given order) of every column except `skip`.
    fn sub_table(&self, rows: &[usize], skip: usize) -> Option<DataMatrix> {
        if rows.is_empty() {
            return None;
        }
        let schema = self.schema.without(skip)?;
        let columns = self
            .columns
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, col)| rows.iter().map(|&i| col[i]).collect())
            .collect();
        Some(DataMatrix {
            schema,
            n_rows: rows.len(),
            columns,
        })
    }
}

/// Column visiting order: ascending missing count, ties by column index.
pub fn missing_order(d: &DataMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.n_cols()).collect();
    order.sort_by_key(|&j| d.missing_count(j));
    order
}

/// Splits `d` around column `j` into the observed/missing response and
/// covariate blocks. Covariate blocks are `None` when empty (no rows, or a
/// single-column matrix).
pub fn split_by_observed(d: &DataMatrix, j: usize) -> Result<ObservedSplit> {
    let partition = d.partition(j);
    if partition.obs_idx.is_empty() {
        return Err(Error::FullyMissing(d.schema.column(j).name.clone()));
    }
    let col = d.column(j);
    Ok(ObservedSplit {
        response_obs: partition.obs_idx.iter().map(|&i| col[i]).collect(),
        covariates_obs: d.sub_table(&partition.obs_idx, j),
        response_mis: partition.mis_idx.iter().map(|&i| col[i]).collect(),
        covariates_mis: d.sub_table(&partition.mis_idx, j),
        partition,
    })
}

/// Mean of the observed cells of a continuous column, or the modal level
/// (lowest index on ties) of a categorical one.
pub fn column_center(d: &DataMatrix, j: usize) -> Result<Cell> {
    let col = d.column(j);
    match d.kind(j) {
        ColumnKind::Continuous => {
            let (sum, count) = col
                .iter()
                .filter_map(|c| match c {
                    Cell::Real(v) => Some(*v),
                    _ => None,
                })
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if count == 0 {
                return Err(Error::FullyMissing(d.schema.column(j).name.clone()));
            }
            Ok(Cell::Real(sum / count as f64))
        }
        kind => {
            let mut counts = vec![0usize; kind.n_levels()];
            for c in col {
                if let Cell::Level(l) = c {
                    counts[*l] += 1;
                }
            }
            let best = argmax_first(&counts)
                .filter(|&l| counts[l] > 0)
                .ok_or_else(|| Error::FullyMissing(d.schema.column(j).name.clone()))?;
            Ok(Cell::Level(best))
        }
    }
}

/// Fills every missing cell with its column mean (continuous) or mode
/// (categorical, ties to the lowest level index).
pub fn initial_impute(d: &DataMatrix) -> Result<DataMatrix> {
    let mut out = d.clone();
    for j in 0..d.n_cols() {
        if d.missing_count(j) == 0 {
            continue;
        }
        let fill = column_center(d, j)?;
        for c in out.columns[j].iter_mut().filter(|c| c.is_missing()) {
            *c = fill;
        }
    }
    Ok(out)
}

/// Index of the first maximum.
pub(crate) fn argmax_first<T: PartialOrd + Copy>(xs: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some(b) if !(x > xs[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// `ceil(x)` that ignores float noise just above an integer (0.3 * 10).
pub fn count_ceil(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// `floor(x)` that ignores float noise just below an integer.
pub fn count_floor(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}
