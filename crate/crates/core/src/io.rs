//! CSV and schema-sidecar reading and writing.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Cell, ColumnKind, DataMatrix, Mask, Schema};
use crate::error::{Error, Result};

pub const DEFAULT_NA_TOKEN: &str = "NA";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Schema::parse(&text)
}

pub fn save_schema(path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let mut f = create(path)?;
    f.write_all(schema.to_string().as_bytes())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Loads a CSV file against the schema sidecar at `schema_path`.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
    na_token: &str,
) -> Result<DataMatrix> {
    let schema = load_schema(schema_path)?;
    read_csv(open(path.as_ref())?, schema, na_token)
}

pub fn read_csv<R: Read>(reader: R, schema: Schema, na_token: &str) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    let names: Vec<&str> = schema.names().collect();
    if header.len() != names.len() || header.iter().zip(&names).any(|(h, n)| h.trim() != *n) {
        return Err(Error::SchemaMismatch(format!(
            "header [{}] does not match schema [{}]",
            header.iter().collect::<Vec<_>>().join(","),
            names.join(",")
        )));
    }

    let mut columns: Vec<Vec<Cell>> = vec![Vec::new(); schema.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != schema.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                record.len(),
                schema.len()
            )));
        }
        for ((token, col), cells) in record.iter().zip(schema.columns()).zip(&mut columns) {
            let token = token.trim();
            let cell = if token == na_token {
                Cell::Missing
            } else {
                match &col.kind {
                    ColumnKind::Continuous => match token.parse::<f64>() {
                        Ok(v) if v.is_finite() => Cell::Real(v),
                        _ => {
                            return Err(Error::NotNumeric {
                                row: row + 1,
                                column: col.name.clone(),
                                token: token.to_string(),
                            })
                        }
                    },
                    ColumnKind::Nominal(levels) | ColumnKind::Ordinal(levels) => {
                        match levels.iter().position(|l| l == token) {
                            Some(idx) => Cell::Level(idx),
                            None => {
                                return Err(Error::UnknownLevel {
                                    row: row + 1,
                                    column: col.name.clone(),
                                    label: token.to_string(),
                                })
                            }
                        }
                    }
                }
            };
            cells.push(cell);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    DataMatrix::new(schema, columns)
}

pub fn write_csv<W: Write>(writer: W, d: &DataMatrix, na_token: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(d.schema().names())
        .map_err(|e| Error::Csv(e.to_string()))?;
    let mut fields = Vec::with_capacity(d.n_cols());
    for i in 0..d.n_rows() {
        fields.clear();
        for j in 0..d.n_cols() {
            fields.push(match d.get(i, j) {
                Cell::Missing => na_token.to_string(),
                Cell::Real(v) => v.to_string(),
                Cell::Level(l) => d.kind(j).levels().expect("categorical column")[l].clone(),
            });
        }
        wtr.write_record(&fields)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn save_csv(path: impl AsRef<Path>, d: &DataMatrix, na_token: &str) -> Result<()> {
    write_csv(create(path.as_ref())?, d, na_token)
}

/// Writes the mask as a 0/1 CSV with the data's header; 1 marks a missing cell.
pub fn write_mask_csv<W: Write>(writer: W, schema: &Schema, mask: &Mask) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.names())
        .map_err(|e| Error::Csv(e.to_string()))?;
    for i in 0..mask.n_rows() {
        let row: Vec<&str> = (0..mask.n_cols())
            .map(|j| if mask.is_missing(i, j) { "1" } else { "0" })
            .collect();
        wtr.write_record(&row)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn save_mask_csv(path: impl AsRef<Path>, schema: &Schema, mask: &Mask) -> Result<()> {
    write_mask_csv(create(path.as_ref())?, schema, mask)
}
