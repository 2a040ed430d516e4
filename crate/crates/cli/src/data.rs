//! CSV ingestion and unit-box rescaling.

use std::collections::BTreeMap;
use std::path::Path;

use dpms_core::RegressionData;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Raw CSV contents: header plus string cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("column {name:?} not found; available: {}", self.headers.join(", "))))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Data(format!("{}: {other:?}", path.display())),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows })
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

/// Columns to extract and how to shape them into a regression.
#[derive(Debug, Clone, Default)]
pub struct ColumnSpec {
    pub response: String,
    pub common: Vec<String>,
    pub tested: Vec<String>,
    pub intercept: bool,
}

impl ColumnSpec {
    fn all(&self) -> Vec<&str> {
        std::iter::once(self.response.as_str())
            .chain(self.common.iter().map(String::as_str))
            .chain(self.tested.iter().map(String::as_str))
            .collect()
    }
}

/// Affine map of one column from [lo, hi] onto [−0.5, 0.5].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub lo: f64,
    pub hi: f64,
}

impl ColumnTransform {
    pub fn new(lo: f64, hi: f64) -> CliResult<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(CliError::Config(format!("rescale bounds [{lo}, {hi}] must be finite with hi > lo")));
        }
        Ok(Self { lo, hi })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - 0.5 * (self.lo + self.hi)) / (self.hi - self.lo)
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * (self.hi - self.lo) + 0.5 * (self.lo + self.hi)
    }
}

/// Per-column transforms, keyed by column name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RescaleRecord {
    pub columns: BTreeMap<String, ColumnTransform>,
}

impl RescaleRecord {
    pub fn from_bounds(bounds: &BTreeMap<String, [f64; 2]>) -> CliResult<Self> {
        let columns = bounds
            .iter()
            .map(|(k, [lo, hi])| Ok((k.clone(), ColumnTransform::new(*lo, *hi)?)))
            .collect::<CliResult<_>>()?;
        Ok(Self { columns })
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Rescales the named columns of `values` (column-major, one Vec per name)
/// with declared bounds. Columns without a declared transform are unchanged.
pub fn rescale_to_unit_box(names: &[String], values: &mut [Vec<f64>], record: &RescaleRecord) -> CliResult<()> {
    for name in record.columns.keys() {
        if !names.contains(name) {
            return Err(CliError::Config(format!("rescale names unknown column {name:?}")));
        }
    }
    for (name, col) in names.iter().zip(values.iter_mut()) {
        if let Some(t) = record.columns.get(name) {
            for v in col.iter_mut() {
                if !v.is_finite() {
                    return Err(CliError::Data(format!("non-finite value in column {name:?}")));
                }
                *v = t.apply(*v);
            }
        }
    }
    Ok(())
}

/// Inverse of [`rescale_to_unit_box`].
pub fn invert_rescale(names: &[String], values: &mut [Vec<f64>], record: &RescaleRecord) {
    for (name, col) in names.iter().zip(values.iter_mut()) {
        if let Some(t) = record.columns.get(name) {
            for v in col.iter_mut() {
                *v = t.invert(*v);
            }
        }
    }
}

/// Result of loading a regression from CSV.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: RegressionData,
    /// Rows dropped for missing cells.
    pub dropped: usize,
    pub rescale: RescaleRecord,
    /// Values of the response and predictors outside (−0.5, 0.5).
    pub out_of_box: usize,
}

/// Reads the declared columns, drops rows with a missing cell in any of them,
/// applies declared rescaling and builds the regression. The intercept, when
/// requested, is the first column of X₀.
pub fn ingest_csv(path: &Path, spec: &ColumnSpec, rescale: &RescaleRecord) -> CliResult<Ingested> {
    let table = read_table(path)?;
    ingest_table(&table, spec, rescale)
}

pub fn ingest_table(table: &Table, spec: &ColumnSpec, rescale: &RescaleRecord) -> CliResult<Ingested> {
    let names: Vec<String> = spec.all().into_iter().map(str::to_string).collect();
    let idx: Vec<usize> = names.iter().map(|n| table.column_index(n)).collect::<CliResult<_>>()?;
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(table.n_rows()); names.len()];
    let mut dropped = 0;
    for (r, row) in table.rows.iter().enumerate() {
        if idx.iter().any(|&c| row.get(c).is_none_or(|s| is_missing(s))) {
            dropped += 1;
            continue;
        }
        for (k, &c) in idx.iter().enumerate() {
            let cell = &row[c];
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("row {}, column {:?}: cannot parse {cell:?} as a number", r + 1, names[k]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("row {}, column {:?}: non-finite value", r + 1, names[k])));
            }
            values[k].push(v);
        }
    }
    let n = values[0].len();
    if n == 0 {
        return Err(CliError::Data("no complete rows".into()));
    }
    let n_common = spec.common.len();
    for (k, name) in names.iter().enumerate().skip(1 + n_common) {
        let col = &values[k];
        if col.iter().all(|&v| v == col[0]) {
            return Err(CliError::Data(format!("tested column {name:?} is constant")));
        }
    }
    rescale_to_unit_box(&names, &mut values, rescale)?;
    let out_of_box = values.iter().flatten().filter(|v| v.abs() >= 0.5).count();

    let y = DVector::from_vec(values[0].clone());
    let p0 = n_common + usize::from(spec.intercept);
    let x0 = DMatrix::from_fn(n, p0, |i, j| {
        if spec.intercept {
            if j == 0 {
                1.0
            } else {
                values[j][i]
            }
        } else {
            values[1 + j][i]
        }
    });
    let x = DMatrix::from_fn(n, spec.tested.len(), |i, j| values[1 + n_common + j][i]);
    let data = RegressionData::new(y, x0, x)?;
    Ok(Ingested { data, dropped, rescale: rescale.clone(), out_of_box })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, text).unwrap();
        read_table(&path).unwrap()
    }

    fn spec() -> ColumnSpec {
        ColumnSpec { response: "y".into(), common: vec![], tested: vec!["x1".into()], intercept: true }
    }

    #[test]
    fn exact_recovery() {
        let t = table("y,x1\n1.5,2\n-3,4.25\n0,-1\n");
        let ing = ingest_table(&t, &spec(), &RescaleRecord::default()).unwrap();
        assert_eq!(ing.data.y().as_slice(), &[1.5, -3.0, 0.0]);
        assert_eq!(ing.data.x().as_slice(), &[2.0, 4.25, -1.0]);
        assert_eq!(ing.data.x0().as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn string_cell_names_row_and_column() {
        let t = table("y,x1\n1,2\n2,abc\n3,1\n");
        let msg = ingest_table(&t, &spec(), &RescaleRecord::default()).unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("\"x1\""), "{msg}");
    }

    #[test]
    fn missing_rows_dropped() {
        let t = table("y,x1,z\n1,2,\n2,NA,1\n3,1,q\n4,5,1\n");
        let ing = ingest_table(&t, &spec(), &RescaleRecord::default()).unwrap();
        assert_eq!(ing.dropped, 1);
        assert_eq!(ing.data.n(), 3);
    }

    #[test]
    fn constant_tested_column_rejected() {
        let t = table("y,x1\n1,2\n2,2\n3,2\n");
        assert!(matches!(ingest_table(&t, &spec(), &RescaleRecord::default()), Err(CliError::Data(_))));
    }

    #[test]
    fn rescale_endpoints_and_round_trip() {
        let mut b = BTreeMap::new();
        b.insert("x".to_string(), [0.0, 100.0]);
        let rec = RescaleRecord::from_bounds(&b).unwrap();
        let names = vec!["x".to_string()];
        let orig = vec![0.0, 100.0, 37.123456789];
        let mut vals = vec![orig.clone()];
        rescale_to_unit_box(&names, &mut vals, &rec).unwrap();
        assert_eq!(vals[0][0], -0.5);
        assert_eq!(vals[0][1], 0.5);
        invert_rescale(&names, &mut vals, &rec);
        for (a, b) in vals[0].iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
        b.insert("x".to_string(), [1.0, 1.0]);
        assert!(RescaleRecord::from_bounds(&b).is_err());
    }

    #[test]
    fn identity_bounds_leave_column_unchanged() {
        let mut b = BTreeMap::new();
        b.insert("x".to_string(), [-0.5, 0.5]);
        let rec = RescaleRecord::from_bounds(&b).unwrap();
        let mut vals = vec![vec![-0.25, 0.1, 0.49]];
        rescale_to_unit_box(&["x".to_string()], &mut vals, &rec).unwrap();
        assert_eq!(vals[0], vec![-0.25, 0.1, 0.49]);
    }
}
