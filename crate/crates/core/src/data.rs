//! Columnar datasets whose columns are bound to graph vertices.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Admg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Binary,
    Continuous,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell `{value}` in column `{column}`, row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value in column `{column}`, row {row}")]
    MissingValue { row: usize, column: String },
    #[error("binary violation: column `{column}` holds {value}")]
    BinaryViolation { column: String, value: f64 },
    #[error("column `{0}` has the wrong length")]
    LengthMismatch(String),
    #[error("column `{0}` bound twice")]
    DuplicateColumn(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A vertex name together with the ordered data columns it spans.
pub type Binding = Vec<(String, Vec<String>)>;

/// Complete numeric data, one block of columns per vertex. Rows may carry
/// optional non-negative weights, in which case every empirical mean is a
/// weighted mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    binding: Binding,
    columns: BTreeMap<String, Vec<f64>>,
    kinds: BTreeMap<String, ColumnKind>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset. Columns without an entry in `kinds` are continuous.
    pub fn new(
        binding: Binding,
        mut columns: BTreeMap<String, Vec<f64>>,
        kinds: &BTreeMap<String, ColumnKind>,
    ) -> Result<Self, DataError> {
        let mut n = None;
        let mut kept = BTreeMap::new();
        let mut kind_map = BTreeMap::new();
        for (_, cols) in &binding {
            for c in cols {
                if kept.contains_key(c) {
                    return Err(DataError::DuplicateColumn(c.clone()));
                }
                let values = columns
                    .remove(c)
                    .ok_or_else(|| DataError::MissingColumn(c.clone()))?;
                match n {
                    None => n = Some(values.len()),
                    Some(len) if len != values.len() => return Err(DataError::LengthMismatch(c.clone())),
                    _ => {}
                }
                let kind = kinds.get(c).copied().unwrap_or(ColumnKind::Continuous);
                for (row, &v) in values.iter().enumerate() {
                    if v.is_nan() {
                        return Err(DataError::MissingValue { row, column: c.clone() });
                    }
                    if !v.is_finite() {
                        return Err(DataError::NonNumeric {
                            row,
                            column: c.clone(),
                            value: v.to_string(),
                        });
                    }
                    if kind == ColumnKind::Binary && v != 0.0 && v != 1.0 {
                        return Err(DataError::BinaryViolation { column: c.clone(), value: v });
                    }
                }
                kind_map.insert(c.clone(), kind);
                kept.insert(c.clone(), values);
            }
        }
        Ok(Self {
            n: n.unwrap_or(0),
            binding,
            columns: kept,
            kinds: kind_map,
            weights: None,
        })
    }

    /// Shorthand for scalar vertices whose single column shares the vertex name.
    pub fn from_scalar_columns(
        columns: Vec<(&str, Vec<f64>)>,
        binary: &[&str],
    ) -> Result<Self, DataError> {
        let binding = columns
            .iter()
            .map(|(n, _)| (n.to_string(), vec![n.to_string()]))
            .collect();
        let kinds = binary
            .iter()
            .map(|b| (b.to_string(), ColumnKind::Binary))
            .collect();
        let cols = columns.into_iter().map(|(n, v)| (n.to_string(), v)).collect();
        Self::new(binding, cols, &kinds)
    }

    /// Same columns grouped under a different vertex binding (for example
    /// after merging vertices). Columns not named in `binding` are dropped.
    pub fn rebind(&self, binding: Binding) -> Result<Self, DataError> {
        let mut seen = std::collections::BTreeSet::new();
        for (_, cols) in &binding {
            for c in cols {
                if !self.columns.contains_key(c) {
                    return Err(DataError::MissingColumn(c.clone()));
                }
                if !seen.insert(c.clone()) {
                    return Err(DataError::DuplicateColumn(c.clone()));
                }
            }
        }
        let columns = self
            .columns
            .iter()
            .filter(|(k, _)| seen.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let kinds = self
            .kinds
            .iter()
            .filter(|(k, _)| seen.contains(*k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        Ok(Dataset {
            n: self.n,
            binding,
            columns,
            kinds,
            weights: self.weights.clone(),
        })
    }

    /// Attaches row weights (non-negative, finite, positive total).
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, DataError> {
        if weights.len() != self.n {
            return Err(DataError::BadWeights("length differs from row count".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(DataError::BadWeights("weights must be finite, non-negative, with positive sum".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn binding(&self) -> &Binding {
        &self.binding
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.binding.iter().any(|(name, _)| name == v)
    }

    /// Column names spanned by vertex `v`.
    pub fn vertex_columns(&self, v: &str) -> Result<&[String], DataError> {
        self.binding
            .iter()
            .find(|(name, _)| name == v)
            .map(|(_, cols)| cols.as_slice())
            .ok_or_else(|| DataError::UnknownVertex(v.to_string()))
    }

    pub fn column(&self, c: &str) -> Result<&[f64], DataError> {
        self.columns
            .get(c)
            .map(|v| v.as_slice())
            .ok_or_else(|| DataError::MissingColumn(c.to_string()))
    }

    /// The single column of a scalar vertex (or the first column of a block).
    pub fn scalar(&self, v: &str) -> Result<&[f64], DataError> {
        let cols = self.vertex_columns(v)?;
        self.column(&cols[0])
    }

    pub fn kind(&self, c: &str) -> Option<ColumnKind> {
        self.kinds.get(c).copied()
    }

    /// True when every column of vertex `v` is binary.
    pub fn vertex_is_binary(&self, v: &str) -> bool {
        self.vertex_columns(v)
            .map(|cols| cols.iter().all(|c| self.kind(c) == Some(ColumnKind::Binary)))
            .unwrap_or(false)
    }

    /// Empirical (possibly weighted) mean of per-row values.
    pub fn mean(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        match &self.weights {
            None => pairwise_sum(values) / self.n as f64,
            Some(w) => {
                let prod: Vec<f64> = values.iter().zip(w).map(|(v, w)| v * w).collect();
                pairwise_sum(&prod) / pairwise_sum(w)
            }
        }
    }

    /// Dataset restricted to the given rows (weights follow).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), rows.iter().map(|&r| v[r]).collect()))
            .collect();
        Dataset {
            n: rows.len(),
            binding: self.binding.clone(),
            columns,
            kinds: self.kinds.clone(),
            weights: self
                .weights
                .as_ref()
                .map(|w| rows.iter().map(|&r| w[r]).collect()),
        }
    }

    /// Loads a CSV file with a header row. Cells are parsed with `.` as the
    /// decimal separator regardless of locale.
    pub fn load_csv(
        path: impl AsRef<Path>,
        binding: Binding,
        kinds: &BTreeMap<String, ColumnKind>,
    ) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, binding, kinds)
    }

    pub fn read_csv<R: std::io::Read>(
        reader: R,
        binding: Binding,
        kinds: &BTreeMap<String, ColumnKind>,
    ) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let wanted: Vec<&String> = binding.iter().flat_map(|(_, cols)| cols.iter()).collect();
        let mut index = Vec::with_capacity(wanted.len());
        for c in &wanted {
            let i = headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| DataError::MissingColumn((*c).clone()))?;
            index.push(i);
        }
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, &i) in index.iter().enumerate() {
                let cell = rec.get(i).unwrap_or("").trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                    return Err(DataError::MissingValue {
                        row,
                        column: wanted[j].clone(),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                    row,
                    column: wanted[j].clone(),
                    value: cell.to_string(),
                })?;
                data[j].push(v);
            }
        }
        let columns = wanted.into_iter().cloned().zip(data).collect();
        Self::new(binding, columns, kinds)
    }

    /// Writes the bound columns in binding order. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let cols: Vec<&String> = self.binding.iter().flat_map(|(_, c)| c.iter()).collect();
        w.write_record(cols.iter().map(|c| c.as_str()))?;
        for r in 0..self.n {
            w.write_record(cols.iter().map(|c| format!("{:?}", self.columns[*c][r])))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks the dataset against a treatment/outcome query on `graph`.
    pub fn validate_query(&self, graph: &Admg, treatment: &str, outcome: &str) -> Vec<QueryIssue> {
        let mut out = Vec::new();
        for v in graph.vertices() {
            match self.vertex_columns(&v.name) {
                Err(_) => out.push(QueryIssue::MissingVertex(v.name.clone())),
                Ok(cols) if cols.len() != v.arity => out.push(QueryIssue::ArityMismatch {
                    vertex: v.name.clone(),
                    graph: v.arity,
                    data: cols.len(),
                }),
                Ok(_) => {}
            }
        }
        if !graph.contains(outcome) || !self.has_vertex(outcome) {
            out.push(QueryIssue::MissingOutcome(outcome.to_string()));
        }
        match self.vertex_columns(treatment) {
            Err(_) => out.push(QueryIssue::MissingVertex(treatment.to_string())),
            Ok(cols) => {
                if cols.len() != 1 || !self.vertex_is_binary(treatment) {
                    out.push(QueryIssue::TreatmentNotBinary(treatment.to_string()));
                } else {
                    let a = self.column(&cols[0]).unwrap();
                    let w = self.weights.as_deref();
                    for level in [0.0, 1.0] {
                        let present = a.iter().enumerate().any(|(i, &x)| {
                            x == level && w.map_or(true, |w| w[i] > 0.0)
                        });
                        if !present {
                            out.push(QueryIssue::DegenerateArm(level as u8));
                        }
                    }
                }
            }
        }
        out
    }
}

/// A problem found by [`Dataset::validate_query`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryIssue {
    MissingVertex(String),
    MissingOutcome(String),
    ArityMismatch { vertex: String, graph: usize, data: usize },
    TreatmentNotBinary(String),
    DegenerateArm(u8),
}

impl std::fmt::Display for QueryIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryIssue::MissingVertex(v) => write!(f, "vertex {v} has no data columns"),
            QueryIssue::MissingOutcome(v) => write!(f, "outcome {v} missing"),
            QueryIssue::ArityMismatch { vertex, graph, data } => write!(
                f,
                "arity mismatch for {vertex}: graph says {graph}, data has {data} columns"
            ),
            QueryIssue::TreatmentNotBinary(v) => write!(f, "treatment {v} is not a single binary column"),
            QueryIssue::DegenerateArm(a) => write!(f, "degenerate treatment arm: no rows with treatment = {a}"),
        }
    }
}

/// Pairwise (cascade) summation; deterministic and accurate for long vectors.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
