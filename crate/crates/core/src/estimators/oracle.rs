//! Exact evaluation of the identifying functional on a finite joint law.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::data::Dataset;
use crate::graph::CausalPartition;

use super::EstimateError;

/// Tolerance on the total mass of a joint table.
pub const MASS_TOL: f64 = 1e-9;

/// A joint probability table over scalar discrete vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    vertices: Vec<String>,
    configs: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl JointTable {
    /// Rows with zero mass are kept; rows must have non-negative mass and
    /// the total must be one within [`MASS_TOL`].
    pub fn new(vertices: Vec<String>, configs: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self, EstimateError> {
        if configs.len() != probs.len() || configs.iter().any(|c| c.len() != vertices.len()) {
            return Err(EstimateError::Table("rows and probabilities have inconsistent shapes".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EstimateError::Table("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(EstimateError::Table(format!("probabilities sum to {total}, not 1")));
        }
        let mut seen = BTreeSet::new();
        for c in &configs {
            if !seen.insert(c.iter().map(|x| x.to_bits()).collect::<Vec<_>>()) {
                return Err(EstimateError::Table("duplicate configuration".into()));
            }
        }
        Ok(Self { vertices, configs, probs })
    }

    /// Reads a CSV with one column per vertex and a probability column `p`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, EstimateError> {
        let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(|e| EstimateError::Table(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| EstimateError::Table(e.to_string()))?.clone();
        let p_col = headers
            .iter()
            .position(|h| h == "p")
            .ok_or_else(|| EstimateError::Table("no `p` column".into()))?;
        let vertices: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != p_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut configs = Vec::new();
        let mut probs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EstimateError::Table(e.to_string()))?;
            let mut row = Vec::with_capacity(vertices.len());
            for (i, cell) in rec.iter().enumerate() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| EstimateError::Table(format!("non-numeric cell `{cell}`")))?;
                if i == p_col {
                    probs.push(v);
                } else {
                    row.push(v);
                }
            }
            configs.push(row);
        }
        Self::new(vertices, configs, probs)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn configs(&self) -> &[Vec<f64>] {
        &self.configs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn col(&self, v: &str) -> Result<usize, EstimateError> {
        self.vertices
            .iter()
            .position(|x| x == v)
            .ok_or_else(|| EstimateError::Table(format!("vertex {v} not in table")))
    }

    /// The table as a weighted dataset (one row per configuration).
    /// Vertices whose values are all in {0, 1} are declared binary.
    pub fn to_dataset(&self) -> Result<Dataset, EstimateError> {
        let mut cols = Vec::new();
        let mut binary = Vec::new();
        for (j, v) in self.vertices.iter().enumerate() {
            let vals: Vec<f64> = self.configs.iter().map(|c| c[j]).collect();
            if vals.iter().all(|&x| x == 0.0 || x == 1.0) {
                binary.push(v.as_str());
            }
            cols.push((v.as_str(), vals));
        }
        Ok(Dataset::from_scalar_columns(cols, &binary)?.with_weights(self.probs.clone())?)
    }

    /// Empirical joint of the given columns of a dataset (weights respected).
    pub fn from_dataset(data: &Dataset, vertices: &[String]) -> Result<Self, EstimateError> {
        let cols = vertices
            .iter()
            .map(|v| data.scalar(v))
            .collect::<Result<Vec<_>, _>>()?;
        let mut mass: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
        let mut total = 0.0;
        for r in 0..data.n() {
            let w = data.weights().map_or(1.0, |w| w[r]);
            let cfg: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            let key = cfg.iter().map(|x| x.to_bits()).collect();
            mass.entry(key).or_insert((cfg, 0.0)).1 += w;
            total += w;
        }
        let (configs, probs) = mass.into_values().map(|(c, m)| (c, m / total)).unzip();
        let mut t = Self {
            vertices: vertices.to_vec(),
            configs,
            probs,
        };
        // renormalise to kill rounding drift
        let s: f64 = t.probs.iter().sum();
        t.probs.iter_mut().for_each(|p| *p /= s);
        Ok(t)
    }

    fn values_of(&self, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.configs.iter().map(|c| c[j]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    /// P(target = value | cond = given) with `given` pairs of (column, value).
    fn conditional(&self, target: usize, value: f64, given: &[(usize, f64)]) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, &p) in self.configs.iter().zip(&self.probs) {
            if given.iter().all(|&(j, v)| c[j] == v) {
                den += p;
                if c[target] == value {
                    num += p;
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }
}

fn describe(table: &JointTable, given: &[(usize, f64)]) -> String {
    if given.is_empty() {
        return "the empty event".into();
    }
    given
        .iter()
        .map(|&(j, v)| format!("{}={}", table.vertices[j], v))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Exact value of the identifying functional by full enumeration:
/// `E_X[P(a1 | mp(A)) Σ y P(y | ·, a_Y) Π_k P(z_k | ·, a_{Z_k})] + E[I(A = a0) Y]`.
pub fn brute_force_psi(table: &JointTable, partition: &CausalPartition, a0: f64) -> Result<f64, EstimateError> {
    if a0 != 0.0 && a0 != 1.0 {
        return Err(EstimateError::Config("a0 must be 0 or 1".into()));
    }
    let a = partition.treatment();
    let ja = table.col(a)?;
    let jy = table.col(partition.outcome())?;
    let a1 = 1.0 - a0;

    let pre: Vec<usize> = partition
        .pre_treatment()
        .iter()
        .map(|v| table.col(v))
        .collect::<Result<_, _>>()?;
    // post-treatment targets in order: mediators then the outcome
    // (column, conditioning columns, treatment level when A is in the pillow)
    let mut targets: Vec<(usize, Vec<usize>, Option<f64>)> = Vec::new();
    for (k, z) in partition.mediators().iter().enumerate() {
        let cond = partition
            .pillow_without_treatment(z)
            .iter()
            .map(|v| table.col(v))
            .collect::<Result<_, _>>()?;
        let level = partition.treatment_in_pillow(z).then(|| partition.label(k).value(a0));
        targets.push((table.col(z)?, cond, level));
    }
    let ycond = partition
        .pillow_without_treatment(partition.outcome())
        .iter()
        .map(|v| table.col(v))
        .collect::<Result<_, _>>()?;
    let ylevel = partition
        .treatment_in_pillow(partition.outcome())
        .then(|| partition.outcome_label().value(a0));
    targets.push((jy, ycond, ylevel));
    let amp: Vec<usize> = partition
        .pillow(a)
        .iter()
        .map(|v| table.col(v))
        .collect::<Result<_, _>>()?;

    // marginal of the pre-treatment block
    let mut px: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
    for (c, &p) in table.configs.iter().zip(&table.probs) {
        let vals: Vec<f64> = pre.iter().map(|&j| c[j]).collect();
        px.entry(vals.iter().map(|x| x.to_bits()).collect())
            .or_insert((vals, 0.0))
            .1 += p;
    }

    let mut first = 0.0;
    for (xvals, mass) in px.into_values() {
        if mass <= 0.0 {
            continue;
        }
        let mut assign: BTreeMap<usize, f64> = pre.iter().copied().zip(xvals.iter().copied()).collect();
        let given: Vec<(usize, f64)> = amp.iter().map(|&j| (j, assign[&j])).collect();
        let p_a1 = table
            .conditional(ja, a1, &given)
            .ok_or_else(|| EstimateError::Positivity(describe(table, &given)))?;
        if p_a1 == 0.0 {
            continue;
        }
        let inner = enumerate(table, &targets, 0, &mut assign, ja)?;
        first += mass * p_a1 * inner;
    }
    let second: f64 = table
        .configs
        .iter()
        .zip(&table.probs)
        .filter(|(c, _)| c[ja] == a0)
        .map(|(c, p)| p * c[jy])
        .sum();
    Ok(first + second)
}

/// Σ over the remaining targets of y times the product of conditionals.
fn enumerate(
    table: &JointTable,
    targets: &[(usize, Vec<usize>, Option<f64>)],
    i: usize,
    assign: &mut BTreeMap<usize, f64>,
    ja: usize,
) -> Result<f64, EstimateError> {
    let (j, cond, level) = &targets[i];
    let mut given: Vec<(usize, f64)> = cond.iter().map(|&c| (c, assign[&c])).collect();
    if let Some(level) = level {
        given.push((ja, *level));
    }
    let last = i + 1 == targets.len();
    let mut total = 0.0;
    for v in table.values_of(*j) {
        let p = table
            .conditional(*j, v, &given)
            .ok_or_else(|| EstimateError::Positivity(describe(table, &given)))?;
        if p == 0.0 {
            continue;
        }
        if last {
            total += p * v;
        } else {
            assign.insert(*j, v);
            total += p * enumerate(table, targets, i + 1, assign, ja)?;
            assign.remove(j);
        }
    }
    Ok(total)
}
