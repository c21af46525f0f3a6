//! Data-generating processes and the replication harness.

mod dgp;
mod rng;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{pairwise_sum, DataError, Dataset};
use crate::estimators::{estimate_many, EstimateError, EstimateReport, EstimatorConfig, EstimatorKind};
use crate::graph::{CausalPartition, GraphError};
use crate::learn::FitError;
use crate::nuisance::Strategy;

pub use dgp::{Dgp, LinearLaw, Truth, M_COV};
pub use rng::derive_seed;

/// Monte-Carlo draws used for truth values unless configured otherwise.
pub const DEFAULT_TRUTH_DRAWS: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown data-generating process `{0}`")]
    UnknownDgp(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Where the truth comes from: a fixed number, or the Monte-Carlo oracle
/// with the given number of draws. Written `1.5` or `"monte_carlo(1000000)"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TruthRepr", into = "TruthRepr")]
pub enum TruthSpec {
    Value(f64),
    MonteCarlo(usize),
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::MonteCarlo(DEFAULT_TRUTH_DRAWS)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TruthRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<TruthRepr> for TruthSpec {
    type Error = String;
    fn try_from(r: TruthRepr) -> Result<Self, String> {
        match r {
            TruthRepr::Number(v) if v.is_finite() => Ok(TruthSpec::Value(v)),
            TruthRepr::Number(v) => Err(format!("truth must be finite, got {v}")),
            TruthRepr::Text(s) => s
                .trim()
                .strip_prefix("monte_carlo(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|d| d.trim().parse::<usize>().ok())
                .map(TruthSpec::MonteCarlo)
                .ok_or_else(|| format!("truth `{s}` is neither a number nor monte_carlo(N)")),
        }
    }
}

impl From<TruthSpec> for TruthRepr {
    fn from(t: TruthSpec) -> Self {
        match t {
            TruthSpec::Value(v) => TruthRepr::Number(v),
            TruthSpec::MonteCarlo(n) => TruthRepr::Text(format!("monte_carlo({n})")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SizesRepr {
    One(usize),
    Many(Vec<usize>),
}

fn sizes<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
    Ok(match SizesRepr::deserialize(d)? {
        SizesRepr::One(n) => vec![n],
        SizesRepr::Many(v) => v,
    })
}

/// One estimator configuration run on every replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub label: String,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub config: EstimatorConfig,
    /// Estimate on the graph with `M` and `L` merged into one vertex.
    #[serde(default)]
    pub merge_mediators: bool,
}

fn all_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

impl ArmSpec {
    pub fn new(label: impl Into<String>, config: EstimatorConfig) -> Self {
        Self {
            label: label.into(),
            estimators: all_estimators(),
            config,
            merge_mediators: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    /// Sample sizes; a single number is accepted.
    #[serde(deserialize_with = "sizes")]
    pub n: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub truth: TruthSpec,
    pub arms: Vec<ArmSpec>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.replications == 0 {
            return Err(SimError::Config("replications must be at least 1".into()));
        }
        if self.n.is_empty() {
            return Err(SimError::Config("no sample sizes given".into()));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 10) {
            return Err(SimError::Config(format!("sample size {n} is below 10")));
        }
        if self.a0 != 0.0 && self.a0 != 1.0 {
            return Err(SimError::Config("a0 must be 0 or 1".into()));
        }
        if self.arms.is_empty() {
            return Err(SimError::Config("no estimator arms given".into()));
        }
        for arm in &self.arms {
            if arm.estimators.is_empty() {
                return Err(SimError::Config(format!("arm `{}` has no estimators", arm.label)));
            }
        }
        let mut labels: Vec<&str> = self.arms.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::Config("arm labels must be unique".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Truth value, drawing the oracle from a seed derived from the master seed.
    pub fn truth(&self) -> Result<f64, SimError> {
        match self.truth {
            TruthSpec::Value(v) => Ok(v),
            TruthSpec::MonteCarlo(draws) => Ok(self.dgp.true_psi(self.a0, draws, derive_seed(self.seed, &[u64::MAX]))?.value),
        }
    }
}

/// One estimator's output on one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub arm: String,
    pub strategy: Strategy,
    pub estimator: EstimatorKind,
    pub psi: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

/// Summary of one (n, arm, estimator) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    pub arm: String,
    pub strategy: Strategy,
    pub estimator: EstimatorKind,
    pub replications: usize,
    pub failures: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Sample SD with divisor R - 1; absent when fewer than two estimates.
    pub sd: Option<f64>,
    pub mse: f64,
    /// Share of intervals covering the truth; absent without intervals.
    pub coverage: Option<f64>,
    pub ci_width: Option<f64>,
    pub sqrt_n_bias: f64,
    pub n_var: Option<f64>,
    pub non_converged: usize,
    /// Estimates outside [0, 1] (binary outcomes).
    pub outside_unit: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    pub diagnostics: Vec<String>,
}

impl MetricsTable {
    pub fn find(&self, n: usize, arm: &str, estimator: EstimatorKind) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.n == n && r.arm == arm && r.estimator == estimator)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dgp: Dgp,
    pub a0: f64,
    pub truth: f64,
    pub table: MetricsTable,
    pub records: Vec<ReplicationRecord>,
}

impl ExperimentResult {
    /// Estimates of one (n, arm, estimator) cell in replication order; failed
    /// replications give `None`.
    pub fn estimates(&self, n: usize, arm: &str, estimator: EstimatorKind) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.n == n && r.arm == arm && r.estimator == estimator)
            .map(|r| r.psi)
            .collect()
    }
}

fn run_arm(
    dgp: Dgp,
    data: &Dataset,
    arm: &ArmSpec,
    partitions: &(CausalPartition, Option<CausalPartition>),
    a0: f64,
    seed: u64,
) -> Result<Vec<EstimateReport>, SimError> {
    let mut config = arm.config.clone();
    config.nuisance.seed = seed;
    if arm.merge_mediators {
        let merged = data.rebind(dgp.merged_binding())?;
        let part = partitions.1.as_ref().expect("merged partition built for merging arms");
        Ok(estimate_many(&merged, part, &config, &arm.estimators, a0)?)
    } else {
        Ok(estimate_many(data, &partitions.0, &config, &arm.estimators, a0)?)
    }
}

/// Runs every arm on `replications` datasets per sample size. Replication
/// `r` at size `n` draws its data from `derive_seed(seed, [n, r])`, so
/// results do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, SimError> {
    config.validate()?;
    let truth = config.truth()?;
    let dgp = config.dgp;
    // the merged graph need not be primal fixable (ynotL), so only build it on demand
    let merged = if config.arms.iter().any(|a| a.merge_mediators) {
        Some(CausalPartition::new(&dgp.merged_graph(), "A", "Y")?)
    } else {
        None
    };
    let partitions = (dgp.partition(), merged);
    let jobs: Vec<(usize, usize)> = config
        .n
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let per_job: Vec<Result<Vec<ReplicationRecord>, SimError>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let rep_seed = derive_seed(config.seed, &[n as u64, r as u64]);
            let data = dgp.generate(n, rep_seed)?;
            let mut out = Vec::new();
            for (j, arm) in config.arms.iter().enumerate() {
                let arm_seed = derive_seed(rep_seed, &[j as u64]);
                let strategy = arm.config.nuisance.strategy;
                match run_arm(dgp, &data, arm, &partitions, config.a0, arm_seed) {
                    Ok(reports) => out.extend(reports.into_iter().map(|rep| ReplicationRecord {
                        n,
                        replication: r,
                        arm: arm.label.clone(),
                        strategy,
                        estimator: rep.estimator,
                        psi: Some(rep.psi).filter(|v| v.is_finite()),
                        se: rep.se,
                        ci_lower: rep.ci_lower,
                        ci_upper: rep.ci_upper,
                        converged: rep.converged,
                        iterations: rep.iterations,
                        error: (!rep.psi.is_finite()).then(|| "non-finite estimate".to_string()),
                    })),
                    Err(e) => out.extend(arm.estimators.iter().map(|&kind| ReplicationRecord {
                        n,
                        replication: r,
                        arm: arm.label.clone(),
                        strategy,
                        estimator: kind,
                        psi: None,
                        se: None,
                        ci_lower: None,
                        ci_upper: None,
                        converged: false,
                        iterations: 0,
                        error: Some(e.to_string()),
                    })),
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::with_capacity(jobs.len() * config.arms.len() * 3);
    for job in per_job {
        records.extend(job?);
    }
    let table = summarize(config, truth, &records);
    Ok(ExperimentResult {
        dgp,
        a0: config.a0,
        truth,
        table,
        records,
    })
}

/// Aggregates records in replication order (pairwise sums), so the table is
/// bit-identical for identical inputs.
fn summarize(config: &ExperimentConfig, truth: f64, records: &[ReplicationRecord]) -> MetricsTable {
    let mut table = MetricsTable::default();
    for &n in &config.n {
        for arm in &config.arms {
            for &kind in &arm.estimators {
                let cell: Vec<&ReplicationRecord> = records
                    .iter()
                    .filter(|r| r.n == n && r.arm == arm.label && r.estimator == kind)
                    .collect();
                let row = metrics_row(n, arm, kind, truth, &cell, &mut table.diagnostics);
                table.rows.push(row);
            }
        }
    }
    table
}

fn metrics_row(
    n: usize,
    arm: &ArmSpec,
    kind: EstimatorKind,
    truth: f64,
    cell: &[&ReplicationRecord],
    diagnostics: &mut Vec<String>,
) -> MetricsRow {
    let ok: Vec<&ReplicationRecord> = cell.iter().copied().filter(|r| r.psi.is_some()).collect();
    let psi: Vec<f64> = ok.iter().filter_map(|r| r.psi).collect();
    let r = psi.len();
    let rf = r as f64;
    let mean = if r > 0 { pairwise_sum(&psi) / rf } else { f64::NAN };
    let sd = if r >= 2 {
        let dev: Vec<f64> = psi.iter().map(|v| (v - mean).powi(2)).collect();
        Some((pairwise_sum(&dev) / (rf - 1.0)).sqrt())
    } else {
        diagnostics.push(format!(
            "n={n}, {}, {}: SD undefined with {r} successful replication(s)",
            arm.label, kind
        ));
        None
    };
    let sq_err: Vec<f64> = psi.iter().map(|v| (v - truth).powi(2)).collect();
    let mse = if r > 0 { pairwise_sum(&sq_err) / rf } else { f64::NAN };
    let intervals: Vec<(f64, f64)> = ok.iter().filter_map(|r| Some((r.ci_lower?, r.ci_upper?))).collect();
    let (coverage, ci_width) = if intervals.is_empty() {
        (None, None)
    } else {
        let m = intervals.len() as f64;
        let hits = intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count() as f64;
        let widths: Vec<f64> = intervals.iter().map(|(lo, hi)| hi - lo).collect();
        (Some(hits / m), Some(pairwise_sum(&widths) / m))
    };
    let bias = mean - truth;
    MetricsRow {
        n,
        arm: arm.label.clone(),
        strategy: arm.config.nuisance.strategy,
        estimator: kind,
        replications: cell.len(),
        failures: cell.len() - r,
        truth,
        mean,
        bias,
        sd,
        mse,
        coverage,
        ci_width,
        sqrt_n_bias: (n as f64).sqrt() * bias,
        n_var: sd.map(|s| n as f64 * s * s),
        non_converged: ok.iter().filter(|r| !r.converged).count(),
        outside_unit: psi.iter().filter(|v| !(0.0..=1.0).contains(*v)).count(),
    }
}

/// One point of a consistency curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub arm: String,
    pub estimator: EstimatorKind,
    pub sqrt_n_abs_bias: f64,
    /// Monte-Carlo SE of √n·|bias|, i.e. the SD of √n ψ̂ over √R.
    pub sqrt_n_bias_se: f64,
    pub n_var: Option<f64>,
    pub var_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCurve {
    pub truth: f64,
    pub var_phi: f64,
    pub points: Vec<CurvePoint>,
}

impl ConsistencyCurve {
    /// Plain whitespace-separated columns, one block per (arm, estimator).
    pub fn write_dat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# truth {:.10} var_phi {:.10}", self.truth, self.var_phi)?;
        let mut keys: Vec<(String, EstimatorKind)> = Vec::new();
        for p in &self.points {
            if !keys.contains(&(p.arm.clone(), p.estimator)) {
                keys.push((p.arm.clone(), p.estimator));
            }
        }
        for (arm, est) in keys {
            writeln!(w, "# {arm} {est}")?;
            writeln!(w, "# n sqrt_n_abs_bias sqrt_n_bias_se n_var var_phi")?;
            for p in self.points.iter().filter(|p| p.arm == arm && p.estimator == est) {
                let nv = p.n_var.map_or("nan".to_string(), |v| format!("{v:.6}"));
                writeln!(w, "{} {:.6} {:.6} {} {:.6}", p.n, p.sqrt_n_abs_bias, p.sqrt_n_bias_se, nv, p.var_phi)?;
            }
            writeln!(w)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// √n-scaled bias and n-scaled variance over an increasing grid of sample
/// sizes, next to Var Φ computed with exact nuisances on `oracle_n` rows
/// (defaults to the largest grid size).
pub fn consistency_curve(config: &ExperimentConfig, oracle_n: Option<usize>) -> Result<ConsistencyCurve, SimError> {
    if config.n.is_empty() {
        return Err(SimError::Config("empty sample-size grid".into()));
    }
    if config.n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::Config("sample-size grid must be increasing".into()));
    }
    let result = run_experiment(config)?;
    let big = oracle_n.unwrap_or(*config.n.last().expect("non-empty grid"));
    let var_phi = config
        .dgp
        .eif_variance(config.a0, result.truth, big, derive_seed(config.seed, &[u64::MAX - 1]))?;
    let points = result
        .table
        .rows
        .iter()
        .map(|row| {
            let ok = (row.replications - row.failures).max(1) as f64;
            CurvePoint {
                n: row.n,
                arm: row.arm.clone(),
                estimator: row.estimator,
                sqrt_n_abs_bias: row.sqrt_n_bias.abs(),
                sqrt_n_bias_se: row.n_var.map_or(f64::NAN, |v| (v / ok).sqrt()),
                n_var: row.n_var,
                var_phi,
            }
        })
        .collect();
    Ok(ConsistencyCurve {
        truth: result.truth,
        var_phi,
        points,
    })
}
