//! Plug-in, one-step and TMLE estimators of the counterfactual mean
//! E[Y(a0)], built on the efficient influence function.

mod crossfit;
mod oracle;
mod tmle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::graph::{CausalPartition, GraphError};
use crate::learn::FitError;
use crate::nuisance::{NuisanceConfig, NuisanceFitter, NuisanceSet, Strategy};

pub use crossfit::FoldPlan;
pub use oracle::{brute_force_psi, JointTable, MASS_TOL};
pub use tmle::{tmle, solve_logistic_fluctuation, TmleConfig, TmleStep, TmleTrace};

/// Normal quantile used for the 95% intervals.
pub const Z975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("positivity violation: zero mass on {0}")]
    Positivity(String),
    #[error("joint table: {0}")]
    Table(String),
    #[error("mismatched reports: {0}")]
    Mismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Plugin,
    Onestep,
    Tmle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Plugin, EstimatorKind::Onestep, EstimatorKind::Tmle];

    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Onestep => "onestep",
            EstimatorKind::Tmle => "tmle",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plugin" => Ok(EstimatorKind::Plugin),
            "onestep" => Ok(EstimatorKind::Onestep),
            "tmle" => Ok(EstimatorKind::Tmle),
            other => Err(format!("unknown estimator `{other}` (expected plugin, onestep or tmle)")),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Row-wise influence function split into its blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct EifComponents {
    /// I(A = a_Y) R_Y (Y - μ).
    pub outcome: Vec<f64>,
    /// I(A = a_{Z_k}) R_{Z_k} (B_{k+1} - B_k), one vector per mediator.
    pub mediators: Vec<Vec<f64>>,
    /// (I(A = a1) - π(a1)) B_1.
    pub treatment: Vec<f64>,
    /// π(a1) B_1 + I(A = a0) Y - ψ.
    pub remainder: Vec<f64>,
    pub total: Vec<f64>,
}

impl EifComponents {
    /// Empirical means of (outcome, mediators, treatment, remainder, total).
    pub fn means(&self, data: &Dataset) -> (f64, Vec<f64>, f64, f64, f64) {
        (
            data.mean(&self.outcome),
            self.mediators.iter().map(|m| data.mean(m)).collect(),
            data.mean(&self.treatment),
            data.mean(&self.remainder),
            data.mean(&self.total),
        )
    }
}

fn indicator(a: &[f64], level: f64) -> Vec<f64> {
    a.iter().map(|&x| if x == level { 1.0 } else { 0.0 }).collect()
}

/// Evaluates the influence function at nuisances `q` and target value `psi`.
pub fn eif(
    data: &Dataset,
    partition: &CausalPartition,
    q: &NuisanceSet,
    psi: f64,
) -> Result<EifComponents, EstimateError> {
    let n = data.n();
    q.check()?;
    if q.n() != n || q.num_mediators() != partition.num_mediators() {
        return Err(EstimateError::Mismatch("nuisance caches do not match the data or partition".into()));
    }
    let a = data.scalar(partition.treatment())?;
    let y = data.scalar(partition.outcome())?;
    let a0 = q.a0;
    let a1 = 1.0 - a0;
    let kk = partition.num_mediators();
    let r = q.ratio_products();
    let ind_y = indicator(a, partition.outcome_label().value(a0));
    let outcome: Vec<f64> = (0..n).map(|i| ind_y[i] * r[kk][i] * (y[i] - q.outcome[i])).collect();
    let mediators: Vec<Vec<f64>> = (0..kk)
        .map(|k| {
            let ind = indicator(a, partition.label(k).value(a0));
            let next = q.regression(k + 1);
            let cur = q.regression(k);
            (0..n).map(|i| ind[i] * r[k][i] * (next[i] - cur[i])).collect()
        })
        .collect();
    let b1 = q.first_regression();
    let treatment: Vec<f64> = (0..n)
        .map(|i| ((a[i] == a1) as u8 as f64 - q.propensity[i]) * b1[i])
        .collect();
    let remainder: Vec<f64> = (0..n)
        .map(|i| q.propensity[i] * b1[i] + if a[i] == a0 { y[i] } else { 0.0 } - psi)
        .collect();
    let total = (0..n)
        .map(|i| outcome[i] + mediators.iter().map(|m| m[i]).sum::<f64>() + treatment[i] + remainder[i])
        .collect();
    Ok(EifComponents {
        outcome,
        mediators,
        treatment,
        remainder,
        total,
    })
}

/// P_n[π(a1) B_1 + I(A = a0) Y].
pub fn plug_in_value(data: &Dataset, partition: &CausalPartition, q: &NuisanceSet) -> Result<f64, EstimateError> {
    let a = data.scalar(partition.treatment())?;
    let y = data.scalar(partition.outcome())?;
    let b1 = q.first_regression();
    let vals: Vec<f64> = (0..data.n())
        .map(|i| q.propensity[i] * b1[i] + if a[i] == q.a0 { y[i] } else { 0.0 })
        .collect();
    Ok(data.mean(&vals))
}

/// Mean and standard deviation of per-row values (weighted when the data
/// carry weights; otherwise the n - 1 sample SD).
pub fn moments(data: &Dataset, values: &[f64]) -> (f64, f64) {
    let m = data.mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    let n = data.n() as f64;
    let var = match data.weights() {
        Some(_) => data.mean(&sq),
        None if n > 1.0 => data.mean(&sq) * n / (n - 1.0),
        None => f64::NAN,
    };
    (m, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Target level; `None` for a contrast.
    pub a0: Option<f64>,
    pub psi: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub estimator: EstimatorKind,
    pub strategy: Strategy,
    pub converged: bool,
    pub iterations: usize,
    pub eif_mean: f64,
    pub diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<TmleTrace>,
    #[serde(skip)]
    pub sigma: Option<f64>,
    #[serde(skip)]
    pub eif: Vec<f64>,
    #[serde(skip)]
    pub n: usize,
    /// Nuisances after targeting (TMLE only).
    #[serde(skip)]
    pub targeted: Option<NuisanceSet>,
}

impl EstimateReport {
    fn with_eif(
        a0: Option<f64>,
        psi: f64,
        estimator: EstimatorKind,
        strategy: Strategy,
        data: &Dataset,
        eif: Vec<f64>,
    ) -> Self {
        let (mean, sd) = moments(data, &eif);
        let se = sd / (data.n() as f64).sqrt();
        Self {
            a0,
            psi,
            se: Some(se),
            ci_lower: Some(psi - Z975 * se),
            ci_upper: Some(psi + Z975 * se),
            estimator,
            strategy,
            converged: true,
            iterations: 0,
            eif_mean: mean,
            diagnostics: Vec::new(),
            trace: None,
            sigma: Some(sd),
            eif,
            n: data.n(),
            targeted: None,
        }
    }

    /// Whether the 95% interval covers `truth`.
    pub fn covers(&self, truth: f64) -> Option<bool> {
        Some(self.ci_lower? <= truth && truth <= self.ci_upper?)
    }

    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci_upper? - self.ci_lower?)
    }
}

/// Plug-in estimate. It is not asymptotically linear, so no SE is attached.
pub fn plug_in(data: &Dataset, partition: &CausalPartition, q: &NuisanceSet) -> Result<EstimateReport, EstimateError> {
    let psi = plug_in_value(data, partition, q)?;
    let phi = eif(data, partition, q, psi)?;
    Ok(EstimateReport {
        a0: Some(q.a0),
        psi,
        se: None,
        ci_lower: None,
        ci_upper: None,
        estimator: EstimatorKind::Plugin,
        strategy: q.strategy,
        converged: true,
        iterations: 0,
        eif_mean: data.mean(&phi.total),
        diagnostics: {
            let mut d = vec!["plug-in: no valid SE".to_string()];
            d.extend(q.notes.iter().cloned());
            d
        },
        trace: None,
        sigma: None,
        eif: Vec::new(),
        n: data.n(),
        targeted: None,
    })
}

/// Plug-in plus the empirical mean of the estimated influence function.
pub fn one_step(data: &Dataset, partition: &CausalPartition, q: &NuisanceSet) -> Result<EstimateReport, EstimateError> {
    let plug = plug_in_value(data, partition, q)?;
    let phi = eif(data, partition, q, plug)?;
    let correction = data.mean(&phi.total);
    let psi = plug + correction;
    // centre at the corrected value
    let centred: Vec<f64> = phi.total.iter().map(|v| v - correction).collect();
    let mut rep = EstimateReport::with_eif(Some(q.a0), psi, EstimatorKind::Onestep, q.strategy, data, centred);
    rep.eif_mean = correction;
    rep.diagnostics.extend(q.notes.iter().cloned());
    Ok(rep)
}

/// Difference of two reports for levels 1 and 0 on the same data; the SE
/// comes from the row-wise difference of their influence functions.
pub fn ace(
    report_a1: &EstimateReport,
    report_a0: &EstimateReport,
    data: &Dataset,
) -> Result<EstimateReport, EstimateError> {
    if report_a1.estimator != report_a0.estimator || report_a1.strategy != report_a0.strategy {
        return Err(EstimateError::Mismatch("reports use different estimators or strategies".into()));
    }
    if report_a1.n != report_a0.n || report_a1.n != data.n() {
        return Err(EstimateError::Mismatch("reports come from different datasets".into()));
    }
    if report_a1.a0 != Some(1.0) || report_a0.a0 != Some(0.0) {
        return Err(EstimateError::Mismatch("expected reports for levels 1 and 0".into()));
    }
    let psi = report_a1.psi - report_a0.psi;
    let mut rep = if report_a1.eif.is_empty() || report_a0.eif.is_empty() {
        EstimateReport {
            se: None,
            ci_lower: None,
            ci_upper: None,
            sigma: None,
            eif: Vec::new(),
            diagnostics: vec!["plug-in: no valid SE".into()],
            ..report_a1.clone()
        }
    } else {
        let diff: Vec<f64> = report_a1.eif.iter().zip(&report_a0.eif).map(|(a, b)| a - b).collect();
        EstimateReport::with_eif(None, psi, report_a1.estimator, report_a1.strategy, data, diff)
    };
    rep.a0 = None;
    rep.psi = psi;
    rep.converged = report_a1.converged && report_a0.converged;
    rep.iterations = report_a1.iterations.max(report_a0.iterations);
    rep.trace = None;
    rep.targeted = None;
    Ok(rep)
}

/// Everything needed to go from data to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub nuisance: NuisanceConfig,
    /// Number of cross-fitting folds; `None` fits on the full sample.
    pub crossfit: Option<usize>,
    pub tmle: TmleConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            nuisance: NuisanceConfig::default(),
            crossfit: None,
            tmle: TmleConfig::default(),
        }
    }
}

/// Fits nuisances once (optionally cross-fitted) and computes every
/// requested estimator for level `a0`.
pub fn estimate_many(
    data: &Dataset,
    partition: &CausalPartition,
    config: &EstimatorConfig,
    kinds: &[EstimatorKind],
    a0: f64,
) -> Result<Vec<EstimateReport>, EstimateError> {
    let plan = match config.crossfit {
        Some(k) => Some(FoldPlan::new(data.n(), k, config.nuisance.seed)?),
        None => None,
    };
    estimate_with_plan(data, partition, config, kinds, a0, plan.as_ref())
}

/// As [`estimate_many`] with an explicit fold plan.
pub fn estimate_with_plan(
    data: &Dataset,
    partition: &CausalPartition,
    config: &EstimatorConfig,
    kinds: &[EstimatorKind],
    a0: f64,
    plan: Option<&FoldPlan>,
) -> Result<Vec<EstimateReport>, EstimateError> {
    let fitter = NuisanceFitter::new(data, partition, &config.nuisance, plan)?;
    let q = fitter.fit(a0)?;
    kinds
        .iter()
        .map(|kind| {
            let mut rep = match kind {
                EstimatorKind::Plugin => plug_in(data, partition, &q)?,
                EstimatorKind::Onestep => one_step(data, partition, &q)?,
                EstimatorKind::Tmle => tmle(data, partition, q.clone(), Some(&fitter), &config.tmle)?,
            };
            if let Some(p) = plan {
                rep.diagnostics.push(format!("cross-fitted with {} folds", p.k()));
            }
            Ok(rep)
        })
        .collect()
}

/// Single estimator for level `a0`.
pub fn estimate(
    data: &Dataset,
    partition: &CausalPartition,
    config: &EstimatorConfig,
    kind: EstimatorKind,
    a0: f64,
) -> Result<EstimateReport, EstimateError> {
    Ok(estimate_many(data, partition, config, &[kind], a0)?.remove(0))
}

/// Cross-fitted estimate with `k` folds drawn from `seed`.
pub fn cross_fit(
    data: &Dataset,
    partition: &CausalPartition,
    config: &EstimatorConfig,
    kind: EstimatorKind,
    k: usize,
    seed: u64,
    a0: f64,
) -> Result<EstimateReport, EstimateError> {
    let plan = FoldPlan::new(data.n(), k, seed)?;
    Ok(estimate_with_plan(data, partition, config, &[kind], a0, Some(&plan))?.remove(0))
}
