//! Supervised learners used for every nuisance regression.
//!
//! All nuisance fits (outcome regression, propensity, sequential
//! regressions, the Bayes-route treatment regressions) go through
//! [`Learner`], so alternative learners can be plugged in without touching
//! the estimators.

mod design;
mod linear;
mod logistic;
mod tree;

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;

pub use design::{raw_matrix, Basis, DesignSpec};
pub use linear::{fit_ols, fit_wls, LinearModel, RIDGE_JITTER};
pub use logistic::{expit, fit_logistic, logit, LogisticModel, IRLS_MAX_ITER, IRLS_TOL};
pub use tree::{TreeEnsemble, TreeParams};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no rows to fit")]
    ZeroRows,
    #[error("single-class response")]
    SingleClass,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("covariance not positive definite for `{0}`")]
    NotPositiveDefinite(String),
    #[error("insufficient arm: {0}")]
    InsufficientArm(String),
    #[error("degenerate treatment arm: {0}")]
    DegenerateArm(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// What the response of a regression is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Response {
    /// Real-valued; fitted by least squares.
    Continuous,
    /// Values in [0, 1] (binary labels or fractional pseudo-outcomes);
    /// fitted on the logistic scale.
    Probability,
}

/// A fitted regression function of the raw predictor columns.
pub trait Fitted: Send + Sync {
    fn predict(&self, raw: &DMatrix<f64>) -> Vec<f64>;

    /// Free-form notes, e.g. rank deficiency or separation.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }
}

/// The supervised-learner contract: fit a regression of `y` on raw
/// predictor columns (no intercept column; the learner adds its own).
pub trait Learner: Send + Sync + fmt::Debug {
    fn fit(
        &self,
        raw: &DMatrix<f64>,
        y: &[f64],
        w: Option<&[f64]>,
        response: Response,
    ) -> Result<Box<dyn Fitted>, FitError>;
}

/// Serializable choice of learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    /// Least squares or logistic regression on a basis expansion.
    Parametric {
        basis: Basis,
        #[serde(default = "yes")]
        intercept: bool,
    },
    /// Cell means over the distinct predictor configurations.
    Saturated,
    /// Bagged regression trees.
    Trees {
        trees: usize,
        depth: usize,
        min_leaf: usize,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn yes() -> bool {
    true
}

fn default_bins() -> usize {
    32
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::Parametric {
            basis: Basis::MainTerms,
            intercept: true,
        }
    }
}

impl LearnerSpec {
    pub fn parametric(basis: Basis) -> Self {
        LearnerSpec::Parametric { basis, intercept: true }
    }

    pub fn build(&self) -> Result<Box<dyn Learner>, FitError> {
        Ok(match self {
            LearnerSpec::Parametric { basis, intercept } => {
                basis.validate()?;
                Box::new(Parametric {
                    basis: *basis,
                    intercept: *intercept,
                })
            }
            LearnerSpec::Saturated => Box::new(Saturated),
            LearnerSpec::Trees {
                trees,
                depth,
                min_leaf,
                bins,
                seed,
            } => {
                if *trees == 0 || *depth == 0 {
                    return Err(FitError::Config("trees and depth must be positive".into()));
                }
                Box::new(Trees {
                    trees: *trees,
                    depth: *depth,
                    min_leaf: *min_leaf,
                    bins: *bins,
                    seed: *seed,
                })
            }
        })
    }
}

/// Basis-expanded linear or logistic regression.
#[derive(Debug, Clone)]
pub struct Parametric {
    pub basis: Basis,
    pub intercept: bool,
}

enum ParametricFit {
    Linear(Basis, bool, LinearModel),
    Logistic(Basis, bool, LogisticModel),
}

impl Fitted for ParametricFit {
    fn predict(&self, raw: &DMatrix<f64>) -> Vec<f64> {
        match self {
            ParametricFit::Linear(b, i, m) => m.predict(&b.expand(raw, *i)),
            ParametricFit::Logistic(b, i, m) => m.predict(&b.expand(raw, *i)),
        }
    }

    fn notes(&self) -> Vec<String> {
        match self {
            ParametricFit::Linear(_, _, m) if m.rank_deficient => vec!["rank deficient".into()],
            ParametricFit::Logistic(_, _, m) => {
                let mut v = Vec::new();
                if m.separation {
                    v.push("separation".into());
                } else if !m.converged {
                    v.push(format!("logistic fit did not converge in {} iterations", m.iterations));
                }
                v
            }
            _ => Vec::new(),
        }
    }
}

impl Learner for Parametric {
    fn fit(
        &self,
        raw: &DMatrix<f64>,
        y: &[f64],
        w: Option<&[f64]>,
        response: Response,
    ) -> Result<Box<dyn Fitted>, FitError> {
        let x = self.basis.expand(raw, self.intercept);
        Ok(match response {
            Response::Continuous => Box::new(ParametricFit::Linear(self.basis, self.intercept, fit_wls(&x, y, w)?)),
            Response::Probability => Box::new(ParametricFit::Logistic(
                self.basis,
                self.intercept,
                fit_logistic(&x, y, w)?,
            )),
        })
    }
}

/// Cell-mean regression for discrete predictors. Unseen configurations get
/// the overall mean.
#[derive(Debug, Clone)]
pub struct Saturated;

struct CellMeans {
    cells: HashMap<Vec<u64>, f64>,
    fallback: f64,
}

fn row_key(raw: &DMatrix<f64>, r: usize) -> Vec<u64> {
    (0..raw.ncols()).map(|c| raw[(r, c)].to_bits()).collect()
}

impl Fitted for CellMeans {
    fn predict(&self, raw: &DMatrix<f64>) -> Vec<f64> {
        (0..raw.nrows())
            .map(|r| *self.cells.get(&row_key(raw, r)).unwrap_or(&self.fallback))
            .collect()
    }
}

impl Learner for Saturated {
    fn fit(
        &self,
        raw: &DMatrix<f64>,
        y: &[f64],
        w: Option<&[f64]>,
        _response: Response,
    ) -> Result<Box<dyn Fitted>, FitError> {
        if raw.nrows() == 0 {
            return Err(FitError::ZeroRows);
        }
        let mut acc: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
        let (mut ts, mut tw) = (0.0, 0.0);
        for r in 0..raw.nrows() {
            let wr = w.map_or(1.0, |w| w[r]);
            if wr <= 0.0 {
                continue;
            }
            let e = acc.entry(row_key(raw, r)).or_insert((0.0, 0.0));
            e.0 += wr * y[r];
            e.1 += wr;
            ts += wr * y[r];
            tw += wr;
        }
        if tw <= 0.0 {
            return Err(FitError::ZeroRows);
        }
        let cells = acc.into_iter().map(|(k, (s, t))| (k, s / t)).collect();
        Ok(Box::new(CellMeans {
            cells,
            fallback: ts / tw,
        }))
    }
}

/// Bagged regression trees; probabilities are leaf means for [0, 1] responses.
#[derive(Debug, Clone)]
pub struct Trees {
    pub trees: usize,
    pub depth: usize,
    pub min_leaf: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Fitted for TreeEnsemble {
    fn predict(&self, raw: &DMatrix<f64>) -> Vec<f64> {
        TreeEnsemble::predict(self, raw)
    }
}

impl Learner for Trees {
    fn fit(
        &self,
        raw: &DMatrix<f64>,
        y: &[f64],
        w: Option<&[f64]>,
        _response: Response,
    ) -> Result<Box<dyn Fitted>, FitError> {
        if raw.nrows() == 0 {
            return Err(FitError::ZeroRows);
        }
        let params = TreeParams {
            trees: self.trees,
            depth: self.depth,
            min_leaf: self.min_leaf,
            bins: self.bins,
            seed: self.seed,
        };
        Ok(Box::new(TreeEnsemble::fit(raw, y, w, &params)))
    }
}
