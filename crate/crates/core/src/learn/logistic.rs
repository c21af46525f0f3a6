use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::fit_wls;
use super::FitError;

pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 100;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Logistic regression fitted by iteratively reweighted least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the classes are (numerically) perfectly separated; the
    /// coefficients are then the last iterate and predictions should be clipped.
    pub separation: bool,
}

impl LogisticModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|&e| expit(e)).collect()
    }
}

fn deviance(y: &[f64], mu: &[f64], w: Option<&[f64]>) -> f64 {
    let mut d = 0.0;
    for i in 0..y.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        let m = mu[i].clamp(1e-300, 1.0 - 1e-16);
        if y[i] > 0.0 {
            d -= wi * y[i] * m.ln();
        }
        if y[i] < 1.0 {
            d -= wi * (1.0 - y[i]) * (1.0 - m).ln();
        }
    }
    2.0 * d
}

/// Maximum-likelihood logistic fit. Responses may be fractional in [0, 1]
/// (quasi-binomial); both "classes" must carry positive weight.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> Result<LogisticModel, FitError> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return Err(FitError::ZeroRows);
    }
    if y.len() != n || w.map_or(false, |w| w.len() != n) {
        return Err(FitError::Shape("response length differs from design rows".into()));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(FitError::Shape("logistic response outside [0, 1]".into()));
    }
    let active = |i: usize| w.map_or(true, |w| w[i] > 0.0);
    let has_pos = (0..n).any(|i| active(i) && y[i] > 0.0);
    let has_neg = (0..n).any(|i| active(i) && y[i] < 1.0);
    if !has_pos || !has_neg {
        return Err(FitError::SingleClass);
    }
    let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);

    let mut beta = DVector::<f64>::zeros(p);
    let mut eta: Vec<f64> = vec![0.0; n];
    let mut mu: Vec<f64> = vec![0.5; n];
    let mut dev = deviance(y, &mu, w);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    for it in 1..=IRLS_MAX_ITER {
        iterations = it;
        let mut wt = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let v = (mu[i] * (1.0 - mu[i])).max(1e-12);
            wt[i] = w.map_or(1.0, |w| w[i]) * v;
            z[i] = eta[i] + (y[i] - mu[i]) / v;
        }
        let step = fit_wls(x, &z, Some(&wt))?;
        let mut cand = DVector::from_column_slice(&step.coefficients);
        let mut cand_eta: Vec<f64> = (x * &cand).iter().copied().collect();
        let mut cand_mu: Vec<f64> = cand_eta.iter().map(|&e| expit(e)).collect();
        let mut cand_dev = deviance(y, &cand_mu, w);
        let mut halvings = 0;
        while cand_dev > dev + 1e-10 * (1.0 + dev.abs()) && halvings < 30 {
            cand = (&beta + &cand) * 0.5;
            cand_eta = (x * &cand).iter().copied().collect();
            cand_mu = cand_eta.iter().map(|&e| expit(e)).collect();
            cand_dev = deviance(y, &cand_mu, w);
            halvings += 1;
        }
        let delta = (&cand - &beta).amax();
        beta = cand;
        eta = cand_eta;
        mu = cand_mu;
        dev = cand_dev;
        if binary && (0..n).all(|i| !active(i) || (y[i] - mu[i]).abs() < 1e-6) {
            separation = true;
            break;
        }
        if delta < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if !converged && binary && eta.iter().any(|e| e.abs() > 30.0) {
        separation = true;
    }
    Ok(LogisticModel {
        coefficients: beta.iter().copied().collect(),
        converged,
        iterations,
        separation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_coin_has_zero_intercept() {
        let x = DMatrix::from_element(10, 1, 1.0);
        let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let m = fit_logistic(&x, &y, None).unwrap();
        assert!(m.converged);
        assert!(m.coefficients[0].abs() < 1e-6);
    }

    #[test]
    fn separated_classes_are_flagged() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let x = DMatrix::from_fn(20, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
        let y: Vec<f64> = xs.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let m = fit_logistic(&x, &y, None).unwrap();
        assert!(m.separation);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = DMatrix::from_element(4, 1, 1.0);
        assert!(matches!(fit_logistic(&x, &[1.0; 4], None), Err(FitError::SingleClass)));
    }
}
