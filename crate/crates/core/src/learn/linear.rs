use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;

/// Ridge penalty used when the design is numerically rank deficient.
pub const RIDGE_JITTER: f64 = 1e-8;

/// Least-squares fit on an already expanded design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().copied().collect()
    }
}

pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel, FitError> {
    fit_wls(x, y, None)
}

/// Weighted least squares via a Householder QR of the row-scaled design.
/// Rank-deficient designs fall back to a ridge solution with penalty
/// [`RIDGE_JITTER`] computed from the SVD, and are flagged.
pub fn fit_wls(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> Result<LinearModel, FitError> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return Err(FitError::ZeroRows);
    }
    if y.len() != n || w.map_or(false, |w| w.len() != n) {
        return Err(FitError::Shape("response length differs from design rows".into()));
    }
    let sw: Vec<f64> = match w {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let xs = DMatrix::from_fn(n, p, |r, c| x[(r, c)] * sw[r]);
    let ys = DVector::from_fn(n, |r, _| y[r] * sw[r]);

    let (beta, rank_deficient) = if p == 0 {
        (DVector::zeros(0), false)
    } else {
        let qr = xs.clone().qr();
        let r = qr.r();
        let maxd = (0..p.min(n)).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let deficient = n < p || maxd == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * maxd);
        if deficient {
            let svd = xs.svd(true, true);
            let u = svd.u.as_ref().unwrap();
            let vt = svd.v_t.as_ref().unwrap();
            let uty = u.transpose() * &ys;
            let scaled = DVector::from_fn(uty.len(), |i, _| {
                let s = svd.singular_values[i];
                uty[i] * s / (s * s + RIDGE_JITTER)
            });
            (vt.transpose() * scaled, true)
        } else {
            let qty = qr.q().transpose() * &ys;
            let beta = r
                .solve_upper_triangular(&qty)
                .ok_or_else(|| FitError::Numerical("triangular solve failed".into()))?;
            (beta, false)
        }
    };
    let fitted = x * &beta;
    let (mut rss, mut wsum) = (0.0, 0.0);
    for i in 0..n {
        let wi = w.map_or(1.0, |w| w[i]);
        rss += wi * (y[i] - fitted[i]).powi(2);
        wsum += wi;
    }
    let residual_variance = match w {
        None => rss / (n.saturating_sub(p)).max(1) as f64,
        Some(_) => rss / wsum,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(FitError::Numerical("non-finite coefficients".into()));
    }
    Ok(LinearModel {
        coefficients: beta.iter().copied().collect(),
        residual_variance,
        rank_deficient,
    })
}
