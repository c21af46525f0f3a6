//! Conditional Gaussian densities for (possibly multivariate) mediators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::learn::{fit_wls, Basis, FitError, LinearModel};

/// Diagonal loading added to the residual covariance.
pub const COV_LOADING: f64 = 1e-8;

/// Multivariate linear-Gaussian regression: one linear mean model per
/// component and a shared residual covariance.
pub struct ConditionalGaussian {
    pub basis: Basis,
    pub intercept: bool,
    pub means: Vec<LinearModel>,
    pub covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ConditionalGaussian {
    /// `raw` holds the predictor columns, `targets` the component columns.
    pub fn fit(
        raw: &DMatrix<f64>,
        targets: &[Vec<f64>],
        w: Option<&[f64]>,
        basis: Basis,
        intercept: bool,
        name: &str,
    ) -> Result<Self, FitError> {
        let x = basis.expand(raw, intercept);
        let n = x.nrows();
        let d = targets.len();
        let mut means = Vec::with_capacity(d);
        let mut resid = DMatrix::<f64>::zeros(n, d);
        for (j, t) in targets.iter().enumerate() {
            let m = fit_wls(&x, t, w)?;
            let fitted = m.predict(&x);
            for r in 0..n {
                resid[(r, j)] = t[r] - fitted[r];
            }
            means.push(m);
        }
        let (denom, weights): (f64, Vec<f64>) = match w {
            None => ((n.saturating_sub(x.ncols())).max(1) as f64, vec![1.0; n]),
            Some(w) => (w.iter().sum(), w.to_vec()),
        };
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let s: f64 = (0..n).map(|r| weights[r] * resid[(r, a)] * resid[(r, b)]).sum::<f64>() / denom;
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
            cov[(a, a)] += COV_LOADING;
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| FitError::NotPositiveDefinite(name.to_string()))?;
        Ok(Self {
            basis,
            intercept,
            means,
            covariance: cov,
            chol,
        })
    }

    fn mean_at(&self, raw: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let x = self.basis.expand(raw, self.intercept);
        self.means.iter().map(|m| m.predict(&x)).collect()
    }

    /// Half squared Mahalanobis distances of `z` from the means at `raw`.
    fn half_mahalanobis(&self, raw: &DMatrix<f64>, z: &[Vec<f64>]) -> Vec<f64> {
        let mu = self.mean_at(raw);
        let d = z.len();
        (0..raw.nrows())
            .map(|r| {
                let e = DVector::from_fn(d, |j, _| z[j][r] - mu[j][r]);
                let sol = self.chol.solve(&e);
                0.5 * e.dot(&sol)
            })
            .collect()
    }

    /// log f(z | raw_num) - log f(z | raw_den), row by row. The
    /// normalising constants cancel because the covariance is shared.
    pub fn log_ratio(&self, raw_num: &DMatrix<f64>, raw_den: &DMatrix<f64>, z: &[Vec<f64>]) -> Vec<f64> {
        let qn = self.half_mahalanobis(raw_num, z);
        let qd = self.half_mahalanobis(raw_den, z);
        qn.iter().zip(&qd).map(|(a, b)| b - a).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_of_shifted_unit_gaussians() {
        // z = a + noise with residual variance near 1; ratio f(z|a=1)/f(z|a=0) = exp(z - 1/2)
        let n = 200;
        let a: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let z: Vec<f64> = (0..n)
            .map(|i| a[i] + if (i / 2) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let raw = DMatrix::from_column_slice(n, 1, &a);
        let g = ConditionalGaussian::fit(&raw, &[z], None, Basis::MainTerms, true, "Z").unwrap();
        let probe = vec![vec![0.3]];
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::from_element(1, 1, 0.0);
        let lr = g.log_ratio(&one, &zero, &probe)[0];
        let var = g.covariance[(0, 0)];
        assert!((lr - (0.3 - 0.5) / var).abs() < 1e-9);
    }
}
