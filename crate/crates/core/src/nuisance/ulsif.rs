//! Unconstrained least-squares importance fitting (uLSIF) with a Gaussian
//! kernel: a direct estimate of p_num(x) / p_den(x) from two samples.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learn::FitError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlsifConfig {
    /// Kernel centres drawn from the numerator sample.
    pub centers: usize,
    /// Cross-validation folds for the ridge penalty.
    pub folds: usize,
    pub lambdas: Vec<f64>,
    /// Kernel widths tried, as multiples of the median distance between centres.
    pub width_scales: Vec<f64>,
    /// Smallest sample size accepted on either side.
    pub min_arm: usize,
}

impl Default for UlsifConfig {
    fn default() -> Self {
        Self {
            centers: 100,
            folds: 5,
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0],
            width_scales: vec![0.25, 0.5, 1.0, 2.0],
            min_arm: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ulsif {
    centers: DMatrix<f64>,
    sigma: f64,
    alpha: DVector<f64>,
    shift: Vec<f64>,
    scale: Vec<f64>,
    floor: f64,
    pub lambda: f64,
}

fn standardize(x: &DMatrix<f64>, shift: &[f64], scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - shift[c]) / scale[c])
}

fn kernel_matrix(x: &DMatrix<f64>, centers: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let denom = 2.0 * sigma * sigma;
    DMatrix::from_fn(x.nrows(), centers.nrows(), |r, c| {
        let mut d2 = 0.0;
        for j in 0..x.ncols() {
            let t = x[(r, j)] - centers[(c, j)];
            d2 += t * t;
        }
        (-d2 / denom).exp()
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Non-negative ridge solution `max(0, (H + lambda I)^-1 h)`.
fn solve_alpha(h_mat: &DMatrix<f64>, h_vec: &DVector<f64>, lambda: f64) -> Result<DVector<f64>, FitError> {
    let c = h_mat.nrows();
    let reg = h_mat + DMatrix::<f64>::identity(c, c) * lambda;
    let chol = reg
        .cholesky()
        .ok_or_else(|| FitError::Numerical("kernel system not positive definite".into()))?;
    Ok(chol.solve(h_vec).map(|a| a.max(0.0)))
}

impl Ulsif {
    pub fn fit(num: &DMatrix<f64>, den: &DMatrix<f64>, cfg: &UlsifConfig, floor: f64, seed: u64) -> Result<Self, FitError> {
        let (nn, nd) = (num.nrows(), den.nrows());
        if nn < cfg.min_arm || nd < cfg.min_arm {
            return Err(FitError::InsufficientArm(format!(
                "kernel ratio fit needs at least {} rows per side, got {nn} and {nd}",
                cfg.min_arm
            )));
        }
        let d = num.ncols();
        let total = (nn + nd) as f64;
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let m = (num.column(j).sum() + den.column(j).sum()) / total;
            let v = (num.column(j).iter().chain(den.column(j).iter()).map(|x| (x - m).powi(2)).sum::<f64>()
                / total)
                .sqrt();
            shift[j] = m;
            scale[j] = if v > 0.0 { v } else { 1.0 };
        }
        let zn = standardize(num, &shift, &scale);
        let zd = standardize(den, &shift, &scale);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<usize> = (0..nn).collect();
        rows.shuffle(&mut rng);
        rows.truncate(cfg.centers.min(nn).max(1));
        rows.sort_unstable();
        let centers = zn.select_rows(rows.iter());

        let mut dists = Vec::new();
        for i in 0..centers.nrows() {
            for j in (i + 1)..centers.nrows() {
                dists.push((centers.row(i) - centers.row(j)).norm());
            }
        }
        let mut base = if dists.is_empty() { 1.0 } else { median(dists) };
        if !(base > 0.0) {
            base = 1.0;
        }
        let c = centers.nrows();

        // fold labels for both samples
        let folds = cfg.folds.max(2);
        let mut fn_ = (0..nn).map(|i| i % folds).collect::<Vec<_>>();
        let mut fd = (0..nd).map(|i| i % folds).collect::<Vec<_>>();
        fn_.shuffle(&mut rng);
        fd.shuffle(&mut rng);
        let rows_n: Vec<Vec<usize>> = (0..folds).map(|f| (0..nn).filter(|&r| fn_[r] == f).collect()).collect();
        let rows_d: Vec<Vec<usize>> = (0..folds).map(|f| (0..nd).filter(|&r| fd[r] == f).collect()).collect();

        let scales: &[f64] = if cfg.width_scales.is_empty() { &[1.0] } else { &cfg.width_scales };
        let default_lambda = cfg.lambdas.first().copied().unwrap_or(1e-1);
        // (score, sigma, lambda, H, h) of the best pair
        let mut best: Option<(f64, f64, f64, DMatrix<f64>, DVector<f64>)> = None;
        for &scale_w in scales {
            let sigma = base * scale_w;
            let kn = kernel_matrix(&zn, &centers, sigma);
            let kd = kernel_matrix(&zd, &centers, sigma);
            let mut hm = Vec::with_capacity(folds);
            let mut hv = Vec::with_capacity(folds);
            for f in 0..folds {
                let kdf = kd.select_rows(rows_d[f].iter());
                hm.push(kdf.transpose() * &kdf);
                hv.push(kn.select_rows(rows_n[f].iter()).row_sum().transpose());
            }
            let hm_total: DMatrix<f64> = hm.iter().fold(DMatrix::zeros(c, c), |a, b| a + b);
            let hv_total: DVector<f64> = hv.iter().fold(DVector::zeros(c), |a, b| a + b);
            let mut lambdas = cfg.lambdas.clone();
            if lambdas.is_empty() {
                lambdas.push(default_lambda);
            }
            for &lambda in &lambdas {
                let mut score = 0.0;
                for f in 0..folds {
                    let (cn, cd) = (rows_n[f].len(), rows_d[f].len());
                    let (tn, td) = (nn - cn, nd - cd);
                    if cn == 0 || cd == 0 || tn == 0 || td == 0 {
                        continue;
                    }
                    let h_tr = (&hm_total - &hm[f]) / td as f64;
                    let v_tr = (&hv_total - &hv[f]) / tn as f64;
                    let alpha = solve_alpha(&h_tr, &v_tr, lambda)?;
                    // held-out loss: 0.5 a'H_te a - a'h_te
                    let h_te = &hm[f] / cd as f64;
                    let v_te = &hv[f] / cn as f64;
                    score += 0.5 * alpha.dot(&(&h_te * &alpha)) - alpha.dot(&v_te);
                }
                if best.as_ref().map_or(true, |b| score < b.0) {
                    best = Some((score, sigma, lambda, hm_total.clone(), hv_total.clone()));
                }
            }
        }
        let (_, sigma, lambda, hm_total, hv_total) = best.expect("at least one width and penalty");
        let alpha = solve_alpha(&(&hm_total / nd as f64), &(&hv_total / nn as f64), lambda)?;
        Ok(Self {
            centers,
            sigma,
            alpha,
            shift,
            scale,
            floor,
            lambda,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let z = standardize(x, &self.shift, &self.scale);
        let k = kernel_matrix(&z, &self.centers, self.sigma);
        (k * &self.alpha).iter().map(|&r| r.max(self.floor)).collect()
    }
}
