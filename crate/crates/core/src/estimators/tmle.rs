//! Iterative targeting of the propensity score, the outcome regression and
//! the sequential regressions until the empirical influence-function mean
//! is negligible.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::CausalPartition;
use crate::learn::{expit, logit};
use crate::nuisance::{NuisanceFitter, NuisanceSet};

use super::{eif, indicator, moments, plug_in_value, EstimateError, EstimateReport, EstimatorKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TmleConfig {
    pub max_iters: usize,
    /// Fixed stopping threshold on |P_n Φ|; `None` uses σ̂ / (√n log n).
    pub threshold: Option<f64>,
    /// Tolerance on the mean score of the logistic fluctuations.
    pub score_tol: f64,
}

impl Default for TmleConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            threshold: None,
            score_tol: 1e-12,
        }
    }
}

/// One full pass of the targeting steps. Scores are the empirical means of
/// the targeted influence-function block right after its own update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmleStep {
    pub iteration: usize,
    pub eps_treatment: f64,
    pub eps_outcome: f64,
    /// Indexed like the mediators.
    pub eps_mediators: Vec<f64>,
    pub score_treatment: f64,
    pub score_outcome: f64,
    pub score_mediators: Vec<f64>,
    /// |P_n Φ| at the end of the pass.
    pub pn_phi: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TmleTrace {
    pub steps: Vec<TmleStep>,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves Σ w h (t - expit(offset + ε h)) = 0 for ε by safeguarded Newton.
/// The score is non-increasing in ε, so a bracket is kept and Newton steps
/// leaving it are replaced by bisection (or expansion while unbounded).
pub fn solve_logistic_fluctuation(offset: &[f64], h: &[f64], t: &[f64], w: &[f64], tol: f64) -> f64 {
    let total_w: f64 = w.iter().sum();
    if total_w <= 0.0 || h.iter().zip(w).all(|(h, w)| h * w == 0.0) {
        return 0.0;
    }
    let eval = |eps: f64| {
        let (mut s, mut d) = (0.0, 0.0);
        for i in 0..h.len() {
            if w[i] == 0.0 || h[i] == 0.0 {
                continue;
            }
            let p = expit(offset[i] + eps * h[i]);
            s += w[i] * h[i] * (t[i] - p);
            d += w[i] * h[i] * h[i] * p * (1.0 - p);
        }
        (s / total_w, d / total_w)
    };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut eps = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..500 {
        let (s, d) = eval(eps);
        if s.abs() < best.0 {
            best = (s.abs(), eps);
        }
        if s.abs() <= tol {
            return eps;
        }
        if s > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        let mut next = if d > 0.0 { eps + s / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + (2.0 * lo.abs()).max(1.0),
                (false, true) => hi - (2.0 * hi.abs()).max(1.0),
                _ => unreachable!(),
            };
        }
        if lo.is_finite() && hi.is_finite() && (hi - lo) <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        eps = next;
    }
    best.1
}

/// TMLE for level `q.a0`. `fitter` refits the sequential regressions during
/// targeting; it may be omitted only when there are no mediators.
pub fn tmle(
    data: &Dataset,
    partition: &CausalPartition,
    mut q: NuisanceSet,
    fitter: Option<&NuisanceFitter>,
    config: &TmleConfig,
) -> Result<EstimateReport, EstimateError> {
    let n = data.n();
    let kk = partition.num_mediators();
    if kk > 0 && fitter.is_none() {
        return Err(EstimateError::Config("targeting with mediators needs a fitter to refit regressions".into()));
    }
    if config.max_iters == 0 {
        return Err(EstimateError::Config("max_iters must be positive".into()));
    }
    q.check()?;
    let a = data.scalar(partition.treatment())?;
    let y = data.scalar(partition.outcome())?;
    let w: Vec<f64> = data.weights().map_or_else(|| vec![1.0; n], |w| w.to_vec());
    let a0 = q.a0;
    let a1 = 1.0 - a0;
    let binary = q.binary_outcome;
    let ind_a1 = indicator(a, a1);
    let ind_y = indicator(a, partition.outcome_label().value(a0));
    let ind_z: Vec<Vec<f64>> = (0..kk).map(|k| indicator(a, partition.label(k).value(a0))).collect();
    let mut notes = q.notes.clone();
    let mut trace = TmleTrace::default();
    let mut final_phi = Vec::new();
    let mut final_psi = f64::NAN;
    let mut final_pn = f64::NAN;

    for it in 1..=config.max_iters {
        // T1: propensity along logit π + ε B_1
        let b1 = q.first_regression().to_vec();
        let off: Vec<f64> = q.propensity.iter().map(|&p| logit(p)).collect();
        let eps_a = solve_logistic_fluctuation(&off, &b1, &ind_a1, &w, config.score_tol);
        q.propensity = off.iter().zip(&b1).map(|(o, b)| expit(o + eps_a * b)).collect();
        let score_a = data.mean(&(0..n).map(|i| (ind_a1[i] - q.propensity[i]) * b1[i]).collect::<Vec<_>>());
        let r = q.ratio_products();

        // T2: outcome regression
        let hy: Vec<f64> = (0..n).map(|i| ind_y[i] * r[kk][i]).collect();
        let eps_y = if binary {
            let off: Vec<f64> = q.outcome.iter().map(|&m| logit(m)).collect();
            let wy: Vec<f64> = (0..n).map(|i| w[i] * ind_y[i]).collect();
            let eps = solve_logistic_fluctuation(&off, &r[kk], y, &wy, config.score_tol);
            q.outcome = off.iter().zip(&r[kk]).map(|(o, h)| expit(o + eps * h)).collect();
            eps
        } else {
            let resid: Vec<f64> = (0..n).map(|i| hy[i] * (y[i] - q.outcome[i])).collect();
            let den = data.mean(&hy);
            let eps = if den > 0.0 { data.mean(&resid) / den } else { 0.0 };
            q.outcome.iter_mut().for_each(|m| *m += eps);
            eps
        };
        let score_y = data.mean(&(0..n).map(|i| hy[i] * (y[i] - q.outcome[i])).collect::<Vec<_>>());

        // T3: sequential regressions, last mediator first
        let mut eps_z = vec![0.0; kk];
        let mut score_z = vec![0.0; kk];
        for k in (0..kk).rev() {
            let next = q.regression(k + 1).to_vec();
            let mut b = fitter.unwrap().regression(k, &next, a0, &mut notes)?;
            let hk: Vec<f64> = (0..n).map(|i| ind_z[k][i] * r[k][i]).collect();
            if binary {
                let off: Vec<f64> = b.iter().map(|&v| logit(v)).collect();
                let wk: Vec<f64> = (0..n).map(|i| w[i] * ind_z[k][i]).collect();
                let eps = solve_logistic_fluctuation(&off, &r[k], &next, &wk, config.score_tol);
                b = off.iter().zip(&r[k]).map(|(o, h)| expit(o + eps * h)).collect();
                eps_z[k] = eps;
            } else {
                let resid: Vec<f64> = (0..n).map(|i| hk[i] * (next[i] - b[i])).collect();
                let den = data.mean(&hk);
                let eps = if den > 0.0 { data.mean(&resid) / den } else { 0.0 };
                b.iter_mut().for_each(|v| *v += eps);
                eps_z[k] = eps;
            }
            score_z[k] = data.mean(&(0..n).map(|i| hk[i] * (next[i] - b[i])).collect::<Vec<_>>());
            q.sequential[k] = b;
        }

        let psi = plug_in_value(data, partition, &q)?;
        let phi = eif(data, partition, &q, psi)?;
        let (pn, sd) = moments(data, &phi.total);
        let nf = n as f64;
        let threshold = config.threshold.unwrap_or(sd / (nf.sqrt() * nf.ln()));
        trace.steps.push(TmleStep {
            iteration: it,
            eps_treatment: eps_a,
            eps_outcome: eps_y,
            eps_mediators: eps_z,
            score_treatment: score_a,
            score_outcome: score_y,
            score_mediators: score_z,
            pn_phi: pn.abs(),
            threshold,
        });
        trace.iterations = it;
        final_phi = phi.total;
        final_psi = psi;
        final_pn = pn;
        if !psi.is_finite() || !pn.is_finite() {
            notes.push("targeting produced non-finite values".into());
            break;
        }
        if pn.abs() < threshold {
            trace.converged = true;
            break;
        }
    }

    let mut rep = EstimateReport::with_eif(Some(a0), final_psi, EstimatorKind::Tmle, q.strategy, data, final_phi);
    rep.eif_mean = final_pn;
    rep.converged = trace.converged;
    rep.iterations = trace.iterations;
    if !trace.converged {
        notes.push(format!(
            "TMLE did not converge in {} iterations (|P_n Φ| = {:.3e})",
            trace.iterations,
            final_pn.abs()
        ));
    }
    rep.diagnostics.extend(notes);
    rep.trace = Some(trace);
    rep.targeted = Some(q);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fluctuation_solves_the_score() {
        let off = [0.3, -1.2, 2.0, 0.1, -0.4];
        let h = [1.5, -0.7, 3.0, 0.2, 2.2];
        let t = [1.0, 0.0, 1.0, 1.0, 0.0];
        let w = [1.0; 5];
        let eps = solve_logistic_fluctuation(&off, &h, &t, &w, 1e-14);
        let s: f64 = (0..5).map(|i| h[i] * (t[i] - expit(off[i] + eps * h[i]))).sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn zero_covariate_gives_zero_step() {
        assert_eq!(solve_logistic_fluctuation(&[0.0, 1.0], &[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], 1e-12), 0.0);
    }
}
