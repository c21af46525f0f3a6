//! Data-generating processes over the graphs
//! X -> A -> M -> L -> Y (with A <-> Y) and the variant with A <-> L, M <-> Y.
//!
//! Each process is simulated from its structural equations, hidden
//! variables included. Separately, every linear-Gaussian process exposes
//! the coefficients of its *observed-law* conditionals (hidden variables
//! integrated out), which drive the truth oracle and the exact nuisances.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::estimators::eif;
use crate::graph::{Admg, CausalPartition};
use crate::learn::expit;
use crate::nuisance::{MediatorRatio, NuisanceSet, Strategy};

use super::SimError;

/// Residual covariance of the bivariate mediator.
pub const M_COV: [[f64; 2]; 2] = [[2.0, 1.0], [1.0, 3.0]];

// Cholesky factor of M_COV: [[√2, 0], [1/√2, √(5/2)]]
const M_CHOL: [[f64; 2]; 2] = [[std::f64::consts::SQRT_2, 0.0], [std::f64::consts::FRAC_1_SQRT_2, 1.581_138_830_084_189_8]];

const V_A: [f64; 21] = [
    0.48, 0.07, 1.0, -1.0, -0.34, -0.12, 0.3, -0.35, 1.0, -0.1, 0.46, 0.33, 0.0, 0.45, 0.1, -0.32, -0.08, -0.2, 0.5,
    0.5, -0.03,
];
const V_M1: [f64; 22] = [
    3.0, 1.5, -1.5, -1.5, -1.0, -2.0, -3.0, -3.0, -1.5, 2.0, 1.5, 3.0, 1.5, 2.0, 0.5, 0.5, 3.0, -0.2, -0.33, 0.5, 0.3,
    -0.5,
];
const V_M2: [f64; 22] = [
    1.5, -1.5, -3.0, 2.0, -2.0, 3.0, -3.0, 1.5, -1.5, -1.5, 1.5, -1.0, -1.5, 0.3, 3.0, -0.33, 0.5, 0.5, 0.50, -0.2,
    0.1, 0.2,
];
const V_L: [f64; 19] = [
    -3.0, -2.0, -1.5, 1.5, -1.5, -1.0, 0.5, -1.0, 0.3, 3.0, 0.5, 1.5, 0.5, -1.5, -3.0, -0.5, 0.5, 3.0, 1.5,
];
const V_Y: [f64; 20] = [
    1.0, -2.0, -3.0, -1.5, 1.0, 0.5, -2.0, 1.5, -2.0, -3.0, -3.0, -1.5, -1.0, 0.5, 3.0, 1.0, 1.5, -2.0, 3.0, -1.0,
];
const CF_SCALE: f64 = 0.025;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dgp {
    #[serde(rename = "yinL")]
    YinL,
    #[serde(rename = "ynotL")]
    YnotL,
    #[serde(rename = "weak_overlap_yinL")]
    WeakOverlapYinL,
    #[serde(rename = "weak_overlap_ynotL")]
    WeakOverlapYnotL,
    #[serde(rename = "interactions_yinL")]
    InteractionsYinL,
    #[serde(rename = "interactions_ynotL")]
    InteractionsYnotL,
    #[serde(rename = "crossfit_yinL")]
    CrossfitYinL,
    /// Treatment independent of everything and without any effect.
    #[serde(rename = "null_effect")]
    NullEffect,
    /// Binary outcome on the first graph.
    #[serde(rename = "binary_yinL")]
    BinaryYinL,
    #[serde(rename = "binary_weak_overlap_yinL")]
    BinaryWeakOverlapYinL,
}

impl Dgp {
    pub const ALL: [Dgp; 10] = [
        Dgp::YinL,
        Dgp::YnotL,
        Dgp::WeakOverlapYinL,
        Dgp::WeakOverlapYnotL,
        Dgp::InteractionsYinL,
        Dgp::InteractionsYnotL,
        Dgp::CrossfitYinL,
        Dgp::NullEffect,
        Dgp::BinaryYinL,
        Dgp::BinaryWeakOverlapYinL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::YinL => "yinL",
            Dgp::YnotL => "ynotL",
            Dgp::WeakOverlapYinL => "weak_overlap_yinL",
            Dgp::WeakOverlapYnotL => "weak_overlap_ynotL",
            Dgp::InteractionsYinL => "interactions_yinL",
            Dgp::InteractionsYnotL => "interactions_ynotL",
            Dgp::CrossfitYinL => "crossfit_yinL",
            Dgp::NullEffect => "null_effect",
            Dgp::BinaryYinL => "binary_yinL",
            Dgp::BinaryWeakOverlapYinL => "binary_weak_overlap_yinL",
        }
    }

    /// Whether the outcome shares the treatment's district (first graph).
    pub fn outcome_in_district(self) -> bool {
        !matches!(self, Dgp::YnotL | Dgp::WeakOverlapYnotL | Dgp::InteractionsYnotL)
    }

    pub fn binary_outcome(self) -> bool {
        matches!(self, Dgp::BinaryYinL | Dgp::BinaryWeakOverlapYinL)
    }

    /// Number of pre-treatment columns.
    pub fn x_dim(self) -> usize {
        if self == Dgp::CrossfitYinL {
            10
        } else {
            1
        }
    }

    pub fn x_columns(self) -> Vec<String> {
        if self.x_dim() == 1 {
            vec!["X".into()]
        } else {
            (1..=self.x_dim()).map(|i| format!("X{i}")).collect()
        }
    }

    /// The causal graph the emitted data are bound to.
    pub fn graph(self) -> Admg {
        let names = ["X", "A", "M", "L", "Y"];
        let g = if self.outcome_in_district() {
            Admg::from_edges(
                &names,
                &[
                    ("X", "A"),
                    ("X", "M"),
                    ("X", "L"),
                    ("X", "Y"),
                    ("A", "M"),
                    ("A", "L"),
                    ("M", "L"),
                    ("M", "Y"),
                    ("L", "Y"),
                ],
                &[("A", "Y")],
            )
        } else {
            Admg::from_edges(
                &names,
                &[
                    ("X", "A"),
                    ("X", "M"),
                    ("X", "L"),
                    ("X", "Y"),
                    ("A", "M"),
                    ("A", "Y"),
                    ("M", "L"),
                    ("L", "Y"),
                ],
                &[("A", "L"), ("M", "Y")],
            )
        };
        g.and_then(|g| g.with_arity("M", 2))
            .and_then(|g| g.with_arity("X", self.x_dim()))
            .expect("built-in graph is valid")
    }

    pub fn partition(self) -> CausalPartition {
        CausalPartition::new(&self.graph(), "A", "Y").expect("built-in graph is primal fixable")
    }

    /// Graph with `M` and `L` merged into a single vertex `ML`.
    pub fn merged_graph(self) -> Admg {
        let group = ["M".to_string(), "L".to_string()].into_iter().collect();
        self.graph().merge_vertices(&group, "ML").expect("merge keeps the graph acyclic")
    }

    /// Binding of a generated dataset onto the merged graph.
    pub fn merged_binding(self) -> Vec<(String, Vec<String>)> {
        vec![
            ("X".into(), self.x_columns()),
            ("A".into(), vec!["A".into()]),
            ("ML".into(), vec!["M1".into(), "M2".into(), "L".into()]),
            ("Y".into(), vec!["Y".into()]),
        ]
    }

    /// P(A = 1 | X = x).
    pub fn propensity(self, x: &[f64]) -> f64 {
        match self {
            Dgp::WeakOverlapYinL | Dgp::WeakOverlapYnotL | Dgp::BinaryWeakOverlapYinL => 0.001 + 0.998 * x[0],
            Dgp::NullEffect => 0.5,
            Dgp::CrossfitYinL => expit(dot(&V_A, &cf_a_features(x))),
            _ => expit(1.0 + x[0]),
        }
    }

    /// Observed-law conditionals given treatment `a` and covariates `x`.
    pub fn law(self, a: f64, x: &[f64]) -> LinearLaw {
        match self {
            Dgp::YinL | Dgp::WeakOverlapYinL | Dgp::BinaryYinL | Dgp::BinaryWeakOverlapYinL => {
                let x = x[0];
                LinearLaw {
                    m_mean: [1.0 + a + x, -1.0 - 0.5 * a + 2.0 * x],
                    l0: 1.0 + a + x,
                    l_m: [1.0, 1.0],
                    l_var: 1.0,
                    // E[U | A, X] = 1 + A + X folded into the intercept
                    y0: 2.0 + 2.0 * x + a,
                    y_l: 1.0,
                    y_m: [1.0, 1.0],
                    y_var: 2.0,
                }
            }
            Dgp::YnotL | Dgp::WeakOverlapYnotL => {
                let x = x[0];
                LinearLaw {
                    m_mean: [1.0 + a + x, -1.0 - 0.5 * a + 2.0 * x],
                    // E[U1 | A, X] = 1 + A + X
                    l0: 2.0 + 2.0 * x + a,
                    l_m: [1.0, 1.0],
                    l_var: 2.0,
                    // E[U2 | A, M, X] = 1 + M1 + M2 + A + X
                    y0: 2.0 + 2.0 * x + 2.0 * a,
                    y_l: 1.0,
                    y_m: [1.0, 1.0],
                    y_var: 2.0,
                }
            }
            Dgp::InteractionsYinL => {
                let x = x[0];
                LinearLaw {
                    m_mean: [1.0 + a + x + a * x, -1.0 - 0.5 * a + 2.0 * x - a * x],
                    l0: 1.0 + a + x + a * x,
                    l_m: [1.0 + x, 1.0 + x],
                    l_var: 1.0,
                    y0: 2.0 + 2.0 * x + a + a * x,
                    y_l: 1.0 + x,
                    y_m: [1.0, 1.0],
                    y_var: 2.0,
                }
            }
            Dgp::InteractionsYnotL => {
                let x = x[0];
                LinearLaw {
                    m_mean: [1.0 + a + x, -1.0 - 0.5 * a + 2.0 * x],
                    l0: 2.0 + 2.0 * x + a + a * x,
                    l_m: [1.0 + x, 1.0 + x],
                    l_var: 2.0,
                    y0: 2.0 + 2.0 * x + 2.0 * a + a * x,
                    y_l: 1.0 + x,
                    y_m: [1.0, 1.0],
                    y_var: 2.0,
                }
            }
            Dgp::NullEffect => {
                let x = x[0];
                LinearLaw {
                    m_mean: [1.0 + x, -1.0 + 2.0 * x],
                    l0: 1.0 + x,
                    l_m: [1.0, 1.0],
                    l_var: 1.0,
                    y0: 2.0 + 2.0 * x,
                    y_l: 1.0,
                    y_m: [1.0, 1.0],
                    y_var: 2.0,
                }
            }
            Dgp::CrossfitYinL => {
                let mf = cf_m_features(a, x);
                let sq = cf_squares(x);
                let l0 = CF_SCALE * (V_L[0] + V_L[1] * a + dot(&V_L[4..14], x) + dot(&V_L[14..19], &sq));
                // E[U | A, X] = 1 + A + X1
                let y0 = V_Y[0] + dot(&V_Y[4..14], x) + dot(&V_Y[14..19], &sq) + V_Y[19] * (1.0 + a + x[0]);
                LinearLaw {
                    m_mean: [CF_SCALE * dot(&V_M1, &mf), CF_SCALE * dot(&V_M2, &mf)],
                    l0,
                    l_m: [CF_SCALE * V_L[2], CF_SCALE * V_L[3]],
                    l_var: 1.0,
                    y0,
                    y_l: V_Y[1],
                    y_m: [V_Y[2], V_Y[3]],
                    y_var: 1.0 + V_Y[19] * V_Y[19],
                }
            }
        }
    }

    /// E[Y | A = a, M, L, X] for the binary-outcome processes.
    fn binary_mean(a: f64, m: [f64; 2], l: f64, x: f64) -> f64 {
        expit(-1.0 + 0.3 * l + 0.2 * (m[0] + m[1]) + 0.5 * x) * (0.625 + 0.25 * a)
    }

    /// Draws `n` rows from the structural equations.
    pub fn generate(self, n: usize, seed: u64) -> Result<Dataset, SimError> {
        if n < 10 {
            return Err(SimError::Config(format!("sample size {n} is below 10")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.x_dim();
        let xcols = self.x_columns();
        let mut xs = vec![Vec::with_capacity(n); d];
        let (mut av, mut m1v, mut m2v, mut lv, mut yv) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let a = if rng.gen::<f64>() < self.propensity(&x) { 1.0 } else { 0.0 };
            let (m, l, y) = self.draw_post(a, &x, &mut rng);
            for (j, v) in x.iter().enumerate() {
                xs[j].push(*v);
            }
            av.push(a);
            m1v.push(m[0]);
            m2v.push(m[1]);
            lv.push(l);
            yv.push(y);
        }
        let mut binding = vec![("X".to_string(), xcols.clone())];
        binding.push(("A".into(), vec!["A".into()]));
        binding.push(("M".into(), vec!["M1".into(), "M2".into()]));
        binding.push(("L".into(), vec!["L".into()]));
        binding.push(("Y".into(), vec!["Y".into()]));
        let mut columns: BTreeMap<String, Vec<f64>> = xcols.into_iter().zip(xs).collect();
        columns.insert("A".into(), av);
        columns.insert("M1".into(), m1v);
        columns.insert("M2".into(), m2v);
        columns.insert("L".into(), lv);
        columns.insert("Y".into(), yv);
        let mut kinds = BTreeMap::new();
        kinds.insert("A".to_string(), ColumnKind::Binary);
        if self.binary_outcome() {
            kinds.insert("Y".to_string(), ColumnKind::Binary);
        }
        Ok(Dataset::new(binding, columns, &kinds)?)
    }

    fn mvn_m(mean: [f64; 2], rng: &mut ChaCha8Rng) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [
            mean[0] + M_CHOL[0][0] * z0,
            mean[1] + M_CHOL[1][0] * z0 + M_CHOL[1][1] * z1,
        ]
    }

    /// Structural draws of (M, L, Y) given treatment and covariates; hidden
    /// variables are drawn and discarded.
    fn draw_post(self, a: f64, x: &[f64], rng: &mut ChaCha8Rng) -> ([f64; 2], f64, f64) {
        let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        match self {
            Dgp::YinL | Dgp::WeakOverlapYinL | Dgp::NullEffect => {
                let x0 = x[0];
                let eff = if self == Dgp::NullEffect { 0.0 } else { 1.0 };
                let u = 1.0 + eff * a + x0 + normal(rng);
                let m = Self::mvn_m([1.0 + eff * a + x0, -1.0 - 0.5 * eff * a + 2.0 * x0], rng);
                let l = 1.0 + eff * a + m[0] + m[1] + x0 + normal(rng);
                let y = 1.0 + l + m[0] + m[1] + x0 + u + normal(rng);
                (m, l, y)
            }
            Dgp::YnotL | Dgp::WeakOverlapYnotL => {
                let x0 = x[0];
                let u1 = 1.0 + a + x0 + normal(rng);
                let m = Self::mvn_m([1.0 + a + x0, -1.0 - 0.5 * a + 2.0 * x0], rng);
                let u2 = 1.0 + m[0] + m[1] + a + x0 + normal(rng);
                let l = 1.0 + m[0] + m[1] + x0 + u1 + normal(rng);
                let y = 1.0 + l + a + x0 + u2 + normal(rng);
                (m, l, y)
            }
            Dgp::InteractionsYinL => {
                let x0 = x[0];
                let u = 1.0 + a + x0 + a * x0 + normal(rng);
                let m = Self::mvn_m([1.0 + a + x0 + a * x0, -1.0 - 0.5 * a + 2.0 * x0 - a * x0], rng);
                let s = m[0] + m[1];
                let l = 1.0 + a + s + x0 + a * x0 + s * x0 + normal(rng);
                let y = 1.0 + l + s + x0 + u + l * x0 + normal(rng);
                (m, l, y)
            }
            Dgp::InteractionsYnotL => {
                let x0 = x[0];
                let u1 = 1.0 + a + x0 + a * x0 + normal(rng);
                let m = Self::mvn_m([1.0 + a + x0, -1.0 - 0.5 * a + 2.0 * x0], rng);
                let s = m[0] + m[1];
                let u2 = 1.0 + s + a + x0 + a * x0 + normal(rng);
                let l = 1.0 + s + x0 + u1 + s * x0 + normal(rng);
                let y = 1.0 + l + a + x0 + u2 + l * x0 + normal(rng);
                (m, l, y)
            }
            Dgp::CrossfitYinL => {
                let u = 1.0 + a + x[0] + normal(rng);
                let mf = cf_m_features(a, x);
                let m = Self::mvn_m([CF_SCALE * dot(&V_M1, &mf), CF_SCALE * dot(&V_M2, &mf)], rng);
                let sq = cf_squares(x);
                let mut lf = vec![1.0, a, m[0], m[1]];
                lf.extend_from_slice(x);
                lf.extend_from_slice(&sq);
                let l = CF_SCALE * dot(&V_L, &lf) + normal(rng);
                let mut yf = vec![1.0, l, m[0], m[1]];
                yf.extend_from_slice(x);
                yf.extend_from_slice(&sq);
                yf.push(u);
                let y = dot(&V_Y, &yf) + normal(rng);
                (m, l, y)
            }
            Dgp::BinaryYinL | Dgp::BinaryWeakOverlapYinL => {
                let x0 = x[0];
                let u = if rng.gen::<f64>() < 0.25 + 0.5 * a { 1.0 } else { 0.0 };
                let m = Self::mvn_m([1.0 + a + x0, -1.0 - 0.5 * a + 2.0 * x0], rng);
                let l = 1.0 + a + m[0] + m[1] + x0 + normal(rng);
                let p = expit(-1.0 + 0.3 * l + 0.2 * (m[0] + m[1]) + 0.5 * x0) * (0.5 + 0.5 * u);
                let y = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                (m, l, y)
            }
        }
    }

    /// Treatment levels at which L's and Y's regressions are evaluated.
    fn levels(self, a0: f64) -> (f64, f64) {
        let a1 = 1.0 - a0;
        if self.outcome_in_district() {
            (a0, a1)
        } else {
            (a1, a0)
        }
    }

    /// First sequential regression at covariates `x`, i.e. the nested mean
    /// of the outcome regression over L and M, both evaluated at their labels.
    pub fn first_regression(self, x: &[f64], a0: f64) -> f64 {
        let (al, ay) = self.levels(a0);
        let mm = self.law(a0, x).m_mean;
        let ll = self.law(al, x);
        let ly = self.law(ay, x);
        let el = ll.l0 + dot(&ll.l_m, &mm);
        ly.y0 + ly.y_l * el + dot(&ly.y_m, &mm)
    }

    /// E[Y | A = a, X = x].
    pub fn outcome_given_treatment(self, a: f64, x: &[f64]) -> f64 {
        let law = self.law(a, x);
        let el = law.l0 + dot(&law.l_m, &law.m_mean);
        law.y0 + law.y_l * el + dot(&law.y_m, &law.m_mean)
    }

    /// The identifying functional at level `a0` by Monte-Carlo integration
    /// over `draws` covariate draws.
    pub fn true_psi(self, a0: f64, draws: usize, seed: u64) -> Result<Truth, SimError> {
        if a0 != 0.0 && a0 != 1.0 {
            return Err(SimError::Config("a0 must be 0 or 1".into()));
        }
        if draws < 2 {
            return Err(SimError::Config("need at least two Monte-Carlo draws".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.x_dim();
        let a1 = 1.0 - a0;
        let mut x = vec![0.0; d];
        let (mut sum, mut sumsq, mut arm) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            x.iter_mut().for_each(|v| *v = rng.gen::<f64>());
            let p1 = self.propensity(&x);
            let (pa1, pa0) = if a1 == 1.0 { (p1, 1.0 - p1) } else { (1.0 - p1, p1) };
            let (t1, t0) = if self.binary_outcome() {
                // nested draw of (M, L) under a0; the outcome mean is closed form
                let law = self.law(a0, &x);
                let m = Self::mvn_m(law.m_mean, &mut rng);
                let z: f64 = rng.sample(StandardNormal);
                let l = law.l0 + dot(&law.l_m, &m) + law.l_var.sqrt() * z;
                (pa1 * Self::binary_mean(a1, m, l, x[0]), pa0 * Self::binary_mean(a0, m, l, x[0]))
            } else {
                (pa1 * self.first_regression(&x, a0), pa0 * self.outcome_given_treatment(a0, &x))
            };
            let v = t1 + t0;
            arm += t0;
            sum += v;
            sumsq += v * v;
        }
        let nf = draws as f64;
        let mean = sum / nf;
        let var = (sumsq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        Ok(Truth {
            value: mean,
            mc_se: (var / nf).sqrt(),
            observed_arm: arm / nf,
        })
    }

    /// Exact nuisances evaluated on the rows of `data` (linear-Gaussian
    /// processes only).
    pub fn true_nuisances(self, data: &Dataset, a0: f64, strategy: Strategy) -> Result<NuisanceSet, SimError> {
        if self.binary_outcome() {
            return Err(SimError::Config("exact nuisances are only available for Gaussian outcomes".into()));
        }
        let part = self.partition();
        if part.mediators() != ["M".to_string(), "L".to_string()] {
            return Err(SimError::Config("unexpected mediator order".into()));
        }
        let n = data.n();
        let xcols: Vec<&[f64]> = self
            .x_columns()
            .iter()
            .map(|c| data.column(c))
            .collect::<Result<_, _>>()?;
        let m1 = data.column("M1")?;
        let m2 = data.column("M2")?;
        let l = data.column("L")?;
        let a1 = 1.0 - a0;
        let (al, ay) = self.levels(a0);
        let mut propensity = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        let mut b_m = Vec::with_capacity(n);
        let mut b_l = Vec::with_capacity(n);
        let mut fr_m = Vec::with_capacity(n);
        let mut fr_l = Vec::with_capacity(n);
        let mut x = vec![0.0; xcols.len()];
        for i in 0..n {
            for (j, c) in xcols.iter().enumerate() {
                x[j] = c[i];
            }
            let m = [m1[i], m2[i]];
            let p1 = self.propensity(&x);
            propensity.push(if a1 == 1.0 { p1 } else { 1.0 - p1 });
            let ly = self.law(ay, &x);
            let ll = self.law(al, &x);
            let ll_other = self.law(1.0 - al, &x);
            outcome.push(ly.y0 + ly.y_l * l[i] + dot(&ly.y_m, &m));
            let el = ll.l0 + dot(&ll.l_m, &m);
            b_l.push(ly.y0 + ly.y_l * el + dot(&ly.y_m, &m));
            b_m.push(self.first_regression(&x, a0));
            // M's ratio has its numerator at a0
            let lr_m = log_mvn_m(&m, self.law(a0, &x).m_mean) - log_mvn_m(&m, self.law(a1, &x).m_mean);
            fr_m.push(lr_m.exp());
            let el_other = ll_other.l0 + dot(&ll_other.l_m, &m);
            let lr_l = (-(l[i] - el).powi(2) + (l[i] - el_other).powi(2)) / (2.0 * ll.l_var);
            fr_l.push(lr_l.exp());
        }
        Ok(NuisanceSet::from_parts(
            &part,
            strategy,
            a0,
            false,
            propensity,
            outcome,
            vec![b_m, b_l],
            vec![MediatorRatio::Fixed(fr_m), MediatorRatio::Fixed(fr_l)],
        )?)
    }
}

impl Dgp {
    /// Var Φ under the true law, estimated as the mean of Φ² over a fresh
    /// sample of size `n` with exact nuisances, centred at `psi`.
    pub fn eif_variance(self, a0: f64, psi: f64, n: usize, seed: u64) -> Result<f64, SimError> {
        let data = self.generate(n, seed)?;
        let q = self.true_nuisances(&data, a0, Strategy::Dnorm)?;
        let phi = eif(&data, &self.partition(), &q, psi)?;
        let sq: Vec<f64> = phi.total.iter().map(|v| v * v).collect();
        Ok(data.mean(&sq))
    }
}

impl fmt::Display for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dgp {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        Dgp::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| SimError::UnknownDgp(s.to_string()))
    }
}

/// Truth value with its Monte-Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub value: f64,
    pub mc_se: f64,
    /// The E[I(A = a0) Y] part of the value.
    pub observed_arm: f64,
}

/// Observed-law conditionals of a linear-Gaussian process at fixed (A, X):
/// `M ~ N(m_mean, M_COV)`, `L | M ~ N(l0 + l_m·M, l_var)`,
/// `E[Y | M, L] = y0 + y_l L + y_m·M` with conditional variance `y_var`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearLaw {
    pub m_mean: [f64; 2],
    pub l0: f64,
    pub l_m: [f64; 2],
    pub l_var: f64,
    pub y0: f64,
    pub y_l: f64,
    pub y_m: [f64; 2],
    pub y_var: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cf_squares(x: &[f64]) -> Vec<f64> {
    x[5..10].iter().map(|v| v * v).collect()
}

fn cf_a_features(x: &[f64]) -> Vec<f64> {
    let mut f = vec![1.0];
    f.extend_from_slice(x);
    f.extend(x.iter().map(|v| v * v));
    f
}

fn cf_m_features(a: f64, x: &[f64]) -> Vec<f64> {
    let mut f = vec![1.0, a];
    f.extend_from_slice(x);
    f.extend(x[..5].iter().map(|v| a * v));
    f.extend(cf_squares(x));
    f
}

fn log_mvn_m(m: &[f64; 2], mean: [f64; 2]) -> f64 {
    let det = M_COV[0][0] * M_COV[1][1] - M_COV[0][1] * M_COV[1][0];
    let e = [m[0] - mean[0], m[1] - mean[1]];
    let q = (M_COV[1][1] * e[0] * e[0] - 2.0 * M_COV[0][1] * e[0] * e[1] + M_COV[0][0] * e[1] * e[1]) / det;
    -0.5 * q - 0.5 * det.ln() - (2.0 * PI).ln()
}
