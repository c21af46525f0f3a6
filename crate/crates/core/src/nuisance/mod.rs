//! Nuisance functionals: outcome regression, propensity score, sequential
//! regressions and density-ratio products, with three routes to the
//! mediator density ratios.

mod dnorm;
mod ulsif;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::estimators::FoldPlan;
use crate::graph::{CausalPartition, Level};
use crate::learn::{raw_matrix, Basis, FitError, Learner, LearnerSpec, Response};

pub use dnorm::{ConditionalGaussian, COV_LOADING};
pub use ulsif::{Ulsif, UlsifConfig};

/// Default clipping bound for probabilities and floor for ratios.
pub const DEFAULT_CLIP: f64 = 1e-6;

/// How the mediator density ratios are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Ratio of fitted conditional Gaussian densities.
    Dnorm,
    /// Kernel least-squares importance fitting of the joint ratio.
    Densratio,
    /// Bayes' rule applied to treatment regressions.
    Bayes,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Dnorm, Strategy::Densratio, Strategy::Bayes];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Dnorm => "dnorm",
            Strategy::Densratio => "densratio",
            Strategy::Bayes => "bayes",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dnorm" => Ok(Strategy::Dnorm),
            "densratio" => Ok(Strategy::Densratio),
            "bayes" => Ok(Strategy::Bayes),
            other => Err(format!("unknown strategy `{other}` (expected dnorm, densratio or bayes)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Which rows the sequential regressions are fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequentialFit {
    /// All rows, treatment as a predictor, evaluated at the required level.
    FullSample,
    /// Only rows whose treatment equals the required level.
    ArmSubset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NuisanceConfig {
    pub strategy: Strategy,
    /// Learner for the outcome regression and the sequential regressions.
    pub outcome_learner: LearnerSpec,
    /// Learner for the propensity score, the treatment regressions and the
    /// Gaussian mean models.
    pub ratio_learner: LearnerSpec,
    /// Vertices dropped from the outcome-side regressions (misspecification switch).
    pub omit_outcome: Vec<String>,
    /// Vertices dropped from the propensity and ratio models.
    pub omit_ratio: Vec<String>,
    pub clip: f64,
    pub sequential_fit: SequentialFit,
    pub ulsif: UlsifConfig,
    pub seed: u64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Bayes,
            outcome_learner: LearnerSpec::default(),
            ratio_learner: LearnerSpec::default(),
            omit_outcome: Vec::new(),
            omit_ratio: Vec::new(),
            clip: DEFAULT_CLIP,
            sequential_fit: SequentialFit::FullSample,
            ulsif: UlsifConfig::default(),
            seed: 0,
        }
    }
}

impl NuisanceConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    /// Same basis for both learner groups.
    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.outcome_learner = LearnerSpec::parametric(basis);
        self.ratio_learner = LearnerSpec::parametric(basis);
        self
    }
}

/// Per-mediator density ratio f(z | pillow, a_z) / f(z | pillow, 1 - a_z).
#[derive(Clone, Debug, PartialEq)]
pub enum MediatorRatio {
    /// The treatment is not in the mediator's pillow, so the ratio is 1.
    Unity,
    /// Ratio values fixed at fitting time.
    Fixed(Vec<f64>),
    /// Bayes route: `h = P(A = level | z, pillow)` and
    /// `g = P(A = level | pillow)`. `g = None` means the pillow coincides
    /// with the propensity score's, so `g` is read off the propensity.
    Bayes {
        h: Vec<f64>,
        g: Option<Vec<f64>>,
        level: Level,
    },
}

/// Fitted nuisances, cached row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisanceSet {
    pub strategy: Strategy,
    pub a0: f64,
    pub binary_outcome: bool,
    pub clip: f64,
    /// π(a1 | mp(A)), clipped.
    pub propensity: Vec<f64>,
    /// μ(mp(Y)) evaluated at A = a_Y.
    pub outcome: Vec<f64>,
    /// B_{Z_k} evaluated at A = a_{Z_k}, for k = 1..K.
    pub sequential: Vec<Vec<f64>>,
    pub mediator_ratios: Vec<MediatorRatio>,
    /// For targets Z_1..Z_K, Y: whether the propensity odds enter the
    /// ratio product and which mediators' ratios do.
    pub factors: Vec<(bool, Vec<usize>)>,
    pub notes: Vec<String>,
}

impl NuisanceSet {
    /// Assembles a nuisance set from externally computed caches (for example
    /// exact values from a known law).
    pub fn from_parts(
        partition: &CausalPartition,
        strategy: Strategy,
        a0: f64,
        binary_outcome: bool,
        propensity: Vec<f64>,
        outcome: Vec<f64>,
        sequential: Vec<Vec<f64>>,
        mediator_ratios: Vec<MediatorRatio>,
    ) -> Result<Self, FitError> {
        let k = partition.num_mediators();
        if sequential.len() != k || mediator_ratios.len() != k {
            return Err(FitError::Shape(format!("expected {k} sequential regressions and ratios")));
        }
        let set = Self {
            strategy,
            a0,
            binary_outcome,
            clip: DEFAULT_CLIP,
            propensity,
            outcome,
            sequential,
            mediator_ratios,
            factors: (0..=k).map(|j| partition.ratio_factors(j)).collect(),
            notes: Vec::new(),
        };
        set.check()?;
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn num_mediators(&self) -> usize {
        self.sequential.len()
    }

    /// B_{Z_1} at a_{Z_1}, or the outcome regression when there are no mediators.
    pub fn first_regression(&self) -> &[f64] {
        self.sequential.first().unwrap_or(&self.outcome)
    }

    /// Regression k (0-based) at its level; k = K is the outcome regression.
    pub fn regression(&self, k: usize) -> &[f64] {
        if k == self.sequential.len() {
            &self.outcome
        } else {
            &self.sequential[k]
        }
    }

    /// π(a1)/π(a0) for one row.
    pub fn propensity_odds(&self, row: usize) -> f64 {
        let p = self.propensity[row];
        p / (1.0 - p)
    }

    /// Values of g for a Bayes-route mediator (propensity-derived when tied).
    pub fn bayes_g(&self, k: usize) -> Option<Vec<f64>> {
        match &self.mediator_ratios[k] {
            MediatorRatio::Bayes { g: Some(g), .. } => Some(g.clone()),
            MediatorRatio::Bayes { g: None, level, .. } => Some(
                self.propensity
                    .iter()
                    .map(|&p1| if *level == Level::A1 { p1 } else { 1.0 - p1 })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Ratio of mediator `k` for every row, floored at the clip level.
    pub fn mediator_ratio(&self, k: usize) -> Vec<f64> {
        let n = self.n();
        match &self.mediator_ratios[k] {
            MediatorRatio::Unity => vec![1.0; n],
            MediatorRatio::Fixed(v) => v.iter().map(|&r| r.max(self.clip)).collect(),
            MediatorRatio::Bayes { h, .. } => {
                let g = self.bayes_g(k).unwrap();
                h.iter()
                    .zip(&g)
                    .map(|(&h, &g)| (h / (1.0 - h) * (1.0 - g) / g).max(self.clip))
                    .collect()
            }
        }
    }

    /// Ratio products R_{Z_1}, …, R_{Z_K}, R_Y.
    pub fn ratio_products(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let ratios: Vec<Vec<f64>> = (0..self.num_mediators()).map(|k| self.mediator_ratio(k)).collect();
        self.factors
            .iter()
            .map(|(with_odds, mediators)| {
                (0..n)
                    .map(|i| {
                        let mut r = if *with_odds { self.propensity_odds(i) } else { 1.0 };
                        for &m in mediators {
                            r *= ratios[m][i];
                        }
                        r.max(self.clip)
                    })
                    .collect()
            })
            .collect()
    }

    /// Checks lengths and finiteness of every cache.
    pub fn check(&self) -> Result<(), FitError> {
        let n = self.n();
        let bad = |v: &[f64]| v.len() != n || v.iter().any(|x| !x.is_finite());
        if bad(&self.propensity) || bad(&self.outcome) || self.sequential.iter().any(|b| bad(b)) {
            return Err(FitError::Numerical("nuisance cache has wrong length or non-finite values".into()));
        }
        if self.propensity.iter().any(|&p| p <= 0.0 || p >= 1.0) {
            return Err(FitError::Numerical("propensity outside (0, 1)".into()));
        }
        for r in &self.mediator_ratios {
            let ok = match r {
                MediatorRatio::Unity => true,
                MediatorRatio::Fixed(v) => !bad(v),
                MediatorRatio::Bayes { h, g, .. } => !bad(h) && g.as_ref().map_or(true, |g| !bad(g)),
            };
            if !ok {
                return Err(FitError::Numerical("ratio cache has wrong length or non-finite values".into()));
            }
        }
        Ok(())
    }
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
}

/// Fits nuisances for one dataset and partition, optionally cross-fitted.
pub struct NuisanceFitter<'a> {
    data: &'a Dataset,
    partition: &'a CausalPartition,
    config: &'a NuisanceConfig,
    folds: Vec<Fold>,
    outcome_learner: Box<dyn Learner>,
    ratio_learner: Box<dyn Learner>,
    treatment: Vec<f64>,
    y: Vec<f64>,
    binary_outcome: bool,
}

impl<'a> NuisanceFitter<'a> {
    pub fn new(
        data: &'a Dataset,
        partition: &'a CausalPartition,
        config: &'a NuisanceConfig,
        folds: Option<&FoldPlan>,
    ) -> Result<Self, FitError> {
        if !(config.clip > 0.0 && config.clip < 0.5) {
            return Err(FitError::Config("clip must lie in (0, 0.5)".into()));
        }
        let n = data.n();
        let treatment = data.scalar(partition.treatment())?.to_vec();
        if data.vertex_columns(partition.outcome())?.len() != 1 {
            return Err(FitError::Config("outcome must be a single column".into()));
        }
        let y = data.scalar(partition.outcome())?.to_vec();
        let binary_outcome = data.vertex_is_binary(partition.outcome());
        let folds = match folds {
            None => vec![Fold {
                train: (0..n).collect(),
                test: (0..n).collect(),
            }],
            Some(plan) => {
                if plan.n() != n {
                    return Err(FitError::Shape("fold plan built for a different row count".into()));
                }
                (0..plan.k())
                    .map(|f| Fold {
                        train: plan.train_rows(f),
                        test: plan.test_rows(f),
                    })
                    .collect()
            }
        };
        let w = data.weights();
        for (f, fold) in folds.iter().enumerate() {
            for level in [0.0, 1.0] {
                if !fold
                    .train
                    .iter()
                    .any(|&r| treatment[r] == level && w.map_or(true, |w| w[r] > 0.0))
                {
                    return Err(FitError::DegenerateArm(format!(
                        "no rows with treatment = {level} in training fold {f}"
                    )));
                }
            }
        }
        Ok(Self {
            data,
            partition,
            config,
            folds,
            outcome_learner: config.outcome_learner.build()?,
            ratio_learner: config.ratio_learner.build()?,
            treatment,
            y,
            binary_outcome,
        })
    }

    pub fn binary_outcome(&self) -> bool {
        self.binary_outcome
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn outcome_values(&self) -> &[f64] {
        &self.y
    }

    fn ordered(&self, set: BTreeSet<String>) -> Vec<String> {
        let mut v: Vec<String> = set.into_iter().collect();
        v.sort_by_key(|s| self.partition.order().position(s));
        v
    }

    fn without(&self, mut set: BTreeSet<String>, omit: &[String]) -> BTreeSet<String> {
        for o in omit {
            if o != self.partition.treatment() {
                set.remove(o);
            }
        }
        set
    }

    /// Fits `learner` fold by fold on rows passing `keep`, and predicts on
    /// each fold's test rows under every evaluation setting.
    fn fit_predict(
        &self,
        learner: &dyn Learner,
        predictors: &[String],
        target: &[f64],
        response: Response,
        keep: &dyn Fn(usize) -> bool,
        evals: &[Option<(&str, f64)>],
        label: &str,
        notes: &mut Vec<String>,
    ) -> Result<Vec<Vec<f64>>, FitError> {
        let n = self.data.n();
        let raw_fit = raw_matrix(self.data, predictors, None)?;
        let raw_evals = evals
            .iter()
            .map(|s| raw_matrix(self.data, predictors, *s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = vec![vec![0.0; n]; evals.len()];
        let w = self.data.weights();
        for fold in &self.folds {
            let rows: Vec<usize> = fold.train.iter().copied().filter(|&r| keep(r)).collect();
            if rows.is_empty() {
                return Err(FitError::ZeroRows);
            }
            let xt = raw_fit.select_rows(rows.iter());
            let yt: Vec<f64> = rows.iter().map(|&r| target[r]).collect();
            let wt: Option<Vec<f64>> = w.map(|w| rows.iter().map(|&r| w[r]).collect());
            let model = learner.fit(&xt, &yt, wt.as_deref(), response)?;
            for note in model.notes() {
                let msg = format!("{label}: {note}");
                if !notes.contains(&msg) {
                    notes.push(msg);
                }
            }
            for (e, raw) in raw_evals.iter().enumerate() {
                let xe = raw.select_rows(fold.test.iter());
                let pred = model.predict(&xe);
                for (i, &r) in fold.test.iter().enumerate() {
                    out[e][r] = pred[i];
                }
            }
        }
        Ok(out)
    }

    fn outcome_response(&self) -> Response {
        if self.binary_outcome {
            Response::Probability
        } else {
            Response::Continuous
        }
    }

    fn clip_outcome(&self, v: Vec<f64>) -> Vec<f64> {
        if self.binary_outcome {
            let c = self.config.clip;
            v.into_iter().map(|x| x.clamp(c, 1.0 - c)).collect()
        } else {
            v
        }
    }

    /// P(A = 1 | mp(A)), clipped.
    pub fn propensity_one(&self, notes: &mut Vec<String>) -> Result<Vec<f64>, FitError> {
        let a = self.partition.treatment();
        let preds = self.ordered(self.without(self.partition.pillow(a).clone(), &self.config.omit_ratio));
        let p = self.fit_predict(
            self.ratio_learner.as_ref(),
            &preds,
            &self.treatment,
            Response::Probability,
            &|_| true,
            &[None],
            "propensity",
            notes,
        )?;
        let c = self.config.clip;
        Ok(p[0].iter().map(|x| x.clamp(c, 1.0 - c)).collect())
    }

    /// Regression `k` (0-based; `k = K` is the outcome regression) of
    /// `target` on its conditioning set, evaluated at the level `a_k`.
    pub fn regression(
        &self,
        k: usize,
        target: &[f64],
        a0: f64,
        notes: &mut Vec<String>,
    ) -> Result<Vec<f64>, FitError> {
        let part = self.partition;
        let a = part.treatment();
        let level = part.regression_label(k).value(a0);
        let mut set = self.without(part.regression_set(k), &self.config.omit_outcome);
        let uses_a = part.regression_uses_treatment(k);
        let subset = uses_a && self.config.sequential_fit == SequentialFit::ArmSubset;
        if uses_a && !subset {
            set.insert(a.to_string());
        }
        let preds = self.ordered(set);
        let label = if k == part.num_mediators() {
            "outcome regression".to_string()
        } else {
            format!("sequential regression {}", part.mediators()[k])
        };
        let treat = &self.treatment;
        let keep = move |r: usize| !subset || treat[r] == level;
        let eval = if uses_a && !subset { Some((a, level)) } else { None };
        let out = self.fit_predict(
            self.outcome_learner.as_ref(),
            &preds,
            target,
            self.outcome_response(),
            &keep,
            &[eval],
            &label,
            notes,
        )?;
        Ok(self.clip_outcome(out.into_iter().next().unwrap()))
    }

    /// Columns of vertex `v` as separate vectors.
    fn vertex_data(&self, v: &str) -> Result<Vec<Vec<f64>>, FitError> {
        self.data
            .vertex_columns(v)?
            .iter()
            .map(|c| Ok(self.data.column(c)?.to_vec()))
            .collect()
    }

    fn mediator_ratio(
        &self,
        k: usize,
        a0: f64,
        propensity_set: &BTreeSet<String>,
        notes: &mut Vec<String>,
    ) -> Result<MediatorRatio, FitError> {
        let part = self.partition;
        let z = &part.mediators()[k];
        if !part.treatment_in_pillow(z) {
            return Ok(MediatorRatio::Unity);
        }
        let a = part.treatment();
        let level = part.label(k);
        let a_num = level.value(a0);
        let cond = self.without(part.pillow_without_treatment(z), &self.config.omit_ratio);
        let cond_v = self.ordered(cond.clone());
        let c = self.config.clip;
        match self.config.strategy {
            Strategy::Bayes => {
                let mut with_z = cond_v.clone();
                with_z.insert(0, z.clone());
                let p = self.fit_predict(
                    self.ratio_learner.as_ref(),
                    &with_z,
                    &self.treatment,
                    Response::Probability,
                    &|_| true,
                    &[None],
                    &format!("treatment regression given {z}"),
                    notes,
                )?;
                let h = to_level(&p[0], a_num, c);
                let g = if &cond == propensity_set {
                    None
                } else {
                    let q = self.fit_predict(
                        self.ratio_learner.as_ref(),
                        &cond_v,
                        &self.treatment,
                        Response::Probability,
                        &|_| true,
                        &[None],
                        &format!("treatment regression for the pillow of {z}"),
                        notes,
                    )?;
                    Some(to_level(&q[0], a_num, c))
                };
                Ok(MediatorRatio::Bayes { h, g, level })
            }
            Strategy::Dnorm => {
                let (basis, intercept) = match &self.config.ratio_learner {
                    LearnerSpec::Parametric { basis, intercept } => (*basis, *intercept),
                    _ => {
                        return Err(FitError::Config(
                            "the dnorm strategy needs a parametric ratio learner".into(),
                        ))
                    }
                };
                let mut preds = cond_v.clone();
                preds.push(a.to_string());
                let preds = self.ordered(preds.into_iter().collect());
                let zcols = self.vertex_data(z)?;
                let raw = raw_matrix(self.data, &preds, None)?;
                let raw_num = raw_matrix(self.data, &preds, Some((a, a_num)))?;
                let raw_den = raw_matrix(self.data, &preds, Some((a, 1.0 - a_num)))?;
                let mut out = vec![0.0; self.data.n()];
                let w = self.data.weights();
                let cap = -c.ln();
                for fold in &self.folds {
                    let rows = &fold.train;
                    let xt = raw.select_rows(rows.iter());
                    let zt: Vec<Vec<f64>> = zcols.iter().map(|col| rows.iter().map(|&r| col[r]).collect()).collect();
                    let wt: Option<Vec<f64>> = w.map(|w| rows.iter().map(|&r| w[r]).collect());
                    let g = ConditionalGaussian::fit(&xt, &zt, wt.as_deref(), basis, intercept, z)?;
                    let zs: Vec<Vec<f64>> = zcols
                        .iter()
                        .map(|col| fold.test.iter().map(|&r| col[r]).collect())
                        .collect();
                    let lr = g.log_ratio(
                        &raw_num.select_rows(fold.test.iter()),
                        &raw_den.select_rows(fold.test.iter()),
                        &zs,
                    );
                    for (i, &r) in fold.test.iter().enumerate() {
                        out[r] = lr[i].clamp(-cap, cap).exp();
                    }
                }
                Ok(MediatorRatio::Fixed(out))
            }
            Strategy::Densratio => {
                if self.data.weights().is_some() {
                    return Err(FitError::Config("kernel ratio fitting does not support row weights".into()));
                }
                let mut feats = cond_v.clone();
                feats.insert(0, z.clone());
                let raw = raw_matrix(self.data, &feats, None)?;
                let mut joint = vec![0.0; self.data.n()];
                for (f, fold) in self.folds.iter().enumerate() {
                    let num: Vec<usize> = fold.train.iter().copied().filter(|&r| self.treatment[r] == a_num).collect();
                    let den: Vec<usize> = fold.train.iter().copied().filter(|&r| self.treatment[r] != a_num).collect();
                    let seed = self
                        .config
                        .seed
                        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        .wrapping_add((k as u64) << 32 | f as u64);
                    let model = Ulsif::fit(
                        &raw.select_rows(num.iter()),
                        &raw.select_rows(den.iter()),
                        &self.config.ulsif,
                        c,
                        seed,
                    )?;
                    let pred = model.predict(&raw.select_rows(fold.test.iter()));
                    for (i, &r) in fold.test.iter().enumerate() {
                        joint[r] = pred[i];
                    }
                }
                // joint ratio -> conditional ratio: multiply by
                // P(1 - a | pillow) / P(a | pillow) * P(a) / P(1 - a)
                if !cond_v.is_empty() {
                    let q = self.fit_predict(
                        self.ratio_learner.as_ref(),
                        &cond_v,
                        &self.treatment,
                        Response::Probability,
                        &|_| true,
                        &[None],
                        &format!("treatment regression for the pillow of {z}"),
                        notes,
                    )?;
                    let g = to_level(&q[0], a_num, c);
                    for fold in &self.folds {
                        let n_num = fold.train.iter().filter(|&&r| self.treatment[r] == a_num).count() as f64;
                        let marg = n_num / fold.train.len() as f64;
                        for &r in &fold.test {
                            joint[r] *= (1.0 - g[r]) / g[r] * marg / (1.0 - marg);
                        }
                    }
                }
                Ok(MediatorRatio::Fixed(joint.into_iter().map(|r| r.max(c)).collect()))
            }
        }
    }

    /// Fits every nuisance for target level `a0`.
    pub fn fit(&self, a0: f64) -> Result<NuisanceSet, FitError> {
        if a0 != 0.0 && a0 != 1.0 {
            return Err(FitError::Config("a0 must be 0 or 1".into()));
        }
        let part = self.partition;
        let kk = part.num_mediators();
        let mut notes = Vec::new();
        let p1 = self.propensity_one(&mut notes)?;
        let a1 = 1.0 - a0;
        let propensity: Vec<f64> = p1.iter().map(|&p| if a1 == 1.0 { p } else { 1.0 - p }).collect();
        let outcome = self.regression(kk, &self.y, a0, &mut notes)?;
        let mut sequential = vec![Vec::new(); kk];
        let mut next = outcome.clone();
        for k in (0..kk).rev() {
            let b = self.regression(k, &next, a0, &mut notes)?;
            next = b.clone();
            sequential[k] = b;
        }
        let prop_set = self.without(part.pillow(part.treatment()).clone(), &self.config.omit_ratio);
        let mediator_ratios = (0..kk)
            .map(|k| self.mediator_ratio(k, a0, &prop_set, &mut notes))
            .collect::<Result<Vec<_>, _>>()?;
        let set = NuisanceSet {
            strategy: self.config.strategy,
            a0,
            binary_outcome: self.binary_outcome,
            clip: self.config.clip,
            propensity,
            outcome,
            sequential,
            mediator_ratios,
            factors: (0..=kk).map(|j| part.ratio_factors(j)).collect(),
            notes,
        };
        set.check()?;
        Ok(set)
    }
}

/// Converts P(A = 1 | ·) into P(A = level | ·), clipped.
fn to_level(p1: &[f64], level: f64, clip: f64) -> Vec<f64> {
    p1.iter()
        .map(|&p| if level == 1.0 { p } else { 1.0 - p })
        .map(|p| p.clamp(clip, 1.0 - clip))
        .collect()
}

/// Convenience wrapper: fit all nuisances without cross-fitting.
pub fn evaluate_nuisances(
    data: &Dataset,
    partition: &CausalPartition,
    config: &NuisanceConfig,
    a0: f64,
) -> Result<NuisanceSet, FitError> {
    NuisanceFitter::new(data, partition, config, None)?.fit(a0)
}

/// Raw predictor matrix helper re-exported for tests and custom learners.
pub fn design_columns(data: &Dataset, predictors: &[String], set: Option<(&str, f64)>) -> Result<DMatrix<f64>, FitError> {
    raw_matrix(data, predictors, set)
}
