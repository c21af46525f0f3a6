use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Admg, GraphError, TopoOrder};

/// Intervention level tag attached to each mediator and to the outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    /// The target level `a0`.
    A0,
    /// The complementary level `a1 = 1 - a0`.
    A1,
}

impl Level {
    /// Treatment value this tag stands for when the target level is `a0`.
    pub fn value(self, a0: f64) -> f64 {
        match self {
            Level::A0 => a0,
            Level::A1 => 1.0 - a0,
        }
    }

    pub fn flip(self) -> Level {
        match self {
            Level::A0 => Level::A1,
            Level::A1 => Level::A0,
        }
    }
}

/// The treatment/outcome query split into pre-treatment vertices `X`,
/// post-treatment vertices outside the treatment's district (`M`) and the
/// treatment's district after it (`L`, which holds the treatment itself).
#[derive(Clone, Debug, PartialEq)]
pub struct CausalPartition {
    treatment: String,
    outcome: String,
    order: TopoOrder,
    pre: BTreeSet<String>,
    district_post: BTreeSet<String>,
    outside_post: BTreeSet<String>,
    mediators: Vec<String>,
    labels: Vec<Level>,
    outcome_label: Level,
    pillows: BTreeMap<String, BTreeSet<String>>,
    arities: BTreeMap<String, usize>,
}

impl CausalPartition {
    /// Partition under the canonical topological order.
    pub fn new(graph: &Admg, treatment: &str, outcome: &str) -> Result<Self, GraphError> {
        let order = graph.topological_order(treatment, outcome)?;
        Self::with_order(graph, order, treatment, outcome)
    }

    pub fn with_order(
        graph: &Admg,
        order: TopoOrder,
        treatment: &str,
        outcome: &str,
    ) -> Result<Self, GraphError> {
        if treatment == outcome {
            return Err(GraphError::InvalidOrder("treatment and outcome coincide".into()));
        }
        let order = TopoOrder::from_sequence(graph, order.as_slice().to_vec(), treatment, outcome)?;
        let offending = graph.fixability_conflicts(treatment)?;
        if !offending.is_empty() {
            return Err(GraphError::NotPrimalFixable {
                treatment: treatment.into(),
                offending,
            });
        }
        let apos = order.position(treatment).unwrap();
        let dis = graph.district(treatment)?;
        let seq = order.as_slice();
        let pre: BTreeSet<String> = seq[..apos].iter().cloned().collect();
        let mut district_post = BTreeSet::new();
        let mut outside_post = BTreeSet::new();
        for v in &seq[apos..] {
            if dis.contains(v) {
                district_post.insert(v.clone());
            } else {
                outside_post.insert(v.clone());
            }
        }
        let mut mediators = Vec::new();
        let mut labels = Vec::new();
        for v in &seq[apos + 1..] {
            if v == outcome {
                continue;
            }
            mediators.push(v.clone());
            labels.push(if outside_post.contains(v) { Level::A0 } else { Level::A1 });
        }
        let outcome_label = if outside_post.contains(outcome) {
            Level::A0
        } else {
            Level::A1
        };
        let mut pillows = BTreeMap::new();
        for v in seq {
            pillows.insert(v.clone(), graph.markov_pillow(&order, v)?);
        }
        let arities = graph
            .vertices()
            .iter()
            .map(|v| (v.name.clone(), v.arity))
            .collect();
        Ok(Self {
            treatment: treatment.into(),
            outcome: outcome.into(),
            order,
            pre,
            district_post,
            outside_post,
            mediators,
            labels,
            outcome_label,
            pillows,
            arities,
        })
    }

    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn order(&self) -> &TopoOrder {
        &self.order
    }

    /// Vertices preceding the treatment (`X`).
    pub fn pre_treatment(&self) -> &BTreeSet<String> {
        &self.pre
    }

    /// Post-treatment vertices in the treatment's district, treatment included (`L`).
    pub fn district_post(&self) -> &BTreeSet<String> {
        &self.district_post
    }

    /// Post-treatment vertices outside the treatment's district (`M`).
    pub fn outside_post(&self) -> &BTreeSet<String> {
        &self.outside_post
    }

    /// Mediators `Z_1..Z_K` in order.
    pub fn mediators(&self) -> &[String] {
        &self.mediators
    }

    pub fn num_mediators(&self) -> usize {
        self.mediators.len()
    }

    pub fn labels(&self) -> &[Level] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> Level {
        self.labels[k]
    }

    pub fn outcome_label(&self) -> Level {
        self.outcome_label
    }

    pub fn arity(&self, v: &str) -> usize {
        self.arities[v]
    }

    /// Markov pillow of `v` under the partition's order.
    pub fn pillow(&self, v: &str) -> &BTreeSet<String> {
        &self.pillows[v]
    }

    /// Markov pillow of `v` without the treatment.
    pub fn pillow_without_treatment(&self, v: &str) -> BTreeSet<String> {
        let mut p = self.pillows[v].clone();
        p.remove(&self.treatment);
        p
    }

    pub fn treatment_in_pillow(&self, v: &str) -> bool {
        self.pillows[v].contains(&self.treatment)
    }

    /// Conditioning set (without the treatment) of the `k`-th sequential
    /// regression, `k = 0..K`; index `K` refers to the outcome regression.
    ///
    /// For mediators this is the union of the mediator's own pillow with
    /// whatever the next level still depends on, so that nothing the next
    /// pseudo-outcome varies with is averaged out. It reduces to the pillow
    /// whenever consecutive pillows are nested.
    pub fn regression_set(&self, k: usize) -> BTreeSet<String> {
        let kk = self.mediators.len();
        assert!(k <= kk, "regression index out of range");
        let mut set = self.pillow_without_treatment(&self.outcome);
        for j in (k..kk).rev() {
            let z = &self.mediators[j];
            set.remove(z);
            set.extend(self.pillow_without_treatment(z));
        }
        set
    }

    /// Whether the treatment enters the `k`-th regression as a predictor.
    pub fn regression_uses_treatment(&self, k: usize) -> bool {
        if k == self.mediators.len() {
            self.treatment_in_pillow(&self.outcome)
        } else {
            self.treatment_in_pillow(&self.mediators[k])
        }
    }

    /// Level tag of the `k`-th regression target (`K` is the outcome).
    pub fn regression_label(&self, k: usize) -> Level {
        if k == self.mediators.len() {
            self.outcome_label
        } else {
            self.labels[k]
        }
    }

    /// Factors of the density-ratio product for target `k` (`K` is the
    /// outcome): whether the propensity odds enter, and which mediators'
    /// ratios enter.
    pub fn ratio_factors(&self, k: usize) -> (bool, Vec<usize>) {
        let label = self.regression_label(k);
        let wanted = label.flip();
        let mediators = (0..k).filter(|&i| self.labels[i] == wanted).collect();
        (label == Level::A0, mediators)
    }
}
