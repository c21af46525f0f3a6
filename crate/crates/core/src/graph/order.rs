use std::collections::{BTreeMap, BTreeSet};

use super::{Admg, GraphError};

/// A total order of the vertices consistent with the directed edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopoOrder {
    seq: Vec<String>,
    pos: BTreeMap<String, usize>,
}

impl TopoOrder {
    /// Wraps an explicit order after checking it against `graph`, the
    /// treatment and the outcome. Use this to override the canonical order.
    pub fn from_sequence(
        graph: &Admg,
        seq: Vec<String>,
        treatment: &str,
        outcome: &str,
    ) -> Result<Self, GraphError> {
        let order = Self::unchecked(seq);
        order.check_against(graph)?;
        let a = order
            .position(treatment)
            .ok_or_else(|| GraphError::UnknownVertex(treatment.into()))?;
        let y = order
            .position(outcome)
            .ok_or_else(|| GraphError::UnknownVertex(outcome.into()))?;
        if y + 1 != order.len() {
            return Err(GraphError::InvalidOrder(format!("{outcome} is not last")));
        }
        let desc = graph.descendants(treatment)?;
        for v in &order.seq[a + 1..] {
            if v != outcome && !desc.contains(v) {
                return Err(GraphError::InvalidOrder(format!(
                    "{v} is a non-descendant of {treatment} placed after it"
                )));
            }
        }
        Ok(order)
    }

    fn unchecked(seq: Vec<String>) -> Self {
        let pos = seq.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { seq, pos }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn position(&self, v: &str) -> Option<usize> {
        self.pos.get(v).copied()
    }

    pub fn precedes(&self, a: &str, b: &str) -> bool {
        matches!((self.position(a), self.position(b)), (Some(i), Some(j)) if i < j)
    }

    /// Checks that the order covers the vertices of `graph` exactly once and
    /// respects every directed edge.
    pub fn check_against(&self, graph: &Admg) -> Result<(), GraphError> {
        if self.pos.len() != self.seq.len() || self.seq.len() != graph.vertices().len() {
            return Err(GraphError::InvalidOrder(
                "order does not cover the vertices exactly once".into(),
            ));
        }
        for v in graph.names() {
            if !self.pos.contains_key(v) {
                return Err(GraphError::InvalidOrder(format!("{v} missing from order")));
            }
        }
        for (a, b) in graph.di_edges() {
            if self.pos[&a] > self.pos[&b] {
                return Err(GraphError::InvalidOrder(format!("edge {a} -> {b} runs backwards")));
            }
        }
        Ok(())
    }
}

/// Kahn's algorithm restricted to `allowed`, always taking the
/// lexicographically smallest available vertex.
fn lex_kahn(graph: &Admg, allowed: &BTreeSet<String>, placed: &mut BTreeSet<String>, out: &mut Vec<String>) {
    loop {
        let next = allowed
            .iter()
            .filter(|v| !placed.contains(*v))
            .find(|v| graph.parents(v).unwrap().iter().all(|p| placed.contains(p)));
        match next {
            Some(v) => {
                placed.insert(v.clone());
                out.push(v.clone());
            }
            None => break,
        }
    }
}

/// Canonical order: non-descendants of the treatment first, then the
/// treatment, then its descendants, with the outcome last. Ties are broken
/// by vertex name.
pub(super) fn canonical_order(graph: &Admg, treatment: &str, outcome: &str) -> Result<TopoOrder, GraphError> {
    graph.idx(treatment)?;
    graph.idx(outcome)?;
    let ydesc = graph.descendants(outcome)?;
    if !ydesc.is_empty() {
        return Err(GraphError::OutcomeHasDescendants(
            outcome.into(),
            ydesc.into_iter().collect(),
        ));
    }
    let adesc = graph.descendants(treatment)?;
    let all: BTreeSet<String> = graph.names().map(String::from).collect();
    let before: BTreeSet<String> = all
        .iter()
        .filter(|v| *v != treatment && *v != outcome && !adesc.contains(*v))
        .cloned()
        .collect();
    let after: BTreeSet<String> = adesc.iter().filter(|v| *v != outcome).cloned().collect();

    let mut placed = BTreeSet::new();
    let mut out = Vec::with_capacity(all.len());
    lex_kahn(graph, &before, &mut placed, &mut out);
    if out.len() != before.len() {
        return Err(GraphError::InvalidOrder("non-descendants could not be ordered".into()));
    }
    if treatment != outcome {
        placed.insert(treatment.to_string());
        out.push(treatment.to_string());
    }
    lex_kahn(graph, &after, &mut placed, &mut out);
    if out.len() + 1 != all.len() {
        return Err(GraphError::InvalidOrder("descendants could not be ordered".into()));
    }
    out.push(outcome.to_string());
    let order = TopoOrder::unchecked(out);
    order.check_against(graph)?;
    Ok(order)
}
