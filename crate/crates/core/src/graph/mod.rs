//! Hidden-variable DAGs and acyclic directed mixed graphs (ADMGs).
//!
//! Graphs are immutable values. Every transform (projection, merging,
//! induced subgraphs) returns a new graph.

mod io;
mod order;
mod partition;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::GraphSpec;
pub use order::TopoOrder;
pub use partition::{CausalPartition, Level};

/// A named vertex spanning `arity` data columns.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub name: String,
    pub arity: usize,
}

impl VertexId {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Self {
            name: name.into(),
            arity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("vertex `{0}` has arity 0")]
    ZeroArity(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("directed cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("outcome `{0}` has descendants {1:?}")]
    OutcomeHasDescendants(String, Vec<String>),
    #[error("treatment `{treatment}` is not primal fixable: children in its district {offending:?}")]
    NotPrimalFixable {
        treatment: String,
        offending: Vec<String>,
    },
    #[error("invalid topological order: {0}")]
    InvalidOrder(String),
    #[error("invalid vertex group: {0}")]
    InvalidGroup(String),
    #[error("graph parse error: {0}")]
    Parse(String),
}

/// A structural problem reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Cycle(Vec<String>),
    SelfLoop(String),
    DanglingEdge(String, String),
    DuplicateVertex(String),
    ZeroArity(String),
    SelfBidirected(String),
    UnknownHidden(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle(c) => write!(f, "cycle: {}", c.join(" -> ")),
            Violation::SelfLoop(v) => write!(f, "self-loop on {v}"),
            Violation::DanglingEdge(a, b) => write!(f, "dangling edge {a} - {b}"),
            Violation::DuplicateVertex(v) => write!(f, "duplicate vertex {v}"),
            Violation::ZeroArity(v) => write!(f, "zero arity on {v}"),
            Violation::SelfBidirected(v) => write!(f, "bidirected self-edge on {v}"),
            Violation::UnknownHidden(v) => write!(f, "hidden vertex {v} not declared"),
        }
    }
}

/// Structural check of a raw graph description. An empty result means the
/// description can be turned into an [`Admg`] (or a [`Dag`] when it has no
/// bidirected edges).
pub fn validate(spec: &GraphSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for v in &spec.vertices {
        if !seen.insert(v.name.as_str()) {
            out.push(Violation::DuplicateVertex(v.name.clone()));
        }
        if v.arity == 0 {
            out.push(Violation::ZeroArity(v.name.clone()));
        }
    }
    let mut dangling = false;
    for [a, b] in &spec.di_edges {
        if !seen.contains(a.as_str()) || !seen.contains(b.as_str()) {
            out.push(Violation::DanglingEdge(a.clone(), b.clone()));
            dangling = true;
        } else if a == b {
            out.push(Violation::SelfLoop(a.clone()));
        }
    }
    for [a, b] in &spec.bi_edges {
        if !seen.contains(a.as_str()) || !seen.contains(b.as_str()) {
            out.push(Violation::DanglingEdge(a.clone(), b.clone()));
        } else if a == b {
            out.push(Violation::SelfBidirected(a.clone()));
        }
    }
    for h in &spec.hidden {
        if !seen.contains(h.as_str()) {
            out.push(Violation::UnknownHidden(h.clone()));
        }
    }
    if !dangling {
        let names: Vec<String> = spec.vertices.iter().map(|v| v.name.clone()).collect();
        let idx: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let edges: Vec<(usize, usize)> = spec
            .di_edges
            .iter()
            .filter(|[a, b]| a != b)
            .map(|[a, b]| (idx[a.as_str()], idx[b.as_str()]))
            .collect();
        if let Some(cycle) = find_cycle(names.len(), &edges) {
            out.push(Violation::Cycle(
                cycle.into_iter().map(|i| names[i].clone()).collect(),
            ));
        }
    }
    out
}

/// Returns the vertices of some directed cycle, if one exists.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if state[w] == 0 {
                    state[w] = 1;
                    parent[w] = v;
                    stack.push((w, 0));
                } else if state[w] == 1 {
                    let mut cycle = vec![w];
                    let mut cur = v;
                    while cur != w {
                        cycle.push(cur);
                        cur = parent[cur];
                    }
                    cycle.reverse();
                    return Some(cycle);
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Acyclic directed mixed graph over named, possibly multivariate, vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Admg {
    vertices: Vec<VertexId>,
    index: BTreeMap<String, usize>,
    di: BTreeSet<(usize, usize)>,
    bi: BTreeSet<(usize, usize)>,
}

impl Admg {
    /// Builds an ADMG, rejecting anything [`validate`] would flag.
    pub fn new<S: AsRef<str>>(
        vertices: Vec<VertexId>,
        di_edges: &[(S, S)],
        bi_edges: &[(S, S)],
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if v.arity == 0 {
                return Err(GraphError::ZeroArity(v.name.clone()));
            }
            if index.insert(v.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.name.clone()));
            }
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(s.to_string()))
        };
        let mut di = BTreeSet::new();
        for (a, b) in di_edges {
            let (a, b) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if a == b {
                return Err(GraphError::SelfLoop(vertices[a].name.clone()));
            }
            di.insert((a, b));
        }
        let mut bi = BTreeSet::new();
        for (a, b) in bi_edges {
            let (a, b) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if a == b {
                return Err(GraphError::SelfLoop(vertices[a].name.clone()));
            }
            bi.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = di.iter().copied().collect();
        if let Some(c) = find_cycle(vertices.len(), &edges) {
            return Err(GraphError::Cycle(
                c.into_iter().map(|i| vertices[i].name.clone()).collect(),
            ));
        }
        Ok(Self {
            vertices,
            index,
            di,
            bi,
        })
    }

    /// Scalar-vertex shorthand, mostly for tests and examples.
    pub fn from_edges(
        names: &[&str],
        di_edges: &[(&str, &str)],
        bi_edges: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        let vs = names.iter().map(|n| VertexId::new(*n, 1)).collect();
        Self::new(vs, di_edges, bi_edges)
    }

    /// Returns a copy with the arity of `name` replaced.
    pub fn with_arity(mut self, name: &str, arity: usize) -> Result<Self, GraphError> {
        if arity == 0 {
            return Err(GraphError::ZeroArity(name.to_string()));
        }
        let i = self.idx(name)?;
        self.vertices[i].arity = arity;
        Ok(self)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vertices.iter().map(|v| v.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn arity(&self, name: &str) -> Result<usize, GraphError> {
        Ok(self.vertices[self.idx(name)?].arity)
    }

    pub fn di_edges(&self) -> Vec<(String, String)> {
        self.di
            .iter()
            .map(|&(a, b)| (self.name(a).to_string(), self.name(b).to_string()))
            .collect()
    }

    pub fn bi_edges(&self) -> Vec<(String, String)> {
        self.bi
            .iter()
            .map(|&(a, b)| (self.name(a).to_string(), self.name(b).to_string()))
            .collect()
    }

    pub fn has_di_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.di.contains(&(a, b)),
            _ => false,
        }
    }

    pub fn has_bi_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.bi.contains(&(a.min(b), a.max(b))),
            _ => false,
        }
    }

    /// True when any edge (directed either way, or bidirected) joins `a` and `b`.
    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.has_di_edge(a, b) || self.has_di_edge(b, a) || self.has_bi_edge(a, b)
    }

    pub(crate) fn idx(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub(crate) fn name(&self, i: usize) -> &str {
        &self.vertices[i].name
    }

    fn names_of(&self, set: impl IntoIterator<Item = usize>) -> BTreeSet<String> {
        set.into_iter().map(|i| self.name(i).to_string()).collect()
    }

    fn parent_idx(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.di.iter().filter(move |e| e.1 == v).map(|e| e.0)
    }

    fn child_idx(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.di.range((v, 0)..(v + 1, 0)).map(|e| e.1)
    }

    fn sibling_idx(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.bi.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn parents(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.parent_idx(i)))
    }

    pub fn children(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.child_idx(i)))
    }

    pub fn siblings(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.sibling_idx(i)))
    }

    fn descendant_idx(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for c in self.child_idx(u) {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    /// Strict descendants of `v` (excluding `v`).
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.descendant_idx(i)))
    }

    fn district_idx(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for s in self.sibling_idx(u) {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    /// District (bidirected-connected component) containing `v`.
    pub fn district(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.district_idx(i)))
    }

    /// All districts, ordered by their first vertex in declaration order.
    pub fn districts(&self) -> Vec<BTreeSet<String>> {
        let mut assigned = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for v in 0..self.vertices.len() {
            if assigned[v] {
                continue;
            }
            let d = self.district_idx(v);
            for &u in &d {
                assigned[u] = true;
            }
            out.push(self.names_of(d));
        }
        out
    }

    fn blanket_idx(&self, v: usize) -> BTreeSet<usize> {
        let dis = self.district_idx(v);
        let mut out = dis.clone();
        for &d in &dis {
            out.extend(self.parent_idx(d));
        }
        out.remove(&v);
        out
    }

    /// Markov blanket: the district of `v` and its parents, without `v`.
    pub fn markov_blanket(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(v)?;
        Ok(self.names_of(self.blanket_idx(i)))
    }

    /// Subgraph induced on the named vertices, keeping their declaration order.
    pub fn induced_subgraph(&self, keep: &BTreeSet<String>) -> Result<Admg, GraphError> {
        for k in keep {
            self.idx(k)?;
        }
        let vertices: Vec<VertexId> = self
            .vertices
            .iter()
            .filter(|v| keep.contains(&v.name))
            .cloned()
            .collect();
        let di: Vec<(String, String)> = self
            .di_edges()
            .into_iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .collect();
        let bi: Vec<(String, String)> = self
            .bi_edges()
            .into_iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .collect();
        Admg::new(vertices, &di, &bi)
    }

    /// Markov pillow of `v` under `order`: the Markov blanket of `v` computed in
    /// the subgraph induced by `v` and its predecessors.
    pub fn markov_pillow(&self, order: &TopoOrder, v: &str) -> Result<BTreeSet<String>, GraphError> {
        order.check_against(self)?;
        let pos = order
            .position(v)
            .ok_or_else(|| GraphError::UnknownVertex(v.to_string()))?;
        let keep: BTreeSet<String> = order.as_slice()[..=pos].iter().cloned().collect();
        self.induced_subgraph(&keep)?.markov_blanket(v)
    }

    /// True iff no child of `a` lies in the district of `a`.
    pub fn primal_fixable(&self, a: &str) -> Result<bool, GraphError> {
        Ok(self.fixability_conflicts(a)?.is_empty())
    }

    /// Vertices in ch(a) ∩ dis(a).
    pub fn fixability_conflicts(&self, a: &str) -> Result<Vec<String>, GraphError> {
        let i = self.idx(a)?;
        let dis = self.district_idx(i);
        let mut out: Vec<String> = self
            .child_idx(i)
            .filter(|c| dis.contains(c))
            .map(|c| self.name(c).to_string())
            .collect();
        out.sort();
        Ok(out)
    }

    /// True iff every non-adjacent pair excludes each other from their Markov blankets.
    pub fn mb_shielded(&self) -> bool {
        let n = self.vertices.len();
        let blankets: Vec<BTreeSet<usize>> = (0..n).map(|v| self.blanket_idx(v)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adj = self.di.contains(&(i, j))
                    || self.di.contains(&(j, i))
                    || self.bi.contains(&(i, j));
                if !adj && (blankets[i].contains(&j) || blankets[j].contains(&i)) {
                    return false;
                }
            }
        }
        true
    }

    /// Contracts `group` into one vertex called `new_name` whose arity is the
    /// sum of the member arities. The new vertex takes the position of the
    /// earliest declared member.
    pub fn merge_vertices(&self, group: &BTreeSet<String>, new_name: &str) -> Result<Admg, GraphError> {
        if group.is_empty() {
            return Err(GraphError::InvalidGroup("empty group".into()));
        }
        for g in group {
            self.idx(g)?;
        }
        if self.contains(new_name) && !group.contains(new_name) {
            return Err(GraphError::DuplicateVertex(new_name.to_string()));
        }
        let arity: usize = group.iter().map(|g| self.arity(g).unwrap()).sum();
        let rename = |s: &str| -> String {
            if group.contains(s) {
                new_name.to_string()
            } else {
                s.to_string()
            }
        };
        let mut vertices = Vec::new();
        let mut placed = false;
        for v in &self.vertices {
            if group.contains(&v.name) {
                if !placed {
                    vertices.push(VertexId::new(new_name, arity));
                    placed = true;
                }
            } else {
                vertices.push(v.clone());
            }
        }
        let di: BTreeSet<(String, String)> = self
            .di_edges()
            .into_iter()
            .map(|(a, b)| (rename(&a), rename(&b)))
            .filter(|(a, b)| a != b)
            .collect();
        let bi: BTreeSet<(String, String)> = self
            .bi_edges()
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (rename(&a), rename(&b));
                if a < b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .filter(|(a, b)| a != b)
            .collect();
        let di: Vec<_> = di.into_iter().collect();
        let bi: Vec<_> = bi.into_iter().collect();
        Admg::new(vertices, &di, &bi)
    }

    pub fn topological_order(&self, treatment: &str, outcome: &str) -> Result<TopoOrder, GraphError> {
        order::canonical_order(self, treatment, outcome)
    }
}

/// A DAG in which some vertices are unmeasured.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    graph: Admg,
    hidden: BTreeSet<String>,
}

impl Dag {
    pub fn new<S: AsRef<str>>(
        vertices: Vec<VertexId>,
        edges: &[(S, S)],
        hidden: &[S],
    ) -> Result<Self, GraphError> {
        let none: &[(S, S)] = &[];
        let graph = Admg::new(vertices, edges, none)?;
        let mut h = BTreeSet::new();
        for x in hidden {
            graph.idx(x.as_ref())?;
            h.insert(x.as_ref().to_string());
        }
        Ok(Self { graph, hidden: h })
    }

    pub fn from_edges(names: &[&str], edges: &[(&str, &str)], hidden: &[&str]) -> Result<Self, GraphError> {
        let vs = names.iter().map(|n| VertexId::new(*n, 1)).collect();
        Self::new(vs, edges, hidden)
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn hidden(&self) -> &BTreeSet<String> {
        &self.hidden
    }

    /// Latent projection onto the observed vertices.
    ///
    /// `o -> p` iff a directed path from `o` to `p` has only hidden interior
    /// vertices. `o <-> p` iff some hidden vertex reaches both through
    /// hidden-only directed paths.
    pub fn latent_project(&self) -> Admg {
        let g = &self.graph;
        let hidden: BTreeSet<usize> = self.hidden.iter().map(|h| g.idx(h).unwrap()).collect();
        // observed vertices reachable from `start` through hidden-only interiors
        let reach = |start: usize| -> BTreeSet<usize> {
            let mut out = BTreeSet::new();
            let mut seen = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for c in g.child_idx(u) {
                    if hidden.contains(&c) {
                        if seen.insert(c) {
                            queue.push_back(c);
                        }
                    } else {
                        out.insert(c);
                    }
                }
            }
            out
        };
        let observed: Vec<VertexId> = g
            .vertices
            .iter()
            .filter(|v| !self.hidden.contains(&v.name))
            .cloned()
            .collect();
        let mut di = Vec::new();
        for v in &observed {
            let i = g.idx(&v.name).unwrap();
            for c in reach(i) {
                di.push((v.name.clone(), g.name(c).to_string()));
            }
        }
        let mut bi = BTreeSet::new();
        for &h in &hidden {
            let r: Vec<usize> = reach(h).into_iter().collect();
            for (k, &a) in r.iter().enumerate() {
                for &b in &r[k + 1..] {
                    let (a, b) = (g.name(a).to_string(), g.name(b).to_string());
                    bi.insert(if a < b { (a, b) } else { (b, a) });
                }
            }
        }
        let bi: Vec<_> = bi.into_iter().collect();
        Admg::new(observed, &di, &bi).expect("projection of a valid DAG is a valid ADMG")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn front_door() -> Admg {
        Admg::from_edges(
            &["X", "A", "M", "Y"],
            &[("X", "A"), ("X", "M"), ("X", "Y"), ("A", "M"), ("M", "Y")],
            &[("A", "Y")],
        )
        .unwrap()
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        let err = Admg::from_edges(&["A", "B"], &[("A", "B"), ("B", "A")], &[]).unwrap_err();
        assert!(matches!(err, GraphError::Cycle(_)));
        let err = Admg::from_edges(&["A"], &[("A", "A")], &[]).unwrap_err();
        assert_eq!(err, GraphError::SelfLoop("A".into()));
    }

    #[test]
    fn district_and_blanket_of_front_door() {
        let g = front_door();
        assert_eq!(g.district("A").unwrap(), ["A", "Y"].map(String::from).into());
        assert_eq!(
            g.markov_blanket("Y").unwrap(),
            ["A", "M", "X"].map(String::from).into()
        );
        assert!(g.markov_blanket("Q").is_err());
    }

    #[test]
    fn single_hidden_mediator_projects_to_edge() {
        let dag = Dag::from_edges(&["A", "U", "Y"], &[("A", "U"), ("U", "Y")], &["U"]).unwrap();
        let p = dag.latent_project();
        assert_eq!(p.di_edges(), vec![("A".to_string(), "Y".to_string())]);
        assert!(p.bi_edges().is_empty());
    }

    #[test]
    fn hidden_chain_confounds_through_interior() {
        // U1 -> U2 -> B and U1 -> C: B and C share the hidden ancestor U1
        let dag = Dag::from_edges(
            &["U1", "U2", "B", "C"],
            &[("U1", "U2"), ("U2", "B"), ("U1", "C")],
            &["U1", "U2"],
        )
        .unwrap();
        let p = dag.latent_project();
        assert!(p.has_bi_edge("B", "C"));
        assert!(p.di_edges().is_empty());
    }

    #[test]
    fn merge_drops_internal_edges_and_sums_arity() {
        let g = front_door().with_arity("M", 2).unwrap();
        let m = g
            .merge_vertices(&["M".to_string()].into(), "MM")
            .unwrap();
        assert_eq!(m.arity("MM").unwrap(), 2);
        assert!(m.has_di_edge("A", "MM"));
    }
}
