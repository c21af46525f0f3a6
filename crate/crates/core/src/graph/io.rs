use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, Admg, Dag, GraphError, VertexId};

/// Raw JSON form of a graph:
/// `{"vertices":[{"name":"X","arity":1}], "di_edges":[["X","A"]], "bi_edges":[["A","Y"]], "hidden":["U"]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<VertexId>,
    #[serde(default)]
    pub di_edges: Vec<[String; 2]>,
    #[serde(default)]
    pub bi_edges: Vec<[String; 2]>,
    #[serde(default)]
    pub hidden: Vec<String>,
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GraphError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph specs always serialize")
    }

    fn pairs(edges: &[[String; 2]]) -> Vec<(String, String)> {
        edges.iter().map(|[a, b]| (a.clone(), b.clone())).collect()
    }

    fn first_violation(&self) -> Result<(), GraphError> {
        use super::Violation::*;
        match validate(self).into_iter().next() {
            None => Ok(()),
            Some(Cycle(c)) => Err(GraphError::Cycle(c)),
            Some(SelfLoop(v)) | Some(SelfBidirected(v)) => Err(GraphError::SelfLoop(v)),
            Some(DanglingEdge(a, b)) => Err(GraphError::UnknownVertex(format!("{a} or {b}"))),
            Some(DuplicateVertex(v)) => Err(GraphError::DuplicateVertex(v)),
            Some(ZeroArity(v)) => Err(GraphError::ZeroArity(v)),
            Some(UnknownHidden(v)) => Err(GraphError::UnknownVertex(v)),
        }
    }

    /// Interprets the description as an ADMG. A non-empty hidden set is
    /// only allowed for DAGs, which are projected onto their observed part.
    pub fn to_admg(&self) -> Result<Admg, GraphError> {
        self.first_violation()?;
        if !self.hidden.is_empty() {
            return Ok(self.to_dag()?.latent_project());
        }
        Admg::new(
            self.vertices.clone(),
            &Self::pairs(&self.di_edges),
            &Self::pairs(&self.bi_edges),
        )
    }

    pub fn to_dag(&self) -> Result<Dag, GraphError> {
        self.first_violation()?;
        if !self.bi_edges.is_empty() {
            return Err(GraphError::Parse(
                "a DAG with hidden vertices cannot carry bidirected edges".into(),
            ));
        }
        Dag::new(self.vertices.clone(), &Self::pairs(&self.di_edges), &self.hidden)
    }

    pub fn from_admg(g: &Admg) -> Self {
        Self {
            vertices: g.vertices().to_vec(),
            di_edges: g.di_edges().into_iter().map(|(a, b)| [a, b]).collect(),
            bi_edges: g.bi_edges().into_iter().map(|(a, b)| [a, b]).collect(),
            hidden: Vec::new(),
        }
    }
}
