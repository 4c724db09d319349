use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Graphs are stored as parent bitmasks.
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    #[serde(default)]
    pub latent: bool,
}

impl Node {
    pub fn observable(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            latent: false,
        }
    }

    pub fn latent(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            latent: true,
        }
    }
}

/// A directed acyclic graph over named nodes flagged observable or latent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagJson", into = "DagJson")]
pub struct Dag {
    nodes: Vec<Node>,
    parents: Vec<u64>,
}

/// JSON adjacency form: node list with flags plus `[from, to]` edge pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagJson {
    pub nodes: Vec<Node>,
    pub edges: Vec<(String, String)>,
}

impl TryFrom<DagJson> for Dag {
    type Error = Error;

    fn try_from(j: DagJson) -> Result<Self> {
        let edges: Vec<(&str, &str)> = j.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        Dag::new(j.nodes, &edges)
    }
}

impl From<Dag> for DagJson {
    fn from(d: Dag) -> Self {
        let edges = d
            .edges()
            .into_iter()
            .map(|(a, b)| (d.nodes[a].name.clone(), d.nodes[b].name.clone()))
            .collect();
        DagJson { nodes: d.nodes, edges }
    }
}

impl Dag {
    pub fn new(nodes: Vec<Node>, edges: &[(&str, &str)]) -> Result<Self> {
        let mut dag = Self::from_masks(nodes.clone(), vec![0; nodes.len()])?;
        for &(from, to) in edges {
            let (f, t) = (dag.index(from)?, dag.index(to)?);
            if f == t {
                return Err(Error::InvalidGraph(format!("self-loop on `{from}`")));
            }
            dag.parents[t] |= 1 << f;
        }
        if !dag.is_acyclic() {
            return Err(Error::InvalidGraph("edges form a cycle".into()));
        }
        Ok(dag)
    }

    pub fn from_masks(nodes: Vec<Node>, parents: Vec<u64>) -> Result<Self> {
        if nodes.len() > MAX_NODES {
            return Err(Error::InvalidGraph(format!("more than {MAX_NODES} nodes")));
        }
        if parents.len() != nodes.len() {
            return Err(Error::InvalidGraph("one parent mask per node required".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|m| m.name == n.name) {
                return Err(Error::InvalidGraph(format!("duplicate node `{}`", n.name)));
            }
        }
        let full = full_mask(nodes.len());
        for (i, &p) in parents.iter().enumerate() {
            if p & !full != 0 || p & (1 << i) != 0 {
                return Err(Error::InvalidGraph(format!("bad parent mask for `{}`", nodes[i].name)));
            }
        }
        let dag = Self { nodes, parents };
        if !dag.is_acyclic() {
            return Err(Error::InvalidGraph("edges form a cycle".into()));
        }
        Ok(dag)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn parent_mask(&self, i: usize) -> u64 {
        self.parents[i]
    }

    pub fn parent_masks(&self) -> &[u64] {
        &self.parents
    }

    /// Parents of `i` in increasing node order.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        bits(self.parents[i]).collect()
    }

    pub fn child_mask(&self, i: usize) -> u64 {
        self.parents
            .iter()
            .enumerate()
            .filter(|(_, &p)| p & (1 << i) != 0)
            .fold(0, |m, (c, _)| m | (1 << c))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to] & (1 << from) != 0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|t| bits(self.parents[t]).map(move |f| (f, t)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.count_ones() as usize).sum()
    }

    pub fn observables(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| !n.latent)
            .map(|n| n.name.as_str())
            .collect()
    }

    /// A copy with `from → to` added.
    pub fn with_edge(&self, from: &str, to: &str) -> Result<Dag> {
        let (f, t) = (self.index(from)?, self.index(to)?);
        let mut parents = self.parents.clone();
        parents[t] |= 1 << f;
        Dag::from_masks(self.nodes.clone(), parents)
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(&self.parents)
    }

    pub fn is_acyclic(&self) -> bool {
        is_acyclic(&self.parents)
    }

    /// `seeds` together with all their ancestors.
    pub fn ancestors_mask(&self, seeds: u64) -> u64 {
        let mut mask = seeds;
        loop {
            let next = bits(mask).fold(mask, |m, v| m | self.parents[v]);
            if next == mask {
                return mask;
            }
            mask = next;
        }
    }

    /// Whether `a` is a proper ancestor of `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        a != b && self.ancestors_mask(1 << b) & (1 << a) != 0
    }

    pub fn mask_of(&self, names: &[&str]) -> Result<u64> {
        names.iter().try_fold(0u64, |m, n| Ok(m | (1 << self.index(n)?)))
    }

    pub fn to_json(&self) -> DagJson {
        self.clone().into()
    }

    /// Compact `a->b;c->d` edge list.
    pub fn edge_string(&self) -> String {
        self.edges()
            .iter()
            .map(|&(f, t)| format!("{}->{}", self.name(f), self.name(t)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.edge_count() == 0 {
            write!(f, "(no edges)")
        } else {
            write!(f, "{}", self.edge_string())
        }
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

pub(crate) fn topological_order(parents: &[u64]) -> Option<Vec<usize>> {
    let mut placed = 0u64;
    let mut order = Vec::with_capacity(parents.len());
    while order.len() < parents.len() {
        let ready = (0..parents.len()).find(|&v| placed & (1 << v) == 0 && parents[v] & !placed == 0)?;
        placed |= 1 << ready;
        order.push(ready);
    }
    Some(order)
}

pub(crate) fn is_acyclic(parents: &[u64]) -> bool {
    // Repeatedly strip nodes whose parents are all stripped.
    let full = full_mask(parents.len());
    let mut placed = 0u64;
    loop {
        let ready = (0..parents.len())
            .filter(|&v| placed & (1 << v) == 0 && parents[v] & !placed == 0)
            .fold(0u64, |m, v| m | (1 << v));
        if ready == 0 {
            return placed == full;
        }
        placed |= ready;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Dag {
        Dag::new(
            vec![Node::observable("x"), Node::observable("m"), Node::observable("y")],
            &[("x", "m"), ("m", "y")],
        )
        .unwrap()
    }

    #[test]
    fn rejects_cycles_and_duplicates() {
        let nodes = vec![Node::observable("a"), Node::observable("b")];
        assert!(Dag::new(nodes.clone(), &[("a", "b"), ("b", "a")]).is_err());
        assert!(Dag::new(nodes.clone(), &[("a", "a")]).is_err());
        assert!(Dag::new(vec![Node::observable("a"), Node::latent("a")], &[]).is_err());
        assert!(matches!(Dag::new(nodes, &[("a", "z")]), Err(Error::UnknownNode(_))));
        assert!(chain().with_edge("y", "x").is_err());
    }

    #[test]
    fn ancestry_and_order() {
        let d = chain();
        assert!(d.is_ancestor(0, 2));
        assert!(!d.is_ancestor(2, 0));
        assert_eq!(d.topological_order().unwrap(), vec![0, 1, 2]);
        assert_eq!(d.child_mask(1), 0b100);
    }

    #[test]
    fn json_round_trip() {
        let d = Dag::new(
            vec![Node::observable("a"), Node::latent("l"), Node::observable("b")],
            &[("l", "a"), ("l", "b")],
        )
        .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"latent\":true"));
        assert!(s.contains("[\"l\",\"a\"]"));
        let back: Dag = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let cyclic = r#"{"nodes":[{"name":"a"},{"name":"b"}],"edges":[["a","b"],["b","a"]]}"#;
        assert!(serde_json::from_str::<Dag>(cyclic).is_err());
    }
}
