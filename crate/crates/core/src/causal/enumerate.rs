//! Exhaustive enumeration of labeled DAGs.
//!
//! Each unordered node pair `{i, j}` (`i < j`) is in one of three states:
//! no edge, `i → j`, or `j → i`. Candidates are visited in mixed-radix
//! order of these states and cyclic ones are dropped, so the output order
//! is a deterministic function of the node list.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dag::{is_acyclic, Dag, Node};
use crate::{Error, Result};

/// Largest node count accepted by [`enumerate_dags`].
pub const NODE_BUDGET: usize = 6;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumConstraints {
    /// Nodes that may not have parents.
    pub exogenous: Vec<String>,
    /// Nodes that may be absent; each subset of them is enumerated.
    pub optional: Vec<String>,
}

impl EnumConstraints {
    pub fn unconstrained() -> Self {
        Self::default()
    }
}

/// All DAGs over `nodes` satisfying `constraints`, grouped by which
/// optional nodes are present (fewest first).
pub fn enumerate_dags(nodes: &[Node], constraints: &EnumConstraints) -> Result<Vec<Dag>> {
    if nodes.len() > NODE_BUDGET {
        return Err(Error::NodeBudget {
            found: nodes.len(),
            limit: NODE_BUDGET,
        });
    }
    for name in constraints.exogenous.iter().chain(&constraints.optional) {
        if !nodes.iter().any(|n| &n.name == name) {
            return Err(Error::UnknownNode(name.clone()));
        }
    }
    let optional: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| constraints.optional.contains(&n.name))
        .map(|(i, _)| i)
        .collect();

    let mut subsets: Vec<u32> = (0..1u32 << optional.len()).collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));

    let mut out = Vec::new();
    for present in subsets {
        let chosen: Vec<Node> = nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| match optional.iter().position(|o| o == i) {
                Some(k) => present & (1 << k) != 0,
                None => true,
            })
            .map(|(_, n)| n.clone())
            .collect();
        out.extend(enumerate_fixed(&chosen, &constraints.exogenous)?);
    }
    Ok(out)
}

fn enumerate_fixed(nodes: &[Node], exogenous: &[String]) -> Result<Vec<Dag>> {
    let n = nodes.len();
    let exo: Vec<bool> = nodes.iter().map(|v| exogenous.contains(&v.name)).collect();
    // Allowed states per unordered pair.
    let mut pairs: Vec<(usize, usize, Vec<u8>)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut states = vec![0u8];
            if !exo[j] {
                states.push(1);
            }
            if !exo[i] {
                states.push(2);
            }
            pairs.push((i, j, states));
        }
    }
    let total: u64 = pairs.iter().map(|p| p.2.len() as u64).product();

    let masks: Vec<Vec<u64>> = (0..total)
        .into_par_iter()
        .filter_map(|code| {
            let mut rest = code;
            let mut parents = vec![0u64; n];
            for (i, j, states) in &pairs {
                let k = states.len() as u64;
                match states[(rest % k) as usize] {
                    1 => parents[*j] |= 1 << i,
                    2 => parents[*i] |= 1 << j,
                    _ => {}
                }
                rest /= k;
            }
            is_acyclic(&parents).then_some(parents)
        })
        .collect();

    masks.into_iter().map(|p| Dag::from_masks(nodes.to_vec(), p)).collect()
}
