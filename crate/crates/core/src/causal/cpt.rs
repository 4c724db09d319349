//! Discrete causal models: a DAG plus one conditional probability table per
//! node.
//!
//! A node's table is laid out row by row. Rows enumerate the node's parent
//! assignments in mixed radix over the parents in increasing node order
//! (first parent slowest); each row holds one probability per value.

use serde::{Deserialize, Serialize};

use super::dag::{Dag, Node};
use crate::corestats::{self, names, Angle, JointTable, Variable};
use crate::{Error, Result, EXACT_TOL};

/// Largest joint table [`joint_from_cpt`] will materialize.
pub const MAX_JOINT_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptModel {
    pub id: String,
    dag: Dag,
    cards: Vec<usize>,
    tables: Vec<Vec<f64>>,
}

impl CptModel {
    pub fn new(id: impl Into<String>, dag: Dag, cards: Vec<usize>, tables: Vec<Vec<f64>>) -> Result<Self> {
        let model = Self {
            id: id.into(),
            dag,
            cards,
            tables,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dag.len();
        if self.cards.len() != n || self.tables.len() != n {
            return Err(Error::InvalidCpt(
                "one domain size and one table per node required".into(),
            ));
        }
        if let Some(i) = self.cards.iter().position(|&c| c == 0) {
            return Err(Error::InvalidCpt(format!("`{}` has an empty domain", self.dag.name(i))));
        }
        for v in 0..n {
            let card = self.cards[v];
            let expected = self.rows(v) * card;
            let table = &self.tables[v];
            if table.len() != expected {
                return Err(Error::InvalidCpt(format!(
                    "`{}` needs {expected} entries, has {}",
                    self.dag.name(v),
                    table.len()
                )));
            }
            for (r, row) in table.chunks(card).enumerate() {
                if row.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
                    return Err(Error::InvalidCpt(format!(
                        "`{}` row {r} has an entry outside [0, 1]",
                        self.dag.name(v)
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > EXACT_TOL {
                    return Err(Error::InvalidCpt(format!("`{}` row {r} sums to {s}", self.dag.name(v))));
                }
            }
        }
        Ok(())
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self, node: usize) -> &[f64] {
        &self.tables[node]
    }

    pub fn rows(&self, node: usize) -> usize {
        self.dag.parents(node).iter().map(|&p| self.cards[p]).product()
    }

    /// Row index of `node`'s table for a full parent assignment, given in
    /// parent order.
    pub fn row_index(&self, node: usize, parent_values: &[usize]) -> usize {
        self.dag
            .parents(node)
            .iter()
            .zip(parent_values)
            .fold(0, |acc, (&p, &v)| acc * self.cards[p] + v)
    }

    /// `P(node = value | parents = parent_values)`.
    pub fn entry(&self, node: usize, parent_values: &[usize], value: usize) -> f64 {
        self.tables[node][self.row_index(node, parent_values) * self.cards[node] + value]
    }

    pub(crate) fn tables_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.tables
    }

    pub(crate) fn revalidate(&self) -> Result<()> {
        self.validate()
    }
}

/// Joint distribution of a model: the product of its CPT entries. With
/// `marginalize_latent`, latent nodes are summed out.
pub fn joint_from_cpt(model: &CptModel, marginalize_latent: bool) -> Result<JointTable> {
    let dag = model.dag();
    let n = dag.len();
    let cells = model
        .cards
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c).filter(|&x| x <= MAX_JOINT_CELLS));
    let Some(total) = cells else {
        let approx = model.cards.iter().map(|&c| c as f64).product::<f64>();
        return Err(Error::TableTooLarge {
            cells: if approx >= usize::MAX as f64 {
                usize::MAX
            } else {
                approx as usize
            },
            limit: MAX_JOINT_CELLS,
        });
    };
    let order = dag
        .topological_order()
        .ok_or_else(|| Error::InvalidGraph("model graph is cyclic".into()))?;
    let parents: Vec<Vec<usize>> = (0..n).map(|v| dag.parents(v)).collect();

    let variables: Vec<Variable> = dag
        .nodes()
        .iter()
        .zip(&model.cards)
        .map(|(node, &c)| Variable::new(node.name.clone(), c))
        .collect();
    let shape = corestats::Shape::new(variables.clone())?;
    let mut probs = Vec::with_capacity(total);
    for flat in 0..total {
        let assign = shape.assignment(flat);
        let mut p = 1.0;
        for &v in &order {
            let row = parents[v].iter().fold(0, |acc, &q| acc * model.cards[q] + assign[q]);
            p *= model.tables[v][row * model.cards[v] + assign[v]];
            if p == 0.0 {
                break;
            }
        }
        probs.push(p);
    }
    let joint = JointTable::new(variables, probs)?;
    if !marginalize_latent {
        return Ok(joint);
    }
    let keep: Vec<&str> = dag.observables();
    joint.marginal(&keep)
}

fn uniform(card: usize) -> Vec<f64> {
    vec![1.0 / card as f64; card]
}

/// SEPRB as a causal model: settings `alpha`, `beta` uniform over their
/// grids, latent input channel `A'` with `P(A' = 1) = p`, and outcome `B`
/// with parents `(alpha, beta, A')` following the Malus law.
pub fn seprb_model(alphas: &[Angle], betas: &[Angle], p: f64) -> Result<CptModel> {
    corestats::check_input_weight(p)?;
    if alphas.is_empty() {
        return Err(Error::EmptyGrid("alpha"));
    }
    if betas.is_empty() {
        return Err(Error::EmptyGrid("beta"));
    }
    let dag = Dag::new(
        vec![
            Node::observable(names::ALPHA),
            Node::observable(names::BETA),
            Node::latent(names::A_PRIME),
            Node::observable(names::B),
        ],
        &[
            (names::ALPHA, names::B),
            (names::BETA, names::B),
            (names::A_PRIME, names::B),
        ],
    )?;
    // Parents of B in node order: alpha, beta, A'.
    let mut b_table = Vec::with_capacity(alphas.len() * betas.len() * 4);
    for &a in alphas {
        for &b in betas {
            let (same, diff) = corestats::malus(a, b);
            b_table.extend_from_slice(&[same, diff]); // A' = 0
            b_table.extend_from_slice(&[diff, same]); // A' = 1
        }
    }
    CptModel::new(
        format!("seprb(p={p})"),
        dag,
        vec![alphas.len(), betas.len(), 2, 2],
        vec![uniform(alphas.len()), uniform(betas.len()), vec![1.0 - p, p], b_table],
    )
}

pub const PILL: &str = "pill";
pub const PREGNANCY: &str = "pregnancy";
pub const THROMBOSIS: &str = "thrombosis";

/// Cancelling paths: `pill → thrombosis` directly and through
/// `pill → pregnancy → thrombosis`.
///
/// `P(pregnancy = 1 | pill = k) = q_k`, and
/// `P(thrombosis = 1 | pill, pregnancy) = base + a·pill + b·pregnancy`
/// with the direct effect `a = b(q0 − q1)`, which makes
/// `P(thrombosis | pill)` constant. The pill is taken with probability ½.
pub fn cancelling_paths_model(b: f64, q0: f64, q1: f64, base: f64) -> Result<CptModel> {
    for (name, v) in [("b", b), ("q0", q0), ("q1", q1), ("base", base)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ParameterRange(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let a = b * (q0 - q1);
    let t = |pill: f64, preg: f64| base + a * pill + b * preg;
    let mut t_table = Vec::with_capacity(8);
    for pill in [0.0, 1.0] {
        for preg in [0.0, 1.0] {
            let p = t(pill, preg);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ParameterRange(format!(
                    "P(thrombosis | pill={pill}, pregnancy={preg}) = {p} is outside [0, 1]"
                )));
            }
            t_table.extend_from_slice(&[1.0 - p, p]);
        }
    }
    let dag = Dag::new(
        vec![
            Node::observable(PILL),
            Node::observable(PREGNANCY),
            Node::observable(THROMBOSIS),
        ],
        &[(PILL, PREGNANCY), (PILL, THROMBOSIS), (PREGNANCY, THROMBOSIS)],
    )?;
    CptModel::new(
        format!("cancelling-paths(b={b}, q0={q0}, q1={q1}, base={base})"),
        dag,
        vec![2, 2, 2],
        vec![vec![0.5, 0.5], vec![1.0 - q0, q0, 1.0 - q1, q1], t_table],
    )
}
