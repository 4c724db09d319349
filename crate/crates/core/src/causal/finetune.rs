//! Perturbation test for fine-tuned independences.
//!
//! An independence that follows from the graph survives any change of
//! parameters; one produced by a balance of parameters breaks as soon as a
//! parameter moves.

use serde::{Deserialize, Serialize};

use super::cpt::{joint_from_cpt, CptModel};
use crate::inference::CIStatement;
use crate::{Error, Result};

/// Total-variation dependence above which an independence counts as broken.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-9;

/// Names CPT entries of one node: every row whose parents match `parents`
/// (unlisted parents range freely), column `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamPath {
    pub node: String,
    #[serde(default)]
    pub parents: Vec<(String, usize)>,
    pub value: usize,
}

impl ParamPath {
    pub fn new(node: impl Into<String>, parents: &[(&str, usize)], value: usize) -> Self {
        Self {
            node: node.into(),
            parents: parents.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            value,
        }
    }
}

/// Copy of `model` with each selected entry shifted by `epsilon`; the other
/// entries of the row are rescaled so the row still sums to one.
pub fn perturb(model: &CptModel, path: &ParamPath, epsilon: f64) -> Result<CptModel> {
    if !epsilon.is_finite() {
        return Err(Error::InvalidPerturbation(format!("epsilon {epsilon} is not finite")));
    }
    let dag = model.dag();
    let node = dag.index(&path.node)?;
    let card = model.cards()[node];
    if path.value >= card {
        return Err(Error::InvalidPerturbation(format!(
            "value {} outside the domain of `{}`",
            path.value, path.node
        )));
    }
    let parents = dag.parents(node);
    let mut filter = vec![None; parents.len()];
    for (name, v) in &path.parents {
        let idx = dag.index(name)?;
        let k = parents
            .iter()
            .position(|&p| p == idx)
            .ok_or_else(|| Error::InvalidPerturbation(format!("`{name}` is not a parent of `{}`", path.node)))?;
        if *v >= model.cards()[idx] {
            return Err(Error::InvalidPerturbation(format!(
                "value {v} outside the domain of `{name}`"
            )));
        }
        filter[k] = Some(*v);
    }

    let rows = model.rows(node);
    let parent_cards: Vec<usize> = parents.iter().map(|&p| model.cards()[p]).collect();
    let mut out = model.clone();
    let table = &mut out.tables_mut()[node];
    let mut touched = 0;
    for r in 0..rows {
        let mut rest = r;
        let mut assignment = vec![0; parent_cards.len()];
        for (slot, &c) in assignment.iter_mut().zip(&parent_cards).rev() {
            *slot = rest % c;
            rest /= c;
        }
        if assignment.iter().zip(&filter).any(|(a, f)| f.is_some_and(|f| f != *a)) {
            continue;
        }
        touched += 1;
        let row = &mut table[r * card..(r + 1) * card];
        let old = row[path.value];
        let new = old + epsilon;
        if !(0.0..=1.0).contains(&new) {
            return Err(Error::InvalidPerturbation(format!(
                "`{}` entry {old} shifted by {epsilon} leaves [0, 1]",
                path.node
            )));
        }
        let others = 1.0 - old;
        let target = 1.0 - new;
        for (k, p) in row.iter_mut().enumerate() {
            if k == path.value {
                *p = new;
            } else if others > 0.0 {
                *p *= target / others;
            } else {
                *p = target / (card - 1) as f64;
            }
        }
    }
    if touched == 0 {
        return Err(Error::InvalidPerturbation("path selects no table rows".into()));
    }
    out.revalidate()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    FineTuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub epsilon: f64,
    pub dependence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub model_id: String,
    pub path: ParamPath,
    pub statement: CIStatement,
    pub baseline_dependence: f64,
    pub results: Vec<PerturbationResult>,
    pub verdict: StabilityVerdict,
}

fn dependence(model: &CptModel, statement: &CIStatement) -> Result<f64> {
    let joint = joint_from_cpt(model, false)?;
    joint.dependence(&statement.x, &statement.y, &statement.z_refs())
}

/// Shifts the parameter at `path` by each epsilon and measures the largest
/// total-variation dependence of `statement.x` on `statement.y` across the
/// `statement.z` strata. The statement must hold exactly at epsilon = 0.
/// The verdict is fine-tuned iff every non-zero epsilon exposes a
/// dependence above [`DEPENDENCE_THRESHOLD`].
pub fn perturb_and_test(
    model: &CptModel,
    path: &ParamPath,
    epsilons: &[f64],
    statement: &CIStatement,
) -> Result<StabilityReport> {
    statement.validate()?;
    if !epsilons.iter().any(|&e| e != 0.0) {
        return Err(Error::InvalidPerturbation("no non-zero epsilon given".into()));
    }
    let baseline = dependence(model, statement)?;
    if baseline > DEPENDENCE_THRESHOLD {
        return Err(Error::NotIndependentAtBaseline(statement.to_string()));
    }
    let results = epsilons
        .iter()
        .map(|&epsilon| {
            let perturbed = perturb(model, path, epsilon)?;
            Ok(PerturbationResult {
                epsilon,
                dependence: dependence(&perturbed, statement)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let broken = results
        .iter()
        .filter(|r| r.epsilon != 0.0)
        .all(|r| r.dependence > DEPENDENCE_THRESHOLD);
    Ok(StabilityReport {
        model_id: model.id.clone(),
        path: path.clone(),
        statement: statement.clone(),
        baseline_dependence: baseline,
        results,
        verdict: if broken {
            StabilityVerdict::FineTuned
        } else {
            StabilityVerdict::Stable
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::cpt::{cancelling_paths_model, PILL, PREGNANCY, THROMBOSIS};
    use crate::causal::{Dag, Node};

    fn cancelling() -> CptModel {
        cancelling_paths_model(0.4, 0.5, 0.1, 0.1).unwrap()
    }

    #[test]
    fn direct_effect_shift_is_linear() {
        let path = ParamPath::new(THROMBOSIS, &[(PILL, 1)], 1);
        let m = perturb(&cancelling(), &path, 0.05).unwrap();
        let j = joint_from_cpt(&m, false).unwrap();
        let p1 = j
            .condition(&[(PILL, 1)])
            .unwrap()
            .marginal(&[THROMBOSIS])
            .unwrap()
            .prob(&[1]);
        let p0 = j
            .condition(&[(PILL, 0)])
            .unwrap()
            .marginal(&[THROMBOSIS])
            .unwrap()
            .prob(&[1]);
        assert!((p1 - p0 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn row_stays_normalized_with_many_values() {
        let dag = Dag::new(vec![Node::observable("x")], &[]).unwrap();
        let m = CptModel::new("x", dag, vec![3], vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let p = perturb(&m, &ParamPath::new("x", &[], 0), 0.1).unwrap();
        let t = p.table(0);
        assert!((t[0] - 0.3).abs() < 1e-15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t[1] / t[2] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn perturbation_errors() {
        let m = cancelling();
        let q1 = ParamPath::new(PREGNANCY, &[(PILL, 1)], 1);
        assert!(matches!(perturb(&m, &q1, 0.95), Err(Error::InvalidPerturbation(_))));
        assert!(perturb(&m, &q1, f64::NAN).is_err());
        assert!(perturb(&m, &ParamPath::new(PREGNANCY, &[(THROMBOSIS, 0)], 1), 0.01).is_err());
        let s = CIStatement::new(THROMBOSIS, PILL, &[]).unwrap();
        assert!(perturb_and_test(&m, &q1, &[0.0], &s).is_err());
        let dependent = CIStatement::new(PREGNANCY, PILL, &[]).unwrap();
        assert!(matches!(
            perturb_and_test(&m, &q1, &[0.01], &dependent),
            Err(Error::NotIndependentAtBaseline(_))
        ));
    }

    #[test]
    fn structural_independence_is_stable() {
        let dag = Dag::new(vec![Node::observable("x"), Node::observable("y")], &[]).unwrap();
        let m = CptModel::new("indep", dag, vec![2, 2], vec![vec![0.4, 0.6], vec![0.7, 0.3]]).unwrap();
        let s = CIStatement::new("x", "y", &[]).unwrap();
        for node in ["x", "y"] {
            let r = perturb_and_test(&m, &ParamPath::new(node, &[], 1), &[0.01, 0.05, -0.1], &s).unwrap();
            assert_eq!(r.verdict, StabilityVerdict::Stable);
            assert!(r.results.iter().all(|x| x.dependence < DEPENDENCE_THRESHOLD));
        }
    }
}
