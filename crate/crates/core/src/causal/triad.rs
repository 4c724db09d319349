//! Markov / faithfulness / Bell-locality classification of candidate DAGs
//! against an observed independence pattern.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dag::{Dag, Node};
use super::dsep::d_separated_idx;
use super::enumerate::{enumerate_dags, EnumConstraints};
use crate::corestats::names;
use crate::inference::CIStatement;
use crate::{Error, Result};

/// Observed independences and dependences among observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependencePattern {
    independences: Vec<CIStatement>,
    dependences: Vec<CIStatement>,
}

impl IndependencePattern {
    pub fn new(independences: Vec<CIStatement>, dependences: Vec<CIStatement>) -> Result<Self> {
        for s in independences.iter().chain(&dependences) {
            s.validate()?;
        }
        if let Some(s) = independences.iter().find(|s| dependences.iter().any(|d| d.same_as(s))) {
            return Err(Error::InvalidStatement(format!(
                "{s} listed as both independent and dependent"
            )));
        }
        Ok(Self {
            independences,
            dependences,
        })
    }

    /// The pattern of the two-wing polariser experiments: settings
    /// independent, no signalling, outcomes correlated with each other and
    /// with their local settings. `first` is `A` (EPRB) or `A'` (SEPRB).
    pub fn quantum(first: &str) -> Self {
        let st = |x: &str, y: &str, z: &[&str]| CIStatement::new(x, y, z).expect("distinct names");
        Self::new(
            vec![
                st(names::ALPHA, names::BETA, &[]),
                st(first, names::BETA, &[names::ALPHA]),
                st(names::B, names::ALPHA, &[names::BETA]),
            ],
            vec![
                st(first, names::B, &[names::ALPHA, names::BETA]),
                st(first, names::ALPHA, &[]),
                st(names::B, names::BETA, &[]),
            ],
        )
        .expect("quantum pattern is consistent")
    }

    pub fn independences(&self) -> &[CIStatement] {
        &self.independences
    }

    pub fn dependences(&self) -> &[CIStatement] {
        &self.dependences
    }

    fn variables(&self) -> impl Iterator<Item = &str> {
        self.independences.iter().chain(&self.dependences).flat_map(|s| {
            [s.x.as_str(), s.y.as_str()]
                .into_iter()
                .chain(s.z.iter().map(String::as_str))
        })
    }
}

/// The setting and outcome variables of each wing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wings {
    pub a_setting: String,
    pub a_outcome: String,
    pub b_setting: String,
    pub b_outcome: String,
}

impl Wings {
    pub fn new(first: &str) -> Self {
        Self {
            a_setting: names::ALPHA.into(),
            a_outcome: first.into(),
            b_setting: names::BETA.into(),
            b_outcome: names::B.into(),
        }
    }

    pub fn eprb() -> Self {
        Self::new(names::A)
    }

    pub fn seprb() -> Self {
        Self::new(names::A_PRIME)
    }
}

/// Bell-local structures: settings have no parents, and neither wing's
/// setting or outcome is an ancestor of the other wing's outcome. Shared
/// latent ancestors of both outcomes are allowed. Returns `false` when a
/// wing variable is absent from the graph.
pub fn is_bell_local(dag: &Dag, wings: &Wings) -> Result<bool> {
    let idx = |n: &str| dag.index(n);
    let (sa, oa, sb, ob) = (
        idx(&wings.a_setting)?,
        idx(&wings.a_outcome)?,
        idx(&wings.b_setting)?,
        idx(&wings.b_outcome)?,
    );
    if dag.parent_mask(sa) != 0 || dag.parent_mask(sb) != 0 {
        return Ok(false);
    }
    let anc_b = dag.ancestors_mask(1 << ob);
    let anc_a = dag.ancestors_mask(1 << oa);
    let crosses = anc_b & ((1 << sa) | (1 << oa)) != 0 || anc_a & ((1 << sb) | (1 << ob)) != 0;
    Ok(!crosses)
}

fn statement_holds(dag: &Dag, s: &CIStatement) -> Result<bool> {
    let zmask = dag.mask_of(&s.z_refs())?;
    Ok(d_separated_idx(dag, dag.index(&s.x)?, dag.index(&s.y)?, zmask))
}

/// Every CI statement among `observables` (conditioning on observables
/// only) that the DAG implies, each pair listed once with `x` before `y`
/// in `observables` order.
pub fn implied_independences(dag: &Dag, observables: &[&str]) -> Result<Vec<CIStatement>> {
    let idx: Vec<usize> = observables.iter().map(|n| dag.index(n)).collect::<Result<_>>()?;
    let k = observables.len();
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let rest: Vec<usize> = (0..k).filter(|&c| c != a && c != b).collect();
            for subset in 0..1u32 << rest.len() {
                let chosen: Vec<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| subset & (1 << bit) != 0)
                    .map(|(_, &c)| c)
                    .collect();
                let zmask = chosen.iter().fold(0u64, |m, &c| m | (1 << idx[c]));
                if d_separated_idx(dag, idx[a], idx[b], zmask) {
                    let z: Vec<&str> = chosen.iter().map(|&c| observables[c]).collect();
                    out.push(CIStatement::new(observables[a], observables[b], &z)?);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriadVerdict {
    /// Implies an independence that is observed as a dependence.
    NotMarkov,
    /// Markov, but Bell-local while a Bell inequality is violated.
    BellExcluded,
    /// Markov and not Bell-excluded, but some observed independence needs
    /// fine-tuned parameters.
    FineTuned,
    ExplanatoryAndFaithful,
}

impl TriadVerdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::NotMarkov => "not-markov",
            Self::BellExcluded => "bell-excluded",
            Self::FineTuned => "fine-tuned",
            Self::ExplanatoryAndFaithful => "explanatory-and-faithful",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadEntry {
    pub index: usize,
    pub dag: Dag,
    pub markov_ok: bool,
    pub faithful_ok: bool,
    pub bell_excluded: bool,
    pub verdict: TriadVerdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriadSummary {
    pub total: usize,
    pub markov_ok: usize,
    pub not_markov: usize,
    pub bell_excluded: usize,
    pub fine_tuned: usize,
    pub explanatory_and_faithful: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadReport {
    pub bell_violated: bool,
    pub pattern: IndependencePattern,
    pub summary: TriadSummary,
    pub entries: Vec<TriadEntry>,
}

impl TriadReport {
    fn new(pattern: IndependencePattern, bell_violated: bool, entries: Vec<TriadEntry>) -> Self {
        let mut summary = TriadSummary {
            total: entries.len(),
            ..Default::default()
        };
        for e in &entries {
            if e.markov_ok {
                summary.markov_ok += 1;
            }
            match e.verdict {
                TriadVerdict::NotMarkov => summary.not_markov += 1,
                TriadVerdict::BellExcluded => summary.bell_excluded += 1,
                TriadVerdict::FineTuned => summary.fine_tuned += 1,
                TriadVerdict::ExplanatoryAndFaithful => summary.explanatory_and_faithful += 1,
            }
        }
        Self {
            bell_violated,
            pattern,
            summary,
            entries,
        }
    }
}

/// Classifies one DAG.
///
/// `markov_ok`: no observed dependence is implied to be an independence.
/// `faithful_ok`: every observed independence is implied by d-separation.
/// `bell_excluded`: a Bell inequality is violated and the DAG is Bell-local.
pub fn classify(dag: &Dag, pattern: &IndependencePattern, bell_violated: bool, wings: &Wings) -> Result<TriadEntry> {
    for v in pattern.variables() {
        let i = dag.index(v)?;
        if dag.nodes()[i].latent {
            return Err(Error::InvalidStatement(format!("pattern variable `{v}` is latent")));
        }
    }
    let mut markov_ok = true;
    for s in pattern.dependences() {
        if statement_holds(dag, s)? {
            markov_ok = false;
            break;
        }
    }
    let mut faithful_ok = true;
    for s in pattern.independences() {
        if !statement_holds(dag, s)? {
            faithful_ok = false;
            break;
        }
    }
    let bell_excluded = bell_violated && is_bell_local(dag, wings)?;
    let verdict = if !markov_ok {
        TriadVerdict::NotMarkov
    } else if bell_excluded {
        TriadVerdict::BellExcluded
    } else if !faithful_ok {
        TriadVerdict::FineTuned
    } else {
        TriadVerdict::ExplanatoryAndFaithful
    };
    Ok(TriadEntry {
        index: 0,
        dag: dag.clone(),
        markov_ok,
        faithful_ok,
        bell_excluded,
        verdict,
    })
}

/// Enumerates every DAG over `nodes` allowed by `constraints` and
/// classifies each. Entries keep enumeration order.
pub fn enumerate_and_classify(
    nodes: &[Node],
    constraints: &EnumConstraints,
    pattern: &IndependencePattern,
    bell_violated: bool,
    wings: &Wings,
) -> Result<TriadReport> {
    let dags = enumerate_dags(nodes, constraints)?;
    let entries = dags
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut e = classify(d, pattern, bell_violated, wings)?;
            e.index = i;
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TriadReport::new(pattern.clone(), bell_violated, entries))
}

/// Inputs for the two-wing causal search.
#[derive(Debug, Clone)]
pub struct QuantumSetup {
    pub nodes: Vec<Node>,
    pub constraints: EnumConstraints,
    pub pattern: IndependencePattern,
    pub wings: Wings,
}

/// Nodes `{alpha, first, beta, B}` plus an optional latent `lambda`.
/// `settings_exogenous = false` admits edges into the settings.
pub fn quantum_setup(first: &str, include_latent: bool, settings_exogenous: bool) -> QuantumSetup {
    let mut nodes = vec![
        Node::observable(names::ALPHA),
        Node::observable(first),
        Node::observable(names::BETA),
        Node::observable(names::B),
    ];
    let mut constraints = EnumConstraints::default();
    if include_latent {
        nodes.push(Node::latent(names::LAMBDA));
        constraints.optional.push(names::LAMBDA.into());
    }
    if settings_exogenous {
        constraints.exogenous = vec![names::ALPHA.into(), names::BETA.into()];
    }
    QuantumSetup {
        nodes,
        constraints,
        pattern: IndependencePattern::quantum(first),
        wings: Wings::new(first),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corestats::names::*;

    fn common_cause() -> Dag {
        Dag::new(
            vec![
                Node::observable(ALPHA),
                Node::observable(A),
                Node::observable(BETA),
                Node::observable(B),
                Node::latent(LAMBDA),
            ],
            &[(ALPHA, A), (LAMBDA, A), (LAMBDA, B), (BETA, B)],
        )
        .unwrap()
    }

    #[test]
    fn common_cause_implies_no_signalling() {
        let imp = implied_independences(&common_cause(), &[ALPHA, A, BETA, B]).unwrap();
        let has = |x, y, z: &[&str]| imp.iter().any(|s| s.same_as(&CIStatement::new(x, y, z).unwrap()));
        assert!(has(A, BETA, &[ALPHA]));
        assert!(has(B, ALPHA, &[BETA]));
        assert!(has(ALPHA, BETA, &[]));
        assert!(!has(A, B, &[ALPHA, BETA]));
    }

    #[test]
    fn complete_and_edgeless_extremes() {
        let obs = [ALPHA, A, BETA, B];
        let nodes: Vec<Node> = obs.iter().map(|n| Node::observable(*n)).collect();
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((obs[i], obs[j]));
            }
        }
        let complete = Dag::new(nodes.clone(), &edges).unwrap();
        assert!(implied_independences(&complete, &obs).unwrap().is_empty());
        let edgeless = Dag::new(nodes, &[]).unwrap();
        // 6 pairs × 4 conditioning subsets.
        assert_eq!(implied_independences(&edgeless, &obs).unwrap().len(), 24);
    }

    #[test]
    fn classify_examples() {
        let pattern = IndependencePattern::quantum(A);
        let wings = Wings::eprb();

        let e = classify(&common_cause(), &pattern, true, &wings).unwrap();
        assert!(e.markov_ok && e.faithful_ok && e.bell_excluded);
        assert_eq!(e.verdict, TriadVerdict::BellExcluded);

        let e = classify(&common_cause().with_edge(ALPHA, B).unwrap(), &pattern, true, &wings).unwrap();
        assert!(!e.faithful_ok);
        assert!(!e.bell_excluded);
        assert_eq!(e.verdict, TriadVerdict::FineTuned);

        let edgeless = Dag::new([ALPHA, A, BETA, B].iter().map(|n| Node::observable(*n)).collect(), &[]).unwrap();
        assert!(!classify(&edgeless, &pattern, true, &wings).unwrap().markov_ok);

        let without_bell = classify(&common_cause(), &pattern, false, &wings).unwrap();
        assert_eq!(without_bell.verdict, TriadVerdict::ExplanatoryAndFaithful);
    }

    #[test]
    fn pattern_must_be_disjoint() {
        let s = CIStatement::new(A, B, &[]).unwrap();
        let t = CIStatement::new(B, A, &[]).unwrap();
        assert!(IndependencePattern::new(vec![s], vec![t]).is_err());
    }

    #[test]
    fn bell_locality_predicate() {
        let wings = Wings::eprb();
        assert!(is_bell_local(&common_cause(), &wings).unwrap());
        assert!(!is_bell_local(&common_cause().with_edge(A, B).unwrap(), &wings).unwrap());
        assert!(!is_bell_local(&common_cause().with_edge(BETA, LAMBDA).unwrap(), &wings).unwrap());
        assert!(!is_bell_local(&common_cause().with_edge(LAMBDA, ALPHA).unwrap(), &wings).unwrap());
    }

    #[test]
    fn latent_in_pattern_is_rejected() {
        let s = CIStatement::new(LAMBDA, B, &[]).unwrap();
        let p = IndependencePattern::new(vec![s], vec![]).unwrap();
        assert!(classify(&common_cause(), &p, false, &Wings::eprb()).is_err());
    }
}
