//! Causal structures over the experiment variables and the verdicts drawn
//! from them.

mod bell;
mod cpt;
mod dag;
mod dsep;
mod enumerate;
mod finetune;
mod triad;

pub use bell::{lhv_chsh_bound, local_strategies, sample_local_model, LocalSample, LocalStrategy};
pub use cpt::{
    cancelling_paths_model, joint_from_cpt, seprb_model, CptModel, MAX_JOINT_CELLS, PILL, PREGNANCY, THROMBOSIS,
};
pub use dag::{Dag, DagJson, Node, MAX_NODES};
pub use dsep::{d_separated, d_separated_idx, reachable};
pub use enumerate::{enumerate_dags, EnumConstraints, NODE_BUDGET};
pub use finetune::{
    perturb, perturb_and_test, ParamPath, PerturbationResult, StabilityReport, StabilityVerdict, DEPENDENCE_THRESHOLD,
};
pub use triad::{
    classify, enumerate_and_classify, implied_independences, is_bell_local, quantum_setup, IndependencePattern,
    QuantumSetup, TriadEntry, TriadReport, TriadSummary, TriadVerdict, Wings,
};
