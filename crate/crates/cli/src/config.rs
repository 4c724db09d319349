//! Effective run configurations. Every command writes its config to
//! `config.json` in the output directory; `faithlab replay` reruns it.

use std::fs;
use std::path::{Path, PathBuf};

use faithlab_core::causal::{cancelling_paths_model, seprb_model, CptModel, ParamPath, PILL, PREGNANCY, THROMBOSIS};
use faithlab_core::corestats::{names, Angle, ExperimentKind};
use faithlab_core::inference::{CIStatement, ChshSpec};
use faithlab_core::sampler::{DemonPolicy, Grid, SettingPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Analyze(AnalyzeConfig),
    Chsh(ChshConfig),
    Triad(TriadConfig),
    Finetune(FinetuneConfig),
    Equivalence(EquivalenceConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub experiment: ExperimentKind,
    pub grid: Grid,
    pub n: u64,
    pub seed: u64,
    pub policy: SettingPolicy,
    pub demon: DemonPolicy,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub batch: PathBuf,
    pub level: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshConfig {
    /// Events to estimate from; `None` means closed-form values.
    pub batch: Option<PathBuf>,
    pub spec: ChshSpec,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadConfig {
    pub first: String,
    pub include_latent: bool,
    pub settings_exogenous: bool,
    pub bell_violated: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FinetuneModel {
    Seprb {
        alphas: Vec<Angle>,
        betas: Vec<Angle>,
        p: f64,
    },
    CancellingPaths {
        b: f64,
        q0: f64,
        q1: f64,
        base: f64,
    },
}

impl FinetuneModel {
    pub fn build(&self) -> CliResult<CptModel> {
        Ok(match self {
            Self::Seprb { alphas, betas, p } => seprb_model(alphas, betas, *p)?,
            Self::CancellingPaths { b, q0, q1, base } => cancelling_paths_model(*b, *q0, *q1, *base)?,
        })
    }

    /// The input weight for SEPRB, the pill-taker's pregnancy rate `q1` for
    /// the cancelling paths.
    pub fn path(&self) -> ParamPath {
        match self {
            Self::Seprb { .. } => ParamPath::new(names::A_PRIME, &[], 1),
            Self::CancellingPaths { .. } => ParamPath::new(PREGNANCY, &[(PILL, 1)], 1),
        }
    }

    pub fn statement(&self) -> CIStatement {
        match self {
            Self::Seprb { .. } => CIStatement::new(names::B, names::ALPHA, &[names::BETA]),
            Self::CancellingPaths { .. } => CIStatement::new(THROMBOSIS, PILL, &[]),
        }
        .expect("fixed statements are well formed")
    }

    /// Dependence expected after shifting the parameter by `epsilon`.
    pub fn closed_form(&self, epsilon: f64) -> f64 {
        match self {
            Self::Seprb { alphas, betas, p } => {
                let spread = betas
                    .iter()
                    .map(|b| {
                        let c: Vec<f64> = alphas
                            .iter()
                            .map(|a| (a.radians() - b.radians()).cos().powi(2))
                            .collect();
                        c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min)
                    })
                    .fold(0.0, f64::max);
                (2.0 * (p + epsilon) - 1.0).abs() * spread
            }
            Self::CancellingPaths { b, .. } => b * epsilon.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub model: FinetuneModel,
    pub epsilons: Vec<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub density: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn out(&self) -> &Path {
        match self {
            Self::Simulate(c) => &c.out,
            Self::Analyze(c) => &c.out,
            Self::Chsh(c) => &c.out,
            Self::Triad(c) => &c.out,
            Self::Finetune(c) => &c.out,
            Self::Equivalence(c) => &c.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Self::Simulate(c) => c.out = out,
            Self::Analyze(c) => c.out = out,
            Self::Chsh(c) => c.out = out,
            Self::Triad(c) => c.out = out,
            Self::Finetune(c) => c.out = out,
            Self::Equivalence(c) => c.out = out,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Writes `config.json` into the output directory, creating it.
    pub fn echo(&self) -> CliResult<()> {
        fs::create_dir_all(self.out())?;
        fs::write(self.out().join(CONFIG_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
