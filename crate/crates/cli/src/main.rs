//! `faithlab`: simulate polariser experiments, test their conditional
//! independences, and classify causal explanations.

mod commands;
mod config;
mod error;
mod svg;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use faithlab_core::corestats::{names, Angle, ExperimentKind};
use faithlab_core::inference::ChshSpec;
use faithlab_core::sampler::{DemonPolicy, Grid, SettingPolicy, Visibility};

use config::{
    AnalyzeConfig, ChshConfig, EquivalenceConfig, FinetuneConfig, FinetuneModel, RunConfig, SimulateConfig, TriadConfig,
};
use error::{CliError, CliResult};

const THREADS_VAR: &str = "FAITHLAB_THREADS";

#[derive(Parser)]
#[command(name = "faithlab", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample events and write events.csv with its events.json sidecar.
    Simulate(SimulateArgs),
    /// Run the no-signalling tests and per-pair correlations on a batch.
    Analyze(AnalyzeArgs),
    /// Compute CHSH exactly or from a batch and plot E against alpha - beta.
    Chsh(ChshArgs),
    /// Enumerate candidate DAGs and classify them against the observed pattern.
    Triad(TriadArgs),
    /// Perturb a model parameter and test whether an independence survives.
    Finetune(FinetuneArgs),
    /// Compare EPRB and uniform-input SEPRB over a settings grid.
    Equivalence(EquivalenceArgs),
    /// Rerun a command from a config.json it wrote.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Eprb,
    Seprb,
    Icseprb,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Uniform,
    RoundRobin,
    Fixed,
}

#[derive(Args)]
struct OutArg {
    /// Output directory (created if missing).
    #[arg(long, default_value = "faithlab-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "eprb")]
    experiment: ExperimentArg,
    /// Angles used for both polarisers, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    /// First-polariser angles; overrides --grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_grid: Option<Vec<f64>>,
    /// Second-polariser angles; overrides --grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta_grid: Option<Vec<f64>>,
    /// Read angles in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    policy: PolicyArg,
    /// Setting indices for --policy fixed.
    #[arg(long, default_value_t = 0)]
    alpha_index: usize,
    #[arg(long, default_value_t = 0)]
    beta_index: usize,
    /// Probability that the demon feeds 1 into the input channel.
    #[arg(long)]
    demon_p: Option<f64>,
    /// Keep the input channel out of the written events (default).
    #[arg(long, conflicts_with = "revealed")]
    hidden: bool,
    /// Write the input channel as column `a`.
    #[arg(long)]
    revealed: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path to a batch CSV; its .json sidecar must sit next to it.
    #[arg(long)]
    batch: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    level: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ChshArgs {
    /// Use closed-form correlations.
    #[arg(long, conflicts_with = "batch", required_unless_present = "batch")]
    exact: bool,
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Settings `a0,a1,b0,b1`; defaults to the maximally violating choice.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    spec: Option<Vec<f64>>,
    #[arg(long)]
    degrees: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct TriadArgs {
    /// Which experiment names the first outcome (A for eprb, A' for seprb).
    #[arg(long, value_enum, default_value = "eprb")]
    experiment: TriadExperiment,
    /// Also consider DAGs with a latent common cause.
    #[arg(long)]
    include_latent: bool,
    /// Allow edges into the settings.
    #[arg(long)]
    unconstrained: bool,
    /// Treat the data as satisfying every Bell inequality.
    #[arg(long)]
    no_bell_violation: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TriadExperiment {
    Eprb,
    Seprb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Seprb,
    CancellingPaths,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0.01,0.05,0.1"
    )]
    eps: Vec<f64>,
    /// SEPRB first-polariser angles.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_grid: Option<Vec<f64>>,
    /// SEPRB second-polariser angles.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta_grid: Option<Vec<f64>>,
    #[arg(long)]
    degrees: bool,
    /// SEPRB input weight.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Cancelling paths: effect of pregnancy on thrombosis.
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Cancelling paths: P(pregnancy | no pill).
    #[arg(long, default_value_t = 0.5)]
    q0: f64,
    /// Cancelling paths: P(pregnancy | pill).
    #[arg(long, default_value_t = 0.1)]
    q1: f64,
    /// Cancelling paths: baseline thrombosis rate.
    #[arg(long, default_value_t = 0.1)]
    base: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct EquivalenceArgs {
    /// Angles per polariser, spaced pi/density apart.
    #[arg(long, default_value_t = 19)]
    density: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ReplayArgs {
    /// A config.json written by an earlier run.
    config: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn angles(values: &[f64], degrees: bool) -> CliResult<Vec<Angle>> {
    values
        .iter()
        .map(|&v| {
            let a = if degrees {
                Angle::from_degrees(v)
            } else {
                Angle::try_new(v)
            };
            a.map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn usage<T>(r: faithlab_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

/// Grid from the per-wing flags, falling back to `shared`, then to `default`.
fn grid_from(
    alpha: &Option<Vec<f64>>,
    beta: &Option<Vec<f64>>,
    shared: &Option<Vec<f64>>,
    degrees: bool,
    default: Grid,
) -> CliResult<Grid> {
    let pick = |own: &Option<Vec<f64>>, fallback: &[Angle]| -> CliResult<Vec<Angle>> {
        match own.as_ref().or(shared.as_ref()) {
            Some(v) => angles(v, degrees),
            None => Ok(fallback.to_vec()),
        }
    };
    usage(Grid::new(pick(alpha, &default.alpha)?, pick(beta, &default.beta)?))
}

impl SimulateArgs {
    fn resolve(self) -> CliResult<SimulateConfig> {
        let grid = grid_from(
            &self.alpha_grid,
            &self.beta_grid,
            &self.grid,
            self.degrees,
            ChshSpec::canonical().grid(),
        )?;
        let visibility = if self.revealed {
            Visibility::Revealed
        } else {
            Visibility::Hidden
        };
        let experiment = match self.experiment {
            ExperimentArg::Eprb => ExperimentKind::Eprb,
            ExperimentArg::Seprb => usage(ExperimentKind::seprb(self.demon_p.unwrap_or(0.5)))?,
            ExperimentArg::Icseprb => ExperimentKind::InputControlledSeprb,
        };
        let demon = match self.demon_p {
            Some(p) => usage(DemonPolicy::new(p, visibility))?,
            None => DemonPolicy::for_experiment(&experiment, visibility),
        };
        let policy = match self.policy {
            PolicyArg::Uniform => SettingPolicy::UniformRandom,
            PolicyArg::RoundRobin => SettingPolicy::RoundRobin,
            PolicyArg::Fixed => SettingPolicy::Fixed {
                alpha_index: self.alpha_index,
                beta_index: self.beta_index,
            },
        };
        Ok(SimulateConfig {
            experiment,
            grid,
            n: self.n,
            seed: self.seed,
            policy,
            demon,
            out: self.out.out,
        })
    }
}

impl ChshArgs {
    fn resolve(self) -> CliResult<ChshConfig> {
        let spec = match &self.spec {
            None => ChshSpec::canonical(),
            Some(v) if v.len() == 4 => {
                let a = angles(v, self.degrees)?;
                ChshSpec::new(a[0], a[1], a[2], a[3])
            }
            Some(v) => return Err(CliError::Usage(format!("--spec needs 4 angles, got {}", v.len()))),
        };
        Ok(ChshConfig {
            batch: self.batch,
            spec,
            out: self.out.out,
        })
    }
}

impl FinetuneArgs {
    fn resolve(self) -> CliResult<FinetuneConfig> {
        let model = match self.model {
            ModelArg::Seprb => {
                let default = Grid::new(
                    vec![Angle::new(0.0), Angle::new(PI / 4.0)],
                    vec![Angle::new(PI / 8.0), Angle::new(3.0 * PI / 8.0)],
                )
                .expect("non-empty grid");
                let grid = grid_from(&self.alpha_grid, &self.beta_grid, &None, self.degrees, default)?;
                FinetuneModel::Seprb {
                    alphas: grid.alpha,
                    betas: grid.beta,
                    p: self.p,
                }
            }
            ModelArg::CancellingPaths => FinetuneModel::CancellingPaths {
                b: self.b,
                q0: self.q0,
                q1: self.q1,
                base: self.base,
            },
        };
        if self.eps.iter().any(|e| !e.is_finite()) {
            return Err(CliError::Usage("--eps values must be finite".into()));
        }
        Ok(FinetuneConfig {
            model,
            epsilons: self.eps,
            out: self.out.out,
        })
    }
}

fn resolve(command: Command) -> CliResult<RunConfig> {
    Ok(match command {
        Command::Simulate(a) => RunConfig::Simulate(a.resolve()?),
        Command::Analyze(a) => {
            if !(a.level > 0.0 && a.level < 1.0) {
                return Err(CliError::Usage(format!("--level must lie in (0, 1), got {}", a.level)));
            }
            RunConfig::Analyze(AnalyzeConfig {
                batch: a.batch,
                level: a.level,
                out: a.out.out,
            })
        }
        Command::Chsh(a) => RunConfig::Chsh(a.resolve()?),
        Command::Triad(a) => RunConfig::Triad(TriadConfig {
            first: match a.experiment {
                TriadExperiment::Eprb => names::A,
                TriadExperiment::Seprb => names::A_PRIME,
            }
            .into(),
            include_latent: a.include_latent,
            settings_exogenous: !a.unconstrained,
            bell_violated: !a.no_bell_violation,
            out: a.out.out,
        }),
        Command::Finetune(a) => RunConfig::Finetune(a.resolve()?),
        Command::Equivalence(a) => {
            if a.density < 2 {
                return Err(CliError::Usage(format!(
                    "--density must be at least 2, got {}",
                    a.density
                )));
            }
            RunConfig::Equivalence(EquivalenceConfig {
                density: a.density,
                out: a.out.out,
            })
        }
        Command::Replay(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(out) = a.out {
                cfg.set_out(out);
            }
            cfg
        }
    })
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads()
        .and_then(|()| resolve(cli.command))
        .and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("faithlab: {e}");
            e.exit_code()
        }
    }
}
