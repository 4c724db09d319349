//! Seeded Monte Carlo sampling of the three experiments.
//!
//! Events are generated in fixed chunks of [`CHUNK_EVENTS`]; chunk `c` draws
//! from ChaCha8 stream `c` of the batch seed. Chunk boundaries do not depend
//! on the number of worker threads, so a batch is bit-identical however it
//! is scheduled.

mod io;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corestats::{self, Angle, ExperimentKind};
use crate::{Error, Result};

pub use io::BatchMeta;

pub const CHUNK_EVENTS: u64 = 1 << 16;

/// Settings available on each wing; events record indices into these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub alpha: Vec<Angle>,
    pub beta: Vec<Angle>,
}

impl Grid {
    pub fn new(alpha: Vec<Angle>, beta: Vec<Angle>) -> Result<Self> {
        let grid = Self { alpha, beta };
        grid.validate()?;
        Ok(grid)
    }

    /// The same settings on both wings.
    pub fn symmetric(angles: Vec<Angle>) -> Result<Self> {
        Self::new(angles.clone(), angles)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::EmptyGrid("alpha"));
        }
        if self.beta.is_empty() {
            return Err(Error::EmptyGrid("beta"));
        }
        if self.alpha.len() > u16::MAX as usize || self.beta.len() > u16::MAX as usize {
            return Err(Error::ParameterRange("settings grid larger than 65535 entries".into()));
        }
        Ok(())
    }

    pub fn pairs(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SettingPolicy {
    /// Each wing's setting drawn uniformly and independently per event.
    #[default]
    UniformRandom,
    Fixed {
        alpha_index: usize,
        beta_index: usize,
    },
    /// Event `k` uses pair `k mod (|alpha|·|beta|)`, alpha-major.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    #[default]
    Hidden,
    Revealed,
}

/// The source feeding SEPRB's input channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemonPolicy {
    pub input_weight: f64,
    pub visibility: Visibility,
}

impl DemonPolicy {
    pub fn new(input_weight: f64, visibility: Visibility) -> Result<Self> {
        corestats::check_input_weight(input_weight)?;
        Ok(Self {
            input_weight,
            visibility,
        })
    }

    pub fn hidden(input_weight: f64) -> Result<Self> {
        Self::new(input_weight, Visibility::Hidden)
    }

    pub fn revealed(input_weight: f64) -> Result<Self> {
        Self::new(input_weight, Visibility::Revealed)
    }

    /// The demon matching an experiment's own input weight (½ for EPRB,
    /// where it has no effect).
    pub fn for_experiment(kind: &ExperimentKind, visibility: Visibility) -> Self {
        Self {
            input_weight: kind.input_weight().unwrap_or(0.5),
            visibility,
        }
    }
}

/// One trial. `first_outcome` is `A` for EPRB and the input channel `A'`
/// for SEPRB; it is `None` once projected away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub alpha_index: u16,
    pub beta_index: u16,
    pub first_outcome: Option<u8>,
    pub second_outcome: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    pub experiment: ExperimentKind,
    pub grid: Grid,
    pub seed: u64,
    pub policy: SettingPolicy,
    pub demon: DemonPolicy,
    events: Vec<EventRecord>,
    first_visible: bool,
}

impl EventBatch {
    /// Assembles a batch from already generated records, checking them
    /// against the grid.
    pub fn from_parts(
        experiment: ExperimentKind,
        grid: Grid,
        seed: u64,
        policy: SettingPolicy,
        demon: DemonPolicy,
        events: Vec<EventRecord>,
    ) -> Result<Self> {
        grid.validate()?;
        let first_visible = events.first().is_none_or(|e| e.first_outcome.is_some());
        for e in &events {
            if (e.alpha_index as usize) >= grid.alpha.len() || (e.beta_index as usize) >= grid.beta.len() {
                return Err(Error::SettingOutOfRange {
                    alpha_index: e.alpha_index as usize,
                    beta_index: e.beta_index as usize,
                    alphas: grid.alpha.len(),
                    betas: grid.beta.len(),
                });
            }
            if e.second_outcome > 1 || e.first_outcome.is_some_and(|a| a > 1) {
                return Err(Error::MalformedBatch("outcomes must be 0 or 1".into()));
            }
            if e.first_outcome.is_some() != first_visible {
                return Err(Error::MalformedBatch(
                    "first outcome present on some events only".into(),
                ));
            }
        }
        Ok(Self {
            experiment,
            grid,
            seed,
            policy,
            demon,
            events,
            first_visible,
        })
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Whether the first-polariser column is part of this view.
    pub fn has_first_outcome(&self) -> bool {
        self.first_visible
    }

    pub fn first_variable(&self) -> &'static str {
        self.experiment.first_variable()
    }
}

/// Draws `n` events of `experiment`.
///
/// For the SEPRB variants the demon supplies the input channel and its
/// weight must match the experiment's (`½` for input-controlled SEPRB).
pub fn sample(
    experiment: ExperimentKind,
    grid: &Grid,
    policy: SettingPolicy,
    demon: DemonPolicy,
    n: u64,
    seed: u64,
) -> Result<EventBatch> {
    grid.validate()?;
    experiment.validate()?;
    corestats::check_input_weight(demon.input_weight)?;
    if n == 0 {
        return Err(Error::NoEvents);
    }
    if let SettingPolicy::Fixed {
        alpha_index,
        beta_index,
    } = policy
    {
        if alpha_index >= grid.alpha.len() || beta_index >= grid.beta.len() {
            return Err(Error::SettingOutOfRange {
                alpha_index,
                beta_index,
                alphas: grid.alpha.len(),
                betas: grid.beta.len(),
            });
        }
    }
    if let Some(p) = experiment.input_weight() {
        if (p - demon.input_weight).abs() > f64::EPSILON {
            return Err(Error::DemonMismatch {
                demon: demon.input_weight,
                experiment: p,
            });
        }
    }

    let first_weight = experiment.input_weight().unwrap_or(0.5);
    let nb = grid.beta.len();
    let same: Vec<f64> = grid
        .alpha
        .iter()
        .flat_map(|&a| grid.beta.iter().map(move |&b| corestats::malus(a, b).0))
        .collect();
    let ctx = ChunkContext {
        policy,
        na: grid.alpha.len(),
        nb,
        same: &same,
        first_weight,
        seed,
    };

    let chunks = n.div_ceil(CHUNK_EVENTS);
    let events: Vec<EventRecord> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_EVENTS;
            let end = (start + CHUNK_EVENTS).min(n);
            ctx.run(c, start, end)
        })
        .collect::<Vec<_>>()
        .concat();

    Ok(EventBatch {
        experiment,
        grid: grid.clone(),
        seed,
        policy,
        demon,
        events,
        first_visible: true,
    })
}

struct ChunkContext<'a> {
    policy: SettingPolicy,
    na: usize,
    nb: usize,
    same: &'a [f64],
    first_weight: f64,
    seed: u64,
}

impl ChunkContext<'_> {
    fn run(&self, chunk: u64, start: u64, end: u64) -> Vec<EventRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        let pairs = (self.na * self.nb) as u64;
        (start..end)
            .map(|k| {
                let (i, j) = match self.policy {
                    SettingPolicy::UniformRandom => (rng.random_range(0..self.na), rng.random_range(0..self.nb)),
                    SettingPolicy::Fixed {
                        alpha_index,
                        beta_index,
                    } => (alpha_index, beta_index),
                    SettingPolicy::RoundRobin => {
                        let idx = (k % pairs) as usize;
                        (idx / self.nb, idx % self.nb)
                    }
                };
                let first = u8::from(rng.random_bool(self.first_weight));
                let second = if rng.random_bool(self.same[i * self.nb + j]) {
                    first
                } else {
                    1 - first
                };
                EventRecord {
                    alpha_index: i as u16,
                    beta_index: j as u16,
                    first_outcome: Some(first),
                    second_outcome: second,
                }
            })
            .collect()
    }
}

/// The view available to the experimenter at `B`. A hidden demon's input
/// channel `A'` is removed; EPRB outcomes and revealed inputs are kept.
pub fn project_observables(batch: &EventBatch, demon: &DemonPolicy) -> EventBatch {
    let strip = demon.visibility == Visibility::Hidden && batch.experiment.input_weight().is_some();
    let mut out = batch.clone();
    out.demon.visibility = demon.visibility;
    if strip {
        out.events.iter_mut().for_each(|e| e.first_outcome = None);
        out.first_visible = false;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> Grid {
        Grid::symmetric(vec![Angle::new(0.0), Angle::new(PI / 8.0)]).unwrap()
    }

    #[test]
    fn rejects_empty_grid_and_zero_events() {
        let empty = Grid {
            alpha: vec![],
            beta: vec![Angle::new(0.0)],
        };
        let demon = DemonPolicy::hidden(0.5).unwrap();
        assert!(matches!(
            sample(ExperimentKind::Eprb, &empty, SettingPolicy::UniformRandom, demon, 10, 1),
            Err(Error::EmptyGrid("alpha"))
        ));
        assert!(matches!(
            sample(
                ExperimentKind::Eprb,
                &grid2(),
                SettingPolicy::UniformRandom,
                demon,
                0,
                1
            ),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn rejects_inconsistent_demon() {
        let demon = DemonPolicy::hidden(0.7).unwrap();
        assert!(matches!(
            sample(
                ExperimentKind::InputControlledSeprb,
                &grid2(),
                SettingPolicy::UniformRandom,
                demon,
                10,
                1
            ),
            Err(Error::DemonMismatch { .. })
        ));
    }

    #[test]
    fn equal_settings_give_equal_outcomes() {
        let demon = DemonPolicy::hidden(0.5).unwrap();
        let policy = SettingPolicy::Fixed {
            alpha_index: 1,
            beta_index: 1,
        };
        let b = sample(ExperimentKind::Eprb, &grid2(), policy, demon, 1000, 9).unwrap();
        assert_eq!(b.len(), 1000);
        assert!(b.events().iter().all(|e| e.first_outcome == Some(e.second_outcome)));
    }

    #[test]
    fn round_robin_cycles_pairs() {
        let demon = DemonPolicy::hidden(0.5).unwrap();
        let b = sample(ExperimentKind::Eprb, &grid2(), SettingPolicy::RoundRobin, demon, 8, 3).unwrap();
        let pairs: Vec<_> = b.events().iter().map(|e| (e.alpha_index, e.beta_index)).collect();
        assert_eq!(
            pairs,
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (0, 0), (0, 1), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn projection_strips_only_hidden_inputs() {
        let kind = ExperimentKind::InputControlledSeprb;
        let hidden = DemonPolicy::for_experiment(&kind, Visibility::Hidden);
        let revealed = DemonPolicy::for_experiment(&kind, Visibility::Revealed);
        let b = sample(kind, &grid2(), SettingPolicy::UniformRandom, hidden, 500, 4).unwrap();

        let h = project_observables(&b, &hidden);
        assert!(!h.has_first_outcome());
        assert!(h.events().iter().all(|e| e.first_outcome.is_none()));
        assert_eq!(
            h.events().iter().map(|e| e.second_outcome).collect::<Vec<_>>(),
            b.events().iter().map(|e| e.second_outcome).collect::<Vec<_>>()
        );

        let r = project_observables(&b, &revealed);
        assert_eq!(r.events(), b.events());

        let eprb = sample(
            ExperimentKind::Eprb,
            &grid2(),
            SettingPolicy::UniformRandom,
            hidden,
            50,
            4,
        )
        .unwrap();
        assert!(project_observables(&eprb, &hidden).has_first_outcome());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let demon = DemonPolicy::hidden(0.5).unwrap();
        let n = 3 * CHUNK_EVENTS + 17;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    sample(
                        ExperimentKind::Eprb,
                        &grid2(),
                        SettingPolicy::UniformRandom,
                        demon,
                        n,
                        77,
                    )
                    .unwrap()
                })
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(3));
        let other_seed = sample(
            ExperimentKind::Eprb,
            &grid2(),
            SettingPolicy::UniformRandom,
            demon,
            n,
            78,
        )
        .unwrap();
        assert_ne!(one.events(), other_seed.events());
    }

    #[test]
    fn from_parts_checks_indices() {
        let demon = DemonPolicy::hidden(0.5).unwrap();
        let bad = vec![EventRecord {
            alpha_index: 5,
            beta_index: 0,
            first_outcome: Some(0),
            second_outcome: 1,
        }];
        assert!(
            EventBatch::from_parts(ExperimentKind::Eprb, grid2(), 0, SettingPolicy::RoundRobin, demon, bad).is_err()
        );
    }
}
