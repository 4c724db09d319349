//! Local deterministic strategies: the exhaustive CHSH bound and a sampler
//! for local hidden-variable data.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corestats::names;
use crate::inference::{ChshSpec, ContingencyTable};
use crate::sampler::{EventRecord, Grid};
use crate::{Error, Result};

/// A pair of maps from setting label (0 or 1) to outcome ±1, one per wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalStrategy {
    pub a: [i8; 2],
    pub b: [i8; 2],
}

impl LocalStrategy {
    /// `S` for this strategy under the `E00 + E01 + E10 − E11` convention.
    pub fn chsh(&self) -> i32 {
        let e = |i: usize, j: usize| i32::from(self.a[i]) * i32::from(self.b[j]);
        e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1)
    }
}

/// The 16 local deterministic strategies.
pub fn local_strategies() -> Vec<LocalStrategy> {
    let maps = [[1i8, 1], [1, -1], [-1, 1], [-1, -1]];
    maps.iter()
        .flat_map(|&a| maps.iter().map(move |&b| LocalStrategy { a, b }))
        .collect()
}

/// Largest `|S|` over all local deterministic strategies. A deterministic
/// strategy's correlators do not depend on the angles, so neither does the
/// bound.
pub fn lhv_chsh_bound(_spec: &ChshSpec) -> f64 {
    local_strategies()
        .iter()
        .map(|s| s.chsh().abs())
        .max()
        .map(f64::from)
        .expect("strategy set is non-empty")
}

/// Counts sampled from a mixture of local deterministic strategies.
#[derive(Debug, Clone)]
pub struct LocalSample {
    pub grid: Grid,
    pub counts: ContingencyTable,
}

/// Draws `n` events: each picks a strategy from `weights` (uniform when
/// `None`) and setting labels uniformly, then records the strategy's
/// outcomes (`+1 → 1`, `−1 → 0`).
pub fn sample_local_model(spec: &ChshSpec, weights: Option<&[f64]>, n: u64, seed: u64) -> Result<LocalSample> {
    if n == 0 {
        return Err(Error::NoEvents);
    }
    let strategies = local_strategies();
    let uniform = vec![1.0; strategies.len()];
    let w = weights.unwrap_or(&uniform);
    if w.len() != strategies.len() {
        return Err(Error::ParameterRange(format!(
            "expected 16 strategy weights, got {}",
            w.len()
        )));
    }
    let pick = WeightedIndex::new(w).map_err(|e| Error::ParameterRange(e.to_string()))?;

    let grid = spec.grid();
    let alpha_idx = [0u16, (grid.alpha.len() - 1) as u16];
    let beta_idx = [0u16, (grid.beta.len() - 1) as u16];
    let bit = |o: i8| u8::from(o > 0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events: Vec<EventRecord> = (0..n)
        .map(|_| {
            let s = strategies[pick.sample(&mut rng)];
            let i = rng.random_range(0..2usize);
            let j = rng.random_range(0..2usize);
            EventRecord {
                alpha_index: alpha_idx[i],
                beta_index: beta_idx[j],
                first_outcome: Some(bit(s.a[i])),
                second_outcome: bit(s.b[j]),
            }
        })
        .collect();
    let counts = ContingencyTable::from_records(grid.alpha.len(), grid.beta.len(), Some(names::A), &events)?;
    Ok(LocalSample { grid, counts })
}
