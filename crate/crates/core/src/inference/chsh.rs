use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{correlation_from_counts, ContingencyTable};
use crate::corestats::{correlation, Angle};
use crate::sampler::{EventBatch, Grid};
use crate::{Error, Result};

/// Angles are matched against grid entries up to this distance.
const ANGLE_MATCH_TOL: f64 = 1e-9;

/// Two settings per wing. `S = E(a0,b0) + E(a0,b1) + E(a1,b0) − E(a1,b1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSpec {
    pub a0: Angle,
    pub a1: Angle,
    pub b0: Angle,
    pub b1: Angle,
}

impl ChshSpec {
    pub fn new(a0: Angle, a1: Angle, b0: Angle, b1: Angle) -> Self {
        Self { a0, a1, b0, b1 }
    }

    /// Settings `{π/4, 0} × {π/8, 3π/8}`, labelled so that `S = +2√2`.
    pub fn canonical() -> Self {
        Self::new(
            Angle::new(PI / 4.0),
            Angle::new(0.0),
            Angle::new(PI / 8.0),
            Angle::new(3.0 * PI / 8.0),
        )
    }

    /// `(alpha, beta, sign)` for the four terms of `S`.
    pub fn terms(&self) -> [(Angle, Angle, f64); 4] {
        [
            (self.a0, self.b0, 1.0),
            (self.a0, self.b1, 1.0),
            (self.a1, self.b0, 1.0),
            (self.a1, self.b1, -1.0),
        ]
    }

    /// The four angles as a grid with `a0, a1` and `b0, b1` (duplicates
    /// collapsed).
    pub fn grid(&self) -> Grid {
        let mut alpha = vec![self.a0];
        if !self.a1.same_orientation(self.a0, ANGLE_MATCH_TOL) {
            alpha.push(self.a1);
        }
        let mut beta = vec![self.b0];
        if !self.b1.same_orientation(self.b0, ANGLE_MATCH_TOL) {
            beta.push(self.b1);
        }
        Grid { alpha, beta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChshMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub alpha: Angle,
    pub beta: Angle,
    pub sign: f64,
    pub e: f64,
    pub std_error: f64,
    pub n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub mode: ChshMode,
    pub spec: ChshSpec,
    pub s: f64,
    pub abs_s: f64,
    /// Quadrature sum of the per-pair standard errors (0 in exact mode).
    pub std_error: f64,
    pub pairs: Vec<PairCorrelation>,
}

impl ChshReport {
    fn from_pairs(mode: ChshMode, spec: ChshSpec, pairs: Vec<PairCorrelation>) -> Self {
        let s = pairs.iter().map(|p| p.sign * p.e).sum::<f64>();
        let std_error = pairs.iter().map(|p| p.std_error * p.std_error).sum::<f64>().sqrt();
        Self {
            mode,
            spec,
            s,
            abs_s: s.abs(),
            std_error,
            pairs,
        }
    }
}

/// CHSH from the closed-form correlator `cos(2(α−β))`.
pub fn chsh_exact(spec: &ChshSpec) -> ChshReport {
    let pairs = spec
        .terms()
        .iter()
        .map(|&(alpha, beta, sign)| PairCorrelation {
            alpha,
            beta,
            sign,
            e: correlation(alpha, beta),
            std_error: 0.0,
            n: None,
        })
        .collect();
    ChshReport::from_pairs(ChshMode::Exact, *spec, pairs)
}

pub fn chsh_empirical(batch: &EventBatch, spec: &ChshSpec) -> Result<ChshReport> {
    if !batch.has_first_outcome() {
        return Err(Error::MissingColumn("a".into()));
    }
    let table = ContingencyTable::from_batch(batch)?;
    chsh_from_counts(&table, &batch.grid, spec)
}

/// CHSH from counts over `(alpha, beta, first, B)` indexed by `grid`.
pub fn chsh_from_counts(table: &ContingencyTable, grid: &Grid, spec: &ChshSpec) -> Result<ChshReport> {
    let find =
        |angles: &[Angle], target: Angle| angles.iter().position(|a| a.same_orientation(target, ANGLE_MATCH_TOL));
    let mut pairs = Vec::with_capacity(4);
    for (alpha, beta, sign) in spec.terms() {
        let (Some(i), Some(j)) = (find(&grid.alpha, alpha), find(&grid.beta, beta)) else {
            return Err(Error::MissingSettingPair(format!("(alpha={alpha}, beta={beta})")));
        };
        let est = correlation_from_counts(table, i, j)?;
        pairs.push(PairCorrelation {
            alpha,
            beta,
            sign,
            e: est.value,
            std_error: est.std_error,
            n: Some(est.n),
        });
    }
    Ok(ChshReport::from_pairs(ChshMode::Sampled, *spec, pairs))
}
