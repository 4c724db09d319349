//! Closed-form statistics for the three polariser experiments.
//!
//! Outcome and input values use `1` for the left channel and `0` for the
//! right channel. Angles are polariser orientations and live on `[0, π)`.

mod joint;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, EXACT_TOL};

pub use joint::{JointTable, Shape, Variable};

/// Variable names shared across tables, batches and graphs.
pub mod names {
    pub const ALPHA: &str = "alpha";
    pub const BETA: &str = "beta";
    pub const A: &str = "A";
    pub const A_PRIME: &str = "A'";
    pub const B: &str = "B";
    pub const LAMBDA: &str = "lambda";
}

/// Polariser angle in radians, canonicalized into `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    /// # Panics
    ///
    /// Panics if `radians` is not finite; use [`Angle::try_new`] for
    /// untrusted input.
    pub fn new(radians: f64) -> Self {
        Self::try_new(radians).expect("polariser angle must be finite")
    }

    pub fn try_new(radians: f64) -> Result<Self> {
        if !radians.is_finite() {
            return Err(Error::NonFiniteAngle(radians));
        }
        let r = radians.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs.
        Ok(Self(if r >= PI { 0.0 } else { r }))
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        Self::try_new(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Whether two angles denote the same polariser orientation.
    pub fn same_orientation(self, other: Angle, tol: f64) -> bool {
        let d = (self.0 - other.0).abs();
        d <= tol || (PI - d) <= tol
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::try_new(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Which of the three experiments produced (or would produce) a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Entangled photon pair, one polariser per wing.
    Eprb,
    /// Single photon through two polarisers; the input channel at the first
    /// polariser is left with probability `input_weight`.
    Seprb { input_weight: f64 },
    /// SEPRB whose input channel is fed uniformly at random by a hidden demon.
    InputControlledSeprb,
}

impl ExperimentKind {
    pub fn seprb(input_weight: f64) -> Result<Self> {
        check_input_weight(input_weight)?;
        Ok(Self::Seprb { input_weight })
    }

    /// The weight on the left input channel, for the SEPRB variants.
    pub fn input_weight(&self) -> Option<f64> {
        match *self {
            Self::Eprb => None,
            Self::Seprb { input_weight } => Some(input_weight),
            Self::InputControlledSeprb => Some(0.5),
        }
    }

    /// Name of the variable recorded at the first polariser.
    pub fn first_variable(&self) -> &'static str {
        match self {
            Self::Eprb => names::A,
            Self::Seprb { .. } | Self::InputControlledSeprb => names::A_PRIME,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Seprb { input_weight } = self {
            check_input_weight(*input_weight)?;
        }
        Ok(())
    }

    /// Exact joint over `(first, B)` at one pair of settings.
    pub fn joint(&self, alpha: Angle, beta: Angle) -> Result<JointTable> {
        match self {
            Self::Eprb => Ok(eprb_joint(alpha, beta)),
            Self::Seprb { input_weight } => seprb_joint(alpha, beta, *input_weight),
            Self::InputControlledSeprb => seprb_joint(alpha, beta, 0.5),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Eprb => "eprb",
            Self::Seprb { .. } => "seprb",
            Self::InputControlledSeprb => "icseprb",
        }
    }
}

pub fn check_input_weight(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InputWeight(p))
    }
}

/// `(cos²(α−β), sin²(α−β))`: the probabilities that a photon leaving one
/// polariser takes the same / the other channel at the next.
pub fn malus(alpha: Angle, beta: Angle) -> (f64, f64) {
    let d = alpha.radians() - beta.radians();
    let (s, c) = d.sin_cos();
    (c * c, s * s)
}

/// Joint of the two outcomes of a maximally entangled photon pair.
pub fn eprb_joint(alpha: Angle, beta: Angle) -> JointTable {
    let (same, diff) = malus(alpha, beta);
    JointTable::new(
        vec![Variable::binary(names::A), Variable::binary(names::B)],
        vec![0.5 * same, 0.5 * diff, 0.5 * diff, 0.5 * same],
    )
    .expect("closed-form EPRB joint is normalized")
}

/// Joint of the input channel `A'` and the outcome `B` for a single photon
/// passing both polarisers.
pub fn seprb_joint(alpha: Angle, beta: Angle, p: f64) -> Result<JointTable> {
    check_input_weight(p)?;
    let (same, diff) = malus(alpha, beta);
    let q = 1.0 - p;
    JointTable::new(
        vec![Variable::binary(names::A_PRIME), Variable::binary(names::B)],
        vec![q * same, q * diff, p * diff, p * same],
    )
}

/// `P(B = 1)` in SEPRB: `p cos²(α−β) + (1−p) sin²(α−β)`.
pub fn marginal_b(alpha: Angle, beta: Angle, p: f64) -> Result<f64> {
    check_input_weight(p)?;
    let (same, diff) = malus(alpha, beta);
    Ok(p * same + (1.0 - p) * diff)
}

/// `E = P(same) − P(different) = cos(2(α−β))`.
pub fn correlation(alpha: Angle, beta: Angle) -> f64 {
    let (same, diff) = malus(alpha, beta);
    same - diff
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equivalent: bool,
    pub max_discrepancy: f64,
}

/// Compares EPRB's `(A, B)` joint with uniform-input SEPRB's `(A', B)` joint
/// under `A ↔ A'`.
pub fn operational_equivalence(alpha: Angle, beta: Angle) -> Equivalence {
    let eprb = eprb_joint(alpha, beta);
    let seprb = seprb_joint(alpha, beta, 0.5)
        .and_then(|t| t.rename(names::A_PRIME, names::A))
        .expect("p = 1/2 is a valid input weight");
    let max_discrepancy = eprb.max_discrepancy(&seprb).expect("both joints range over (A, B)");
    Equivalence {
        equivalent: max_discrepancy <= EXACT_TOL,
        max_discrepancy,
    }
}

/// Sweeps [`operational_equivalence`] over `density × density` angles
/// `kπ/density`, returning the aggregate verdict.
pub fn equivalence_sweep(density: usize) -> Equivalence {
    let grid = uniform_grid(density);
    let mut max_discrepancy: f64 = 0.0;
    for &a in &grid {
        for &b in &grid {
            max_discrepancy = max_discrepancy.max(operational_equivalence(a, b).max_discrepancy);
        }
    }
    Equivalence {
        equivalent: max_discrepancy <= EXACT_TOL,
        max_discrepancy,
    }
}

/// `density` equally spaced angles `kπ/density` covering `[0, π)`.
pub fn uniform_grid(density: usize) -> Vec<Angle> {
    (0..density)
        .map(|k| Angle::new(k as f64 * PI / density as f64))
        .collect()
}

/// Exact joint over `(alpha, beta, first, B)` with settings drawn uniformly
/// and independently from the two grids. Setting variables take grid
/// indices as values.
pub fn settings_joint(kind: &ExperimentKind, alphas: &[Angle], betas: &[Angle]) -> Result<JointTable> {
    if alphas.is_empty() {
        return Err(Error::EmptyGrid("alpha"));
    }
    if betas.is_empty() {
        return Err(Error::EmptyGrid("beta"));
    }
    kind.validate()?;
    let per_pair = 1.0 / (alphas.len() * betas.len()) as f64;
    let mut cells = Vec::with_capacity(alphas.len() * betas.len() * 4);
    for &a in alphas {
        for &b in betas {
            let j = kind.joint(a, b)?;
            cells.extend(j.cells().iter().map(|c| c * per_pair));
        }
    }
    JointTable::new(
        vec![
            Variable::new(names::ALPHA, alphas.len()),
            Variable::new(names::BETA, betas.len()),
            Variable::binary(kind.first_variable()),
            Variable::binary(names::B),
        ],
        cells,
    )
}
