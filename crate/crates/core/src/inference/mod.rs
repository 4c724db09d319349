//! Conditional-independence testing, correlation estimates and CHSH on
//! sampled events or exact tables.

mod chsh;

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::corestats::{names, JointTable, Shape, Variable};
use crate::sampler::{EventBatch, EventRecord};
use crate::{Error, Result, EXACT_TOL};

pub use chsh::{chsh_empirical, chsh_exact, chsh_from_counts, ChshMode, ChshReport, ChshSpec, PairCorrelation};

/// Smallest expected count accepted in any cell of a stratified G-test.
pub const MIN_EXPECTED: f64 = 5.0;

/// Events needed at a setting pair before its correlation is estimated.
pub const MIN_PAIR_EVENTS: u64 = 100;

/// `(x ⊥ y | z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CIStatement {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
}

impl CIStatement {
    pub fn new(x: impl Into<String>, y: impl Into<String>, z: &[&str]) -> Result<Self> {
        let stmt = Self {
            x: x.into(),
            y: y.into(),
            z: z.iter().map(|s| s.to_string()).collect(),
        };
        stmt.validate()?;
        Ok(stmt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == self.y {
            return Err(Error::InvalidStatement(format!("{self}: x and y coincide")));
        }
        if self.z.contains(&self.x) || self.z.contains(&self.y) {
            return Err(Error::InvalidStatement(format!(
                "{self}: conditioning set contains x or y"
            )));
        }
        for (i, v) in self.z.iter().enumerate() {
            if self.z[..i].contains(v) {
                return Err(Error::InvalidStatement(format!("{self}: `{v}` repeated")));
            }
        }
        Ok(())
    }

    /// Symmetric normal form: `x < y`, `z` sorted.
    pub fn canonical(&self) -> Self {
        let (x, y) = if self.x <= self.y {
            (self.x.clone(), self.y.clone())
        } else {
            (self.y.clone(), self.x.clone())
        };
        let mut z = self.z.clone();
        z.sort();
        Self { x, y, z }
    }

    pub fn same_as(&self, other: &CIStatement) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn z_refs(&self) -> Vec<&str> {
        self.z.iter().map(String::as_str).collect()
    }
}

impl fmt::Display for CIStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} ⊥ {}", self.x, self.y)?;
        if !self.z.is_empty() {
            write!(f, " | {}", self.z.join(", "))?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Independent,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Stratified likelihood-ratio G-test on counts.
    Sampled,
    /// Factorization check on an exact table; `p_value` is 1 or 0.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CITestResult {
    pub statement: CIStatement,
    pub mode: TestMode,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub verdict: Verdict,
    pub level: f64,
    pub n: Option<u64>,
}

/// Event counts over named discrete variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    shape: Shape,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(variables: Vec<Variable>, counts: Vec<u64>) -> Result<Self> {
        let shape = Shape::new(variables)?;
        if counts.len() != shape.len() {
            return Err(Error::InvalidTable(format!(
                "expected {} counts, got {}",
                shape.len(),
                counts.len()
            )));
        }
        Ok(Self { shape, counts })
    }

    /// Counts over `(alpha, beta, first, B)`, or `(alpha, beta, B)` when the
    /// first column is absent.
    pub fn from_records<'a>(
        alphas: usize,
        betas: usize,
        first: Option<&str>,
        records: impl IntoIterator<Item = &'a EventRecord>,
    ) -> Result<Self> {
        let mut vars = vec![Variable::new(names::ALPHA, alphas), Variable::new(names::BETA, betas)];
        if let Some(f) = first {
            vars.push(Variable::binary(f));
        }
        vars.push(Variable::binary(names::B));
        let shape = Shape::new(vars)?;
        let mut counts = vec![0u64; shape.len()];
        for e in records {
            let (i, j) = (e.alpha_index as usize, e.beta_index as usize);
            if i >= alphas || j >= betas {
                return Err(Error::SettingOutOfRange {
                    alpha_index: i,
                    beta_index: j,
                    alphas,
                    betas,
                });
            }
            let b = e.second_outcome as usize;
            let idx = match (first, e.first_outcome) {
                (Some(_), Some(a)) => ((i * betas + j) * 2 + a as usize) * 2 + b,
                (None, _) => (i * betas + j) * 2 + b,
                (Some(_), None) => return Err(Error::MissingColumn("a".into())),
            };
            counts[idx] += 1;
        }
        Ok(Self { shape, counts })
    }

    pub fn from_batch(batch: &EventBatch) -> Result<Self> {
        let first = batch.has_first_outcome().then(|| batch.first_variable());
        Self::from_records(batch.grid.alpha.len(), batch.grid.beta.len(), first, batch.events())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn marginal(&self, names: &[&str]) -> Result<ContingencyTable> {
        let target = self.shape.sub_shape(names)?;
        let map = self.shape.projection(&target)?;
        let mut counts = vec![0u64; target.len()];
        for (&c, &t) in self.counts.iter().zip(&map) {
            counts[t] += c;
        }
        Ok(Self { shape: target, counts })
    }

    /// Empirical joint distribution.
    pub fn to_joint(&self) -> Result<JointTable> {
        let n = self.total();
        if n == 0 {
            return Err(Error::NoEvents);
        }
        let cells = self.counts.iter().map(|&c| c as f64 / n as f64).collect();
        JointTable::new(self.shape.variables().to_vec(), cells)
    }
}

/// What a CI test runs on.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    Sampled(&'a ContingencyTable),
    Exact(&'a JointTable),
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

/// Tests `statement` at significance `level`.
pub fn ci_test(evidence: Evidence<'_>, statement: &CIStatement, level: f64) -> Result<CITestResult> {
    statement.validate()?;
    check_level(level)?;
    match evidence {
        Evidence::Sampled(t) => g_test(t, statement, level),
        Evidence::Exact(t) => exact_test(t, statement, level),
    }
}

fn exact_test(table: &JointTable, statement: &CIStatement, level: f64) -> Result<CITestResult> {
    let z = statement.z_refs();
    for v in [&statement.x, &statement.y] {
        let m = table.marginal(&[v])?;
        if m.cells().iter().filter(|&&c| c > EXACT_TOL).count() < 2 {
            return Err(Error::DegenerateVariable(v.clone()));
        }
    }
    let gap = table.factorization_gap(&statement.x, &statement.y, &z)?;
    let shape = table.shape();
    let cz: usize = z.iter().map(|n| shape.card(n)).product::<Result<usize>>()?;
    let dof = (shape.card(&statement.x)? - 1) * (shape.card(&statement.y)? - 1) * cz;
    let independent = gap <= EXACT_TOL;
    Ok(CITestResult {
        statement: statement.clone(),
        mode: TestMode::Exact,
        statistic: gap,
        dof,
        p_value: if independent { 1.0 } else { 0.0 },
        verdict: if independent {
            Verdict::Independent
        } else {
            Verdict::Dependent
        },
        level,
        n: None,
    })
}

fn g_test(table: &ContingencyTable, statement: &CIStatement, level: f64) -> Result<CITestResult> {
    for v in [&statement.x, &statement.y] {
        let m = table.marginal(&[v])?;
        if m.counts().iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::DegenerateVariable(v.clone()));
        }
    }
    let z = statement.z_refs();
    let mut order = vec![statement.x.as_str(), statement.y.as_str()];
    order.extend_from_slice(&z);
    let m = table.marginal(&order)?;
    let cx = m.shape().variables()[0].card;
    let cy = m.shape().variables()[1].card;
    let z_shape = Shape::new(m.shape().variables()[2..].to_vec())?;
    let cz = z_shape.len();
    let at = |ix: usize, iy: usize, iz: usize| m.counts()[(ix * cy + iy) * cz + iz] as f64;

    let mut statistic = 0.0;
    let mut dof = 0usize;
    for iz in 0..cz {
        let rows: Vec<f64> = (0..cx).map(|ix| (0..cy).map(|iy| at(ix, iy, iz)).sum()).collect();
        let cols: Vec<f64> = (0..cy).map(|iy| (0..cx).map(|ix| at(ix, iy, iz)).sum()).collect();
        let total: f64 = rows.iter().sum();
        let describe = || {
            let assign = z_shape.assignment(iz);
            z.iter()
                .zip(&assign)
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        if total == 0.0 {
            return Err(Error::SparseCells(format!(
                "{statement}: stratum [{}] has no events",
                describe()
            )));
        }
        let live_rows: Vec<usize> = (0..cx).filter(|&i| rows[i] > 0.0).collect();
        let live_cols: Vec<usize> = (0..cy).filter(|&j| cols[j] > 0.0).collect();
        for &ix in &live_rows {
            for &iy in &live_cols {
                let expected = rows[ix] * cols[iy] / total;
                if expected < MIN_EXPECTED {
                    return Err(Error::SparseCells(format!(
                        "{statement}: stratum [{}] cell ({}={ix}, {}={iy}) expects {expected:.2} < {MIN_EXPECTED}",
                        describe(),
                        statement.x,
                        statement.y
                    )));
                }
                let observed = at(ix, iy, iz);
                if observed > 0.0 {
                    statistic += 2.0 * observed * (observed / expected).ln();
                }
            }
        }
        dof += live_rows.len().saturating_sub(1) * live_cols.len().saturating_sub(1);
    }
    let statistic = statistic.max(0.0);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::ParameterRange(e.to_string()))?
            .sf(statistic)
            .clamp(0.0, 1.0)
    };
    Ok(CITestResult {
        statement: statement.clone(),
        mode: TestMode::Sampled,
        statistic,
        dof,
        p_value,
        verdict: if p_value >= level {
            Verdict::Independent
        } else {
            Verdict::Dependent
        },
        level,
        n: Some(table.total()),
    })
}

/// Runs `(first ⊥ beta | alpha)` and `(B ⊥ alpha | beta)`. On a view
/// without the first column only the `B` test is run.
pub fn nosignalling_suite(batch: &EventBatch, level: f64) -> Result<Vec<CITestResult>> {
    let table = ContingencyTable::from_batch(batch)?;
    let first = batch.has_first_outcome().then(|| batch.first_variable());
    nosignalling_suite_counts(&table, first, level)
}

pub fn nosignalling_suite_counts(
    table: &ContingencyTable,
    first: Option<&str>,
    level: f64,
) -> Result<Vec<CITestResult>> {
    let mut statements = Vec::with_capacity(2);
    if let Some(f) = first {
        statements.push(CIStatement::new(f, names::BETA, &[names::ALPHA])?);
    }
    statements.push(CIStatement::new(names::B, names::ALPHA, &[names::BETA])?);
    statements
        .iter()
        .map(|s| ci_test(Evidence::Sampled(table), s, level))
        .collect()
}

/// An estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

/// `E = P̂(same) − P̂(different)` at one setting pair, with standard error
/// `sqrt((1 − E²)/n)`.
pub fn estimate_correlation(batch: &EventBatch, alpha_index: usize, beta_index: usize) -> Result<Estimate> {
    if !batch.has_first_outcome() {
        return Err(Error::MissingColumn("a".into()));
    }
    let table = ContingencyTable::from_batch(batch)?;
    correlation_from_counts(&table, alpha_index, beta_index)
}

/// As [`estimate_correlation`], on counts over `(alpha, beta, first, B)`.
pub fn correlation_from_counts(table: &ContingencyTable, alpha_index: usize, beta_index: usize) -> Result<Estimate> {
    let vars = table.shape().variables();
    if vars.len() != 4 {
        return Err(Error::MissingColumn("a".into()));
    }
    let (na, nb) = (vars[0].card, vars[1].card);
    if alpha_index >= na || beta_index >= nb {
        return Err(Error::SettingOutOfRange {
            alpha_index,
            beta_index,
            alphas: na,
            betas: nb,
        });
    }
    let base = (alpha_index * nb + beta_index) * 4;
    let c = &table.counts()[base..base + 4];
    let same = c[0] + c[3];
    let n = c.iter().sum::<u64>();
    if n < MIN_PAIR_EVENTS {
        return Err(Error::InsufficientEvents {
            alpha_index,
            beta_index,
            found: n,
            required: MIN_PAIR_EVENTS,
        });
    }
    let value = (2 * same) as f64 / n as f64 - 1.0;
    let std_error = ((1.0 - value * value).max(0.0) / n as f64).sqrt();
    Ok(Estimate { value, std_error, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corestats::{eprb_joint, settings_joint, Angle, ExperimentKind};
    use crate::sampler::{sample, DemonPolicy, Grid, SettingPolicy, Visibility};
    use std::f64::consts::PI;

    #[test]
    fn statement_validation() {
        assert!(CIStatement::new("A", "A", &[]).is_err());
        assert!(CIStatement::new("A", "B", &["A"]).is_err());
        assert!(CIStatement::new("A", "B", &["C", "C"]).is_err());
        let s = CIStatement::new("B", "alpha", &["beta"]).unwrap();
        assert_eq!(s.to_string(), "(B ⊥ alpha | beta)");
        assert!(s.same_as(&CIStatement::new("alpha", "B", &["beta"]).unwrap()));
    }

    #[test]
    fn exact_eprb_no_signalling() {
        let grid = [Angle::new(0.0), Angle::new(PI / 8.0), Angle::new(PI / 3.0)];
        let t = settings_joint(&ExperimentKind::Eprb, &grid, &grid).unwrap();
        let s = CIStatement::new(names::B, names::ALPHA, &[names::BETA]).unwrap();
        let r = ci_test(Evidence::Exact(&t), &s, 0.01).unwrap();
        assert_eq!(r.verdict, Verdict::Independent);
        assert_eq!(r.p_value, 1.0);
        // Conditioning on the other outcome exposes the dependence.
        let s = CIStatement::new(names::B, names::ALPHA, &[names::BETA, names::A]).unwrap();
        assert_eq!(
            ci_test(Evidence::Exact(&t), &s, 0.01).unwrap().verdict,
            Verdict::Dependent
        );
    }

    #[test]
    fn exact_copy_is_dependent() {
        let t = JointTable::new(
            vec![Variable::binary(names::ALPHA), Variable::binary(names::B)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let s = CIStatement::new(names::B, names::ALPHA, &[]).unwrap();
        let r = ci_test(Evidence::Exact(&t), &s, 0.01).unwrap();
        assert_eq!(r.verdict, Verdict::Dependent);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn errors_are_reported() {
        let t = eprb_joint(Angle::new(0.0), Angle::new(0.1));
        let s = CIStatement::new("A", "Q", &[]).unwrap();
        assert!(matches!(
            ci_test(Evidence::Exact(&t), &s, 0.01),
            Err(Error::UnknownVariable(_))
        ));
        let s = CIStatement::new("A", "B", &[]).unwrap();
        assert!(matches!(
            ci_test(Evidence::Exact(&t), &s, 1.0),
            Err(Error::InvalidLevel(_))
        ));

        let constant = JointTable::new(
            vec![Variable::binary("X"), Variable::binary("Y")],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let s = CIStatement::new("X", "Y", &[]).unwrap();
        assert!(matches!(
            ci_test(Evidence::Exact(&constant), &s, 0.01),
            Err(Error::DegenerateVariable(_))
        ));
    }

    #[test]
    fn g_test_known_value() {
        // 2x2 table [[10, 20], [30, 40]]: G computed by hand.
        let t =
            ContingencyTable::new(vec![Variable::binary("X"), Variable::binary("Y")], vec![10, 20, 30, 40]).unwrap();
        let obs: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
        let exp: [f64; 4] = [12.0, 18.0, 28.0, 42.0];
        let g: f64 = 2.0 * obs.iter().zip(&exp).map(|(o, e)| o * (o / e).ln()).sum::<f64>();
        let r = ci_test(Evidence::Sampled(&t), &CIStatement::new("X", "Y", &[]).unwrap(), 0.05).unwrap();
        assert!((r.statistic - g).abs() < 1e-12);
        assert_eq!(r.dof, 1);
        let chi = ChiSquared::new(1.0).unwrap();
        assert!((r.p_value - chi.sf(g)).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Independent);
        assert_eq!(r.n, Some(100));
    }

    #[test]
    fn sparse_strata_are_errors() {
        let kind = ExperimentKind::Eprb;
        let grid = Grid::symmetric(vec![Angle::new(0.0), Angle::new(0.5)]).unwrap();
        let demon = DemonPolicy::for_experiment(&kind, Visibility::Hidden);
        let b = sample(kind, &grid, SettingPolicy::UniformRandom, demon, 10, 1).unwrap();
        assert!(matches!(nosignalling_suite(&b, 0.01), Err(Error::SparseCells(_))));
    }

    #[test]
    fn revealed_demon_exposes_dependence() {
        let kind = ExperimentKind::InputControlledSeprb;
        let grid = Grid::symmetric(vec![Angle::new(0.0), Angle::new(PI / 8.0)]).unwrap();
        let demon = DemonPolicy::for_experiment(&kind, Visibility::Revealed);
        let b = sample(kind, &grid, SettingPolicy::UniformRandom, demon, 100_000, 21).unwrap();
        let t = ContingencyTable::from_batch(&b).unwrap();
        let s = CIStatement::new(names::B, names::ALPHA, &[names::BETA, names::A_PRIME]).unwrap();
        assert_eq!(
            ci_test(Evidence::Sampled(&t), &s, 0.01).unwrap().verdict,
            Verdict::Dependent
        );
    }

    #[test]
    fn correlation_requires_events_and_column() {
        let kind = ExperimentKind::Eprb;
        let grid = Grid::symmetric(vec![Angle::new(0.0)]).unwrap();
        let demon = DemonPolicy::for_experiment(&kind, Visibility::Hidden);
        let b = sample(kind, &grid, SettingPolicy::UniformRandom, demon, 50, 1).unwrap();
        assert!(matches!(
            estimate_correlation(&b, 0, 0),
            Err(Error::InsufficientEvents { .. })
        ));
        let b = sample(kind, &grid, SettingPolicy::UniformRandom, demon, 500, 1).unwrap();
        let e = estimate_correlation(&b, 0, 0).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);

        let kind = ExperimentKind::InputControlledSeprb;
        let b = sample(kind, &grid, SettingPolicy::UniformRandom, demon, 500, 1).unwrap();
        let hidden = crate::sampler::project_observables(&b, &demon);
        assert!(matches!(
            estimate_correlation(&hidden, 0, 0),
            Err(Error::MissingColumn(_))
        ));
    }
}
