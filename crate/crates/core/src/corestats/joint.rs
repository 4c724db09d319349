use serde::{Deserialize, Serialize};

use crate::{Error, Result, EXACT_TOL};

/// A named discrete variable with values `0..card`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub card: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        Self {
            name: name.into(),
            card,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, 2)
    }
}

/// Row-major shape over an ordered list of variables (first variable varies
/// slowest). Shared by exact joints and sampled contingency tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    variables: Vec<Variable>,
}

impl Shape {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if v.card == 0 {
                return Err(Error::InvalidTable(format!(
                    "variable `{}` has an empty domain",
                    v.name
                )));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidTable(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(Self { variables })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.iter().map(|v| v.card).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name)
    }

    pub fn card(&self, name: &str) -> Result<usize> {
        Ok(self.variables[self.position(name)?].card)
    }

    pub fn flat_index(&self, assignment: &[usize]) -> usize {
        debug_assert_eq!(assignment.len(), self.variables.len());
        assignment.iter().zip(&self.variables).fold(0, |acc, (&a, v)| {
            debug_assert!(a < v.card);
            acc * v.card + a
        })
    }

    pub fn assignment(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.variables.len()];
        for (slot, v) in out.iter_mut().zip(&self.variables).rev() {
            *slot = flat % v.card;
            flat /= v.card;
        }
        out
    }

    /// For each flat index of `self`, the flat index into `target`, where
    /// `target`'s variables are a subset of `self`'s.
    pub(crate) fn projection(&self, target: &Shape) -> Result<Vec<usize>> {
        let picks = target
            .variables
            .iter()
            .map(|v| self.position(&v.name))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(self.len());
        let mut sub = vec![0; picks.len()];
        for flat in 0..self.len() {
            let full = self.assignment(flat);
            for (s, &p) in sub.iter_mut().zip(&picks) {
                *s = full[p];
            }
            out.push(target.flat_index(&sub));
        }
        Ok(out)
    }

    pub(crate) fn sub_shape(&self, names: &[&str]) -> Result<Shape> {
        let vars = names
            .iter()
            .map(|n| Ok(self.variables[self.position(n)?].clone()))
            .collect::<Result<Vec<_>>>()?;
        Shape::new(vars)
    }
}

/// A normalized probability table over named discrete variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointTable {
    shape: Shape,
    cells: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    shape: Shape,
    cells: Vec<f64>,
}

impl TryFrom<RawJoint> for JointTable {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        JointTable::new(raw.shape.variables, raw.cells)
    }
}

impl JointTable {
    pub fn new(variables: Vec<Variable>, cells: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(variables)?;
        if cells.len() != shape.len() {
            return Err(Error::InvalidTable(format!(
                "expected {} cells, got {}",
                shape.len(),
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidTable(format!("cell value {bad} is not a probability")));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidTable(format!("cells sum to {total}")));
        }
        Ok(Self { shape, cells })
    }

    pub fn from_fn(variables: Vec<Variable>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let shape = Shape::new(variables)?;
        let cells = (0..shape.len()).map(|i| f(&shape.assignment(i))).collect();
        Self::new(shape.variables, cells)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn variables(&self) -> &[Variable] {
        self.shape.variables()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.cells[self.shape.flat_index(assignment)]
    }

    /// Probability of the named partial assignment.
    pub fn prob_of(&self, event: &[(&str, usize)]) -> Result<f64> {
        let names: Vec<&str> = event.iter().map(|(n, _)| *n).collect();
        let m = self.marginal(&names)?;
        let values: Vec<usize> = event.iter().map(|(_, v)| *v).collect();
        Ok(m.prob(&values))
    }

    /// Marginal over `names`, in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<JointTable> {
        let target = self.shape.sub_shape(names)?;
        let map = self.shape.projection(&target)?;
        let mut cells = vec![0.0; target.len()];
        for (c, &t) in self.cells.iter().zip(&map) {
            cells[t] += c;
        }
        Ok(JointTable { shape: target, cells })
    }

    /// Conditional table given a partial assignment; the conditioned
    /// variables are dropped.
    pub fn condition(&self, event: &[(&str, usize)]) -> Result<JointTable> {
        let mut fixed = vec![None; self.shape.variables().len()];
        for &(name, value) in event {
            let pos = self.shape.position(name)?;
            if value >= self.shape.variables()[pos].card {
                return Err(Error::InvalidTable(format!("value {value} outside domain of `{name}`")));
            }
            fixed[pos] = Some(value);
        }
        let keep: Vec<Variable> = self
            .shape
            .variables()
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(v, _)| v.clone())
            .collect();
        let target = Shape::new(keep)?;
        let mut cells = vec![0.0; target.len()];
        let mut sub = Vec::with_capacity(target.variables().len());
        for (flat, &c) in self.cells.iter().enumerate() {
            let full = self.shape.assignment(flat);
            if full.iter().zip(&fixed).any(|(a, f)| f.is_some_and(|f| f != *a)) {
                continue;
            }
            sub.clear();
            sub.extend(full.iter().zip(&fixed).filter(|(_, f)| f.is_none()).map(|(a, _)| *a));
            cells[target.flat_index(&sub)] += c;
        }
        let mass: f64 = cells.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability(format!("{event:?}")));
        }
        cells.iter_mut().for_each(|c| *c /= mass);
        Ok(JointTable { shape: target, cells })
    }

    pub fn rename(mut self, from: &str, to: &str) -> Result<JointTable> {
        let pos = self.shape.position(from)?;
        if from != to && self.shape.contains(to) {
            return Err(Error::InvalidTable(format!("variable `{to}` already exists")));
        }
        self.shape.variables[pos].name = to.to_string();
        Ok(self)
    }

    /// Largest cell difference against `other`, which must have the same
    /// variables in the same order.
    pub fn max_discrepancy(&self, other: &JointTable) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::InvalidTable("tables have different variables".into()));
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest violation of `P(x, y | z) = P(x | z) P(y | z)` over all
    /// assignments with `P(z) > 0`.
    pub fn factorization_gap(&self, x: &str, y: &str, z: &[&str]) -> Result<f64> {
        let strata = Strata::new(self, x, y, z)?;
        let mut worst: f64 = 0.0;
        for iz in 0..strata.cz {
            let pz = strata.pz(iz);
            if pz <= 0.0 {
                continue;
            }
            for ix in 0..strata.cx {
                let px = (0..strata.cy).map(|iy| strata.get(ix, iy, iz)).sum::<f64>() / pz;
                for iy in 0..strata.cy {
                    let py = (0..strata.cx).map(|jx| strata.get(jx, iy, iz)).sum::<f64>() / pz;
                    let pxy = strata.get(ix, iy, iz) / pz;
                    worst = worst.max((pxy - px * py).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Largest total-variation distance between `P(x | y, z)` and
    /// `P(x | y', z)` over strata `z` and value pairs `y, y'` of positive
    /// probability. Zero iff `x` and `y` are conditionally independent given
    /// `z`.
    pub fn dependence(&self, x: &str, y: &str, z: &[&str]) -> Result<f64> {
        let strata = Strata::new(self, x, y, z)?;
        let mut worst: f64 = 0.0;
        for iz in 0..strata.cz {
            let conditionals: Vec<Vec<f64>> = (0..strata.cy)
                .filter_map(|iy| {
                    let pyz: f64 = (0..strata.cx).map(|ix| strata.get(ix, iy, iz)).sum();
                    (pyz > 0.0).then(|| (0..strata.cx).map(|ix| strata.get(ix, iy, iz) / pyz).collect())
                })
                .collect();
            for (i, p) in conditionals.iter().enumerate() {
                for q in &conditionals[i + 1..] {
                    let tv = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    worst = worst.max(tv);
                }
            }
        }
        Ok(worst)
    }

    /// Product with an independent variable distributed as `dist`, appended
    /// as the last variable.
    pub fn with_independent(&self, variable: Variable, dist: &[f64]) -> Result<JointTable> {
        if dist.len() != variable.card {
            return Err(Error::InvalidTable(format!(
                "distribution for `{}` has {} entries, domain has {}",
                variable.name,
                dist.len(),
                variable.card
            )));
        }
        let mut vars = self.shape.variables().to_vec();
        vars.push(variable);
        let cells = self
            .cells
            .iter()
            .flat_map(|c| dist.iter().map(move |d| c * d))
            .collect();
        JointTable::new(vars, cells)
    }
}

/// A joint reordered as `[x, y, z...]` for stratified queries.
struct Strata {
    table: JointTable,
    cx: usize,
    cy: usize,
    cz: usize,
}

impl Strata {
    fn new(joint: &JointTable, x: &str, y: &str, z: &[&str]) -> Result<Self> {
        if x == y || z.contains(&x) || z.contains(&y) {
            return Err(Error::InvalidStatement(format!(
                "({x} ⊥ {y} | {z:?}) repeats a variable"
            )));
        }
        let mut names = vec![x, y];
        names.extend_from_slice(z);
        let table = joint.marginal(&names)?;
        let cx = table.variables()[0].card;
        let cy = table.variables()[1].card;
        let cz = table.variables()[2..].iter().map(|v| v.card).product();
        Ok(Self { table, cx, cy, cz })
    }

    fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.table.cells[(ix * self.cy + iy) * self.cz + iz]
    }

    fn pz(&self, iz: usize) -> f64 {
        (0..self.cx)
            .flat_map(|ix| (0..self.cy).map(move |iy| (ix, iy)))
            .map(|(ix, iy)| self.get(ix, iy, iz))
            .sum()
    }
}
