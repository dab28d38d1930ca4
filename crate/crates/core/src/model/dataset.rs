use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::VariableKind;

/// Which block of the two-source layout a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Observed for every unit.
    Covariate,
    /// Observed only when `m = 1`.
    Outcome1,
    /// Observed only when `m = 0`.
    Outcome2,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Covariate => "covariate",
            Role::Outcome1 => "outcome1",
            Role::Outcome2 => "outcome2",
        }
    }

    pub fn is_outcome(self) -> bool {
        !matches!(self, Role::Covariate)
    }

    /// Whether a cell with this role is observed for a unit in pattern `m`.
    pub fn observed_when(self, m: u8) -> bool {
        match self {
            Role::Covariate => true,
            Role::Outcome1 => m == 1,
            Role::Outcome2 => m == 0,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covariate" | "x" => Ok(Role::Covariate),
            "outcome1" | "outcome-1" | "y1" => Ok(Role::Outcome1),
            "outcome2" | "outcome-2" | "y2" => Ok(Role::Outcome2),
            other => Err(Error::Config(format!("unknown variable role `{other}`"))),
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub role: Role,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind, role: Role) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }
}

fn check_specs(specs: &[VariableSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for s in specs {
        if s.name.is_empty() || s.name == "m" {
            return Err(Error::Config(format!("invalid variable name `{}`", s.name)));
        }
        if !seen.insert(s.name.as_str()) {
            return Err(Error::Config(format!("duplicate variable name `{}`", s.name)));
        }
    }
    for role in [Role::Outcome1, Role::Outcome2] {
        if !specs.iter().any(|s| s.role == role) {
            return Err(Error::Config(format!("schema has no {role} variable")));
        }
    }
    Ok(())
}

/// A fully observed single-source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteDataset {
    specs: Vec<VariableSpec>,
    values: Array2<f64>,
}

impl CompleteDataset {
    pub fn new(specs: Vec<VariableSpec>, values: Array2<f64>) -> Result<Self> {
        check_specs(&specs)?;
        if values.ncols() != specs.len() {
            return Err(Error::Shape(format!(
                "{} columns for {} variables",
                values.ncols(),
                specs.len()
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !specs[j].kind.contains(v) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: specs[j].name.clone(),
                    message: format!("value {v} is outside the {} domain", specs[j].kind),
                });
            }
        }
        Ok(Self { specs, values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Hide the outcome block each unit's pattern does not observe.
    pub fn mask(&self, m: &[u8]) -> Result<(CombinedDataset, HiddenCells)> {
        if m.len() != self.n() {
            return Err(Error::Shape(format!("{} indicators for {} units", m.len(), self.n())));
        }
        let mut values = self.values.clone();
        let mut hidden = Vec::new();
        for i in 0..self.n() {
            for (j, s) in self.specs.iter().enumerate() {
                if !s.role.observed_when(m[i]) {
                    hidden.push(HiddenCell {
                        unit: i,
                        variable: j,
                        value: values[[i, j]],
                    });
                    values[[i, j]] = f64::NAN;
                }
            }
        }
        let data = CombinedDataset::new(self.specs.clone(), values, m.to_vec())?;
        Ok((data, HiddenCells(hidden)))
    }
}

/// A cell removed by masking, kept as evaluation truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenCell {
    pub unit: usize,
    pub variable: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HiddenCells(pub Vec<HiddenCell>);

impl HiddenCells {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HiddenCell> {
        self.0.iter()
    }
}

/// Two datasets on disjoint units stacked into one table with block-missing
/// outcomes.
///
/// Unit `i` observes the covariates plus outcome-1 variables when `m[i] = 1`,
/// or the covariates plus outcome-2 variables when `m[i] = 0`. Hidden cells
/// hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDataset {
    specs: Vec<VariableSpec>,
    values: Array2<f64>,
    m: Vec<u8>,
}

impl CombinedDataset {
    pub fn new(specs: Vec<VariableSpec>, values: Array2<f64>, m: Vec<u8>) -> Result<Self> {
        check_specs(&specs)?;
        let n = values.nrows();
        if values.ncols() != specs.len() {
            return Err(Error::Shape(format!(
                "{} columns for {} variables",
                values.ncols(),
                specs.len()
            )));
        }
        if m.len() != n {
            return Err(Error::Shape(format!("{} indicators for {n} units", m.len())));
        }
        for (i, &mi) in m.iter().enumerate() {
            if mi > 1 {
                return Err(Error::Parse {
                    row: i + 1,
                    column: "m".into(),
                    message: format!("missing-pattern indicator must be 0 or 1, got {mi}"),
                });
            }
            for (j, s) in specs.iter().enumerate() {
                let v = values[[i, j]];
                let err = |message: String| Error::Parse {
                    row: i + 1,
                    column: s.name.clone(),
                    message,
                };
                if s.role.observed_when(mi) {
                    if v.is_nan() {
                        return Err(err(format!("{} value is required when m = {mi}", s.role)));
                    }
                    if !s.kind.contains(v) {
                        return Err(err(format!("value {v} is outside the {} domain", s.kind)));
                    }
                } else if !v.is_nan() {
                    return Err(err(format!("{} value must be absent when m = {mi}", s.role)));
                }
            }
        }
        Ok(Self { specs, values, m })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of observed variables (covariates and outcomes).
    pub fn p(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn m(&self) -> &[u8] {
        &self.m
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn is_observed(&self, unit: usize, variable: usize) -> bool {
        self.specs[variable].role.observed_when(self.m[unit])
    }

    pub fn value(&self, unit: usize, variable: usize) -> Option<f64> {
        self.is_observed(unit, variable).then(|| self.values[[unit, variable]])
    }

    pub fn covariate_indices(&self) -> Vec<usize> {
        self.indices_where(|s| s.role == Role::Covariate)
    }

    pub fn outcome_indices(&self) -> Vec<usize> {
        self.indices_where(|s| s.role.is_outcome())
    }

    fn indices_where(&self, pred: impl Fn(&VariableSpec) -> bool) -> Vec<usize> {
        self.specs
            .iter()
            .enumerate()
            .filter(|(_, s)| pred(s))
            .map(|(j, _)| j)
            .collect()
    }

    /// Covariate block as an `n x q` matrix.
    pub fn covariates(&self) -> Array2<f64> {
        let cols = self.covariate_indices();
        Array2::from_shape_fn((self.n(), cols.len()), |(i, k)| self.values[[i, cols[k]]])
    }

    /// Every hidden `(unit, variable)` cell in row-major order.
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for i in 0..self.n() {
            for j in 0..self.p() {
                if !self.is_observed(i, j) {
                    cells.push((i, j));
                }
            }
        }
        cells
    }

    pub fn pattern_counts(&self) -> (usize, usize) {
        let ones = self.m.iter().filter(|&&v| v == 1).count();
        (ones, self.n() - ones)
    }

    /// Reorder units: row `k` of the result is row `order[k]` of `self`.
    pub fn permute_units(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::Shape("permutation length differs from n".into()));
        }
        let values = Array2::from_shape_fn(self.values.dim(), |(k, j)| self.values[[order[k], j]]);
        let m = order.iter().map(|&i| self.m[i]).collect();
        Self::new(self.specs.clone(), values, m)
    }
}
