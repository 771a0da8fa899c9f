//! Linear and mixed-integer model representation, the simplex kernel used for
//! relaxations, and LP-format export.

mod lpformat;
mod simplex;

use thiserror::Error;

pub use lpformat::{export_lp, parse_lp, write_lp, LpFormatError};
pub use simplex::{solve_lp, SimplexSolver};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const INTEGRALITY_TOL: f64 = 1e-7;
pub const CUT_VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("constraint references unknown variable {0:?}")]
    UnknownVariable(VarId),
    #[error("variable {name} has empty domain [{lower}, {upper}]")]
    EmptyDomain {
        name: String,
        lower: f64,
        upper: f64,
    },
}

/// A minimization model: bounded variables, linear rows, linear objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        })
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(ModelError::EmptyDomain { name, lower, upper });
        }
        Ok(self.push_var(Variable {
            name,
            lower,
            upper,
            kind: VarKind::Continuous,
        }))
    }

    fn push_var(&mut self, var: Variable) -> VarId {
        self.variables.push(var);
        VarId(self.variables.len() - 1)
    }

    /// Appends a row; its id stays valid for the lifetime of the model.
    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        let name = format!("c{}", self.constraints.len());
        self.add_named_constraint(name, coeffs, sense, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        if let Some(&(v, _)) = coeffs.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(ModelError::UnknownVariable(v));
        }
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn set_objective(&mut self, coeffs: Vec<(VarId, f64)>) -> Result<(), ModelError> {
        if let Some(&(v, _)) = coeffs.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(ModelError::UnknownVariable(v));
        }
        self.objective = coeffs;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub(crate) fn constraint_mut(&mut self, id: ConstraintId) -> &mut Constraint {
        &mut self.constraints[id.0]
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

/// Same model with every integrality flag dropped; bounds are kept.
pub fn relax(model: &MilpModel) -> MilpModel {
    let mut relaxed = model.clone();
    for v in &mut relaxed.variables {
        v.kind = VarKind::Continuous;
    }
    relaxed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("model still has {0} integer variables; relax it first")]
    NotRelaxed(usize),
    #[error("simplex failed to make progress: {0}")]
    NumericalFailure(String),
    #[error("time limit reached during the LP solve")]
    TimeLimit,
}
