//! Bounded-variable primal revised simplex.
//!
//! Rows are turned into equalities with one slack per row (`a·x + s = b`),
//! so the all-slack basis is always available. The basis inverse is kept as
//! a dense matrix updated by elementary row operations and refactorized from
//! scratch when the primal residual drifts. Phase 1 minimizes the sum of
//! bound violations of the basic variables, which lets a solve start from any
//! basis: the solver object can be re-solved after bound changes or appended
//! rows without rebuilding. When such a change leaves the basis primal
//! infeasible but dual feasible, a dual simplex phase restores feasibility
//! first, which is usually far shorter than primal phase 1.

// Dense basis updates index several arrays by the same row.
#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use super::{LpError, LpSolution, LpStatus, MilpModel, Sense, VarId, FEASIBILITY_TOL};

const PIVOT_TOL: f64 = 1e-7;
const SINGULAR_TOL: f64 = 1e-11;
const OPTIMALITY_TOL: f64 = 1e-9;
/// Reduced-cost slack accepted when deciding a basis is dual feasible.
const DUAL_FEASIBILITY_TOL: f64 = 1e-7;
const REFRESH_EVERY: usize = 64;

enum DualOutcome {
    PrimalFeasible,
    Infeasible,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

/// Reusable simplex state over a fixed set of structural columns.
#[derive(Debug, Clone)]
pub struct SimplexSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    /// Row `p` (basis position) by column `i` (constraint row).
    binv: Vec<f64>,
    bland: bool,
    total_iterations: usize,
    deadline: Option<Instant>,
}

/// Solves the LP relaxation of a fully continuous model from the slack basis.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, LpError> {
    let integral = model.num_binaries();
    if integral > 0 {
        return Err(LpError::NotRelaxed(integral));
    }
    SimplexSolver::new(model).solve()
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

fn resting_state(lower: f64, upper: f64) -> (VarState, f64) {
    if lower.is_finite() {
        (VarState::AtLower, lower)
    } else if upper.is_finite() {
        (VarState::AtUpper, upper)
    } else {
        (VarState::Zero, 0.0)
    }
}

impl SimplexSolver {
    /// Sets up the model (integrality is ignored) with the all-slack basis.
    pub fn new(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut lower = Vec::with_capacity(n + model.num_constraints());
        let mut upper = Vec::with_capacity(n + model.num_constraints());
        let mut cost = vec![0.0; n];
        for v in model.variables() {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for &(v, c) in model.objective() {
            cost[v.0] += c;
        }
        let mut solver = Self {
            n,
            m: 0,
            cols,
            rhs: Vec::new(),
            lower,
            upper,
            cost,
            basis: Vec::new(),
            state: Vec::new(),
            x: Vec::new(),
            binv: Vec::new(),
            bland: false,
            total_iterations: 0,
            deadline: None,
        };
        for j in 0..n {
            let (state, value) = resting_state(solver.lower[j], solver.upper[j]);
            solver.state.push(state);
            solver.x.push(value);
        }
        let m = model.num_constraints();
        solver.binv = vec![0.0; m * m];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    solver.cols[v.0].push((i, a));
                }
            }
            let (lo, hi) = slack_bounds(c.sense);
            solver.rhs.push(c.rhs);
            solver.lower.push(lo);
            solver.upper.push(hi);
            solver.cost.push(0.0);
            solver.basis.push(n + i);
            solver.state.push(VarState::Basic(i));
            solver.x.push(0.0);
            solver.binv[i * m + i] = 1.0;
        }
        solver.m = m;
        cols = std::mem::take(&mut solver.cols);
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
        }
        solver.cols = cols;
        solver.compute_basic_values();
        solver
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_structurals(&self) -> usize {
        self.n
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    /// Later solves give up with [`LpError::TimeLimit`] once `deadline`
    /// passes; the basis stays usable.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.lower[var.0], self.upper[var.0])
    }

    /// Changes the bounds of a structural variable, keeping the basis.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let j = var.0;
        if self.lower[j] == lower && self.upper[j] == upper {
            return;
        }
        self.lower[j] = lower;
        self.upper[j] = upper;
        if let VarState::Basic(_) = self.state[j] {
            return;
        }
        let old = self.x[j];
        let (state, value) = match self.state[j] {
            VarState::AtUpper if upper.is_finite() => (VarState::AtUpper, upper),
            _ => resting_state(lower, upper),
        };
        self.state[j] = state;
        self.x[j] = value;
        let delta = value - old;
        if delta != 0.0 {
            self.shift_basics(j, delta);
        }
    }

    /// Basic values after nonbasic column `j` moves by `delta`.
    fn shift_basics(&mut self, j: usize, delta: f64) {
        let w = self.ftran(j);
        for p in 0..self.m {
            if w[p] != 0.0 {
                self.x[self.basis[p]] -= w[p] * delta;
            }
        }
    }

    /// Appends a row with its slack basic; the basis inverse is bordered
    /// rather than recomputed.
    pub fn add_row(&mut self, coeffs: &[(VarId, f64)], sense: Sense, rhs: f64) {
        let i = self.m;
        let m1 = self.m + 1;
        // New inverse row: -(r_B) B^-1, where r_B are the row's coefficients
        // on the basic structural columns.
        let mut border = vec![0.0; self.m];
        for &(v, a) in coeffs {
            if a == 0.0 {
                continue;
            }
            if let VarState::Basic(p) = self.state[v.0] {
                let row = &self.binv[p * self.m..(p + 1) * self.m];
                for (b, &r) in border.iter_mut().zip(row) {
                    *b -= a * r;
                }
            }
        }
        let mut binv = vec![0.0; m1 * m1];
        for p in 0..self.m {
            binv[p * m1..p * m1 + self.m].copy_from_slice(&self.binv[p * self.m..(p + 1) * self.m]);
        }
        binv[i * m1..i * m1 + self.m].copy_from_slice(&border);
        binv[i * m1 + i] = 1.0;
        self.binv = binv;

        for &(v, a) in coeffs {
            if a != 0.0 {
                self.cols[v.0].push((i, a));
            }
        }
        let activity: f64 = coeffs.iter().map(|&(v, a)| a * self.x[v.0]).sum();
        let (lo, hi) = slack_bounds(sense);
        self.rhs.push(rhs);
        self.lower.push(lo);
        self.upper.push(hi);
        self.cost.push(0.0);
        self.basis.push(self.n + i);
        self.state.push(VarState::Basic(i));
        self.x.push(rhs - activity);
        self.m = m1;
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n {
            ColumnRef::Sparse(&self.cols[j])
        } else {
            ColumnRef::Unit(j - self.n)
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        match self.column(j) {
            ColumnRef::Unit(i) => {
                for (p, wp) in w.iter_mut().enumerate() {
                    *wp = self.binv[p * m + i];
                }
            }
            ColumnRef::Sparse(col) => {
                for (p, wp) in w.iter_mut().enumerate() {
                    let row = &self.binv[p * m..(p + 1) * m];
                    *wp = col.iter().map(|&(i, a)| a * row[i]).sum();
                }
            }
        }
        w
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        match self.column(j) {
            ColumnRef::Unit(i) => y[i],
            ColumnRef::Sparse(col) => col.iter().map(|&(i, a)| a * y[i]).sum(),
        }
    }

    /// `b - N x_N`.
    fn reduced_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], VarState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            match self.column(j) {
                ColumnRef::Unit(i) => r[i] -= xj,
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        r[i] -= a * xj;
                    }
                }
            }
        }
        r
    }

    fn compute_basic_values(&mut self) {
        let r = self.reduced_rhs();
        let m = self.m;
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[p]] = v;
        }
    }

    /// Max-norm of `B x_B - (b - N x_N)`, scaled by the right-hand side.
    fn residual(&self) -> f64 {
        let r = self.reduced_rhs();
        let mut lhs = vec![0.0; self.m];
        for &j in &self.basis {
            let xj = self.x[j];
            match self.column(j) {
                ColumnRef::Unit(i) => lhs[i] += xj,
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        lhs[i] += a * xj;
                    }
                }
            }
        }
        let scale = 1.0 + r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        lhs.iter()
            .zip(&r)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / scale
    }

    /// Dense copy of the basis matrix, rows indexed by constraint, columns by
    /// basis position.
    fn basis_matrix(&self) -> Vec<f64> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (p, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Unit(i) => b[i * m + p] = 1.0,
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        b[i * m + p] = a;
                    }
                }
            }
        }
        b
    }

    /// Gauss-Jordan inverse of the basis, indexed (position, row). `None` when
    /// the basis is numerically singular.
    fn invert(&self) -> Option<Vec<f64>> {
        let m = self.m;
        let mut b = self.basis_matrix();
        let mut inv = vec![0.0; m * m];
        for k in 0..m {
            inv[k * m + k] = 1.0;
        }
        for col in 0..m {
            let pivot_row = (col..m)
                .max_by(|&a, &c| b[a * m + col].abs().total_cmp(&b[c * m + col].abs()))
                .expect("non-empty range");
            let pivot = b[pivot_row * m + col];
            if pivot.abs() < SINGULAR_TOL {
                return None;
            }
            if pivot_row != col {
                for k in 0..m {
                    b.swap(pivot_row * m + k, col * m + k);
                    inv.swap(pivot_row * m + k, col * m + k);
                }
            }
            let scale = 1.0 / pivot;
            for k in 0..m {
                b[col * m + k] *= scale;
                inv[col * m + k] *= scale;
            }
            for row in 0..m {
                if row == col {
                    continue;
                }
                let factor = b[row * m + col];
                if factor == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[row * m + k] -= factor * b[col * m + k];
                    inv[row * m + k] -= factor * inv[col * m + k];
                }
            }
        }
        Some(inv)
    }

    /// Swaps numerically dependent basic columns for slacks of rows that no
    /// independent column pivots on. The dropped variables become nonbasic at
    /// the bound nearest their current value.
    fn repair_basis(&mut self) {
        let m = self.m;
        let mut b = self.basis_matrix();
        let mut row_used = vec![false; m];
        let mut dependent = Vec::new();
        for p in 0..m {
            let pivot_row = (0..m)
                .filter(|&i| !row_used[i])
                .max_by(|&a, &c| b[a * m + p].abs().total_cmp(&b[c * m + p].abs()));
            let Some(r) = pivot_row.filter(|&r| b[r * m + p].abs() >= SINGULAR_TOL) else {
                dependent.push(p);
                continue;
            };
            row_used[r] = true;
            let pivot = b[r * m + p];
            for i in 0..m {
                if row_used[i] {
                    continue;
                }
                let factor = b[i * m + p] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for k in p..m {
                    b[i * m + k] -= factor * b[r * m + k];
                }
            }
        }
        let free_rows = (0..m).filter(|&i| !row_used[i]);
        for (p, i) in dependent.into_iter().zip(free_rows) {
            let old = self.basis[p];
            let (lo, hi) = (self.lower[old], self.upper[old]);
            let v = self.x[old];
            let (value, state) = if lo.is_finite() && (!hi.is_finite() || v - lo <= hi - v) {
                (lo, VarState::AtLower)
            } else if hi.is_finite() {
                (hi, VarState::AtUpper)
            } else {
                (0.0, VarState::Zero)
            };
            self.x[old] = value;
            self.state[old] = state;
            let slack = self.n + i;
            self.basis[p] = slack;
            self.state[slack] = VarState::Basic(p);
        }
    }

    /// Rebuilds the basis inverse, repairing a singular basis first.
    fn refactor(&mut self) -> Result<(), LpError> {
        if let Some(inv) = self.invert() {
            self.binv = inv;
            return Ok(());
        }
        self.repair_basis();
        match self.invert() {
            Some(inv) => {
                self.binv = inv;
                Ok(())
            }
            None => Err(LpError::NumericalFailure("singular basis".into())),
        }
    }

    fn refresh(&mut self) -> Result<(), LpError> {
        self.compute_basic_values();
        if self.residual() > 1e-9 {
            self.refactor()?;
            self.compute_basic_values();
        }
        Ok(())
    }

    fn tol(bound: f64) -> f64 {
        FEASIBILITY_TOL * (1.0 + bound.abs())
    }

    /// Phase-1 cost of a basic variable: -1 below its lower bound, +1 above
    /// its upper bound.
    fn infeasibility_cost(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - Self::tol(self.lower[j]) {
            -1.0
        } else if v > self.upper[j] + Self::tol(self.upper[j]) {
            1.0
        } else {
            0.0
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| {
                let v = self.x[j];
                (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
            })
            .sum()
    }

    fn primal_objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Simplex multipliers for the true objective.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (p, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yi, &r) in y.iter_mut().zip(row) {
                    *yi += c * r;
                }
            }
        }
        y
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| {
            let v = self.x[j];
            v >= self.lower[j] - Self::tol(self.lower[j])
                && v <= self.upper[j] + Self::tol(self.upper[j])
        })
    }

    /// Moves boxed nonbasic variables to the bound their reduced cost
    /// prefers, then reports whether the basis is dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals();
        let mut feasible = true;
        for j in 0..self.n + self.m {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo == hi || matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let d = self.cost[j] - self.dot_column(&y, j);
            let boxed = lo.is_finite() && hi.is_finite();
            let target = match self.state[j] {
                VarState::AtLower if d < -DUAL_FEASIBILITY_TOL => Some((VarState::AtUpper, hi)),
                VarState::AtUpper if d > DUAL_FEASIBILITY_TOL => Some((VarState::AtLower, lo)),
                VarState::Zero if d.abs() > DUAL_FEASIBILITY_TOL => {
                    feasible = false;
                    None
                }
                _ => None,
            };
            let Some((state, value)) = target else {
                continue;
            };
            if !boxed {
                feasible = false;
                continue;
            }
            let delta = value - self.x[j];
            self.state[j] = state;
            self.x[j] = value;
            if delta != 0.0 {
                self.shift_basics(j, delta);
            }
        }
        feasible
    }

    /// Dual simplex from a dual-feasible basis, run until the basis is primal
    /// feasible. Used to re-solve after bound changes and appended rows.
    fn dual_phase(&mut self, iterations: &mut usize, limit: usize) -> Result<DualOutcome, LpError> {
        let m = self.m;
        let n_total = self.n + m;
        let start = *iterations;
        loop {
            let done = *iterations - start;
            if done > 0 && done.is_multiple_of(REFRESH_EVERY) {
                if self.deadline.is_some_and(|d| Instant::now() >= d) {
                    return Err(LpError::TimeLimit);
                }
                self.refresh()?;
            }
            if done >= limit {
                return Ok(DualOutcome::Abandoned);
            }

            let mut leave: Option<(usize, f64, f64)> = None; // (position, violation, bound)
            for (p, &j) in self.basis.iter().enumerate() {
                let v = self.x[j];
                let (lo, hi) = (self.lower[j], self.upper[j]);
                let (violation, bound) = if v < lo - Self::tol(lo) {
                    (lo - v, lo)
                } else if v > hi + Self::tol(hi) {
                    (v - hi, hi)
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, best, _)| violation > best) {
                    leave = Some((p, violation, bound));
                }
            }
            let Some((r, _, bound)) = leave else {
                return Ok(DualOutcome::PrimalFeasible);
            };
            let leaving = self.basis[r];
            let increase = self.x[leaving] < bound;

            let y = self.duals();
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            // (column, exact ratio, relaxed ratio, |alpha|)
            let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..n_total {
                let state = self.state[j];
                if matches!(state, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let alpha = self.dot_column(&rho, j);
                if alpha.abs() <= SINGULAR_TOL {
                    continue;
                }
                // Moving x_j by t shifts the leaving value by -alpha * t.
                let t_dir = match state {
                    VarState::AtLower => 1.0,
                    VarState::AtUpper => -1.0,
                    _ => {
                        if (-alpha > 0.0) == increase {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                if (-alpha * t_dir > 0.0) != increase {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(&y, j);
                let slack = (d * t_dir).max(0.0);
                let a = alpha.abs();
                candidates.push((j, slack / a, (slack + DUAL_FEASIBILITY_TOL) / a, a));
            }
            if candidates.is_empty() {
                return Ok(DualOutcome::Infeasible);
            }
            if candidates.iter().any(|c| c.3 > PIVOT_TOL) {
                candidates.retain(|c| c.3 > PIVOT_TOL);
            }
            let relaxed = candidates.iter().fold(f64::INFINITY, |acc, c| acc.min(c.2));
            let q = candidates
                .iter()
                .filter(|c| c.1 <= relaxed)
                .max_by(|a, b| a.3.total_cmp(&b.3).then(b.0.cmp(&a.0)))
                .expect("the relaxed minimum is attained")
                .0;

            let w = self.ftran(q);
            if w[r].abs() <= SINGULAR_TOL {
                self.refactor()?;
                self.compute_basic_values();
                *iterations += 1;
                continue;
            }
            let t = (self.x[leaving] - bound) / w[r];
            self.x[q] += t;
            for p in 0..m {
                if w[p] != 0.0 {
                    let j = self.basis[p];
                    self.x[j] -= w[p] * t;
                }
            }
            self.x[leaving] = bound;
            self.state[leaving] = if bound == self.lower[leaving] {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.basis[r] = q;
            self.state[q] = VarState::Basic(r);
            self.pivot(r, &w);
            *iterations += 1;
        }
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let n_total = self.n + self.m;
        let stall_limit = 5 * n_total;
        let max_iterations = 50 * n_total + 10_000;
        let mut stalled = 0usize;
        let mut iterations = 0usize;
        self.bland = false;
        self.refresh()?;
        if !self.primal_feasible() && self.make_dual_feasible() && !self.primal_feasible() {
            match self.dual_phase(&mut iterations, stall_limit)? {
                DualOutcome::Infeasible => {
                    self.total_iterations += iterations;
                    return Ok(self.solution(LpStatus::Infeasible, iterations));
                }
                DualOutcome::PrimalFeasible | DualOutcome::Abandoned => self.refresh()?,
            }
        }
        let mut fresh = true;

        loop {
            if iterations > 0 && iterations.is_multiple_of(REFRESH_EVERY) {
                if self.deadline.is_some_and(|d| Instant::now() >= d) {
                    return Err(LpError::TimeLimit);
                }
                if !fresh {
                    self.refresh()?;
                    fresh = true;
                }
            }
            if iterations >= max_iterations {
                return Err(LpError::NumericalFailure(format!(
                    "no convergence after {iterations} iterations"
                )));
            }

            let phase_costs: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| self.infeasibility_cost(j))
                .collect();
            let phase_one = phase_costs.iter().any(|&c| c != 0.0);
            let cb: Vec<f64> = if phase_one {
                phase_costs
            } else {
                self.basis.iter().map(|&j| self.cost[j]).collect()
            };

            let m = self.m;
            let mut y = vec![0.0; m];
            for (p, &c) in cb.iter().enumerate() {
                if c != 0.0 {
                    let row = &self.binv[p * m..(p + 1) * m];
                    for (yi, &r) in y.iter_mut().zip(row) {
                        *yi += c * r;
                    }
                }
            }

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (j, d_j, direction)
            for j in 0..n_total {
                let state = self.state[j];
                if matches!(state, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(&y, j);
                let direction = match state {
                    VarState::AtLower if d < -OPTIMALITY_TOL => 1.0,
                    VarState::AtUpper if d > OPTIMALITY_TOL => -1.0,
                    VarState::Zero if d.abs() > OPTIMALITY_TOL => -d.signum(),
                    _ => continue,
                };
                if self.bland {
                    entering = Some((j, d, direction));
                    break;
                }
                if entering.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                    entering = Some((j, d, direction));
                }
            }

            let Some((q, d_q, dir)) = entering else {
                // Optimal for the current phase; confirm on freshly computed values.
                if !fresh {
                    self.refresh()?;
                    fresh = true;
                    continue;
                }
                self.total_iterations += iterations;
                let status = if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
                return Ok(self.solution(status, iterations));
            };

            let w = self.ftran(q);

            // Harris two-pass ratio test. Limits are in units of the entering
            // step length; the second pass picks the largest pivot among rows
            // whose exact limit fits under the relaxed minimum.
            let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new(); // (position, exact, relaxed, bound)
            for p in 0..m {
                let wp = w[p];
                if wp.abs() <= PIVOT_TOL {
                    continue;
                }
                let delta = -dir * wp;
                let j = self.basis[p];
                let v = self.x[j];
                let (lo, hi) = (self.lower[j], self.upper[j]);
                // A variable already past a bound only blocks at the bound it
                // is heading back to; moving further out is priced in phase 1.
                let below = v < lo - Self::tol(lo);
                let above = v > hi + Self::tol(hi);
                let target = if delta > 0.0 {
                    if below {
                        Some((lo - v, lo))
                    } else if above || !hi.is_finite() {
                        None
                    } else {
                        Some(((hi - v).max(0.0), hi))
                    }
                } else if above {
                    Some((v - hi, hi))
                } else if below || !lo.is_finite() {
                    None
                } else {
                    Some(((v - lo).max(0.0), lo))
                };
                let Some((dist, bound)) = target else {
                    continue;
                };
                let rate = delta.abs();
                limits.push((p, dist / rate, (dist + Self::tol(bound)) / rate, bound));
            }
            let relaxed = limits.iter().fold(f64::INFINITY, |acc, l| acc.min(l.2));
            let mut best: Option<(f64, usize, f64)> = None; // (limit, position, leaving value)
            for &(p, exact, _, bound) in &limits {
                if exact > relaxed {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, bp, _)) => {
                        if self.bland {
                            self.basis[p] < self.basis[bp]
                        } else {
                            w[p].abs() > w[bp].abs()
                        }
                    }
                };
                if better {
                    best = Some((exact, p, bound));
                }
            }
            let flip = {
                let span = self.upper[q] - self.lower[q];
                span.is_finite().then_some(span)
            };

            let (step, leave) = match (best, flip) {
                (Some((limit, p, bound)), Some(span)) if limit < span => (limit, Some((p, bound))),
                (_, Some(span)) => (span, None),
                (Some((limit, p, bound)), None) => (limit, Some((p, bound))),
                (None, None) => {
                    if phase_one {
                        return Err(LpError::NumericalFailure("unbounded phase-1 ray".into()));
                    }
                    self.total_iterations += iterations;
                    return Ok(self.solution(LpStatus::Unbounded, iterations));
                }
            };

            iterations += 1;
            fresh = false;
            let gain = step * d_q.abs();
            if gain > 1e-12 {
                stalled = 0;
                self.bland = false;
            } else {
                stalled += 1;
                if stalled > stall_limit {
                    self.bland = true;
                }
            }

            self.x[q] += dir * step;
            for p in 0..m {
                if w[p] != 0.0 {
                    let j = self.basis[p];
                    self.x[j] -= dir * w[p] * step;
                }
            }

            match leave {
                None => {
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                }
                Some((r, bound)) => {
                    let leaving = self.basis[r];
                    self.x[leaving] = bound;
                    self.state[leaving] = if bound == self.lower[leaving] {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic(r);
                    self.pivot(r, &w);
                }
            }
        }
    }

    /// Updates the inverse for column with `B^-1 a_q = w` entering at position `r`.
    fn pivot(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let inv_pivot = 1.0 / w[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v *= inv_pivot;
        }
        for (p, row) in before.chunks_exact_mut(m).enumerate() {
            let f = w[p];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * b;
                }
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = w[r + 1 + k];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * b;
                }
            }
        }
    }

    fn solution(&self, status: LpStatus, iterations: usize) -> LpSolution {
        let values = self.x[..self.n].to_vec();
        let objective = match status {
            LpStatus::Optimal => self.primal_objective(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            values,
            objective,
            iterations,
        }
    }

    /// Sum of bound violations of the current basic solution.
    pub fn current_infeasibility(&self) -> f64 {
        self.infeasibility()
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Unit(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::relax;
    use proptest::prelude::*;

    #[test]
    fn single_variable_bound() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        m.add_constraint(vec![(x, 1.0)], Sense::Ge, 0.5).unwrap();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 0.5).abs() < 1e-12);
        assert!((s.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tight_sum() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        m.set_objective(vec![(x, 1.0), (y, 1.0)]).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0)
            .unwrap();
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        m.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0).unwrap();
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);

        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = m
            .add_continuous("y", f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        m.set_objective(vec![(x, -1.0)]).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Eq, 0.0)
            .unwrap();
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn rejects_integer_models() {
        let mut m = MilpModel::new();
        m.add_binary("b");
        assert_eq!(solve_lp(&m), Err(LpError::NotRelaxed(1)));
        assert!(solve_lp(&relax(&m)).is_ok());
    }

    #[test]
    fn equality_and_free_variables() {
        // min x + 2y  s.t. x + y = 3, x - y <= 1, y free, x in [0, 10]
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let y = m
            .add_continuous("y", f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        m.set_objective(vec![(x, 1.0), (y, 2.0)]).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0)
            .unwrap();
        m.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0)
            .unwrap();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 2.0).abs() < 1e-9);
        assert!((s.values[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn warm_resolve_after_bounds_and_rows() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        m.set_objective(vec![(x, 1.0), (y, 2.0)]).unwrap();
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0)
            .unwrap();
        let mut solver = SimplexSolver::new(&m);
        assert!((solver.solve().unwrap().objective - 1.0).abs() < 1e-12);
        solver.set_bounds(x, 0.0, 0.0);
        assert!((solver.solve().unwrap().objective - 2.0).abs() < 1e-12);
        solver.set_bounds(x, 0.0, 1.0);
        solver.add_row(&[(y, 1.0)], Sense::Ge, 0.5);
        let s = solver.solve().unwrap();
        assert!((s.objective - 1.5).abs() < 1e-12);
        solver.add_row(&[(x, 1.0)], Sense::Le, 0.25);
        let s = solver.solve().unwrap();
        assert!((s.objective - 1.75).abs() < 1e-12);
    }

    /// Random bounded LPs: min c x, A x >= b, 0 <= x <= u, with c >= 0 so the
    /// problem is bounded.
    fn random_model(seed: u64, rows: usize, cols: usize) -> MilpModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = MilpModel::new();
        let vars: Vec<VarId> = (0..cols)
            .map(|j| {
                m.add_continuous(format!("v{j}"), 0.0, rng.gen_range(1.0..4.0))
                    .unwrap()
            })
            .collect();
        m.set_objective(vars.iter().map(|&v| (v, rng.gen_range(0.0..5.0))).collect())
            .unwrap();
        for _ in 0..rows {
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for &v in &vars {
                if rng.gen_bool(0.5) {
                    coeffs.push((v, rng.gen_range(-1.0..2.0)));
                }
            }
            let sense = match rng.gen_range(0..3) {
                0 => Sense::Le,
                1 => Sense::Ge,
                _ => Sense::Eq,
            };
            m.add_constraint(coeffs, sense, rng.gen_range(-1.0..2.0))
                .unwrap();
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_solutions_pass_residual_check(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
            let model = random_model(seed, rows, cols);
            let s = solve_lp(&model).unwrap();
            if s.status == LpStatus::Optimal {
                prop_assert!(model.max_violation(&s.values) <= 1e-8);
                prop_assert!((model.objective_value(&s.values) - s.objective).abs() <= 1e-9);
            }
        }

        #[test]
        fn adding_a_row_never_lowers_the_optimum(seed in any::<u64>(), rows in 1usize..6, cols in 2usize..7) {
            let model = random_model(seed, rows + 1, cols);
            let mut smaller = MilpModel::new();
            for v in model.variables() {
                smaller.add_continuous(v.name.clone(), v.lower, v.upper).unwrap();
            }
            smaller.set_objective(model.objective().to_vec()).unwrap();
            for c in &model.constraints()[..rows] {
                smaller.add_constraint(c.coeffs.clone(), c.sense, c.rhs).unwrap();
            }
            let before = solve_lp(&smaller).unwrap();
            let after = solve_lp(&model).unwrap();
            if before.status == LpStatus::Optimal && after.status == LpStatus::Optimal {
                prop_assert!(after.objective >= before.objective - 1e-9);
            }
            if before.status == LpStatus::Infeasible {
                prop_assert_eq!(after.status, LpStatus::Infeasible);
            }

            // Same check through the warm-started path.
            let mut solver = SimplexSolver::new(&smaller);
            let warm_before = solver.solve().unwrap();
            let extra = &model.constraints()[rows];
            solver.add_row(&extra.coeffs, extra.sense, extra.rhs);
            let warm_after = solver.solve().unwrap();
            prop_assert_eq!(warm_after.status, after.status);
            if after.status == LpStatus::Optimal {
                prop_assert!((warm_after.objective - after.objective).abs() <= 1e-7);
                prop_assert!(warm_after.objective >= warm_before.objective - 1e-9);
            }
        }
    }
}
