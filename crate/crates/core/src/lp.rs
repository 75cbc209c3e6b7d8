//! Dense two-phase simplex.
//!
//! Programs are small (hundreds of rows and columns), so a dense tableau is
//! the simplest robust choice. Pricing is Dantzig's rule until the objective
//! stalls, then Bland's rule, which cannot cycle. Every returned point is
//! checked against the original program; if the check fails the basic
//! solution is recomputed by Gaussian elimination before giving up.

use std::fmt::Write as _;

use crate::error::LpError;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feas: f64,
    pub obj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feas: 1e-8, obj: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub sense: Sense,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
}

impl LinearProgram {
    /// A feasibility program over `num_vars` variables, each in `[0, ∞)`.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            sense: Sense::Feasibility,
            objective: Vec::new(),
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.num_vars += 1;
        self.lower.push(lower);
        self.upper.push(upper);
        self.num_vars - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, sense: Sense, objective: Vec<(usize, f64)>) {
        self.sense = sense;
        self.objective = objective;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::InvalidProgram(msg));
        if self.lower.len() != self.num_vars || self.upper.len() != self.num_vars {
            return bad("bound vectors do not match num_vars".into());
        }
        for j in 0..self.num_vars {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return bad(format!("variable {j} has bounds [{}, {}]", self.lower[j], self.upper[j]));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return bad(format!("variable {j} has an empty domain"));
            }
        }
        for &(j, c) in &self.objective {
            if j >= self.num_vars || !c.is_finite() {
                return bad(format!("objective entry ({j}, {c})"));
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return bad(format!("row {i} has rhs {}", con.rhs));
            }
            for &(j, c) in &con.coeffs {
                if j >= self.num_vars || !c.is_finite() {
                    return bad(format!("row {i} entry ({j}, {c})"));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any bound or row at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for con in &self.constraints {
            let lhs: f64 = con.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let v = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Ge => con.rhs - lhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// CPLEX LP text format, for cross-checking with external solvers.
    pub fn to_lp_text(&self) -> String {
        fn terms(coeffs: &[(usize, f64)]) -> String {
            if coeffs.is_empty() {
                return "0 x0".into();
            }
            let mut s = String::new();
            for (k, &(j, c)) in coeffs.iter().enumerate() {
                let sign = if c < 0.0 { "- " } else if k > 0 { "+ " } else { "" };
                let _ = write!(s, "{}{}{:e} x{}", if k > 0 { " " } else { "" }, sign, c.abs(), j);
            }
            s
        }
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Maximize => "Maximize\n",
            _ => "Minimize\n",
        });
        let _ = writeln!(out, " obj: {}", terms(&self.objective));
        out.push_str("Subject To\n");
        for (i, con) in self.constraints.iter().enumerate() {
            let rel = match con.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " c{i}: {} {rel} {:e}", terms(&con.coeffs), con.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {l:e} <= x{j} <= {u:e}");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{j} >= {l:e}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= x{j} <= {u:e}");
                }
                (false, false) => {
                    let _ = writeln!(out, " x{j} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

pub fn solve(p: &LinearProgram) -> Result<LpResult, LpError> {
    solve_with(p, &Tolerances::default())
}

/// Feasibility check ignoring the objective. Returns a witness when feasible.
pub fn check_feasible(p: &LinearProgram) -> Result<Option<Vec<f64>>, LpError> {
    check_feasible_with(p, &Tolerances::default())
}

pub fn check_feasible_with(p: &LinearProgram, tol: &Tolerances) -> Result<Option<Vec<f64>>, LpError> {
    let mut q = p.clone();
    q.sense = Sense::Feasibility;
    q.objective.clear();
    Ok(solve_with(&q, tol)?.solution)
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StdForm {
    /// Row-major `m × n` constraint matrix over structural, slack and artificial columns.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Columns at or beyond this index are artificial.
    art_start: usize,
    n: usize,
    basis: Vec<usize>,
    vars: Vec<VarMap>,
    cost: Vec<f64>,
}

fn standard_form(p: &LinearProgram) -> StdForm {
    let mut vars = Vec::with_capacity(p.num_vars);
    let mut n_struct = 0;
    // (col, upper) pairs turned into rows
    let mut ub_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..p.num_vars {
        let (l, u) = (p.lower[j], p.upper[j]);
        let map = if l == u {
            VarMap { offset: l, cols: vec![] }
        } else if l.is_finite() {
            let c = n_struct;
            n_struct += 1;
            if u.is_finite() {
                ub_rows.push((c, u - l));
            }
            VarMap { offset: l, cols: vec![(c, 1.0)] }
        } else if u.is_finite() {
            let c = n_struct;
            n_struct += 1;
            VarMap { offset: u, cols: vec![(c, -1.0)] }
        } else {
            let c = n_struct;
            n_struct += 2;
            VarMap { offset: 0.0, cols: vec![(c, 1.0), (c + 1, -1.0)] }
        };
        vars.push(map);
    }

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for con in &p.constraints {
        let mut row = vec![0.0; n_struct];
        let mut rhs = con.rhs;
        for &(j, c) in &con.coeffs {
            rhs -= c * vars[j].offset;
            for &(col, s) in &vars[j].cols {
                row[col] += c * s;
            }
        }
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            // constant row: keep it so phase 1 can report infeasibility
            rows.push((row, con.relation, rhs));
            continue;
        }
        row.iter_mut().for_each(|v| *v /= scale);
        rows.push((row, con.relation, rhs / scale));
    }
    for (col, ub) in ub_rows {
        let mut row = vec![0.0; n_struct];
        row[col] = 1.0;
        rows.push((row, Relation::Le, ub));
    }
    for r in rows.iter_mut() {
        // homogeneous `≥` rows flip too, so they start with a slack basis
        if r.2 < 0.0 || (r.2 == 0.0 && r.1 == Relation::Ge) {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n_struct + n_slack;
    let n = art_start + n_art;
    let m = rows.len();
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n_struct, art_start);
    for (row, rel, rhs) in rows {
        let mut full = row;
        full.resize(n, 0.0);
        match rel {
            Relation::Le => {
                full[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                full[next_slack] = -1.0;
                next_slack += 1;
                full[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                full[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        a.push(full);
        b.push(rhs);
    }

    let mut cost = vec![0.0; n];
    let sign = match p.sense {
        Sense::Maximize => -1.0,
        _ => 1.0,
    };
    if p.sense != Sense::Feasibility {
        for &(j, c) in &p.objective {
            for &(col, s) in &vars[j].cols {
                cost[col] += sign * c * s;
            }
        }
    }
    StdForm {
        a,
        b,
        art_start,
        n,
        basis,
        vars,
        cost,
    }
}

/// Pivots between rebuilds of the tableau from the original data.
const REINVERT_EVERY: usize = 100;

struct Tableau {
    m: usize,
    width: usize,
    /// Standard-form row behind each tableau row.
    rows: Vec<usize>,
    /// `m` rows of `n + 1` entries, the last being the right-hand side.
    t: Vec<f64>,
    /// Reduced costs, last entry is minus the current objective.
    d: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    bland: bool,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn new(sf: &StdForm) -> Self {
        let m = sf.a.len();
        let width = sf.n + 1;
        let mut t = Vec::with_capacity(m * width);
        for i in 0..m {
            t.extend_from_slice(&sf.a[i]);
            t.push(sf.b[i]);
        }
        Tableau {
            m,
            width,
            rows: (0..m).collect(),
            t,
            d: vec![0.0; width],
            basis: sf.basis.clone(),
            iterations: 0,
            bland: false,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let n = self.width - 1;
        self.d[..n].copy_from_slice(cost);
        self.d[n] = 0.0;
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.width {
                    self.d[j] -= cb * self.t[i * self.width + j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let piv = self.t[r * w + q];
        for j in 0..w {
            self.t[r * w + j] /= piv;
        }
        self.t[r * w + q] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[q] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        eliminate(&mut self.d);
        self.basis[r] = q;
        self.iterations += 1;
    }

    /// Rebuilds `B⁻¹[A | b]` for the current basis by Gauss-Jordan elimination
    /// with partial pivoting. Leaves the tableau alone if `B` looks singular.
    fn reinvert(&mut self, sf: &StdForm, cost: &[f64]) {
        let (m, w) = (self.m, self.width);
        let mut mat: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|&i| {
                let mut r: Vec<f64> = self.basis.iter().map(|&c| sf.a[i][c]).collect();
                r.extend_from_slice(&sf.a[i]);
                r.push(sf.b[i]);
                r
            })
            .collect();
        for k in 0..m {
            let Some(p) = (k..m).max_by(|&a, &b| mat[a][k].abs().total_cmp(&mat[b][k].abs())) else {
                return;
            };
            if mat[p][k].abs() < 1e-11 {
                return;
            }
            mat.swap(k, p);
            let piv = mat[k][k];
            mat[k].iter_mut().for_each(|v| *v /= piv);
            let prow = mat[k].clone();
            for (i, row) in mat.iter_mut().enumerate() {
                let f = row[k];
                if i != k && f != 0.0 {
                    row.iter_mut().zip(&prow).for_each(|(x, &p)| *x -= f * p);
                }
            }
        }
        for (i, row) in mat.iter().enumerate() {
            self.t[i * w..(i + 1) * w].copy_from_slice(&row[m..]);
        }
        for (i, &c) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.t[k * w + c] = if k == i { 1.0 } else { 0.0 };
            }
        }
        self.set_costs(cost);
    }

    /// Minimizes `cost` over columns `< active`.
    fn run(&mut self, sf: &StdForm, cost: &[f64], active: usize, max_iter: usize) -> Result<Outcome, LpError> {
        self.set_costs(cost);
        let mut best = f64::INFINITY;
        let mut stall = 0;
        let mut since = 0;
        loop {
            if since >= REINVERT_EVERY {
                self.reinvert(sf, cost);
                since = 0;
            }
            if self.iterations >= max_iter {
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    reason: "iteration limit reached".into(),
                });
            }
            let q = if self.bland {
                (0..active).find(|&j| self.d[j] < -COST_TOL)
            } else {
                let mut q = None;
                let mut most = -COST_TOL;
                for j in 0..active {
                    if self.d[j] < most {
                        most = self.d[j];
                        q = Some(j);
                    }
                }
                q
            };
            let Some(q) = q else { return Ok(Outcome::Optimal) };

            let mut r: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match r {
                        None => true,
                        Some(k) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if self.bland {
                                    self.basis[i] < self.basis[k]
                                } else {
                                    a > self.at(k, q)
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        r = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = r else { return Ok(Outcome::Unbounded) };
            self.pivot(r, q);
            since += 1;

            let obj = -self.d[self.width - 1];
            if obj < best - 1e-12 {
                best = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    self.bland = true;
                }
            }
        }
    }

    fn column_values(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for i in 0..self.m {
            if self.basis[i] < n {
                x[self.basis[i]] = self.rhs(i).max(0.0);
            }
        }
        x
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width;
        self.t.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.rows.remove(i);
        self.m -= 1;
    }
}

fn recover(vars: &[VarMap], cols: &[f64]) -> Vec<f64> {
    vars.iter()
        .map(|v| v.offset + v.cols.iter().map(|&(c, s)| s * cols[c]).sum::<f64>())
        .collect()
}

/// Recomputes basic values by solving `B x_B = b` with partial pivoting.
fn refine(sf: &StdForm, rows: &[usize], basis: &[usize]) -> Option<Vec<f64>> {
    let m = rows.len();
    let mut mat: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let mut r: Vec<f64> = basis.iter().map(|&c| sf.a[i][c]).collect();
            r.push(sf.b[i]);
            r
        })
        .collect();
    for k in 0..m {
        let p = (k..m).max_by(|&a, &b| mat[a][k].abs().total_cmp(&mat[b][k].abs()))?;
        if mat[p][k].abs() < 1e-12 {
            return None;
        }
        mat.swap(k, p);
        for i in 0..m {
            if i != k {
                let f = mat[i][k] / mat[k][k];
                if f != 0.0 {
                    for j in k..=m {
                        mat[i][j] -= f * mat[k][j];
                    }
                }
            }
        }
    }
    let mut x = vec![0.0; sf.n];
    for k in 0..m {
        x[basis[k]] = (mat[k][m] / mat[k][k]).max(0.0);
    }
    Some(x)
}

pub fn solve_with(p: &LinearProgram, tol: &Tolerances) -> Result<LpResult, LpError> {
    p.validate()?;
    let sf = standard_form(p);
    let mut tab = Tableau::new(&sf);
    let max_iter = 50_000 + 50 * (tab.m + sf.n);

    // phase 1
    let mut phase1 = vec![0.0; sf.n];
    phase1[sf.art_start..].iter_mut().for_each(|c| *c = 1.0);
    tab.run(&sf, &phase1, sf.n, max_iter)?;
    let infeas = -tab.d[tab.width - 1];
    if infeas > tol.feas {
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            solution: None,
            objective_value: None,
        });
    }

    // drive artificials out of the basis; drop rows that are redundant
    let mut i = 0;
    while i < tab.m {
        if tab.basis[i] >= sf.art_start {
            let q = (0..sf.art_start).max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            match q {
                Some(q) if tab.at(i, q).abs() > PIVOT_TOL => {
                    tab.pivot(i, q);
                    i += 1;
                }
                _ => tab.remove_row(i),
            }
        } else {
            i += 1;
        }
    }

    tab.bland = false;
    let outcome = if p.sense == Sense::Feasibility {
        Outcome::Optimal
    } else {
        tab.run(&sf, &sf.cost, sf.art_start, max_iter)?
    };
    if let Outcome::Unbounded = outcome {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            solution: None,
            objective_value: None,
        });
    }

    let mut x = recover(&sf.vars, &tab.column_values(sf.n));
    if p.max_violation(&x) > tol.feas {
        let refined = refine(&sf, &tab.rows, &tab.basis).map(|cols| recover(&sf.vars, &cols));
        match refined {
            Some(y) if p.max_violation(&y) <= tol.feas => x = y,
            _ => {
                return Err(LpError::NumericalFailure {
                    iterations: tab.iterations,
                    reason: format!("basic solution violates constraints by {:e}", p.max_violation(&x)),
                })
            }
        }
    }
    let (status, objective_value) = match p.sense {
        Sense::Feasibility => (LpStatus::Feasible, None),
        _ => (LpStatus::Optimal, Some(p.objective_at(&x))),
    };
    Ok(LpResult {
        status,
        solution: Some(x),
        objective_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(p: &LinearProgram) -> (f64, Vec<f64>) {
        let r = solve(p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        (r.objective_value.unwrap(), r.solution.unwrap())
    }

    #[test]
    fn max_single_var() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![(0, 1.0)], Relation::Le, 3.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0)]);
        let (v, x) = opt(&p);
        assert!((v - 3.0).abs() < 1e-9 && (x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_rows_are_infeasible() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![(0, 1.0)], Relation::Le, 0.0);
        p.add_constraint(vec![(0, 1.0)], Relation::Ge, 1.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0)]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn simplex_sum() {
        let mut p = LinearProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0), (1, 1.0)]);
        assert!((opt(&p).0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_detected() {
        let mut p = LinearProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0)]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn feasibility_without_rows() {
        let mut p = LinearProgram::new(1);
        p.set_bounds(0, 0.0, 1.0);
        let w = check_feasible(&p).unwrap().unwrap();
        assert!((0.0..=1.0).contains(&w[0]));
    }

    #[test]
    fn equalities_conflict() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![(0, 1.0)], Relation::Eq, 0.0);
        p.add_constraint(vec![(0, 1.0)], Relation::Eq, 1.0);
        assert_eq!(check_feasible(&p).unwrap(), None);
    }

    #[test]
    fn free_and_fixed_variables() {
        // min x0 + x1 with x0 free, x1 fixed at 2, x0 >= -5 via a row
        let mut p = LinearProgram::new(2);
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        p.set_bounds(1, 2.0, 2.0);
        p.add_constraint(vec![(0, 1.0)], Relation::Ge, -5.0);
        p.set_objective(Sense::Minimize, vec![(0, 1.0), (1, 1.0)]);
        let (v, x) = opt(&p);
        assert!((v + 3.0).abs() < 1e-9);
        assert!((x[0] + 5.0).abs() < 1e-9 && x[1] == 2.0);
    }

    #[test]
    fn upper_bounded_and_negative_lower() {
        // max x0 - x1 with x0 in [-1, 4], x1 in (-inf, 3], x1 >= -2 via a row
        let mut p = LinearProgram::new(2);
        p.set_bounds(0, -1.0, 4.0);
        p.set_bounds(1, f64::NEG_INFINITY, 3.0);
        p.add_constraint(vec![(1, 1.0)], Relation::Ge, -2.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0), (1, -1.0)]);
        assert!((opt(&p).0 - 6.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LinearProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        p.add_constraint(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 2.0);
        p.set_objective(Sense::Maximize, vec![(0, 3.0), (1, 1.0)]);
        assert!((opt(&p).0 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance; optimum 1/20 at x = (1/25, 0, 1, 0)
        let mut p = LinearProgram::new(4);
        p.add_constraint(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        p.add_constraint(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        p.add_constraint(vec![(2, 1.0)], Relation::Le, 1.0);
        p.set_objective(Sense::Maximize, vec![(0, 0.75), (1, -150.0), (2, 0.02), (3, -6.0)]);
        assert!((opt(&p).0 - 0.05).abs() < 1e-9);
    }

    #[test]
    fn constant_row_violation() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![], Relation::Ge, 1.0);
        assert_eq!(check_feasible(&p).unwrap(), None);
    }

    #[test]
    fn rejects_bad_index() {
        let mut p = LinearProgram::new(1);
        p.add_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve(&p), Err(LpError::InvalidProgram(_))));
    }

    #[test]
    fn lp_text_mentions_rows() {
        let mut p = LinearProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, -2.0)], Relation::Le, 1.0);
        p.set_objective(Sense::Maximize, vec![(0, 1.0)]);
        let s = p.to_lp_text();
        assert!(s.starts_with("Maximize"));
        assert!(s.contains("c0: 1e0 x0 - 2e0 x1 <= 1e0"), "{s}");
    }
}
