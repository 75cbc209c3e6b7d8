//! Backward induction over inducible value polytopes.
//!
//! For every step `h` and state-action key `o` the set of value vectors the
//! principal can induce from `(h, o)` onward is described by a linear system
//! in the one-step policy `ϖ`, the onward values and auxiliary deviation
//! bounds `y`. Two equivalent encodings are provided:
//!
//! - [`assemble_constraints`] builds the textbook system with one scaled
//!   onward vector `z(σ̄)` per step interaction, bounded by the next
//!   polytope's halfspaces. Its size is `2|Σ̄|` onward variables, which is
//!   only practical for tiny models; it is kept as the reference encoding.
//! - [`assemble_compact`] is what the DP uses. Onward values of truthful
//!   interactions are written as nonnegative combinations `μ` of the next
//!   polytope's vertices, aggregated over the principal's observation (exact
//!   by convexity). Onward values after a deviation only ever appear on the
//!   deviation side of the IC rows, so they are pinned to the next
//!   polytope's punishment vertex (lowest agent value). Both encodings have
//!   the same projection onto `v`.
//!
//! IC rows are multiplied through by the marginal of the agent's observation,
//! so zero-probability observations contribute the vacuous row `0 ≥ 0`.
//!
//! The same assembly also produces the three-coordinate variant used by the
//! learner, whose vectors are `(v^P, v^A, v_*^A)` with `v_*^A` an upper bound
//! on the agent's best attainable value; that variant has no IC rows.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Owner, Point2, Point3, ValuePolytope};
use crate::lp::{self, Constraint, LinearProgram, LpStatus, Relation, Sense, Tolerances};
use crate::model::{Dims, GameModel, StateActionKey};

/// Slack when deciding whether a slice line meets the principal-value range.
const RANGE_SLACK: f64 = 1e-9;
/// Secondary objectives keep the primary optimum within this margin.
pub const LEX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Compact,
    Full,
}

/// Vertex weights for the onward value of the truthful interactions with
/// state `state`, agent observation `agent_obs` and joint action `joint`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuBlock {
    pub state: usize,
    pub agent_obs: usize,
    pub joint: usize,
    /// Index of the next key among the step's non-root keys.
    pub next: usize,
    pub start: usize,
    pub len: usize,
}

/// Linear system whose feasible `v`-projection is the inducible set at `(h, o)`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub h: usize,
    pub key: StateActionKey,
    pub dimension: usize,
    pub form: Form,
    pub lp: LinearProgram,
    /// Value-vector variables, one per coordinate.
    pub v: Vec<usize>,
    pub mu_blocks: Vec<MuBlock>,
    dims: Dims,
    varpi_base: usize,
    y_base: usize,
    z_base: Option<usize>,
}

impl ConstraintSystem {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Variable of `ϖ(a | ω^P, ω̃^A)`.
    pub fn varpi_index(&self, principal_obs: usize, reported_obs: usize, joint: usize) -> usize {
        self.varpi_base + (principal_obs * self.dims.agent_obs + reported_obs) * self.dims.joint_actions() + joint
    }

    pub fn num_varpi(&self) -> usize {
        self.dims.principal_obs * self.dims.agent_obs * self.dims.joint_actions()
    }

    pub fn num_y(&self) -> usize {
        self.dims.agent_actions * self.dims.agent_obs * self.dims.agent_obs
    }

    /// Number of scaled onward-value variables; zero in the compact form.
    pub fn num_z(&self) -> usize {
        match self.z_base {
            Some(_) => 2 * self.dims.interactions(),
            None => 0,
        }
    }

    pub fn y_index(&self, agent_action: usize, agent_obs: usize, reported_obs: usize) -> usize {
        self.y_base + (agent_action * self.dims.agent_obs + agent_obs) * self.dims.agent_obs + reported_obs
    }

    /// Optimizes `objective` with the value coordinates in `fixed` pinned.
    pub fn optimize(
        &self,
        sense: Sense,
        objective: Vec<(usize, f64)>,
        fixed: &[(usize, f64)],
        extra: &[Constraint],
        tol: &Tolerances,
    ) -> Result<Option<Vec<f64>>> {
        let mut p = self.lp.clone();
        for &(k, val) in fixed {
            p.set_bounds(self.v[k], val, val);
        }
        p.constraints.extend_from_slice(extra);
        p.set_objective(sense, objective);
        let r = lp::solve_with(&p, tol).map_err(|source| Error::Lp {
            h: self.h,
            key: self.key,
            source,
        })?;
        match r.status {
            LpStatus::Optimal | LpStatus::Feasible => Ok(r.solution),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Lp {
                h: self.h,
                key: self.key,
                source: crate::LpError::NumericalFailure {
                    iterations: 0,
                    reason: "value program reported unbounded despite bounded variables".into(),
                },
            }),
        }
    }

    /// Value vector of an LP solution.
    pub fn value_of(&self, x: &[f64]) -> Vec<f64> {
        self.v.iter().map(|&i| x[i]).collect()
    }

    /// Feasibility witness with `v` fixed to `target`.
    pub fn check_point(&self, target: &[f64], tol: &Tolerances) -> Result<Option<Vec<f64>>> {
        let fixed: Vec<(usize, f64)> = target.iter().copied().enumerate().collect();
        self.optimize(Sense::Feasibility, vec![], &fixed, &[], tol)
    }
}

/// Accumulates sparse row coefficients in a deterministic order.
#[derive(Default)]
struct Row(BTreeMap<usize, f64>);

impl Row {
    fn add(&mut self, var: usize, c: f64) {
        if c != 0.0 {
            *self.0.entry(var).or_insert(0.0) += c;
        }
    }

    fn push(self, lp: &mut LinearProgram, rel: Relation, rhs: f64) {
        let coeffs = self.0.into_iter().filter(|&(_, c)| c != 0.0).collect();
        lp.add_constraint(coeffs, rel, rhs);
    }
}

/// Resolves the next-step polytopes. The last step's sets are the origin and
/// may be omitted by the caller.
fn next_sets(m: &GameModel, h: usize, next: &[ValuePolytope], dimension: usize) -> Result<Vec<ValuePolytope>> {
    let dims = m.dims();
    if h == m.horizon || (next.is_empty() && h + 1 == m.horizon) {
        let origin = vec![0.0; dimension];
        return Ok((0..dims.pairs())
            .map(|i| {
                ValuePolytope::point(
                    &origin,
                    Owner {
                        h: h + 1,
                        o: StateActionKey::from_index(&dims, i),
                    },
                )
            })
            .collect());
    }
    for i in 0..dims.pairs() {
        let ok = next.get(i).is_some_and(|p| !p.vertices.is_empty() && p.dimension == dimension);
        if !ok {
            return Err(Error::MissingPolytope {
                h: h + 1,
                key: StateActionKey::from_index(&dims, i),
            });
        }
    }
    Ok(next.to_vec())
}

fn check_step(m: &GameModel, h: usize, key: StateActionKey) -> Result<()> {
    if h == 0 || h > m.horizon || !m.check_key(h, key) {
        return Err(Error::InvalidArgument(format!("no system for step {h} and key {key}")));
    }
    Ok(())
}

/// The reference encoding: one `z(σ̄) ∈ ℝ²` per step interaction, bounded by
/// `H z(σ̄) ≤ ϖ(a | ω^P, ω̃^A) b` for the polytope of `(s, a^P, ã^A)`.
pub fn assemble_constraints(m: &GameModel, h: usize, key: StateActionKey, next: &[ValuePolytope]) -> Result<ConstraintSystem> {
    check_step(m, h, key)?;
    let next = next_sets(m, h, next, 2)?;
    let dims = m.dims();
    let (n_op, n_oa, n_a, n_aa) = (dims.principal_obs, dims.agent_obs, dims.joint_actions(), dims.agent_actions);
    let big_h = m.horizon as f64;
    let q = m.outcome_dist(h, key);

    let mut lp = LinearProgram::new(0);
    let v: Vec<usize> = (0..2).map(|_| lp.add_var(0.0, big_h)).collect();
    let varpi_base = lp.num_vars;
    for _ in 0..n_op * n_oa * n_a {
        lp.add_var(0.0, f64::INFINITY);
    }
    let y_base = lp.num_vars;
    for _ in 0..n_aa * n_oa * n_oa {
        lp.add_var(0.0, f64::INFINITY);
    }
    let z_base = lp.num_vars;
    for _ in 0..2 * dims.interactions() {
        lp.add_var(f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut sys = ConstraintSystem {
        h,
        key,
        dimension: 2,
        form: Form::Full,
        lp,
        v,
        mu_blocks: Vec::new(),
        dims,
        varpi_base,
        y_base,
        z_base: Some(z_base),
    };
    let sigma = |s: usize, op: usize, oa: usize, or: usize, a: usize, played: usize| {
        ((((s * n_op + op) * n_oa + oa) * n_oa + or) * n_a + a) * n_aa + played
    };
    let z = |idx: usize, k: usize| z_base + 2 * idx + k;
    let mut rows: Vec<(Row, Relation, f64)> = Vec::new();

    for op in 0..n_op {
        for or in 0..n_oa {
            let mut row = Row::default();
            for a in 0..n_a {
                row.add(sys.varpi_index(op, or, a), 1.0);
            }
            rows.push((row, Relation::Eq, 1.0));
        }
    }
    for k in 0..2 {
        let mut row = Row::default();
        row.add(sys.v[k], 1.0);
        for s in 0..dims.states {
            for op in 0..n_op {
                for oa in 0..n_oa {
                    let p = q[dims.outcome(s, op, oa)];
                    if p == 0.0 {
                        continue;
                    }
                    for a in 0..n_a {
                        let (ap, aa) = dims.split_joint(a);
                        let r = m.rewards(h, s, ap, aa)[k];
                        row.add(sys.varpi_index(op, oa, a), -p * r);
                        row.add(z(sigma(s, op, oa, oa, a, aa), k), -p);
                    }
                }
            }
        }
        rows.push((row, Relation::Eq, 0.0));
    }
    for oa in 0..n_oa {
        for ot in 0..n_oa {
            let mut row = Row::default();
            for s in 0..dims.states {
                for op in 0..n_op {
                    let p = q[dims.outcome(s, op, oa)];
                    if p == 0.0 {
                        continue;
                    }
                    for a in 0..n_a {
                        let (ap, aa) = dims.split_joint(a);
                        row.add(sys.varpi_index(op, oa, a), p * m.rewards(h, s, ap, aa)[1]);
                        row.add(z(sigma(s, op, oa, oa, a, aa), 1), p);
                    }
                }
            }
            for aa in 0..n_aa {
                row.add(sys.y_index(aa, oa, ot), -1.0);
            }
            rows.push((row, Relation::Ge, 0.0));
        }
    }
    for aa in 0..n_aa {
        for oa in 0..n_oa {
            for ot in 0..n_oa {
                for played in 0..n_aa {
                    let mut row = Row::default();
                    row.add(sys.y_index(aa, oa, ot), 1.0);
                    for s in 0..dims.states {
                        for op in 0..n_op {
                            let p = q[dims.outcome(s, op, oa)];
                            if p == 0.0 {
                                continue;
                            }
                            for ap in 0..dims.principal_actions {
                                let a = dims.joint(ap, aa);
                                row.add(sys.varpi_index(op, ot, a), -p * m.rewards(h, s, ap, played)[1]);
                                row.add(z(sigma(s, op, oa, ot, a, played), 1), -p);
                            }
                        }
                    }
                    rows.push((row, Relation::Ge, 0.0));
                }
            }
        }
    }
    for s in 0..dims.states {
        for op in 0..n_op {
            for oa in 0..n_oa {
                for or in 0..n_oa {
                    for a in 0..n_a {
                        let (ap, _) = dims.split_joint(a);
                        for played in 0..n_aa {
                            let poly = &next[s * n_a + dims.joint(ap, played)];
                            let idx = sigma(s, op, oa, or, a, played);
                            for (hr, &b) in poly.h.iter().zip(&poly.b) {
                                let mut row = Row::default();
                                row.add(z(idx, 0), hr[0]);
                                row.add(z(idx, 1), hr[1]);
                                row.add(sys.varpi_index(op, or, a), -b);
                                rows.push((row, Relation::Le, 0.0));
                            }
                        }
                    }
                }
            }
        }
    }
    for (row, rel, rhs) in rows {
        row.push(&mut sys.lp, rel, rhs);
    }
    Ok(sys)
}

/// The vertex-weight encoding used by the DP; `dimension` is 2 for the IC
/// system and 3 for the learner's attainable-value variant.
pub fn assemble_compact(
    m: &GameModel,
    h: usize,
    key: StateActionKey,
    next: &[ValuePolytope],
    dimension: usize,
) -> Result<ConstraintSystem> {
    assert!(dimension == 2 || dimension == 3, "dimension must be 2 or 3");
    check_step(m, h, key)?;
    let next = next_sets(m, h, next, dimension)?;
    let dims = m.dims();
    let (n_op, n_oa, n_a, n_aa) = (dims.principal_obs, dims.agent_obs, dims.joint_actions(), dims.agent_actions);
    let big_h = m.horizon as f64;
    let q = m.outcome_dist(h, key);
    // coordinate carrying the agent-side quantity for deviations
    let ac = dimension - 1;

    let mut lp = LinearProgram::new(0);
    let v: Vec<usize> = (0..dimension).map(|_| lp.add_var(0.0, big_h)).collect();
    let varpi_base = lp.num_vars;
    for _ in 0..n_op * n_oa * n_a {
        lp.add_var(0.0, f64::INFINITY);
    }
    let y_base = lp.num_vars;
    for _ in 0..n_aa * n_oa * n_oa {
        lp.add_var(0.0, f64::INFINITY);
    }
    let u_base = lp.num_vars;
    if dimension == 3 {
        for _ in 0..n_oa {
            lp.add_var(0.0, f64::INFINITY);
        }
    }
    let mut mu_blocks = Vec::new();
    for s in 0..dims.states {
        for oa in 0..n_oa {
            let mass: f64 = (0..n_op).map(|op| q[dims.outcome(s, op, oa)]).sum();
            if mass <= 0.0 {
                continue;
            }
            for a in 0..n_a {
                let next_idx = s * n_a + a;
                let len = next[next_idx].vertices.len();
                let start = lp.num_vars;
                for _ in 0..len {
                    lp.add_var(0.0, f64::INFINITY);
                }
                mu_blocks.push(MuBlock {
                    state: s,
                    agent_obs: oa,
                    joint: a,
                    next: next_idx,
                    start,
                    len,
                });
            }
        }
    }
    let mut sys = ConstraintSystem {
        h,
        key,
        dimension,
        form: Form::Compact,
        lp,
        v,
        mu_blocks,
        dims,
        varpi_base,
        y_base,
        z_base: None,
    };
    let pun = |s: usize, ap: usize, played: usize| next[s * n_a + dims.joint(ap, played)].min_vertex(ac)[ac];
    let mut rows: Vec<(Row, Relation, f64)> = Vec::new();

    for op in 0..n_op {
        for or in 0..n_oa {
            let mut row = Row::default();
            for a in 0..n_a {
                row.add(sys.varpi_index(op, or, a), 1.0);
            }
            rows.push((row, Relation::Eq, 1.0));
        }
    }
    for blk in &sys.mu_blocks {
        let mut row = Row::default();
        for j in 0..blk.len {
            row.add(blk.start + j, 1.0);
        }
        for op in 0..n_op {
            row.add(sys.varpi_index(op, blk.agent_obs, blk.joint), -q[dims.outcome(blk.state, op, blk.agent_obs)]);
        }
        rows.push((row, Relation::Eq, 0.0));
    }
    for k in 0..2 {
        let mut row = Row::default();
        row.add(sys.v[k], 1.0);
        for s in 0..dims.states {
            for op in 0..n_op {
                for oa in 0..n_oa {
                    let p = q[dims.outcome(s, op, oa)];
                    for a in 0..n_a {
                        let (ap, aa) = dims.split_joint(a);
                        row.add(sys.varpi_index(op, oa, a), -p * m.rewards(h, s, ap, aa)[k]);
                    }
                }
            }
        }
        for blk in &sys.mu_blocks {
            for (j, vert) in next[blk.next].vertices.iter().enumerate() {
                row.add(blk.start + j, -vert[k]);
            }
        }
        rows.push((row, Relation::Eq, 0.0));
    }
    for oa in 0..n_oa {
        if dimension == 2 {
            for ot in 0..n_oa {
                let mut row = Row::default();
                for s in 0..dims.states {
                    for op in 0..n_op {
                        let p = q[dims.outcome(s, op, oa)];
                        for a in 0..n_a {
                            let (ap, aa) = dims.split_joint(a);
                            row.add(sys.varpi_index(op, oa, a), p * m.rewards(h, s, ap, aa)[1]);
                        }
                    }
                }
                for blk in sys.mu_blocks.iter().filter(|b| b.agent_obs == oa) {
                    for (j, vert) in next[blk.next].vertices.iter().enumerate() {
                        row.add(blk.start + j, vert[1]);
                    }
                }
                for aa in 0..n_aa {
                    row.add(sys.y_index(aa, oa, ot), -1.0);
                }
                rows.push((row, Relation::Ge, 0.0));
            }
        } else {
            for ot in 0..n_oa {
                let mut row = Row::default();
                row.add(u_base + oa, 1.0);
                for aa in 0..n_aa {
                    row.add(sys.y_index(aa, oa, ot), -1.0);
                }
                rows.push((row, Relation::Ge, 0.0));
            }
        }
    }
    if dimension == 3 {
        let mut row = Row::default();
        row.add(sys.v[2], 1.0);
        for oa in 0..n_oa {
            row.add(u_base + oa, -1.0);
        }
        rows.push((row, Relation::Ge, 0.0));
    }
    for aa in 0..n_aa {
        for oa in 0..n_oa {
            for ot in 0..n_oa {
                for played in 0..n_aa {
                    let truthful = ot == oa && played == aa;
                    let mut row = Row::default();
                    row.add(sys.y_index(aa, oa, ot), 1.0);
                    for s in 0..dims.states {
                        for op in 0..n_op {
                            let p = q[dims.outcome(s, op, oa)];
                            if p == 0.0 {
                                continue;
                            }
                            for ap in 0..dims.principal_actions {
                                let mut c = m.rewards(h, s, ap, played)[1];
                                if !truthful {
                                    c += pun(s, ap, played);
                                }
                                row.add(sys.varpi_index(op, ot, dims.joint(ap, aa)), -p * c);
                            }
                        }
                    }
                    if truthful {
                        for blk in sys.mu_blocks.iter().filter(|b| b.agent_obs == oa && dims.split_joint(b.joint).1 == aa) {
                            for (j, vert) in next[blk.next].vertices.iter().enumerate() {
                                row.add(blk.start + j, -vert[ac]);
                            }
                        }
                    }
                    rows.push((row, Relation::Ge, 0.0));
                }
            }
        }
    }
    for (row, rel, rhs) in rows {
        row.push(&mut sys.lp, rel, rhs);
    }
    Ok(sys)
}

/// Where a point of a slice set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    SliceMin,
    SliceMax,
    AgentMin,
    AgentMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPoint {
    pub value: Point2,
    pub tag: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet {
    pub delta: f64,
    pub slice_values: Vec<f64>,
    pub points: Vec<TaggedPoint>,
}

impl SliceSet {
    pub fn values(&self) -> Vec<Point2> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// `(min v^A, max v^A)` found on slice `w`, if that slice was feasible.
    pub fn slice_extremes(&self, w: f64) -> Option<(f64, f64)> {
        let lo = self.points.iter().find(|p| p.tag == Provenance::SliceMin && p.value[0] == w)?;
        let hi = self.points.iter().find(|p| p.tag == Provenance::SliceMax && p.value[0] == w)?;
        Some((lo.value[1], hi.value[1]))
    }
}

/// `{0, δ, 2δ, …}` below `H`, then `H` itself.
pub fn slice_values(delta: f64, horizon: usize) -> Vec<f64> {
    let big_h = horizon as f64;
    let n = (big_h / delta - 1e-9).ceil() as usize;
    let mut w: Vec<f64> = (0..n).map(|i| i as f64 * delta).filter(|&w| w < big_h - 1e-12).collect();
    w.push(big_h);
    w
}

/// Principal-value slicing of a 2D system: agent extremes along each line
/// `v^P = w`, plus the global agent extremes.
pub fn slice_polytope(sys: &ConstraintSystem, delta: f64, horizon: usize, tol: &Tolerances) -> Result<SliceSet> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("slice spacing must be positive, got {delta}")));
    }
    let (vp, va) = (sys.v[0], sys.v[1]);
    let mut points = Vec::new();
    let point = |x: &[f64]| [x[vp], x[va]];
    for (sense, tag) in [(Sense::Minimize, Provenance::AgentMin), (Sense::Maximize, Provenance::AgentMax)] {
        if let Some(x) = sys.optimize(sense, vec![(va, 1.0)], &[], &[], tol)? {
            points.push(TaggedPoint { value: point(&x), tag });
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInducibleSet { h: sys.h, key: sys.key });
    }
    let lo = sys.optimize(Sense::Minimize, vec![(vp, 1.0)], &[], &[], tol)?.map(|x| x[vp]);
    let hi = sys.optimize(Sense::Maximize, vec![(vp, 1.0)], &[], &[], tol)?.map(|x| x[vp]);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::EmptyInducibleSet { h: sys.h, key: sys.key });
    };
    let ws = slice_values(delta, horizon);
    for &w in &ws {
        if w < lo - RANGE_SLACK || w > hi + RANGE_SLACK {
            continue;
        }
        for (sense, tag) in [(Sense::Minimize, Provenance::SliceMin), (Sense::Maximize, Provenance::SliceMax)] {
            if let Some(x) = sys.optimize(sense, vec![(va, 1.0)], &[(0, w)], &[], tol)? {
                points.push(TaggedPoint { value: point(&x), tag });
            }
        }
    }
    Ok(SliceSet {
        delta,
        slice_values: ws,
        points,
    })
}

/// Knobs for [`build_with`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub tol: Tolerances,
    /// Also slice the root system. Only needed for inspection; the root
    /// optimum is read from the unsliced system.
    pub include_root: bool,
    pub parallel: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            tol: Tolerances::default(),
            include_root: true,
            parallel: true,
        }
    }
}

/// Value polytopes for steps `2..=H` (all keys) and optionally the root.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeMap {
    pub horizon: usize,
    pub dimension: usize,
    pub epsilon: f64,
    pub delta: f64,
    layers: Vec<Vec<ValuePolytope>>,
    pub root: Option<ValuePolytope>,
}

impl PolytopeMap {
    pub fn new(horizon: usize, dimension: usize, epsilon: f64, delta: f64, layers: Vec<Vec<ValuePolytope>>, root: Option<ValuePolytope>) -> Self {
        assert_eq!(layers.len(), horizon.saturating_sub(1));
        PolytopeMap {
            horizon,
            dimension,
            epsilon,
            delta,
            layers,
            root,
        }
    }

    /// Polytopes of step `h ≥ 2`, indexed by key index.
    pub fn layer(&self, h: usize) -> &[ValuePolytope] {
        &self.layers[h - 2]
    }

    /// Polytopes feeding the system at step `h` (empty at the last step).
    pub fn next_of(&self, h: usize) -> &[ValuePolytope] {
        if h >= self.horizon {
            &[]
        } else {
            self.layer(h + 1)
        }
    }

    pub fn get(&self, h: usize, key: StateActionKey) -> Option<&ValuePolytope> {
        match key {
            StateActionKey::Root => (h == 1).then_some(self.root.as_ref()).flatten(),
            StateActionKey::Pair { .. } => {
                let layer = self.layers.get(h.checked_sub(2)?)?;
                layer.iter().find(|p| p.owner.o == key)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ValuePolytope> {
        self.root.iter().chain(self.layers.iter().flatten())
    }

    pub fn to_dump(&self) -> PolytopeDump {
        PolytopeDump {
            horizon: self.horizon,
            dimension: self.dimension,
            epsilon: self.epsilon,
            delta: self.delta,
            polytopes: self.iter().cloned().collect(),
        }
    }

    /// Rebuilds a map from a dump, checking it covers every key of `m`.
    pub fn from_dump(m: &GameModel, dump: PolytopeDump) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("polytope dump: {msg}"));
        if dump.horizon != m.horizon {
            return Err(bad(format!("horizon {} does not match the model's {}", dump.horizon, m.horizon)));
        }
        if dump.dimension != 2 && dump.dimension != 3 {
            return Err(bad(format!("unsupported dimension {}", dump.dimension)));
        }
        let dims = m.dims();
        let mut root = None;
        let mut layers: Vec<Vec<Option<ValuePolytope>>> = vec![vec![None; dims.pairs()]; m.horizon.saturating_sub(1)];
        for p in dump.polytopes {
            if p.dimension != dump.dimension || p.vertices.is_empty() || p.h.len() != p.b.len() {
                return Err(bad(format!("malformed polytope at step {}", p.owner.h)));
            }
            if !m.check_key(p.owner.h, p.owner.o) {
                return Err(bad(format!("owner ({}, {}) is not a key of the model", p.owner.h, p.owner.o)));
            }
            match p.owner.o.index(&dims) {
                None => root = Some(p),
                Some(i) => {
                    let h = p.owner.h;
                    layers[h - 2][i] = Some(p);
                }
            }
        }
        let layers = layers
            .into_iter()
            .enumerate()
            .map(|(l, layer)| {
                layer
                    .into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad(format!("step {} is incomplete", l + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolytopeMap::new(m.horizon, dump.dimension, dump.epsilon, dump.delta, layers, root))
    }
}

/// File form of a [`PolytopeMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeDump {
    pub horizon: usize,
    pub dimension: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub polytopes: Vec<ValuePolytope>,
}

fn origin_layer(m: &GameModel, h: usize, dimension: usize) -> Vec<ValuePolytope> {
    let dims = m.dims();
    let origin = vec![0.0; dimension];
    (0..dims.pairs())
        .map(|i| ValuePolytope::point(&origin, Owner { h, o: StateActionKey::from_index(&dims, i) }))
        .collect()
}

/// Slices, hulls and re-verifies the 2D inducible set at `(h, o)`.
pub fn build_one(m: &GameModel, h: usize, key: StateActionKey, next: &[ValuePolytope], delta: f64, tol: &Tolerances) -> Result<ValuePolytope> {
    let sys = assemble_compact(m, h, key, next, 2)?;
    let slices = slice_polytope(&sys, delta, m.horizon, tol)?;
    let poly = ValuePolytope::from_points_2d(&slices.values(), Owner { h, o: key });
    verify_vertices(&sys, &poly, tol)?;
    Ok(poly)
}

fn verify_vertices(sys: &ConstraintSystem, poly: &ValuePolytope, tol: &Tolerances) -> Result<()> {
    for vert in &poly.vertices {
        if sys.check_point(vert, tol)?.is_none() {
            return Err(Error::Lp {
                h: sys.h,
                key: sys.key,
                source: crate::LpError::NumericalFailure {
                    iterations: 0,
                    reason: format!("hull vertex {vert:?} failed re-verification"),
                },
            });
        }
    }
    Ok(())
}

pub fn build_value_polytopes(m: &GameModel, epsilon: f64) -> Result<PolytopeMap> {
    build_with(m, epsilon, &BuildOptions::default())
}

/// Runs the DP with `δ = ε/H`.
pub fn build_with(m: &GameModel, epsilon: f64, opts: &BuildOptions) -> Result<PolytopeMap> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let big_h = m.horizon;
    let delta = epsilon / big_h as f64;
    let dims = m.dims();
    let mut layers: Vec<Vec<ValuePolytope>> = Vec::new();
    if big_h >= 2 {
        layers.push(origin_layer(m, big_h, 2));
    }
    for h in (2..big_h).rev() {
        let next = layers.last().unwrap().clone();
        let build = |i: usize| build_one(m, h, StateActionKey::from_index(&dims, i), &next, delta, &opts.tol);
        let layer: Result<Vec<ValuePolytope>> = if opts.parallel {
            (0..dims.pairs()).into_par_iter().map(build).collect()
        } else {
            (0..dims.pairs()).map(build).collect()
        };
        layers.push(layer?);
    }
    layers.reverse();
    let root = if opts.include_root {
        let next: &[ValuePolytope] = if big_h >= 2 { &layers[0] } else { &[] };
        Some(build_one(m, 1, StateActionKey::Root, next, delta, &opts.tol)?)
    } else {
        None
    };
    Ok(PolytopeMap::new(big_h, 2, epsilon, delta, layers, root))
}

/// The root system of a built map.
pub fn root_system(m: &GameModel, map: &PolytopeMap) -> Result<ConstraintSystem> {
    assemble_compact(m, 1, StateActionKey::Root, map.next_of(1), map.dimension)
}

/// `max v^P` over the system, ties broken by the largest `v^A`.
pub fn max_principal_value(sys: &ConstraintSystem) -> Result<(f64, Vec<f64>)> {
    max_principal_value_with(sys, &[], &Tolerances::default())
}

/// Lexicographic `(v^P, v^A)` maximum subject to `extra` rows.
pub fn max_principal_value_with(sys: &ConstraintSystem, extra: &[Constraint], tol: &Tolerances) -> Result<(f64, Vec<f64>)> {
    let (vp, va) = (sys.v[0], sys.v[1]);
    let first = sys
        .optimize(Sense::Maximize, vec![(vp, 1.0)], &[], extra, tol)?
        .ok_or(Error::EmptyInducibleSet { h: sys.h, key: sys.key })?;
    let v_star = first[vp];
    let mut rows = extra.to_vec();
    rows.push(Constraint {
        coeffs: vec![(vp, 1.0)],
        relation: Relation::Ge,
        rhs: v_star - LEX_SLACK,
    });
    let second = sys
        .optimize(Sense::Maximize, vec![(va, 1.0)], &[], &rows, tol)?
        .unwrap_or(first);
    Ok((v_star, sys.value_of(&second)))
}

/// Lexicographic maximum over a polytope's vertices.
pub fn max_principal_value_polytope(poly: &ValuePolytope) -> (f64, Vec<f64>) {
    let v = poly.lex_max_vertex().to_vec();
    (v[0], v)
}

/// Three-coordinate sets for the learner, built on a grid of spacing
/// `H / ⌈H²/ε⌉`: for each principal value `w` on the grid (and at the range
/// ends) and each agent value `u` on the grid (and at the slice ends), the
/// point with the least attainable value and the point at the cap `H`.
pub fn build_attainable_polytopes(m: &GameModel, epsilon: f64, tol: &Tolerances) -> Result<PolytopeMap> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let big_h = m.horizon;
    let hf = big_h as f64;
    let cells = (hf * hf / epsilon).ceil().max(1.0);
    let spacing = hf / cells;
    let dims = m.dims();
    let mut layers: Vec<Vec<ValuePolytope>> = Vec::new();
    if big_h >= 2 {
        layers.push(origin_layer(m, big_h, 3));
    }
    for h in (2..big_h).rev() {
        let next = layers.last().unwrap().clone();
        let layer: Result<Vec<ValuePolytope>> = (0..dims.pairs())
            .into_par_iter()
            .map(|i| {
                let key = StateActionKey::from_index(&dims, i);
                let sys = assemble_compact(m, h, key, &next, 3)?;
                let pts = grid_points_3d(&sys, spacing, hf, tol)?;
                let poly = ValuePolytope::from_points_3d(&pts, Owner { h, o: key });
                verify_vertices(&sys, &poly, tol)?;
                Ok(poly)
            })
            .collect();
        layers.push(layer?);
    }
    layers.reverse();
    Ok(PolytopeMap::new(big_h, 3, epsilon, spacing, layers, None))
}

fn grid_between(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let mut out = vec![lo];
    let mut k = (lo / spacing).floor() as i64 + 1;
    loop {
        let g = k as f64 * spacing;
        if g >= hi - 1e-12 {
            break;
        }
        if g > lo + 1e-12 {
            out.push(g);
        }
        k += 1;
    }
    if hi > lo {
        out.push(hi);
    }
    out
}

fn grid_points_3d(sys: &ConstraintSystem, spacing: f64, cap: f64, tol: &Tolerances) -> Result<Vec<Point3>> {
    let (vp, va, vs) = (sys.v[0], sys.v[1], sys.v[2]);
    let range = |var: usize, fixed: &[(usize, f64)]| -> Result<Option<(f64, f64)>> {
        let lo = sys.optimize(Sense::Minimize, vec![(var, 1.0)], fixed, &[], tol)?;
        let hi = sys.optimize(Sense::Maximize, vec![(var, 1.0)], fixed, &[], tol)?;
        Ok(lo.zip(hi).map(|(a, b)| (a[var], b[var])))
    };
    let Some((p_lo, p_hi)) = range(vp, &[])? else {
        return Err(Error::EmptyInducibleSet { h: sys.h, key: sys.key });
    };
    let mut pts = Vec::new();
    for w in grid_between(p_lo, p_hi, spacing) {
        let Some((a_lo, a_hi)) = range(va, &[(0, w)])? else { continue };
        for u in grid_between(a_lo, a_hi, spacing) {
            if let Some(x) = sys.optimize(Sense::Minimize, vec![(vs, 1.0)], &[(0, w), (1, u)], &[], tol)? {
                pts.push([w, u, x[vs]]);
                pts.push([w, u, cap]);
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyInducibleSet { h: sys.h, key: sys.key });
    }
    Ok(pts)
}
