//! Forward computation of the committed policy.
//!
//! The policy is never materialized. A query for history `σ` replays the
//! history from the root: at each prefix it solves the one-step system at the
//! current target value, reads off the onward value promised for the step
//! interaction that actually happened, and continues from there. Solved
//! prefixes are memoized, so a rollout costs one LP per new step.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Constraint, Relation, Sense, Tolerances};
use crate::model::{sample_index, sample_step, Dims, GameModel, History, StateActionKey, StepInteraction};
use crate::valueset_dp::{assemble_compact, max_principal_value_with, ConstraintSystem, PolytopeMap};

/// Below this weight an onward value is unreachable and set to a fixed vertex.
pub const PROB_FLOOR: f64 = 1e-9;
/// Largest L1 distance between the target and the realized value vector.
pub const TARGET_TOL: f64 = 1e-7;

/// Anything that answers `π(· | σ; ω^P, ω̃^A)`.
pub trait CommitmentPolicy: Sync {
    fn model(&self) -> &GameModel;

    /// Distribution over joint actions `a = a^P · |A^A| + a^A`.
    fn distribution(&self, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>>;
}

/// `ϖ(a | ω^P, ω̃^A)` as a dense table.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepPolicy {
    dims: Dims,
    probs: Vec<f64>,
}

impl OneStepPolicy {
    pub fn dist(&self, principal_obs: usize, reported_obs: usize) -> &[f64] {
        let n = self.dims.joint_actions();
        let row = principal_obs * self.dims.agent_obs + reported_obs;
        &self.probs[row * n..(row + 1) * n]
    }

    /// Point mass on `joint` for every observation pair.
    pub fn point_mass(dims: Dims, joint: usize) -> Self {
        let n = dims.joint_actions();
        let mut probs = vec![0.0; dims.principal_obs * dims.agent_obs * n];
        for row in 0..dims.principal_obs * dims.agent_obs {
            probs[row * n + joint] = 1.0;
        }
        OneStepPolicy { dims, probs }
    }
}

/// Onward value vector promised for every step interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct OnwardValueMap {
    dims: Dims,
    dimension: usize,
    values: Vec<f64>,
}

impl OnwardValueMap {
    fn index(&self, st: &StepInteraction) -> usize {
        let d = &self.dims;
        let a = d.joint(st.principal_action, st.recommended_action);
        (((((st.state * d.principal_obs + st.principal_obs) * d.agent_obs + st.agent_obs) * d.agent_obs + st.reported_obs)
            * d.joint_actions()
            + a)
            * d.agent_actions)
            + st.played_action
    }

    pub fn get(&self, st: &StepInteraction) -> &[f64] {
        let i = self.index(st) * self.dimension;
        &self.values[i..i + self.dimension]
    }
}

/// One-step solution: the policy, its onward values and the value it realizes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub target: Vec<f64>,
    pub realized: Vec<f64>,
    pub policy: OneStepPolicy,
    pub onward: OnwardValueMap,
}

/// Solves the `(h, o)` system at `target`, minimizing the L1 distance to it.
pub fn one_step_solve(
    m: &GameModel,
    h: usize,
    key: StateActionKey,
    target: &[f64],
    next: &PolytopeMap,
    tol: &Tolerances,
) -> Result<StepSolution> {
    let sys = assemble_compact(m, h, key, next.next_of(h), next.dimension)?;
    solve_system_at(m, &sys, target, next, tol)
}

fn solve_system_at(m: &GameModel, sys: &ConstraintSystem, target: &[f64], next: &PolytopeMap, tol: &Tolerances) -> Result<StepSolution> {
    let d = sys.dimension;
    if target.len() != d {
        return Err(Error::InvalidArgument(format!("target has {} coordinates, expected {d}", target.len())));
    }
    let mut lp = sys.lp.clone();
    let mut objective = Vec::new();
    for (k, &t) in target.iter().enumerate() {
        let plus = lp.add_var(0.0, f64::INFINITY);
        let minus = lp.add_var(0.0, f64::INFINITY);
        lp.add_constraint(vec![(sys.v[k], 1.0), (plus, -1.0), (minus, 1.0)], Relation::Eq, t);
        objective.push((plus, 1.0));
        objective.push((minus, 1.0));
    }
    lp.set_objective(Sense::Minimize, objective);
    let r = crate::lp::solve_with(&lp, tol).map_err(|source| Error::Lp { h: sys.h, key: sys.key, source })?;
    let (Some(x), Some(dev)) = (r.solution, r.objective_value) else {
        return Err(Error::InfeasibleTarget { target: target.to_vec(), violation: f64::INFINITY });
    };
    if dev > TARGET_TOL {
        return Err(Error::InfeasibleTarget { target: target.to_vec(), violation: dev });
    }
    Ok(decode(m, sys, &x, target, next))
}

fn decode(m: &GameModel, sys: &ConstraintSystem, x: &[f64], target: &[f64], next: &PolytopeMap) -> StepSolution {
    let dims = m.dims();
    let d = sys.dimension;
    let ac = d - 1;
    let n_a = dims.joint_actions();
    let mut probs = Vec::with_capacity(sys.num_varpi());
    for op in 0..dims.principal_obs {
        for or in 0..dims.agent_obs {
            let row: Vec<f64> = (0..n_a).map(|a| x[sys.varpi_index(op, or, a)].max(0.0)).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| p / total));
        }
    }
    let policy = OneStepPolicy { dims, probs };

    let origin = vec![0.0; d];
    let next_layer = next.next_of(sys.h);
    let vertices = |idx: usize| -> Option<&crate::geometry::ValuePolytope> { next_layer.get(idx) };
    let fallback = |idx: usize| -> Vec<f64> { vertices(idx).map_or(origin.clone(), |p| p.lex_max_vertex().to_vec()) };
    let punish = |idx: usize| -> Vec<f64> { vertices(idx).map_or(origin.clone(), |p| p.min_vertex(ac).to_vec()) };

    // truthful onward values per (s, ω^A, a)
    let mut truthful: HashMap<(usize, usize, usize), Vec<f64>> = HashMap::new();
    for blk in &sys.mu_blocks {
        let w: Vec<f64> = (0..blk.len).map(|j| x[blk.start + j].max(0.0)).collect();
        let total: f64 = w.iter().sum();
        let val = if let (true, Some(poly)) = (total > PROB_FLOOR, vertices(blk.next)) {
            let verts = &poly.vertices;
            (0..d)
                .map(|k| w.iter().zip(verts).map(|(wj, vj)| wj * vj[k]).sum::<f64>() / total)
                .collect()
        } else {
            fallback(blk.next)
        };
        truthful.insert((blk.state, blk.agent_obs, blk.joint), val);
    }

    let mut values = Vec::with_capacity(dims.interactions() * d);
    for s in 0..dims.states {
        for _op in 0..dims.principal_obs {
            for oa in 0..dims.agent_obs {
                for or in 0..dims.agent_obs {
                    for a in 0..n_a {
                        let (ap, aa) = dims.split_joint(a);
                        for played in 0..dims.agent_actions {
                            let next_idx = s * n_a + dims.joint(ap, played);
                            let v = if or == oa && played == aa {
                                truthful.get(&(s, oa, a)).cloned().unwrap_or_else(|| fallback(next_idx))
                            } else {
                                punish(next_idx)
                            };
                            values.extend_from_slice(&v);
                        }
                    }
                }
            }
        }
    }
    StepSolution {
        target: target.to_vec(),
        realized: sys.value_of(x),
        policy,
        onward: OnwardValueMap { dims, dimension: d, values },
    }
}

/// Everything needed to answer policy queries on the fly.
pub struct PolicyHandle {
    model: Arc<GameModel>,
    polytopes: Arc<PolytopeMap>,
    target: Vec<f64>,
    tol: Tolerances,
    memo: Mutex<HashMap<History, Arc<StepSolution>>>,
}

impl std::fmt::Debug for PolicyHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolicyHandle").field("target", &self.target).finish_non_exhaustive()
    }
}

impl PolicyHandle {
    /// Handle targeting the lexicographic `(v^P, v^A)` maximum of the root system.
    pub fn optimal(model: Arc<GameModel>, polytopes: Arc<PolytopeMap>, tol: Tolerances) -> Result<Self> {
        Self::optimal_with(model, polytopes, &[], tol)
    }

    /// Like [`PolicyHandle::optimal`] with extra rows on the root value variables
    /// (given in terms of coordinates `0..dimension`).
    pub fn optimal_with(model: Arc<GameModel>, polytopes: Arc<PolytopeMap>, extra: &[Constraint], tol: Tolerances) -> Result<Self> {
        let sys = assemble_compact(&model, 1, StateActionKey::Root, polytopes.next_of(1), polytopes.dimension)?;
        let rows: Vec<Constraint> = extra
            .iter()
            .map(|c| Constraint {
                coeffs: c.coeffs.iter().map(|&(k, v)| (sys.v[k], v)).collect(),
                relation: c.relation,
                rhs: c.rhs,
            })
            .collect();
        let (_, arg) = max_principal_value_with(&sys, &rows, &tol)?;
        let root = solve_system_at(&model, &sys, &arg, &polytopes, &tol)?;
        Ok(Self::from_root(model, polytopes, root, tol))
    }

    /// Handle realizing an explicit root target; fails if it is not inducible.
    pub fn with_target(model: Arc<GameModel>, polytopes: Arc<PolytopeMap>, target: Vec<f64>, tol: Tolerances) -> Result<Self> {
        let root = one_step_solve(&model, 1, StateActionKey::Root, &target, &polytopes, &tol)?;
        Ok(Self::from_root(model, polytopes, root, tol))
    }

    fn from_root(model: Arc<GameModel>, polytopes: Arc<PolytopeMap>, root: StepSolution, tol: Tolerances) -> Self {
        let target = root.target.clone();
        let mut memo = HashMap::new();
        memo.insert(History::new(), Arc::new(root));
        PolicyHandle {
            model,
            polytopes,
            target,
            tol,
            memo: Mutex::new(memo),
        }
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn polytopes(&self) -> &PolytopeMap {
        &self.polytopes
    }

    pub fn model_arc(&self) -> Arc<GameModel> {
        self.model.clone()
    }

    /// One-step solution after prefix `σ` (so at step `|σ| + 1 ≤ H`).
    pub fn step_solution(&self, history: &History) -> Result<Arc<StepSolution>> {
        if let Some(sol) = self.memo.lock().get(history) {
            return Ok(sol.clone());
        }
        let len = history.len();
        if len == 0 || len >= self.model.horizon {
            return Err(Error::InvalidArgument(format!("no step follows a history of length {len}")));
        }
        let parent = self.step_solution(&history.prefix(len - 1))?;
        let last = history.steps()[len - 1];
        let target = parent.onward.get(&last).to_vec();
        let sol = one_step_solve(&self.model, len + 1, history.key(), &target, &self.polytopes, &self.tol)?;
        let sol = Arc::new(sol);
        self.memo.lock().insert(history.clone(), sol.clone());
        Ok(sol)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.lock().len()
    }
}

impl CommitmentPolicy for PolicyHandle {
    fn model(&self) -> &GameModel {
        &self.model
    }

    fn distribution(&self, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>> {
        let m = &self.model;
        let dims = m.dims();
        if !m.check_history(history) || history.len() >= m.horizon || principal_obs >= dims.principal_obs || reported_obs >= dims.agent_obs {
            return Err(Error::InvalidArgument("history or observation out of range".into()));
        }
        if history.len() + 1 == m.horizon {
            return Ok(OneStepPolicy::point_mass(dims, 0).dist(principal_obs, reported_obs).to_vec());
        }
        let sol = self.step_solution(history)?;
        Ok(sol.policy.dist(principal_obs, reported_obs).to_vec())
    }
}

/// `π(· | σ; ω^P, ω̃^A)` for a handle.
pub fn policy_distribution(ph: &PolicyHandle, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>> {
    ph.distribution(history, principal_obs, reported_obs)
}

/// Policy that ignores the history: one table per step.
#[derive(Debug, Clone)]
pub struct MarkovPolicy {
    model: GameModel,
    steps: Vec<OneStepPolicy>,
}

impl MarkovPolicy {
    /// `tables[h-1][ω^P][ω̃^A]` is the joint-action distribution at step `h`.
    pub fn new(model: GameModel, tables: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let dims = model.dims();
        if tables.len() != model.horizon {
            return Err(Error::InvalidArgument(format!("expected {} step tables", model.horizon)));
        }
        let mut steps = Vec::new();
        for t in tables {
            let mut probs = Vec::new();
            if t.len() != dims.principal_obs {
                return Err(Error::InvalidArgument("table has the wrong number of principal observations".into()));
            }
            for row in t {
                if row.len() != dims.agent_obs {
                    return Err(Error::InvalidArgument("table has the wrong number of agent observations".into()));
                }
                for d in row {
                    let sum: f64 = d.iter().sum();
                    if d.len() != dims.joint_actions() || d.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-8 {
                        return Err(Error::InvalidArgument("rows must be distributions over joint actions".into()));
                    }
                    probs.extend(d);
                }
            }
            steps.push(OneStepPolicy { dims, probs });
        }
        Ok(MarkovPolicy { model, steps })
    }

    /// Always plays `joint`, whatever is observed or reported.
    pub fn constant(model: GameModel, joint: usize) -> Self {
        let dims = model.dims();
        let steps = vec![OneStepPolicy::point_mass(dims, joint); model.horizon];
        MarkovPolicy { model, steps }
    }
}

impl CommitmentPolicy for MarkovPolicy {
    fn model(&self) -> &GameModel {
        &self.model
    }

    fn distribution(&self, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>> {
        let step = self
            .steps
            .get(history.len())
            .ok_or_else(|| Error::InvalidArgument("history too long".into()))?;
        Ok(step.dist(principal_obs, reported_obs).to_vec())
    }
}

/// Report and action rules for one step of a deviation plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDeviation {
    /// `report[ω^A]`.
    pub report: Vec<usize>,
    /// `action[ω^A][a^A]`.
    pub action: Vec<Vec<usize>>,
}

type ReportFn = dyn Fn(&History, usize) -> usize + Send + Sync;
type ActionFn = dyn Fn(&History, usize, usize) -> usize + Send + Sync;

/// The agent's strategy: what to report and how to act on a recommendation.
#[derive(Clone, Default)]
pub enum DeviationPlan {
    /// Truthful and obedient.
    #[default]
    Truthful,
    /// History-independent rules per step; the last entry repeats.
    Stepwise(Vec<StepDeviation>),
    Custom(Arc<ReportFn>, Arc<ActionFn>),
}

impl std::fmt::Debug for DeviationPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviationPlan::Truthful => write!(f, "Truthful"),
            DeviationPlan::Stepwise(s) => f.debug_tuple("Stepwise").field(s).finish(),
            DeviationPlan::Custom(..) => write!(f, "Custom(..)"),
        }
    }
}

impl DeviationPlan {
    fn step(&self, h: usize) -> Option<&StepDeviation> {
        match self {
            DeviationPlan::Stepwise(steps) if !steps.is_empty() => steps.get(h.min(steps.len()) - 1),
            _ => None,
        }
    }

    pub fn report(&self, history: &History, agent_obs: usize) -> usize {
        match self {
            DeviationPlan::Truthful => agent_obs,
            DeviationPlan::Stepwise(_) => self.step(history.len() + 1).map_or(agent_obs, |s| s.report[agent_obs]),
            DeviationPlan::Custom(r, _) => r(history, agent_obs),
        }
    }

    pub fn act(&self, history: &History, agent_obs: usize, recommended: usize) -> usize {
        match self {
            DeviationPlan::Truthful => recommended,
            DeviationPlan::Stepwise(_) => self
                .step(history.len() + 1)
                .map_or(recommended, |s| s.action[agent_obs][recommended]),
            DeviationPlan::Custom(_, a) => a(history, agent_obs, recommended),
        }
    }

    /// Checks a stepwise plan against the model's index ranges.
    pub fn validate(&self, m: &GameModel) -> Result<()> {
        let dims = m.dims();
        if let DeviationPlan::Stepwise(steps) = self {
            let ok = !steps.is_empty()
                && steps.iter().all(|s| {
                    s.report.len() == dims.agent_obs
                        && s.report.iter().all(|&r| r < dims.agent_obs)
                        && s.action.len() == dims.agent_obs
                        && s.action
                            .iter()
                            .all(|row| row.len() == dims.agent_actions && row.iter().all(|&a| a < dims.agent_actions))
                });
            if !ok {
                return Err(Error::InvalidArgument("deviation plan does not match the model".into()));
            }
        }
        Ok(())
    }
}

/// One episode of the interaction protocol with the agent following `plan`.
pub fn rollout<P: CommitmentPolicy + ?Sized, R: Rng + ?Sized>(
    policy: &P,
    plan: &DeviationPlan,
    rng: &mut R,
) -> Result<(History, [f64; 2])> {
    let m = policy.model();
    let dims = m.dims();
    let mut history = History::new();
    let mut totals = [0.0; 2];
    for h in 1..=m.horizon {
        let key = history.key();
        let (state, principal_obs, agent_obs) = sample_step(m, h, key, rng);
        let reported_obs = plan.report(&history, agent_obs);
        let dist = policy.distribution(&history, principal_obs, reported_obs)?;
        let (principal_action, recommended_action) = dims.split_joint(sample_index(&dist, rng));
        let played_action = plan.act(&history, agent_obs, recommended_action);
        let r = m.rewards(h, state, principal_action, played_action);
        totals[0] += r[0];
        totals[1] += r[1];
        history.push(StepInteraction {
            state,
            principal_obs,
            agent_obs,
            reported_obs,
            principal_action,
            recommended_action,
            played_action,
        });
    }
    Ok((history, totals))
}
