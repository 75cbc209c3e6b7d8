//! Exact small-instance ground truth.
//!
//! Everything here enumerates the interaction tree directly and never looks at
//! value polytopes, so it can be used to check the solver. Rewards at the last
//! step are zero, so trees stop after step `H − 1`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation, Sense, Tolerances};
use crate::model::{GameModel, History, StateActionKey, StepInteraction};
use crate::policy_forward::{CommitmentPolicy, DeviationPlan, MarkovPolicy};
use crate::valueset_dp::LEX_SLACK;

/// Default cap on enumerated tree nodes.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// A deviation must gain more than this to displace truthful behaviour.
const TIE_TOL: f64 = 1e-12;

/// Upper bound on the number of tree nodes an enumeration visits.
///
/// Per step the branching factor is the largest outcome support times the
/// number of joint actions, times reports and played actions when the agent
/// may deviate.
pub fn estimate_nodes(m: &GameModel, deviations: bool) -> u64 {
    let dims = m.dims();
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for h in 1..m.horizon {
        let support = m
            .keys_at(h)
            .into_iter()
            .map(|k| m.outcome_dist(h, k).iter().filter(|&&p| p > 0.0).count())
            .max()
            .unwrap_or(0) as u64;
        let mut branch = support.saturating_mul(dims.joint_actions() as u64);
        if deviations {
            branch = branch.saturating_mul((dims.agent_obs * dims.agent_actions) as u64);
        }
        level = level.saturating_mul(branch);
        total = total.saturating_add(level);
    }
    total
}

struct Counter {
    nodes: u64,
    estimate: u64,
    budget: u64,
}

impl Counter {
    fn new(m: &GameModel, deviations: bool, budget: u64) -> Result<Self> {
        let estimate = estimate_nodes(m, deviations);
        if estimate > budget {
            return Err(Error::BudgetExceeded { estimated: estimate, budget });
        }
        Ok(Counter { nodes: 0, estimate, budget })
    }

    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded {
                estimated: self.estimate.max(self.nodes),
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Expected totals `(V^P, V^A)` with a truthful, obedient agent.
pub fn exact_policy_values<P: CommitmentPolicy + ?Sized>(policy: &P) -> Result<[f64; 2]> {
    exact_policy_values_with(policy, DEFAULT_BUDGET)
}

pub fn exact_policy_values_with<P: CommitmentPolicy + ?Sized>(policy: &P, budget: u64) -> Result<[f64; 2]> {
    plan_values_with(policy, &DeviationPlan::Truthful, budget)
}

/// Expected totals when the agent follows `plan`.
pub fn plan_values<P: CommitmentPolicy + ?Sized>(policy: &P, plan: &DeviationPlan) -> Result<[f64; 2]> {
    plan_values_with(policy, plan, DEFAULT_BUDGET)
}

pub fn plan_values_with<P: CommitmentPolicy + ?Sized>(policy: &P, plan: &DeviationPlan, budget: u64) -> Result<[f64; 2]> {
    let mut counter = Counter::new(policy.model(), false, budget)?;
    plan_rec(policy, plan, &History::new(), &mut counter)
}

fn plan_rec<P: CommitmentPolicy + ?Sized>(
    policy: &P,
    plan: &DeviationPlan,
    history: &History,
    counter: &mut Counter,
) -> Result<[f64; 2]> {
    let m = policy.model();
    let h = history.len() + 1;
    if h >= m.horizon {
        return Ok([0.0, 0.0]);
    }
    let dims = m.dims();
    let mut acc = [0.0; 2];
    for (idx, &p) in m.outcome_dist(h, history.key()).iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let (state, principal_obs, agent_obs) = dims.split_outcome(idx);
        let reported_obs = plan.report(history, agent_obs);
        let dist = policy.distribution(history, principal_obs, reported_obs)?;
        for (joint, &w) in dist.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            counter.tick()?;
            let (principal_action, recommended_action) = dims.split_joint(joint);
            let played_action = plan.act(history, agent_obs, recommended_action);
            let r = m.rewards(h, state, principal_action, played_action);
            let child = history.extended(StepInteraction {
                state,
                principal_obs,
                agent_obs,
                reported_obs,
                principal_action,
                recommended_action,
                played_action,
            });
            let v = plan_rec(policy, plan, &child, counter)?;
            acc[0] += p * w * (r[0] + v[0]);
            acc[1] += p * w * (r[1] + v[1]);
        }
    }
    Ok(acc)
}

/// A maximizing deviation plan together with its value.
#[derive(Debug, Clone)]
pub struct BestResponse {
    /// Agent's value under the plan.
    pub value: f64,
    /// Principal's value when the agent follows the plan.
    pub principal_value: f64,
    reports: HashMap<(History, usize), usize>,
    actions: HashMap<(History, usize, usize), usize>,
}

/// One non-truthful choice of a deviation plan, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRecord {
    pub history: History,
    pub agent_obs: usize,
    pub reported_obs: usize,
    /// Recommendation the action applies to; absent for report deviations.
    pub recommended: Option<usize>,
    pub played: Option<usize>,
}

impl BestResponse {
    pub fn report(&self, history: &History, agent_obs: usize) -> usize {
        self.reports.get(&(history.clone(), agent_obs)).copied().unwrap_or(agent_obs)
    }

    pub fn act(&self, history: &History, agent_obs: usize, recommended: usize) -> usize {
        self.actions
            .get(&(history.clone(), agent_obs, recommended))
            .copied()
            .unwrap_or(recommended)
    }

    /// The plan as a [`DeviationPlan`].
    pub fn plan(&self) -> DeviationPlan {
        let reports = std::sync::Arc::new(self.reports.clone());
        let actions = std::sync::Arc::new(self.actions.clone());
        DeviationPlan::Custom(
            std::sync::Arc::new(move |h: &History, o: usize| reports.get(&(h.clone(), o)).copied().unwrap_or(o)),
            std::sync::Arc::new(move |h: &History, o: usize, a: usize| {
                actions.get(&(h.clone(), o, a)).copied().unwrap_or(a)
            }),
        )
    }

    /// Non-truthful choices, sorted by history.
    pub fn deviations(&self) -> Vec<DeviationRecord> {
        let mut out: Vec<DeviationRecord> = self
            .reports
            .iter()
            .map(|((h, o), &r)| DeviationRecord {
                history: h.clone(),
                agent_obs: *o,
                reported_obs: r,
                recommended: None,
                played: None,
            })
            .chain(self.actions.iter().map(|((h, o, a), &p)| DeviationRecord {
                history: h.clone(),
                agent_obs: *o,
                reported_obs: self.report(h, *o),
                recommended: Some(*a),
                played: Some(p),
            }))
            .collect();
        out.sort_by(|a, b| {
            (&a.history, a.agent_obs, a.recommended).cmp(&(&b.history, b.agent_obs, b.recommended))
        });
        out
    }
}

/// The agent's exact best-response value over all deviation plans.
pub fn best_response_value<P: CommitmentPolicy + ?Sized>(policy: &P) -> Result<f64> {
    Ok(best_response(policy)?.value)
}

pub fn best_response<P: CommitmentPolicy + ?Sized>(policy: &P) -> Result<BestResponse> {
    best_response_with(policy, DEFAULT_BUDGET)
}

/// Backward induction over the agent's information sets. A report is chosen
/// knowing the history and `ω^A`; an action knowing also the report and the
/// recommendation. Ties keep the truthful choice.
pub fn best_response_with<P: CommitmentPolicy + ?Sized>(policy: &P, budget: u64) -> Result<BestResponse> {
    let mut counter = Counter::new(policy.model(), true, budget)?;
    let mut br = BestResponse {
        value: 0.0,
        principal_value: 0.0,
        reports: HashMap::new(),
        actions: HashMap::new(),
    };
    let v = br_rec(policy, &History::new(), &mut counter, &mut br)?;
    br.value = v[1];
    br.principal_value = v[0];
    Ok(br)
}

fn br_rec<P: CommitmentPolicy + ?Sized>(
    policy: &P,
    history: &History,
    counter: &mut Counter,
    br: &mut BestResponse,
) -> Result<[f64; 2]> {
    let m = policy.model();
    let h = history.len() + 1;
    if h >= m.horizon {
        return Ok([0.0, 0.0]);
    }
    let dims = m.dims();
    let probs = m.outcome_dist(h, history.key());
    let mut dists: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut total = [0.0; 2];
    for agent_obs in 0..dims.agent_obs {
        let support: Vec<(usize, usize, f64)> = (0..dims.states)
            .flat_map(|s| (0..dims.principal_obs).map(move |op| (s, op)))
            .filter_map(|(s, op)| {
                let p = probs[dims.outcome(s, op, agent_obs)];
                (p > 0.0).then_some((s, op, p))
            })
            .collect();
        if support.is_empty() {
            continue;
        }
        let mut per_report: Vec<([f64; 2], Vec<(usize, usize)>)> = Vec::with_capacity(dims.agent_obs);
        for reported_obs in 0..dims.agent_obs {
            let mut report_value = [0.0; 2];
            let mut choices = Vec::new();
            for recommended in 0..dims.agent_actions {
                let mut best: Option<(usize, [f64; 2])> = None;
                let mut truthful = [0.0; 2];
                for played in 0..dims.agent_actions {
                    let mut v = [0.0; 2];
                    for &(state, principal_obs, p) in &support {
                        let dist = match dists.get(&(principal_obs, reported_obs)) {
                            Some(d) => d,
                            None => {
                                let d = policy.distribution(history, principal_obs, reported_obs)?;
                                dists.entry((principal_obs, reported_obs)).or_insert(d)
                            }
                        };
                        for principal_action in 0..dims.principal_actions {
                            let w = dist[dims.joint(principal_action, recommended)];
                            if w <= 0.0 {
                                continue;
                            }
                            counter.tick()?;
                            let r = m.rewards(h, state, principal_action, played);
                            let child = history.extended(StepInteraction {
                                state,
                                principal_obs,
                                agent_obs,
                                reported_obs,
                                principal_action,
                                recommended_action: recommended,
                                played_action: played,
                            });
                            let c = br_rec(policy, &child, counter, br)?;
                            v[0] += p * w * (r[0] + c[0]);
                            v[1] += p * w * (r[1] + c[1]);
                        }
                    }
                    if played == recommended {
                        truthful = v;
                    }
                    if best.is_none_or(|(_, b)| v[1] > b[1]) {
                        best = Some((played, v));
                    }
                }
                let (played, v) = best.expect("at least one agent action");
                let (played, v) = if v[1] > truthful[1] + TIE_TOL {
                    (played, v)
                } else {
                    (recommended, truthful)
                };
                if played != recommended {
                    choices.push((recommended, played));
                }
                report_value[0] += v[0];
                report_value[1] += v[1];
            }
            per_report.push((report_value, choices));
        }
        let best = (0..dims.agent_obs)
            .max_by(|&a, &b| per_report[a].0[1].total_cmp(&per_report[b].0[1]).then(b.cmp(&a)))
            .expect("at least one report");
        let chosen = if per_report[best].0[1] > per_report[agent_obs].0[1] + TIE_TOL {
            best
        } else {
            agent_obs
        };
        if chosen != agent_obs {
            br.reports.insert((history.clone(), agent_obs), chosen);
        }
        for &(recommended, played) in &per_report[chosen].1 {
            br.actions.insert((history.clone(), agent_obs, recommended), played);
        }
        total[0] += per_report[chosen].0[0];
        total[1] += per_report[chosen].0[1];
    }
    Ok(total)
}

/// Outcome of an incentive-compatibility check.
#[derive(Debug, Clone, Serialize)]
pub struct IcVerdict {
    pub pass: bool,
    /// `best response − truthful agent value`, never negative.
    pub gap: f64,
    pub truthful: [f64; 2],
    pub best_response: f64,
    /// A maximizing plan's non-truthful choices when the check fails.
    pub deviations: Vec<DeviationRecord>,
}

/// Passes iff no deviation plan gains more than `tol` for the agent.
pub fn ic_check<P: CommitmentPolicy + ?Sized>(policy: &P, tol: f64) -> Result<IcVerdict> {
    ic_check_with(policy, tol, DEFAULT_BUDGET)
}

pub fn ic_check_with<P: CommitmentPolicy + ?Sized>(policy: &P, tol: f64, budget: u64) -> Result<IcVerdict> {
    let truthful = exact_policy_values_with(policy, budget)?;
    let br = best_response_with(policy, budget)?;
    let gap = (br.value - truthful[1]).max(0.0);
    let pass = gap <= tol;
    Ok(IcVerdict {
        pass,
        gap,
        truthful,
        best_response: br.value,
        deviations: if pass { Vec::new() } else { br.deviations() },
    })
}

/// Exact optimum of a two-step game.
#[derive(Debug, Clone, Serialize)]
pub struct H2Optimum {
    pub value: f64,
    pub argvec: [f64; 2],
    /// `table[ω^P][ω̃^A]` is the step-1 joint-action distribution.
    pub table: Vec<Vec<Vec<f64>>>,
}

impl H2Optimum {
    /// The commitment as a policy; the terminal step plays joint action 0.
    pub fn policy(&self, m: &GameModel) -> Result<MarkovPolicy> {
        let dims = m.dims();
        let mut last = vec![0.0; dims.joint_actions()];
        last[0] = 1.0;
        let terminal = vec![vec![last; dims.agent_obs]; dims.principal_obs];
        MarkovPolicy::new(m.clone(), vec![self.table.clone(), terminal])
    }
}

/// Optimum of a two-step game by one LP over `ϖ` whose incentive rows range
/// over every report and every remapping `f : A^A → A^A` of recommendations.
/// Ties are broken towards the larger agent value.
pub fn brute_force_optimum(m: &GameModel) -> Result<H2Optimum> {
    brute_force_optimum_with(m, &Tolerances::default())
}

pub fn brute_force_optimum_with(m: &GameModel, tol: &Tolerances) -> Result<H2Optimum> {
    if m.horizon != 2 {
        return Err(Error::InvalidArgument(format!(
            "brute-force optimum needs horizon 2, got {}",
            m.horizon
        )));
    }
    let dims = m.dims();
    let n_joint = dims.joint_actions();
    let var = |op: usize, or: usize, a: usize| (op * dims.agent_obs + or) * n_joint + a;
    let n = dims.principal_obs * dims.agent_obs * n_joint;
    let probs = m.outcome_dist(1, StateActionKey::Root);
    let mut p = LinearProgram::new(n);
    for op in 0..dims.principal_obs {
        for or in 0..dims.agent_obs {
            p.add_constraint((0..n_joint).map(|a| (var(op, or, a), 1.0)).collect(), Relation::Eq, 1.0);
        }
    }
    // expected reward of `player` with true agent obs `oa`, report `or`, remap `f`
    let value_row = |player: usize, oa: usize, or: usize, f: &dyn Fn(usize) -> usize| {
        let mut coeffs: HashMap<usize, f64> = HashMap::new();
        for s in 0..dims.states {
            for op in 0..dims.principal_obs {
                let pr = probs[dims.outcome(s, op, oa)];
                if pr <= 0.0 {
                    continue;
                }
                for a in 0..n_joint {
                    let (ap, aa) = dims.split_joint(a);
                    let r = m.rewards(1, s, ap, f(aa))[player];
                    if r != 0.0 {
                        *coeffs.entry(var(op, or, a)).or_default() += pr * r;
                    }
                }
            }
        }
        let mut v: Vec<(usize, f64)> = coeffs.into_iter().collect();
        v.sort_by_key(|&(j, _)| j);
        v
    };
    let k = dims.agent_actions;
    let remaps = k.pow(k as u32);
    for oa in 0..dims.agent_obs {
        let honest = value_row(1, oa, oa, &|a| a);
        for or in 0..dims.agent_obs {
            for code in 0..remaps {
                let f = |a: usize| (code / k.pow(a as u32)) % k;
                if or == oa && (0..k).all(|a| f(a) == a) {
                    continue;
                }
                let mut coeffs: HashMap<usize, f64> = honest.iter().copied().collect();
                for (j, c) in value_row(1, oa, or, &f) {
                    *coeffs.entry(j).or_default() -= c;
                }
                let mut row: Vec<(usize, f64)> = coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect();
                row.sort_by_key(|&(j, _)| j);
                if !row.is_empty() {
                    p.add_constraint(row, Relation::Ge, 0.0);
                }
            }
        }
    }
    let objective = |player: usize| {
        let mut coeffs: HashMap<usize, f64> = HashMap::new();
        for oa in 0..dims.agent_obs {
            for (j, c) in value_row(player, oa, oa, &|a| a) {
                *coeffs.entry(j).or_default() += c;
            }
        }
        let mut v: Vec<(usize, f64)> = coeffs.into_iter().collect();
        v.sort_by_key(|&(j, _)| j);
        v
    };
    let solve = |p: &LinearProgram| -> Result<Vec<f64>> {
        let r = lp::solve_with(p, tol)?;
        match (r.status, r.solution) {
            (LpStatus::Optimal, Some(x)) => Ok(x),
            (status, _) => Err(Error::LpRaw(crate::LpError::NumericalFailure {
                iterations: 0,
                reason: format!("brute-force program ended {status:?}"),
            })),
        }
    };
    let obj_p = objective(0);
    let obj_a = objective(1);
    let dot = |c: &[(usize, f64)], x: &[f64]| c.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
    p.set_objective(Sense::Maximize, obj_p.clone());
    let first = solve(&p)?;
    let value = dot(&obj_p, &first);
    p.add_constraint(obj_p.clone(), Relation::Ge, value - LEX_SLACK);
    p.set_objective(Sense::Maximize, obj_a.clone());
    let x = solve(&p).unwrap_or(first);
    let table = (0..dims.principal_obs)
        .map(|op| {
            (0..dims.agent_obs)
                .map(|or| {
                    let row: Vec<f64> = (0..n_joint).map(|a| x[var(op, or, a)].max(0.0)).collect();
                    let s: f64 = row.iter().sum();
                    row.iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    Ok(H2Optimum {
        value,
        argvec: [dot(&obj_p, &x), dot(&obj_a, &x)],
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::policy_forward::{PolicyHandle, StepDeviation};
    use crate::valueset_dp::build_value_polytopes;
    use std::sync::Arc;

    fn coin_handle() -> PolicyHandle {
        let m = Arc::new(fixtures::coin_persuasion());
        let map = Arc::new(build_value_polytopes(&m, 0.1).unwrap());
        PolicyHandle::optimal(m, map, Tolerances::default()).unwrap()
    }

    #[test]
    fn zero_rewards_give_zero() {
        let m = fixtures::uniform_zero_model(2, 2, 2, 2, 2, 3);
        let pol = MarkovPolicy::constant(m, 1);
        assert_eq!(exact_policy_values(&pol).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn constant_rewards_sum_per_step() {
        let m = fixtures::constant_reward_model(4);
        let pol = MarkovPolicy::constant(m, 0);
        assert_eq!(exact_policy_values(&pol).unwrap(), [3.0, 3.0]);
        assert_eq!(best_response_value(&pol).unwrap(), 3.0);
    }

    #[test]
    fn coin_optimal_handle() {
        let ph = coin_handle();
        let v = exact_policy_values(&ph).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-6 && (v[1] - 0.6).abs() < 1e-6, "{v:?}");
        let verdict = ic_check(&ph, 1e-6).unwrap();
        assert!(verdict.pass, "{verdict:?}");
        assert!((verdict.best_response - 0.6).abs() < 1e-6);
    }

    #[test]
    fn babbling_fails_by_point_two() {
        let m = fixtures::coin_persuasion();
        let pol = MarkovPolicy::constant(m, 0);
        assert!((exact_policy_values(&pol).unwrap()[1] - 0.4).abs() < 1e-12);
        let br = best_response(&pol).unwrap();
        assert!((br.value - 0.6).abs() < 1e-12);
        assert!(br.principal_value.abs() < 1e-12);
        let v = plan_values(&pol, &br.plan()).unwrap();
        assert!((v[1] - 0.6).abs() < 1e-12 && v[0].abs() < 1e-12);
        let verdict = ic_check(&pol, 1e-6).unwrap();
        assert!(!verdict.pass);
        assert!((verdict.gap - 0.2).abs() < 1e-12);
        assert_eq!(verdict.deviations.len(), 1);
        assert_eq!(verdict.deviations[0].played, Some(1));
    }

    #[test]
    fn always_play_t_matches_best_response() {
        let m = fixtures::coin_persuasion();
        let pol = MarkovPolicy::constant(m, 0);
        let plan = DeviationPlan::Stepwise(vec![StepDeviation {
            report: vec![0],
            action: vec![vec![1, 1]],
        }]);
        let v = plan_values(&pol, &plan).unwrap();
        assert!((v[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn brute_force_coin() {
        let m = fixtures::coin_persuasion();
        let opt = brute_force_optimum(&m).unwrap();
        assert!((opt.value - 0.8).abs() < 1e-9);
        assert!((opt.argvec[1] - 0.6).abs() < 1e-9);
        // principal observation 1 is tails
        assert!((opt.table[1][0][0] - 2.0 / 3.0).abs() < 1e-6, "{:?}", opt.table);
        let pol = opt.policy(&m).unwrap();
        let v = exact_policy_values(&pol).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-9 && (v[1] - 0.6).abs() < 1e-9);
        assert!(ic_check(&pol, 1e-9).unwrap().pass);
    }

    #[test]
    fn brute_force_rejects_other_horizons() {
        let m = fixtures::mechanism_design();
        assert!(matches!(brute_force_optimum(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn brute_force_zero_model() {
        let m = fixtures::uniform_zero_model(2, 2, 2, 2, 2, 2);
        assert_eq!(brute_force_optimum(&m).unwrap().value, 0.0);
    }

    #[test]
    fn aligned_interests_reach_the_plain_maximum() {
        let mut m = fixtures::random_model(&fixtures::RandomSpec::medium(2), 11);
        m.rewards_agent = m.rewards_principal.clone();
        let dims = m.dims();
        let probs = m.outcome_dist(1, StateActionKey::Root);
        // the principal picks the best joint action for each (ω^P, ω^A) cell
        let mut best = 0.0;
        for op in 0..dims.principal_obs {
            for oa in 0..dims.agent_obs {
                best += (0..dims.joint_actions())
                    .map(|a| {
                        let (ap, aa) = dims.split_joint(a);
                        (0..dims.states)
                            .map(|s| probs[dims.outcome(s, op, oa)] * m.rewards(1, s, ap, aa)[0])
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let opt = brute_force_optimum(&m).unwrap();
        assert!((opt.value - best).abs() < 1e-9, "{} vs {best}", opt.value);
    }

    #[test]
    fn budget_is_enforced() {
        let m = fixtures::uniform_zero_model(2, 2, 2, 2, 2, 4);
        let pol = MarkovPolicy::constant(m, 0);
        let err = best_response_with(&pol, 100).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { budget: 100, .. }));
        assert!(estimate_nodes(pol.model(), true) > estimate_nodes(pol.model(), false));
    }

    #[test]
    fn best_response_dominates_truthful() {
        for seed in 0..8 {
            let m = fixtures::random_model(&fixtures::RandomSpec::small(3), seed);
            let dims = m.dims();
            let n = dims.joint_actions();
            let tables = (0..m.horizon)
                .map(|h| {
                    (0..dims.principal_obs)
                        .map(|op| {
                            (0..dims.agent_obs)
                                .map(|oa| {
                                    let mut d = vec![0.0; n];
                                    d[(h + op + oa) % n] += 0.5;
                                    d[(h * 7 + op * 3 + oa * 5 + seed as usize) % n] += 0.5;
                                    d
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let pol = MarkovPolicy::new(m, tables).unwrap();
            let truthful = exact_policy_values(&pol).unwrap();
            let br = best_response(&pol).unwrap();
            assert!(br.value >= truthful[1] - 1e-12, "seed {seed}");
            let v = plan_values(&pol, &br.plan()).unwrap();
            assert!((v[1] - br.value).abs() < 1e-9, "seed {seed}");
            assert!((v[0] - br.principal_value).abs() < 1e-9, "seed {seed}");
        }
    }
}
