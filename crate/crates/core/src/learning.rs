//! Explore-then-commit learning with two-sided regret measurement.
//!
//! The learner only touches the environment through sampled episodes. The
//! benchmarks (`V*`, best responses, expected values of each episode's
//! policy) are computed exactly on the true model by the oracle and are
//! measurement only.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{Constraint, Relation, Tolerances};
use crate::model::{validate_model, Dims, GameModel, History, StateActionKey};
use crate::oracle;
use crate::policy_forward::{rollout, CommitmentPolicy, DeviationPlan, OneStepPolicy, PolicyHandle};
use crate::valueset_dp::{build_attainable_polytopes, build_with, max_principal_value, root_system, BuildOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningConfig {
    pub episodes: usize,
    pub failure_prob: f64,
    pub seed: u64,
    pub c_explore: f64,
    /// Overrides `(ζ/T)^{1/3}`.
    pub delta: Option<f64>,
    /// Overrides the default exploration budget.
    pub n0: Option<usize>,
    /// Simulate a best-responding agent during the commit phase.
    pub adversarial: bool,
    #[serde(skip)]
    pub tol: Tolerances,
}

impl LearningConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        LearningConfig {
            episodes,
            failure_prob: 0.05,
            seed,
            c_explore: 1.0,
            delta: None,
            n0: None,
            adversarial: false,
            tol: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.episodes == 0 {
            return bad("at least one episode is needed".into());
        }
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return bad(format!("failure probability must lie in (0, 1), got {}", self.failure_prob));
        }
        if !(self.c_explore > 0.0) || !self.c_explore.is_finite() {
            return bad(format!("exploration constant must be positive, got {}", self.c_explore));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) || !d.is_finite() {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(n) = self.n0 {
            if n == 0 || n > self.episodes {
                return bad(format!("exploration budget must lie in 1..={}, got {n}", self.episodes));
            }
        }
        Ok(())
    }

    /// `(ζ/T)^{1/3}` unless overridden.
    pub fn delta_for(&self, m: &GameModel) -> f64 {
        self.delta.unwrap_or_else(|| (zeta(m) / self.episodes as f64).cbrt())
    }

    /// `⌈c ζ^{1/3} T^{2/3}⌉`, capped at `T − 1` so that at least one episode
    /// commits (a single episode is all exploration).
    pub fn n0_for(&self, m: &GameModel) -> usize {
        if let Some(n) = self.n0 {
            return n;
        }
        let t = self.episodes as f64;
        let raw = (self.c_explore * zeta(m).cbrt() * t.powf(2.0 / 3.0)).ceil() as usize;
        raw.clamp(1, self.episodes.saturating_sub(1).max(1))
    }
}

/// `ζ = H⁵ |S|² |A|³ |Ω|²`.
pub fn zeta(m: &GameModel) -> f64 {
    let d = m.dims();
    let h = m.horizon as f64;
    let s = d.states as f64;
    let a = d.joint_actions() as f64;
    let o = (d.principal_obs * d.agent_obs) as f64;
    h.powi(5) * s * s * a.powi(3) * o * o
}

/// Empirical transition model with its sample counts.
#[derive(Debug, Clone)]
pub struct EstimatedModel {
    /// Same shape and rewards as the environment, with `p̂` in place of `p`.
    pub model: GameModel,
    /// Draws of the initial outcome.
    pub initial_counts: Vec<u64>,
    /// `transition_counts[h-1][key][outcome]`: outcomes at step `h + 1` after `key` at step `h`.
    pub transition_counts: Vec<Vec<Vec<u64>>>,
}

impl EstimatedModel {
    /// No samples: every row uniform.
    pub fn empty(shape: &GameModel) -> Self {
        let dims = shape.dims();
        let n_out = dims.outcomes();
        let mut model = shape.clone();
        let uniform = vec![1.0 / n_out as f64; n_out];
        model.initial = uniform.clone();
        for row in model.transitions.iter_mut().flatten().flatten().flatten() {
            *row = uniform.clone();
        }
        EstimatedModel {
            model,
            initial_counts: vec![0; n_out],
            transition_counts: vec![vec![vec![0; n_out]; dims.pairs()]; shape.horizon.saturating_sub(1)],
        }
    }

    /// Visits of state-action pair `key` at step `h`, i.e. samples of its row.
    pub fn visits(&self, h: usize, key: StateActionKey) -> u64 {
        let dims = self.model.dims();
        match key.index(&dims) {
            Some(i) if h >= 1 && h < self.model.horizon => self.transition_counts[h - 1][i].iter().sum(),
            _ => 0,
        }
    }

    /// Adds one episode's outcomes and refreshes the touched rows.
    pub fn record(&mut self, history: &History) {
        let dims = self.model.dims();
        let steps = history.steps();
        let Some(first) = steps.first() else { return };
        self.initial_counts[dims.outcome(first.state, first.principal_obs, first.agent_obs)] += 1;
        self.model.initial = frequencies(&self.initial_counts);
        for (i, pair) in steps.windows(2).enumerate() {
            let key = pair[0].next_key();
            let k = key.index(&dims).expect("pair key");
            let out = dims.outcome(pair[1].state, pair[1].principal_obs, pair[1].agent_obs);
            let counts = &mut self.transition_counts[i][k];
            counts[out] += 1;
            let row = frequencies(counts);
            let StateActionKey::Pair {
                state,
                principal_action,
                agent_action,
            } = key
            else {
                unreachable!()
            };
            self.model.transitions[i][state][principal_action][agent_action] = row;
        }
    }

    /// Largest row-wise L1 distance to another model's probabilities.
    pub fn max_l1_error(&self, truth: &GameModel) -> f64 {
        let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        let mut worst = l1(&self.model.initial, &truth.initial);
        for (a, b) in self
            .model
            .transitions
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .zip(truth.transitions.iter().flatten().flatten().flatten())
        {
            worst = worst.max(l1(a, b));
        }
        worst
    }
}

fn frequencies(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Deterministic policy of the state `(h, previous pair, ω^P, ω^A)` of the
/// effective process, played against a truthful agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyedPolicy {
    /// `choice[h-1][key][ω^P · |Ω^A| + ω̃^A]`, a joint action.
    choice: Vec<Vec<Vec<usize>>>,
}

/// A policy evaluated on a model other than the one it was computed for.
pub struct OnModel<'a, P: ?Sized> {
    pub model: &'a GameModel,
    pub policy: &'a P,
}

impl<P: CommitmentPolicy + ?Sized> CommitmentPolicy for OnModel<'_, P> {
    fn model(&self) -> &GameModel {
        self.model
    }

    fn distribution(&self, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>> {
        self.policy.distribution(history, principal_obs, reported_obs)
    }
}

/// [`KeyedPolicy`] bound to a model.
pub struct BoundKeyed<'a> {
    pub model: &'a GameModel,
    pub policy: &'a KeyedPolicy,
}

impl CommitmentPolicy for BoundKeyed<'_> {
    fn model(&self) -> &GameModel {
        self.model
    }

    fn distribution(&self, history: &History, principal_obs: usize, reported_obs: usize) -> Result<Vec<f64>> {
        let dims = self.model.dims();
        let h = history.len() + 1;
        if h > self.model.horizon || principal_obs >= dims.principal_obs || reported_obs >= dims.agent_obs {
            return Err(Error::InvalidArgument("history or observation out of range".into()));
        }
        let k = key_slot(&dims, history.key());
        let joint = self.policy.choice[h - 1][k][principal_obs * dims.agent_obs + reported_obs];
        Ok(OneStepPolicy::point_mass(dims, joint).dist(principal_obs, reported_obs).to_vec())
    }
}

fn key_slot(dims: &Dims, key: StateActionKey) -> usize {
    key.index(dims).unwrap_or(0)
}

/// Count-bonus explorer on the effective process over `(previous pair, ω)`.
#[derive(Debug, Clone)]
pub struct Explorer {
    pub estimate: EstimatedModel,
    /// `counts[h-1][key][ω][a]` for steps `1..H−1`.
    counts: Vec<Vec<Vec<Vec<u64>>>>,
    c_explore: f64,
}

impl Explorer {
    pub fn new(env_shape: &GameModel, c_explore: f64) -> Self {
        let dims = env_shape.dims();
        let steps = env_shape.horizon.saturating_sub(1);
        let n_obs = dims.principal_obs * dims.agent_obs;
        let counts = (1..=steps)
            .map(|h| {
                let keys = if h == 1 { 1 } else { dims.pairs() };
                vec![vec![vec![0; dims.joint_actions()]; n_obs]; keys]
            })
            .collect();
        Explorer {
            estimate: EstimatedModel::empty(env_shape),
            counts,
            c_explore,
        }
    }

    fn bonus(&self, n: u64) -> f64 {
        (self.c_explore / (n.max(1) as f64).sqrt()).min(1.0)
    }

    /// Greedy policy for the bonus reward under the current estimate.
    pub fn policy(&self) -> KeyedPolicy {
        let m = &self.estimate.model;
        let dims = m.dims();
        let big_h = m.horizon;
        let n_obs = dims.principal_obs * dims.agent_obs;
        let n_a = dims.joint_actions();
        // w[key] = optimal bonus-to-go from step h + 1 after `key`
        let mut w_next = vec![0.0; dims.pairs()];
        let mut choice = vec![vec![vec![0; n_obs]; 1]; big_h];
        for h in (1..big_h).rev() {
            let keys = m.keys_at(h);
            let mut w_here = vec![0.0; dims.pairs()];
            let mut table = vec![vec![0; n_obs]; keys.len()];
            for (ki, &key) in keys.iter().enumerate() {
                let dist = m.outcome_dist(h, key);
                let mut total = 0.0;
                for op in 0..dims.principal_obs {
                    for oa in 0..dims.agent_obs {
                        let mass: Vec<f64> = (0..dims.states).map(|s| dist[dims.outcome(s, op, oa)]).collect();
                        let z: f64 = mass.iter().sum();
                        let post: Vec<f64> = if z > 0.0 {
                            mass.iter().map(|p| p / z).collect()
                        } else {
                            vec![1.0 / dims.states as f64; dims.states]
                        };
                        let obs = op * dims.agent_obs + oa;
                        let mut best = (0, f64::NEG_INFINITY);
                        for a in 0..n_a {
                            let (ap, aa) = dims.split_joint(a);
                            let onward: f64 = if h + 1 < big_h {
                                (0..dims.states)
                                    .map(|s| post[s] * w_next[StateActionKey::pair(s, ap, aa).index(&dims).unwrap()])
                                    .sum()
                            } else {
                                0.0
                            };
                            let q = self.bonus(self.counts[h - 1][ki][obs][a]) + onward;
                            if q > best.1 {
                                best = (a, q);
                            }
                        }
                        table[ki][obs] = best.0;
                        total += z * best.1;
                    }
                }
                if h > 1 {
                    w_here[ki] = total;
                }
            }
            choice[h - 1] = table;
            w_next = w_here;
        }
        let last_keys = if big_h == 1 { 1 } else { dims.pairs() };
        choice[big_h - 1] = vec![vec![0; n_obs]; last_keys];
        KeyedPolicy { choice }
    }

    /// Updates visit counts and the estimate with one truthful episode.
    pub fn observe(&mut self, history: &History) {
        let dims = self.estimate.model.dims();
        let mut prefix = History::new();
        for (i, st) in history.steps().iter().enumerate() {
            if i + 1 < self.estimate.model.horizon {
                let k = key_slot(&dims, prefix.key());
                let obs = st.principal_obs * dims.agent_obs + st.agent_obs;
                self.counts[i][k][obs][dims.joint(st.principal_action, st.played_action)] += 1;
            }
            prefix.push(*st);
        }
        self.estimate.record(history);
    }

    /// Visits of `(h, θ, a)` in the effective process.
    pub fn visits(&self, h: usize, key: StateActionKey, principal_obs: usize, agent_obs: usize, joint: usize) -> u64 {
        let dims = self.estimate.model.dims();
        self.counts
            .get(h - 1)
            .map_or(0, |c| c[key_slot(&dims, key)][principal_obs * dims.agent_obs + agent_obs][joint])
    }
}

/// `N₀` episodes of count-bonus exploration against the environment.
pub fn explore_reward_free<R: Rng + ?Sized>(env: &GameModel, n0: usize, c_explore: f64, rng: &mut R) -> Result<EstimatedModel> {
    if n0 == 0 {
        return Err(Error::InvalidArgument("exploration needs at least one episode".into()));
    }
    let mut explorer = Explorer::new(env, c_explore);
    for _ in 0..n0 {
        let pol = explorer.policy();
        let (history, _) = rollout(&BoundKeyed { model: env, policy: &pol }, &DeviationPlan::Truthful, rng)?;
        explorer.observe(&history);
    }
    Ok(explorer.estimate)
}

/// Best `v^P` over the three-coordinate sets subject to `v^A ≥ v_*^A − δ`,
/// with sets built at grid accuracy `ε`.
pub fn solve_delta_ic(estimate: &GameModel, delta: f64, epsilon: f64, tol: &Tolerances) -> Result<PolicyHandle> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    validate_model(estimate).map_err(|v| Error::Model(crate::ModelError::Invalid(v)))?;
    let map = build_attainable_polytopes(estimate, epsilon, tol)?;
    let relax = Constraint {
        coeffs: vec![(1, 1.0), (2, -1.0)],
        relation: Relation::Ge,
        rhs: -delta,
    };
    PolicyHandle::optimal_with(Arc::new(estimate.clone()), Arc::new(map), &[relax], *tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Explore,
    Commit,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Explore => "explore",
            Phase::Commit => "commit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub phase: Phase,
    /// Sampled totals `(P, A)`.
    pub realized: [f64; 2],
    /// Exact totals of the episode's policy under the simulated agent.
    pub expected: [f64; 2],
    /// The agent's exact best-response value against the episode's policy.
    pub best_response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub episodes: Vec<EpisodeRecord>,
    pub reg_p: Vec<f64>,
    pub reg_a: Vec<f64>,
    pub v_star: f64,
    pub delta: f64,
    pub n0: usize,
    pub zeta: f64,
    /// Root target of the committed policy on the estimate.
    pub committed_target: Vec<f64>,
}

impl RegretReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,phase,regP_cum,regA_cum,vP_expected,vA_expected\n");
        for (i, e) in self.episodes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{:.9},{:.9}\n",
                e.episode, e.phase, self.reg_p[i], self.reg_a[i], e.expected[0], e.expected[1]
            ));
        }
        out
    }

    /// Per-episode agent terms of the commit phase.
    pub fn commit_agent_terms(&self) -> Vec<f64> {
        self.episodes
            .iter()
            .filter(|e| e.phase == Phase::Commit)
            .map(|e| (e.best_response - e.expected[1]).max(0.0))
            .collect()
    }
}

/// Prefix sums of `V* − V^P` (signed) and `max_ρ V^A − V^A` (floored at 0).
pub fn compute_regrets(v_star: f64, episodes: &[EpisodeRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::with_capacity(episodes.len());
    let mut a = Vec::with_capacity(episodes.len());
    let (mut sp, mut sa) = (0.0, 0.0);
    for e in episodes {
        sp += v_star - e.expected[0];
        sa += (e.best_response - e.expected[1]).max(0.0);
        p.push(sp);
        a.push(sa);
    }
    (p, a)
}

/// `V*` on the true model: exact for two steps, the solver at accuracy `ε` otherwise.
pub fn benchmark_value(env: &GameModel, epsilon: f64, tol: &Tolerances) -> Result<f64> {
    if env.horizon == 2 {
        return Ok(oracle::brute_force_optimum_with(env, tol)?.value);
    }
    let opts = BuildOptions { tol: *tol, ..BuildOptions::default() };
    let map = build_with(env, epsilon, &opts)?;
    let sys = root_system(env, &map)?;
    Ok(max_principal_value(&sys)?.0)
}

/// Explores for `N₀` episodes, commits to the δ-IC solution of the estimate
/// for the rest, and measures both players' regret.
pub fn run_learning(env: &GameModel, cfg: &LearningConfig) -> Result<RegretReport> {
    cfg.validate()?;
    validate_model(env).map_err(|v| Error::Model(crate::ModelError::Invalid(v)))?;
    let delta = cfg.delta_for(env);
    let n0 = cfg.n0_for(env);
    let v_star = benchmark_value(env, delta, &cfg.tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut explorer = Explorer::new(env, cfg.c_explore);
    let mut cache: HashMap<KeyedPolicy, ([f64; 2], f64)> = HashMap::new();
    for t in 1..=n0 {
        let pol = explorer.policy();
        let bound = BoundKeyed { model: env, policy: &pol };
        let (expected, best_response) = match cache.get(&pol) {
            Some(&v) => v,
            None => {
                let v = (oracle::exact_policy_values(&bound)?, oracle::best_response_value(&bound)?);
                cache.insert(pol.clone(), v);
                v
            }
        };
        let (history, realized) = rollout(&bound, &DeviationPlan::Truthful, &mut rng)?;
        explorer.observe(&history);
        episodes.push(EpisodeRecord {
            episode: t,
            phase: Phase::Explore,
            realized,
            expected,
            best_response,
        });
    }

    let mut committed_target = Vec::new();
    if n0 < cfg.episodes {
        let handle = solve_delta_ic(&explorer.estimate.model, delta, delta, &cfg.tol)?;
        committed_target = handle.target().to_vec();
        let on_env = OnModel { model: env, policy: &handle };
        let br = oracle::best_response(&on_env)?;
        let (plan, expected) = if cfg.adversarial {
            (br.plan(), [br.principal_value, br.value])
        } else {
            (DeviationPlan::Truthful, oracle::exact_policy_values(&on_env)?)
        };
        for t in n0 + 1..=cfg.episodes {
            let (_, realized) = rollout(&on_env, &plan, &mut rng)?;
            episodes.push(EpisodeRecord {
                episode: t,
                phase: Phase::Commit,
                realized,
                expected,
                best_response: br.value,
            });
        }
    }

    let (reg_p, reg_a) = compute_regrets(v_star, &episodes);
    Ok(RegretReport {
        episodes,
        reg_p,
        reg_a,
        v_star,
        delta,
        n0,
        zeta: zeta(env),
        committed_target,
    })
}
