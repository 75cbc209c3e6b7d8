//! Game model: the finite-horizon two-player POMDP the solver works on.
//!
//! A model holds the state, action and observation sets, the horizon `H`,
//! the initial distribution over `S × Ω^P × Ω^A`, per-step transition tables
//! and per-step reward tables for both players. Rewards lie in `[0, 1]` and
//! the step-`H` rewards are zero.
//!
//! The solver assumes hindsight observability: the whole step interaction
//! (state, observations, report, actions) becomes common knowledge at the end
//! of each step. The file format does not encode that assumption; solutions
//! computed for models where it does not hold are not meaningful.
//!
//! Rewards outside `[0, 1]` can be brought into range with the affine map
//! `r ↦ (r − r_min) / (r_max − r_min)` applied per player before loading;
//! this rescales every value vector by the same map.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Rows must sum to one within this slack.
pub const PROB_TOL: f64 = 1e-9;

/// Rows whose sum is off by less than this are left untouched by the loader,
/// which keeps load/serialize round trips bit-exact.
const RENORM_SKIP: f64 = 1e-12;

/// Finite-horizon principal-agent game `⟨S, A, Ω, p, r⟩` with horizon `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameModel {
    pub states: Vec<String>,
    pub principal_actions: Vec<String>,
    pub agent_actions: Vec<String>,
    pub principal_obs: Vec<String>,
    pub agent_obs: Vec<String>,
    pub horizon: usize,
    /// `p_0` flattened over `S × Ω^P × Ω^A` (row-major).
    pub initial: Vec<f64>,
    /// `p_h(· | s, a^P, a^A)` for `h = 1..H-1`, indexed `[h-1][s][a^P][a^A]`.
    pub transitions: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `r_h^P` for `h = 1..H`, indexed `[h-1][s][a^P][a^A]`.
    pub rewards_principal: Vec<Vec<Vec<Vec<f64>>>>,
    /// `r_h^A` for `h = 1..H`, indexed `[h-1][s][a^P][a^A]`.
    pub rewards_agent: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Cardinalities of the model's index sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub states: usize,
    pub principal_actions: usize,
    pub agent_actions: usize,
    pub principal_obs: usize,
    pub agent_obs: usize,
}

impl Dims {
    pub fn joint_actions(&self) -> usize {
        self.principal_actions * self.agent_actions
    }

    /// Size of the flat outcome space `S × Ω^P × Ω^A`.
    pub fn outcomes(&self) -> usize {
        self.states * self.principal_obs * self.agent_obs
    }

    pub fn outcome(&self, state: usize, principal_obs: usize, agent_obs: usize) -> usize {
        (state * self.principal_obs + principal_obs) * self.agent_obs + agent_obs
    }

    pub fn split_outcome(&self, idx: usize) -> (usize, usize, usize) {
        let agent_obs = idx % self.agent_obs;
        let rest = idx / self.agent_obs;
        (rest / self.principal_obs, rest % self.principal_obs, agent_obs)
    }

    /// Canonical joint-action index: principal action major, agent action minor.
    pub fn joint(&self, principal_action: usize, agent_action: usize) -> usize {
        principal_action * self.agent_actions + agent_action
    }

    pub fn split_joint(&self, a: usize) -> (usize, usize) {
        (a / self.agent_actions, a % self.agent_actions)
    }

    /// Number of non-root state-action keys `|S × A|`.
    pub fn pairs(&self) -> usize {
        self.states * self.joint_actions()
    }

    /// Number of one-step interactions `|Σ̄| = |S||Ω||Ω^A||A||A^A|`.
    pub fn interactions(&self) -> usize {
        self.outcomes() * self.agent_obs * self.joint_actions() * self.agent_actions
    }
}

/// The state-action pair that ends a history, or the empty-history marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateActionKey {
    Root,
    Pair {
        state: usize,
        principal_action: usize,
        agent_action: usize,
    },
}

impl StateActionKey {
    pub fn pair(state: usize, principal_action: usize, agent_action: usize) -> Self {
        StateActionKey::Pair {
            state,
            principal_action,
            agent_action,
        }
    }

    /// Flat index among the non-root keys, `None` for the root.
    pub fn index(&self, dims: &Dims) -> Option<usize> {
        match *self {
            StateActionKey::Root => None,
            StateActionKey::Pair {
                state,
                principal_action,
                agent_action,
            } => Some(state * dims.joint_actions() + dims.joint(principal_action, agent_action)),
        }
    }

    pub fn from_index(dims: &Dims, idx: usize) -> Self {
        let state = idx / dims.joint_actions();
        let (principal_action, agent_action) = dims.split_joint(idx % dims.joint_actions());
        StateActionKey::pair(state, principal_action, agent_action)
    }
}

impl fmt::Display for StateActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateActionKey::Root => write!(f, "∅"),
            StateActionKey::Pair {
                state,
                principal_action,
                agent_action,
            } => write!(f, "({state}, {principal_action}, {agent_action})"),
        }
    }
}

/// Everything that happens within one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepInteraction {
    pub state: usize,
    pub principal_obs: usize,
    pub agent_obs: usize,
    pub reported_obs: usize,
    pub principal_action: usize,
    pub recommended_action: usize,
    pub played_action: usize,
}

impl StepInteraction {
    /// Key of the value set that follows this interaction.
    pub fn next_key(&self) -> StateActionKey {
        StateActionKey::pair(self.state, self.principal_action, self.played_action)
    }

    pub fn is_truthful(&self) -> bool {
        self.reported_obs == self.agent_obs && self.played_action == self.recommended_action
    }

    fn check(&self, dims: &Dims) -> bool {
        self.state < dims.states
            && self.principal_obs < dims.principal_obs
            && self.agent_obs < dims.agent_obs
            && self.reported_obs < dims.agent_obs
            && self.principal_action < dims.principal_actions
            && self.recommended_action < dims.agent_actions
            && self.played_action < dims.agent_actions
    }
}

/// Sequence of step interactions, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History(pub Vec<StepInteraction>);

impl History {
    pub fn new() -> Self {
        History(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[StepInteraction] {
        &self.0
    }

    /// Key conditioning the next draw: the last state-action pair, or the root.
    pub fn key(&self) -> StateActionKey {
        self.0.last().map_or(StateActionKey::Root, StepInteraction::next_key)
    }

    pub fn prefix(&self, len: usize) -> History {
        History(self.0[..len].to_vec())
    }

    pub fn extended(&self, step: StepInteraction) -> History {
        let mut steps = Vec::with_capacity(self.0.len() + 1);
        steps.extend_from_slice(&self.0);
        steps.push(step);
        History(steps)
    }

    pub fn push(&mut self, step: StepInteraction) {
        self.0.push(step);
    }
}

/// Which player a reward table belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Principal,
    Agent,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Principal => write!(f, "principal"),
            Player::Agent => write!(f, "agent"),
        }
    }
}

/// Location of a probability row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbRow {
    Initial,
    Transition {
        step: usize,
        state: usize,
        principal_action: usize,
        agent_action: usize,
    },
}

impl fmt::Display for ProbRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbRow::Initial => write!(f, "initial"),
            ProbRow::Transition {
                step,
                state,
                principal_action,
                agent_action,
            } => write!(
                f,
                "transitions[{}][{state}][{principal_action}][{agent_action}]",
                step - 1
            ),
        }
    }
}

/// A single broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape { what: String, expected: usize, found: usize },
    EmptySet { what: &'static str },
    NonFinite { row: ProbRow, cell: usize },
    NegativeProbability { row: ProbRow, cell: usize, value: f64 },
    RowSum { row: ProbRow, sum: f64 },
    RewardNonFinite { player: Player, step: usize, state: usize, principal_action: usize, agent_action: usize },
    RewardRange { player: Player, step: usize, state: usize, principal_action: usize, agent_action: usize, value: f64 },
    TerminalReward { player: Player, state: usize, principal_action: usize, agent_action: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { what, expected, found } => {
                write!(f, "shape: {what} has length {found}, expected {expected}")
            }
            Violation::EmptySet { what } => write!(f, "shape: `{what}` must be nonempty"),
            Violation::NonFinite { row, cell } => write!(f, "stochasticity: {row} cell {cell} is not finite"),
            Violation::NegativeProbability { row, cell, value } => {
                write!(f, "stochasticity: {row} cell {cell} is negative ({value})")
            }
            Violation::RowSum { row, sum } => {
                write!(f, "stochasticity: {row} sums to {sum}, expected 1 within {PROB_TOL:e}")
            }
            Violation::RewardNonFinite { player, step, state, principal_action, agent_action } => write!(
                f,
                "reward-range: {player} reward at step {step} ({state}, {principal_action}, {agent_action}) is not finite"
            ),
            Violation::RewardRange { player, step, state, principal_action, agent_action, value } => write!(
                f,
                "reward-range: {player} reward {value} at step {step} ({state}, {principal_action}, {agent_action}) is outside [0, 1]"
            ),
            Violation::TerminalReward { player, state, principal_action, agent_action, value } => write!(
                f,
                "terminal-zero: {player} reward {value} at the last step ({state}, {principal_action}, {agent_action}) must be 0"
            ),
        }
    }
}

/// Probability of an agent observation and the posterior over `S × Ω^P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsConditional {
    pub marginal: f64,
    /// `None` when the marginal is zero and the conditional is undefined.
    pub conditional: Option<Vec<f64>>,
}

/// Parses, shape-checks, renormalizes and validates a serialized game file.
pub fn load_model(bytes: &[u8]) -> Result<GameModel, ModelError> {
    let mut model: GameModel = serde_json::from_slice(bytes).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let shape = shape_violations(&model);
    if !shape.is_empty() {
        return Err(ModelError::Invalid(shape));
    }
    model.renormalize();
    validate_model(&model).map_err(ModelError::Invalid)?;
    Ok(model)
}

/// Returns every invariant the model breaks.
pub fn validate_model(m: &GameModel) -> Result<(), Vec<Violation>> {
    let mut out = shape_violations(m);
    if !out.is_empty() {
        return Err(out);
    }
    let dims = m.dims();
    for (row, probs) in m.prob_rows() {
        check_row(row, probs, &mut out);
    }
    for (player, table) in [
        (Player::Principal, &m.rewards_principal),
        (Player::Agent, &m.rewards_agent),
    ] {
        for (hi, per_state) in table.iter().enumerate() {
            let step = hi + 1;
            for s in 0..dims.states {
                for ap in 0..dims.principal_actions {
                    for aa in 0..dims.agent_actions {
                        let value = per_state[s][ap][aa];
                        let (state, principal_action, agent_action) = (s, ap, aa);
                        if !value.is_finite() {
                            out.push(Violation::RewardNonFinite { player, step, state, principal_action, agent_action });
                        } else if !(0.0..=1.0).contains(&value) {
                            out.push(Violation::RewardRange { player, step, state, principal_action, agent_action, value });
                        } else if step == m.horizon && value != 0.0 {
                            out.push(Violation::TerminalReward { player, state, principal_action, agent_action, value });
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn check_row(row: ProbRow, probs: &[f64], out: &mut Vec<Violation>) {
    let mut bad = false;
    for (cell, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::NonFinite { row, cell });
            bad = true;
        } else if p < 0.0 {
            out.push(Violation::NegativeProbability { row, cell, value: p });
            bad = true;
        }
    }
    if !bad {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(Violation::RowSum { row, sum });
        }
    }
}

fn shape_violations(m: &GameModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (what, set) in [
        ("states", &m.states),
        ("principal_actions", &m.principal_actions),
        ("agent_actions", &m.agent_actions),
        ("principal_obs", &m.principal_obs),
        ("agent_obs", &m.agent_obs),
    ] {
        if set.is_empty() {
            out.push(Violation::EmptySet { what });
        }
    }
    if m.horizon == 0 {
        out.push(Violation::Shape { what: "horizon".into(), expected: 1, found: 0 });
    }
    if !out.is_empty() {
        return out;
    }
    let dims = m.dims();
    let mut expect = |what: String, expected: usize, found: usize| {
        if expected != found {
            out.push(Violation::Shape { what, expected, found });
        }
    };
    expect("initial".into(), dims.outcomes(), m.initial.len());
    expect("transitions".into(), m.horizon - 1, m.transitions.len());
    for (hi, t) in m.transitions.iter().enumerate() {
        expect(format!("transitions[{hi}]"), dims.states, t.len());
        for (s, ts) in t.iter().enumerate() {
            expect(format!("transitions[{hi}][{s}]"), dims.principal_actions, ts.len());
            for (ap, tsa) in ts.iter().enumerate() {
                expect(format!("transitions[{hi}][{s}][{ap}]"), dims.agent_actions, tsa.len());
                for (aa, row) in tsa.iter().enumerate() {
                    expect(format!("transitions[{hi}][{s}][{ap}][{aa}]"), dims.outcomes(), row.len());
                }
            }
        }
    }
    for (name, table) in [("rewards_principal", &m.rewards_principal), ("rewards_agent", &m.rewards_agent)] {
        expect(name.into(), m.horizon, table.len());
        for (hi, t) in table.iter().enumerate() {
            expect(format!("{name}[{hi}]"), dims.states, t.len());
            for (s, ts) in t.iter().enumerate() {
                expect(format!("{name}[{hi}][{s}]"), dims.principal_actions, ts.len());
                for (ap, tsa) in ts.iter().enumerate() {
                    expect(format!("{name}[{hi}][{s}][{ap}]"), dims.agent_actions, tsa.len());
                }
            }
        }
    }
    out
}

impl GameModel {
    pub fn dims(&self) -> Dims {
        Dims {
            states: self.states.len(),
            principal_actions: self.principal_actions.len(),
            agent_actions: self.agent_actions.len(),
            principal_obs: self.principal_obs.len(),
            agent_obs: self.agent_obs.len(),
        }
    }

    /// `p_{h-1}(· | o)` flattened over `S × Ω^P × Ω^A`; the root key at `h = 1`.
    ///
    /// Panics if the key does not match the step.
    pub fn outcome_dist(&self, h: usize, key: StateActionKey) -> &[f64] {
        match key {
            StateActionKey::Root => {
                assert_eq!(h, 1, "root key is only valid at step 1");
                &self.initial
            }
            StateActionKey::Pair {
                state,
                principal_action,
                agent_action,
            } => {
                assert!(h >= 2 && h <= self.horizon, "step {h} has no predecessor pair");
                &self.transitions[h - 2][state][principal_action][agent_action]
            }
        }
    }

    pub fn reward(&self, player: Player, h: usize, state: usize, principal_action: usize, agent_action: usize) -> f64 {
        let table = match player {
            Player::Principal => &self.rewards_principal,
            Player::Agent => &self.rewards_agent,
        };
        table[h - 1][state][principal_action][agent_action]
    }

    /// Both players' rewards at step `h`.
    pub fn rewards(&self, h: usize, state: usize, principal_action: usize, agent_action: usize) -> [f64; 2] {
        [
            self.rewards_principal[h - 1][state][principal_action][agent_action],
            self.rewards_agent[h - 1][state][principal_action][agent_action],
        ]
    }

    /// Valid keys at step `h`: the root at `h = 1`, every pair afterwards.
    pub fn keys_at(&self, h: usize) -> Vec<StateActionKey> {
        if h == 1 {
            vec![StateActionKey::Root]
        } else {
            let dims = self.dims();
            (0..dims.pairs()).map(|i| StateActionKey::from_index(&dims, i)).collect()
        }
    }

    pub fn check_key(&self, h: usize, key: StateActionKey) -> bool {
        let dims = self.dims();
        match key {
            StateActionKey::Root => h == 1,
            StateActionKey::Pair {
                state,
                principal_action,
                agent_action,
            } => {
                h >= 2
                    && h <= self.horizon
                    && state < dims.states
                    && principal_action < dims.principal_actions
                    && agent_action < dims.agent_actions
            }
        }
    }

    pub fn check_history(&self, history: &History) -> bool {
        let dims = self.dims();
        history.len() <= self.horizon && history.steps().iter().all(|s| s.check(&dims))
    }

    fn prob_rows(&self) -> Vec<(ProbRow, &[f64])> {
        let mut rows: Vec<(ProbRow, &[f64])> = vec![(ProbRow::Initial, &self.initial)];
        for (hi, t) in self.transitions.iter().enumerate() {
            for (s, ts) in t.iter().enumerate() {
                for (ap, tsa) in ts.iter().enumerate() {
                    for (aa, row) in tsa.iter().enumerate() {
                        let loc = ProbRow::Transition {
                            step: hi + 1,
                            state: s,
                            principal_action: ap,
                            agent_action: aa,
                        };
                        rows.push((loc, row));
                    }
                }
            }
        }
        rows
    }

    /// Rescales rows whose sum is within tolerance of one.
    fn renormalize(&mut self) {
        fn fix(row: &mut [f64]) {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return;
            }
            let sum: f64 = row.iter().sum();
            let off = (sum - 1.0).abs();
            if off > RENORM_SKIP && off <= PROB_TOL {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        fix(&mut self.initial);
        for row in self.transitions.iter_mut().flatten().flatten().flatten() {
            fix(row);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Largest total reward any play can collect, used for sanity bounds.
    pub fn max_total_reward(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (k, table) in [&self.rewards_principal, &self.rewards_agent].into_iter().enumerate() {
            out[k] = table
                .iter()
                .map(|t| t.iter().flatten().flatten().fold(0.0f64, |m, &r| m.max(r)))
                .sum();
        }
        out
    }
}

/// Marginal of `agent_obs` under `p_{h-1}(· | o)` and the posterior over `S × Ω^P`.
pub fn conditional_obs_prob(
    m: &GameModel,
    h: usize,
    key: StateActionKey,
    agent_obs: usize,
) -> Result<ObsConditional, ModelError> {
    let dims = m.dims();
    if agent_obs >= dims.agent_obs || h == 0 || h > m.horizon || !m.check_key(h, key) {
        return Err(ModelError::OutOfBounds(format!(
            "step {h}, key {key}, agent observation {agent_obs}"
        )));
    }
    let dist = m.outcome_dist(h, key);
    let mut joint = Vec::with_capacity(dims.states * dims.principal_obs);
    for s in 0..dims.states {
        for op in 0..dims.principal_obs {
            joint.push(dist[dims.outcome(s, op, agent_obs)]);
        }
    }
    let marginal: f64 = joint.iter().sum();
    let conditional = (marginal > 0.0).then(|| joint.iter().map(|p| p / marginal).collect());
    Ok(ObsConditional { marginal, conditional })
}

/// Inverse-CDF draw from a finite distribution. Falls back to the last
/// positive entry when rounding leaves `u` past the cumulative total.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Draws `(state, principal_obs, agent_obs)` from `p_{h-1}(· | o)`.
pub fn sample_step<R: Rng + ?Sized>(m: &GameModel, h: usize, key: StateActionKey, rng: &mut R) -> (usize, usize, usize) {
    let idx = sample_index(m.outcome_dist(h, key), rng);
    m.dims().split_outcome(idx)
}
