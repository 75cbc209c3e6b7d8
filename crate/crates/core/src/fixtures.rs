//! Built-in game fixtures and a seeded random-instance generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{load_model, GameModel};

pub const COIN_PERSUASION_JSON: &str = include_str!("../fixtures/coin-persuasion-v1.json");
pub const MECHANISM_DESIGN_JSON: &str = include_str!("../fixtures/mechanism-design-h3.json");
pub const MATCHING_PENNIES_JSON: &str = include_str!("../fixtures/matching-pennies.json");

/// Registry names accepted wherever a model path is expected.
pub const NAMES: [&str; 3] = ["coin-persuasion-v1", "mechanism-design-h3", "matching-pennies"];

pub fn by_name(name: &str) -> Option<GameModel> {
    let json = match name {
        "coin-persuasion-v1" => COIN_PERSUASION_JSON,
        "mechanism-design-h3" => MECHANISM_DESIGN_JSON,
        "matching-pennies" => MATCHING_PENNIES_JSON,
        _ => return None,
    };
    Some(load_model(json.as_bytes()).expect("built-in fixture is valid"))
}

/// Two-state signalling game: the principal sees a biased coin and the agent
/// is paid for guessing it, while the principal always wants `playH`.
pub fn coin_persuasion() -> GameModel {
    by_name("coin-persuasion-v1").unwrap()
}

/// Repeated allocation with a privately informed agent who always wants `grant`.
pub fn mechanism_design() -> GameModel {
    by_name("mechanism-design-h3").unwrap()
}

/// Outside option worth 0.6 against a hidden-coin guessing game the principal
/// wants the agent to lose.
pub fn matching_pennies() -> GameModel {
    by_name("matching-pennies").unwrap()
}

fn table4(h: usize, s: usize, ap: usize, aa: usize, v: f64) -> Vec<Vec<Vec<Vec<f64>>>> {
    vec![vec![vec![vec![v; aa]; ap]; s]; h]
}

/// Zero rewards and uniform transitions.
pub fn uniform_zero_model(
    states: usize,
    principal_actions: usize,
    agent_actions: usize,
    principal_obs: usize,
    agent_obs: usize,
    horizon: usize,
) -> GameModel {
    let outcomes = states * principal_obs * agent_obs;
    let uniform = vec![1.0 / outcomes as f64; outcomes];
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    GameModel {
        states: names("s", states),
        principal_actions: names("p", principal_actions),
        agent_actions: names("a", agent_actions),
        principal_obs: names("o", principal_obs),
        agent_obs: names("w", agent_obs),
        horizon,
        initial: uniform.clone(),
        transitions: vec![vec![vec![vec![uniform; agent_actions]; principal_actions]; states]; horizon - 1],
        rewards_principal: table4(horizon, states, principal_actions, agent_actions, 0.0),
        rewards_agent: table4(horizon, states, principal_actions, agent_actions, 0.0),
    }
}

/// Single state, action and observation; both players earn 1 per non-terminal step.
pub fn constant_reward_model(horizon: usize) -> GameModel {
    let mut m = uniform_zero_model(1, 1, 1, 1, 1, horizon);
    for h in 0..horizon - 1 {
        m.rewards_principal[h][0][0][0] = 1.0;
        m.rewards_agent[h][0][0][0] = 1.0;
    }
    m
}

/// Size caps for [`random_model`]; each dimension is drawn from `1..=max`.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub horizon: usize,
    pub max_states: usize,
    pub max_principal_actions: usize,
    pub max_agent_actions: usize,
    pub max_principal_obs: usize,
    pub max_agent_obs: usize,
}

impl RandomSpec {
    pub fn small(horizon: usize) -> Self {
        RandomSpec {
            horizon,
            max_states: 2,
            max_principal_actions: 2,
            max_agent_actions: 2,
            max_principal_obs: 2,
            max_agent_obs: 2,
        }
    }

    pub fn medium(horizon: usize) -> Self {
        RandomSpec {
            horizon,
            max_states: 2,
            max_principal_actions: 3,
            max_agent_actions: 3,
            max_principal_obs: 3,
            max_agent_obs: 3,
        }
    }
}

/// Random instance with rewards on the grid `{0, 1/4, …, 1}` and sparse
/// integer-weight transition rows.
pub fn random_model(spec: &RandomSpec, seed: u64) -> GameModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |max: usize| rng.random_range(1..=max);
    let s = pick(spec.max_states);
    let ap = pick(spec.max_principal_actions);
    let aa = pick(spec.max_agent_actions);
    let op = pick(spec.max_principal_obs);
    let oa = pick(spec.max_agent_obs);
    let mut m = uniform_zero_model(s, ap, aa, op, oa, spec.horizon);
    let outcomes = s * op * oa;
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let w: Vec<u32> = (0..outcomes)
                .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..=4) })
                .collect();
            let total: u32 = w.iter().sum();
            if total > 0 {
                return w.iter().map(|&x| x as f64 / total as f64).collect();
            }
        }
    };
    m.initial = row(&mut rng);
    for t in m.transitions.iter_mut() {
        for cell in t.iter_mut().flatten().flatten() {
            *cell = row(&mut rng);
        }
    }
    for h in 0..spec.horizon - 1 {
        for table in [&mut m.rewards_principal, &mut m.rewards_agent] {
            for r in table[h].iter_mut().flatten().flatten() {
                *r = rng.random_range(0..=4) as f64 / 4.0;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn fixtures_load() {
        for name in NAMES {
            let m = by_name(name).unwrap();
            assert!(validate_model(&m).is_ok(), "{name}");
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn random_models_validate() {
        for seed in 0..50 {
            let m = random_model(&RandomSpec::medium(3), seed);
            assert!(validate_model(&m).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn random_models_are_seeded() {
        let spec = RandomSpec::small(2);
        assert_eq!(random_model(&spec, 4), random_model(&spec, 4));
    }
}
