//! DQN agent with experience replay and epsilon-greedy exploration.
//!
//! The TD target bootstraps from the live network; there is no target
//! network and no gradient clipping.

mod mlp;
mod replay;

use rand::seq::IndexedRandom;
use rand::Rng as _;

pub use mlp::{MlpParams, NUM_ACTIONS};
pub use replay::{ReplayBuffer, ReplayTransition};

use crate::embeddings::{state_input, StateRepr};
use crate::gridworld::{Action, GridWorld, StateId};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// `r` for terminal transitions, else `r + gamma * max(q_next)`.
pub fn td_target(reward: f64, q_next: &[f64; NUM_ACTIONS], terminal: bool, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// TD targets of `batch` under `params`.
pub fn td_targets(params: &MlpParams, batch: &[&ReplayTransition], gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let q_next = if t.terminal {
                [0.0; NUM_ACTIONS]
            } else {
                params.forward(&t.x_next)?
            };
            Ok(td_target(t.reward, &q_next, t.terminal, gamma))
        })
        .collect()
}

fn check_batch(batch: &[&ReplayTransition], targets: &[f64]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if batch.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} transitions but {} targets",
            batch.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Mean squared error between `Q(x)[a]` and fixed `targets`.
pub fn batch_loss(params: &MlpParams, batch: &[&ReplayTransition], targets: &[f64]) -> Result<f64> {
    check_batch(batch, targets)?;
    let mut sum = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let q = params.forward(&t.x)?;
        sum += (q[t.action.index()] - y).powi(2);
    }
    Ok(sum / batch.len() as f64)
}

/// [`batch_loss`] and its gradient, shaped like `params`.
pub fn batch_gradient(
    params: &MlpParams,
    batch: &[&ReplayTransition],
    targets: &[f64],
) -> Result<(f64, MlpParams)> {
    check_batch(batch, targets)?;
    let (h1, h2) = params.hidden_sizes();
    let mut grad = MlpParams::zeros(params.input_dim(), h1, h2);
    let scale = 1.0 / batch.len() as f64;
    let mut sum = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let act = params.activations(&t.x)?;
        let a = t.action.index();
        let err = act.q[a] - y;
        sum += err * err;
        params.backprop(&t.x, &act, a, 2.0 * err * scale, &mut grad);
    }
    Ok((sum * scale, grad))
}

/// One SGD step on the batch MSE with targets held fixed. Returns the loss
/// before the update.
pub fn train_step(params: &mut MlpParams, batch: &[&ReplayTransition], gamma: f64, lr: f64) -> Result<f64> {
    let targets = td_targets(params, batch, gamma)?;
    let (loss, grad) = batch_gradient(params, batch, &targets)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("DQN batch loss".into()));
    }
    params.sgd_update(&grad, lr);
    Ok(loss)
}

/// Argmax of `q` over `available`; ties go to the lowest action id.
pub fn greedy_action(q: &[f64; NUM_ACTIONS], available: &[Action]) -> Option<Action> {
    let mut best: Option<Action> = None;
    for &a in available {
        let better = match best {
            None => true,
            Some(b) => q[a.index()] > q[b.index()] || (q[a.index()] == q[b.index()] && a.index() < b.index()),
        };
        if better {
            best = Some(a);
        }
    }
    best
}

/// Epsilon-greedy choice among `available`, which must be non-empty.
pub fn select_action(q: &[f64; NUM_ACTIONS], available: &[Action], epsilon: f64, rng: &mut Rng) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        if let Some(&a) = available.choose(rng) {
            return a;
        }
    }
    greedy_action(q, available).unwrap_or(Action::Up)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Multiplier applied to epsilon after every episode.
    pub epsilon_decay: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// An episode stops once its cumulative reward falls to this value.
    pub reward_floor: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden1: 64,
            hidden2: 64,
            learning_rate: 0.01,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay: 0.95,
            batch_size: 32,
            replay_capacity: 10_000,
            reward_floor: -25.0,
            episodes: 60,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return fail("hidden sizes must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(0.0 <= self.epsilon_min && self.epsilon_min <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return fail("need 0 <= epsilon_min <= epsilon_start <= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return fail("epsilon_decay must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return fail("batch_size and replay_capacity must be positive");
        }
        if !(self.reward_floor < 0.0) {
            return fail("reward_floor must be negative");
        }
        Ok(())
    }

    /// Exploration rate for zero-based episode `episode`.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let decayed = self.epsilon_start * self.epsilon_decay.powi(episode.min(i32::MAX as usize) as i32);
        decayed.max(self.epsilon_min)
    }
}

/// Network input for every state, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct StateInputs {
    rows: Vec<Vec<f64>>,
}

impl StateInputs {
    pub fn new(repr: &StateRepr, world: &GridWorld) -> Self {
        let rows = (0..world.num_states())
            .map(|s| state_input(repr, world, StateId(s)))
            .collect();
        StateInputs { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, s: StateId) -> Result<&[f64]> {
        self.rows.get(s.0).map(Vec::as_slice).ok_or(Error::InvalidState(s))
    }
}

/// Per-step rewards of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub rewards: Vec<f64>,
    pub reached_goal: bool,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn cumulative(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
    pub params: MlpParams,
}

/// Slack for comparing a float-summed cumulative reward to the floor, so
/// that 250 wall bumps of -0.1 stop at exactly -25.
const FLOOR_SLACK: f64 = 1e-9;

/// Runs one episode from the start state, pushing every transition and
/// taking one replay update per step once the buffer holds a full batch.
pub fn run_episode(
    world: &GridWorld,
    params: &mut MlpParams,
    inputs: &StateInputs,
    config: &AgentConfig,
    epsilon: f64,
    buffer: &mut ReplayBuffer,
    rng: &mut Rng,
) -> Result<EpisodeLog> {
    let mut s = world.start();
    let mut rewards = Vec::new();
    let mut cumulative = 0.0;
    loop {
        let x = inputs.get(s)?;
        let q = params.forward(x)?;
        let available = world.valid_actions(s);
        let action = select_action(&q, &available, epsilon, rng);
        let out = world.step(s, action)?;
        rewards.push(out.reward);
        cumulative += out.reward;
        buffer.push(ReplayTransition {
            x: x.to_vec(),
            action,
            reward: out.reward,
            x_next: inputs.get(out.next_state)?.to_vec(),
            terminal: out.terminal,
        });
        if buffer.len() >= config.batch_size {
            let batch = buffer.sample(rng, config.batch_size);
            train_step(params, &batch, config.gamma, config.learning_rate)?;
        }
        s = out.next_state;
        if out.terminal {
            return Ok(EpisodeLog { rewards, reached_goal: true });
        }
        if cumulative <= config.reward_floor + FLOOR_SLACK {
            return Ok(EpisodeLog { rewards, reached_goal: false });
        }
    }
}

/// Trains a fresh network for `config.episodes` episodes.
pub fn train_agent(world: &GridWorld, repr: &StateRepr, config: &AgentConfig) -> Result<TrainingLog> {
    config.validate()?;
    let inputs = StateInputs::new(repr, world);
    train_agent_with_inputs(world, &inputs, config)
}

pub fn train_agent_with_inputs(world: &GridWorld, inputs: &StateInputs, config: &AgentConfig) -> Result<TrainingLog> {
    config.validate()?;
    let mut init_rng = seed::stage_rng(config.seed, "dqn-init");
    let mut params = MlpParams::init(inputs.dim(), config.hidden1, config.hidden2, &mut init_rng);
    let mut rng = seed::stage_rng(config.seed, "dqn-episodes");
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut episodes = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let eps = config.epsilon_at(e);
        episodes.push(run_episode(world, &mut params, inputs, config, eps, &mut buffer, &mut rng)?);
    }
    Ok(TrainingLog { episodes, params })
}

/// Outcome of a greedy rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyRollout {
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
}

/// Follows the greedy policy of `params` from the start for at most
/// `max_steps` steps, without learning.
pub fn greedy_policy_path(
    world: &GridWorld,
    params: &MlpParams,
    repr: &StateRepr,
    max_steps: usize,
) -> Result<GreedyRollout> {
    let inputs = StateInputs::new(repr, world);
    let mut s = world.start();
    let mut total_reward = 0.0;
    for step in 1..=max_steps {
        let q = params.forward(inputs.get(s)?)?;
        let available = world.valid_actions(s);
        let action = greedy_action(&q, &available).ok_or(Error::RemovedAction { state: s, action: Action::Up })?;
        let out = world.step(s, action)?;
        total_reward += out.reward;
        s = out.next_state;
        if out.terminal {
            return Ok(GreedyRollout { steps: step, total_reward, reached_goal: true });
        }
    }
    Ok(GreedyRollout { steps: max_steps, total_reward, reached_goal: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingTable;
    use crate::gridworld::{build_maze, GridSpec};
    use crate::numerics::{finite_diff_check, DenseMatrix};

    fn transition(rng: &mut Rng, dim: usize, terminal: bool) -> ReplayTransition {
        let mut v = || (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<f64>>();
        let (x, x_next) = (v(), v());
        ReplayTransition {
            x,
            action: Action::from_index(rng.random_range(0..4)).unwrap_or(Action::Up),
            reward: rng.random::<f64>() - 0.5,
            x_next,
            terminal,
        }
    }

    #[test]
    fn td_target_cases() {
        assert_eq!(td_target(1.0, &[0.5; 4], true, 0.95), 1.0);
        let t = td_target(-0.01, &[0.1, 0.9, 0.2, 0.3], false, 0.95);
        assert!((t - 0.845).abs() < 1e-12);
        assert_eq!(td_target(0.3, &[0.9; 4], false, 0.0), 0.3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(21);
        let params = MlpParams::init(5, 6, 4, &mut rng);
        let batch: Vec<ReplayTransition> = (0..6).map(|i| transition(&mut rng, 5, i % 3 == 0)).collect();
        let refs: Vec<&ReplayTransition> = batch.iter().collect();
        let targets = td_targets(&params, &refs, 0.9).unwrap();
        let (_, grad) = batch_gradient(&params, &refs, &targets).unwrap();
        let mut probe = params.clone();
        let err = finite_diff_check(
            |p| {
                probe.set_flat(p).unwrap();
                batch_loss(&probe, &refs, &targets).unwrap()
            },
            &params.flat(),
            &grad.flat(),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn exact_targets_leave_params_unchanged() {
        let mut rng = seed::rng(3);
        let mut params = MlpParams::init(3, 4, 4, &mut rng);
        let mut t = transition(&mut rng, 3, true);
        t.reward = params.forward(&t.x).unwrap()[t.action.index()];
        let before = params.clone();
        assert_eq!(train_step(&mut params, &[&t], 0.95, 0.1).unwrap(), 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn fixed_batch_loss_is_monotone() {
        let mut rng = seed::rng(8);
        let mut params = MlpParams::init(4, 8, 8, &mut rng);
        let batch: Vec<ReplayTransition> = (0..8).map(|_| transition(&mut rng, 4, true)).collect();
        let refs: Vec<&ReplayTransition> = batch.iter().collect();
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = train_step(&mut params, &refs, 0.95, 0.01).unwrap();
            assert!(loss <= last + 1e-15);
            last = loss;
        }
    }

    #[test]
    fn greedy_selection_and_restriction() {
        let mut rng = seed::rng(0);
        let q = [0.1, 0.9, 0.2, 0.3];
        assert_eq!(select_action(&q, &Action::ALL, 0.0, &mut rng), Action::Down);
        let avail = [Action::Up, Action::Left, Action::Right];
        assert_eq!(select_action(&q, &avail, 0.0, &mut rng), Action::Right);
        assert_eq!(greedy_action(&[0.0; 4], &[Action::Right, Action::Left]), Some(Action::Left));
        let scaled = q.map(|v| v * 7.5);
        assert_eq!(greedy_action(&scaled, &Action::ALL), greedy_action(&q, &Action::ALL));
    }

    fn open_world(size: usize, start: (usize, usize), goal: (usize, usize)) -> GridWorld {
        let spec = GridSpec::new(size, size, start.0 * size + start.1, goal.0 * size + goal.1);
        build_maze(&spec).unwrap()
    }

    #[test]
    fn wall_bumping_stops_at_the_floor() {
        let world = open_world(5, (0, 0), (4, 4));
        let mut params = MlpParams::zeros(world.num_states(), 2, 2);
        params.b3 = vec![0.5, 0.0, 0.0, 0.0];
        let config = AgentConfig { batch_size: 1000, ..AgentConfig::default() };
        let inputs = StateInputs::new(&StateRepr::Matrix, &world);
        let mut buffer = ReplayBuffer::new(config.replay_capacity);
        let log = run_episode(&world, &mut params, &inputs, &config, 0.0, &mut buffer, &mut seed::rng(0)).unwrap();
        assert_eq!(log.len(), 250);
        assert!(!log.reached_goal);
        assert_eq!(buffer.len(), 250);
    }

    #[test]
    fn adjacent_goal_takes_one_step() {
        let world = open_world(3, (1, 1), (1, 2));
        let mut params = MlpParams::zeros(world.num_states(), 2, 2);
        params.b3 = vec![0.0, 0.0, 0.0, 0.5];
        let config = AgentConfig::default();
        let inputs = StateInputs::new(&StateRepr::Matrix, &world);
        let mut buffer = ReplayBuffer::new(10);
        let log = run_episode(&world, &mut params, &inputs, &config, 0.0, &mut buffer, &mut seed::rng(0)).unwrap();
        assert_eq!(log.rewards, vec![1.0]);
        assert!(log.reached_goal);
    }

    /// One-hot state embeddings and a network whose Q-values rank moves by
    /// the BFS distance of the successor to the goal.
    #[test]
    fn distance_ranked_network_follows_shortest_path() {
        let world = open_world(5, (0, 0), (4, 4));
        let n = world.num_states();
        let table = EmbeddingTable::single("onehot", DenseMatrix::identity(n)).unwrap();
        let repr = StateRepr::Embedding(table);
        let mut params = MlpParams::zeros(n, n, n);
        for i in 0..n {
            params.w1[(i, i)] = 3.0;
            params.w2[(i, i)] = 1.0;
        }
        let level = 3f64.tanh().tanh();
        let dist_to_goal: Vec<usize> = (0..n)
            .map(|s| {
                let (r, c) = world.coords(StateId(s));
                (4 - r) + (4 - c)
            })
            .collect();
        for s in 0..n {
            for a in Action::ALL {
                let next = world.step(StateId(s), a).unwrap().next_state;
                params.w3[(s, a.index())] = -(dist_to_goal[next.0] as f64 + 1.0) / 100.0 / level;
            }
        }
        let rollout = greedy_policy_path(&world, &params, &repr, 50).unwrap();
        assert_eq!(rollout.steps, world.shortest_path_len().unwrap());
        assert_eq!(rollout.steps, 8);
        assert!((rollout.total_reward - 0.93).abs() < 1e-12);
        assert!(rollout.reached_goal);

        let stuck = greedy_policy_path(&world, &MlpParams::zeros(n, 2, 2), &repr, 30).unwrap();
        assert!(!stuck.reached_goal);
        assert_eq!(stuck.steps, 30);
    }

    #[test]
    fn training_is_deterministic() {
        let world = open_world(4, (3, 0), (0, 3));
        let config = AgentConfig { episodes: 3, hidden1: 8, hidden2: 8, seed: 4, ..AgentConfig::default() };
        let a = train_agent(&world, &StateRepr::Matrix, &config).unwrap();
        assert_eq!(a.episodes.len(), 3);
        assert_eq!(a, train_agent(&world, &StateRepr::Matrix, &config).unwrap());
    }

    #[test]
    fn epsilon_schedule() {
        let c = AgentConfig::default();
        assert_eq!(c.epsilon_at(0), 1.0);
        assert!((c.epsilon_at(2) - 0.9025).abs() < 1e-15);
        assert_eq!(c.epsilon_at(1000), 0.05);
        assert!(AgentConfig { gamma: 1.5, ..c.clone() }.validate().is_err());
        assert!(AgentConfig { reward_floor: 0.0, ..c }.validate().is_err());
    }
}
