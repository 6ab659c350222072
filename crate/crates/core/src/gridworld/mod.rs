//! Deterministic grid-world MDPs.
//!
//! Cells are indexed row-major. Obstacles are soft: the agent may enter them
//! at a heavy cost. Directed variants remove actions from cells, and removed
//! actions are simply unavailable to the agent.

mod text;

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;

use crate::seed;
use crate::{Error, Result};

pub use text::{parse_maze, write_maze};

pub const REWARD_GOAL: f64 = 1.0;
pub const REWARD_OBSTACLE: f64 = -0.3;
pub const REWARD_WALL: f64 = -0.1;
pub const REWARD_MOVE: f64 = -0.01;

/// Matrix-representation cell values.
pub const CELL_FREE: f64 = 1.0;
pub const CELL_OBSTACLE: f64 = 0.0;
pub const CELL_GOAL: f64 = 0.75;
pub const CELL_AGENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The four moves. The discriminant is the Q-network output neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn code(self) -> char {
        match self {
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
            Action::Right => 'R',
        }
    }

    pub fn from_code(c: char) -> Option<Action> {
        match c.to_ascii_uppercase() {
            'U' => Some(Action::Up),
            'D' => Some(Action::Down),
            'L' => Some(Action::Left),
            'R' => Some(Action::Right),
            _ => None,
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateId,
    pub reward: f64,
    pub terminal: bool,
}

/// Construction-time description of a maze.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub obstacles: BTreeSet<usize>,
    pub start: usize,
    pub goal: usize,
    pub removed_actions: BTreeSet<(usize, Action)>,
    pub removal_fraction: f64,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, start: usize, goal: usize) -> Self {
        GridSpec {
            width,
            height,
            obstacles: BTreeSet::new(),
            start,
            goal,
            removed_actions: BTreeSet::new(),
            removal_fraction: 0.0,
            seed: 0,
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    obstacle: Vec<bool>,
    start: StateId,
    goal: StateId,
    allowed: Vec<[bool; 4]>,
}

impl GridWorld {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn goal(&self) -> StateId {
        self.goal
    }

    pub fn is_obstacle(&self, s: StateId) -> bool {
        self.obstacle.get(s.0).copied().unwrap_or(false)
    }

    pub fn state(&self, row: usize, col: usize) -> StateId {
        StateId(row * self.width + col)
    }

    pub fn coords(&self, s: StateId) -> (usize, usize) {
        (s.0 / self.width, s.0 % self.width)
    }

    pub fn is_directed(&self) -> bool {
        self.allowed.iter().any(|a| a.iter().any(|&ok| !ok))
    }

    fn check_state(&self, s: StateId) -> Result<()> {
        if s.0 < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    pub fn is_available(&self, s: StateId, a: Action) -> bool {
        self.allowed
            .get(s.0)
            .map(|row| row[a.index()])
            .unwrap_or(false)
    }

    /// Neighbor reached by `a`, or `None` when the move leaves the grid.
    fn neighbor(&self, s: StateId, a: Action) -> Option<StateId> {
        let (r, c) = self.coords(s);
        let (dr, dc) = a.delta();
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        (nr < self.height && nc < self.width).then(|| self.state(nr, nc))
    }

    fn transition(&self, s: StateId, a: Action) -> StepOutcome {
        let (next_state, reward) = match self.neighbor(s, a) {
            None => (s, REWARD_WALL),
            Some(n) if n == self.goal => (n, REWARD_GOAL),
            Some(n) if self.obstacle[n.0] => (n, REWARD_OBSTACLE),
            Some(n) => (n, REWARD_MOVE),
        };
        StepOutcome {
            next_state,
            reward,
            terminal: next_state == self.goal,
        }
    }

    pub fn step(&self, s: StateId, a: Action) -> Result<StepOutcome> {
        self.check_state(s)?;
        if !self.is_available(s, a) {
            return Err(Error::RemovedAction {
                state: s,
                action: a,
            });
        }
        Ok(self.transition(s, a))
    }

    pub fn valid_actions(&self, s: StateId) -> Vec<Action> {
        Action::ALL
            .into_iter()
            .filter(|&a| self.is_available(s, a))
            .collect()
    }

    /// Row-major flattened grid with the agent's cell marked.
    pub fn matrix_representation(&self, agent: StateId) -> Vec<f64> {
        let mut m: Vec<f64> = (0..self.num_states())
            .map(|i| {
                if self.obstacle[i] {
                    CELL_OBSTACLE
                } else if i == self.goal.0 {
                    CELL_GOAL
                } else {
                    CELL_FREE
                }
            })
            .collect();
        if let Some(cell) = m.get_mut(agent.0) {
            *cell = CELL_AGENT;
        }
        m
    }

    /// Every available `(s, a, s')` triple, in state then action order.
    pub fn enumerate_transitions(&self) -> Vec<(StateId, Action, StateId)> {
        (0..self.num_states())
            .map(StateId)
            .flat_map(|s| {
                self.valid_actions(s)
                    .into_iter()
                    .map(move |a| (s, a, self.transition(s, a).next_state))
            })
            .collect()
    }

    /// Number of available `(state, action)` pairs.
    pub fn num_state_actions(&self) -> usize {
        self.allowed
            .iter()
            .map(|a| a.iter().filter(|&&ok| ok).count())
            .sum()
    }

    /// BFS distances (in steps) from `from`, `None` for unreachable states.
    pub fn distances_from(&self, from: StateId) -> Vec<Option<usize>> {
        bfs(self.num_states(), from, |s| {
            self.valid_actions(s)
                .into_iter()
                .map(|a| self.transition(s, a).next_state)
                .collect()
        })
    }

    pub fn shortest_path_len(&self) -> Option<usize> {
        self.distances_from(self.start)[self.goal.0]
    }
}

fn bfs(n: usize, from: StateId, succ: impl Fn(StateId) -> Vec<StateId>) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    dist[from.0] = Some(0);
    queue.push_back(from);
    while let Some(s) = queue.pop_front() {
        let d = dist[s.0].unwrap_or(0);
        for next in succ(s) {
            if dist[next.0].is_none() {
                dist[next.0] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Builds and validates a world from its spec.
///
/// Explicit removals are applied first and must leave every cell with at
/// least one action. Random removal then drops `removal_fraction` of the
/// remaining (cell, action) pairs in a seeded order, skipping any removal
/// that would empty a cell or cut the start off from the goal.
pub fn build_maze(spec: &GridSpec) -> Result<GridWorld> {
    let n = spec.width * spec.height;
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidSpec("grid must be non-empty".into()));
    }
    if spec.start >= n || spec.goal >= n {
        return Err(Error::InvalidSpec("start or goal outside the grid".into()));
    }
    if spec.start == spec.goal {
        return Err(Error::InvalidSpec("start and goal coincide".into()));
    }
    if let Some(&o) = spec.obstacles.iter().find(|&&o| o >= n) {
        return Err(Error::InvalidSpec(format!("obstacle {o} outside the grid")));
    }
    if spec.obstacles.contains(&spec.start) || spec.obstacles.contains(&spec.goal) {
        return Err(Error::InvalidSpec("start or goal is an obstacle".into()));
    }
    if !(0.0..=1.0).contains(&spec.removal_fraction) {
        return Err(Error::InvalidSpec(format!(
            "removal fraction {} outside [0, 1]",
            spec.removal_fraction
        )));
    }

    let mut obstacle = vec![false; n];
    for &o in &spec.obstacles {
        obstacle[o] = true;
    }
    let mut world = GridWorld {
        width: spec.width,
        height: spec.height,
        obstacle,
        start: StateId(spec.start),
        goal: StateId(spec.goal),
        allowed: vec![[true; 4]; n],
    };

    for &(cell, a) in &spec.removed_actions {
        if cell >= n {
            return Err(Error::InvalidSpec(format!(
                "removed action on cell {cell} outside the grid"
            )));
        }
        world.allowed[cell][a.index()] = false;
    }
    if let Some(cell) = world.allowed.iter().position(|a| a.iter().all(|&ok| !ok)) {
        return Err(Error::InvalidSpec(format!(
            "cell {cell} has every action removed"
        )));
    }
    if world.shortest_path_len().is_none() {
        return Err(Error::UnreachableGoal);
    }

    if spec.removal_fraction > 0.0 {
        let mut pairs: Vec<(usize, Action)> = (0..n)
            .flat_map(|c| Action::ALL.into_iter().map(move |a| (c, a)))
            .filter(|&(c, a)| world.allowed[c][a.index()])
            .collect();
        let target = (spec.removal_fraction * pairs.len() as f64).round() as usize;
        pairs.shuffle(&mut seed::stage_rng(spec.seed, "action-removal"));
        let mut removed = 0;
        for (cell, a) in pairs {
            if removed == target {
                break;
            }
            if world.allowed[cell].iter().filter(|&&ok| ok).count() <= 1 {
                continue;
            }
            world.allowed[cell][a.index()] = false;
            if world.shortest_path_len().is_none() {
                world.allowed[cell][a.index()] = true;
                continue;
            }
            removed += 1;
        }
    }

    Ok(world)
}
