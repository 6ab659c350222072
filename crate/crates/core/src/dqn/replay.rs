use std::collections::VecDeque;

use rand::seq::index;

use crate::gridworld::Action;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTransition {
    pub x: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub x_next: Vec<f64>,
    /// Set only when the goal was reached. An episode cut off at the reward
    /// floor still bootstraps from its last state.
    pub terminal: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<ReplayTransition>,
}

impl ReplayBuffer {
    /// A capacity of zero is treated as one.
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends `t`, evicting the oldest entry when full.
    pub fn push(&mut self, t: ReplayTransition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &ReplayTransition> {
        self.items.iter()
    }

    /// `min(k, len)` distinct entries, uniformly at random.
    pub fn sample(&self, rng: &mut Rng, k: usize) -> Vec<&ReplayTransition> {
        let k = k.min(self.items.len());
        index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
