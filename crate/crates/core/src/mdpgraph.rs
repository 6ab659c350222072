//! MDP graph estimated from random transition samples.
//!
//! Nodes are the states seen in the samples, and each distinct `(s, a, s')`
//! becomes one labeled edge. Self-loops from wall bumps are kept.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::gridworld::{Action, GridWorld, StateId};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionSample {
    pub s: StateId,
    pub a: Action,
    pub s_next: StateId,
}

impl From<(StateId, Action, StateId)> for TransitionSample {
    fn from((s, a, s_next): (StateId, Action, StateId)) -> Self {
        TransitionSample { s, a, s_next }
    }
}

/// Draws `n` samples: a uniformly random state, then a uniformly random
/// available action in it.
pub fn sample_transitions(world: &GridWorld, n: usize, seed: u64) -> Vec<TransitionSample> {
    let mut rng = seed::stage_rng(seed, "transition-samples");
    let actions: Vec<Vec<Action>> = (0..world.num_states())
        .map(|s| world.valid_actions(StateId(s)))
        .collect();
    (0..n)
        .map(|_| {
            let s = StateId(rng.random_range(0..world.num_states()));
            let a = *actions[s.0]
                .choose(&mut rng)
                .expect("every cell keeps at least one action");
            let s_next = world
                .step(s, a)
                .expect("sampled action is available")
                .next_state;
            TransitionSample { s, a, s_next }
        })
        .collect()
}

/// Directed labeled graph over observed states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpGraph {
    nodes: BTreeSet<StateId>,
    edges: BTreeSet<(StateId, Action, StateId)>,
    out_edges: BTreeMap<StateId, Vec<(Action, StateId)>>,
    in_edges: BTreeMap<StateId, Vec<(Action, StateId)>>,
    directed: bool,
}

impl MdpGraph {
    fn from_edges(
        edges: BTreeSet<(StateId, Action, StateId)>,
        extra_nodes: impl IntoIterator<Item = StateId>,
        directed: bool,
    ) -> Self {
        let mut nodes: BTreeSet<StateId> = extra_nodes.into_iter().collect();
        let mut out_edges: BTreeMap<StateId, Vec<(Action, StateId)>> = BTreeMap::new();
        let mut in_edges: BTreeMap<StateId, Vec<(Action, StateId)>> = BTreeMap::new();
        for &(s, a, t) in &edges {
            nodes.insert(s);
            nodes.insert(t);
            out_edges.entry(s).or_default().push((a, t));
            in_edges.entry(t).or_default().push((a, s));
        }
        MdpGraph {
            nodes,
            edges,
            out_edges,
            in_edges,
            directed,
        }
    }

    /// Graph with explicit nodes and edges; nodes may be isolated.
    pub fn with_nodes(
        nodes: impl IntoIterator<Item = StateId>,
        edges: impl IntoIterator<Item = (StateId, Action, StateId)>,
        directed: bool,
    ) -> Self {
        Self::from_edges(edges.into_iter().collect(), nodes, directed)
    }

    pub fn nodes(&self) -> &BTreeSet<StateId> {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.nodes.contains(&s)
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, Action, StateId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, s: StateId, a: Action, t: StateId) -> bool {
        self.edges.contains(&(s, a, t))
    }

    pub fn out_edges(&self, s: StateId) -> &[(Action, StateId)] {
        self.out_edges.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_edges(&self, s: StateId) -> &[(Action, StateId)] {
        self.in_edges.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Size of the dense id space `0..universe` covering every node.
    pub fn universe(&self) -> usize {
        self.nodes.last().map_or(0, |s| s.0 + 1)
    }

    /// Presence mask over `0..universe`.
    pub fn presence(&self) -> Vec<bool> {
        let mut mask = vec![false; self.universe()];
        for s in &self.nodes {
            mask[s.0] = true;
        }
        mask
    }

    /// Out-neighbor lists over `0..universe`, one entry per edge.
    pub fn successor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.universe()];
        for &(s, _, t) in &self.edges {
            lists[s.0].push(t.0);
        }
        lists
    }

    /// In-neighbor lists over `0..universe`, one entry per edge.
    pub fn predecessor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.universe()];
        for &(s, _, t) in &self.edges {
            lists[t.0].push(s.0);
        }
        lists
    }

    /// Binary adjacency `A[s][t] = 1` when any edge `s -> t` exists.
    pub fn adjacency(&self) -> crate::numerics::DenseMatrix {
        let n = self.universe();
        let mut a = crate::numerics::DenseMatrix::zeros(n, n);
        for &(s, _, t) in &self.edges {
            a[(s.0, t.0)] = 1.0;
        }
        a
    }
}

pub fn build_graph(samples: &[TransitionSample]) -> MdpGraph {
    let edges = samples.iter().map(|t| (t.s, t.a, t.s_next)).collect();
    MdpGraph::from_edges(edges, [], true)
}

/// Ground-truth graph from exhaustive enumeration.
pub fn full_graph(world: &GridWorld) -> MdpGraph {
    MdpGraph::from_edges(world.enumerate_transitions().into_iter().collect(), [], true)
}

/// Adds the reverse of every edge. The reverse of `u -a-> v` is labeled with
/// the opposite action; self-loops are their own reverse.
pub fn undirected_view(graph: &MdpGraph) -> MdpGraph {
    let mut edges = graph.edges.clone();
    for &(s, a, t) in &graph.edges {
        if s != t {
            edges.insert((t, a.opposite(), s));
        }
    }
    MdpGraph::from_edges(edges, graph.nodes.iter().copied(), false)
}

/// Fraction of the world's true transitions present in `graph`.
pub fn coverage(graph: &MdpGraph, world: &GridWorld) -> f64 {
    let truth = world.enumerate_transitions();
    if truth.is_empty() {
        return 0.0;
    }
    let hit = truth
        .iter()
        .filter(|&&(s, a, t)| graph.has_edge(s, a, t))
        .count();
    hit as f64 / truth.len() as f64
}

/// Expected draws to see all `n_pairs` equally likely items: `n * H(n)`.
pub fn expected_samples_full_coverage(n_pairs: usize) -> f64 {
    let harmonic: f64 = (1..=n_pairs).map(|k| 1.0 / k as f64).sum();
    n_pairs as f64 * harmonic
}

/// Writes the edgelist format: a `# nodes=<n> directed=<0|1>` header, then
/// `src dst action_id` per edge.
pub fn write_edgelist(graph: &MdpGraph) -> String {
    let mut out = format!(
        "# nodes={} directed={}\n",
        graph.num_nodes(),
        u8::from(graph.directed)
    );
    for (s, a, t) in graph.edges() {
        let _ = writeln!(out, "{} {} {}", s.0, t.0, a.index());
    }
    out
}

pub fn read_edgelist(src: &str) -> Result<MdpGraph> {
    let mut lines = src.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty edgelist".into()))?;
    let mut nodes = None;
    let mut directed = None;
    for tok in header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("edgelist header must start with '#'".into()))?
        .split_whitespace()
    {
        match tok.split_once('=') {
            Some(("nodes", v)) => {
                nodes = Some(v.parse::<usize>().map_err(|_| Error::Parse(format!("bad nodes={v}")))?)
            }
            Some(("directed", "0")) => directed = Some(false),
            Some(("directed", "1")) => directed = Some(true),
            _ => return Err(Error::Parse(format!("unknown header field {tok:?}"))),
        }
    }
    let (Some(nodes), Some(directed)) = (nodes, directed) else {
        return Err(Error::Parse("header needs nodes= and directed=".into()));
    };

    let mut edges = BTreeSet::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [s, t, a] = parts[..] else {
            return Err(Error::Parse(format!("bad edge line {line:?}")));
        };
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer {v:?} in {line:?}")))
        };
        let action = Action::from_index(parse(a)?)
            .ok_or_else(|| Error::Parse(format!("bad action id in {line:?}")))?;
        edges.insert((StateId(parse(s)?), action, StateId(parse(t)?)));
    }
    let graph = MdpGraph::from_edges(edges, [], directed);
    if graph.num_nodes() != nodes {
        return Err(Error::Parse(format!(
            "header declares {nodes} nodes, edges reference {}",
            graph.num_nodes()
        )));
    }
    Ok(graph)
}
