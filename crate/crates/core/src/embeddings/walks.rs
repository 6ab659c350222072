use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use super::TrainSpec;
use crate::gridworld::StateId;
use crate::mdpgraph::MdpGraph;
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Uniform random walks over node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl WalkCorpus {
    /// Ordered `(center, context)` pairs within `window` positions.
    pub fn window_pairs(&self, window: usize) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for walk in &self.walks {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(walk.len() - 1);
                for (j, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j != i {
                        pairs.push((center, ctx));
                    }
                }
            }
        }
        pairs
    }

    /// Occurrence counts over `0..universe`.
    pub fn counts(&self, universe: usize) -> Vec<f64> {
        let mut c = vec![0.0; universe];
        for &v in self.walks.iter().flatten() {
            c[v] += 1.0;
        }
        c
    }
}

/// Number of window pairs one walk of `len` nodes produces.
pub fn pairs_per_walk(len: usize, window: usize) -> usize {
    (0..len)
        .map(|i| i.min(window) + (len - 1 - i).min(window))
        .sum()
}

/// Pair budget per node matching the skip-gram corpus size.
pub fn pair_budget_per_node(spec: &TrainSpec) -> usize {
    spec.walks_per_node * pairs_per_walk(spec.walk_length, spec.window)
}

/// `walks_per_node` rounds over the shuffled node list, each walk taking
/// uniform steps along out-edges of `graph`.
pub fn random_walks(graph: &MdpGraph, spec: &TrainSpec) -> Result<WalkCorpus> {
    let succ = graph.successor_lists();
    let mut nodes: Vec<usize> = graph.nodes().iter().map(|s| s.0).collect();
    if let Some(&dangling) = nodes.iter().find(|&&v| succ[v].is_empty()) {
        return Err(Error::DanglingNode(StateId(dangling)));
    }
    let mut rng = seed::stage_rng(spec.seed, "random-walks");
    let mut walks = Vec::with_capacity(nodes.len() * spec.walks_per_node);
    for _ in 0..spec.walks_per_node {
        nodes.shuffle(&mut rng);
        for &start in &nodes {
            walks.push(walk_from(start, spec.walk_length, &succ, &mut rng));
        }
    }
    Ok(WalkCorpus {
        walks,
        walk_length: spec.walk_length,
        walks_per_node: spec.walks_per_node,
    })
}

fn walk_from(start: usize, len: usize, succ: &[Vec<usize>], rng: &mut Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(len);
    walk.push(start);
    while walk.len() < len {
        let cur = *walk.last().unwrap_or(&start);
        let Some(&next) = succ[cur].choose(rng) else {
            break;
        };
        walk.push(next);
    }
    walk
}

/// Rooted-PageRank walk: step to a random out-neighbor, then stop with
/// probability `restart_prob`. Stops early at a node without out-edges.
/// Returns the stop node, or `None` when `root` itself has no out-edges.
pub fn rooted_pagerank_stop(
    root: usize,
    restart_prob: f64,
    succ: &[Vec<usize>],
    rng: &mut Rng,
) -> Option<usize> {
    let mut cur = *succ[root].choose(rng)?;
    loop {
        if rng.random::<f64>() < restart_prob {
            return Some(cur);
        }
        match succ[cur].choose(rng) {
            Some(&next) => cur = next,
            None => return Some(cur),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Source,
    Target,
}

/// SALSA-style alternating walk. From a source node follow an out-edge to a
/// target node, from a target node follow an in-edge backwards to a source
/// node. Roles alternate strictly starting from `role`.
pub fn alternating_walk(
    start: usize,
    role: Role,
    len: usize,
    succ: &[Vec<usize>],
    pred: &[Vec<usize>],
    rng: &mut Rng,
) -> Vec<(usize, Role)> {
    let mut walk = Vec::with_capacity(len);
    let (mut cur, mut cur_role) = (start, role);
    walk.push((cur, cur_role));
    while walk.len() < len {
        let (options, next_role) = match cur_role {
            Role::Source => (&succ[cur], Role::Target),
            Role::Target => (&pred[cur], Role::Source),
        };
        let Some(&next) = options.choose(rng) else {
            break;
        };
        cur = next;
        cur_role = next_role;
        walk.push((cur, cur_role));
    }
    walk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Action;
    use crate::mdpgraph::undirected_view;

    fn path_graph() -> MdpGraph {
        undirected_view(&MdpGraph::with_nodes(
            [],
            [
                (StateId(0), Action::Right, StateId(1)),
                (StateId(1), Action::Right, StateId(2)),
            ],
            true,
        ))
    }

    #[test]
    fn forced_second_step_on_path() {
        let spec = TrainSpec { walks_per_node: 5, walk_length: 6, ..TrainSpec::default() };
        let corpus = random_walks(&path_graph(), &spec).unwrap();
        assert_eq!(corpus.walks.len(), 15);
        for w in corpus.walks.iter().filter(|w| w[0] == 0) {
            assert_eq!(w[1], 1);
        }
    }

    #[test]
    fn consecutive_pairs_are_edges_and_seeded() {
        let g = path_graph();
        let spec = TrainSpec { walks_per_node: 3, walk_length: 10, ..TrainSpec::default() };
        let corpus = random_walks(&g, &spec).unwrap();
        for w in &corpus.walks {
            assert_eq!(w.len(), 10);
            for pair in w.windows(2) {
                assert!(g.out_edges(StateId(pair[0])).iter().any(|&(_, t)| t.0 == pair[1]));
            }
        }
        assert_eq!(corpus, random_walks(&g, &spec).unwrap());
    }

    #[test]
    fn dangling_node_is_named() {
        let g = MdpGraph::with_nodes([], [(StateId(0), Action::Right, StateId(1))], true);
        let err = random_walks(&g, &TrainSpec::default()).unwrap_err();
        assert!(matches!(err, Error::DanglingNode(StateId(1))));
    }

    #[test]
    fn window_pair_counts() {
        assert_eq!(pairs_per_walk(20, 5), 170);
        let corpus = WalkCorpus { walks: vec![(0..20).collect()], walk_length: 20, walks_per_node: 1 };
        assert_eq!(corpus.window_pairs(5).len(), 170);
        let tiny = WalkCorpus { walks: vec![vec![4, 5, 6]], walk_length: 3, walks_per_node: 1 };
        assert_eq!(tiny.window_pairs(1), vec![(4, 5), (5, 4), (5, 6), (6, 5)]);
    }

    #[test]
    fn pagerank_walk_on_single_edge() {
        let succ = vec![vec![1], vec![]];
        let mut rng = seed::rng(3);
        for alpha in [0.05, 0.5, 0.95] {
            for _ in 0..50 {
                assert_eq!(rooted_pagerank_stop(0, alpha, &succ, &mut rng), Some(1));
            }
        }
        assert_eq!(rooted_pagerank_stop(1, 0.5, &succ, &mut rng), None);
    }

    #[test]
    fn alternating_walk_on_single_edge() {
        let succ = vec![vec![1], vec![]];
        let pred = vec![vec![], vec![0]];
        let mut rng = seed::rng(1);
        let walk = alternating_walk(0, Role::Source, 6, &succ, &pred, &mut rng);
        let nodes: Vec<usize> = walk.iter().map(|&(v, _)| v).collect();
        assert_eq!(nodes, vec![0, 1, 0, 1, 0, 1]);
        for (i, &(_, role)) in walk.iter().enumerate() {
            assert_eq!(role, if i % 2 == 0 { Role::Source } else { Role::Target });
        }
    }
}
