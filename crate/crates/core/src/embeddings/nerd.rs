use rand::seq::SliceRandom;
use rand::Rng as _;

use super::sgns::{pair_gradient, pair_loss, sgns_step, NegativeSampler, Scratch};
use super::walks::{alternating_walk, pair_budget_per_node, Role};
use super::{EmbeddingTable, TrainSpec};
use crate::gridworld::StateId;
use crate::mdpgraph::MdpGraph;
use crate::numerics::DenseMatrix;
use crate::seed;
use crate::{Error, Result};

/// `(source node, target node)` co-occurrences within `window` positions of
/// an alternating walk.
pub fn nerd_pairs(walk: &[(usize, Role)], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, &(u, role)) in walk.iter().enumerate() {
        if role != Role::Source {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for &(v, other) in &walk[lo..=hi] {
            if other == Role::Target {
                pairs.push((u, v));
            }
        }
    }
    pairs
}

/// Loss of one co-occurrence, trained from both sides: the source vector
/// against target vectors and the target vector against source vectors.
pub fn nerd_pair_loss(
    source: &DenseMatrix,
    target: &DenseMatrix,
    (s, t): (usize, usize),
    target_negs: &[usize],
    source_negs: &[usize],
) -> f64 {
    pair_loss(source.row(s), target, t, target_negs) + pair_loss(target.row(t), source, s, source_negs)
}

/// Gradient of [`nerd_pair_loss`] with respect to both tables.
pub fn nerd_pair_gradient(
    source: &DenseMatrix,
    target: &DenseMatrix,
    (s, t): (usize, usize),
    target_negs: &[usize],
    source_negs: &[usize],
) -> (f64, DenseMatrix, DenseMatrix) {
    let (l1, g_src_row, mut g_target) = pair_gradient(source.row(s), target, t, target_negs);
    let (l2, g_tgt_row, mut g_source) = pair_gradient(target.row(t), source, s, source_negs);
    for (g, v) in g_source.row_mut(s).iter_mut().zip(g_src_row) {
        *g += v;
    }
    for (g, v) in g_target.row_mut(t).iter_mut().zip(g_tgt_row) {
        *g += v;
    }
    (l1 + l2, g_source, g_target)
}

/// NERD: alternating walks separate source and target roles; each
/// source-target co-occurrence updates both tables with negative sampling.
/// Walks restart round-robin from every node in every role it can play
/// until the pair budget matches a skip-gram corpus.
pub fn nerd(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let n = graph.universe();
    let succ = graph.successor_lists();
    let pred = graph.predecessor_lists();
    let mut roots = Vec::new();
    for v in graph.nodes().iter().map(|s| s.0) {
        if succ[v].is_empty() && pred[v].is_empty() {
            return Err(Error::IsolatedNode(StateId(v)));
        }
        if !succ[v].is_empty() {
            roots.push((v, Role::Source));
        }
        if !pred[v].is_empty() {
            roots.push((v, Role::Target));
        }
    }

    // Every co-occurrence drives two updates.
    let wanted = graph.num_nodes() * pair_budget_per_node(spec) / 2;
    let mut rng = seed::stage_rng(spec.seed, "nerd-walks");
    let mut pairs = Vec::with_capacity(wanted);
    while pairs.len() < wanted && !roots.is_empty() {
        roots.shuffle(&mut rng);
        for &(v, role) in &roots {
            let walk = alternating_walk(v, role, spec.walk_length, &succ, &pred, &mut rng);
            pairs.extend(nerd_pairs(&walk, spec.window));
            if pairs.len() >= wanted {
                break;
            }
        }
    }
    pairs.truncate(wanted);

    let d = spec.d;
    let mut rng = seed::stage_rng(spec.seed, "nerd-sgd");
    let mut source = DenseMatrix::from_fn(n, d, |_, _| (rng.random::<f64>() - 0.5) / d as f64);
    let mut target = DenseMatrix::zeros(n, d);
    if !pairs.is_empty() {
        let (mut src_counts, mut tgt_counts) = (vec![0.0; n], vec![0.0; n]);
        for &(s, t) in &pairs {
            src_counts[s] += 1.0;
            tgt_counts[t] += 1.0;
        }
        let src_sampler = NegativeSampler::new(&src_counts)?;
        let tgt_sampler = NegativeSampler::new(&tgt_counts)?;
        let total = (spec.epochs * pairs.len()) as f64;
        let mut scratch = Scratch::default();
        let mut negs = Vec::new();
        let mut done = 0usize;
        for _ in 0..spec.epochs {
            pairs.shuffle(&mut rng);
            for &(s, t) in &pairs {
                let lr = (spec.learning_rate * (1.0 - done as f64 / total)).max(spec.learning_rate * 1e-4);
                tgt_sampler.draw(&mut rng, spec.negatives, t, &mut negs);
                sgns_step(source.row_mut(s), &mut target, t, &negs, lr, &mut scratch);
                src_sampler.draw(&mut rng, spec.negatives, s, &mut negs);
                sgns_step(target.row_mut(t), &mut source, s, &negs, lr, &mut scratch);
                done += 1;
            }
        }
    }
    if !source.is_finite() || !target.is_finite() {
        return Err(Error::NonFinite("NERD training diverged".into()));
    }
    Ok(EmbeddingTable::dual("nerd", source, target)?.with_presence(&graph.presence()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Action;
    use crate::numerics::finite_diff_check;

    #[test]
    fn pairs_cross_roles_only() {
        let walk = [(0, Role::Source), (1, Role::Target), (2, Role::Source), (3, Role::Target)];
        assert_eq!(nerd_pairs(&walk, 1), vec![(0, 1), (2, 1), (2, 3)]);
        assert_eq!(nerd_pairs(&walk, 3), vec![(0, 1), (0, 3), (2, 1), (2, 3)]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(5);
        let (n, d) = (4, 3);
        let source = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5);
        let target = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5);
        let (tn, sn) = ([0, 3], [1, 1, 2]);
        let (_, gs, gt) = nerd_pair_gradient(&source, &target, (2, 1), &tn, &sn);
        let mut params = source.data().to_vec();
        params.extend_from_slice(target.data());
        let mut grad = gs.into_data();
        grad.extend(gt.into_data());
        let err = finite_diff_check(
            |p| {
                let s = DenseMatrix::from_vec(n, d, p[..n * d].to_vec()).unwrap();
                let t = DenseMatrix::from_vec(n, d, p[n * d..].to_vec()).unwrap();
                nerd_pair_loss(&s, &t, (2, 1), &tn, &sn)
            },
            &params,
            &grad,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn isolated_node_is_an_error() {
        let g = MdpGraph::with_nodes(
            [StateId(5)],
            [(StateId(0), Action::Right, StateId(1))],
            true,
        );
        assert!(matches!(nerd(&g, &TrainSpec::default()), Err(Error::IsolatedNode(StateId(5)))));
    }

    #[test]
    fn single_edge_learns_positive_score() {
        let g = MdpGraph::with_nodes([], [(StateId(0), Action::Right, StateId(1))], true);
        let spec = TrainSpec { d: 4, walks_per_node: 2, ..TrainSpec::default() };
        let t = nerd(&g, &spec).unwrap();
        let score = crate::numerics::dot(t.source().row(0), t.target().unwrap().row(1));
        assert!(score > 0.0);
        assert_eq!(t, nerd(&g, &spec).unwrap());
    }
}
