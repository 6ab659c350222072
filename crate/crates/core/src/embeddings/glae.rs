//! Graph linear autoencoder: `Z = A_hat W`, edges decoded as `s(z_u . z_v)`.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::{EmbeddingTable, TrainSpec};
use crate::mdpgraph::{undirected_view, MdpGraph};
use crate::numerics::{dot, log_sigmoid, sigmoid, Adam, DenseMatrix};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// `D^{-1/2} (A + I) D^{-1/2}` of the undirected view, where `A` is the
/// binary adjacency without self-loops.
pub fn normalized_adjacency(graph: &MdpGraph) -> DenseMatrix {
    let n = graph.universe();
    let mut a = DenseMatrix::identity(n);
    for (s, _, t) in graph.edges() {
        a[(s.0, t.0)] = 1.0;
        a[(t.0, s.0)] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum::<f64>()).collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        if a[(i, j)] == 0.0 {
            0.0
        } else {
            a[(i, j)] / (deg[i] * deg[j]).sqrt()
        }
    })
}

/// Normalized adjacency plus labeled node pairs (`true` for edges).
#[derive(Debug, Clone)]
pub struct GlaeProblem {
    pub a_hat: DenseMatrix,
    pub pairs: Vec<(usize, usize, bool)>,
}

/// Mean binary cross-entropy of the decoded pairs.
pub fn glae_loss(problem: &GlaeProblem, w: &DenseMatrix) -> Result<f64> {
    let z = problem.a_hat.matmul(w)?;
    Ok(bce(&z, &problem.pairs, None))
}

pub fn glae_gradient(problem: &GlaeProblem, w: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let z = problem.a_hat.matmul(w)?;
    let mut dz = DenseMatrix::zeros(z.rows(), z.cols());
    let loss = bce(&z, &problem.pairs, Some(&mut dz));
    Ok((loss, problem.a_hat.transpose().matmul(&dz)?))
}

fn bce(z: &DenseMatrix, pairs: &[(usize, usize, bool)], mut dz: Option<&mut DenseMatrix>) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    for &(u, v, edge) in pairs {
        let f = dot(z.row(u), z.row(v));
        loss -= if edge { log_sigmoid(f) } else { log_sigmoid(-f) };
        if let Some(dz) = dz.as_deref_mut() {
            let g = (sigmoid(f) - if edge { 1.0 } else { 0.0 }) * scale;
            let (zu, zv) = (z.row(u).to_vec(), z.row(v).to_vec());
            for (o, x) in dz.row_mut(u).iter_mut().zip(&zv) {
                *o += g * x;
            }
            for (o, x) in dz.row_mut(v).iter_mut().zip(&zu) {
                *o += g * x;
            }
        }
    }
    loss * scale
}

/// Unordered edges `u < v` of the undirected view, self-loops excluded.
fn positive_pairs(view: &MdpGraph) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> = view
        .edges()
        .filter(|(s, _, t)| s != t)
        .map(|(s, _, t)| (s.0.min(t.0), s.0.max(t.0)))
        .collect();
    set.into_iter().collect()
}

fn sample_non_edges(
    nodes: &[usize],
    edges: &BTreeSet<(usize, usize)>,
    count: usize,
    rng: &mut Rng,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    if nodes.len() < 2 {
        return out;
    }
    let mut tries = 0;
    while out.len() < count && tries < 100 * count.max(1) {
        tries += 1;
        let (&a, &b) = (nodes.choose(rng).unwrap_or(&0), nodes.choose(rng).unwrap_or(&0));
        let key = (a.min(b), a.max(b));
        if a != b && !edges.contains(&key) {
            out.push(key);
        }
    }
    out
}

/// Full-batch Adam on all edges plus as many freshly sampled non-edges each
/// epoch, with a linearly decaying learning rate.
pub fn glae(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let view = undirected_view(graph);
    let n = view.universe();
    let a_hat = normalized_adjacency(&view);
    let positives = positive_pairs(&view);
    let edge_set: BTreeSet<(usize, usize)> = positives.iter().copied().collect();
    let nodes: Vec<usize> = view.nodes().iter().map(|s| s.0).collect();

    let mut rng = seed::stage_rng(spec.seed, "glae");
    let lim = (6.0 / (n + spec.d) as f64).sqrt();
    let mut w = DenseMatrix::from_fn(n, spec.d, |_, _| (2.0 * rng.random::<f64>() - 1.0) * lim);
    let mut adam = Adam::new(w.data().len());
    let epochs = spec.full_batch_epochs;
    let mut problem = GlaeProblem { a_hat, pairs: Vec::new() };
    for epoch in 0..epochs {
        problem.pairs.clear();
        problem.pairs.extend(positives.iter().map(|&(u, v)| (u, v, true)));
        problem.pairs.extend(
            sample_non_edges(&nodes, &edge_set, positives.len(), &mut rng)
                .into_iter()
                .map(|(u, v)| (u, v, false)),
        );
        let (_, grad) = glae_gradient(&problem, &w)?;
        let lr = spec.learning_rate * (1.0 - epoch as f64 / epochs as f64);
        adam.step(w.data_mut(), grad.data(), lr);
    }
    let z = problem.a_hat.matmul(&w)?;
    if !z.is_finite() {
        return Err(Error::NonFinite("GLAE training diverged".into()));
    }
    Ok(EmbeddingTable::single("glae", z)?.with_presence(&view.presence()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, StateId};
    use crate::numerics::finite_diff_check;

    fn pair_graph() -> MdpGraph {
        MdpGraph::with_nodes([], [(StateId(0), Action::Right, StateId(1))], true)
    }

    #[test]
    fn two_node_normalization_is_one_half() {
        let a = normalized_adjacency(&undirected_view(&pair_graph()));
        assert_eq!(a.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn zero_weights_give_ln2() {
        let view = undirected_view(&pair_graph());
        let problem = GlaeProblem {
            a_hat: normalized_adjacency(&view),
            pairs: vec![(0, 1, true), (0, 1, false)],
        };
        let loss = glae_loss(&problem, &DenseMatrix::zeros(2, 3)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    fn ring(n: usize) -> MdpGraph {
        MdpGraph::with_nodes(
            [],
            (0..n).map(|i| (StateId(i), Action::Right, StateId((i + 1) % n))),
            true,
        )
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let view = undirected_view(&ring(5));
        let problem = GlaeProblem {
            a_hat: normalized_adjacency(&view),
            pairs: vec![(0, 1, true), (1, 2, true), (0, 2, false), (1, 3, false), (4, 0, true)],
        };
        let mut rng = seed::rng(2);
        let w = DenseMatrix::from_fn(5, 3, |_, _| rng.random::<f64>() - 0.5);
        let (_, g) = glae_gradient(&problem, &w).unwrap();
        let err = finite_diff_check(
            |p| glae_loss(&problem, &DenseMatrix::from_vec(5, 3, p.to_vec()).unwrap()).unwrap(),
            w.data(),
            g.data(),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn training_reduces_reconstruction_loss() {
        let g = ring(12);
        let view = undirected_view(&g);
        let spec = TrainSpec { d: 4, ..TrainSpec::default() };
        let table = glae(&g, &spec).unwrap();
        let mut rng = seed::rng(99);
        let positives = positive_pairs(&view);
        let edge_set = positives.iter().copied().collect();
        let nodes: Vec<usize> = (0..12).collect();
        let mut pairs: Vec<_> = positives.iter().map(|&(u, v)| (u, v, true)).collect();
        pairs.extend(sample_non_edges(&nodes, &edge_set, positives.len(), &mut rng).into_iter().map(|(u, v)| (u, v, false)));
        let z_loss = bce(table.source(), &pairs, None);

        let lim = (6.0 / 16.0f64).sqrt();
        let mut rng = seed::stage_rng(spec.seed, "glae");
        let w0 = DenseMatrix::from_fn(12, 4, |_, _| (2.0 * rng.random::<f64>() - 1.0) * lim);
        let problem = GlaeProblem { a_hat: normalized_adjacency(&view), pairs };
        assert!(z_loss <= glae_loss(&problem, &w0).unwrap());
        assert_eq!(table, glae(&g, &spec).unwrap());
    }
}
