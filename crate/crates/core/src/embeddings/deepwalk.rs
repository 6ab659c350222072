use super::sgns::train_pairs;
use super::walks::random_walks;
use super::{EmbeddingTable, TrainSpec};
use crate::mdpgraph::{undirected_view, MdpGraph};
use crate::seed;
use crate::Result;

/// DeepWalk: uniform walks on the undirected view, skip-gram with negative
/// sampling over window pairs. Context vectors are discarded.
pub fn deepwalk(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let view = undirected_view(graph);
    let corpus = random_walks(&view, spec)?;
    let mut pairs = corpus.window_pairs(spec.window);
    let counts = corpus.counts(view.universe());
    let mut rng = seed::stage_rng(spec.seed, "deepwalk-sgd");
    let tables = train_pairs(view.universe(), &mut pairs, &counts, spec, &mut rng)?;
    Ok(EmbeddingTable::single("deepwalk", tables.center)?.with_presence(&view.presence()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, StateId};
    use crate::numerics::dot;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    #[test]
    fn disjoint_triangles_separate() {
        let mut edges = Vec::new();
        for base in [0usize, 3] {
            for i in 0..3 {
                let (u, v) = (base + i, base + (i + 1) % 3);
                edges.push((StateId(u), Action::Right, StateId(v)));
            }
        }
        let g = MdpGraph::with_nodes([], edges, false);
        let spec = TrainSpec { d: 8, seed: 3, ..TrainSpec::default() };
        let table = deepwalk(&g, &spec).unwrap();
        assert_eq!(table.n(), 6);
        let row = |i: usize| table.source().row(i).to_vec();
        let (mut intra, mut cross) = (Vec::new(), Vec::new());
        for i in 0..6 {
            for j in (i + 1)..6 {
                let c = cosine(&row(i), &row(j));
                if i / 3 == j / 3 { intra.push(c) } else { cross.push(c) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) > mean(&cross), "{} vs {}", mean(&intra), mean(&cross));
    }

    #[test]
    fn seeded_and_finite() {
        let g = MdpGraph::with_nodes(
            [],
            [(StateId(0), Action::Right, StateId(1)), (StateId(1), Action::Down, StateId(2))],
            true,
        );
        let spec = TrainSpec { d: 4, ..TrainSpec::default() };
        let a = deepwalk(&g, &spec).unwrap();
        assert_eq!(a, deepwalk(&g, &spec).unwrap());
        assert!(a.source().is_finite());
        assert_eq!(a.n(), 3);
    }
}
