use super::sgns::train_pairs;
use super::walks::{pair_budget_per_node, rooted_pagerank_stop};
use super::{EmbeddingTable, TrainSpec};
use crate::mdpgraph::MdpGraph;
use crate::seed;
use crate::Result;

/// APP: `(root, stop)` pairs from rooted-PageRank walks on the directed
/// graph train source (root side) and target (stop side) tables with
/// negative sampling. Each root draws as many pairs as a skip-gram corpus
/// gives one node; roots without out-edges draw none.
pub fn app(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let n = graph.universe();
    let succ = graph.successor_lists();
    let mut rng = seed::stage_rng(spec.seed, "app-walks");
    let budget = pair_budget_per_node(spec);
    let mut pairs = Vec::with_capacity(graph.num_nodes() * budget);
    for root in graph.nodes().iter().map(|s| s.0) {
        for _ in 0..budget {
            match rooted_pagerank_stop(root, spec.restart_prob, &succ, &mut rng) {
                Some(stop) => pairs.push((root, stop)),
                None => break,
            }
        }
    }
    let mut counts = vec![0.0; n];
    for &(_, v) in &pairs {
        counts[v] += 1.0;
    }
    let mut rng = seed::stage_rng(spec.seed, "app-sgd");
    let tables = train_pairs(n, &mut pairs, &counts, spec, &mut rng)?;
    Ok(EmbeddingTable::dual("app", tables.center, tables.context)?.with_presence(&graph.presence()))
}

/// Softmax `P(v | u)` over the table's present nodes, from source row `u`
/// against every target row.
pub fn app_conditional(table: &EmbeddingTable, u: usize) -> Vec<f64> {
    let Some(target) = table.target() else {
        return Vec::new();
    };
    let src = table.source().row(u);
    let logits: Vec<f64> = (0..table.n())
        .map(|v| {
            if table.is_present(crate::gridworld::StateId(v)) {
                crate::numerics::dot(src, target.row(v))
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}
