use super::{EmbeddingTable, TrainSpec};
use crate::mdpgraph::MdpGraph;
use crate::numerics::{default_katz_beta, katz_matrix, truncated_factorization};
use crate::seed;
use crate::Result;

pub const KATZ_TOL: f64 = 1e-10;

/// HOPE: rank-`d` factorization of the Katz proximity of the directed
/// adjacency, `S ~ U_s U_t^T`.
pub fn hope(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let a = graph.adjacency();
    let beta = match spec.katz_beta {
        Some(b) => b,
        None => default_katz_beta(&a)?,
    };
    let s = katz_matrix(&a, beta, KATZ_TOL)?;
    let factors = truncated_factorization(&s, spec.d, seed::derive(spec.seed, "hope"))?;
    Ok(EmbeddingTable::dual("hope", factors.source, factors.target)?.with_presence(&graph.presence()))
}
