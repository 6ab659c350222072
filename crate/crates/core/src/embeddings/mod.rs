//! Unsupervised node embeddings of an MDP graph.
//!
//! Six trainers share one output type, [`EmbeddingTable`]. Rows are indexed
//! by state id over `0..graph.universe()`; rows of states that never appeared
//! in the samples are exactly zero and marked absent.

mod app;
mod deepwalk;
mod glae;
mod graphsage;
mod hope;
mod nerd;
pub mod sgns;
pub mod walks;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::gridworld::{GridWorld, StateId};
use crate::mdpgraph::MdpGraph;
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

pub use app::{app, app_conditional};
pub use deepwalk::deepwalk;
pub use glae::{glae, glae_gradient, glae_loss, normalized_adjacency, GlaeProblem};
pub use graphsage::{graphsage_unsup, mean_aggregate, SageModel, SagePair};
pub use hope::hope;
pub use nerd::{nerd, nerd_pair_gradient, nerd_pair_loss, nerd_pairs};
pub use walks::{random_walks, WalkCorpus};

/// Trainer hyperparameters. Defaults follow common settings for each method
/// where the benchmark only says "default hyperparameters".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub d: usize,
    /// Passes over the pair corpus (skip-gram style trainers).
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub window: usize,
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// APP stop probability per step.
    pub restart_prob: f64,
    /// Katz decay for HOPE; `None` uses half the convergence limit.
    pub katz_beta: Option<f64>,
    /// Full-batch optimizer steps for the graph autoencoder.
    pub full_batch_epochs: usize,
    /// Training pairs per GraphSAGE mini-batch.
    pub batch_pairs: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            d: 30,
            epochs: 5,
            learning_rate: 0.025,
            negatives: 5,
            window: 5,
            walk_length: 20,
            walks_per_node: 10,
            restart_prob: 0.15,
            katz_beta: None,
            full_batch_epochs: 200,
            batch_pairs: 4096,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidTrainSpec(msg.into()));
        if self.d == 0 {
            return bad("d must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.walk_length < 2 {
            return bad("walk_length must be at least 2");
        }
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return bad("restart_prob must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if matches!(self.katz_beta, Some(b) if !(b > 0.0)) {
            return bad("katz_beta must be positive");
        }
        if self.batch_pairs == 0 {
            return bad("batch_pairs must be at least 1");
        }
        Ok(())
    }
}

/// State representation methods, including the raw matrix baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Matrix,
    DeepWalk,
    App,
    Nerd,
    Hope,
    GraphSage,
    Glae,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Matrix,
        Method::DeepWalk,
        Method::App,
        Method::Nerd,
        Method::Hope,
        Method::GraphSage,
        Method::Glae,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Matrix => "matrix",
            Method::DeepWalk => "deepwalk",
            Method::App => "app",
            Method::Nerd => "nerd",
            Method::Hope => "hope",
            Method::GraphSage => "graphsage",
            Method::Glae => "glae",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

/// Trains the embedding for `method`. The matrix baseline has no embedding.
pub fn train(method: Method, graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    match method {
        Method::Matrix => Err(Error::InvalidTrainSpec(
            "the matrix baseline has no embedding to train".into(),
        )),
        Method::DeepWalk => deepwalk(graph, spec),
        Method::App => app(graph, spec),
        Method::Nerd => nerd(graph, spec),
        Method::Hope => hope(graph, spec),
        Method::GraphSage => graphsage_unsup(graph, spec),
        Method::Glae => glae(graph, spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Single,
    Dual,
}

/// `n x d` node vectors, or paired source/target `n x d` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    method_tag: String,
    source: DenseMatrix,
    target: Option<DenseMatrix>,
    present: Vec<bool>,
}

impl EmbeddingTable {
    pub fn single(method_tag: &str, vectors: DenseMatrix) -> Result<Self> {
        Self::build(method_tag, vectors, None)
    }

    pub fn dual(method_tag: &str, source: DenseMatrix, target: DenseMatrix) -> Result<Self> {
        if (source.rows(), source.cols()) != (target.rows(), target.cols()) {
            return Err(Error::Shape(format!(
                "source {}x{} vs target {}x{}",
                source.rows(),
                source.cols(),
                target.rows(),
                target.cols()
            )));
        }
        Self::build(method_tag, source, Some(target))
    }

    fn build(method_tag: &str, source: DenseMatrix, target: Option<DenseMatrix>) -> Result<Self> {
        if method_tag.is_empty() || method_tag.contains(char::is_whitespace) {
            return Err(Error::Parse(format!("bad method tag {method_tag:?}")));
        }
        if !source.is_finite() || target.as_ref().is_some_and(|t| !t.is_finite()) {
            return Err(Error::NonFinite("embedding entries".into()));
        }
        let present = (0..source.rows())
            .map(|i| {
                source.row(i).iter().any(|&v| v != 0.0)
                    || target.as_ref().is_some_and(|t| t.row(i).iter().any(|&v| v != 0.0))
            })
            .collect();
        Ok(EmbeddingTable {
            method_tag: method_tag.to_string(),
            source,
            target,
            present,
        })
    }

    /// Zeroes the rows of nodes outside `mask` and records presence.
    pub(crate) fn with_presence(mut self, mask: &[bool]) -> Self {
        for i in 0..self.source.rows() {
            let keep = mask.get(i).copied().unwrap_or(false);
            if !keep {
                self.source.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
                if let Some(t) = self.target.as_mut() {
                    t.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
                }
            }
            self.present[i] = keep;
        }
        self
    }

    pub fn n(&self) -> usize {
        self.source.rows()
    }

    pub fn d(&self) -> usize {
        self.source.cols()
    }

    pub fn kind(&self) -> TableKind {
        if self.target.is_some() {
            TableKind::Dual
        } else {
            TableKind::Single
        }
    }

    pub fn method_tag(&self) -> &str {
        &self.method_tag
    }

    pub fn source(&self) -> &DenseMatrix {
        &self.source
    }

    pub fn target(&self) -> Option<&DenseMatrix> {
        self.target.as_ref()
    }

    pub fn is_present(&self, s: StateId) -> bool {
        self.present.get(s.0).copied().unwrap_or(false)
    }

    /// Length of the vector [`Self::input`] returns.
    pub fn input_dim(&self) -> usize {
        match self.kind() {
            TableKind::Single => self.d(),
            TableKind::Dual => 2 * self.d(),
        }
    }

    /// `phi(s)`, or `source(s) ++ target(s)` for dual tables. `None` when the
    /// state has no embedding.
    pub fn input(&self, s: StateId) -> Option<Vec<f64>> {
        if !self.is_present(s) {
            return None;
        }
        let mut v = self.source.row(s.0).to_vec();
        if let Some(t) = &self.target {
            v.extend_from_slice(t.row(s.0));
        }
        Some(v)
    }

    /// Text format: `n d kind method_tag`, then `n` rows (source block then
    /// target block for dual tables) of 17-significant-digit floats.
    pub fn to_text(&self) -> String {
        let kind = match self.kind() {
            TableKind::Single => "single",
            TableKind::Dual => "dual",
        };
        let mut out = format!("{} {} {} {}\n", self.n(), self.d(), kind, self.method_tag);
        let blocks = std::iter::once(&self.source).chain(self.target.as_ref());
        for m in blocks {
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format_float(*v)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let mut lines = src.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty embedding file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [n, d, kind, tag] = parts[..] else {
            return Err(Error::Parse(format!("bad embedding header {header:?}")));
        };
        let n: usize = n.parse().map_err(|_| Error::Parse(format!("bad n {n:?}")))?;
        let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad d {d:?}")))?;
        let read_block = |lines: &mut dyn Iterator<Item = &str>| -> Result<DenseMatrix> {
            let mut data = Vec::with_capacity(n * d);
            for i in 0..n {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
                let row = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad float {t:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                if row.len() != d {
                    return Err(Error::Parse(format!("row {i} has {} values, expected {d}", row.len())));
                }
                data.extend(row);
            }
            DenseMatrix::from_vec(n, d, data)
        };
        let source = read_block(&mut lines)?;
        let table = match kind {
            "single" => Self::single(tag, source)?,
            "dual" => {
                let target = read_block(&mut lines)?;
                Self::dual(tag, source, target)?
            }
            other => return Err(Error::Parse(format!("unknown table kind {other:?}"))),
        };
        if lines.next().is_some() {
            return Err(Error::Parse("trailing rows after embedding blocks".into()));
        }
        Ok(table)
    }
}

/// 17 significant digits, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// DQN state input: an embedding table or the flattened grid.
#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr {
    Matrix,
    Embedding(EmbeddingTable),
}

impl StateRepr {
    pub fn input_dim(&self, world: &GridWorld) -> usize {
        match self {
            StateRepr::Matrix => world.num_states(),
            StateRepr::Embedding(t) => t.input_dim(),
        }
    }
}

/// Input vector for state `s`. States without an embedding (never sampled)
/// map to the zero vector.
pub fn state_input(repr: &StateRepr, world: &GridWorld, s: StateId) -> Vec<f64> {
    match repr {
        StateRepr::Matrix => world.matrix_representation(s),
        StateRepr::Embedding(table) => table.input(s).unwrap_or_else(|| {
            log::warn!(
                "state {} has no {} embedding; using the zero vector",
                s.0,
                table.method_tag()
            );
            vec![0.0; table.input_dim()]
        }),
    }
}
