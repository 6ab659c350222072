//! Unsupervised GraphSAGE with the GCN-style mean aggregator.
//!
//! Inputs are one-hot node identities, so the first layer's weight matrix
//! doubles as a per-node feature table. Each layer computes
//! `h_v = rownorm(tanh(mean_{u in N(v) + v}(h_u) W))`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::sgns::NegativeSampler;
use super::walks::random_walks;
use super::{EmbeddingTable, TrainSpec};
use crate::mdpgraph::{undirected_view, MdpGraph};
use crate::numerics::{dot, log_sigmoid, sigmoid, Adam, DenseMatrix};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Row `v` of the result is the mean of `features` rows listed in
/// `neighborhoods[v]`.
pub fn mean_aggregate(neighborhoods: &[Vec<usize>], features: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(neighborhoods.len(), features.cols());
    for (v, nb) in neighborhoods.iter().enumerate() {
        let w = 1.0 / nb.len() as f64;
        let row = out.row_mut(v);
        for &u in nb {
            for (o, &f) in row.iter_mut().zip(features.row(u)) {
                *o += w * f;
            }
        }
    }
    out
}

/// Adjoint of [`mean_aggregate`].
fn mean_aggregate_adjoint(neighborhoods: &[Vec<usize>], grad: &DenseMatrix, rows: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows, grad.cols());
    for (v, nb) in neighborhoods.iter().enumerate() {
        let w = 1.0 / nb.len() as f64;
        for &u in nb {
            for (o, &gv) in out.row_mut(u).iter_mut().zip(grad.row(v)) {
                *o += w * gv;
            }
        }
    }
    out
}

fn row_normalize(p: &DenseMatrix) -> DenseMatrix {
    let mut z = p.clone();
    for i in 0..z.rows() {
        let norm = dot(p.row(i), p.row(i)).sqrt();
        if norm > 0.0 {
            z.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        }
    }
    z
}

/// Backpropagates through `z = p / |p|` row by row.
fn row_normalize_backward(p: &DenseMatrix, z: &DenseMatrix, dz: &DenseMatrix) -> DenseMatrix {
    let mut dp = DenseMatrix::zeros(p.rows(), p.cols());
    for i in 0..p.rows() {
        let norm = dot(p.row(i), p.row(i)).sqrt();
        if norm == 0.0 {
            continue;
        }
        let proj = dot(z.row(i), dz.row(i));
        for ((o, &zi), &gi) in dp.row_mut(i).iter_mut().zip(z.row(i)).zip(dz.row(i)) {
            *o = (gi - zi * proj) / norm;
        }
    }
    dp
}

fn tanh_backward(p: &DenseMatrix, dp: &DenseMatrix) -> DenseMatrix {
    let data = p.data().iter().zip(dp.data()).map(|(&y, &g)| g * (1.0 - y * y)).collect();
    DenseMatrix::from_vec(p.rows(), p.cols(), data).expect("same shape")
}

/// A positive pair with its sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SagePair {
    pub u: usize,
    pub v: usize,
    pub negs: Vec<usize>,
}

struct Forward {
    p1: DenseMatrix,
    h1: DenseMatrix,
    m1: DenseMatrix,
    p2: DenseMatrix,
    z: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SageModel {
    neighborhoods: Vec<Vec<usize>>,
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl SageModel {
    /// Glorot-uniform weights over the nodes of `view`, treated as undirected.
    pub fn new(view: &MdpGraph, d: usize, rng: &mut Rng) -> Self {
        let n = view.universe();
        let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|v| BTreeSet::from([v])).collect();
        for (s, _, t) in view.edges() {
            sets[s.0].insert(t.0);
            sets[t.0].insert(s.0);
        }
        let neighborhoods = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let glorot = |rows: usize, cols: usize, rng: &mut Rng| {
            let lim = (6.0 / (rows + cols) as f64).sqrt();
            DenseMatrix::from_fn(rows, cols, |_, _| (2.0 * rng.random::<f64>() - 1.0) * lim)
        };
        let w1 = glorot(n, d, rng);
        let w2 = glorot(d, d, rng);
        SageModel {
            neighborhoods,
            w1,
            w2,
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.data().len() + self.w2.data().len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w1.data().to_vec();
        p.extend_from_slice(self.w2.data());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let k = self.w1.data().len();
        self.w1.data_mut().copy_from_slice(&p[..k]);
        self.w2.data_mut().copy_from_slice(&p[k..]);
    }

    fn forward_full(&self) -> Result<Forward> {
        let p1 = mean_aggregate(&self.neighborhoods, &self.w1);
        let p1 = DenseMatrix::from_vec(p1.rows(), p1.cols(), p1.data().iter().map(|v| v.tanh()).collect())?;
        let h1 = row_normalize(&p1);
        let m1 = mean_aggregate(&self.neighborhoods, &h1);
        let a2 = m1.matmul(&self.w2)?;
        let p2 = DenseMatrix::from_vec(a2.rows(), a2.cols(), a2.data().iter().map(|v| v.tanh()).collect())?;
        let z = row_normalize(&p2);
        Ok(Forward { p1, h1, m1, p2, z })
    }

    /// Final-layer representations, one unit-norm row per node.
    pub fn embed(&self) -> Result<DenseMatrix> {
        Ok(self.forward_full()?.z)
    }

    /// Mean negative-sampling loss over `batch`.
    pub fn loss(&self, batch: &[SagePair]) -> Result<f64> {
        let z = self.embed()?;
        Ok(batch_loss(&z, batch, None))
    }

    /// Loss and gradients with respect to `w1` and `w2`.
    pub fn gradient(&self, batch: &[SagePair]) -> Result<(f64, DenseMatrix, DenseMatrix)> {
        let f = self.forward_full()?;
        let mut dz = DenseMatrix::zeros(f.z.rows(), f.z.cols());
        let loss = batch_loss(&f.z, batch, Some(&mut dz));
        let da2 = tanh_backward(&f.p2, &row_normalize_backward(&f.p2, &f.z, &dz));
        let gw2 = f.m1.transpose().matmul(&da2)?;
        let dm1 = da2.matmul(&self.w2.transpose())?;
        let dh1 = mean_aggregate_adjoint(&self.neighborhoods, &dm1, f.h1.rows());
        let da1 = tanh_backward(&f.p1, &row_normalize_backward(&f.p1, &f.h1, &dh1));
        let gw1 = mean_aggregate_adjoint(&self.neighborhoods, &da1, self.w1.rows());
        Ok((loss, gw1, gw2))
    }
}

/// Mean pair loss; accumulates `d loss / d z` into `dz` when given.
fn batch_loss(z: &DenseMatrix, batch: &[SagePair], mut dz: Option<&mut DenseMatrix>) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for pair in batch {
        let targets = std::iter::once((pair.v, 1.0)).chain(pair.negs.iter().map(|&n| (n, 0.0)));
        for (t, label) in targets {
            let f = dot(z.row(pair.u), z.row(t));
            loss -= if label > 0.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
            if let Some(dz) = dz.as_deref_mut() {
                let g = (sigmoid(f) - label) * scale;
                let (zu, zt) = (z.row(pair.u).to_vec(), z.row(t).to_vec());
                for (o, x) in dz.row_mut(pair.u).iter_mut().zip(&zt) {
                    *o += g * x;
                }
                for (o, x) in dz.row_mut(t).iter_mut().zip(&zu) {
                    *o += g * x;
                }
            }
        }
    }
    loss * scale
}

/// Trains on DeepWalk-style window pairs of the undirected view with Adam
/// over mini-batches and a linearly decaying learning rate.
pub fn graphsage_unsup(graph: &MdpGraph, spec: &TrainSpec) -> Result<EmbeddingTable> {
    spec.validate()?;
    let view = undirected_view(graph);
    let corpus = random_walks(&view, spec)?;
    let mut pairs = corpus.window_pairs(spec.window);
    let mut rng = seed::stage_rng(spec.seed, "graphsage");
    let mut model = SageModel::new(&view, spec.d, &mut rng);
    if !pairs.is_empty() {
        let sampler = NegativeSampler::new(&corpus.counts(view.universe()))?;
        let mut adam = Adam::new(model.num_params());
        let mut params = model.params();
        let batches_per_epoch = pairs.len().div_ceil(spec.batch_pairs);
        let total = (spec.epochs * batches_per_epoch) as f64;
        let mut step = 0usize;
        for _ in 0..spec.epochs {
            pairs.shuffle(&mut rng);
            for chunk in pairs.chunks(spec.batch_pairs) {
                let batch: Vec<SagePair> = chunk
                    .iter()
                    .map(|&(u, v)| {
                        let mut negs = Vec::new();
                        sampler.draw(&mut rng, spec.negatives, v, &mut negs);
                        SagePair { u, v, negs }
                    })
                    .collect();
                let (_, gw1, gw2) = model.gradient(&batch)?;
                let mut grad = gw1.into_data();
                grad.extend(gw2.into_data());
                let lr = spec.learning_rate * (1.0 - step as f64 / total).max(1e-4);
                adam.step(&mut params, &grad, lr);
                model.set_params(&params);
                step += 1;
            }
        }
    }
    let z = model.embed()?;
    if !z.is_finite() {
        return Err(Error::NonFinite("GraphSAGE training diverged".into()));
    }
    Ok(EmbeddingTable::single("graphsage", z)?.with_presence(&view.presence()))
}
