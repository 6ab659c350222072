//! Skip-gram with negative sampling, shared by DeepWalk, APP and NERD.
//!
//! For a center vector `c`, a positive context `p` and negatives `n_k`, the
//! per-pair loss is `-ln s(c.p) - sum_k ln s(-c.n_k)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::TrainSpec;
use crate::numerics::{dot, log_sigmoid, sigmoid, DenseMatrix};
use crate::seed::Rng;
use crate::{Error, Result};

/// Draws negatives proportional to `count^0.75`.
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[f64]) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| c.max(0.0).powf(0.75)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidTrainSpec(format!("negative distribution: {e}")))?;
        Ok(NegativeSampler { dist })
    }

    /// Fills `out` with `k` draws, dropping any that hit `positive`.
    pub fn draw(&self, rng: &mut Rng, k: usize, positive: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..k {
            let n = self.dist.sample(rng);
            if n != positive {
                out.push(n);
            }
        }
    }
}

pub fn pair_loss(center: &[f64], context: &DenseMatrix, pos: usize, negs: &[usize]) -> f64 {
    -log_sigmoid(dot(center, context.row(pos)))
        - negs
            .iter()
            .map(|&n| log_sigmoid(-dot(center, context.row(n))))
            .sum::<f64>()
}

/// Loss, the gradient with respect to `center`, and per-context-row
/// coefficients `g` such that the gradient of row `t` is `g * center`.
fn pair_terms(
    center: &[f64],
    context: &DenseMatrix,
    pos: usize,
    negs: &[usize],
    grad_center: &mut [f64],
    coeffs: &mut Vec<(usize, f64)>,
) -> f64 {
    grad_center.iter_mut().for_each(|g| *g = 0.0);
    coeffs.clear();
    let mut loss = 0.0;
    let targets = std::iter::once((pos, 1.0)).chain(negs.iter().map(|&n| (n, 0.0)));
    for (t, label) in targets {
        let row = context.row(t);
        let f = dot(center, row);
        loss -= if label > 0.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
        let g = sigmoid(f) - label;
        for (gc, &r) in grad_center.iter_mut().zip(row) {
            *gc += g * r;
        }
        coeffs.push((t, g));
    }
    loss
}

/// Analytic gradient of [`pair_loss`]: `(loss, d/dcenter, d/dcontext)`.
pub fn pair_gradient(
    center: &[f64],
    context: &DenseMatrix,
    pos: usize,
    negs: &[usize],
) -> (f64, Vec<f64>, DenseMatrix) {
    let mut grad_center = vec![0.0; center.len()];
    let mut coeffs = Vec::new();
    let loss = pair_terms(center, context, pos, negs, &mut grad_center, &mut coeffs);
    let mut grad_context = DenseMatrix::zeros(context.rows(), context.cols());
    for (t, g) in coeffs {
        for (gr, &c) in grad_context.row_mut(t).iter_mut().zip(center) {
            *gr += g * c;
        }
    }
    (loss, grad_center, grad_context)
}

/// Reusable buffers for [`sgns_step`].
#[derive(Default)]
pub struct Scratch {
    grad_center: Vec<f64>,
    coeffs: Vec<(usize, f64)>,
    pub negs: Vec<usize>,
}

/// One gradient step on a single pair. Returns the pre-update loss.
pub fn sgns_step(
    center: &mut [f64],
    context: &mut DenseMatrix,
    pos: usize,
    negs: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    scratch.grad_center.resize(center.len(), 0.0);
    let loss = pair_terms(
        center,
        context,
        pos,
        negs,
        &mut scratch.grad_center,
        &mut scratch.coeffs,
    );
    for &(t, g) in &scratch.coeffs {
        for (r, &c) in context.row_mut(t).iter_mut().zip(center.iter()) {
            *r -= lr * g * c;
        }
    }
    for (c, &g) in center.iter_mut().zip(&scratch.grad_center) {
        *c -= lr * g;
    }
    loss
}

/// Center and context tables after training.
pub struct SkipGramTables {
    pub center: DenseMatrix,
    pub context: DenseMatrix,
}

/// Trains center/context tables over `(center, context)` pairs.
///
/// Center rows start uniform in `+-0.5/d`, context rows at zero. Pairs are
/// reshuffled every epoch, and the learning rate decays linearly to 1e-4 of
/// its initial value.
pub fn train_pairs(
    universe: usize,
    pairs: &mut [(usize, usize)],
    negative_counts: &[f64],
    spec: &TrainSpec,
    rng: &mut Rng,
) -> Result<SkipGramTables> {
    let TrainSpec { d, epochs, learning_rate, negatives, .. } = *spec;
    let mut center = DenseMatrix::from_fn(universe, d, |_, _| {
        (rng.random::<f64>() - 0.5) / d as f64
    });
    let mut context = DenseMatrix::zeros(universe, d);
    if pairs.is_empty() {
        return Ok(SkipGramTables { center, context });
    }
    let sampler = NegativeSampler::new(negative_counts)?;
    let total = (epochs * pairs.len()) as f64;
    let min_lr = learning_rate * 1e-4;
    let mut scratch = Scratch::default();
    let mut done = 0usize;
    for _ in 0..epochs {
        pairs.shuffle(rng);
        for &(c, p) in pairs.iter() {
            let lr = (learning_rate * (1.0 - done as f64 / total)).max(min_lr);
            let mut negs = std::mem::take(&mut scratch.negs);
            sampler.draw(rng, negatives, p, &mut negs);
            sgns_step(center.row_mut(c), &mut context, p, &negs, lr, &mut scratch);
            scratch.negs = negs;
            done += 1;
        }
    }
    if !center.is_finite() || !context.is_finite() {
        return Err(Error::NonFinite("skip-gram training diverged".into()));
    }
    Ok(SkipGramTables { center, context })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use crate::seed;

    fn random_problem(seed: u64) -> (Vec<f64>, DenseMatrix) {
        let mut rng = seed::rng(seed);
        let center: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
        let context = DenseMatrix::from_fn(5, 4, |_, _| rng.random::<f64>() - 0.5);
        (center, context)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for s in 0..10 {
            let (center, context) = random_problem(s);
            let negs = [2, 3, 3];
            let (_, gc, gx) = pair_gradient(&center, &context, 1, &negs);
            let mut params = center.clone();
            params.extend_from_slice(context.data());
            let mut grad = gc;
            grad.extend_from_slice(gx.data());
            let err = finite_diff_check(
                |p| {
                    let ctx = DenseMatrix::from_vec(5, 4, p[4..].to_vec()).unwrap();
                    pair_loss(&p[..4], &ctx, 1, &negs)
                },
                &params,
                &grad,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn small_step_decreases_pair_loss() {
        let (mut center, mut context) = random_problem(42);
        let negs = [0, 4];
        let before = pair_loss(&center, &context, 2, &negs);
        let reported = sgns_step(&mut center, &mut context, 2, &negs, 1e-3, &mut Scratch::default());
        assert_eq!(before, reported);
        assert!(pair_loss(&center, &context, 2, &negs) < before);
    }

    #[test]
    fn sampler_skips_positive() {
        let sampler = NegativeSampler::new(&[1.0, 0.0, 0.0]).unwrap();
        let mut out = Vec::new();
        sampler.draw(&mut seed::rng(0), 5, 0, &mut out);
        assert!(out.is_empty());
        let sampler = NegativeSampler::new(&[0.0, 3.0, 0.0]).unwrap();
        sampler.draw(&mut seed::rng(0), 5, 0, &mut out);
        assert_eq!(out, vec![1; 5]);
    }
}
