//! Dense linear algebra and optimization helpers shared by the trainers.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::seed;
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product. Zero entries of `self` are skipped, which makes sparse
    /// left operands (adjacency matrices) cheap.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product over the common prefix of `a` and `b`. Four partial sums
/// break the add dependency chain.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Dominant eigenvalue magnitude of a nonnegative square matrix.
///
/// Power iteration over two steps at a time, so that bipartite (period-2)
/// graphs converge as well. Starts from the all-ones vector.
pub fn spectral_radius(a: &DenseMatrix, iters: usize, tol: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = DenseMatrix::from_vec(n, 1, vec![1.0 / (n as f64).sqrt(); n])?;
    let mut prev = f64::NAN;
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let z = a.matmul(&a.matmul(&x)?)?;
        let norm = z.frobenius_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        est = norm.sqrt();
        x = z.scale(1.0 / norm);
        if (est - prev).abs() < tol * est.max(1.0) {
            break;
        }
        prev = est;
    }
    Ok(est)
}

const KATZ_MAX_TERMS: usize = 100_000;

/// Katz proximity `S = sum_{k>=1} beta^k A^k`.
///
/// Accumulates the series term by term and stops when the next term (which
/// is exactly the fixed-point residual `beta*A*(S+I) - S`) drops below
/// `tol * (1 + |S|_F)`.
pub fn katz_matrix(a: &DenseMatrix, beta: f64, tol: f64) -> Result<DenseMatrix> {
    let rho = spectral_radius(a, 1000, 1e-12)?;
    if !(beta > 0.0) || beta * rho >= 1.0 {
        return Err(Error::KatzDivergence(beta * rho));
    }
    let beta_a = a.scale(beta);
    let mut term = beta_a.clone();
    let mut s = term.clone();
    for _ in 0..KATZ_MAX_TERMS {
        let next = beta_a.matmul(&term)?;
        let norm = next.frobenius_norm();
        if !norm.is_finite() {
            return Err(Error::KatzDivergence(beta * rho));
        }
        if norm < tol * (1.0 + s.frobenius_norm()) {
            return Ok(s);
        }
        s = s.add(&next)?;
        term = next;
    }
    Err(Error::KatzDivergence(beta * rho))
}

/// Default Katz decay: half the convergence limit.
pub fn default_katz_beta(a: &DenseMatrix) -> Result<f64> {
    let rho = spectral_radius(a, 1000, 1e-12)?;
    Ok(if rho > 0.0 { 0.5 / rho } else { 0.5 })
}

/// Source and target factors with `S ~ source * target^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub source: DenseMatrix,
    pub target: DenseMatrix,
}

impl FactorPair {
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        self.source.matmul(&self.target.transpose())
    }

    /// Frobenius norm of `s - source * target^T`.
    pub fn reconstruction_error(&self, s: &DenseMatrix) -> Result<f64> {
        Ok(s.sub(&self.reconstruct()?)?.frobenius_norm())
    }
}

pub const FACTOR_OVERSAMPLE: usize = 8;
pub const FACTOR_POWER_ITERS: usize = 4;

/// Rank-`d` factorization by randomized range finding.
///
/// A seeded Gaussian sketch with oversampling is refined by power iterations
/// (re-orthonormalized each half step), then the small projected matrix is
/// decomposed exactly. The singular values are split evenly between the two
/// factors.
pub fn truncated_factorization(s: &DenseMatrix, d: usize, seed: u64) -> Result<FactorPair> {
    let (m, n) = (s.rows, s.cols);
    if d == 0 || d > m.min(n) {
        return Err(Error::RankOutOfRange { d, rows: m, cols: n });
    }
    let k = (d + FACTOR_OVERSAMPLE).min(m.min(n));
    let sm = s.to_nalgebra();
    let mut rng = seed::stage_rng(seed, "randomized-range");
    let omega = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));

    let mut q = (&sm * omega).qr().q();
    for _ in 0..FACTOR_POWER_ITERS {
        let z = (sm.transpose() * &q).qr().q();
        q = (&sm * z).qr().q();
    }
    let b = q.transpose() * &sm;
    let svd = b.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NonFinite("SVD did not converge".into()));
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let left = q * u;

    let mut source = DenseMatrix::zeros(m, d);
    let mut target = DenseMatrix::zeros(n, d);
    for (c, &idx) in order.iter().take(d).enumerate() {
        let w = svd.singular_values[idx].max(0.0).sqrt();
        for i in 0..m {
            source[(i, c)] = left[(i, idx)] * w;
        }
        for j in 0..n {
            target[(j, c)] = v_t[(idx, j)] * w;
        }
    }
    if !source.is_finite() || !target.is_finite() {
        return Err(Error::NonFinite("factorization produced non-finite values".into()));
    }
    Ok(FactorPair { source, target })
}

/// Compares an analytic gradient to central differences.
///
/// Returns the largest entrywise `|g_fd - g_an| / max(1, |g_fd| + |g_an|)`.
pub fn finite_diff_check(
    mut loss_fn: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic_grad: &[f64],
    eps: f64,
) -> Result<f64> {
    if params.len() != analytic_grad.len() {
        return Err(Error::Shape(format!(
            "{} params but {} gradient entries",
            params.len(),
            analytic_grad.len()
        )));
    }
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let up = loss_fn(&p);
        p[i] = orig - eps;
        let down = loss_fn(&p);
        p[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss at parameter {i}")));
        }
        let fd = (up - down) / (2.0 * eps);
        let an = analytic_grad[i];
        worst = worst.max((fd - an).abs() / (fd.abs() + an.abs()).max(1.0));
    }
    Ok(worst)
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Matrix with i.i.d. `N(0, scale^2)` entries.
#[cfg(test)]
fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut seed::Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}
