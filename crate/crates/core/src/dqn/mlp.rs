//! Q-network: two tanh hidden layers and a tanh output layer with one unit
//! per action.
//!
//! Weight matrices are stored input-major (`fan_in x fan_out`), so a layer
//! is a sum of scaled rows.

use rand::Rng as _;

use crate::embeddings::format_float;
use crate::numerics::{axpy, dot, DenseMatrix};
use crate::seed::Rng;
use crate::{Error, Result};

pub const NUM_ACTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
    pub w3: DenseMatrix,
    pub b3: Vec<f64>,
}

/// Hidden activations of one forward pass.
pub(crate) struct Activations {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub q: [f64; NUM_ACTIONS],
}

fn dense_layer(x: &[f64], w: &DenseMatrix, b: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(out, xi, w.row(i));
        }
    }
    out.iter_mut().for_each(|v| *v = v.tanh());
}

impl MlpParams {
    pub fn zeros(input_dim: usize, h1: usize, h2: usize) -> Self {
        MlpParams {
            w1: DenseMatrix::zeros(input_dim, h1),
            b1: vec![0.0; h1],
            w2: DenseMatrix::zeros(h1, h2),
            b2: vec![0.0; h2],
            w3: DenseMatrix::zeros(h2, NUM_ACTIONS),
            b3: vec![0.0; NUM_ACTIONS],
        }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)` per layer.
    pub fn init(input_dim: usize, h1: usize, h2: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, h1, h2);
        for (w, b) in [(&mut p.w1, &mut p.b1), (&mut p.w2, &mut p.b2), (&mut p.w3, &mut p.b3)] {
            let lim = 1.0 / (w.rows().max(1) as f64).sqrt();
            for v in w.data_mut().iter_mut().chain(b.iter_mut()) {
                *v = (2.0 * rng.random::<f64>() - 1.0) * lim;
            }
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_sizes(&self) -> (usize, usize) {
        (self.w2.rows(), self.w3.rows())
    }

    fn check_shapes(&self) -> Result<()> {
        let (h1, h2) = (self.w1.cols(), self.w2.cols());
        let ok = self.b1.len() == h1
            && self.w2.rows() == h1
            && self.b2.len() == h2
            && self.w3.rows() == h2
            && self.w3.cols() == NUM_ACTIONS
            && self.b3.len() == NUM_ACTIONS;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "layer shapes do not chain: w1 {}x{}, w2 {}x{}, w3 {}x{}",
                self.w1.rows(),
                self.w1.cols(),
                self.w2.rows(),
                self.w2.cols(),
                self.w3.rows(),
                self.w3.cols()
            )))
        }
    }

    pub(crate) fn activations(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a1 = Vec::with_capacity(self.b1.len());
        let mut a2 = Vec::with_capacity(self.b2.len());
        let mut out = Vec::with_capacity(NUM_ACTIONS);
        dense_layer(x, &self.w1, &self.b1, &mut a1);
        dense_layer(&a1, &self.w2, &self.b2, &mut a2);
        dense_layer(&a2, &self.w3, &self.b3, &mut out);
        let mut q = [0.0; NUM_ACTIONS];
        q.copy_from_slice(&out);
        Ok(Activations { a1, a2, q })
    }

    /// Q-values of the four actions, each in `(-1, 1)`.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; NUM_ACTIONS]> {
        Ok(self.activations(x)?.q)
    }

    /// Accumulates into `grad` the gradient of `coeff * q[action]` given the
    /// activations of input `x`.
    pub(crate) fn backprop(&self, x: &[f64], act: &Activations, action: usize, coeff: f64, grad: &mut MlpParams) {
        let d3 = coeff * (1.0 - act.q[action] * act.q[action]);
        grad.b3[action] += d3;
        let mut d2 = Vec::with_capacity(act.a2.len());
        for (j, &a) in act.a2.iter().enumerate() {
            grad.w3[(j, action)] += a * d3;
            d2.push(self.w3[(j, action)] * d3 * (1.0 - a * a));
        }
        axpy(&mut grad.b2, 1.0, &d2);
        let mut d1 = Vec::with_capacity(act.a1.len());
        for (i, &a) in act.a1.iter().enumerate() {
            axpy(grad.w2.row_mut(i), a, &d2);
            d1.push(dot(self.w2.row(i), &d2) * (1.0 - a * a));
        }
        axpy(&mut grad.b1, 1.0, &d1);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(grad.w1.row_mut(i), xi, &d1);
            }
        }
    }

    fn parts(&self) -> [&[f64]; 6] {
        [self.w1.data(), &self.b1, self.w2.data(), &self.b2, self.w3.data(), &self.b3]
    }

    fn parts_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.data_mut(),
            &mut self.b1,
            self.w2.data_mut(),
            &mut self.b2,
            self.w3.data_mut(),
            &mut self.b3,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.parts().iter().map(|p| p.len()).sum()
    }

    /// All parameters in the order w1, b1, w2, b2, w3, b3.
    pub fn flat(&self) -> Vec<f64> {
        self.parts().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut rest = flat;
        for part in self.parts_mut() {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// `self -= lr * grad`.
    pub fn sgd_update(&mut self, grad: &MlpParams, lr: f64) {
        for (p, g) in self.parts_mut().into_iter().zip(grad.parts()) {
            axpy(p, -lr, g);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Checkpoint text: an `mlp in h1 h2 4` line, then per tensor a
    /// `name rows cols` line followed by its rows.
    pub fn to_text(&self) -> String {
        let (h1, h2) = self.hidden_sizes();
        let mut out = format!("mlp {} {} {} {}\n", self.input_dim(), h1, h2, NUM_ACTIONS);
        let tensors: [(&str, usize, usize, &[f64]); 6] = [
            ("w1", self.w1.rows(), self.w1.cols(), self.w1.data()),
            ("b1", 1, h1, &self.b1),
            ("w2", self.w2.rows(), self.w2.cols(), self.w2.data()),
            ("b2", 1, h2, &self.b2),
            ("w3", self.w3.rows(), self.w3.cols(), self.w3.data()),
            ("b3", 1, NUM_ACTIONS, &self.b3),
        ];
        for (name, rows, cols, data) in tensors {
            out.push_str(&format!("{name} {rows} {cols}\n"));
            for row in data.chunks(cols.max(1)).take(rows) {
                let line: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let mut lines = src.lines().map(str::trim).filter(|l| !l.is_empty());
        let bad = |msg: String| Error::Parse(format!("checkpoint: {msg}"));
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let ["mlp", input, h1, h2, out] = dims[..] else {
            return Err(bad(format!("bad header {header:?}")));
        };
        let parse = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad size {t:?}")));
        let (input, h1, h2) = (parse(input)?, parse(h1)?, parse(h2)?);
        if parse(out)? != NUM_ACTIONS {
            return Err(bad(format!("expected {NUM_ACTIONS} outputs")));
        }
        let mut params = MlpParams::zeros(input, h1, h2);
        let names = ["w1", "b1", "w2", "b2", "w3", "b3"];
        for (name, part) in names.into_iter().zip(params.parts_mut()) {
            let shape = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            let fields: Vec<&str> = shape.split_whitespace().collect();
            let [got, rows, cols] = fields[..] else {
                return Err(bad(format!("bad shape line {shape:?}")));
            };
            let (rows, cols) = (parse(rows)?, parse(cols)?);
            if got != name || rows * cols != part.len() {
                return Err(bad(format!("expected {name} with {} values, got {shape:?}", part.len())));
            }
            for r in 0..rows {
                let line = lines.next().ok_or_else(|| bad(format!("{name} row {r} missing")))?;
                let vals = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad float {t:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                if vals.len() != cols {
                    return Err(bad(format!("{name} row {r} has {} values", vals.len())));
                }
                part[r * cols..(r + 1) * cols].copy_from_slice(&vals);
            }
        }
        params.check_shapes()?;
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(params)
    }
}
