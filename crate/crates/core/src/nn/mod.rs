//! Minimal neural-network core: dense layers, stacked LSTMs with
//! backpropagation through time, Adam, a small fully-connected VAE, and
//! finite-difference gradient checking.
//!
//! Models expose their parameters as one flat vector in a canonical order so
//! the optimizer, checkpointing, and gradient checks all share one interface.
//! Gradient accumulators reuse the model types themselves (a gradient of a
//! [`Dense`] is a [`Dense`] holding derivative values).

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod vae;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimMismatch { expected: usize, got: usize, context: &'static str },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("empty dataset")]
    EmptyDataset,
}

/// Elementwise activation function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the activation output.
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "linear" => Activation::Linear,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "relu" => Activation::Relu,
            _ => return None,
        })
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
pub fn init_uniform<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Array2<T> {
    let bound = T::one() / T::c(fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| T::uniform(rng, -bound, bound))
}

/// Fully-connected layer `y = act(x W^T + b)` over batch-major inputs.
#[derive(Clone, Debug)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub act: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, output: usize, act: Activation) -> Self {
        Dense {
            w: init_uniform(rng, output, input, input),
            b: Array1::zeros(output),
            act,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense { w: Array2::zeros(self.w.dim()), b: Array1::zeros(self.b.len()), act: self.act }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Forward pass; `x` is (batch, input).
    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        if self.act != Activation::Linear {
            y.mapv_inplace(|v| self.act.apply(v));
        }
        y
    }

    /// Backward pass. `y` must be the output of `forward(x)`. Accumulates
    /// parameter gradients into `grad` and returns dL/dx.
    pub fn backward(&self, x: &Array2<T>, y: &Array2<T>, dy: &Array2<T>, grad: &mut Dense<T>) -> Array2<T> {
        let mut da = dy.clone();
        if self.act != Activation::Linear {
            ndarray::Zip::from(&mut da).and(y).for_each(|d, &yv| {
                *d = *d * self.act.derivative_from_output(yv);
            });
        }
        grad.w += &da.t().dot(x);
        grad.b += &da.sum_axis(Axis(0));
        da.dot(&self.w)
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn write_params(&self, out: &mut Vec<T>) {
        out.extend(self.w.iter().cloned());
        out.extend(self.b.iter().cloned());
    }

    pub fn read_params(&mut self, src: &[T], cursor: &mut usize) {
        for v in self.w.iter_mut() {
            *v = src[*cursor];
            *cursor += 1;
        }
        for v in self.b.iter_mut() {
            *v = src[*cursor];
            *cursor += 1;
        }
    }
}

/// Per-channel z-score normalization statistics.
#[derive(Clone, Debug)]
pub struct Normalizer<T> {
    pub mean: Array1<T>,
    pub std: Array1<T>,
}

impl<T: Scalar> Normalizer<T> {
    /// Fits mean and standard deviation per column.
    pub fn fit(rows: &Array2<T>) -> Self {
        let n = T::c(rows.nrows().max(1) as f64);
        let mean = rows.sum_axis(Axis(0)) / n;
        let mut var = Array1::<T>::zeros(rows.ncols());
        for row in rows.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.mapv(|v| (v / n).sqrt().max(T::c(1e-6)));
        Normalizer { mean, std }
    }

    /// Scale-only statistics with zero mean, for residual targets whose
    /// no-op prediction must stay exactly zero.
    pub fn fit_scale_only(rows: &Array2<T>) -> Self {
        let n = T::c(rows.nrows().max(1) as f64);
        let mut var = Array1::<T>::zeros(rows.ncols());
        for row in rows.rows() {
            for (j, &v) in row.iter().enumerate() {
                var[j] += v * v;
            }
        }
        let std = var.mapv(|v| (v / n).sqrt().max(T::c(1e-6)));
        Normalizer { mean: Array1::zeros(std.len()), std }
    }

    pub fn identity(dim: usize) -> Self {
        Normalizer { mean: Array1::zeros(dim), std: Array1::from_elem(dim, T::one()) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, rows: &mut Array2<T>) {
        for mut row in rows.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
    }

    pub fn apply_vec(&self, row: &mut [T]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.std[j];
        }
    }

    pub fn invert_vec(&self, row: &mut [T]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * self.std[j] + self.mean[j];
        }
    }
}
