//! Stacked LSTM with batched forward and backpropagation through time.
//!
//! Gate layout in all 4H-wide buffers is `[input, forget, candidate, output]`.
//! The forget-gate bias is initialized to 1.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use super::{init_uniform, sigmoid, Activation, Dense, NnError};
use crate::scalar::Scalar;

/// One LSTM layer.
#[derive(Clone, Debug)]
pub struct LstmCell<T> {
    pub w_ih: Array2<T>, // (4H, D)
    pub w_hh: Array2<T>, // (4H, H)
    pub b: Array1<T>,    // (4H)
}

impl<T: Scalar> LstmCell<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize) -> Self {
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(T::one());
        LstmCell {
            w_ih: init_uniform(rng, 4 * hidden, input, input),
            w_hh: init_uniform(rng, 4 * hidden, hidden, hidden),
            b,
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmCell {
            w_ih: Array2::zeros(self.w_ih.dim()),
            w_hh: Array2::zeros(self.w_hh.dim()),
            b: Array1::zeros(self.b.len()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.b.len()
    }
}

/// Activated gate values for one step of one layer, kept for backprop.
#[derive(Clone, Debug)]
struct StepCache<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    i: Array2<T>,
    f: Array2<T>,
    g: Array2<T>,
    o: Array2<T>,
    tanh_c: Array2<T>,
}

/// Batched recurrent state: per-layer hidden and cell activations, one row
/// per lane.
#[derive(Clone, Debug)]
pub struct LstmBatchState<T> {
    pub h: Vec<Array2<T>>,
    pub c: Vec<Array2<T>>,
}

impl<T: Scalar> LstmBatchState<T> {
    pub fn batch(&self) -> usize {
        self.h[0].nrows()
    }
}

/// Stacked LSTM layers.
#[derive(Clone, Debug)]
pub struct LstmStack<T> {
    pub cells: Vec<LstmCell<T>>,
}

impl<T: Scalar> LstmStack<T> {
    /// Builds a stack with the given per-layer hidden sizes.
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden_sizes: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(hidden_sizes.len());
        let mut d = input;
        for &h in hidden_sizes {
            cells.push(LstmCell::new(rng, d, h));
            d = h;
        }
        LstmStack { cells }
    }

    pub fn zeros_like(&self) -> Self {
        LstmStack { cells: self.cells.iter().map(LstmCell::zeros_like).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.cells[0].input()
    }

    pub fn top_hidden(&self) -> usize {
        self.cells.last().unwrap().hidden()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.cells.iter().map(LstmCell::hidden).collect()
    }

    /// Total hidden width across layers (the policy's recurrent feature).
    pub fn total_hidden(&self) -> usize {
        self.cells.iter().map(LstmCell::hidden).sum()
    }

    /// Fresh all-zero state for `batch` lanes.
    pub fn zero_state(&self, batch: usize) -> LstmBatchState<T> {
        LstmBatchState {
            h: self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect(),
            c: self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect(),
        }
    }

    fn step_layer(
        cell: &LstmCell<T>,
        x: &Array2<T>,
        h_prev: &Array2<T>,
        c_prev: &Array2<T>,
    ) -> (Array2<T>, Array2<T>, Array2<T>, Array2<T>, Array2<T>, Array2<T>, Array2<T>) {
        let hidden = cell.hidden();
        let mut gates = x.dot(&cell.w_ih.t());
        gates += &h_prev.dot(&cell.w_hh.t());
        gates += &cell.b;

        let mut i = gates.slice(s![.., 0..hidden]).to_owned();
        let mut f = gates.slice(s![.., hidden..2 * hidden]).to_owned();
        let mut g = gates.slice(s![.., 2 * hidden..3 * hidden]).to_owned();
        let mut o = gates.slice(s![.., 3 * hidden..4 * hidden]).to_owned();
        i.mapv_inplace(sigmoid);
        f.mapv_inplace(sigmoid);
        g.mapv_inplace(|v| v.tanh());
        o.mapv_inplace(sigmoid);

        let mut c = f.clone();
        c *= c_prev;
        Zip::from(&mut c).and(&i).and(&g).for_each(|cv, &iv, &gv| *cv = *cv + iv * gv);
        let tanh_c = c.mapv(|v| v.tanh());
        let mut h = o.clone();
        h *= &tanh_c;
        (h, c, i, f, g, o, tanh_c)
    }

    /// Advances the whole stack one timestep, mutating `state`. Returns the
    /// top layer's hidden activations.
    pub fn step(&self, state: &mut LstmBatchState<T>, x: &Array2<T>) -> Result<Array2<T>, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::DimMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
                context: "lstm step input",
            });
        }
        let mut inp = x.clone();
        for (l, cell) in self.cells.iter().enumerate() {
            let (h, c, ..) = Self::step_layer(cell, &inp, &state.h[l], &state.c[l]);
            state.h[l] = h.clone();
            state.c[l] = c;
            inp = h;
        }
        Ok(inp)
    }

    /// Teacher-forced forward over a window. Returns the top hidden sequence
    /// and the cache needed by [`LstmStack::backward_seq`].
    pub fn forward_seq(&self, xs: &[Array2<T>]) -> Result<(Vec<Array2<T>>, SeqCache<T>), NnError> {
        let batch = xs.first().map(|x| x.nrows()).ok_or(NnError::EmptyDataset)?;
        let mut state = self.zero_state(batch);
        let mut caches: Vec<Vec<StepCache<T>>> =
            self.cells.iter().map(|_| Vec::with_capacity(xs.len())).collect();
        let mut tops = Vec::with_capacity(xs.len());

        for x in xs {
            if x.ncols() != self.input_dim() {
                return Err(NnError::DimMismatch {
                    expected: self.input_dim(),
                    got: x.ncols(),
                    context: "lstm window input",
                });
            }
            let mut inp = x.clone();
            for (l, cell) in self.cells.iter().enumerate() {
                let (h, c, i, f, g, o, tanh_c) =
                    Self::step_layer(cell, &inp, &state.h[l], &state.c[l]);
                caches[l].push(StepCache {
                    x: inp,
                    h_prev: state.h[l].clone(),
                    c_prev: state.c[l].clone(),
                    i,
                    f,
                    g,
                    o,
                    tanh_c,
                });
                state.h[l] = h.clone();
                state.c[l] = c;
                inp = h;
            }
            tops.push(inp);
        }
        Ok((tops, SeqCache { layers: caches }))
    }

    /// Backpropagation through time. `d_tops[t]` is dL/d(top hidden at t).
    /// Accumulates parameter gradients into `grad`.
    pub fn backward_seq(&self, cache: &SeqCache<T>, d_tops: &[Array2<T>], grad: &mut LstmStack<T>) {
        let steps = d_tops.len();
        let mut d_from_above: Vec<Array2<T>> = d_tops.to_vec();

        for (l, cell) in self.cells.iter().enumerate().rev() {
            let hidden = cell.hidden();
            let batch = d_from_above[0].nrows();
            let mut dh_next = Array2::<T>::zeros((batch, hidden));
            let mut dc_next = Array2::<T>::zeros((batch, hidden));
            let gl = &mut grad.cells[l];
            let mut d_below: Vec<Array2<T>> = Vec::with_capacity(steps);

            for t in (0..steps).rev() {
                let sc = &cache.layers[l][t];
                let mut dh = d_from_above[t].clone();
                dh += &dh_next;

                // dO and dC through h = o * tanh(c).
                let mut do_ = dh.clone();
                do_ *= &sc.tanh_c;
                let mut dc = dh;
                Zip::from(&mut dc).and(&sc.o).and(&sc.tanh_c).for_each(|d, &ov, &tc| {
                    *d = *d * ov * (T::one() - tc * tc);
                });
                dc += &dc_next;

                let mut di = dc.clone();
                di *= &sc.g;
                let mut df = dc.clone();
                df *= &sc.c_prev;
                let mut dg = dc.clone();
                dg *= &sc.i;
                dc_next = dc;
                dc_next *= &sc.f;

                // Through the gate nonlinearities.
                Zip::from(&mut di).and(&sc.i).for_each(|d, &v| *d = *d * v * (T::one() - v));
                Zip::from(&mut df).and(&sc.f).for_each(|d, &v| *d = *d * v * (T::one() - v));
                Zip::from(&mut dg).and(&sc.g).for_each(|d, &v| *d = *d * (T::one() - v * v));
                Zip::from(&mut do_).and(&sc.o).for_each(|d, &v| *d = *d * v * (T::one() - v));

                let mut da = Array2::<T>::zeros((batch, 4 * hidden));
                da.slice_mut(s![.., 0..hidden]).assign(&di);
                da.slice_mut(s![.., hidden..2 * hidden]).assign(&df);
                da.slice_mut(s![.., 2 * hidden..3 * hidden]).assign(&dg);
                da.slice_mut(s![.., 3 * hidden..4 * hidden]).assign(&do_);

                gl.w_ih += &da.t().dot(&sc.x);
                gl.w_hh += &da.t().dot(&sc.h_prev);
                gl.b += &da.sum_axis(Axis(0));

                dh_next = da.dot(&cell.w_hh);
                if l > 0 {
                    d_below.push(da.dot(&cell.w_ih));
                }
            }
            if l > 0 {
                d_below.reverse();
                d_from_above = d_below;
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.cells.iter().map(LstmCell::num_params).sum()
    }

    pub fn write_params(&self, out: &mut Vec<T>) {
        for c in &self.cells {
            out.extend(c.w_ih.iter().cloned());
            out.extend(c.w_hh.iter().cloned());
            out.extend(c.b.iter().cloned());
        }
    }

    pub fn read_params(&mut self, src: &[T], cursor: &mut usize) {
        for c in &mut self.cells {
            for v in c.w_ih.iter_mut().chain(c.w_hh.iter_mut()).chain(c.b.iter_mut()) {
                *v = src[*cursor];
                *cursor += 1;
            }
        }
    }
}

/// Forward cache for one teacher-forced window.
pub struct SeqCache<T> {
    layers: Vec<Vec<StepCache<T>>>,
}

/// An LSTM stack with a dense head applied to the top hidden state at every
/// step. Covers the world-model parts and the recurrent baseline policy.
#[derive(Clone, Debug)]
pub struct SeqRegressor<T> {
    pub stack: LstmStack<T>,
    pub head: Dense<T>,
}

impl<T: Scalar> SeqRegressor<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden_sizes: &[usize], output: usize) -> Self {
        let stack = LstmStack::new(rng, input, hidden_sizes);
        let head = Dense::new(rng, stack.top_hidden(), output, Activation::Linear);
        SeqRegressor { stack, head }
    }

    pub fn zeros_like(&self) -> Self {
        SeqRegressor { stack: self.stack.zeros_like(), head: self.head.zeros_like() }
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    /// One deployment step: advances the state, returns the head output.
    pub fn step(&self, state: &mut LstmBatchState<T>, x: &Array2<T>) -> Result<Array2<T>, NnError> {
        let top = self.stack.step(state, x)?;
        Ok(self.head.forward(&top))
    }

    /// Teacher-forced outputs over a window.
    pub fn forward_seq(&self, xs: &[Array2<T>]) -> Result<Vec<Array2<T>>, NnError> {
        let (tops, _) = self.stack.forward_seq(xs)?;
        Ok(tops.iter().map(|h| self.head.forward(h)).collect())
    }

    /// Mean-squared-error loss over a window and its gradients.
    ///
    /// The loss averages over batch, steps, and output dimensions.
    pub fn loss_and_grads(
        &self,
        xs: &[Array2<T>],
        targets: &[Array2<T>],
    ) -> Result<(T, SeqRegressor<T>), NnError> {
        let (tops, cache) = self.stack.forward_seq(xs)?;
        let mut grad = self.zeros_like();
        let steps = xs.len();
        let batch = xs[0].nrows();
        let denom = T::c((batch * steps * self.head.output_dim()) as f64);

        let mut loss = T::zero();
        let mut d_tops = Vec::with_capacity(steps);
        for t in 0..steps {
            let y = self.head.forward(&tops[t]);
            let mut dy = y.clone();
            dy -= &targets[t];
            loss += dy.iter().map(|&d| d * d).sum::<T>();
            dy.mapv_inplace(|d| d * T::c(2.0) / denom);
            let dh = self.head.backward(&tops[t], &y, &dy, &mut grad.head);
            d_tops.push(dh);
        }
        self.stack.backward_seq(&cache, &d_tops, &mut grad.stack);
        Ok((loss / denom, grad))
    }

    pub fn num_params(&self) -> usize {
        self.stack.num_params() + self.head.num_params()
    }

    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        self.stack.write_params(&mut out);
        self.head.write_params(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, src: &[T]) {
        let mut cursor = 0;
        self.stack.read_params(src, &mut cursor);
        self.head.read_params(src, &mut cursor);
        debug_assert_eq!(cursor, src.len());
    }

    /// Gradient of a window loss, flattened in canonical parameter order.
    pub fn grads_flat(&self, grad: &SeqRegressor<T>) -> Vec<T> {
        grad.params_flat()
    }
}
