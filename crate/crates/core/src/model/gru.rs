//! Single-layer gated recurrent unit.
//!
//! ```text
//! z = σ(x·Wz + h·Uz + bz)
//! r = σ(x·Wr + h·Ur + br)
//! n = tanh(x·Wn + (r ⊙ h)·Un + bn)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! The gate matrices are stored side by side: `input` is `in × 3H`,
//! `recurrent` is `H × 3H` and `bias` is `1 × 3H`, in `z, r, n` order.

use alloc::vec;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::math;
use crate::numkit::{matmul, matmul_nt, matmul_tn, Mat2};

#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub input: Mat2,
    pub recurrent: Mat2,
    pub bias: Mat2,
}

/// Values saved by [`Gru::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruTrace {
    inputs: Mat2,
    /// `T + 1` rows; row 0 is the zero initial state.
    states: Mat2,
    update: Mat2,
    reset: Mat2,
    candidate: Mat2,
}

impl GruTrace {
    /// Hidden states `h_1 … h_T` as a `T × H` matrix.
    pub fn outputs(&self) -> Mat2 {
        let (rows, h) = self.states.shape();
        Mat2::from_vec(rows - 1, h, self.states.as_slice()[h..].to_vec())
            .expect("state rows are finite")
    }
}

pub(crate) fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Mat2 {
    let mut m = Mat2::zeros(rows, cols);
    for w in m.as_mut_slice() {
        *w = rng.gen_range(-limit..=limit);
    }
    m
}

impl Gru {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            input: Mat2::zeros(inputs, 3 * hidden),
            recurrent: Mat2::zeros(hidden, 3 * hidden),
            bias: Mat2::zeros(1, 3 * hidden),
        }
    }

    /// Glorot-uniform input and recurrent weights, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let limit = math::sqrt(6.0 / (inputs + hidden) as f64);
        Self {
            input: uniform(inputs, 3 * hidden, limit, rng),
            recurrent: uniform(hidden, 3 * hidden, limit, rng),
            bias: Mat2::zeros(1, 3 * hidden),
        }
    }

    pub fn inputs(&self) -> usize {
        self.input.rows()
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.rows()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        if self.recurrent.cols() != 3 * h
            || self.input.cols() != 3 * h
            || self.bias.shape() != (1, 3 * h)
        {
            return Err(invalid!(
                "GRU blocks {:?}, {:?}, {:?} are inconsistent",
                self.input.shape(),
                self.recurrent.shape(),
                self.bias.shape()
            ));
        }
        Ok(())
    }

    /// Runs the cell over the rows of `xs` (`T × in`) from a zero state.
    pub fn forward(&self, xs: &Mat2) -> Result<GruTrace> {
        if xs.cols() != self.inputs() {
            return Err(invalid!(
                "GRU expects {} inputs per step, got {}",
                self.inputs(),
                xs.cols()
            ));
        }
        let (steps, h) = (xs.rows(), self.hidden());
        let mut pre = matmul(xs, &self.input)?;
        for t in 0..steps {
            for (p, b) in pre.row_mut(t).iter_mut().zip(self.bias.row(0)) {
                *p += b;
            }
        }
        let mut states = Mat2::zeros(steps + 1, h);
        let mut update = Mat2::zeros(steps, h);
        let mut reset = Mat2::zeros(steps, h);
        let mut candidate = Mat2::zeros(steps, h);
        let u = &self.recurrent;
        let mut gates = vec![0.0; 2 * h];
        let mut rh = vec![0.0; h];
        let mut cand = vec![0.0; h];
        for t in 0..steps {
            let prev = states.row(t).to_vec();
            gates.copy_from_slice(&pre.row(t)[..2 * h]);
            cand.copy_from_slice(&pre.row(t)[2 * h..]);
            for (k, &hk) in prev.iter().enumerate() {
                if hk == 0.0 {
                    continue;
                }
                for (g, &w) in gates.iter_mut().zip(&u.row(k)[..2 * h]) {
                    *g += hk * w;
                }
            }
            for j in 0..h {
                let r = math::sigmoid(gates[h + j]);
                reset[(t, j)] = r;
                rh[j] = r * prev[j];
            }
            for (k, &v) in rh.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (c, &w) in cand.iter_mut().zip(&u.row(k)[2 * h..]) {
                    *c += v * w;
                }
            }
            for j in 0..h {
                let z = math::sigmoid(gates[j]);
                let n = math::tanh(cand[j]);
                update[(t, j)] = z;
                candidate[(t, j)] = n;
                states[(t + 1, j)] = (1.0 - z) * n + z * prev[j];
            }
        }
        Ok(GruTrace {
            inputs: xs.clone(),
            states,
            update,
            reset,
            candidate,
        })
    }

    /// Backpropagation through time. `upstream` is `dL/dh_t` for every step
    /// (`T × H`); returns parameter gradients and `dL/dx` (`T × in`).
    pub fn backward(&self, trace: &GruTrace, upstream: &Mat2) -> Result<(Gru, Mat2)> {
        let (steps, h) = (trace.update.rows(), self.hidden());
        if upstream.shape() != (steps, h) {
            return Err(invalid!(
                "upstream gradient {:?} does not match {steps} steps of {h} units",
                upstream.shape()
            ));
        }
        let u = &self.recurrent;
        let mut d_pre = Mat2::zeros(steps, 3 * h);
        let mut d_recurrent = Mat2::zeros(h, 3 * h);
        let mut d_next = vec![0.0; h];
        let mut d_rh = vec![0.0; h];
        for t in (0..steps).rev() {
            let prev = trace.states.row(t);
            let (z, r, n) = (
                trace.update.row(t),
                trace.reset.row(t),
                trace.candidate.row(t),
            );
            let mut d_prev = vec![0.0; h];
            {
                let da = d_pre.row_mut(t);
                for j in 0..h {
                    let dh = upstream[(t, j)] + d_next[j];
                    da[2 * h + j] = dh * (1.0 - z[j]) * (1.0 - n[j] * n[j]);
                    da[j] = dh * (prev[j] - n[j]) * z[j] * (1.0 - z[j]);
                    d_prev[j] = dh * z[j];
                }
                for (k, d) in d_rh.iter_mut().enumerate() {
                    let w = &u.row(k)[2 * h..];
                    *d = w.iter().zip(&da[2 * h..]).map(|(a, b)| a * b).sum();
                }
                for k in 0..h {
                    da[h + k] = d_rh[k] * prev[k] * r[k] * (1.0 - r[k]);
                    d_prev[k] += d_rh[k] * r[k];
                }
            }
            let da = d_pre.row(t);
            for k in 0..h {
                let w = &u.row(k)[..2 * h];
                d_prev[k] += w.iter().zip(&da[..2 * h]).map(|(a, b)| a * b).sum::<f64>();
                let dst = d_recurrent.row_mut(k);
                let (hk, rhk) = (prev[k], r[k] * prev[k]);
                for j in 0..2 * h {
                    dst[j] += hk * da[j];
                }
                for j in 2 * h..3 * h {
                    dst[j] += rhk * da[j];
                }
            }
            d_next = d_prev;
        }
        let d_input = matmul_tn(&trace.inputs, &d_pre)?;
        let mut d_bias = Mat2::zeros(1, 3 * h);
        for row in d_pre.row_iter() {
            for (b, d) in d_bias.row_mut(0).iter_mut().zip(row) {
                *b += d;
            }
        }
        let d_xs = matmul_nt(&d_pre, &self.input)?;
        Ok((
            Gru {
                input: d_input,
                recurrent: d_recurrent,
                bias: d_bias,
            },
            d_xs,
        ))
    }
}

/// Rows of `m` in reverse order.
pub(crate) fn reverse_rows(m: &Mat2) -> Mat2 {
    let (rows, cols) = m.shape();
    let mut out = Mat2::zeros(rows, cols);
    for t in 0..rows {
        out.row_mut(t).copy_from_slice(m.row(rows - 1 - t));
    }
    out
}
