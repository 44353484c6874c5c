//! Temporal attention over a `T × F` feature sequence.
//!
//! The features are permuted to `F × T`, a dense layer over the time axis
//! produces alignment scores for every feature channel, a softmax over time
//! turns them into attention weights, and the weights (permuted back to
//! `T × F`) multiply the features elementwise. The result keeps all `T`
//! timesteps so it can feed a recurrent layer.
//!
//! A block built for `T` timesteps also accepts shorter sequences of length
//! `n < T`: the dense layer then uses its leading `n × n` weights and first
//! `n` biases, i.e. padded timesteps are masked out of the softmax.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::math;
use crate::numkit::{softmax_backward, softmax_in_place, Mat2};

/// Learnable alignment layer `a = g·W + b` over the time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    weight: Mat2,
    bias: Vec<f64>,
}

/// Result of [`AttentionBlock::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `T × F`: features scaled by their attention weights.
    pub context: Mat2,
    /// `F × T`: one softmax distribution over timesteps per feature channel.
    pub weights: Mat2,
}

/// Gradients of a scalar loss with respect to the block's inputs and
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub features: Mat2,
    pub weight: Mat2,
    pub bias: Vec<f64>,
}

impl AttentionBlock {
    /// Zero weights and bias: every weight row is uniform.
    pub fn zeros(steps: usize) -> Self {
        Self {
            weight: Mat2::zeros(steps, steps),
            bias: vec![0.0; steps],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / 2T)` and zero bias.
    pub fn init<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Self {
        let r = math::sqrt(6.0 / (2 * steps) as f64);
        let mut block = Self::zeros(steps);
        for w in block.weight.as_mut_slice() {
            *w = rng.gen_range(-r..=r);
        }
        block
    }

    pub fn from_parts(weight: Mat2, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != weight.cols() || bias.len() != weight.rows() {
            return Err(invalid!(
                "attention weight {:?} and bias of length {} do not match",
                weight.shape(),
                bias.len()
            ));
        }
        if !weight.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(crate::Error::Numeric(
                "attention parameters are not finite".into(),
            ));
        }
        Ok(Self { weight, bias })
    }

    /// Maximum sequence length `T`.
    pub fn steps(&self) -> usize {
        self.bias.len()
    }

    pub fn weight(&self) -> &Mat2 {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Mat2 {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.steps() {
            return Err(invalid!(
                "sequence of {n} timesteps does not fit an attention block of {}",
                self.steps()
            ));
        }
        Ok(())
    }

    /// Attention weights `F × n` for an `n × F` feature sequence.
    fn weights_for(&self, features: &Mat2) -> Mat2 {
        let (n, f) = features.shape();
        let mut s = Mat2::zeros(f, n);
        for ch in 0..f {
            let row = s.row_mut(ch);
            row.copy_from_slice(&self.bias[..n]);
            for i in 0..n {
                let g = features[(i, ch)];
                if g == 0.0 {
                    continue;
                }
                let w = &self.weight.row(i)[..n];
                for (a, &wij) in row.iter_mut().zip(w) {
                    *a += g * wij;
                }
            }
            softmax_in_place(row);
        }
        s
    }

    pub fn forward(&self, features: &Mat2) -> Result<AttentionOutput> {
        self.check_len(features.rows())?;
        let weights = self.weights_for(features);
        let (n, f) = features.shape();
        let mut context = features.clone();
        for t in 0..n {
            for ch in 0..f {
                context[(t, ch)] *= weights[(ch, t)];
            }
        }
        Ok(AttentionOutput { context, weights })
    }

    /// Backpropagates `upstream = dL/d context` (`n × F`).
    pub fn backward(&self, features: &Mat2, upstream: &Mat2) -> Result<AttentionGrads> {
        self.check_len(features.rows())?;
        if upstream.shape() != features.shape() {
            return Err(invalid!(
                "upstream gradient {:?} does not match features {:?}",
                upstream.shape(),
                features.shape()
            ));
        }
        let (n, f) = features.shape();
        let s = self.weights_for(features);
        let steps = self.steps();
        let mut d_features = Mat2::zeros(n, f);
        let mut d_weight = Mat2::zeros(steps, steps);
        let mut d_bias = vec![0.0; steps];
        let mut ds = vec![0.0; n];
        for ch in 0..f {
            for t in 0..n {
                let up = upstream[(t, ch)];
                d_features[(t, ch)] = up * s[(ch, t)];
                ds[t] = up * features[(t, ch)];
            }
            let da = softmax_backward(s.row(ch), &ds);
            for (j, &d) in da.iter().enumerate() {
                d_bias[j] += d;
            }
            for i in 0..n {
                let g = features[(i, ch)];
                let w_row = &self.weight.row(i)[..n];
                let mut dg = 0.0;
                for j in 0..n {
                    d_weight[(i, j)] += g * da[j];
                    dg += da[j] * w_row[j];
                }
                d_features[(i, ch)] += dg;
            }
        }
        Ok(AttentionGrads {
            features: d_features,
            weight: d_weight,
            bias: d_bias,
        })
    }
}

/// Weighted sum `Σ_i s_i · features[i]` of the feature rows.
pub fn context_sum(weights: &[f64], features: &Mat2) -> Result<Vec<f64>> {
    if weights.len() != features.rows() {
        return Err(invalid!(
            "{} weights for {} timesteps",
            weights.len(),
            features.rows()
        ));
    }
    let mut out = vec![0.0; features.cols()];
    for (row, &s) in features.row_iter().zip(weights) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += s * x;
        }
    }
    Ok(out)
}
