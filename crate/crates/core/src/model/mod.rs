//! Desk-scale line recognizer: strip features, a dense projection, the
//! temporal attention block, a GRU, and a dense output layer with a CTC
//! blank, plus training and the attention-placement ablation.

mod ablation;
mod gru;
mod train;

pub use ablation::{ablation_run, AblationReport, RunSummary};
pub use gru::{Gru, GruTrace};
pub use train::{
    train, train_with, EpochRecord, Optimizer, PlateauSchedule, Split, TrainOutcome, TrainParams,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::AttentionBlock;
use crate::ctcloss::{ctc_grad, ctc_loss_logits};
use crate::decode::{beam_decode, greedy_decode, wbs_decode, LanguageModel, LmMode, ProbMatrix};
use crate::error::{invalid, Error, Result};
use crate::lexicon::{Charset, PrefixTree};
use crate::math;
use crate::numkit::{matmul, matmul_nt, matmul_tn, softmax_rows, Mat2};
use crate::preprocess::{apply_steps, GrayImage, Step};
use gru::{reverse_rows, uniform};

/// Where the attention block sits in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttentionPosition {
    /// Between the projection and the recurrent layer.
    AfterFeatures,
    /// Between the recurrent layer and the output layer.
    AfterRecurrent,
    /// Block bypassed; its parameters are kept but unused.
    Disabled,
}

impl AttentionPosition {
    pub fn name(self) -> &'static str {
        match self {
            Self::AfterFeatures => "after_features",
            Self::AfterRecurrent => "after_recurrent",
            Self::Disabled => "disabled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "after_features" => Ok(Self::AfterFeatures),
            "after_recurrent" => Ok(Self::AfterRecurrent),
            "disabled" => Ok(Self::Disabled),
            other => Err(invalid!("unknown attention position {other:?}")),
        }
    }
}

/// Network and feature-extraction shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    /// Input image height in pixels.
    pub image_height: usize,
    /// Image columns per timestep.
    pub strip: usize,
    /// Projection width `F`.
    pub features: usize,
    /// Recurrent units per direction `H`.
    pub hidden: usize,
    /// Longest sequence `T_max` the attention block accepts.
    pub max_steps: usize,
    pub position: AttentionPosition,
    pub bidirectional: bool,
    /// Preprocessing applied before feature extraction.
    pub preprocess: Vec<Step>,
}

impl ModelConfig {
    /// Small unidirectional network with attention after the projection.
    pub fn toy(image_height: usize) -> Self {
        Self {
            image_height,
            strip: 2,
            features: 16,
            hidden: 24,
            max_steps: 32,
            position: AttentionPosition::AfterFeatures,
            bidirectional: false,
            preprocess: Vec::new(),
        }
    }

    /// Input width `D` of the projection.
    pub fn input_dim(&self) -> usize {
        self.image_height * self.strip
    }

    /// Width of the recurrent output.
    pub fn recurrent_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("image height", self.image_height),
            ("strip", self.strip),
            ("features", self.features),
            ("hidden", self.hidden),
            ("max steps", self.max_steps),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(invalid!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Learnable parameters as named blocks. Biases are `1 × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub proj_w: Mat2,
    pub proj_b: Mat2,
    pub attn_w: Mat2,
    pub attn_b: Mat2,
    pub gru: Gru,
    pub gru_rev: Option<Gru>,
    pub out_w: Mat2,
    pub out_b: Mat2,
}

impl Params {
    pub fn blocks(&self) -> Vec<(&'static str, &Mat2)> {
        let mut out = vec![
            ("projection.weight", &self.proj_w),
            ("projection.bias", &self.proj_b),
            ("attention.weight", &self.attn_w),
            ("attention.bias", &self.attn_b),
            ("gru.input", &self.gru.input),
            ("gru.recurrent", &self.gru.recurrent),
            ("gru.bias", &self.gru.bias),
        ];
        if let Some(g) = &self.gru_rev {
            out.push(("gru_reverse.input", &g.input));
            out.push(("gru_reverse.recurrent", &g.recurrent));
            out.push(("gru_reverse.bias", &g.bias));
        }
        out.push(("output.weight", &self.out_w));
        out.push(("output.bias", &self.out_b));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Mat2)> {
        let mut out = vec![
            ("projection.weight", &mut self.proj_w),
            ("projection.bias", &mut self.proj_b),
            ("attention.weight", &mut self.attn_w),
            ("attention.bias", &mut self.attn_b),
            ("gru.input", &mut self.gru.input),
            ("gru.recurrent", &mut self.gru.recurrent),
            ("gru.bias", &mut self.gru.bias),
        ];
        if let Some(g) = &mut self.gru_rev {
            out.push(("gru_reverse.input", &mut g.input));
            out.push(("gru_reverse.recurrent", &mut g.recurrent));
            out.push(("gru_reverse.bias", &mut g.bias));
        }
        out.push(("output.weight", &mut self.out_w));
        out.push(("output.bias", &mut self.out_b));
        out
    }

    /// Zero parameters of the same shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, m) in z.blocks_mut() {
            m.fill(0.0);
        }
        z
    }

    /// Total number of scalars.
    pub fn len(&self) -> usize {
        self.blocks().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All scalars in block order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (_, m) in self.blocks() {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    /// Inverse of [`Params::flatten`].
    pub fn unflatten(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(invalid!(
                "{} values for {} parameters",
                values.len(),
                self.len()
            ));
        }
        let mut at = 0;
        for (_, m) in self.blocks_mut() {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&values[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn global_norm(&self) -> f64 {
        math::sqrt(self.blocks().iter().map(|(_, m)| m.sum_sq()).sum())
    }

    /// `self += scale · other`, block by block.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in self.blocks_mut() {
            m.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }
}

/// Image strips turned into features: column-major pixels of each
/// `strip`-wide slice, scaled so ink is 1 and paper 0. The last strip is
/// padded with paper.
pub fn image_features(img: &GrayImage, strip: usize) -> Result<Mat2> {
    if strip == 0 {
        return Err(invalid!("strip width must be at least 1"));
    }
    let (w, h) = (img.width(), img.height());
    let steps = w.div_ceil(strip);
    let mut m = Mat2::zeros(steps, h * strip);
    for t in 0..steps {
        let row = m.row_mut(t);
        for dx in 0..strip {
            let x = t * strip + dx;
            if x >= w {
                break;
            }
            for y in 0..h {
                row[dx * h + y] = f64::from(255 - img.get(x, y)) / 255.0;
            }
        }
    }
    Ok(m)
}

/// A feature sequence paired with its encoded label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Mat2,
    pub labels: Vec<usize>,
}

/// Choice of decoder for [`ToyModel::predict`].
#[derive(Clone, Copy)]
pub enum Decoder<'a> {
    Greedy,
    Beam {
        width: usize,
    },
    Wbs {
        tree: &'a PrefixTree,
        lm: Option<&'a dyn LanguageModel>,
        mode: LmMode,
        width: usize,
    },
}

impl core::fmt::Debug for Decoder<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Decoder::Greedy => f.write_str("Greedy"),
            Decoder::Beam { width } => f.debug_struct("Beam").field("width", width).finish(),
            Decoder::Wbs {
                tree,
                mode,
                width,
                lm,
            } => f
                .debug_struct("Wbs")
                .field("words", &tree.words().len())
                .field("lm", &lm.is_some())
                .field("mode", mode)
                .field("width", width)
                .finish(),
        }
    }
}

impl Decoder<'_> {
    pub fn decode(&self, probs: &ProbMatrix, charset: &Charset) -> Result<String> {
        match *self {
            Decoder::Greedy => greedy_decode(probs, charset),
            Decoder::Beam { width } => beam_decode(probs, charset, width),
            Decoder::Wbs {
                tree,
                lm,
                mode,
                width,
            } => wbs_decode(probs, charset, tree, lm, mode, width),
        }
    }
}

/// Intermediate values of one forward pass.
struct Trace {
    input: Mat2,
    projected: Mat2,
    gru: GruTrace,
    gru_rev: Option<GruTrace>,
    recurrent_out: Mat2,
    head_in: Mat2,
    logits: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    config: ModelConfig,
    charset: Charset,
    params: Params,
}

impl ToyModel {
    /// Seeded initialization: Glorot-uniform dense and recurrent weights,
    /// Glorot attention weights, zero biases. The attention block is drawn
    /// for every position so models differing only in position share all
    /// other weights.
    pub fn init(charset: Charset, config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, f, h, t) = (
            config.input_dim(),
            config.features,
            config.hidden,
            config.max_steps,
        );
        let c1 = charset.classes();
        let proj_w = uniform(d, f, math::sqrt(6.0 / (d + f) as f64), &mut rng);
        let attention = AttentionBlock::init(t, &mut rng);
        let gru = Gru::init(f, h, &mut rng);
        let gru_rev = config.bidirectional.then(|| Gru::init(f, h, &mut rng));
        let r = config.recurrent_width();
        let out_w = uniform(r, c1, math::sqrt(6.0 / (r + c1) as f64), &mut rng);
        let params = Params {
            proj_w,
            proj_b: Mat2::zeros(1, f),
            attn_w: attention.weight().clone(),
            attn_b: Mat2::from_vec(1, t, attention.bias().to_vec())?,
            gru,
            gru_rev,
            out_w,
            out_b: Mat2::zeros(1, c1),
        };
        Ok(Self {
            config,
            charset,
            params,
        })
    }

    /// Rebuilds a model from stored parameters, checking every shape.
    pub fn from_parts(config: ModelConfig, charset: Charset, params: Params) -> Result<Self> {
        config.validate()?;
        let (d, f, h, t) = (
            config.input_dim(),
            config.features,
            config.hidden,
            config.max_steps,
        );
        let (r, c1) = (config.recurrent_width(), charset.classes());
        let expect = |name: &str, m: &Mat2, shape: (usize, usize)| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(Error::Format(alloc::format!(
                    "block {name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )))
            }
        };
        expect("projection.weight", &params.proj_w, (d, f))?;
        expect("projection.bias", &params.proj_b, (1, f))?;
        expect("attention.weight", &params.attn_w, (t, t))?;
        expect("attention.bias", &params.attn_b, (1, t))?;
        let grus =
            core::iter::once(Some(&params.gru)).chain(core::iter::once(params.gru_rev.as_ref()));
        for g in grus.flatten() {
            expect("gru.input", &g.input, (f, 3 * h))?;
            expect("gru.recurrent", &g.recurrent, (h, 3 * h))?;
            expect("gru.bias", &g.bias, (1, 3 * h))?;
        }
        if params.gru_rev.is_some() != config.bidirectional {
            return Err(Error::Format(
                "reverse GRU presence does not match the config".into(),
            ));
        }
        expect("output.weight", &params.out_w, (r, c1))?;
        expect("output.bias", &params.out_b, (1, c1))?;
        if !params.is_finite() {
            return Err(Error::Numeric("model parameters are not finite".into()));
        }
        Ok(Self {
            config,
            charset,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn charset(&self) -> &Charset {
        &self.charset
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Output width `C1` (characters plus blank).
    pub fn classes(&self) -> usize {
        self.charset.classes()
    }

    /// Same weights with the attention block moved or bypassed.
    pub fn with_position(&self, position: AttentionPosition) -> Self {
        let mut m = self.clone();
        m.config.position = position;
        m
    }

    fn attention(&self) -> Result<AttentionBlock> {
        AttentionBlock::from_parts(
            self.params.attn_w.clone(),
            self.params.attn_b.row(0).to_vec(),
        )
    }

    /// Preprocesses an image and slices it into the model's feature
    /// sequence.
    pub fn features(&self, img: &GrayImage) -> Result<Mat2> {
        if img.height() != self.config.image_height {
            return Err(invalid!(
                "image height {} does not match the model's {}",
                img.height(),
                self.config.image_height
            ));
        }
        let img = apply_steps(img, &self.config.preprocess)?;
        let x = image_features(&img, self.config.strip)?;
        self.check_input(&x)?;
        Ok(x)
    }

    fn check_input(&self, x: &Mat2) -> Result<()> {
        let (steps, dim) = x.shape();
        if dim != self.config.input_dim() {
            return Err(invalid!(
                "feature width {dim} does not match the model's {}",
                self.config.input_dim()
            ));
        }
        if steps == 0 || steps > self.config.max_steps {
            return Err(invalid!(
                "{steps} timesteps outside [1, {}]",
                self.config.max_steps
            ));
        }
        Ok(())
    }

    fn trace(&self, x: &Mat2) -> Result<Trace> {
        self.check_input(x)?;
        let p = &self.params;
        let mut projected = matmul(x, &p.proj_w)?;
        for t in 0..projected.rows() {
            for (v, b) in projected.row_mut(t).iter_mut().zip(p.proj_b.row(0)) {
                *v = math::tanh(*v + b);
            }
        }
        let recurrent_in = match self.config.position {
            AttentionPosition::AfterFeatures => self.attention()?.forward(&projected)?.context,
            _ => projected.clone(),
        };
        let gru = p.gru.forward(&recurrent_in)?;
        let gru_rev = match &p.gru_rev {
            Some(g) => Some(g.forward(&reverse_rows(&recurrent_in))?),
            None => None,
        };
        let recurrent_out = match &gru_rev {
            None => gru.outputs(),
            Some(rev) => concat_cols(&gru.outputs(), &reverse_rows(&rev.outputs())),
        };
        let head_in = match self.config.position {
            AttentionPosition::AfterRecurrent => self.attention()?.forward(&recurrent_out)?.context,
            _ => recurrent_out.clone(),
        };
        let mut logits = matmul(&head_in, &p.out_w)?;
        for t in 0..logits.rows() {
            for (v, b) in logits.row_mut(t).iter_mut().zip(p.out_b.row(0)) {
                *v += b;
            }
        }
        if !logits.is_finite() {
            return Err(Error::Numeric("network output is not finite".into()));
        }
        Ok(Trace {
            input: x.clone(),
            projected,
            gru,
            gru_rev,
            recurrent_out,
            head_in,
            logits,
        })
    }

    /// Unnormalized scores, `T × C1`.
    pub fn logits(&self, x: &Mat2) -> Result<Mat2> {
        Ok(self.trace(x)?.logits)
    }

    /// Per-timestep character distributions.
    pub fn forward(&self, x: &Mat2) -> Result<ProbMatrix> {
        ProbMatrix::from_mat(softmax_rows(&self.logits(x)?)?)
    }

    /// CTC loss of one example.
    pub fn loss(&self, x: &Mat2, labels: &[usize]) -> Result<f64> {
        ctc_loss_logits(&self.logits(x)?, labels)
    }

    /// CTC loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &Mat2, labels: &[usize]) -> Result<(f64, Params)> {
        let tr = self.trace(x)?;
        let (loss, d_logits) = ctc_grad(&tr.logits, labels)?;
        let p = &self.params;
        let mut g = p.zeros_like();

        g.out_w = matmul_tn(&tr.head_in, &d_logits)?;
        g.out_b = column_sums(&d_logits);
        let d_head = matmul_nt(&d_logits, &p.out_w)?;

        let d_rec_out = if self.config.position == AttentionPosition::AfterRecurrent {
            let ag = self.attention()?.backward(&tr.recurrent_out, &d_head)?;
            add_attention_grads(&mut g, &ag.weight, &ag.bias);
            ag.features
        } else {
            d_head
        };

        let h = self.config.hidden;
        let (d_fwd, d_rev) = if self.config.bidirectional {
            split_cols(&d_rec_out, h)
        } else {
            (d_rec_out, Mat2::zeros(0, 0))
        };
        let (gg, mut d_rec_in) = p.gru.backward(&tr.gru, &d_fwd)?;
        g.gru = gg;
        if let (Some(rev), Some(rev_trace)) = (&p.gru_rev, &tr.gru_rev) {
            let (gr, dx) = rev.backward(rev_trace, &reverse_rows(&d_rev))?;
            g.gru_rev = Some(gr);
            d_rec_in.add_scaled(&reverse_rows(&dx), 1.0);
        }

        let d_projected = if self.config.position == AttentionPosition::AfterFeatures {
            let ag = self.attention()?.backward(&tr.projected, &d_rec_in)?;
            add_attention_grads(&mut g, &ag.weight, &ag.bias);
            ag.features
        } else {
            d_rec_in
        };
        let mut d_pre = d_projected;
        for (d, y) in d_pre.as_mut_slice().iter_mut().zip(tr.projected.as_slice()) {
            *d *= 1.0 - y * y;
        }
        g.proj_w = matmul_tn(&tr.input, &d_pre)?;
        g.proj_b = column_sums(&d_pre);
        Ok((loss, g))
    }

    /// Image to text: preprocessing, features, forward pass and decoding.
    pub fn predict(&self, img: &GrayImage, decoder: &Decoder<'_>) -> Result<String> {
        let probs = self.forward(&self.features(img)?)?;
        decoder.decode(&probs, &self.charset)
    }
}

fn add_attention_grads(g: &mut Params, weight: &Mat2, bias: &[f64]) {
    g.attn_w.add_scaled(weight, 1.0);
    for (a, b) in g.attn_b.row_mut(0).iter_mut().zip(bias) {
        *a += b;
    }
}

fn column_sums(m: &Mat2) -> Mat2 {
    let mut out = Mat2::zeros(1, m.cols());
    for row in m.row_iter() {
        for (o, v) in out.row_mut(0).iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn concat_cols(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = Mat2::zeros(a.rows(), a.cols() + b.cols());
    for t in 0..a.rows() {
        let row = out.row_mut(t);
        row[..a.cols()].copy_from_slice(a.row(t));
        row[a.cols()..].copy_from_slice(b.row(t));
    }
    out
}

fn split_cols(m: &Mat2, at: usize) -> (Mat2, Mat2) {
    let (rows, cols) = m.shape();
    let (mut a, mut b) = (Mat2::zeros(rows, at), Mat2::zeros(rows, cols - at));
    for t in 0..rows {
        a.row_mut(t).copy_from_slice(&m.row(t)[..at]);
        b.row_mut(t).copy_from_slice(&m.row(t)[at..]);
    }
    (a, b)
}
