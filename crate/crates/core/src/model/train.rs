use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Example, Params, ToyModel};
use crate::ctcloss::check_feasible;
use crate::error::{invalid, Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Epochs without validation improvement before stopping.
    pub stop_tolerance: usize,
    /// Epochs without validation improvement before the rate is reduced.
    pub reduce_tolerance: usize,
    pub lr_reduce_factor: f64,
    /// Global gradient-norm limit per batch.
    pub clip_norm: Option<f64>,
    pub optimizer: Optimizer,
    /// Shuffling seed.
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch: 16,
            lr: 0.001,
            stop_tolerance: 20,
            reduce_tolerance: 15,
            lr_reduce_factor: 0.2,
            clip_norm: Some(5.0),
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(invalid!("epochs and batch size must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid!(
                "learning rate {} must be finite and non-negative",
                self.lr
            ));
        }
        if !(self.stop_tolerance > self.reduce_tolerance && self.reduce_tolerance > 0) {
            return Err(invalid!(
                "need stop tolerance {} > reduce tolerance {} > 0",
                self.stop_tolerance,
                self.reduce_tolerance
            ));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(invalid!(
                "lr reduce factor {} outside (0, 1)",
                self.lr_reduce_factor
            ));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(invalid!("clip norm {c} must be positive"));
            }
        }
        Ok(())
    }
}

/// Reduce-on-plateau learning rate with early stopping, driven by the
/// validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    reduce_tolerance: usize,
    stop_tolerance: usize,
    best: f64,
    stale: usize,
    since_reduce: usize,
}

/// What [`PlateauSchedule::observe`] decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateauStep {
    pub improved: bool,
    pub reduced: bool,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(params: &TrainParams) -> Self {
        Self {
            lr: params.lr,
            factor: params.lr_reduce_factor,
            reduce_tolerance: params.reduce_tolerance,
            stop_tolerance: params.stop_tolerance,
            best: f64::INFINITY,
            stale: 0,
            since_reduce: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records one epoch's validation loss.
    pub fn observe(&mut self, val_loss: f64) -> PlateauStep {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
            self.since_reduce = 0;
            return PlateauStep {
                improved: true,
                reduced: false,
                stop: false,
            };
        }
        self.stale += 1;
        self.since_reduce += 1;
        let reduced = self.since_reduce >= self.reduce_tolerance;
        if reduced {
            self.lr *= self.factor;
            self.since_reduce = 0;
        }
        PlateauStep {
            improved: false,
            reduced,
            stop: self.stale >= self.stop_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

/// Mean CTC loss over one split after (val) or during (train) an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    /// Rate used for the epoch's updates.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights with the lowest validation loss.
    pub model: ToyModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Training examples left out because their labels do not fit their
    /// timesteps.
    pub skipped_train: Vec<usize>,
    pub skipped_val: Vec<usize>,
}

fn feasible(examples: &[Example]) -> (Vec<usize>, Vec<usize>) {
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| (i, check_feasible(&e.labels, e.features.rows()).is_ok()))
        .fold((Vec::new(), Vec::new()), |(mut ok, mut bad), (i, good)| {
            if good {
                ok.push(i)
            } else {
                bad.push(i)
            }
            (ok, bad)
        })
}

/// Mean loss over the selected examples.
fn mean_loss(model: &ToyModel, examples: &[Example], which: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in which {
        total += model.loss(&examples[i].features, &examples[i].labels)?;
    }
    Ok(total / which.len() as f64)
}

struct AdamState {
    m: Params,
    v: Params,
    step: i32,
}

/// [`train_with`] without a progress callback.
pub fn train(
    model: &ToyModel,
    train_set: &[Example],
    val_set: &[Example],
    params: &TrainParams,
) -> Result<TrainOutcome> {
    train_with(model, train_set, val_set, params, |_| {})
}

/// Mini-batch training on the summed CTC loss of each batch, with
/// reduce-on-plateau and early stopping on the mean validation loss.
/// `observe` sees every history record as it is produced.
pub fn train_with(
    model: &ToyModel,
    train_set: &[Example],
    val_set: &[Example],
    params: &TrainParams,
    mut observe: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    params.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(invalid!("training and validation sets must be non-empty"));
    }
    let (mut order, skipped_train) = feasible(train_set);
    let (val_idx, skipped_val) = feasible(val_set);
    if order.is_empty() || val_idx.is_empty() {
        return Err(invalid!("no example's labels fit its timesteps"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut current = model.clone();
    let mut best = model.clone();
    let mut schedule = PlateauSchedule::new(params);
    let mut history = Vec::new();
    let mut best_epoch = 0;
    let mut stopped_early = false;
    let mut epochs_run = 0;
    let mut adam = match params.optimizer {
        Optimizer::Adam { .. } => Some(AdamState {
            m: model.params().zeros_like(),
            v: model.params().zeros_like(),
            step: 0,
        }),
        Optimizer::Sgd => None,
    };

    for epoch in 1..=params.epochs {
        epochs_run = epoch;
        let lr = schedule.lr();
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for batch in order.chunks(params.batch) {
            let mut grad = current.params().zeros_like();
            for &i in batch {
                let (loss, g) =
                    current.loss_and_grad(&train_set[i].features, &train_set[i].labels)?;
                train_total += loss;
                grad.add_scaled(&g, 1.0);
            }
            if let Some(limit) = params.clip_norm {
                let norm = grad.global_norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            if !grad.is_finite() {
                return Err(Error::Numeric(alloc::format!(
                    "non-finite gradient in epoch {epoch}"
                )));
            }
            match (&params.optimizer, adam.as_mut()) {
                (Optimizer::Adam { beta1, beta2, eps }, Some(state)) => {
                    state.step += 1;
                    let c1 = 1.0 - libm::pow(*beta1, f64::from(state.step));
                    let c2 = 1.0 - libm::pow(*beta2, f64::from(state.step));
                    let p = current.params_mut();
                    let blocks = p.blocks_mut().into_iter().zip(grad.blocks());
                    let moments = state.m.blocks_mut().into_iter().zip(state.v.blocks_mut());
                    for (((_, w), (_, g)), ((_, m), (_, v))) in blocks.zip(moments) {
                        let it = w.as_mut_slice().iter_mut().zip(g.as_slice());
                        let mv = m.as_mut_slice().iter_mut().zip(v.as_mut_slice());
                        for ((w, &g), (m, v)) in it.zip(mv) {
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            *w -= lr * (*m / c1) / (math::sqrt(*v / c2) + eps);
                        }
                    }
                }
                _ => current.params_mut().add_scaled(&grad, -lr),
            }
        }
        let train_rec = EpochRecord {
            epoch,
            split: Split::Train,
            loss: train_total / order.len() as f64,
            lr,
        };
        observe(&train_rec);
        history.push(train_rec);

        let val_loss = mean_loss(&current, val_set, &val_idx)?;
        let val_rec = EpochRecord {
            epoch,
            split: Split::Val,
            loss: val_loss,
            lr,
        };
        observe(&val_rec);
        history.push(val_rec);

        let step = schedule.observe(val_loss);
        if step.improved {
            best = current.clone();
            best_epoch = epoch;
        }
        if step.stop {
            stopped_early = true;
            break;
        }
    }

    if best_epoch == 0 {
        return Err(Error::Numeric("validation loss never became finite".into()));
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_loss: schedule.best(),
        epochs_run,
        stopped_early,
        skipped_train,
        skipped_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Charset;
    use crate::model::{image_features, ModelConfig};
    use crate::synthdata::{make_dataset, SynthSpec};
    use alloc::vec;

    fn examples(n: usize, seed: u64, model: &ToyModel) -> Vec<Example> {
        let spec = SynthSpec::toy(seed);
        make_dataset(n, &spec)
            .unwrap()
            .into_iter()
            .map(|s| Example {
                features: image_features(&s.image, model.config().strip).unwrap(),
                labels: model.charset().encode(&s.label).unwrap(),
            })
            .collect()
    }

    fn model() -> ToyModel {
        let cs = Charset::new(vec!['a', 'b', 'c', ' '], vec!['a', 'b', 'c']).unwrap();
        ToyModel::init(cs, ModelConfig::toy(SynthSpec::toy(0).height()), 1).unwrap()
    }

    #[test]
    fn plateau_reduces_then_stops() {
        let p = TrainParams::default();
        let mut s = PlateauSchedule::new(&p);
        assert!(s.observe(1.0).improved);
        for i in 1..=14 {
            let step = s.observe(2.0);
            assert!(!step.reduced && !step.stop, "epoch {i}");
        }
        let step = s.observe(2.0);
        assert!(step.reduced && !step.stop);
        assert!((s.lr() - 0.001 * 0.2).abs() < 1e-18);
        for _ in 0..4 {
            assert!(!s.observe(2.0).stop);
        }
        assert!(s.observe(2.0).stop);
        assert!((s.lr() - 0.001 * 0.2).abs() < 1e-18);
    }

    #[test]
    fn params_are_validated() {
        let p = TrainParams {
            reduce_tolerance: 20,
            ..TrainParams::default()
        };
        assert!(p.validate().is_err());
        let p = TrainParams {
            lr: -1.0,
            ..TrainParams::default()
        };
        assert!(p.validate().is_err());
        assert!(TrainParams::default().validate().is_ok());
    }

    #[test]
    fn zero_learning_rate_leaves_weights_identical() {
        let m = model();
        let data = examples(20, 5, &m);
        for optimizer in [Optimizer::Sgd, Optimizer::adam()] {
            let params = TrainParams {
                epochs: 2,
                lr: 0.0,
                optimizer,
                ..TrainParams::default()
            };
            let out = train(&m, &data[..16], &data[16..], &params).unwrap();
            assert_eq!(out.model.params(), m.params());
        }
    }

    #[test]
    fn sgd_step_follows_the_clipped_gradient() {
        let m = model();
        let data = examples(3, 8, &m);
        let params = TrainParams {
            epochs: 1,
            batch: 2,
            lr: 0.5,
            optimizer: Optimizer::Sgd,
            ..TrainParams::default()
        };
        let out = train(&m, &data[..1], &data[1..], &params).unwrap();
        let (_, mut g) = m.loss_and_grad(&data[0].features, &data[0].labels).unwrap();
        let norm = g.global_norm();
        if norm > 5.0 {
            g.scale(5.0 / norm);
        }
        let mut expect = m.params().clone();
        expect.add_scaled(&g, -0.5);
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.model.params(), &expect);
    }

    #[test]
    fn training_is_reproducible_and_keeps_the_best_epoch() {
        let m = model();
        let data = examples(40, 6, &m);
        let params = TrainParams {
            epochs: 4,
            ..TrainParams::default()
        };
        let a = train(&m, &data[..32], &data[32..], &params).unwrap();
        let b = train(&m, &data[..32], &data[32..], &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 8);
        let first_val = a.history[1].loss;
        let returned = mean_loss(&a.model, &data[32..], &(0..8).collect::<Vec<_>>()).unwrap();
        assert!(returned <= first_val);
        assert!((returned - a.best_val_loss).abs() < 1e-12);
    }

    #[test]
    fn infeasible_examples_are_skipped() {
        let m = model();
        let mut data = examples(10, 7, &m);
        data[0].labels = vec![0; 40];
        let params = TrainParams {
            epochs: 1,
            ..TrainParams::default()
        };
        let out = train(&m, &data[..8], &data[8..], &params).unwrap();
        assert_eq!(out.skipped_train, vec![0]);
        for e in &mut data {
            e.labels = vec![1; 40];
        }
        assert!(train(&m, &data[..8], &data[8..], &params).is_err());
    }
}
