use alloc::vec::Vec;

use super::{
    train, AttentionPosition, EpochRecord, Example, ModelConfig, Split, ToyModel, TrainParams,
};
use crate::error::{invalid, Result};
use crate::lexicon::Charset;

/// One training run of the ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub position: AttentionPosition,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// First epoch whose validation loss reached the seed's threshold.
    pub epochs_to_threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// One row per (seed, position, epoch, split).
    pub history: Vec<(u64, AttentionPosition, EpochRecord)>,
    pub runs: Vec<RunSummary>,
    /// Per seed: the worse of the two best validation losses, which both
    /// runs therefore reach.
    pub thresholds: Vec<(u64, f64)>,
}

impl AblationReport {
    fn runs_at(&self, position: AttentionPosition) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(move |r| r.position == position)
    }

    /// Mean epochs-to-threshold for one position.
    pub fn mean_epochs_to_threshold(&self, position: AttentionPosition) -> f64 {
        let e: Vec<f64> = self
            .runs_at(position)
            .filter_map(|r| r.epochs_to_threshold.map(|e| e as f64))
            .collect();
        e.iter().sum::<f64>() / e.len() as f64
    }

    /// Mean best validation loss for one position.
    pub fn mean_best_val_loss(&self, position: AttentionPosition) -> f64 {
        let v: Vec<f64> = self.runs_at(position).map(|r| r.best_val_loss).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Seeds on which attention after the features reached the threshold in
    /// no more epochs than attention after the recurrent layer.
    pub fn seeds_features_first(&self) -> usize {
        self.thresholds
            .iter()
            .filter(|(seed, _)| {
                let at = |pos| {
                    self.runs
                        .iter()
                        .find(|r| r.seed == *seed && r.position == pos)
                        .and_then(|r| r.epochs_to_threshold)
                };
                matches!(
                    (at(AttentionPosition::AfterFeatures), at(AttentionPosition::AfterRecurrent)),
                    (Some(a), Some(b)) if a <= b
                )
            })
            .count()
    }
}

/// Trains attention-after-features and attention-after-recurrent models
/// from identical initial weights and data order for every seed.
pub fn ablation_run(
    charset: &Charset,
    config: &ModelConfig,
    train_set: &[Example],
    val_set: &[Example],
    params: &TrainParams,
    seeds: &[u64],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(invalid!("ablation needs at least one seed"));
    }
    let mut report = AblationReport {
        history: Vec::new(),
        runs: Vec::new(),
        thresholds: Vec::new(),
    };
    for &seed in seeds {
        let base = ToyModel::init(charset.clone(), config.clone(), seed)?;
        let run_params = TrainParams { seed, ..*params };
        let mut pair = Vec::new();
        for position in [
            AttentionPosition::AfterFeatures,
            AttentionPosition::AfterRecurrent,
        ] {
            let out = train(
                &base.with_position(position),
                train_set,
                val_set,
                &run_params,
            )?;
            for rec in &out.history {
                report.history.push((seed, position, *rec));
            }
            pair.push((position, out));
        }
        let threshold = pair
            .iter()
            .map(|(_, o)| o.best_val_loss)
            .fold(f64::NEG_INFINITY, f64::max);
        report.thresholds.push((seed, threshold));
        for (position, out) in pair {
            let reached = out
                .history
                .iter()
                .find(|r| r.split == Split::Val && r.loss <= threshold)
                .map(|r| r.epoch);
            report.runs.push(RunSummary {
                seed,
                position,
                best_val_loss: out.best_val_loss,
                best_epoch: out.best_epoch,
                epochs_run: out.epochs_run,
                epochs_to_threshold: reached,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::image_features;
    use crate::synthdata::{make_dataset, SynthSpec};
    use alloc::vec;

    #[test]
    fn report_has_a_row_per_seed_position_epoch() {
        let cs = Charset::new(vec!['a', 'b', 'c', ' '], vec!['a', 'b', 'c']).unwrap();
        let spec = SynthSpec::toy(3);
        let mut cfg = ModelConfig::toy(spec.height());
        cfg.features = 4;
        cfg.hidden = 4;
        let data: Vec<Example> = make_dataset(12, &spec)
            .unwrap()
            .into_iter()
            .map(|s| Example {
                features: image_features(&s.image, 2).unwrap(),
                labels: cs.encode(&s.label).unwrap(),
            })
            .collect();
        let params = TrainParams {
            epochs: 3,
            ..TrainParams::default()
        };
        let report = ablation_run(&cs, &cfg, &data[..8], &data[8..], &params, &[1, 2]).unwrap();
        assert_eq!(report.history.len(), 2 * 2 * 3 * 2);
        assert_eq!(report.runs.len(), 4);
        assert!(report.runs.iter().all(|r| r.epochs_to_threshold.is_some()));
        for (seed, pos) in [
            (1, AttentionPosition::AfterFeatures),
            (2, AttentionPosition::AfterRecurrent),
        ] {
            let mut best = f64::INFINITY;
            for (_, _, rec) in report
                .history
                .iter()
                .filter(|(s, p, r)| *s == seed && *p == pos && r.split == Split::Val)
            {
                let next = best.min(rec.loss);
                assert!(next <= best);
                best = next;
            }
        }
        assert!(ablation_run(&cs, &cfg, &data[..8], &data[8..], &params, &[]).is_err());
    }
}
