//! CTC loss: the negative log of the total probability of all paths that
//! collapse to the target labels, computed with the forward–backward
//! recursions over the blank-interleaved label sequence in log space.

use alloc::vec;
use alloc::vec::Vec;

use crate::decode::{collapse_labels, ProbMatrix};
use crate::error::{invalid, Error, Result};
use crate::math::{self, log_add};
use crate::numkit::{log_softmax, Mat2};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// A probability matrix paired with its target labels (no blanks).
#[derive(Debug, Clone, PartialEq)]
pub struct CtcInstance {
    probs: ProbMatrix,
    labels: Vec<usize>,
}

impl CtcInstance {
    pub fn new(probs: ProbMatrix, labels: Vec<usize>) -> Result<Self> {
        check_labels(&labels, probs.blank())?;
        Ok(Self { probs, labels })
    }

    pub fn probs(&self) -> &ProbMatrix {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

fn check_labels(labels: &[usize], blank: usize) -> Result<()> {
    if let Some(&l) = labels.iter().find(|&&l| l >= blank) {
        return Err(invalid!("label {l} is not below the blank index {blank}"));
    }
    Ok(())
}

/// Number of adjacent equal label pairs; each one forces a blank between.
pub fn repeat_count(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Errors unless `steps` can hold the labels plus separating blanks.
pub fn check_feasible(labels: &[usize], steps: usize) -> Result<()> {
    let repeats = repeat_count(labels);
    if steps < labels.len() + repeats {
        return Err(Error::Infeasible {
            labels: labels.len(),
            repeats,
            timesteps: steps,
        });
    }
    Ok(())
}

fn extended(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(blank);
    for &l in labels {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

/// Log-space forward variables; `alpha[t][s]` includes the emission at `t`.
fn forward(log_probs: &[Vec<f64>], ext: &[usize]) -> Vec<Vec<f64>> {
    let steps = log_probs.len();
    let s_len = ext.len();
    let mut alpha = vec![vec![NEG_INF; s_len]; steps];
    alpha[0][0] = log_probs[0][ext[0]];
    if s_len > 1 {
        alpha[0][1] = log_probs[0][ext[1]];
    }
    for t in 1..steps {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = log_add(a, alpha[t - 1][s - 1]);
            }
            if s >= 2 && ext[s] != ext[s - 2] {
                a = log_add(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = if a == NEG_INF {
                NEG_INF
            } else {
                a + log_probs[t][ext[s]]
            };
        }
    }
    alpha
}

/// Log-space backward variables; `beta[t][s]` excludes the emission at `t`.
fn backward(log_probs: &[Vec<f64>], ext: &[usize]) -> Vec<Vec<f64>> {
    let steps = log_probs.len();
    let s_len = ext.len();
    let mut beta = vec![vec![NEG_INF; s_len]; steps];
    beta[steps - 1][s_len - 1] = 0.0;
    if s_len > 1 {
        beta[steps - 1][s_len - 2] = 0.0;
    }
    for t in (0..steps - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s] + log_probs[t + 1][ext[s]];
            if s + 1 < s_len {
                b = log_add(b, beta[t + 1][s + 1] + log_probs[t + 1][ext[s + 1]]);
            }
            if s + 2 < s_len && ext[s + 2] != ext[s] {
                b = log_add(b, beta[t + 1][s + 2] + log_probs[t + 1][ext[s + 2]]);
            }
            beta[t][s] = b;
        }
    }
    beta
}

fn log_likelihood(alpha: &[Vec<f64>]) -> f64 {
    let last = &alpha[alpha.len() - 1];
    let s_len = last.len();
    let mut ll = last[s_len - 1];
    if s_len > 1 {
        ll = log_add(ll, last[s_len - 2]);
    }
    ll
}

/// CTC loss `−ln Σ_π Π_t p[t][π_t]` over paths `π` collapsing to the labels.
///
/// Infeasible instances (too few timesteps) are an [`Error::Infeasible`];
/// feasible instances whose label paths all have zero probability return
/// `f64::INFINITY`.
pub fn ctc_loss(inst: &CtcInstance) -> Result<f64> {
    let probs = &inst.probs;
    check_feasible(&inst.labels, probs.steps())?;
    let log_probs: Vec<Vec<f64>> = (0..probs.steps())
        .map(|t| probs.row(t).iter().map(|&p| math::ln(p)).collect())
        .collect();
    let alpha = forward(&log_probs, &extended(&inst.labels, probs.blank()));
    Ok(-log_likelihood(&alpha))
}

/// `ctc_loss(softmax(logits))` evaluated in log space, so saturated rows do
/// not underflow.
pub fn ctc_loss_logits(logits: &Mat2, labels: &[usize]) -> Result<f64> {
    let (steps, classes) = logits.shape();
    if classes == 0 {
        return Err(invalid!("logits have no classes"));
    }
    check_labels(labels, classes - 1)?;
    check_feasible(labels, steps)?;
    if !logits.is_finite() {
        return Err(Error::Numeric("logits are not finite".into()));
    }
    let log_probs: Vec<Vec<f64>> = logits.row_iter().map(log_softmax).collect();
    let alpha = forward(&log_probs, &extended(labels, classes - 1));
    Ok(-log_likelihood(&alpha))
}

/// Loss and gradient of `ctc_loss(softmax(logits))` with respect to the
/// logits (`T × C1`, blank last).
pub fn ctc_grad(logits: &Mat2, labels: &[usize]) -> Result<(f64, Mat2)> {
    let (steps, classes) = logits.shape();
    if classes == 0 {
        return Err(invalid!("logits have no classes"));
    }
    let blank = classes - 1;
    check_labels(labels, blank)?;
    check_feasible(labels, steps)?;
    if !logits.is_finite() {
        return Err(Error::Numeric("logits are not finite".into()));
    }
    let log_probs: Vec<Vec<f64>> = logits.row_iter().map(log_softmax).collect();
    let ext = extended(labels, blank);
    let alpha = forward(&log_probs, &ext);
    let beta = backward(&log_probs, &ext);
    let ll = log_likelihood(&alpha);
    if ll == NEG_INF {
        return Err(Error::Numeric("labels have zero probability".into()));
    }

    let mut grad = Mat2::zeros(steps, classes);
    for t in 0..steps {
        // Posterior occupancy of each class at t.
        let mut occupancy = vec![NEG_INF; classes];
        for (s, &k) in ext.iter().enumerate() {
            occupancy[k] = log_add(occupancy[k], alpha[t][s] + beta[t][s]);
        }
        for k in 0..classes {
            let y = math::exp(log_probs[t][k]);
            grad[(t, k)] = y - math::exp(occupancy[k] - ll);
        }
    }
    Ok((-ll, grad))
}

const BRUTE_MAX_STEPS: usize = 8;
const BRUTE_MAX_CLASSES: usize = 4;

/// Reference CTC loss by enumerating all `C1^T` paths.
pub fn ctc_brute(inst: &CtcInstance) -> Result<f64> {
    let probs = &inst.probs;
    if probs.steps() > BRUTE_MAX_STEPS || probs.classes() > BRUTE_MAX_CLASSES {
        return Err(invalid!(
            "instance {}x{} exceeds the enumeration limit {BRUTE_MAX_STEPS}x{BRUTE_MAX_CLASSES}",
            probs.steps(),
            probs.classes()
        ));
    }
    check_feasible(&inst.labels, probs.steps())?;
    let classes = probs.classes();
    let mut path = vec![0usize; probs.steps()];
    let mut total = 0.0;
    for mut code in 0..classes.pow(probs.steps() as u32) {
        for slot in path.iter_mut() {
            *slot = code % classes;
            code /= classes;
        }
        if collapse_labels(&path, probs.blank()) == inst.labels {
            total += path
                .iter()
                .enumerate()
                .map(|(t, &c)| probs.get(t, c))
                .product::<f64>();
        }
    }
    Ok(-math::ln(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{grad_check, softmax_rows};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probs(rows: &[&[f64]]) -> ProbMatrix {
        let classes = rows[0].len();
        ProbMatrix::new(rows.len(), classes, rows.concat()).unwrap()
    }

    fn random_probs(rng: &mut ChaCha8Rng, steps: usize, classes: usize) -> ProbMatrix {
        let logits = Mat2::from_vec(
            steps,
            classes,
            (0..steps * classes)
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect(),
        )
        .unwrap();
        ProbMatrix::from_mat(softmax_rows(&logits).unwrap()).unwrap()
    }

    #[test]
    fn single_step() {
        let inst = CtcInstance::new(probs(&[&[0.6, 0.4]]), vec![0]).unwrap();
        let loss = ctc_loss(&inst).unwrap();
        assert!((loss - -(0.6f64).ln()).abs() < 1e-15);
        assert!((loss - 0.5108).abs() < 1e-4);
    }

    #[test]
    fn two_steps_three_alignments() {
        // a a, a -, - a
        let inst = CtcInstance::new(probs(&[&[0.6, 0.4], &[0.6, 0.4]]), vec![0]).unwrap();
        let loss = ctc_loss(&inst).unwrap();
        assert!((loss - -(0.84f64).ln()).abs() < 1e-15);
        assert!((loss - 0.1744).abs() < 1e-4);
        assert!((ctc_brute(&inst).unwrap() - loss).abs() < 1e-15);
    }

    #[test]
    fn repeated_labels_need_a_blank() {
        let inst = CtcInstance::new(probs(&[&[0.6, 0.4], &[0.6, 0.4]]), vec![0, 0]).unwrap();
        assert!(matches!(ctc_loss(&inst), Err(Error::Infeasible { .. })));
        assert!(matches!(ctc_brute(&inst), Err(Error::Infeasible { .. })));
        let logits = Mat2::zeros(2, 2);
        assert!(matches!(
            ctc_grad(&logits, &[0, 0]),
            Err(Error::Infeasible { .. })
        ));
        assert!(CtcInstance::new(probs(&[&[0.6, 0.4]]), vec![1]).is_err());
    }

    #[test]
    fn one_hot_spelling_has_zero_loss() {
        // a - a b over {a, b, blank}
        let p = probs(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
        ]);
        let inst = CtcInstance::new(p.clone(), vec![0, 0, 1]).unwrap();
        assert_eq!(ctc_loss(&inst).unwrap(), 0.0);
        assert_eq!(ctc_brute(&inst).unwrap(), 0.0);
        let absent = CtcInstance::new(p, vec![1, 1]).unwrap();
        assert_eq!(ctc_loss(&absent).unwrap(), f64::INFINITY);
        assert_eq!(ctc_brute(&absent).unwrap(), f64::INFINITY);
    }

    #[test]
    fn empty_labels_score_the_all_blank_path() {
        let p = probs(&[&[0.3, 0.7], &[0.1, 0.9]]);
        let inst = CtcInstance::new(p, vec![]).unwrap();
        assert!((ctc_loss(&inst).unwrap() - -(0.63f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 300 {
            let steps = rng.gen_range(1..=6);
            let classes = rng.gen_range(2..=4);
            let len = rng.gen_range(0..=3);
            let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(0..classes - 1)).collect();
            if check_feasible(&labels, steps).is_err() {
                continue;
            }
            let inst = CtcInstance::new(random_probs(&mut rng, steps, classes), labels).unwrap();
            let fast = ctc_loss(&inst).unwrap();
            let slow = ctc_brute(&inst).unwrap();
            assert!(fast >= 0.0);
            assert!(
                (fast - slow).abs() <= 1e-10 * slow.abs().max(1e-300),
                "{fast} vs {slow}"
            );
            checked += 1;
        }
    }

    #[test]
    fn single_step_gradient_closed_form() {
        let logits = Mat2::from_vec(1, 3, vec![0.3, -1.2, 0.5]).unwrap();
        let (_, grad) = ctc_grad(&logits, &[0]).unwrap();
        let y = softmax_rows(&logits).unwrap();
        for k in 0..3 {
            let want = y[(0, k)] - if k == 0 { 1.0 } else { 0.0 };
            assert!((grad[(0, k)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let logits =
                Mat2::from_vec(5, 3, (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
            let len = rng.gen_range(0..=2);
            let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(0..2)).collect();
            let (loss, grad) = ctc_grad(&logits, &labels).unwrap();
            let p = ProbMatrix::from_mat(softmax_rows(&logits).unwrap()).unwrap();
            let direct = ctc_loss(&CtcInstance::new(p, labels.clone()).unwrap()).unwrap();
            assert!((loss - direct).abs() < 1e-12);
            let f = |x: &[f64]| {
                ctc_grad(&Mat2::from_vec(5, 3, x.to_vec()).unwrap(), &labels)
                    .unwrap()
                    .0
            };
            let err = grad_check(f, logits.as_slice(), grad.as_slice(), 1e-5).unwrap();
            assert!(err < 1e-4, "{err}");
            for row in grad.row_iter() {
                assert!(row.iter().sum::<f64>().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn irrelevant_classes_can_be_permuted() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            // Classes 0 and 1 are labels, 2..4 never appear, 4 is blank.
            let p = random_probs(&mut rng, 5, 5);
            let labels = vec![0, 1, 0];
            let mut swapped = Vec::new();
            for t in 0..5 {
                let r = p.row(t);
                swapped.extend([r[0], r[1], r[3], r[2], r[4]]);
            }
            let q = ProbMatrix::new(5, 5, swapped).unwrap();
            let a = ctc_loss(&CtcInstance::new(p, labels.clone()).unwrap()).unwrap();
            let b = ctc_loss(&CtcInstance::new(q, labels).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }
}
