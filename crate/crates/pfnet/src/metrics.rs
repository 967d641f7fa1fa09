//! Identification and verification metrics: frame error rate, sentence-level
//! voting, classification error rate, and equal error rate.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One verification trial: a claimed identity against a test utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub claimed_class: usize,
    /// Index into the evaluation corpus' test utterances.
    pub utterance: usize,
    pub is_target: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TrialList {
    pub trials: Vec<Trial>,
}

impl TrialList {
    pub fn validate(&self, num_classes: usize, num_utterances: usize) -> Result<()> {
        if !self.trials.iter().any(|t| t.is_target) || !self.trials.iter().any(|t| !t.is_target) {
            return Err(Error::Data(
                "trial list needs both target and non-target trials".into(),
            ));
        }
        for t in &self.trials {
            if t.claimed_class >= num_classes || t.utterance >= num_utterances {
                return Err(Error::Data(format!(
                    "trial references class {} / utterance {} out of range",
                    t.claimed_class, t.utterance
                )));
            }
        }
        Ok(())
    }
}

/// Per-epoch metrics. `wall_time_s` is informational and excluded from the
/// serialized log record so identical runs produce identical logs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub fer_percent: f64,
    pub cer_percent: f64,
    pub eer_percent: Option<f64>,
    pub wall_time_s: f64,
}

impl MetricsReport {
    /// Single-line record with a fixed field order.
    pub fn log_line(&self) -> String {
        let eer = match self.eer_percent {
            Some(v) => format!("{v}"),
            None => "null".to_string(),
        };
        format!(
            "{{\"epoch\":{},\"train_loss\":{},\"fer_percent\":{},\"cer_percent\":{},\"eer_percent\":{}}}",
            self.epoch, self.train_loss, self.fer_percent, self.cer_percent, eer
        )
    }
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `100 · #(argmax ≠ label) / N`; argmax ties break to the lowest index.
pub fn frame_error_rate(posteriors: &Tensor, labels: &[usize]) -> Result<f64> {
    let shape = posteriors.shape();
    if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
        return Err(Error::shape(format!(
            "posteriors {shape:?} vs {} labels",
            labels.len()
        )));
    }
    let wrong = (0..shape[0])
        .filter(|&b| argmax_lowest(posteriors.row(b)) != labels[b])
        .count();
    Ok(100.0 * wrong as f64 / shape[0] as f64)
}

/// Sentence vote: argmax over classes of the mean frame posterior.
pub fn sentence_vote(posteriors: &Tensor) -> Result<usize> {
    let shape = posteriors.shape();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::shape(format!(
            "expected [n, C] with n >= 1, got {shape:?}"
        )));
    }
    let (n, c) = (shape[0], shape[1]);
    let mut mean = vec![0.0; c];
    for b in 0..n {
        for (m, &p) in mean.iter_mut().zip(posteriors.row(b)) {
            *m += p;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    Ok(argmax_lowest(&mean))
}

/// `100 · misclassified / total` over utterance-level predictions.
pub fn classification_error_rate(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() || predicted.is_empty() {
        return Err(Error::shape(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(100.0 * wrong as f64 / labels.len() as f64)
}

/// Equal error rate in percent from scores and target flags.
///
/// Thresholds sweep the sorted score set with the accept rule `score ≥ θ`;
/// `FAR(θ)` is the accepted fraction of non-targets and `FRR(θ)` the rejected
/// fraction of targets. Both curves are step functions whose difference is
/// non-increasing, so the crossing is unique; when it falls between two
/// adjacent sweep points the curves are interpolated linearly.
pub fn eer(scores: &[f64], is_target: &[bool]) -> Result<f64> {
    if scores.len() != is_target.len() {
        return Err(Error::shape(format!(
            "{} scores vs {} flags",
            scores.len(),
            is_target.len()
        )));
    }
    let n_target = is_target.iter().filter(|&&t| t).count();
    let n_nontarget = is_target.len() - n_target;
    if n_target == 0 || n_nontarget == 0 {
        return Err(Error::Data(
            "eer needs at least one target and one non-target trial".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite score".into()));
    }

    // sort trials by score ascending; sweep thresholds over unique scores
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // candidate operating points: θ = −∞ then θ just above each unique score.
    // At θ = −∞: FAR = 1 (everything accepted), FRR = 0.
    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((1.0_f64, 0.0_f64));
    let mut targets_below = 0usize;
    let mut nontargets_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // consume the tie group
        while i < order.len() && scores[order[i]] == s {
            if is_target[order[i]] {
                targets_below += 1;
            } else {
                nontargets_below += 1;
            }
            i += 1;
        }
        // θ just above s: accepted iff score > s
        let far = (n_nontarget - nontargets_below) as f64 / n_nontarget as f64;
        let frr = targets_below as f64 / n_target as f64;
        points.push((far, frr));
    }

    Ok(100.0 * eer_from_points(&points))
}

/// Diagonal crossing of the (FAR, FRR) polyline; `points` must have
/// non-increasing FAR − FRR.
fn eer_from_points(points: &[(f64, f64)]) -> f64 {
    let mut prev = points[0];
    let mut prev_d = prev.0 - prev.1;
    if prev_d <= 0.0 {
        return (prev.0 + prev.1) / 2.0;
    }
    for &p in &points[1..] {
        let d = p.0 - p.1;
        if d == 0.0 {
            return (p.0 + p.1) / 2.0;
        }
        if d < 0.0 {
            // crossing between prev and p
            let t = prev_d / (prev_d - d);
            let far = prev.0 + t * (p.0 - prev.0);
            let frr = prev.1 + t * (p.1 - prev.1);
            return (far + frr) / 2.0;
        }
        prev = p;
        prev_d = d;
    }
    // never crossed: best point is the last one
    (prev.0 + prev.1) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_error_rate_basics() {
        let p = Tensor::from_vec(&[4, 2], vec![0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7]).unwrap();
        assert_eq!(frame_error_rate(&p, &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(frame_error_rate(&p, &[1, 0, 1, 0]).unwrap(), 100.0);
        assert_eq!(frame_error_rate(&p, &[0, 1, 0, 0]).unwrap(), 25.0);
    }

    #[test]
    fn frame_error_rate_ties_pick_lowest_class() {
        let p = Tensor::from_vec(&[1, 3], vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(frame_error_rate(&p, &[0]).unwrap(), 0.0);
        assert_eq!(frame_error_rate(&p, &[1]).unwrap(), 100.0);
    }

    #[test]
    fn sentence_vote_mean_posterior() {
        let p = Tensor::from_vec(&[3, 2], vec![0.6, 0.4, 0.2, 0.8, 0.55, 0.45]).unwrap();
        assert_eq!(sentence_vote(&p).unwrap(), 1);
        let single = Tensor::from_vec(&[1, 2], vec![0.7, 0.3]).unwrap();
        assert_eq!(sentence_vote(&single).unwrap(), 0);
    }

    #[test]
    fn sentence_vote_is_order_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..1.0);
                vec![a, 1.0 - a]
            })
            .collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let p = Tensor::from_vec(&[6, 2], flat).unwrap();
        let v1 = sentence_vote(&p).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let flat_rev: Vec<f64> = rev.iter().flatten().copied().collect();
        let p_rev = Tensor::from_vec(&[6, 2], flat_rev).unwrap();
        assert_eq!(v1, sentence_vote(&p_rev).unwrap());
    }

    #[test]
    fn cer_basics() {
        assert_eq!(
            classification_error_rate(&[0, 1, 2], &[0, 1, 2]).unwrap(),
            0.0
        );
        assert_eq!(
            classification_error_rate(&[0; 10], &[0, 0, 0, 0, 0, 0, 0, 1, 1, 1]).unwrap(),
            30.0
        );
    }

    #[test]
    fn eer_perfect_and_inverted_separation() {
        let e = eer(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(e.abs() < 1e-12, "got {e}");
        let e = eer(&[0.1, 0.9], &[true, false]).unwrap();
        assert!((e - 100.0).abs() < 1e-12, "got {e}");
    }

    #[test]
    fn eer_requires_both_classes() {
        assert!(eer(&[0.5, 0.6], &[true, true]).is_err());
        assert!(eer(&[0.5, 0.6], &[false, false]).is_err());
    }

    /// Brute-force oracle: evaluate FAR/FRR at every candidate threshold by
    /// direct counting, then find the diagonal crossing with the same linear
    /// interpolation rule.
    pub(crate) fn eer_bruteforce(scores: &[f64], is_target: &[bool]) -> f64 {
        let n_target = is_target.iter().filter(|&&t| t).count() as f64;
        let n_nontarget = scores.len() as f64 - n_target;
        let mut uniq: Vec<f64> = scores.to_vec();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        let mut points = vec![(1.0, 0.0)];
        for &s in &uniq {
            // θ just above s
            let far = scores
                .iter()
                .zip(is_target)
                .filter(|(&sc, &t)| !t && sc > s)
                .count() as f64
                / n_nontarget;
            let frr = scores
                .iter()
                .zip(is_target)
                .filter(|(&sc, &t)| t && sc <= s)
                .count() as f64
                / n_target;
            points.push((far, frr));
        }
        100.0 * eer_from_points(&points)
    }

    #[test]
    fn eer_matches_bruteforce_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for trial in 0..300 {
            let n = rng.gen_range(4..80);
            let mut scores = Vec::with_capacity(n);
            let mut flags = Vec::with_capacity(n);
            let mut seen = [false, false];
            for _ in 0..n {
                let t = rng.gen_bool(0.4);
                let s = if t {
                    rng.gen_range(0.3..1.0)
                } else {
                    rng.gen_range(0.0..0.7)
                };
                seen[t as usize] = true;
                scores.push(s);
                flags.push(t);
            }
            if !(seen[0] && seen[1]) {
                continue;
            }
            let fast = eer(&scores, &flags).unwrap();
            let slow = eer_bruteforce(&scores, &flags);
            assert!(
                (fast - slow).abs() <= 1e-9,
                "trial {trial}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn eer_is_symmetric_under_score_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..100 {
            let n = rng.gen_range(6..60);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if !flags.iter().any(|&t| t) {
                flags[0] = true;
            }
            if flags.iter().all(|&t| t) {
                flags[0] = false;
            }
            let a = eer(&scores, &flags).unwrap();
            let reflected: Vec<f64> = scores.iter().map(|&s| 1.0 - s).collect();
            let flipped: Vec<bool> = flags.iter().map(|&t| !t).collect();
            let b = eer(&reflected, &flipped).unwrap();
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn metrics_log_line_is_stable() {
        let r = MetricsReport {
            epoch: 3,
            train_loss: 1.5,
            fer_percent: 12.5,
            cer_percent: 5.0,
            eer_percent: None,
            wall_time_s: 9.125,
        };
        assert_eq!(
            r.log_line(),
            "{\"epoch\":3,\"train_loss\":1.5,\"fer_percent\":12.5,\"cer_percent\":5,\"eer_percent\":null}"
        );
        // wall time must not leak into the record
        assert!(!r.log_line().contains("9.125"));
    }
}
