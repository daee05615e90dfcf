//! Offline ranking metrics: NDCG over graded engagement labels, PR-AUC
//! with step (average-precision) and linear (trapezoid) interpolation, and
//! precision-vs-position AUC.
//!
//! Conventions pinned here: NDCG gains are 2^grade - 1 with grades
//! impression..save = 0..4 and an all-zero list scores 0.0; PR points are
//! one per distinct score (ties form one threshold group), recall starts at
//! 0, and the linear variant anchors at precision 1.

use crate::corpus::Action;

/// Graded NDCG at cutoff k. `labels` are grades in ranked order.
pub fn ndcg(labels: &[u8], k: usize) -> f64 {
    let dcg = dcg_at(labels, k);
    let mut ideal: Vec<u8> = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

fn dcg_at(labels: &[u8], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &grade)| (2.0f64.powi(grade as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

pub fn grade_of(action: Action) -> u8 {
    action.grade()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Step,
    Linear,
}

/// Area under the precision-recall curve. Step interpolation is average
/// precision; linear is the trapezoid rule between threshold points.
/// No positives (or empty input) scores 0.0.
pub fn pr_auc(scores: &[f64], labels: &[bool], interpolation: Interpolation) -> f64 {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let total_pos = labels.iter().filter(|l| **l).count();
    if total_pos == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut prev_precision = 1.0;
    let mut i = 0;
    while i < order.len() {
        // One threshold group per distinct score.
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        let dr = recall - prev_recall;
        match interpolation {
            Interpolation::Step => auc += dr * precision,
            Interpolation::Linear => auc += dr * 0.5 * (precision + prev_precision),
        }
        prev_recall = recall;
        prev_precision = precision;
        i = j;
    }
    auc
}

/// Mean of precision@k over k = 1..=n for binary labels in ranked order.
pub fn precision_position_auc(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label {
            hits += 1;
        }
        total += hits as f64 / (i + 1) as f64;
    }
    total / labels.len() as f64
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_perfect_order_is_one() {
        assert_eq!(ndcg(&[4, 3, 2, 1, 0], 5), 1.0);
        assert_eq!(ndcg(&[4], 1), 1.0);
    }

    #[test]
    fn ndcg_all_zero_is_zero() {
        assert_eq!(ndcg(&[0, 0, 0], 3), 0.0);
        assert_eq!(ndcg(&[], 5), 0.0);
    }

    #[test]
    fn ndcg_hand_worked_case() {
        // labels [0,4] at k=2: DCG = 15/log2(3), IDCG = 15.
        let value = ndcg(&[0, 4], 2);
        let expected = (15.0 / 3.0f64.log2()) / 15.0;
        assert!((value - expected).abs() < 1e-12);
        assert!((value - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn pr_auc_perfect_separation_is_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(pr_auc(&scores, &labels, Interpolation::Step), 1.0);
        assert_eq!(pr_auc(&scores, &labels, Interpolation::Linear), 1.0);
    }

    #[test]
    fn pr_auc_four_point_case_matches_reference() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        for interp in [Interpolation::Step, Interpolation::Linear] {
            let got = pr_auc(&scores, &labels, interp);
            let want = reference::pr_auc_reference(&scores, &labels, interp);
            assert_eq!(got, want);
        }
        // Hand check of the step value: thresholds at .9,.8,.7,.6 give
        // (R,P) = (.5,1), (.5,.5), (1,2/3), (1,.5); AP = .5*1 + .5*(2/3).
        let ap = pr_auc(&scores, &labels, Interpolation::Step);
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn pr_auc_random_scores_near_positive_rate() {
        let mut rng = crate::util::rng_from(7);
        let n = 20_000;
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let scores: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let auc = pr_auc(&scores, &labels, Interpolation::Step);
        assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    }

    #[test]
    fn pr_auc_no_positives_is_zero() {
        assert_eq!(pr_auc(&[0.5, 0.4], &[false, false], Interpolation::Step), 0.0);
    }

    #[test]
    fn precision_position_mean() {
        // [t, f, t]: p@1=1, p@2=1/2, p@3=2/3 -> mean = 13/18.
        let v = precision_position_auc(&[true, false, true]);
        assert!((v - 13.0 / 18.0).abs() < 1e-12);
        assert_eq!(precision_position_auc(&[]), 0.0);
    }

    #[test]
    fn ndcg_matches_permutation_reference_on_short_lists() {
        for labels in [
            vec![0u8, 2, 4],
            vec![4, 4, 0, 1],
            vec![1, 0, 3, 2, 4],
            vec![0, 0, 0],
        ] {
            for k in 1..=labels.len() {
                let got = ndcg(&labels, k);
                let want = reference::ndcg_reference(&labels, k);
                assert!(
                    (got - want).abs() < 1e-12,
                    "labels {labels:?} k {k}: {got} vs {want}"
                );
            }
        }
    }
}
