//! Linear RankSVM trained by Pegasos-style subgradient descent on pair
//! score differences.
//!
//! Objective: (1/2C)|w|^2 + mean hinge(1 - w . (phi_pos - phi_neg)).
//! Weights start at zero, so pairs with identical features produce zero
//! subgradients and the model stays at the origin.

use super::{ModelVariant, Objective, RankingModel, TrainMeta};
use crate::util;
use crate::{Error, Result};
use rand::seq::SliceRandom;

/// One training pair as raw feature rows: higher-relevance first.
pub struct PairData {
    pub pos: Vec<Vec<f64>>,
    pub neg: Vec<Vec<f64>>,
    pub fingerprint: u64,
}

impl PairData {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }
}

pub fn train_linear(pairs: &PairData, c: f64, epochs: usize, seed: u64) -> Result<RankingModel> {
    if pairs.pos.len() != pairs.neg.len() {
        return Err(Error::invalid("pos/neg pair lists differ in length"));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("C must be positive"));
    }
    if epochs == 0 {
        return Err(Error::invalid("epochs must be positive"));
    }
    let dim = pairs.pos[0].len();
    for row in pairs.pos.iter().chain(&pairs.neg) {
        if row.len() != dim {
            return Err(Error::invalid("ragged feature rows"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }

    let lambda = 1.0 / c;
    let mut w = vec![0.0f64; dim];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = util::rng_from(seed);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &p in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin: f64 = (0..dim)
                .map(|j| w[j] * (pairs.pos[p][j] - pairs.neg[p][j]))
                .sum();
            // w <- (1 - eta*lambda) w [+ eta * diff when the pair is inside
            // the margin]
            let decay = 1.0 - eta * lambda;
            for x in w.iter_mut() {
                *x *= decay;
            }
            if margin < 1.0 {
                for j in 0..dim {
                    w[j] += eta * (pairs.pos[p][j] - pairs.neg[p][j]);
                }
            }
        }
    }

    Ok(RankingModel {
        variant: ModelVariant::Linear { weights: w },
        objective: Objective::RankSvm,
        fingerprint: pairs.fingerprint,
        meta: TrainMeta {
            seed,
            ..TrainMeta::default()
        },
    })
}

/// Mean hinge loss of a weight vector over the pairs; the tuning and
/// regularization-path checks read this.
pub fn hinge_loss(pairs: &PairData, weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (pos, neg) in pairs.pos.iter().zip(&pairs.neg) {
        let margin: f64 = (0..weights.len())
            .map(|j| weights[j] * (pos[j] - neg[j]))
            .sum();
        total += (1.0 - margin).max(0.0);
    }
    total / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn planted_pairs(w_star: &[f64], n: usize, seed: u64) -> PairData {
        // Pairs whose difference vector has positive margin under w*.
        let mut rng = util::rng_from(seed);
        let dim = w_star.len();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        while pos.len() < n {
            let a: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let margin: f64 = (0..dim).map(|j| w_star[j] * (a[j] - b[j])).sum();
            if margin > 0.3 {
                pos.push(a);
                neg.push(b);
            } else if margin < -0.3 {
                pos.push(b);
                neg.push(a);
            }
        }
        PairData {
            pos,
            neg,
            fingerprint: 7,
        }
    }

    #[test]
    fn recovers_planted_weights_direction() {
        let w_star = [2.0, -1.0, 0.5, 0.0];
        let pairs = planted_pairs(&w_star, 500, 1);
        let model = train_linear(&pairs, 10.0, 30, 2).unwrap();
        let ModelVariant::Linear { weights } = &model.variant else {
            panic!("expected linear variant");
        };
        let cos = util::cosine(weights, &w_star);
        assert!(cos >= 0.9, "cosine(w, w*) = {cos}");
    }

    #[test]
    fn identical_features_keep_weights_at_zero() {
        let row = vec![1.0, 2.0, 3.0];
        let pairs = PairData {
            pos: vec![row.clone(); 10],
            neg: vec![row; 10],
            fingerprint: 0,
        };
        let model = train_linear(&pairs, 1.0, 5, 0).unwrap();
        let ModelVariant::Linear { weights } = &model.variant else {
            panic!();
        };
        assert!(weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn doubling_c_never_increases_training_hinge() {
        let w_star = [1.0, -2.0, 0.7];
        let pairs = planted_pairs(&w_star, 400, 5);
        let mut last = f64::INFINITY;
        for c in [0.1, 0.2, 0.4, 0.8, 1.6, 3.2] {
            let model = train_linear(&pairs, c, 40, 3).unwrap();
            let ModelVariant::Linear { weights } = &model.variant else {
                panic!();
            };
            let loss = hinge_loss(&pairs, weights);
            assert!(
                loss <= last + 1e-9,
                "hinge increased when C doubled: C={c} loss={loss} last={last}"
            );
            last = loss;
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let empty = PairData {
            pos: vec![],
            neg: vec![],
            fingerprint: 0,
        };
        assert!(train_linear(&empty, 1.0, 5, 0).is_err());
        let pairs = PairData {
            pos: vec![vec![1.0]],
            neg: vec![vec![0.0]],
            fingerprint: 0,
        };
        assert!(train_linear(&pairs, 0.0, 5, 0).is_err());
        assert!(train_linear(&pairs, 1.0, 0, 0).is_err());
    }
}
