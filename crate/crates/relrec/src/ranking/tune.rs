//! Random-search hyperparameter tuning.
//!
//! The trial sequence is drawn up front from the seeded RNG, so it is
//! identical no matter how many workers execute it; trials run in parallel
//! and land in indexed slots. The winner is the argmax of validation
//! PR-AUC with ties going to the earliest trial.

use super::gbdt::GbdtParams;
use crate::util;
use crate::{Error, Result};
use rand::prelude::IndexedRandom;
use serde::{Deserialize, Serialize};

/// Candidate values per hyperparameter; each trial picks one of each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpSpace {
    pub num_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub shrinkage: Vec<f64>,
    pub min_leaf_count: Vec<usize>,
    pub subsample: Vec<f64>,
    #[serde(default)]
    pub positive_class_weight: Vec<Option<f64>>,
}

impl Default for HpSpace {
    fn default() -> Self {
        HpSpace {
            num_trees: vec![50, 100, 200],
            max_depth: vec![2, 3, 4, 6],
            shrinkage: vec![0.05, 0.1, 0.3],
            min_leaf_count: vec![5, 10, 20],
            subsample: vec![0.7, 1.0],
            positive_class_weight: vec![None],
        }
    }
}

impl HpSpace {
    fn validate(&self) -> Result<()> {
        if self.num_trees.is_empty()
            || self.max_depth.is_empty()
            || self.shrinkage.is_empty()
            || self.min_leaf_count.is_empty()
            || self.subsample.is_empty()
        {
            return Err(Error::invalid("hyperparameter space has an empty axis"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl rand::Rng) -> GbdtParams {
        GbdtParams {
            num_trees: *self.num_trees.choose(rng).expect("validated"),
            max_depth: *self.max_depth.choose(rng).expect("validated"),
            shrinkage: *self.shrinkage.choose(rng).expect("validated"),
            min_leaf_count: *self.min_leaf_count.choose(rng).expect("validated"),
            subsample: *self.subsample.choose(rng).expect("validated"),
            positive_class_weight: self
                .positive_class_weight
                .choose(rng)
                .copied()
                .unwrap_or(None),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub params: GbdtParams,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GbdtParams,
    pub best_score: f64,
    pub best_trial: usize,
    pub trials: Vec<TrialOutcome>,
}

/// Run `budget` random trials. `evaluate` trains with the given params and
/// derived seed and returns validation PR-AUC. `parallelism` bounds the
/// worker pool; results are independent of scheduling.
pub fn tune<F>(
    space: &HpSpace,
    budget: usize,
    parallelism: usize,
    seed: u64,
    evaluate: F,
) -> Result<TuneResult>
where
    F: Fn(&GbdtParams, u64) -> Result<f64> + Sync,
{
    space.validate()?;
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be positive"));
    }
    let mut rng = util::rng_from(seed);
    let draws: Vec<GbdtParams> = (0..budget).map(|_| space.draw(&mut rng)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<f64>> = pool.install(|| {
        use rayon::prelude::*;
        draws
            .par_iter()
            .enumerate()
            .map(|(i, params)| evaluate(params, util::derive_seed_indexed(seed, "trial", i as u64)))
            .collect()
    });

    let mut trials = Vec::with_capacity(budget);
    for (index, (params, outcome)) in draws.into_iter().zip(outcomes).enumerate() {
        let score = outcome?;
        trials.push(TrialOutcome {
            index,
            params,
            score,
        });
    }
    let best = trials
        .iter()
        .max_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.index.cmp(&a.index))
        })
        .expect("budget > 0");
    Ok(TuneResult {
        best: best.params.clone(),
        best_score: best.score,
        best_trial: best.index,
        trials: trials.clone(),
    })
}
