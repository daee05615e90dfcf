//! Learning-to-rank: feature extraction, training-data collection, the
//! linear and gradient-boosted model families, hyperparameter search, and
//! final ordering.
//!
//! Four training configurations are supported, combining a data source
//! (Memboost pairs or individual sessions), an objective (RankSVM hinge,
//! RankNet cross-entropy, pointwise logistic), and a model family (linear
//! or GBDT). Models carry the feature-schema fingerprint they were trained
//! with; scoring with a mismatched extractor fails closed.

mod collect;
mod features;
mod gbdt;
mod linear;
mod model_io;
mod tune;

pub use collect::{
    collect_memboost_pairs, collect_session_data, featurize_pair_rows, featurize_session_rows,
    CollectMode, CollectedData, FeaturizeContext, MemboostPairRow, SessionRow,
};
pub use features::{extract_features, CandidateContext, FeatureSchema};
pub use gbdt::{train_gbdt, GbdtParams, GbdtTrainingData, Tree};
pub use linear::{hinge_loss, train_linear, PairData};
pub use model_io::{read_model, read_model_from, write_model};
pub use tune::{tune, HpSpace, TrialOutcome, TuneResult};

use crate::corpus::{PinCorpus, Signature, UserContext};
use crate::graph::Candidate;
use crate::memboost::{MemboostParams, MemboostStore};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense feature vector stamped with its schema fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub fingerprint: u64,
}

/// Loss the model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    RankSvm,
    RankNet,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelVariant {
    Linear { weights: Vec<f64> },
    Gbdt { trees: Vec<Tree>, shrinkage: f64 },
}

/// Training provenance kept with the model: the engagement date range it
/// was fit on (holdouts must follow it) and the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainMeta {
    pub trained_ts_range: Option<(i64, i64)>,
    pub config_tag: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub variant: ModelVariant,
    pub objective: Objective,
    pub fingerprint: u64,
    pub meta: TrainMeta,
}

impl RankingModel {
    /// Raw score, no fingerprint check (hot path for pre-validated
    /// batches).
    pub fn score_values(&self, values: &[f64]) -> f64 {
        match &self.variant {
            ModelVariant::Linear { weights } => crate::util::dot(weights, values),
            ModelVariant::Gbdt { trees, shrinkage } => {
                trees.iter().map(|t| t.eval(values)).sum::<f64>() * shrinkage
            }
        }
    }

    /// Score with the schema contract enforced: a fingerprint mismatch is a
    /// hard error, never a silent misread.
    pub fn score(&self, fv: &FeatureVector) -> Result<f64> {
        if fv.fingerprint != self.fingerprint {
            return Err(Error::SchemaMismatch {
                model: self.fingerprint,
                extractor: fv.fingerprint,
            });
        }
        Ok(self.score_values(&fv.values))
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.variant {
            ModelVariant::Linear { weights } => Some(weights.len()),
            ModelVariant::Gbdt { .. } => None,
        }
    }
}

/// A scored, displayable result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub signature: Signature,
    pub score: f64,
    pub pin_id: String,
    pub locale: String,
}

impl RankedResult {
    pub fn for_record(record: &crate::corpus::PinRecord, score: f64) -> RankedResult {
        RankedResult {
            signature: record.signature.clone(),
            score,
            pin_id: record.primary_instance().to_string(),
            locale: record.locale.clone(),
        }
    }
}

/// Everything rank() needs besides the model: the query-side context and
/// the stores features are drawn from.
pub struct ScoringContext<'a> {
    pub pins: &'a PinCorpus,
    pub store: &'a MemboostStore,
    pub params: &'a MemboostParams,
    pub schema: &'a FeatureSchema,
}

/// Score one candidate against a query for a viewer.
pub fn score_candidate(
    ctx: &ScoringContext<'_>,
    model: &RankingModel,
    query: &crate::corpus::PinRecord,
    user: &UserContext,
    candidate: &Candidate,
) -> Result<Option<f64>> {
    let Some(record) = ctx.pins.get(&candidate.signature) else {
        return Ok(None);
    };
    let fragment =
        crate::memboost::memboost_features(ctx.store, ctx.params, &query.signature, &candidate.signature);
    let fv = extract_features(
        ctx.schema,
        query,
        user,
        record,
        &CandidateContext {
            source: Some(candidate.source),
            generator_score: candidate.generator_score,
        },
        &fragment,
    );
    Ok(Some(model.score(&fv)?))
}

/// Order candidates by model score, descending; ties break lexicographically
/// by signature so every run of the pipeline agrees. Candidates missing
/// from the pin corpus are skipped.
pub fn rank(
    ctx: &ScoringContext<'_>,
    model: &RankingModel,
    query: &Signature,
    user: &UserContext,
    candidates: &[Candidate],
) -> Result<Vec<RankedResult>> {
    let query_record = ctx
        .pins
        .get(query)
        .ok_or_else(|| Error::UnknownSignature(query.to_string()))?;
    let mut rows = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        if let Some(score) = score_candidate(ctx, model, query_record, user, candidate)? {
            let record = ctx.pins.get(&candidate.signature).expect("checked above");
            rows.push(RankedResult::for_record(record, score));
        }
    }
    sort_ranked(&mut rows);
    Ok(rows)
}

/// Descending by score, ties by signature.
pub fn sort_ranked(rows: &mut [RankedResult]) {
    rows.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.signature.cmp(&b.signature))
    });
}

/// Hyperparameters for both model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gbdt: GbdtParams,
    /// Linear-model regularization C and epochs.
    pub linear_c: f64,
    pub linear_epochs: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gbdt: GbdtParams::default(),
            linear_c: 10.0,
            linear_epochs: 30,
        }
    }
}

/// The four training configurations: data source x objective x model
/// family, in the order they were rolled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainConfigKind {
    /// Memboost relevance pairs, RankSVM loss, linear model.
    V1MemboostLinear,
    /// Session relevance pairs, RankSVM loss, linear model.
    V2SessionLinear,
    /// Session relevance pairs, RankNet loss, GBDT.
    V3SessionRanknet,
    /// Session binary saved labels, logistic loss, GBDT.
    V4SessionLogistic,
}

impl TrainConfigKind {
    pub fn tag(self) -> &'static str {
        match self {
            TrainConfigKind::V1MemboostLinear => "v1_memboost_linear",
            TrainConfigKind::V2SessionLinear => "v2_session_linear",
            TrainConfigKind::V3SessionRanknet => "v3_session_ranknet",
            TrainConfigKind::V4SessionLogistic => "v4_session_logistic",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: TrainConfigKind,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub seed: u64,
}

/// Train one of the four configurations from an engagement log.
pub fn train_model(
    cfg: &TrainConfig,
    log: &crate::corpus::EngagementLog,
    ctx: &FeaturizeContext<'_>,
) -> Result<RankingModel> {
    let ts_range = log
        .events
        .iter()
        .map(|e| e.timestamp)
        .fold(None, |acc: Option<(i64, i64)>, ts| match acc {
            None => Some((ts, ts)),
            Some((lo, hi)) => Some((lo.min(ts), hi.max(ts))),
        });
    let mut model = match cfg.kind {
        TrainConfigKind::V1MemboostLinear => {
            let rows = collect_memboost_pairs(ctx.store, ctx.pins, ctx.params, cfg.seed)?;
            let pairs = featurize_pair_rows(&rows, ctx)?;
            train_linear(&pairs, cfg.hyper.linear_c, cfg.hyper.linear_epochs, cfg.seed)?
        }
        TrainConfigKind::V2SessionLinear => {
            let collected = collect_session_data(log, CollectMode::Pairs);
            let data = featurize_session_rows(&collected, ctx)?;
            let GbdtTrainingData::RankNet {
                features, pairs, ..
            } = data
            else {
                unreachable!("pairs mode produces ranknet data");
            };
            let pair_data = PairData {
                pos: pairs
                    .iter()
                    .map(|&(h, _)| features[h as usize].clone())
                    .collect(),
                neg: pairs
                    .iter()
                    .map(|&(_, l)| features[l as usize].clone())
                    .collect(),
                fingerprint: ctx.schema.fingerprint(),
            };
            train_linear(
                &pair_data,
                cfg.hyper.linear_c,
                cfg.hyper.linear_epochs,
                cfg.seed,
            )?
        }
        TrainConfigKind::V3SessionRanknet => {
            let collected = collect_session_data(log, CollectMode::Pairs);
            let data = featurize_session_rows(&collected, ctx)?;
            train_gbdt(&data, &cfg.hyper.gbdt, cfg.seed)?
        }
        TrainConfigKind::V4SessionLogistic => {
            let collected = collect_session_data(log, CollectMode::Pointwise);
            let data = featurize_session_rows(&collected, ctx)?;
            train_gbdt(&data, &cfg.hyper.gbdt, cfg.seed)?
        }
    };
    model.meta.trained_ts_range = ts_range;
    model.meta.config_tag = cfg.kind.tag().to_string();
    model.meta.seed = cfg.seed;
    Ok(model)
}
