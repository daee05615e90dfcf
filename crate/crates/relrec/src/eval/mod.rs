//! Offline evaluation: ranking metrics, model scoring against logged
//! holdout sessions, a synthetic position-biased user model, simulated
//! A/B experiments, and the closed-loop feedback simulator.

pub mod loop_sim;
pub mod metrics;
pub mod simulate;

pub use loop_sim::{run_feedback_loop, run_regime_comparison, GenerationStats, LoopConfig};
pub use metrics::{grade_of, ndcg, pr_auc, precision_position_auc, Interpolation};
pub use simulate::{
    log_from_events, run_ab, simulate_session, AbConfig, AbReport, CandidateCache, RankPolicy,
    ServedRow, SessionStamp, SimWorld, SyntheticUserModel,
};

use crate::corpus::{Action, EngagementLog};
use crate::ranking::{FeaturizeContext, RankingModel, SessionRow};
use crate::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub sessions: usize,
    /// Sessions contributing to each mean (the metric's defined subset).
    pub ndcg_sessions: usize,
    pub pr_sessions: usize,
    pub mean_ndcg: f64,
    pub mean_pr_auc_step: f64,
    pub mean_pr_auc_linear: f64,
    pub mean_precision_position_auc: f64,
}

/// Rescore the pins each holdout session actually displayed and measure
/// agreement with the logged behavior. NDCG uses graded labels; the PR and
/// precision-position metrics use binary "saved". The holdout's date range
/// must follow the model's training range.
pub fn offline_eval(
    model: &RankingModel,
    holdout: &EngagementLog,
    ctx: &FeaturizeContext<'_>,
) -> Result<MetricReport> {
    if let Some((_, train_hi)) = model.meta.trained_ts_range {
        if let Some(holdout_lo) = holdout.events.iter().map(|e| e.timestamp).min() {
            if holdout_lo <= train_hi {
                return Err(Error::invalid(format!(
                    "holdout starts at {holdout_lo}, inside or before the training range ending {train_hi}"
                )));
            }
        }
    }
    let mut ndcg_sum = 0.0;
    let mut ndcg_n = 0usize;
    let mut pr_step_sum = 0.0;
    let mut pr_linear_sum = 0.0;
    let mut ppa_sum = 0.0;
    let mut pr_n = 0usize;
    for session in &holdout.sessions {
        let mut scored: Vec<(f64, Action)> = Vec::with_capacity(session.results.len());
        for result in &session.results {
            let row = SessionRow {
                query: session.query.clone(),
                user_id: session.user_id.clone(),
                result: result.result.clone(),
                best_action: result.best_action,
                rank_shown: result.rank,
                ts: session.start_ts,
                source: result.source.clone(),
                generator_score: result.generator_score,
            };
            if let Some(values) = ctx.features_for(&row) {
                let fv = crate::ranking::FeatureVector {
                    values,
                    fingerprint: ctx.schema.fingerprint(),
                };
                scored.push((model.score(&fv)?, result.best_action));
            }
        }
        if scored.is_empty() {
            continue;
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let grades: Vec<u8> = scored.iter().map(|(_, a)| a.grade()).collect();
        if grades.iter().any(|g| *g > 0) {
            ndcg_sum += ndcg(&grades, grades.len());
            ndcg_n += 1;
        }
        let scores: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
        let saved: Vec<bool> = scored.iter().map(|(_, a)| *a == Action::Save).collect();
        if saved.iter().any(|s| *s) {
            pr_step_sum += pr_auc(&scores, &saved, Interpolation::Step);
            pr_linear_sum += pr_auc(&scores, &saved, Interpolation::Linear);
            ppa_sum += precision_position_auc(&saved);
            pr_n += 1;
        }
    }
    Ok(MetricReport {
        sessions: holdout.sessions.len(),
        ndcg_sessions: ndcg_n,
        pr_sessions: pr_n,
        mean_ndcg: if ndcg_n > 0 { ndcg_sum / ndcg_n as f64 } else { 0.0 },
        mean_pr_auc_step: if pr_n > 0 { pr_step_sum / pr_n as f64 } else { 0.0 },
        mean_pr_auc_linear: if pr_n > 0 {
            pr_linear_sum / pr_n as f64
        } else {
            0.0
        },
        mean_precision_position_auc: if pr_n > 0 { ppa_sum / pr_n as f64 } else { 0.0 },
    })
}
