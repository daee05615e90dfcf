//! Closed-loop feedback simulation.
//!
//! Generation 0 serves generator-ordered results; every later generation
//! trains a fresh model on the previous generation's logs and serves with
//! it. An unbiased-fraction gate routes a hash-chosen slice of sessions to
//! randomized, unranked serving; in the unbiased regime only those
//! sessions feed training, which removes the previous-model feedback loop
//! at the cost of training volume.

use super::simulate::{
    log_from_events, serve_rows, simulate_session, CandidateCache, RankPolicy, SessionStamp,
    SimWorld,
};
use crate::corpus::Action;
use crate::memboost::MemboostStore;
use crate::ranking::{
    collect_session_data, featurize_session_rows, train_gbdt, CollectMode, FeaturizeContext,
    GbdtParams, RankingModel,
};
use crate::util;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct LoopConfig {
    pub generations: usize,
    pub sessions_per_generation: usize,
    /// Fraction of sessions served randomized-unranked.
    pub unbiased_fraction: f64,
    /// When gating is on, train only on the gated (randomized) sessions.
    #[serde(default = "default_true")]
    pub train_only_unbiased: bool,
    pub top_k: usize,
    pub gbdt: GbdtParams,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub regime: String,
    /// Saved-users over seen-users, measured on ranked (non-gated)
    /// sessions so both regimes are compared on what ranking produced.
    pub save_propensity: f64,
    /// Mean displayed rank of the training examples collected this
    /// generation; the distribution-shift needle.
    pub mean_rank_shown: f64,
    pub training_rows: usize,
    pub ranked_sessions: usize,
}

/// Run one regime of the loop over a fixed session plan.
pub fn run_feedback_loop(
    world: &SimWorld,
    sessions: &[(String, crate::corpus::Signature)],
    cfg: &LoopConfig,
    regime: &str,
) -> Result<Vec<GenerationStats>> {
    if cfg.generations == 0 || cfg.sessions_per_generation == 0 {
        return Err(Error::invalid("loop needs generations and sessions"));
    }
    if sessions.is_empty() {
        return Err(Error::invalid("empty session plan"));
    }
    let cache = CandidateCache::build(world, sessions)?;
    // The loop isolates ranking-model feedback: Memboost stays out of both
    // the features and the serving path here.
    let store = MemboostStore::default();

    let mut model: Option<RankingModel> = None;
    let mut stats = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let gate_salt = util::derive_seed_indexed(cfg.seed, "gate", generation as u64);
        let plan: Vec<(usize, &(String, crate::corpus::Signature))> = (0..cfg
            .sessions_per_generation)
            .map(|i| {
                let idx = (generation * cfg.sessions_per_generation + i) % sessions.len();
                (i, &sessions[idx])
            })
            .collect();
        let model_ref = model.as_ref();
        let outcomes: Vec<Result<(Vec<crate::corpus::EngagementEvent>, bool, String, bool)>> =
            plan.par_iter()
                .map(|(i, (user_id, query))| {
                    let gated = cfg.unbiased_fraction > 0.0
                        && crate::serve::unbiased_gate(user_id, query, cfg.unbiased_fraction, gate_salt);
                    let locale = world.users.context_or_default(user_id).language;
                    let candidates = cache
                        .get(query, &locale)
                        .ok_or_else(|| Error::invalid("candidate cache miss"))?;
                    let session_seed = util::derive_seed_indexed(
                        cfg.seed,
                        &format!("loop/{regime}/g{generation}"),
                        *i as u64,
                    );
                    let policy = if gated {
                        RankPolicy::Random
                    } else {
                        match model_ref {
                            Some(m) => RankPolicy::Model(m),
                            None => RankPolicy::Generator,
                        }
                    };
                    let rows = serve_rows(
                        world,
                        &store,
                        &policy,
                        query,
                        user_id,
                        candidates,
                        cfg.top_k,
                        util::derive_seed(session_seed, "shuffle"),
                    )?;
                    let stamp = SessionStamp {
                        session_id: format!("{regime}-g{generation}-s{i}"),
                        user_id,
                        platform: "web",
                        ts: (generation * cfg.sessions_per_generation + i) as i64 * 30,
                        gate: Some(if gated { "randomized" } else { "ranked" }),
                        arm: Some(regime),
                    };
                    let events = simulate_session(
                        &world.user_model,
                        &world.pins,
                        query,
                        &rows,
                        &stamp,
                        session_seed,
                    );
                    let saved = events.iter().any(|e| e.action == Action::Save);
                    Ok((events, gated, user_id.clone(), saved))
                })
                .collect();

        let mut events = Vec::new();
        let mut per_user: std::collections::BTreeMap<String, bool> = Default::default();
        let mut ranked_sessions = 0usize;
        for outcome in outcomes {
            let (session_events, gated, user, saved) = outcome?;
            if !gated {
                ranked_sessions += 1;
                let slot = per_user.entry(user).or_insert(false);
                *slot |= saved;
            }
            events.extend(session_events);
        }
        let save_propensity = per_user.values().filter(|s| **s).count() as f64
            / per_user.len().max(1) as f64;

        let log = log_from_events(events);
        let training_log = if cfg.unbiased_fraction > 0.0 && cfg.train_only_unbiased {
            let filtered: Vec<crate::corpus::EngagementEvent> = log
                .events
                .iter()
                .filter(|e| e.gate.as_deref() == Some("randomized"))
                .cloned()
                .collect();
            log_from_events(filtered)
        } else {
            log
        };
        let collected = collect_session_data(&training_log, CollectMode::Pointwise);
        let rows = collected.rows();
        let mean_rank_shown = if rows.is_empty() {
            f64::NAN
        } else {
            rows.iter().map(|r| r.rank_shown as f64).sum::<f64>() / rows.len() as f64
        };
        stats.push(GenerationStats {
            generation,
            regime: regime.to_string(),
            save_propensity,
            mean_rank_shown,
            training_rows: rows.len(),
            ranked_sessions,
        });

        let ctx = FeaturizeContext {
            pins: &world.pins,
            users: &world.users,
            store: &store,
            params: &world.mb_params,
            schema: &world.schema,
        };
        let data = featurize_session_rows(&collected, &ctx)?;
        let trained = train_gbdt(
            &data,
            &cfg.gbdt,
            util::derive_seed_indexed(cfg.seed, "loop-train", generation as u64),
        );
        match trained {
            Ok(m) => model = Some(m),
            // A generation whose training slice has no positives (tiny
            // unbiased fractions) keeps serving the previous model.
            Err(Error::InvalidInput(_)) if model.is_some() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(stats)
}

/// Run the biased (fraction 0) and unbiased regimes over the same plan and
/// return both stat tracks.
pub fn run_regime_comparison(
    world: &SimWorld,
    sessions: &[(String, crate::corpus::Signature)],
    cfg: &LoopConfig,
) -> Result<Vec<GenerationStats>> {
    let biased_cfg = LoopConfig {
        unbiased_fraction: 0.0,
        ..cfg.clone()
    };
    let mut out = run_feedback_loop(world, sessions, &biased_cfg, "biased")?;
    out.extend(run_feedback_loop(world, sessions, cfg, "unbiased")?);
    Ok(out)
}
