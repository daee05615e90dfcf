//! Synthetic position-biased users and simulated A/B experiments.
//!
//! The user model follows the examination hypothesis, the minimal model
//! consistent with the position-prior assumption behind expected-action
//! counts: a displayed result at rank k is examined with a per-platform
//! probability, and every action probability conditions on examination and
//! the latent query-candidate relevance. All action probabilities are
//! closed-form in the relevance, so tests can compute exact expectations.
//!
//! Simulations parallelize over sessions with per-session derived RNG
//! streams; outcomes do not depend on scheduling order.

use crate::corpus::{
    EngagementEvent, EngagementLog, PinCorpus, PinRecord, Signature, UserStore,
};
use crate::graph::{BipartiteGraph, CandidateSet, CandidateSource, GraphConfig, WalkConfig};
use crate::memboost::{EngagementKind, MemboostParams, MemboostStore};
use crate::pin2vec::EmbeddingTable;
use crate::ranking::{
    rank, FeatureSchema, RankedResult, RankingModel, ScoringContext,
};
use crate::supplemental::{AnnotationIndex, BlendPolicy};
use crate::util;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// p(rel) = clamp01(base + slope * rel).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RelCurve {
    pub base: f64,
    pub slope: f64,
}

impl RelCurve {
    pub fn eval(&self, rel: f64) -> f64 {
        (self.base + self.slope * rel).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SyntheticUserModel {
    /// Per-platform examination probability by rank; ranks beyond the end
    /// clamp to the last entry. Must be non-increasing.
    pub examination: BTreeMap<String, Vec<f64>>,
    pub closeup_given_exam: RelCurve,
    pub click_given_closeup: RelCurve,
    pub long_given_click: RelCurve,
    pub save_given_closeup: RelCurve,
    /// rel(q, c) = (weighted cosine blend) ^ sharpness, weights over
    /// (category, annotation-embedding, visual-embedding) cosines.
    pub relevance_weights: (f64, f64, f64),
    pub relevance_sharpness: f64,
    /// Trust bias: extra engagement propensity at top ranks regardless of
    /// relevance (amplitude * decay^rank, added to the closeup and save
    /// probabilities). This is what lets a deployed model's preferences
    /// leak into its own training labels.
    pub trust_amplitude: f64,
    pub trust_decay: f64,
    /// Conformity: extra save propensity on already-popular items
    /// (rich-get-richer), scaled by log1p(popularity) / conformity_scale.
    pub conformity: f64,
    pub conformity_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticUserModel {
    fn default() -> Self {
        let mut examination = BTreeMap::new();
        examination.insert(
            "web".to_string(),
            (0..30).map(|k| (0.9 * 0.75f64.powi(k)).max(0.02)).collect(),
        );
        examination.insert(
            "mobile".to_string(),
            (0..30).map(|k| (0.8 * 0.7f64.powi(k)).max(0.015)).collect(),
        );
        SyntheticUserModel {
            examination,
            closeup_given_exam: RelCurve {
                base: 0.03,
                slope: 0.45,
            },
            click_given_closeup: RelCurve {
                base: 0.1,
                slope: 0.4,
            },
            long_given_click: RelCurve {
                base: 0.3,
                slope: 0.3,
            },
            save_given_closeup: RelCurve {
                base: 0.02,
                slope: 0.35,
            },
            relevance_weights: (0.4, 0.4, 0.2),
            relevance_sharpness: 2.0,
            trust_amplitude: 0.0,
            trust_decay: 0.7,
            conformity: 0.0,
            conformity_scale: (1001.0f64).ln(),
            seed: 0,
        }
    }
}

impl SyntheticUserModel {
    pub fn validate(&self) -> Result<()> {
        for (platform, curve) in &self.examination {
            if curve.is_empty() {
                return Err(Error::invalid(format!("empty exam curve for {platform}")));
            }
            for w in curve.windows(2) {
                if w[1] > w[0] + 1e-12 {
                    return Err(Error::invalid(
                        "examination probability must be non-increasing in rank",
                    ));
                }
            }
            if curve.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid("examination probabilities must be in [0,1]"));
            }
        }
        Ok(())
    }

    pub fn examination_at(&self, platform: &str, rank: usize) -> f64 {
        match self.examination.get(platform) {
            Some(curve) if !curve.is_empty() => curve[rank.min(curve.len() - 1)],
            _ => 0.0,
        }
    }

    pub fn relevance(&self, query: &PinRecord, candidate: &PinRecord) -> f64 {
        let (w_cat, w_ann, w_vis) = self.relevance_weights;
        let total = (w_cat + w_ann + w_vis).max(1e-12);
        let cat = util::cosine(&query.category_vector, &candidate.category_vector);
        let ann = util::cosine(&query.annotation_embedding, &candidate.annotation_embedding);
        let vis = util::cosine(&query.visual_embedding, &candidate.visual_embedding);
        let blend = (w_cat * cat.clamp(0.0, 1.0)
            + w_ann * ann.clamp(0.0, 1.0)
            + w_vis * vis.clamp(0.0, 1.0))
            / total;
        blend.powf(self.relevance_sharpness)
    }

    /// Trust term at a display rank.
    pub fn trust_at(&self, rank: usize) -> f64 {
        self.trust_amplitude * self.trust_decay.powi(rank as i32)
    }

    /// Conformity term for an item's popularity.
    pub fn conformity_for(&self, popularity: u64) -> f64 {
        if self.conformity == 0.0 {
            return 0.0;
        }
        self.conformity * ((popularity as f64).ln_1p() / self.conformity_scale).min(1.0)
    }

    /// P(action | displayed and examined), closed-form in the relevance,
    /// the display rank (through trust bias), and the item's popularity
    /// (through conformity).
    pub fn attraction(&self, kind: EngagementKind, rel: f64, rank: usize, popularity: u64) -> f64 {
        let trust = self.trust_at(rank);
        let closeup = (self.closeup_given_exam.eval(rel) + trust).clamp(0.0, 1.0);
        match kind {
            EngagementKind::Closeup => closeup,
            EngagementKind::Click => closeup * self.click_given_closeup.eval(rel),
            EngagementKind::LongClick => {
                closeup * self.click_given_closeup.eval(rel) * self.long_given_click.eval(rel)
            }
            EngagementKind::Save => {
                closeup
                    * (self.save_given_closeup.eval(rel)
                        + trust
                        + self.conformity_for(popularity))
                    .clamp(0.0, 1.0)
            }
        }
    }
}

/// One served slot handed to the simulator: who produced it matters only
/// for the log tags.
#[derive(Debug, Clone)]
pub struct ServedRow {
    pub result: RankedResult,
    pub source: Option<CandidateSource>,
    pub generator_score: f64,
}

/// Identity of one simulated session.
#[derive(Debug, Clone)]
pub struct SessionStamp<'a> {
    pub session_id: String,
    pub user_id: &'a str,
    pub platform: &'a str,
    pub ts: i64,
    pub gate: Option<&'a str>,
    pub arm: Option<&'a str>,
}

/// Simulate one user's pass over a served list. Every slot logs an
/// impression; engagement events follow the examination-hypothesis chain.
/// Deterministic per `session_seed`.
pub fn simulate_session(
    model: &SyntheticUserModel,
    pins: &PinCorpus,
    query: &Signature,
    rows: &[ServedRow],
    stamp: &SessionStamp<'_>,
    session_seed: u64,
) -> Vec<EngagementEvent> {
    let mut rng = util::rng_from(session_seed);
    let mut events = Vec::with_capacity(rows.len() + 4);
    let query_record = pins.get(query);
    for (rank, row) in rows.iter().enumerate() {
        let base = EngagementEvent {
            action: crate::corpus::Action::Impression,
            query: query.clone(),
            result: row.result.signature.clone(),
            platform: stamp.platform.to_string(),
            rank: rank as u32,
            user_id: stamp.user_id.to_string(),
            timestamp: stamp.ts,
            session_id: stamp.session_id.clone(),
            source: row.source.map(|s| s.tag().to_string()),
            generator_score: Some(row.generator_score),
            gate: stamp.gate.map(|s| s.to_string()),
            arm: stamp.arm.map(|s| s.to_string()),
        };
        events.push(base.clone());
        let examined = rng.random::<f64>() < model.examination_at(stamp.platform, rank);
        if !examined {
            continue;
        }
        let record = pins.get(&row.result.signature);
        let rel = match (query_record, record) {
            (Some(q), Some(c)) => model.relevance(q, c),
            _ => 0.0,
        };
        let conformity = model.conformity_for(record.map(|r| r.popularity).unwrap_or(0));
        let trust = model.trust_at(rank);
        if rng.random::<f64>() >= (model.closeup_given_exam.eval(rel) + trust).clamp(0.0, 1.0) {
            continue;
        }
        let mut push = |action: crate::corpus::Action, offset: i64| {
            events.push(EngagementEvent {
                action,
                timestamp: stamp.ts + offset,
                ..base.clone()
            });
        };
        push(crate::corpus::Action::Closeup, 1);
        if rng.random::<f64>() < model.click_given_closeup.eval(rel) {
            push(crate::corpus::Action::Click, 2);
            if rng.random::<f64>() < model.long_given_click.eval(rel) {
                push(crate::corpus::Action::LongClick, 3);
            }
        }
        if rng.random::<f64>()
            < (model.save_given_closeup.eval(rel) + trust + conformity).clamp(0.0, 1.0)
        {
            push(crate::corpus::Action::Save, 4);
        }
    }
    events
}

/// Everything a simulation needs to serve a query end to end.
pub struct SimWorld {
    pub pins: PinCorpus,
    pub boards: crate::corpus::BoardCorpus,
    pub users: UserStore,
    pub graph: BipartiteGraph,
    pub index: AnnotationIndex,
    pub table: Option<EmbeddingTable>,
    pub graph_cfg: GraphConfig,
    pub walk: WalkConfig,
    pub policy: BlendPolicy,
    pub schema: FeatureSchema,
    pub mb_params: MemboostParams,
    pub user_model: SyntheticUserModel,
    pub candidate_budget: usize,
    pub seed: u64,
}

impl SimWorld {
    /// Assemble from loaded corpora with a fresh graph and index.
    pub fn build(
        pins: PinCorpus,
        boards: crate::corpus::BoardCorpus,
        users: UserStore,
        table: Option<EmbeddingTable>,
        user_model: SyntheticUserModel,
        policy: BlendPolicy,
        candidate_budget: usize,
        seed: u64,
    ) -> Result<SimWorld> {
        user_model.validate()?;
        let graph_cfg = GraphConfig {
            seed,
            ..GraphConfig::default()
        };
        let graph = crate::graph::build_graph(&boards, &pins, &graph_cfg)?;
        let index = AnnotationIndex::build(&pins);
        let schema = FeatureSchema::build(&users.countries());
        // Walks inside simulations run at a tenth of the serving default:
        // candidate sets are cached per query, and 10k steps is already
        // stable at these graph sizes.
        let walk = WalkConfig {
            total_steps: 10_000,
            seed,
            max_results: 200,
            ..WalkConfig::default()
        };
        Ok(SimWorld {
            pins,
            boards,
            users,
            graph,
            index,
            table,
            graph_cfg,
            walk,
            policy,
            schema,
            mb_params: MemboostParams::default(),
            user_model,
            candidate_budget,
            seed,
        })
    }

    /// Blended candidates for one query and viewer locale. Candidates do
    /// not depend on any model, so callers cache these per (query, locale).
    pub fn candidates(&self, query: &Signature, viewer_locale: Option<&str>) -> Result<CandidateSet> {
        self.candidate_engine().generate(query, viewer_locale)
    }

    pub fn candidate_engine(&self) -> crate::pipeline::CandidateEngine<'_> {
        crate::pipeline::CandidateEngine {
            pins: &self.pins,
            boards: &self.boards,
            graph: &self.graph,
            index: &self.index,
            table: self.table.as_ref(),
            graph_cfg: &self.graph_cfg,
            walk: &self.walk,
            policy: &self.policy,
            budget: self.candidate_budget,
            seed: self.seed,
        }
    }

    pub fn scoring_context<'a>(&'a self, store: &'a MemboostStore) -> ScoringContext<'a> {
        ScoringContext {
            pins: &self.pins,
            store,
            params: &self.mb_params,
            schema: &self.schema,
        }
    }
}

/// Precomputed candidate sets per (query, locale) pair.
pub struct CandidateCache {
    map: BTreeMap<(Signature, String), CandidateSet>,
}

impl CandidateCache {
    pub fn build(world: &SimWorld, sessions: &[(String, Signature)]) -> Result<CandidateCache> {
        let mut keys: Vec<(Signature, String)> = sessions
            .iter()
            .map(|(user, query)| {
                let locale = world.users.context_or_default(user).language;
                (query.clone(), locale)
            })
            .collect();
        keys.sort();
        keys.dedup();
        let entries: Vec<Result<((Signature, String), CandidateSet)>> = keys
            .par_iter()
            .map(|(query, locale)| {
                let set = world.candidates(query, Some(locale))?;
                Ok(((query.clone(), locale.clone()), set))
            })
            .collect();
        let mut map = BTreeMap::new();
        for entry in entries {
            let (key, set) = entry?;
            map.insert(key, set);
        }
        Ok(CandidateCache { map })
    }

    pub fn get(&self, query: &Signature, locale: &str) -> Option<&CandidateSet> {
        self.map.get(&(query.clone(), locale.to_string()))
    }
}

/// How an arm orders the blended candidates.
pub enum RankPolicy<'a> {
    /// Keep the generator/blend order.
    Generator,
    /// Score with a trained model.
    Model(&'a RankingModel),
    /// Seeded random shuffle (unbiased data collection).
    Random,
}

/// Order candidates per policy and join back the source tags for logging.
pub fn serve_rows(
    world: &SimWorld,
    store: &MemboostStore,
    policy: &RankPolicy<'_>,
    query: &Signature,
    user_id: &str,
    candidates: &CandidateSet,
    top_k: usize,
    shuffle_seed: u64,
) -> Result<Vec<ServedRow>> {
    let meta: BTreeMap<&Signature, (CandidateSource, f64)> = candidates
        .entries
        .iter()
        .map(|c| (&c.signature, (c.source, c.generator_score)))
        .collect();
    let ranked: Vec<RankedResult> = match policy {
        RankPolicy::Generator => candidates
            .entries
            .iter()
            .filter_map(|c| {
                world
                    .pins
                    .get(&c.signature)
                    .map(|r| RankedResult::for_record(r, c.generator_score))
            })
            .collect(),
        RankPolicy::Model(model) => {
            let user = world.users.context_or_default(user_id);
            let ctx = world.scoring_context(store);
            rank(&ctx, model, query, &user, &candidates.entries)?
        }
        RankPolicy::Random => {
            let mut rows: Vec<RankedResult> = candidates
                .entries
                .iter()
                .filter_map(|c| {
                    world
                        .pins
                        .get(&c.signature)
                        .map(|r| RankedResult::for_record(r, 0.0))
                })
                .collect();
            let mut rng = util::rng_from(shuffle_seed);
            rows.shuffle(&mut rng);
            rows
        }
    };
    Ok(ranked
        .into_iter()
        .take(top_k)
        .map(|result| {
            let (source, generator_score) = meta
                .get(&result.signature)
                .map(|(s, g)| (Some(*s), *g))
                .unwrap_or((None, 0.0));
            ServedRow {
                result,
                source,
                generator_score,
            }
        })
        .collect())
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AbReport {
    pub control_propensity: f64,
    pub treatment_propensity: f64,
    pub diff: f64,
    pub ci95: (f64, f64),
    pub control_users: usize,
    pub treatment_users: usize,
}

pub struct AbConfig {
    /// Fraction of users routed to the treatment arm.
    pub treatment_split: f64,
    pub top_k: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for AbConfig {
    fn default() -> Self {
        AbConfig {
            treatment_split: 0.5,
            top_k: 20,
            bootstrap: 1000,
            seed: 0,
        }
    }
}

/// Simulated A/B experiment. Users are hash-assigned to arms; save
/// propensity is saved-users over seen-users per arm, and the difference
/// carries a bootstrap percentile CI over users.
pub fn run_ab(
    world: &SimWorld,
    store: &MemboostStore,
    control: RankPolicy<'_>,
    treatment: RankPolicy<'_>,
    sessions: &[(String, Signature)],
    cfg: &AbConfig,
) -> Result<AbReport> {
    let cache = CandidateCache::build(world, sessions)?;
    let outcomes: Vec<Result<(bool, String, bool)>> = sessions
        .par_iter()
        .enumerate()
        .map(|(i, (user_id, query))| {
            let in_treatment = (util::fnv1a64_parts(&[
                user_id.as_bytes(),
                b"ab-arm",
                &cfg.seed.to_le_bytes(),
            ]) as f64
                / u64::MAX as f64)
                < cfg.treatment_split;
            let locale = world.users.context_or_default(user_id).language;
            let candidates = cache
                .get(query, &locale)
                .ok_or_else(|| Error::invalid("candidate cache miss"))?;
            let session_seed = util::derive_seed_indexed(cfg.seed, "ab-session", i as u64);
            let policy = if in_treatment { &treatment } else { &control };
            let rows = serve_rows(
                world,
                store,
                policy,
                query,
                user_id,
                candidates,
                cfg.top_k,
                util::derive_seed_indexed(cfg.seed, "ab-shuffle", i as u64),
            )?;
            let stamp = SessionStamp {
                session_id: format!("ab{i}"),
                user_id,
                platform: "web",
                ts: i as i64 * 60,
                gate: None,
                arm: Some(if in_treatment { "treatment" } else { "control" }),
            };
            let events =
                simulate_session(&world.user_model, &world.pins, query, &rows, &stamp, session_seed);
            let saved = events
                .iter()
                .any(|e| e.action == crate::corpus::Action::Save);
            Ok((in_treatment, user_id.clone(), saved))
        })
        .collect();

    let mut per_user: BTreeMap<(bool, String), bool> = BTreeMap::new();
    for outcome in outcomes {
        let (arm, user, saved) = outcome?;
        let slot = per_user.entry((arm, user)).or_insert(false);
        *slot |= saved;
    }
    let control_users: Vec<bool> = per_user
        .iter()
        .filter(|((arm, _), _)| !arm)
        .map(|(_, saved)| *saved)
        .collect();
    let treatment_users: Vec<bool> = per_user
        .iter()
        .filter(|((arm, _), _)| *arm)
        .map(|(_, saved)| *saved)
        .collect();
    let propensity =
        |xs: &[bool]| xs.iter().filter(|s| **s).count() as f64 / xs.len().max(1) as f64;
    let control_propensity = propensity(&control_users);
    let treatment_propensity = propensity(&treatment_users);

    let mut diffs = Vec::with_capacity(cfg.bootstrap);
    let mut rng = util::rng_from(util::derive_seed(cfg.seed, "bootstrap"));
    for _ in 0..cfg.bootstrap {
        let resample = |xs: &[bool], rng: &mut rand_chacha::ChaCha8Rng| {
            if xs.is_empty() {
                return 0.0;
            }
            let mut saved = 0usize;
            for _ in 0..xs.len() {
                if xs[rng.random_range(0..xs.len())] {
                    saved += 1;
                }
            }
            saved as f64 / xs.len() as f64
        };
        let t = resample(&treatment_users, &mut rng);
        let c = resample(&control_users, &mut rng);
        diffs.push(t - c);
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let lo = diffs[(0.025 * (diffs.len() - 1) as f64).round() as usize];
    let hi = diffs[(0.975 * (diffs.len() - 1) as f64).round() as usize];

    Ok(AbReport {
        control_propensity,
        treatment_propensity,
        diff: treatment_propensity - control_propensity,
        ci95: (lo, hi),
        control_users: control_users.len(),
        treatment_users: treatment_users.len(),
    })
}

/// Assemble an engagement log from in-memory simulated events.
pub fn log_from_events(events: Vec<EngagementEvent>) -> EngagementLog {
    let sessions = crate::corpus::build_sessions_from(&events);
    EngagementLog {
        report: Default::default(),
        sessions,
        events,
    }
}
