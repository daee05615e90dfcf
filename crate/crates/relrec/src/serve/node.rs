//! Leaf and root node logic, plus the single-process reference pipeline
//! the sharded path must match bit for bit.

use super::{
    shard_hash, unbiased_gate, MemboostFragment, RankRequest, RankResponse, RelatedResponse,
    ShardMap, WireCandidate, WireScored,
};
use crate::corpus::{
    BoardCorpus, EngagementEvent, PinCorpus, Signature, UserContext, UserStore,
};
use crate::graph::{BipartiteGraph, Candidate, CandidateSet, GraphConfig, WalkConfig};
use crate::memboost::{
    self, memboost_insert, memboosted_score, MemboostParams, MemboostStore,
    FEATURE_FRAGMENT_LEN,
};
use crate::pin2vec::EmbeddingTable;
use crate::pipeline::CandidateEngine;
use crate::ranking::{
    extract_features, sort_ranked, CandidateContext, FeatureSchema, RankedResult, RankingModel,
};
use crate::supplemental::{local_swap, AnnotationIndex, BlendPolicy};
use crate::util;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Serving knobs shared by root and reference paths.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ServeConfig {
    pub top_k: usize,
    pub candidate_budget: usize,
    pub deadline_ms: u64,
    /// Memboost insertion after ranking (off by default; the memorization
    /// layer's most debated knob stays a flag).
    pub memboost_insertion: bool,
    /// Local swap toward the viewer's language.
    #[serde(default = "default_true")]
    pub local_swap: bool,
    pub unbiased_fraction: f64,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            top_k: 25,
            candidate_budget: 400,
            deadline_ms: 100,
            memboost_insertion: false,
            local_swap: true,
            unbiased_fraction: 0.0,
            seed: 0,
        }
    }
}

/// A leaf owns the pin raw data for one hash range and scores candidates
/// in that range with the deployed model.
pub struct LeafNode {
    pub id: String,
    pub range: (u64, u64),
    pins: PinCorpus,
    model: RankingModel,
    schema: FeatureSchema,
}

impl LeafNode {
    /// Keep only the records this leaf owns: the point of the architecture
    /// is that candidate raw data never leaves its shard.
    pub fn new(
        id: String,
        range: (u64, u64),
        pins: &PinCorpus,
        model: RankingModel,
        schema: FeatureSchema,
    ) -> Result<LeafNode> {
        if model.fingerprint != schema.fingerprint() {
            return Err(Error::SchemaMismatch {
                model: model.fingerprint,
                extractor: schema.fingerprint(),
            });
        }
        let mut owned = PinCorpus {
            records: Default::default(),
            dims: pins.dims(),
            report: Default::default(),
        };
        for record in pins.iter() {
            let h = shard_hash(&record.signature);
            if range.0 <= h && h <= range.1 {
                owned
                    .records
                    .insert(record.signature.clone(), record.clone());
            }
        }
        Ok(LeafNode {
            id,
            range,
            pins: owned,
            model,
            schema,
        })
    }

    pub fn owned_pins(&self) -> usize {
        self.pins.len()
    }

    /// Score the owned subset of the request's candidates. Candidates
    /// outside the range are ignored; owned-but-missing signatures are
    /// reported back.
    pub fn rank(&self, req: &RankRequest) -> Result<RankResponse> {
        let started = Instant::now();
        let query_record = match (&req.query_record, self.pins.get(&req.query)) {
            (Some(record), _) => record.clone(),
            (None, Some(record)) => record.clone(),
            (None, None) => return Err(Error::UnknownSignature(req.query.to_string())),
        };
        let fragments: std::collections::BTreeMap<&Signature, &MemboostFragment> =
            req.memboost.iter().map(|f| (&f.sig, f)).collect();
        let zeros = [0.0; FEATURE_FRAGMENT_LEN];
        let mut scored: Vec<WireScored> = Vec::new();
        let mut unknown = Vec::new();
        for candidate in &req.candidates {
            let h = shard_hash(&candidate.sig);
            if !(self.range.0 <= h && h <= self.range.1) {
                continue;
            }
            let Some(record) = self.pins.get(&candidate.sig) else {
                unknown.push(candidate.sig.clone());
                continue;
            };
            let mut fragment = zeros;
            if let Some(f) = fragments.get(&candidate.sig) {
                if f.values.len() == FEATURE_FRAGMENT_LEN {
                    fragment.copy_from_slice(&f.values);
                }
            }
            let fv = extract_features(
                &self.schema,
                &query_record,
                &req.user,
                record,
                &CandidateContext {
                    source: Some(candidate.source),
                    generator_score: candidate.score,
                },
                &fragment,
            );
            scored.push(WireScored {
                sig: candidate.sig.clone(),
                score: self.model.score(&fv)?,
            });
        }
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.sig.cmp(&b.sig))
        });
        scored.truncate(req.top_k);
        Ok(RankResponse {
            leaf_id: self.id.clone(),
            results: scored,
            unknown,
            elapsed_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Transport to one leaf: in-process for tests and single-binary
/// deployments, HTTP for real ones.
#[derive(Clone)]
pub enum LeafHandle {
    Local(Arc<LeafNode>),
    Http {
        url: String,
        client: reqwest::Client,
    },
}

impl LeafHandle {
    pub fn http(url: impl Into<String>) -> LeafHandle {
        LeafHandle::Http {
            url: url.into(),
            client: reqwest::Client::new(),
        }
    }

    async fn rank(&self, req: &RankRequest, deadline: Duration) -> Result<RankResponse> {
        match self {
            LeafHandle::Local(node) => {
                let node = node.clone();
                let req = req.clone();
                tokio::time::timeout(
                    deadline,
                    tokio::task::spawn_blocking(move || node.rank(&req)),
                )
                .await
                .map_err(|_| Error::Transport("leaf deadline exceeded".to_string()))?
                .map_err(|e| Error::Transport(format!("leaf task: {e}")))?
            }
            LeafHandle::Http { url, client } => {
                let response = client
                    .post(format!("{url}/leaf/rank"))
                    .timeout(deadline)
                    .json(req)
                    .send()
                    .await
                    .map_err(|e| Error::Transport(format!("leaf call: {e}")))?;
                if !response.status().is_success() {
                    return Err(Error::Transport(format!(
                        "leaf returned {}",
                        response.status()
                    )));
                }
                response
                    .json::<RankResponse>()
                    .await
                    .map_err(|e| Error::Transport(format!("leaf body: {e}")))
            }
        }
    }
}

/// Everything one deployment knows. The root borrows this; the reference
/// pipeline runs on it directly.
pub struct EngineState {
    pub pins: PinCorpus,
    pub boards: BoardCorpus,
    pub users: UserStore,
    pub graph: BipartiteGraph,
    pub index: AnnotationIndex,
    pub table: Option<EmbeddingTable>,
    pub store: MemboostStore,
    pub mb_params: MemboostParams,
    pub policy: BlendPolicy,
    pub graph_cfg: GraphConfig,
    pub walk: WalkConfig,
    pub model: RankingModel,
    pub schema: FeatureSchema,
    pub cfg: ServeConfig,
}

/// What one related() call produced, before HTTP framing.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatedOutcome {
    pub query: Signature,
    pub results: Vec<RankedResult>,
    pub partial: bool,
    pub reason: Option<String>,
    pub gate: &'static str,
    pub leaf_timings: Vec<(String, u64)>,
}

impl RelatedOutcome {
    pub fn into_response(self) -> RelatedResponse {
        RelatedResponse {
            query: self.query,
            results: self.results,
            partial: self.partial,
            reason: self.reason,
            gate: self.gate.to_string(),
            leaf_timings: self.leaf_timings,
        }
    }
}

impl EngineState {
    pub fn candidate_engine(&self) -> CandidateEngine<'_> {
        CandidateEngine {
            pins: &self.pins,
            boards: &self.boards,
            graph: &self.graph,
            index: &self.index,
            table: self.table.as_ref(),
            graph_cfg: &self.graph_cfg,
            walk: &self.walk,
            policy: &self.policy,
            budget: self.cfg.candidate_budget,
            seed: self.cfg.seed,
        }
    }

    /// Gate decision plus blended candidates for a request.
    fn prepare(
        &self,
        query: &Signature,
        user_id: &str,
    ) -> Result<Option<(UserContext, CandidateSet, bool)>> {
        if !self.pins.contains(query) {
            return Ok(None);
        }
        let user = self.users.context_or_default(user_id);
        let candidates = self
            .candidate_engine()
            .generate(query, Some(user.language.as_str()))?;
        let gated = unbiased_gate(
            user_id,
            query,
            self.cfg.unbiased_fraction,
            util::derive_seed(self.cfg.seed, "serve-gate"),
        );
        Ok(Some((user, candidates, gated)))
    }

    fn randomized_outcome(
        &self,
        query: &Signature,
        user_id: &str,
        user: &UserContext,
        candidates: &CandidateSet,
        top_k: usize,
    ) -> RelatedOutcome {
        let mut rows: Vec<RankedResult> = candidates
            .entries
            .iter()
            .filter_map(|c| {
                self.pins
                    .get(&c.signature)
                    .map(|r| RankedResult::for_record(r, c.generator_score))
            })
            .collect();
        let mut rng = util::rng_from(util::fnv1a64_parts(&[
            &self.cfg.seed.to_le_bytes(),
            b"gate-shuffle",
            user_id.as_bytes(),
            query.as_bytes(),
        ]));
        rows.shuffle(&mut rng);
        rows.truncate(top_k);
        if self.cfg.local_swap {
            local_swap(&mut rows, &user.language, &self.pins);
        }
        RelatedOutcome {
            query: query.clone(),
            results: rows,
            partial: false,
            reason: None,
            gate: "randomized",
            leaf_timings: Vec::new(),
        }
    }

    /// Shared tail of the pipeline: Memboost adjustment and re-sort,
    /// optional insertion, local swap.
    fn finalize(
        &self,
        query: &Signature,
        user: &UserContext,
        mut rows: Vec<RankedResult>,
    ) -> Result<Vec<RankedResult>> {
        for row in &mut rows {
            if let Some(stats) = self.store.get(query, &row.signature) {
                let mb = memboost::mb_score(stats, &self.mb_params)?;
                row.score = memboosted_score(row.score, mb, self.mb_params.gamma);
            }
        }
        sort_ranked(&mut rows);
        if self.cfg.memboost_insertion {
            rows = memboost_insert(rows, &self.store, &self.mb_params, query, &self.pins)?;
        }
        if self.cfg.local_swap {
            local_swap(&mut rows, &user.language, &self.pins);
        }
        Ok(rows)
    }

    /// Single-process reference: score every candidate locally, take the
    /// global top-k, then run the shared tail. The scatter-gather path is
    /// checked bit-for-bit against this.
    pub fn reference_related(
        &self,
        query: &Signature,
        user_id: &str,
        top_k: usize,
    ) -> Result<RelatedOutcome> {
        let Some((user, candidates, gated)) = self.prepare(query, user_id)? else {
            return Ok(RelatedOutcome {
                query: query.clone(),
                results: Vec::new(),
                partial: false,
                reason: Some("unknown query signature".to_string()),
                gate: "ranked",
                leaf_timings: Vec::new(),
            });
        };
        if gated {
            return Ok(self.randomized_outcome(query, user_id, &user, &candidates, top_k));
        }
        let ctx = crate::ranking::ScoringContext {
            pins: &self.pins,
            store: &self.store,
            params: &self.mb_params,
            schema: &self.schema,
        };
        let mut rows = crate::ranking::rank(&ctx, &self.model, query, &user, &candidates.entries)?;
        rows.truncate(top_k);
        let results = self.finalize(query, &user, rows)?;
        Ok(RelatedOutcome {
            query: query.clone(),
            results,
            partial: false,
            reason: None,
            gate: "ranked",
            leaf_timings: Vec::new(),
        })
    }

    /// Build the per-leaf sub-request for a slice of candidates.
    fn leaf_request(
        &self,
        query: &Signature,
        user: &UserContext,
        candidates: &[&Candidate],
        top_k: usize,
    ) -> RankRequest {
        let memboost = candidates
            .iter()
            .filter_map(|c| {
                self.store.get(query, &c.signature).map(|stats| {
                    let values =
                        memboost::features_from_stats(stats, &self.mb_params).to_vec();
                    MemboostFragment {
                        sig: c.signature.clone(),
                        mb: memboost::mb_score(stats, &self.mb_params).unwrap_or(0.0),
                        values,
                    }
                })
            })
            .collect();
        RankRequest {
            query: query.clone(),
            query_record: self.pins.get(query).cloned(),
            user: user.clone(),
            candidates: candidates
                .iter()
                .map(|c| WireCandidate {
                    sig: c.signature.clone(),
                    source: c.source,
                    score: c.generator_score,
                })
                .collect(),
            memboost,
            top_k,
            deadline_ms: self.cfg.deadline_ms,
        }
    }
}

/// Log sink: every served session goes out in events.jsonl format.
pub struct ServeLog {
    sink: Mutex<Box<dyn std::io::Write + Send>>,
    counter: AtomicU64,
}

impl ServeLog {
    pub fn new(sink: Box<dyn std::io::Write + Send>) -> ServeLog {
        ServeLog {
            sink: Mutex::new(sink),
            counter: AtomicU64::new(0),
        }
    }

    pub fn record(
        &self,
        query: &Signature,
        user_id: &str,
        platform: &str,
        gate: &str,
        results: &[RankedResult],
    ) -> Result<()> {
        let serial = self.counter.fetch_add(1, Ordering::SeqCst);
        let mut sink = self.sink.lock().expect("log sink poisoned");
        for (rank, row) in results.iter().enumerate() {
            let event = EngagementEvent {
                action: crate::corpus::Action::Impression,
                query: query.clone(),
                result: row.signature.clone(),
                platform: platform.to_string(),
                rank: rank as u32,
                user_id: user_id.to_string(),
                timestamp: serial as i64,
                session_id: format!("srv{serial:010}"),
                source: None,
                generator_score: Some(row.score),
                gate: Some(gate.to_string()),
                arm: None,
            };
            crate::corpus::write_event_line(&mut *sink, &event)?;
        }
        sink.flush()?;
        Ok(())
    }
}

/// The root: blends candidates, scatters to leaves, gathers and finalizes.
pub struct RootNode {
    pub state: EngineState,
    pub shard: ShardMap,
    pub leaves: Vec<LeafHandle>,
    pub log: Option<ServeLog>,
}

impl RootNode {
    pub fn new(
        state: EngineState,
        shard: ShardMap,
        leaves: Vec<LeafHandle>,
        log: Option<ServeLog>,
    ) -> Result<RootNode> {
        shard.validate()?;
        if shard.len() != leaves.len() {
            return Err(Error::invalid(
                "shard map and leaf handles disagree on leaf count",
            ));
        }
        Ok(RootNode {
            state,
            shard,
            leaves,
            log,
        })
    }

    pub async fn related(
        &self,
        query: &Signature,
        user_id: &str,
        top_k: usize,
        platform: &str,
    ) -> Result<RelatedOutcome> {
        let state = &self.state;
        let Some((user, candidates, gated)) = state.prepare(query, user_id)? else {
            return Ok(RelatedOutcome {
                query: query.clone(),
                results: Vec::new(),
                partial: false,
                reason: Some("unknown query signature".to_string()),
                gate: "ranked",
                leaf_timings: Vec::new(),
            });
        };
        if top_k == 0 {
            return Ok(RelatedOutcome {
                query: query.clone(),
                results: Vec::new(),
                partial: false,
                reason: None,
                gate: "ranked",
                leaf_timings: Vec::new(),
            });
        }
        let outcome = if gated {
            state.randomized_outcome(query, user_id, &user, &candidates, top_k)
        } else {
            // Scatter: each leaf sees only the candidates it owns.
            let mut per_leaf: Vec<Vec<&Candidate>> = vec![Vec::new(); self.leaves.len()];
            for candidate in &candidates.entries {
                per_leaf[self.shard.owner_index(&candidate.signature)].push(candidate);
            }
            let deadline = Duration::from_millis(state.cfg.deadline_ms);
            let mut calls = Vec::new();
            for (leaf, slice) in self.leaves.iter().zip(&per_leaf) {
                if slice.is_empty() {
                    continue;
                }
                let req = state.leaf_request(query, &user, slice, top_k);
                calls.push(async move { leaf.rank(&req, deadline).await });
            }
            let responses = futures::future::join_all(calls).await;
            let mut partial = false;
            let mut merged: Vec<WireScored> = Vec::new();
            let mut leaf_timings = Vec::new();
            for response in responses {
                match response {
                    Ok(r) => {
                        leaf_timings.push((r.leaf_id.clone(), r.elapsed_ms));
                        merged.extend(r.results);
                    }
                    Err(_) => partial = true,
                }
            }
            merged.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.sig.cmp(&b.sig))
            });
            merged.truncate(top_k);
            let rows: Vec<RankedResult> = merged
                .into_iter()
                .filter_map(|s| {
                    state
                        .pins
                        .get(&s.sig)
                        .map(|r| RankedResult::for_record(r, s.score))
                })
                .collect();
            let results = state.finalize(query, &user, rows)?;
            RelatedOutcome {
                query: query.clone(),
                results,
                partial,
                reason: None,
                gate: "ranked",
                leaf_timings,
            }
        };
        if let Some(log) = &self.log {
            log.record(query, user_id, platform, outcome.gate, &outcome.results)?;
        }
        Ok(outcome)
    }
}
