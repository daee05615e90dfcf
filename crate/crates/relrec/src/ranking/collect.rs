//! Training-data collection.
//!
//! Session-based collection trims each logged session to its engaged pins
//! plus the two displayed immediately before each of them (the user
//! probably saw those), then emits pointwise rows or within-session
//! relevance pairs ordered by the action total order. Memboost-based
//! collection samples (top-MB, bottom-MB) and (bottom-MB, random-popular)
//! pairs per query.

use super::features::{extract_features, CandidateContext, FeatureSchema};
use super::gbdt::GbdtTrainingData;
use super::linear::PairData;
use crate::corpus::{Action, EngagementLog, PinCorpus, Signature, UserStore};
use crate::graph::CandidateSource;
use crate::memboost::{mb_score, memboost_features, MemboostParams, MemboostStore};
use crate::util;
use crate::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectMode {
    Pointwise,
    Pairs,
}

/// One trimmed (session, displayed result) example.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub query: Signature,
    pub user_id: String,
    pub result: Signature,
    pub best_action: Action,
    pub rank_shown: u32,
    pub ts: i64,
    pub source: Option<String>,
    pub generator_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum CollectedData {
    Pointwise {
        rows: Vec<SessionRow>,
    },
    Pairs {
        rows: Vec<SessionRow>,
        /// (higher, lower) indices into rows; never crosses sessions.
        pairs: Vec<(u32, u32)>,
    },
}

impl CollectedData {
    pub fn rows(&self) -> &[SessionRow] {
        match self {
            CollectedData::Pointwise { rows } => rows,
            CollectedData::Pairs { rows, .. } => rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows().is_empty()
    }
}

/// Keep engaged results plus the two displayed immediately before each.
fn trimmed_indices(actions: &[Action]) -> Vec<usize> {
    let mut keep = vec![false; actions.len()];
    for (i, action) in actions.iter().enumerate() {
        if action.is_engagement() {
            keep[i] = true;
            if i >= 1 {
                keep[i - 1] = true;
            }
            if i >= 2 {
                keep[i - 2] = true;
            }
        }
    }
    (0..actions.len()).filter(|&i| keep[i]).collect()
}

pub fn collect_session_data(log: &EngagementLog, mode: CollectMode) -> CollectedData {
    let mut rows: Vec<SessionRow> = Vec::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for session in &log.sessions {
        let actions: Vec<Action> = session.results.iter().map(|r| r.best_action).collect();
        let kept = trimmed_indices(&actions);
        if kept.is_empty() {
            continue;
        }
        let first_row = rows.len();
        for &i in &kept {
            let r = &session.results[i];
            rows.push(SessionRow {
                query: session.query.clone(),
                user_id: session.user_id.clone(),
                result: r.result.clone(),
                best_action: r.best_action,
                rank_shown: r.rank,
                ts: session.start_ts,
                source: r.source.clone(),
                generator_score: r.generator_score,
            });
        }
        if mode == CollectMode::Pairs {
            let end = rows.len();
            for a in first_row..end {
                for b in first_row..end {
                    if rows[a].best_action > rows[b].best_action {
                        pairs.push((a as u32, b as u32));
                    }
                }
            }
        }
    }
    match mode {
        CollectMode::Pointwise => CollectedData::Pointwise { rows },
        CollectMode::Pairs => CollectedData::Pairs { rows, pairs },
    }
}

/// Explicitly sampled Memboost relevance pairs for one query:
/// (r1, rn) and (rn, r_rand).
#[derive(Debug, Clone, PartialEq)]
pub struct MemboostPairRow {
    pub query: Signature,
    pub pos: Signature,
    pub neg: Signature,
    /// The negative is a popularity-sampled random pin, not a scored
    /// result; its Memboost fragment is all zeros by construction.
    pub neg_is_random: bool,
}

/// Per query with scored results: pair the best and worst Memboost results,
/// and anchor the worst against a random popular pin. Deterministic per
/// seed (per-query derived streams).
pub fn collect_memboost_pairs(
    store: &MemboostStore,
    pins: &PinCorpus,
    params: &MemboostParams,
    seed: u64,
) -> Result<Vec<MemboostPairRow>> {
    let all: Vec<&Signature> = pins.signatures().collect();
    if all.is_empty() {
        return Err(Error::invalid("empty pin corpus"));
    }
    let mut cumulative: Vec<f64> = Vec::with_capacity(all.len());
    let mut total = 0.0;
    for sig in &all {
        total += (pins.get(sig).map(|r| r.popularity).unwrap_or(0) + 1) as f64;
        cumulative.push(total);
    }

    let mut out = Vec::new();
    for query in store.queries() {
        let mut scored: Vec<(f64, &Signature)> = Vec::new();
        for (result, stats) in store.for_query(query) {
            scored.push((mb_score(stats, params)?, result));
        }
        if scored.is_empty() {
            continue;
        }
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(b.1))
        });
        let top = scored.first().expect("non-empty").1;
        let bottom = scored.last().expect("non-empty").1;
        if top != bottom {
            out.push(MemboostPairRow {
                query: query.clone(),
                pos: top.clone(),
                neg: bottom.clone(),
                neg_is_random: false,
            });
        }
        let mut rng = util::rng_from(util::derive_seed(seed, query.as_str()));
        let mut random = None;
        for _ in 0..64 {
            let u: f64 = rng.random::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= u).min(all.len() - 1);
            let pick = all[i];
            if pick != top && pick != bottom && pick != query {
                random = Some(pick.clone());
                break;
            }
        }
        // Tiny corpora can exhaust the retry budget; fall back to a scan.
        let random = random.or_else(|| {
            all.iter()
                .find(|s| **s != top && **s != bottom && ***s != *query)
                .map(|s| (*s).clone())
        });
        if let Some(random) = random {
            out.push(MemboostPairRow {
                query: query.clone(),
                pos: bottom.clone(),
                neg: random,
                neg_is_random: true,
            });
        }
    }
    Ok(out)
}

/// Stores feature extraction draws from while building training matrices.
pub struct FeaturizeContext<'a> {
    pub pins: &'a PinCorpus,
    pub users: &'a UserStore,
    pub store: &'a MemboostStore,
    pub params: &'a MemboostParams,
    pub schema: &'a FeatureSchema,
}

impl FeaturizeContext<'_> {
    /// Feature values for one session row; None when the query or result
    /// is missing from the pin corpus.
    pub fn features_for(&self, row: &SessionRow) -> Option<Vec<f64>> {
        let query = self.pins.get(&row.query)?;
        let candidate = self.pins.get(&row.result)?;
        let user = self.users.context_or_default(&row.user_id);
        let fragment = memboost_features(self.store, self.params, &row.query, &row.result);
        let ctx = CandidateContext {
            source: row.source.as_deref().and_then(CandidateSource::from_tag),
            generator_score: row.generator_score.unwrap_or(0.0),
        };
        Some(extract_features(self.schema, query, &user, candidate, &ctx, &fragment).values)
    }
}

/// Feature matrices from collected session data. Rows whose query or result
/// is missing from the pin corpus are dropped (and pairs remapped).
pub fn featurize_session_rows(
    collected: &CollectedData,
    ctx: &FeaturizeContext<'_>,
) -> Result<GbdtTrainingData> {
    let rows = collected.rows();
    let mut features = Vec::with_capacity(rows.len());
    let mut remap: Vec<Option<u32>> = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        match ctx.features_for(row) {
            Some(values) => {
                remap.push(Some(features.len() as u32));
                features.push(values);
                labels.push(row.best_action == Action::Save);
            }
            None => remap.push(None),
        }
    }
    match collected {
        CollectedData::Pointwise { .. } => Ok(GbdtTrainingData::Logistic {
            features,
            labels,
            fingerprint: ctx.schema.fingerprint(),
        }),
        CollectedData::Pairs { pairs, .. } => {
            let mut mapped = Vec::with_capacity(pairs.len());
            for &(hi, lo) in pairs {
                if let (Some(h), Some(l)) = (remap[hi as usize], remap[lo as usize]) {
                    mapped.push((h, l));
                }
            }
            Ok(GbdtTrainingData::RankNet {
                features,
                pairs: mapped,
                fingerprint: ctx.schema.fingerprint(),
            })
        }
    }
}

/// Feature pair matrices from Memboost pair rows.
pub fn featurize_pair_rows(
    rows: &[MemboostPairRow],
    ctx: &FeaturizeContext<'_>,
) -> Result<PairData> {
    let mut pos = Vec::with_capacity(rows.len());
    let mut neg = Vec::with_capacity(rows.len());
    for row in rows {
        let (Some(query), Some(p), Some(n)) = (
            ctx.pins.get(&row.query),
            ctx.pins.get(&row.pos),
            ctx.pins.get(&row.neg),
        ) else {
            continue;
        };
        let user = ctx.users.context_or_default("");
        let cctx = CandidateContext::default();
        let frag_pos = memboost_features(ctx.store, ctx.params, &row.query, &row.pos);
        let frag_neg = memboost_features(ctx.store, ctx.params, &row.query, &row.neg);
        pos.push(extract_features(ctx.schema, query, &user, p, &cctx, &frag_pos).values);
        neg.push(extract_features(ctx.schema, query, &user, n, &cctx, &frag_neg).values);
    }
    Ok(PairData {
        pos,
        neg,
        fingerprint: ctx.schema.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_engagement;
    use std::io::Write as _;

    fn session_with_actions(actions: &[(&str, u32, &str)]) -> EngagementLog {
        // (result, rank, best_action)
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (result, rank, _) in actions {
            writeln!(
                f,
                r#"{{"session":"s","user":"u","query":"q","result":"{result}","action":"impression","platform":"web","rank":{rank},"ts":1}}"#
            )
            .unwrap();
        }
        for (result, rank, action) in actions {
            if *action != "impression" {
                writeln!(
                    f,
                    r#"{{"session":"s","user":"u","query":"q","result":"{result}","action":"{action}","platform":"web","rank":{rank},"ts":2}}"#
                )
                .unwrap();
            }
        }
        load_engagement(f.path()).unwrap()
    }

    #[test]
    fn save_at_rank_five_keeps_three_four_five() {
        let log = session_with_actions(&[
            ("r0", 0, "impression"),
            ("r1", 1, "impression"),
            ("r2", 2, "impression"),
            ("r3", 3, "impression"),
            ("r4", 4, "impression"),
            ("r5", 5, "save"),
        ]);
        let collected = collect_session_data(&log, CollectMode::Pointwise);
        let ranks: Vec<u32> = collected.rows().iter().map(|r| r.rank_shown).collect();
        assert_eq!(ranks, vec![3, 4, 5]);
    }

    #[test]
    fn all_impression_session_yields_nothing() {
        let log = session_with_actions(&[("r0", 0, "impression"), ("r1", 1, "impression")]);
        let collected = collect_session_data(&log, CollectMode::Pointwise);
        assert!(collected.is_empty());
    }

    #[test]
    fn save_at_rank_one_truncates_at_start() {
        let log = session_with_actions(&[
            ("r0", 0, "impression"),
            ("r1", 1, "save"),
            ("r2", 2, "impression"),
        ]);
        let collected = collect_session_data(&log, CollectMode::Pointwise);
        let ranks: Vec<u32> = collected.rows().iter().map(|r| r.rank_shown).collect();
        assert_eq!(ranks, vec![0, 1]);
    }

    #[test]
    fn pairs_follow_action_order_within_session() {
        let log = session_with_actions(&[
            ("r0", 0, "closeup"),
            ("r1", 1, "save"),
            ("r2", 2, "impression"),
        ]);
        let CollectedData::Pairs { rows, pairs } = collect_session_data(&log, CollectMode::Pairs)
        else {
            panic!();
        };
        // kept: r0 (engaged), r1 (engaged), plus nothing after; preceding of
        // r1 is r0. Pairs: save>closeup.
        assert_eq!(rows.len(), 2);
        assert_eq!(pairs.len(), 1);
        let (hi, lo) = pairs[0];
        assert_eq!(rows[hi as usize].best_action, Action::Save);
        assert_eq!(rows[lo as usize].best_action, Action::Closeup);
    }

    fn store_with(queries: &[(&str, &[(&str, u64)])]) -> MemboostStore {
        // Build via a synthetic log: impressions at rank 0 + saves.
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let mut s = 0;
        for (query, results) in queries {
            for (result, saves) in *results {
                writeln!(
                    f,
                    r#"{{"session":"s{s}","user":"u","query":"{query}","result":"{result}","action":"impression","platform":"web","rank":0,"ts":{s}}}"#
                )
                .unwrap();
                for _ in 0..*saves {
                    writeln!(
                        f,
                        r#"{{"session":"s{s}","user":"u","query":"{query}","result":"{result}","action":"save","platform":"web","rank":0,"ts":{s}}}"#
                    )
                    .unwrap();
                }
                s += 1;
            }
        }
        let log = load_engagement(f.path()).unwrap();
        crate::memboost::accumulate(&log, &crate::memboost::compute_priors(&log))
    }

    fn pins_with(sigs: &[(&str, u64)]) -> PinCorpus {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (sig, pop) in sigs {
            writeln!(
                f,
                r#"{{"sig":"{sig}","pin_ids":["p-{sig}"],"annotations":[],"ann_emb":[],"cat_vec":[1.0],"vis_emb":[],"locale":"en","popularity":{pop}}}"#
            )
            .unwrap();
        }
        crate::corpus::load_pins(f.path()).unwrap()
    }

    #[test]
    fn single_result_query_emits_only_random_pair() {
        let store = store_with(&[("q", &[("r", 3)])]);
        let pins = pins_with(&[("q", 1), ("r", 1), ("z1", 50), ("z2", 40)]);
        let rows =
            collect_memboost_pairs(&store, &pins, &MemboostParams::default(), 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].neg_is_random);
        assert_eq!(rows[0].pos.as_str(), "r");
    }

    #[test]
    fn two_result_query_emits_two_pairs() {
        let store = store_with(&[("q", &[("hot", 9), ("cold", 0)])]);
        let pins = pins_with(&[("q", 1), ("hot", 1), ("cold", 1), ("z", 50)]);
        let rows =
            collect_memboost_pairs(&store, &pins, &MemboostParams::default(), 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].pos.as_str(), "hot");
        assert_eq!(rows[0].neg.as_str(), "cold");
        assert!(!rows[0].neg_is_random);
        assert!(rows[1].neg_is_random);
    }

    #[test]
    fn random_negative_never_collides() {
        let store = store_with(&[("q", &[("hot", 5), ("cold", 0)])]);
        let pins = pins_with(&[("q", 1), ("hot", 1), ("cold", 1), ("z", 1)]);
        for seed in 0..50 {
            let rows =
                collect_memboost_pairs(&store, &pins, &MemboostParams::default(), seed).unwrap();
            let random = &rows[1].neg;
            assert!(random.as_str() != "hot" && random.as_str() != "cold");
            assert!(random.as_str() != "q");
        }
    }
}
