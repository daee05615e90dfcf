//! Supplemental candidate sources and result localization.
//!
//! Search-based candidates retrieve by annotation-token idf; visually
//! similar candidates come from an exact nearest-neighbor scan (with a
//! near-duplicate fast path that delegates to the duplicate's own related
//! results); segmented candidates rerun board co-occurrence on a
//! locale-filtered graph. Local swap/boost and multi-source blending close
//! out the content-activation toolkit.
//!
//! Indexes are immutable after build; every operation here is reentrant.

use crate::corpus::{BoardCorpus, PinCorpus, PinRecord, Signature};
use crate::graph::{
    board_cooccurrence, build_graph, Candidate, CandidateFlag, CandidateSet, CandidateSource,
    GraphConfig,
};
use crate::ranking::RankedResult;
use crate::util;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Token -> postings of (signature, term frequency), sorted by popularity.
/// `precomputed` holds materialized top lists for frequent token sets, the
/// search-backend shortcut for popular queries.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    postings: BTreeMap<String, Vec<(Signature, u32)>>,
    precomputed: BTreeMap<Vec<String>, Vec<Signature>>,
    doc_count: usize,
}

impl AnnotationIndex {
    pub fn build(pins: &PinCorpus) -> AnnotationIndex {
        let mut postings: BTreeMap<String, Vec<(Signature, u32)>> = BTreeMap::new();
        for record in pins.iter() {
            for (token, &tf) in &record.annotations {
                postings
                    .entry(token.clone())
                    .or_default()
                    .push((record.signature.clone(), tf));
            }
        }
        for (_, list) in postings.iter_mut() {
            list.sort_by(|a, b| {
                let pa = pins.get(&a.0).map(|r| r.popularity).unwrap_or(0);
                let pb = pins.get(&b.0).map(|r| r.popularity).unwrap_or(0);
                pb.cmp(&pa).then_with(|| a.0.cmp(&b.0))
            });
        }
        AnnotationIndex {
            postings,
            precomputed: BTreeMap::new(),
            doc_count: pins.len(),
        }
    }

    /// idf(token) = ln(1 + N / df). Unseen tokens contribute nothing.
    pub fn idf(&self, token: &str) -> f64 {
        match self.postings.get(token) {
            Some(list) if !list.is_empty() => {
                (1.0 + self.doc_count as f64 / list.len() as f64).ln()
            }
            _ => 0.0,
        }
    }

    pub fn postings(&self, token: &str) -> Option<&[(Signature, u32)]> {
        self.postings.get(token).map(|v| v.as_slice())
    }

    /// Materialize top-k lists for the given token sets (frequent queries).
    pub fn precompute_top(&mut self, token_sets: &[Vec<String>], k: usize) {
        let sets: Vec<Vec<String>> = token_sets
            .iter()
            .map(|set| {
                let mut s = set.clone();
                s.sort();
                s.dedup();
                s
            })
            .collect();
        for set in sets {
            let ranked = self.rank_tokens(&set, k, None);
            self.precomputed.insert(set, ranked);
        }
    }

    fn rank_tokens(&self, tokens: &[String], k: usize, exclude: Option<&Signature>) -> Vec<Signature> {
        let mut scores: BTreeMap<&Signature, f64> = BTreeMap::new();
        for token in tokens {
            let idf = self.idf(token);
            if idf == 0.0 {
                continue;
            }
            if let Some(list) = self.postings.get(token) {
                for (sig, _) in list {
                    if exclude == Some(sig) {
                        continue;
                    }
                    *scores.entry(sig).or_insert(0.0) += idf;
                }
            }
        }
        let mut ranked: Vec<(&Signature, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(b.0))
        });
        ranked.truncate(k);
        ranked.into_iter().map(|(s, _)| s.clone()).collect()
    }
}

/// Score candidates by the summed idf of shared annotation tokens.
pub fn search_candidates(index: &AnnotationIndex, query: &PinRecord, k: usize) -> CandidateSet {
    if query.annotations.is_empty() || k == 0 {
        return CandidateSet::empty(query.signature.clone(), None);
    }
    let tokens: Vec<String> = query.annotations.keys().cloned().collect();
    // Popular-query fast path.
    if let Some(top) = index.precomputed.get(&tokens) {
        let entries = top
            .iter()
            .filter(|sig| **sig != query.signature)
            .take(k)
            .map(|sig| Candidate {
                signature: sig.clone(),
                source: CandidateSource::Search,
                generator_score: tokens
                    .iter()
                    .filter(|t| {
                        index
                            .postings(t)
                            .map(|l| l.iter().any(|(s, _)| s == sig))
                            .unwrap_or(false)
                    })
                    .map(|t| index.idf(t))
                    .sum(),
            })
            .collect();
        return CandidateSet {
            query: query.signature.clone(),
            entries,
            flag: None,
        };
    }
    let mut scored: BTreeMap<&Signature, f64> = BTreeMap::new();
    for token in &tokens {
        let idf = index.idf(token);
        if idf == 0.0 {
            continue;
        }
        for (sig, _) in index.postings(token).unwrap_or(&[]) {
            if sig == &query.signature {
                continue;
            }
            *scored.entry(sig).or_insert(0.0) += idf;
        }
    }
    let mut entries: Vec<Candidate> = scored
        .into_iter()
        .map(|(sig, score)| Candidate {
            signature: sig.clone(),
            source: CandidateSource::Search,
            generator_score: score,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.generator_score
            .partial_cmp(&a.generator_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.signature.cmp(&b.signature))
    });
    entries.truncate(k);
    CandidateSet {
        query: query.signature.clone(),
        entries,
        flag: None,
    }
}

pub const DEFAULT_DUP_THRESHOLD: f64 = 0.99;

/// Visually similar candidates. If another pin's visual embedding is a
/// near-duplicate of the query's (cosine >= `dup_threshold`), that
/// duplicate's own related results are returned via `related_for_dup`;
/// otherwise an exact top-k cosine scan. All-zero query embeddings yield a
/// flagged empty set.
pub fn visual_candidates<F>(
    pins: &PinCorpus,
    query: &PinRecord,
    k: usize,
    dup_threshold: f64,
    related_for_dup: F,
) -> CandidateSet
where
    F: Fn(&Signature) -> Vec<(Signature, f64)>,
{
    if util::is_zero_vec(&query.visual_embedding) {
        return CandidateSet::empty(query.signature.clone(), Some(CandidateFlag::DegenerateQuery));
    }
    let mut best_dup: Option<(f64, &Signature)> = None;
    let mut scored: Vec<(f64, &Signature)> = Vec::new();
    for record in pins.iter() {
        if record.signature == query.signature || util::is_zero_vec(&record.visual_embedding) {
            continue;
        }
        let cos = util::cosine(&query.visual_embedding, &record.visual_embedding);
        if cos >= dup_threshold {
            let better = match best_dup {
                None => true,
                Some((c, s)) => cos > c || (cos == c && record.signature < *s),
            };
            if better {
                best_dup = Some((cos, &record.signature));
            }
        }
        scored.push((cos, &record.signature));
    }
    if let Some((_, dup)) = best_dup {
        let mut seen = BTreeSet::new();
        let entries = related_for_dup(dup)
            .into_iter()
            .filter(|(sig, _)| *sig != query.signature && seen.insert(sig.clone()))
            .take(k)
            .map(|(sig, score)| Candidate {
                signature: sig,
                source: CandidateSource::Visual,
                generator_score: score,
            })
            .collect();
        return CandidateSet {
            query: query.signature.clone(),
            entries,
            flag: None,
        };
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    scored.truncate(k);
    CandidateSet {
        query: query.signature.clone(),
        entries: scored
            .into_iter()
            .map(|(score, sig)| Candidate {
                signature: sig.clone(),
                source: CandidateSource::Visual,
                generator_score: score,
            })
            .collect(),
        flag: None,
    }
}

/// Board co-occurrence on the locale-filtered corpus: only pins with an
/// instance in `locale` enter the graph (locale "*" disables the filter,
/// making this identical to plain board co-occurrence for equal seeds).
pub fn segmented_candidates(
    boards: &BoardCorpus,
    pins: &PinCorpus,
    locale: &str,
    query: &Signature,
    budget: usize,
    graph_cfg: &GraphConfig,
    seed: u64,
) -> Result<CandidateSet> {
    let (filtered_pins, filtered_boards);
    let (pins_ref, boards_ref) = if locale == "*" {
        (pins, boards)
    } else {
        filtered_pins = filter_pins_by_locale(pins, locale);
        if filtered_pins.is_empty() {
            return Ok(CandidateSet::empty(query.clone(), None));
        }
        filtered_boards = filter_boards(boards, &filtered_pins);
        (&filtered_pins, &filtered_boards)
    };
    if boards_ref.is_empty() {
        return Ok(CandidateSet::empty(query.clone(), None));
    }
    let graph = build_graph(boards_ref, pins_ref, graph_cfg)?;
    let mut set = board_cooccurrence(&graph, pins_ref, query, budget, seed);
    for entry in &mut set.entries {
        entry.source = CandidateSource::Segmented;
    }
    Ok(set)
}

fn filter_pins_by_locale(pins: &PinCorpus, locale: &str) -> PinCorpus {
    let mut out = PinCorpus {
        records: BTreeMap::new(),
        dims: pins.dims(),
        report: Default::default(),
    };
    for record in pins.iter() {
        if record.locale_instances.contains_key(locale) {
            out.records.insert(record.signature.clone(), record.clone());
        }
    }
    out
}

fn filter_boards(boards: &BoardCorpus, pins: &PinCorpus) -> BoardCorpus {
    let mut out = BoardCorpus::default();
    for board in boards.iter() {
        let kept: Vec<Signature> = board
            .pin_signatures
            .iter()
            .filter(|s| pins.contains(s))
            .cloned()
            .collect();
        if kept.is_empty() {
            continue;
        }
        let mut b = board.clone();
        b.pin_signatures = kept;
        out.boards.insert(b.board_id.clone(), b);
    }
    out
}

/// Replace each non-local result that has a pin instance of the same image
/// in the viewer's locale with that local instance. Order, scores, and
/// signatures are untouched.
pub fn local_swap(results: &mut [RankedResult], viewer_locale: &str, pins: &PinCorpus) {
    if viewer_locale.is_empty() || viewer_locale == "unknown" {
        return;
    }
    for row in results.iter_mut() {
        if row.locale == viewer_locale {
            continue;
        }
        if let Some(record) = pins.get(&row.signature) {
            if let Some(pin_id) = record.instance_for_locale(viewer_locale) {
                row.pin_id = pin_id.to_string();
                row.locale = viewer_locale.to_string();
            }
        }
    }
}

/// Stable promotion of local results upward by at most `boost_positions`
/// each. Relative order within local results and within non-local results
/// is preserved.
pub fn local_boost(results: &mut Vec<RankedResult>, viewer_locale: &str, boost_positions: usize) {
    if boost_positions == 0 {
        return;
    }
    let keyed: Vec<(usize, RankedResult)> = results
        .drain(..)
        .enumerate()
        .map(|(i, row)| {
            let key = if row.locale == viewer_locale {
                i.saturating_sub(boost_positions)
            } else {
                i
            };
            (key, row)
        })
        .collect();
    let mut keyed = keyed;
    // Stable by construction: sort_by_key keeps original order on ties.
    keyed.sort_by_key(|(key, _)| *key);
    results.extend(keyed.into_iter().map(|(_, row)| row));
}

/// Per-source blend ratios plus per-locale overrides for the segmented
/// source.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BlendPolicy {
    /// source tag -> ratio; ratios are normalized over present sources.
    pub ratios: BTreeMap<String, f64>,
    /// viewer locale -> ratio handed to the segmented source.
    #[serde(default)]
    pub segmented_locale_ratio: BTreeMap<String, f64>,
}

impl BlendPolicy {
    pub fn uniform() -> BlendPolicy {
        let ratios = CandidateSource::ALL
            .iter()
            .map(|s| (s.tag().to_string(), 1.0 / CandidateSource::ALL.len() as f64))
            .collect();
        BlendPolicy {
            ratios,
            segmented_locale_ratio: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (tag, ratio) in &self.ratios {
            if CandidateSource::from_tag(tag).is_none() {
                return Err(Error::invalid(format!("unknown source tag {tag:?}")));
            }
            if !ratio.is_finite() || *ratio < 0.0 {
                return Err(Error::invalid("blend ratios must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<BlendPolicy> {
        let policy: BlendPolicy = serde_json::from_slice(bytes)?;
        policy.validate()?;
        Ok(policy)
    }

    /// Effective ratio per source for a viewer locale, normalized to 1.
    fn effective_ratios(&self, viewer_locale: Option<&str>) -> BTreeMap<CandidateSource, f64> {
        let mut ratios: BTreeMap<CandidateSource, f64> = BTreeMap::new();
        for (tag, ratio) in &self.ratios {
            if let Some(source) = CandidateSource::from_tag(tag) {
                ratios.insert(source, *ratio);
            }
        }
        if let Some(locale) = viewer_locale {
            if let Some(&r) = self.segmented_locale_ratio.get(locale) {
                ratios.insert(CandidateSource::Segmented, r);
            }
        }
        let total: f64 = ratios.values().sum();
        if total > 0.0 {
            for v in ratios.values_mut() {
                *v /= total;
            }
        }
        ratios
    }
}

/// Merge candidate sets: dedup by signature keeping the highest-priority
/// source, allocate the budget per the policy ratios (largest remainder,
/// unused quota waterfalls to the next source by priority), and interleave
/// proportionally. Deterministic per seed.
pub fn blend(
    sets: &[CandidateSet],
    policy: &BlendPolicy,
    budget: usize,
    viewer_locale: Option<&str>,
    seed: u64,
) -> Result<CandidateSet> {
    let Some(first) = sets.first() else {
        return Err(Error::invalid("blend needs at least one candidate set"));
    };
    let query = first.query.clone();
    if sets.iter().any(|s| s.query != query) {
        return Err(Error::invalid("blend inputs disagree on the query"));
    }
    if budget == 0 {
        return Ok(CandidateSet::empty(query, None));
    }

    // Dedup across sources by priority (source enum order), keeping each
    // source's internal candidate order.
    let mut owner: BTreeMap<&Signature, CandidateSource> = BTreeMap::new();
    for source in CandidateSource::ALL {
        for set in sets {
            for c in &set.entries {
                if c.source != source || c.signature == query {
                    continue;
                }
                owner.entry(&c.signature).or_insert(source);
            }
        }
    }
    let mut per_source: BTreeMap<CandidateSource, Vec<Candidate>> = BTreeMap::new();
    for set in sets {
        for c in &set.entries {
            if c.signature == query {
                continue;
            }
            if owner.get(&c.signature) == Some(&c.source)
                && !per_source
                    .get(&c.source)
                    .map(|v: &Vec<Candidate>| v.iter().any(|x| x.signature == c.signature))
                    .unwrap_or(false)
            {
                per_source.entry(c.source).or_default().push(c.clone());
            }
        }
    }

    let ratios = policy.effective_ratios(viewer_locale);
    let present: Vec<CandidateSource> = CandidateSource::ALL
        .into_iter()
        .filter(|s| per_source.get(s).map(|v| !v.is_empty()).unwrap_or(false))
        .collect();
    if present.is_empty() {
        return Ok(CandidateSet::empty(query, None));
    }

    // Quotas by largest remainder over the sources that actually have
    // candidates; remainder ties are broken by a seeded shuffle.
    let mut weights: Vec<(CandidateSource, f64)> = present
        .iter()
        .map(|s| (*s, ratios.get(s).copied().unwrap_or(0.0)))
        .collect();
    let wsum: f64 = weights.iter().map(|(_, w)| w).sum();
    if wsum <= 0.0 {
        for (_, w) in weights.iter_mut() {
            *w = 1.0 / present.len() as f64;
        }
    } else {
        for (_, w) in weights.iter_mut() {
            *w /= wsum;
        }
    }
    let mut quota: BTreeMap<CandidateSource, usize> = BTreeMap::new();
    let mut remainders: Vec<(f64, CandidateSource)> = Vec::new();
    let mut assigned = 0usize;
    for (source, w) in &weights {
        let exact = w * budget as f64;
        let floor = exact.floor() as usize;
        quota.insert(*source, floor);
        assigned += floor;
        remainders.push((exact - floor as f64, *source));
    }
    let mut rng = util::rng_from(seed);
    remainders.shuffle(&mut rng);
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut leftover = budget.saturating_sub(assigned);
    for (_, source) in &remainders {
        if leftover == 0 {
            break;
        }
        *quota.get_mut(source).expect("present") += 1;
        leftover -= 1;
    }
    // Waterfall unused quota (sources shorter than their quota) to others.
    loop {
        let mut spare = 0usize;
        for source in &present {
            let have = per_source[source].len();
            let q = quota[source];
            if q > have {
                spare += q - have;
                *quota.get_mut(source).expect("present") = have;
            }
        }
        if spare == 0 {
            break;
        }
        let mut placed = false;
        for source in &present {
            let have = per_source[source].len();
            let q = quota.get_mut(source).expect("present");
            if *q < have {
                let add = spare.min(have - *q);
                *q += add;
                spare -= add;
                placed = true;
                if spare == 0 {
                    break;
                }
            }
        }
        if !placed || spare == 0 {
            break;
        }
    }

    // Weighted-round-robin interleave by quota share.
    let mut cursors: BTreeMap<CandidateSource, usize> = BTreeMap::new();
    let mut credit: BTreeMap<CandidateSource, f64> = BTreeMap::new();
    let total_quota: usize = quota.values().sum();
    let mut entries: Vec<Candidate> = Vec::with_capacity(total_quota);
    while entries.len() < total_quota {
        let mut advanced = false;
        for source in &present {
            let q = quota[source];
            if q == 0 {
                continue;
            }
            let cursor = cursors.entry(*source).or_insert(0);
            if *cursor >= q {
                continue;
            }
            let c = credit.entry(*source).or_insert(0.0);
            *c += q as f64 / total_quota as f64;
            if *c >= (*cursor + 1) as f64 - 1e-9 || entries.len() + (q - *cursor) >= total_quota {
                entries.push(per_source[source][*cursor].clone());
                *cursor += 1;
                advanced = true;
                if entries.len() >= total_quota {
                    break;
                }
            }
        }
        if !advanced {
            // Flush remaining quotas in priority order.
            for source in &present {
                let q = quota[source];
                let cursor = cursors.entry(*source).or_insert(0);
                while *cursor < q && entries.len() < total_quota {
                    entries.push(per_source[source][*cursor].clone());
                    *cursor += 1;
                }
            }
        }
    }

    Ok(CandidateSet {
        query,
        entries,
        flag: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn pins_from_lines(lines: &[String]) -> PinCorpus {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        crate::corpus::load_pins(f.path()).unwrap()
    }

    fn pin_line(sig: &str, annotations: &[&str], vis: &[f64], locale: &str, pop: u64) -> String {
        let ann: Vec<String> = annotations.iter().map(|a| format!("\"{a}\"")).collect();
        let vis: Vec<String> = vis.iter().map(|v| format!("{v:?}")).collect();
        format!(
            r#"{{"sig":"{sig}","pin_ids":["p-{sig}-{locale}"],"annotations":[{}],"ann_emb":[],"cat_vec":[1.0],"vis_emb":[{}],"locale":"{locale}","popularity":{pop}}}"#,
            ann.join(","),
            vis.join(","),
        )
    }

    fn search_corpus() -> PinCorpus {
        pins_from_lines(&[
            pin_line("query", &["dog", "park", "ball"], &[1.0, 0.0], "en", 5),
            pin_line("full", &["dog", "park", "ball"], &[0.9, 0.1], "en", 4),
            pin_line("partial1", &["dog"], &[0.0, 1.0], "en", 3),
            pin_line("partial2", &["park"], &[0.5, 0.5], "en", 2),
            pin_line("unrelated", &["cat"], &[0.1, 0.9], "en", 1),
        ])
    }

    #[test]
    fn search_empty_annotations_yields_empty() {
        let pins = pins_from_lines(&[
            pin_line("bare", &[], &[1.0, 0.0], "en", 1),
            pin_line("other", &["x"], &[0.0, 1.0], "en", 1),
        ]);
        let index = AnnotationIndex::build(&pins);
        let set = search_candidates(&index, pins.get(&"bare".into()).unwrap(), 5);
        assert!(set.is_empty());
    }

    #[test]
    fn search_full_overlap_ranks_first() {
        let pins = search_corpus();
        let index = AnnotationIndex::build(&pins);
        let set = search_candidates(&index, pins.get(&"query".into()).unwrap(), 10);
        assert_eq!(set.entries[0].signature.as_str(), "full");
        // idf sums check out by hand: full shares 3 tokens, partials 1.
        let expected: f64 = ["dog", "park", "ball"].iter().map(|t| index.idf(t)).sum();
        assert!((set.entries[0].generator_score - expected).abs() < 1e-12);
        assert!(set.entries.iter().all(|c| c.signature.as_str() != "query"));
    }

    #[test]
    fn search_k_larger_than_matches_returns_all() {
        let pins = search_corpus();
        let index = AnnotationIndex::build(&pins);
        let set = search_candidates(&index, pins.get(&"query".into()).unwrap(), 100);
        assert_eq!(set.len(), 3); // unrelated shares no token
    }

    #[test]
    fn precomputed_top_list_is_used() {
        let pins = search_corpus();
        let mut index = AnnotationIndex::build(&pins);
        let tokens: Vec<String> = ["ball", "dog", "park"].iter().map(|s| s.to_string()).collect();
        index.precompute_top(&[tokens], 10);
        let set = search_candidates(&index, pins.get(&"query".into()).unwrap(), 2);
        assert_eq!(set.entries[0].signature.as_str(), "full");
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn visual_near_duplicate_branch() {
        let pins = search_corpus();
        let query = pins.get(&"query".into()).unwrap();
        // "full" is not quite a duplicate (cos < 0.99 for [1,0] vs [.9,.1]);
        // make an exact one.
        let pins2 = pins_from_lines(&[
            pin_line("query", &[], &[1.0, 0.0], "en", 5),
            pin_line("twin", &[], &[2.0, 0.0], "en", 4),
            pin_line("other", &[], &[0.0, 1.0], "en", 1),
        ]);
        let set = visual_candidates(&pins2, pins2.get(&"query".into()).unwrap(), 5, 0.99, |dup| {
            assert_eq!(dup.as_str(), "twin");
            vec![("delegated".into(), 0.7)]
        });
        assert_eq!(set.len(), 1);
        assert_eq!(set.entries[0].signature.as_str(), "delegated");
        // And the plain path for the original corpus.
        let plain = visual_candidates(&pins, query, 2, 0.999999, |_| vec![]);
        assert_eq!(plain.entries[0].signature.as_str(), "full");
    }

    #[test]
    fn visual_zero_embedding_flagged() {
        let pins = pins_from_lines(&[
            pin_line("zero", &[], &[0.0, 0.0], "en", 1),
            pin_line("one", &[], &[1.0, 0.0], "en", 1),
        ]);
        let set = visual_candidates(&pins, pins.get(&"zero".into()).unwrap(), 5, 0.99, |_| vec![]);
        assert!(set.is_empty());
        assert_eq!(set.flag, Some(CandidateFlag::DegenerateQuery));
    }

    #[test]
    fn visual_topk_ordering() {
        let pins = pins_from_lines(&[
            pin_line("q", &[], &[1.0, 0.0], "en", 1),
            pin_line("a", &[], &[0.9, (1.0f64 - 0.81).sqrt()], "en", 1), // cos .9
            pin_line("b", &[], &[0.5, (1.0f64 - 0.25).sqrt()], "en", 1), // cos .5
            pin_line("c", &[], &[0.1, (1.0f64 - 0.01).sqrt()], "en", 1), // cos .1
        ]);
        let set = visual_candidates(&pins, pins.get(&"q".into()).unwrap(), 2, 0.99, |_| vec![]);
        let sigs: Vec<&str> = set.entries.iter().map(|c| c.signature.as_str()).collect();
        assert_eq!(sigs, vec!["a", "b"]);
    }

    fn bilingual_world() -> (PinCorpus, BoardCorpus) {
        let mut lines = vec![
            pin_line("en1", &[], &[1.0, 0.0], "en", 5),
            pin_line("en2", &[], &[1.0, 0.0], "en", 4),
            pin_line("fr1", &[], &[1.0, 0.0], "fr", 3),
            pin_line("fr2", &[], &[1.0, 0.0], "fr", 2),
        ];
        // "both" has instances in en and fr.
        lines.push(pin_line("both", &[], &[1.0, 0.0], "en", 6));
        lines.push(pin_line("both", &[], &[1.0, 0.0], "fr", 6));
        let pins = pins_from_lines(&lines);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"board_id":"mixed","title":[],"locale":"en","pins":["en1","en2","fr1","both"]}}"#
        )
        .unwrap();
        writeln!(
            f,
            r#"{{"board_id":"frb","title":[],"locale":"fr","pins":["fr1","fr2","both"]}}"#
        )
        .unwrap();
        let boards = crate::corpus::load_boards(f.path(), &pins).unwrap();
        (pins, boards)
    }

    #[test]
    fn segmented_zero_locale_empty() {
        let (pins, boards) = bilingual_world();
        let set = segmented_candidates(
            &boards,
            &pins,
            "de",
            &"en1".into(),
            10,
            &GraphConfig::default(),
            1,
        )
        .unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn segmented_filters_mixed_board_to_locale() {
        let (pins, boards) = bilingual_world();
        let set = segmented_candidates(
            &boards,
            &pins,
            "fr",
            &"fr1".into(),
            10,
            &GraphConfig::default(),
            1,
        )
        .unwrap();
        assert!(!set.is_empty());
        for c in &set.entries {
            let rec = pins.get(&c.signature).unwrap();
            assert!(rec.locale_instances.contains_key("fr"), "{:?}", c.signature);
            assert_eq!(c.source, CandidateSource::Segmented);
        }
    }

    #[test]
    fn segmented_single_cooccurring_local_pin() {
        let (pins, boards) = bilingual_world();
        // On the fr-filtered graph, fr2 co-occurs only via board "frb" with
        // fr1 and both.
        let set = segmented_candidates(
            &boards,
            &pins,
            "fr",
            &"fr2".into(),
            10,
            &GraphConfig::default(),
            7,
        )
        .unwrap();
        let sigs: BTreeSet<&str> = set.entries.iter().map(|c| c.signature.as_str()).collect();
        assert_eq!(sigs, BTreeSet::from(["fr1", "both"]));
    }

    #[test]
    fn segmented_wildcard_equals_cooccurrence() {
        let (pins, boards) = bilingual_world();
        let cfg = GraphConfig::default();
        let graph = build_graph(&boards, &pins, &cfg).unwrap();
        let base = board_cooccurrence(&graph, &pins, &"en1".into(), 10, 99);
        let seg = segmented_candidates(&boards, &pins, "*", &"en1".into(), 10, &cfg, 99).unwrap();
        let base_sigs: Vec<_> = base.entries.iter().map(|c| (&c.signature, c.generator_score)).collect();
        let seg_sigs: Vec<_> = seg.entries.iter().map(|c| (&c.signature, c.generator_score)).collect();
        assert_eq!(base_sigs, seg_sigs);
    }

    fn rows(entries: &[(&str, f64, &str)]) -> Vec<RankedResult> {
        entries
            .iter()
            .map(|(sig, score, locale)| RankedResult {
                signature: (*sig).into(),
                score: *score,
                pin_id: format!("p-{sig}-{locale}"),
                locale: locale.to_string(),
            })
            .collect()
    }

    #[test]
    fn local_swap_replaces_instance_only() {
        let (pins, _) = bilingual_world();
        let mut results = rows(&[("both", 2.0, "en"), ("en1", 1.0, "en")]);
        let before_sigs: Vec<Signature> = results.iter().map(|r| r.signature.clone()).collect();
        local_swap(&mut results, "fr", &pins);
        let after_sigs: Vec<Signature> = results.iter().map(|r| r.signature.clone()).collect();
        assert_eq!(before_sigs, after_sigs);
        assert_eq!(results[0].locale, "fr");
        assert_eq!(results[0].pin_id, "p-both-fr");
        // en1 has no fr instance: untouched.
        assert_eq!(results[1].locale, "en");
    }

    #[test]
    fn local_swap_identity_when_all_local() {
        let (pins, _) = bilingual_world();
        let mut results = rows(&[("fr1", 2.0, "fr"), ("fr2", 1.0, "fr")]);
        let before = results.clone();
        local_swap(&mut results, "fr", &pins);
        assert_eq!(results, before);
    }

    #[test]
    fn local_boost_preserves_group_order() {
        let mut results = rows(&[
            ("a", 5.0, "en"),
            ("b", 4.0, "en"),
            ("c", 3.0, "fr"),
            ("d", 2.0, "en"),
            ("e", 1.0, "fr"),
        ]);
        local_boost(&mut results, "fr", 2);
        let order: Vec<&str> = results.iter().map(|r| r.signature.as_str()).collect();
        // fr rows moved up by at most 2, en rows keep relative order.
        let fr_positions: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == "c" || **s == "e")
            .map(|(i, _)| i)
            .collect();
        assert!(fr_positions[0] < 2);
        let en_order: Vec<&str> = order
            .iter()
            .copied()
            .filter(|s| ["a", "b", "d"].contains(s))
            .collect();
        assert_eq!(en_order, vec!["a", "b", "d"]);
        let fr_order: Vec<&str> = order
            .iter()
            .copied()
            .filter(|s| ["c", "e"].contains(s))
            .collect();
        assert_eq!(fr_order, vec!["c", "e"]);
    }

    fn candidate_set(query: &str, source: CandidateSource, sigs: &[&str]) -> CandidateSet {
        CandidateSet {
            query: query.into(),
            entries: sigs
                .iter()
                .enumerate()
                .map(|(i, sig)| Candidate {
                    signature: (*sig).into(),
                    source,
                    generator_score: 1.0 - i as f64 * 0.01,
                })
                .collect(),
            flag: None,
        }
    }

    #[test]
    fn blend_single_source_truncates() {
        let set = candidate_set("q", CandidateSource::Walk, &["a", "b", "c", "d"]);
        let out = blend(&[set], &BlendPolicy::uniform(), 2, None, 1).unwrap();
        assert_eq!(out.len(), 2);
        let sigs: Vec<&str> = out.entries.iter().map(|c| c.signature.as_str()).collect();
        assert_eq!(sigs, vec!["a", "b"]);
    }

    #[test]
    fn blend_fifty_fifty_split() {
        let walk = candidate_set("q", CandidateSource::Walk, &["w1", "w2", "w3", "w4", "w5", "w6"]);
        let search = candidate_set("q", CandidateSource::Search, &["s1", "s2", "s3", "s4", "s5", "s6"]);
        let mut policy = BlendPolicy::default();
        policy.ratios.insert("walk".into(), 0.5);
        policy.ratios.insert("search".into(), 0.5);
        let out = blend(&[walk, search], &policy, 10, None, 3).unwrap();
        assert_eq!(out.len(), 10);
        let walks = out
            .entries
            .iter()
            .filter(|c| c.source == CandidateSource::Walk)
            .count();
        assert_eq!(walks, 5);
    }

    #[test]
    fn blend_dedup_keeps_higher_priority_source() {
        let walk = candidate_set("q", CandidateSource::Walk, &["dup", "w2"]);
        let search = candidate_set("q", CandidateSource::Search, &["dup", "s2"]);
        let out = blend(&[walk, search], &BlendPolicy::uniform(), 10, None, 5).unwrap();
        let dup_entries: Vec<&Candidate> = out
            .entries
            .iter()
            .filter(|c| c.signature.as_str() == "dup")
            .collect();
        assert_eq!(dup_entries.len(), 1);
        assert_eq!(dup_entries[0].source, CandidateSource::Walk);
    }

    #[test]
    fn blend_never_contains_query_and_respects_budget() {
        let walk = candidate_set("q", CandidateSource::Walk, &["q", "a", "b"]);
        let out = blend(&[walk], &BlendPolicy::uniform(), 10, None, 0).unwrap();
        assert!(out.entries.iter().all(|c| c.signature.as_str() != "q"));
        assert!(out.len() <= 10);
        let mut seen = BTreeSet::new();
        for c in &out.entries {
            assert!(seen.insert(c.signature.clone()), "duplicate in blend output");
        }
    }
}
