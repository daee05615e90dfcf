//! Memorized engagement per (query, result) pair, corrected for position
//! bias with clicks-over-expected-clicks generalized to all actions.
//!
//! Every impression of a result at (platform, rank) contributes the global
//! prior rate for that slot to the pair's expected counts; observed actions
//! increment the raw counts. The Memboost score is the log of the
//! additively smoothed ratio of beta-weighted actions to expected actions:
//! zero-centered, positive when a pair outperforms its display positions.
//!
//! Accumulation is a single-writer batch; the resulting store is immutable
//! and the scoring helpers are pure.

use crate::corpus::{Action, EngagementLog, Signature};
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// The four engagement actions, in beta order (click, long click, closeup,
/// save).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngagementKind {
    Click,
    LongClick,
    Closeup,
    Save,
}

impl EngagementKind {
    pub const ALL: [EngagementKind; 4] = [
        EngagementKind::Click,
        EngagementKind::LongClick,
        EngagementKind::Closeup,
        EngagementKind::Save,
    ];

    pub fn from_action(action: Action) -> Option<EngagementKind> {
        match action {
            Action::Click => Some(EngagementKind::Click),
            Action::LongClick => Some(EngagementKind::LongClick),
            Action::Closeup => Some(EngagementKind::Closeup),
            Action::Save => Some(EngagementKind::Save),
            Action::Impression => None,
        }
    }

    fn index(self) -> usize {
        match self {
            EngagementKind::Click => 0,
            EngagementKind::LongClick => 1,
            EngagementKind::Closeup => 2,
            EngagementKind::Save => 3,
        }
    }
}

/// Global per-(platform, rank) action rates. Ranks past the last observed
/// rank clamp to its rate; unobserved interior ranks are linearly
/// interpolated from their nearest observed neighbors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionPriors {
    platforms: BTreeMap<String, PlatformPriors>,
}

#[derive(Debug, Clone, PartialEq)]
struct PlatformPriors {
    /// rates[action][rank]
    rates: [Vec<f64>; 4],
}

impl PositionPriors {
    pub fn rate(&self, kind: EngagementKind, platform: &str, rank: u32) -> f64 {
        let Some(p) = self.platforms.get(platform) else {
            return 0.0;
        };
        let rates = &p.rates[kind.index()];
        if rates.is_empty() {
            return 0.0;
        }
        let idx = (rank as usize).min(rates.len() - 1);
        rates[idx]
    }

    pub fn max_rank(&self, platform: &str) -> Option<u32> {
        self.platforms
            .get(platform)
            .map(|p| (p.rates[0].len().saturating_sub(1)) as u32)
    }

    pub fn platforms(&self) -> impl Iterator<Item = &str> {
        self.platforms.keys().map(|s| s.as_str())
    }
}

/// Empirical action rate per (platform, rank): actions / impressions at
/// that slot.
pub fn compute_priors(log: &EngagementLog) -> PositionPriors {
    let mut impressions: BTreeMap<(String, u32), u64> = BTreeMap::new();
    let mut actions: BTreeMap<(String, u32), [u64; 4]> = BTreeMap::new();
    for event in &log.events {
        let key = (event.platform.clone(), event.rank);
        match EngagementKind::from_action(event.action) {
            None => {
                *impressions.entry(key).or_insert(0) += 1;
            }
            Some(kind) => {
                actions.entry(key).or_insert([0; 4])[kind.index()] += 1;
            }
        }
    }
    let mut platforms: BTreeMap<String, PlatformPriors> = BTreeMap::new();
    let platform_names: std::collections::BTreeSet<String> =
        impressions.keys().map(|(p, _)| p.clone()).collect();
    for platform in platform_names {
        let max_rank = impressions
            .keys()
            .filter(|(p, _)| *p == platform)
            .map(|(_, r)| *r)
            .max()
            .unwrap_or(0) as usize;
        let mut rates: [Vec<f64>; 4] = std::array::from_fn(|_| vec![f64::NAN; max_rank + 1]);
        for rank in 0..=max_rank {
            let key = (platform.clone(), rank as u32);
            if let Some(&imps) = impressions.get(&key) {
                let acted = actions.get(&key).copied().unwrap_or([0; 4]);
                for (a, rate_row) in rates.iter_mut().enumerate() {
                    rate_row[rank] = acted[a] as f64 / imps as f64;
                }
            }
        }
        for rate_row in &mut rates {
            interpolate_gaps(rate_row);
        }
        platforms.insert(platform, PlatformPriors { rates });
    }
    PositionPriors { platforms }
}

/// Fill NaN gaps by linear interpolation between observed neighbors; the
/// ends copy the nearest observed value.
fn interpolate_gaps(rates: &mut [f64]) {
    let observed: Vec<usize> = (0..rates.len()).filter(|&i| !rates[i].is_nan()).collect();
    if observed.is_empty() {
        for r in rates.iter_mut() {
            *r = 0.0;
        }
        return;
    }
    for i in 0..rates.len() {
        if !rates[i].is_nan() {
            continue;
        }
        let below = observed.iter().rev().find(|&&o| o < i).copied();
        let above = observed.iter().find(|&&o| o > i).copied();
        rates[i] = match (below, above) {
            (Some(lo), Some(hi)) => {
                let t = (i - lo) as f64 / (hi - lo) as f64;
                rates[lo] + t * (rates[hi] - rates[lo])
            }
            (Some(lo), None) => rates[lo],
            (None, Some(hi)) => rates[hi],
            (None, None) => 0.0,
        };
    }
}

/// Raw and expected action counts for one (query, result) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MemboostStats {
    pub clicks: u64,
    pub long_clicks: u64,
    pub closeups: u64,
    pub saves: u64,
    pub expected_clicks: f64,
    pub expected_long_clicks: f64,
    pub expected_closeups: f64,
    pub expected_saves: f64,
}

impl MemboostStats {
    pub fn count(&self, kind: EngagementKind) -> u64 {
        match kind {
            EngagementKind::Click => self.clicks,
            EngagementKind::LongClick => self.long_clicks,
            EngagementKind::Closeup => self.closeups,
            EngagementKind::Save => self.saves,
        }
    }

    pub fn expected(&self, kind: EngagementKind) -> f64 {
        match kind {
            EngagementKind::Click => self.expected_clicks,
            EngagementKind::LongClick => self.expected_long_clicks,
            EngagementKind::Closeup => self.expected_closeups,
            EngagementKind::Save => self.expected_saves,
        }
    }
}

/// Action weights, smoothing, blend weight, and insertion count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemboostParams {
    /// (click, long_click, closeup, save) weights.
    pub beta: [f64; 4],
    /// Additive smoothing, must be > 0.
    pub alpha: f64,
    /// Score blend weight in MemboostedScore.
    pub gamma: f64,
    /// Insertion count.
    pub insert_n: usize,
}

impl Default for MemboostParams {
    fn default() -> Self {
        MemboostParams {
            beta: [1.0, 2.0, 0.5, 5.0],
            alpha: 1.0,
            gamma: 1.0,
            insert_n: 3,
        }
    }
}

impl MemboostParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(Error::invalid("memboost alpha must be > 0"));
        }
        if self.beta.iter().any(|b| *b < 0.0 || !b.is_finite()) {
            return Err(Error::invalid("memboost betas must be non-negative"));
        }
        Ok(())
    }
}

/// Sorted (query, result) -> stats table built from a log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemboostStore {
    pairs: BTreeMap<Signature, BTreeMap<Signature, MemboostStats>>,
    len: usize,
}

impl MemboostStore {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, query: &Signature, result: &Signature) -> Option<&MemboostStats> {
        self.pairs.get(query).and_then(|m| m.get(result))
    }

    /// All scored results for one query, in signature order.
    pub fn for_query(
        &self,
        query: &Signature,
    ) -> impl Iterator<Item = (&Signature, &MemboostStats)> {
        self.pairs.get(query).into_iter().flat_map(|m| m.iter())
    }

    pub fn queries(&self) -> impl Iterator<Item = &Signature> {
        self.pairs.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Signature, &Signature, &MemboostStats)> {
        self.pairs
            .iter()
            .flat_map(|(q, m)| m.iter().map(move |(r, s)| (q, r, s)))
    }
}

/// One pass over impressions adds prior rates into expected counts; one
/// pass over actions increments raw counts. Pairs never shown stay absent.
pub fn accumulate(log: &EngagementLog, priors: &PositionPriors) -> MemboostStore {
    let mut store = MemboostStore::default();
    for event in &log.events {
        if event.action != Action::Impression {
            continue;
        }
        let stats = store
            .pairs
            .entry(event.query.clone())
            .or_default()
            .entry(event.result.clone())
            .or_default();
        stats.expected_clicks += priors.rate(EngagementKind::Click, &event.platform, event.rank);
        stats.expected_long_clicks +=
            priors.rate(EngagementKind::LongClick, &event.platform, event.rank);
        stats.expected_closeups +=
            priors.rate(EngagementKind::Closeup, &event.platform, event.rank);
        stats.expected_saves += priors.rate(EngagementKind::Save, &event.platform, event.rank);
    }
    for event in &log.events {
        let Some(kind) = EngagementKind::from_action(event.action) else {
            continue;
        };
        // Impression-less pairs were rejected at ingestion; skipping keeps
        // counts <= impressions even on hand-built logs.
        let Some(stats) = store
            .pairs
            .get_mut(&event.query)
            .and_then(|m| m.get_mut(&event.result))
        else {
            continue;
        };
        match kind {
            EngagementKind::Click => stats.clicks += 1,
            EngagementKind::LongClick => stats.long_clicks += 1,
            EngagementKind::Closeup => stats.closeups += 1,
            EngagementKind::Save => stats.saves += 1,
        }
    }
    store.len = store.pairs.values().map(|m| m.len()).sum();
    store
}

/// log((beta . counts + alpha) / (beta . expected + alpha)).
pub fn mb_score(stats: &MemboostStats, params: &MemboostParams) -> Result<f64> {
    params.validate()?;
    let actions = params.beta[0] * stats.clicks as f64
        + params.beta[1] * stats.long_clicks as f64
        + params.beta[2] * stats.closeups as f64
        + params.beta[3] * stats.saves as f64;
    let expected = params.beta[0] * stats.expected_clicks
        + params.beta[1] * stats.expected_long_clicks
        + params.beta[2] * stats.expected_closeups
        + params.beta[3] * stats.expected_saves;
    Ok(((actions + params.alpha) / (expected + params.alpha)).ln())
}

/// Score adjustment: base + gamma * MB.
pub fn memboosted_score(base_score: f64, mb: f64, gamma: f64) -> f64 {
    base_score + gamma * mb
}

use crate::ranking::RankedResult;

/// Re-insert the query's top-n Memboost pairs missing from the ranked list.
/// Inserted rows carry combined score gamma * MB and are merged by
/// descending score; existing rows keep their relative order. The list is
/// not re-truncated, so it may grow by up to n.
pub fn memboost_insert(
    ranked: Vec<RankedResult>,
    store: &MemboostStore,
    params: &MemboostParams,
    query: &Signature,
    pins: &crate::corpus::PinCorpus,
) -> Result<Vec<RankedResult>> {
    params.validate()?;
    if params.insert_n == 0 {
        return Ok(ranked);
    }
    let present: std::collections::BTreeSet<&Signature> =
        ranked.iter().map(|r| &r.signature).collect();
    let mut scored: Vec<(f64, &Signature)> = Vec::new();
    for (result, stats) in store.for_query(query) {
        if present.contains(result) || result == query {
            continue;
        }
        scored.push((mb_score(stats, params)?, result));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    scored.truncate(params.insert_n);
    if scored.is_empty() {
        return Ok(ranked);
    }
    let mut pending: Vec<RankedResult> = scored
        .into_iter()
        .map(|(mb, sig)| {
            let (pin_id, locale) = pins
                .get(sig)
                .map(|r| (r.primary_instance().to_string(), r.locale.clone()))
                .unwrap_or_default();
            RankedResult {
                signature: sig.clone(),
                score: memboosted_score(0.0, mb, params.gamma),
                pin_id,
                locale,
            }
        })
        .collect();
    pending.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.signature.cmp(&b.signature))
    });

    let mut merged = Vec::with_capacity(ranked.len() + pending.len());
    let mut pending = pending.into_iter().peekable();
    for row in ranked {
        while let Some(p) = pending.peek() {
            if p.score > row.score {
                merged.push(pending.next().unwrap());
            } else {
                break;
            }
        }
        merged.push(row);
    }
    merged.extend(pending);
    Ok(merged)
}

/// Feature fragment width: 4 counts, 4 expected counts, 4 smoothed log
/// ratios.
pub const FEATURE_FRAGMENT_LEN: usize = 12;

/// The ranking-feature view of a pair: raw counts, expected counts, and a
/// per-action smoothed log ratio. Unseen pairs emit all zeros (the ratios
/// are log(alpha/alpha)).
pub fn memboost_features(
    store: &MemboostStore,
    params: &MemboostParams,
    query: &Signature,
    result: &Signature,
) -> [f64; FEATURE_FRAGMENT_LEN] {
    let stats = store.get(query, result).copied().unwrap_or_default();
    features_from_stats(&stats, params)
}

pub fn features_from_stats(
    stats: &MemboostStats,
    params: &MemboostParams,
) -> [f64; FEATURE_FRAGMENT_LEN] {
    let mut out = [0.0; FEATURE_FRAGMENT_LEN];
    for (i, kind) in EngagementKind::ALL.into_iter().enumerate() {
        out[i] = stats.count(kind) as f64;
        out[4 + i] = stats.expected(kind);
        out[8 + i] =
            ((stats.count(kind) as f64 + params.alpha) / (stats.expected(kind) + params.alpha)).ln();
    }
    out
}

const STORE_MAGIC: &[u8; 4] = b"RRMB";
const STORE_VERSION: u16 = 1;
const MAX_KEY_LEN: usize = 4096;
const MAX_RECORDS: u64 = 1 << 24;

/// Persist the store: versioned header plus records sorted by
/// (query, result).
pub fn write_store(store: &MemboostStore, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(STORE_MAGIC)?;
    w.write_u16::<LittleEndian>(STORE_VERSION)?;
    w.write_u64::<LittleEndian>(store.len() as u64)?;
    for (query, result, stats) in store.iter() {
        write_key(&mut w, query.as_str())?;
        write_key(&mut w, result.as_str())?;
        w.write_u64::<LittleEndian>(stats.clicks)?;
        w.write_u64::<LittleEndian>(stats.long_clicks)?;
        w.write_u64::<LittleEndian>(stats.closeups)?;
        w.write_u64::<LittleEndian>(stats.saves)?;
        w.write_f64::<LittleEndian>(stats.expected_clicks)?;
        w.write_f64::<LittleEndian>(stats.expected_long_clicks)?;
        w.write_f64::<LittleEndian>(stats.expected_closeups)?;
        w.write_f64::<LittleEndian>(stats.expected_saves)?;
    }
    w.flush()?;
    Ok(())
}

fn write_key<W: Write>(w: &mut W, key: &str) -> Result<()> {
    let bytes = key.as_bytes();
    if bytes.len() > MAX_KEY_LEN {
        return Err(Error::invalid("signature too long for store"));
    }
    w.write_u16::<LittleEndian>(bytes.len() as u16)?;
    w.write_all(bytes)?;
    Ok(())
}

pub fn read_store(path: &Path) -> Result<MemboostStore> {
    let file = std::fs::File::open(path)?;
    read_store_from(BufReader::new(file))
}

/// Decode a store from any reader. Strictly validating: bad magic, wrong
/// version, unsorted or duplicate keys, non-finite or negative expected
/// counts, and truncation all fail closed.
pub fn read_store_from<R: Read>(mut r: R) -> Result<MemboostStore> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::corrupt("store: short magic"))?;
    if &magic != STORE_MAGIC {
        return Err(Error::corrupt("store: bad magic"));
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|_| Error::corrupt("store: short header"))?;
    if version != STORE_VERSION {
        return Err(Error::corrupt("store: unsupported version"));
    }
    let count = r
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::corrupt("store: short header"))?;
    if count > MAX_RECORDS {
        return Err(Error::corrupt("store: record count exceeds cap"));
    }
    let mut store = MemboostStore::default();
    let mut last_key: Option<(String, String)> = None;
    for _ in 0..count {
        let query = read_key(&mut r)?;
        let result = read_key(&mut r)?;
        let key = (query.clone(), result.clone());
        if let Some(last) = &last_key {
            if *last >= key {
                return Err(Error::corrupt("store: records not strictly sorted"));
            }
        }
        last_key = Some(key);
        let mut stats = MemboostStats {
            clicks: read_u64(&mut r)?,
            long_clicks: read_u64(&mut r)?,
            closeups: read_u64(&mut r)?,
            saves: read_u64(&mut r)?,
            ..Default::default()
        };
        stats.expected_clicks = read_expected(&mut r)?;
        stats.expected_long_clicks = read_expected(&mut r)?;
        stats.expected_closeups = read_expected(&mut r)?;
        stats.expected_saves = read_expected(&mut r)?;
        store
            .pairs
            .entry(Signature(query))
            .or_default()
            .insert(Signature(result), stats);
    }
    store.len = store.pairs.values().map(|m| m.len()).sum();
    Ok(store)
}

fn read_key<R: Read>(r: &mut R) -> Result<String> {
    let len = r
        .read_u16::<LittleEndian>()
        .map_err(|_| Error::corrupt("store: short key length"))? as usize;
    if len == 0 || len > MAX_KEY_LEN {
        return Err(Error::corrupt("store: bad key length"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::corrupt("store: short key"))?;
    String::from_utf8(buf).map_err(|_| Error::corrupt("store: key not utf-8"))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|_| Error::corrupt("store: short record"))
}

fn read_expected<R: Read>(r: &mut R) -> Result<f64> {
    let v = r
        .read_f64::<LittleEndian>()
        .map_err(|_| Error::corrupt("store: short record"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::corrupt("store: invalid expected count"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_engagement;
    use std::io::Write as _;

    fn log_from(lines: &[String]) -> EngagementLog {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        load_engagement(f.path()).unwrap()
    }

    fn event(
        session: &str,
        query: &str,
        result: &str,
        action: &str,
        platform: &str,
        rank: u32,
        ts: i64,
    ) -> String {
        format!(
            r#"{{"session":"{session}","user":"u","query":"{query}","result":"{result}","action":"{action}","platform":"{platform}","rank":{rank},"ts":{ts}}}"#
        )
    }

    #[test]
    fn prior_is_clicks_over_impressions() {
        let mut lines = Vec::new();
        for i in 0..10 {
            lines.push(event(&format!("s{i}"), "q", "r", "impression", "web", 0, i));
        }
        lines.push(event("s0", "q", "r", "click", "web", 0, 100));
        let log = log_from(&lines);
        let priors = compute_priors(&log);
        assert!((priors.rate(EngagementKind::Click, "web", 0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn absent_action_has_zero_rates() {
        let lines = vec![event("s0", "q", "r", "impression", "web", 0, 1)];
        let log = log_from(&lines);
        let priors = compute_priors(&log);
        assert_eq!(priors.rate(EngagementKind::Save, "web", 0), 0.0);
    }

    #[test]
    fn unseen_rank_clamps_to_last_observed() {
        let mut lines = vec![
            event("s0", "q", "r", "impression", "web", 0, 1),
            event("s0", "q", "r2", "impression", "web", 1, 1),
        ];
        lines.push(event("s0", "q", "r2", "click", "web", 1, 2));
        let log = log_from(&lines);
        let priors = compute_priors(&log);
        let last = priors.rate(EngagementKind::Click, "web", 1);
        assert_eq!(priors.rate(EngagementKind::Click, "web", 99), last);
    }

    #[test]
    fn interior_gap_interpolates() {
        let mut rates = vec![0.4, f64::NAN, f64::NAN, 0.1];
        interpolate_gaps(&mut rates);
        assert!((rates[1] - 0.3).abs() < 1e-12);
        assert!((rates[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn accumulate_single_impression_and_click() {
        // Separate calibration sessions pin the click prior at 0.1.
        let mut lines = Vec::new();
        for i in 0..10 {
            lines.push(event(&format!("c{i}"), "cal", "x", "impression", "web", 0, i));
        }
        lines.push(event("c0", "cal", "x", "click", "web", 0, 50));
        lines.push(event("s", "q", "r", "impression", "web", 0, 100));
        lines.push(event("s", "q", "r", "click", "web", 0, 101));
        let log = log_from(&lines);
        let priors = compute_priors(&log);
        let store = accumulate(&log, &priors);
        let stats = store.get(&"q".into(), &"r".into()).unwrap();
        assert_eq!(stats.clicks, 1);
        // 11 impressions, 2 clicks at (web,0): prior = 2/11.
        assert!((stats.expected_clicks - 2.0 / 11.0).abs() < 1e-12);
        assert!(store.get(&"q".into(), &"ghost".into()).is_none());
    }

    #[test]
    fn accumulate_sums_two_impressions() {
        let lines = vec![
            event("a", "q", "r", "impression", "web", 0, 1),
            event("a", "q", "x", "impression", "web", 1, 1),
            event("a", "q", "x", "click", "web", 1, 2),
            event("b", "q", "r", "impression", "web", 1, 3),
        ];
        let log = log_from(&lines);
        let priors = compute_priors(&log);
        // rate(web,0)=0, rate(web,1)=1/2.
        let store = accumulate(&log, &priors);
        let stats = store.get(&"q".into(), &"r".into()).unwrap();
        assert!((stats.expected_clicks - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mb_score_zero_centered() {
        let params = MemboostParams::default();
        let zero = MemboostStats::default();
        assert_eq!(mb_score(&zero, &params).unwrap(), 0.0);
        let balanced = MemboostStats {
            clicks: 2,
            expected_clicks: 2.0,
            saves: 1,
            expected_saves: 1.0,
            ..Default::default()
        };
        assert!(mb_score(&balanced, &params).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mb_score_hand_computed() {
        let params = MemboostParams {
            beta: [1.0, 0.0, 0.0, 0.0],
            alpha: 1.0,
            ..Default::default()
        };
        let stats = MemboostStats {
            clicks: 1,
            expected_clicks: 0.1,
            ..Default::default()
        };
        let score = mb_score(&stats, &params).unwrap();
        assert!((score - (2.0f64 / 1.1).ln()).abs() < 1e-15);
        assert!((score - 0.5978).abs() < 1e-4);
    }

    #[test]
    fn alpha_must_be_positive() {
        let params = MemboostParams {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(mb_score(&MemboostStats::default(), &params).is_err());
    }

    #[test]
    fn memboosted_score_cases() {
        assert_eq!(memboosted_score(3.0, 0.7, 0.0), 3.0);
        assert_eq!(memboosted_score(1.0, 0.5, 2.0), 2.0);
        assert_eq!(memboosted_score(3.0, 0.0, 5.0), 3.0);
    }

    #[test]
    fn mb_score_monotone_in_counts() {
        let params = MemboostParams::default();
        let base = MemboostStats {
            clicks: 2,
            expected_clicks: 1.0,
            ..Default::default()
        };
        let more = MemboostStats {
            clicks: 3,
            ..base
        };
        let more_expected = MemboostStats {
            expected_clicks: 2.0,
            ..base
        };
        let s0 = mb_score(&base, &params).unwrap();
        assert!(mb_score(&more, &params).unwrap() > s0);
        assert!(mb_score(&more_expected, &params).unwrap() < s0);
    }

    #[test]
    fn doubling_counts_moves_toward_unsmoothed_coec() {
        let params = MemboostParams {
            beta: [1.0, 0.0, 0.0, 0.0],
            alpha: 1.0,
            ..Default::default()
        };
        let base = MemboostStats {
            clicks: 3,
            expected_clicks: 1.0,
            ..Default::default()
        };
        let doubled = MemboostStats {
            clicks: 6,
            expected_clicks: 2.0,
            ..Default::default()
        };
        let raw = (3.0f64 / 1.0).ln();
        let s1 = mb_score(&base, &params).unwrap();
        let s2 = mb_score(&doubled, &params).unwrap();
        assert_eq!(s1.signum(), s2.signum());
        assert!((raw - s2).abs() < (raw - s1).abs());
    }

    fn pins_with(sigs: &[&str]) -> crate::corpus::PinCorpus {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for sig in sigs {
            writeln!(
                f,
                r#"{{"sig":"{sig}","pin_ids":["p-{sig}"],"annotations":[],"ann_emb":[],"cat_vec":[1.0],"vis_emb":[],"locale":"en","popularity":1}}"#
            )
            .unwrap();
        }
        crate::corpus::load_pins(f.path()).unwrap()
    }

    fn ranked(rows: &[(&str, f64)]) -> Vec<RankedResult> {
        rows.iter()
            .map(|(sig, score)| RankedResult {
                signature: (*sig).into(),
                score: *score,
                pin_id: format!("p-{sig}"),
                locale: "en".to_string(),
            })
            .collect()
    }

    fn store_with_pair(query: &str, result: &str, saves: u64) -> MemboostStore {
        let mut store = MemboostStore::default();
        store.pairs.entry(query.into()).or_default().insert(
            result.into(),
            MemboostStats {
                saves,
                expected_saves: 0.1,
                ..Default::default()
            },
        );
        store.len = 1;
        store
    }

    #[test]
    fn insert_noop_when_present_or_disabled() {
        let pins = pins_with(&["a", "b"]);
        let store = store_with_pair("q", "a", 5);
        let params = MemboostParams::default();
        let before = ranked(&[("a", 2.0), ("b", 1.0)]);
        let after = memboost_insert(before.clone(), &store, &params, &"q".into(), &pins).unwrap();
        assert_eq!(after, before);

        let params_off = MemboostParams {
            insert_n: 0,
            ..MemboostParams::default()
        };
        let store2 = store_with_pair("q", "zz", 5);
        let before = ranked(&[("a", 2.0)]);
        let after =
            memboost_insert(before.clone(), &store2, &params_off, &"q".into(), &pins).unwrap();
        assert_eq!(after, before);
    }

    #[test]
    fn insert_adds_absent_high_mb_result_once() {
        let pins = pins_with(&["a", "b", "hot"]);
        let store = store_with_pair("q", "hot", 10);
        let params = MemboostParams::default();
        let before = ranked(&[("a", 2.0), ("b", 1.0)]);
        let after = memboost_insert(before, &store, &params, &"q".into(), &pins).unwrap();
        let hot_count = after
            .iter()
            .filter(|r| r.signature.as_str() == "hot")
            .count();
        assert_eq!(hot_count, 1);
        assert_eq!(after.len(), 3);
        // gamma * ln((5*10+1)/(5*0.1+1)) ~ 3.53 > 2.0: inserted on top.
        assert_eq!(after[0].signature.as_str(), "hot");
    }

    #[test]
    fn features_zero_for_unseen_pair() {
        let store = MemboostStore::default();
        let params = MemboostParams::default();
        let frag = memboost_features(&store, &params, &"q".into(), &"r".into());
        assert_eq!(frag, [0.0; FEATURE_FRAGMENT_LEN]);
    }

    #[test]
    fn store_round_trips_through_file() {
        let mut lines = Vec::new();
        for i in 0..5 {
            lines.push(event(&format!("s{i}"), "q", &format!("r{i}"), "impression", "web", i, i as i64));
        }
        lines.push(event("s1", "q", "r1", "save", "web", 1, 99));
        let log = log_from(&lines);
        let store = accumulate(&log, &compute_priors(&log));
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_store(&store, tmp.path()).unwrap();
        let loaded = read_store(tmp.path()).unwrap();
        assert_eq!(loaded, store);
    }

    #[test]
    fn store_reader_rejects_garbage() {
        assert!(read_store_from(&b"JUNKJUNKJUNK"[..]).is_err());
        assert!(read_store_from(&b"RRMB"[..]).is_err());
        let mut valid = Vec::new();
        valid.extend_from_slice(b"RRMB");
        valid.extend_from_slice(&1u16.to_le_bytes());
        valid.extend_from_slice(&1u64.to_le_bytes());
        // truncated record
        assert!(read_store_from(&valid[..]).is_err());
    }
}
