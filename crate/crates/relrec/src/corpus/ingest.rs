//! JSON-Lines loaders, validation, and snapshots.
//!
//! One object per line. Malformed or invariant-breaking lines are rejected
//! and counted, never fatal; only I/O failures abort. Loading is
//! deterministic: the same bytes always produce the same corpus, and
//! snapshots are written in canonical order so re-ingesting a snapshot is
//! byte-stable.

use super::*;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
struct PinLine {
    sig: String,
    pin_ids: Vec<String>,
    annotations: Vec<String>,
    ann_emb: Vec<f64>,
    cat_vec: Vec<f64>,
    vis_emb: Vec<f64>,
    locale: String,
    popularity: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoardLine {
    board_id: String,
    title: Vec<String>,
    locale: String,
    pins: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventLine {
    session: String,
    user: String,
    query: String,
    result: String,
    action: Action,
    platform: String,
    rank: u32,
    ts: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gscore: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arm: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UserLine {
    user: String,
    #[serde(default)]
    gender: String,
    #[serde(default)]
    country: String,
    #[serde(default)]
    language: String,
    #[serde(default)]
    recent_searches: Vec<String>,
}

fn open_lines(path: &Path) -> Result<std::io::Lines<BufReader<File>>> {
    let file = File::open(path)?;
    Ok(BufReader::new(file).lines())
}

fn tokens_to_multiset(tokens: &[String]) -> BTreeMap<String, u32> {
    let mut out = BTreeMap::new();
    for t in tokens {
        let t = t.to_lowercase();
        if !t.is_empty() {
            *out.entry(t).or_insert(0) += 1;
        }
    }
    out
}

fn multiset_to_tokens(ms: &BTreeMap<String, u32>) -> Vec<String> {
    let mut out = Vec::new();
    for (tok, &count) in ms {
        for _ in 0..count {
            out.push(tok.clone());
        }
    }
    out
}

fn normalize_locale(locale: &str) -> String {
    if locale.is_empty() {
        "und".to_string()
    } else {
        locale.to_string()
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn validate_pin_line(line: &PinLine) -> std::result::Result<(), &'static str> {
    if line.sig.is_empty() {
        return Err("empty signature");
    }
    if line.pin_ids.is_empty() || line.pin_ids.iter().any(|p| p.is_empty()) {
        return Err("missing pin ids");
    }
    if !all_finite(&line.ann_emb) || !all_finite(&line.cat_vec) || !all_finite(&line.vis_emb) {
        return Err("non-finite vector entry");
    }
    if line.cat_vec.iter().any(|&x| x < 0.0) {
        return Err("negative category entry");
    }
    let cat_sum: f64 = line.cat_vec.iter().sum();
    if cat_sum != 0.0 && (cat_sum - 1.0).abs() > NORM_TOLERANCE {
        return Err("category vector sum not 0 or 1");
    }
    let ann_norm = crate::util::l2_norm(&line.ann_emb);
    if ann_norm > 1e-9 && (ann_norm - 1.0).abs() > NORM_TOLERANCE {
        return Err("annotation embedding not unit-norm or zero");
    }
    Ok(())
}

/// Load and aggregate pins.jsonl. Records sharing a signature merge:
/// pin_ids union, annotations multiset union (per-token max), first
/// non-zero vectors kept, max popularity, per-locale instances tracked.
pub fn load_pins(path: &Path) -> Result<PinCorpus> {
    load_pins_from(open_lines(path)?)
}

/// Reader-based variant of [`load_pins`].
pub fn load_pins_from(lines: impl IntoIterator<Item = std::io::Result<String>>) -> Result<PinCorpus> {
    let mut corpus = PinCorpus::default();
    let mut dims: Option<Dims> = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PinLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                corpus.report.reject("malformed json");
                continue;
            }
        };
        if let Err(reason) = validate_pin_line(&parsed) {
            corpus.report.reject(reason);
            continue;
        }
        let line_dims = Dims {
            annotation: parsed.ann_emb.len(),
            category: parsed.cat_vec.len(),
            visual: parsed.vis_emb.len(),
        };
        match dims {
            None => dims = Some(line_dims),
            Some(d) if d != line_dims => {
                corpus.report.reject("dimension mismatch");
                continue;
            }
            Some(_) => {}
        }
        let sig = Signature(parsed.sig.clone());
        let locale = normalize_locale(&parsed.locale);
        let pin_ids: BTreeSet<String> = parsed.pin_ids.iter().cloned().collect();
        match corpus.records.get_mut(&sig) {
            Some(existing) => {
                existing.pin_ids.extend(pin_ids.iter().cloned());
                for (tok, count) in tokens_to_multiset(&parsed.annotations) {
                    let slot = existing.annotations.entry(tok).or_insert(0);
                    *slot = (*slot).max(count);
                }
                if crate::util::is_zero_vec(&existing.annotation_embedding)
                    && !crate::util::is_zero_vec(&parsed.ann_emb)
                {
                    existing.annotation_embedding = parsed.ann_emb;
                }
                if crate::util::is_zero_vec(&existing.category_vector)
                    && !crate::util::is_zero_vec(&parsed.cat_vec)
                {
                    existing.category_vector = parsed.cat_vec;
                }
                if crate::util::is_zero_vec(&existing.visual_embedding)
                    && !crate::util::is_zero_vec(&parsed.vis_emb)
                {
                    existing.visual_embedding = parsed.vis_emb;
                }
                existing.popularity = existing.popularity.max(parsed.popularity);
                existing
                    .locale_instances
                    .entry(locale)
                    .or_default()
                    .extend(pin_ids);
                corpus.report.merged += 1;
            }
            None => {
                let mut locale_instances = BTreeMap::new();
                locale_instances.insert(locale.clone(), pin_ids.clone());
                corpus.records.insert(
                    sig.clone(),
                    PinRecord {
                        signature: sig,
                        pin_ids,
                        annotations: tokens_to_multiset(&parsed.annotations),
                        annotation_embedding: parsed.ann_emb,
                        category_vector: parsed.cat_vec,
                        visual_embedding: parsed.vis_emb,
                        locale,
                        popularity: parsed.popularity,
                        locale_instances,
                    },
                );
            }
        }
    }
    corpus.dims = dims.unwrap_or_default();
    corpus.report.loaded = corpus.records.len();
    Ok(corpus)
}

/// Load boards.jsonl. Unknown signatures are dropped from a board; boards
/// left empty (and duplicate board ids) are rejected and counted.
pub fn load_boards(path: &Path, pins: &PinCorpus) -> Result<BoardCorpus> {
    load_boards_from(open_lines(path)?, pins)
}

/// Reader-based variant of [`load_boards`].
pub fn load_boards_from(
    lines: impl IntoIterator<Item = std::io::Result<String>>,
    pins: &PinCorpus,
) -> Result<BoardCorpus> {
    let mut corpus = BoardCorpus::default();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: BoardLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                corpus.report.reject("malformed json");
                continue;
            }
        };
        if parsed.board_id.is_empty() {
            corpus.report.reject("empty board id");
            continue;
        }
        if corpus.boards.contains_key(&parsed.board_id) {
            corpus.report.reject("duplicate board id");
            continue;
        }
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        for raw in &parsed.pins {
            let sig = Signature(raw.clone());
            if !pins.contains(&sig) {
                continue;
            }
            // Duplicate signature within one board: keep the first save.
            if seen.insert(sig.clone()) {
                kept.push(sig);
            }
        }
        if kept.is_empty() {
            corpus.report.reject("no known pins");
            continue;
        }
        corpus.boards.insert(
            parsed.board_id.clone(),
            Board {
                board_id: parsed.board_id,
                title_tokens: tokens_to_multiset(&parsed.title),
                locale: normalize_locale(&parsed.locale),
                pin_signatures: kept,
            },
        );
    }
    corpus.report.loaded = corpus.boards.len();
    Ok(corpus)
}

/// Load events.jsonl and group into sessions. Non-impression events without
/// a matching impression (same session, query, result) are orphans:
/// rejected and counted. Duplicate impressions of a result are rejected.
pub fn load_engagement(path: &Path) -> Result<EngagementLog> {
    load_engagement_from(open_lines(path)?)
}

/// Reader-based variant of [`load_engagement`].
pub fn load_engagement_from(
    lines: impl IntoIterator<Item = std::io::Result<String>>,
) -> Result<EngagementLog> {
    let mut log = EngagementLog::default();
    let mut parsed_events: Vec<EngagementEvent> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EventLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                log.report.reject("malformed json");
                continue;
            }
        };
        if parsed.session.is_empty()
            || parsed.user.is_empty()
            || parsed.query.is_empty()
            || parsed.result.is_empty()
        {
            log.report.reject("missing identifier");
            continue;
        }
        parsed_events.push(EngagementEvent {
            action: parsed.action,
            query: Signature(parsed.query),
            result: Signature(parsed.result),
            platform: parsed.platform,
            rank: parsed.rank,
            user_id: parsed.user,
            timestamp: parsed.ts,
            session_id: parsed.session,
            source: parsed.src,
            generator_score: parsed.gscore,
            gate: parsed.gate,
            arm: parsed.arm,
        });
    }

    // First pass: impressions define the displayed result set.
    let mut impressions: BTreeSet<(String, Signature, Signature)> = BTreeSet::new();
    let mut accepted: Vec<EngagementEvent> = Vec::new();
    for event in parsed_events {
        let key = (
            event.session_id.clone(),
            event.query.clone(),
            event.result.clone(),
        );
        if event.action == Action::Impression {
            if !impressions.insert(key) {
                log.report.reject("duplicate impression");
                continue;
            }
            accepted.push(event);
        } else {
            accepted.push(event);
        }
    }
    // Second pass: drop engagement orphans (their impression may appear
    // later in the file, so membership is checked after the full scan).
    let mut events = Vec::with_capacity(accepted.len());
    for event in accepted {
        if event.action != Action::Impression {
            let key = (
                event.session_id.clone(),
                event.query.clone(),
                event.result.clone(),
            );
            if !impressions.contains(&key) {
                log.report.reject("engagement without impression");
                continue;
            }
        }
        events.push(event);
    }

    log.sessions = build_sessions(&events);
    log.report.loaded = events.len();
    log.events = events;
    Ok(log)
}

pub(crate) fn build_sessions(events: &[EngagementEvent]) -> Vec<Session> {
    #[derive(Default)]
    struct Agg {
        user_id: String,
        platform: String,
        start_ts: i64,
        gate: Option<String>,
        arm: Option<String>,
        results: BTreeMap<(u32, Signature), SessionResult>,
    }
    let mut sessions: BTreeMap<(String, Signature), Agg> = BTreeMap::new();
    for event in events {
        if event.action != Action::Impression {
            continue;
        }
        let agg = sessions
            .entry((event.session_id.clone(), event.query.clone()))
            .or_insert_with(|| Agg {
                user_id: event.user_id.clone(),
                platform: event.platform.clone(),
                start_ts: event.timestamp,
                gate: event.gate.clone(),
                arm: event.arm.clone(),
                results: BTreeMap::new(),
            });
        agg.start_ts = agg.start_ts.min(event.timestamp);
        agg.results.insert(
            (event.rank, event.result.clone()),
            SessionResult {
                result: event.result.clone(),
                best_action: Action::Impression,
                rank: event.rank,
                source: event.source.clone(),
                generator_score: event.generator_score,
            },
        );
    }
    for event in events {
        if event.action == Action::Impression {
            continue;
        }
        if let Some(agg) = sessions.get_mut(&(event.session_id.clone(), event.query.clone())) {
            for result in agg.results.values_mut() {
                if result.result == event.result {
                    result.best_action = result.best_action.max(event.action);
                }
            }
        }
    }
    let mut out: Vec<Session> = sessions
        .into_iter()
        .map(|((session_id, query), agg)| Session {
            session_id,
            query,
            user_id: agg.user_id,
            platform: agg.platform,
            start_ts: agg.start_ts,
            gate: agg.gate,
            arm: agg.arm,
            results: agg.results.into_values().collect(),
        })
        .collect();
    out.sort_by(|a, b| {
        (a.start_ts, &a.session_id, &a.query).cmp(&(b.start_ts, &b.session_id, &b.query))
    });
    out
}

/// Load users.jsonl (optional demographics and recent searches).
pub fn load_users(path: &Path) -> Result<UserCorpus> {
    load_users_from(open_lines(path)?)
}

/// Reader-based variant of [`load_users`].
pub fn load_users_from(
    lines: impl IntoIterator<Item = std::io::Result<String>>,
) -> Result<UserCorpus> {
    let mut corpus = UserCorpus::default();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: UserLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                corpus.report.reject("malformed json");
                continue;
            }
        };
        if parsed.user.is_empty() {
            corpus.report.reject("empty user id");
            continue;
        }
        if corpus.users.contains_key(&parsed.user) {
            corpus.report.reject("duplicate user id");
            continue;
        }
        corpus.users.insert(
            parsed.user.clone(),
            UserProfile {
                user_id: parsed.user,
                gender: parsed.gender.to_lowercase(),
                country: parsed.country.to_lowercase(),
                language: parsed.language.to_lowercase(),
                recent_search_tokens: parsed
                    .recent_searches
                    .iter()
                    .map(|t| t.to_lowercase())
                    .collect(),
            },
        );
    }
    corpus.report.loaded = corpus.users.len();
    Ok(corpus)
}

/// Write a pin corpus back to pins.jsonl in canonical order. Merged records
/// are emitted as one line per locale group so that restore reconstructs the
/// corpus field-for-field.
pub fn snapshot_pins(corpus: &PinCorpus, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in corpus.records.values() {
        let mut locales: Vec<&String> = record.locale_instances.keys().collect();
        // Primary locale line first so restore picks the same primary.
        locales.sort_by_key(|l| (**l != record.locale, (*l).clone()));
        for locale in locales {
            let ids = &record.locale_instances[locale];
            let line = PinLine {
                sig: record.signature.0.clone(),
                pin_ids: ids.iter().cloned().collect(),
                annotations: multiset_to_tokens(&record.annotations),
                ann_emb: record.annotation_embedding.clone(),
                cat_vec: record.category_vector.clone(),
                vis_emb: record.visual_embedding.clone(),
                locale: locale.clone(),
                popularity: record.popularity,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn restore_pins(path: &Path) -> Result<PinCorpus> {
    load_pins(path)
}

pub fn snapshot_boards(corpus: &BoardCorpus, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for board in corpus.boards.values() {
        let line = BoardLine {
            board_id: board.board_id.clone(),
            title: multiset_to_tokens(&board.title_tokens),
            locale: board.locale.clone(),
            pins: board.pin_signatures.iter().map(|s| s.0.clone()).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn restore_boards(path: &Path, pins: &PinCorpus) -> Result<BoardCorpus> {
    load_boards(path, pins)
}

/// Write events back in stored (file) order; sessions are re-derived on
/// restore, so event fidelity is all that round-tripping needs.
pub fn snapshot_engagement(log: &EngagementLog, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for event in &log.events {
        write_event(&mut w, event)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_event<W: Write>(w: &mut W, event: &EngagementEvent) -> Result<()> {
    let line = EventLine {
        session: event.session_id.clone(),
        user: event.user_id.clone(),
        query: event.query.0.clone(),
        result: event.result.0.clone(),
        action: event.action,
        platform: event.platform.clone(),
        rank: event.rank,
        ts: event.timestamp,
        src: event.source.clone(),
        gscore: event.generator_score,
        gate: event.gate.clone(),
        arm: event.arm.clone(),
    };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn restore_engagement(path: &Path) -> Result<EngagementLog> {
    load_engagement(path)
}

/// Snapshot users.jsonl in id order.
pub fn snapshot_users(corpus: &UserCorpus, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for user in corpus.users.values() {
        let line = UserLine {
            user: user.user_id.clone(),
            gender: user.gender.clone(),
            country: user.country.clone(),
            language: user.language.clone(),
            recent_searches: user.recent_search_tokens.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn pin_line(sig: &str, cat: &str) -> String {
        format!(
            r#"{{"sig":"{sig}","pin_ids":["p-{sig}"],"annotations":["dog","park"],"ann_emb":[1.0,0.0],"cat_vec":{cat},"vis_emb":[0.5,0.5],"locale":"en","popularity":3}}"#
        )
    }

    #[test]
    fn empty_file_yields_empty_corpus() {
        let f = write_tmp("");
        let corpus = load_pins(f.path()).unwrap();
        assert_eq!(corpus.len(), 0);
        assert_eq!(corpus.report.rejected, 0);
    }

    #[test]
    fn category_sum_violation_is_rejected_not_fatal() {
        let mut content = String::new();
        for sig in ["a", "b", "c"] {
            content.push_str(&pin_line(sig, "[1.0,0.0]"));
            content.push('\n');
        }
        content.push_str(&pin_line("d", "[1.0,1.0]")); // sums to 2.0
        content.push('\n');
        let f = write_tmp(&content);
        let corpus = load_pins(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.report.rejected, 1);
    }

    #[test]
    fn duplicate_signature_merges_pin_ids() {
        let content = concat!(
            r#"{"sig":"s","pin_ids":["p1"],"annotations":["dog"],"ann_emb":[1.0,0.0],"cat_vec":[1.0,0.0],"vis_emb":[0.1,0.2],"locale":"en","popularity":5}"#,
            "\n",
            r#"{"sig":"s","pin_ids":["p2"],"annotations":["dog"],"ann_emb":[1.0,0.0],"cat_vec":[1.0,0.0],"vis_emb":[0.1,0.2],"locale":"fr","popularity":2}"#,
            "\n",
        );
        let f = write_tmp(content);
        let corpus = load_pins(f.path()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.report.merged, 1);
        let rec = corpus.get(&"s".into()).unwrap();
        assert_eq!(rec.pin_ids.len(), 2);
        assert_eq!(rec.locale, "en");
        assert_eq!(rec.popularity, 5);
        assert!(rec.locale_instances.contains_key("fr"));
        assert_eq!(rec.annotations["dog"], 1); // union-as-max, not sum
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let content = concat!(
            r#"{"sig":"a","pin_ids":["p1"],"annotations":[],"ann_emb":[1.0,0.0],"cat_vec":[1.0],"vis_emb":[0.1],"locale":"en","popularity":0}"#,
            "\n",
            r#"{"sig":"b","pin_ids":["p2"],"annotations":[],"ann_emb":[1.0,0.0,0.0],"cat_vec":[1.0],"vis_emb":[0.1],"locale":"en","popularity":0}"#,
            "\n",
        );
        let f = write_tmp(content);
        let corpus = load_pins(f.path()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.report.reasons["dimension mismatch"], 1);
    }

    fn small_pins() -> PinCorpus {
        let mut content = String::new();
        for sig in ["a", "b", "c"] {
            content.push_str(&pin_line(sig, "[1.0,0.0]"));
            content.push('\n');
        }
        let f = write_tmp(&content);
        load_pins(f.path()).unwrap()
    }

    #[test]
    fn board_with_no_known_pins_dropped() {
        let pins = small_pins();
        let content = concat!(
            r#"{"board_id":"b1","title":["dogs"],"locale":"en","pins":["zz","yy"]}"#,
            "\n",
            r#"{"board_id":"b2","title":["dogs"],"locale":"en","pins":["a","b"]}"#,
            "\n",
        );
        let f = write_tmp(content);
        let boards = load_boards(f.path(), &pins).unwrap();
        assert_eq!(boards.len(), 1);
        assert_eq!(boards.report.reasons["no known pins"], 1);
    }

    #[test]
    fn board_duplicate_signature_deduplicated() {
        let pins = small_pins();
        let content = r#"{"board_id":"b1","title":[],"locale":"en","pins":["a","b","a"]}"#;
        let f = write_tmp(content);
        let boards = load_boards(f.path(), &pins).unwrap();
        assert_eq!(
            boards.get("b1").unwrap().pin_signatures,
            vec![Signature::from("a"), Signature::from("b")]
        );
    }

    #[test]
    fn shared_membership_counted_by_hand() {
        let pins = small_pins();
        let content = concat!(
            r#"{"board_id":"b1","title":[],"locale":"en","pins":["a","b"]}"#,
            "\n",
            r#"{"board_id":"b2","title":[],"locale":"en","pins":["b","c"]}"#,
            "\n",
        );
        let f = write_tmp(content);
        let boards = load_boards(f.path(), &pins).unwrap();
        assert_eq!(boards.len(), 2);
        assert_eq!(boards.shared_membership_count(), 1);
    }

    fn event_line(session: &str, result: &str, action: &str, rank: u32, ts: i64) -> String {
        format!(
            r#"{{"session":"{session}","user":"u1","query":"q","result":"{result}","action":"{action}","platform":"web","rank":{rank},"ts":{ts}}}"#
        )
    }

    #[test]
    fn impression_only_session() {
        let content = format!(
            "{}\n{}\n",
            event_line("s1", "a", "impression", 0, 10),
            event_line("s1", "b", "impression", 1, 10)
        );
        let f = write_tmp(&content);
        let log = load_engagement(f.path()).unwrap();
        assert_eq!(log.sessions.len(), 1);
        assert!(log.sessions[0]
            .results
            .iter()
            .all(|r| r.best_action == Action::Impression));
    }

    #[test]
    fn best_action_is_max_of_events() {
        let content = format!(
            "{}\n{}\n{}\n",
            event_line("s1", "a", "impression", 0, 10),
            event_line("s1", "a", "click", 0, 11),
            event_line("s1", "a", "save", 0, 12)
        );
        let f = write_tmp(&content);
        let log = load_engagement(f.path()).unwrap();
        assert_eq!(log.sessions[0].results[0].best_action, Action::Save);
    }

    #[test]
    fn orphan_click_rejected() {
        let content = format!(
            "{}\n{}\n",
            event_line("s1", "a", "impression", 0, 10),
            event_line("s1", "b", "click", 1, 11)
        );
        let f = write_tmp(&content);
        let log = load_engagement(f.path()).unwrap();
        assert_eq!(log.report.reasons["engagement without impression"], 1);
        assert_eq!(log.events.len(), 1);
    }

    #[test]
    fn snapshot_restore_round_trips() {
        let pins = small_pins();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        snapshot_pins(&pins, tmp.path()).unwrap();
        let restored = restore_pins(tmp.path()).unwrap();
        assert_eq!(restored.records, pins.records);

        let content = format!(
            "{}\n{}\n",
            event_line("s1", "a", "impression", 0, 10),
            event_line("s1", "a", "save", 0, 12)
        );
        let f = write_tmp(&content);
        let log = load_engagement(f.path()).unwrap();
        let tmp2 = tempfile::NamedTempFile::new().unwrap();
        snapshot_engagement(&log, tmp2.path()).unwrap();
        let restored = restore_engagement(tmp2.path()).unwrap();
        assert_eq!(restored.events, log.events);
        assert_eq!(restored.sessions, log.sessions);
    }

    #[test]
    fn double_load_snapshots_byte_identical() {
        let mut content = String::new();
        for sig in ["b", "a", "c"] {
            content.push_str(&pin_line(sig, "[0.5,0.5]"));
            content.push('\n');
        }
        let f = write_tmp(&content);
        let t1 = tempfile::NamedTempFile::new().unwrap();
        let t2 = tempfile::NamedTempFile::new().unwrap();
        snapshot_pins(&load_pins(f.path()).unwrap(), t1.path()).unwrap();
        snapshot_pins(&load_pins(f.path()).unwrap(), t2.path()).unwrap();
        assert_eq!(
            std::fs::read(t1.path()).unwrap(),
            std::fs::read(t2.path()).unwrap()
        );
    }
}
