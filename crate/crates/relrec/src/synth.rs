//! Synthetic corpus and engagement-log generation.
//!
//! Builds a planted-cluster world: each topic cluster gets a category
//! basis direction, annotation/visual embedding centers, and a token
//! vocabulary; boards are mostly single-cluster; users carry a cluster
//! affinity. A bootstrap engagement log is produced by serving
//! relevance-ordered (plus noise) result lists to the synthetic user
//! model, so it exhibits real position bias.
//!
//! Everything is emitted as JSONL and re-ingested through the normal
//! loaders, so generated corpora satisfy exactly the invariants real ones
//! do.

use crate::corpus::{
    load_boards_from, load_engagement_from, load_pins_from, load_users_from, BoardCorpus,
    EngagementLog, PinCorpus, Signature, UserCorpus,
};
use crate::eval::simulate::{simulate_session, ServedRow, SessionStamp, SyntheticUserModel};
use crate::graph::heuristic_relevance;
use crate::ranking::RankedResult;
use crate::util;
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub clusters: usize,
    pub pins_per_cluster: usize,
    pub boards: usize,
    pub board_size: (usize, usize),
    /// Probability a board slot draws from a random cluster instead of the
    /// board's home cluster.
    pub board_mix: f64,
    pub users: usize,
    pub bootstrap_sessions: usize,
    pub results_per_session: usize,
    /// (locale tag, share); shares normalized.
    pub locales: Vec<(String, f64)>,
    /// Fraction of pins that also get an instance in a second locale.
    pub bilingual_fraction: f64,
    pub tokens_per_cluster: usize,
    pub annotations_per_pin: usize,
    pub ann_dim: usize,
    pub vis_dim: usize,
    pub zipf_exponent: f64,
    /// Fraction of pins whose annotation/visual embeddings come from a
    /// different cluster than their category vector: on-topic-looking
    /// content that is not actually related. These decouple the category
    /// signal from the content signals, so rankers that never see them in
    /// training cannot learn to avoid them.
    pub trap_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clusters: 4,
            pins_per_cluster: 40,
            boards: 60,
            board_size: (6, 14),
            board_mix: 0.1,
            users: 50,
            bootstrap_sessions: 2000,
            results_per_session: 15,
            locales: vec![("en".to_string(), 1.0)],
            bilingual_fraction: 0.0,
            tokens_per_cluster: 12,
            annotations_per_pin: 4,
            ann_dim: 8,
            vis_dim: 8,
            zipf_exponent: 0.8,
            trap_fraction: 0.0,
            seed: 0,
        }
    }
}

/// Generated world: the raw JSONL bytes plus the corpora loaded from them.
pub struct SynthWorld {
    pub pins: PinCorpus,
    pub boards: BoardCorpus,
    pub users: UserCorpus,
    pub log: EngagementLog,
    pub pins_jsonl: Vec<u8>,
    pub boards_jsonl: Vec<u8>,
    pub users_jsonl: Vec<u8>,
    pub events_jsonl: Vec<u8>,
    /// signature -> planted cluster, for oracle tests.
    pub pin_cluster: std::collections::BTreeMap<Signature, usize>,
    /// user id -> affinity cluster.
    pub user_cluster: std::collections::BTreeMap<String, usize>,
}

impl SynthWorld {
    /// Popularity-ranked query pool, round-robin across clusters.
    pub fn query_pool(&self, n: usize) -> Vec<Signature> {
        let mut per_cluster: Vec<Vec<(&Signature, u64)>> = vec![Vec::new(); self.cluster_count()];
        for record in self.pins.iter() {
            let c = self.pin_cluster[&record.signature];
            per_cluster[c].push((&record.signature, record.popularity));
        }
        for list in &mut per_cluster {
            list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        }
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        while out.len() < n {
            let c = i % per_cluster.len();
            let j = i / per_cluster.len();
            if per_cluster.iter().all(|l| j >= l.len()) {
                break;
            }
            if let Some((sig, _)) = per_cluster[c].get(j) {
                out.push((*sig).clone());
            }
            i += 1;
        }
        out
    }

    /// (user, query) plan: each user queries inside their affinity cluster.
    pub fn session_plan(&self, count: usize, seed: u64) -> Vec<(String, Signature)> {
        let mut rng = util::rng_from(seed);
        let users: Vec<&String> = self.user_cluster.keys().collect();
        let mut per_cluster: Vec<Vec<&Signature>> = vec![Vec::new(); self.cluster_count()];
        for (sig, c) in &self.pin_cluster {
            per_cluster[*c].push(sig);
        }
        let mut plan = Vec::with_capacity(count);
        for i in 0..count {
            let user = users[i % users.len()];
            let cluster = self.user_cluster[user.as_str()];
            let pool = &per_cluster[cluster];
            let query = pool[rng.random_range(0..pool.len())];
            plan.push((user.clone(), query.clone()));
        }
        plan
    }

    fn cluster_count(&self) -> usize {
        self.pin_cluster.values().copied().max().unwrap_or(0) + 1
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = util::l2_norm(&v).max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn perturbed_unit(center: &[f64], noise: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = center.iter().map(|c| c + noise * gaussian(rng)).collect();
    let norm = util::l2_norm(&v).max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn pick_locale(shares: &[(String, f64)], rng: &mut impl Rng) -> String {
    let total: f64 = shares.iter().map(|(_, s)| s).sum();
    let mut u = rng.random::<f64>() * total;
    for (tag, share) in shares {
        if u < *share {
            return tag.clone();
        }
        u -= share;
    }
    shares.last().map(|(t, _)| t.clone()).unwrap_or_else(|| "en".to_string())
}

fn json_floats(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

fn json_strings(v: &[String]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|s| serde_json::to_string(s).expect("string encodes"))
        .collect();
    format!("[{}]", parts.join(","))
}

/// Generate the whole world from a config and a user model.
pub fn generate(cfg: &SynthConfig, user_model: &SyntheticUserModel) -> Result<SynthWorld> {
    user_model.validate()?;
    let mut rng = util::rng_from(cfg.seed);
    let total_pins = cfg.clusters * cfg.pins_per_cluster;
    let cat_dim = cfg.clusters;

    // Popularity by a zipf curve over a shuffled global rank.
    let mut pop_rank: Vec<usize> = (0..total_pins).collect();
    for i in 0..total_pins {
        let j = rng.random_range(i..total_pins);
        pop_rank.swap(i, j);
    }
    let popularity_of = |rank: usize| -> u64 {
        (1000.0 / ((rank + 1) as f64).powf(cfg.zipf_exponent)).round() as u64
    };

    let ann_centers: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| unit_vector(cfg.ann_dim.max(1), &mut rng))
        .collect();
    let vis_centers: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| unit_vector(cfg.vis_dim.max(1), &mut rng))
        .collect();

    let mut pins_jsonl = Vec::new();
    let mut pin_cluster = std::collections::BTreeMap::new();
    let mut sigs: Vec<Signature> = Vec::with_capacity(total_pins);
    for c in 0..cfg.clusters {
        for i in 0..cfg.pins_per_cluster {
            let sig = format!("c{c:02}p{i:04}");
            let global = c * cfg.pins_per_cluster + i;
            let mut cat = vec![0.0f64; cat_dim];
            for (j, slot) in cat.iter_mut().enumerate() {
                *slot = if j == c {
                    0.8 + 0.1 * rng.random::<f64>()
                } else {
                    0.02 * rng.random::<f64>()
                };
            }
            let cat_sum: f64 = cat.iter().sum();
            for slot in &mut cat {
                *slot /= cat_sum;
            }
            let trap = cfg.clusters > 1 && rng.random::<f64>() < cfg.trap_fraction;
            let content_cluster = if trap {
                (c + 1 + rng.random_range(0..cfg.clusters - 1)) % cfg.clusters
            } else {
                c
            };
            let ann_emb = perturbed_unit(&ann_centers[content_cluster], 0.6, &mut rng);
            let vis_emb = perturbed_unit(&vis_centers[content_cluster], 0.55, &mut rng);
            let mut tokens: Vec<String> = Vec::new();
            let mut seen = BTreeSet::new();
            while tokens.len() < cfg.annotations_per_pin {
                let t = format!("t{c:02}w{:02}", rng.random_range(0..cfg.tokens_per_cluster));
                if seen.insert(t.clone()) {
                    tokens.push(t);
                }
            }
            let locale = pick_locale(&cfg.locales, &mut rng);
            let popularity = popularity_of(pop_rank[global]);
            writeln!(
                pins_jsonl,
                r#"{{"sig":"{sig}","pin_ids":["{sig}-{locale}-0"],"annotations":{},"ann_emb":{},"cat_vec":{},"vis_emb":{},"locale":"{locale}","popularity":{popularity}}}"#,
                json_strings(&tokens),
                json_floats(&ann_emb),
                json_floats(&cat),
                json_floats(&vis_emb),
            )
            .expect("in-memory write");
            // Bilingual instance: same image, another locale's pin id.
            if cfg.locales.len() > 1 && rng.random::<f64>() < cfg.bilingual_fraction {
                let other = cfg
                    .locales
                    .iter()
                    .map(|(t, _)| t)
                    .find(|t| **t != locale)
                    .cloned()
                    .unwrap_or_else(|| locale.clone());
                writeln!(
                    pins_jsonl,
                    r#"{{"sig":"{sig}","pin_ids":["{sig}-{other}-1"],"annotations":{},"ann_emb":{},"cat_vec":{},"vis_emb":{},"locale":"{other}","popularity":{popularity}}}"#,
                    json_strings(&tokens),
                    json_floats(&ann_emb),
                    json_floats(&cat),
                    json_floats(&vis_emb),
                )
                .expect("in-memory write");
            }
            pin_cluster.insert(Signature(sig.clone()), c);
            sigs.push(Signature(sig));
        }
    }
    let pins = load_pins_from(lines_of(&pins_jsonl))?;

    // Popularity-weighted sampling tables per cluster.
    let mut cluster_members: Vec<Vec<&Signature>> = vec![Vec::new(); cfg.clusters];
    for sig in &sigs {
        cluster_members[pin_cluster[sig]].push(sig);
    }
    let weighted_pick = |members: &[&Signature], pins: &PinCorpus, rng: &mut rand_chacha::ChaCha8Rng| -> Signature {
        let total: f64 = members
            .iter()
            .map(|s| (pins.get(s).map(|r| r.popularity).unwrap_or(0) + 1) as f64)
            .sum();
        let mut u = rng.random::<f64>() * total;
        for s in members {
            let w = (pins.get(s).map(|r| r.popularity).unwrap_or(0) + 1) as f64;
            if u < w {
                return (*s).clone();
            }
            u -= w;
        }
        members.last().expect("non-empty").to_owned().clone()
    };

    let mut boards_jsonl = Vec::new();
    for b in 0..cfg.boards {
        let home = rng.random_range(0..cfg.clusters);
        let size = rng.random_range(cfg.board_size.0..=cfg.board_size.1);
        let mut members: Vec<Signature> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut guard = 0;
        while members.len() < size && guard < size * 20 {
            guard += 1;
            let cluster = if rng.random::<f64>() < cfg.board_mix {
                rng.random_range(0..cfg.clusters)
            } else {
                home
            };
            let pick = weighted_pick(&cluster_members[cluster], &pins, &mut rng);
            if seen.insert(pick.clone()) {
                members.push(pick);
            }
        }
        let title: Vec<String> = (0..2)
            .map(|_| format!("t{home:02}w{:02}", rng.random_range(0..cfg.tokens_per_cluster)))
            .collect();
        let locale = pick_locale(&cfg.locales, &mut rng);
        let member_strs: Vec<String> = members.iter().map(|s| s.0.clone()).collect();
        writeln!(
            boards_jsonl,
            r#"{{"board_id":"b{b:04}","title":{},"locale":"{locale}","pins":{}}}"#,
            json_strings(&title),
            json_strings(&member_strs),
        )
        .expect("in-memory write");
    }
    let boards = load_boards_from(lines_of(&boards_jsonl), &pins)?;

    let mut users_jsonl = Vec::new();
    let mut user_cluster = std::collections::BTreeMap::new();
    let genders = ["female", "male", "other", "unknown"];
    for u in 0..cfg.users {
        let user_id = format!("u{u:04}");
        let cluster = rng.random_range(0..cfg.clusters);
        let language = pick_locale(&cfg.locales, &mut rng);
        let country = match language.as_str() {
            "en" => "us",
            "fr" => "fr",
            other => other,
        };
        let gender = genders[rng.random_range(0..genders.len())];
        let searches: Vec<String> = (0..2)
            .map(|_| format!("t{cluster:02}w{:02}", rng.random_range(0..cfg.tokens_per_cluster)))
            .collect();
        writeln!(
            users_jsonl,
            r#"{{"user":"{user_id}","gender":"{gender}","country":"{country}","language":"{language}","recent_searches":{}}}"#,
            json_strings(&searches),
        )
        .expect("in-memory write");
        user_cluster.insert(user_id, cluster);
    }
    let users = load_users_from(lines_of(&users_jsonl))?;

    // Bootstrap log: relevance-plus-noise ordering served to the synthetic
    // users. Generator scores logged as the clean heuristic relevance so
    // training features line up with serving-time generator scores.
    let mut events_jsonl = Vec::new();
    let all_sigs: Vec<&Signature> = sigs.iter().collect();
    for s in 0..cfg.bootstrap_sessions {
        let user_idx = s % cfg.users.max(1);
        let user_id = format!("u{user_idx:04}");
        let cluster = user_cluster[&user_id];
        let query = weighted_pick(&cluster_members[cluster], &pins, &mut rng);
        let query_record = pins.get(&query).expect("generated");
        let platform = if rng.random::<f64>() < 0.7 { "web" } else { "mobile" };
        let ts = (s / cfg.users.max(1)) as i64 * 45 + user_idx as i64;

        let mut shown: Vec<Signature> = Vec::new();
        let mut seen = BTreeSet::new();
        seen.insert(query.clone());
        let mut guard = 0;
        while shown.len() < cfg.results_per_session && guard < cfg.results_per_session * 30 {
            guard += 1;
            let pick = if rng.random::<f64>() < 0.7 {
                weighted_pick(&cluster_members[cluster], &pins, &mut rng)
            } else {
                (*all_sigs[rng.random_range(0..all_sigs.len())]).clone()
            };
            if seen.insert(pick.clone()) {
                shown.push(pick);
            }
        }
        let mut ordered: Vec<(f64, f64, Signature)> = shown
            .into_iter()
            .map(|sig| {
                let rel = heuristic_relevance(query_record, pins.get(&sig).expect("generated"));
                (rel + 0.1 * rng.random::<f64>(), rel, sig)
            })
            .collect();
        ordered.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.2.cmp(&b.2))
        });
        let rows: Vec<ServedRow> = ordered
            .into_iter()
            .map(|(_, rel, sig)| {
                let record = pins.get(&sig).expect("generated");
                ServedRow {
                    result: RankedResult::for_record(record, rel),
                    source: None,
                    generator_score: rel,
                }
            })
            .collect();
        let stamp = SessionStamp {
            session_id: format!("boot{s:06}"),
            user_id: &user_id,
            platform,
            ts,
            gate: None,
            arm: None,
        };
        let events = simulate_session(
            user_model,
            &pins,
            &query,
            &rows,
            &stamp,
            util::derive_seed_indexed(cfg.seed, "bootstrap-session", s as u64),
        );
        for event in &events {
            crate::corpus::write_event_line(&mut events_jsonl, event)?;
        }
    }
    let log = load_engagement_from(lines_of(&events_jsonl))?;

    Ok(SynthWorld {
        pins,
        boards,
        users,
        log,
        pins_jsonl,
        boards_jsonl,
        users_jsonl,
        events_jsonl,
        pin_cluster,
        user_cluster,
    })
}

fn lines_of(bytes: &[u8]) -> impl Iterator<Item = std::io::Result<String>> + '_ {
    bytes
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| Ok(String::from_utf8_lossy(l).into_owned()))
}

/// Write the generated JSONL files into a directory.
pub fn write_world(world: &SynthWorld, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("pins.jsonl"), &world.pins_jsonl)?;
    std::fs::write(dir.join("boards.jsonl"), &world.boards_jsonl)?;
    std::fs::write(dir.join("users.jsonl"), &world.users_jsonl)?;
    std::fs::write(dir.join("events.jsonl"), &world.events_jsonl)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let cfg = SynthConfig {
            clusters: 3,
            pins_per_cluster: 10,
            boards: 12,
            users: 8,
            bootstrap_sessions: 40,
            ..SynthConfig::default()
        };
        let model = SyntheticUserModel::default();
        let a = generate(&cfg, &model).unwrap();
        let b = generate(&cfg, &model).unwrap();
        assert_eq!(a.pins_jsonl, b.pins_jsonl);
        assert_eq!(a.events_jsonl, b.events_jsonl);
        assert_eq!(a.pins.len(), 30);
        assert_eq!(a.pins.report.rejected, 0);
        assert!(a.boards.len() > 0);
        assert!(!a.log.sessions.is_empty());
        // Logged sessions exhibit the impression/engagement structure.
        assert!(a.log.report.reasons.is_empty(), "{:?}", a.log.report);
    }

    #[test]
    fn bilingual_fraction_produces_dual_instances() {
        let cfg = SynthConfig {
            clusters: 2,
            pins_per_cluster: 30,
            boards: 10,
            users: 5,
            bootstrap_sessions: 10,
            locales: vec![("en".to_string(), 0.8), ("fr".to_string(), 0.2)],
            bilingual_fraction: 0.5,
            ..SynthConfig::default()
        };
        let world = generate(&cfg, &SyntheticUserModel::default()).unwrap();
        let dual = world
            .pins
            .iter()
            .filter(|r| r.locale_instances.len() > 1)
            .count();
        assert!(dual > 5, "expected bilingual instances, got {dual}");
    }
}
