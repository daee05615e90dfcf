//! Session-co-occurrence embeddings of the head pins.
//!
//! Pins saved by the same user within a time window are treated as related;
//! each such pair is a training example for a skip-gram model with negative
//! sampling (the tractable surrogate for the full N-way softmax, which
//! itself samples negatives). The result is one d-dimensional vector per
//! head pin; candidates are served by exact nearest-neighbor scan in cosine
//! space.
//!
//! Training is single-writer and deterministic per seed and pair order; the
//! finished table is immutable.

use crate::corpus::{Action, EngagementLog, PinCorpus, Signature};
use crate::graph::{Candidate, CandidateFlag, CandidateSet, CandidateSource};
use crate::util;
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Pin2VecConfig {
    /// Vocabulary size: the N most popular pins.
    pub vocab_size: usize,
    /// Embedding dimension.
    pub dim: usize,
    /// Session window tau, in seconds.
    pub window_seconds: i64,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Pin2VecConfig {
    fn default() -> Self {
        Pin2VecConfig {
            vocab_size: 10_000,
            dim: 64,
            window_seconds: 1800,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl Pin2VecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        if self.vocab_size == 0 {
            return Err(Error::invalid("vocab size must be positive"));
        }
        if self.window_seconds <= 0 {
            return Err(Error::invalid("window must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        util::fnv1a64_parts(&[
            &(self.vocab_size as u64).to_le_bytes(),
            &(self.dim as u64).to_le_bytes(),
            &self.window_seconds.to_le_bytes(),
            &(self.negatives_per_positive as u64).to_le_bytes(),
            &(self.epochs as u64).to_le_bytes(),
            &self.learning_rate.to_le_bytes(),
            &self.seed.to_le_bytes(),
        ])
    }
}

/// The head-pin vocabulary: popularity-ranked signatures.
#[derive(Debug, Clone)]
pub struct Vocab {
    sigs: Vec<Signature>,
    index: BTreeMap<Signature, u32>,
    popularity: Vec<u64>,
}

impl Vocab {
    /// The N most popular pins (ties broken by signature order).
    pub fn head(pins: &PinCorpus, n: usize) -> Vocab {
        let mut ranked: Vec<(&Signature, u64)> =
            pins.iter().map(|r| (&r.signature, r.popularity)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(n);
        let sigs: Vec<Signature> = ranked.iter().map(|(s, _)| (*s).clone()).collect();
        let popularity: Vec<u64> = ranked.iter().map(|(_, p)| *p).collect();
        let index = sigs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Vocab {
            sigs,
            index,
            popularity,
        }
    }

    pub fn len(&self) -> usize {
        self.sigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigs.is_empty()
    }

    pub fn get(&self, sig: &Signature) -> Option<u32> {
        self.index.get(sig).copied()
    }

    pub fn signature(&self, idx: u32) -> &Signature {
        &self.sigs[idx as usize]
    }
}

/// All directed pairs of in-vocab saves by the same user within the window.
pub fn extract_session_pairs(
    log: &EngagementLog,
    vocab: &Vocab,
    window_seconds: i64,
) -> Vec<(u32, u32)> {
    let mut by_user: BTreeMap<&str, Vec<(i64, u32)>> = BTreeMap::new();
    for event in &log.events {
        if event.action != Action::Save {
            continue;
        }
        let Some(idx) = vocab.get(&event.result) else {
            continue;
        };
        by_user
            .entry(event.user_id.as_str())
            .or_default()
            .push((event.timestamp, idx));
    }
    let mut pairs = Vec::new();
    for saves in by_user.values_mut() {
        saves.sort_unstable();
        for i in 0..saves.len() {
            for j in (i + 1)..saves.len() {
                if saves[j].0 - saves[i].0 > window_seconds {
                    break;
                }
                let (a, b) = (saves[i].1, saves[j].1);
                if a == b {
                    continue;
                }
                pairs.push((a, b));
                pairs.push((b, a));
            }
        }
    }
    pairs
}

/// The learned table: vocabulary plus row-major unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vec<Signature>,
    index: BTreeMap<Signature, u32>,
    vectors: Vec<f64>,
    dim: usize,
    fingerprint: u64,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.index.contains_key(sig)
    }

    pub fn vector(&self, sig: &Signature) -> Option<&[f64]> {
        self.index
            .get(sig)
            .map(|&i| &self.vectors[i as usize * self.dim..(i as usize + 1) * self.dim])
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Training output: the table plus the per-epoch mean loss curve.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub table: EmbeddingTable,
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over the extracted pairs, with the
/// input and softmax embeddings tied into one matrix: the pair (a, b)
/// maximizes log sigma(e_a . e_b) plus log sigma(-e_a . e_n) over sampled
/// negatives, drawn proportionally to (popularity + 1)^0.75. Tying is what
/// puts co-saved pins near each other in the one space lookups run in; an
/// untied input matrix provably anti-correlates a pair that co-occurs only
/// with itself. Rows come back normalized.
pub fn train(pairs: &[(u32, u32)], vocab: &Vocab, cfg: &Pin2VecConfig) -> Result<TrainingRun> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    let n = vocab.len();
    let d = cfg.dim;
    for &(a, b) in pairs {
        if a as usize >= n || b as usize >= n {
            return Err(Error::invalid("pair index outside vocabulary"));
        }
    }

    let mut rng = util::rng_from(cfg.seed);
    let mut emb = vec![0.0f64; n * d];
    for v in &mut emb {
        *v = (rng.random::<f64>() - 0.5) / d as f64;
    }

    // Cumulative (popularity + 1)^0.75 table for negative draws.
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0f64;
    for &p in &vocab.popularity {
        total += ((p + 1) as f64).powf(0.75);
        cumulative.push(total);
    }

    let total_updates = (cfg.epochs * pairs.len()) as f64;
    let mut update = 0.0f64;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut delta = vec![0.0f64; d];
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0f64;
        for &(center, context) in pairs {
            let lr = cfg.learning_rate * (1.0 - update / total_updates).max(1e-4);
            update += 1.0;
            let ci = center as usize * d;
            delta.iter_mut().for_each(|x| *x = 0.0);
            // Positive target plus sampled negatives (never the center or
            // the context).
            for k in 0..=cfg.negatives_per_positive {
                let (target, label) = if k == 0 {
                    (context as usize, 1.0)
                } else if n <= 2 {
                    break;
                } else {
                    let mut t;
                    loop {
                        let u: f64 = rng.random::<f64>() * total;
                        t = cumulative.partition_point(|&c| c <= u).min(n - 1);
                        if t != context as usize && t != center as usize {
                            break;
                        }
                    }
                    (t, 0.0)
                };
                let ti = target * d;
                let score = util::dot(&emb[ci..ci + d], &emb[ti..ti + d]);
                let pred = sigmoid(score);
                loss_sum -= if label > 0.5 {
                    pred.max(1e-12).ln()
                } else {
                    (1.0 - pred).max(1e-12).ln()
                };
                let g = (label - pred) * lr;
                for j in 0..d {
                    delta[j] += g * emb[ti + j];
                    emb[ti + j] += g * emb[ci + j];
                }
            }
            for j in 0..d {
                emb[ci + j] += delta[j];
            }
        }
        epoch_loss.push(loss_sum / pairs.len() as f64);
    }

    // Row-normalize for cosine lookups.
    for i in 0..n {
        let row = &mut emb[i * d..(i + 1) * d];
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }

    let index = vocab
        .sigs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    Ok(TrainingRun {
        table: EmbeddingTable {
            vocab: vocab.sigs.clone(),
            index,
            vectors: emb,
            dim: d,
            fingerprint: cfg.fingerprint(),
        },
        epoch_loss,
    })
}

/// Top-k cosine neighbors by exact scan, excluding the query. Out-of-vocab
/// queries yield an empty flagged set rather than an error so the blend
/// pipeline keeps flowing.
pub fn neighbors(table: &EmbeddingTable, query: &Signature, k: usize) -> CandidateSet {
    let Some(query_vec) = table.vector(query) else {
        return CandidateSet::empty(query.clone(), Some(CandidateFlag::OutOfVocab));
    };
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(table.len().saturating_sub(1));
    for i in 0..table.len() {
        let sig = &table.vocab[i];
        if sig == query {
            continue;
        }
        scored.push((util::cosine(query_vec, table.row(i)), i as u32));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| table.vocab[a.1 as usize].cmp(&table.vocab[b.1 as usize]))
    });
    scored.truncate(k);
    CandidateSet {
        query: query.clone(),
        entries: scored
            .into_iter()
            .map(|(score, i)| Candidate {
                signature: table.vocab[i as usize].clone(),
                source: CandidateSource::Pin2Vec,
                generator_score: score,
            })
            .collect(),
        flag: None,
    }
}

const TABLE_MAGIC: &[u8; 4] = b"RRTB";
const TABLE_VERSION: u16 = 1;
const MAX_VOCAB: u32 = 1 << 24;
const MAX_DIM: u32 = 1 << 14;
const MAX_SIG_LEN: usize = 4096;

/// Serialize: header (n, d, fingerprint), row-major vectors, vocab list.
pub fn write_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TABLE_MAGIC)?;
    w.write_u16::<LittleEndian>(TABLE_VERSION)?;
    w.write_u32::<LittleEndian>(table.len() as u32)?;
    w.write_u32::<LittleEndian>(table.dim as u32)?;
    w.write_u64::<LittleEndian>(table.fingerprint)?;
    for v in &table.vectors {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for sig in &table.vocab {
        let bytes = sig.as_bytes();
        if bytes.len() > MAX_SIG_LEN {
            return Err(Error::invalid("signature too long for table"));
        }
        w.write_u16::<LittleEndian>(bytes.len() as u16)?;
        w.write_all(bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path)?;
    read_table_from(BufReader::new(file))
}

/// Decode a table from any reader, failing closed on truncation, size-cap
/// violations, non-finite vectors, or duplicate vocabulary entries.
pub fn read_table_from<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::corrupt("table: short magic"))?;
    if &magic != TABLE_MAGIC {
        return Err(Error::corrupt("table: bad magic"));
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|_| Error::corrupt("table: short header"))?;
    if version != TABLE_VERSION {
        return Err(Error::corrupt("table: unsupported version"));
    }
    let n = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::corrupt("table: short header"))?;
    let d = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::corrupt("table: short header"))?;
    if n > MAX_VOCAB || d == 0 || d > MAX_DIM {
        return Err(Error::corrupt("table: dimensions exceed caps"));
    }
    let fingerprint = r
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::corrupt("table: short header"))?;
    let count = n as usize * d as usize;
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let v = r
            .read_f64::<LittleEndian>()
            .map_err(|_| Error::corrupt("table: short vectors"))?;
        if !v.is_finite() {
            return Err(Error::corrupt("table: non-finite vector entry"));
        }
        vectors.push(v);
    }
    let mut vocab = Vec::with_capacity(n as usize);
    let mut index = BTreeMap::new();
    for i in 0..n {
        let len = r
            .read_u16::<LittleEndian>()
            .map_err(|_| Error::corrupt("table: short vocab"))? as usize;
        if len == 0 || len > MAX_SIG_LEN {
            return Err(Error::corrupt("table: bad signature length"));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)
            .map_err(|_| Error::corrupt("table: short vocab"))?;
        let sig = Signature(
            String::from_utf8(buf).map_err(|_| Error::corrupt("table: signature not utf-8"))?,
        );
        if index.insert(sig.clone(), i).is_some() {
            return Err(Error::corrupt("table: duplicate vocabulary entry"));
        }
        vocab.push(sig);
    }
    Ok(EmbeddingTable {
        vocab,
        index,
        vectors,
        dim: d as usize,
        fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_engagement, load_pins};
    use std::io::Write as _;

    fn pins_with_popularity(entries: &[(&str, u64)]) -> PinCorpus {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (sig, pop) in entries {
            writeln!(
                f,
                r#"{{"sig":"{sig}","pin_ids":["p-{sig}"],"annotations":[],"ann_emb":[],"cat_vec":[1.0],"vis_emb":[],"locale":"en","popularity":{pop}}}"#
            )
            .unwrap();
        }
        load_pins(f.path()).unwrap()
    }

    fn log_with_saves(saves: &[(&str, &str, i64)]) -> EngagementLog {
        // (user, result, ts); impressions auto-generated.
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (i, (user, result, ts)) in saves.iter().enumerate() {
            writeln!(
                f,
                r#"{{"session":"s{i}","user":"{user}","query":"q","result":"{result}","action":"impression","platform":"web","rank":0,"ts":{ts}}}"#
            )
            .unwrap();
            writeln!(
                f,
                r#"{{"session":"s{i}","user":"{user}","query":"q","result":"{result}","action":"save","platform":"web","rank":0,"ts":{ts}}}"#
            )
            .unwrap();
        }
        load_engagement(f.path()).unwrap()
    }

    #[test]
    fn pairs_within_window_both_directions() {
        let pins = pins_with_popularity(&[("a", 5), ("b", 4), ("q", 1)]);
        let vocab = Vocab::head(&pins, 10);
        let log = log_with_saves(&[("u", "a", 100), ("u", "b", 110)]);
        let pairs = extract_session_pairs(&log, &vocab, 60);
        assert_eq!(pairs.len(), 2);
        let a = vocab.get(&"a".into()).unwrap();
        let b = vocab.get(&"b".into()).unwrap();
        assert!(pairs.contains(&(a, b)) && pairs.contains(&(b, a)));
    }

    #[test]
    fn pairs_outside_window_skipped() {
        let pins = pins_with_popularity(&[("a", 5), ("b", 4)]);
        let vocab = Vocab::head(&pins, 10);
        let log = log_with_saves(&[("u", "a", 0), ("u", "b", 7200)]);
        assert!(extract_session_pairs(&log, &vocab, 60).is_empty());
    }

    #[test]
    fn three_saves_make_six_directed_pairs() {
        let pins = pins_with_popularity(&[("a", 5), ("b", 4), ("c", 3)]);
        let vocab = Vocab::head(&pins, 10);
        let log = log_with_saves(&[("u", "a", 0), ("u", "b", 10), ("u", "c", 20)]);
        assert_eq!(extract_session_pairs(&log, &vocab, 60).len(), 6);
    }

    #[test]
    fn vocab_takes_head_by_popularity() {
        let pins = pins_with_popularity(&[("a", 1), ("b", 9), ("c", 5)]);
        let vocab = Vocab::head(&pins, 2);
        assert_eq!(vocab.len(), 2);
        assert!(vocab.get(&"b".into()).is_some());
        assert!(vocab.get(&"c".into()).is_some());
        assert!(vocab.get(&"a".into()).is_none());
    }

    fn exclusive_pair_setup() -> (Vocab, Vec<(u32, u32)>) {
        // 6 pins; "a" and "b" only ever co-occur with each other, the rest
        // co-occur among themselves.
        let pins = pins_with_popularity(&[
            ("a", 10),
            ("b", 9),
            ("c", 8),
            ("d", 7),
            ("e", 6),
            ("f", 5),
        ]);
        let vocab = Vocab::head(&pins, 6);
        let a = vocab.get(&"a".into()).unwrap();
        let b = vocab.get(&"b".into()).unwrap();
        let others: Vec<u32> = ["c", "d", "e", "f"]
            .iter()
            .map(|s| vocab.get(&(*s).into()).unwrap())
            .collect();
        let mut pairs = Vec::new();
        for _ in 0..500 {
            pairs.push((a, b));
            pairs.push((b, a));
        }
        for i in 0..others.len() {
            for j in 0..others.len() {
                if i != j {
                    for _ in 0..80 {
                        pairs.push((others[i], others[j]));
                    }
                }
            }
        }
        (vocab, pairs)
    }

    #[test]
    fn exclusive_pair_become_top_neighbors() {
        let (vocab, pairs) = exclusive_pair_setup();
        let cfg = Pin2VecConfig {
            vocab_size: 6,
            dim: 16,
            epochs: 5,
            seed: 13,
            ..Pin2VecConfig::default()
        };
        let run = train(&pairs, &vocab, &cfg).unwrap();
        let top_a = neighbors(&run.table, &"a".into(), 1);
        let top_b = neighbors(&run.table, &"b".into(), 1);
        assert_eq!(top_a.entries[0].signature.as_str(), "b");
        assert_eq!(top_b.entries[0].signature.as_str(), "a");
    }

    fn clustered_pairs(clusters: usize, per: usize) -> (Vocab, Vec<(u32, u32)>) {
        let entries: Vec<(String, u64)> = (0..clusters * per)
            .map(|i| (format!("p{i:03}"), (clusters * per - i) as u64))
            .collect();
        let refs: Vec<(&str, u64)> = entries.iter().map(|(s, p)| (s.as_str(), *p)).collect();
        let pins = pins_with_popularity(&refs);
        let vocab = Vocab::head(&pins, clusters * per);
        let mut pairs = Vec::new();
        for c in 0..clusters {
            for i in 0..per {
                for j in 0..per {
                    if i != j {
                        let a = vocab.get(&entries[c * per + i].0.as_str().into()).unwrap();
                        let b = vocab.get(&entries[c * per + j].0.as_str().into()).unwrap();
                        pairs.push((a, b));
                    }
                }
            }
        }
        (vocab, pairs)
    }

    #[test]
    fn epoch_loss_non_increasing_within_jitter() {
        let (vocab, pairs) = clustered_pairs(3, 10);
        let cfg = Pin2VecConfig {
            vocab_size: 30,
            dim: 16,
            epochs: 5,
            seed: 1,
            ..Pin2VecConfig::default()
        };
        let run = train(&pairs, &vocab, &cfg).unwrap();
        for w in run.epoch_loss.windows(2) {
            assert!(
                w[1] <= w[0] * 1.05,
                "loss increased beyond jitter: {:?}",
                run.epoch_loss
            );
        }
    }

    #[test]
    fn planted_clusters_recovered_in_top_neighbors() {
        let (vocab, pairs) = clustered_pairs(3, 10);
        let cfg = Pin2VecConfig {
            vocab_size: 30,
            dim: 16,
            epochs: 20,
            seed: 4,
            ..Pin2VecConfig::default()
        };
        let table = train(&pairs, &vocab, &cfg).unwrap().table;
        let mut hits = 0usize;
        let mut total = 0usize;
        for i in 0..30 {
            let sig = Signature(format!("p{i:03}"));
            let cluster = i / 10;
            for c in neighbors(&table, &sig, 5).entries {
                let j: usize = c.signature.as_str()[1..].parse().unwrap();
                if j / 10 == cluster {
                    hits += 1;
                }
                total += 1;
            }
        }
        let purity = hits as f64 / total as f64;
        assert!(purity >= 0.9, "cluster purity {purity}");
    }

    #[test]
    fn training_is_bit_deterministic_per_seed() {
        let (vocab, pairs) = exclusive_pair_setup();
        let cfg = Pin2VecConfig {
            vocab_size: 6,
            dim: 8,
            epochs: 2,
            seed: 42,
            ..Pin2VecConfig::default()
        };
        let a = train(&pairs, &vocab, &cfg).unwrap();
        let b = train(&pairs, &vocab, &cfg).unwrap();
        assert_eq!(a.table, b.table);
        let cfg2 = Pin2VecConfig { seed: 43, ..cfg };
        let c = train(&pairs, &vocab, &cfg2).unwrap();
        assert_ne!(a.table.vectors, c.table.vectors);
    }

    #[test]
    fn neighbors_edge_cases() {
        let (vocab, pairs) = exclusive_pair_setup();
        let cfg = Pin2VecConfig {
            vocab_size: 6,
            dim: 8,
            epochs: 1,
            seed: 5,
            ..Pin2VecConfig::default()
        };
        let table = train(&pairs, &vocab, &cfg).unwrap().table;
        assert!(neighbors(&table, &"a".into(), 0).is_empty());
        let all = neighbors(&table, &"a".into(), 100);
        assert_eq!(all.len(), 5);
        for w in all.entries.windows(2) {
            assert!(w[0].generator_score >= w[1].generator_score);
        }
        let oov = neighbors(&table, &"zz".into(), 3);
        assert!(oov.is_empty());
        assert_eq!(oov.flag, Some(CandidateFlag::OutOfVocab));
    }

    #[test]
    fn neighbors_invariant_under_uniform_scaling() {
        let (vocab, pairs) = exclusive_pair_setup();
        let cfg = Pin2VecConfig {
            vocab_size: 6,
            dim: 8,
            epochs: 1,
            seed: 9,
            ..Pin2VecConfig::default()
        };
        let mut table = train(&pairs, &vocab, &cfg).unwrap().table;
        let before = neighbors(&table, &"c".into(), 5);
        for v in &mut table.vectors {
            *v *= 7.5;
        }
        let after = neighbors(&table, &"c".into(), 5);
        let order_before: Vec<&str> = before.entries.iter().map(|c| c.signature.as_str()).collect();
        let order_after: Vec<&str> = after.entries.iter().map(|c| c.signature.as_str()).collect();
        assert_eq!(order_before, order_after);
    }

    #[test]
    fn table_file_round_trips() {
        let (vocab, pairs) = exclusive_pair_setup();
        let cfg = Pin2VecConfig {
            vocab_size: 6,
            dim: 8,
            epochs: 1,
            seed: 3,
            ..Pin2VecConfig::default()
        };
        let table = train(&pairs, &vocab, &cfg).unwrap().table;
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_table(&table, tmp.path()).unwrap();
        let loaded = read_table(tmp.path()).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn table_reader_rejects_garbage() {
        assert!(read_table_from(&b"nope"[..]).is_err());
        let mut bad = Vec::new();
        bad.extend_from_slice(b"RRTB");
        bad.extend_from_slice(&1u16.to_le_bytes());
        bad.extend_from_slice(&u32::MAX.to_le_bytes()); // absurd n
        bad.extend_from_slice(&8u32.to_le_bytes());
        bad.extend_from_slice(&0u64.to_le_bytes());
        assert!(read_table_from(&bad[..]).is_err());
    }

    #[test]
    fn train_rejects_empty_or_bad_config() {
        let pins = pins_with_popularity(&[("a", 1)]);
        let vocab = Vocab::head(&pins, 1);
        assert!(train(&[], &vocab, &Pin2VecConfig::default()).is_err());
        let cfg = Pin2VecConfig {
            dim: 0,
            ..Pin2VecConfig::default()
        };
        assert!(train(&[(0, 0)], &vocab, &cfg).is_err());
    }
}
