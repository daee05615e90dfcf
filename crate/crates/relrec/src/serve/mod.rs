//! Online pipeline assembly and the root/leaf scatter-gather scoring
//! service.
//!
//! Pin raw data lives on leaves, sharded by a stable 64-bit hash of the
//! image signature. The root blends candidates, routes each leaf the
//! subset it owns (plus the query record, user context, and Memboost
//! fragments — never candidate raw data), gathers per-leaf top-k under a
//! deadline, merges globally, and applies the Memboost adjustment,
//! optional insertion, and local swap.

mod http;
mod node;

pub use http::{leaf_router, root_router, serve_leaf, serve_root};
pub use node::{EngineState, LeafHandle, LeafNode, RelatedOutcome, RootNode, ServeConfig, ServeLog};

use crate::corpus::{PinRecord, Signature, UserContext};
use crate::graph::CandidateSource;
use crate::util;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Stable signature hash used for shard routing.
pub fn shard_hash(sig: &Signature) -> u64 {
    util::fnv1a64(sig.as_bytes())
}

/// Deterministic admission into unbiased data collection: each (user,
/// query) pair hashes into [0, 1) and gates when below the fraction.
pub fn unbiased_gate(user_id: &str, query: &Signature, fraction: f64, salt: u64) -> bool {
    if fraction <= 0.0 {
        return false;
    }
    if fraction >= 1.0 {
        return true;
    }
    let h = util::fnv1a64_parts(&[user_id.as_bytes(), query.as_bytes(), &salt.to_le_bytes()]);
    (h as f64 / u64::MAX as f64) < fraction
}

/// One leaf's contiguous hash range, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardRange {
    pub leaf_id: String,
    pub start: u64,
    pub end: u64,
    pub addr: Option<String>,
}

impl ShardRange {
    pub fn owns(&self, hash: u64) -> bool {
        self.start <= hash && hash <= self.end
    }
}

/// Leaf id -> hash range map. Ranges must partition the full u64 space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardMap {
    ranges: Vec<ShardRange>,
}

#[derive(Serialize, Deserialize)]
struct ShardMapWire {
    leaves: Vec<ShardRangeWire>,
}

#[derive(Serialize, Deserialize)]
struct ShardRangeWire {
    id: String,
    /// 16-hex-digit bounds, inclusive.
    start: String,
    end: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    addr: Option<String>,
}

impl ShardMap {
    pub fn new(mut ranges: Vec<ShardRange>) -> Result<ShardMap> {
        ranges.sort_by_key(|r| r.start);
        let map = ShardMap { ranges };
        map.validate()?;
        Ok(map)
    }

    /// Equal partition of the hash space over n leaves.
    pub fn uniform(n: usize) -> ShardMap {
        assert!(n > 0, "shard map needs at least one leaf");
        let span = u64::MAX as u128 + 1;
        let ranges = (0..n as u128)
            .map(|i| ShardRange {
                leaf_id: format!("leaf-{i}"),
                start: (span * i / n as u128) as u64,
                end: (span * (i + 1) / n as u128 - 1) as u64,
                addr: None,
            })
            .collect();
        ShardMap { ranges }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(Error::invalid("shard map is empty"));
        }
        if self.ranges[0].start != 0 {
            return Err(Error::invalid("shard map must start at 0"));
        }
        if self.ranges.last().expect("non-empty").end != u64::MAX {
            return Err(Error::invalid("shard map must end at u64::MAX"));
        }
        for w in self.ranges.windows(2) {
            if w[0].end >= w[1].start {
                return Err(Error::invalid("shard ranges overlap"));
            }
            if w[1].start != w[0].end + 1 {
                return Err(Error::invalid("shard ranges leave a gap"));
            }
        }
        for r in &self.ranges {
            if r.start > r.end {
                return Err(Error::invalid("shard range is inverted"));
            }
        }
        Ok(())
    }

    pub fn owner(&self, sig: &Signature) -> &ShardRange {
        let h = shard_hash(sig);
        let idx = self
            .ranges
            .partition_point(|r| r.end < h)
            .min(self.ranges.len() - 1);
        &self.ranges[idx]
    }

    pub fn owner_index(&self, sig: &Signature) -> usize {
        let h = shard_hash(sig);
        self.ranges
            .partition_point(|r| r.end < h)
            .min(self.ranges.len() - 1)
    }

    pub fn ranges(&self) -> &[ShardRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn from_json(bytes: &[u8]) -> Result<ShardMap> {
        let wire: ShardMapWire = serde_json::from_slice(bytes)?;
        let mut ranges = Vec::with_capacity(wire.leaves.len());
        for leaf in wire.leaves {
            ranges.push(ShardRange {
                start: parse_hex64(&leaf.start)?,
                end: parse_hex64(&leaf.end)?,
                leaf_id: leaf.id,
                addr: leaf.addr,
            });
        }
        ShardMap::new(ranges)
    }

    pub fn to_json(&self) -> String {
        let wire = ShardMapWire {
            leaves: self
                .ranges
                .iter()
                .map(|r| ShardRangeWire {
                    id: r.leaf_id.clone(),
                    start: format!("{:016x}", r.start),
                    end: format!("{:016x}", r.end),
                    addr: r.addr.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("shard map serializes")
    }
}

pub fn parse_hex64(s: &str) -> Result<u64> {
    u64::from_str_radix(s.trim_start_matches("0x"), 16)
        .map_err(|_| Error::invalid(format!("bad hex range bound {s:?}")))
}

/// "A:B" inclusive hex range from the leaf CLI.
pub fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid("range must be START:END hex"))?;
    Ok((parse_hex64(a)?, parse_hex64(b)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireCandidate {
    pub sig: Signature,
    pub source: CandidateSource,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemboostFragment {
    pub sig: Signature,
    pub values: Vec<f64>,
    pub mb: f64,
}

/// Root -> leaf scoring request. Candidate raw data never rides along;
/// leaves look their own shard's records up locally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRequest {
    pub query: Signature,
    pub query_record: Option<PinRecord>,
    pub user: UserContext,
    pub candidates: Vec<WireCandidate>,
    pub memboost: Vec<MemboostFragment>,
    pub top_k: usize,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireScored {
    pub sig: Signature,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankResponse {
    pub leaf_id: String,
    pub results: Vec<WireScored>,
    /// Owned signatures missing from the leaf's corpus: reported, never
    /// silently scored.
    pub unknown: Vec<Signature>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelatedResponse {
    pub query: Signature,
    pub results: Vec<crate::ranking::RankedResult>,
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub gate: String,
    pub leaf_timings: Vec<(String, u64)>,
}
