//! Small shared helpers: stable hashing, seeded RNG streams, vector math.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable that fixes every engine-side seed.
pub const SEED_ENV: &str = "RELREC_SEED";

const DEFAULT_SEED: u64 = 0;

/// Seed from `RELREC_SEED`, falling back to 0.
pub fn global_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// FNV-1a 64-bit. Used wherever a hash must be stable across runs,
/// platforms, and compiler versions (shard routing, gating, fingerprints);
/// std's hasher guarantees none of that.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable hash of several parts with a separator byte so that
/// ("ab","c") and ("a","bc") differ.
pub fn fnv1a64_parts(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive an independent sub-seed from a base seed and a string tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    fnv1a64_parts(&[&base.to_le_bytes(), tag.as_bytes()])
}

/// Derive an independent sub-seed from a base seed, a tag, and an index.
pub fn derive_seed_indexed(base: u64, tag: &str, index: u64) -> u64 {
    fnv1a64_parts(&[&base.to_le_bytes(), tag.as_bytes(), &index.to_le_bytes()])
}

/// Seeded RNG stream. ChaCha8 keeps the stream identical across platforms.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; either vector (near-)zero contributes 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na <= 1e-12 || nb <= 1e-12 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

pub fn is_zero_vec(a: &[f64]) -> bool {
    a.iter().all(|x| *x == 0.0)
}

/// Multiset Jaccard: sum of per-key min counts over sum of per-key max
/// counts. Two empty multisets score 0.
pub fn multiset_jaccard(
    a: &std::collections::BTreeMap<String, u32>,
    b: &std::collections::BTreeMap<String, u32>,
) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut inter: u64 = 0;
    let mut union: u64 = 0;
    for (tok, &ca) in a {
        let cb = b.get(tok).copied().unwrap_or(0);
        inter += ca.min(cb) as u64;
        union += ca.max(cb) as u64;
    }
    for (tok, &cb) in b {
        if !a.contains_key(tok) {
            union += cb as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ms(items: &[(&str, u32)]) -> BTreeMap<String, u32> {
        items.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn parts_separator_distinguishes_boundaries() {
        assert_ne!(
            fnv1a64_parts(&[b"ab", b"c"]),
            fnv1a64_parts(&[b"a", b"bc"])
        );
    }

    #[test]
    fn cosine_guards_zero_vectors() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiset_jaccard_cases() {
        assert_eq!(multiset_jaccard(&ms(&[]), &ms(&[])), 0.0);
        let a = ms(&[("x", 2), ("y", 1)]);
        let b = ms(&[("x", 1), ("z", 1)]);
        // min: x=1; max: x=2,y=1,z=1 -> 1/4
        assert!((multiset_jaccard(&a, &b) - 0.25).abs() < 1e-12);
        assert_eq!(multiset_jaccard(&a, &a), 1.0);
    }
}
