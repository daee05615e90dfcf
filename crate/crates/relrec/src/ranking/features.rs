//! Feature extraction over (query, user, candidate, Memboost fragment).
//!
//! Some extractors copy raw data (popularity, Memboost values), some
//! compute match scores (cosines, Jaccard, category dot), and categorical
//! fields are one-hot encoded with no manual crosses — interactions are the
//! model's job. The schema is named and fingerprinted; train and serve must
//! agree on the fingerprint or scoring refuses to run.

use super::FeatureVector;
use crate::corpus::{PinRecord, UserContext};
use crate::graph::CandidateSource;
use crate::memboost::FEATURE_FRAGMENT_LEN;
use crate::util;

const GENDERS: [&str; 4] = ["unknown", "female", "male", "other"];

#[derive(Debug, Clone, PartialEq)]
struct Field {
    name: &'static str,
    offset: usize,
    len: usize,
}

/// Named feature layout plus the country vocabulary baked into the one-hot
/// block. Built once per corpus and persisted inside model files.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    fields: Vec<Field>,
    countries: Vec<String>,
    dim: usize,
    fingerprint: u64,
}

impl FeatureSchema {
    pub fn build(countries: &[String]) -> FeatureSchema {
        let mut countries: Vec<String> = countries.to_vec();
        countries.sort();
        countries.dedup();
        let mut fields = Vec::new();
        let mut offset = 0usize;
        let mut push = |name: &'static str, len: usize| {
            fields.push(Field { name, offset, len });
            offset += len;
        };
        push("category_cosine", 1);
        push("annotation_embedding_cosine", 1);
        push("visual_cosine", 1);
        push("annotation_jaccard", 1);
        push("gender_onehot", GENDERS.len());
        // Slot 0 is unknown/other-country.
        push("country_onehot", countries.len() + 1);
        push("log1p_popularity", 1);
        push("locale_match", 1);
        push("user_category_dot", 1);
        push("recent_search_overlap", 1);
        push("memboost", FEATURE_FRAGMENT_LEN);
        push("source_onehot", CandidateSource::ALL.len());
        push("generator_score", 1);
        let dim = offset;

        let mut parts: Vec<Vec<u8>> = Vec::new();
        for field in &fields {
            parts.push(field.name.as_bytes().to_vec());
            parts.push((field.len as u64).to_le_bytes().to_vec());
        }
        for c in &countries {
            parts.push(c.as_bytes().to_vec());
        }
        let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
        let fingerprint = util::fnv1a64_parts(&refs);
        FeatureSchema {
            fields,
            countries,
            dim,
            fingerprint,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    /// Offset of a named block, for tests and model inspection.
    pub fn offset_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().find(|f| f.name == name).map(|f| f.offset)
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim);
        for field in &self.fields {
            if field.len == 1 {
                out.push(field.name.to_string());
            } else {
                for i in 0..field.len {
                    out.push(format!("{}[{}]", field.name, i));
                }
            }
        }
        out
    }
}

/// Per-candidate serving context: which generator produced it and with what
/// score. Unknown at training time for logs that predate source tagging —
/// the one-hot block is then all zeros.
#[derive(Debug, Clone, Copy, Default)]
pub struct CandidateContext {
    pub source: Option<CandidateSource>,
    pub generator_score: f64,
}

/// Produce the feature vector phi(query, user, candidate). Guaranteed
/// finite for any records that passed ingestion validation: zero vectors
/// contribute zero match scores rather than NaN.
pub fn extract_features(
    schema: &FeatureSchema,
    query: &PinRecord,
    user: &UserContext,
    candidate: &PinRecord,
    ctx: &CandidateContext,
    memboost_fragment: &[f64; FEATURE_FRAGMENT_LEN],
) -> FeatureVector {
    let mut values = vec![0.0f64; schema.dim];
    let mut cursor = 0usize;
    let mut put = |vals: &mut Vec<f64>, xs: &[f64]| {
        vals[cursor..cursor + xs.len()].copy_from_slice(xs);
        cursor += xs.len();
    };

    put(
        &mut values,
        &[util::cosine(&query.category_vector, &candidate.category_vector)],
    );
    put(
        &mut values,
        &[util::cosine(
            &query.annotation_embedding,
            &candidate.annotation_embedding,
        )],
    );
    put(
        &mut values,
        &[util::cosine(&query.visual_embedding, &candidate.visual_embedding)],
    );
    put(
        &mut values,
        &[util::multiset_jaccard(&query.annotations, &candidate.annotations)],
    );

    let mut gender = [0.0; GENDERS.len()];
    let gi = GENDERS
        .iter()
        .position(|g| *g == user.gender)
        .unwrap_or(0);
    gender[gi] = 1.0;
    put(&mut values, &gender);

    let mut country = vec![0.0; schema.countries.len() + 1];
    let ci = schema
        .countries
        .iter()
        .position(|c| *c == user.country)
        .map(|i| i + 1)
        .unwrap_or(0);
    country[ci] = 1.0;
    put(&mut values, &country);

    put(&mut values, &[(candidate.popularity as f64).ln_1p()]);
    let locale_match = if user.language != "unknown" && user.language == candidate.locale {
        1.0
    } else {
        0.0
    };
    put(&mut values, &[locale_match]);
    put(
        &mut values,
        &[util::dot(
            &user.long_term_category_vector,
            &candidate.category_vector,
        )],
    );

    let overlap = if user.recent_search_tokens.is_empty() {
        0.0
    } else {
        let distinct: std::collections::BTreeSet<&str> = user
            .recent_search_tokens
            .iter()
            .map(|t| t.as_str())
            .collect();
        let shared = distinct
            .iter()
            .filter(|t| candidate.annotations.contains_key(**t))
            .count();
        shared as f64 / distinct.len() as f64
    };
    put(&mut values, &[overlap]);

    put(&mut values, memboost_fragment);

    let mut source = [0.0; CandidateSource::ALL.len()];
    if let Some(s) = ctx.source {
        source[CandidateSource::ALL.iter().position(|x| *x == s).unwrap()] = 1.0;
    }
    put(&mut values, &source);
    put(&mut values, &[ctx.generator_score]);

    debug_assert_eq!(cursor, schema.dim);
    FeatureVector {
        values,
        fingerprint: schema.fingerprint,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Signature;
    use std::collections::{BTreeMap, BTreeSet};

    fn record(sig: &str, annotations: &[&str], cat: Vec<f64>, ann_emb: Vec<f64>, vis: Vec<f64>) -> PinRecord {
        let mut ann = BTreeMap::new();
        for a in annotations {
            *ann.entry(a.to_string()).or_insert(0) += 1;
        }
        PinRecord {
            signature: Signature::from(sig),
            pin_ids: BTreeSet::from([format!("p-{sig}")]),
            annotations: ann,
            annotation_embedding: ann_emb,
            category_vector: cat,
            visual_embedding: vis,
            locale: "en".to_string(),
            popularity: 7,
            locale_instances: BTreeMap::new(),
        }
    }

    fn user() -> UserContext {
        UserContext::anonymous("u", 2)
    }

    #[test]
    fn identical_records_hit_match_maxima() {
        let schema = FeatureSchema::build(&[]);
        let r = record("x", &["dog"], vec![0.6, 0.4], vec![1.0, 0.0], vec![0.3, 0.7]);
        let fv = extract_features(
            &schema,
            &r,
            &user(),
            &r,
            &CandidateContext::default(),
            &[0.0; FEATURE_FRAGMENT_LEN],
        );
        assert!((fv.values[schema.offset_of("category_cosine").unwrap()] - 1.0).abs() < 1e-12);
        assert!(
            (fv.values[schema.offset_of("annotation_embedding_cosine").unwrap()] - 1.0).abs()
                < 1e-12
        );
        assert!((fv.values[schema.offset_of("visual_cosine").unwrap()] - 1.0).abs() < 1e-12);
        assert!((fv.values[schema.offset_of("annotation_jaccard").unwrap()] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_never_nan() {
        let schema = FeatureSchema::build(&[]);
        let q = record("q", &[], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        let c = record("c", &[], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        let fv = extract_features(
            &schema,
            &q,
            &user(),
            &c,
            &CandidateContext::default(),
            &[0.0; FEATURE_FRAGMENT_LEN],
        );
        assert!(fv.values.iter().all(|v| v.is_finite()));
        assert_eq!(fv.values[schema.offset_of("category_cosine").unwrap()], 0.0);
    }

    #[test]
    fn category_cosine_lands_at_schema_index() {
        let schema = FeatureSchema::build(&[]);
        // cos = 0.6 exactly: unit vectors (1,0) and (0.6, 0.8).
        let q = record("q", &[], vec![1.0, 0.0], vec![], vec![]);
        let c = record("c", &[], vec![0.6, 0.8], vec![], vec![]);
        let fv = extract_features(
            &schema,
            &q,
            &user(),
            &c,
            &CandidateContext::default(),
            &[0.0; FEATURE_FRAGMENT_LEN],
        );
        let idx = schema.offset_of("category_cosine").unwrap();
        assert!((fv.values[idx] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn schema_fingerprint_depends_on_countries() {
        let a = FeatureSchema::build(&[]);
        let b = FeatureSchema::build(&["us".to_string()]);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(b.dim(), a.dim() + 1);
        let c = FeatureSchema::build(&["us".to_string()]);
        assert_eq!(b.fingerprint(), c.fingerprint());
    }

    #[test]
    fn feature_names_cover_every_dim() {
        let schema = FeatureSchema::build(&["de".to_string(), "us".to_string()]);
        assert_eq!(schema.feature_names().len(), schema.dim());
    }
}
