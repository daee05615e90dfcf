//! Multi-source candidate generation, shared by the simulator and the
//! serving stack.

use crate::corpus::{BoardCorpus, PinCorpus, Signature};
use crate::graph::{BipartiteGraph, CandidateSet, GraphConfig, WalkConfig};
use crate::pin2vec::EmbeddingTable;
use crate::supplemental::{AnnotationIndex, BlendPolicy};
use crate::util;
use crate::Result;

/// Borrowed view over everything candidate generation reads.
pub struct CandidateEngine<'a> {
    pub pins: &'a PinCorpus,
    pub boards: &'a BoardCorpus,
    pub graph: &'a BipartiteGraph,
    pub index: &'a AnnotationIndex,
    pub table: Option<&'a EmbeddingTable>,
    pub graph_cfg: &'a GraphConfig,
    pub walk: &'a WalkConfig,
    pub policy: &'a BlendPolicy,
    pub budget: usize,
    pub seed: u64,
}

impl CandidateEngine<'_> {
    /// Run every configured source for one query and blend. Per-query
    /// derived seeds keep each source deterministic independently of call
    /// order.
    pub fn generate(&self, query: &Signature, viewer_locale: Option<&str>) -> Result<CandidateSet> {
        let mut sets = Vec::new();
        sets.push(crate::graph::board_cooccurrence(
            self.graph,
            self.pins,
            query,
            self.budget,
            util::derive_seed(self.seed, &format!("cooc/{query}")),
        ));
        if self.graph.contains(query) {
            let walk_cfg = WalkConfig {
                seed: util::derive_seed(self.seed, &format!("walk/{query}")),
                ..self.walk.clone()
            };
            sets.push(crate::graph::random_walk(self.graph, query, &walk_cfg)?);
        }
        if let Some(table) = self.table {
            sets.push(crate::pin2vec::neighbors(table, query, self.budget));
        }
        if let Some(record) = self.pins.get(query) {
            sets.push(crate::supplemental::search_candidates(
                self.index,
                record,
                self.budget,
            ));
            sets.push(crate::supplemental::visual_candidates(
                self.pins,
                record,
                self.budget,
                crate::supplemental::DEFAULT_DUP_THRESHOLD,
                |_| Vec::new(),
            ));
        }
        if let Some(locale) = viewer_locale {
            if locale != "unknown" && !locale.is_empty() {
                sets.push(crate::supplemental::segmented_candidates(
                    self.boards,
                    self.pins,
                    locale,
                    query,
                    self.budget,
                    self.graph_cfg,
                    util::derive_seed(self.seed, &format!("segmented/{query}/{locale}")),
                )?);
            }
        }
        crate::supplemental::blend(
            &sets,
            self.policy,
            self.budget,
            viewer_locale,
            util::derive_seed(self.seed, &format!("blend/{query}")),
        )
    }
}
