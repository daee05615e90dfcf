//! Corpus ingestion and the shared data model.
//!
//! Items are aggregated on the image-signature level: many pin instances of
//! the same image collapse into one [`PinRecord`]. Boards are user-curated
//! collections of signatures and induce the bipartite graph. Engagement logs
//! arrive as flat event lines and are grouped into [`Session`]s with a
//! best-action per displayed result.
//!
//! Corpora are immutable after load: loading is single-writer, reads are
//! unrestricted.

mod ingest;
mod users;

pub use ingest::{
    load_boards, load_boards_from, load_engagement, load_engagement_from, load_pins,
    load_pins_from, load_users, load_users_from, restore_boards, restore_engagement,
    restore_pins, snapshot_boards, snapshot_engagement, snapshot_pins, snapshot_users,
};

/// Group already-validated in-memory events into sessions (the simulation
/// path; file ingestion does its own validation first).
pub fn build_sessions_from(events: &[EngagementEvent]) -> Vec<Session> {
    ingest::build_sessions(events)
}

/// Serialize one event as an events.jsonl line (the serve log sink and the
/// synthetic generator both emit this format).
pub fn write_event_line<W: std::io::Write>(
    w: &mut W,
    event: &EngagementEvent,
) -> crate::Result<()> {
    ingest::write_event(w, event)
}
pub use users::{UserContext, UserStore};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Content hash identifying an image; the aggregation key for pin instances.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub String);

impl Signature {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Signature {
    fn from(s: &str) -> Self {
        Signature(s.to_string())
    }
}

impl From<String> for Signature {
    fn from(s: String) -> Self {
        Signature(s)
    }
}

/// One image-signature-aggregated item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinRecord {
    pub signature: Signature,
    pub pin_ids: BTreeSet<String>,
    /// Multiset of lowercase tokens (token -> count).
    pub annotations: BTreeMap<String, u32>,
    /// Unit-norm or all-zero, dim fixed per corpus.
    pub annotation_embedding: Vec<f64>,
    /// Entries >= 0, sums to 1 (or all-zero), dim fixed per corpus.
    pub category_vector: Vec<f64>,
    pub visual_embedding: Vec<f64>,
    /// Primary language tag (first instance seen).
    pub locale: String,
    /// Global save count.
    pub popularity: u64,
    /// Locale -> pin instance ids carrying that locale. Aggregation folds
    /// many instances into one record; the local-swap path still needs to
    /// know which locales have an instance of this image.
    pub locale_instances: BTreeMap<String, BTreeSet<String>>,
}

impl PinRecord {
    /// A pin id to display for the given locale, if an instance exists.
    pub fn instance_for_locale(&self, locale: &str) -> Option<&str> {
        self.locale_instances
            .get(locale)
            .and_then(|ids| ids.iter().next())
            .map(|s| s.as_str())
    }

    /// The display instance for the record's primary locale.
    pub fn primary_instance(&self) -> &str {
        self.instance_for_locale(&self.locale)
            .or_else(|| self.pin_ids.iter().next().map(|s| s.as_str()))
            .unwrap_or("")
    }
}

/// Embedding dimensions fixed by the first accepted record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dims {
    pub annotation: usize,
    pub category: usize,
    pub visual: usize,
}

/// Per-load accounting. Rejected records never abort a load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub rejected: usize,
    pub merged: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl LoadReport {
    pub(crate) fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self.reasons.entry(reason.to_string()).or_insert(0) += 1;
    }
}

/// Immutable set of pin records keyed by signature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PinCorpus {
    pub(crate) records: BTreeMap<Signature, PinRecord>,
    pub(crate) dims: Dims,
    pub report: LoadReport,
}

impl PinCorpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, sig: &Signature) -> Option<&PinRecord> {
        self.records.get(sig)
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.records.contains_key(sig)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Records in signature order.
    pub fn iter(&self) -> impl Iterator<Item = &PinRecord> {
        self.records.values()
    }

    pub fn signatures(&self) -> impl Iterator<Item = &Signature> {
        self.records.keys()
    }
}

/// A user-curated collection of pins.
#[derive(Debug, Clone, PartialEq)]
pub struct Board {
    pub board_id: String,
    /// Multiset of lowercase title tokens.
    pub title_tokens: BTreeMap<String, u32>,
    pub locale: String,
    /// Save order, deduplicated, only signatures known to the pin corpus.
    pub pin_signatures: Vec<Signature>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoardCorpus {
    pub(crate) boards: BTreeMap<String, Board>,
    pub report: LoadReport,
}

impl BoardCorpus {
    pub fn len(&self) -> usize {
        self.boards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boards.is_empty()
    }

    pub fn get(&self, board_id: &str) -> Option<&Board> {
        self.boards.get(board_id)
    }

    /// Boards in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Board> {
        self.boards.values()
    }

    /// Number of signatures appearing on two or more boards.
    pub fn shared_membership_count(&self) -> usize {
        let mut seen: BTreeMap<&Signature, u32> = BTreeMap::new();
        for board in self.boards.values() {
            for sig in &board.pin_signatures {
                *seen.entry(sig).or_insert(0) += 1;
            }
        }
        seen.values().filter(|&&c| c >= 2).count()
    }
}

/// Engagement actions, ascending by strength. The derived ordering *is* the
/// best-action total order: save > long_click > click > closeup > impression.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Impression,
    Closeup,
    Click,
    LongClick,
    Save,
}

impl Action {
    pub fn is_engagement(self) -> bool {
        self != Action::Impression
    }

    pub fn grade(self) -> u8 {
        self as u8
    }
}

/// One logged event row.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementEvent {
    pub action: Action,
    pub query: Signature,
    pub result: Signature,
    pub platform: String,
    /// 0-based display position.
    pub rank: u32,
    pub user_id: String,
    pub timestamp: i64,
    pub session_id: String,
    /// Optional serving tags (candidate source, generator score, unbiased
    /// gate, experiment arm), written by the service and the synthetic
    /// generator so training-time features match serving-time features.
    pub source: Option<String>,
    pub generator_score: Option<f64>,
    pub gate: Option<String>,
    pub arm: Option<String>,
}

/// One displayed result within a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub result: Signature,
    pub best_action: Action,
    pub rank: u32,
    pub source: Option<String>,
    pub generator_score: Option<f64>,
}

/// A single user's interactions with one query's results.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub query: Signature,
    pub user_id: String,
    pub platform: String,
    pub start_ts: i64,
    pub gate: Option<String>,
    pub arm: Option<String>,
    /// Ordered by displayed rank.
    pub results: Vec<SessionResult>,
}

/// Accepted events (file order) plus the sessions derived from them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngagementLog {
    pub events: Vec<EngagementEvent>,
    pub sessions: Vec<Session>,
    pub report: LoadReport,
}

impl EngagementLog {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Demographic profile from users.jsonl.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    pub gender: String,
    pub country: String,
    pub language: String,
    pub recent_search_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserCorpus {
    pub(crate) users: BTreeMap<String, UserProfile>,
    pub report: LoadReport,
}

impl UserCorpus {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn get(&self, user_id: &str) -> Option<&UserProfile> {
        self.users.get(user_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_order_matches_best_action_contract() {
        assert!(Action::Save > Action::LongClick);
        assert!(Action::LongClick > Action::Click);
        assert!(Action::Click > Action::Closeup);
        assert!(Action::Closeup > Action::Impression);
    }

    #[test]
    fn action_grades_are_0_to_4() {
        assert_eq!(Action::Impression.grade(), 0);
        assert_eq!(Action::Save.grade(), 4);
    }
}
