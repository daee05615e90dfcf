//! User context assembly.
//!
//! Demographics come from the optional users.jsonl; activity-derived fields
//! (recent engagement, long-term category affinity, language fallback) are
//! computed from the engagement log. Unknown users score with a neutral
//! default context rather than failing the request.

use super::*;

const RECENT_ACTIVITY_CAP: usize = 20;

/// Everything the feature extractor knows about a viewer.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UserContext {
    pub user_id: String,
    pub gender: String,
    pub country: String,
    pub language: String,
    pub recent_search_tokens: Vec<String>,
    /// Most recent first.
    pub recent_activity_signatures: Vec<Signature>,
    pub long_term_category_vector: Vec<f64>,
}

impl UserContext {
    pub fn anonymous(user_id: &str, cat_dim: usize) -> Self {
        UserContext {
            user_id: user_id.to_string(),
            gender: "unknown".to_string(),
            country: "unknown".to_string(),
            language: "unknown".to_string(),
            recent_search_tokens: Vec::new(),
            recent_activity_signatures: Vec::new(),
            long_term_category_vector: vec![0.0; cat_dim],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct UserStore {
    contexts: BTreeMap<String, UserContext>,
    cat_dim: usize,
}

impl UserStore {
    /// Build contexts for every user seen in the log or the profile corpus.
    pub fn build(
        log: &EngagementLog,
        pins: &PinCorpus,
        profiles: Option<&UserCorpus>,
    ) -> UserStore {
        let cat_dim = pins.dims().category;
        #[derive(Default)]
        struct Activity {
            engaged: Vec<(i64, Signature)>,
            saved: Vec<Signature>,
            locale_votes: BTreeMap<String, usize>,
        }
        let mut by_user: BTreeMap<String, Activity> = BTreeMap::new();
        for event in &log.events {
            if !event.action.is_engagement() {
                continue;
            }
            let act = by_user.entry(event.user_id.clone()).or_default();
            act.engaged.push((event.timestamp, event.result.clone()));
            if event.action == Action::Save {
                act.saved.push(event.result.clone());
            }
            if let Some(record) = pins.get(&event.result) {
                *act.locale_votes.entry(record.locale.clone()).or_insert(0) += 1;
            }
        }

        let mut contexts: BTreeMap<String, UserContext> = BTreeMap::new();
        let mut user_ids: BTreeSet<String> = by_user.keys().cloned().collect();
        if let Some(profiles) = profiles {
            user_ids.extend(profiles.users.keys().cloned());
        }
        for user_id in user_ids {
            let mut ctx = UserContext::anonymous(&user_id, cat_dim);
            if let Some(profile) = profiles.and_then(|p| p.get(&user_id)) {
                if !profile.gender.is_empty() {
                    ctx.gender = profile.gender.clone();
                }
                if !profile.country.is_empty() {
                    ctx.country = profile.country.clone();
                }
                if !profile.language.is_empty() {
                    ctx.language = profile.language.clone();
                }
                ctx.recent_search_tokens = profile.recent_search_tokens.clone();
            }
            if let Some(act) = by_user.get(&user_id) {
                let mut engaged = act.engaged.clone();
                engaged.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
                let mut seen = BTreeSet::new();
                for (_, sig) in engaged {
                    if ctx.recent_activity_signatures.len() >= RECENT_ACTIVITY_CAP {
                        break;
                    }
                    if seen.insert(sig.clone()) {
                        ctx.recent_activity_signatures.push(sig);
                    }
                }
                let mut acc = vec![0.0; cat_dim];
                let mut n = 0usize;
                for sig in &act.saved {
                    if let Some(record) = pins.get(sig) {
                        for (slot, v) in acc.iter_mut().zip(&record.category_vector) {
                            *slot += v;
                        }
                        n += 1;
                    }
                }
                if n > 0 {
                    for slot in &mut acc {
                        *slot /= n as f64;
                    }
                    ctx.long_term_category_vector = acc;
                }
                if ctx.language == "unknown" {
                    if let Some((locale, _)) = act
                        .locale_votes
                        .iter()
                        .max_by_key(|(locale, count)| (**count, std::cmp::Reverse((*locale).clone())))
                    {
                        ctx.language = locale.clone();
                    }
                }
            }
            contexts.insert(user_id, ctx);
        }
        UserStore { contexts, cat_dim }
    }

    pub fn from_contexts(contexts: BTreeMap<String, UserContext>, cat_dim: usize) -> UserStore {
        UserStore { contexts, cat_dim }
    }

    pub fn get(&self, user_id: &str) -> Option<&UserContext> {
        self.contexts.get(user_id)
    }

    /// Known context, or a neutral default for strangers.
    pub fn context_or_default(&self, user_id: &str) -> UserContext {
        self.contexts
            .get(user_id)
            .cloned()
            .unwrap_or_else(|| UserContext::anonymous(user_id, self.cat_dim))
    }

    pub fn countries(&self) -> Vec<String> {
        let mut out: BTreeSet<String> = self
            .contexts
            .values()
            .map(|c| c.country.clone())
            .filter(|c| c != "unknown")
            .collect();
        out.remove("");
        out.into_iter().collect()
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}
