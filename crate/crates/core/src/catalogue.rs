//! The cell's record of known partner cells.
//!
//! Entries are keyed by cell id, carry a freshness stamp for TTL eviction and
//! a per-context trust flag. Trust is capability-set inclusion against the
//! owner's [`TrustPolicy`] and fails closed: a context the policy does not
//! mention is never trusted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governance::PolicyStoreState;
use crate::policy::ContextId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogueError {
    #[error("cell `{0}` cannot register itself")]
    SelfRegistration(String),
    #[error("a trusted-only query needs a context")]
    TrustedQueryWithoutContext,
    #[error("invalid profile for `{cell}`: {reason}")]
    InvalidProfile { cell: String, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Capabilities a partner must advertise to be trusted in each context.
pub type TrustPolicy = BTreeMap<ContextId, BTreeSet<String>>;

/// What a cell advertises about itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellProfile {
    pub cell_id: String,
    pub endpoint: String,
    pub contexts: BTreeSet<ContextId>,
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
    pub resource_kind: String,
    #[serde(default)]
    pub advertised_at_tick: u64,
    pub ttl_ticks: u64,
}

impl CellProfile {
    pub fn validate(&self) -> Result<(), CatalogueError> {
        let invalid = |reason: &str| CatalogueError::InvalidProfile {
            cell: self.cell_id.clone(),
            reason: reason.to_string(),
        };
        if self.cell_id.is_empty() {
            return Err(invalid("empty cell id"));
        }
        if self.ttl_ticks == 0 {
            return Err(invalid("ttl must be at least one tick"));
        }
        if self.contexts.is_empty() {
            return Err(invalid("no contexts"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogueEntry {
    pub profile: CellProfile,
    pub last_seen_tick: u64,
    pub trusted: BTreeMap<ContextId, bool>,
}

impl CatalogueEntry {
    pub fn is_trusted(&self, context: &ContextId) -> bool {
        self.trusted.get(context).copied().unwrap_or(false)
    }

    fn trust_flags(profile: &CellProfile, policy: &TrustPolicy) -> BTreeMap<ContextId, bool> {
        profile
            .contexts
            .iter()
            .map(|c| {
                let ok = policy
                    .get(c)
                    .is_some_and(|required| required.is_subset(&profile.capabilities));
                (c.clone(), ok)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalogue {
    owner: String,
    entries: BTreeMap<String, CatalogueEntry>,
}

impl Catalogue {
    pub fn new(owner: impl Into<String>) -> Self {
        Self {
            owner: owner.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn upsert_entry(
        &mut self,
        profile: CellProfile,
        now: u64,
        trust: &TrustPolicy,
    ) -> Result<&CatalogueEntry, CatalogueError> {
        if profile.cell_id == self.owner {
            return Err(CatalogueError::SelfRegistration(profile.cell_id));
        }
        profile.validate()?;
        if profile.advertised_at_tick > now {
            return Err(CatalogueError::InvalidProfile {
                cell: profile.cell_id,
                reason: format!("advertised in the future (tick {now})"),
            });
        }
        let entry = CatalogueEntry {
            trusted: CatalogueEntry::trust_flags(&profile, trust),
            last_seen_tick: now,
            profile,
        };
        let id = entry.profile.cell_id.clone();
        self.entries.insert(id.clone(), entry);
        Ok(&self.entries[&id])
    }

    /// Evicts entries with `last_seen + ttl < now`; returns their ids in order.
    pub fn expire_stale(&mut self, now: u64) -> Vec<String> {
        let stale: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| e.last_seen_tick.saturating_add(e.profile.ttl_ticks) < now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            self.entries.remove(id);
        }
        stale
    }

    pub fn query(
        &self,
        context: Option<&ContextId>,
        capability: Option<&str>,
        trusted_only: bool,
    ) -> Result<Vec<&CatalogueEntry>, CatalogueError> {
        if trusted_only && context.is_none() {
            return Err(CatalogueError::TrustedQueryWithoutContext);
        }
        Ok(self
            .entries
            .values()
            .filter(|e| context.is_none_or(|c| e.profile.contexts.contains(c)))
            .filter(|e| capability.is_none_or(|cap| e.profile.capabilities.contains(cap)))
            .filter(|e| !trusted_only || context.is_some_and(|c| e.is_trusted(c)))
            .collect())
    }

    /// Recomputes every entry's trust flags under a new policy.
    pub fn retrust(&mut self, trust: &TrustPolicy) {
        for entry in self.entries.values_mut() {
            entry.trusted = CatalogueEntry::trust_flags(&entry.profile, trust);
        }
    }

    pub fn get(&self, cell_id: &str) -> Option<&CatalogueEntry> {
        self.entries.get(cell_id)
    }

    pub fn contains(&self, cell_id: &str) -> bool {
        self.entries.contains_key(cell_id)
    }

    pub fn is_trusted(&self, cell_id: &str, context: &ContextId) -> bool {
        self.get(cell_id).is_some_and(|e| e.is_trusted(context))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogueEntry> {
        self.entries.values()
    }

    pub fn checkpoint(&self, store: &PolicyStoreState) -> Checkpoint {
        Checkpoint {
            entries: self.entries.values().cloned().collect(),
            policy_store: store.clone(),
            version: Checkpoint::FORMAT_VERSION,
        }
    }

    pub fn restore(
        owner: impl Into<String>,
        checkpoint: Checkpoint,
    ) -> Result<(Catalogue, PolicyStoreState), CatalogueError> {
        if checkpoint.version != Checkpoint::FORMAT_VERSION {
            return Err(CatalogueError::Checkpoint(format!(
                "unsupported version {}",
                checkpoint.version
            )));
        }
        let mut catalogue = Catalogue::new(owner);
        for entry in checkpoint.entries {
            if entry.profile.cell_id == catalogue.owner {
                return Err(CatalogueError::SelfRegistration(entry.profile.cell_id));
            }
            catalogue.entries.insert(entry.profile.cell_id.clone(), entry);
        }
        Ok((catalogue, checkpoint.policy_store))
    }
}

/// Persisted catalogue plus the owner's policy store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checkpoint {
    pub entries: Vec<CatalogueEntry>,
    pub policy_store: PolicyStoreState,
    pub version: u32,
}

impl Checkpoint {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogueError> {
        serde_json::from_str(text).map_err(|e| CatalogueError::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(s: &str) -> ContextId {
        ContextId::new(s).unwrap()
    }

    fn profile(id: &str, contexts: &[&str], caps: &[&str]) -> CellProfile {
        CellProfile {
            cell_id: id.into(),
            endpoint: id.into(),
            contexts: contexts.iter().map(|c| ctx(c)).collect(),
            capabilities: caps.iter().map(|c| c.to_string()).collect(),
            resource_kind: "email-filter".into(),
            advertised_at_tick: 0,
            ttl_ticks: 5,
        }
    }

    fn trust() -> TrustPolicy {
        [(ctx("personal"), ["blocklist-producer".to_string()].into())].into()
    }

    #[test]
    fn upsert_sets_last_seen_and_trust() {
        let mut cat = Catalogue::new("me");
        let e = cat
            .upsert_entry(profile("a", &["personal", "work"], &["blocklist-producer"]), 3, &trust())
            .unwrap();
        assert_eq!(e.last_seen_tick, 3);
        assert!(e.is_trusted(&ctx("personal")));
        assert!(!e.is_trusted(&ctx("work")));
        assert_eq!(e.trusted.len(), 2);
    }

    #[test]
    fn readvertisement_replaces_profile_and_recomputes_trust() {
        let mut cat = Catalogue::new("me");
        cat.upsert_entry(profile("a", &["personal"], &["blocklist-producer"]), 0, &trust())
            .unwrap();
        cat.upsert_entry(profile("a", &["personal"], &[]), 1, &trust()).unwrap();
        assert_eq!(cat.len(), 1);
        assert!(!cat.is_trusted("a", &ctx("personal")));
    }

    #[test]
    fn self_registration_rejected() {
        let mut cat = Catalogue::new("me");
        assert_eq!(
            cat.upsert_entry(profile("me", &["personal"], &[]), 0, &trust()).unwrap_err(),
            CatalogueError::SelfRegistration("me".into())
        );
    }

    #[test]
    fn expiry_is_strict() {
        let mut cat = Catalogue::new("me");
        cat.upsert_entry(profile("a", &["personal"], &[]), 0, &trust()).unwrap();
        assert!(cat.expire_stale(5).is_empty());
        assert_eq!(cat.expire_stale(6), ["a"]);
        assert!(cat.expire_stale(7).is_empty());
    }

    #[test]
    fn queries() {
        let mut cat = Catalogue::new("me");
        cat.upsert_entry(profile("b", &["work"], &["x"]), 0, &trust()).unwrap();
        cat.upsert_entry(profile("a", &["work"], &["y"]), 0, &trust()).unwrap();
        let ids = |v: Vec<&CatalogueEntry>| v.iter().map(|e| e.profile.cell_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(cat.query(None, None, false).unwrap()), ["a", "b"]);
        assert!(cat.query(Some(&ctx("home")), None, false).unwrap().is_empty());
        assert_eq!(ids(cat.query(None, Some("x"), false).unwrap()), ["b"]);
        assert_eq!(
            cat.query(None, None, true).unwrap_err(),
            CatalogueError::TrustedQueryWithoutContext
        );
        assert!(cat.query(Some(&ctx("work")), None, true).unwrap().is_empty());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut cat = Catalogue::new("me");
        cat.upsert_entry(profile("a", &["personal"], &["blocklist-producer"]), 2, &trust())
            .unwrap();
        let store = PolicyStoreState::default();
        let text = cat.checkpoint(&store).to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["entries", "policyStore", "version"]);
        let (cat2, store2) = Catalogue::restore("me", Checkpoint::from_json(&text).unwrap()).unwrap();
        assert_eq!(cat2, cat);
        assert_eq!(store2, store);
    }
}
