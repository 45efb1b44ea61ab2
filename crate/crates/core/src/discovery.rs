//! Advertisement, mutual registration and registry lookups.
//!
//! A registry is an ordinary cell advertising the `registry` capability that
//! answers lookups from its own catalogue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{Catalogue, CatalogueError, CellProfile, TrustPolicy};
use crate::policy::ContextId;

pub const REGISTRY_CAPABILITY: &str = "registry";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscoveryError {
    #[error("cell `{0}` cannot register with itself")]
    SelfRegistration(String),
    #[error(transparent)]
    Catalogue(#[from] CatalogueError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advertisement {
    pub profile: CellProfile,
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationRequest {
    pub profile: CellProfile,
    pub want_reply: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryLookup {
    #[serde(default)]
    pub context: Option<ContextId>,
    #[serde(default)]
    pub capability: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvertOutcome {
    Accepted,
    StaleNonce,
    SelfIgnored,
}

#[derive(Debug, Clone)]
pub struct Discovery {
    profile: CellProfile,
    next_nonce: u64,
    last_nonce: BTreeMap<String, u64>,
}

impl Discovery {
    pub fn new(profile: CellProfile) -> Self {
        Self {
            profile,
            next_nonce: 0,
            last_nonce: BTreeMap::new(),
        }
    }

    pub fn cell_id(&self) -> &str {
        &self.profile.cell_id
    }

    pub fn profile_at(&self, now: u64) -> CellProfile {
        CellProfile {
            advertised_at_tick: now,
            ..self.profile.clone()
        }
    }

    pub fn profile(&self) -> &CellProfile {
        &self.profile
    }

    pub fn make_advertisement(&mut self, now: u64) -> Advertisement {
        let nonce = self.next_nonce;
        self.next_nonce += 1;
        Advertisement {
            profile: self.profile_at(now),
            nonce,
        }
    }

    pub fn handle_advertisement(
        &mut self,
        adv: Advertisement,
        now: u64,
        catalogue: &mut Catalogue,
        trust: &TrustPolicy,
    ) -> Result<AdvertOutcome, DiscoveryError> {
        let from = adv.profile.cell_id.clone();
        if from == self.profile.cell_id {
            return Ok(AdvertOutcome::SelfIgnored);
        }
        if self.last_nonce.get(&from).is_some_and(|&seen| adv.nonce <= seen) {
            return Ok(AdvertOutcome::StaleNonce);
        }
        catalogue.upsert_entry(adv.profile, now, trust)?;
        self.last_nonce.insert(from, adv.nonce);
        Ok(AdvertOutcome::Accepted)
    }

    pub fn register_with(&self, target: &str, now: u64) -> Result<RegistrationRequest, DiscoveryError> {
        if target == self.profile.cell_id {
            return Err(DiscoveryError::SelfRegistration(target.to_string()));
        }
        Ok(RegistrationRequest {
            profile: self.profile_at(now),
            want_reply: true,
        })
    }

    /// Records the sender and, when asked, returns our own profile for it.
    pub fn handle_registration(
        &self,
        req: RegistrationRequest,
        now: u64,
        catalogue: &mut Catalogue,
        trust: &TrustPolicy,
    ) -> Result<Option<RegistrationRequest>, DiscoveryError> {
        catalogue.upsert_entry(req.profile, now, trust)?;
        Ok(req.want_reply.then(|| RegistrationRequest {
            profile: self.profile_at(now),
            want_reply: false,
        }))
    }

    /// Profiles matching the lookup, or `None` when this cell is not a registry.
    pub fn answer_lookup(&self, lookup: &RegistryLookup, catalogue: &Catalogue) -> Option<Vec<CellProfile>> {
        if !self.profile.capabilities.contains(REGISTRY_CAPABILITY) {
            return None;
        }
        let found = catalogue
            .query(lookup.context.as_ref(), lookup.capability.as_deref(), false)
            .expect("untrusted query cannot fail");
        Some(found.into_iter().map(|e| e.profile.clone()).collect())
    }

    /// Upserts looked-up profiles, skipping our own; returns how many were added.
    pub fn handle_lookup_reply(
        &self,
        profiles: Vec<CellProfile>,
        now: u64,
        catalogue: &mut Catalogue,
        trust: &TrustPolicy,
    ) -> usize {
        profiles
            .into_iter()
            .filter(|p| p.cell_id != self.profile.cell_id)
            .filter(|p| catalogue.upsert_entry(p.clone(), now, trust).is_ok())
            .count()
    }
}
