use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::impact::{assess_update_impact, AssessmentVerdict, ImpactAssessment};
use super::{GovernanceError, RegressionCase, UpdateBody, UpdatePackage};
use crate::policy::{ContextId, PolicyRule};

pub const DEFAULT_PENDING_CAP: usize = 64;

fn default_pending_cap() -> usize {
    DEFAULT_PENDING_CAP
}

/// A blocklisted value, scoped to one context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlocklistEntry {
    pub context: ContextId,
    pub entry: String,
}

/// A cell's own policy store together with its per-origin update stream state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyStoreState {
    pub rules: BTreeMap<String, PolicyRule>,
    pub blocklist: BTreeSet<BlocklistEntry>,
    pub config: BTreeMap<String, String>,
    pub version: u64,
    /// Highest contiguously consumed seq per origin.
    pub applied_seq: BTreeMap<String, u64>,
    /// Out-of-order packages per origin, oldest arrival first.
    pub pending: BTreeMap<String, Vec<UpdatePackage>>,
    #[serde(default = "default_pending_cap")]
    pub pending_cap: usize,
}

impl Default for PolicyStoreState {
    fn default() -> Self {
        Self {
            rules: BTreeMap::new(),
            blocklist: BTreeSet::new(),
            config: BTreeMap::new(),
            version: 0,
            applied_seq: BTreeMap::new(),
            pending: BTreeMap::new(),
            pending_cap: DEFAULT_PENDING_CAP,
        }
    }
}

impl PolicyStoreState {
    pub fn with_rules(rules: impl IntoIterator<Item = PolicyRule>) -> Self {
        Self {
            rules: rules.into_iter().map(|r| (r.id.clone(), r)).collect(),
            ..Self::default()
        }
    }

    /// The seq the origin's stream expects next; streams start at 0.
    pub fn next_seq(&self, origin: &str) -> u64 {
        self.applied_seq.get(origin).map_or(0, |s| s + 1)
    }

    pub fn blocklist_contains(&self, context: &ContextId, entry: &str) -> bool {
        self.blocklist.iter().any(|b| &b.context == context && b.entry == entry)
    }

    pub fn blocklist_for<'a>(&'a self, context: &'a ContextId) -> impl Iterator<Item = &'a str> {
        self.blocklist
            .iter()
            .filter(move |b| &b.context == context)
            .map(|b| b.entry.as_str())
    }

    /// The rule set after `body`, without touching `self`.
    pub(crate) fn rules_after(
        &self,
        body: &UpdateBody,
        contexts: &BTreeSet<ContextId>,
    ) -> Result<BTreeMap<String, PolicyRule>, GovernanceError> {
        let mut rules = self.rules.clone();
        match body {
            UpdateBody::RuleAdd(rule) => {
                if let Some(existing) = rules.get(&rule.id) {
                    if !existing.contexts.is_subset(contexts) {
                        return Err(GovernanceError::MalformedUpdate(format!(
                            "rule `{}` is scoped outside the update's contexts",
                            rule.id
                        )));
                    }
                }
                rules.insert(rule.id.clone(), rule.clone());
            }
            UpdateBody::RuleRemove(id) => {
                if let Some(existing) = rules.get(id) {
                    if !existing.contexts.is_subset(contexts) {
                        return Err(GovernanceError::MalformedUpdate(format!(
                            "rule `{id}` is scoped outside the update's contexts"
                        )));
                    }
                }
                rules.remove(id);
            }
            UpdateBody::BlocklistAdd(_) | UpdateBody::ConfigSet { .. } => {}
        }
        Ok(rules)
    }

    fn commit(&mut self, pkg: &UpdatePackage, body: UpdateBody) -> Result<(), GovernanceError> {
        let rules = self.rules_after(&body, &pkg.contexts)?;
        match body {
            UpdateBody::BlocklistAdd(entry) => {
                for context in &pkg.contexts {
                    self.blocklist.insert(BlocklistEntry {
                        context: context.clone(),
                        entry: entry.clone(),
                    });
                }
            }
            UpdateBody::ConfigSet { key, value } => {
                self.config.insert(key, value);
            }
            UpdateBody::RuleAdd(_) | UpdateBody::RuleRemove(_) => {}
        }
        self.rules = rules;
        self.version += 1;
        Ok(())
    }

    fn consume(&mut self, pkg: &UpdatePackage, regression: &[RegressionCase]) -> ApplyStatus {
        let status = match assess_update_impact(self, pkg, regression) {
            Err(GovernanceError::MalformedUpdate(reason)) => ApplyStatus::Malformed(reason),
            Err(other) => ApplyStatus::Malformed(other.to_string()),
            Ok(assessment) if assessment.verdict == AssessmentVerdict::Reject => {
                ApplyStatus::Rejected(assessment)
            }
            Ok(_) => {
                let committed = pkg.body().and_then(|body| self.commit(pkg, body));
                match committed {
                    Ok(()) => ApplyStatus::Applied,
                    Err(e) => ApplyStatus::Malformed(e.to_string()),
                }
            }
        };
        self.applied_seq.insert(pkg.origin.clone(), pkg.seq);
        status
    }

    fn buffer(&mut self, pkg: UpdatePackage) -> bool {
        let cap = self.pending_cap;
        let queue = self.pending.entry(pkg.origin.clone()).or_default();
        if queue.iter().any(|p| p.seq == pkg.seq) {
            return false;
        }
        queue.push(pkg);
        if queue.len() > cap {
            let dropped = queue.remove(0);
            log::warn!(
                "pending buffer for {} full; dropped seq {}",
                dropped.origin,
                dropped.seq
            );
        }
        true
    }

    fn take_pending(&mut self, origin: &str, seq: u64) -> Option<UpdatePackage> {
        let queue = self.pending.get_mut(origin)?;
        let pos = queue.iter().position(|p| p.seq == seq)?;
        let pkg = queue.remove(pos);
        if queue.is_empty() {
            self.pending.remove(origin);
        }
        Some(pkg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "kebab-case")]
pub enum ApplyStatus {
    Applied,
    Duplicate,
    Buffered,
    /// Consumed without effect: a protected regression case would flip.
    Rejected(ImpactAssessment),
    /// Consumed without effect: payload does not match its kind or scope.
    Malformed(String),
}

impl ApplyStatus {
    pub fn name(&self) -> &'static str {
        match self {
            ApplyStatus::Applied => "applied",
            ApplyStatus::Duplicate => "duplicate",
            ApplyStatus::Buffered => "buffered",
            ApplyStatus::Rejected(_) => "rejected",
            ApplyStatus::Malformed(_) => "malformed",
        }
    }
}

/// A package whose seq was consumed by this call, with what happened to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Consumed {
    pub package: UpdatePackage,
    pub status: ApplyStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyResult {
    /// Outcome for the package passed in.
    pub status: ApplyStatus,
    /// Every package consumed by this call in seq order: the one passed in,
    /// if it was next in line, followed by contiguous buffered successors.
    pub consumed: Vec<Consumed>,
}

/// Applies `upd` to the store if it is next in its origin's stream, buffers it
/// if it is early, and ignores it if its seq was already consumed.
///
/// A rejected or malformed package still consumes its seq so the stream keeps
/// moving. After consuming, buffered successors are drained while contiguous,
/// each assessed in turn.
pub fn apply_update(
    state: &mut PolicyStoreState,
    upd: &UpdatePackage,
    regression: &[RegressionCase],
) -> Result<ApplyResult, GovernanceError> {
    if !upd.signature_valid() {
        return Err(GovernanceError::BadSignature {
            origin: upd.origin.clone(),
            seq: upd.seq,
        });
    }
    let next = state.next_seq(&upd.origin);
    if upd.seq < next {
        return Ok(ApplyResult {
            status: ApplyStatus::Duplicate,
            consumed: Vec::new(),
        });
    }
    if upd.seq > next {
        let status = if state.buffer(upd.clone()) {
            ApplyStatus::Buffered
        } else {
            ApplyStatus::Duplicate
        };
        return Ok(ApplyResult {
            status,
            consumed: Vec::new(),
        });
    }

    let status = state.consume(upd, regression);
    let mut consumed = vec![Consumed {
        package: upd.clone(),
        status: status.clone(),
    }];
    while let Some(pkg) = state.take_pending(&upd.origin, state.next_seq(&upd.origin)) {
        let status = state.consume(&pkg, regression);
        consumed.push(Consumed {
            package: pkg,
            status,
        });
    }
    Ok(ApplyResult { status, consumed })
}

/// Rules visible in context `c`, ordered by id.
pub fn context_view<'a>(state: &'a PolicyStoreState, c: &ContextId) -> Vec<&'a PolicyRule> {
    state
        .rules
        .values()
        .filter(|r| r.contexts.contains(c))
        .collect()
}
