use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::GovernanceError;
use crate::digest::keyed_digest;
use crate::policy::{ContextId, PolicyRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateKind {
    RuleAdd,
    RuleRemove,
    BlocklistAdd,
    ConfigSet,
}

impl UpdateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateKind::RuleAdd => "rule-add",
            UpdateKind::RuleRemove => "rule-remove",
            UpdateKind::BlocklistAdd => "blocklist-add",
            UpdateKind::ConfigSet => "config-set",
        }
    }
}

/// Typed view of an update payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateBody {
    RuleAdd(PolicyRule),
    RuleRemove(String),
    BlocklistAdd(String),
    ConfigSet { key: String, value: String },
}

impl UpdateBody {
    pub fn kind(&self) -> UpdateKind {
        match self {
            UpdateBody::RuleAdd(_) => UpdateKind::RuleAdd,
            UpdateBody::RuleRemove(_) => UpdateKind::RuleRemove,
            UpdateBody::BlocklistAdd(_) => UpdateKind::BlocklistAdd,
            UpdateBody::ConfigSet { .. } => UpdateKind::ConfigSet,
        }
    }

    fn to_payload(&self) -> Value {
        match self {
            UpdateBody::RuleAdd(rule) => serde_json::to_value(rule).expect("rule serializes"),
            UpdateBody::RuleRemove(id) => json!(id),
            UpdateBody::BlocklistAdd(entry) => json!(entry),
            UpdateBody::ConfigSet { key, value } => json!({ "key": key, "value": value }),
        }
    }
}

/// A sequence-numbered security update from one origin cell.
///
/// `kind` and `payload` travel untyped on the wire; [`UpdatePackage::body`]
/// checks they agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdatePackage {
    pub origin: String,
    pub seq: u64,
    pub kind: UpdateKind,
    pub payload: Value,
    pub contexts: BTreeSet<ContextId>,
    pub issued_tick: u64,
    pub sig: String,
}

impl UpdatePackage {
    pub fn new(
        origin: impl Into<String>,
        seq: u64,
        body: &UpdateBody,
        contexts: BTreeSet<ContextId>,
        issued_tick: u64,
    ) -> Self {
        let mut pkg = UpdatePackage {
            origin: origin.into(),
            seq,
            kind: body.kind(),
            payload: body.to_payload(),
            contexts,
            issued_tick,
            sig: String::new(),
        };
        pkg.sig = pkg.expected_signature();
        pkg
    }

    pub fn expected_signature(&self) -> String {
        let seq = self.seq.to_be_bytes();
        let tick = self.issued_tick.to_be_bytes();
        // serde_json maps are ordered, so this encoding is canonical.
        let payload = self.payload.to_string();
        let mut parts: Vec<&[u8]> = vec![
            self.origin.as_bytes(),
            &seq,
            self.kind.as_str().as_bytes(),
            payload.as_bytes(),
        ];
        parts.extend(self.contexts.iter().map(|c| c.as_str().as_bytes()));
        parts.push(&tick);
        keyed_digest(&self.origin, &parts)
    }

    pub fn signature_valid(&self) -> bool {
        self.sig == self.expected_signature()
    }

    pub fn body(&self) -> Result<UpdateBody, GovernanceError> {
        let malformed = |msg: &str| {
            GovernanceError::MalformedUpdate(format!(
                "{}#{} ({}): {msg}",
                self.origin,
                self.seq,
                self.kind.as_str()
            ))
        };
        if self.contexts.is_empty() {
            return Err(malformed("no contexts"));
        }
        let body = match self.kind {
            UpdateKind::RuleAdd => {
                let rule: PolicyRule = serde_json::from_value(self.payload.clone())
                    .map_err(|e| malformed(&e.to_string()))?;
                rule.validate().map_err(|e| malformed(&e.to_string()))?;
                if !rule.contexts.is_subset(&self.contexts) {
                    return Err(malformed("rule contexts exceed the update's scope"));
                }
                UpdateBody::RuleAdd(rule)
            }
            UpdateKind::RuleRemove => match &self.payload {
                Value::String(id) if !id.is_empty() => UpdateBody::RuleRemove(id.clone()),
                _ => return Err(malformed("payload must be a rule id")),
            },
            UpdateKind::BlocklistAdd => match &self.payload {
                Value::String(entry) if !entry.is_empty() => UpdateBody::BlocklistAdd(entry.clone()),
                _ => return Err(malformed("payload must be a non-empty string")),
            },
            UpdateKind::ConfigSet => {
                let key = self.payload.get("key").and_then(Value::as_str);
                let value = self.payload.get("value").and_then(Value::as_str);
                match (key, value) {
                    (Some(k), Some(v)) if !k.is_empty() => UpdateBody::ConfigSet {
                        key: k.to_string(),
                        value: v.to_string(),
                    },
                    _ => return Err(malformed("payload must be {\"key\",\"value\"} strings")),
                }
            }
        };
        Ok(body)
    }
}
