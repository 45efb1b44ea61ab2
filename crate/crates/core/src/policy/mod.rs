//! Attribute-based access control: the shared rule grammar, the decision
//! procedure, identity tokens and delegation.
//!
//! Conditions are conjunctions of set-membership atoms over subject
//! attributes. Attribute semantics are closed-world: an atom naming an
//! attribute the request does not carry is unsatisfied. Matching rules are
//! combined with deny-overrides.

mod delegation;
mod engine;
mod file;
mod token;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delegation::{expand_delegations, DelegationAssertion, RootGrant};
pub use engine::{
    action_matches, combine_decisions, evaluate_request, resource_matches, rule_matches,
};
pub use file::PolicyFile;
pub use token::{verify_token, Token, TokenError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
    #[error("invalid rule `{id}`: {reason}")]
    InvalidRule { id: String, reason: String },
    #[error("invalid delegation {issuer} -> {subject}: {reason}")]
    InvalidDelegation {
        issuer: String,
        subject: String,
        reason: String,
    },
    #[error("`{0}` is not a valid token (expected [a-z0-9_:-]+)")]
    InvalidToken(String),
    #[error("policy file: {0}")]
    Parse(String),
    #[error("policy file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// True when `s` is a non-empty string over `[a-z0-9_:-]`.
pub fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b':' | b'-'))
}

macro_rules! token_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self, PolicyError> {
                let s = s.into();
                if is_token(&s) {
                    Ok(Self(s))
                } else {
                    Err(PolicyError::InvalidToken(s))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = PolicyError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = PolicyError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }
    };
}

token_id!(
    /// A named administrative sphere such as `personal` or `corporate`.
    ContextId
);
token_id!(
    /// A subject that can hold attributes and delegate them.
    PrincipalId
);

/// A `name=value` subject attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAttribute")]
pub struct AttributePair {
    pub name: String,
    pub value: String,
}

#[derive(Deserialize)]
struct RawAttribute {
    name: String,
    value: String,
}

impl TryFrom<RawAttribute> for AttributePair {
    type Error = PolicyError;
    fn try_from(raw: RawAttribute) -> Result<Self, Self::Error> {
        AttributePair::new(raw.name, raw.value)
    }
}

impl AttributePair {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Result<Self, PolicyError> {
        let (name, value) = (name.into(), value.into());
        for part in [&name, &value] {
            if !is_token(part) {
                return Err(PolicyError::InvalidToken(part.clone()));
            }
        }
        Ok(Self { name, value })
    }
}

impl fmt::Display for AttributePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.value)
    }
}

/// Conjunction of atoms `attribute ∈ allowed-values`. Empty matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Condition(BTreeMap<String, BTreeSet<String>>);

impl Condition {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn with<I, S>(mut self, attribute: &str, allowed: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.0.insert(
            attribute.to_string(),
            allowed.into_iter().map(Into::into).collect(),
        );
        self
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn allowed(&self, attribute: &str) -> Option<&BTreeSet<String>> {
        self.0.get(attribute)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Closed world: every atom needs some request attribute with an allowed value.
    pub fn is_satisfied_by(&self, attrs: &BTreeSet<AttributePair>) -> bool {
        self.0.iter().all(|(name, allowed)| {
            attrs
                .iter()
                .any(|a| &a.name == name && allowed.contains(&a.value))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Effect {
    Permit,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Permit,
    Deny,
    NotApplicable,
    Indeterminate,
}

impl Verdict {
    /// Reason string used by the enforcement point when this verdict denies.
    pub fn reason(self) -> &'static str {
        match self {
            Verdict::Permit => "permit",
            Verdict::Deny => "deny",
            Verdict::NotApplicable => "not-applicable",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

impl From<Effect> for Verdict {
    fn from(effect: Effect) -> Self {
        match effect {
            Effect::Permit => Verdict::Permit,
            Effect::Deny => Verdict::Deny,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One access-control rule, scoped to at least one context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub id: String,
    pub effect: Effect,
    #[serde(default)]
    pub subject: Condition,
    /// An action token, or `*` for any action.
    pub action: String,
    /// An exact resource id, or a prefix followed by `*`.
    pub resource: String,
    pub contexts: BTreeSet<ContextId>,
}

impl PolicyRule {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let invalid = |reason: &str| PolicyError::InvalidRule {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.contexts.is_empty() {
            return Err(invalid("rule must be scoped to at least one context"));
        }
        if self.action != "*" && !is_token(&self.action) {
            return Err(invalid("action must be a token or `*`"));
        }
        if self.resource.is_empty() {
            return Err(invalid("empty resource pattern"));
        }
        for (name, allowed) in self.subject.atoms() {
            if !is_token(name) {
                return Err(invalid("condition attribute is not a token"));
            }
            if allowed.is_empty() {
                return Err(invalid("condition atom with no allowed values"));
            }
            if !allowed.iter().all(|v| is_token(v)) {
                return Err(invalid("condition value is not a token"));
            }
        }
        Ok(())
    }
}

/// A request to the decision point. Attributes are already expanded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecisionRequest {
    #[serde(default)]
    pub subject_attrs: BTreeSet<AttributePair>,
    pub action: String,
    pub resource_id: String,
    pub context: ContextId,
    #[serde(default)]
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: String,
    pub matched_rule_ids: Vec<String>,
}

impl Decision {
    pub fn indeterminate(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        Self {
            verdict: Verdict::Indeterminate,
            reason,
            matched_rule_ids: Vec::new(),
        }
    }
}
