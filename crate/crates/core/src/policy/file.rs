use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DelegationAssertion, PolicyError, PolicyRule, RootGrant};
use crate::governance::RegressionCase;

/// The JSON policy document a cell is configured from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyFile {
    #[serde(default)]
    pub rules: Vec<PolicyRule>,
    #[serde(default)]
    pub delegations: Vec<DelegationAssertion>,
    #[serde(default)]
    pub roots: Vec<RootGrant>,
    #[serde(default)]
    pub trusted_issuers: BTreeSet<String>,
    #[serde(default)]
    pub regression: Vec<RegressionCase>,
}

impl PolicyFile {
    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: PolicyFile = serde_path_to_error::deserialize(de)
            .map_err(|e| PolicyError::Parse(format!("{} at `{}`", e.inner(), e.path())))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let mut ids = HashSet::new();
        for rule in &self.rules {
            rule.validate()?;
            if !ids.insert(rule.id.as_str()) {
                return Err(PolicyError::DuplicateRuleId(rule.id.clone()));
            }
        }
        for assertion in &self.delegations {
            assertion.validate()?;
        }
        Ok(())
    }
}
