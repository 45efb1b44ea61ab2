//! Policy governance: conflict analysis, impact assessment of incoming
//! security updates, ordered application of update streams, and
//! per-context views of the policy store.

mod conflicts;
mod impact;
mod store;
mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{DecisionRequest, Verdict};

pub use conflicts::{detect_conflicts, ConflictDomains, ConflictReport};
pub use impact::{assess_update_impact, AssessmentVerdict, Flip, ImpactAssessment};
pub use store::{
    apply_update, context_view, ApplyResult, ApplyStatus, BlocklistEntry, Consumed,
    PolicyStoreState, DEFAULT_PENDING_CAP,
};
pub use update::{UpdateBody, UpdateKind, UpdatePackage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GovernanceError {
    #[error("attribute `{0}` has no declared domain")]
    UnknownAttributeDomain(String),
    #[error("malformed update: {0}")]
    MalformedUpdate(String),
    #[error("bad signature on update {origin}#{seq}")]
    BadSignature { origin: String, seq: u64 },
}

/// A request whose verdict an update must not change when `protected`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionCase {
    pub request: DecisionRequest,
    pub expected: Verdict,
    #[serde(default)]
    pub protected: bool,
}
