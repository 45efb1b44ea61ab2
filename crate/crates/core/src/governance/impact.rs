use serde::{Deserialize, Serialize};

use super::{GovernanceError, PolicyStoreState, RegressionCase, UpdatePackage};
use crate::policy::{evaluate_request, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssessmentVerdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Flip {
    pub case_index: usize,
    pub case: RegressionCase,
    pub old_verdict: Verdict,
    pub new_verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactAssessment {
    pub flips: Vec<Flip>,
    pub verdict: AssessmentVerdict,
    /// Index of the first protected case that flipped.
    pub rejected_because: Option<usize>,
}

/// Evaluates every regression request before and after a hypothetical
/// application of `upd`. Any flipped protected case rejects the update.
pub fn assess_update_impact(
    state: &PolicyStoreState,
    upd: &UpdatePackage,
    regression: &[RegressionCase],
) -> Result<ImpactAssessment, GovernanceError> {
    let body = upd.body()?;
    let after = state.rules_after(&body, &upd.contexts)?;
    let mut flips = Vec::new();
    for (case_index, case) in regression.iter().enumerate() {
        let old = evaluate_request(state.rules.values(), &case.request)
            .expect("store keys are unique")
            .verdict;
        let new = evaluate_request(after.values(), &case.request)
            .expect("store keys are unique")
            .verdict;
        if old != new {
            flips.push(Flip {
                case_index,
                case: case.clone(),
                old_verdict: old,
                new_verdict: new,
            });
        }
    }
    let rejected_because = flips.iter().find(|f| f.case.protected).map(|f| f.case_index);
    Ok(ImpactAssessment {
        verdict: if rejected_because.is_some() {
            AssessmentVerdict::Reject
        } else {
            AssessmentVerdict::Accept
        },
        flips,
        rejected_because,
    })
}
