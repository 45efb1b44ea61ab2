use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{AttributePair, ContextId, PolicyError, PrincipalId};

/// `issuer` hands `attr` to `subject`, allowing `depth` further hand-offs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DelegationAssertion {
    pub issuer: PrincipalId,
    pub subject: PrincipalId,
    pub attr: AttributePair,
    pub depth: u32,
    pub contexts: BTreeSet<ContextId>,
}

impl DelegationAssertion {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let invalid = |reason: &str| PolicyError::InvalidDelegation {
            issuer: self.issuer.to_string(),
            subject: self.subject.to_string(),
            reason: reason.to_string(),
        };
        if self.issuer == self.subject {
            return Err(invalid("issuer and subject must differ"));
        }
        if self.contexts.is_empty() {
            return Err(invalid("no contexts"));
        }
        Ok(())
    }
}

/// An attribute a principal holds by authority of the policy owner.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootGrant {
    pub principal: PrincipalId,
    pub attr: AttributePair,
    pub depth: u32,
}

/// Attributes `principal` holds in `context`: `base` plus everything reachable
/// from the root grants along delegation chains.
///
/// Each hop yields remaining depth `min(assertion.depth, issuer_remaining - 1)`
/// and only issuers with remaining depth above zero can delegate. For each
/// (principal, attribute) only the largest remaining depth is kept, so the
/// worklist terminates even on cyclic delegation graphs.
pub fn expand_delegations(
    base: &BTreeSet<AttributePair>,
    principal: &PrincipalId,
    assertions: &[DelegationAssertion],
    roots: &[RootGrant],
    context: &ContextId,
) -> BTreeSet<AttributePair> {
    let mut by_issuer: BTreeMap<(&PrincipalId, &AttributePair), Vec<&DelegationAssertion>> =
        BTreeMap::new();
    for a in assertions.iter().filter(|a| a.contexts.contains(context)) {
        by_issuer.entry((&a.issuer, &a.attr)).or_default().push(a);
    }

    let mut best: BTreeMap<(&PrincipalId, &AttributePair), u32> = BTreeMap::new();
    let mut work = VecDeque::new();
    for root in roots {
        let key = (&root.principal, &root.attr);
        if best.get(&key).is_none_or(|&d| root.depth > d) {
            best.insert(key, root.depth);
            work.push_back((key, root.depth));
        }
    }

    while let Some((key, depth)) = work.pop_front() {
        if best.get(&key) != Some(&depth) || depth == 0 {
            continue;
        }
        for a in by_issuer.get(&key).into_iter().flatten() {
            let next = a.depth.min(depth - 1);
            let target = (&a.subject, &a.attr);
            if best.get(&target).is_none_or(|&d| next > d) {
                best.insert(target, next);
                work.push_back((target, next));
            }
        }
    }

    let mut out = base.clone();
    out.extend(
        best.keys()
            .filter(|(p, _)| *p == principal)
            .map(|(_, attr)| (*attr).clone()),
    );
    out
}
