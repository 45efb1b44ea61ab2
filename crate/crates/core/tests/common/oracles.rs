//! Naive oracles. Written from the definitions, sharing no code with the
//! library beyond its data types.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use smsc::policy::{
    AttributePair, ContextId, DecisionRequest, DelegationAssertion, Effect, PolicyRule, PrincipalId,
    RootGrant, Verdict,
};

pub fn naive_rule_matches(rule: &PolicyRule, req: &DecisionRequest) -> bool {
    if !rule.contexts.iter().any(|c| *c == req.context) {
        return false;
    }
    if rule.action != "*" && rule.action != req.action {
        return false;
    }
    let resource_ok = if rule.resource.ends_with('*') {
        let prefix = &rule.resource[..rule.resource.len() - 1];
        req.resource_id.len() >= prefix.len() && &req.resource_id[..prefix.len()] == prefix
    } else {
        rule.resource == req.resource_id
    };
    if !resource_ok {
        return false;
    }
    for (name, allowed) in rule.subject.atoms() {
        let mut found = false;
        for a in &req.subject_attrs {
            if a.name == name && allowed.contains(&a.value) {
                found = true;
            }
        }
        if !found {
            return false;
        }
    }
    true
}

/// Verdict and sorted matched ids under deny-overrides.
pub fn naive_evaluate(rules: &[PolicyRule], req: &DecisionRequest) -> (Verdict, Vec<String>) {
    let mut ids = Vec::new();
    let mut any_permit = false;
    let mut any_deny = false;
    for r in rules {
        if naive_rule_matches(r, req) {
            ids.push(r.id.clone());
            match r.effect {
                Effect::Permit => any_permit = true,
                Effect::Deny => any_deny = true,
            }
        }
    }
    ids.sort();
    let verdict = if any_deny {
        Verdict::Deny
    } else if any_permit {
        Verdict::Permit
    } else {
        Verdict::NotApplicable
    };
    (verdict, ids)
}

/// Breadth-first search over (principal, attribute, remaining depth) states.
pub fn bfs_delegations(
    base: &BTreeSet<AttributePair>,
    principal: &PrincipalId,
    assertions: &[DelegationAssertion],
    roots: &[RootGrant],
    context: &ContextId,
) -> BTreeSet<AttributePair> {
    let mut seen: BTreeSet<(PrincipalId, AttributePair, u32)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    for r in roots {
        let s = (r.principal.clone(), r.attr.clone(), r.depth);
        if seen.insert(s.clone()) {
            queue.push_back(s);
        }
    }
    while let Some((who, attr, remaining)) = queue.pop_front() {
        if remaining == 0 {
            continue;
        }
        for a in assertions {
            if a.issuer == who && a.attr == attr && a.contexts.contains(context) {
                let next = (a.subject.clone(), attr.clone(), a.depth.min(remaining - 1));
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    let mut out = base.clone();
    for (who, attr, _) in seen {
        if &who == principal {
            out.insert(attr);
        }
    }
    out
}

/// The full single-valued request space of a finite domain.
pub fn request_space(
    attributes: &BTreeMap<String, BTreeSet<String>>,
    actions: &BTreeSet<String>,
    resources: &BTreeSet<String>,
    contexts: &BTreeSet<ContextId>,
) -> Vec<DecisionRequest> {
    let mut assignments: Vec<BTreeSet<AttributePair>> = vec![BTreeSet::new()];
    for (name, values) in attributes {
        let mut next = Vec::new();
        for partial in &assignments {
            for v in values {
                let mut p = partial.clone();
                p.insert(AttributePair::new(name.as_str(), v.as_str()).unwrap());
                next.push(p);
            }
        }
        assignments = next;
    }
    let mut out = Vec::new();
    for c in contexts {
        for a in actions {
            for r in resources {
                for attrs in &assignments {
                    out.push(DecisionRequest {
                        subject_attrs: attrs.clone(),
                        action: a.clone(),
                        resource_id: r.clone(),
                        context: c.clone(),
                        tick: 0,
                    });
                }
            }
        }
    }
    out
}

/// Unordered opposite-effect pairs `(lo, hi)` some request matches jointly.
pub fn enumerate_conflicts(rules: &[PolicyRule], space: &[DecisionRequest]) -> BTreeSet<(String, String)> {
    let matched: Vec<Vec<bool>> = rules
        .iter()
        .map(|r| space.iter().map(|q| naive_rule_matches(r, q)).collect())
        .collect();
    let mut out = BTreeSet::new();
    for i in 0..rules.len() {
        for j in i + 1..rules.len() {
            if rules[i].effect == rules[j].effect {
                continue;
            }
            if (0..space.len()).any(|k| matched[i][k] && matched[j][k]) {
                let (a, b) = (rules[i].id.clone(), rules[j].id.clone());
                out.insert(if a < b { (a, b) } else { (b, a) });
            }
        }
    }
    out
}
