use std::collections::BTreeSet;

use super::{Decision, DecisionRequest, Effect, PolicyError, PolicyRule, Verdict};

pub fn action_matches(pattern: &str, action: &str) -> bool {
    pattern == "*" || pattern == action
}

/// Exact match, or prefix match when the pattern ends in `*`.
pub fn resource_matches(pattern: &str, resource_id: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => resource_id.starts_with(prefix),
        None => pattern == resource_id,
    }
}

pub fn rule_matches(rule: &PolicyRule, req: &DecisionRequest) -> bool {
    rule.contexts.contains(&req.context)
        && action_matches(&rule.action, &req.action)
        && resource_matches(&rule.resource, &req.resource_id)
        && rule.subject.is_satisfied_by(&req.subject_attrs)
}

/// Deny-overrides.
pub fn combine_decisions(effects: impl IntoIterator<Item = Effect>) -> Verdict {
    let mut verdict = Verdict::NotApplicable;
    for effect in effects {
        match effect {
            Effect::Deny => return Verdict::Deny,
            Effect::Permit => verdict = Verdict::Permit,
        }
    }
    verdict
}

pub fn evaluate_request<'a>(
    rules: impl IntoIterator<Item = &'a PolicyRule>,
    req: &DecisionRequest,
) -> Result<Decision, PolicyError> {
    let mut seen = BTreeSet::new();
    let mut matched: Vec<&PolicyRule> = Vec::new();
    for rule in rules {
        if !seen.insert(rule.id.as_str()) {
            return Err(PolicyError::DuplicateRuleId(rule.id.clone()));
        }
        if rule_matches(rule, req) {
            matched.push(rule);
        }
    }
    matched.sort_by(|a, b| a.id.cmp(&b.id));
    let verdict = combine_decisions(matched.iter().map(|r| r.effect));
    Ok(Decision {
        verdict,
        reason: verdict.reason().to_string(),
        matched_rule_ids: matched.into_iter().map(|r| r.id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{AttributePair, Condition, ContextId};

    fn ctx(s: &str) -> ContextId {
        ContextId::new(s).unwrap()
    }

    fn rule(id: &str, effect: Effect, cond: Condition, action: &str, res: &str) -> PolicyRule {
        PolicyRule {
            id: id.into(),
            effect,
            subject: cond,
            action: action.into(),
            resource: res.into(),
            contexts: [ctx("work")].into(),
        }
    }

    fn req(attrs: &[(&str, &str)], action: &str, res: &str, context: &str) -> DecisionRequest {
        DecisionRequest {
            subject_attrs: attrs
                .iter()
                .map(|(n, v)| AttributePair::new(*n, *v).unwrap())
                .collect(),
            action: action.into(),
            resource_id: res.into(),
            context: ctx(context),
            tick: 0,
        }
    }

    #[test]
    fn staff_may_read_work_documents() {
        let r = rule(
            "r",
            Effect::Permit,
            Condition::any().with("role", ["staff"]),
            "read",
            "doc/*",
        );
        assert!(rule_matches(&r, &req(&[("role", "staff")], "read", "doc/1", "work")));
        assert!(!rule_matches(&r, &req(&[("role", "staff")], "read", "doc/1", "home")));
        assert!(!rule_matches(&r, &req(&[("role", "staff")], "write", "doc/1", "work")));
        assert!(!rule_matches(&r, &req(&[("role", "guest")], "read", "doc/1", "work")));
        assert!(!rule_matches(&r, &req(&[("role", "staff")], "read", "img/1", "work")));
    }

    #[test]
    fn unknown_attribute_is_unsatisfied() {
        let r = rule("r", Effect::Permit, Condition::any().with("level", ["3"]), "*", "*");
        assert!(!rule_matches(&r, &req(&[("role", "staff")], "read", "doc/1", "work")));
    }

    #[test]
    fn resource_patterns() {
        assert!(resource_matches("*", ""));
        assert!(resource_matches("doc/*", "doc/"));
        assert!(resource_matches("doc/1", "doc/1"));
        assert!(!resource_matches("doc/1", "doc/10"));
        assert!(!resource_matches("doc/*", "do"));
    }

    #[test]
    fn deny_overrides() {
        assert_eq!(combine_decisions([]), Verdict::NotApplicable);
        assert_eq!(combine_decisions([Effect::Permit]), Verdict::Permit);
        assert_eq!(combine_decisions([Effect::Permit, Effect::Deny]), Verdict::Deny);
        assert_eq!(combine_decisions([Effect::Deny, Effect::Permit]), Verdict::Deny);
    }

    #[test]
    fn empty_store_is_not_applicable() {
        let d = evaluate_request(&[], &req(&[], "read", "x", "work")).unwrap();
        assert_eq!(d.verdict, Verdict::NotApplicable);
        assert!(d.matched_rule_ids.is_empty());
    }

    #[test]
    fn deny_wins_and_both_rules_reported() {
        let store = [
            rule("permit-admin", Effect::Permit, Condition::any().with("role", ["admin"]), "*", "*"),
            rule("deny-hr", Effect::Deny, Condition::any().with("dept", ["hr"]), "*", "*"),
        ];
        let d = evaluate_request(
            &store,
            &req(&[("role", "admin"), ("dept", "hr")], "read", "payroll", "work"),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Deny);
        assert_eq!(d.matched_rule_ids, ["deny-hr", "permit-admin"]);
        assert_eq!(d.reason, "deny");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let r = rule("same", Effect::Permit, Condition::any(), "*", "*");
        let err = evaluate_request(&[r.clone(), r], &req(&[], "a", "b", "work")).unwrap_err();
        assert!(matches!(err, PolicyError::DuplicateRuleId(id) if id == "same"));
    }
}
