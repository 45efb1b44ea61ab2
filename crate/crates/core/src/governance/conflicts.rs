use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GovernanceError;
use crate::policy::{
    action_matches, resource_matches, AttributePair, ContextId, DecisionRequest, PolicyRule,
};

/// Finite universe over which conflicts are decided.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictDomains {
    #[serde(default)]
    pub attributes: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub actions: BTreeSet<String>,
    #[serde(default)]
    pub resources: BTreeSet<String>,
    #[serde(default)]
    pub contexts: BTreeSet<ContextId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConflictReport {
    pub rule_a: String,
    pub rule_b: String,
    /// A request both rules match.
    pub witness: DecisionRequest,
}

/// Reports every pair of opposite-effect rules that some request in the
/// domain universe matches simultaneously.
///
/// Requests carry one value per attribute, so two atoms on the same attribute
/// are jointly satisfiable iff their allowed sets intersect within the domain.
/// Pairs are reported once, `rule_a < rule_b`, in id order. The witness takes
/// the lexicographically smallest value of each intersection and only
/// carries attributes at least one of the rules constrains.
pub fn detect_conflicts(
    rules: &[PolicyRule],
    domains: &ConflictDomains,
) -> Result<Vec<ConflictReport>, GovernanceError> {
    for rule in rules {
        for (name, _) in rule.subject.atoms() {
            if !domains.attributes.contains_key(name) {
                return Err(GovernanceError::UnknownAttributeDomain(name.to_string()));
            }
        }
    }
    let mut sorted: Vec<&PolicyRule> = rules.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut reports = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if a.effect != b.effect {
                if let Some(witness) = joint_witness(a, b, domains) {
                    reports.push(ConflictReport {
                        rule_a: a.id.clone(),
                        rule_b: b.id.clone(),
                        witness,
                    });
                }
            }
        }
    }
    Ok(reports)
}

fn joint_witness(a: &PolicyRule, b: &PolicyRule, d: &ConflictDomains) -> Option<DecisionRequest> {
    let context = d
        .contexts
        .iter()
        .find(|c| a.contexts.contains(*c) && b.contexts.contains(*c))?;
    let action = d
        .actions
        .iter()
        .find(|x| action_matches(&a.action, x) && action_matches(&b.action, x))?;
    let resource = d
        .resources
        .iter()
        .find(|x| resource_matches(&a.resource, x) && resource_matches(&b.resource, x))?;

    let names: BTreeSet<&str> = a.subject.atoms().chain(b.subject.atoms()).map(|(n, _)| n).collect();
    let mut subject_attrs = BTreeSet::new();
    for name in names {
        let value = d.attributes[name].iter().find(|v| {
            a.subject.allowed(name).is_none_or(|s| s.contains(*v))
                && b.subject.allowed(name).is_none_or(|s| s.contains(*v))
        })?;
        subject_attrs.insert(AttributePair::new(name, value.as_str()).ok()?);
    }
    Some(DecisionRequest {
        subject_attrs,
        action: action.clone(),
        resource_id: resource.clone(),
        context: context.clone(),
        tick: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{rule_matches, Condition, Effect};

    fn ctx(s: &str) -> ContextId {
        ContextId::new(s).unwrap()
    }

    fn rule(id: &str, effect: Effect, roles: &[&str], context: &str) -> PolicyRule {
        PolicyRule {
            id: id.into(),
            effect,
            subject: Condition::any().with("role", roles.iter().copied()),
            action: "*".into(),
            resource: "*".into(),
            contexts: [ctx(context)].into(),
        }
    }

    fn domains() -> ConflictDomains {
        ConflictDomains {
            attributes: [("role".to_string(), ["a", "b", "c"].map(String::from).into())].into(),
            actions: ["read".to_string()].into(),
            resources: ["doc".to_string()].into(),
            contexts: [ctx("home"), ctx("work")].into(),
        }
    }

    #[test]
    fn disjoint_conditions_do_not_conflict() {
        let rules = [rule("p", Effect::Permit, &["a"], "work"), rule("d", Effect::Deny, &["b"], "work")];
        assert!(detect_conflicts(&rules, &domains()).unwrap().is_empty());
    }

    #[test]
    fn overlapping_conditions_conflict_with_witness() {
        let rules = [
            rule("p", Effect::Permit, &["a", "b"], "work"),
            rule("d", Effect::Deny, &["b"], "work"),
        ];
        let reports = detect_conflicts(&rules, &domains()).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!((r.rule_a.as_str(), r.rule_b.as_str()), ("d", "p"));
        assert_eq!(r.witness.subject_attrs, [AttributePair::new("role", "b").unwrap()].into());
        assert!(rules.iter().all(|x| rule_matches(x, &r.witness)));
    }

    #[test]
    fn context_disjoint_rules_do_not_conflict() {
        let rules = [
            rule("p", Effect::Permit, &["a", "b"], "work"),
            rule("d", Effect::Deny, &["b"], "home"),
        ];
        assert!(detect_conflicts(&rules, &domains()).unwrap().is_empty());
    }

    #[test]
    fn same_effect_never_conflicts() {
        let rules = [rule("p", Effect::Deny, &["a"], "work"), rule("q", Effect::Deny, &["a"], "work")];
        assert!(detect_conflicts(&rules, &domains()).unwrap().is_empty());
    }

    #[test]
    fn undeclared_attribute_is_an_error() {
        let mut r = rule("p", Effect::Permit, &["a"], "work");
        r.subject = Condition::any().with("level", ["1"]);
        assert_eq!(
            detect_conflicts(&[r], &domains()),
            Err(GovernanceError::UnknownAttributeDomain("level".into()))
        );
    }
}
