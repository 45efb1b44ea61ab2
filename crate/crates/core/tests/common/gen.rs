//! proptest strategies over small finite domains. The acceptance runner
//! samples the same strategies from a seeded `TestRunner`.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::{select, subsequence};
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use smsc::policy::{
    AttributePair, Condition, ContextId, DecisionRequest, DelegationAssertion, Effect, PolicyRule,
    PrincipalId, RootGrant,
};

pub fn ctx(s: &str) -> ContextId {
    s.parse().unwrap()
}

pub fn pid(s: &str) -> PrincipalId {
    PrincipalId::new(s).unwrap()
}

pub fn pair(n: &str, v: &str) -> AttributePair {
    AttributePair::new(n, v).unwrap()
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub attrs: BTreeMap<String, Vec<String>>,
    pub actions: Vec<String>,
    /// Patterns rules may use.
    pub action_patterns: Vec<String>,
    pub resources: Vec<String>,
    pub resource_patterns: Vec<String>,
    pub contexts: Vec<ContextId>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Up to four attributes with three values, two actions, two contexts.
pub fn small_domain() -> Domain {
    Domain {
        attrs: (0..4).map(|i| (format!("a{i}"), strings(&["v0", "v1", "v2"]))).collect(),
        actions: strings(&["read", "write"]),
        action_patterns: strings(&["read", "write", "*"]),
        resources: strings(&["doc/a", "doc/b", "img/a"]),
        resource_patterns: strings(&["doc/a", "doc/b", "img/a", "doc/*", "*"]),
        contexts: vec![ctx("c1"), ctx("c2")],
    }
}

pub fn arb_condition(d: &Domain) -> impl Strategy<Value = Condition> {
    let names: Vec<String> = d.attrs.keys().cloned().collect();
    let attrs = d.attrs.clone();
    subsequence(names, 0..=2).prop_flat_map(move |chosen| {
        let per_attr: Vec<_> = chosen
            .iter()
            .map(|n| {
                let values = attrs[n].clone();
                let len = values.len();
                (Just(n.clone()), subsequence(values, 1..=len))
            })
            .collect();
        per_attr.prop_map(|atoms| {
            atoms
                .into_iter()
                .fold(Condition::any(), |c, (n, vs)| c.with(&n, vs))
        })
    })
}

pub fn arb_rule(d: &Domain, id: String) -> impl Strategy<Value = PolicyRule> {
    let nctx = d.contexts.len();
    (
        prop_oneof![Just(Effect::Permit), Just(Effect::Deny)],
        arb_condition(d),
        select(d.action_patterns.clone()),
        select(d.resource_patterns.clone()),
        subsequence(d.contexts.clone(), 1..=nctx),
    )
        .prop_map(move |(effect, subject, action, resource, contexts)| PolicyRule {
            id: id.clone(),
            effect,
            subject,
            action,
            resource,
            contexts: contexts.into_iter().collect(),
        })
}

pub fn arb_rules(d: &Domain, max: usize) -> impl Strategy<Value = Vec<PolicyRule>> {
    let d = d.clone();
    (0..=max).prop_flat_map(move |n| {
        (0..n)
            .map(|i| arb_rule(&d, format!("r{i}")))
            .collect::<Vec<_>>()
    })
}

/// Any subset of attribute pairs, so requests may be multi-valued or empty.
pub fn arb_request(d: &Domain) -> impl Strategy<Value = DecisionRequest> {
    let pairs: Vec<AttributePair> = d
        .attrs
        .iter()
        .flat_map(|(n, vs)| vs.iter().map(move |v| pair(n, v)))
        .collect();
    let n = pairs.len();
    (
        subsequence(pairs, 0..=n.min(5)),
        select(d.actions.clone()),
        select(d.resources.clone()),
        select(d.contexts.clone()),
    )
        .prop_map(|(attrs, action, resource_id, context)| DecisionRequest {
            subject_attrs: attrs.into_iter().collect(),
            action,
            resource_id,
            context,
            tick: 0,
        })
}

#[derive(Debug, Clone)]
pub struct DelegationCase {
    pub assertions: Vec<DelegationAssertion>,
    pub roots: Vec<RootGrant>,
    pub principal: PrincipalId,
    pub context: ContextId,
}

/// Up to ten principals, fifteen assertions, depth at most four.
pub fn arb_delegation_case() -> impl Strategy<Value = DelegationCase> {
    (2usize..=10).prop_flat_map(|n| {
        let attr = prop_oneof![Just(pair("role", "admin")), Just(pair("role", "user"))];
        let contexts = subsequence(vec![ctx("c1"), ctx("c2")], 1..=2);
        let assertion = (0..n, 1..n, attr.clone(), 0u32..=4, contexts).prop_map(move |(i, k, attr, depth, cs)| {
            DelegationAssertion {
                issuer: pid(&format!("p{i}")),
                subject: pid(&format!("p{}", (i + k) % n)),
                attr,
                depth,
                contexts: cs.into_iter().collect(),
            }
        });
        let root = (0..n, attr, 0u32..=4).prop_map(|(i, attr, depth)| RootGrant {
            principal: pid(&format!("p{i}")),
            attr,
            depth,
        });
        (
            proptest::collection::vec(assertion, 0..=15),
            proptest::collection::vec(root, 1..=3),
            0..n,
            select(vec![ctx("c1"), ctx("c2")]),
        )
            .prop_map(|(assertions, roots, p, context)| DelegationCase {
                assertions,
                roots,
                principal: pid(&format!("p{p}")),
                context,
            })
    })
}

/// A deterministic sampler for seeded trial loops.
pub struct Sampler(TestRunner);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &bytes);
        Sampler(TestRunner::new_with_rng(Config::default(), rng))
    }

    pub fn sample<S: Strategy>(&mut self, s: &S) -> S::Value {
        s.new_tree(&mut self.0).expect("strategy never rejects").current()
    }
}
