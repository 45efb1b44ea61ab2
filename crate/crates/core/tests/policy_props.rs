mod common;

use proptest::prelude::*;

use common::gen::{arb_delegation_case, arb_request, arb_rule, arb_rules, ctx, pid, small_domain, Domain};
use common::oracles::{bfs_delegations, enumerate_conflicts, naive_evaluate, naive_rule_matches, request_space};
use smsc::governance::{context_view, detect_conflicts, ConflictDomains, PolicyStoreState};
use smsc::policy::{evaluate_request, expand_delegations, verify_token, Token};

fn three_attr_domain() -> Domain {
    let mut d = small_domain();
    d.attrs.remove("a3");
    d
}

fn conflict_domains(d: &Domain) -> ConflictDomains {
    ConflictDomains {
        attributes: d.attrs.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect(),
        actions: d.actions.iter().cloned().collect(),
        resources: d.resources.iter().cloned().collect(),
        contexts: d.contexts.iter().cloned().collect(),
    }
}

proptest! {
    #[test]
    fn evaluation_matches_naive_oracle(
        (rules, req) in (arb_rules(&small_domain(), 6), arb_request(&small_domain()))
    ) {
        let d = evaluate_request(&rules, &req).unwrap();
        let (verdict, ids) = naive_evaluate(&rules, &req);
        prop_assert_eq!(d.verdict, verdict);
        prop_assert_eq!(d.matched_rule_ids, ids);
    }

    #[test]
    fn rule_order_does_not_matter(
        (rules, req) in (arb_rules(&small_domain(), 6), arb_request(&small_domain()))
    ) {
        let mut reversed = rules.clone();
        reversed.reverse();
        prop_assert_eq!(evaluate_request(&rules, &req).unwrap(), evaluate_request(&reversed, &req).unwrap());
    }

    #[test]
    fn delegation_matches_bfs(case in arb_delegation_case()) {
        let base = Default::default();
        let got = expand_delegations(&base, &case.principal, &case.assertions, &case.roots, &case.context);
        let want = bfs_delegations(&base, &case.principal, &case.assertions, &case.roots, &case.context);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn conflicts_match_enumeration(rules in arb_rules(&three_attr_domain(), 4)) {
        let d = three_attr_domain();
        let domains = conflict_domains(&d);
        let reports = detect_conflicts(&rules, &domains).unwrap();
        let found: std::collections::BTreeSet<(String, String)> =
            reports.iter().map(|r| (r.rule_a.clone(), r.rule_b.clone())).collect();
        prop_assert_eq!(found.len(), reports.len(), "each pair once");
        let space = request_space(&domains.attributes, &domains.actions, &domains.resources, &domains.contexts);
        prop_assert_eq!(&found, &enumerate_conflicts(&rules, &space));
        for r in &reports {
            prop_assert!(r.rule_a < r.rule_b);
            let a = rules.iter().find(|x| x.id == r.rule_a).unwrap();
            let b = rules.iter().find(|x| x.id == r.rule_b).unwrap();
            prop_assert!(naive_rule_matches(a, &r.witness) && naive_rule_matches(b, &r.witness));
            prop_assert_ne!(a.effect, b.effect);
        }
    }

    #[test]
    fn context_view_is_exact_filter(rules in arb_rules(&small_domain(), 6)) {
        let store = PolicyStoreState::with_rules(rules.clone());
        for c in [ctx("c1"), ctx("c2")] {
            let mut got: Vec<String> = context_view(&store, &c).into_iter().map(|r| r.id.clone()).collect();
            let mut want: Vec<String> = rules.iter().filter(|r| r.contexts.contains(&c)).map(|r| r.id.clone()).collect();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn foreign_context_rules_never_change_decisions(
        (rules, extra, req) in (
            arb_rules(&small_domain(), 5),
            arb_rule(&small_domain(), "extra".into()),
            arb_request(&small_domain()),
        )
    ) {
        let mut extra = extra;
        let other = if req.context == ctx("c1") { ctx("c2") } else { ctx("c1") };
        extra.contexts = [other].into();
        let before = evaluate_request(&rules, &req).unwrap();
        let mut more = rules.clone();
        more.push(extra);
        prop_assert_eq!(before, evaluate_request(&more, &req).unwrap());
    }

    #[test]
    fn tampered_tokens_never_verify(expiry in 1u64..100, now in 0u64..100, which in 0usize..3) {
        let trusted = ["sts".to_string()].into();
        let mut t = Token::issue(pid("alice"), [common::gen::pair("role", "owner")].into(), "sts", expiry);
        match which {
            0 => t.expiry_tick += 1,
            1 => t.subject = pid("mallory"),
            _ => t.claims.insert(common::gen::pair("role", "admin")).then_some(()).unwrap(),
        }
        prop_assert!(verify_token(&t, &trusted, now).is_err());
    }
}

#[test]
fn chain_length_law() {
    use smsc::policy::{DelegationAssertion, RootGrant};
    let admin = common::gen::pair("role", "admin");
    for k in 1..=4u32 {
        let chain: Vec<DelegationAssertion> = (0..k)
            .map(|i| DelegationAssertion {
                issuer: pid(&format!("p{i}")),
                subject: pid(&format!("p{}", i + 1)),
                attr: admin.clone(),
                depth: 10,
                contexts: [ctx("c1")].into(),
            })
            .collect();
        for root_depth in 0..=5 {
            let roots = [RootGrant { principal: pid("p0"), attr: admin.clone(), depth: root_depth }];
            let end = pid(&format!("p{k}"));
            let got = expand_delegations(&Default::default(), &end, &chain, &roots, &ctx("c1"));
            assert_eq!(got.contains(&admin), root_depth >= k, "k={k} depth={root_depth}");
        }
    }
}
