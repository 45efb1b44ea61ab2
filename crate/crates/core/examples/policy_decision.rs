//! Tokens, delegation and deny-overrides evaluation.

use std::collections::BTreeSet;

use smsc::policy::{
    evaluate_request, expand_delegations, verify_token, AttributePair, ContextId, DecisionRequest,
    PolicyFile, PrincipalId, Token,
};

const POLICY: &str = r#"{
  "trustedIssuers": ["sts"],
  "rules": [
    {"id": "family-calls", "effect": "Permit", "subject": {"role": ["family"]},
     "action": "ring", "resource": "call-filter", "contexts": ["personal"]},
    {"id": "no-night-calls", "effect": "Deny", "subject": {"quiet-hours": ["on"]},
     "action": "ring", "resource": "*", "contexts": ["personal"]}
  ],
  "roots": [{"principal": "alice", "attr": {"name": "role", "value": "family"}, "depth": 2}],
  "delegations": [
    {"issuer": "alice", "subject": "bob", "attr": {"name": "role", "value": "family"},
     "depth": 1, "contexts": ["personal"]}
  ]
}"#;

fn main() {
    let policy = PolicyFile::from_json(POLICY).unwrap();
    let personal: ContextId = "personal".parse().unwrap();
    let bob = PrincipalId::new("bob").unwrap();

    let token = Token::issue(bob.clone(), [AttributePair::new("device", "phone").unwrap()].into(), "sts", 50);
    let claims = verify_token(&token, &policy.trusted_issuers, 10).unwrap();
    let attrs = expand_delegations(&claims, &bob, &policy.delegations, &policy.roots, &personal);
    println!("bob holds: {}", attrs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "));

    let mut req = DecisionRequest {
        subject_attrs: attrs,
        action: "ring".into(),
        resource_id: "call-filter".into(),
        context: personal,
        tick: 10,
    };
    let decision = evaluate_request(&policy.rules, &req).unwrap();
    println!("daytime call: {:?} via {:?}", decision.verdict, decision.matched_rule_ids);

    req.subject_attrs.insert(AttributePair::new("quiet-hours", "on").unwrap());
    let decision = evaluate_request(&policy.rules, &req).unwrap();
    println!("night call:   {:?} via {:?}", decision.verdict, decision.matched_rule_ids);

    req.context = "corporate".parse().unwrap();
    println!("corporate:    {:?}", evaluate_request(&policy.rules, &req).unwrap().verdict);

    match verify_token(&token, &policy.trusted_issuers, 50) {
        Err(e) => println!("at tick 50 the token is {}", e.kind()),
        Ok(_) => unreachable!(),
    }
    let _: BTreeSet<AttributePair> = claims;
}
