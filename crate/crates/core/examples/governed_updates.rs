//! Impact assessment and ordered application of an update stream.

use std::collections::BTreeSet;

use serde_json::json;
use smsc::governance::{apply_update, PolicyStoreState, RegressionCase, UpdateBody, UpdatePackage};
use smsc::policy::{ContextId, DecisionRequest, PolicyRule, Verdict};

fn main() {
    let personal: ContextId = "personal".parse().unwrap();
    let scope: BTreeSet<ContextId> = [personal.clone()].into();
    let rule = |v: serde_json::Value| -> PolicyRule { serde_json::from_value(v).unwrap() };

    let mut store = PolicyStoreState::with_rules([rule(json!({
        "id": "owner", "effect": "Permit", "subject": {"role": ["owner"]},
        "action": "*", "resource": "*", "contexts": ["personal"]
    }))]);
    let owner_request: DecisionRequest = serde_json::from_value(json!({
        "subjectAttrs": [{"name": "role", "value": "owner"}],
        "action": "ring", "resourceId": "call-filter", "context": "personal"
    }))
    .unwrap();
    let regression = [RegressionCase { request: owner_request, expected: Verdict::Permit, protected: true }];

    // seq 1 arrives before seq 0 and waits.
    let lockout = UpdateBody::RuleAdd(rule(json!({
        "id": "lockout", "effect": "Deny", "action": "*", "resource": "*", "contexts": ["personal"]
    })));
    let updates = [
        UpdatePackage::new("hub", 1, &lockout, scope.clone(), 4),
        UpdatePackage::new("hub", 0, &UpdateBody::BlocklistAdd("mallory".into()), scope.clone(), 3),
        UpdatePackage::new("hub", 0, &UpdateBody::BlocklistAdd("mallory".into()), scope, 3),
    ];
    for upd in &updates {
        let result = apply_update(&mut store, upd, &regression).unwrap();
        println!("hub#{} -> {}", upd.seq, result.status.name());
        for c in &result.consumed {
            println!("    consumed hub#{}: {}", c.package.seq, c.status.name());
        }
    }
    println!(
        "version {}, blocklist has mallory: {}, rules: {:?}",
        store.version,
        store.blocklist_contains(&personal, "mallory"),
        store.rules.keys().collect::<Vec<_>>()
    );
}
