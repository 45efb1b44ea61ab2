//! Finds rule pairs with opposite effects that a single request can trigger.

use smsc::governance::{detect_conflicts, ConflictDomains};
use smsc::policy::PolicyFile;

fn main() {
    let policy = PolicyFile::from_json(
        r#"{"rules": [
          {"id": "staff-read", "effect": "Permit", "subject": {"role": ["staff", "admin"]},
           "action": "read", "resource": "doc/*", "contexts": ["corporate"]},
          {"id": "guests-out", "effect": "Deny", "subject": {"role": ["guest"]},
           "action": "*", "resource": "*", "contexts": ["corporate"]},
          {"id": "lock-drafts", "effect": "Deny", "subject": {"clearance": ["low"]},
           "action": "read", "resource": "doc/draft", "contexts": ["corporate"]}
        ]}"#,
    )
    .unwrap();
    let domains: ConflictDomains = serde_json::from_str(
        r#"{"attributes": {"role": ["admin", "guest", "staff"], "clearance": ["high", "low"]},
            "actions": ["read", "write"], "resources": ["doc/draft", "doc/final"],
            "contexts": ["corporate"]}"#,
    )
    .unwrap();

    let reports = detect_conflicts(&policy.rules, &domains).unwrap();
    println!("{} conflicting pair(s)", reports.len());
    for r in reports {
        let attrs: Vec<String> = r.witness.subject_attrs.iter().map(|a| a.to_string()).collect();
        println!(
            "  {} vs {}: {} {} in {} with [{}]",
            r.rule_a, r.rule_b, r.witness.action, r.witness.resource_id, r.witness.context,
            attrs.join(", ")
        );
    }
}
