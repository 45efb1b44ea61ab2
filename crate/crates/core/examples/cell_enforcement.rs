//! A single cell mediating operational and management requests.

use serde_json::json;
use smsc::catalogue::CellProfile;
use smsc::cell::{reference_resource, Cell, CellConfig, CommandKind, Intervals, ManagementCommand, OperationalRequest};
use smsc::policy::{AttributePair, PolicyFile, PrincipalId, Token};

fn main() {
    let policy = PolicyFile::from_json(
        r#"{"trustedIssuers": ["sts"], "rules": [
          {"id": "owner", "effect": "Permit", "subject": {"role": ["owner"]}, "action": "*", "resource": "*", "contexts": ["personal"]},
          {"id": "deliver", "effect": "Permit", "action": "deliver", "resource": "email-filter", "contexts": ["personal"]},
          {"id": "blocked", "effect": "Deny", "subject": {"blocklisted": ["true"]}, "action": "*", "resource": "*", "contexts": ["personal"]}
        ]}"#,
    )
    .unwrap();
    let profile = CellProfile {
        cell_id: "mailbox".into(),
        endpoint: "sim://mailbox".into(),
        contexts: ["personal".parse().unwrap()].into(),
        capabilities: Default::default(),
        resource_kind: "email-filter".into(),
        advertised_at_tick: 0,
        ttl_ticks: 30,
    };
    let config = CellConfig { profile, policy, trust: Default::default(), intervals: Intervals::default() };
    let mut cell = Cell::new(config, reference_resource("email-filter").unwrap()).unwrap();

    let token = |role: &str, expiry| {
        Token::issue(PrincipalId::new("alice").unwrap(), [AttributePair::new("role", role).unwrap()].into(), "sts", expiry)
    };
    let deliver = |from: &str, tokens| OperationalRequest {
        tokens,
        action: "deliver".into(),
        args: [("from".to_string(), from.to_string())].into(),
        context: "personal".parse().unwrap(),
        caller_cell_id: String::new(),
    };

    println!("mail from bob:     {:?}", cell.handle_operational_request(&deliver("bob", vec![]), 1));
    let flag = ManagementCommand {
        tokens: vec![token("owner", 100)],
        command: CommandKind::FlagSpam,
        payload: json!("mallory"),
        context: "personal".parse().unwrap(),
    };
    let (ack, sent) = cell.handle_management_command(&flag, 2);
    println!("flag mallory:      {} ({} partner updates)", ack.reason, sent.len());
    println!("mail from mallory: {:?}", cell.handle_operational_request(&deliver("mallory", vec![]), 3));
    println!("expired token:     {:?}", cell.handle_operational_request(&deliver("bob", vec![token("owner", 3)]), 4));

    for rec in cell.audit() {
        println!("audit t={} {:?} {} -> {}", rec.tick, rec.kind, rec.summary, rec.outcome);
    }
}
