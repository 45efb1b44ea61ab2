mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use proptest::sample::select;
use serde_json::json;

use common::federation::{make_cell, mesh, profile, pump, Counting};
use common::fuzz::{arb_token, token, TokenShape};
use common::gen::{ctx, pair, pid};
use smsc::cell::{reference_resource, AuditKind, Cell, Destination, OperationalRequest};
use smsc::governance::UpdateBody;
use smsc::policy::{Condition, Effect, PolicyRule, Token, Verdict};

fn filter_rules() -> Vec<PolicyRule> {
    let both = [ctx("c1"), ctx("c2")];
    vec![
        PolicyRule {
            id: "friends-ring".into(),
            effect: Effect::Permit,
            subject: Condition::any().with("role", ["friend", "owner"]),
            action: "ring".into(),
            resource: "call-*".into(),
            contexts: both.iter().cloned().collect(),
        },
        PolicyRule {
            id: "owner-texts".into(),
            effect: Effect::Permit,
            subject: Condition::any().with("role", ["owner"]),
            action: "text".into(),
            resource: "*".into(),
            contexts: [ctx("c1")].into(),
        },
        PolicyRule {
            id: "blocked".into(),
            effect: Effect::Deny,
            subject: Condition::any().with("blocklisted", ["true"]),
            action: "*".into(),
            resource: "*".into(),
            contexts: both.iter().cloned().collect(),
        },
    ]
}

fn arb_op() -> impl Strategy<Value = (Vec<(String, TokenShape)>, String, String, String)> {
    (
        prop::collection::vec(arb_token(vec!["owner", "friend", "stranger"]), 0..3),
        select(vec!["ring", "text", "format-disk"]).prop_map(String::from),
        select(vec!["c1", "c2", "c3"]).prop_map(String::from),
        select(vec!["+1", "+666"]).prop_map(String::from),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resource_runs_only_on_permit(ops in prop::collection::vec(arb_op(), 1..30)) {
        let (counting, calls) = Counting::new(reference_resource("call-filter").unwrap());
        let mut cell = make_cell("f0", filter_rules(), &[ctx("c1"), ctx("c2")], Box::new(counting));
        cell.emit_update(UpdateBody::BlocklistAdd("+666".into()), [ctx("c1"), ctx("c2")].into(), 0);
        let mut permits = 0;
        for (now, (tokens, action, context, from)) in ops.iter().enumerate() {
            let now = now as u64 + 1;
            let req = OperationalRequest {
                tokens: tokens.iter().map(|(r, s)| token(r, s, now)).collect(),
                action: action.clone(),
                args: [("from".to_string(), from.clone())].into(),
                context: ctx(context),
                caller_cell_id: String::new(),
            };
            let resp = cell.handle_operational_request(&req, now);
            let record = cell.audit().last().unwrap();
            prop_assert_eq!(record.kind, AuditKind::Op);
            let permitted = record.decision.as_ref().is_some_and(|d| d.verdict == Verdict::Permit);
            prop_assert_eq!(resp.is_ok(), permitted);
            if from == "+666" || context == "c3" {
                prop_assert!(!permitted);
            }
            if tokens.iter().any(|(_, s)| !s.is_valid()) {
                prop_assert!(!permitted);
            }
            permits += usize::from(permitted);
        }
        prop_assert_eq!(calls.get(), permits);
        let ops_audited = cell.audit().iter().filter(|r| r.kind == AuditKind::Op).count();
        prop_assert_eq!(ops_audited, ops.len());
    }

    #[test]
    fn flood_applies_once_and_forwards_once(
        (n, edges) in (3usize..8).prop_flat_map(|n| {
            let tree = (1..n).map(|i| (0..i).prop_map(move |j| (j, i))).collect::<Vec<_>>();
            let extra = prop::collection::vec((0..n, 0..n), 0..n);
            (Just(n), (tree, extra))
        }),
        origin in 0usize..8,
        updates in 1usize..4,
    ) {
        let (tree, extra) = edges;
        let links: BTreeSet<(usize, usize)> = tree
            .into_iter()
            .chain(extra)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        let contexts = [ctx("c1")];
        let mut cells: BTreeMap<String, Cell> = (0..n)
            .map(|i| {
                let id = format!("f{i}");
                (id.clone(), make_cell(&id, vec![], &contexts, reference_resource("call-filter").unwrap()))
            })
            .collect();
        for &(a, b) in &links {
            let (ia, ib) = (format!("f{a}"), format!("f{b}"));
            cells.get_mut(&ia).unwrap().add_known_peer(profile(&ib, "call-filter", &contexts), 0).unwrap();
            cells.get_mut(&ib).unwrap().add_known_peer(profile(&ia, "call-filter", &contexts), 0).unwrap();
        }
        let origin = format!("f{}", origin % n);
        let mut queue = VecDeque::new();
        for k in 0..updates {
            let body = UpdateBody::BlocklistAdd(format!("spam{k}"));
            let (_, out) = cells.get_mut(&origin).unwrap().emit_update(body, contexts.iter().cloned().collect(), 0);
            queue.extend(out.into_iter().map(|o| (origin.clone(), o)));
        }
        // (sender, receiver, seq) triples seen on the wire.
        let mut carried: BTreeMap<(String, String, u64), usize> = BTreeMap::new();
        while let Some((src, out)) = queue.pop_front() {
            let Destination::Cell(dst) = &out.dst else { unreachable!() };
            let seq = out.body["seq"].as_u64().unwrap();
            *carried.entry((src.clone(), dst.clone(), seq)).or_default() += 1;
            let next = cells.get_mut(dst).unwrap().handle_message(&src, out.kind, &out.body, 1).unwrap();
            queue.extend(next.into_iter().map(|o| (dst.clone(), o)));
        }
        prop_assert!(carried.values().all(|&c| c == 1));
        for cell in cells.values_mut() {
            let applied = cell
                .take_events()
                .into_iter()
                .filter(|e| e.kind == "update" && e.detail["status"] == "applied")
                .count();
            prop_assert_eq!(applied, updates, "cell {}", cell.id());
            prop_assert_eq!(cell.store().applied_seq.get(&origin), Some(&(updates as u64 - 1)));
        }
    }

    #[test]
    fn other_context_updates_do_not_reach_decisions(
        entries in prop::collection::vec(select(vec!["+1", "+2", "+666"]), 1..4),
        deny_all in any::<bool>(),
    ) {
        let mut cells = mesh(3, &filter_rules());
        let probe = |cells: &BTreeMap<String, Cell>| -> Vec<Verdict> {
            let mut out = Vec::new();
            for cell in cells.values() {
                for from in ["+1", "+2", "+666"] {
                    let attrs = [pair("role", "friend"), pair("blocklisted", if from == "+666" { "true" } else { "false" })];
                    let d = cell.authorize(&[], "ring", &ctx("c1"), attrs.into(), 0);
                    out.push(d.verdict);
                }
            }
            out
        };
        let before = probe(&cells);
        let c2: BTreeSet<_> = [ctx("c2")].into();
        let mut initial = Vec::new();
        for e in &entries {
            let (_, out) = cells.get_mut("f0").unwrap().emit_update(UpdateBody::BlocklistAdd(e.to_string()), c2.clone(), 0);
            initial.extend(out.into_iter().map(|o| ("f0".to_string(), o)));
        }
        if deny_all {
            let rule = PolicyRule {
                id: "c2-lockdown".into(),
                effect: Effect::Deny,
                subject: Condition::any(),
                action: "*".into(),
                resource: "*".into(),
                contexts: c2.clone(),
            };
            let (_, out) = cells.get_mut("f1").unwrap().emit_update(UpdateBody::RuleAdd(rule), c2.clone(), 0);
            initial.extend(out.into_iter().map(|o| ("f1".to_string(), o)));
        }
        pump(&mut cells, initial, 1);
        for cell in cells.values() {
            for e in &entries {
                prop_assert!(cell.store().blocklist_contains(&ctx("c2"), e));
                prop_assert!(!cell.store().blocklist_contains(&ctx("c1"), e));
            }
        }
        prop_assert_eq!(before, probe(&cells));
    }
}

#[test]
fn management_is_audited_and_gated() {
    let mut cell = make_cell("f0", filter_rules(), &[ctx("c1")], reference_resource("call-filter").unwrap());
    let cmd = smsc::cell::ManagementCommand {
        tokens: vec![Token::issue(pid("x"), [pair("role", "friend")].into(), "sts", 10)],
        command: smsc::cell::CommandKind::FlagSpam,
        payload: json!("+9"),
        context: ctx("c1"),
    };
    let (resp, out) = cell.handle_management_command(&cmd, 1);
    assert!(!resp.is_ok());
    assert!(out.is_empty());
    assert!(!cell.store().blocklist_contains(&ctx("c1"), "+9"));
    assert_eq!(cell.audit().last().unwrap().kind, AuditKind::Mgmt);
}
