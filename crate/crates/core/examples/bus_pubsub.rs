//! Topic filters, immediate handlers, queued subscribers and cascades.

use serde_json::json;
use smsc::bus::{Bus, Subscription};

fn main() {
    let mut bus = Bus::new();

    // An immediate handler that republishes every policy change as an alert.
    bus.subscribe(Subscription::immediate("auditor", "policy.*", |env, out| {
        println!("auditor saw #{} on {}", env.bus_seq, env.topic.as_str());
        out.publish("alerts.policy", json!({ "cause": env.bus_seq })).unwrap();
    }))
    .unwrap();
    bus.subscribe(Subscription::queued("dashboard", "alerts.*")).unwrap();
    bus.subscribe(Subscription::queued("dashboard", "policy.updated")).unwrap();

    let receipt = bus
        .publish("policy.updated", json!({ "version": 1 }), "cell-a", 1)
        .unwrap();
    println!("published #{} delivered to {:?}", receipt.bus_seq, receipt.delivered);
    for c in &receipt.cascaded {
        println!("  cascaded #{}", c.bus_seq);
    }

    bus.publish("catalogue.evicted", json!(["cell-b"]), "cell-a", 2).unwrap();

    for env in bus.drain("dashboard").unwrap() {
        println!("dashboard: #{} {} {}", env.bus_seq, env.topic.as_str(), env.payload);
    }

    match bus.publish("policy.updated", json!({}), "cell-a", 1) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("ticks never go backwards"),
    }
}
