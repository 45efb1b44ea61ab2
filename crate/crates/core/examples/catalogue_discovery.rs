//! Advertisements, trust evaluation, TTL eviction and checkpoints.

use smsc::catalogue::{Catalogue, CellProfile, Checkpoint, TrustPolicy};
use smsc::discovery::Discovery;
use smsc::governance::PolicyStoreState;

fn profile(id: &str, caps: &[&str]) -> CellProfile {
    CellProfile {
        cell_id: id.into(),
        endpoint: format!("sim://{id}"),
        contexts: ["personal".parse().unwrap()].into(),
        capabilities: caps.iter().map(|c| c.to_string()).collect(),
        resource_kind: "none".into(),
        advertised_at_tick: 0,
        ttl_ticks: 5,
    }
}

fn main() {
    let trust: TrustPolicy = [("personal".parse().unwrap(), ["user-device".to_string()].into())].into();
    let mut phone = Discovery::new(profile("phone", &["user-device"]));
    let mut laptop = Discovery::new(profile("laptop", &["user-device"]));
    let stranger = Discovery::new(profile("kiosk", &[]));
    let mut catalogue = Catalogue::new("phone");

    let advert = laptop.make_advertisement(1);
    println!("laptop advert: {:?}", phone.handle_advertisement(advert.clone(), 1, &mut catalogue, &trust).unwrap());
    println!("replayed:      {:?}", phone.handle_advertisement(advert, 2, &mut catalogue, &trust).unwrap());
    let req = stranger.register_with("phone", 1).unwrap();
    phone.handle_registration(req, 1, &mut catalogue, &trust).unwrap();

    let personal = "personal".parse().unwrap();
    for e in catalogue.entries() {
        println!("  {} trusted in personal: {}", e.profile.cell_id, e.is_trusted(&personal));
    }

    let text = catalogue.checkpoint(&PolicyStoreState::default()).to_json();
    let (restored, _) = Catalogue::restore("phone", Checkpoint::from_json(&text).unwrap()).unwrap();
    println!("checkpoint round trip keeps {} entries", restored.len());

    for now in [6, 7] {
        println!("tick {now}: evicted {:?}", catalogue.expire_stale(now));
    }

}
