//! Small in-memory federations with direct, loss-free message passing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use smsc::catalogue::CellProfile;
use smsc::cell::{reference_resource, Cell, CellConfig, Destination, Intervals, ManagedResource, Outbound};
use smsc::policy::{ContextId, PolicyFile, PolicyRule};

use super::gen::ctx;

pub fn profile(id: &str, kind: &str, contexts: &[ContextId]) -> CellProfile {
    CellProfile {
        cell_id: id.into(),
        endpoint: format!("mem://{id}"),
        contexts: contexts.iter().cloned().collect(),
        capabilities: ["peer".to_string()].into(),
        resource_kind: kind.into(),
        advertised_at_tick: 0,
        ttl_ticks: 1_000,
    }
}

pub fn make_cell(id: &str, rules: Vec<PolicyRule>, contexts: &[ContextId], resource: Box<dyn ManagedResource>) -> Cell {
    let kind = resource.describe().kind;
    let policy = PolicyFile {
        rules,
        trusted_issuers: ["sts".to_string()].into(),
        ..PolicyFile::default()
    };
    let trust = contexts
        .iter()
        .map(|c| (c.clone(), BTreeSet::from(["peer".to_string()])))
        .collect();
    let config = CellConfig {
        profile: profile(id, &kind, contexts),
        policy,
        trust,
        intervals: Intervals { advertise: 0, anti_entropy: 0 },
    };
    Cell::new(config, resource).unwrap()
}

/// `n` call-filter cells in contexts c1 and c2, every pair mutually known.
pub fn mesh(n: usize, rules: &[PolicyRule]) -> BTreeMap<String, Cell> {
    let contexts = [ctx("c1"), ctx("c2")];
    let mut cells: BTreeMap<String, Cell> = (0..n)
        .map(|i| {
            let id = format!("f{i}");
            let cell = make_cell(&id, rules.to_vec(), &contexts, reference_resource("call-filter").unwrap());
            (id, cell)
        })
        .collect();
    let profiles: Vec<CellProfile> = cells.values().map(|c| c.profile().clone()).collect();
    for cell in cells.values_mut() {
        for p in &profiles {
            if p.cell_id != cell.id() {
                cell.add_known_peer(p.clone(), 0).unwrap();
            }
        }
    }
    cells
}

/// Delivers messages breadth-first until none remain; returns how many moved.
pub fn pump(cells: &mut BTreeMap<String, Cell>, initial: Vec<(String, Outbound)>, now: u64) -> usize {
    let mut queue: VecDeque<(String, Outbound)> = initial.into();
    let mut moved = 0;
    while let Some((src, out)) = queue.pop_front() {
        let targets: Vec<String> = match &out.dst {
            Destination::Cell(d) => vec![d.clone()],
            Destination::Broadcast => cells.keys().filter(|k| **k != src).cloned().collect(),
        };
        for dst in targets {
            let Some(cell) = cells.get_mut(&dst) else { continue };
            moved += 1;
            for next in cell.handle_message(&src, out.kind, &out.body, now).unwrap() {
                queue.push_back((dst.clone(), next));
            }
        }
    }
    moved
}

/// Wraps a resource and counts `invoke` calls through a shared counter.
pub struct Counting {
    pub inner: Box<dyn ManagedResource>,
    pub calls: std::rc::Rc<std::cell::Cell<usize>>,
}

impl Counting {
    pub fn new(inner: Box<dyn ManagedResource>) -> (Self, std::rc::Rc<std::cell::Cell<usize>>) {
        let calls = std::rc::Rc::new(std::cell::Cell::new(0));
        (Self { inner, calls: calls.clone() }, calls)
    }
}

impl ManagedResource for Counting {
    fn describe(&self) -> smsc::cell::ResourceDescriptor {
        self.inner.describe()
    }

    fn request_attributes(
        &self,
        action: &str,
        args: &smsc::cell::Args,
        view: &smsc::cell::ResourceView<'_>,
    ) -> BTreeSet<smsc::policy::AttributePair> {
        self.inner.request_attributes(action, args, view)
    }

    fn invoke(&mut self, action: &str, args: &smsc::cell::Args, view: &smsc::cell::ResourceView<'_>) -> serde_json::Value {
        self.calls.set(self.calls.get() + 1);
        self.inner.invoke(action, args, view)
    }

    fn apply_config(&mut self, key: &str, value: &str) -> String {
        self.inner.apply_config(key, value)
    }
}
