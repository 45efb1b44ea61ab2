//! Deterministic discrete-event simulator and scenario runner.
//!
//! Time is a logical tick. Each tick runs, in order: staged topology
//! changes, script actions for the tick, deliveries in `(dst, netSeq)`
//! order, every cell's `on_tick` in id order, then `atTick` assertions.
//! Drops draw from one SplitMix64 stream per link, so a scenario and seed
//! fully determine the event log.

mod event_log;
mod net;
mod spec;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::catalogue::CellProfile;
use crate::cell::{
    reference_resource, Cell, CellConfig, CellError, Destination, ManagementCommand, MessageKind,
    OperationalRequest, Outbound,
};
use crate::discovery::RegistryLookup;
use crate::governance::UpdatePackage;
use crate::policy::{Decision, Token};

pub use event_log::{EventLog, LogRecord};
pub use net::{fnv1a64, link_seed, DropReason, Network, SimEnvelope, SplitMix64, ENVELOPE_VERSION};
pub use spec::{
    load_scenario, parse_scenario, validate, Action, AssertionSpec, CellSpec, Check, LinkSpec,
    PartitionSpec, ProfileSpec, ScenarioSpec, ScriptStep, TokenSpec, TopologySpec,
};

/// Cell name used for simulator-level log records.
pub const SIM: &str = "*";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parse error at `{field}` (line {line}): {message}")]
    Parse { field: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("`{field}` names unknown cell `{cell}`")]
    UnknownCellRef { field: String, cell: String },
    #[error("`{field}` is {value}, not a probability in [0, 1]")]
    InvalidProbability { field: String, value: f64 },
    #[error("`{field}` names unknown link {a}-{b}")]
    UnknownLink { field: String, a: String, b: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cell `{cell}`: {source}")]
    Cell { cell: String, source: CellError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertionResult {
    pub id: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub passed: bool,
    pub assertions: Vec<AssertionResult>,
    pub final_tick: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn assertion(&self, id: &str) -> Option<&AssertionResult> {
        self.assertions.iter().find(|a| a.id == id)
    }
}

pub struct Simulation {
    spec: ScenarioSpec,
    cells: BTreeMap<String, Cell>,
    net: Network,
    log: EventLog,
    tick: u64,
    next_step: usize,
    /// Scripted request id per in-flight netSeq.
    tracked: BTreeMap<u64, String>,
    decisions: BTreeMap<String, Option<Decision>>,
    results: Vec<Option<AssertionResult>>,
    errors: usize,
}

impl Simulation {
    /// Builds the federation and runs the tick-0 script.
    pub fn new(spec: ScenarioSpec) -> Result<Self, SimError> {
        validate(&spec)?;
        let profiles: BTreeMap<&str, CellProfile> =
            spec.cells.iter().map(|c| (c.cell_id.as_str(), profile_of(c))).collect();
        let mut cells = BTreeMap::new();
        for c in &spec.cells {
            let config = CellConfig {
                profile: profiles[c.cell_id.as_str()].clone(),
                policy: c.policy.clone().unwrap_or_default(),
                trust: c.trust_policy.clone(),
                intervals: c.intervals,
            };
            let resource = reference_resource(&c.resource_kind).expect("validated kind");
            let wrap = |source| SimError::Cell { cell: c.cell_id.clone(), source };
            let mut cell = Cell::new(config, resource).map_err(wrap)?;
            for peer in &c.peers {
                cell.add_known_peer(profiles[peer.as_str()].clone(), 0).map_err(wrap)?;
            }
            cells.insert(c.cell_id.clone(), cell);
        }
        let mut sim = Self {
            net: Network::new(&spec.topology, spec.seed),
            results: vec![None; spec.assertions.len()],
            spec,
            cells,
            log: EventLog::default(),
            tick: 0,
            next_step: 0,
            tracked: BTreeMap::new(),
            decisions: BTreeMap::new(),
            errors: 0,
        };
        for id in sim.cell_ids() {
            sim.collect_events(&id);
        }
        sim.run_script();
        sim.check_at_tick();
        sim.log.flush();
        Ok(sim)
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn decision(&self, request_id: &str) -> Option<&Option<Decision>> {
        self.decisions.get(request_id)
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.spec.max_ticks
    }

    fn cell_ids(&self) -> Vec<String> {
        self.cells.keys().cloned().collect()
    }

    /// Advances one tick; returns the envelopes delivered during it.
    pub fn step(&mut self) -> Vec<SimEnvelope> {
        assert!(!self.is_finished(), "scenario already at maxTicks");
        self.tick += 1;
        let now = self.tick;
        self.log.push(now, SIM, "tick", json!({ "tick": now }));
        self.net.begin_tick();
        self.run_script();

        let (delivered, dropped) = self.net.take_due(now);
        for (env, reason) in dropped {
            self.log_drop(&env, reason);
        }
        for env in &delivered {
            self.deliver(env);
        }
        for id in self.cell_ids() {
            let out = self.cells.get_mut(&id).expect("listed").on_tick(now);
            self.collect_events(&id);
            self.dispatch(&id, out);
        }
        self.check_at_tick();
        self.log.flush();
        delivered
    }

    /// Runs to `maxTicks`, then evaluates `atEnd` assertions.
    pub fn run(mut self) -> (Report, EventLog) {
        while !self.is_finished() {
            self.step();
        }
        let now = self.tick;
        let pending: Vec<SimEnvelope> = self.net.in_flight().cloned().collect();
        for env in pending {
            self.log.push(now, SIM, "in-flight", envelope_summary(&env));
        }
        for i in 0..self.spec.assertions.len() {
            if self.spec.assertions[i].at_end {
                self.evaluate(i);
            }
        }
        let assertions: Vec<AssertionResult> = self
            .results
            .iter()
            .zip(&self.spec.assertions)
            .map(|(r, a)| {
                r.clone().unwrap_or_else(|| AssertionResult {
                    id: a.id.clone(),
                    ok: false,
                    detail: format!("tick {} never reached", a.at_tick.unwrap_or_default()),
                })
            })
            .collect();
        for a in assertions.iter().filter(|a| a.detail.ends_with("never reached")) {
            self.log.push(now, SIM, "assert", json!(a));
        }
        self.log.flush();
        let passed = self.errors == 0 && assertions.iter().all(|a| a.ok);
        let report = Report {
            passed,
            assertions,
            final_tick: now,
        };
        (report, self.log)
    }

    fn collect_events(&mut self, id: &str) {
        let events = self.cells.get_mut(id).expect("known cell").take_events();
        for ev in events {
            self.log.push(self.tick, id, ev.kind, ev.detail);
        }
    }

    fn error(&mut self, cell: &str, message: String) {
        self.errors += 1;
        log::warn!("tick {}: {cell}: {message}", self.tick);
        self.log.push(self.tick, cell, "error", json!({ "message": message }));
    }

    fn log_drop(&mut self, env: &SimEnvelope, reason: DropReason) {
        let mut detail = envelope_summary(env);
        detail["reason"] = json!(reason);
        self.log.push(self.tick, &env.dst, "drop", detail);
    }

    fn send(&mut self, kind: MessageKind, src: &str, dst: &str, body: Value) -> Option<u64> {
        match self.net.send(kind, src, dst, body, self.tick) {
            Ok(env) => {
                self.log.push(self.tick, src, "send", envelope_summary(&env));
                Some(env.net_seq)
            }
            Err((env, reason)) => {
                self.log.push(self.tick, src, "send", envelope_summary(&env));
                self.log_drop(&env, reason);
                None
            }
        }
    }

    fn dispatch(&mut self, src: &str, out: Vec<Outbound>) {
        for o in out {
            match o.dst {
                Destination::Cell(dst) => {
                    self.send(o.kind, src, &dst, o.body);
                }
                Destination::Broadcast => {
                    for dst in self.net.neighbours(src) {
                        self.send(o.kind, src, &dst, o.body.clone());
                    }
                }
            }
        }
    }

    fn deliver(&mut self, env: &SimEnvelope) {
        self.log.push(self.tick, &env.dst, "deliver", envelope_summary(env));
        let cell = self.cells.get_mut(&env.dst).expect("validated dst");
        let result = cell.handle_message(&env.src, env.kind, &env.body, self.tick);
        if let Some(request_id) = self.tracked.remove(&env.net_seq) {
            let decision = cell.audit().last().and_then(|r| r.decision.clone());
            self.decisions.insert(request_id, decision);
        }
        self.collect_events(&env.dst);
        match result {
            Ok(out) => self.dispatch(&env.dst, out),
            Err(e) => self.error(&env.dst, e.to_string()),
        }
    }

    fn run_script(&mut self) {
        while let Some(step) = self.spec.script.get(self.next_step) {
            if step.tick != self.tick {
                break;
            }
            let action = step.action.clone();
            self.next_step += 1;
            self.perform(action);
        }
    }

    fn perform(&mut self, action: Action) {
        let now = self.tick;
        let record = serde_json::to_value(&action).expect("action serializes");
        let actor = match &action {
            Action::Advertise { cell }
            | Action::Register { cell, .. }
            | Action::Lookup { cell, .. }
            | Action::SendOp { cell, .. }
            | Action::SendMgmt { cell, .. }
            | Action::EmitUpdate { cell, .. } => cell.clone(),
            _ => SIM.to_string(),
        };
        self.log.push(now, &actor, "script", record);
        match action {
            Action::Advertise { cell } => {
                let out = self.cells.get_mut(&cell).expect("validated").advertise(now);
                self.collect_events(&cell);
                self.dispatch(&cell, vec![out]);
            }
            Action::Register { cell, target } => {
                match self.cells.get_mut(&cell).expect("validated").register_with(&target, now) {
                    Ok(out) => self.dispatch(&cell, vec![out]),
                    Err(e) => self.error(&cell, e.to_string()),
                }
            }
            Action::Lookup { cell, registry, context, capability } => {
                let out = self.cells[&cell].lookup(&registry, &RegistryLookup { context, capability });
                self.dispatch(&cell, vec![out]);
            }
            Action::SendOp { cell, src, request_id, tokens, action, args, context } => {
                let Some(tokens) = self.tokens(&cell, &tokens) else { return };
                let req = OperationalRequest {
                    tokens,
                    action,
                    args,
                    context,
                    caller_cell_id: String::new(),
                };
                match src {
                    Some(src) => {
                        let body = serde_json::to_value(&req).expect("request serializes");
                        self.send_tracked(MessageKind::OpReq, &src, &cell, body, request_id);
                    }
                    None => {
                        let target = self.cells.get_mut(&cell).expect("validated");
                        target.handle_operational_request(&req, now);
                        let decision = target.audit().last().and_then(|r| r.decision.clone());
                        if let Some(id) = request_id {
                            self.decisions.insert(id, decision);
                        }
                        self.collect_events(&cell);
                    }
                }
            }
            Action::SendMgmt { cell, src, request_id, tokens, command, payload, context } => {
                let Some(tokens) = self.tokens(&cell, &tokens) else { return };
                let cmd = ManagementCommand { tokens, command, payload, context };
                match src {
                    Some(src) => {
                        let body = serde_json::to_value(&cmd).expect("command serializes");
                        self.send_tracked(MessageKind::MgmtReq, &src, &cell, body, request_id);
                    }
                    None => {
                        let target = self.cells.get_mut(&cell).expect("validated");
                        let (_, out) = target.handle_management_command(&cmd, now);
                        let decision = target.audit().last().and_then(|r| r.decision.clone());
                        if let Some(id) = request_id {
                            self.decisions.insert(id, decision);
                        }
                        self.collect_events(&cell);
                        self.dispatch(&cell, out);
                    }
                }
            }
            Action::EmitUpdate { cell, kind, payload, contexts } => {
                let probe = UpdatePackage {
                    origin: cell.clone(),
                    seq: 0,
                    kind,
                    payload,
                    contexts: contexts.clone(),
                    issued_tick: now,
                    sig: String::new(),
                };
                match probe.body() {
                    Ok(body) => {
                        let (_, out) = self
                            .cells
                            .get_mut(&cell)
                            .expect("validated")
                            .emit_update(body, contexts, now);
                        self.collect_events(&cell);
                        self.dispatch(&cell, out);
                    }
                    Err(e) => self.error(&cell, e.to_string()),
                }
            }
            Action::Partition { a, b, from, to } => {
                let p = PartitionSpec {
                    a,
                    b,
                    from: from.unwrap_or(now + 1),
                    to: to.unwrap_or(u64::MAX),
                };
                self.net.add_partition(p);
            }
            Action::Heal { a, b } => {
                let healed = self.net.heal(&a, &b, now + 1);
                if healed == 0 {
                    log::warn!("tick {now}: heal matched no open partition");
                }
            }
            Action::SetDrop { a, b, drop } => self.net.stage_drop(&a, &b, drop),
        }
    }

    fn tokens(&mut self, cell: &str, specs: &[TokenSpec]) -> Option<Vec<Token>> {
        match specs.iter().map(TokenSpec::to_token).collect() {
            Ok(tokens) => Some(tokens),
            Err(e) => {
                self.error(cell, e.to_string());
                None
            }
        }
    }

    fn send_tracked(&mut self, kind: MessageKind, src: &str, dst: &str, body: Value, request_id: Option<String>) {
        if let Some(seq) = self.send(kind, src, dst, body) {
            if let Some(id) = request_id {
                self.tracked.insert(seq, id);
            }
        }
    }

    fn check_at_tick(&mut self) {
        for i in 0..self.spec.assertions.len() {
            if self.spec.assertions[i].at_tick == Some(self.tick) {
                self.evaluate(i);
            }
        }
    }

    fn evaluate(&mut self, i: usize) {
        let a = &self.spec.assertions[i];
        let actual = self.observe(&a.check);
        let (ok, detail) = match actual {
            Ok(actual) if actual == a.expected => (true, format!("{} = {actual}", a.check_name())),
            Ok(actual) => (false, format!("{}: expected {}, got {actual}", a.check_name(), a.expected)),
            Err(why) => (false, format!("{}: {why}", a.check_name())),
        };
        let result = AssertionResult { id: a.id.clone(), ok, detail };
        self.log.push(self.tick, SIM, "assert", json!(result));
        self.results[i] = Some(result);
    }

    /// The observed value a check compares against `expected`.
    fn observe(&self, check: &Check) -> Result<Value, String> {
        let cell = |id: &str| &self.cells[id];
        Ok(match check {
            Check::DecisionEquals { request_id: Some(id), .. } => match self.decisions.get(id) {
                None => return Err(format!("request `{id}` has no outcome yet")),
                Some(None) => json!("none"),
                Some(Some(d)) => json!(d.verdict),
            },
            Check::DecisionEquals { cell: Some(c), request: Some(req), .. } => json!(cell(c).decide(req).verdict),
            Check::DecisionEquals { .. } => unreachable!("validated shape"),
            Check::StoreVersion { cell: c } => json!(cell(c).store().version),
            Check::CatalogueContains { cell: c, entry } => json!(cell(c).catalogue().contains(entry)),
            Check::CatalogueSize { cell: c } => json!(cell(c).catalogue().len()),
            Check::Converged { cells } => {
                let ids: Vec<&str> = if cells.is_empty() {
                    self.cells.keys().map(String::as_str).collect()
                } else {
                    cells.iter().map(String::as_str).collect()
                };
                let digests: BTreeSet<_> = ids.iter().map(|id| cell(id).digest()).collect();
                json!(digests.len() <= 1)
            }
            Check::BlocklistContains { cell: c, context, entry } => {
                json!(cell(c).store().blocklist_contains(context, entry))
            }
        })
    }
}

impl AssertionSpec {
    fn check_name(&self) -> &'static str {
        match self.check {
            Check::DecisionEquals { .. } => "decision-equals",
            Check::StoreVersion { .. } => "store-version",
            Check::CatalogueContains { .. } => "catalogue-contains",
            Check::CatalogueSize { .. } => "catalogue-size",
            Check::Converged { .. } => "converged",
            Check::BlocklistContains { .. } => "blocklist-contains",
        }
    }
}

fn profile_of(c: &CellSpec) -> CellProfile {
    let kind = reference_resource(&c.resource_kind).expect("validated kind").describe().kind;
    CellProfile {
        cell_id: c.cell_id.clone(),
        endpoint: format!("sim://{}", c.cell_id),
        contexts: c.profile.contexts.clone(),
        capabilities: c.profile.capabilities.clone(),
        resource_kind: kind,
        advertised_at_tick: 0,
        ttl_ticks: c.profile.ttl_ticks,
    }
}

fn envelope_summary(env: &SimEnvelope) -> Value {
    json!({
        "netSeq": env.net_seq,
        "kind": env.kind,
        "src": env.src,
        "dst": env.dst,
        "sentTick": env.sent_tick,
        "deliverTick": env.deliver_tick,
    })
}

/// Runs a scenario to completion, writing the event log if asked.
pub fn run_scenario(spec: &ScenarioSpec, log_path: Option<&Path>) -> Result<Report, SimError> {
    let (report, log) = Simulation::new(spec.clone())?.run();
    if let Some(path) = log_path {
        log.write(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(report)
}
