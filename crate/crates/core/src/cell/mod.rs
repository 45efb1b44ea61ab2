//! The cell runtime.
//!
//! A [`Cell`] wires the bus, policy engine, governance, catalogue and
//! discovery around one [`ManagedResource`]. All inter-cell traffic leaves a
//! cell as [`Outbound`] messages; the simulator delivers them and hands
//! incoming ones to [`Cell::handle_message`].
//!
//! Update propagation is push-flood with per-origin sequence dedup, backed by
//! periodic digest exchange (anti-entropy) with one trusted partner per
//! interval.

mod resource;
mod wire;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bus::{Bus, Envelope, Subscription};
use crate::catalogue::{Catalogue, CatalogueError, CellProfile, TrustPolicy};
use crate::discovery::{Advertisement, Discovery, DiscoveryError, RegistrationRequest, RegistryLookup};
use crate::governance::{
    apply_update, context_view, ApplyStatus, GovernanceError, PolicyStoreState, UpdateBody,
    UpdatePackage,
};
use crate::policy::{
    evaluate_request, expand_delegations, verify_token, ContextId, Decision, DecisionRequest,
    PolicyError, PolicyFile, Token, Verdict,
};

pub use resource::{
    reference_resource, Args, CallFilter, EmailFilter, ManagedResource, NullResource,
    ResourceDescriptor, ResourceView,
};
pub use wire::{
    AuditKind, AuditRecord, CommandKind, ManagementCommand, MessageKind, OperationalRequest,
    Response, ResponseStatus,
};

use wire::Command;

/// Subscriber that queues every policy change for the management interface.
const POLICY_WATCH: &str = "management";

#[derive(Debug, Error)]
pub enum CellError {
    #[error("malformed {kind} message: {reason}")]
    BadMessage { kind: &'static str, reason: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Catalogue(#[from] CatalogueError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error("resource kind `{resource}` does not match profile kind `{profile}`")]
    ResourceMismatch { resource: String, profile: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Intervals {
    /// Ticks between advertisements; 0 disables.
    #[serde(default = "default_interval")]
    pub advertise: u64,
    /// Ticks between digest exchanges; 0 disables.
    #[serde(default = "default_interval")]
    pub anti_entropy: u64,
}

fn default_interval() -> u64 {
    10
}

impl Default for Intervals {
    fn default() -> Self {
        Self {
            advertise: default_interval(),
            anti_entropy: default_interval(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellConfig {
    pub profile: CellProfile,
    pub policy: PolicyFile,
    pub trust: TrustPolicy,
    pub intervals: Intervals,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Cell(String),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub dst: Destination,
    pub kind: MessageKind,
    pub body: Value,
}

impl Outbound {
    fn to(dst: &str, kind: MessageKind, body: Value) -> Self {
        Self {
            dst: Destination::Cell(dst.to_string()),
            kind,
            body,
        }
    }
}

/// Something observable that happened inside a cell, for the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEvent {
    pub kind: &'static str,
    pub detail: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestOutcome {
    Applied,
    Duplicate,
    Buffered,
    Rejected,
    Malformed,
    UntrustedSource,
    BadSignature,
}

impl From<&ApplyStatus> for IngestOutcome {
    fn from(status: &ApplyStatus) -> Self {
        match status {
            ApplyStatus::Applied => IngestOutcome::Applied,
            ApplyStatus::Duplicate => IngestOutcome::Duplicate,
            ApplyStatus::Buffered => IngestOutcome::Buffered,
            ApplyStatus::Rejected(_) => IngestOutcome::Rejected,
            ApplyStatus::Malformed(_) => IngestOutcome::Malformed,
        }
    }
}

pub struct Cell {
    id: String,
    discovery: Discovery,
    catalogue: Catalogue,
    store: PolicyStoreState,
    policy: PolicyFile,
    trust: TrustPolicy,
    intervals: Intervals,
    resource: Box<dyn ManagedResource>,
    bus: Bus,
    audit: Vec<AuditRecord>,
    /// Every consumed package from a shared origin, for anti-entropy replies.
    update_log: BTreeMap<String, BTreeMap<u64, UpdatePackage>>,
    next_local_seq: u64,
    last_digest_peer: Option<String>,
    events: Vec<CellEvent>,
}

impl Cell {
    pub fn new(config: CellConfig, resource: Box<dyn ManagedResource>) -> Result<Self, CellError> {
        config.profile.validate()?;
        config.policy.validate()?;
        let kind = resource.describe().kind;
        if kind != config.profile.resource_kind {
            return Err(CellError::ResourceMismatch {
                resource: kind,
                profile: config.profile.resource_kind,
            });
        }
        let id = config.profile.cell_id.clone();
        let mut bus = Bus::new();
        bus.subscribe(Subscription::queued(POLICY_WATCH, "policy.*"))
            .expect("static filter");
        Ok(Self {
            catalogue: Catalogue::new(id.clone()),
            discovery: Discovery::new(config.profile),
            store: PolicyStoreState::with_rules(config.policy.rules.iter().cloned()),
            policy: config.policy,
            trust: config.trust,
            intervals: config.intervals,
            resource,
            bus,
            audit: Vec::new(),
            update_log: BTreeMap::new(),
            next_local_seq: 0,
            last_digest_peer: None,
            events: Vec::new(),
            id,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn profile(&self) -> &CellProfile {
        self.discovery.profile()
    }

    pub fn store(&self) -> &PolicyStoreState {
        &self.store
    }

    pub fn catalogue(&self) -> &Catalogue {
        &self.catalogue
    }

    pub fn trust_policy(&self) -> &TrustPolicy {
        &self.trust
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn resource(&self) -> &dyn ManagedResource {
        self.resource.as_ref()
    }

    pub fn bus_mut(&mut self) -> &mut Bus {
        &mut self.bus
    }

    /// Policy-change envelopes published since the last call.
    pub fn drain_policy_events(&mut self) -> Vec<Envelope> {
        self.bus.drain(POLICY_WATCH).expect("subscribed at construction")
    }

    pub fn take_events(&mut self) -> Vec<CellEvent> {
        std::mem::take(&mut self.events)
    }

    /// Seeds the catalogue with a partner known from configuration.
    pub fn add_known_peer(&mut self, profile: CellProfile, now: u64) -> Result<(), CellError> {
        self.catalogue.upsert_entry(profile, now, &self.trust)?;
        Ok(())
    }

    /// The local origin id: never a valid cell id, so never shared.
    fn local_origin(&self) -> String {
        format!("{}/local", self.id)
    }

    fn publish(&mut self, topic: &str, payload: Value, now: u64) {
        // Cell ticks never go backwards and topics are static.
        self.bus
            .publish(topic, payload, &self.id, now)
            .expect("cell topics are well formed");
        for env in self.bus.take_journal() {
            self.events.push(CellEvent {
                kind: "bus",
                detail: serde_json::to_value(env).expect("envelope serializes"),
            });
        }
    }

    fn record(&mut self, rec: AuditRecord) {
        self.events.push(CellEvent {
            kind: "audit",
            detail: serde_json::to_value(&rec).expect("audit serializes"),
        });
        self.audit.push(rec);
    }

    fn view<'a>(&'a self, context: &'a ContextId) -> ResourceView<'a> {
        ResourceView {
            context,
            blocklist: self.store.blocklist_for(context).collect(),
        }
    }

    /// Verifies tokens, expands delegations in `context` and evaluates the
    /// request against that context's view of the store.
    pub fn authorize(
        &self,
        tokens: &[Token],
        action: &str,
        context: &ContextId,
        extra: BTreeSet<crate::policy::AttributePair>,
        now: u64,
    ) -> Decision {
        let mut attrs = extra;
        for token in tokens {
            match verify_token(token, &self.policy.trusted_issuers, now) {
                Ok(claims) => attrs.extend(expand_delegations(
                    &claims,
                    &token.subject,
                    &self.policy.delegations,
                    &self.policy.roots,
                    context,
                )),
                Err(e) => return Decision::indeterminate(format!("indeterminate: {}", e.kind())),
            }
        }
        let req = DecisionRequest {
            subject_attrs: attrs,
            action: action.to_string(),
            resource_id: self.profile().resource_kind.clone(),
            context: context.clone(),
            tick: now,
        };
        self.decide(&req)
    }

    /// Evaluates an already-expanded request against this cell's store.
    pub fn decide(&self, req: &DecisionRequest) -> Decision {
        evaluate_request(context_view(&self.store, &req.context), req)
            .expect("store keys are unique")
    }

    fn denial_reason(decision: &Decision) -> String {
        match decision.verdict {
            Verdict::Indeterminate => decision.reason.clone(),
            v => v.reason().to_string(),
        }
    }

    pub fn handle_operational_request(&mut self, req: &OperationalRequest, now: u64) -> Response {
        let summary = format!("{} {} from {}", req.context, req.action, caller(&req.caller_cell_id));
        if !self.resource.describe().operations.contains(&req.action) {
            let response = Response::denied("unknown-action");
            self.finish_op(now, summary, None, &response);
            return response;
        }
        let view = self.view(&req.context);
        let extra = self.resource.request_attributes(&req.action, &req.args, &view);
        let decision = self.authorize(&req.tokens, &req.action, &req.context, extra, now);
        let response = if decision.verdict == Verdict::Permit {
            let blocklist: BTreeSet<String> =
                self.store.blocklist_for(&req.context).map(str::to_string).collect();
            let view = ResourceView {
                context: &req.context,
                blocklist: blocklist.iter().map(String::as_str).collect(),
            };
            Response::ok(self.resource.invoke(&req.action, &req.args, &view))
        } else {
            Response::denied(Self::denial_reason(&decision))
        };
        self.finish_op(now, summary, Some(decision), &response);
        response
    }

    fn finish_op(&mut self, now: u64, summary: String, decision: Option<Decision>, response: &Response) {
        self.events.push(CellEvent {
            kind: "decision",
            detail: json!({ "request": summary, "decision": decision, "response": response }),
        });
        self.publish(
            "cell.op",
            json!({ "request": summary, "status": response.status, "reason": response.reason }),
            now,
        );
        self.record(AuditRecord {
            tick: now,
            kind: AuditKind::Op,
            summary,
            decision,
            outcome: outcome_text(response),
        });
    }

    pub fn handle_management_command(
        &mut self,
        cmd: &ManagementCommand,
        now: u64,
    ) -> (Response, Vec<Outbound>) {
        let action = cmd.command.action();
        let summary = format!("{} {}", cmd.context, action);
        let decision = self.authorize(&cmd.tokens, &action, &cmd.context, BTreeSet::new(), now);
        let (response, outbound) = if decision.verdict != Verdict::Permit {
            (Response::denied(Self::denial_reason(&decision)), Vec::new())
        } else {
            match cmd.parse() {
                Err(reason) => (Response::denied(format!("malformed-command: {reason}")), Vec::new()),
                Ok(command) => self.execute(command, &cmd.context, now),
            }
        };
        self.events.push(CellEvent {
            kind: "decision",
            detail: json!({ "request": summary, "decision": decision, "response": response }),
        });
        self.publish(
            "cell.mgmt",
            json!({ "command": action, "status": response.status, "reason": response.reason }),
            now,
        );
        self.record(AuditRecord {
            tick: now,
            kind: AuditKind::Mgmt,
            summary,
            decision: Some(decision),
            outcome: outcome_text(&response),
        });
        (response, outbound)
    }

    fn execute(&mut self, command: Command, context: &ContextId, now: u64) -> (Response, Vec<Outbound>) {
        let scope: BTreeSet<ContextId> = [context.clone()].into();
        match command {
            Command::AddRule(rule) => {
                if rule.contexts != scope {
                    return (
                        Response::denied("malformed-command: rule must be scoped to the command's context"),
                        Vec::new(),
                    );
                }
                (self.apply_local(UpdateBody::RuleAdd(rule), scope, now), Vec::new())
            }
            Command::RemoveRule(id) => (self.apply_local(UpdateBody::RuleRemove(id), scope, now), Vec::new()),
            Command::SetConfig { key, value } => {
                let response = self.apply_local(
                    UpdateBody::ConfigSet { key: key.clone(), value: value.clone() },
                    scope,
                    now,
                );
                if response.is_ok() {
                    let ack = self.resource.apply_config(&key, &value);
                    return (Response::ok(json!({ "ack": ack })), Vec::new());
                }
                (response, Vec::new())
            }
            Command::SetTrust(capabilities) => {
                self.trust.insert(context.clone(), capabilities);
                self.catalogue.retrust(&self.trust);
                (Response::ok(json!({ "trust": context })), Vec::new())
            }
            Command::FlagSpam(entry) => {
                let (status, outbound) = self.emit_update(UpdateBody::BlocklistAdd(entry), scope, now);
                let response = Response::ok(json!({ "update": status, "sent": outbound.len() }));
                (response, outbound)
            }
        }
    }

    /// Applies a locally originated update through governance without sharing it.
    fn apply_local(&mut self, body: UpdateBody, contexts: BTreeSet<ContextId>, now: u64) -> Response {
        let origin = self.local_origin();
        let pkg = UpdatePackage::new(origin, self.next_local_seq, &body, contexts, now);
        self.next_local_seq += 1;
        let result = apply_update(&mut self.store, &pkg, &self.policy.regression)
            .expect("locally signed packages verify");
        self.after_consumed(&result.consumed, now, false);
        match &result.status {
            ApplyStatus::Applied => Response::ok(json!({ "version": self.store.version })),
            ApplyStatus::Rejected(assessment) => Response {
                status: ResponseStatus::Denied,
                reason: "impact-rejected".into(),
                result: serde_json::to_value(assessment).expect("assessment serializes"),
            },
            ApplyStatus::Malformed(reason) => Response::denied(format!("malformed-update: {reason}")),
            other => Response::denied(other.name()),
        }
    }

    /// Bookkeeping for consumed packages: update log, bus, event log.
    fn after_consumed(&mut self, consumed: &[crate::governance::Consumed], now: u64, shared: bool) {
        for c in consumed {
            if shared {
                self.update_log
                    .entry(c.package.origin.clone())
                    .or_default()
                    .insert(c.package.seq, c.package.clone());
            }
            let detail = json!({
                "origin": c.package.origin,
                "seq": c.package.seq,
                "kind": c.package.kind,
                "status": c.status.name(),
                "version": self.store.version,
            });
            self.events.push(CellEvent { kind: "update", detail: detail.clone() });
            if c.status == ApplyStatus::Applied {
                self.publish("policy.updated", detail, now);
            }
        }
    }

    /// Partners trusted in at least one of `contexts`, in id order.
    fn trusted_partners(&self, contexts: &BTreeSet<ContextId>) -> BTreeSet<String> {
        contexts
            .iter()
            .flat_map(|c| {
                self.catalogue
                    .query(Some(c), None, true)
                    .expect("context given")
                    .into_iter()
                    .map(|e| e.profile.cell_id.clone())
            })
            .collect()
    }

    /// Originates a shared update: applies it locally first, then pushes it to
    /// every trusted partner in its contexts.
    pub fn emit_update(
        &mut self,
        body: UpdateBody,
        contexts: BTreeSet<ContextId>,
        now: u64,
    ) -> (IngestOutcome, Vec<Outbound>) {
        let seq = self.store.next_seq(&self.id);
        let pkg = UpdatePackage::new(self.id.clone(), seq, &body, contexts, now);
        let result = apply_update(&mut self.store, &pkg, &self.policy.regression)
            .expect("own packages verify");
        self.after_consumed(&result.consumed, now, true);
        let targets = self.trusted_partners(&pkg.contexts);
        let body = serde_json::to_value(&pkg).expect("package serializes");
        let outbound: Vec<Outbound> = targets
            .iter()
            .map(|t| Outbound::to(t, MessageKind::Update, body.clone()))
            .collect();
        let status = IngestOutcome::from(&result.status);
        self.record(AuditRecord {
            tick: now,
            kind: AuditKind::UpdateOut,
            summary: format!("{}#{} {}", pkg.origin, pkg.seq, pkg.kind.as_str()),
            decision: None,
            outcome: format!("{} to {:?}", status_name(status), targets),
        });
        (status, outbound)
    }

    /// Accepts an update pushed by `from`, applies it if the sender is trusted
    /// in every context the update touches, and forwards what was applied.
    pub fn ingest_security_update(
        &mut self,
        pkg: &UpdatePackage,
        from: &str,
        now: u64,
    ) -> (IngestOutcome, Vec<Outbound>) {
        let summary = format!("{}#{} {} from {}", pkg.origin, pkg.seq, pkg.kind.as_str(), from);
        let trusted = pkg.contexts.iter().all(|c| self.catalogue.is_trusted(from, c));
        let (outcome, outbound) = if !trusted {
            (IngestOutcome::UntrustedSource, Vec::new())
        } else {
            match apply_update(&mut self.store, pkg, &self.policy.regression) {
                Err(GovernanceError::BadSignature { .. }) => (IngestOutcome::BadSignature, Vec::new()),
                Err(_) => (IngestOutcome::Malformed, Vec::new()),
                Ok(result) => {
                    self.after_consumed(&result.consumed, now, true);
                    let mut outbound = Vec::new();
                    for c in result.consumed.iter().filter(|c| c.status == ApplyStatus::Applied) {
                        let body = serde_json::to_value(&c.package).expect("package serializes");
                        for target in self.trusted_partners(&c.package.contexts) {
                            if target != from && target != c.package.origin {
                                outbound.push(Outbound::to(&target, MessageKind::Update, body.clone()));
                            }
                        }
                    }
                    (IngestOutcome::from(&result.status), outbound)
                }
            }
        };
        if matches!(outcome, IngestOutcome::UntrustedSource | IngestOutcome::BadSignature) {
            self.events.push(CellEvent {
                kind: "update",
                detail: json!({ "origin": pkg.origin, "seq": pkg.seq, "from": from, "status": outcome }),
            });
        }
        self.record(AuditRecord {
            tick: now,
            kind: AuditKind::UpdateIn,
            summary,
            decision: None,
            outcome: format!("{} (forwarded {})", status_name(outcome), outbound.len()),
        });
        (outcome, outbound)
    }

    /// Highest consumed seq per shared origin.
    pub fn digest(&self) -> BTreeMap<String, u64> {
        self.store
            .applied_seq
            .iter()
            .filter(|(origin, _)| !origin.contains('/'))
            .map(|(o, s)| (o.clone(), *s))
            .collect()
    }

    /// Logged packages the holder of `digest` lacks and `peer` may receive.
    fn missing_for(&self, peer: &str, digest: &BTreeMap<String, u64>) -> Vec<UpdatePackage> {
        let mut out = Vec::new();
        for (origin, packages) in &self.update_log {
            let have = digest.get(origin);
            for (seq, pkg) in packages {
                let lacking = have.is_none_or(|h| seq > h);
                let shareable = pkg.contexts.iter().any(|c| self.catalogue.is_trusted(peer, c));
                if lacking && shareable && origin != peer {
                    out.push(pkg.clone());
                }
            }
        }
        out
    }

    fn next_digest_peer(&mut self) -> Option<String> {
        let partners: Vec<String> = self
            .catalogue
            .entries()
            .filter(|e| e.trusted.values().any(|&t| t))
            .map(|e| e.profile.cell_id.clone())
            .collect();
        let next = match &self.last_digest_peer {
            Some(last) => partners.iter().find(|p| *p > last).or(partners.first()),
            None => partners.first(),
        }
        .cloned();
        if next.is_some() {
            self.last_digest_peer = next.clone();
        }
        next
    }

    /// Periodic duties: catalogue sweep, advertisement, anti-entropy digest.
    pub fn on_tick(&mut self, now: u64) -> Vec<Outbound> {
        let mut outbound = Vec::new();
        let evicted = self.catalogue.expire_stale(now);
        if !evicted.is_empty() {
            self.publish("catalogue.evicted", json!(evicted), now);
        }
        if self.intervals.advertise > 0 && now.is_multiple_of(self.intervals.advertise) {
            outbound.push(self.advertise(now));
        }
        if self.intervals.anti_entropy > 0 && now.is_multiple_of(self.intervals.anti_entropy) {
            if let Some(peer) = self.next_digest_peer() {
                outbound.push(Outbound::to(&peer, MessageKind::Digest, json!({ "digest": self.digest() })));
            }
        }
        outbound
    }

    pub fn advertise(&mut self, now: u64) -> Outbound {
        let adv = self.discovery.make_advertisement(now);
        self.publish("discovery.advertised", json!({ "nonce": adv.nonce }), now);
        Outbound {
            dst: Destination::Broadcast,
            kind: MessageKind::Advert,
            body: serde_json::to_value(adv).expect("advert serializes"),
        }
    }

    pub fn register_with(&mut self, target: &str, now: u64) -> Result<Outbound, CellError> {
        let req = self.discovery.register_with(target, now)?;
        Ok(Outbound::to(
            target,
            MessageKind::Register,
            serde_json::to_value(req).expect("registration serializes"),
        ))
    }

    pub fn lookup(&self, registry: &str, lookup: &RegistryLookup) -> Outbound {
        Outbound::to(
            registry,
            MessageKind::Lookup,
            serde_json::to_value(lookup).expect("lookup serializes"),
        )
    }

    /// Dispatches one delivered message.
    pub fn handle_message(
        &mut self,
        src: &str,
        kind: MessageKind,
        body: &Value,
        now: u64,
    ) -> Result<Vec<Outbound>, CellError> {
        let mut out = Vec::new();
        match kind {
            MessageKind::Advert => {
                let adv: Advertisement = parse(kind, body)?;
                let outcome = self
                    .discovery
                    .handle_advertisement(adv, now, &mut self.catalogue, &self.trust)
                    .map_err(|e| bad(kind, e))?;
                self.publish("discovery.advert", json!({ "from": src, "outcome": outcome }), now);
            }
            MessageKind::Register | MessageKind::RegisterReply => {
                let req: RegistrationRequest = parse(kind, body)?;
                let reply = self
                    .discovery
                    .handle_registration(req, now, &mut self.catalogue, &self.trust)
                    .map_err(|e| bad(kind, e))?;
                self.publish("discovery.registered", json!({ "from": src }), now);
                if let Some(reply) = reply {
                    out.push(Outbound::to(
                        src,
                        MessageKind::RegisterReply,
                        serde_json::to_value(reply).expect("registration serializes"),
                    ));
                }
            }
            MessageKind::Lookup => {
                let lookup: RegistryLookup = parse(kind, body)?;
                let profiles = self.discovery.answer_lookup(&lookup, &self.catalogue).unwrap_or_default();
                out.push(Outbound::to(src, MessageKind::LookupReply, json!({ "profiles": profiles })));
            }
            MessageKind::LookupReply => {
                let profiles: Vec<CellProfile> = parse(kind, &body["profiles"])?;
                let added = self
                    .discovery
                    .handle_lookup_reply(profiles, now, &mut self.catalogue, &self.trust);
                self.publish("discovery.lookup", json!({ "from": src, "added": added }), now);
            }
            MessageKind::Update => {
                let pkg: UpdatePackage = parse(kind, body)?;
                out = self.ingest_security_update(&pkg, src, now).1;
            }
            MessageKind::Digest => {
                let digest: BTreeMap<String, u64> = parse(kind, &body["digest"])?;
                if self.catalogue.entries().any(|e| e.profile.cell_id == src) {
                    let packages = self.missing_for(src, &digest);
                    out.push(Outbound::to(
                        src,
                        MessageKind::DigestReply,
                        json!({ "packages": packages, "digest": self.digest() }),
                    ));
                }
            }
            MessageKind::DigestReply => {
                let packages: Vec<UpdatePackage> = parse(kind, &body["packages"])?;
                for pkg in &packages {
                    out.extend(self.ingest_security_update(pkg, src, now).1);
                }
                if !body["digest"].is_null() {
                    let digest: BTreeMap<String, u64> = parse(kind, &body["digest"])?;
                    let back = self.missing_for(src, &digest);
                    if !back.is_empty() {
                        out.push(Outbound::to(
                            src,
                            MessageKind::DigestReply,
                            json!({ "packages": back, "digest": null }),
                        ));
                    }
                }
            }
            MessageKind::OpReq => {
                let mut req: OperationalRequest = parse(kind, body)?;
                req.caller_cell_id = src.to_string();
                let response = self.handle_operational_request(&req, now);
                out.push(Outbound::to(src, MessageKind::OpResp, serde_json::to_value(response).expect("response")));
            }
            MessageKind::MgmtReq => {
                let cmd: ManagementCommand = parse(kind, body)?;
                let (response, mut sent) = self.handle_management_command(&cmd, now);
                out.push(Outbound::to(src, MessageKind::MgmtResp, serde_json::to_value(response).expect("response")));
                out.append(&mut sent);
            }
            MessageKind::OpResp | MessageKind::MgmtResp => {
                let response: Response = parse(kind, body)?;
                self.publish(
                    "cell.response",
                    json!({ "from": src, "kind": kind, "status": response.status, "reason": response.reason }),
                    now,
                );
            }
        }
        Ok(out)
    }
}

fn parse<T: serde::de::DeserializeOwned>(kind: MessageKind, body: &Value) -> Result<T, CellError> {
    serde_json::from_value(body.clone()).map_err(|e| bad(kind, e))
}

fn bad(kind: MessageKind, e: impl std::fmt::Display) -> CellError {
    CellError::BadMessage {
        kind: kind.as_str(),
        reason: e.to_string(),
    }
}

fn caller(id: &str) -> &str {
    if id.is_empty() {
        "local"
    } else {
        id
    }
}

fn outcome_text(response: &Response) -> String {
    match response.status {
        ResponseStatus::Ok => "ok".into(),
        ResponseStatus::Denied => format!("denied: {}", response.reason),
    }
}

fn status_name(outcome: IngestOutcome) -> String {
    serde_json::to_value(outcome)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
