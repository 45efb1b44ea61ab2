use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimError;
use crate::catalogue::TrustPolicy;
use crate::cell::{reference_resource, Args, CommandKind, Intervals};
use crate::governance::UpdateKind;
use crate::policy::{AttributePair, ContextId, DecisionRequest, PolicyFile, PrincipalId, Token};

fn default_seed() -> u64 {
    1
}

fn default_ttl() -> u64 {
    30
}

fn default_latency() -> u64 {
    1
}

fn default_contexts() -> BTreeSet<ContextId> {
    [ContextId::new("default").expect("static token")].into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub max_ticks: u64,
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub script: Vec<ScriptStep>,
    #[serde(default)]
    pub assertions: Vec<AssertionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CellSpec {
    pub cell_id: String,
    #[serde(default)]
    pub profile: ProfileSpec,
    /// Inline policy; filled from `policy_file` on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyFile>,
    /// Path relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_file: Option<PathBuf>,
    pub resource_kind: String,
    #[serde(default)]
    pub intervals: Intervals,
    #[serde(default)]
    pub trust_policy: TrustPolicy,
    /// Cells whose profiles are in this cell's catalogue at tick 0.
    #[serde(default)]
    pub peers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_contexts")]
    pub contexts: BTreeSet<ContextId>,
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
    #[serde(default = "default_ttl")]
    pub ttl_ticks: u64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            contexts: default_contexts(),
            capabilities: BTreeSet::new(),
            ttl_ticks: default_ttl(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub partitions: Vec<PartitionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "default_latency")]
    pub latency: u64,
    #[serde(default)]
    pub drop: f64,
}

/// Envelopes between the two sides with `deliverTick` in `[from, to)` are lost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub a: BTreeSet<String>,
    pub b: BTreeSet<String>,
    pub from: u64,
    pub to: u64,
}

impl PartitionSpec {
    pub fn separates(&self, x: &str, y: &str) -> bool {
        (self.a.contains(x) && self.b.contains(y)) || (self.a.contains(y) && self.b.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub tick: u64,
    #[serde(flatten)]
    pub action: Action,
}

/// A token the simulator issues; signed unless `signature` is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TokenSpec {
    pub subject: PrincipalId,
    #[serde(default)]
    pub claims: BTreeMap<String, BTreeSet<String>>,
    pub issuer: String,
    pub expiry_tick: u64,
    #[serde(default)]
    pub signature: Option<String>,
}

impl TokenSpec {
    pub fn to_token(&self) -> Result<Token, SimError> {
        let mut claims = BTreeSet::new();
        for (name, values) in &self.claims {
            for value in values {
                claims.insert(AttributePair::new(name, value).map_err(|e| SimError::Invalid {
                    field: format!("claims.{name}"),
                    reason: e.to_string(),
                })?);
            }
        }
        let mut token = Token::issue(self.subject.clone(), claims, self.issuer.clone(), self.expiry_tick);
        if let Some(sig) = &self.signature {
            token.signature = sig.clone();
        }
        Ok(token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "params", rename_all = "kebab-case")]
pub enum Action {
    Advertise {
        cell: String,
    },
    Register {
        cell: String,
        target: String,
    },
    #[serde(rename_all = "camelCase")]
    Lookup {
        cell: String,
        registry: String,
        #[serde(default)]
        context: Option<ContextId>,
        #[serde(default)]
        capability: Option<String>,
    },
    /// Delivered over the network from `src`, or handled in place without one.
    #[serde(rename_all = "camelCase")]
    SendOp {
        cell: String,
        #[serde(default)]
        src: Option<String>,
        #[serde(default)]
        request_id: Option<String>,
        #[serde(default)]
        tokens: Vec<TokenSpec>,
        action: String,
        #[serde(default)]
        args: Args,
        context: ContextId,
    },
    #[serde(rename_all = "camelCase")]
    SendMgmt {
        cell: String,
        #[serde(default)]
        src: Option<String>,
        #[serde(default)]
        request_id: Option<String>,
        #[serde(default)]
        tokens: Vec<TokenSpec>,
        command: CommandKind,
        #[serde(default)]
        payload: Value,
        context: ContextId,
    },
    EmitUpdate {
        cell: String,
        kind: UpdateKind,
        payload: Value,
        contexts: BTreeSet<ContextId>,
    },
    Partition {
        a: BTreeSet<String>,
        b: BTreeSet<String>,
        #[serde(default)]
        from: Option<u64>,
        #[serde(default)]
        to: Option<u64>,
    },
    Heal {
        a: BTreeSet<String>,
        b: BTreeSet<String>,
    },
    SetDrop {
        a: String,
        b: String,
        drop: f64,
    },
}

impl Action {
    fn cell_refs(&self) -> Vec<(&'static str, &str)> {
        match self {
            Action::Advertise { cell } => vec![("cell", cell)],
            Action::Register { cell, target } => vec![("cell", cell), ("target", target)],
            Action::Lookup { cell, registry, .. } => vec![("cell", cell), ("registry", registry)],
            Action::SendOp { cell, src, .. } | Action::SendMgmt { cell, src, .. } => {
                let mut refs = vec![("cell", cell.as_str())];
                refs.extend(src.as_deref().map(|s| ("src", s)));
                refs
            }
            Action::EmitUpdate { cell, .. } => vec![("cell", cell)],
            Action::Partition { a, b, .. } | Action::Heal { a, b } => a
                .iter()
                .map(|c| ("a", c.as_str()))
                .chain(b.iter().map(|c| ("b", c.as_str())))
                .collect(),
            Action::SetDrop { a, b, .. } => vec![("a", a), ("b", b)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssertionSpec {
    pub id: String,
    #[serde(default)]
    pub at_tick: Option<u64>,
    #[serde(default)]
    pub at_end: bool,
    #[serde(flatten)]
    pub check: Check,
    pub expected: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", content = "params", rename_all = "kebab-case")]
pub enum Check {
    /// Verdict of a scripted request, or of `request` evaluated at `cell`.
    #[serde(rename_all = "camelCase")]
    DecisionEquals {
        #[serde(default)]
        request_id: Option<String>,
        #[serde(default)]
        cell: Option<String>,
        #[serde(default)]
        request: Option<DecisionRequest>,
    },
    StoreVersion {
        cell: String,
    },
    CatalogueContains {
        cell: String,
        entry: String,
    },
    CatalogueSize {
        cell: String,
    },
    /// Listed cells (all when empty) hold identical per-origin max seqs.
    Converged {
        #[serde(default)]
        cells: Vec<String>,
    },
    BlocklistContains {
        cell: String,
        context: ContextId,
        entry: String,
    },
}

impl Check {
    fn cell_refs(&self) -> Vec<(&'static str, &str)> {
        match self {
            Check::DecisionEquals { cell, .. } => cell.iter().map(|c| ("cell", c.as_str())).collect(),
            Check::StoreVersion { cell }
            | Check::CatalogueSize { cell }
            | Check::BlocklistContains { cell, .. } => vec![("cell", cell)],
            Check::CatalogueContains { cell, entry } => vec![("cell", cell), ("entry", entry)],
            Check::Converged { cells } => cells.iter().map(|c| ("cells", c.as_str())).collect(),
        }
    }
}

/// Reads, parses and validates a scenario; `policyFile` paths resolve
/// against the scenario's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<ScenarioSpec, SimError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| SimError::Parse {
        field: e.path().to_string(),
        line: e.inner().line(),
        message: e.inner().to_string(),
    })?;
    for (i, cell) in spec.cells.iter_mut().enumerate() {
        if let Some(rel) = &cell.policy_file {
            if cell.policy.is_some() {
                return Err(SimError::Invalid {
                    field: format!("cells[{i}].policyFile"),
                    reason: "give either policy or policyFile".into(),
                });
            }
            let policy = PolicyFile::load(&base_dir.join(rel)).map_err(|e| SimError::Invalid {
                field: format!("cells[{i}].policyFile"),
                reason: e.to_string(),
            })?;
            cell.policy = Some(policy);
        }
    }
    validate(&spec)?;
    Ok(spec)
}

pub fn validate(spec: &ScenarioSpec) -> Result<(), SimError> {
    let mut ids = BTreeSet::new();
    for (i, cell) in spec.cells.iter().enumerate() {
        let field = |f: &str| format!("cells[{i}].{f}");
        if !ids.insert(cell.cell_id.as_str()) {
            return Err(SimError::Invalid {
                field: field("cellId"),
                reason: format!("duplicate cell `{}`", cell.cell_id),
            });
        }
        if cell.cell_id.is_empty() || cell.cell_id.contains(['/', '*']) {
            return Err(SimError::Invalid {
                field: field("cellId"),
                reason: "cell ids must be non-empty without `/` or `*`".into(),
            });
        }
        if reference_resource(&cell.resource_kind).is_none() {
            return Err(SimError::Invalid {
                field: field("resourceKind"),
                reason: format!("unknown resource kind `{}`", cell.resource_kind),
            });
        }
        if let Some(policy) = &cell.policy {
            policy.validate().map_err(|e| SimError::Invalid {
                field: field("policy"),
                reason: e.to_string(),
            })?;
        }
    }
    let known = |field: String, id: &str| {
        if ids.contains(id) {
            Ok(())
        } else {
            Err(SimError::UnknownCellRef { field, cell: id.to_string() })
        }
    };
    for (i, cell) in spec.cells.iter().enumerate() {
        for (j, peer) in cell.peers.iter().enumerate() {
            known(format!("cells[{i}].peers[{j}]"), peer)?;
        }
    }
    for (i, link) in spec.topology.links.iter().enumerate() {
        let field = |f: &str| format!("topology.links[{i}].{f}");
        known(field("a"), &link.a)?;
        known(field("b"), &link.b)?;
        if link.a == link.b {
            return Err(SimError::Invalid {
                field: field("b"),
                reason: format!("self-link on `{}`", link.a),
            });
        }
        if link.latency == 0 {
            return Err(SimError::Invalid {
                field: field("latency"),
                reason: "latency must be at least one tick".into(),
            });
        }
        check_probability(field("drop"), link.drop)?;
    }
    for (i, p) in spec.topology.partitions.iter().enumerate() {
        check_partition(&format!("topology.partitions[{i}]"), &p.a, &p.b, p.from, p.to, &known)?;
    }
    let mut last = 0;
    for (i, step) in spec.script.iter().enumerate() {
        let field = |f: &str| format!("script[{i}].{f}");
        if step.tick < last {
            return Err(SimError::Invalid {
                field: field("tick"),
                reason: "script must be sorted by tick".into(),
            });
        }
        last = step.tick;
        for (name, id) in step.action.cell_refs() {
            known(field(&format!("params.{name}")), id)?;
        }
        match &step.action {
            Action::SetDrop { a, b, drop } => {
                check_probability(field("params.drop"), *drop)?;
                if !spec.topology.links.iter().any(|l| same_link(l, a, b)) {
                    return Err(SimError::UnknownLink { field: field("params"), a: a.clone(), b: b.clone() });
                }
            }
            Action::Partition { a, b, from, to } => {
                let from = from.unwrap_or(step.tick + 1);
                let to = to.unwrap_or(u64::MAX);
                check_partition(&field("params"), a, b, from, to, &known)?;
            }
            Action::SendOp { tokens, .. } | Action::SendMgmt { tokens, .. } => {
                for t in tokens {
                    t.to_token()?;
                }
            }
            _ => {}
        }
    }
    for (i, assertion) in spec.assertions.iter().enumerate() {
        let field = |f: &str| format!("assertions[{i}].{f}");
        if assertion.at_tick.is_some() == assertion.at_end {
            return Err(SimError::Invalid {
                field: field("atTick"),
                reason: "give exactly one of atTick or atEnd".into(),
            });
        }
        for (name, id) in assertion.check.cell_refs() {
            known(field(&format!("params.{name}")), id)?;
        }
        if let Check::DecisionEquals { request_id, cell, request } = &assertion.check {
            let scripted = request_id.is_some() && cell.is_none() && request.is_none();
            let direct = request_id.is_none() && cell.is_some() && request.is_some();
            if !(scripted || direct) {
                return Err(SimError::Invalid {
                    field: field("params"),
                    reason: "give requestId, or cell and request".into(),
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn same_link(link: &LinkSpec, a: &str, b: &str) -> bool {
    (link.a == a && link.b == b) || (link.a == b && link.b == a)
}

fn check_probability(field: String, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidProbability { field, value: p })
    }
}

fn check_partition(
    field: &str,
    a: &BTreeSet<String>,
    b: &BTreeSet<String>,
    from: u64,
    to: u64,
    known: &dyn Fn(String, &str) -> Result<(), SimError>,
) -> Result<(), SimError> {
    for id in a {
        known(format!("{field}.a"), id)?;
    }
    for id in b {
        known(format!("{field}.b"), id)?;
    }
    if from > to {
        return Err(SimError::Invalid {
            field: format!("{field}.from"),
            reason: format!("interval [{from}, {to}) is reversed"),
        });
    }
    if a.is_empty() || b.is_empty() || !a.is_disjoint(b) {
        return Err(SimError::Invalid {
            field: field.to_string(),
            reason: "sides must be non-empty and disjoint".into(),
        });
    }
    Ok(())
}
