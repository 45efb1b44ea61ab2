use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::resource::Args;
use crate::policy::{ContextId, Decision, PolicyRule, Token};

/// Message kinds carried between cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Advert,
    Register,
    RegisterReply,
    Update,
    Digest,
    DigestReply,
    OpReq,
    OpResp,
    MgmtReq,
    MgmtResp,
    Lookup,
    LookupReply,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Advert => "advert",
            MessageKind::Register => "register",
            MessageKind::RegisterReply => "register-reply",
            MessageKind::Update => "update",
            MessageKind::Digest => "digest",
            MessageKind::DigestReply => "digest-reply",
            MessageKind::OpReq => "op-req",
            MessageKind::OpResp => "op-resp",
            MessageKind::MgmtReq => "mgmt-req",
            MessageKind::MgmtResp => "mgmt-resp",
            MessageKind::Lookup => "lookup",
            MessageKind::LookupReply => "lookup-reply",
        }
    }
}

/// A request to the resource's operational interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalRequest {
    #[serde(default)]
    pub tokens: Vec<Token>,
    pub action: String,
    #[serde(default)]
    pub args: Args,
    pub context: ContextId,
    /// Filled in from the transport, not part of the body.
    #[serde(skip)]
    pub caller_cell_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    AddRule,
    RemoveRule,
    FlagSpam,
    SetConfig,
    SetTrust,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::AddRule => "add-rule",
            CommandKind::RemoveRule => "remove-rule",
            CommandKind::FlagSpam => "flag-spam",
            CommandKind::SetConfig => "set-config",
            CommandKind::SetTrust => "set-trust",
        }
    }

    /// The policy action that authorizes this command.
    pub fn action(self) -> String {
        format!("mgmt:{}", self.as_str())
    }
}

/// A request to the management interface. `payload` depends on `command`:
/// a rule object, a rule id, a blocklist entry, `{"key","value"}`, or a list
/// of capabilities required for trust in `context`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagementCommand {
    #[serde(default)]
    pub tokens: Vec<Token>,
    pub command: CommandKind,
    #[serde(default)]
    pub payload: Value,
    pub context: ContextId,
}

pub(crate) enum Command {
    AddRule(PolicyRule),
    RemoveRule(String),
    FlagSpam(String),
    SetConfig { key: String, value: String },
    SetTrust(BTreeSet<String>),
}

impl ManagementCommand {
    pub(crate) fn parse(&self) -> Result<Command, String> {
        let string = |v: &Value| v.as_str().filter(|s| !s.is_empty()).map(str::to_string);
        match self.command {
            CommandKind::AddRule => serde_json::from_value::<PolicyRule>(self.payload.clone())
                .map_err(|e| e.to_string())
                .and_then(|r| r.validate().map(|_| r).map_err(|e| e.to_string()))
                .map(Command::AddRule),
            CommandKind::RemoveRule => string(&self.payload)
                .map(Command::RemoveRule)
                .ok_or_else(|| "payload must be a rule id".into()),
            CommandKind::FlagSpam => string(&self.payload)
                .map(Command::FlagSpam)
                .ok_or_else(|| "payload must be the entry to block".into()),
            CommandKind::SetConfig => {
                match (self.payload.get("key").and_then(string), self.payload.get("value")) {
                    (Some(key), Some(Value::String(value))) => Ok(Command::SetConfig {
                        key,
                        value: value.clone(),
                    }),
                    _ => Err("payload must be {\"key\",\"value\"} strings".into()),
                }
            }
            CommandKind::SetTrust => serde_json::from_value(self.payload.clone())
                .map(Command::SetTrust)
                .map_err(|_| "payload must be a list of capabilities".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub status: ResponseStatus,
    pub reason: String,
    #[serde(default)]
    pub result: Value,
}

impl Response {
    pub fn ok(result: Value) -> Self {
        Self {
            status: ResponseStatus::Ok,
            reason: "ok".into(),
            result,
        }
    }

    pub fn denied(reason: impl Into<String>) -> Self {
        Self {
            status: ResponseStatus::Denied,
            reason: reason.into(),
            result: Value::Null,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ResponseStatus::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    Op,
    Mgmt,
    UpdateIn,
    UpdateOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub tick: u64,
    pub kind: AuditKind,
    pub summary: String,
    pub decision: Option<Decision>,
    pub outcome: String,
}
