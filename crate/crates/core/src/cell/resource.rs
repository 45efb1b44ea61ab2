use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::policy::{AttributePair, ContextId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceDescriptor {
    pub kind: String,
    pub operations: BTreeSet<String>,
}

/// Cell state a resource may consult while serving a request.
#[derive(Debug, Clone)]
pub struct ResourceView<'a> {
    pub context: &'a ContextId,
    pub blocklist: BTreeSet<&'a str>,
}

pub type Args = BTreeMap<String, String>;

/// The resource a cell protects.
///
/// `invoke` is only ever called for actions listed by `describe` and only
/// after the decision point permitted the request.
pub trait ManagedResource {
    fn describe(&self) -> ResourceDescriptor;

    /// Attributes the resource contributes to the decision request, e.g. whether
    /// the caller named in `args` is blocklisted.
    fn request_attributes(&self, _action: &str, _args: &Args, _view: &ResourceView<'_>) -> BTreeSet<AttributePair> {
        BTreeSet::new()
    }

    fn invoke(&mut self, action: &str, args: &Args, view: &ResourceView<'_>) -> Value;

    fn apply_config(&mut self, key: &str, value: &str) -> String;
}

fn blocklisted_attr(args: &Args, view: &ResourceView<'_>) -> BTreeSet<AttributePair> {
    let listed = args
        .get("from")
        .is_some_and(|from| view.blocklist.contains(from.as_str()));
    let value = if listed { "true" } else { "false" };
    [AttributePair::new("blocklisted", value).expect("static token")].into()
}

/// Mailbox filter: `deliver` accepts a message, `flag` marks one as spam.
#[derive(Debug, Default)]
pub struct EmailFilter {
    delivered: u64,
    flagged: Vec<String>,
    config: BTreeMap<String, String>,
}

impl ManagedResource for EmailFilter {
    fn describe(&self) -> ResourceDescriptor {
        ResourceDescriptor {
            kind: "email-filter".into(),
            operations: ["deliver", "flag"].map(String::from).into(),
        }
    }

    fn request_attributes(&self, _: &str, args: &Args, view: &ResourceView<'_>) -> BTreeSet<AttributePair> {
        blocklisted_attr(args, view)
    }

    fn invoke(&mut self, action: &str, args: &Args, _: &ResourceView<'_>) -> Value {
        let from = args.get("from").cloned().unwrap_or_default();
        match action {
            "deliver" => {
                self.delivered += 1;
                json!({ "delivered": true, "from": from, "count": self.delivered })
            }
            _ => {
                self.flagged.push(from.clone());
                json!({ "flagged": from })
            }
        }
    }

    fn apply_config(&mut self, key: &str, value: &str) -> String {
        self.config.insert(key.to_string(), value.to_string());
        format!("email-filter: {key}={value}")
    }
}

/// Phone-side filter for incoming calls (`ring`) and texts (`text`).
#[derive(Debug, Default)]
pub struct CallFilter {
    rung: u64,
    texts: u64,
    config: BTreeMap<String, String>,
}

impl ManagedResource for CallFilter {
    fn describe(&self) -> ResourceDescriptor {
        ResourceDescriptor {
            kind: "call-filter".into(),
            operations: ["ring", "text"].map(String::from).into(),
        }
    }

    fn request_attributes(&self, _: &str, args: &Args, view: &ResourceView<'_>) -> BTreeSet<AttributePair> {
        blocklisted_attr(args, view)
    }

    fn invoke(&mut self, action: &str, args: &Args, _: &ResourceView<'_>) -> Value {
        let from = args.get("from").cloned().unwrap_or_default();
        if action == "ring" {
            self.rung += 1;
            json!({ "rang": true, "from": from, "count": self.rung })
        } else {
            self.texts += 1;
            json!({ "texted": true, "from": from, "count": self.texts })
        }
    }

    fn apply_config(&mut self, key: &str, value: &str) -> String {
        self.config.insert(key.to_string(), value.to_string());
        format!("call-filter: {key}={value}")
    }
}

/// A resource with no operations, for cells that only relay or serve lookups.
#[derive(Debug, Default)]
pub struct NullResource;

impl ManagedResource for NullResource {
    fn describe(&self) -> ResourceDescriptor {
        ResourceDescriptor {
            kind: "none".into(),
            operations: BTreeSet::new(),
        }
    }

    fn invoke(&mut self, _: &str, _: &Args, _: &ResourceView<'_>) -> Value {
        Value::Null
    }

    fn apply_config(&mut self, key: &str, value: &str) -> String {
        format!("none: {key}={value}")
    }
}

/// The shipped reference resources, by kind.
pub fn reference_resource(kind: &str) -> Option<Box<dyn ManagedResource>> {
    match kind {
        "email-filter" => Some(Box::new(EmailFilter::default())),
        "call-filter" => Some(Box::new(CallFilter::default())),
        "none" => Some(Box::new(NullResource)),
        _ => None,
    }
}
