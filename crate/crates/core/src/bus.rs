//! In-cell publish/subscribe bus.
//!
//! Subscribers either receive envelopes synchronously through a handler
//! (`Immediate`) or have them appended to a per-subscriber queue that they
//! [`Bus::drain`] later (`Queued`). Every envelope gets the next bus sequence
//! number; handlers that publish do so through an [`Outbox`], and those
//! publications are delivered after the current delivery pass so the global
//! sequence order is also the delivery order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("malformed topic `{0}`")]
    MalformedTopic(String),
    #[error("malformed filter `{0}`")]
    MalformedFilter(String),
    #[error("tick {tick} is before the last publish at tick {last}")]
    ClockRegression { tick: u64, last: u64 },
    #[error("subscription ({0}) is already registered")]
    DuplicateSubscription(String),
    #[error("`{0}` has no queued subscription")]
    UnknownSubscriber(String),
}

/// Dot-separated topic name, each segment matching `[a-z0-9-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Topic(String);

impl Topic {
    pub fn new(name: impl Into<String>) -> Result<Self, BusError> {
        let name = name.into();
        if Self::well_formed(&name) {
            Ok(Self(name))
        } else {
            Err(BusError::MalformedTopic(name))
        }
    }

    fn well_formed(name: &str) -> bool {
        name.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .bytes()
                    .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'-'))
        })
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Topic {
    type Error = BusError;
    fn try_from(s: String) -> Result<Self, BusError> {
        Topic::new(s)
    }
}

impl From<Topic> for String {
    fn from(t: Topic) -> String {
        t.0
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Exact topic, or `prefix.*` matching every topic below `prefix`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TopicFilter {
    Exact(Topic),
    Prefix(Topic),
}

impl TopicFilter {
    pub fn parse(filter: &str) -> Result<Self, BusError> {
        let malformed = || BusError::MalformedFilter(filter.to_string());
        match filter.strip_suffix(".*") {
            Some(prefix) => Topic::new(prefix).map(Self::Prefix).map_err(|_| malformed()),
            None => Topic::new(filter).map(Self::Exact).map_err(|_| malformed()),
        }
    }

    pub fn matches(&self, topic: &Topic) -> bool {
        match self {
            TopicFilter::Exact(t) => t == topic,
            TopicFilter::Prefix(p) => topic
                .as_str()
                .strip_prefix(p.as_str())
                .is_some_and(|rest| rest.starts_with('.')),
        }
    }
}

impl fmt::Display for TopicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicFilter::Exact(t) => write!(f, "{t}"),
            TopicFilter::Prefix(p) => write!(f, "{p}.*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope {
    pub topic: Topic,
    pub payload: Value,
    pub publisher_id: String,
    pub tick: u64,
    pub bus_seq: u64,
}

/// Collects publications made from inside an immediate handler.
#[derive(Debug, Default)]
pub struct Outbox {
    pending: Vec<(Topic, Value)>,
}

impl Outbox {
    pub fn publish(&mut self, topic: &str, payload: Value) -> Result<(), BusError> {
        self.pending.push((Topic::new(topic)?, payload));
        Ok(())
    }
}

pub type Handler = Box<dyn FnMut(&Envelope, &mut Outbox)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Immediate,
    Queued,
}

pub struct Subscription {
    pub subscriber_id: String,
    pub filter: String,
    delivery: Delivery,
}

enum Delivery {
    Immediate(Handler),
    Queued,
}

impl Subscription {
    pub fn immediate(
        subscriber_id: impl Into<String>,
        filter: impl Into<String>,
        handler: impl FnMut(&Envelope, &mut Outbox) + 'static,
    ) -> Self {
        Self {
            subscriber_id: subscriber_id.into(),
            filter: filter.into(),
            delivery: Delivery::Immediate(Box::new(handler)),
        }
    }

    pub fn queued(subscriber_id: impl Into<String>, filter: impl Into<String>) -> Self {
        Self {
            subscriber_id: subscriber_id.into(),
            filter: filter.into(),
            delivery: Delivery::Queued,
        }
    }

    pub fn mode(&self) -> Mode {
        match self.delivery {
            Delivery::Immediate(_) => Mode::Immediate,
            Delivery::Queued => Mode::Queued,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionHandle(u64);

struct Registered {
    handle: SubscriptionHandle,
    subscriber_id: String,
    filter: TopicFilter,
    delivery: Delivery,
}

/// Result of one `publish` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishReceipt {
    pub bus_seq: u64,
    /// Immediate subscribers invoked, in subscriber id order.
    pub delivered: Vec<String>,
    /// Publications made by handlers during this call, in sequence order.
    pub cascaded: Vec<PublishReceipt>,
}

#[derive(Default)]
pub struct Bus {
    subs: Vec<Registered>,
    queues: BTreeMap<String, VecDeque<Envelope>>,
    next_seq: u64,
    next_handle: u64,
    last_tick: Option<u64>,
    journal: Vec<Envelope>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, sub: Subscription) -> Result<SubscriptionHandle, BusError> {
        let filter = TopicFilter::parse(&sub.filter)?;
        let mode = sub.mode();
        let duplicate = self.subs.iter().any(|r| {
            r.subscriber_id == sub.subscriber_id && r.filter == filter && r.mode() == mode
        });
        if duplicate {
            return Err(BusError::DuplicateSubscription(format!(
                "{}, {}, {:?}",
                sub.subscriber_id, filter, mode
            )));
        }
        let handle = SubscriptionHandle(self.next_handle);
        self.next_handle += 1;
        if mode == Mode::Queued {
            self.queues.entry(sub.subscriber_id.clone()).or_default();
        }
        self.subs.push(Registered {
            handle,
            subscriber_id: sub.subscriber_id,
            filter,
            delivery: sub.delivery,
        });
        Ok(handle)
    }

    /// Returns false if the handle was not registered.
    pub fn unsubscribe(&mut self, handle: SubscriptionHandle) -> bool {
        let Some(pos) = self.subs.iter().position(|r| r.handle == handle) else {
            return false;
        };
        let removed = self.subs.remove(pos);
        let still_queued = self
            .subs
            .iter()
            .any(|r| r.subscriber_id == removed.subscriber_id && r.mode() == Mode::Queued);
        if !still_queued {
            self.queues.remove(&removed.subscriber_id);
        }
        true
    }

    pub fn publish(
        &mut self,
        topic: &str,
        payload: Value,
        publisher_id: &str,
        tick: u64,
    ) -> Result<PublishReceipt, BusError> {
        let topic = Topic::new(topic)?;
        if let Some(last) = self.last_tick {
            if tick < last {
                return Err(BusError::ClockRegression { tick, last });
            }
        }
        self.last_tick = Some(tick);

        let mut agenda = VecDeque::new();
        agenda.push_back(self.stamp(topic, payload, publisher_id.to_string(), tick));
        let mut receipts = Vec::new();
        while let Some(env) = agenda.pop_front() {
            let (receipt, follow_ups) = self.deliver(&env);
            receipts.push(receipt);
            agenda.extend(follow_ups);
            self.journal.push(env);
        }
        let mut receipts = receipts.into_iter();
        let mut first = receipts.next().expect("agenda starts non-empty");
        first.cascaded = receipts.collect();
        Ok(first)
    }

    fn stamp(&mut self, topic: Topic, payload: Value, publisher_id: String, tick: u64) -> Envelope {
        let env = Envelope {
            topic,
            payload,
            publisher_id,
            tick,
            bus_seq: self.next_seq,
        };
        self.next_seq += 1;
        env
    }

    fn deliver(&mut self, env: &Envelope) -> (PublishReceipt, Vec<Envelope>) {
        let mut queued_for = BTreeSet::new();
        let mut immediate = Vec::new();
        for (i, r) in self.subs.iter().enumerate() {
            if !r.filter.matches(&env.topic) {
                continue;
            }
            match r.delivery {
                Delivery::Queued => {
                    queued_for.insert(r.subscriber_id.clone());
                }
                Delivery::Immediate(_) => immediate.push(i),
            }
        }
        for id in queued_for {
            self.queues.entry(id).or_default().push_back(env.clone());
        }

        immediate.sort_by(|&a, &b| {
            (&self.subs[a].subscriber_id, self.subs[a].handle)
                .cmp(&(&self.subs[b].subscriber_id, self.subs[b].handle))
        });
        let mut delivered = Vec::with_capacity(immediate.len());
        let mut follow_ups = Vec::new();
        for i in immediate {
            let mut outbox = Outbox::default();
            let r = &mut self.subs[i];
            if let Delivery::Immediate(handler) = &mut r.delivery {
                handler(env, &mut outbox);
            }
            let publisher = r.subscriber_id.clone();
            delivered.push(publisher.clone());
            for (topic, payload) in outbox.pending {
                follow_ups.push(self.stamp(topic, payload, publisher.clone(), env.tick));
            }
        }
        let receipt = PublishReceipt {
            bus_seq: env.bus_seq,
            delivered,
            cascaded: Vec::new(),
        };
        (receipt, follow_ups)
    }

    /// Removes and returns everything queued for `subscriber_id`, in sequence order.
    pub fn drain(&mut self, subscriber_id: &str) -> Result<Vec<Envelope>, BusError> {
        self.queues
            .get_mut(subscriber_id)
            .map(|q| q.drain(..).collect())
            .ok_or_else(|| BusError::UnknownSubscriber(subscriber_id.to_string()))
    }

    /// Envelopes published since the last call, in sequence order.
    pub fn take_journal(&mut self) -> Vec<Envelope> {
        std::mem::take(&mut self.journal)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }
}

impl Registered {
    fn mode(&self) -> Mode {
        match self.delivery {
            Delivery::Immediate(_) => Mode::Immediate,
            Delivery::Queued => Mode::Queued,
        }
    }
}
