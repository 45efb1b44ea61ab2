use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::spec::{PartitionSpec, TopologySpec};
use crate::cell::MessageKind;

pub const ENVELOPE_VERSION: u32 = 1;

/// SplitMix64 (Steele, Lea, Flood 2014).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Sub-seed for the link's stream: `seed ^ fnv1a64("lo|hi")`.
pub fn link_seed(seed: u64, a: &str, b: &str) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    seed ^ fnv1a64(format!("{lo}|{hi}").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimEnvelope {
    pub v: u32,
    pub kind: MessageKind,
    pub src: String,
    pub dst: String,
    pub sent_tick: u64,
    pub deliver_tick: u64,
    pub net_seq: u64,
    pub body: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Loss,
    Partition,
    NoLink,
}

#[derive(Debug, Clone)]
struct Link {
    latency: u64,
    drop: f64,
    rng: SplitMix64,
}

type LinkKey = (String, String);

fn key(a: &str, b: &str) -> LinkKey {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Links, faults and in-flight envelopes.
#[derive(Debug, Clone)]
pub struct Network {
    links: BTreeMap<LinkKey, Link>,
    partitions: Vec<PartitionSpec>,
    staged_drops: Vec<(LinkKey, f64)>,
    in_flight: BTreeMap<u64, SimEnvelope>,
    next_seq: u64,
}

impl Network {
    pub fn new(topology: &TopologySpec, seed: u64) -> Self {
        let links = topology
            .links
            .iter()
            .map(|l| {
                let link = Link {
                    latency: l.latency,
                    drop: l.drop,
                    rng: SplitMix64::new(link_seed(seed, &l.a, &l.b)),
                };
                (key(&l.a, &l.b), link)
            })
            .collect();
        Self {
            links,
            partitions: topology.partitions.clone(),
            staged_drops: Vec::new(),
            in_flight: BTreeMap::new(),
            next_seq: 0,
        }
    }

    /// Linked neighbours of `cell`, in id order.
    pub fn neighbours(&self, cell: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .links
            .keys()
            .filter_map(|(a, b)| {
                if a == cell {
                    Some(b.clone())
                } else if b == cell {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Queues a unicast. Returns the envelope, or the drop reason if unlinked.
    pub fn send(
        &mut self,
        kind: MessageKind,
        src: &str,
        dst: &str,
        body: Value,
        now: u64,
    ) -> Result<SimEnvelope, (SimEnvelope, DropReason)> {
        let latency = self.links.get(&key(src, dst)).map(|l| l.latency);
        let net_seq = self.next_seq;
        self.next_seq += 1;
        let env = SimEnvelope {
            v: ENVELOPE_VERSION,
            kind,
            src: src.to_string(),
            dst: dst.to_string(),
            sent_tick: now,
            deliver_tick: now + latency.unwrap_or(0),
            net_seq,
            body,
        };
        match latency {
            Some(_) => {
                self.in_flight.insert(net_seq, env.clone());
                Ok(env)
            }
            None => Err((env, DropReason::NoLink)),
        }
    }

    /// Applies `drop` to the link from the next tick on.
    pub fn stage_drop(&mut self, a: &str, b: &str, drop: f64) {
        self.staged_drops.push((key(a, b), drop));
    }

    pub fn add_partition(&mut self, p: PartitionSpec) {
        self.partitions.push(p);
    }

    /// Ends every open partition between exactly these sides at `to`.
    pub fn heal(&mut self, a: &std::collections::BTreeSet<String>, b: &std::collections::BTreeSet<String>, to: u64) -> usize {
        let mut healed = 0;
        for p in &mut self.partitions {
            let same = (p.a == *a && p.b == *b) || (p.a == *b && p.b == *a);
            if same && p.to > to {
                p.to = to.max(p.from);
                healed += 1;
            }
        }
        healed
    }

    pub fn begin_tick(&mut self) {
        for (k, drop) in self.staged_drops.drain(..) {
            if let Some(link) = self.links.get_mut(&k) {
                link.drop = drop;
            }
        }
    }

    /// Removes envelopes due at `tick`, split into delivered (by dst, netSeq)
    /// and dropped (by netSeq). Each due envelope draws once from its link.
    pub fn take_due(&mut self, tick: u64) -> (Vec<SimEnvelope>, Vec<(SimEnvelope, DropReason)>) {
        let due: Vec<u64> = self
            .in_flight
            .values()
            .filter(|e| e.deliver_tick == tick)
            .map(|e| e.net_seq)
            .collect();
        let mut delivered = Vec::new();
        let mut dropped = Vec::new();
        for seq in due {
            let env = self.in_flight.remove(&seq).expect("listed above");
            let link = self.links.get_mut(&key(&env.src, &env.dst)).expect("sent over a link");
            let lost = link.rng.next_f64() < link.drop;
            let cut = self
                .partitions
                .iter()
                .any(|p| p.separates(&env.src, &env.dst) && (p.from..p.to).contains(&tick));
            if cut {
                dropped.push((env, DropReason::Partition));
            } else if lost {
                dropped.push((env, DropReason::Loss));
            } else {
                delivered.push(env);
            }
        }
        delivered.sort_by(|x, y| (&x.dst, x.net_seq).cmp(&(&y.dst, y.net_seq)));
        (delivered, dropped)
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &SimEnvelope> {
        self.in_flight.values()
    }

    pub fn sent(&self) -> u64 {
        self.next_seq
    }
}
