//! The shipped scenario corpus.
//!
//! Scenario files live in the crate's `scenarios/` directory. Each positive
//! scenario has a negative variant whose assertions expect the opposite
//! outcome, so every entry passes when the federation behaves correctly.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::cell::Intervals;
use crate::sim::{
    load_scenario, Action, AssertionSpec, CellSpec, Check, LinkSpec, ProfileSpec, ScenarioSpec,
    ScriptStep, SimError, SplitMix64, TopologySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub file: &'static str,
    pub rationale: &'static str,
    /// The narrative the scenario makes executable.
    pub story: &'static str,
}

impl CorpusEntry {
    pub fn path(&self) -> PathBuf {
        corpus_dir().join(self.file)
    }

    pub fn load(&self) -> Result<ScenarioSpec, SimError> {
        load_scenario(&self.path())
    }
}

const SPAM_STORY: &str = "a spam filter trained on an email box is reused by the same user to filter calls as well as texts";
const FLAG_STORY: &str = "the user adds an excluded domain by flagging an email as spam";
const CONTEXT_STORY: &str = "one phone sits in the user's domestic systems and in the company's, and the two contexts stay segregated";
const PUSH_STORY: &str = "cells push updates to and pull updates from known partners";
const REGISTRY_STORY: &str = "cells find partners through a resource registry";
const TTL_STORY: &str = "a partner that stops advertising drops out of the catalogue";

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        name: "spamfilter_reuse",
        file: "spamfilter_reuse.json",
        rationale: "a spam flag on the email cell blocks the sender's calls on the call cell",
        story: SPAM_STORY,
    },
    CorpusEntry {
        name: "spamfilter_reuse_no_registration",
        file: "spamfilter_reuse_no_registration.json",
        rationale: "without registration there is no trusted partner and nothing propagates",
        story: FLAG_STORY,
    },
    CorpusEntry {
        name: "spamfilter_reuse_disjoint_contexts",
        file: "spamfilter_reuse_disjoint_contexts.json",
        rationale: "cells in disjoint contexts never share updates",
        story: CONTEXT_STORY,
    },
    CorpusEntry {
        name: "corporate_and_personal",
        file: "corporate_and_personal.json",
        rationale: "a corporate rule changes corporate decisions only",
        story: CONTEXT_STORY,
    },
    CorpusEntry {
        name: "corporate_untrusted_push",
        file: "corporate_untrusted_push.json",
        rationale: "a push from a partner that fails the trust policy is refused",
        story: CONTEXT_STORY,
    },
    CorpusEntry {
        name: "partition_heal",
        file: "partition_heal.json",
        rationale: "anti-entropy repairs what a partition dropped",
        story: PUSH_STORY,
    },
    CorpusEntry {
        name: "partition_no_heal",
        file: "partition_no_heal.json",
        rationale: "an unhealed partition keeps the far side behind",
        story: PUSH_STORY,
    },
    CorpusEntry {
        name: "registry_discovery",
        file: "registry_discovery.json",
        rationale: "registry lookups connect cells that never advertised to each other",
        story: REGISTRY_STORY,
    },
    CorpusEntry {
        name: "registry_discovery_no_registry",
        file: "registry_discovery_no_registry.json",
        rationale: "a hub without the registry capability answers nothing",
        story: REGISTRY_STORY,
    },
    CorpusEntry {
        name: "ring_flood",
        file: "ring_flood.json",
        rationale: "push flooding reaches all eight ring cells",
        story: PUSH_STORY,
    },
    CorpusEntry {
        name: "ring_flood_split",
        file: "ring_flood_split.json",
        rationale: "a standing partition confines the flood to one half",
        story: PUSH_STORY,
    },
    CorpusEntry {
        name: "lossy_mesh",
        file: "lossy_mesh.json",
        rationale: "anti-entropy converges a lossy random mesh",
        story: PUSH_STORY,
    },
    CorpusEntry {
        name: "ttl_expiry",
        file: "ttl_expiry.json",
        rationale: "eviction happens on the first tick past the lifetime",
        story: TTL_STORY,
    },
    CorpusEntry {
        name: "ttl_expiry_refreshed",
        file: "ttl_expiry_refreshed.json",
        rationale: "advertisements keep an entry alive",
        story: TTL_STORY,
    },
];

pub fn corpus_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"))
}

pub fn entry(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

fn load(name: &str) -> Result<ScenarioSpec, SimError> {
    entry(name).expect("corpus entry exists").load()
}

pub fn scenario_spamfilter_reuse() -> Result<ScenarioSpec, SimError> {
    load("spamfilter_reuse")
}

pub fn scenario_corporate_and_personal() -> Result<ScenarioSpec, SimError> {
    load("corporate_and_personal")
}

/// Sixteen cells on a random connected graph with 30% loss.
///
/// A random spanning tree plus eight extra edges, drawn from `seed`. Four
/// origins emit two updates each early on; every cell must agree by tick 199.
pub fn lossy_mesh(seed: u64) -> ScenarioSpec {
    const N: usize = 16;
    let mut rng = SplitMix64::new(seed);
    let ids: Vec<String> = (0..N).map(|i| format!("m{i:02}")).collect();
    let mut edges = std::collections::BTreeSet::new();
    for i in 1..N {
        let j = (rng.next_u64() % i as u64) as usize;
        edges.insert((j, i));
    }
    while edges.len() < N - 1 + 8 {
        let a = (rng.next_u64() % N as u64) as usize;
        let b = (rng.next_u64() % N as u64) as usize;
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let cells = ids
        .iter()
        .enumerate()
        .map(|(i, id)| CellSpec {
            cell_id: id.clone(),
            profile: ProfileSpec {
                contexts: ["default".parse().expect("token")].into(),
                capabilities: ["peer".to_string()].into(),
                ttl_ticks: 1000,
            },
            policy: None,
            policy_file: None,
            resource_kind: "none".into(),
            intervals: Intervals { advertise: 0, anti_entropy: 5 },
            trust_policy: [("default".parse().expect("token"), ["peer".to_string()].into())].into(),
            peers: edges
                .iter()
                .filter_map(|&(a, b)| match (a == i, b == i) {
                    (true, _) => Some(ids[b].clone()),
                    (_, true) => Some(ids[a].clone()),
                    _ => None,
                })
                .collect(),
        })
        .collect();
    let links = edges
        .iter()
        .map(|&(a, b)| LinkSpec { a: ids[a].clone(), b: ids[b].clone(), latency: 1, drop: 0.3 })
        .collect();
    let mut script = Vec::new();
    for (k, origin) in [0, 5, 10, 15].into_iter().enumerate() {
        for round in 0..2u64 {
            script.push(ScriptStep {
                tick: 1 + k as u64 + 4 * round,
                action: Action::EmitUpdate {
                    cell: ids[origin].clone(),
                    kind: crate::governance::UpdateKind::BlocklistAdd,
                    payload: json!(format!("spam-{origin}-{round}")),
                    contexts: ["default".parse().expect("token")].into(),
                },
            });
        }
    }
    script.sort_by_key(|s| s.tick);
    ScenarioSpec {
        name: "lossy_mesh".into(),
        description: format!("Sixteen cells on a random connected graph (seed {seed}) with 30% loss converge through anti-entropy."),
        seed,
        max_ticks: 200,
        cells,
        topology: TopologySpec { links, partitions: Vec::new() },
        script,
        assertions: vec![AssertionSpec {
            id: "converged-before-200".into(),
            at_tick: Some(199),
            at_end: false,
            check: Check::Converged { cells: Vec::new() },
            expected: json!(true),
        }],
    }
}
