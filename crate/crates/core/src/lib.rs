//! Federated self-managed security cells.
//!
//! Each [`cell::Cell`] secures one managed resource. It owns an in-process
//! message [`bus`], an attribute-based [`policy`] engine with tokens and
//! delegation, a [`governance`] layer that vets and applies security updates,
//! a [`catalogue`] of partner cells and a [`discovery`] service. Cells talk to
//! each other only through the deterministic discrete-event network in
//! [`sim`], which also runs declarative scenarios and checks assertions
//! against them. The curated scenario corpus lives in [`scenarios`].
//!
//! The runnable programs under `examples/` walk through each capability:
//!
//! ```bash
//! cargo run -p smsc --example bus_pubsub
//! cargo run -p smsc --example policy_decision
//! cargo run -p smsc --example conflict_detection
//! cargo run -p smsc --example governed_updates
//! cargo run -p smsc --example catalogue_discovery
//! cargo run -p smsc --example cell_enforcement
//! cargo run -p smsc --example spamfilter_reuse
//! cargo run -p smsc --example lossy_convergence
//! ```

pub mod bus;
pub mod catalogue;
pub mod cell;
mod digest;
pub mod discovery;
pub mod governance;
pub mod policy;
pub mod scenarios;
pub mod sim;

pub use digest::keyed_digest;
