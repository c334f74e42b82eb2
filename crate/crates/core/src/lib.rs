//! Statistically validated interaction networks and ego-network layer analysis.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm of the
//! pipeline: network construction from event streams, hypergeometric link
//! validation, heavy-tailed distribution fitting, per-ego layer detection and
//! the single-parameter layer model. IO, parsing and parallel drivers live in
//! the `egolayers` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod distfit;
pub mod error;
pub mod events;
pub mod layers;
pub mod network;
pub mod optimize;
pub mod special;
pub mod synth;
pub mod tamarit;
pub mod validate;

pub use error::{Error, Result};
pub use events::{apply_blocklist, Blocklist, CallEvent, OrderEvent, Participants, Side};
pub use network::{DirectedEdgeStats, EdgeRule, NodeId, WeightedNetwork};
