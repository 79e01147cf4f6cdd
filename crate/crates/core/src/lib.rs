//! BIGP: a dual-mode routing protocol that runs a link-state engine inside
//! a domain and a path-vector engine between domains, selected per packet
//! by two care bits in a shared header.

pub mod bgp;
pub mod igp;
pub mod node;
pub mod router;
pub mod sim;
pub mod types;
pub mod wire;

pub use node::{Attachment, BgpTimers, Output, Router};
pub use router::{
    classify_mode, dispatch, lookup, stamp_header, DropReason, ForwardingDecision, Mode,
    RouterConfig,
};
pub use types::{Prefix, RouterId, SimTime};
