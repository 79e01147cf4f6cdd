//! Mode classification, header stamping, the two routing tables and the
//! forwarding lookup shared by both engines.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::types::{Prefix, RouterId, SimTime};
use crate::wire::{BigpHeader, MessageBody, MsgType};

pub const DEFAULT_ASN_SPLIT: u32 = 32_768;
/// DATA packets are dropped once they have taken this many hops.
pub const HOP_LIMIT: u8 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("router id 0 is reserved")]
    ReservedRouterId,
    #[error("domain asn {asn} outside [1, {split})")]
    DomainAsn { asn: u32, split: u32 },
    #[error("dead interval {dead}s is shorter than twice the hello interval {hello}s")]
    DeadTooShort { hello: u32, dead: u32 },
    #[error("hello interval must be positive")]
    ZeroHello,
    #[error("refresh interval {0}s outside [30, 60]")]
    RefreshOutOfRange(u32),
    #[error("asn split {0} leaves no room for high-range numbers")]
    BadSplit(u32),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RouterError {
    #[error("asn 0 is reserved")]
    ReservedAsn,
    #[error("care bits do not match message type {0}")]
    ModeMismatch(MsgType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterConfig {
    pub router_id: RouterId,
    pub domain_asn: u32,
    pub asn_split: u32,
    pub prefixes: Vec<Prefix>,
    pub stub: bool,
    pub hello_interval_s: u32,
    pub dead_interval_s: u32,
    pub refresh_interval_s: u32,
    pub priority: u8,
}

impl RouterConfig {
    pub fn new(router_id: RouterId, domain_asn: u32) -> Self {
        RouterConfig {
            router_id,
            domain_asn,
            asn_split: DEFAULT_ASN_SPLIT,
            prefixes: Vec::new(),
            stub: false,
            hello_interval_s: 10,
            dead_interval_s: 40,
            refresh_interval_s: 30,
            priority: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.router_id.0 == 0 {
            return Err(ConfigError::ReservedRouterId);
        }
        if self.asn_split < 2 || self.asn_split > u32::MAX / 2 {
            return Err(ConfigError::BadSplit(self.asn_split));
        }
        if self.domain_asn == 0 || self.domain_asn >= self.asn_split {
            return Err(ConfigError::DomainAsn {
                asn: self.domain_asn,
                split: self.asn_split,
            });
        }
        if self.hello_interval_s == 0 {
            return Err(ConfigError::ZeroHello);
        }
        if u64::from(self.dead_interval_s) < 2 * u64::from(self.hello_interval_s) {
            return Err(ConfigError::DeadTooShort {
                hello: self.hello_interval_s,
                dead: self.dead_interval_s,
            });
        }
        if !(30..=60).contains(&self.refresh_interval_s) {
            return Err(ConfigError::RefreshOutOfRange(self.refresh_interval_s));
        }
        Ok(())
    }

    pub fn high_asn(&self) -> u32 {
        self.domain_asn + self.asn_split
    }

    pub fn originates(&self, addr: u32) -> bool {
        self.prefixes.iter().any(|p| p.contains(addr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Intra,
    Inter,
}

pub fn classify_mode(asn: u32, asn_split: u32) -> Result<Mode, RouterError> {
    match asn {
        0 => Err(RouterError::ReservedAsn),
        a if a < asn_split => Ok(Mode::Intra),
        _ => Ok(Mode::Inter),
    }
}

pub fn stamp_header(locality: Mode, cfg: &RouterConfig, msg_type: MsgType) -> BigpHeader {
    match locality {
        Mode::Intra => BigpHeader::new(true, false, cfg.domain_asn, msg_type, cfg.router_id),
        Mode::Inter => BigpHeader::new(false, true, cfg.high_asn(), msg_type, cfg.router_id),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Algorithm1,
    Algorithm2,
    Lookup,
}

pub fn dispatch(header: &BigpHeader, body: &MessageBody) -> Result<Engine, RouterError> {
    match (body.msg_type(), header.cbi, header.cbb) {
        (MsgType::Hello | MsgType::UpdateA, true, false) => Ok(Engine::Algorithm1),
        (MsgType::UpdateB, false, true) => Ok(Engine::Algorithm2),
        (MsgType::Data, _, _) => Ok(Engine::Lookup),
        (t, _, _) => Err(RouterError::ModeMismatch(t)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NextHop {
    SelfNode,
    Router(RouterId),
}

impl fmt::Display for NextHop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextHop::SelfNode => f.write_str("self"),
            NextHop::Router(r) => r.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Intra,
    AsbrDefault,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Intra => "INTRA",
            Origin::AsbrDefault => "ASBR_DEFAULT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableAEntry {
    pub prefix: Prefix,
    pub next_hop: NextHop,
    pub cost: u64,
    pub origin: Origin,
    pub via_asbr: Option<RouterId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableA {
    entries: BTreeMap<Prefix, TableAEntry>,
}

impl TableA {
    pub fn from_entries(entries: impl IntoIterator<Item = TableAEntry>) -> Self {
        TableA {
            entries: entries.into_iter().map(|e| (e.prefix, e)).collect(),
        }
    }

    pub fn get(&self, prefix: Prefix) -> Option<&TableAEntry> {
        self.entries.get(&prefix)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TableAEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn intra(&self) -> impl Iterator<Item = &TableAEntry> {
        self.entries.values().filter(|e| e.origin == Origin::Intra)
    }

    /// Longest INTRA prefix containing `addr`; the default route is never
    /// returned here.
    pub fn lpm_intra(&self, addr: u32) -> Option<&TableAEntry> {
        self.intra()
            .filter(|e| e.prefix.contains(addr))
            .max_by_key(|e| e.prefix.len())
    }

    pub fn default_route(&self) -> Option<&TableAEntry> {
        self.entries
            .values()
            .find(|e| e.origin == Origin::AsbrDefault)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableBEntry {
    pub prefix: Prefix,
    pub as_path: Vec<u32>,
    pub next_hop_peer: RouterId,
    pub local_pref: u32,
    pub learned_internal: bool,
    pub best: bool,
}

/// Every usable candidate per prefix, one per peer, with the installed best
/// flagged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableB {
    routes: BTreeMap<Prefix, Vec<TableBEntry>>,
}

impl TableB {
    pub fn replace(&mut self, prefix: Prefix, mut entries: Vec<TableBEntry>) {
        if entries.is_empty() {
            self.routes.remove(&prefix);
        } else {
            entries.sort_by_key(|e| e.next_hop_peer);
            self.routes.insert(prefix, entries);
        }
    }

    pub fn best(&self, prefix: Prefix) -> Option<&TableBEntry> {
        self.routes.get(&prefix)?.iter().find(|e| e.best)
    }

    pub fn candidates(&self, prefix: Prefix) -> &[TableBEntry] {
        self.routes.get(&prefix).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TableBEntry> {
        self.routes.values().flatten()
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.routes.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Installed best of the longest prefix containing `addr`.
    pub fn lpm(&self, addr: u32) -> Option<&TableBEntry> {
        self.routes
            .iter()
            .filter(|(p, _)| p.contains(addr))
            .max_by_key(|(p, _)| p.len())
            .and_then(|(_, v)| v.iter().find(|e| e.best))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    NoIntraRoute,
    NoInterRoute,
    TtlExceeded,
    LinkDown,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::NoIntraRoute => "NoIntraRoute",
            DropReason::NoInterRoute => "NoInterRoute",
            DropReason::TtlExceeded => "TtlExceeded",
            DropReason::LinkDown => "LinkDown",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardingDecision {
    Forward {
        next_hop: RouterId,
        header: BigpHeader,
    },
    DeliverLocal,
    Drop(DropReason),
}

/// Everything `lookup` reads. `live` maps a router to the adjacent router
/// a packet for it leaves through: FULL neighbors and established external
/// peers map to themselves, other reachable routers of the domain to the
/// first hop of their shortest path.
#[derive(Debug, Clone, Copy)]
pub struct Rib<'a> {
    pub table_a: &'a TableA,
    pub table_b: &'a TableB,
    pub live: &'a BTreeMap<RouterId, RouterId>,
}

pub fn lookup(header: &BigpHeader, dest_addr: u32, rib: Rib<'_>, cfg: &RouterConfig) -> ForwardingDecision {
    if cfg.originates(dest_addr) {
        return ForwardingDecision::DeliverLocal;
    }
    let via = |nh: NextHop, header: BigpHeader, reason: DropReason| match nh {
        NextHop::SelfNode => ForwardingDecision::DeliverLocal,
        NextHop::Router(r) if rib.live.get(&r) == Some(&r) => ForwardingDecision::Forward { next_hop: r, header },
        NextHop::Router(_) => ForwardingDecision::Drop(reason),
    };
    let intra = rib.table_a.lpm_intra(dest_addr);
    if header.cbi {
        return match intra {
            Some(e) => via(e.next_hop, *header, DropReason::NoIntraRoute),
            None => ForwardingDecision::Drop(DropReason::NoIntraRoute),
        };
    }
    if let Some(e) = intra {
        let restamped = stamp_header(Mode::Intra, cfg, header.msg_type);
        return via(e.next_hop, restamped, DropReason::NoIntraRoute);
    }
    if let Some(b) = rib.table_b.lpm(dest_addr) {
        return match rib.live.get(&b.next_hop_peer) {
            Some(&hop) => ForwardingDecision::Forward {
                next_hop: hop,
                header: *header,
            },
            None => ForwardingDecision::Drop(DropReason::NoInterRoute),
        };
    }
    match rib.table_a.default_route() {
        Some(d) => via(d.next_hop, *header, DropReason::NoInterRoute),
        None => ForwardingDecision::Drop(DropReason::NoInterRoute),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SendKind {
    /// Hellos and content-identical refresh floods.
    Periodic,
    Triggered,
    /// Database snapshot to a neighbor that just reached FULL.
    Sync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timer {
    Hello,
    Dead(RouterId),
    Refresh,
    Keepalive,
    Hold(RouterId),
}

/// Side effects requested by an engine.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineOut {
    Send {
        to: RouterId,
        body: MessageBody,
        kind: SendKind,
    },
    /// Session liveness probe; carried by the simulator, never encoded.
    Keepalive { to: RouterId },
    Timer { at: SimTime, timer: Timer },
}
