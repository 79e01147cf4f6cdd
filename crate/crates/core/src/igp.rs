//! Algorithm1: the intra-domain link-state engine.
//!
//! Neighbors come up through a three-state hello machine (DOWN, INIT, FULL).
//! On reaching FULL the whole database is handed to the neighbor in one
//! UPDATE_A, the router re-originates its own LSA and the SPF is marked dirty.
//! LSAs are flooded with sequence-number suppression and refreshed on a fixed
//! timer.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::router::{EngineOut, NextHop, Origin, RouterConfig, SendKind, TableAEntry, Timer};
use crate::types::{Prefix, RouterId, SimTime};
use crate::wire::{self, Hello, MessageBody, UpdateA};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IgpError {
    #[error("no eligible router on segment (all priorities are zero)")]
    NoEligible,
    #[error("{0} is not an intra-domain link neighbor")]
    NotIntraLink(RouterId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lsa {
    pub origin: RouterId,
    pub seq: u32,
    pub links: Vec<(RouterId, u32)>,
    pub prefixes: Vec<Prefix>,
    pub is_asbr: bool,
    pub is_stub: bool,
    pub age_at: SimTime,
}

impl Lsa {
    /// Equal apart from sequence number and origination time.
    pub fn same_content(&self, other: &Lsa) -> bool {
        self.origin == other.origin
            && self.links == other.links
            && self.prefixes == other.prefixes
            && self.is_asbr == other.is_asbr
            && self.is_stub == other.is_stub
    }

    pub fn lists(&self, neighbor: RouterId) -> bool {
        self.links.iter().any(|(n, _)| *n == neighbor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsaInstall {
    Installed { content_changed: bool },
    Stale,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lsdb {
    entries: BTreeMap<RouterId, Lsa>,
}

impl Lsdb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps only the highest sequence number per origin.
    pub fn install(&mut self, lsa: Lsa) -> LsaInstall {
        match self.entries.get(&lsa.origin) {
            Some(old) if old.seq >= lsa.seq => LsaInstall::Stale,
            old => {
                let content_changed = old.is_none_or(|o| !o.same_content(&lsa));
                self.entries.insert(lsa.origin, lsa);
                LsaInstall::Installed { content_changed }
            }
        }
    }

    pub fn get(&self, origin: RouterId) -> Option<&Lsa> {
        self.entries.get(&origin)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Lsa> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concatenated wire encoding of every LSA in origin order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.entries
            .values()
            .flat_map(|l| wire::encode_lsa(l).expect("LSA lists fit the wire format"))
            .collect()
    }

    /// Adjacency list keeping only links advertised by both endpoints. The
    /// cost of `a -> b` is the one `a` advertises.
    pub fn symmetric_graph(&self) -> BTreeMap<RouterId, Vec<(RouterId, u32)>> {
        self.entries
            .values()
            .map(|lsa| {
                let edges = lsa
                    .links
                    .iter()
                    .filter(|(n, _)| self.entries.get(n).is_some_and(|o| o.lists(lsa.origin)))
                    .copied()
                    .collect();
                (lsa.origin, edges)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AdjState {
    Down,
    Init,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborState {
    pub neighbor_id: RouterId,
    pub state: AdjState,
    pub last_hello_at: SimTime,
    pub priority: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentElection {
    pub dr: RouterId,
    pub bdr: Option<RouterId>,
}

/// Highest priority wins, ties by highest router id; priority 0 never wins.
pub fn elect_dr_bdr(members: &[(RouterId, u8)]) -> Result<SegmentElection, IgpError> {
    let mut eligible: Vec<_> = members.iter().filter(|(_, p)| *p > 0).copied().collect();
    eligible.sort_by_key(|&(id, p)| Reverse((p, id)));
    eligible.dedup_by_key(|(id, _)| *id);
    let dr = eligible.first().ok_or(IgpError::NoEligible)?.0;
    Ok(SegmentElection {
        dr,
        bdr: eligible.get(1).map(|(id, _)| *id),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathInfo {
    pub cost: u64,
    pub next_hop: NextHop,
}

/// Dijkstra over the symmetric link graph. Among equal-cost paths the one
/// with the lowest first-hop router id wins.
pub fn shortest_paths(lsdb: &Lsdb, self_id: RouterId) -> BTreeMap<RouterId, PathInfo> {
    let graph = lsdb.symmetric_graph();
    let mut best: BTreeMap<RouterId, PathInfo> = BTreeMap::new();
    let mut done: BTreeMap<RouterId, ()> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(
        self_id,
        PathInfo {
            cost: 0,
            next_hop: NextHop::SelfNode,
        },
    );
    heap.push(Reverse((0u64, self_id)));

    while let Some(Reverse((d, u))) = heap.pop() {
        if done.insert(u, ()).is_some() {
            continue;
        }
        let via = best[&u].next_hop;
        for &(v, c) in graph.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if done.contains_key(&v) {
                continue;
            }
            let cost = d + u64::from(c);
            let next_hop = if u == self_id { NextHop::Router(v) } else { via };
            let cand = PathInfo { cost, next_hop };
            match best.get(&v) {
                Some(cur) if (cur.cost, cur.next_hop) <= (cost, next_hop) => {}
                _ => {
                    best.insert(v, cand);
                    heap.push(Reverse((cost, v)));
                }
            }
        }
    }
    best
}

/// Table A intra entries from a shortest-path run. Own prefixes come from
/// `cfg` so a router with an empty database still routes to itself.
pub fn spf_entries(
    lsdb: &Lsdb,
    paths: &BTreeMap<RouterId, PathInfo>,
    cfg: &RouterConfig,
) -> Vec<TableAEntry> {
    let mut chosen: BTreeMap<Prefix, (u64, NextHop, RouterId)> = BTreeMap::new();
    let mut offer = |prefix: Prefix, cand: (u64, NextHop, RouterId)| {
        if prefix.is_default() {
            return;
        }
        chosen
            .entry(prefix)
            .and_modify(|cur| {
                if cand < *cur {
                    *cur = cand;
                }
            })
            .or_insert(cand);
    };
    for p in &cfg.prefixes {
        offer(*p, (0, NextHop::SelfNode, cfg.router_id));
    }
    for lsa in lsdb.iter().filter(|l| l.origin != cfg.router_id) {
        if let Some(path) = paths.get(&lsa.origin) {
            for p in &lsa.prefixes {
                offer(*p, (path.cost, path.next_hop, lsa.origin));
            }
        }
    }
    chosen
        .into_iter()
        .map(|(prefix, (cost, next_hop, _))| TableAEntry {
            prefix,
            next_hop,
            cost,
            origin: Origin::Intra,
            via_asbr: None,
        })
        .collect()
}

pub fn run_spf(lsdb: &Lsdb, self_id: RouterId, cfg: &RouterConfig) -> Vec<TableAEntry> {
    spf_entries(lsdb, &shortest_paths(lsdb, self_id), cfg)
}

/// Default route toward the nearest reachable ASBR (ties by lower id).
/// Callers skip this when the router is itself an ASBR.
pub fn derive_default_routes(
    lsdb: &Lsdb,
    self_id: RouterId,
    paths: &BTreeMap<RouterId, PathInfo>,
) -> Option<TableAEntry> {
    lsdb.iter()
        .filter(|l| l.is_asbr && l.origin != self_id)
        .filter_map(|l| paths.get(&l.origin).map(|p| (p.cost, l.origin, p.next_hop)))
        .min_by_key(|&(cost, id, _)| (cost, id))
        .map(|(cost, asbr, next_hop)| TableAEntry {
            prefix: Prefix::DEFAULT,
            next_hop,
            cost,
            origin: Origin::AsbrDefault,
            via_asbr: Some(asbr),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntraLink {
    pub neighbor: RouterId,
    pub cost: u32,
    pub segment: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IgpStats {
    pub stale_lsas: u64,
    pub refresh_floods: u64,
    pub originations: u64,
}

#[derive(Debug, Clone)]
pub struct IgpEngine {
    id: RouterId,
    priority: u8,
    stub: bool,
    prefixes: Vec<Prefix>,
    hello_ms: u64,
    dead_ms: u64,
    refresh_ms: u64,
    links: BTreeMap<RouterId, IntraLink>,
    neighbors: BTreeMap<RouterId, NeighborState>,
    lsdb: Lsdb,
    seq: u32,
    is_asbr: bool,
    segments: BTreeMap<u32, Option<SegmentElection>>,
    dirty: bool,
    state_changes: u64,
    stats: IgpStats,
}

impl IgpEngine {
    pub fn new(cfg: &RouterConfig, links: impl IntoIterator<Item = IntraLink>) -> Self {
        IgpEngine {
            id: cfg.router_id,
            priority: cfg.priority,
            stub: cfg.stub,
            prefixes: cfg.prefixes.clone(),
            hello_ms: u64::from(cfg.hello_interval_s) * 1000,
            dead_ms: u64::from(cfg.dead_interval_s) * 1000,
            refresh_ms: u64::from(cfg.refresh_interval_s) * 1000,
            links: links.into_iter().map(|l| (l.neighbor, l)).collect(),
            neighbors: BTreeMap::new(),
            lsdb: Lsdb::new(),
            seq: 0,
            is_asbr: false,
            segments: BTreeMap::new(),
            dirty: true,
            state_changes: 0,
            stats: IgpStats::default(),
        }
    }

    pub fn start(&mut self, now: SimTime, out: &mut Vec<EngineOut>) {
        self.originate(now, None, SendKind::Triggered, out);
        if !self.links.is_empty() {
            out.push(EngineOut::Timer {
                at: now,
                timer: Timer::Hello,
            });
            out.push(EngineOut::Timer {
                at: now + self.refresh_ms,
                timer: Timer::Refresh,
            });
        }
    }

    pub fn lsdb(&self) -> &Lsdb {
        &self.lsdb
    }

    pub fn seq(&self) -> u32 {
        self.seq
    }

    pub fn is_asbr(&self) -> bool {
        self.is_asbr
    }

    pub fn stats(&self) -> &IgpStats {
        &self.stats
    }

    pub fn links(&self) -> impl Iterator<Item = &IntraLink> {
        self.links.values()
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &NeighborState> {
        self.neighbors.values()
    }

    pub fn neighbor_state(&self, id: RouterId) -> AdjState {
        self.neighbors.get(&id).map_or(AdjState::Down, |n| n.state)
    }

    pub fn full_neighbors(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.neighbors
            .values()
            .filter(|n| n.state == AdjState::Full)
            .map(|n| n.neighbor_id)
    }

    /// DR/BDR per multi-access segment; `None` when nobody is eligible.
    pub fn segment_election(&self, segment: u32) -> Option<Option<SegmentElection>> {
        self.segments.get(&segment).copied()
    }

    pub fn segments(&self) -> &BTreeMap<u32, Option<SegmentElection>> {
        &self.segments
    }

    /// Count of adjacency state transitions so far.
    pub fn state_changes(&self) -> u64 {
        self.state_changes
    }

    pub fn take_dirty(&mut self) -> bool {
        std::mem::take(&mut self.dirty)
    }

    pub fn on_hello(
        &mut self,
        from: RouterId,
        hello: &Hello,
        now: SimTime,
        out: &mut Vec<EngineOut>,
    ) -> Result<(), IgpError> {
        if !self.links.contains_key(&from) {
            return Err(IgpError::NotIntraLink(from));
        }
        let sees_self = hello.seen_neighbors.contains(&self.id);
        let n = self.neighbors.entry(from).or_insert(NeighborState {
            neighbor_id: from,
            state: AdjState::Down,
            last_hello_at: now,
            priority: hello.priority,
        });
        n.last_hello_at = now;
        n.priority = hello.priority;
        let before = n.state;
        let after = match (before, sees_self) {
            (_, true) => AdjState::Full,
            (AdjState::Down, false) => AdjState::Init,
            (_, false) => AdjState::Init,
        };
        n.state = after;
        out.push(EngineOut::Timer {
            at: now + self.dead_ms,
            timer: Timer::Dead(from),
        });

        if before == after {
            return Ok(());
        }
        self.state_changes += 1;
        self.send_hello(from, SendKind::Triggered, out);
        if after == AdjState::Full {
            self.originate(now, Some(from), SendKind::Triggered, out);
            out.push(EngineOut::Send {
                to: from,
                body: MessageBody::UpdateA(UpdateA {
                    lsas: self.lsdb.iter().cloned().collect(),
                }),
                kind: SendKind::Sync,
            });
        } else if before == AdjState::Full {
            // neighbor stopped listing us
            self.originate(now, None, SendKind::Triggered, out);
        }
        self.update_elections();
        Ok(())
    }

    pub fn on_update(
        &mut self,
        from: RouterId,
        update: &UpdateA,
        now: SimTime,
        out: &mut Vec<EngineOut>,
    ) -> Result<(), IgpError> {
        if !self.links.contains_key(&from) {
            return Err(IgpError::NotIntraLink(from));
        }
        let mut batch: Vec<Lsa> = Vec::new();
        let mut periodic = true;
        for lsa in &update.lsas {
            if lsa.origin == self.id {
                // someone holds a newer copy of our own LSA; jump past it
                if lsa.seq >= self.seq {
                    self.seq = lsa.seq;
                    self.originate(now, None, SendKind::Triggered, out);
                }
                continue;
            }
            match self.lsdb.install(lsa.clone()) {
                LsaInstall::Stale => self.stats.stale_lsas += 1,
                LsaInstall::Installed { content_changed } => {
                    if content_changed {
                        self.dirty = true;
                        periodic = false;
                    }
                    batch.push(lsa.clone());
                }
            }
        }
        if !batch.is_empty() {
            let kind = if periodic {
                SendKind::Periodic
            } else {
                SendKind::Triggered
            };
            self.flood(&batch, Some(from), kind, out);
        }
        Ok(())
    }

    pub fn on_timer(&mut self, timer: Timer, now: SimTime, out: &mut Vec<EngineOut>) {
        match timer {
            Timer::Hello => {
                let targets: Vec<_> = self.links.keys().copied().collect();
                for to in targets {
                    self.send_hello(to, SendKind::Periodic, out);
                }
                out.push(EngineOut::Timer {
                    at: now + self.hello_ms,
                    timer: Timer::Hello,
                });
            }
            Timer::Dead(id) => {
                let expired = self
                    .neighbors
                    .get(&id)
                    .is_some_and(|n| now.0 >= n.last_hello_at.0 + self.dead_ms);
                if expired {
                    let was = self.neighbors.remove(&id).map(|n| n.state);
                    self.state_changes += 1;
                    if was == Some(AdjState::Full) {
                        self.originate(now, None, SendKind::Triggered, out);
                    }
                    self.update_elections();
                }
            }
            Timer::Refresh => {
                self.stats.refresh_floods += 1;
                self.originate(now, None, SendKind::Periodic, out);
                out.push(EngineOut::Timer {
                    at: now + self.refresh_ms,
                    timer: Timer::Refresh,
                });
            }
            Timer::Keepalive | Timer::Hold(_) => {}
        }
    }

    /// The link to `neighbor` came (back) up: say hello right away.
    pub fn on_link_up(&mut self, neighbor: RouterId, out: &mut Vec<EngineOut>) {
        if self.links.contains_key(&neighbor) {
            self.send_hello(neighbor, SendKind::Triggered, out);
        }
    }

    pub fn set_asbr(&mut self, is_asbr: bool, now: SimTime, out: &mut Vec<EngineOut>) {
        if self.is_asbr != is_asbr {
            self.is_asbr = is_asbr;
            self.originate(now, None, SendKind::Triggered, out);
        }
    }

    /// Re-issues the own LSA with the next sequence number and floods it to
    /// every FULL neighbor except `except`.
    pub fn originate(
        &mut self,
        now: SimTime,
        except: Option<RouterId>,
        kind: SendKind,
        out: &mut Vec<EngineOut>,
    ) {
        self.seq += 1;
        self.stats.originations += 1;
        let links = self
            .full_neighbors()
            .map(|n| (n, self.links[&n].cost))
            .collect();
        let lsa = Lsa {
            origin: self.id,
            seq: self.seq,
            links,
            prefixes: self.prefixes.clone(),
            is_asbr: self.is_asbr,
            is_stub: self.stub,
            age_at: now,
        };
        if let LsaInstall::Installed {
            content_changed: true,
        } = self.lsdb.install(lsa.clone())
        {
            self.dirty = true;
        }
        self.flood(&[lsa], except, kind, out);
    }

    fn flood(&self, lsas: &[Lsa], except: Option<RouterId>, kind: SendKind, out: &mut Vec<EngineOut>) {
        for to in self.full_neighbors().filter(|n| Some(*n) != except) {
            out.push(EngineOut::Send {
                to,
                body: MessageBody::UpdateA(UpdateA {
                    lsas: lsas.to_vec(),
                }),
                kind,
            });
        }
    }

    fn send_hello(&self, to: RouterId, kind: SendKind, out: &mut Vec<EngineOut>) {
        out.push(EngineOut::Send {
            to,
            body: MessageBody::Hello(Hello {
                priority: self.priority,
                seen_neighbors: self.neighbors.keys().copied().collect(),
            }),
            kind,
        });
    }

    fn update_elections(&mut self) {
        let mut attached: BTreeMap<u32, Vec<RouterId>> = BTreeMap::new();
        for l in self.links.values() {
            if let Some(seg) = l.segment {
                attached.entry(seg).or_default().push(l.neighbor);
            }
        }
        for (seg, nbrs) in attached {
            if nbrs.len() + 1 < 3 {
                continue;
            }
            let mut members = vec![(self.id, self.priority)];
            members.extend(
                nbrs.iter()
                    .filter_map(|n| self.neighbors.get(n))
                    .filter(|n| n.state == AdjState::Full)
                    .map(|n| (n.neighbor_id, n.priority)),
            );
            self.segments.insert(seg, elect_dr_bdr(&members).ok());
        }
    }
}
