//! Algorithm2: the inter-domain path-vector engine.
//!
//! Updates are triggered only. Each session keeps an Adj-RIB-Out so that
//! a router only ever sends the difference between what it last told a
//! peer and what its policy says now.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::router::{EngineOut, SendKind, TableB, TableBEntry, Timer};
use crate::types::{Prefix, RouterId, SimTime};
use crate::wire::{MessageBody, UpdateB};

pub const DEFAULT_LOCAL_PREF: u32 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BgpError {
    #[error("no established session with {0}")]
    SessionNotEstablished(RouterId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathCandidate {
    pub prefix: Prefix,
    /// High-range ASNs, most recent first.
    pub as_path: Vec<u32>,
    pub local_pref: u32,
    pub from_peer: RouterId,
    pub learned_internal: bool,
}

impl PathCandidate {
    fn has_duplicate_asn(&self) -> bool {
        let mut seen = BTreeSet::new();
        !self.as_path.iter().all(|a| seen.insert(*a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PeerKind {
    External,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Idle,
    Established,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerSession {
    pub peer_id: RouterId,
    pub peer_high_asn: u32,
    pub kind: PeerKind,
    pub state: SessionState,
    /// Last time anything was heard from the peer.
    pub keepalive_at: SimTime,
}

/// `Less` means `a` is preferred.
pub fn compare_paths(a: &PathCandidate, b: &PathCandidate) -> Ordering {
    b.local_pref
        .cmp(&a.local_pref)
        .then(a.as_path.len().cmp(&b.as_path.len()))
        .then(a.learned_internal.cmp(&b.learned_internal))
        .then(a.from_peer.cmp(&b.from_peer))
}

/// Takes the first candidate, then replaces it whenever a later one beats it.
pub fn best_path(candidates: &[PathCandidate]) -> Option<&PathCandidate> {
    let mut iter = candidates.iter();
    let mut best = iter.next()?;
    for c in iter {
        if compare_paths(c, best) == Ordering::Less {
            best = c;
        }
    }
    Some(best)
}

/// What (if anything) to tell `to_peer` about `route`. Routes with an
/// empty AS path are locally originated and only go to external peers.
pub fn advertise_policy(
    route: &PathCandidate,
    to_peer: &PeerSession,
    own_high_asn: u32,
) -> Option<PathCandidate> {
    if route.from_peer == to_peer.peer_id {
        return None;
    }
    match to_peer.kind {
        PeerKind::External => {
            let mut out = route.clone();
            out.as_path.insert(0, own_high_asn);
            Some(out)
        }
        PeerKind::Internal if route.learned_internal || route.as_path.is_empty() => None,
        PeerKind::Internal => Some(route.clone()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BgpStats {
    pub loop_rejected: u64,
    pub not_established: u64,
    pub own_prefix_ignored: u64,
    pub empty_path_rejected: u64,
}

#[derive(Debug, Clone)]
pub struct BgpEngine {
    id: RouterId,
    high_asn: u32,
    keepalive_ms: u64,
    hold_ms: u64,
    sessions: BTreeMap<RouterId, PeerSession>,
    candidates: BTreeMap<Prefix, BTreeMap<RouterId, PathCandidate>>,
    table: TableB,
    local_routes: BTreeSet<Prefix>,
    peer_lp: BTreeMap<RouterId, u32>,
    rib_out: BTreeMap<RouterId, BTreeMap<Prefix, PathCandidate>>,
    backlog: BTreeMap<RouterId, Vec<UpdateB>>,
    state_changes: u64,
    stats: BgpStats,
}

impl BgpEngine {
    pub fn new(id: RouterId, high_asn: u32, keepalive_s: u32, hold_s: u32) -> Self {
        BgpEngine {
            id,
            high_asn,
            keepalive_ms: u64::from(keepalive_s) * 1000,
            hold_ms: u64::from(hold_s) * 1000,
            sessions: BTreeMap::new(),
            candidates: BTreeMap::new(),
            table: TableB::default(),
            local_routes: BTreeSet::new(),
            peer_lp: BTreeMap::new(),
            rib_out: BTreeMap::new(),
            backlog: BTreeMap::new(),
            state_changes: 0,
            stats: BgpStats::default(),
        }
    }

    pub fn start(&mut self, now: SimTime, out: &mut Vec<EngineOut>) {
        out.push(EngineOut::Timer {
            at: now + self.keepalive_ms,
            timer: Timer::Keepalive,
        });
    }

    pub fn high_asn(&self) -> u32 {
        self.high_asn
    }

    pub fn table(&self) -> &TableB {
        &self.table
    }

    pub fn stats(&self) -> &BgpStats {
        &self.stats
    }

    pub fn state_changes(&self) -> u64 {
        self.state_changes
    }

    pub fn sessions(&self) -> impl Iterator<Item = &PeerSession> {
        self.sessions.values()
    }

    pub fn session(&self, peer: RouterId) -> Option<&PeerSession> {
        self.sessions.get(&peer)
    }

    pub fn is_established(&self, peer: RouterId) -> bool {
        self.sessions
            .get(&peer)
            .is_some_and(|s| s.state == SessionState::Established)
    }

    pub fn has_external_established(&self) -> bool {
        self.sessions
            .values()
            .any(|s| s.kind == PeerKind::External && s.state == SessionState::Established)
    }

    /// Marks the session ESTABLISHED. An already-established session is
    /// reset first so the peer gets a full resync.
    pub fn session_up(
        &mut self,
        peer: RouterId,
        kind: PeerKind,
        peer_high_asn: u32,
        now: SimTime,
        out: &mut Vec<EngineOut>,
    ) {
        if self.is_established(peer) {
            self.drop_peer_routes(peer);
        }
        self.sessions.insert(
            peer,
            PeerSession {
                peer_id: peer,
                peer_high_asn,
                kind,
                state: SessionState::Established,
                keepalive_at: now,
            },
        );
        self.state_changes += 1;
        self.rib_out.insert(peer, BTreeMap::new());
        if kind == PeerKind::External {
            out.push(EngineOut::Timer {
                at: now + self.hold_ms,
                timer: Timer::Hold(peer),
            });
        }
        for upd in self.backlog.remove(&peer).unwrap_or_default() {
            self.apply(peer, &upd);
        }
        self.sync_out(out);
    }

    pub fn session_down(&mut self, peer: RouterId, out: &mut Vec<EngineOut>) {
        let Some(s) = self.sessions.get_mut(&peer) else {
            return;
        };
        if s.state == SessionState::Idle {
            return;
        }
        s.state = SessionState::Idle;
        self.state_changes += 1;
        self.rib_out.remove(&peer);
        self.backlog.remove(&peer);
        self.drop_peer_routes(peer);
        self.sync_out(out);
    }

    /// Holds an update from a same-domain router whose session is not up yet.
    pub fn buffer(&mut self, from: RouterId, update: UpdateB) {
        self.backlog.entry(from).or_default().push(update);
    }

    pub fn on_update(
        &mut self,
        from: RouterId,
        update: &UpdateB,
        now: SimTime,
        out: &mut Vec<EngineOut>,
    ) -> Result<(), BgpError> {
        let Some(s) = self.sessions.get_mut(&from) else {
            self.stats.not_established += 1;
            return Err(BgpError::SessionNotEstablished(from));
        };
        if s.state != SessionState::Established {
            self.stats.not_established += 1;
            return Err(BgpError::SessionNotEstablished(from));
        }
        s.keepalive_at = now;
        if s.kind == PeerKind::External {
            out.push(EngineOut::Timer {
                at: now + self.hold_ms,
                timer: Timer::Hold(from),
            });
        }
        self.apply(from, update);
        self.sync_out(out);
        Ok(())
    }

    pub fn on_keepalive(&mut self, from: RouterId, now: SimTime, out: &mut Vec<EngineOut>) {
        if let Some(s) = self.sessions.get_mut(&from) {
            if s.state == SessionState::Established {
                s.keepalive_at = now;
                out.push(EngineOut::Timer {
                    at: now + self.hold_ms,
                    timer: Timer::Hold(from),
                });
            }
        }
    }

    pub fn on_timer(&mut self, timer: Timer, now: SimTime, out: &mut Vec<EngineOut>) {
        match timer {
            Timer::Keepalive => {
                for s in self.sessions.values() {
                    if s.kind == PeerKind::External && s.state == SessionState::Established {
                        out.push(EngineOut::Keepalive { to: s.peer_id });
                    }
                }
                out.push(EngineOut::Timer {
                    at: now + self.keepalive_ms,
                    timer: Timer::Keepalive,
                });
            }
            Timer::Hold(peer) => {
                let expired = self.sessions.get(&peer).is_some_and(|s| {
                    s.state == SessionState::Established
                        && now.0 >= s.keepalive_at.0 + self.hold_ms
                });
                if expired {
                    self.session_down(peer, out);
                }
            }
            _ => {}
        }
    }

    /// Replaces the set of prefixes owned by this router's domain. They are
    /// advertised to external peers and never kept in Table B.
    pub fn set_local_routes(&mut self, prefixes: BTreeSet<Prefix>, out: &mut Vec<EngineOut>) {
        if prefixes == self.local_routes {
            return;
        }
        for p in &prefixes {
            if self.candidates.remove(p).is_some() {
                self.refresh_prefix(*p);
            }
        }
        self.local_routes = prefixes;
        self.sync_out(out);
    }

    pub fn set_local_pref(&mut self, peer: RouterId, lp: u32, out: &mut Vec<EngineOut>) {
        self.peer_lp.insert(peer, lp);
        let touched: Vec<Prefix> = self
            .candidates
            .iter_mut()
            .filter_map(|(p, m)| m.get_mut(&peer).map(|c| (p, c)))
            .map(|(p, c)| {
                c.local_pref = lp;
                *p
            })
            .collect();
        for p in touched {
            self.refresh_prefix(p);
        }
        self.sync_out(out);
    }

    fn apply(&mut self, from: RouterId, update: &UpdateB) {
        let Some(kind) = self.sessions.get(&from).map(|s| s.kind) else {
            return;
        };
        let mut touched = BTreeSet::new();
        for p in &update.withdrawn {
            if let Some(m) = self.candidates.get_mut(p) {
                if m.remove(&from).is_some() {
                    touched.insert(*p);
                }
            }
        }
        for item in &update.advertised {
            if self.local_routes.contains(&item.prefix) {
                self.stats.own_prefix_ignored += 1;
                continue;
            }
            let mut c = item.clone();
            c.from_peer = from;
            c.learned_internal = kind == PeerKind::Internal;
            if kind == PeerKind::External {
                c.local_pref = self.peer_lp.get(&from).copied().unwrap_or(DEFAULT_LOCAL_PREF);
            }
            let rejected = if c.as_path.contains(&self.high_asn) || c.has_duplicate_asn() {
                self.stats.loop_rejected += 1;
                true
            } else if c.as_path.is_empty() {
                self.stats.empty_path_rejected += 1;
                true
            } else {
                false
            };
            let m = self.candidates.entry(c.prefix).or_default();
            let changed = if rejected {
                m.remove(&from).is_some()
            } else {
                m.insert(from, c.clone()) != Some(c)
            };
            if changed {
                touched.insert(item.prefix);
            }
        }
        self.candidates.retain(|_, m| !m.is_empty());
        for p in touched {
            self.refresh_prefix(p);
        }
    }

    fn drop_peer_routes(&mut self, peer: RouterId) {
        let touched: Vec<Prefix> = self
            .candidates
            .iter_mut()
            .filter_map(|(p, m)| m.remove(&peer).map(|_| *p))
            .collect();
        for p in touched {
            self.refresh_prefix(p);
        }
    }

    fn refresh_prefix(&mut self, prefix: Prefix) {
        let cands: Vec<PathCandidate> = self
            .candidates
            .get(&prefix)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default();
        if cands.is_empty() {
            self.candidates.remove(&prefix);
        }
        let best = best_path(&cands).map(|b| b.from_peer);
        let entries = cands
            .iter()
            .map(|c| TableBEntry {
                prefix,
                as_path: c.as_path.clone(),
                next_hop_peer: c.from_peer,
                local_pref: c.local_pref,
                learned_internal: c.learned_internal,
                best: Some(c.from_peer) == best,
            })
            .collect();
        self.table.replace(prefix, entries);
    }

    fn desired_for(&self, session: &PeerSession) -> BTreeMap<Prefix, PathCandidate> {
        let local = self.local_routes.iter().map(|p| PathCandidate {
            prefix: *p,
            as_path: Vec::new(),
            local_pref: DEFAULT_LOCAL_PREF,
            from_peer: self.id,
            learned_internal: false,
        });
        let learned = self
            .candidates
            .values()
            .filter_map(|m| best_path(&m.values().cloned().collect::<Vec<_>>()).cloned());
        local
            .chain(learned)
            .filter_map(|r| advertise_policy(&r, session, self.high_asn))
            .map(|r| (r.prefix, r))
            .collect()
    }

    /// Sends every established peer the difference between its Adj-RIB-Out
    /// and the current policy output.
    fn sync_out(&mut self, out: &mut Vec<EngineOut>) {
        let established: Vec<PeerSession> = self
            .sessions
            .values()
            .filter(|s| s.state == SessionState::Established)
            .cloned()
            .collect();
        for s in established {
            let desired = self.desired_for(&s);
            let sent = self.rib_out.entry(s.peer_id).or_default();
            let advertised: Vec<PathCandidate> = desired
                .iter()
                .filter(|(p, r)| sent.get(p) != Some(r))
                .map(|(_, r)| r.clone())
                .collect();
            let withdrawn: Vec<Prefix> = sent
                .keys()
                .filter(|p| !desired.contains_key(p))
                .copied()
                .collect();
            *sent = desired;
            let update = UpdateB {
                advertised,
                withdrawn,
            };
            if !update.is_empty() {
                out.push(EngineOut::Send {
                    to: s.peer_id,
                    body: MessageBody::UpdateB(update),
                    kind: SendKind::Triggered,
                });
            }
        }
    }
}
