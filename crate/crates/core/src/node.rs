//! A complete router: both engines, the tables they feed, and the glue
//! that decides which engine a received packet belongs to.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::bgp::{BgpEngine, PeerKind};
use crate::igp::{self, IgpEngine, IntraLink, PathInfo};
use crate::router::{
    classify_mode, dispatch, lookup, stamp_header, ConfigError, DropReason, Engine, EngineOut,
    ForwardingDecision, Mode, NextHop, Rib, RouterConfig, SendKind, TableA, TableB, Timer,
    HOP_LIMIT,
};
use crate::types::{Prefix, RouterId, SimTime};
use crate::wire::{self, BigpHeader, Data, MessageBody, MsgType};

/// One physical link as seen from this router.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attachment {
    pub neighbor: RouterId,
    pub neighbor_domain: u32,
    pub cost: u32,
    pub segment: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BgpTimers {
    pub keepalive_s: u32,
    pub hold_s: u32,
}

impl Default for BgpTimers {
    fn default() -> Self {
        BgpTimers {
            keepalive_s: 30,
            hold_s: 90,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Send {
        to: RouterId,
        header: BigpHeader,
        body: MessageBody,
        kind: SendKind,
    },
    Keepalive {
        to: RouterId,
    },
    Timer {
        at: SimTime,
        timer: Timer,
    },
    Delivered {
        tag: u32,
        dest: u32,
    },
    Dropped {
        tag: u32,
        dest: u32,
        reason: DropReason,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterCounters {
    pub decode_errors: u64,
    pub mode_mismatch: u64,
    pub foreign_igp: u64,
    pub not_intra_link: u64,
    pub session_not_established: u64,
}

#[derive(Debug, Clone)]
pub struct Router {
    cfg: RouterConfig,
    attachments: BTreeMap<RouterId, Attachment>,
    mesh: Option<BTreeSet<RouterId>>,
    igp: IgpEngine,
    bgp: BgpEngine,
    table_a: TableA,
    paths: BTreeMap<RouterId, PathInfo>,
    live: BTreeMap<RouterId, RouterId>,
    counters: RouterCounters,
}

impl Router {
    /// `mesh` lists the same-domain routers to peer with internally; `None`
    /// peers with every reachable non-stub router of the domain.
    pub fn new(
        cfg: RouterConfig,
        attachments: impl IntoIterator<Item = Attachment>,
        mesh: Option<BTreeSet<RouterId>>,
        timers: BgpTimers,
    ) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let attachments: BTreeMap<_, _> = attachments.into_iter().map(|a| (a.neighbor, a)).collect();
        let intra = attachments
            .values()
            .filter(|a| a.neighbor_domain == cfg.domain_asn)
            .map(|a| IntraLink {
                neighbor: a.neighbor,
                cost: a.cost,
                segment: a.segment,
            });
        let igp = IgpEngine::new(&cfg, intra);
        let bgp = BgpEngine::new(cfg.router_id, cfg.high_asn(), timers.keepalive_s, timers.hold_s);
        Ok(Router {
            cfg,
            attachments,
            mesh,
            igp,
            bgp,
            table_a: TableA::default(),
            paths: BTreeMap::new(),
            live: BTreeMap::new(),
            counters: RouterCounters::default(),
        })
    }

    pub fn id(&self) -> RouterId {
        self.cfg.router_id
    }

    pub fn config(&self) -> &RouterConfig {
        &self.cfg
    }

    pub fn igp(&self) -> &IgpEngine {
        &self.igp
    }

    pub fn bgp(&self) -> &BgpEngine {
        &self.bgp
    }

    pub fn table_a(&self) -> &TableA {
        &self.table_a
    }

    pub fn table_b(&self) -> &TableB {
        self.bgp.table()
    }

    pub fn counters(&self) -> &RouterCounters {
        &self.counters
    }

    pub fn attachments(&self) -> impl Iterator<Item = &Attachment> {
        self.attachments.values()
    }

    pub fn is_inter_link(&self, neighbor: RouterId) -> bool {
        self.attachments
            .get(&neighbor)
            .is_some_and(|a| a.neighbor_domain != self.cfg.domain_asn)
    }

    pub fn rib(&self) -> Rib<'_> {
        Rib {
            table_a: &self.table_a,
            table_b: self.bgp.table(),
            live: &self.live,
        }
    }

    /// Adjacency and session transitions so far.
    pub fn control_changes(&self) -> u64 {
        self.igp.state_changes() + self.bgp.state_changes()
    }

    pub fn start(&mut self, now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let mut eng = Vec::new();
        self.igp.start(now, &mut eng);
        self.wrap(Mode::Intra, eng, &mut out);
        let mut eng = Vec::new();
        self.bgp.start(now, &mut eng);
        let externals: Vec<_> = self
            .attachments
            .values()
            .filter(|a| a.neighbor_domain != self.cfg.domain_asn)
            .copied()
            .collect();
        for a in externals {
            self.bgp.session_up(
                a.neighbor,
                PeerKind::External,
                a.neighbor_domain + self.cfg.asn_split,
                now,
                &mut eng,
            );
        }
        self.wrap(Mode::Inter, eng, &mut out);
        self.post_process(now, &mut out);
        out
    }

    pub fn receive(&mut self, from: RouterId, bytes: &[u8], now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let (header, body) = match wire::decode(bytes) {
            Ok(p) => p,
            Err(_) => {
                self.counters.decode_errors += 1;
                return out;
            }
        };
        let engine = match dispatch(&header, &body) {
            Ok(e) => e,
            Err(_) => {
                self.counters.mode_mismatch += 1;
                return out;
            }
        };
        let mut eng = Vec::new();
        match (engine, body) {
            (Engine::Algorithm1, body) => {
                if header.asn != self.cfg.domain_asn {
                    self.counters.foreign_igp += 1;
                    return out;
                }
                let r = match &body {
                    MessageBody::Hello(h) => self.igp.on_hello(from, h, now, &mut eng),
                    MessageBody::UpdateA(u) => self.igp.on_update(from, u, now, &mut eng),
                    _ => Ok(()),
                };
                if r.is_err() {
                    self.counters.not_intra_link += 1;
                }
                self.wrap(Mode::Intra, eng, &mut out);
            }
            (Engine::Algorithm2, MessageBody::UpdateB(upd)) => {
                let same_domain = matches!(classify_mode(header.asn, self.cfg.asn_split), Ok(Mode::Inter))
                    && header.asn - self.cfg.asn_split == self.cfg.domain_asn;
                if self.bgp.is_established(from) {
                    // cannot fail: the session is up
                    let _ = self.bgp.on_update(from, &upd, now, &mut eng);
                } else if same_domain && self.mesh_allows(from) && !self.cfg.stub {
                    self.bgp.buffer(from, upd);
                } else {
                    self.counters.session_not_established += 1;
                }
                self.wrap(Mode::Inter, eng, &mut out);
            }
            (Engine::Lookup, MessageBody::Data(d)) => self.forward(&header, d, &mut out),
            _ => {}
        }
        self.post_process(now, &mut out);
        out
    }

    pub fn on_keepalive(&mut self, from: RouterId, now: SimTime) -> Vec<Output> {
        let mut eng = Vec::new();
        self.bgp.on_keepalive(from, now, &mut eng);
        let mut out = Vec::new();
        self.wrap(Mode::Inter, eng, &mut out);
        out
    }

    pub fn on_timer(&mut self, timer: Timer, now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let mut eng = Vec::new();
        match timer {
            Timer::Hello | Timer::Dead(_) | Timer::Refresh => {
                self.igp.on_timer(timer, now, &mut eng);
                self.wrap(Mode::Intra, eng, &mut out);
            }
            Timer::Keepalive | Timer::Hold(_) => {
                self.bgp.on_timer(timer, now, &mut eng);
                self.wrap(Mode::Inter, eng, &mut out);
            }
        }
        self.post_process(now, &mut out);
        out
    }

    /// The physical link to `neighbor` has been restored.
    pub fn link_up(&mut self, neighbor: RouterId, now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(a) = self.attachments.get(&neighbor).copied() else {
            return out;
        };
        let mut eng = Vec::new();
        if a.neighbor_domain == self.cfg.domain_asn {
            self.igp.on_link_up(neighbor, &mut eng);
            self.wrap(Mode::Intra, eng, &mut out);
        } else {
            self.bgp.session_up(
                neighbor,
                PeerKind::External,
                a.neighbor_domain + self.cfg.asn_split,
                now,
                &mut eng,
            );
            self.wrap(Mode::Inter, eng, &mut out);
        }
        self.post_process(now, &mut out);
        out
    }

    pub fn set_local_pref(&mut self, peer: RouterId, lp: u32, now: SimTime) -> Vec<Output> {
        let mut eng = Vec::new();
        self.bgp.set_local_pref(peer, lp, &mut eng);
        let mut out = Vec::new();
        self.wrap(Mode::Inter, eng, &mut out);
        self.post_process(now, &mut out);
        out
    }

    /// Injects a DATA packet as if generated by a local host.
    pub fn originate_data(&mut self, dest: u32, tag: u32) -> Vec<Output> {
        let locality = if self.cfg.originates(dest) || self.table_a.lpm_intra(dest).is_some() {
            Mode::Intra
        } else {
            Mode::Inter
        };
        let header = stamp_header(locality, &self.cfg, MsgType::Data);
        let mut out = Vec::new();
        self.forward(
            &header,
            Data {
                dest_addr: dest,
                hop_count: 0,
                payload_tag: tag,
            },
            &mut out,
        );
        out
    }

    fn forward(&self, header: &BigpHeader, data: Data, out: &mut Vec<Output>) {
        let tag = data.payload_tag;
        let dest = data.dest_addr;
        match lookup(header, dest, self.rib(), &self.cfg) {
            ForwardingDecision::DeliverLocal => out.push(Output::Delivered { tag, dest }),
            ForwardingDecision::Drop(reason) => out.push(Output::Dropped { tag, dest, reason }),
            ForwardingDecision::Forward { .. } if data.hop_count >= HOP_LIMIT => out.push(Output::Dropped {
                tag,
                dest,
                reason: DropReason::TtlExceeded,
            }),
            ForwardingDecision::Forward { next_hop, header } => {
                let mut header = header;
                header.router_id = self.cfg.router_id;
                out.push(Output::Send {
                    to: next_hop,
                    header,
                    body: MessageBody::Data(Data {
                        hop_count: data.hop_count + 1,
                        ..data
                    }),
                    kind: SendKind::Triggered,
                });
            }
        }
    }

    fn wrap(&self, mode: Mode, eng: Vec<EngineOut>, out: &mut Vec<Output>) {
        for e in eng {
            out.push(match e {
                EngineOut::Send { to, body, kind } => Output::Send {
                    to,
                    header: stamp_header(mode, &self.cfg, body.msg_type()),
                    body,
                    kind,
                },
                EngineOut::Keepalive { to } => Output::Keepalive { to },
                EngineOut::Timer { at, timer } => Output::Timer { at, timer },
            });
        }
    }

    fn mesh_allows(&self, peer: RouterId) -> bool {
        self.mesh.as_ref().is_none_or(|m| m.contains(&peer))
    }

    /// Brings derived state in line after any engine ran: SPF, internal
    /// sessions, locally owned prefixes and the ASBR flag. Repeats while
    /// the ASBR flag keeps changing the database.
    fn post_process(&mut self, now: SimTime, out: &mut Vec<Output>) {
        for _ in 0..4 {
            if self.igp.take_dirty() {
                self.recompute_table_a();
            }
            let mut eng = Vec::new();
            self.reconcile_internal_sessions(now, &mut eng);
            let owned: BTreeSet<Prefix> = self.table_a.intra().map(|e| e.prefix).collect();
            self.bgp.set_local_routes(owned, &mut eng);
            self.wrap(Mode::Inter, eng, out);

            let asbr = self.bgp.has_external_established();
            if asbr == self.igp.is_asbr() {
                break;
            }
            let mut eng = Vec::new();
            self.igp.set_asbr(asbr, now, &mut eng);
            self.wrap(Mode::Intra, eng, out);
        }
        self.rebuild_live();
    }

    fn recompute_table_a(&mut self) {
        let lsdb = self.igp.lsdb();
        let paths = igp::shortest_paths(lsdb, self.cfg.router_id);
        let mut entries = igp::spf_entries(lsdb, &paths, &self.cfg);
        if !self.igp.is_asbr() {
            entries.extend(igp::derive_default_routes(lsdb, self.cfg.router_id, &paths));
        }
        self.table_a = TableA::from_entries(entries);
        self.paths = paths;
    }

    fn reconcile_internal_sessions(&mut self, now: SimTime, eng: &mut Vec<EngineOut>) {
        let desired: BTreeSet<RouterId> = if self.cfg.stub {
            BTreeSet::new()
        } else {
            self.paths
                .keys()
                .copied()
                .filter(|r| *r != self.cfg.router_id && self.mesh_allows(*r))
                .filter(|r| self.igp.lsdb().get(*r).is_some_and(|l| !l.is_stub))
                .collect()
        };
        let current: Vec<RouterId> = self
            .bgp
            .sessions()
            .filter(|s| s.kind == PeerKind::Internal)
            .map(|s| s.peer_id)
            .collect();
        for peer in current {
            if self.bgp.is_established(peer) && !desired.contains(&peer) {
                self.bgp.session_down(peer, eng);
            }
        }
        for peer in desired {
            if !self.bgp.is_established(peer) {
                self.bgp
                    .session_up(peer, PeerKind::Internal, self.cfg.high_asn(), now, eng);
            }
        }
    }

    fn rebuild_live(&mut self) {
        let mut live = BTreeMap::new();
        for n in self.igp.full_neighbors() {
            live.insert(n, n);
        }
        for s in self.bgp.sessions() {
            if s.kind == PeerKind::External && self.bgp.is_established(s.peer_id) {
                live.insert(s.peer_id, s.peer_id);
            }
        }
        for (r, p) in &self.paths {
            if let NextHop::Router(h) = p.next_hop {
                if live.get(&h) == Some(&h) {
                    live.entry(*r).or_insert(h);
                }
            }
        }
        self.live = live;
    }

    /// Both tables in a stable text form, one route per line.
    pub fn dump_tables(&self) -> String {
        let mut rows: Vec<(Prefix, u8, RouterId, String)> = Vec::new();
        for e in self.table_a.iter() {
            rows.push((
                e.prefix,
                0,
                RouterId(0),
                format!("A {} via {} cost {} origin {}", e.prefix, e.next_hop, e.cost, e.origin),
            ));
        }
        for e in self.bgp.table().iter() {
            let path: Vec<String> = e.as_path.iter().map(u32::to_string).collect();
            rows.push((
                e.prefix,
                1,
                e.next_hop_peer,
                format!(
                    "B {} via {} as_path {} lp {} best {}",
                    e.prefix,
                    e.next_hop_peer,
                    path.join(","),
                    e.local_pref,
                    u8::from(e.best)
                ),
            ));
        }
        rows.sort_by_key(|a| (a.0, a.1, a.2));
        let mut s = String::new();
        for (.., line) in rows {
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn router(id: u32, asn: u32, prefix: &str, links: &[(u32, u32)]) -> Router {
        let mut cfg = RouterConfig::new(RouterId(id), asn);
        cfg.prefixes = vec![prefix.parse().unwrap()];
        let atts = links.iter().map(|&(n, d)| Attachment {
            neighbor: RouterId(n),
            neighbor_domain: d,
            cost: 10,
            segment: None,
        });
        Router::new(cfg, atts, None, BgpTimers::default()).unwrap()
    }

    /// Delivers sends between the given routers until quiet, ignoring
    /// timers and delays.
    fn pump(routers: &mut BTreeMap<RouterId, Router>, mut queue: Vec<(RouterId, Output)>) {
        let mut steps = 0;
        while let Some((from, o)) = (!queue.is_empty()).then(|| queue.remove(0)) {
            steps += 1;
            assert!(steps < 10_000);
            if let Output::Send { to, header, body, .. } = o {
                let bytes = wire::encode(&header, &body).unwrap();
                if let Some(r) = routers.get_mut(&to) {
                    let outs = r.receive(from, &bytes, SimTime(1));
                    queue.extend(outs.into_iter().map(|x| (to, x)));
                }
            }
        }
    }

    #[test]
    fn two_domains_converge_and_forward() {
        let mut routers: BTreeMap<RouterId, Router> = [
            router(1, 200, "10.1.0.0/16", &[(2, 200), (3, 200)]),
            router(2, 200, "10.2.0.0/16", &[(1, 200)]),
            router(3, 200, "10.3.0.0/16", &[(1, 200), (4, 300)]),
            router(4, 300, "10.4.0.0/16", &[(3, 200)]),
        ]
        .into_iter()
        .map(|r| (r.id(), r))
        .collect();
        let mut q = Vec::new();
        for r in routers.values_mut() {
            let id = r.id();
            q.extend(r.start(SimTime::ZERO).into_iter().map(|o| (id, o)));
        }
        // kick a round of hellos by hand
        for r in routers.values_mut() {
            let id = r.id();
            q.extend(r.on_timer(Timer::Hello, SimTime::ZERO).into_iter().map(|o| (id, o)));
        }
        pump(&mut routers, q);

        let r3 = &routers[&RouterId(3)];
        assert!(r3.igp().is_asbr());
        let p4: Prefix = "10.4.0.0/16".parse().unwrap();
        assert_eq!(r3.table_b().best(p4).unwrap().as_path, vec![300 + 32_768]);

        let r2 = &routers[&RouterId(2)];
        let d = r2.table_a().default_route().unwrap();
        assert_eq!(d.via_asbr, Some(RouterId(3)));
        assert_eq!(d.next_hop, NextHop::Router(RouterId(1)));

        let dump = r3.dump_tables();
        assert!(dump.contains("B 10.4.0.0/16 via R4 as_path 33068 lp 100 best 1"), "{dump}");
        assert!(dump.contains("A 10.2.0.0/16 via R1 cost 20 origin INTRA"), "{dump}");

        // R4 learned the whole domain 200 from R3
        let r4 = &routers[&RouterId(4)];
        for p in ["10.1.0.0/16", "10.2.0.0/16", "10.3.0.0/16"] {
            assert!(r4.table_b().best(p.parse().unwrap()).is_some(), "{p}");
        }
        assert!(r4.table_b().best(p4).is_none());

        let outs = routers.get_mut(&RouterId(2)).unwrap().originate_data(0x0a04_0001, 7);
        match &outs[..] {
            [Output::Send { to, header, .. }] => {
                assert_eq!(*to, RouterId(1));
                assert!(header.cbb);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn mode_mismatch_is_counted() {
        let mut r = router(1, 200, "10.1.0.0/16", &[(2, 200)]);
        let mut cfg = RouterConfig::new(RouterId(2), 200);
        cfg.prefixes = vec![];
        let mut h = stamp_header(Mode::Inter, &cfg, MsgType::UpdateA);
        h.msg_type = MsgType::UpdateA;
        let bytes = wire::encode(&h, &MessageBody::UpdateA(crate::wire::UpdateA { lsas: vec![] })).unwrap();
        assert!(r.receive(RouterId(2), &bytes, SimTime(1)).is_empty());
        assert_eq!(r.counters().mode_mismatch, 1);
        assert!(r.receive(RouterId(2), &bytes[..5], SimTime(1)).is_empty());
        assert_eq!(r.counters().decode_errors, 1);
    }
}
