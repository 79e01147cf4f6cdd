//! The discrete-event engine.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::metrics::{Metrics, MsgCounts, PhaseMetrics, PingRecord};
use super::scenario::{link_key, Action, Scenario, Topology};
use crate::igp::AdjState;
use crate::node::{Attachment, BgpTimers, Output, Router};
use crate::router::{classify_mode, ConfigError, DropReason, Mode, Origin, SendKind, TableA, TableB, Timer};
use crate::types::{Prefix, RouterId, SimTime};
use crate::wire::{self, BigpHeader, MessageBody, MsgType};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("runtime assertion at t={at}: {what}")]
    RuntimeAssertion { at: SimTime, what: String },
    #[error("unknown router {0}")]
    UnknownRouter(RouterId),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("invalid router config: {0}")]
    Config(#[from] ConfigError),
}

type LinkKey = (RouterId, RouterId);

#[derive(Debug, Clone)]
enum Payload {
    Packet {
        bytes: Vec<u8>,
        msg_type: MsgType,
        tag: Option<u32>,
        significant: bool,
    },
    Keepalive,
}

#[derive(Debug, Clone)]
struct InFlight {
    from: RouterId,
    to: RouterId,
    links: Vec<LinkKey>,
    payload: Payload,
}

#[derive(Debug, Clone)]
enum Event {
    Start,
    Deliver(u64),
    Timer(RouterId, Timer),
    Action(Action),
}

#[derive(Debug, Clone)]
struct Phase {
    start: SimTime,
    cause: String,
    last_activity: SimTime,
    consistent_since: Option<SimTime>,
    converged_at: Option<SimTime>,
    counts: MsgCounts,
    drops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub trace: Vec<String>,
}

impl RunOutput {
    pub fn trace_text(&self) -> String {
        self.trace.iter().fold(String::new(), |mut s, l| {
            s.push_str(l);
            s.push('\n');
            s
        })
    }
}

pub struct Simulation {
    topo: Topology,
    until: SimTime,
    now: SimTime,
    routers: BTreeMap<RouterId, Router>,
    links_up: BTreeMap<LinkKey, bool>,
    queue: BTreeMap<(SimTime, u64), Event>,
    seq: u64,
    in_flight: BTreeMap<u64, InFlight>,
    next_flight: u64,
    trace: Vec<String>,
    counts: MsgCounts,
    drops: BTreeMap<DropReason, u64>,
    pings: Vec<PingRecord>,
    data_modes: BTreeMap<u32, Mode>,
    phases: Vec<Phase>,
    rng: Option<ChaCha8Rng>,
    domain_prefixes: BTreeMap<u32, BTreeSet<Prefix>>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, until: SimTime, seed: u64) -> Result<Self, SimError> {
        let topo = scenario.topology.clone();
        let timers = BgpTimers {
            keepalive_s: topo.params.keepalive_s,
            hold_s: topo.params.hold_s,
        };
        let mut routers = BTreeMap::new();
        for cfg in &topo.nodes {
            let id = cfg.router_id;
            let atts: Vec<Attachment> = topo
                .links
                .iter()
                .filter(|l| l.a == id || l.b == id)
                .map(|l| {
                    let n = l.other(id);
                    Attachment {
                        neighbor: n,
                        neighbor_domain: topo.domain_of(n).unwrap_or_default(),
                        cost: l.cost,
                        segment: l.segment,
                    }
                })
                .collect();
            let r = Router::new(cfg.clone(), atts, topo.mesh_for(id), timers)?;
            routers.insert(id, r);
        }
        let mut domain_prefixes: BTreeMap<u32, BTreeSet<Prefix>> = BTreeMap::new();
        for n in &topo.nodes {
            domain_prefixes
                .entry(n.domain_asn)
                .or_default()
                .extend(n.prefixes.iter().copied());
        }
        let rng = (topo.params.jitter_ms > 0).then(|| ChaCha8Rng::seed_from_u64(seed));
        let mut sim = Simulation {
            links_up: topo.links.iter().map(|l| (l.key(), true)).collect(),
            topo,
            until,
            now: SimTime::ZERO,
            routers,
            queue: BTreeMap::new(),
            seq: 0,
            in_flight: BTreeMap::new(),
            next_flight: 0,
            trace: Vec::new(),
            counts: MsgCounts::default(),
            drops: BTreeMap::new(),
            pings: Vec::new(),
            data_modes: BTreeMap::new(),
            phases: Vec::new(),
            rng,
            domain_prefixes,
        };
        sim.push(SimTime::ZERO, Event::Start);
        for a in &scenario.actions {
            sim.push(a.at, Event::Action(a.action.clone()));
        }
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn until(&self) -> SimTime {
        self.until
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn router(&self, id: RouterId) -> Option<&Router> {
        self.routers.get(&id)
    }

    pub fn routers(&self) -> impl Iterator<Item = &Router> {
        self.routers.values()
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn link_is_up(&self, a: RouterId, b: RouterId) -> Option<bool> {
        self.links_up.get(&link_key(a, b)).copied()
    }

    pub fn dump_tables(&self, id: RouterId) -> Result<String, SimError> {
        self.routers
            .get(&id)
            .map(Router::dump_tables)
            .ok_or(SimError::UnknownRouter(id))
    }

    /// Queues an extra action; it runs after anything already queued for
    /// the same instant.
    pub fn schedule_action(&mut self, at: SimTime, action: Action) -> Result<(), SimError> {
        let known = |r: &RouterId| self.routers.contains_key(r);
        let ok = match &action {
            Action::LinkDown(a, b) | Action::LinkUp(a, b) => self.links_up.contains_key(&link_key(*a, *b)),
            Action::Ping { src, .. } => known(src),
            Action::SetLocalPref { router, peer, .. } => {
                self.routers.get(router).is_some_and(|r| r.is_inter_link(*peer))
            }
        };
        if !ok {
            return Err(SimError::UnknownEntity(action.describe()));
        }
        if at < self.now {
            return Err(self.assertion(format!("action scheduled in the past at {at}")));
        }
        self.push(at, Event::Action(action));
        Ok(())
    }

    /// Processes every event up to and including `t` (capped at the run
    /// limit). A run limit of zero processes nothing.
    pub fn run_to(&mut self, t: SimTime) -> Result<(), SimError> {
        if self.until == SimTime::ZERO {
            return Ok(());
        }
        let limit = t.min(self.until);
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > limit {
                break;
            }
            let ((at, _), ev) = entry.remove_entry();
            self.step(at, ev)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunOutput, SimError> {
        self.run_to(self.until)?;
        if self.until > SimTime::ZERO {
            self.check_quiet(self.until);
        }
        let phases = self
            .phases
            .iter()
            .enumerate()
            .map(|(i, p)| PhaseMetrics {
                phase: i,
                cause: p.cause.clone(),
                start_s: p.start.as_secs_f64(),
                converged: p.converged_at.is_some(),
                convergence_time_s: p.converged_at.map(|c| c.saturating_sub(p.start).as_secs_f64()),
                msg_counts: p.counts,
                drops: p.drops,
            })
            .collect();
        let metrics = Metrics {
            phases,
            msg_counts: self.counts,
            pings: self.pings,
            drops: self
                .drops
                .into_iter()
                .map(|(r, n)| (r.name().to_string(), n))
                .collect(),
        };
        Ok(RunOutput {
            metrics,
            trace: self.trace,
        })
    }

    fn push(&mut self, at: SimTime, ev: Event) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    fn assertion(&self, what: impl Into<String>) -> SimError {
        SimError::RuntimeAssertion {
            at: self.now,
            what: what.into(),
        }
    }

    fn step(&mut self, at: SimTime, ev: Event) -> Result<(), SimError> {
        if at < self.now {
            return Err(self.assertion("event queue went backwards"));
        }
        self.check_quiet(at);
        self.now = at;

        let touched: Vec<RouterId> = match &ev {
            Event::Start => self.routers.keys().copied().collect(),
            Event::Deliver(id) => self.in_flight.get(id).map(|f| vec![f.to]).unwrap_or_default(),
            Event::Timer(r, _) => vec![*r],
            Event::Action(Action::LinkUp(a, b)) => vec![*a, *b],
            Event::Action(Action::SetLocalPref { router, .. }) => vec![*router],
            Event::Action(_) => vec![],
        };
        let before: Vec<_> = touched.iter().map(|r| self.fingerprint(*r)).collect();

        match ev {
            Event::Start => {
                self.open_phase(at, "start".to_string());
                let ids: Vec<_> = self.routers.keys().copied().collect();
                for id in ids {
                    let outs = self.routers.get_mut(&id).expect("known router").start(at);
                    self.emit(id, outs)?;
                }
            }
            Event::Timer(id, timer) => {
                let outs = self
                    .routers
                    .get_mut(&id)
                    .ok_or(SimError::UnknownRouter(id))?
                    .on_timer(timer, at);
                self.emit(id, outs)?;
            }
            Event::Deliver(fid) => self.deliver(fid)?,
            Event::Action(action) => self.act(action)?,
        }

        let changed = touched
            .iter()
            .zip(before)
            .any(|(r, b)| self.fingerprint(*r) != b);
        if changed {
            self.activity(at);
        }
        for r in &touched {
            self.check_router(*r)?;
        }
        let consistent = self.consistent();
        if let Some(p) = self.phases.last_mut() {
            match (consistent, p.consistent_since) {
                (true, None) => p.consistent_since = Some(at),
                (false, _) => p.consistent_since = None,
                _ => {}
            }
        }
        Ok(())
    }

    fn fingerprint(&self, id: RouterId) -> Option<(TableA, TableB, u64)> {
        self.routers
            .get(&id)
            .map(|r| (r.table_a().clone(), r.table_b().clone(), r.control_changes()))
    }

    fn open_phase(&mut self, at: SimTime, cause: String) {
        self.phases.push(Phase {
            start: at,
            cause,
            last_activity: at,
            consistent_since: None,
            converged_at: None,
            counts: MsgCounts::default(),
            drops: 0,
        });
    }

    fn activity(&mut self, at: SimTime) {
        if let Some(p) = self.phases.last_mut() {
            p.last_activity = p.last_activity.max(at);
        }
    }

    /// Marks the current phase converged once a full quiet window has
    /// passed since the later of its last activity and the moment the
    /// control plane last became consistent with the physical topology.
    fn check_quiet(&mut self, t: SimTime) {
        let quiet = self.topo.params.quiet_window_ms;
        if let Some(p) = self.phases.last_mut() {
            if let (None, Some(cs)) = (p.converged_at, p.consistent_since) {
                let anchor = p.last_activity.max(cs);
                if t.0 >= anchor.0 + quiet {
                    p.converged_at = Some(anchor);
                }
            }
        }
    }

    fn act(&mut self, action: Action) -> Result<(), SimError> {
        let at = self.now;
        self.trace.push(format!("t={} ACTION {}", at.0, action.describe()));
        if action.opens_phase() {
            self.open_phase(at, action.describe());
        }
        match action {
            Action::LinkDown(a, b) => {
                let key = link_key(a, b);
                self.links_up.insert(key, false);
                let doomed: Vec<u64> = self
                    .in_flight
                    .iter()
                    .filter(|(_, f)| f.links.contains(&key))
                    .map(|(id, _)| *id)
                    .collect();
                for id in doomed {
                    let f = self.in_flight.remove(&id).expect("listed above");
                    self.lose(&f);
                }
            }
            Action::LinkUp(a, b) => {
                self.links_up.insert(link_key(a, b), true);
                for (x, y) in [(a, b), (b, a)] {
                    let outs = self
                        .routers
                        .get_mut(&x)
                        .ok_or(SimError::UnknownRouter(x))?
                        .link_up(y, at);
                    self.emit(x, outs)?;
                }
            }
            Action::Ping { src, dest } => {
                let tag = self.pings.len() as u32;
                self.pings.push(PingRecord {
                    tag,
                    t: at.as_secs_f64(),
                    src,
                    dest: Ipv4Addr::from(dest).to_string(),
                    delivered: false,
                    hops: vec![src],
                    drop_reason: None,
                });
                let outs = self
                    .routers
                    .get_mut(&src)
                    .ok_or(SimError::UnknownRouter(src))?
                    .originate_data(dest, tag);
                self.emit(src, outs)?;
            }
            Action::SetLocalPref {
                router,
                peer,
                local_pref,
            } => {
                let outs = self
                    .routers
                    .get_mut(&router)
                    .ok_or(SimError::UnknownRouter(router))?
                    .set_local_pref(peer, local_pref, at);
                self.emit(router, outs)?;
            }
        }
        Ok(())
    }

    fn deliver(&mut self, fid: u64) -> Result<(), SimError> {
        let Some(f) = self.in_flight.remove(&fid) else {
            return Ok(());
        };
        let at = self.now;
        let router = self.routers.get_mut(&f.to).ok_or(SimError::UnknownRouter(f.to))?;
        let outs = match &f.payload {
            Payload::Keepalive => router.on_keepalive(f.from, at),
            Payload::Packet {
                bytes,
                tag,
                significant,
                ..
            } => {
                let outs = router.receive(f.from, bytes, at);
                if *significant {
                    self.activity(at);
                }
                if let Some(tag) = tag {
                    if let Some(p) = self.pings.get_mut(*tag as usize) {
                        p.hops.push(f.to);
                    }
                }
                outs
            }
        };
        self.emit(f.to, outs)
    }

    fn lose(&mut self, f: &InFlight) {
        if let Payload::Packet { msg_type, tag, .. } = &f.payload {
            self.trace
                .push(format!("t={} LOST {}->{} {}", self.now.0, f.from, f.to, msg_type.name()));
            if let Some(tag) = tag {
                self.record_drop(*tag, DropReason::LinkDown);
            }
        }
    }

    fn record_drop(&mut self, tag: u32, reason: DropReason) {
        *self.drops.entry(reason).or_default() += 1;
        if let Some(p) = self.phases.last_mut() {
            p.drops += 1;
        }
        if let Some(p) = self.pings.get_mut(tag as usize) {
            p.delivered = false;
            p.drop_reason = Some(reason.name().to_string());
        }
    }

    fn emit(&mut self, from: RouterId, outs: Vec<Output>) -> Result<(), SimError> {
        for o in outs {
            match o {
                Output::Send {
                    to,
                    header,
                    body,
                    kind,
                } => self.send(from, to, header, body, kind)?,
                Output::Keepalive { to } => {
                    let key = link_key(from, to);
                    if self.links_up.get(&key) == Some(&true) {
                        let delay = self.link_delay(key);
                        self.launch(
                            InFlight {
                                from,
                                to,
                                links: vec![key],
                                payload: Payload::Keepalive,
                            },
                            delay,
                        );
                    }
                }
                Output::Timer { at, timer } => {
                    if at < self.now {
                        return Err(self.assertion(format!("{from} set a timer in the past")));
                    }
                    self.push(at, Event::Timer(from, timer));
                }
                Output::Delivered { tag, .. } => {
                    let hops = self
                        .pings
                        .get_mut(tag as usize)
                        .map(|p| {
                            p.delivered = true;
                            p.hops.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                        })
                        .unwrap_or_default();
                    self.trace
                        .push(format!("t={} {} DELIVER tag={} hops={}", self.now.0, from, tag, hops));
                }
                Output::Dropped { tag, reason, .. } => {
                    self.trace
                        .push(format!("t={} {} DROP tag={} {}", self.now.0, from, tag, reason));
                    self.record_drop(tag, reason);
                }
            }
        }
        Ok(())
    }

    fn send(
        &mut self,
        from: RouterId,
        to: RouterId,
        header: BigpHeader,
        body: MessageBody,
        kind: SendKind,
    ) -> Result<(), SimError> {
        let split = self.topo.params.asn_split;
        let mode = match classify_mode(header.asn, split) {
            Ok(m) if header.cbi != header.cbb && header.cbi == (m == Mode::Intra) => m,
            _ => {
                return Err(self.assertion(format!(
                    "care bits cbi={} cbb={} disagree with asn {} from {from}",
                    u8::from(header.cbi),
                    u8::from(header.cbb),
                    header.asn
                )))
            }
        };
        let bytes = wire::encode(&header, &body).map_err(|e| self.assertion(format!("encode failed: {e}")))?;
        let msg_type = header.msg_type;
        let internal = self.topo.domain_of(from) == self.topo.domain_of(to);

        let mut tag = None;
        match &body {
            MessageBody::UpdateB(u) => {
                for item in &u.advertised {
                    let mut seen = BTreeSet::new();
                    if !item.as_path.iter().all(|a| seen.insert(*a)) {
                        return Err(self.assertion(format!("{from} advertised a looping path for {}", item.prefix)));
                    }
                    if internal && item.learned_internal {
                        return Err(self.assertion(format!(
                            "{from} re-advertised internal route {} to internal peer {to}",
                            item.prefix
                        )));
                    }
                }
            }
            MessageBody::Data(d) => {
                tag = Some(d.payload_tag);
                let prev = self.data_modes.insert(d.payload_tag, mode);
                if prev == Some(Mode::Intra) && mode == Mode::Inter {
                    return Err(self.assertion(format!("packet {} re-stamped back to INTER", d.payload_tag)));
                }
            }
            _ => {}
        }

        let significant = match msg_type {
            MsgType::UpdateB => true,
            MsgType::UpdateA => kind != SendKind::Periodic,
            _ => false,
        };
        self.trace.push(format!(
            "t={} {}->{} {} asn={} cbi={} cbb={} {}",
            self.now.0,
            from,
            to,
            msg_type.name(),
            header.asn,
            u8::from(header.cbi),
            u8::from(header.cbb),
            summarize(&body, kind)
        ));
        self.counts.bump(msg_type);
        if let Some(p) = self.phases.last_mut() {
            p.counts.bump(msg_type);
        }
        if significant {
            self.activity(self.now);
        }

        let route = if msg_type == MsgType::UpdateB && internal {
            self.intra_route(from, to)
        } else {
            let key = link_key(from, to);
            match self.links_up.get(&key) {
                None => return Err(self.assertion(format!("{from} sent to non-adjacent {to}"))),
                Some(true) => Some((vec![key], self.link_delay(key))),
                Some(false) => None,
            }
        };
        let flight = InFlight {
            from,
            to,
            links: Vec::new(),
            payload: Payload::Packet {
                bytes,
                msg_type,
                tag,
                significant,
            },
        };
        match route {
            Some((links, delay)) => self.launch(InFlight { links, ..flight }, delay),
            None => self.lose(&flight),
        }
        Ok(())
    }

    fn launch(&mut self, f: InFlight, delay: u64) {
        let jitter = match (&mut self.rng, self.topo.params.jitter_ms) {
            (Some(rng), j) if j > 0 => rng.gen_range(0..=j),
            _ => 0,
        };
        let id = self.next_flight;
        self.next_flight += 1;
        self.in_flight.insert(id, f);
        let at = self.now + delay + jitter;
        self.push(at, Event::Deliver(id));
    }

    fn link_delay(&self, key: LinkKey) -> u64 {
        self.topo
            .link(key.0, key.1)
            .map(|l| l.delay_ms)
            .unwrap_or(1)
    }

    /// Lowest-delay path over up links inside one domain.
    fn intra_route(&self, from: RouterId, to: RouterId) -> Option<(Vec<LinkKey>, u64)> {
        let domain = self.topo.domain_of(from)?;
        let mut dist: BTreeMap<RouterId, u64> = [(from, 0)].into();
        let mut prev: BTreeMap<RouterId, RouterId> = BTreeMap::new();
        let mut heap = BinaryHeap::from([Reverse((0u64, from))]);
        let mut done = BTreeSet::new();
        while let Some(Reverse((d, u))) = heap.pop() {
            if !done.insert(u) {
                continue;
            }
            if u == to {
                break;
            }
            for l in &self.topo.links {
                if l.a != u && l.b != u {
                    continue;
                }
                let v = l.other(u);
                if self.links_up.get(&l.key()) != Some(&true) || self.topo.domain_of(v) != Some(domain) {
                    continue;
                }
                let nd = d + l.delay_ms;
                if dist.get(&v).is_none_or(|&cur| nd < cur) {
                    dist.insert(v, nd);
                    prev.insert(v, u);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        let total = *dist.get(&to)?;
        let mut links = Vec::new();
        let mut cur = to;
        while cur != from {
            let p = prev[&cur];
            links.push(link_key(p, cur));
            cur = p;
        }
        links.reverse();
        Some((links, total))
    }

    /// True when every adjacency and session agrees with the physical links.
    fn consistent(&self) -> bool {
        let r = |id: &RouterId| &self.routers[id];
        for l in &self.topo.links {
            let up = self.links_up[&l.key()];
            let (ua, ub) = if self.topo.is_inter(l) {
                (r(&l.a).bgp().is_established(l.b), r(&l.b).bgp().is_established(l.a))
            } else {
                (
                    r(&l.a).igp().neighbor_state(l.b) == AdjState::Full,
                    r(&l.b).igp().neighbor_state(l.a) == AdjState::Full,
                )
            };
            if (up && !(ua && ub)) || (!up && (ua || ub)) {
                return false;
            }
        }

        // internal sessions follow physical connectivity inside each domain
        let mut component: BTreeMap<RouterId, RouterId> = self.routers.keys().map(|k| (*k, *k)).collect();
        fn root(c: &BTreeMap<RouterId, RouterId>, mut x: RouterId) -> RouterId {
            while c[&x] != x {
                x = c[&x];
            }
            x
        }
        for l in &self.topo.links {
            if self.links_up[&l.key()] && !self.topo.is_inter(l) {
                let (ra, rb) = (root(&component, l.a), root(&component, l.b));
                component.insert(ra.max(rb), ra.min(rb));
            }
        }
        let peers: Vec<&Router> = self.routers.values().filter(|r| !r.config().stub).collect();
        for (i, a) in peers.iter().enumerate() {
            for b in &peers[i + 1..] {
                if a.config().domain_asn != b.config().domain_asn {
                    continue;
                }
                let (ia, ib) = (a.id(), b.id());
                let meshed = self.topo.mesh_for(ia).is_none_or(|m| m.contains(&ib));
                let connected = root(&component, ia) == root(&component, ib);
                let est = (a.bgp().is_established(ib), b.bgp().is_established(ia));
                let want = meshed && connected;
                if est != (want, want) {
                    return false;
                }
            }
        }
        true
    }

    fn check_router(&self, id: RouterId) -> Result<(), SimError> {
        let Some(r) = self.routers.get(&id) else {
            return Ok(());
        };
        let empty = BTreeSet::new();
        let own = self.domain_prefixes.get(&r.config().domain_asn).unwrap_or(&empty);
        for e in r.table_a().iter() {
            let ok = match e.origin {
                Origin::Intra => own.contains(&e.prefix),
                Origin::AsbrDefault => e.prefix.is_default(),
            };
            if !ok {
                return Err(self.assertion(format!("{id} Table A holds foreign prefix {}", e.prefix)));
            }
        }
        let tb = r.table_b();
        for p in tb.prefixes() {
            if own.contains(&p) {
                return Err(self.assertion(format!("{id} Table B holds own-domain prefix {p}")));
            }
            let cands = tb.candidates(p);
            if cands.iter().filter(|e| e.best).count() != 1 {
                return Err(self.assertion(format!("{id} Table B has no single best for {p}")));
            }
            for e in cands {
                let mut seen = BTreeSet::new();
                if !e.as_path.iter().all(|a| seen.insert(*a)) {
                    return Err(self.assertion(format!("{id} installed a looping path for {p}")));
                }
            }
        }
        Ok(())
    }
}

/// One-line description of a message body for the trace.
pub fn summarize(body: &MessageBody, kind: SendKind) -> String {
    let mut s = String::new();
    match body {
        MessageBody::Hello(h) => {
            let seen: Vec<String> = h.seen_neighbors.iter().map(ToString::to_string).collect();
            let _ = write!(s, "prio={} seen={}", h.priority, dash_join(&seen, ","));
        }
        MessageBody::UpdateA(u) => {
            let label = match kind {
                SendKind::Periodic => "refresh",
                SendKind::Triggered => "flood",
                SendKind::Sync => "sync",
            };
            let lsas: Vec<String> = u.lsas.iter().map(|l| format!("{}#{}", l.origin, l.seq)).collect();
            let _ = write!(s, "{label} lsas={}", dash_join(&lsas, ","));
        }
        MessageBody::UpdateB(u) => {
            let adv: Vec<String> = u
                .advertised
                .iter()
                .map(|c| {
                    let path: Vec<String> = c.as_path.iter().map(u32::to_string).collect();
                    format!(
                        "{}:{}:{}:{}",
                        c.prefix,
                        dash_join(&path, "."),
                        c.local_pref,
                        u8::from(c.learned_internal)
                    )
                })
                .collect();
            let wd: Vec<String> = u.withdrawn.iter().map(ToString::to_string).collect();
            let _ = write!(s, "adv={} wd={}", dash_join(&adv, ";"), dash_join(&wd, ";"));
        }
        MessageBody::Data(d) => {
            let _ = write!(
                s,
                "dest={} hop={} tag={}",
                Ipv4Addr::from(d.dest_addr),
                d.hop_count,
                d.payload_tag
            );
        }
    }
    s
}

fn dash_join(items: &[String], sep: &str) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.join(sep)
    }
}

/// Runs a loaded scenario to `until`, or to its own `run_until` when absent.
pub fn run(scenario: &Scenario, until: Option<SimTime>, seed: u64) -> Result<RunOutput, SimError> {
    Simulation::new(scenario, until.unwrap_or(scenario.run_until), seed)?.finish()
}
