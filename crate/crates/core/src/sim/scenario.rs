//! Line-oriented scenario files.
//!
//! ```text
//! param asn_split 32768
//! node R1 asn 200 prefix 10.1.0.0/16 [stub] [priority N] [refresh N]
//! link R1 R3 cost 10 delay_ms 5
//! at 50.0 link_down R1 R3
//! at 80.0 ping R2 10.4.0.1
//! run_until 200.0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::router::{RouterConfig, DEFAULT_ASN_SPLIT};
use crate::types::{Prefix, RouterId, SimTime};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{entity}: {rule}")]
    Validation { entity: String, rule: String },
}

fn parse_err(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        reason: reason.into(),
    }
}

fn invalid(entity: impl ToString, rule: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        entity: entity.to_string(),
        rule: rule.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    pub asn_split: u32,
    pub quiet_window_ms: u64,
    pub keepalive_s: u32,
    pub hold_s: u32,
    /// Upper bound of a uniformly random extra delivery delay; 0 disables it.
    pub jitter_ms: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            asn_split: DEFAULT_ASN_SPLIT,
            quiet_window_ms: 5_000,
            keepalive_s: 30,
            hold_s: 90,
            jitter_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: RouterId,
    pub b: RouterId,
    pub cost: u32,
    pub delay_ms: u64,
    pub segment: Option<u32>,
}

impl LinkSpec {
    pub fn key(&self) -> (RouterId, RouterId) {
        link_key(self.a, self.b)
    }

    pub fn other(&self, end: RouterId) -> RouterId {
        if end == self.a {
            self.b
        } else {
            self.a
        }
    }
}

pub fn link_key(a: RouterId, b: RouterId) -> (RouterId, RouterId) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub nodes: Vec<RouterConfig>,
    pub links: Vec<LinkSpec>,
    /// Explicit internal peerings; a domain without any keeps the automatic
    /// full mesh.
    pub sessions: Vec<(RouterId, RouterId)>,
    pub params: Params,
}

impl Topology {
    pub fn node(&self, id: RouterId) -> Option<&RouterConfig> {
        self.nodes.iter().find(|n| n.router_id == id)
    }

    pub fn link(&self, a: RouterId, b: RouterId) -> Option<&LinkSpec> {
        let k = link_key(a, b);
        self.links.iter().find(|l| l.key() == k)
    }

    pub fn domain_of(&self, id: RouterId) -> Option<u32> {
        self.node(id).map(|n| n.domain_asn)
    }

    pub fn is_inter(&self, link: &LinkSpec) -> bool {
        self.domain_of(link.a) != self.domain_of(link.b)
    }

    /// Internal peers of `id` when its domain uses explicit sessions.
    pub fn mesh_for(&self, id: RouterId) -> Option<BTreeSet<RouterId>> {
        let domain = self.domain_of(id)?;
        let in_domain: Vec<_> = self
            .sessions
            .iter()
            .filter(|(a, _)| self.domain_of(*a) == Some(domain))
            .collect();
        if in_domain.is_empty() {
            return None;
        }
        Some(
            in_domain
                .iter()
                .filter_map(|&&(a, b)| match (a == id, b == id) {
                    (true, _) => Some(b),
                    (_, true) => Some(a),
                    _ => None,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    LinkDown(RouterId, RouterId),
    LinkUp(RouterId, RouterId),
    Ping { src: RouterId, dest: u32 },
    SetLocalPref { router: RouterId, peer: RouterId, local_pref: u32 },
}

impl Action {
    /// Topology or policy changes start a new convergence phase.
    pub fn opens_phase(&self) -> bool {
        !matches!(self, Action::Ping { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            Action::LinkDown(a, b) => format!("link_down {a} {b}"),
            Action::LinkUp(a, b) => format!("link_up {a} {b}"),
            Action::Ping { src, dest } => format!("ping {src} {}", Ipv4Addr::from(*dest)),
            Action::SetLocalPref {
                router,
                peer,
                local_pref,
            } => format!("set_local_pref {router} {peer} {local_pref}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledAction {
    pub at: SimTime,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub topology: Topology,
    pub actions: Vec<ScheduledAction>,
    pub run_until: SimTime,
}

struct Tokens<'a> {
    line: usize,
    words: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ScenarioError> {
        self.words
            .next()
            .ok_or_else(|| parse_err(self.line, format!("expected {what}")))
    }

    fn router(&mut self) -> Result<RouterId, ScenarioError> {
        let w = self.next("router name")?;
        w.parse().map_err(|e: crate::types::RouterIdError| parse_err(self.line, e.to_string()))
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ScenarioError> {
        let w = self.next(what)?;
        w.parse()
            .map_err(|_| parse_err(self.line, format!("invalid {what} `{w}`")))
    }

    fn time(&mut self) -> Result<SimTime, ScenarioError> {
        let w = self.next("time")?;
        SimTime::parse_secs(w).map_err(|e| parse_err(self.line, e.to_string()))
    }

    fn prefix(&mut self) -> Result<Prefix, ScenarioError> {
        let w = self.next("prefix")?;
        w.parse().map_err(|e: crate::types::PrefixError| parse_err(self.line, e.to_string()))
    }

    fn ip(&mut self) -> Result<u32, ScenarioError> {
        let w = self.next("address")?;
        w.parse::<Ipv4Addr>()
            .map(u32::from)
            .map_err(|_| parse_err(self.line, format!("invalid address `{w}`")))
    }

    fn end(&mut self) -> Result<(), ScenarioError> {
        match self.words.next() {
            None => Ok(()),
            Some(w) => Err(parse_err(self.line, format!("unexpected `{w}`"))),
        }
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut params = Params::default();
    let mut nodes: Vec<RouterConfig> = Vec::new();
    let mut links = Vec::new();
    let mut sessions = Vec::new();
    let mut actions = Vec::new();
    let mut run_until = None;

    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut t = Tokens {
            line: i + 1,
            words: content.split_whitespace().peekable(),
        };
        let Some(kw) = t.words.next() else { continue };
        match kw {
            "param" => {
                let name = t.next("parameter name")?;
                match name {
                    "asn_split" => params.asn_split = t.num("asn_split")?,
                    "quiet_window" => params.quiet_window_ms = t.time()?.as_millis(),
                    "keepalive_s" => params.keepalive_s = t.num("keepalive_s")?,
                    "hold_s" => params.hold_s = t.num("hold_s")?,
                    "jitter_ms" => params.jitter_ms = t.num("jitter_ms")?,
                    other => return Err(parse_err(t.line, format!("unknown parameter `{other}`"))),
                }
                t.end()?;
            }
            "node" => {
                let id = t.router()?;
                let mut cfg = RouterConfig::new(id, 0);
                let mut asn = None;
                while let Some(w) = t.words.next() {
                    match w {
                        "asn" => asn = Some(t.num("asn")?),
                        "prefix" => cfg.prefixes.push(t.prefix()?),
                        "stub" => cfg.stub = true,
                        "priority" => cfg.priority = t.num("priority")?,
                        "refresh" => cfg.refresh_interval_s = t.num("refresh")?,
                        "hello" => cfg.hello_interval_s = t.num("hello")?,
                        "dead" => cfg.dead_interval_s = t.num("dead")?,
                        other => {
                            return Err(parse_err(t.line, format!("unknown node attribute `{other}`")))
                        }
                    }
                }
                cfg.domain_asn = asn.ok_or_else(|| parse_err(t.line, "node needs `asn`"))?;
                nodes.push(cfg);
            }
            "link" => {
                let a = t.router()?;
                let b = t.router()?;
                let mut cost = 10;
                let mut delay = None;
                let mut segment = None;
                while let Some(w) = t.words.next() {
                    match w {
                        "cost" => cost = t.num("cost")?,
                        "delay_ms" => delay = Some(t.num("delay_ms")?),
                        "segment" => segment = Some(t.num("segment")?),
                        other => {
                            return Err(parse_err(t.line, format!("unknown link attribute `{other}`")))
                        }
                    }
                }
                let delay_ms = delay.ok_or_else(|| parse_err(t.line, "link needs `delay_ms`"))?;
                links.push(LinkSpec {
                    a,
                    b,
                    cost,
                    delay_ms,
                    segment,
                });
            }
            "session" => {
                let a = t.router()?;
                let b = t.router()?;
                t.end()?;
                sessions.push((a, b));
            }
            "at" => {
                let at = t.time()?;
                let action = match t.next("action")? {
                    "link_down" => Action::LinkDown(t.router()?, t.router()?),
                    "link_up" => Action::LinkUp(t.router()?, t.router()?),
                    "ping" => Action::Ping {
                        src: t.router()?,
                        dest: t.ip()?,
                    },
                    "set_local_pref" => Action::SetLocalPref {
                        router: t.router()?,
                        peer: t.router()?,
                        local_pref: t.num("local_pref")?,
                    },
                    other => return Err(parse_err(t.line, format!("unknown action `{other}`"))),
                };
                t.end()?;
                actions.push(ScheduledAction { at, action });
            }
            "run_until" => {
                run_until = Some(t.time()?);
                t.end()?;
            }
            other => return Err(parse_err(t.line, format!("unknown directive `{other}`"))),
        }
    }

    for n in &mut nodes {
        n.asn_split = params.asn_split;
    }
    let scenario = Scenario {
        topology: Topology {
            nodes,
            links,
            sessions,
            params,
        },
        actions,
        run_until: run_until.ok_or_else(|| invalid("scenario", "missing run_until"))?,
    };
    validate(&scenario)?;
    Ok(scenario)
}

pub fn validate(s: &Scenario) -> Result<(), ScenarioError> {
    let topo = &s.topology;
    if topo.params.asn_split < 2 || topo.params.asn_split > u32::MAX / 2 {
        return Err(invalid("param asn_split", "must be in [2, 2^31)"));
    }
    if topo.params.keepalive_s == 0 || topo.params.hold_s <= topo.params.keepalive_s {
        return Err(invalid("param hold_s", "hold time must exceed a positive keepalive"));
    }

    let mut ids = BTreeSet::new();
    let mut prefix_owner: BTreeMap<Prefix, u32> = BTreeMap::new();
    for n in &topo.nodes {
        if !ids.insert(n.router_id) {
            return Err(invalid(n.router_id, "duplicate router id"));
        }
        n.validate().map_err(|e| invalid(n.router_id, e.to_string()))?;
        for p in &n.prefixes {
            if p.is_default() {
                return Err(invalid(n.router_id, "the default prefix cannot be originated"));
            }
            match prefix_owner.insert(*p, n.domain_asn) {
                Some(d) if d != n.domain_asn => {
                    return Err(invalid(p, "prefix originated in two domains"));
                }
                _ => {}
            }
        }
    }

    let mut seen = BTreeSet::new();
    for l in &topo.links {
        let name = format!("link {} {}", l.a, l.b);
        for end in [l.a, l.b] {
            if topo.node(end).is_none() {
                return Err(invalid(&name, format!("unknown router {end}")));
            }
        }
        if l.a == l.b {
            return Err(invalid(&name, "link endpoints must differ"));
        }
        if !seen.insert(l.key()) {
            return Err(invalid(&name, "duplicate link"));
        }
        if l.delay_ms == 0 {
            return Err(invalid(&name, "delay must be positive"));
        }
        if l.cost == 0 {
            return Err(invalid(&name, "cost must be at least 1"));
        }
        if topo.is_inter(l) {
            if [l.a, l.b].iter().any(|e| topo.node(*e).is_some_and(|n| n.stub)) {
                return Err(invalid(&name, "stub routers cannot have inter-domain links"));
            }
            if l.segment.is_some() {
                return Err(invalid(&name, "inter-domain links cannot join a segment"));
            }
        }
    }

    for &(a, b) in &topo.sessions {
        let name = format!("session {a} {b}");
        let (Some(na), Some(nb)) = (topo.node(a), topo.node(b)) else {
            return Err(invalid(&name, "unknown router"));
        };
        if a == b || na.domain_asn != nb.domain_asn {
            return Err(invalid(&name, "sessions join two distinct routers of one domain"));
        }
        if na.stub || nb.stub {
            return Err(invalid(&name, "stub routers do not run internal sessions"));
        }
    }

    for sa in &s.actions {
        let name = format!("at {} {}", sa.at, sa.action.describe());
        match &sa.action {
            Action::LinkDown(a, b) | Action::LinkUp(a, b) => {
                if topo.link(*a, *b).is_none() {
                    return Err(invalid(&name, "no such link"));
                }
            }
            Action::Ping { src, .. } => {
                if topo.node(*src).is_none() {
                    return Err(invalid(&name, "unknown router"));
                }
            }
            Action::SetLocalPref { router, peer, .. } => match topo.link(*router, *peer) {
                Some(l) if topo.is_inter(l) => {}
                _ => return Err(invalid(&name, "no inter-domain link to that peer")),
            },
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG6: &str = "\
# two providers
node R1 asn 200 prefix 10.1.0.0/16
node R2 asn 200 prefix 10.2.0.0/16
node R3 asn 200 prefix 10.3.0.0/16
node R4 asn 300 prefix 10.4.0.0/16
link R2 R1 cost 10 delay_ms 5
link R1 R3 cost 10 delay_ms 5
link R3 R4 cost 10 delay_ms 5
at 20.0 ping R2 10.4.0.1
run_until 200.0
";

    #[test]
    fn figure6_document() {
        let s = load_scenario(FIG6).unwrap();
        assert_eq!(s.topology.nodes.len(), 4);
        assert_eq!(s.topology.links.len(), 3);
        assert_eq!(s.actions.len(), 1);
        assert_eq!(s.run_until, SimTime::from_secs(200));
        assert!(s.topology.is_inter(s.topology.link(RouterId(3), RouterId(4)).unwrap()));
    }

    fn rule_of(text: &str) -> ScenarioError {
        load_scenario(text).unwrap_err()
    }

    #[test]
    fn validation_errors() {
        let e = rule_of("node R1 asn 40000 prefix 10.1.0.0/16\nrun_until 1\n");
        assert!(matches!(e, ScenarioError::Validation { .. }), "{e}");
        let e = rule_of("node R1 asn 1\nnode R1 asn 1\nrun_until 1\n");
        assert!(e.to_string().contains("duplicate router id"), "{e}");
        let e = rule_of("node R1 asn 1 refresh 90\nrun_until 1\n");
        assert!(e.to_string().contains("refresh"), "{e}");
        let e = rule_of("node R1 asn 1\nlink R1 R2 delay_ms 1\nrun_until 1\n");
        assert!(e.to_string().contains("unknown router R2"), "{e}");
        let e = rule_of("node R1 asn 1\nnode R2 asn 1\nlink R1 R2 delay_ms 0\nrun_until 1\n");
        assert!(e.to_string().contains("delay"), "{e}");
        let e = rule_of("node R1 asn 1\nnode R2 asn 1\nat 5 link_down R1 R2\nrun_until 9\n");
        assert!(e.to_string().contains("no such link"), "{e}");
        let e = rule_of("node R1 asn 1 stub\nnode R2 asn 2\nlink R1 R2 delay_ms 1\nrun_until 1\n");
        assert!(e.to_string().contains("stub"), "{e}");
        let e = rule_of("node R1 asn 1 prefix 10.0.0.0/8\nnode R2 asn 2 prefix 10.0.0.0/8\nrun_until 1\n");
        assert!(e.to_string().contains("two domains"), "{e}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = rule_of("node R1 asn 1\nlink R1 R2 cost 10\n");
        assert_eq!(
            e,
            ScenarioError::Parse {
                line: 2,
                reason: "link needs `delay_ms`".into()
            }
        );
        assert!(matches!(rule_of("frobnicate\n"), ScenarioError::Parse { line: 1, .. }));
        assert!(matches!(rule_of("node X1 asn 1\n"), ScenarioError::Parse { line: 1, .. }));
        assert!(matches!(rule_of("at 1.2345 ping R1 10.0.0.1\n"), ScenarioError::Parse { .. }));
        assert!(matches!(rule_of("node R1 asn 1\n"), ScenarioError::Validation { .. }));
    }

    #[test]
    fn explicit_sessions() {
        let s = load_scenario(
            "node R1 asn 1\nnode R2 asn 1\nnode R3 asn 1\nnode R9 asn 2\nsession R1 R2\nrun_until 1\n",
        )
        .unwrap();
        let t = &s.topology;
        assert_eq!(t.mesh_for(RouterId(1)), Some([RouterId(2)].into()));
        assert_eq!(t.mesh_for(RouterId(3)), Some(BTreeSet::new()));
        assert_eq!(t.mesh_for(RouterId(9)), None);
    }
}
