//! Oracles, generators and trace helpers shared by the integration tests.
//! Nothing here calls into the code under test except to build inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use bigp::bgp::PathCandidate;
use bigp::igp::Lsa;
use bigp::sim::{self, RunOutput, Scenario};
use bigp::wire::{BigpHeader, Data, Hello, MessageBody, UpdateA, UpdateB};
use bigp::{Prefix, RouterId, SimTime};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn all_scenarios() -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(scenario_dir())
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    v.sort();
    v
}

pub fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_dir().join(name)).expect("scenario file");
    sim::load_scenario(&text).expect("valid scenario")
}

pub fn run(name: &str) -> RunOutput {
    sim::run(&load(name), None, 0).expect("run succeeds")
}

// ---------------------------------------------------------------- checksum

/// Textbook internet checksum: add 16-bit words in a wide accumulator,
/// reduce modulo 0xFFFF at the end, complement. Even and odd positions are
/// accumulated separately to avoid sharing any code shape with the library.
pub fn checksum_oracle(bytes: &[u8]) -> u16 {
    let mut hi: u64 = 0;
    let mut lo: u64 = 0;
    for (i, b) in bytes.iter().enumerate() {
        if i % 2 == 0 {
            hi += u64::from(*b);
        } else {
            lo += u64::from(*b);
        }
    }
    let mut total = hi * 256 + lo;
    while total > 0xffff {
        total = (total & 0xffff) + (total >> 16);
    }
    !(total as u16)
}

// --------------------------------------------------------------------- SPF

/// Random connected undirected graph on `n` nodes (ids 1..=n): a random
/// spanning tree plus extra edges, costs in [1, 20].
pub fn random_graph<R: Rng>(rng: &mut R, n: u32) -> Vec<(u32, u32, u32)> {
    let mut order: Vec<u32> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = BTreeMap::new();
    for i in 1..order.len() {
        let a = order[i];
        let b = order[rng.gen_range(0..i)];
        edges.insert((a.min(b), a.max(b)), rng.gen_range(1..=20));
    }
    let extra = rng.gen_range(0..=n as usize);
    for _ in 0..extra {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            edges.insert((a.min(b), a.max(b)), rng.gen_range(1..=20));
        }
    }
    edges.into_iter().map(|((a, b), c)| (a, b, c)).collect()
}

/// Minimum cost from `src` to every node by enumerating every simple path.
pub fn brute_force_distances(n: u32, edges: &[(u32, u32, u32)], src: u32) -> BTreeMap<u32, u64> {
    let mut adj: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for &(a, b, c) in edges {
        adj.entry(a).or_default().push((b, c));
        adj.entry(b).or_default().push((a, c));
    }
    let mut best = BTreeMap::new();
    fn walk(
        u: u32,
        cost: u64,
        adj: &BTreeMap<u32, Vec<(u32, u32)>>,
        on_path: &mut BTreeSet<u32>,
        best: &mut BTreeMap<u32, u64>,
    ) {
        let e = best.entry(u).or_insert(u64::MAX);
        *e = (*e).min(cost);
        for &(v, c) in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if on_path.insert(v) {
                walk(v, cost + u64::from(c), adj, on_path, best);
                on_path.remove(&v);
            }
        }
    }
    let mut on_path = BTreeSet::from([src]);
    walk(src, 0, &adj, &mut on_path, &mut best);
    assert!((1..=n).all(|i| best.contains_key(&i)), "graph must be connected");
    best
}

/// One LSA per node, each listing its neighbors and one /24 prefix.
pub fn lsdb_for(n: u32, edges: &[(u32, u32, u32)]) -> bigp::igp::Lsdb {
    let mut db = bigp::igp::Lsdb::new();
    for id in 1..=n {
        let links = edges
            .iter()
            .filter_map(|&(a, b, c)| match (a == id, b == id) {
                (true, _) => Some((RouterId(b), c)),
                (_, true) => Some((RouterId(a), c)),
                _ => None,
            })
            .collect();
        db.install(Lsa {
            origin: RouterId(id),
            seq: 1,
            links,
            prefixes: vec![node_prefix(id)],
            is_asbr: false,
            is_stub: false,
            age_at: SimTime::ZERO,
        });
    }
    db
}

pub fn node_prefix(id: u32) -> Prefix {
    Prefix::new(0x0a00_0000 | (id << 8), 24).unwrap()
}

// --------------------------------------------------------------- best path

/// Sort by the rule tuple and take the head.
pub fn best_path_oracle(cands: &[PathCandidate]) -> PathCandidate {
    let mut v = cands.to_vec();
    v.sort_by_key(|c| {
        (
            std::cmp::Reverse(c.local_pref),
            c.as_path.len(),
            c.learned_internal,
            c.from_peer,
        )
    });
    v[0].clone()
}

/// Candidates with small value ranges so ties on every rule are common.
/// Peer ids are distinct, as they are in a real table.
pub fn random_candidates<R: Rng>(rng: &mut R, size: usize) -> Vec<PathCandidate> {
    let mut peers: Vec<u32> = (1..=12).collect();
    peers.shuffle(rng);
    (0..size)
        .map(|i| {
            let len = rng.gen_range(1..=3);
            PathCandidate {
                prefix: Prefix::new(0x0a04_0000, 16).unwrap(),
                as_path: (0..len).map(|k| 40_000 + k).collect(),
                local_pref: [100, 100, 200][rng.gen_range(0..3)],
                from_peer: RouterId(peers[i]),
                learned_internal: rng.gen_bool(0.5),
            }
        })
        .collect()
}

// ------------------------------------------------------------------- codec

fn random_prefix<R: Rng>(rng: &mut R) -> Prefix {
    let len = rng.gen_range(0..=32u8);
    let mask = if len == 0 { 0 } else { u32::MAX << (32 - u32::from(len)) };
    Prefix::new(rng.gen::<u32>() & mask, len).unwrap()
}

fn random_lsa<R: Rng>(rng: &mut R) -> Lsa {
    Lsa {
        origin: RouterId(rng.gen()),
        seq: rng.gen(),
        links: (0..rng.gen_range(0..5))
            .map(|_| (RouterId(rng.gen()), rng.gen()))
            .collect(),
        prefixes: (0..rng.gen_range(0..4)).map(|_| random_prefix(rng)).collect(),
        is_asbr: rng.gen(),
        is_stub: rng.gen(),
        age_at: SimTime(rng.gen()),
    }
}

fn random_path_candidate<R: Rng>(rng: &mut R) -> PathCandidate {
    PathCandidate {
        prefix: random_prefix(rng),
        as_path: (0..rng.gen_range(0..6)).map(|_| rng.gen()).collect(),
        local_pref: rng.gen(),
        from_peer: RouterId(rng.gen()),
        learned_internal: rng.gen(),
    }
}

/// A well-formed header/body pair with every field drawn at random.
pub fn random_packet<R: Rng>(rng: &mut R) -> (BigpHeader, MessageBody) {
    let body = match rng.gen_range(0..4) {
        0 => MessageBody::Hello(Hello {
            priority: rng.gen(),
            seen_neighbors: (0..rng.gen_range(0..8)).map(|_| RouterId(rng.gen())).collect(),
        }),
        1 => MessageBody::UpdateA(UpdateA {
            lsas: (0..rng.gen_range(0..4)).map(|_| random_lsa(rng)).collect(),
        }),
        2 => MessageBody::UpdateB(UpdateB {
            advertised: (0..rng.gen_range(0..4)).map(|_| random_path_candidate(rng)).collect(),
            withdrawn: (0..rng.gen_range(0..4)).map(|_| random_prefix(rng)).collect(),
        }),
        _ => MessageBody::Data(Data {
            dest_addr: rng.gen(),
            hop_count: rng.gen(),
            payload_tag: rng.gen(),
        }),
    };
    let cbi = rng.gen();
    let header = BigpHeader::new(cbi, !cbi, rng.gen(), body.msg_type(), RouterId(rng.gen()));
    (header, body)
}

/// Damages a packet in one of several ways. Some mutations repair the
/// checksum afterwards so that body parsing is exercised too.
pub fn mutate<R: Rng>(rng: &mut R, bytes: &[u8]) -> Vec<u8> {
    let mut m = bytes.to_vec();
    match rng.gen_range(0..6) {
        0 => {
            let i = rng.gen_range(0..m.len());
            m[i] ^= 1 << rng.gen_range(0..8);
        }
        1 => {
            let i = rng.gen_range(0..m.len());
            m[i] = rng.gen();
        }
        2 => m.truncate(rng.gen_range(0..m.len())),
        3 => m.extend((0..rng.gen_range(1..4)).map(|_| rng.gen::<u8>())),
        4 => {
            // damage the body and fix up the checksum
            let i = rng.gen_range(0..m.len());
            m[i] = rng.gen();
            if m.len() >= 14 {
                m[12] = 0;
                m[13] = 0;
                let c = checksum_oracle(&m);
                m[12..14].copy_from_slice(&c.to_be_bytes());
            }
        }
        _ => {
            // swap two aligned words: the ones'-complement sum cannot tell
            let words = m.len() / 2;
            let a = rng.gen_range(0..words);
            let b = rng.gen_range(0..words);
            m.swap(2 * a, 2 * b);
            m.swap(2 * a + 1, 2 * b + 1);
        }
    }
    m
}

// ------------------------------------------------------------------ traces

/// A parsed `t=.. A->B TYPE asn=.. cbi=. cbb=. ...` trace line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketLine {
    pub t: u64,
    pub from: String,
    pub to: String,
    pub msg_type: String,
    pub asn: u32,
    pub cbi: bool,
    pub cbb: bool,
    pub summary: String,
}

pub fn packet_lines(trace: &[String]) -> Vec<PacketLine> {
    trace
        .iter()
        .filter_map(|l| {
            let mut it = l.splitn(7, ' ');
            let t = it.next()?.strip_prefix("t=")?.parse().ok()?;
            let (from, to) = it.next()?.split_once("->")?;
            let msg_type = it.next()?.to_string();
            let asn = it.next()?.strip_prefix("asn=")?.parse().ok()?;
            let cbi = it.next()?.strip_prefix("cbi=")? == "1";
            let cbb = it.next()?.strip_prefix("cbb=")? == "1";
            Some(PacketLine {
                t,
                from: from.to_string(),
                to: to.to_string(),
                msg_type,
                asn,
                cbi,
                cbb,
                summary: it.next().unwrap_or("").to_string(),
            })
        })
        .collect()
}

/// `(prefix, as_path, learned_internal)` for every advertised item of an
/// UPDATE_B summary.
pub fn update_b_items(summary: &str) -> Vec<(String, Vec<u32>, bool)> {
    let adv = summary
        .split(' ')
        .find_map(|f| f.strip_prefix("adv="))
        .unwrap_or("-");
    if adv == "-" {
        return Vec::new();
    }
    adv.split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let path = if parts[1] == "-" {
                Vec::new()
            } else {
                parts[1].split('.').map(|a| a.parse().unwrap()).collect()
            };
            (parts[0].to_string(), path, parts[3] == "1")
        })
        .collect()
}

/// `(origin, seq)` pairs of an UPDATE_A summary.
pub fn update_a_lsas(summary: &str) -> Vec<(String, u32)> {
    let lsas = summary
        .split(' ')
        .find_map(|f| f.strip_prefix("lsas="))
        .unwrap_or("-");
    if lsas == "-" {
        return Vec::new();
    }
    lsas.split(',')
        .map(|l| {
            let (o, s) = l.split_once('#').unwrap();
            (o.to_string(), s.parse().unwrap())
        })
        .collect()
}
