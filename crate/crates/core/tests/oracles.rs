mod common;

use bigp::bgp::best_path;
use bigp::igp::{run_spf, shortest_paths};
use bigp::router::{NextHop, RouterConfig};
use bigp::wire::{compute_checksum, verify_checksum};
use bigp::RouterId;
use common::*;
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn checksum_oracle_frozen_vectors() {
    // RFC 1071 worked example
    let bytes = [0x00, 0x01, 0xf2, 0x03, 0xf4, 0xf5, 0xf6, 0xf7];
    assert_eq!(checksum_oracle(&bytes), 0x220d);
    assert_eq!(checksum_oracle(&[]), 0xffff);
    assert_eq!(checksum_oracle(&[0xff, 0xff]), 0x0000);
    assert_eq!(checksum_oracle(&[0x12]), !0x1200);
}

#[test]
fn checksum_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for len in 0..200 {
        let buf: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        assert_eq!(compute_checksum(&buf), checksum_oracle(&buf), "len {len}");
    }
}

#[test]
fn checksum_installed_verifies() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for len in (2..64).step_by(2) {
        let mut buf: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        buf[0] = 0;
        buf[1] = 0;
        let c = checksum_oracle(&buf);
        buf[..2].copy_from_slice(&c.to_be_bytes());
        assert!(verify_checksum(&buf));
    }
}

#[test]
fn brute_force_frozen_case() {
    //   1 --4-- 2 --1-- 3
    //    \             /
    //     +----10-----+
    let edges = [(1, 2, 4), (2, 3, 1), (1, 3, 10)];
    let d = brute_force_distances(3, &edges, 1);
    assert_eq!(d.into_iter().collect_vec(), vec![(1, 0), (2, 4), (3, 5)]);
}

#[test]
fn spf_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let n = rng.gen_range(2..=7);
        let edges = random_graph(&mut rng, n);
        let db = lsdb_for(n, &edges);
        for src in 1..=n {
            let oracle = brute_force_distances(n, &edges, src);
            let paths = shortest_paths(&db, RouterId(src));
            for (node, dist) in &oracle {
                assert_eq!(paths[&RouterId(*node)].cost, *dist, "src {src} dst {node} {edges:?}");
            }
            let mut cfg = RouterConfig::new(RouterId(src), 1);
            cfg.prefixes = vec![node_prefix(src)];
            for e in run_spf(&db, RouterId(src), &cfg) {
                let origin = (e.prefix.addr() >> 8) & 0xffff;
                assert_eq!(e.cost, oracle[&origin]);
            }
        }
    }
}

#[test]
fn spf_first_hop_lies_on_a_shortest_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let n = rng.gen_range(2..=7);
        let edges = random_graph(&mut rng, n);
        let db = lsdb_for(n, &edges);
        let paths = shortest_paths(&db, RouterId(1));
        let from_1 = brute_force_distances(n, &edges, 1);
        for dst in 2..=n {
            let NextHop::Router(h) = paths[&RouterId(dst)].next_hop else {
                panic!("remote node routed to self");
            };
            let link = edges
                .iter()
                .find(|&&(a, b, _)| (a, b) == (1.min(h.0), 1.max(h.0)))
                .expect("first hop is a neighbor")
                .2;
            let rest = brute_force_distances(n, &edges, h.0)[&dst];
            assert_eq!(u64::from(link) + rest, from_1[&dst]);
        }
    }
}

#[test]
fn best_path_frozen_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let c = random_candidates(&mut rng, 5);
    let expected = best_path_oracle(&c);
    assert_eq!(best_path(&c), Some(&expected));
    // the sort oracle on hand-built ties
    let mut a = c[0].clone();
    let mut b = c[0].clone();
    a.from_peer = RouterId(9);
    b.from_peer = RouterId(7);
    a.learned_internal = false;
    b.learned_internal = false;
    assert_eq!(best_path_oracle(&[a, b.clone()]), b);
}

#[test]
fn best_path_permutations_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for size in 1..=4 {
        for _ in 0..20 {
            let c = random_candidates(&mut rng, size);
            let want = best_path_oracle(&c);
            for perm in c.iter().cloned().permutations(size) {
                assert_eq!(best_path(&perm), Some(&want));
            }
        }
    }
}

#[test]
fn empty_hello_checksum_matches_oracle() {
    use bigp::wire::{encode, BigpHeader, Hello, MessageBody, MsgType};
    let h = BigpHeader::new(true, false, 100, MsgType::Hello, RouterId(1));
    let body = MessageBody::Hello(Hello {
        priority: 1,
        seen_neighbors: vec![],
    });
    let bytes = encode(&h, &body).unwrap();
    assert_eq!(bytes.len(), 17);
    let mut zeroed = bytes.clone();
    zeroed[12] = 0;
    zeroed[13] = 0;
    let want = checksum_oracle(&zeroed);
    assert_eq!(u16::from_be_bytes([bytes[12], bytes[13]]), want);
    assert_eq!(want, FROZEN_HELLO_CHECKSUM);
}

// hand sum: 0x1801 + 0x0064 + 0x0001 + 0x0003 + 0x0100 = 0x1969, complemented
const FROZEN_HELLO_CHECKSUM: u16 = 0xe696;
