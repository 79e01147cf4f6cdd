//! BIGP packet codec.
//!
//! Every packet is a fixed 14-byte header followed by a message body. All
//! multi-byte fields are big-endian.
//!
//! ```text
//!  0        1        2                 6                 10       12       14
//! +--------+--------+--------//-------+--------//-------+--------+--------+----//
//! |ver|flg | type   |      asn        |    router_id    | length |checksum| body
//! +--------+--------+--------//-------+--------//-------+--------+--------+----//
//! flg: bit3 = CBI, bit2 = CBB, bits1-0 reserved (zero)
//! ```
//!
//! The checksum is the internet checksum over the whole packet with the
//! checksum field zeroed, so a correct packet sums to `0xFFFF`.

use std::fmt;

use thiserror::Error;

use crate::bgp::PathCandidate;
use crate::igp::Lsa;
use crate::types::{Prefix, RouterId, SimTime};

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

const FLAG_CBI: u8 = 0b1000;
const FLAG_CBB: u8 = 0b0100;
const FLAG_RESERVED: u8 = 0b0011;

const LSA_ASBR: u8 = 0b01;
const LSA_STUB: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    UpdateA = 2,
    UpdateB = 3,
    Data = 4,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(MsgType::Hello),
            2 => Some(MsgType::UpdateA),
            3 => Some(MsgType::UpdateB),
            4 => Some(MsgType::Data),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Hello => "HELLO",
            MsgType::UpdateA => "UPDATE_A",
            MsgType::UpdateB => "UPDATE_B",
            MsgType::Data => "DATA",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BigpHeader {
    pub version: u8,
    pub cbi: bool,
    pub cbb: bool,
    pub asn: u32,
    pub msg_type: MsgType,
    pub router_id: RouterId,
    /// Filled in by [`encode`].
    pub payload_len: u16,
    /// Filled in by [`encode`].
    pub checksum: u16,
}

impl BigpHeader {
    /// A version-1 header with length and checksum left for the encoder.
    pub fn new(cbi: bool, cbb: bool, asn: u32, msg_type: MsgType, router_id: RouterId) -> Self {
        BigpHeader {
            version: VERSION,
            cbi,
            cbb,
            asn,
            msg_type,
            router_id,
            payload_len: 0,
            checksum: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub priority: u8,
    pub seen_neighbors: Vec<RouterId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateA {
    pub lsas: Vec<Lsa>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UpdateB {
    pub advertised: Vec<PathCandidate>,
    pub withdrawn: Vec<Prefix>,
}

impl UpdateB {
    pub fn is_empty(&self) -> bool {
        self.advertised.is_empty() && self.withdrawn.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Data {
    pub dest_addr: u32,
    pub hop_count: u8,
    pub payload_tag: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageBody {
    Hello(Hello),
    UpdateA(UpdateA),
    UpdateB(UpdateB),
    Data(Data),
}

impl MessageBody {
    pub fn msg_type(&self) -> MsgType {
        match self {
            MessageBody::Hello(_) => MsgType::Hello,
            MessageBody::UpdateA(_) => MsgType::UpdateA,
            MessageBody::UpdateB(_) => MsgType::UpdateB,
            MessageBody::Data(_) => MsgType::Data,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("header invariant violated: {0}")]
    InvariantViolation(&'static str),
    #[error("encoded length {0} exceeds 65535")]
    LengthOverflow(usize),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    #[error("packet truncated or length mismatch")]
    Truncated,
    #[error("checksum mismatch")]
    BadChecksum,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("invalid care-bit flags {0:#06b}")]
    BadFlags(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("malformed body: {0}")]
    Malformed(&'static str),
}

/// Folded ones'-complement sum of big-endian 16-bit words; an odd trailing
/// byte is padded with zero.
pub fn ones_complement_sum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    let mut chunks = bytes.chunks_exact(2);
    for w in &mut chunks {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
        sum = (sum & 0xffff) + (sum >> 16);
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum as u16
}

pub fn compute_checksum(bytes: &[u8]) -> u16 {
    !ones_complement_sum(bytes)
}

/// Checks that the packet (checksum installed) sums to `0xFFFF`.
pub fn verify_checksum(bytes: &[u8]) -> bool {
    ones_complement_sum(bytes) == 0xffff
}

pub fn encode(header: &BigpHeader, body: &MessageBody) -> Result<Vec<u8>, EncodeError> {
    if header.version != VERSION {
        return Err(EncodeError::InvariantViolation("version must be 1"));
    }
    if header.cbi == header.cbb {
        return Err(EncodeError::InvariantViolation("exactly one care bit must be set"));
    }
    if header.msg_type != body.msg_type() {
        return Err(EncodeError::InvariantViolation("body does not match msg_type"));
    }

    let mut out = Vec::with_capacity(HEADER_LEN + 16);
    let flags = if header.cbi { FLAG_CBI } else { FLAG_CBB };
    out.push(VERSION << 4 | flags);
    out.push(header.msg_type as u8);
    out.extend_from_slice(&header.asn.to_be_bytes());
    out.extend_from_slice(&header.router_id.0.to_be_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]);
    encode_body(body, &mut out)?;

    let body_len = out.len() - HEADER_LEN;
    let len = u16::try_from(body_len).map_err(|_| EncodeError::LengthOverflow(body_len))?;
    out[10..12].copy_from_slice(&len.to_be_bytes());
    let checksum = compute_checksum(&out);
    out[12..14].copy_from_slice(&checksum.to_be_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(BigpHeader, MessageBody), DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated);
    }
    let payload_len = u16::from_be_bytes([bytes[10], bytes[11]]);
    if usize::from(payload_len) != bytes.len() - HEADER_LEN {
        return Err(DecodeError::Truncated);
    }
    if !verify_checksum(bytes) {
        return Err(DecodeError::BadChecksum);
    }
    let version = bytes[0] >> 4;
    if version != VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let flags = bytes[0] & 0x0f;
    let cbi = flags & FLAG_CBI != 0;
    let cbb = flags & FLAG_CBB != 0;
    if flags & FLAG_RESERVED != 0 || cbi == cbb {
        return Err(DecodeError::BadFlags(flags));
    }
    let msg_type = MsgType::from_u8(bytes[1]).ok_or(DecodeError::UnknownMsgType(bytes[1]))?;

    let header = BigpHeader {
        version,
        cbi,
        cbb,
        asn: u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]),
        msg_type,
        router_id: RouterId(u32::from_be_bytes([bytes[6], bytes[7], bytes[8], bytes[9]])),
        payload_len,
        checksum: u16::from_be_bytes([bytes[12], bytes[13]]),
    };

    let mut r = Reader::new(&bytes[HEADER_LEN..]);
    let body = match msg_type {
        MsgType::Hello => MessageBody::Hello(Hello {
            priority: r.u8()?,
            seen_neighbors: r.list(|r| r.u32().map(RouterId))?,
        }),
        MsgType::UpdateA => MessageBody::UpdateA(UpdateA {
            lsas: r.list(read_lsa)?,
        }),
        MsgType::UpdateB => MessageBody::UpdateB(UpdateB {
            advertised: r.list(read_candidate)?,
            withdrawn: r.list(read_prefix)?,
        }),
        MsgType::Data => MessageBody::Data(Data {
            dest_addr: r.u32()?,
            hop_count: r.u8()?,
            payload_tag: r.u32()?,
        }),
    };
    if !r.is_empty() {
        return Err(DecodeError::Malformed("trailing bytes after body"));
    }
    Ok((header, body))
}

/// Canonical byte form of a single LSA, used for database comparisons.
pub fn encode_lsa(lsa: &Lsa) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::new();
    write_lsa(lsa, &mut out)?;
    Ok(out)
}

fn encode_body(body: &MessageBody, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match body {
        MessageBody::Hello(h) => {
            out.push(h.priority);
            write_count(h.seen_neighbors.len(), out)?;
            for id in &h.seen_neighbors {
                out.extend_from_slice(&id.0.to_be_bytes());
            }
        }
        MessageBody::UpdateA(u) => {
            write_count(u.lsas.len(), out)?;
            for lsa in &u.lsas {
                write_lsa(lsa, out)?;
            }
        }
        MessageBody::UpdateB(u) => {
            write_count(u.advertised.len(), out)?;
            for c in &u.advertised {
                write_prefix(&c.prefix, out);
                out.extend_from_slice(&c.local_pref.to_be_bytes());
                out.extend_from_slice(&c.from_peer.0.to_be_bytes());
                out.push(u8::from(c.learned_internal));
                write_count(c.as_path.len(), out)?;
                for asn in &c.as_path {
                    out.extend_from_slice(&asn.to_be_bytes());
                }
            }
            write_count(u.withdrawn.len(), out)?;
            for p in &u.withdrawn {
                write_prefix(p, out);
            }
        }
        MessageBody::Data(d) => {
            out.extend_from_slice(&d.dest_addr.to_be_bytes());
            out.push(d.hop_count);
            out.extend_from_slice(&d.payload_tag.to_be_bytes());
        }
    }
    Ok(())
}

fn write_count(n: usize, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    let n = u16::try_from(n).map_err(|_| EncodeError::LengthOverflow(n))?;
    out.extend_from_slice(&n.to_be_bytes());
    Ok(())
}

fn write_prefix(p: &Prefix, out: &mut Vec<u8>) {
    out.extend_from_slice(&p.addr().to_be_bytes());
    out.push(p.len());
}

fn write_lsa(lsa: &Lsa, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    out.extend_from_slice(&lsa.origin.0.to_be_bytes());
    out.extend_from_slice(&lsa.seq.to_be_bytes());
    let mut flags = 0;
    if lsa.is_asbr {
        flags |= LSA_ASBR;
    }
    if lsa.is_stub {
        flags |= LSA_STUB;
    }
    out.push(flags);
    out.extend_from_slice(&lsa.age_at.as_millis().to_be_bytes());
    write_count(lsa.links.len(), out)?;
    for (id, cost) in &lsa.links {
        out.extend_from_slice(&id.0.to_be_bytes());
        out.extend_from_slice(&cost.to_be_bytes());
    }
    write_count(lsa.prefixes.len(), out)?;
    for p in &lsa.prefixes {
        write_prefix(p, out);
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        if self.buf.len() < N {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("split_at yields N bytes"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take()?))
    }

    fn list<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        let n = self.u16()?;
        // Cap the allocation by what the buffer could possibly hold.
        let mut v = Vec::with_capacity(usize::from(n).min(self.buf.len()));
        for _ in 0..n {
            v.push(item(self)?);
        }
        Ok(v)
    }
}

fn read_prefix(r: &mut Reader<'_>) -> Result<Prefix, DecodeError> {
    let addr = r.u32()?;
    let len = r.u8()?;
    Prefix::new(addr, len).map_err(|_| DecodeError::Malformed("invalid prefix"))
}

fn read_lsa(r: &mut Reader<'_>) -> Result<Lsa, DecodeError> {
    let origin = RouterId(r.u32()?);
    let seq = r.u32()?;
    let flags = r.u8()?;
    if flags & !(LSA_ASBR | LSA_STUB) != 0 {
        return Err(DecodeError::Malformed("unknown LSA flag bits"));
    }
    let age_at = SimTime(r.u64()?);
    let links = r.list(|r| Ok((RouterId(r.u32()?), r.u32()?)))?;
    let prefixes = r.list(read_prefix)?;
    Ok(Lsa {
        origin,
        seq,
        links,
        prefixes,
        is_asbr: flags & LSA_ASBR != 0,
        is_stub: flags & LSA_STUB != 0,
        age_at,
    })
}

fn read_candidate(r: &mut Reader<'_>) -> Result<PathCandidate, DecodeError> {
    let prefix = read_prefix(r)?;
    let local_pref = r.u32()?;
    let from_peer = RouterId(r.u32()?);
    let learned_internal = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(DecodeError::Malformed("boolean byte out of range")),
    };
    let as_path = r.list(|r| r.u32())?;
    Ok(PathCandidate {
        prefix,
        as_path,
        local_pref,
        from_peer,
        learned_internal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hello_packet() -> Vec<u8> {
        let h = BigpHeader::new(true, false, 100, MsgType::Hello, RouterId(1));
        let body = MessageBody::Hello(Hello {
            priority: 1,
            seen_neighbors: vec![],
        });
        encode(&h, &body).unwrap()
    }

    #[test]
    fn flag_byte_layout() {
        let p = hello_packet();
        assert_eq!(p[0], 0x18);
        let h = BigpHeader::new(false, true, 40000, MsgType::Data, RouterId(1));
        let d = MessageBody::Data(Data {
            dest_addr: 0,
            hop_count: 0,
            payload_tag: 0,
        });
        assert_eq!(encode(&h, &d).unwrap()[0], 0x14);
    }

    #[test]
    fn header_fields_are_big_endian() {
        let p = hello_packet();
        assert_eq!(p[1], 1);
        assert_eq!(&p[2..6], &[0, 0, 0, 100]);
        assert_eq!(&p[6..10], &[0, 0, 0, 1]);
        assert_eq!(&p[10..12], &[0, 3]);
        assert_eq!(p.len(), HEADER_LEN + 3);
    }

    #[test]
    fn checksum_basics() {
        assert_eq!(compute_checksum(&[]), 0xffff);
        assert_eq!(compute_checksum(&[0x00, 0x01]), 0xfffe);
        // odd byte is the high half of a zero-padded word
        assert_eq!(compute_checksum(&[0x01]), !0x0100);
        assert!(verify_checksum(&hello_packet()));
    }

    #[test]
    fn encode_rejects_bad_headers() {
        let body = MessageBody::Hello(Hello {
            priority: 0,
            seen_neighbors: vec![],
        });
        let both = BigpHeader::new(true, true, 1, MsgType::Hello, RouterId(1));
        let neither = BigpHeader::new(false, false, 1, MsgType::Hello, RouterId(1));
        let wrong_type = BigpHeader::new(true, false, 1, MsgType::Data, RouterId(1));
        for h in [both, neither, wrong_type] {
            assert!(matches!(encode(&h, &body), Err(EncodeError::InvariantViolation(_))));
        }
        let mut v2 = BigpHeader::new(true, false, 1, MsgType::Hello, RouterId(1));
        v2.version = 2;
        assert!(encode(&v2, &body).is_err());
    }

    #[test]
    fn encode_rejects_oversized_lists() {
        let h = BigpHeader::new(true, false, 1, MsgType::Hello, RouterId(1));
        let body = MessageBody::Hello(Hello {
            priority: 0,
            seen_neighbors: vec![RouterId(1); 70_000],
        });
        assert!(matches!(encode(&h, &body), Err(EncodeError::LengthOverflow(_))));
        // 16-bit count fits, but 4 * 20000 body bytes do not
        let body = MessageBody::Hello(Hello {
            priority: 0,
            seen_neighbors: vec![RouterId(1); 20_000],
        });
        assert!(matches!(encode(&h, &body), Err(EncodeError::LengthOverflow(_))));
    }

    #[test]
    fn decode_errors() {
        let p = hello_packet();
        assert_eq!(decode(&p[..13]), Err(DecodeError::Truncated));
        assert_eq!(decode(&p[..p.len() - 1]), Err(DecodeError::Truncated));

        let mut bad = p.clone();
        bad[15] ^= 0x01;
        assert_eq!(decode(&bad), Err(DecodeError::BadChecksum));

        let fix = |mut b: Vec<u8>| {
            b[12] = 0;
            b[13] = 0;
            let c = compute_checksum(&b);
            b[12..14].copy_from_slice(&c.to_be_bytes());
            b
        };
        let mut v = p.clone();
        v[0] = 0x28;
        assert_eq!(decode(&fix(v)), Err(DecodeError::BadVersion(2)));
        let mut both = p.clone();
        both[0] = 0x1c;
        assert_eq!(decode(&fix(both)), Err(DecodeError::BadFlags(0x0c)));
        let mut reserved = p.clone();
        reserved[0] = 0x19;
        assert_eq!(decode(&fix(reserved)), Err(DecodeError::BadFlags(0x09)));
        let mut ty = p.clone();
        ty[1] = 9;
        assert_eq!(decode(&fix(ty)), Err(DecodeError::UnknownMsgType(9)));
    }

    #[test]
    fn roundtrip_update_b() {
        let h = BigpHeader::new(false, true, 32968, MsgType::UpdateB, RouterId(3));
        let body = MessageBody::UpdateB(UpdateB {
            advertised: vec![PathCandidate {
                prefix: "10.1.0.0/16".parse().unwrap(),
                as_path: vec![32968, 33068],
                local_pref: 100,
                from_peer: RouterId(3),
                learned_internal: false,
            }],
            withdrawn: vec!["10.2.0.0/16".parse().unwrap()],
        });
        let bytes = encode(&h, &body).unwrap();
        let (dh, db) = decode(&bytes).unwrap();
        assert_eq!(db, body);
        assert_eq!(dh.asn, 32968);
        assert!(dh.cbb && !dh.cbi);
        assert_eq!(usize::from(dh.payload_len), bytes.len() - HEADER_LEN);
    }
}
