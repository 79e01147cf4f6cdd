//! Identifiers, prefixes and simulated time shared by every module.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// 32-bit router identifier. Scenario files name routers `R<n>`, which maps
/// to id `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouterId(pub u32);

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

impl Serialize for RouterId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid router name `{0}` (expected R<n> with n > 0)")]
pub struct RouterIdError(pub String);

impl FromStr for RouterId {
    type Err = RouterIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('R')
            .ok_or_else(|| RouterIdError(s.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RouterIdError(s.to_string()));
        }
        match digits.parse::<u32>() {
            Ok(n) if n > 0 => Ok(RouterId(n)),
            _ => Err(RouterIdError(s.to_string())),
        }
    }
}

/// An IPv4 prefix with all host bits cleared. Orders by address, then length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    addr: u32,
    len: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixError {
    #[error("prefix length {0} exceeds 32")]
    BadLength(u8),
    #[error("prefix {0}/{1} has host bits set")]
    HostBits(Ipv4Addr, u8),
    #[error("cannot parse prefix `{0}`")]
    Syntax(String),
}

impl Prefix {
    pub const DEFAULT: Prefix = Prefix { addr: 0, len: 0 };

    pub fn new(addr: u32, len: u8) -> Result<Self, PrefixError> {
        if len > 32 {
            return Err(PrefixError::BadLength(len));
        }
        if addr & !mask(len) != 0 {
            return Err(PrefixError::HostBits(Ipv4Addr::from(addr), len));
        }
        Ok(Prefix { addr, len })
    }

    pub fn addr(&self) -> u32 {
        self.addr
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr & mask(self.len) == self.addr
    }
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.addr), self.len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| PrefixError::Syntax(s.to_string()))?;
        let addr: Ipv4Addr = addr.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        let len: u8 = len.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        Prefix::new(u32::from(addr), len)
    }
}

/// Simulated time in whole milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct SimTime(pub u64);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse time `{0}` (seconds with at most 3 decimals)")]
pub struct TimeError(pub String);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn as_millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    /// Parses decimal seconds such as `50`, `50.0` or `0.005` without going
    /// through floating point.
    pub fn parse_secs(s: &str) -> Result<Self, TimeError> {
        let err = || TimeError(s.to_string());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty()
            || !whole.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 3
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let whole: u64 = whole.parse().map_err(|_| err())?;
        let mut ms = 0u64;
        for (i, b) in frac.bytes().enumerate() {
            ms += u64::from(b - b'0') * 10u64.pow(2 - i as u32);
        }
        whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(ms))
            .map(SimTime)
            .ok_or_else(err)
    }
}

impl std::ops::Add<u64> for SimTime {
    type Output = SimTime;

    /// Adds milliseconds.
    fn add(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn router_names() {
        assert_eq!("R12".parse::<RouterId>(), Ok(RouterId(12)));
        assert!("R0".parse::<RouterId>().is_err());
        assert!("X1".parse::<RouterId>().is_err());
        assert!("R".parse::<RouterId>().is_err());
        assert!("R+1".parse::<RouterId>().is_err());
        assert_eq!(RouterId(4).to_string(), "R4");
    }

    #[test]
    fn prefixes() {
        let p: Prefix = "10.4.0.0/16".parse().unwrap();
        assert!(p.contains(u32::from(Ipv4Addr::new(10, 4, 0, 1))));
        assert!(!p.contains(u32::from(Ipv4Addr::new(10, 5, 0, 1))));
        assert_eq!(p.to_string(), "10.4.0.0/16");
        assert!(Prefix::DEFAULT.contains(0xdead_beef));
        assert!(matches!("10.4.0.1/16".parse::<Prefix>(), Err(PrefixError::HostBits(..))));
        assert!(matches!(Prefix::new(0, 33), Err(PrefixError::BadLength(33))));
        assert!(Prefix::new(u32::MAX, 32).is_ok());
    }

    #[test]
    fn time_parsing() {
        assert_eq!(SimTime::parse_secs("50.0"), Ok(SimTime(50_000)));
        assert_eq!(SimTime::parse_secs("0.005"), Ok(SimTime(5)));
        assert_eq!(SimTime::parse_secs("7.25"), Ok(SimTime(7_250)));
        assert_eq!(SimTime::parse_secs("120"), Ok(SimTime(120_000)));
        assert!(SimTime::parse_secs("1.0005").is_err());
        assert!(SimTime::parse_secs("-1").is_err());
        assert!(SimTime::parse_secs(".5").is_err());
        assert_eq!(SimTime(90_005).to_string(), "90.005");
    }
}
