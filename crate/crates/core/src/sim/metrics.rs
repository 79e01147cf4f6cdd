use std::collections::BTreeMap;

use serde::Serialize;

use crate::types::RouterId;
use crate::wire::MsgType;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MsgCounts {
    pub hello: u64,
    pub update_a: u64,
    pub update_b: u64,
    pub data: u64,
}

impl MsgCounts {
    pub fn bump(&mut self, t: MsgType) {
        match t {
            MsgType::Hello => self.hello += 1,
            MsgType::UpdateA => self.update_a += 1,
            MsgType::UpdateB => self.update_b += 1,
            MsgType::Data => self.data += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.hello + self.update_a + self.update_b + self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub phase: usize,
    pub cause: String,
    pub start_s: f64,
    pub converged: bool,
    /// Seconds from the phase start to its converged instant.
    pub convergence_time_s: Option<f64>,
    pub msg_counts: MsgCounts,
    pub drops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PingRecord {
    pub tag: u32,
    pub t: f64,
    pub src: RouterId,
    pub dest: String,
    pub delivered: bool,
    pub hops: Vec<RouterId>,
    pub drop_reason: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub phases: Vec<PhaseMetrics>,
    pub msg_counts: MsgCounts,
    pub pings: Vec<PingRecord>,
    pub drops: BTreeMap<String, u64>,
}
