//! Deterministic discrete-event simulation of a BIGP network.

mod metrics;
mod scenario;
mod world;

pub use metrics::{Metrics, MsgCounts, PhaseMetrics, PingRecord};
pub use scenario::{
    link_key, load_scenario, validate, Action, LinkSpec, Params, Scenario, ScenarioError,
    ScheduledAction, Topology,
};
pub use world::{run, summarize, RunOutput, SimError, Simulation};
