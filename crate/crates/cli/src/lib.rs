//! `bigp run`: load a scenario, simulate it, and report tables, per-phase
//! convergence, metrics and traces.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use bigp::sim::{self, Metrics, ScenarioError, SimError, Simulation};
use bigp::{RouterId, SimTime};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricsFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub scenario_path: PathBuf,
    pub until_override: Option<SimTime>,
    pub seed: u64,
    pub table_dumps: Vec<(RouterId, SimTime)>,
    pub trace_path: Option<PathBuf>,
    pub metrics_format: Option<MetricsFormat>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Scenario {
        path: PathBuf,
        #[source]
        source: ScenarioError,
    },
    #[error("table dump at {0} is after the end of the run")]
    DumpAfterEnd(SimTime),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(SimError::RuntimeAssertion { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bigp", version, about = "Simulate BIGP routing scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Stop at this simulated time (seconds) instead of the scenario's run_until.
    #[arg(long, value_parser = parse_time)]
    until: Option<SimTime>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print both routing tables of a router at a time, e.g. R3@100.0.
    #[arg(long = "dump-tables", value_parser = parse_dump)]
    dump_tables: Vec<(RouterId, SimTime)>,
    /// Write the event trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long = "metrics-format", value_enum)]
    metrics_format: Option<MetricsFormat>,
}

fn parse_time(s: &str) -> Result<SimTime, String> {
    SimTime::parse_secs(s).map_err(|e| e.to_string())
}

fn parse_dump(s: &str) -> Result<(RouterId, SimTime), String> {
    let (r, t) = s
        .split_once('@')
        .ok_or_else(|| format!("expected ROUTER@TIME, got `{s}`"))?;
    Ok((r.parse().map_err(|e| format!("{e}"))?, parse_time(t)?))
}

impl From<RunArgs> for RunRequest {
    fn from(a: RunArgs) -> Self {
        RunRequest {
            scenario_path: a.scenario,
            until_override: a.until,
            seed: a.seed,
            table_dumps: a.dump_tables,
            trace_path: a.trace,
            metrics_format: a.metrics_format,
        }
    }
}

/// Renders a router's tables from a live simulation.
pub fn dump_tables(sim: &Simulation, router: RouterId) -> Result<String, CliError> {
    Ok(sim.dump_tables(router)?)
}

pub fn metrics_out(metrics: &Metrics, format: MetricsFormat) -> String {
    match format {
        MetricsFormat::Json => {
            let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize");
            s.push('\n');
            s
        }
        MetricsFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "phase",
                "converged",
                "convergence_time_s",
                "hello",
                "update_a",
                "update_b",
                "data",
                "drops",
            ])
            .expect("in-memory write");
            for p in &metrics.phases {
                let c = &p.msg_counts;
                w.write_record([
                    p.phase.to_string(),
                    p.converged.to_string(),
                    p.convergence_time_s.map(|t| t.to_string()).unwrap_or_default(),
                    c.hello.to_string(),
                    c.update_a.to_string(),
                    c.update_b.to_string(),
                    c.data.to_string(),
                    p.drops.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
        }
    }
}

fn phase_summary(metrics: &Metrics) -> String {
    let mut s = String::new();
    for p in &metrics.phases {
        let status = match p.convergence_time_s {
            Some(t) => format!("converged in {t:.3} s"),
            None => "NOT CONVERGED".to_string(),
        };
        s.push_str(&format!(
            "phase {} at {:.3} s ({}): {}\n",
            p.phase, p.start_s, p.cause, status
        ));
    }
    s
}

/// Runs one request, writing human output to `out`.
pub fn execute(req: &RunRequest, out: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |path: &PathBuf| {
        let path = path.clone();
        move |source| CliError::Io { path, source }
    };
    let text = fs::read_to_string(&req.scenario_path).map_err(io_err(&req.scenario_path))?;
    let scenario = sim::load_scenario(&text).map_err(|source| CliError::Scenario {
        path: req.scenario_path.clone(),
        source,
    })?;
    let until = req.until_override.unwrap_or(scenario.run_until);
    let mut dumps = req.table_dumps.clone();
    dumps.sort_by_key(|(r, t)| (*t, *r));
    if let Some((_, t)) = dumps.iter().find(|(_, t)| *t > until) {
        return Err(CliError::DumpAfterEnd(*t));
    }

    let mut simulation = Simulation::new(&scenario, until, req.seed)?;
    let stdout_err = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    for (router, t) in dumps {
        simulation.run_to(t)?;
        let text = dump_tables(&simulation, router)?;
        write!(out, "== {router} @ {t}\n{text}").map_err(stdout_err)?;
    }
    let result = simulation.finish()?;

    if let Some(path) = &req.trace_path {
        fs::write(path, result.trace_text()).map_err(io_err(path))?;
    }
    out.write_all(phase_summary(&result.metrics).as_bytes())
        .map_err(stdout_err)?;
    if let Some(f) = req.metrics_format {
        out.write_all(metrics_out(&result.metrics, f).as_bytes())
            .map_err(stdout_err)?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs. Returns the
/// process exit code.
pub fn run_cmd<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let Command::Run(args) = cli.command;
    match execute(&RunRequest::from(args), out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_flag_parsing() {
        assert_eq!(parse_dump("R3@100.0"), Ok((RouterId(3), SimTime(100_000))));
        assert!(parse_dump("R3").is_err());
        assert!(parse_dump("X@1").is_err());
        assert!(parse_dump("R3@abc").is_err());
    }

    #[test]
    fn csv_has_header_plus_one_row_per_phase() {
        let mut m = Metrics::default();
        for i in 0..2 {
            m.phases.push(sim::PhaseMetrics {
                phase: i,
                cause: "start".into(),
                start_s: 0.0,
                converged: i == 0,
                convergence_time_s: (i == 0).then_some(0.025),
                msg_counts: Default::default(),
                drops: 0,
            });
        }
        let csv = metrics_out(&m, MetricsFormat::Csv);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "phase,converged,convergence_time_s,hello,update_a,update_b,data,drops");
        assert_eq!(lines[1], "0,true,0.025,0,0,0,0,0");
        assert_eq!(lines[2], "1,false,,0,0,0,0,0");
    }

    #[test]
    fn bad_flags_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run_cmd(["bigp", "run"], &mut o, &mut e), 1);
        assert_eq!(run_cmd(["bigp", "run", "x.scn", "--metrics-format", "xml"], &mut o, &mut e), 1);
        assert_eq!(run_cmd(["bigp", "--help"], &mut o, &mut e), 0);
    }
}
