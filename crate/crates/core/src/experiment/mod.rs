//! Scenario sweeps, result rows, summaries and report files.

mod report;
mod scenario;

use std::io::Write;
use std::path::Path;

use crate::codec::Page;
use crate::engine::{derive_seed, stream};
use crate::netmodel::Topology;
use crate::protocols::{ProtocolKind, RunReport, Simulation, TraceEntry};
use crate::Error;

pub use report::{emit, plot_svg, summarize, OutputFormat, Reduction, Summary, SummaryRow};
pub use scenario::{Scenario, ScenarioError};

/// CSV column order of [`ResultRow`].
pub const CSV_HEADER: [&str; 13] = [
    "scenario",
    "protocol",
    "k",
    "erasure",
    "seed",
    "completion_slots",
    "timed_out",
    "tx_total",
    "rx_total",
    "redundant_rx",
    "nacks",
    "decoder_row_ops",
    "header_bits",
];

/// One replicate of one protocol at one (k, erasure) point.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub protocol: ProtocolKind,
    pub k: usize,
    pub erasure: f64,
    pub seed: u64,
    /// `None` when the run timed out.
    pub completion_slots: Option<u64>,
    pub timed_out: bool,
    pub tx_total: u64,
    pub rx_total: u64,
    pub redundant_rx: u64,
    pub nacks: u64,
    pub decoder_row_ops: u64,
    pub header_bits: u64,
}

impl ResultRow {
    fn from_report(scenario: &str, k: usize, erasure: f64, seed: u64, r: &RunReport) -> Self {
        ResultRow {
            scenario: scenario.to_string(),
            protocol: r.protocol,
            k,
            erasure,
            seed,
            completion_slots: r.completion_slots,
            timed_out: r.timed_out,
            tx_total: r.tx_total,
            rx_total: r.rx_total,
            redundant_rx: r.redundant_rx,
            nacks: r.nacks,
            decoder_row_ops: r.decoder_row_ops,
            header_bits: r.header_bits,
        }
    }

    fn record(&self) -> [String; 13] {
        [
            self.scenario.clone(),
            self.protocol.to_string(),
            self.k.to_string(),
            self.erasure.to_string(),
            self.seed.to_string(),
            self.completion_slots
                .map_or(String::new(), |c| c.to_string()),
            self.timed_out.to_string(),
            self.tx_total.to_string(),
            self.rx_total.to_string(),
            self.redundant_rx.to_string(),
            self.nacks.to_string(),
            self.decoder_row_ops.to_string(),
            self.header_bits.to_string(),
        ]
    }
}

/// Writes rows as CSV with a single header line.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for r in rows {
        w.write_record(r.record()).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon over replicates; `jobs` caps the thread count. Falls back to
    /// sequential when the `parallel` feature is off.
    #[default]
    Parallel,
}

/// Seed of replicate `index`; shared by every protocol and sweep point so
/// that protocols are compared on paired seeds.
pub fn replicate_seed(root: u64, index: u64) -> u64 {
    derive_seed(root, index, "replicate")
}

#[derive(Clone, Copy, Debug)]
struct Unit {
    protocol: ProtocolKind,
    k: usize,
    erasure: f64,
    replicate: u64,
}

struct Prepared<'a> {
    scenario: &'a Scenario,
    topo: Topology,
    script: crate::netmodel::ErasureScript,
}

impl Prepared<'_> {
    fn simulation(&self, u: Unit) -> Result<(u64, Simulation), Error> {
        let s = self.scenario;
        let seed = replicate_seed(s.root_seed, u.replicate);
        let page = Page::random(0, u.k, s.packet_len, &mut stream(seed, u.k as u64, "page"));
        let point = derive_seed(seed, u.k as u64, &format!("erasure={}", u.erasure));
        let sim = Simulation::new(
            self.topo.clone(),
            s.channel(u.erasure),
            s.protocol_config(u.protocol, u.k),
            page,
            point,
        )?
        .with_script(self.script.clone());
        Ok((seed, sim))
    }

    fn run(&self, u: Unit) -> Result<ResultRow, Error> {
        let (seed, sim) = self.simulation(u)?;
        let report = sim.run(self.scenario.max_slots)?;
        Ok(ResultRow::from_report(
            &self.scenario.name,
            u.k,
            u.erasure,
            seed,
            &report,
        ))
    }
}

fn prepare<'a>(s: &'a Scenario, base: Option<&Path>) -> Result<Prepared<'a>, Error> {
    s.validate()?;
    let topo = s.resolve_topology(base)?;
    let script = s.script(&topo)?;
    Ok(Prepared {
        scenario: s,
        topo,
        script,
    })
}

/// Every (protocol, k, erasure, replicate) row of a scenario, sorted by
/// protocol, k, erasure and seed so the order never depends on scheduling.
pub fn run_scenario(
    s: &Scenario,
    base: Option<&Path>,
    exec: Execution,
    jobs: Option<usize>,
) -> Result<Vec<ResultRow>, Error> {
    let prepared = prepare(s, base)?;
    let mut units = Vec::new();
    for &protocol in &s.protocols {
        for &k in &s.k {
            for &erasure in &s.erasures {
                for replicate in 0..s.replicates {
                    units.push(Unit {
                        protocol,
                        k,
                        erasure,
                        replicate,
                    });
                }
            }
        }
    }
    let mut rows = match exec {
        Execution::Sequential => units
            .iter()
            .map(|&u| prepared.run(u))
            .collect::<Result<Vec<_>, _>>()?,
        Execution::Parallel => run_parallel(&prepared, &units, jobs)?,
    };
    let order = |p: ProtocolKind| s.protocols.iter().position(|&q| q == p);
    rows.sort_by(|a, b| {
        order(a.protocol)
            .cmp(&order(b.protocol))
            .then(a.k.cmp(&b.k))
            .then(a.erasure.total_cmp(&b.erasure))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

#[cfg(feature = "parallel")]
fn run_parallel(
    p: &Prepared,
    units: &[Unit],
    jobs: Option<usize>,
) -> Result<Vec<ResultRow>, Error> {
    use rayon::prelude::*;
    let work = || {
        units
            .par_iter()
            .map(|&u| p.run(u))
            .collect::<Result<Vec<_>, _>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(
    p: &Prepared,
    units: &[Unit],
    _jobs: Option<usize>,
) -> Result<Vec<ResultRow>, Error> {
    units.iter().map(|&u| p.run(u)).collect()
}

/// Message trace of the first replicate of `protocol` at the scenario's
/// first k and erasure.
pub fn trace_scenario(
    s: &Scenario,
    base: Option<&Path>,
    protocol: ProtocolKind,
) -> Result<(Topology, RunReport), Error> {
    let prepared = prepare(s, base)?;
    let unit = Unit {
        protocol,
        k: s.k[0],
        erasure: s.erasures[0],
        replicate: 0,
    };
    let (_, sim) = prepared.simulation(unit)?;
    let report = sim.with_trace().run(s.max_slots)?;
    Ok((prepared.topo, report))
}

/// Renders a trace the way golden files store it.
pub fn render_trace(topo: &Topology, entries: &[TraceEntry]) -> String {
    crate::protocols::TraceDisplay { topo, entries }.to_string()
}
