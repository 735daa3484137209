use std::path::PathBuf;

use oapsim_core::experiment::{
    csv_string, render_trace, run_scenario, summarize, trace_scenario, Execution, Scenario,
};
use oapsim_core::netmodel::NodeId;
use oapsim_core::protocols::{Message, ProtocolKind};

fn bundled(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::load(&path).unwrap()
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    for name in ["fig1.scripted", "fig2.scenario", "grid100.scenario"] {
        let s = bundled(name);
        assert_eq!(Scenario::parse(&s.to_string()).unwrap(), s, "{name}");
    }
    let fig2 = bundled("fig2.scenario");
    assert_eq!(fig2.erasures, vec![0.1, 0.2, 0.3, 0.5]);
    assert_eq!(fig2.k, vec![4, 8, 16, 32, 48]);
    assert_eq!(fig2.replicates, 100);
    assert_eq!(fig2.packet_len, 20);
}

#[test]
fn scripted_trace_matches_golden_file() {
    let s = bundled("fig1.scripted");
    let (topo, report) = trace_scenario(&s, None, ProtocolKind::Coop).unwrap();
    let got = render_trace(&topo, report.trace.as_deref().unwrap());
    let want = include_str!("golden/fig1_coop.trace");
    assert_eq!(got, want);
}

#[test]
fn scripted_run_recovers_through_overhearing() {
    let s = bundled("fig1.scripted");
    let (topo, report) = trace_scenario(&s, None, ProtocolKind::Coop).unwrap();
    let n1 = topo.id_of("N1").unwrap();
    assert!(report.all_verified);
    assert_eq!(report.completion_slots, Some(8));
    assert_eq!(report.nacks, 0);
    let trace = report.trace.unwrap();
    assert!(trace
        .iter()
        .all(|e| !matches!(e.message, Message::Nack { .. })));
    // Only the source and the two relays ever transmit.
    let senders: Vec<NodeId> = trace.iter().map(|e| e.sender).collect();
    let n2 = topo.id_of("N2").unwrap();
    let n3 = topo.id_of("N3").unwrap();
    assert!(senders.iter().all(|&v| v == n1 || v == n2 || v == n3));
    assert_eq!(senders.iter().filter(|&&v| v == n1).count(), 4);
}

#[test]
fn csv_is_reproducible() {
    let mut s = bundled("fig2.scenario");
    s.replicates = 4;
    s.k = vec![4, 16];
    let a = csv_string(&run_scenario(&s, None, Execution::Parallel, None).unwrap());
    let b = csv_string(&run_scenario(&s, None, Execution::Parallel, None).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 5 * 2 * 4 * 4);
}

#[test]
fn lossless_coop_beats_flood_on_transmissions() {
    let mut s = bundled("fig2.scenario");
    s.erasures = vec![0.0];
    s.k = vec![4];
    s.replicates = 3;
    let rows = run_scenario(&s, None, Execution::Sequential, None).unwrap();
    let summary = summarize(&rows);
    for r in &summary.rows {
        assert_eq!(r.timeouts, 0, "{}", r.protocol);
    }
    for (f, c) in rows
        .iter()
        .filter(|r| r.protocol == ProtocolKind::Flood)
        .zip(rows.iter().filter(|r| r.protocol == ProtocolKind::Coop))
    {
        assert_eq!(f.seed, c.seed);
        assert_eq!(f.tx_total, 20);
        assert!(f.tx_total > c.tx_total);
    }
}

#[test]
fn grid_runs_complete() {
    let mut s = bundled("grid100.scenario");
    s.replicates = 1;
    s.k = vec![4];
    let rows = run_scenario(&s, None, Execution::Parallel, None).unwrap();
    assert_eq!(rows.len(), s.protocols.len());
    assert!(rows.iter().all(|r| !r.timed_out));
}
