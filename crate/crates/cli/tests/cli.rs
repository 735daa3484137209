use std::process::Command;

fn oapsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oapsim"))
}

fn write_scenario(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("tiny.scenario");
    std::fs::write(
        &path,
        "name = tiny\ntopology = fig1\nerasure = 0.2\nprotocols = deluge, coop\nk = 4, 8\nreplicates = 3\n",
    )
    .unwrap();
    path
}

#[test]
fn run_writes_csv_plot_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = dir.path().join("out");
    let status = oapsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .args(["--format", "both", "--jobs", "2"])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = std::fs::read_to_string(out.join("tiny.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.starts_with("scenario,protocol,k,erasure,seed,completion_slots"));
    assert!(out.join("tiny-e0.2.svg").exists());
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("coop completion-time reduction"));
}

#[test]
fn root_seed_and_protocol_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let run = |seed: &str, out: &str| {
        let o = oapsim()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path().join(out))
            .args([
                "--format",
                "csv",
                "--protocols",
                "coop",
                "--root-seed",
                seed,
                "--jobs",
                "1",
            ])
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read_to_string(dir.path().join(out).join("tiny.csv")).unwrap()
    };
    let a = run("5", "a");
    let b = run("5", "b");
    let c = run("6", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.lines().skip(1).all(|l| l.contains(",coop,")));
}

#[test]
fn trace_of_bundled_scripted_scenario() {
    let o = oapsim()
        .args(["trace", "--scenario", "fig1.scripted", "--protocol", "coop"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("    0 N1 DATA"));
    assert!(text.contains("# complete at slot 8, 0 nacks"));
    assert!(!text.contains("NACK"));
}

#[test]
fn bad_input_is_reported() {
    let o = oapsim()
        .args(["run", "--scenario", "missing.scenario"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.scenario"));
    let o = oapsim()
        .args(["run", "--scenario", "fig2.scenario", "--format", "pdf"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scenario");
    std::fs::write(&bad, "name = x\ntopology = fig1\nspeed = 3\n").unwrap();
    let o = oapsim()
        .args(["run", "--scenario"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `speed`"));
}

#[test]
fn topology_file_resolves_next_to_scenario() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("chain.topo"),
        "node A\nnode B\nnode C\nsource A\nlink A B\nlink B C erasure=0.1\n",
    )
    .unwrap();
    let scenario = dir.path().join("chain.scenario");
    std::fs::write(
        &scenario,
        "name = chain\ntopology = chain.topo\nprotocols = coop\nk = 4\nreplicates = 2\n",
    )
    .unwrap();
    let o = oapsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/chain.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.contains(",false,")));
}
