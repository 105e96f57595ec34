// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::process::{Command, Output};

fn exopipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exopipe"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn run_writes_csv_with_one_row_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ping.csv");
    let o = exopipe(&[
        "run",
        "--scenario",
        "ping",
        "--mode",
        "internal",
        "--repetitions",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().nth(1).unwrap().starts_with("ping,internal,0,rtt,ms,6.400,"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mean=6.400"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, par) in [false, true].into_iter().enumerate() {
        let out = dir.path().join(format!("f{i}.csv"));
        let mut args = vec!["run", "--scenario", "filter", "--seed", "9", "--out", out.to_str().unwrap()];
        if par {
            args.push("--parallel");
        }
        assert!(exopipe(&args).status.success());
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn exit_codes() {
    assert_eq!(exopipe(&["calibrate", "--band", "24,35"]).status.code(), Some(0));
    assert_eq!(exopipe(&["calibrate", "--band", "1,2"]).status.code(), Some(3));
    assert_eq!(exopipe(&["calibrate", "--band", "35,24"]).status.code(), Some(2));
    assert_eq!(exopipe(&["run", "--scenario", "nope"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "repetitions = 0\n").unwrap();
    assert_eq!(exopipe(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(exopipe(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "scenario = \"ping\"\nmode = \"external\"\nrepetitions = 2\n[broker]\ndelay = \"5ms\"\n[topology]\nsites = 1\n",
    )
    .unwrap();
    let o = exopipe(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    // Six punts at 5 ms broker + 1 ms RPC, plus 0.4 ms of links.
    assert!(text.lines().nth(1).unwrap().contains(",rtt,ms,36.400,"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn topo_dump_lists_every_link() {
    let o = exopipe(&["topo", "--k", "2", "--sites", "5", "--dump"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# 25 switches, 10 hosts, 25 switch links"));
    let switch_links = text.lines().filter(|l| l.starts_with('s') && l.contains(" -- s")).count();
    assert_eq!(switch_links, 25);
}
