use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qwalkdec_core::graphs::build_line;
use qwalkdec_core::rng::derive_seed;
use qwalkdec_core::{CoinSpec, CoinedWalk, WalkStatePure, C64};
use qwalkdec_runner::{execute, load_config, validate, RunManifest, RunOptions};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qwalkdec"));
    c.env_remove("QWALKDEC_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn hadamard_line_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("hadamard_line.json");
    let o = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = std::fs::read_to_string(dir.path().join("hadamard_line.csv")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/hadamard_line.csv");
    let golden = std::fs::read_to_string(golden_path).unwrap();
    assert_eq!(got, golden);
}

#[test]
fn golden_file_agrees_with_pure_evolution() {
    // The golden file comes from the density engine; check it independently.
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/hadamard_line.csv")).unwrap();
    let g = build_line(100).unwrap();
    let w = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let init = WalkStatePure::localized(&g, g.line_index(0).unwrap(), &[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
    let fin = w.evolve_pure(&init, 100).unwrap();
    let mut reader = csv::Reader::from_reader(golden.as_bytes());
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[2], "probability");
        let x: i64 = rec[3].parse().unwrap();
        let v: f64 = rec[4].parse().unwrap();
        let i = g.line_index(x).unwrap();
        let want = fin.amplitudes[2 * i].norm_sqr() + fin.amplitudes[2 * i + 1].norm_sqr();
        assert!((v - want).abs() < 1e-12, "x = {x}: {v} vs {want}");
        n += 1;
    }
    assert_eq!(n, 201);
}

#[test]
fn invalid_rate_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "bad.json",
        r#"{"experiment_id": "bad", "kind": "line", "noise": {"channel": "measure_both", "rate": 1.5},
            "horizon": 10, "observables": [{"type": "moments"}]}"#,
    );
    for cmd in ["run", "validate"] {
        let o = run(&[cmd, p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("noise.rate"), "{}", stderr(&o));
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"experiment_id": "x", "kind": "line", "horizon": 10, "observables": [{"type": "moments"}], "extra": 1}"#, "extra"),
        (
            r#"{"experiment_id": "x", "kind": "cycle", "graph": {"size": 8}, "horizon": 10,
                "observables": [{"type": "moments"}], "sweep": {"p": []}}"#,
            "sweep",
        ),
        (r#"{"experiment_id": "x", "kind": "line", "graph": {"size": 5}, "horizon": 10, "observables": [{"type": "moments"}]}"#, "graph.size"),
        (r#"{"experiment_id": "x", "kind": "line", "horizon": 0, "observables": [{"type": "moments"}]}"#, "horizon"),
        (r#"{"experiment_id": "x", "kind": "line", "horizon": 10, "observables": []}"#, "observables"),
    ];
    for (text, needle) in cases {
        let p = write_config(dir.path(), "c.json", text);
        let o = run(&["validate", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
    }
    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resource_caps_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "cap.json",
        r#"{"experiment_id": "cap", "kind": "cycle", "graph": {"size": 8}, "horizon": 5, "sweep_cap": 10,
            "observables": [{"type": "moments"}], "sweep": {"p": [0.1, 0.2, 0.3], "N": [4, 5, 6, 7]}}"#,
    );
    let o = run(&["sweep", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("12 points"), "{}", stderr(&o));

    let p = write_config(
        dir.path(),
        "dense.json",
        r#"{"experiment_id": "dense", "kind": "hypercube", "graph": {"dim": 10}, "mode": "density",
            "noise": {"channel": "measure_both", "rate": 0.1}, "horizon": 2, "observables": [{"type": "tv_uniform"}]}"#,
    );
    let o = run(&["run", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("trajectories"), "{}", stderr(&o));
}

#[test]
fn unconverged_results_are_data() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "pure.json",
        r#"{"experiment_id": "pure", "kind": "cycle", "graph": {"size": 9}, "horizon": 50,
            "observables": [{"type": "mixing", "epsilon": 0.001}]}"#,
    );
    let o = run(&["run", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("pure.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",mixing_time,0.001,50.0,false,"), "{csv}");
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("pure.manifest.json")).unwrap()).unwrap();
    assert!(!m.all_converged);
}

#[test]
fn manifest_records_seeds_threads_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cycle_period.json");
    let o = bin()
        .env("QWALKDEC_THREADS", "3")
        .args(["sweep", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
        .args(["--seed", "99", "--horizon-override", "200"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let m: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cycle_period.manifest.json")).unwrap()).unwrap();
    assert_eq!(m.threads, 3);
    assert_eq!(m.master_seed, 99);
    assert_eq!(m.config_sha256.len(), 64);
    assert!(m.overrides.contains(&("horizon".to_string(), "200".to_string())));
    for (i, p) in m.points.iter().enumerate() {
        assert_eq!(p.index, i);
        assert_eq!(p.seed, derive_seed(99, i as u64));
    }
    // Every CSV row traces to a manifest point through its seed.
    let csv = std::fs::read_to_string(dir.path().join(&m.csv)).unwrap();
    for line in csv.lines().skip(1) {
        let seed: u64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(m.points.iter().any(|p| p.seed == seed));
    }
    assert!(csv.contains("cycle_period,8,200,period,,24.0,true,"), "{csv}");
}

#[test]
fn sweep_requires_axes() {
    let o = run(&["sweep", configs().join("hadamard_line.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracles_subcommand_prints_values() {
    let o = run(&["oracles", "brun_dephase_variance_rate", "0.39269908169872414"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let v: f64 = out.trim().split('\t').nth(1).unwrap().parse().unwrap();
    assert!((v - 3.0).abs() < 1e-12);

    let o = run(&["oracles", "list"]);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l == "alagic_probs"));

    let o = run(&["oracles", "alagic_mixing_times", "3", "1", "4", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["oracles", "no_such_oracle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let (cfg, _) = load_config(&path).unwrap();
            validate(&cfg, &RunOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}

#[test]
fn same_seed_same_bytes_across_threads() {
    let (cfg, base) = load_config(&configs().join("hypercube_ctqw.json")).unwrap();
    let mut out = Vec::new();
    for threads in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            threads: Some(threads),
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let r = execute(&cfg, &base, &opts).unwrap();
        out.push(std::fs::read(r.csv_path).unwrap());
    }
    assert_eq!(out[0], out[1]);
}

#[test]
fn custom_graph_reads_edges_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("custom_grid.json");
    let o = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("custom_grid.csv")).unwrap();
    let total: f64 = csv
        .lines()
        .filter(|l| l.contains(",30.0,probability,") || l.starts_with("custom_grid,30,probability,"))
        .map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}
