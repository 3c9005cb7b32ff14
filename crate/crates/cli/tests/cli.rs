use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdrrt_cli::{DiagnoseDocument, EstimateDocument, SimulateDocument, EMPTY_ARM};

const FAST: &[&str] = &[
    "--burnin",
    "500",
    "--iters",
    "4000",
    "--retain",
    "100",
    "--thin",
    "10",
    "--bootstrap",
    "200",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdrrt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

/// Deterministic fuzzy-design data; `keep` filters risk scores.
fn write_data(
    dir: &Path,
    name: &str,
    n: usize,
    sharp: bool,
    keep: impl Fn(f64) -> bool,
) -> PathBuf {
    let mut state: u64 = 0x2545_F491_4F6C_DD1D;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut text = String::from("x,t,y\n");
    for _ in 0..n {
        let x = 0.08 + 0.24 * next();
        if !keep(x) {
            continue;
        }
        let z = x >= 0.2;
        let t = if sharp {
            z
        } else {
            next() < if z { 0.8 } else { 0.2 }
        };
        let y = next() < if t { 0.3 } else { 0.12 };
        text.push_str(&format!("{x},{},{}\n", t as u8, y as u8));
    }
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_is_byte_identical_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 4000, false, |_| true);
    let outs: Vec<PathBuf> = (0..2)
        .map(|i| dir.path().join(format!("o{i}.json")))
        .collect();
    for o in &outs {
        let mut args = vec![
            "estimate",
            "--input",
            s(&data),
            "--out",
            s(o),
            "--seed",
            "7",
        ];
        args.extend_from_slice(FAST);
        let r = run(&args);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let a = std::fs::read(&outs[0]).unwrap();
    assert_eq!(a, std::fs::read(&outs[1]).unwrap());

    let text = String::from_utf8(a).unwrap();
    let doc: EstimateDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(rdrrt_cli::to_json(&doc).unwrap(), text);
    // every numeric field survives the trip bit for bit
    let again: EstimateDocument = serde_json::from_str(&rdrrt_cli::to_json(&doc).unwrap()).unwrap();
    for (x, y) in doc.results.iter().zip(&again.results) {
        for (u, v) in [
            (x.mean, y.mean),
            (x.l95, y.l95),
            (x.u95, y.u95),
            (x.median, y.median),
        ] {
            assert_eq!(u.unwrap().to_bits(), v.unwrap().to_bits());
        }
    }

    // 4 default bandwidths x 4 default estimators, blocks ordered by bandwidth
    assert_eq!(doc.results.len(), 16);
    let order: Vec<(f64, &str)> = doc
        .results
        .iter()
        .map(|r| (r.bandwidth, r.estimator.as_str()))
        .collect();
    assert_eq!(order[0], (0.025, "pois.flex"));
    assert_eq!(order[3], (0.025, "gmm"));
    assert_eq!(order[15], (0.1, "gmm"));
    for r in &doc.results {
        assert_eq!(r.status, "ok");
        assert!(r.l95.unwrap() <= r.u95.unwrap());
        assert!(r.n1 > 0 && r.n0 > 0);
    }
    assert_eq!(doc.config.seed, 7);
    assert_eq!(doc.config.sampler.iterations, 4000);
    assert_eq!(doc.diagnostics.fits.len(), 16);

    // a different seed changes the Bayesian output
    let o3 = dir.path().join("o3.json");
    let mut args = vec![
        "estimate",
        "--input",
        s(&data),
        "--out",
        s(&o3),
        "--seed",
        "8",
    ];
    args.extend_from_slice(FAST);
    assert!(run(&args).status.success());
    assert_ne!(
        std::fs::read(&o3).unwrap(),
        std::fs::read(&outs[0]).unwrap()
    );
}

#[test]
fn single_gmm_cell_and_constrained_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 3000, false, |_| true);
    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--bandwidths",
        "0.1",
        "--models",
        "gmm",
        "--bootstrap",
        "100",
    ]);
    assert!(r.status.success());
    let doc: EstimateDocument = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(doc.results.len(), 1);
    assert_eq!(doc.results[0].estimator, "gmm");

    let mut args = vec![
        "estimate",
        "--input",
        s(&data),
        "--bandwidths",
        "0.1",
        "--models",
        "pois.pois,pois.flex",
        "--constrained",
    ];
    args.extend_from_slice(FAST);
    let r = run(&args);
    let doc: EstimateDocument = serde_json::from_slice(&r.stdout).unwrap();
    let labels: Vec<&str> = doc.results.iter().map(|r| r.estimator.as_str()).collect();
    assert_eq!(labels, ["pois.pois+c", "pois.flex+c"]);
    for f in &doc.diagnostics.fits {
        assert_eq!(f.share_nonpositive, Some(0.0));
    }
}

#[test]
fn data_above_threshold_gives_unavailable_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 2000, false, |x| x >= 0.2);
    let mut args = vec!["estimate", "--input", s(&data), "--models", "gmm,pois.flex"];
    args.extend_from_slice(FAST);
    let r = run(&args);
    assert!(r.status.success());
    let doc: EstimateDocument = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(doc.results.len(), 8);
    assert!(doc
        .results
        .iter()
        .all(|c| c.status == EMPTY_ARM && c.mean.is_none() && c.n0 == 0));
}

#[test]
fn input_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 500, false, |_| true);
    let r = run(&["estimate", "--input", s(&data), "--models", "pois.logit"]);
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    for tag in ["pois.pois", "pois.flex", "pois.prod.flex", "gmm"] {
        assert!(err.contains(tag), "{err}");
    }

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,t,y\n0.1,0,0\n0.2,1,0\n0.3,2,1\n").unwrap();
    let r = run(&["diagnose", "--input", s(&bad)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("row 3: t must be 0/1"));

    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--retain",
        "5000",
        "--iters",
        "100",
    ]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&[
        "simulate",
        "--scenarios",
        "strong/low/high",
        "--replications",
        "0",
    ]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&["simulate", "--scenarios", "strong/medium/high"]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&["estimate", "--input", s(&data), "--bandwidths", "-0.1"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    // no outcome events anywhere: the GMM moment equation has no root
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.csv");
    let mut text = String::from("x,t,y\n");
    for i in 0..200 {
        let x = 0.1 + 0.2 * i as f64 / 200.0;
        text.push_str(&format!("{x},{},0\n", (i % 3 == 0) as u8));
    }
    std::fs::write(&p, text).unwrap();
    let r = run(&[
        "estimate",
        "--input",
        s(&p),
        "--models",
        "gmm",
        "--bandwidths",
        "0.1",
    ]);
    assert_eq!(r.status.code(), Some(2));
    let doc: EstimateDocument = serde_json::from_slice(&r.stdout).unwrap();
    assert!(doc.results[0].status.starts_with("failed"));
}

#[test]
fn diagnose_sharp_design() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "sharp.csv", 4000, true, |_| true);
    let r = run(&["diagnose", "--input", s(&data)]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("\"f\": \"inf\""));
    let doc: DiagnoseDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.diagnostics.bandwidths.len(), 4);
    for b in &doc.diagnostics.bandwidths {
        let f = b.first_stage.unwrap();
        assert!(f.f.is_infinite() && f.p_value == 0.0);
        let bounds = b.bounds.unwrap();
        let c = b.cell_counts.unwrap();
        let rd = c.mean_y(true) - c.mean_y(false);
        assert!((bounds.lower - rd).abs() < 1e-12 && (bounds.upper - rd).abs() < 1e-12);
    }
    assert_eq!(rdrrt_cli::to_json(&doc).unwrap(), text);

    let r = run(&[
        "diagnose",
        "--input",
        s(&data),
        "--format",
        "csv",
        "--bandwidths",
        "0.05",
    ]);
    let csv = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config: {"));
    assert!(lines[1].starts_with("bandwidth,status,n1,n0,f,"));
    assert!(lines[2].starts_with("0.05,ok,"));
    assert!(lines[2].contains(",inf,"));
}

#[test]
fn simulate_small_grid_and_config_file() {
    let r = run(&[
        "simulate",
        "--scenarios",
        "strong/low/high",
        "--n",
        "3000",
        "--replications",
        "3",
        "--bandwidths",
        "0.1",
        "--models",
        "gmm",
        "--bootstrap",
        "100",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: SimulateDocument = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(doc.results.len(), 1);
    let row = &doc.results[0];
    assert_eq!(row.scenario, "strong/low/high");
    assert!((row.true_rr - 1.5f64.exp()).abs() < 1e-12);
    assert_eq!(doc.diagnostics.cells[0].replicates.len(), 3);
    assert!(row.coverage.is_some());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenarios.json");
    std::fs::write(
        &cfg,
        r#"[{"scenario": {"strength": "weak", "confounding": "low", "effect": "none"},
             "n": 2000, "replications": 2, "bandwidths": [0.05, 0.1]}]"#,
    )
    .unwrap();
    let r = run(&[
        "simulate",
        "--config",
        s(&cfg),
        "--models",
        "gmm",
        "--bootstrap",
        "50",
        "--format",
        "csv",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text
        .lines()
        .nth(2)
        .unwrap()
        .starts_with("weak/low/none,0.05,gmm,1,2,"));
}

#[test]
fn explore_emits_bins_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 5000, false, |_| true);
    let r = run(&["explore", "--input", s(&data)]);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["diagnostics"]["bins"].as_array().unwrap().len(), 20);
    assert_eq!(v["config"]["explore"]["bins"], 20);
    assert!(v["results"].as_array().unwrap().is_empty());
}
