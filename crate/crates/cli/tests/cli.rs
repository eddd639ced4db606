use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL: [&str; 8] = [
    "--set",
    "population.n_banks=30",
    "--set",
    "population.n_investors=300",
    "--set",
    "run.end=\"1977-12\"",
    "--set",
    "run.snapshot_months=[\"1975-01\"]",
];

fn ecofin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecofin"))
        .args(args)
        .env_remove("ECOFIN_CONFIG_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ecofin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    ecofin(args).status.code().expect("exit code")
}

fn hash(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_run_and_manifest_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let mut args = vec!["simulate", "--seed", "4", "--snapshots", "--out", s(out)];
        args.extend(SMALL);
        ok(&args);
    }
    assert_eq!(hash(&a.join("run_4.json")), hash(&b.join("run_4.json")));
    assert!(a.join("snapshot_4_1975-01.csv").exists());
    let m = json(&a.join("run_4.manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["config"]["effective"]["population"]["n_banks"], 30);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "run_4.json"));
    let run = json(&a.join("run_4.json"));
    assert_eq!(run["seed"], 4);
    assert_eq!(run["metrics"]["month"].as_array().unwrap().len(), 60);
}

#[test]
fn single_seed_batch_has_unit_mass() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["batch", "--seeds", "1..1", "--out", s(dir.path())];
    args.extend(SMALL);
    ok(&args);
    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    let mass: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(mass, 1);
    let m = json(&dir.path().join("batch.manifest.json"));
    assert_eq!(m["details"]["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn batch_output_ignores_worker_count() {
    let dir = TempDir::new().unwrap();
    let mut outs = Vec::new();
    for (name, extra) in [("w1", "--workers=1"), ("w3", "--workers=3"), ("seq", "--sequential")] {
        let out = dir.path().join(name);
        let mut args = vec!["batch", "--seeds", "1..3", "--compare", extra, "--out", s(&out)];
        args.extend(SMALL);
        ok(&args);
        outs.push(out);
    }
    for f in ["histogram.csv", "timing.csv"] {
        assert_eq!(hash(&outs[0].join(f)), hash(&outs[1].join(f)));
        assert_eq!(hash(&outs[0].join(f)), hash(&outs[2].join(f)));
    }
    let m = json(&outs[0].join("batch.manifest.json"));
    let runs = m["details"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r["status"] == "ok" && r.get("crises_without_evolution").is_some()));
    assert!(fs::read_to_string(outs[0].join("histogram.csv")).unwrap().contains("false,"));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&["simulate", "--config", "does/not/exist.toml"]), 2);
    assert_eq!(code(&["simulate", "--set", "market.nope=1"]), 2);
    assert_eq!(code(&["simulate", "--set", "market.recovery=2.0"]), 2);
    assert_eq!(code(&["batch", "--seeds", "5..2"]), 2);
    assert_eq!(code(&["batch", "--seeds", "1..2", "--workers", "0"]), 2);
    assert_eq!(code(&["simulate", "--seed", "0"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn missing_rate_file_exits_3() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&["simulate", "--set", "run.rates=\"/nonexistent/rates.csv\"", "--out", s(dir.path())]),
        3
    );
}

#[test]
fn config_dir_resolves_relative_paths() {
    let dir = TempDir::new().unwrap();
    let cfgdir = dir.path().join("configs");
    fs::create_dir_all(&cfgdir).unwrap();
    fs::write(
        cfgdir.join("tiny.toml"),
        "[population]\nn_banks = 20\nn_investors = 200\n[run]\nend = \"1975-12\"\nsnapshot_months = []\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_ecofin"))
        .args(["simulate", "--config", "tiny.toml", "--out", s(&out)])
        .env("ECOFIN_CONFIG_DIR", &cfgdir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let m = json(&out.join("run_1.manifest.json"));
    assert_eq!(m["config"]["effective"]["population"]["n_banks"], 20);
    assert!(m["config"]["file"].as_str().unwrap().ends_with("tiny.toml"));
}

fn write_graph(dir: &Path, nodes: &str, edges: &str) -> (String, String) {
    let (n, e) = (dir.join("nodes.csv"), dir.join("edges.csv"));
    fs::write(&n, nodes).unwrap();
    fs::write(&e, edges).unwrap();
    (s(&n).to_string(), s(&e).to_string())
}

#[test]
fn three_cycle_collapses_at_first_removal() {
    let dir = TempDir::new().unwrap();
    let (n, e) = write_graph(
        dir.path(),
        "id,sales,sector,region\n1,5,construction,R1\n2,4,services,R1\n3,3,other,R2\n",
        "src,dst\n1,2\n2,3\n3,1\n",
    );
    let out = dir.path().join("p");
    ok(&["percolate", "--nodes", &n, "--edges", &e, "--order", "degree", "--out", s(&out)]);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let q: Vec<f64> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(q[0], 1.0);
    assert!(q[1..].iter().all(|&x| x == 0.0));
    assert!(sweep.starts_with("f,Q\n"));
}

#[test]
fn dangling_edge_exits_4() {
    let dir = TempDir::new().unwrap();
    let (n, e) = write_graph(
        dir.path(),
        "id,sales,sector,region\n1,5,construction,R1\n2,4,services,R1\n",
        "src,dst\n1,2\n2,7\n",
    );
    let out = ecofin(&["percolate", "--nodes", &n, "--edges", &e, "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn malformed_node_file_exits_3() {
    let dir = TempDir::new().unwrap();
    let (n, e) = write_graph(dir.path(), "id,sales,sector,region\n1,abc,construction,R1\n", "src,dst\n");
    assert_eq!(code(&["percolate", "--nodes", &n, "--edges", &e, "--out", s(dir.path())]), 3);
}

#[test]
fn generate_percolate_randomize_report() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g");
    ok(&["generate", "--set", "nodes=1500", "--seed", "3", "--out", s(&g)]);
    for f in ["nodes.csv", "edges.csv", "truth.json", "generate.manifest.json"] {
        assert!(g.join(f).exists(), "{f}");
    }
    let (n, e) = (g.join("nodes.csv"), g.join("edges.csv"));

    let p = dir.path().join("p");
    ok(&[
        "percolate", "--nodes", s(&n), "--edges", s(&e), "--fit", "--report", "--contagion",
        "--p-grid", "0:0.1:1", "--trials", "20", "--out", s(&p),
    ]);
    let fit = json(&p.join("fit.json"));
    let fc = fit["f_c"].as_f64().unwrap();
    assert!(fc > 0.0 && fc < 1.0);
    let rep = json(&p.join("report.json"));
    assert_eq!(rep["f_threshold"].as_f64().unwrap(), fc);
    let pc = json(&p.join("contagion.json"))["p_c"].as_f64().unwrap();
    assert!(pc > 0.0 && pc <= 1.0);
    let m = json(&p.join("percolate.manifest.json"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);

    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    for r in [&r1, &r2] {
        ok(&["randomize", "--nodes", s(&n), "--edges", s(&e), "--seed", "8", "--out", s(r)]);
    }
    assert_eq!(hash(&r1.join("randomized_edges.csv")), hash(&r2.join("randomized_edges.csv")));
    assert_eq!(hash(&r1.join("randomized_nodes.csv")), hash(&n));
    let stats = json(&r1.join("randomize.manifest.json"));
    assert_eq!(stats["details"]["attempted"], 60_000);

    let rep = dir.path().join("rep");
    ok(&[
        "report", "--nodes", s(&n), "--edges", s(&e), "--threshold", "0.3", "--rewired-baseline",
        "--out", s(&rep),
    ]);
    assert_eq!(json(&rep.join("report.json"))["f_threshold"].as_f64().unwrap(), 0.3);
    assert_eq!(
        code(&["report", "--nodes", s(&n), "--edges", s(&e), "--threshold", "1.5", "--out", s(&rep)]),
        2
    );
}

#[test]
fn generator_rejects_bad_parameters() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["generate", "--set", "nodes=0", "--out", s(dir.path())]), 2);
    assert_eq!(code(&["generate", "--params", "missing.toml", "--out", s(dir.path())]), 2);
}
