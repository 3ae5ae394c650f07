use std::fs;
use std::path::Path;
use std::process::Command;

use springlattice_cli::{catalog_listing, parse_config, run, RunOptions};
use tempfile::TempDir;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_springlattice"))
}

#[test]
fn kagome_grid_gives_one_row_per_gradient() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
lattice = "kagome"
output_dir = "out"
seeds = [0, 1]

[[tasks]]
kind = "density"
k_schedule = [1]
grid = { c = [0.7, 0.8, 0.9, 1.0], theta = [0.0, 0.2617993877991494, 0.5235987755982988] }
"#,
    );
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let csv = fs::read_to_string(out.join("00-density.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines[0].starts_with("lambda_11,lambda_12,lambda_21,lambda_22,k,bc,value_exact"));
    assert!(out.join("00-density.txt").is_file());
}

#[test]
fn accordion_fold_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
lattice = "square"
output_dir = "out"

[[tasks]]
kind = "mechanism-verify"
mechanism = { type = "accordion", c = 0.0 }
"#,
    );
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let summary = fs::read_to_string(out.join("00-mechanism-verify.txt")).unwrap();
    assert_eq!(summary.trim(), "spring residual 0, penalty 2 triangles reversed");
}

#[test]
fn empty_task_list_writes_manifest_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lattice = \"square\"\noutput_dir = \"out\"\n");
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, vec!["manifest.json".to_string()]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 8);
    assert!(manifest["tasks"].as_array().unwrap().is_empty());
}

const MIXED: &str = r#"
lattice = "square"
output_dir = "out"
seeds = [3, 4]

[[tasks]]
kind = "density"
lambdas = [[[0.9, 0.0], [0.0, 1.1]]]
k_schedule = [1, 2]

[[tasks]]
kind = "bounds-audit"
samples = 50

[[tasks]]
kind = "recovery"
lambda = [[2.0, 0.0], [0.0, 2.0]]
domain = { shape = "box", min = [0.0, 0.0], max = [1.0, 1.0] }
epsilons = [0.25, 0.125]

[[tasks]]
kind = "soft-mode"
f = [[0.9, 0.0], [0.0, 1.0]]
domain = { shape = "box", min = [0.0, 0.0], max = [1.0, 1.0] }
epsilons = [0.5, 0.25]

[[tasks]]
kind = "interpolation-report"
function = { type = "sine", amplitude = 0.1, frequency = 3.0 }
domain = { shape = "box", min = [0.0, 0.0], max = [1.0, 1.0] }
epsilons = [0.25, 0.125]
"#;

#[test]
fn identical_runs_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MIXED);
    let a = run(&cfg, &RunOptions { output_dir: Some(tmp.path().join("a")), seed: None }).unwrap();
    let b = run(&cfg, &RunOptions { output_dir: Some(tmp.path().join("b")), seed: None }).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 1 + 2 * 5 + 2);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let rec = fs::read_to_string(a.join("02-recovery.txt")).unwrap();
    assert!(rec.contains("fitted gap rate"));
    assert!(a.join("02-recovery.plot.csv").is_file());
}

#[test]
fn seed_flag_replaces_seeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lattice = \"square\"\noutput_dir = \"out\"\nseeds = [1, 2, 3]\n");
    let out = run(&cfg, &RunOptions { output_dir: None, seed: Some(10) }).unwrap();
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["seeds"], serde_json::json!([10, 11, 12]));
}

#[test]
fn one_invalid_task_blocks_every_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
lattice = "square"
output_dir = "out"

[[tasks]]
kind = "bounds-audit"
samples = 10

[[tasks]]
kind = "recovery"
lambda = [[1.0, 0.0], [0.0, 1.0]]
domain = { shape = "box", min = [0.0, 0.0], max = [1.0, 1.0] }
epsilons = [0.125, 0.25]
"#,
    );
    let e = run(&cfg, &RunOptions::default()).unwrap_err();
    assert!(e.to_string().contains("tasks[1].epsilons"), "{e}");
    assert!(!tmp.path().join("out").exists());

    let status = bin().arg("run").arg(&cfg).status().unwrap();
    assert!(!status.success());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn parse_errors_name_the_field() {
    let e = parse_config("lattice = \"square\"\n[[tasks]]\nkind = \"bounds-audit\"\nsampels = 3\n").unwrap_err();
    assert!(e.path.starts_with("tasks[0]"), "{e}");
    let e = parse_config("lattice = \"square\"\n[[tasks]]\nkind = \"density\"\nk_schedule = \"x\"\n").unwrap_err();
    assert!(e.path.contains("k_schedule"), "{e}");
    let e = parse_config("lattice = 3\n").unwrap_err();
    assert_eq!(e.path, "lattice");
    let e = parse_config("lattice = \"square\"\n[[tasks]]\nkind = \"densty\"\n").unwrap_err();
    assert_eq!(e.path, "tasks[0].kind");
    assert!(e.message.contains("density"), "{e}");
}

#[test]
fn semantic_checks_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("kind = \"density\"\n", "tasks[0].lambdas"),
        ("kind = \"density\"\nlambdas = [[[1.0, 0.0], [0.0, 1.0]]]\nk_schedule = [2, 1]\n", "tasks[0].k_schedule"),
        ("kind = \"mechanism-verify\"\nmechanism = { type = \"twisted-kagome\", theta = 0.2 }\n", "tasks[0].mechanism"),
        ("kind = \"mechanism-verify\"\nmechanism = { type = \"accordion\", c = 0.3333 }\n", "tasks[0].mechanism"),
        ("kind = \"rank-one\"\na = [[1.0, 0.0], [0.0, 1.0]]\ndirection = [0.1, 0.0]\nnormal = [1.0, 0.0]\nthetas = [1.5]\n", "tasks[0].thetas"),
        ("kind = \"recovery\"\ndomain = { shape = \"box\", min = [0.0, 0.0], max = [1.0, 1.0] }\nepsilons = [0.5]\n", "tasks[0].lambda"),
        ("kind = \"soft-mode\"\nf = [[1.0, 0.0], [0.0, 1.0]]\ndomain = { shape = \"box\", min = [1.0, 0.0], max = [0.0, 1.0] }\nepsilons = [0.5]\n", "tasks[0].domain"),
    ];
    for (task, path) in cases {
        let cfg = write_config(tmp.path(), &format!("lattice = \"square\"\noutput_dir = \"out\"\n[[tasks]]\n{task}"));
        let e = run(&cfg, &RunOptions::default()).unwrap_err();
        assert!(e.to_string().starts_with(path), "{path}: {e}");
    }
}

#[test]
fn lattice_file_relative_to_config() {
    let tmp = TempDir::new().unwrap();
    let desc = springlattice::lattice::LatticeSpec::from_catalog("square").unwrap().description().to_toml_string().unwrap();
    fs::write(tmp.path().join("grid.toml"), desc).unwrap();
    let cfg = write_config(
        tmp.path(),
        "lattice = \"grid.toml\"\noutput_dir = \"out\"\n[[tasks]]\nkind = \"mechanism-verify\"\nmechanism = { type = \"accordion\", c = 0.5 }\n",
    );
    let out = run(&cfg, &RunOptions::default()).unwrap();
    let csv = fs::read_to_string(out.join("00-mechanism-verify.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("4x1"));
    let missing = write_config(tmp.path(), "lattice = \"nope.toml\"\noutput_dir = \"out\"\n");
    assert!(run(&missing, &RunOptions::default()).unwrap_err().to_string().starts_with("lattice"));
}

#[test]
fn catalog_lists_the_builtins() {
    let s = catalog_listing();
    assert!(s.lines().any(|l| l.starts_with("kagome") && l.contains("3 nodes, 6 springs/cell")));
    assert!(s.lines().any(|l| l.starts_with("square-long-range") && l.contains("1 nodes, 5 springs/cell")));
    assert!(s.lines().any(|l| l.starts_with("rotating-squares") && l.contains("10 springs/cell")));
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), s);
}

#[test]
fn binary_runs_with_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lattice = \"kagome\"\n[[tasks]]\nkind = \"bounds-audit\"\nsamples = 20\n");
    let dir = tmp.path().join("flagged");
    let status = bin().args(["--threads", "1", "run"]).arg(&cfg).arg("--output-dir").arg(&dir).status().unwrap();
    assert!(status.success());
    let summary = fs::read_to_string(dir.join("00-bounds-audit.txt")).unwrap();
    assert!(summary.contains(" 0 violations"));
}
