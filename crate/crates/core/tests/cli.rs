use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use greenkit::io;
use greenkit::rsvd::matrix_with_spectrum;

fn greenkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenkit")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = greenkit(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        let spectrum: Vec<f64> = (1..=100).map(|j| 2f64.powi(-j)).collect();
        let a = matrix_with_spectrum(100, 100, &spectrum, 11).unwrap();
        io::write_matrix_csv(&f.path("decay.csv"), a.as_matrix()).unwrap();
        fs::write(f.path("jacobi.json"), r#"{"type": "jacobi", "M": 20, "nu": 2.0, "grid": {"rule": "gauss-legendre", "n": 64}}"#).unwrap();
        fs::write(
            f.path("data.json"),
            r#"{"operator": {"preset": "poisson"}, "kernel": {"type": "jacobi", "M": 20}, "grid_n": 129, "N": 8, "noise": 0.01}"#,
        )
        .unwrap();
        fs::write(
            f.path("hmatrix.json"),
            r#"{"operator": {"preset": "poisson"}, "kernel": {"type": "jacobi", "M": 20}, "grid_n": 128, "levels": 3}"#,
        )
        .unwrap();
        fs::write(f.path("train.json"), r#"{"green_widths": [2, 8, 1], "hom_widths": [1, 4, 1], "epochs": 20, "checkpoint_every": 8}"#).unwrap();
        let mut table = String::from("x,y\n");
        for i in 0..32 {
            let x = i as f64 / 31.0;
            table.push_str(&format!("{},{}\n", io::fmt_f64(x), io::fmt_f64((6.0 * x).sin())));
        }
        fs::write(f.path("table.csv"), table).unwrap();
        fs::write(f.path("rational.json"), r#"{"widths": [1, 8, 1], "epochs": 30, "batch_size": 8, "lr": 0.01}"#).unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Runs `args` with `--out` pointing at two fresh directories and checks
/// both produce the same bytes.
fn assert_rerun_identical(f: &Fixture, tag: &str, args: &[&str]) -> PathBuf {
    let (a, b) = (f.path(&format!("{tag}_a")), f.path(&format!("{tag}_b")));
    for out in [&a, &b] {
        let mut full = args.to_vec();
        full.extend(["--out", s(out)]);
        ok(&full);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert!(sa.contains_key("manifest.json"), "{tag} wrote no manifest");
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (name, bytes) in &sa {
        assert!(bytes == &sb[name], "{tag}: {name} differs between reruns");
    }
    a
}

#[test]
fn every_subcommand_is_byte_reproducible() {
    let f = Fixture::new();
    let decay = f.path("decay.csv");
    assert_rerun_identical(&f, "rsvd", &["rsvd", "--matrix", s(&decay), "--k", "10", "--p", "5", "--seed", "3"]);
    let bound = assert_rerun_identical(
        &f,
        "bound",
        &["bound-check", "--k", "10", "--p", "5", "--t", "2", "--u", "2", "--trials", "500", "--matrix", s(&decay), "--seed", "1"],
    );
    let report: serde_json::Value = io::read_json(&bound.join("bound.json")).unwrap();
    assert!(report["failure_rate"].as_f64().unwrap() <= 0.0808);
    let jac = f.path("jacobi.json");
    assert_rerun_identical(&f, "gp", &["gp-sample", "--kernel", s(&jac), "--n", "3", "--seed", "7"]);
    let data = assert_rerun_identical(&f, "data", &["gen-data", "--config", s(&f.path("data.json")), "--seed", "5"]);
    assert_rerun_identical(&f, "hmatrix", &["learn-hmatrix", "--config", s(&f.path("hmatrix.json")), "--seed", "2"]);
    let trained =
        assert_rerun_identical(&f, "green", &["train-green", "--data", s(&data), "--config", s(&f.path("train.json")), "--seed", "4"]);
    assert!(trained.join("checkpoint_000008.json").exists() && trained.join("checkpoint_000016.json").exists());
    assert_rerun_identical(&f, "features", &["features", "--checkpoint", s(&trained.join("checkpoint.json")), "--grid-n", "65"]);
    assert_rerun_identical(
        &f,
        "rational",
        &["train-rational", "--data", s(&f.path("table.csv")), "--config", s(&f.path("rational.json")), "--seed", "9"],
    );
}

#[test]
fn manifest_echoes_config_bytes() {
    let f = Fixture::new();
    let out = f.path("out");
    ok(&["gen-data", "--config", s(&f.path("data.json")), "--seed", "5", "--out", s(&out)]);
    let m: serde_json::Value = io::read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(m["config_text"].as_str().unwrap(), fs::read_to_string(f.path("data.json")).unwrap());
    assert_eq!(m["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["config"]["sensors"]["stride"], 5);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let out = f.path("out");
    assert_eq!(greenkit(&["frobnicate"]).status.code(), Some(1));
    let unknown = greenkit(&["rsvd", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    // seed is mandatory
    assert_eq!(greenkit(&["gp-sample", "--kernel", s(&f.path("jacobi.json")), "--n", "2", "--out", s(&out)]).status.code(), Some(1));
    // k + p too large
    let r = greenkit(&["rsvd", "--matrix", s(&f.path("decay.csv")), "--k", "99", "--p", "5", "--seed", "0", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    // malformed matrix
    fs::write(f.path("bad.csv"), "1,2\n3\n").unwrap();
    let r = greenkit(&["rsvd", "--matrix", s(&f.path("bad.csv")), "--k", "1", "--p", "1", "--seed", "0", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    // config seed disagrees with the flag
    fs::write(f.path("seeded.json"), r#"{"operator": {"preset": "poisson"}, "kernel": {"type": "jacobi"}, "grid_n": 65, "N": 2, "seed": 1}"#).unwrap();
    assert_eq!(greenkit(&["gen-data", "--config", s(&f.path("seeded.json")), "--seed", "2", "--out", s(&out)]).status.code(), Some(1));
    // divergence is a numerical failure
    fs::write(f.path("wild.json"), r#"{"widths": [1, 8, 1], "epochs": 50, "batch_size": 4, "lr": 1e300}"#).unwrap();
    let r = greenkit(&["train-rational", "--data", s(&f.path("table.csv")), "--config", s(&f.path("wild.json")), "--seed", "0", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(greenkit(&["features", "--help"]).status.success());
}

#[test]
fn poisson_end_to_end_is_symmetric() {
    let f = Fixture::new();
    fs::write(
        f.path("poisson.json"),
        r#"{"operator": {"preset": "poisson"}, "kernel": {"type": "jacobi", "M": 40, "nu": 2.0}, "grid_n": 256, "N": 100}"#,
    )
    .unwrap();
    let (data, model, feats) = (f.path("d"), f.path("m"), f.path("f"));
    ok(&["gen-data", "--config", s(&f.path("poisson.json")), "--seed", "7", "--out", s(&data)]);
    ok(&["train-green", "--data", s(&data), "--seed", "7", "--out", s(&model)]);
    ok(&["features", "--checkpoint", s(&model.join("checkpoint.json")), "--out", s(&feats)]);
    let r: serde_json::Value = io::read_json(&feats.join("features.json")).unwrap();
    let sym = r["symmetry_score"].as_f64().unwrap();
    assert!(sym <= 5e-2, "symmetry score {sym}");
    for key in ["dominant_modes", "mode_energies", "singularity_candidates", "hom_norm"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}
