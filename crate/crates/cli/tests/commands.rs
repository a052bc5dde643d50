use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rcm_oze::oze::{GridFunction, GridGeometry};
use serde_json::Value;
use tempfile::TempDir;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn rcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcm-oze")).args(args).output().unwrap()
}

fn rcm_with(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    rcm(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn pairconn_at_zero_intensity_is_phi() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nt = 0.0\nreplicates = 200\nprobes = [0.5, 0.99, 1.01, 3.0]\n");
    let o = rcm_with(&cfg, tmp.path(), &["pairconn"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("pairconn.csv")).unwrap();
    let est: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(est, vec![1.0, 1.0, 0.0, 0.0]);
    let meta = json(&tmp.path().join("pairconn.json"));
    assert_eq!(meta["estimator"], "pair-connectedness");
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nt = 0.3\nreplicates = 500\nprobes = [0.5, 1.5]\nmax_size = 4\n");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        assert_eq!(code(&rcm_with(&cfg, dir, &["--seed", seed, "pairconn"])), 0);
        assert_eq!(code(&rcm_with(&cfg, dir, &["--seed", seed, "cluster-dist"])), 0);
        assert_eq!(code(&rcm_with(&cfg, dir, &["--seed", seed, "sample"])), 0);
    }
    for f in ["pairconn.csv", "cluster_dist.csv", "points.csv", "edges.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("points.csv")).unwrap(), fs::read(c.join("points.csv")).unwrap());
    let points = fs::read_to_string(a.join("points.csv")).unwrap();
    assert!(points.starts_with("index,pinned,x0\n0,1,0.5\n1,1,1.5\n"));
}

#[test]
fn pairconn_table_feeds_oze() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[run]\nt = 0.2\nprofile_replicates = 2000\nr_max = 6.0\nbin_width = 0.1\n",
    );
    assert_eq!(code(&rcm_with(&cfg, tmp.path(), &["pairconn"])), 0);
    let table = tmp.path().join("pairconn.csv");
    let o = rcm_with(&cfg, &tmp.path().join("oze"), &["oze", "--input", table.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("oze/oze.json"));
    assert_eq!(r["input"], "estimate-table");
    assert!(r["residual"].as_f64().unwrap() < 1e-12);
    let mean = r["mean_cluster_size"].as_f64().unwrap();
    let ip = r["integral_p"].as_f64().unwrap();
    assert!((mean - (1.0 + 0.2 * ip)).abs() < 1e-10);
    // desk-scale Monte Carlo mean is about 1.44
    assert!((mean - 1.44).abs() < 0.05, "mean {mean}");
    assert!(tmp.path().join("oze/q.csv").exists());
}

#[test]
fn oze_on_zero_and_at_zero_intensity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let geom = GridGeometry::new(1, 64, 0.125).unwrap();

    let zero = tmp.path().join("zero.csv");
    GridFunction::zeros(geom).write_csv(fs::File::create(&zero).unwrap()).unwrap();
    assert_eq!(code(&rcm_with(&cfg, &tmp.path().join("z"), &["oze", "--input", zero.to_str().unwrap()])), 0);
    let r = json(&tmp.path().join("z/oze.json"));
    assert_eq!(r["mean_cluster_size"].as_f64().unwrap(), 1.0);
    let q = GridFunction::read_csv(std::io::BufReader::new(fs::File::open(tmp.path().join("z/q.csv")).unwrap())).unwrap();
    assert_eq!(q.sup_norm(), 0.0);

    let p = GridFunction::from_fn(geom, |x| (1.0 - x[0].abs()).max(0.0));
    let csv = tmp.path().join("p.csv");
    let bin = tmp.path().join("p.bin");
    p.write_csv(fs::File::create(&csv).unwrap()).unwrap();
    p.write_binary(fs::File::create(&bin).unwrap()).unwrap();
    for (input, out, name) in [(&csv, "c", "q.csv"), (&bin, "b", "q.bin")] {
        let dir = tmp.path().join(out);
        let o = rcm_with(&cfg, &dir, &["oze", "--zero-intensity", "--input", input.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert_eq!(fs::read(dir.join(name)).unwrap(), fs::read(input).unwrap());
    }
}

#[test]
fn expand_writes_coefficients_and_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nexpansion_order = 2\nt = 0.1\n");
    let o = rcm_with(&cfg, tmp.path(), &["expand"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(tmp.path().join("p_0.csv")).unwrap(), fs::read(tmp.path().join("phi.csv")).unwrap());
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("graphs n=2: 38\n"), "{summary}");
    assert_eq!(fs::read_to_string(tmp.path().join("graphs_2.txt")).unwrap().lines().count(), 38);
    let r = json(&tmp.path().join("expand.json"));
    let orders = r["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 3);
    for o in orders {
        assert!(o["recursion_relative"].as_f64().unwrap() <= 1e-6);
    }
    assert!(r["series"]["tail_bound_p"].as_f64().unwrap().is_finite());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "[run]\nreplicate = 10\n");
    assert_eq!(code(&rcm_with(&bad, tmp.path(), &["sample"])), 2);
    let neg = write_config(tmp.path(), "[box]\nside_length = -1.0\n");
    assert_eq!(code(&rcm_with(&neg, tmp.path(), &["sample"])), 2);

    let cfg = write_config(tmp.path(), "[run]\nt = 1.0\n");
    let missing = tmp.path().join("nope.csv");
    assert_eq!(code(&rcm_with(&cfg, tmp.path(), &["oze", "--input", missing.to_str().unwrap()])), 1);

    // 1 + t P^ = 1 - 2 at every frequency
    let geom = GridGeometry::new(1, 16, 0.5).unwrap();
    let mut p = GridFunction::zeros(geom);
    p.values_mut()[0] = -4.0;
    let path = tmp.path().join("neg.csv");
    p.write_csv(fs::File::create(&path).unwrap()).unwrap();
    let o = rcm_with(&cfg, tmp.path(), &["oze", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical precondition"));
}

fn report(dir: &Path) -> Value {
    json(&dir.join("validate.json"))
}

fn status(r: &Value, id: u64) -> (String, String) {
    let c = r["criteria"].as_array().unwrap().iter().find(|c| c["id"] == id).unwrap();
    (c["status"].as_str().unwrap().into(), c["detail"].as_str().unwrap().into())
}

#[test]
fn truncated_budget_is_inconclusive() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nreplicates = 3000\nprofile_replicates = 500\n");
    let o = rcm_with(&cfg, tmp.path(), &["validate"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(tmp.path());
    assert_eq!(r["truncated_budget"], true);
    assert_eq!(r["failed"], 0);
    for id in [1, 2, 5, 6, 10] {
        let (s, d) = status(&r, id);
        assert_eq!(s, "inconclusive", "criterion {id}");
        assert!(d.contains("budget"));
    }
    for id in [3, 4, 7, 8, 9, 11, 12] {
        assert_eq!(status(&r, id).0, "pass", "criterion {id}");
    }
    assert!(tmp.path().join("validate.txt").exists());
}

#[test]
fn supercritical_intensity_fails_with_explanation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nt = 0.6\nreplicates = 2000\nprofile_replicates = 200\nr_max = 4.0\n");
    let o = rcm_with(&cfg, tmp.path(), &["validate"]);
    assert_eq!(code(&o), 5);
    let r = report(tmp.path());
    let (s3, d3) = status(&r, 3);
    assert_eq!(s3, "fail");
    assert!(d3.contains("subcritical"), "{d3}");
    let (s5, d5) = status(&r, 5);
    assert_eq!(s5, "fail");
    assert!(d5.contains("subcritical"), "{d5}");
}

#[test]
fn validate_report_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nreplicates = 2000\nprofile_replicates = 200\nexpansion_order = 2\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    rcm_with(&cfg, &a, &["validate", "--threads", "2"]);
    rcm_with(&cfg, &b, &["validate"]);
    assert_eq!(fs::read(a.join("validate.json")).unwrap(), fs::read(b.join("validate.json")).unwrap());
}
