use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motifstore"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn motifstore")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_input(dir: &Path, len: usize) -> (String, Vec<u8>) {
    let mut x: u32 = 12345;
    let data: Vec<u8> = (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 17;
            x ^= x << 5;
            x as u8
        })
        .collect();
    let path = p(dir, "input.bin");
    fs::write(&path, &data).unwrap();
    (path, data)
}

/// encode, simulate and decode in `dir`; returns the decode exit code.
fn round_trip(dir: &Path, threads: &str, coverage: &str, error_rate: &str) -> i32 {
    let (input, _) = write_input(dir, 64 << 10);
    let (pool, manifest, reads, out) = (p(dir, "pool.fa"), p(dir, "manifest.toml"), p(dir, "reads.fa"), p(dir, "out.bin"));
    ok(&["--threads", threads, "encode", &input, "--pool", &pool, "--manifest", &manifest, "--obs-per-oe", "1"]);
    ok(&["--threads", threads, "simulate", "--manifest", &manifest, "--pool", &pool, "--out", &reads, "--coverage", coverage, "--error-rate", error_rate]);
    let d = run(&["--threads", threads, "decode", "--manifest", &manifest, "--reads", &reads, "--out", &out]);
    d.status.code().unwrap()
}

#[test]
fn zero_noise_round_trip_is_exact() {
    let dir = TempDir::new().unwrap();
    assert_eq!(round_trip(dir.path(), "1", "1", "0"), 0);
    let (_, data) = write_input(dir.path(), 64 << 10);
    assert_eq!(fs::read(dir.path().join("out.bin")).unwrap(), data);
    for artifact in ["pool.fa", "manifest.toml", "reads.fa", "out.bin", "out.bin.report.toml"] {
        let side = fs::read_to_string(dir.path().join(format!("{artifact}.config.toml"))).unwrap();
        assert!(side.contains("[config]") && side.contains("seed = "), "{artifact}");
    }
    let report = fs::read_to_string(dir.path().join("out.bin.report.toml")).unwrap();
    assert!(report.contains("crc_match = true"));
}

#[test]
fn thread_count_does_not_change_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(round_trip(a.path(), "1", "6", "0.01"), 0);
    assert_eq!(round_trip(b.path(), "3", "6", "0.01"), 0);
    let mut names: Vec<PathBuf> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for path in names {
        let name = path.file_name().unwrap();
        let (x, y) = (fs::read(&path).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn unrecoverable_data_exits_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(round_trip(dir.path(), "1", "0.3", "0"), 2);
    let report = fs::read_to_string(dir.path().join("out.bin.report.toml")).unwrap();
    assert!(report.contains("crc_match = false"));
}

#[test]
fn row_based_flag_on_columnar_manifest_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (input, _) = write_input(d, 4096);
    ok(&["encode", &input, "--pool", &p(d, "pool.fa"), "--manifest", &p(d, "m.toml")]);
    ok(&["simulate", "--manifest", &p(d, "m.toml"), "--pool", &p(d, "pool.fa"), "--out", &p(d, "r.fa"), "--coverage", "1"]);
    let out = run(&["decode", "--row-based", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa"), "--out", &p(d, "o.bin")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mode mismatch"));
}

#[test]
fn row_based_pool_decodes_with_flags() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (input, data) = write_input(d, 10_000);
    ok(&["encode", &input, "--pool", &p(d, "pool.fa"), "--manifest", &p(d, "m.toml"), "--layout", "row-based", "--columns", "12"]);
    ok(&["simulate", "--manifest", &p(d, "m.toml"), "--pool", &p(d, "pool.fa"), "--out", &p(d, "r.fa"), "--coverage", "5"]);
    ok(&["decode", "--row-based", "--oracle-clusters", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa"), "--out", &p(d, "o.bin")]);
    assert_eq!(fs::read(d.join("o.bin")).unwrap(), data);
    let out = run(&["decode", "--row-based", "--no-realign", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa"), "--out", &p(d, "n.bin")]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    assert!(fs::read_to_string(d.join("n.bin.config.toml")).unwrap().contains("realign = false"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["encode", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let missing = p(dir.path(), "nope.bin");
    let out = run(&["encode", &missing, "--pool", &p(dir.path(), "a"), "--manifest", &p(dir.path(), "b")]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(dir.path().join("bad.toml"), "seed = \"0x1\"\n[layout]\ncolumns = 3\n").unwrap();
    let out = run(&["--config", &p(dir.path(), "bad.toml"), "dict", "stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn config_file_then_flags() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), "[motif]\nmotif_len = 6\nbits_per_motif = 8\n").unwrap();
    let out = ok(&["--config", &p(dir.path(), "c.toml"), "dict", "stats"]);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("motif_len = 6") && text.contains("bits_per_motif = 8"), "{text}");
    let out = ok(&["--config", &p(dir.path(), "c.toml"), "dict", "stats", "--motif-len", "8"]);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("motif_len = 8") && text.contains("valid_motifs = 45208"), "{text}");
}

#[test]
fn random_access_selects_one_extent() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (input, data) = write_input(d, 60_000);
    ok(&["encode", &input, "--pool", &p(d, "pool.fa"), "--manifest", &p(d, "m.toml"), "--obs-per-oe", "1"]);
    let args = ["random-access", "--manifest", &p(d, "m.toml"), "--pool", &p(d, "pool.fa"), "--extent", "1", "--out", &p(d, "r.fa")];
    ok(&[&args[..], &["--coverage", "6", "--improper-binding-rate", "0.26"]].concat());
    ok(&["decode", "--extent", "1", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa"), "--out", &p(d, "o.bin")]);
    let manifest = fs::read_to_string(d.join("m.toml")).unwrap();
    assert!(manifest.contains("motifstore-pool/1"));
    // extent 1 holds bytes [21600, 43200)
    assert_eq!(fs::read(d.join("o.bin")).unwrap(), &data[21_600..43_200]);
    let report = fs::read_to_string(d.join("o.bin.report.toml")).unwrap();
    assert!(report.contains("reads_unassigned"));
}

#[test]
fn min_coverage_csv() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ok(&[
        "eval", "min-coverage", "--random-bytes", "8000", "--columns", "8", "--obs-per-oe", "1",
        "--error-rates", "0.01,0.05,0.12", "--grid", &p(d, "grid.csv"), "--max-coverage", "30",
    ]);
    let csv = String::from_utf8_lossy(&out.stdout).into_owned();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "error_rate,min_coverage");
    assert_eq!(rows.len(), 4, "{csv}");
    let minima: Vec<u32> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(minima.windows(2).all(|w| w[0] <= w[1]), "{minima:?}");
    let grid = fs::read_to_string(d.join("grid.csv")).unwrap();
    assert!(grid.starts_with("error_rate,coverage,trial,recovered,blocks_failed\n"));
    assert!(d.join("grid.csv.config.toml").exists());
}

#[test]
fn metrics_commands() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ok(&["metrics", "costs", "--oligo-count", "153335", "--oligo-len", "117", "--input-bits", "5324800", "--coverage", "51"]);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("write_cost = 3.369") && text.contains("read_cost = 171.8"), "{text}");

    fs::write(d.join("counts.csv"), "object,raw_count,read_count\nssb,2700,654335\ntpch,136,19576\nsyn,2422,1013152\n").unwrap();
    ok(&["metrics", "frac-change", "--counts", &p(d, "counts.csv"), "--out", &p(d, "fc.csv")]);
    let fc = fs::read_to_string(d.join("fc.csv")).unwrap();
    assert!(fc.starts_with("object,raw_count,read_count,p_raw,p_seq,frac_change\n"));
    let ssb: f64 = fc.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((ssb - 0.755).abs() < 0.01);

    let (input, _) = write_input(d, 20_000);
    ok(&["encode", &input, "--pool", &p(d, "pool.fa"), "--manifest", &p(d, "m.toml"), "--obs-per-oe", "1"]);
    ok(&["simulate", "--manifest", &p(d, "m.toml"), "--pool", &p(d, "pool.fa"), "--out", &p(d, "r.fa"), "--coverage", "3", "--error-rate", "0.02"]);
    ok(&["metrics", "error-profile", "--manifest", &p(d, "m.toml"), "--pool", &p(d, "pool.fa"), "--reads", &p(d, "r.fa"), "--out", &p(d, "ep.csv")]);
    let ep = fs::read_to_string(d.join("ep.csv")).unwrap();
    assert!(ep.starts_with("position,sub_rate,ins_rate,del_rate\n0,"));
    let out = ok(&["metrics", "costs", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa")]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("read_cost = "));
    ok(&["metrics", "frac-change", "--manifest", &p(d, "m.toml"), "--reads", &p(d, "r.fa")]);
}
