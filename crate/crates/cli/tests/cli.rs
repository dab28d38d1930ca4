use std::path::Path;
use std::process::{Command, Output};

fn gpdcm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpdcm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gpdcm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    gpdcm(dir, args).status.code().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn rows(p: impl AsRef<Path>) -> Vec<Vec<String>> {
    read(p).lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn simulate_and_split(dir: &Path, n: &str) {
    ok(dir, &["simulate", "--n", n, "--seed", "3", "--out", "sim"]);
    ok(
        dir,
        &["split", "--data", "sim/data.csv", "--schema", "sim/schema.txt", "--truth", "sim/truth.csv", "--seed", "3", "--out", "sp"],
    );
}

#[test]
fn simulate_defaults_write_a_200_by_12_table() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["simulate", "--out", "s"]);
    let data = rows(t.path().join("s/data.csv"));
    assert_eq!(data.len(), 201);
    assert!(data.iter().all(|r| r.len() == 12));
    assert_eq!(data[0][10..], ["y1", "y2"]);
    let schema = read(t.path().join("s/schema.txt"));
    assert!(schema.contains("y1,continuous,outcome1") && schema.contains("y2,binary,outcome2"));
    assert_eq!(rows(t.path().join("s/truth.csv"))[0].len(), 2 + 12);
    let manifest: serde_json::Value = serde_json::from_str(&read(t.path().join("s/manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["resolved"]["n"], 200);
}

#[test]
fn simulate_is_repeatable() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["simulate", "--seed", "7", "--out", "a"]);
    ok(t.path(), &["simulate", "--seed", "7", "--out", "b"]);
    ok(t.path(), &["simulate", "--seed", "8", "--out", "c"]);
    for f in ["data.csv", "schema.txt", "truth.csv"] {
        assert_eq!(read(t.path().join("a").join(f)), read(t.path().join("b").join(f)));
    }
    assert_ne!(read(t.path().join("a/data.csv")), read(t.path().join("c/data.csv")));
}

#[test]
fn usage_errors_exit_with_2() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(t.path(), &["simulate", "--n", "0"]), 2);
    assert_eq!(code(t.path(), &["simulate", "--bogus"]), 2);
    simulate_and_split(t.path(), "30");
    let base = ["fit", "--data", "sp/data.csv", "--schema", "sp/schema.txt"];
    let with = |extra: &[&'static str]| -> Vec<&str> { base.iter().copied().chain(extra.iter().copied()).collect() };
    assert_eq!(code(t.path(), &with(&["--model", "bogus"])), 2);
    assert_eq!(code(t.path(), &with(&["--model", "mm", "--iters", "10"])), 2);
    assert_eq!(code(t.path(), &with(&["--model", "lvm-mar", "--iters", "10", "--burnin", "10"])), 2);
    assert_eq!(code(t.path(), &["fit", "--model", "mm", "--schema", "sp/schema.txt"]), 2);
}

#[test]
fn missing_files_exit_with_4() {
    let t = tempfile::tempdir().unwrap();
    simulate_and_split(t.path(), "20");
    assert_eq!(code(t.path(), &["fit", "--model", "mm", "--data", "nope.csv", "--schema", "sp/schema.txt"]), 4);
    assert_eq!(code(t.path(), &["simulate", "--config", "nope.toml"]), 4);
}

#[test]
fn degenerate_split_exits_with_3() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("schema.txt"), "x,continuous,covariate\ny1,continuous,outcome1\ny2,binary,outcome2\n").unwrap();
    std::fs::write(t.path().join("data.csv"), "x,y1,y2\n100,0.5,1\n120,0.1,0\n").unwrap();
    let args = ["split", "--mode", "logistic", "--covariate", "x", "--data", "data.csv", "--schema", "schema.txt"];
    assert_eq!(code(t.path(), &args), 3);
}

#[test]
fn split_fit_impute_pipeline() {
    let t = tempfile::tempdir().unwrap();
    simulate_and_split(t.path(), "40");
    let data = rows(t.path().join("sp/data.csv"));
    assert_eq!(data[0].last().unwrap(), "m");
    assert_eq!(rows(t.path().join("sp/hidden.csv")).len(), 41);

    ok(t.path(), &["fit", "--model", "mm", "--data", "sp/data.csv", "--schema", "sp/schema.txt", "--out", "mm"]);
    assert_eq!(rows(t.path().join("mm/imputations.csv")).len(), 41);
    assert_eq!(rows(t.path().join("mm/donors.csv")).len(), 41);

    let stdout = ok(
        t.path(),
        &[
            "fit", "--model", "gpdcm-nmar", "--data", "sp/data.csv", "--schema", "sp/schema.txt", "--iters", "60", "--burnin", "30",
            "--thin", "3", "--per-draw", "--out", "gp",
        ],
    );
    assert!(stdout.contains("kept 10 draws"));
    let trace = rows(t.path().join("gp/trace.csv"));
    assert_eq!(trace.len(), 11);
    assert_eq!(trace[0][..2], ["iteration", "loglik"]);
    let imp = rows(t.path().join("gp/imputations.csv"));
    assert_eq!(imp[0].len(), 4 + 10);
    assert!(read(t.path().join("gp/acceptance.csv")).contains("z,"));

    ok(
        t.path(),
        &["impute", "--data", "sp/data.csv", "--schema", "sp/schema.txt", "--imputations", "gp/imputations.csv", "--out", "imp"],
    );
    let done = rows(t.path().join("imp/completed.csv"));
    assert_eq!(done.len(), 41);
    assert!(done.iter().flatten().all(|v| !v.is_empty()));
    // observed cells are copied unchanged
    let src = rows(t.path().join("sp/data.csv"));
    for (a, b) in src[1..].iter().zip(&done[1..]) {
        for k in 0..10 {
            assert_eq!(a[k], b[k]);
        }
    }
    // binary imputations are rounded to 0/1
    assert!(done[1..].iter().all(|r| r[11] == "0" || r[11] == "1"));

    // imputations that do not match the data are rejected
    assert_eq!(
        code(t.path(), &["impute", "--data", "sp/data.csv", "--schema", "sp/schema.txt", "--imputations", "gp/trace.csv"]),
        2
    );
}

#[test]
fn fit_defaults_keep_400_draws() {
    let t = tempfile::tempdir().unwrap();
    simulate_and_split(t.path(), "200");
    let out = ok(t.path(), &["fit", "--model", "lvm-mar", "--data", "sp/data.csv", "--schema", "sp/schema.txt", "--out", "f"]);
    assert!(out.contains("kept 400 draws of 5000 iterations"), "{out}");
    assert_eq!(rows(t.path().join("f/trace.csv")).len(), 401);
}

#[test]
fn logistic_equal_split_halves_the_units() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["simulate", "--n", "300", "--seed", "1", "--out", "sim"]);
    let out = ok(
        t.path(),
        &["split", "--mode", "logistic", "--covariate", "x1", "--equal", "--data", "sim/data.csv", "--schema", "sim/schema.txt"],
    );
    assert!(out.contains("150 units with m = 1 and 150 with m = 0"), "{out}");
    assert_eq!(
        code(t.path(), &["split", "--mode", "logistic", "--covariate", "nope", "--data", "sim/data.csv", "--schema", "sim/schema.txt"]),
        2
    );
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("c.toml"), "[simulate]\nn = 50\nseed = 4\nsigma = 0.25\n").unwrap();
    ok(t.path(), &["--config", "c.toml", "simulate", "--out", "a"]);
    ok(t.path(), &["simulate", "--config", "c.toml", "--n", "40", "--out", "b"]);
    assert_eq!(rows(t.path().join("a/data.csv")).len(), 51);
    assert_eq!(rows(t.path().join("b/data.csv")).len(), 41);
    let m: serde_json::Value = serde_json::from_str(&read(t.path().join("b/manifest.json"))).unwrap();
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config"]["resolved"]["sigma"], 0.25);

    std::fs::write(t.path().join("bad.toml"), "[simulate]\nsamples = 50\n").unwrap();
    assert_eq!(code(t.path(), &["--config", "bad.toml", "simulate"]), 2);
    std::fs::write(t.path().join("bad2.toml"), "[simulate]\nn = \"many\"\n").unwrap();
    assert_eq!(code(t.path(), &["--config", "bad2.toml", "simulate"]), 2);
}

#[test]
fn benchmark_with_matching_only_reads_one() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(t.path(), &["benchmark", "--reps", "1", "--methods", "mm", "--out", "b"]);
    assert!(out.contains("MM          MAR        1.000   -       1.000   -"), "{out}");
    let raw = rows(t.path().join("b/benchmark.csv"));
    assert_eq!(raw[0], ["replication", "method", "outcome_kind", "mse", "ratio"]);
    assert_eq!(raw.len(), 3);
    assert!(raw[1..].iter().all(|r| r[4] == "1.0"));
}

#[test]
fn select_d_standardizes_at_one() {
    let t = tempfile::tempdir().unwrap();
    simulate_and_split(t.path(), "40");
    let out = ok(
        t.path(),
        &[
            "select-d", "--model", "lvm-nmar", "--candidates", "3,1,2", "--iters", "60", "--burnin", "30", "--data", "sp/data.csv",
            "--schema", "sp/schema.txt", "--out", "s",
        ],
    );
    assert!(out.contains("chosen d = "));
    let caic = rows(t.path().join("s/caic.csv"));
    assert_eq!(caic[0][..4], ["d", "method", "caic", "ratio"]);
    assert_eq!(caic[1][0], "1");
    assert_eq!(caic[1][3], "1.0");
    assert_eq!(caic.len(), 4);
}
