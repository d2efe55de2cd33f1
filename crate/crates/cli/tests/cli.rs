use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sparca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparca"))
        .current_dir(dir)
        .env_remove("SPARCA_SEED")
        .env_remove("SPARCA_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sparca(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn blocks(dir: &Path) -> PathBuf {
    ok(dir, &["synth", "--samples", "200", "--classes", "4", "-o", "d.csv"]);
    dir.join("d.csv")
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

const INPUT: [&str; 5] = ["-i", "d.csv", "--header", "--label-column", "last"];

#[test]
fn fit_and_transform_recover_planted_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    blocks(d);
    let summary = ok(d, &[&["fit"][..], &INPUT, &["-k", "8", "-o", "m.json"]].concat());
    assert!(summary.contains("features 80 -> 8"), "{summary}");

    ok(d, &[&["transform"][..], &INPUT, &["-m", "m.json", "-o", "r.csv"]].concat());
    let text = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let notes: Vec<_> = text.lines().filter(|l| l.starts_with("# c")).collect();
    assert_eq!(notes.len(), 8);
    assert!(notes.iter().all(|l| l.contains("features ")));
    let rows = data_lines(&d.join("r.csv"));
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r.split(',').count() == 8));
}

#[test]
fn auto_fit_writes_curve_and_matches_block_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    blocks(d);
    let summary = ok(d, &[&["fit"][..], &INPUT, &["--auto", "--curve-out", "c.csv", "-o", "m.json"]].concat());
    assert!(summary.contains("-> 8 "), "{summary}");
    let curve = data_lines(&d.join("c.csv"));
    assert_eq!(curve[0], "n_clusters,n_features,derivative,selected");
    assert_eq!(curve[1..].iter().filter(|l| l.ends_with(",1")).count(), 1);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        ok(d, &["--seed", "9", "synth", "--kind", "low-rank", "--samples", "40", "--features", "30", "--rank", "5", "-o", name]);
    }
    ok(d, &["--seed", "10", "synth", "--kind", "low-rank", "--samples", "40", "--features", "30", "--rank", "5", "-o", "c.csv"]);
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(data_lines(&d.join("a.csv")), data_lines(&d.join("c.csv")));

    for name in ["m1.json", "m2.json"] {
        ok(d, &["--seed", "3", "fit", "-i", "a.csv", "--header", "-k", "6", "-o", name]);
    }
    assert_eq!(read("m1.json"), read("m2.json"));
}

#[test]
fn eval_and_cf_curve_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    blocks(d);
    std::fs::create_dir(d.join("out")).unwrap();
    ok(d, &[&["eval"][..], &INPUT, &["-k", "8", "--lambdas", "0.01,0.1", "--folds", "3", "--sigmas", "0,1", "-o", "out"]].concat());
    let acc = data_lines(&d.join("out/accuracy.csv"));
    assert_eq!(acc.len(), 3);
    assert_eq!(acc[0], "n_features,lambda,cv_accuracy,test_accuracy,fit_seconds");
    // row 0 is the sparse model, which keeps one component per block here
    assert!(acc[1].starts_with("8,"), "{acc:?}");
    let rob = data_lines(&d.join("out/robustness.csv"));
    assert_eq!(rob[0], "sigma,sparca,pca");
    assert_eq!(rob.len(), 3);
    assert!(d.join("out/model.json").exists());

    ok(d, &[&["cf-curve"][..], &INPUT, &["--grid", "2,8,20", "-o", "c.csv"]].concat());
    let curve = data_lines(&d.join("c.csv"));
    assert_eq!(curve.len(), 4);
    assert!(curve[2].starts_with("8,8,"), "{curve:?}");
}

#[test]
fn profile_reports_both_axes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--threads", "1", "profile", "--sample-grid", "40,80,160,320", "--feature-grid", "20,40,80,160", "--repeats", "1", "-o", "p.csv"]);
    let text = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(text.contains("slope"));
    let rows = data_lines(&d.join("p.csv"));
    assert_eq!(rows[0], "axis,size,seconds");
    assert_eq!(rows.len(), 9);
}

#[test]
fn errors_are_reported_without_panicking() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = sparca(d, &["fit", "-i", "nope.csv", "-k", "2", "-o", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.csv") && !err.contains("panicked"), "{err}");

    let out = sparca(d, &["fit", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    blocks(d);
    ok(d, &[&["fit"][..], &INPUT, &["-k", "8", "-o", "m.json"]].concat());
    ok(d, &["synth", "--kind", "low-rank", "--samples", "30", "--features", "12", "--rank", "3", "-o", "w.csv"]);
    let out = sparca(d, &["transform", "-i", "w.csv", "--header", "-m", "m.json", "-o", "r.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("r.csv").exists());

    let out = sparca(d, &[&["fit"][..], &INPUT, &["-k", "8", "-o", "missing/m.json"]].concat());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}
