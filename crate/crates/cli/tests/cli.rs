use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blendmatch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn generated(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("data.csv");
    let out = run(&[
        "--quiet",
        "generate",
        "--n",
        &n.to_string(),
        "--mechanism",
        "mar",
        "--proportion",
        "0.3",
        "--rho",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

/// Parsed `--quiet` table rows below the header.
fn tsv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index\tpd\tmd\tblend_value");
    lines
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn match_prints_k_rows_in_ascending_order() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 80);
    let out = run(&[
        "--quiet",
        "match",
        "--input",
        data.to_str().unwrap(),
        "--target-row",
        "4",
        "--k",
        "5",
        "--blend",
        "0.5",
    ]);
    assert!(out.status.success());
    let rows = tsv_rows(&stdout(&out));
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0][3] <= w[1][3]));
    assert!(rows.iter().all(|r| r[0] != 4.0));
}

#[test]
fn full_blend_selects_the_pmm_donors() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 80);
    let donors = |extra: &[&str]| {
        let mut args = vec![
            "--quiet",
            "match",
            "--input",
            data.to_str().unwrap(),
            "--target-row",
            "7",
        ];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert!(out.status.success());
        let mut idx: Vec<u64> = tsv_rows(&stdout(&out))
            .iter()
            .map(|r| r[0] as u64)
            .collect();
        idx.sort();
        idx
    };
    assert_eq!(
        donors(&["--family", "ranked", "--blend", "1"]),
        donors(&["--family", "pmm"])
    );
    assert_eq!(
        donors(&["--family", "scaled", "--blend", "1"]),
        donors(&["--family", "pmm"])
    );
}

#[test]
fn distance_table_covers_every_donor() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 50);
    let table = dir.path().join("dist.csv");
    let out = run(&[
        "match",
        "--input",
        data.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(&table).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["index", "pd", "md"]);
    let observed = std::fs::read_to_string(&data)
        .unwrap()
        .lines()
        .skip(1)
        .enumerate()
        .filter(|(i, l)| *i != 0 && l.ends_with(",1"))
        .count();
    assert_eq!(rdr.records().count(), observed);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 40);
    let data = data.to_str().unwrap();

    let out = run(&["match", "--input", data, "--blend", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["match", "--input", data, "--family", "nope"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,x2,x3,y\n1,2,3,4\n1,2,oops,5\n").unwrap();
    let out = run(&["match", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["match", "--input", data, "--target-row", "40"]);
    assert_eq!(out.status.code(), Some(3));

    let missing = dir.path().join("absent.csv");
    let out = run(&["match", "--input", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&[
        "impute",
        "--input",
        data,
        "--out",
        "/nonexistent/dir/imp.csv",
    ]);
    assert_eq!(out.status.code(), Some(4));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn impute_writes_m_columns_and_keeps_observed_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 60);
    let out_path = dir.path().join("imp.csv");
    let out = run(&[
        "impute",
        "--input",
        data.to_str().unwrap(),
        "--m",
        "4",
        "--blend",
        "0.3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("pooled mean"));
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["row", "observed", "imp1", "imp2", "imp3", "imp4"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 60);
    for r in rows.iter().filter(|r| &r[1] == "1") {
        assert!(r[2] == r[3] && r[3] == r[4] && r[4] == r[5]);
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 60);
    let once = |threads: &str| {
        let out = run(&[
            "--threads",
            threads,
            "--seed",
            "11",
            "impute",
            "--input",
            data.to_str().unwrap(),
            "--m",
            "6",
            "--family",
            "scaled",
            "--blend",
            "0.5",
        ]);
        assert!(out.status.success());
        out.stdout
    };
    let a = once("1");
    assert_eq!(a, once("1"));
    assert_eq!(a, once("3"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = generated(dir.path(), 60);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# donors\nk = 3\nfamily = ranked\nblend = 0.2\n").unwrap();
    let base = [
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "match",
        "--input",
        data.to_str().unwrap(),
    ];
    let out = run(&base);
    assert!(out.status.success());
    assert_eq!(tsv_rows(&stdout(&out)).len(), 3);
    let mut args = base.to_vec();
    args.extend(["--k", "6"]);
    assert_eq!(tsv_rows(&stdout(&run(&args))).len(), 6);

    std::fs::write(&cfg, "blend = 3\n").unwrap();
    assert_eq!(run(&base).status.code(), Some(1));
}

#[test]
fn study1_reduced_grid_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s1");
    let args = [
        "--quiet",
        "study1",
        "--nsim",
        "3",
        "--mechanism",
        "mar",
        "--proportion",
        "0.5",
        "--rho",
        "0.7",
        "--family",
        "ranked",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // 2 distributions × 3 ranked blends
    assert_eq!(stdout(&out).lines().count(), 1 + 6);
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("nsim") && manifest.contains("cells"));
    assert_eq!(run(&args).stdout, out.stdout);
}

#[test]
fn study1_rejects_empty_filters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "study1",
        "--nsim",
        "2",
        "--rho",
        "0.3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn study2_and_figure1_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let s2 = dir.path().join("s2");
    let out = run(&[
        "--quiet",
        "study2",
        "--nsim",
        "2",
        "--m",
        "5",
        "--out",
        s2.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out).lines().count(), 1 + 12);
    assert!(s2.join("table8.csv").exists());

    let f1 = dir.path().join("f1");
    let out = run(&[
        "--quiet",
        "demo-figure1",
        "--k",
        "4",
        "--out",
        f1.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(tsv_rows(&stdout(&out)).len(), 4);
    let table = std::fs::read_to_string(f1.join("figure1.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 199);
    assert!(f1.join("figure1_matches.csv").exists());
}
