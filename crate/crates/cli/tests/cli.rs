use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn argap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argap"))
        .args(args)
        .current_dir(dir)
        .env("ARGAP_CACHE_DIR", dir.join("cache"))
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = argap(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("cache")).unwrap();
    dir
}

const FOURTH_ORDER_MODES: &str = "psi_1,psi_2,psi_3,psi_4\n1.5,-0.76,0.01,0.12\n-1.5,-0.76,-0.01,0.12\n";

#[test]
fn sample_writes_stable_filters_and_is_reproducible() {
    let dir = workspace();
    let a = ok(dir.path(), &["sample", "--lag", "2", "--count", "50", "--seed", "7"]);
    let b = ok(dir.path(), &["sample", "--lag", "2", "--count", "50", "--seed", "7"]);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "psi_1,psi_2");
    assert_eq!(lines.len(), 51);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1].abs() < 1.0 && v[1] < 1.0 - v[0].abs());
    }
    assert!(dir.path().join("cache/volumes_L2_n1000000_s1592590337.json").exists());
}

#[test]
fn zero_count_gives_header_only() {
    let dir = workspace();
    assert_eq!(ok(dir.path(), &["sample", "--lag", "3", "--count", "0"]), "psi_1,psi_2,psi_3\n");
}

#[test]
fn json_format_is_available() {
    let dir = workspace();
    let out = ok(dir.path(), &["--format", "json", "sample", "--lag", "1", "--count", "2", "--seed", "1"]);
    assert!(out.trim_start().starts_with('['));
}

#[test]
fn user_errors_exit_with_two() {
    let dir = workspace();
    let out = argap(dir.path(), &["sample", "--lag", "9", "--count", "1"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("ref.csv"), "# lag=1 filters=10 instances=1 seed=0\nM,log_w_ref\n1,0.3\n2,0.1\n")
        .unwrap();
    fs::write(dir.path().join("short.csv"), "x\n0.5\n").unwrap();
    let out =
        argap(dir.path(), &["select", "--series", "short.csv", "--lag", "1", "--mmax", "2", "--refcurve", "ref.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("series too short"));

    fs::write(dir.path().join("bad.csv"), "x\n0.5\n0.25\nnope\n").unwrap();
    let out = argap(dir.path(), &["fit", "--series", "bad.csv", "--lag", "1", "--modes", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let out =
        argap(dir.path(), &["select", "--series", "missing.csv", "--lag", "1", "--mmax", "2", "--refcurve", "ref.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn refcurve_rows_and_single_row() {
    let dir = workspace();
    let args = [
        "refcurve",
        "--lag",
        "1",
        "--mmax",
        "4",
        "--filters",
        "60",
        "--instances",
        "2",
        "--kmedoids-restarts",
        "2",
        "--seed",
        "5",
    ];
    let a = ok(dir.path(), &args);
    assert_eq!(a, ok(dir.path(), &args));
    let values: Vec<f64> = a.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!(values.windows(2).all(|p| p[1] <= p[0]));
    let single = ok(dir.path(), &["refcurve", "--lag", "1", "--mmax", "1", "--filters", "20", "--instances", "1"]);
    assert_eq!(single.lines().count(), 3);
}

#[test]
fn simulate_then_select_recovers_two_modes() {
    let dir = workspace();
    let d = dir.path();
    fs::write(d.join("modes.csv"), FOURTH_ORDER_MODES).unwrap();
    ok(
        d,
        &[
            "refcurve",
            "--lag",
            "4",
            "--mmax",
            "4",
            "--filters",
            "200",
            "--instances",
            "2",
            "--kmedoids-restarts",
            "2",
            "--seed",
            "3",
            "-o",
            "ref.csv",
        ],
    );
    ok(
        d,
        &[
            "simulate",
            "--filters",
            "modes.csv",
            "--probabilities",
            "0.4,0.6",
            "--sigma2",
            "0.01",
            "--length",
            "1000",
            "--seed",
            "1",
            "-o",
            "series.csv",
        ],
    );
    let args = [
        "--format",
        "json",
        "select",
        "--series",
        "series.csv",
        "--lag",
        "4",
        "--mmax",
        "4",
        "--refcurve",
        "ref.csv",
        "--em-restarts",
        "5",
        "--seed",
        "1",
    ];
    let out = ok(d, &args);
    assert_eq!(out, ok(d, &args));
    assert!(out.contains("\"selected_m\": 2"), "{out}");
    assert!(out.contains("\"presample\": \"leading_observations\""));
    assert!(out.contains("\"n_observations\": 1000"));

    let csv = ok(
        d,
        &[
            "select",
            "--series",
            "series.csv",
            "--lag",
            "4",
            "--mmax",
            "4",
            "--refcurve",
            "ref.csv",
            "--em-restarts",
            "5",
        ],
    );
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# presample=leading_observations n=1000"));
    assert_eq!(lines.next().unwrap(), "M,log_w_ref,log_mspe_emp,gap");
    assert_eq!(lines.count(), 4);
}

#[test]
fn explicit_presample_keeps_all_observations() {
    let dir = workspace();
    let d = dir.path();
    let series: String = std::iter::once("x".to_string())
        .chain((0..60).map(|i| format!("{}", ((i * 7919) % 13) as f64 - 6.0)))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(d.join("s.csv"), series + "\n").unwrap();
    fs::write(d.join("pre.csv"), "x\n0.5\n-0.5\n").unwrap();
    let out = ok(
        d,
        &["--format", "json", "fit", "--series", "s.csv", "--presample", "pre.csv", "--lag", "2", "--modes", "1"],
    );
    assert!(out.contains("\"presample\": \"file\""));
    assert!(out.contains("\"n_observations\": 60"));
    let out = ok(d, &["--format", "json", "fit", "--series", "s.csv", "--lag", "2", "--modes", "1"]);
    assert!(out.contains("\"n_observations\": 58"));
}

#[test]
fn experiment_counts_sum_to_replications() {
    let dir = workspace();
    let args = [
        "experiment",
        "--scenario",
        "2",
        "--replications",
        "1",
        "--em-restarts",
        "2",
        "--mmax",
        "3",
        "--filters",
        "60",
        "--instances",
        "1",
        "--kmedoids-restarts",
        "1",
        "--seed",
        "4",
    ];
    let out = ok(dir.path(), &args);
    assert_eq!(out, ok(dir.path(), &args));
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "scenario,method,selected_m,count,accuracy");
    for method in ["gap", "aic", "bic"] {
        let total: usize = out
            .lines()
            .filter(|l| l.starts_with(&format!("2,{method},")) && !l.contains(",all,"))
            .map(|l| l.split(',').nth(3).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 1);
        assert!(out.contains(&format!("2,{method},all,1,")));
    }
}

#[test]
fn simulate_warns_when_switching_diverges() {
    let dir = workspace();
    let d = dir.path();
    fs::write(
        d.join("bad.csv"),
        "psi_1,psi_2\n1.4206710748137317,-0.6417524775880293\n-1.10861848898671,-0.8716189061702846\n",
    )
    .unwrap();
    let out = argap(d, &["simulate", "--filters", "bad.csv", "--length", "50", "-o", "s.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unbounded variance"));
    let out = argap(d, &["simulate", "--filters", "bad.csv", "--segments", "2", "--length", "50", "-o", "s.csv"]);
    assert!(out.stderr.is_empty());
}
