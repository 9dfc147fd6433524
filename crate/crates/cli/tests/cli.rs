use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_oblique-stab");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV: comment lines and the header row dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

/// `key=value` from a whitespace separated line.
fn field(line: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    line.split_whitespace()
        .find_map(|w| w.strip_prefix(&prefix))
        .map(num)
        .unwrap_or_else(|| panic!("{key} missing in {line:?}"))
}

fn final_ratio(o: &Output) -> f64 {
    assert!(o.status.success(), "{}", stderr(o));
    let line = stderr(o);
    field(line.lines().last().unwrap(), "ratio")
}

#[test]
fn csv_starts_with_config_comment_and_header() {
    let o = run(&["eigs", "--m", "1..4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# command=eigs"));
    assert!(comment.contains("m=1..4"));
    assert_eq!(lines.next().unwrap(), "bc,scheme,M,r,vartheta_numeric,vartheta_analytic,op_norm,limit,max_offdiag_theta");
    assert_eq!(rows(&text).len(), 4);
}

#[test]
fn identical_configuration_gives_identical_bytes() {
    let args = ["eigs", "--bc", "both", "--scheme", "mxe,uni", "--m", "1..40", "--r", "0.3,0.6", "--skip-invalid"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
}

#[test]
fn neumann_uni_slope_near_minus_one_thousandth() {
    let dir = tempfile::tempdir().unwrap();
    let slopes = dir.path().join("slopes.csv");
    let o = run(&[
        "eigs", "--bc", "neumann", "--scheme", "uni", "--r", "0.2", "--m", "1..120", "--slopes",
        slopes.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(&slopes).unwrap();
    let s = rows(&format!("#\n{table}"));
    assert_eq!(s.len(), 3);
    let first = num(&s[0][5]);
    assert!(first < -0.5e-3 && first > -2e-3, "slope {first}");
}

#[test]
fn dirichlet_mxe_sweep_reaches_the_limit() {
    let o = run(&["eigs", "--scheme", "mxe", "--r", "0.5", "--m", "2..200"]);
    let data = rows(&stdout(&o));
    let last = data.last().unwrap();
    assert_eq!(last[2], "200");
    let limit = 4.0 / (0.5 * PI * PI) * (0.25 * PI).sin().powi(2);
    assert!((num(&last[4]) / limit - 1.0).abs() < 0.01);
    assert_eq!(num(&last[7]), limit);
}

#[test]
fn uni_constraint_is_an_invalid_configuration() {
    let o = run(&["eigs", "--scheme", "uni", "--r", "0.9", "--m", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("M >= r/(1-r)"), "{}", stderr(&o));
}

#[test]
fn degenerate_concentrated_placement_is_a_numerical_failure() {
    let o = run(&["eigs", "--scheme", "con", "--r", "0.3", "--m", "1..30"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("direct sum"));
}

#[test]
fn bad_flags_and_help() {
    assert_eq!(run(&["eigs", "--r", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--reaction", "exp(x)"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "# small sweep\ncommand=eigs\nbc = neumann\nm=3\nr=0.2\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = rows(&stdout(&o));
    assert_eq!(data.len(), 1);
    assert_eq!((data[0][0].as_str(), data[0][2].as_str()), ("neumann", "3"));
    assert_eq!(num(&data[0][3]), 0.2);
    assert!(stdout(&o).lines().next().unwrap().contains("config="));

    let o = run(&["eigs", "--config", cfg.to_str().unwrap(), "--r", "0.4"]);
    assert_eq!(num(&rows(&stdout(&o))[0][3]), 0.4);

    fs::write(&cfg, "m 3\n").unwrap();
    assert_eq!(run(&["eigs", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["eigs", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn norm_sweep_with_finite_elements() {
    let o = run(&["norm", "--bc", "both", "--m", "1..4", "--nodes", "1001", "--length", "2.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for row in rows(&stdout(&o)) {
        let (op, limit, discrete) = (num(&row[5]), num(&row[6]), num(&row[7]));
        assert!(op > 1.0 && op <= limit);
        assert!((discrete / op - 1.0).abs() < 0.05);
    }
}

fn project_rows(path: &Path) -> (f64, f64, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let residuals = text.lines().nth(1).unwrap();
    (field(residuals, "oblique_residual"), field(residuals, "orthogonal_residual"), rows(&text))
}

#[test]
fn constant_input_orthogonal_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let coef = dir.path().join("c.csv");
    let f0: f64 = -1.7;
    let o = run(&[
        "project", "--constant", "-1.7", "--m", "6", "--r", "0.1", "-o", out.to_str().unwrap(), "--coefficients",
        coef.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (obl, orth, data) = project_rows(&out);
    assert!((orth - f0.abs() * ((1.0 - 0.1) * PI).sqrt()).abs() <= 1e-6);
    assert!(obl >= orth);
    assert_eq!(data.len(), 1001);
    assert_eq!(rows(&fs::read_to_string(&coef).unwrap()).len(), 6);
}

#[test]
fn sampled_input_oblique_never_beats_orthogonal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.csv");
    let n = 2001;
    let mut text = String::from("x,f\n");
    for i in 0..n {
        let x = PI * i as f64 / (n - 1) as f64;
        let f = if x < 0.5 { (x - 1.0) * (x - 2.0) * (x - 3.0) } else { 0.0 };
        text.push_str(&format!("{x},{f}\n"));
    }
    fs::write(&input, text).unwrap();
    for bc in ["dirichlet", "neumann"] {
        let out = dir.path().join(format!("{bc}.csv"));
        let o = run(&[
            "project", "--bc", bc, "--input", input.to_str().unwrap(), "--m", "6", "--r", "0.1", "-o",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (obl, orth, data) = project_rows(&out);
        assert!(obl >= orth, "{bc}: {obl} < {orth}");
        assert_eq!(data.len(), n);
    }
    assert_eq!(run(&["project", "--m", "6"]).status.code(), Some(2));
}

#[test]
fn constant_reaction_feedback_stabilises() {
    let o = run(&["simulate", "--bc", "dirichlet", "--m", "6", "--t-final", "4.5", "--every", "100"]);
    assert!(final_ratio(&o) < 1e-2);
    let text = stdout(&o);
    assert!(text.starts_with("# command=simulate"));
    assert_eq!(rows(&text).len(), 46);
}

#[test]
fn free_dynamics_grow() {
    for bc in ["dirichlet", "neumann"] {
        let o = run(&["simulate", "--bc", bc, "--feed-on", "off", "--t-final", "2", "--every", "1000"]);
        assert!(o.status.success());
        let data = rows(&stdout(&o));
        assert!(num(&data[2][1]) > num(&data[0][1]));
        assert!(data.iter().all(|r| r[2] == "0"));
    }
}

#[test]
fn oscillating_reaction_with_eight_actuators_decays() {
    for bc in ["dirichlet", "neumann"] {
        let o = run(&["simulate", "--bc", bc, "--m", "8", "--reaction", "oscillating", "--every", "4500"]);
        assert!(final_ratio(&o) < 1.0, "{bc}");
    }
}

#[test]
fn tabulated_constant_reaction_matches_constant_selector() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("a.csv");
    fs::write(&table, "t,0,3.2\n0,-3.5,-3.5\n10,-3.5,-3.5\n").unwrap();
    let base = ["simulate", "--bc", "neumann", "--m", "5", "--nodes", "201", "--k", "0.01", "--t-final", "1"];
    let a = run(&[&base[..], &["--reaction", "constant:-3.5"]].concat());
    let b = run(&[&base[..], &["--reaction", &format!("table:{}", table.display())]].concat());
    let (ra, rb) = (rows(&stdout(&a)), rows(&stdout(&b)));
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        assert!((num(&x[1]) - num(&y[1])).abs() <= 1e-12 * num(&x[1]));
    }
}

#[test]
fn feedback_window_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("s.csv");
    let o = run(&[
        "simulate", "--m", "6", "--nodes", "301", "--t-final", "6", "--feed-on", "0,4.5", "--every", "500",
        "--snapshots", "0,4.5,6", "--snapshot-output", snaps.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = rows(&stdout(&o));
    let at = |t: f64| data.iter().find(|r| (num(&r[0]) - t).abs() < 1e-9).unwrap().clone();
    assert_eq!(at(4.5)[2], "1");
    assert_eq!(at(5.0)[2], "0");
    assert!(num(&at(6.0)[1]) > num(&at(4.5)[1]));

    let text = fs::read_to_string(&snaps).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("x,y@"));
    let s = rows(&text);
    assert_eq!(s.len(), 301);
    assert_eq!(s[0].len(), 4);

    assert_eq!(run(&["simulate", "--snapshots", "1"]).status.code(), Some(2));
}

#[test]
fn suffcond_reports_both_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let o = run(&["suffcond", "--a-bound", "2", "--r", "0.3", "--table", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = rows(&stdout(&o));
    assert_eq!(data.len(), 2);
    for row in &data {
        let swept: usize = row[6].parse().unwrap();
        let limit: usize = row[9].parse().unwrap();
        assert!(swept <= limit);
    }
    assert!(rows(&fs::read_to_string(&table).unwrap()).len() >= 2);

    let zero = rows(&stdout(&run(&["suffcond", "--a-bound", "0"])));
    assert!(zero.iter().all(|r| r[6] == "1"));
    assert_eq!(run(&["suffcond", "--a-bound=-1"]).status.code(), Some(2));
}
