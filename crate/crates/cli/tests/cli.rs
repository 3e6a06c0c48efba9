use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use compolicy_core::datamodel::{contrast_profile, fit_q_models, FeatureMap};
use compolicy_core::estimation::{
    fit_fixed_grid, fit_metropolis, MetropolisConfig, MetropolisMode, ProfileProblem, ProposalSd,
};
use compolicy_core::numcore::RngStream;
use compolicy_core::simlab::Scenario;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compolicy"))
        .current_dir(dir)
        .env_remove("COMPOLICY_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `key = value` lines of a report.
fn report(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn real(map: &BTreeMap<String, String>, key: &str) -> f64 {
    map.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

/// Data rows of a CSV file, header first, provenance comments dropped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn two_record_file_gets_a_decision_per_record() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "two.csv", "a,y,z\n1,2.0,1.0\n-1,-1.0,0.5\n");
    ok(dir.path(), &["fit", "--input", "two.csv", "--outcomes", "y,z", "--out", "o"]);
    let rows = csv_rows(&dir.path().join("o/decisions.csv"));
    assert_eq!(rows[0], ["row", "recommended", "score", "omega_y", "omega_z", "p_optimal"]);
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r[1] == "1" || r[1] == "-1"));
}

#[test]
fn zero_one_actions_are_recoded_and_reported() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "two.csv", "a,y,z\n1,2.0,1.0\n0,-1.0,0.5\n");
    let out = ok(dir.path(), &["fit", "--input", "two.csv", "--outcomes", "y,z", "--out", "o"]);
    assert!(stderr(&out).contains("recoded"));
    let r = report(&dir.path().join("o/fit.txt"));
    assert_eq!(r["action_coding"], "0/1");
    assert!(r["note"].contains("recoded"));
}

#[test]
fn negated_outcomes_are_flipped_on_ingestion() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "two.csv", "a,y,z\n1,2.0,1.0\n-1,-1.0,0.5\n");
    ok(dir.path(), &["fit", "--input", "two.csv", "--outcomes", "y,z", "--negate", "y", "--out", "o"]);
    let r = report(&dir.path().join("o/fit.txt"));
    assert_eq!(r["negated"], "y");
    let out = run(dir.path(), &["fit", "--input", "two.csv", "--outcomes", "y,z", "--negate", "w"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn user_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "d.csv", "x,a,y,z\n0.1,1,2.0,1.0\n0.2,-1,-1.0,0.5\n");
    write(dir.path(), "bad_action.csv", "a,y,z\n2,2.0,1.0\n-1,-1.0,0.5\n");
    write(dir.path(), "ragged.csv", "a,y,z\n1,2.0\n-1,-1.0,0.5\n");
    write(dir.path(), "text.csv", "a,y,z\n1,abc,1.0\n-1,-1.0,0.5\n");

    let out = run(dir.path(), &["fit", "--input", "d.csv", "--outcomes", "y,w"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("'w'"));
    let out = run(dir.path(), &["fit", "--input", "bad_action.csv", "--outcomes", "y,z"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("action"));
    assert_eq!(run(dir.path(), &["fit", "--input", "ragged.csv", "--outcomes", "y,z"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["fit", "--input", "text.csv", "--outcomes", "y,z"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["fit", "--input", "missing.csv", "--outcomes", "y,z"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["fit", "--input", "d.csv"]).status.code(), Some(2));

    let out = run(dir.path(), &["boot-test", "--input", "d.csv", "--outcomes", "y,z", "--seed", "1", "--n-boot", "99"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_boot"));

    assert_eq!(run(dir.path(), &["simulate", "--scenario", "s9", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--scenario", "s3", "--omega", "0.5", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--scenario", "s1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["replicate", "--table", "T11", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn singular_designs_exit_with_code_three() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("x,a,y,z\n");
    for i in 0..20 {
        let a = if i % 2 == 0 { 1 } else { -1 };
        text.push_str(&format!("1.0,{a},{}.0,{}.5\n", i % 3, i % 4));
    }
    write(dir.path(), "const.csv", &text);
    let out = run(dir.path(), &["fit", "--input", "const.csv", "--outcomes", "y,z"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn config_file_values_are_overridden_by_flags_and_echoed() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "run.cfg", "# simulation\nscenario = s1\nn = 50\nseed = 1\n");
    ok(dir.path(), &["simulate", "--config", "run.cfg", "--seed", "2", "--out", "a"]);
    ok(dir.path(), &["simulate", "--scenario", "s1", "--n", "50", "--seed", "2", "--out", "b"]);
    let a = fs::read_to_string(dir.path().join("a/data.csv")).unwrap();
    assert!(a.contains("# seed = 2"));
    assert_eq!(a, fs::read_to_string(dir.path().join("b/data.csv")).unwrap());

    write(dir.path(), "bad.cfg", "scenario = s1\nunknown_key = 3\n");
    let out = run(dir.path(), &["simulate", "--config", "bad.cfg", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown_key"));
}

#[test]
fn simulate_writes_data_and_truth_separately() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--scenario", "s1", "--n", "100", "--rho", "1", "--seed", "4", "--out", "s1"]);
    let data = csv_rows(&dir.path().join("s1/data.csv"));
    assert_eq!(data[0], ["x1", "x2", "x3", "x4", "x5", "a", "y", "z"]);
    assert_eq!(data.len(), 101);
    let truth = csv_rows(&dir.path().join("s1/truth.csv"));
    let optimal = truth[0].iter().position(|h| h == "optimal").unwrap();
    assert!(!data[0].contains(&"optimal".to_string()));
    for (d, t) in data[1..].iter().zip(&truth[1..]) {
        assert_eq!(d[5], t[optimal]);
    }

    ok(dir.path(), &["simulate", "--scenario", "s5", "--n", "20", "--seed", "4", "--out", "s5"]);
    let data = csv_rows(&dir.path().join("s5/data.csv"));
    assert_eq!(data[0][6..], ["y1", "y2", "y3"]);
}

#[test]
fn simulate_then_fit_matches_in_process_grid_fit_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--scenario", "s1", "--n", "500", "--seed", "11", "--out", "sim"]);
    ok(dir.path(), &["fit", "--input", "sim/data.csv", "--outcomes", "y,z", "--out", "fit"]);
    let r = report(&dir.path().join("fit/fit.txt"));

    let scenario = Scenario::fixed_fixed(500, 0.25, 0.8).unwrap();
    let (data, _) = scenario.generate(&mut RngStream::new(11)).unwrap();
    let q = fit_q_models(&data).unwrap();
    let problem = ProfileProblem::new(&data, &q, FeatureMap::full(5)).unwrap();
    let fit = fit_fixed_grid(&problem, 100).unwrap();

    assert_eq!(real(&r, "omega_y"), fit.utility.parameters()[0]);
    assert!((real(&r, "omega_y") - 0.25).abs() <= 0.05);
    assert_eq!(real(&r, "pseudo_loglik"), fit.pseudo_loglik_at_max);
    let names = ["intercept", "x1", "x2", "x3", "x4", "x5"];
    for (name, b) in names.iter().zip(&fit.behavior.beta) {
        assert_eq!(real(&r, &format!("beta_{name}")), *b);
    }
    let rows = csv_rows(&dir.path().join("fit/decisions.csv"));
    for (i, row) in rows[1..].iter().enumerate() {
        let x = data.covariate_row(i);
        assert_eq!(row[2].parse::<f64>().unwrap(), contrast_profile(&q, &fit.utility, x).score);
        assert_eq!(row[5].parse::<f64>().unwrap(), fit.behavior.prob_optimal(x));
    }
}

#[test]
fn simulate_then_fit_matches_in_process_chain_fit_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--scenario", "s3", "--n", "200", "--seed", "8", "--out", "sim"]);
    ok(
        dir.path(),
        &[
            "fit", "--input", "sim/data.csv", "--outcomes", "y,z", "--utility", "patient", "--chain-length", "600",
            "--seed", "3", "--out", "fit",
        ],
    );
    let r = report(&dir.path().join("fit/fit.txt"));

    let (data, _) = Scenario::var_var(200).unwrap().generate(&mut RngStream::new(8)).unwrap();
    let q = fit_q_models(&data).unwrap();
    let problem = ProfileProblem::new(&data, &q, FeatureMap::full(5)).unwrap();
    let config = MetropolisConfig { proposal_sd: ProposalSd::Fixed(0.1), ..MetropolisConfig::new(600, 3) };
    let fit = fit_metropolis(&problem, &config, &MetropolisMode::PatientSpecific { features: FeatureMap::full(5) })
        .unwrap();
    let names = ["intercept", "x1", "x2", "x3", "x4", "x5"];
    for (name, t) in names.iter().zip(fit.utility.parameters()) {
        assert_eq!(real(&r, &format!("theta_y_{name}")), t);
    }
    assert_eq!(real(&r, "pseudo_loglik"), fit.pseudo_loglik_at_max);
}

#[test]
fn every_command_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for (out, jobs) in [("a", "1"), ("b", "2")] {
        let o = |name: &str| format!("{out}/{name}");
        ok(d, &["simulate", "--scenario", "s4", "--n", "120", "--seed", "6", "--out", &o("sim"), "--jobs", jobs]);
        ok(d, &["fit", "--input", "a/sim/data.csv", "--outcomes", "y,z", "--folds", "3", "--out", &o("fit")]);
        ok(
            d,
            &[
                "boot-test", "--input", "a/sim/data.csv", "--outcomes", "y,z", "--chain-length", "300", "--n-boot",
                "100", "--seed", "6", "--out", &o("boot"), "--jobs", jobs,
            ],
        );
        ok(
            d,
            &[
                "replicate", "--table", "T1", "--reps", "3", "--sizes", "100", "--test-n", "50", "--seed", "6",
                "--out", &o("rep"), "--jobs", jobs,
            ],
        );
    }
    for sub in ["sim", "fit", "boot", "rep"] {
        let a = files(&d.join("a").join(sub));
        assert!(!a.is_empty());
        assert_eq!(a, files(&d.join("b").join(sub)), "{sub}");
    }
}

#[test]
fn boot_test_reports_statistic_and_draw_summaries() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--scenario", "s4", "--n", "150", "--seed", "2", "--out", "sim"]);
    ok(
        d,
        &[
            "boot-test", "--input", "sim/data.csv", "--outcomes", "y,z", "--chain-length", "400", "--n-boot", "200",
            "--seed", "2", "--out", "boot",
        ],
    );
    let r = report(&d.join("boot/test.txt"));
    let p = real(&r, "p_value");
    assert!((1.0 / 201.0..=1.0).contains(&p));
    assert_eq!(r["n_boot"], "200");
    assert_eq!(r["reject"], (p <= 0.05).to_string());
    for name in ["theta_y_intercept", "theta_y_x1", "theta_y_x2"] {
        assert!(real(&r, &format!("u_{name}_sd")) > 0.0);
        assert!(real(&r, &format!("u_{name}_q025")) <= real(&r, &format!("u_{name}_q975")));
    }
    assert!(r.contains_key("b_x2_mean"));
}

#[test]
fn replicate_writes_table_with_provenance() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["replicate", "--table", "T1", "--reps", "2", "--sizes", "100", "--test-n", "50", "--seed", "1", "--out", "r"],
    );
    let csv = fs::read_to_string(dir.path().join("r/table1.csv")).unwrap();
    let txt = fs::read_to_string(dir.path().join("r/table1.txt")).unwrap();
    for text in [&csv, &txt] {
        assert!(text.contains("# seed = 1"));
        assert!(text.contains("# reps = 2"));
        assert!(text.contains("# y3_reading = additive"));
        assert!(text.contains(concat!("compolicy ", env!("CARGO_PKG_VERSION"))));
        assert!(text.contains("# scenario: S1_fixed_fixed n=100"));
    }
    let rows = csv_rows(&dir.path().join("r/table1.csv"));
    assert_eq!(&rows[0][..3], ["n", "omega", "rho"]);
    assert_eq!(rows.len(), 5);
}
