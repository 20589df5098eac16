use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modchaos::render::parse_path_csv;
use serde_json::Value;

fn modchaos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modchaos"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn with_config(command: &str, config: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, config).unwrap();
    let mut args = vec![command, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = modchaos(&args, &dir.path().join("out"));
    (out, dir)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn example_two_writes_exact_path_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = modchaos(&["example", "2", "--seed", "3", "--svg"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = parse_path_csv(&fs::read_to_string(dir.path().join("path.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 301);
    for (k, (t, x)) in rows.iter().enumerate() {
        assert_eq!(*t, (100 + k) as f64 / 100.0);
        assert!(*x == *t || *x == -*t);
    }
    let svg = fs::read_to_string(dir.path().join("path.svg")).unwrap();
    assert!(svg.contains("<polyline"));
    let r = report(dir.path());
    for key in ["command", "seed", "config_echo", "results", "budgets_used"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["seed"], 3);
    assert_eq!(r["results"]["certificate"]["eps0"], 2.0);
    assert_eq!(r["results"]["path"]["csv_revalidated"], true);
}

#[test]
fn example_three_is_piecewise_plus_minus_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = modchaos(&["example", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_path_csv(&fs::read_to_string(dir.path().join("path.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 30 * 101);
    assert_eq!(rows[0].0, 1.0);
    assert!(rows.last().unwrap().0 < 4.0);
    for chunk in rows.chunks(101) {
        let sign = chunk[0].1 / chunk[0].0;
        assert!(sign == 1.0 || sign == -1.0);
        assert!(chunk.iter().all(|&(t, x)| x == sign * t));
    }
}

#[test]
fn example_one_uses_three_functions() {
    let dir = tempfile::tempdir().unwrap();
    let out = modchaos(&["example", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_path_csv(&fs::read_to_string(dir.path().join("path.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|&(t, x)| x == t || x == t + 5.0 || x == -t));
}

#[test]
fn unknown_example_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        modchaos(&["example", "7"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(modchaos(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    modchaos(&["example", "2", "--seed", "9"], a.path());
    modchaos(&["example", "2", "--seed", "9"], b.path());
    modchaos(&["example", "2", "--seed", "10"], c.path());
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "report.json"), read(b.path(), "report.json"));
    assert_eq!(read(a.path(), "path.csv"), read(b.path(), "path.csv"));
    assert_ne!(read(a.path(), "path.csv"), read(c.path(), "path.csv"));
}

#[test]
fn certify_exit_codes() {
    let (out, dir) = with_config("certify", r#"{"structure":{"kind":"plus-minus-t"}}"#, &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&dir.path().join("out"))["results"]["eps0"], 2.0);

    let zero = r#"{"structure":{"kind":"inline","alphabet":2,"modules":[
        {"cells":[{"prefix":[],"set":{"points":[[0.0]]}}]},
        {"cells":[{"prefix":[],"set":{"points":[[0.0]]}}]}]}}"#;
    let (out, dir) = with_config("certify", zero, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&dir.path().join("out"))["results"]["verdict"], false);

    let (out, _dir) = with_config("certify", "{ not json", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));

    let (out, _dir) = with_config(
        "certify",
        r#"{"structure":{"kind":"plus-minus-t"},"budgets":{"horizon":0}}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(modchaos(&["certify"], dir.path()).status.code(), Some(2));
}

#[test]
fn strong_certificate_on_request() {
    let cfg = r#"{"structure":{"kind":"interval-functions","i_range":[10,14]},
                  "certify":{"strong":true,"depth":2}}"#;
    let (out, dir) = with_config("certify", cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&dir.path().join("out"));
    assert_eq!(r["results"]["strong"]["verdict"], true);
}

#[test]
fn witness_sensitivity_and_unpredictability() {
    let cfg = r#"{"structure":{"kind":"plus-minus-t"},
                  "witness":{"sensitivity":{"kappa":0.0009765625,"points":5},
                             "unpredictability":{"l_max":4}}}"#;
    let (out, dir) = with_config("witness", cfg, &["--seed", "4"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&dir.path().join("out"));
    let w = &r["results"]["witnesses"];
    for entry in w["sensitivity"]["result"].as_array().unwrap() {
        assert!(entry["witness"]["separated_distance"].as_f64().unwrap() >= 2.0);
        assert_eq!(entry["revalidated"], true);
    }
    assert_eq!(
        w["unpredictability"]["result"]["entries"]
            .as_array()
            .unwrap()
            .len(),
        4
    );
    assert!(w.get("liyorke").is_none());
}

#[test]
fn witness_defaults_run_every_search() {
    let (out, dir) = with_config(
        "witness",
        r#"{"structure":{"kind":"plus-minus-t"},"budgets":{"horizon":2000}}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let w = &report(&dir.path().join("out"))["results"]["witnesses"];
    for key in [
        "sensitivity",
        "transitivity",
        "periodic",
        "unpredictability",
        "liyorke",
    ] {
        assert_eq!(w[key]["found"], true, "{key}");
    }
}

#[test]
fn witness_constant_liyorke_pair_is_not_found() {
    let cfg = r#"{"structure":{"kind":"plus-minus-t"},"witness":{"liyorke":{"pair":"constant","horizon":500}}}"#;
    let (out, dir) = with_config("witness", cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let w = &report(&dir.path().join("out"))["results"]["witnesses"]["liyorke"];
    assert_eq!(w["result"]["separated_count"], 0);
}

#[test]
fn witness_periodic_unpredictability_is_not_found() {
    let cfg = r#"{"structure":{"kind":"plus-minus-t"},"witness":{"unpredictability":{"sequence":{"periodic":[1,2]},"l_max":3}}}"#;
    let (out, _dir) = with_config("witness", cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_frequencies_and_single_path() {
    let cfg =
        r#"{"structure":{"kind":"plus-minus-t"},"simulate":{"n_samples":10000,"prefix_len":1}}"#;
    let (out, dir) = with_config("simulate", cfg, &["--seed", "12"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&dir.path().join("out"));
    for f in r["results"]["equivalence"]["frequency_table"]
        .as_array()
        .unwrap()
    {
        let p = f["frequency"].as_f64().unwrap();
        assert!((0.45..=0.55).contains(&p), "{p}");
    }

    let cfg =
        r#"{"structure":{"kind":"plus-minus-t"},"simulate":{"n_samples":1,"path_mode":"step"}}"#;
    let (out, dir) = with_config("simulate", cfg, &["--svg"]);
    assert_eq!(out.status.code(), Some(0));
    let rows =
        parse_path_csv(&fs::read_to_string(dir.path().join("out/paths.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 300);
    assert!(dir.path().join("out/paths.svg").exists());
}

#[test]
fn simulate_over_budget_is_a_config_error() {
    let cfg = r#"{"structure":{"kind":"plus-minus-t"},"simulate":{"prefix_len":9}}"#;
    let (out, _dir) = with_config("simulate", cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn simulate_function_family() {
    let cfg = r#"{"structure":{"kind":"function-family",
                  "functions":[{"slope":2.0,"intercept":0.0},{"slope":-1.0,"intercept":-1.0}],
                  "probabilities":[0.25,0.75],
                  "grid":{"start":0,"end":50,"denom":10.0}},
                  "simulate":{"n_samples":200}}"#;
    let (out, dir) = with_config("simulate", cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&dir.path().join("out"));
    assert_eq!(r["results"]["equivalence"]["valid_prefix_fraction"], 1.0);

    let overlap = r#"{"structure":{"kind":"function-family",
                  "functions":[{"slope":1.0,"intercept":0.0},{"slope":1.0,"intercept":0.5}],
                  "probabilities":[0.5,0.5]}}"#;
    let (out, _dir) = with_config("simulate", overlap, &[]);
    assert_eq!(out.status.code(), Some(2));
}
