//! The `resilience` binary end to end: outputs, exit codes and help text.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resilience"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SPEC: &str = r#"{
  "label": "demo",
  "start": "2017-01",
  "horizon": 72,
  "trend": {"kind": "linear", "level": 100.0, "slope": 0.2},
  "seasonal_amplitude": 0.04,
  "noise_sd": 0.01,
  "seed": 3,
  "disruptions": [
    {"alpha": 40.0, "theta": 1.0, "vartheta": 2.0, "duration": 12, "start": 38},
    {"alpha": 20.0, "theta": 1.0, "vartheta": 1.5, "duration": 10, "start": 54}
  ]
}"#;

fn synth(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, SPEC).unwrap();
    let out = dir.join("scenario");
    let o = run(&["synth", "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_writes_series_covariates_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path());
    for f in ["observed.csv", "expected.csv", "covariates.csv", "truth.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let observed = std::fs::read_to_string(out.join("observed.csv")).unwrap();
    assert!(observed.starts_with("month,value,label\n2017-01,"));
    assert_eq!(observed.lines().count(), 73);
    let truth = read_json(&out.join("truth.json"));
    assert_eq!(truth["disruptions"].as_array().unwrap().len(), 2);
    assert!(truth["true_indices"]["r"].as_f64().unwrap() < 1.0);
}

#[test]
fn analyze_with_each_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let sc = synth(dir.path());
    let observed = sc.join("observed.csv");
    let truth_r = read_json(&sc.join("truth.json"))["true_indices"]["r"].as_f64().unwrap();

    let cases: Vec<(&str, Vec<String>)> = vec![
        (
            "covariate",
            vec!["--covariates".into(), s(&sc.join("covariates.csv")).into(), "--cutoff".into(), "2020-01".into()],
        ),
        ("logistic", vec!["--baseline".into(), "logistic".into(), "--cutoff".into(), "2020-01".into()]),
        ("ets", vec!["--baseline".into(), "ets".into(), "--cutoff".into(), "2020-01".into()]),
        ("supplied", vec!["--expected".into(), s(&sc.join("expected.csv")).into()]),
    ];
    for (name, extra) in cases {
        let out = dir.path().join(name);
        let mut args = vec!["analyze".to_string(), "--observed".into(), s(&observed).into(), "--out".into(), s(&out).into(), "--plot".into()];
        args.extend(extra);
        let o = bin().args(&args).output().unwrap();
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let report = read_json(&out.join("report.json"));
        assert_eq!(report["schema_version"], "1");
        assert_eq!(report["label"], "demo");
        assert!(report["metadata"]["generated_at"].is_string());
        assert_eq!(report["input_digests"]["observed"].as_str().unwrap().len(), 64);
        let r = report["indices"]["r"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r));
        if name != "ets" {
            assert!((r - truth_r).abs() < 0.05, "{name}: r {r} vs {truth_r}");
        }
        let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        // nothing but the outputs is left behind
        let mut names: Vec<String> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["plot.svg", "report.json"]);
    }
}

#[test]
fn analyze_flags_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let sc = synth(dir.path());
    let out = dir.path().join("flags");
    let o = run(&[
        "analyze",
        "--observed",
        s(&sc.join("observed.csv")),
        "--expected",
        s(&sc.join("expected.csv")),
        "--window",
        "1",
        "--min-duration",
        "4",
        "--min-peak-ratio",
        "0.1",
        "--penalty",
        "0.02",
        "--span",
        "windows",
        "--quadrature",
        "trapezoid",
        "--rho-basis",
        "recovery",
        "--no-normalize",
        "--label",
        "custom",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    let c = &report["config"];
    assert_eq!(c["window"], 1);
    assert_eq!(c["min_duration"], 4);
    assert_eq!(c["min_peak_ratio"], 0.1);
    assert_eq!(c["penalty"]["fixed"], 0.02);
    assert_eq!(c["span"], "windows");
    assert_eq!(c["quadrature"], "trapezoid");
    assert_eq!(c["rho_basis"], "recovery");
    assert_eq!(c["normalize"], false);
    assert_eq!(report["label"], "custom");
    assert_eq!(report["origin_scale"], 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sc = synth(dir.path());
    let observed = sc.join("observed.csv");
    let out = dir.path().join("x");

    // usage errors
    assert_eq!(code(&run(&["analyze"])), 64);
    assert_eq!(code(&run(&["analyze", "--observed", s(&observed), "--out", s(&out), "--penalty", "lots"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    // fitted baseline without a cutoff
    assert_eq!(code(&run(&["analyze", "--observed", s(&observed), "--baseline", "ets", "--out", s(&out)])), 64);
    // covariate baseline without covariates
    assert_eq!(
        code(&run(&["analyze", "--observed", s(&observed), "--cutoff", "2020-01", "--out", s(&out)])),
        4
    );
    // unreadable and malformed inputs
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&run(&["analyze", "--observed", s(&missing), "--expected", s(&missing), "--out", s(&out)])), 7);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "month,value\n2020-01,1\n2020-03,2\n").unwrap();
    assert_eq!(code(&run(&["analyze", "--observed", s(&bad), "--expected", s(&bad), "--out", s(&out)])), 3);
    // invalid scenario
    let spec = dir.path().join("bad_spec.json");
    std::fs::write(&spec, r#"{"horizon": 12, "noise_sd": -1}"#).unwrap();
    assert_eq!(code(&run(&["synth", "--spec", s(&spec), "--out", s(&out)])), 6);
    // help and version succeed
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn help_documents_exit_codes() {
    for args in [&["--help"][..], &["analyze", "--help"], &["batch", "--help"]] {
        let o = run(args);
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("Exit codes:"), "{args:?}");
        assert!(text.contains("64  invalid command-line usage"));
    }
    let analyze = String::from_utf8_lossy(&run(&["analyze", "--help"]).stdout).into_owned();
    for flag in ["--window", "--min-duration", "--min-peak-ratio", "--penalty", "--span", "--baseline", "--rho-basis"] {
        assert!(analyze.contains(flag), "{flag}");
    }
}

#[test]
fn batch_records_failures_and_writes_summaries() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "label,observed_path,covariate_path,expected_path,group\n\
         north,scenario/observed.csv,scenario/covariates.csv,,a\n\
         south,scenario/observed.csv,,scenario/expected.csv,a\n\
         east,scenario/observed.csv,scenario/covariates.csv,,b\n\
         broken,nowhere.csv,,,b\n",
    )
    .unwrap();
    let out = dir.path().join("batch");
    let o = run(&["batch", "--manifest", s(&manifest), "--out", s(&out), "--cutoff", "2020-01", "--plot"]);
    assert_eq!(code(&o), 9, "{}", String::from_utf8_lossy(&o.stderr));

    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["succeeded"], 3);
    assert_eq!(summary["failed"], 1);
    let rows = summary["rows"].as_array().unwrap();
    let broken = rows.iter().find(|r| r["label"] == "broken").unwrap();
    assert_eq!(broken["status"], "failed");
    assert!(broken["error"].as_str().unwrap().contains("nowhere.csv"));

    let groups = read_json(&out.join("groups.json"));
    let groups = groups.as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["group"], "a");
    assert_eq!(groups[0]["r"]["count"], 2);

    let csv = std::fs::read_to_string(out.join("indices.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("unit,rho,r"));
    assert_eq!(csv.lines().count(), 4);
    for f in ["reports/north.json", "reports/south.json", "reports/east.json", "rankings.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn batch_rejects_malformed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, "label,observed_path\na,x.csv\na,y.csv\n").unwrap();
    let o = run(&["batch", "--manifest", s(&manifest), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate label"));
}

#[test]
fn correlate_tables_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let indices = dir.path().join("indices.csv");
    let covariates = dir.path().join("covariates.csv");
    std::fs::write(&indices, "unit,rho,r\na,0.1,0.6\nb,0.4,0.7\nc,0.5,0.75\nd,0.8,0.9\ne,0.3,0.65\n").unwrap();
    std::fs::write(&covariates, "unit,income\na,10\nb,20\nc,25\nd,40\ne,12\nz,99\n").unwrap();
    let out = dir.path().join("corr.json");
    let o = run(&["correlate", "--indices", s(&indices), "--covariates", s(&covariates), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_json(&out);
    assert_eq!(t["joined_units"], 5);
    assert_eq!(t["dropped_units"], 1);
    assert!(t["cells"]["r"]["income"]["coefficient"].as_f64().unwrap() > 0.9);

    let pairs = dir.path().join("pairs.csv");
    std::fs::write(&pairs, "unit,index_value,covariate_value\na,1,2\nb,2,1\nc,3,4\nd,4,3\n").unwrap();
    let out2 = dir.path().join("pairs.json");
    assert_eq!(code(&run(&["correlate", "--pairs", s(&pairs), "--out", s(&out2)])), 0);
    let cell = read_json(&out2)["cells"].as_object().unwrap().values().next().unwrap().clone();
    let coefficient = cell.as_object().unwrap().values().next().unwrap()["coefficient"].as_f64().unwrap();
    assert!((coefficient - 0.6).abs() < 1e-12);

    // no shared units
    std::fs::write(&covariates, "unit,income\nx,1\ny,2\n").unwrap();
    assert_eq!(
        code(&run(&["correlate", "--indices", s(&indices), "--covariates", s(&covariates), "--out", s(&out)])),
        8
    );
    // mixing input modes
    assert_eq!(code(&run(&["correlate", "--pairs", s(&pairs), "--indices", s(&indices), "--out", s(&out)])), 64);
}
