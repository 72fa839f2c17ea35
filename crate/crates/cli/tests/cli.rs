use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn clamr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clamr"))
        .args(args)
        .env("CLAMR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = clamr(args);
    assert!(
        out.status.success(),
        "clamr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Path as a `'static` argument, so temporaries can appear in argument lists.
fn p(path: &Path) -> &'static str {
    Box::leak(path.to_str().unwrap().to_owned().into_boxed_str())
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

const SHORT: [&str; 6] = ["--iterations", "600", "--burn-in", "100", "--thin", "5"];

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["simulate", "--scenario", "misspecified", "--n", "500", "--seed", "1", "--out", p(d)]);
    }
    for f in ["data.csv", "truth.csv", "spec.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let data = read(a.join("data.csv"));
    assert_eq!(data.lines().count(), 501);
    assert!(data.starts_with("f1,f2,f3,f4,f5,f6\n"));
}

#[test]
fn pipeline_runs_on_every_scenario() {
    for scenario in ["misspecified", "no_mr", "well_specified"] {
        let dir = tempfile::tempdir().unwrap();
        let (sim, fit, sum) = (dir.path().join("sim"), dir.path().join("fit"), dir.path().join("sum"));
        ok(&["simulate", "--scenario", scenario, "--n", "100", "--seed", "2", "--out", p(&sim)]);
        let data = sim.join("data.csv");
        ok(&["fit", "--data", p(&data), "--spec", p(&sim.join("spec.json")), "--out", p(&fit), "--chains", "2"]);
        ok(&["summarize", "--run", p(&fit), "--data", p(&data), "--out", p(&sum)]);
        for f in ["summary.json", "delta.csv", "delta_samples.csv", "traces.csv", "predictive.csv", "manifest.json"] {
            assert!(sum.join(f).exists(), "{scenario}: {f}");
        }
        let summary: serde_json::Value = serde_json::from_str(&read(sum.join("summary.json"))).unwrap();
        assert!(summary["waic"]["waic"].is_number());
        assert_eq!(summary["predictive_samples"], 500);
        // 500 samples x 100 rows x 6 features plus the header.
        assert_eq!(read(sum.join("predictive.csv")).lines().count(), 500 * 100 * 6 + 1);
    }
}

#[test]
fn fit_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--scenario", "no_mr", "--n", "80", "--seed", "4", "--out", p(&sim)]);
    let runs: Vec<PathBuf> = (0..2).map(|r| dir.path().join(format!("fit{r}"))).collect();
    for out in &runs {
        let mut args = vec![
            "fit",
            "--data",
            p(&sim.join("data.csv")),
            "--spec",
            p(&sim.join("spec.json")),
            "--out",
            p(out),
            "--chains",
            "2",
            "--seed",
            "7",
        ];
        args.extend(SHORT);
        ok(&args);
    }
    for f in ["draws.ndjson", "point_estimate.csv", "psm.csv", "fit.json"] {
        assert_eq!(read(runs[0].join(f)), read(runs[1].join(f)), "{f}");
    }
    let m0: serde_json::Value = serde_json::from_str(&read(runs[0].join("manifest.json"))).unwrap();
    let m1: serde_json::Value = serde_json::from_str(&read(runs[1].join("manifest.json"))).unwrap();
    assert_eq!(m0["run_id"], m1["run_id"]);
    assert_eq!(m0["outputs"], m1["outputs"]);
}

fn two_blobs(dir: &Path) -> (PathBuf, PathBuf) {
    let mut csv = String::from("x,y,truth\n");
    for i in 0..40 {
        let jitter = ((i * 37) % 11) as f64 / 20.0 - 0.25;
        if i % 2 == 0 {
            csv.push_str(&format!("{},{},1\n", -2.0 + jitter, 1.0 - jitter));
        } else {
            csv.push_str(&format!("{},{},2\n", 2.0 + jitter, 4.0 + jitter));
        }
    }
    let spec = r#"{"features": [
        {"name": "x", "regions": [{"label": "low", "lower": -4, "upper": 0}, {"label": "high", "lower": 0, "upper": 4}]},
        {"name": "y", "regions": [{"label": "low", "lower": -1, "upper": 2.5}, {"label": "high", "lower": 2.5, "upper": 6}]}
    ], "L": 6}"#;
    let (d, s) = (dir.join("blobs.csv"), dir.join("blobs.json"));
    std::fs::write(&d, csv).unwrap();
    std::fs::write(&s, spec).unwrap();
    (d, s)
}

#[test]
fn two_blob_sanity() {
    let dir = tempfile::tempdir().unwrap();
    let (data, spec) = two_blobs(dir.path());
    for sampler in ["clamr", "bgmm"] {
        let out = dir.path().join(sampler);
        let mut args = vec![
            "fit",
            "--data",
            p(&data),
            "--truth",
            "truth",
            "--out",
            p(&out),
            "--sampler",
            sampler,
        ];
        if sampler == "clamr" {
            args.extend(["--spec", p(&spec)]);
        }
        ok(&args);
        let fit: serde_json::Value = serde_json::from_str(&read(out.join("fit.json"))).unwrap();
        assert_eq!(fit["clusters"], 2, "{sampler}");
        assert_eq!(fit["ari_to_truth"], 1.0, "{sampler}");
        assert_eq!(fit["features"], serde_json::json!(["x", "y"]));
    }
}

#[test]
fn pretrain_threshold_zero_selects_everything() {
    let dir = tempfile::tempdir().unwrap();
    let (data, spec) = two_blobs(dir.path());
    let out = dir.path().join("pre");
    let mut args = vec![
        "pretrain",
        "--data",
        p(&data),
        "--spec",
        p(&spec),
        "--features",
        "x,y",
        "--threshold",
        "0",
        "--out",
        p(&out),
    ];
    args.extend(SHORT);
    ok(&args);
    let report: serde_json::Value = serde_json::from_str(&read(out.join("pretrain_report.json"))).unwrap();
    assert_eq!(report["selected"], serde_json::json!(["x", "y"]));
    for f in report["features"].as_array().unwrap() {
        assert_eq!(f["K"], 2);
        assert!(f["rho"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = two_blobs(dir.path());
    let spec = dir.path().join("only_x.json");
    std::fs::write(
        &spec,
        r#"{"features": [{"name": "x", "regions": [{"label": "all", "lower": -4, "upper": 4}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let res = clamr(&["fit", "--data", p(&data), "--spec", p(&spec), "--truth", "truth", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`y`"));

    let res = clamr(&["pretrain", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let res = clamr(&["fit", "--data", "/nonexistent.csv", "--spec", p(&spec), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let res = clamr(&["replicate", "--scenario", "misspecified", "--sizes", "50", "--reps", "0", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let res = clamr(&["simulate", "--scenario", "nonsense", "--n", "5", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn summarize_checks_lineage() {
    let dir = tempfile::tempdir().unwrap();
    let (data, spec) = two_blobs(dir.path());
    let fit = dir.path().join("fit");
    let mut args = vec!["fit", "--data", p(&data), "--spec", p(&spec), "--truth", "truth", "--out", p(&fit)];
    args.extend(SHORT);
    ok(&args);

    let res = clamr(&["summarize", "--run", p(&dir.path().join("nowhere")), "--data", p(&data), "--out", p(&dir.path().join("s0"))]);
    assert_eq!(res.status.code(), Some(4));

    let other = dir.path().join("other.csv");
    std::fs::write(&other, read(&data) + "0,0,1\n").unwrap();
    let res = clamr(&["summarize", "--run", p(&fit), "--data", p(&other), "--out", p(&dir.path().join("s1"))]);
    assert_eq!(res.status.code(), Some(4));

    let pe = fit.join("point_estimate.csv");
    let original = read(&pe);
    std::fs::write(&pe, original.replace("1,1\n", "1,2\n")).unwrap();
    let res = clamr(&["summarize", "--run", p(&fit), "--data", p(&data), "--out", p(&dir.path().join("s2"))]);
    assert_eq!(res.status.code(), Some(4));
    std::fs::write(&pe, original).unwrap();
    ok(&["summarize", "--run", p(&fit), "--data", p(&data), "--out", p(&dir.path().join("s3"))]);

    let sim = dir.path().join("sim");
    ok(&["simulate", "--scenario", "no_mr", "--n", "20", "--out", p(&sim)]);
    let res = clamr(&["summarize", "--run", p(&sim), "--data", p(&sim.join("data.csv")), "--out", p(&dir.path().join("s4"))]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn single_retained_state_gives_indicator_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let (data, spec) = two_blobs(dir.path());
    let (fit, sum) = (dir.path().join("fit"), dir.path().join("sum"));
    ok(&[
        "fit", "--data", p(&data), "--spec", p(&spec), "--truth", "truth", "--out", p(&fit), "--iterations", "1",
        "--burn-in", "0", "--thin", "1",
    ]);
    ok(&["summarize", "--run", p(&fit), "--data", p(&data), "--out", p(&sum)]);
    let mut rdr = csv::Reader::from_path(sum.join("delta.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let d: f64 = rec.unwrap()[4].parse().unwrap();
        assert!(d == 0.0 || d == 1.0, "{d}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn emitted_csvs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let fit = dir.path().join("fit");
    ok(&["simulate", "--scenario", "well_specified", "--n", "60", "--seed", "9", "--out", p(&sim)]);
    let mut args = vec!["fit", "--data", p(&sim.join("data.csv")), "--spec", p(&sim.join("spec.json")), "--out", p(&fit)];
    args.extend(SHORT);
    ok(&args);
    let sum = dir.path().join("sum");
    ok(&["summarize", "--run", p(&fit), "--data", p(&sim.join("data.csv")), "--out", p(&sum), "--predictive-samples", "3"]);
    for file in [
        sim.join("data.csv"),
        sim.join("truth.csv"),
        fit.join("psm.csv"),
        fit.join("point_estimate.csv"),
        sum.join("traces.csv"),
        sum.join("delta.csv"),
        sum.join("predictive.csv"),
    ] {
        for line in read(&file).lines() {
            for field in line.split(',') {
                if let Ok(v) = field.parse::<f64>() {
                    assert_eq!(v.to_string(), field, "{}", file.display());
                }
            }
        }
    }
}

#[test]
fn replicate_writes_a_four_method_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let args = [
        "replicate", "--scenario", "misspecified", "--sizes", "60", "--reps", "2", "--methods",
        "clamr,bgmm,kmeans,hca", "--iterations", "400", "--burn-in", "100", "--mc-samples", "2000", "--out", p(&out),
    ];
    ok(&args);
    let table = read(out.join("table.csv"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "scenario,n,method,mean_ari,sd_ari,mean_L,sd_L");
    assert_eq!(lines.len(), 5);
    for (line, method) in lines[1..].iter().zip(["clamr", "bgmm", "kmeans", "hca"]) {
        assert!(line.starts_with(&format!("misspecified,60,{method},")), "{line}");
    }
    let records = read(out.join("records.csv"));
    assert_eq!(records.lines().count(), 1 + 2 * 4);

    let again = dir.path().join("rep2");
    let mut args2 = args.to_vec();
    let last = args2.len() - 1;
    args2[last] = p(&again);
    ok(&args2);
    assert_eq!(read(again.join("table.csv")), table);

    let res = clamr(&args);
    assert_eq!(res.status.code(), Some(2), "existing run without --force");
}

#[test]
fn shipped_fixtures_drive_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--scenario", "misspecified", "--n", "50", "--out", p(&sim)]);
    let out = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--data",
        p(&sim.join("data.csv")),
        "--spec",
        p(&fixtures().join("misspecified.json")),
        "--features",
        "f3,f4",
        "--out",
        p(&out),
    ];
    args.extend(SHORT);
    ok(&args);
    let fit: serde_json::Value = serde_json::from_str(&read(out.join("fit.json"))).unwrap();
    assert_eq!(fit["features"], serde_json::json!(["f3", "f4"]));
}
