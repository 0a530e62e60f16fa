use std::fs;
use std::path::Path;

use heckbayes::cli::{run, EXIT_FAILURE, EXIT_MISMATCH, EXIT_OK, EXIT_PARSE};
use serde_json::Value;
use tempfile::TempDir;

fn heckbayes(args: &[&str]) -> i32 {
    run(std::iter::once("heckbayes").chain(args.iter().copied()))
}

fn simulate(dir: &Path, n: &str, errors: &str, seed: &str) -> String {
    let out = dir.join(format!("sim-{errors}-{n}-{seed}"));
    let out_s = out.to_str().unwrap().to_string();
    assert_eq!(heckbayes(&["simulate", "--n", n, "--errors", errors, "--seed", seed, "--out", &out_s]), EXIT_OK);
    out.join("data.csv").to_str().unwrap().to_string()
}

fn fit(data: &str, family: &str, out: &Path, seed: &str) -> i32 {
    heckbayes(&[
        "fit", "--input", data, "--x", "x1", "--w", "w1,w2", "--family", family, "--warmup", "200", "--draws", "400",
        "--thin", "1", "--seed", seed, "--out", out.to_str().unwrap(),
    ])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_data_truth_and_manifest() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "120", "cn", "7");
    let text = fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,c,x1,w1,w2"));
    assert_eq!(lines.count(), 120);
    let sim_dir = Path::new(&data).parent().unwrap();
    let truth = read_json(&sim_dir.join("truth.json"));
    assert_eq!(truth["beta"], serde_json::json!([1.0, 0.5]));
    assert_eq!(truth["error_family"]["family"], "contaminated_normal");
    let manifest = read_json(&sim_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn usage_errors_exit_with_parse_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(heckbayes(&["simulate", "--n", "20", "--out", out]), EXIT_PARSE);
    assert_eq!(heckbayes(&["simulate", "--errors", "cauchy", "--out", out]), EXIT_PARSE);
    assert_eq!(heckbayes(&["compare", "only-one.json"]), EXIT_PARSE);
    assert_eq!(heckbayes(&["fit", "--input", "x.csv", "--x", "a"]), EXIT_PARSE);
}

#[test]
fn bad_inputs_are_reported() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(fit(missing.to_str().unwrap(), "normal", dir.path(), "1"), EXIT_FAILURE);

    let data = simulate(dir.path(), "60", "normal", "1");
    let code = heckbayes(&["fit", "--input", &data, "--x", "x9", "--w", "w1,w2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_PARSE);
    let corrupt = dir.path().join("corrupt.csv");
    fs::write(&corrupt, fs::read_to_string(&data).unwrap().replacen("\n1", "\nabc", 1)).unwrap();
    assert_eq!(fit(corrupt.to_str().unwrap(), "normal", dir.path(), "1"), EXIT_PARSE);
}

#[test]
fn fit_report_has_stable_layout_and_covers_the_truth() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "400", "normal", "11");
    let out = dir.path().join("fit");
    assert_eq!(fit(&data, "normal", &out, "3"), EXIT_OK);
    let report = read_json(&out.join("report.json"));
    for key in ["model", "params", "summaries", "criteria", "diagnostics", "manifest"] {
        assert!(report.get(key).is_some(), "missing key {key}");
    }
    assert!(report.get("outliers").is_none());
    assert_eq!(report["model"], "SLn");
    assert_eq!(report["manifest"]["sampler"]["warmup"], 200);
    for file in ["draws.csv", "density.csv", "report.txt", "manifest.json"] {
        assert!(out.join(file).exists(), "missing {file}");
    }

    let truth = [("beta1", 1.0), ("beta2", 0.5), ("gamma1", 1.0), ("gamma2", 0.3), ("gamma3", -0.5)];
    let summaries = report["summaries"].as_array().unwrap();
    let covered = truth
        .iter()
        .filter(|(name, value)| {
            let s = summaries.iter().find(|s| s["name"] == *name).unwrap_or_else(|| panic!("no summary for {name}"));
            s["hpd_lower"].as_f64().unwrap() <= *value && *value <= s["hpd_upper"].as_f64().unwrap()
        })
        .count();
    assert!(covered >= 4, "{covered}/5 regression coefficients covered");
}

#[test]
fn compare_flags_heavy_tails_on_t_data_and_rejects_mismatched_reports() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "400", "t", "5");
    let mut reports = Vec::new();
    for family in ["normal", "t", "cn"] {
        let out = dir.path().join(format!("fit-{family}"));
        assert_eq!(fit(&data, family, &out, "9"), EXIT_OK);
        reports.push(out.join("report.json"));
    }
    let loaded: Vec<_> = reports
        .iter()
        .map(|p| serde_json::from_value::<heckbayes::cli::ReportFile>(read_json(p)).unwrap().report)
        .collect();
    let table = heckbayes::cli::comparison_table(&loaded).unwrap();
    let sln_row = table.lines().find(|l| l.starts_with("SLn")).unwrap();
    let looic_cell = sln_row.split_whitespace().nth(1).unwrap();
    assert!(!looic_cell.ends_with('*'), "SLn won LOOIC on t data:\n{table}");
    let paths: Vec<&str> = reports.iter().map(|p| p.to_str().unwrap()).collect();
    assert_eq!(heckbayes(&[&["compare"], paths.as_slice()].concat()), EXIT_OK);

    let small = simulate(dir.path(), "80", "normal", "6");
    let other = dir.path().join("fit-small");
    assert_eq!(fit(&small, "normal", &other, "9"), EXIT_OK);
    let code = heckbayes(&["compare", paths[0], other.join("report.json").to_str().unwrap()]);
    assert_eq!(code, EXIT_MISMATCH);
}

#[test]
fn replicate_with_one_replicate_writes_a_study() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rep");
    let code = heckbayes(&[
        "replicate", "--n", "80", "--replicates", "1", "--models", "normal", "--warmup", "100", "--draws", "150",
        "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let study = read_json(&out.join("replication.json"));
    assert_eq!(study["replicates"].as_array().unwrap().len(), 1);
    let rows = study["selection"].as_array().unwrap();
    for row in rows {
        let total: f64 = row["percentages"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }
    assert!(fs::read_to_string(out.join("replication.csv")).unwrap().lines().count() > 1);
    assert_eq!(read_json(&out.join("manifest.json"))["command"], "replicate");
}
