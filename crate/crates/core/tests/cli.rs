use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn reex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn toy_args<'a>(sub: &'a str, paths: &'a [String; 3]) -> Vec<&'a str> {
    vec![
        sub,
        "--ontology",
        &paths[0],
        "--mapping",
        &paths[1],
        "--explanations",
        &paths[2],
        "--min-terms",
        "1",
    ]
}

fn toy_paths(explanations: &str) -> [String; 3] {
    [
        data("toy.obo").display().to_string(),
        data("toy_mapping.tsv").display().to_string(),
        data(explanations).display().to_string(),
    ]
}

#[test]
fn reason_toy_text_report() {
    let paths = toy_paths("toy_dense.json");
    let out = stdout(&reex(&toy_args("reason", &paths)));
    assert_eq!(out, "green :- T1-name\nred :- T2-name ∧ T3-name\n");
}

#[test]
fn pre_aggregated_matches_dense() {
    for format in ["text", "json", "csv"] {
        let dense = toy_paths("toy_dense.json");
        let agg = toy_paths("toy_aggregated.json");
        let mut a = toy_args("reason", &dense);
        a.extend(["--format", format]);
        let mut b = toy_args("reason", &agg);
        b.extend(["--format", format]);
        assert_eq!(stdout(&reex(&a)), stdout(&reex(&b)), "format {format}");
    }
}

#[test]
fn output_file_and_json_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("reason", &paths);
    let p = path.display().to_string();
    args.extend(["--format", "json", "--output", &p]);
    stdout(&reex(&args));
    let report = reex::GenQReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.per_class["red"].term_count, 2);
    assert_eq!(report.per_class["red"].baseline_term_count, 3);
    assert!((report.per_class["red"].genq - 0.25).abs() < 1e-12);
}

#[test]
fn missing_ontology_names_path() {
    let out = reex(&[
        "reason",
        "--ontology",
        "/definitely/not/here.obo",
        "--mapping",
        &data("toy_mapping.tsv").display().to_string(),
        "--explanations",
        &data("toy_dense.json").display().to_string(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/definitely/not/here.obo"), "{err}");
}

#[test]
fn malformed_explanations_report_json_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"classes":["green"],"features":["f4"],"instances":[{"true_class":"green","predicted_class":"green","values":["x"]}]}"#,
    )
    .unwrap();
    let out = reex(&["validate", "--explanations", &bad.display().to_string()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("instances[0].values[0]"), "{err}");
}

#[test]
fn sweep_threshold_rows() {
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("sweep", &paths);
    args.extend(["--grid", "threshold=0,0.2,0.4"]);
    let out = stdout(&reex(&args));
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.get(19) == Some("")));
}

#[test]
fn sweep_weight_rows_with_workers() {
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("sweep", &paths);
    args.extend([
        "--algorithm",
        "ancestry",
        "--grid",
        "weight=0.000001,0.3,0.6,3",
        "--workers",
        "2",
    ]);
    let out = stdout(&reex(&args));
    assert_eq!(out.lines().count(), 5);
}

#[test]
fn sweep_empty_axis_is_an_error() {
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("sweep", &paths);
    args.extend(["--grid", "threshold="]);
    assert!(!reex(&args).status.success());
}

#[test]
fn sweep_records_failed_runs() {
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("sweep", &paths);
    args.extend(["--grid", "threshold=0,1.5"]);
    let out = stdout(&reex(&args));
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].get(19), Some(""));
    assert!(rows[1].get(19).unwrap().contains("threshold"));
}

#[test]
fn genq_subcommand() {
    let out = stdout(&reex(&[
        "genq",
        "--ontology",
        &data("toy.obo").display().to_string(),
        "--mapping",
        &data("toy_mapping.tsv").display().to_string(),
        "--terms",
        &data("toy_terms.tsv").display().to_string(),
    ]));
    assert_eq!(out, "green\t0\nred\t0.25\n");
}

#[test]
fn validate_summarizes_inputs() {
    let out = stdout(&reex(&[
        "validate",
        "--ontology",
        &data("toy.obo").display().to_string(),
        "--mapping",
        &data("toy_mapping.tsv").display().to_string(),
        "--explanations",
        &data("toy_aggregated.json").display().to_string(),
    ]));
    assert!(out.contains("9 terms, 7 edges"), "{out}");
    assert!(out.contains("4 features"), "{out}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let paths = toy_paths("toy_dense.json");
    let mut args = toy_args("reason", &paths);
    args.extend(["--algorithm", "ancestry", "--seed", "7", "--format", "json"]);
    let first = stdout(&reex(&args));
    for _ in 0..3 {
        assert_eq!(stdout(&reex(&args)), first);
    }
}
