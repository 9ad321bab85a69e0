use std::path::Path;
use std::process::{Command, Output};

use unitax_core::taxonomy::{fixtures, TaxonomyArtifacts, VOID_ROW};
use unitax_core::toy::problems::{rider, two_datasets};

fn unitax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unitax")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn build_then_check_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), fixtures::vehicles().to_json()).unwrap();
    let o = unitax(tmp.path(), &["build", "--atoms", "c.json", "--out", "u.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let art = TaxonomyArtifacts::from_json(&std::fs::read_to_string(tmp.path().join("u.json")).unwrap()).unwrap();
    assert_eq!(art, TaxonomyArtifacts::from_collection(fixtures::vehicles()));
    let o = unitax(tmp.path(), &["check", "u.json"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "ok: taxonomy with 3 datasets, 4 universal classes\n");
}

#[test]
fn declarations_and_atoms_agree() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), fixtures::vehicles().to_json()).unwrap();
    std::fs::write(
        tmp.path().join("v.decl"),
        "dataset VIPER truck\ndataset Vistas car\ndataset ADE20k van\noverlap VIPER.truck Vistas.car\n",
    )
    .unwrap();
    assert!(unitax(tmp.path(), &["build", "--decls", "v.decl", "--out", "d.json"]).status.success());
    let o = unitax(tmp.path(), &["check", "d.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn overlapping_dataset_classes_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.json"),
        r#"{"atoms":["car","van"],"datasets":[{"name":"A","classes":[{"name":"car","atoms":["car","van"]},{"name":"van","atoms":["van"]}]}]}"#,
    )
    .unwrap();
    let o = unitax(tmp.path(), &["check", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dataset-classes-disjoint"), "{}", stderr(&o));
    let o = unitax(tmp.path(), &["build", "--atoms", "bad.json", "--out", "u.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("u.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(unitax(tmp.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(unitax(tmp.path(), &["build", "--out", "x.json"]).status.code(), Some(2));
    assert_eq!(unitax(tmp.path(), &["toy-train", "--spec", "p.json", "--mode", "nope", "--out", "o"]).status.code(), Some(2));
    assert_eq!(unitax(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = unitax(tmp.path(), &["check", "absent.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn filter_reports_the_rider_dominator() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), fixtures::rider().to_json()).unwrap();
    assert!(unitax(tmp.path(), &["build", "--atoms", "c.json", "--out", "u.json"]).status.success());
    let o = unitax(tmp.path(), &["filter", "u.json", "--out", "f.json"]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["trainable"], serde_json::json!(["rider"]));
    for entry in report["untrainable"].as_array().unwrap() {
        assert_eq!(entry["dominator"], "rider");
    }
    let filtered = TaxonomyArtifacts::from_json(&std::fs::read_to_string(tmp.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(filtered.active().len(), 1);
}

#[test]
fn export_matrix_has_a_void_row() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), fixtures::vehicles().to_json()).unwrap();
    assert!(unitax(tmp.path(), &["build", "--atoms", "c.json", "--out", "u.json"]).status.success());
    let o = unitax(tmp.path(), &["export-matrix", "u.json", "--dataset", "VIPER", "--include-void", "--out", "m.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with(&format!("{VOID_ROW},")), "{csv}");
    let o = unitax(tmp.path(), &["export-matrix", "u.json", "--dataset", "Nowhere", "--out", "m.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_eval_and_surface_chain() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("p.json"), two_datasets(0).to_json()).unwrap();
    let o = unitax(
        tmp.path(),
        &["toy-train", "--spec", "p.json", "--mode", "naive-concat", "--epochs", "100", "--hidden", "16", "--out", "m"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["model.json", "trace.csv", "report.json"] {
        assert!(tmp.path().join("m").join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(tmp.path().join("m/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);
    for scoring in ["default", "post-inference"] {
        let out = format!("e-{scoring}.json");
        let o = unitax(
            tmp.path(),
            &["eval", "--spec", "p.json", "--model", "m/model.json", "--dataset", "D2", "--scoring", scoring, "--out", &out],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(&out)).unwrap()).unwrap();
        assert_eq!(report["scoring"], scoring);
    }
    let o = unitax(tmp.path(), &["surface", "--spec", "p.json", "--model", "m/model.json", "--grid", "-1,1,-1,1,3,3", "--out", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(tmp.path().join("s.csv")).unwrap().lines().count(), 10);

    std::fs::write(tmp.path().join("r.json"), rider(0).to_json()).unwrap();
    let o = unitax(tmp.path(), &["eval", "--spec", "r.json", "--model", "m/model.json", "--dataset", "CamVid", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(1), "a model must not evaluate on another problem");
}

#[test]
fn pseudo_label_keeps_order_and_names_bad_lines() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), fixtures::vehicles().to_json()).unwrap();
    assert!(unitax(tmp.path(), &["build", "--atoms", "c.json", "--out", "u.json"]).status.success());
    let records = [
        r#"{"sample":"a","dataset":"Vistas","class":"car","foreign":{"VIPER":{"truck":1.0}}}"#,
        r#"{"sample":"b","dataset":"VIPER","class":"truck","foreign":{"ADE20k":{"van":1.0}}}"#,
    ];
    std::fs::write(tmp.path().join("in.jsonl"), records.join("\n") + "\n").unwrap();
    let o = unitax(tmp.path(), &["pseudo-label", "--taxonomy", "u.json", "--input", "in.jsonl", "--out", "out.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = std::fs::read_to_string(tmp.path().join("out.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["sample"], "a");
    assert_eq!(rows[0]["label"], "pickup");
    assert_eq!(rows[1]["sample"], "b");
    assert_eq!(rows[1]["label"], "pickup");

    std::fs::write(tmp.path().join("bad.jsonl"), format!("{}\n{{\"sample\":\"x\"}}\n", records[0])).unwrap();
    let o = unitax(tmp.path(), &["pseudo-label", "--taxonomy", "u.json", "--input", "bad.jsonl", "--out", "o2.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}
