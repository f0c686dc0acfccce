use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use instructlr_core::annotation::{agreement, merge_annotations, rows_to_csv, AgreementLabel, MergedDecision, ReviewRow};
use instructlr_core::cost::{scenario_table, table_csv, ScenarioSet};
use instructlr_core::jsonl::read_jsonl;
use instructlr_core::AnnotationRecord;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn instructlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_instructlr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = instructlr(args);
    assert!(
        out.status.success(),
        "instructlr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("instructlr.toml");
    let text = format!(
        "[paths]\nwork_dir = \"run\"\nreplay = {:?}\n\n[pipeline]\nlang = \"dje\"\ntotal_seeds = 20\n",
        fixtures().join("replay").display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cost_table_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cost.csv");
    let stdout = ok(&["cost", "--out", s(&out)]);
    assert!(stdout.contains("2445"), "{stdout}");
    let expected = table_csv(&scenario_table(&ScenarioSet::builtin()).unwrap());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
    assert_eq!(expected.lines().count(), 13);
}

#[test]
fn unknown_cost_preset_fails() {
    let out = instructlr(&["cost", "--preset", "nope"]);
    assert!(!out.status.success());
}

#[test]
fn config_without_lang_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[pipeline]\ntotal_seeds = 20\n").unwrap();
    let out = instructlr(&["run", "--config", s(&config)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lang"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn stage_verbs_then_run_reproduce_the_reference_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let run = dir.path().join("run");

    ok(&["seed", "--config", s(&config)]);
    assert!(run.join("seeds.jsonl").exists());
    assert!(!run.join("drafts.jsonl").exists());

    let report = ok(&["check", "--config", s(&config)]);
    assert!(report.contains("skipped"), "{report}");
    assert!(run.join("checked.jsonl").exists());
    assert!(!run.join("final.jsonl").exists());

    ok(&["run", "--config", s(&config)]);
    assert_eq!(
        std::fs::read(run.join("final.jsonl")).unwrap(),
        std::fs::read(fixtures().join("table10_final.jsonl")).unwrap()
    );

    let stats = ok(&["stats", "--in", s(&run.join("final.jsonl")), "--checked", s(&run.join("checked.jsonl")), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert_eq!(v["dataset"]["total"], 20);
    assert_eq!(v["dataset"]["cot_count"], 4);
    assert_eq!(v["triage"]["summary"]["total"], 20);
}

fn fill(sheet: &Path, out: &Path, verdict: impl Fn(usize) -> bool) {
    let mut reader = csv::Reader::from_path(sheet).unwrap();
    let rows: Vec<ReviewRow> = reader
        .deserialize::<ReviewRow>()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.unwrap();
            if verdict(i) {
                row.is_correct = "Yes".into();
            } else {
                row.is_correct = "No".into();
                row.corrected_response = format!("{} (fixed)", row.response_lrl);
                row.error_category = "Orthography".into();
            }
            row
        })
        .collect();
    std::fs::write(out, rows_to_csv(&rows).unwrap()).unwrap();
}

#[test]
fn review_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    ok(&["check", "--config", s(&config)]);
    let checked = dir.path().join("run/checked.jsonl");
    let sheets = dir.path().join("sheets");

    let listed = ok(&["export-review", "--checked", s(&checked), "--out-dir", s(&sheets), "--batch-size", "3"]);
    let sheet_paths: Vec<PathBuf> = listed.lines().map(PathBuf::from).collect();
    assert!(!sheet_paths.is_empty());

    let journal = dir.path().join("annotations.jsonl");
    for (who, rule) in [("ann1", 2usize), ("ann2", 3usize)] {
        let mut filled = Vec::new();
        for (k, sheet) in sheet_paths.iter().enumerate() {
            let out = dir.path().join(format!("{who}_{k}.csv"));
            fill(sheet, &out, |i| i % rule != 0);
            filled.push(out);
        }
        let mut args = vec!["import-review", "--annotator", who, "--checked", s(&checked), "--journal", s(&journal)];
        args.extend(filled.iter().map(|p| s(p)));
        ok(&args);
    }
    let records: Vec<AnnotationRecord> = read_jsonl(&journal).unwrap();

    let decisions = dir.path().join("decisions.jsonl");
    let merged_sheet = dir.path().join("merged.csv");
    ok(&[
        "merge", "--in", s(&journal), "--out", s(&decisions), "--sheet", s(&merged_sheet), "--checked", s(&checked),
    ]);
    let merged: Vec<MergedDecision> = read_jsonl(&decisions).unwrap();
    assert_eq!(merged, merge_annotations(&records));
    assert!(std::fs::read_to_string(&merged_sheet).unwrap().starts_with("draft_id,"));

    let expected = agreement(&records, AgreementLabel::Verdict, None).unwrap();
    let line = ok(&["agreement", "--in", s(&journal)]);
    assert!(line.starts_with(&format!("alpha {:.3}", expected.alpha)), "{line}");
}

#[test]
fn import_reports_row_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sheet = dir.path().join("sheet.csv");
    std::fs::write(
        &sheet,
        "draft_id,instruction_lrl,response_lrl,rag_status,is_correct,corrected_instruction,corrected_response,error_category,comments\r\n\
         d1,a,b,top_priority,No,,Suba.,,\r\n\
         d2,a,b,top_priority,Yes,,,,\r\n",
    )
    .unwrap();
    let journal = dir.path().join("j.jsonl");
    let out = instructlr(&["import-review", "--annotator", "ann1", "--journal", s(&journal), s(&sheet)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error_category"));
    let kept: Vec<AnnotationRecord> = read_jsonl(&journal).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].draft_id, "d2");
}
