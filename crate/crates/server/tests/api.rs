use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use instructlr_core::annotation::{
    export_merged_sheet, export_review_sheet, import_annotations, krippendorff_alpha, merge_annotations, ReviewRow,
};
use instructlr_core::checker::triage;
use instructlr_core::data::{FieldAnalyses, NO_COT};
use instructlr_core::jsonl::read_jsonl;
use instructlr_core::{
    AnnotationRecord, CheckedDraft, CheckerAnalysis, CorrectionOption, Draft, LanguageCode, TriageStatus, Verdict,
};
use instructlr_server::{router, AppState, Progress, ANNOTATOR_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

const TOKEN: &str = "s3cret";

fn checked(id: &str, status: TriageStatus) -> CheckedDraft {
    let resp = match status {
        TriageStatus::Accepted => CheckerAnalysis::correct(),
        TriageStatus::LowPriority => {
            CheckerAnalysis::incorrect("tense", vec![CorrectionOption::new("Suba, a ga koy Niamey.", "")])
        }
        TriageStatus::TopPriority => CheckerAnalysis::incorrect("unclear", Vec::new()),
    };
    triage(
        Draft {
            id: id.into(),
            instr_fr: "Où ira-t-il demain ?".into(),
            instr_lrl: "Suba, a ga koy man?".into(),
            resp_lrl: "Suba, a koy Niamey.".into(),
            cot_lrl: NO_COT.into(),
            topic_fr: "Géographie".into(),
            lang: LanguageCode::new("dje").unwrap(),
        },
        Some(FieldAnalyses {
            instr_lrl: Some(CheckerAnalysis::correct()),
            resp_lrl: Some(resp),
            cot_lrl: None,
        }),
    )
}

fn fixture() -> Vec<CheckedDraft> {
    vec![
        checked("d5", TriageStatus::LowPriority),
        checked("d4", TriageStatus::TopPriority),
        checked("d1", TriageStatus::Accepted),
        checked("d3", TriageStatus::LowPriority),
        checked("d2", TriageStatus::TopPriority),
        checked("d6", TriageStatus::TopPriority),
    ]
}

struct Harness {
    app: Router,
    now: Arc<Mutex<SystemTime>>,
    journal: std::path::PathBuf,
    _dir: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("annotations.jsonl");
        Self::with_journal(dir, journal)
    }

    fn with_journal(dir: tempfile::TempDir, journal: std::path::PathBuf) -> Self {
        let now = Arc::new(Mutex::new(SystemTime::UNIX_EPOCH + Duration::from_secs(1_700_000_000)));
        let clock = now.clone();
        let state = AppState::new(fixture(), &journal, TOKEN, Duration::from_secs(15 * 60))
            .unwrap()
            .with_clock(Arc::new(move || *clock.lock().unwrap()));
        Self {
            app: router(Arc::new(state)),
            now,
            journal,
            _dir: dir,
        }
    }

    fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }

    async fn send(&self, method: &str, uri: &str, who: Option<&str>, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder()
            .method(method)
            .uri(uri)
            .header("authorization", format!("Bearer {TOKEN}"));
        if let Some(who) = who {
            req = req.header(ANNOTATOR_HEADER, who);
        }
        let req = match body {
            Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: &str, uri: &str, who: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.send(method, uri, Some(who), body).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    async fn annotate(&self, id: &str, who: &str, body: Value) -> StatusCode {
        self.json("POST", &format!("/api/drafts/{id}/annotation"), who, Some(body)).await.0
    }
}

fn ids(v: &Value) -> Vec<&str> {
    v.as_array().unwrap().iter().map(|d| d["id"].as_str().unwrap()).collect()
}

fn fix(text: &str) -> Value {
    json!({"is_correct": "No", "corrected_response": text, "error_category": "tense_inconsistency"})
}

#[tokio::test]
async fn requests_need_token_and_annotator() {
    let h = Harness::new();
    let (status, _) = h.send("GET", "/api/progress", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let req = Request::get("/api/progress")
        .header("authorization", "Bearer wrong")
        .header(ANNOTATOR_HEADER, "ann1")
        .body(Body::empty())
        .unwrap();
    assert_eq!(h.app.clone().oneshot(req).await.unwrap().status(), StatusCode::UNAUTHORIZED);
    let (status, _) = h.send("GET", "/api/progress", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn queue_is_ordered_by_priority_then_id() {
    let h = Harness::new();
    let (status, top) = h.json("GET", "/api/drafts?status=top_priority", "ann1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ids(&top), ["d2", "d4", "d6"]);
    let (_, all) = h.json("GET", "/api/drafts", "ann1", None).await;
    assert_eq!(ids(&all), ["d2", "d4", "d6", "d3", "d5"]);
    let (_, accepted) = h.json("GET", "/api/drafts?status=accepted", "ann1", None).await;
    assert_eq!(ids(&accepted), ["d1"]);
    let (status, _) = h.json("GET", "/api/drafts?status=urgent", "ann1", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_draft_is_404() {
    let h = Harness::new();
    for (method, uri) in [
        ("GET", "/api/drafts/nope"),
        ("POST", "/api/drafts/nope/claim"),
        ("POST", "/api/drafts/nope/annotation"),
    ] {
        let body = (method == "POST").then(|| json!({"is_correct": "Yes"}));
        assert_eq!(h.json(method, uri, "ann1", body).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, draft) = h.json("GET", "/api/drafts/d3", "ann1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(draft["status"], "low_priority");
    assert_eq!(draft["applied_correction"]["resp_lrl"], "Suba, a ga koy Niamey.");
}

#[tokio::test]
async fn lease_hides_draft_and_expires() {
    let h = Harness::new();
    let (status, lease) = h.json("POST", "/api/drafts/d2/claim", "ann1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(lease["annotator_id"], "ann1");
    assert_eq!(lease["expires_at"], 1_700_000_000 + 900);

    let (status, body) = h.json("POST", "/api/drafts/d2/claim", "ann2", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["lease"]["annotator_id"], "ann1");
    assert_eq!(h.annotate("d2", "ann2", json!({"is_correct": "Yes"})).await, StatusCode::CONFLICT);

    let (_, queue) = h.json("GET", "/api/drafts?status=top_priority", "ann2", None).await;
    assert_eq!(ids(&queue), ["d4", "d6"]);
    let (_, own) = h.json("GET", "/api/drafts?status=top_priority", "ann1", None).await;
    assert_eq!(ids(&own), ["d2", "d4", "d6"]);
    // Renewal by the holder is allowed.
    assert_eq!(h.json("POST", "/api/drafts/d2/claim", "ann1", None).await.0, StatusCode::OK);

    h.advance(Duration::from_secs(15 * 60 + 1));
    let (status, lease) = h.json("POST", "/api/drafts/d2/claim", "ann2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(lease["annotator_id"], "ann2");
}

#[tokio::test]
async fn invalid_annotations_are_400() {
    let h = Harness::new();
    let cases = [
        (json!({"is_correct": "No", "corrected_response": "A ga koy."}), "error_category"),
        (json!({"is_correct": "No", "error_category": "orthography"}), "corrected_response"),
        (json!({"is_correct": "No", "corrected_response": "  ", "error_category": "orthography"}), "corrected_response"),
        (json!({"is_correct": "Maybe"}), "body"),
        (json!({"is_correct": "No", "corrected_response": "x", "error_category": "style"}), "body"),
        (json!({"is_correct": "Yes", "draft_id": "d4"}), "draft_id"),
        (json!({"is_correct": "Yes", "annotator_id": "someone"}), "annotator_id"),
    ];
    for (body, field) in cases {
        let (status, err) = h.json("POST", "/api/drafts/d2/annotation", "ann1", Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(err["field"], field, "{body}");
    }
    let (status, _) = h.send("POST", "/api/drafts/d2/annotation", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(std::fs::read_to_string(&h.journal).unwrap(), "");
}

#[tokio::test]
async fn annotation_is_journaled_and_counted() {
    let h = Harness::new();
    let progress = |v: Value| serde_json::from_value::<Progress>(v).unwrap();
    let before = progress(h.json("GET", "/api/progress", "ann1", None).await.1);
    assert_eq!((before.total, before.top_priority, before.low_priority, before.reviewed), (6, 3, 2, 0));

    h.json("POST", "/api/drafts/d2/claim", "ann1", None).await;
    assert_eq!(h.annotate("d2", "ann1", fix("Suba, a ga koy Niamey.")).await, StatusCode::CREATED);
    let after = progress(h.json("GET", "/api/progress", "ann1", None).await.1);
    assert_eq!(after.reviewed, before.reviewed + 1);
    assert_eq!(after.annotations, 1);
    assert_eq!(after.by_annotator["ann1"], 1);

    // Submitting releases the lease.
    assert_eq!(h.json("POST", "/api/drafts/d2/claim", "ann2", None).await.0, StatusCode::OK);

    let journal: Vec<AnnotationRecord> = read_jsonl(&h.journal).unwrap();
    assert_eq!(journal.len(), 1);
    assert_eq!(journal[0].draft_id, "d2");
    assert_eq!(journal[0].annotator_id, "ann1");
    assert_eq!(journal[0].corrected_response.as_deref(), Some("Suba, a ga koy Niamey."));
}

#[tokio::test]
async fn journal_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("sub").join("annotations.jsonl");
    {
        let state = AppState::new(fixture(), &journal, TOKEN, Duration::from_secs(60)).unwrap();
        let app = router(Arc::new(state));
        let req = Request::post("/api/drafts/d4/annotation")
            .header("authorization", format!("Bearer {TOKEN}"))
            .header(ANNOTATOR_HEADER, "ann1")
            .body(Body::from(r#"{"is_correct":"Yes"}"#))
            .unwrap();
        assert_eq!(app.oneshot(req).await.unwrap().status(), StatusCode::CREATED);
    }
    let h = Harness::with_journal(dir, journal);
    assert_eq!(h.annotate("d6", "ann1", json!({"is_correct": "Yes"})).await, StatusCode::CREATED);
    let (_, p) = h.json("GET", "/api/progress", "ann1", None).await;
    assert_eq!(p["annotations"], 2);
    assert_eq!(std::fs::read_to_string(&h.journal).unwrap().lines().count(), 2);
}

/// (draft, annotator, verdict) triples used by the agreement and export tests.
fn votes() -> Vec<(&'static str, &'static str, bool)> {
    vec![
        ("d2", "ann1", false),
        ("d2", "ann2", false),
        ("d2", "ann3", true),
        ("d3", "ann1", true),
        ("d3", "ann2", true),
        ("d4", "ann1", false),
        ("d4", "ann2", true),
        ("d5", "ann2", true),
        ("d5", "ann3", true),
        ("d6", "ann1", false),
        ("d6", "ann3", false),
    ]
}

async fn annotate_votes(h: &Harness) {
    for (id, who, yes) in votes() {
        let body = if yes { json!({"is_correct": "Yes"}) } else { fix("Suba, a ga koy Niamey.") };
        assert_eq!(h.annotate(id, who, body).await, StatusCode::CREATED);
    }
}

#[tokio::test]
async fn agreement_matches_direct_alpha() {
    let h = Harness::new();
    assert_eq!(h.json("GET", "/api/agreement", "ann1", None).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    annotate_votes(&h).await;

    let raters = ["ann1", "ann2", "ann3"];
    let mut items: Vec<&str> = votes().iter().map(|v| v.0).collect();
    items.dedup();
    let matrix: Vec<Vec<Option<Verdict>>> = items
        .iter()
        .map(|item| {
            raters
                .iter()
                .map(|r| {
                    votes()
                        .iter()
                        .find(|v| v.0 == *item && v.1 == *r)
                        .map(|v| if v.2 { Verdict::Yes } else { Verdict::No })
                })
                .collect()
        })
        .collect();
    let expected = krippendorff_alpha(&matrix).unwrap();

    let (status, report) = h.json("GET", "/api/agreement", "ann1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["alpha"].as_f64().unwrap(), expected);
    assert_eq!(report["items"], 5);
    assert_eq!(report["annotators"], 3);

    let (_, limited) = h.json("GET", "/api/agreement?items=2", "ann1", None).await;
    assert_eq!(limited["items"], 2);
    let (status, _) = h.json("GET", "/api/agreement?label=verdict_and_category", "ann1", None).await;
    assert_eq!(status, StatusCode::OK);
}

fn fill_sheet(csv_text: &str, who: &str) -> String {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let rows: Vec<ReviewRow> = reader
        .deserialize::<ReviewRow>()
        .map(|r| r.unwrap())
        .filter_map(|mut row| {
            let (_, _, yes) = votes().into_iter().find(|v| v.0 == row.draft_id && v.1 == who)?;
            if yes {
                row.is_correct = "Yes".into();
            } else {
                row.is_correct = "No".into();
                row.corrected_response = "Suba, a ga koy Niamey.".into();
                row.error_category = "Tense Inconsistency".into();
            }
            Some(row)
        })
        .collect();
    instructlr_core::annotation::rows_to_csv(&rows).unwrap()
}

#[tokio::test]
async fn service_export_equals_csv_workflow() {
    let h = Harness::new();
    annotate_votes(&h).await;
    let (status, bytes) = h.send("GET", "/api/export.csv", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::OK);
    let served = String::from_utf8(bytes).unwrap();

    let drafts = fixture();
    let known: HashSet<String> = drafts.iter().map(|c| c.draft.id.clone()).collect();
    let sheet = export_review_sheet(&drafts, &[], 200).unwrap().remove(0);
    let mut records = Vec::new();
    for who in ["ann1", "ann2", "ann3"] {
        let report = import_annotations(&fill_sheet(&sheet, who), who, Some(&known)).unwrap();
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        records.extend(report.records);
    }
    let via_csv = export_merged_sheet(&drafts, &merge_annotations(&records)).unwrap();
    assert_eq!(served, via_csv);

    let journal: Vec<AnnotationRecord> = read_jsonl(Path::new(&h.journal)).unwrap();
    assert_eq!(merge_annotations(&journal), merge_annotations(&records));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_are_serialized() {
    let h = Arc::new(Harness::new());
    let mut tasks = Vec::new();
    for i in 0..64 {
        let h = h.clone();
        tasks.push(tokio::spawn(async move {
            let id = ["d2", "d3", "d4", "d5", "d6"][i % 5];
            h.annotate(id, &format!("ann{i}"), fix(&format!("A ga koy Niamey {i}."))).await
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    let journal: Vec<AnnotationRecord> = read_jsonl(&h.journal).unwrap();
    assert_eq!(journal.len(), 64);
    let (_, p) = h.json("GET", "/api/progress", "ann0", None).await;
    assert_eq!(p["annotations"], 64);
    assert_eq!(p["reviewed"], 5);
}
