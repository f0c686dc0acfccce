//! Shared fixtures: the 20-row snapshot, a scripted model that answers every
//! pipeline request deterministically, and run configurations.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use instructlr_core::checker::render_analysis;
use instructlr_core::config::Config;
use instructlr_core::gateway::{GatewayError, GenerationRequest};
use instructlr_core::grammar::Grammar;
use instructlr_core::CheckerAnalysis;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct SnapshotRow {
    pub instr_fr: String,
    pub instr_lrl: String,
    pub resp_lrl: String,
    #[serde(rename = "CoT_lrl")]
    pub cot_lrl: String,
    pub topic_fr: String,
    pub lang: String,
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn replay_dir() -> PathBuf {
    fixture_dir().join("replay")
}

pub fn golden_final() -> PathBuf {
    fixture_dir().join("table10_final.jsonl")
}

pub fn snapshot() -> &'static [SnapshotRow] {
    static ROWS: OnceLock<Vec<SnapshotRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let text = std::fs::read_to_string(fixture_dir().join("table10.jsonl")).unwrap();
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    })
}

fn grammar() -> &'static Grammar {
    static GRAMMAR: OnceLock<Grammar> = OnceLock::new();
    GRAMMAR.get_or_init(|| Grammar::builtin("dje").unwrap())
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

fn missing(request: &GenerationRequest) -> GatewayError {
    GatewayError::Protocol(format!("scripted model has no answer for {}", request.request_tag))
}

/// Deterministic stand-in for the generator and checker models.
///
/// Seeds and drafts come from the snapshot rows; the checker verdict is the
/// rule engine's, phrased in the checker output format.
pub fn scripted_model(request: &GenerationRequest) -> Result<String, GatewayError> {
    let tag = request.request_tag.as_str();
    let user = request.user_content.as_str();
    if tag.starts_with("seed/") {
        let domain = between(user, "Domaine : ", "\n").ok_or_else(|| missing(request))?;
        let row = snapshot()
            .iter()
            .find(|r| r.topic_fr == domain)
            .ok_or_else(|| missing(request))?;
        return Ok(serde_json::json!({
            "instruction_fr": row.instr_fr,
            "context_fr": row.topic_fr,
        })
        .to_string());
    }
    if tag.starts_with("draft/") {
        let input = between(user, "USER REQUEST (JSON INPUT):\n", "\n\nEXPECTED OUTPUT").ok_or_else(|| missing(request))?;
        let input: serde_json::Value = serde_json::from_str(input).map_err(|_| missing(request))?;
        let instruction = input["instruction_fr"].as_str().ok_or_else(|| missing(request))?;
        let row = snapshot()
            .iter()
            .find(|r| r.instr_fr == instruction)
            .ok_or_else(|| missing(request))?;
        return Ok(serde_json::json!({
            "instr_fr": row.instr_fr,
            "instr_lrl": row.instr_lrl,
            "resp_lrl": row.resp_lrl,
            "CoT_lrl": row.cot_lrl,
            "topic_fr": row.topic_fr,
            "lang": row.lang,
        })
        .to_string());
    }
    if tag.starts_with("check/") || tag.starts_with("eval/") {
        let sentence = between(user, "sentence: \"", "\"\nRely").ok_or_else(|| missing(request))?;
        let violations = grammar().check(sentence);
        let analysis = match violations.first() {
            None => CheckerAnalysis::correct(),
            Some(v) => CheckerAnalysis::incorrect(v.message.clone(), grammar().suggest(sentence, &violations)),
        };
        return Ok(render_analysis(&analysis));
    }
    Err(missing(request))
}

/// Snapshot run: one seed per topic, model-backed checker.
pub fn snapshot_config(work_dir: &Path, replay: &Path) -> Config {
    let text = format!(
        "[paths]\nwork_dir = {:?}\nreplay = {:?}\n\n[pipeline]\nlang = \"dje\"\ntotal_seeds = 20\nworkers = 4\n",
        work_dir.display().to_string(),
        replay.display().to_string(),
    );
    Config::from_toml(&text, work_dir).unwrap()
}

/// Every output file of a run, for byte comparison.
pub fn run_outputs(work_dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for name in ["seeds.jsonl", "drafts.jsonl", "checked.jsonl", "final.jsonl", "manifest.json"] {
        files.push((name.to_string(), std::fs::read(work_dir.join(name)).unwrap()));
    }
    let review = work_dir.join("review");
    let mut sheets: Vec<PathBuf> = std::fs::read_dir(&review)
        .map(|rd| rd.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    sheets.sort();
    for path in sheets {
        let name = format!("review/{}", path.file_name().unwrap().to_string_lossy());
        files.push((name, std::fs::read(path).unwrap()));
    }
    files
}
