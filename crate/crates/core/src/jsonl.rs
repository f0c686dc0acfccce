//! JSON Lines reading and writing with line-numbered errors.
//!
//! Canonical form: one compact JSON object per line, struct field order,
//! UTF-8, LF line endings, trailing newline after the last record.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: schema mismatch: {message}")]
    Schema { line: usize, message: String },
    #[error("serializing record {index}: {message}")]
    Serialize { index: usize, message: String },
}

impl JsonlError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// The first complete JSON object embedded in free text, e.g. a model
/// completion wrapped in prose or a code fence.
pub fn first_json_object(text: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    text.match_indices('{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(serde_json::Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

/// Parse JSON Lines text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| JsonlError::Malformed {
                line,
                message: e.to_string(),
            })?;
        let record = serde_json::from_value(value).map_err(|e| JsonlError::Schema {
            line,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Render records in canonical form.
pub fn to_jsonl_string<T: Serialize>(records: &[T]) -> Result<String, JsonlError> {
    let mut out = String::new();
    for (index, record) in records.iter().enumerate() {
        let line = serde_json::to_string(record).map_err(|e| JsonlError::Serialize {
            index,
            message: e.to_string(),
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let text = fs::read_to_string(path).map_err(|e| JsonlError::io(path, e))?;
    parse_jsonl(&text)
}

/// Write records to `path`, replacing it atomically.
pub fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<(), JsonlError> {
    let text = to_jsonl_string(records)?;
    write_atomic(path, text.as_bytes()).map_err(|e| JsonlError::io(path, e))
}

/// Write through a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_object_inside_prose() {
        let text = "Voici:\n```json\n{\"a\": \"{x}\", \"b\": 1}\n```";
        let map = first_json_object(text).unwrap();
        assert_eq!(map["a"], "{x}");
        assert!(first_json_object("{ broken").is_none());
        assert!(first_json_object("{oops} then {\"k\": 2}").unwrap().contains_key("k"));
    }
    use crate::data::{Draft, SeedInstruction};

    #[test]
    fn empty_text_is_empty_list() {
        let v: Vec<Draft> = parse_jsonl("").unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn missing_field_names_the_field() {
        let line = r#"{"id":"d1","instr_fr":"q","instr_lrl":"a","CoT_lrl":"N/A","topic_fr":"Sports","lang":"dje"}"#;
        let err = parse_jsonl::<Draft>(line).unwrap_err();
        match err {
            JsonlError::Schema { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("resp_lrl"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let line = r#"{"id":"s1","instruction_fr":"x","context_fr":"Sports","extra":1}"#;
        let err = parse_jsonl::<SeedInstruction>(line).unwrap_err();
        assert!(err.to_string().contains("extra"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":\"s1\",\"instruction_fr\":\"x\",\"context_fr\":\"Sports\"}\n{not json\n";
        match parse_jsonl::<SeedInstruction>(text).unwrap_err() {
            JsonlError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/seeds.jsonl");
        let seeds = vec![SeedInstruction {
            id: "s1".into(),
            instruction_fr: "Définis le stress.".into(),
            context_fr: "Sciences sociales & psychologie".into(),
        }];
        write_jsonl(&seeds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        assert!(text.contains("Définis"));
        assert_eq!(read_jsonl::<SeedInstruction>(&path).unwrap(), seeds);
    }
}
