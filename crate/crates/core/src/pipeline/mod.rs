//! End-to-end run: seed → draft → check → export.
//!
//! Every stage writes one JSON Lines output into the work directory and is
//! recorded in `manifest.json` with a content hash of its inputs and of its
//! output. On re-run a stage is skipped when both hashes still match;
//! otherwise it runs again, resuming from its checkpoint log when the inputs
//! are unchanged and starting fresh when they changed. A failing stage
//! halts the run and leaves its checkpoint in place.

mod manifest;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{write_review_sheets, MergedDecision};
use crate::assets;
use crate::checker::{run_batch, BatchOptions, RagChecker, RuleChecker, SentenceChecker, TriageSummary};
use crate::config::{CheckerKind, Config, ConfigError};
use crate::data::{CheckedDraft, Draft, SeedInstruction, TopicCatalog, TriageStatus};
use crate::draft::{generate_drafts, DraftOptions};
use crate::gateway::Gateway;
use crate::glossary::Glossary;
use crate::grammar::{Grammar, RuleSet};
use crate::jsonl::{parse_jsonl, read_jsonl, to_jsonl_string, write_atomic};
use crate::retrieval::{build_index, parse_sentences, KnowledgeBase};
use crate::seed::{generate_seeds, render_seed_prompt, SeedBatchPlan, SeedOptions};

pub use manifest::{hash_bytes, InputHasher, Manifest, StageRecord};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: BoxError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seed,
    Draft,
    Check,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Self::Seed, Self::Draft, Self::Check, Self::Export];

    pub fn name(self) -> &'static str {
        match self {
            Self::Seed => "seed",
            Self::Draft => "draft",
            Self::Check => "check",
            Self::Export => "export",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn stage_err<E: Into<BoxError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

/// File layout inside the work directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub work_dir: PathBuf,
}

impl RunPaths {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            work_dir: work_dir.into(),
        }
    }

    pub fn output(&self, stage: Stage) -> PathBuf {
        self.work_dir.join(match stage {
            Stage::Seed => "seeds.jsonl",
            Stage::Draft => "drafts.jsonl",
            Stage::Check => "checked.jsonl",
            Stage::Export => "final.jsonl",
        })
    }

    pub fn checkpoint(&self, stage: Stage) -> PathBuf {
        self.work_dir.join("checkpoints").join(format!("{}.log", stage.name()))
    }

    pub fn review_dir(&self) -> PathBuf {
        self.work_dir.join("review")
    }

    pub fn manifest(&self) -> PathBuf {
        self.work_dir.join("manifest.json")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Option<Stage>,
    /// Inputs and output unchanged since the last completed run.
    pub skipped: bool,
    /// Records written.
    pub count: usize,
    pub retries: usize,
    pub failures: usize,
    /// Units taken from the checkpoint log.
    pub resumed: usize,
    pub elapsed_ms: u128,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub triage: Option<TriageSummary>,
    pub elapsed_ms: u128,
}

impl RunReport {
    /// Every stage completed with no failed unit.
    pub fn all_green(&self) -> bool {
        self.stages.len() == Stage::ALL.len() && self.stages.iter().all(|s| s.failures == 0)
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == Some(stage))
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<8} {:>8} {:>8} {:>8} {:>8} {:>10}  {}\n",
            "stage", "records", "retries", "failed", "resumed", "ms", "status"
        );
        for s in &self.stages {
            let name = s.stage.map_or("?", Stage::name);
            let status = if s.skipped {
                "skipped"
            } else if s.failures > 0 {
                "partial"
            } else {
                "ok"
            };
            let _ = write!(
                out,
                "{name:<8} {:>8} {:>8} {:>8} {:>8} {:>10}  {status}",
                s.count, s.retries, s.failures, s.resumed, s.elapsed_ms
            );
            if !s.detail.is_empty() {
                let _ = write!(out, " ({})", s.detail);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "total {} ms", self.elapsed_ms);
        out
    }
}

/// Everything loaded from configuration before any stage runs.
struct Resources {
    topics: TopicCatalog,
    guidelines: Vec<String>,
}

fn read_text(path: &Path) -> Result<String, BoxError> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_resources(config: &Config) -> Result<Resources, PipelineError> {
    let invalid = |m: String| PipelineError::Config(ConfigError::Invalid(m));
    let topics = match &config.paths.topics {
        Some(path) => TopicCatalog::load(path).map_err(|e| invalid(e.to_string()))?,
        None => assets::default_topics(),
    };
    let lang = &config.pipeline.lang;
    let guidelines = match &config.paths.guidelines {
        Some(path) => assets::parse_guidelines(&read_text(path).map_err(|e| invalid(e.to_string()))?),
        None => assets::default_guidelines(lang).unwrap_or_default(),
    };
    Ok(Resources { topics, guidelines })
}

/// Sentence base, grammar and worked examples for the checker, with the
/// raw texts they were built from (for input hashing).
struct Knowledge {
    kb: KnowledgeBase,
    grammar: Grammar,
    exemplars_json: String,
    texts: Vec<String>,
}

fn load_knowledge(config: &Config) -> Result<Knowledge, BoxError> {
    let lang = &config.pipeline.lang;
    let (sentences, rules, lexicon, glossary, exemplars_json) = match &config.paths.knowledge {
        Some(dir) => {
            let exemplars = dir.join("checker_exemplars.json");
            (
                read_text(&dir.join("sentences.txt"))?,
                read_text(&dir.join("rules").join(format!("{lang}.json")))?,
                read_text(&dir.join("lexicon").join(format!("{lang}.tsv")))?,
                read_text(&dir.join("glossary.tsv"))?,
                if exemplars.exists() {
                    read_text(&exemplars)?
                } else {
                    assets::CHECKER_EXEMPLARS.to_string()
                },
            )
        }
        None if lang == "dje" => (
            assets::SENTENCES_DJE.to_string(),
            assets::RULES_DJE.to_string(),
            assets::LEXICON_DJE.to_string(),
            assets::GLOSSARY_DJE.to_string(),
            assets::CHECKER_EXEMPLARS.to_string(),
        ),
        None => return Err(format!("no built-in checker resources for {lang:?}; set paths.knowledge").into()),
    };
    let rule_set = RuleSet::from_json(&rules)?;
    let glossary_set = Glossary::from_tsv(&glossary)?;
    let kb = build_index(
        parse_sentences(&sentences, "sentences.txt"),
        rule_set.clone(),
        glossary_set.entries().to_vec(),
    )?;
    let grammar = Grammar::new(rule_set, &lexicon, glossary_set)?;
    Ok(Knowledge {
        kb,
        grammar,
        exemplars_json: exemplars_json.clone(),
        texts: vec![sentences, rules, lexicon, glossary, exemplars_json],
    })
}

fn jsonl_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>, BoxError> {
    Ok(to_jsonl_string(records)?.into_bytes())
}

struct Runner {
    paths: RunPaths,
    manifest: Manifest,
}

/// What a stage body returns: the output bytes plus its report counters.
struct StageOutput {
    bytes: Vec<u8>,
    report: StageReport,
}

impl Runner {
    /// Skip, or run `body` and record the output.
    fn run_stage(
        &mut self,
        stage: Stage,
        input_hash: String,
        body: impl FnOnce(&RunPaths) -> Result<StageOutput, PipelineError>,
    ) -> Result<StageReport, PipelineError> {
        let started = Instant::now();
        let output = self.paths.output(stage);
        let io = stage_err(stage);
        if let Some(rec) = self.manifest.get(stage.name()) {
            if rec.input_hash == input_hash {
                if let Ok(bytes) = std::fs::read(&output) {
                    if rec.output_hash.as_deref() == Some(hash_bytes(&bytes).as_str()) {
                        tracing::info!(stage = stage.name(), "inputs unchanged; skipping");
                        return Ok(StageReport {
                            stage: Some(stage),
                            skipped: true,
                            count: bytes.iter().filter(|&&b| b == b'\n').count(),
                            elapsed_ms: started.elapsed().as_millis(),
                            ..StageReport::default()
                        });
                    }
                }
            } else {
                // Inputs changed: earlier progress is for different work.
                match std::fs::remove_file(self.paths.checkpoint(stage)) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(io(e)),
                }
            }
        }
        self.manifest
            .set(
                stage.name(),
                StageRecord {
                    input_hash: input_hash.clone(),
                    output_hash: None,
                },
            )
            .map_err(stage_err(stage))?;
        tracing::info!(stage = stage.name(), "running");
        let StageOutput { bytes, mut report } = body(&self.paths)?;
        write_atomic(&output, &bytes).map_err(stage_err(stage))?;
        self.manifest
            .set(
                stage.name(),
                StageRecord {
                    input_hash,
                    output_hash: Some(hash_bytes(&bytes)),
                },
            )
            .map_err(stage_err(stage))?;
        report.stage = Some(stage);
        report.elapsed_ms = started.elapsed().as_millis();
        Ok(report)
    }

    fn read_output(&self, stage: Stage, consumer: Stage) -> Result<Vec<u8>, PipelineError> {
        std::fs::read(self.paths.output(stage)).map_err(stage_err(consumer))
    }
}

/// Run the configured pipeline with the configured gateway backend.
pub fn run_pipeline(config: &Config) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let gateway = config.build_gateway()?;
    run_pipeline_with(config, &gateway)
}

/// Run the pipeline against an explicit gateway.
pub fn run_pipeline_with(config: &Config, gateway: &Gateway) -> Result<RunReport, PipelineError> {
    run_pipeline_until(config, gateway, Stage::Export)
}

/// Run the stages up to and including `last`, resuming or skipping as a full
/// run would.
pub fn run_pipeline_until(config: &Config, gateway: &Gateway, last: Stage) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let started = Instant::now();
    let resources = load_resources(config)?;
    let lang = config.lang();
    let p = &config.pipeline;
    let paths = RunPaths::new(&config.paths.work_dir);
    std::fs::create_dir_all(&paths.work_dir).map_err(stage_err(Stage::Seed))?;
    let manifest = Manifest::open(&paths.manifest()).map_err(stage_err(Stage::Seed))?;
    let mut runner = Runner {
        paths,
        manifest,
    };
    let mut report = RunReport::default();

    // Seed.
    let seed_file = match &config.paths.seeds {
        Some(path) => Some(std::fs::read(path).map_err(stage_err(Stage::Seed))?),
        None => None,
    };
    let plan = if seed_file.is_none() {
        Some(
            if p.quotas.is_empty() {
                SeedBatchPlan::equal_split(&resources.topics, p.total_seeds)
            } else {
                SeedBatchPlan::from_quotas(&resources.topics, &p.quotas)
            }
            .map_err(stage_err(Stage::Seed))?,
        )
    } else {
        None
    };
    let seed_options = SeedOptions {
        workers: p.workers,
        max_attempts: p.max_attempts,
        ..SeedOptions::default()
    };
    let seed_hash = match (&seed_file, &plan) {
        (Some(bytes), _) => InputHasher::default().part("file").part(bytes).finish(),
        (None, Some(plan)) => {
            let prompts: Vec<String> = resources.topics.topics().iter().map(render_seed_prompt).collect();
            InputHasher::default()
                .part("generate")
                .json(plan)
                .json(&prompts)
                .json(&(seed_options.max_attempts, seed_options.max_output_tokens, seed_options.temperature))
                .part(assets::DIRECTIVE_VERBS)
                .finish()
        }
        (None, None) => unreachable!("plan is built when no seed file is given"),
    };
    report.stages.push(runner.run_stage(Stage::Seed, seed_hash, |paths| {
        if let Some(bytes) = &seed_file {
            let text = std::str::from_utf8(bytes).map_err(stage_err(Stage::Seed))?;
            let seeds: Vec<SeedInstruction> = parse_jsonl(text).map_err(stage_err(Stage::Seed))?;
            return Ok(StageOutput {
                bytes: jsonl_bytes(&seeds).map_err(stage_err(Stage::Seed))?,
                report: StageReport {
                    count: seeds.len(),
                    detail: "copied".into(),
                    ..StageReport::default()
                },
            });
        }
        let options = SeedOptions {
            checkpoint: Some(paths.checkpoint(Stage::Seed)),
            ..seed_options.clone()
        };
        let out = generate_seeds(plan.as_ref().expect("plan"), gateway, &options).map_err(stage_err(Stage::Seed))?;
        Ok(StageOutput {
            bytes: jsonl_bytes(&out.seeds).map_err(stage_err(Stage::Seed))?,
            report: StageReport {
                count: out.seeds.len(),
                retries: out.retries,
                failures: out.failed.len(),
                detail: if out.relaxed > 0 {
                    format!("{} accepted with a repeated verb", out.relaxed)
                } else {
                    String::new()
                },
                ..StageReport::default()
            },
        })
    })?);
    if last == Stage::Seed {
        report.elapsed_ms = started.elapsed().as_millis();
        return Ok(report);
    }

    // Draft.
    let seeds_bytes = runner.read_output(Stage::Seed, Stage::Draft)?;
    let draft_options = DraftOptions {
        workers: p.workers,
        max_attempts: p.max_attempts,
        guidelines: resources.guidelines.clone(),
        ..DraftOptions::default()
    };
    let topic_json: Vec<_> = resources.topics.topics().to_vec();
    let draft_hash = InputHasher::default()
        .part(&seeds_bytes)
        .part(lang.as_str())
        .json(&topic_json)
        .json(&draft_options.guidelines)
        .json(&(draft_options.max_attempts, draft_options.max_output_tokens, draft_options.temperature))
        .finish();
    report.stages.push(runner.run_stage(Stage::Draft, draft_hash, |paths| {
        let text = String::from_utf8(seeds_bytes.clone()).map_err(stage_err(Stage::Draft))?;
        let seeds: Vec<SeedInstruction> = parse_jsonl(&text).map_err(stage_err(Stage::Draft))?;
        let options = DraftOptions {
            checkpoint: Some(paths.checkpoint(Stage::Draft)),
            ..draft_options.clone()
        };
        let out = generate_drafts(&seeds, &resources.topics, &lang, gateway, &options)
            .map_err(stage_err(Stage::Draft))?;
        Ok(StageOutput {
            bytes: jsonl_bytes(&out.drafts).map_err(stage_err(Stage::Draft))?,
            report: StageReport {
                count: out.drafts.len(),
                retries: out.retries as usize,
                failures: out.failures.len(),
                ..StageReport::default()
            },
        })
    })?);
    if last == Stage::Draft {
        report.elapsed_ms = started.elapsed().as_millis();
        return Ok(report);
    }

    // Check.
    let drafts_bytes = runner.read_output(Stage::Draft, Stage::Check)?;
    let knowledge = load_knowledge(config).map_err(stage_err(Stage::Check))?;
    let batch_options = BatchOptions {
        workers: p.workers,
        max_attempts: p.max_attempts,
        check_cot: p.check_cot,
        checkpoint: None,
    };
    let check_hash = InputHasher::default()
        .part(&drafts_bytes)
        .json(&p.checker)
        .json(&(batch_options.max_attempts, batch_options.check_cot))
        .json(&knowledge.texts)
        .part(lang.as_str())
        .finish();
    let mut triage = None;
    report.stages.push(runner.run_stage(Stage::Check, check_hash, |paths| {
        let text = String::from_utf8(drafts_bytes.clone()).map_err(stage_err(Stage::Check))?;
        let drafts: Vec<Draft> = parse_jsonl(&text).map_err(stage_err(Stage::Check))?;
        let Knowledge {
            kb,
            grammar,
            exemplars_json,
            ..
        } = knowledge;
        let grammar = Arc::new(grammar);
        let checker: Box<dyn SentenceChecker> = match p.checker {
            CheckerKind::Rules => Box::new(RuleChecker::new(grammar)),
            CheckerKind::Rag => {
                let exemplars = crate::checker::parse_exemplars(&exemplars_json).map_err(stage_err(Stage::Check))?;
                Box::new(RagChecker::new(
                    gateway.clone(),
                    Arc::new(kb),
                    grammar,
                    exemplars,
                    assets::language_name(lang.as_str()),
                ))
            }
        };
        let options = BatchOptions {
            checkpoint: Some(paths.checkpoint(Stage::Check)),
            ..batch_options.clone()
        };
        let out = run_batch(&drafts, checker.as_ref(), &options).map_err(stage_err(Stage::Check))?;
        let s = out.summary.clone();
        triage = Some(s.clone());
        Ok(StageOutput {
            bytes: jsonl_bytes(&out.checked).map_err(stage_err(Stage::Check))?,
            report: StageReport {
                count: out.checked.len(),
                resumed: out.resumed,
                detail: format!(
                    "accepted {} / low {} / top {}",
                    s.accepted, s.low_priority, s.top_priority
                ),
                ..StageReport::default()
            },
        })
    })?);
    if last == Stage::Check {
        report.triage = triage;
        report.elapsed_ms = started.elapsed().as_millis();
        return Ok(report);
    }

    // Export.
    let checked_bytes = runner.read_output(Stage::Check, Stage::Export)?;
    let checked_text = String::from_utf8(checked_bytes.clone()).map_err(stage_err(Stage::Export))?;
    let checked: Vec<CheckedDraft> = parse_jsonl(&checked_text).map_err(stage_err(Stage::Export))?;
    report.triage = Some(triage.unwrap_or_else(|| TriageSummary::from_checked(&checked)));
    let decisions_bytes = match &config.paths.decisions {
        Some(path) => std::fs::read(path).map_err(stage_err(Stage::Export))?,
        None => Vec::new(),
    };
    let export_hash = InputHasher::default()
        .part(&checked_bytes)
        .part(&decisions_bytes)
        .json(&(p.final_requires_review, p.review_batch_size))
        .finish();
    report.stages.push(runner.run_stage(Stage::Export, export_hash, |paths| {
        let decisions: Vec<MergedDecision> = match &config.paths.decisions {
            Some(path) => read_jsonl(path).map_err(stage_err(Stage::Export))?,
            None => Vec::new(),
        };
        let final_drafts = assemble_final(&checked, &decisions, p.final_requires_review);
        let review = paths.review_dir();
        if review.exists() {
            for entry in std::fs::read_dir(&review).map_err(stage_err(Stage::Export))? {
                let path = entry.map_err(stage_err(Stage::Export))?.path();
                if path.extension().is_some_and(|e| e == "csv") {
                    std::fs::remove_file(path).map_err(stage_err(Stage::Export))?;
                }
            }
        }
        let sheets = write_review_sheets(&review, &checked, &[], p.review_batch_size).map_err(stage_err(Stage::Export))?;
        Ok(StageOutput {
            bytes: jsonl_bytes(&final_drafts).map_err(stage_err(Stage::Export))?,
            report: StageReport {
                count: final_drafts.len(),
                detail: format!("{} review sheet(s)", sheets.len()),
                ..StageReport::default()
            },
        })
    })?);

    report.elapsed_ms = started.elapsed().as_millis();
    Ok(report)
}

/// The final dataset in checked order. A human decision wins when there is
/// one; otherwise accepted drafts are kept as generated and low-priority
/// drafts take the automatic correction. Top-priority drafts without a
/// decision are kept as generated unless `requires_review` is set. Drafts
/// whose annotators disagreed fall back to the automatic path.
pub fn assemble_final(checked: &[CheckedDraft], decisions: &[MergedDecision], requires_review: bool) -> Vec<Draft> {
    let by_id: HashMap<&str, &MergedDecision> = decisions.iter().map(|d| (d.draft_id.as_str(), d)).collect();
    checked
        .iter()
        .filter_map(|c| {
            if let Some(d) = by_id.get(c.draft.id.as_str()).and_then(|d| d.apply(&c.draft)) {
                return Some(d);
            }
            match c.status {
                TriageStatus::Accepted => Some(c.draft.clone()),
                TriageStatus::LowPriority => Some(c.corrected_draft()),
                TriageStatus::TopPriority => (!requires_review).then(|| c.draft.clone()),
            }
        })
        .collect()
}
