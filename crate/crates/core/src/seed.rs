//! French seed instructions, one per model call.
//!
//! Each topic gets a quota of slots. Slots are generated in rounds: every
//! pending slot at the lowest outstanding attempt number is sent in
//! parallel, then a single collector walks the completions in slot order
//! and accepts, retries or fails each one. Every decision is appended to
//! the checkpoint log, so a resumed run replays the same decisions and
//! continues with identical requests.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::checkpoint::{CheckpointError, CheckpointLog};
use crate::data::{SeedInstruction, Topic, TopicCatalog};
use crate::gateway::{Gateway, GatewayError, GenerationRequest};
use crate::jsonl::first_json_object;
use crate::pool::map_ordered;
use crate::text::normalize_for_dedupe;

const SEED_TEMPLATE: &str = "\
Domaine : {domain}

TASK:
GÉNÉREZ UNE SEULE CONSIGNE OU QUESTION EN FRANÇAIS, REPRÉSENTATIVE DE CE DOMAINE.
VOUS POUVEZ CHOISIR :
- QUESTION À CHOIX MULTIPLES (Options: A)..., B)... etc.)
- QUESTION VRAI/FAUX
- AFFIRMATION À COMPLÉTER
- DEMANDE DE LISTE (ex. : \"Donnez x exemples de...\")
- TÂCHE OUVERTE (CLASSIFICATION, RÉSUMÉ, EXPLICATION, EXEMPLE, ETC.)
- OU N'IMPORTE QUEL AUTRE STYLE.

CONTRAINTES :
1. RESTEZ EN 1 À 4 PHRASES.
2. NE DEMANDEZ PAS DE DESSIN, DE CHANT, DE GÉNÉRATION D'IMAGE, NI DE RECHERCHE SUR LE WEB.
3. UTILISEZ UN VERBE UNIQUE POUR ÉVITER LA RÉPÉTITION ET MAXIMISER LA DIVERSITÉ.
4. FOURNISSEZ UNE ENTRÉE RÉALISTE (<=150 MOTS).
5. L'ENTRÉE DOIT ÊTRE SPÉCIFIQUE, SUBSTANTIELLE ET FOURNIR UN CONTENU STIMULANT.
6. NE RÉPONDEZ PAS AUX INSTRUCTIONS OU QUESTIONS — LIMITEZ-VOUS JUSTE À L'INSTRUCTION OU À LA QUESTION.

OUTPUT FORMAT (JSON):
RENVOYEZ STRICTEMENT CE JSON :
{
  \"instruction_fr\": \"<VOTRE INSTRUCTION>\",
  \"context_fr\": \"{domain}\"
}
";

/// Word-set Jaccard above which two seeds of a topic count as duplicates.
pub const NEAR_DUPLICATE_JACCARD: f64 = 0.9;

pub fn render_seed_prompt(topic: &Topic) -> String {
    prompt_for(&topic.name_fr)
}

fn prompt_for(domain: &str) -> String {
    SEED_TEMPLATE.replace("{domain}", domain)
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("no JSON object in completion")]
    NoJson,
    #[error("schema: {0}")]
    Schema(String),
    #[error("context_fr {found:?} does not match topic {expected:?}")]
    TopicMismatch { expected: String, found: String },
    #[error("plan: {0}")]
    Plan(String),
    #[error("directive verbs line {line}: {message}")]
    Verbs { line: usize, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint entry for unknown slot {topic_id}/{slot}")]
    StaleCheckpoint { topic_id: u32, slot: usize },
}

/// The instruction and domain read from a completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSeed {
    pub instruction_fr: String,
    pub context_fr: String,
}

impl ParsedSeed {
    pub fn into_seed(self, id: impl Into<String>) -> SeedInstruction {
        SeedInstruction {
            id: id.into(),
            instruction_fr: self.instruction_fr,
            context_fr: self.context_fr,
        }
    }
}

fn string_field(map: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<String, SeedError> {
    match map.get(key) {
        None => Err(SeedError::Schema(format!("missing key {key:?}"))),
        Some(serde_json::Value::String(s)) if s.trim().is_empty() => {
            Err(SeedError::Schema(format!("{key} is empty")))
        }
        Some(serde_json::Value::String(s)) => Ok(s.trim().to_string()),
        Some(_) => Err(SeedError::Schema(format!("{key} is not a string"))),
    }
}

/// Extract the seed JSON from a completion; `context_fr` must name the
/// expected topic.
pub fn parse_seed_response(completion: &str, expected_topic: &str) -> Result<ParsedSeed, SeedError> {
    let map = first_json_object(completion).ok_or(SeedError::NoJson)?;
    let instruction_fr = string_field(&map, "instruction_fr")?;
    let context_fr = string_field(&map, "context_fr")?;
    if context_fr != expected_topic {
        return Err(SeedError::TopicMismatch {
            expected: expected_topic.to_string(),
            found: context_fr,
        });
    }
    Ok(ParsedSeed {
        instruction_fr,
        context_fr,
    })
}

/// Inflected French directive verbs mapped to their infinitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectiveVerbs {
    forms: HashMap<String, String>,
}

impl DirectiveVerbs {
    /// Lines of `infinitive: form form ...`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SeedError> {
        let mut forms = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| SeedError::Verbs {
                line: i + 1,
                message: message.to_string(),
            };
            let (canonical, rest) = line.split_once(':').ok_or_else(|| err("expected `verb: forms`"))?;
            let canonical = canonical.trim().to_lowercase();
            if canonical.is_empty() {
                return Err(err("empty verb"));
            }
            forms.insert(canonical.clone(), canonical.clone());
            for form in rest.split_whitespace() {
                forms.insert(form.to_lowercase(), canonical.clone());
            }
        }
        Ok(Self { forms })
    }

    pub fn builtin() -> Self {
        Self::parse(assets::DIRECTIVE_VERBS).expect("embedded directive verbs are valid")
    }

    /// Infinitive of the first listed verb in the instruction.
    pub fn leading_verb(&self, instruction: &str) -> Option<&str> {
        instruction
            .split(|c: char| !c.is_alphabetic() && c != '-')
            .filter(|w| !w.is_empty())
            .find_map(|w| self.forms.get(&w.to_lowercase()))
            .map(String::as_str)
    }
}

/// Word-set Jaccard similarity of the normalized texts.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a = normalize_for_dedupe(a);
    let b = normalize_for_dedupe(b);
    let a: BTreeSet<&str> = a.split_whitespace().collect();
    let b: BTreeSet<&str> = b.split_whitespace().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicQuota {
    pub topic_id: u32,
    pub topic_fr: String,
    pub quota: usize,
}

/// How many seeds to generate per topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBatchPlan {
    pub total_count: usize,
    pub quotas: Vec<TopicQuota>,
}

impl SeedBatchPlan {
    /// Split `total` evenly over the catalog; the first `total % n` topics
    /// take one extra seed.
    pub fn equal_split(catalog: &TopicCatalog, total: usize) -> Result<Self, SeedError> {
        let n = catalog.len();
        if total < n {
            return Err(SeedError::Plan(format!("{total} seeds cannot cover {n} topics")));
        }
        let quotas = catalog
            .topics()
            .iter()
            .enumerate()
            .map(|(i, t)| TopicQuota {
                topic_id: t.id,
                topic_fr: t.name_fr.clone(),
                quota: total / n + usize::from(i < total % n),
            })
            .collect();
        Ok(Self {
            total_count: total,
            quotas,
        })
    }

    /// Explicit quotas by French topic name, in catalog order.
    pub fn from_quotas(catalog: &TopicCatalog, quotas: &BTreeMap<String, usize>) -> Result<Self, SeedError> {
        for (name, &q) in quotas {
            if catalog.by_name(name).is_none() {
                return Err(SeedError::Plan(format!("unknown topic {name:?}")));
            }
            if q == 0 {
                return Err(SeedError::Plan(format!("quota for {name:?} must be positive")));
            }
        }
        let quotas: Vec<TopicQuota> = catalog
            .topics()
            .iter()
            .filter_map(|t| {
                quotas.get(&t.name_fr).map(|&quota| TopicQuota {
                    topic_id: t.id,
                    topic_fr: t.name_fr.clone(),
                    quota,
                })
            })
            .collect();
        if quotas.is_empty() {
            return Err(SeedError::Plan("no quotas".into()));
        }
        Ok(Self {
            total_count: quotas.iter().map(|q| q.quota).sum(),
            quotas,
        })
    }

    /// Number of recent same-topic seeds a new seed's verb must differ from.
    pub fn verb_window(quota: usize) -> usize {
        quota.div_ceil(5)
    }
}

pub fn seed_id(topic_id: u32, slot: usize) -> String {
    format!("seed-{topic_id:02}-{slot:05}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum SlotDecision {
    Accepted { seed: SeedInstruction, relaxed: bool },
    Retry { reason: String },
    Failed { reason: String },
}

/// One checkpoint line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotLogEntry {
    pub topic_id: u32,
    pub slot: usize,
    pub attempt: u32,
    #[serde(flatten)]
    pub decision: SlotDecision,
}

#[derive(Debug, Clone)]
pub struct SeedOptions {
    pub workers: usize,
    pub max_attempts: u32,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub verbs: DirectiveVerbs,
    pub checkpoint: Option<PathBuf>,
}

impl Default for SeedOptions {
    fn default() -> Self {
        Self {
            workers: 4,
            max_attempts: 3,
            max_output_tokens: 400,
            temperature: 0.9,
            verbs: DirectiveVerbs::builtin(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedSlot {
    pub topic_fr: String,
    pub slot: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedReport {
    /// Plan order: topic by topic, slot by slot.
    pub seeds: Vec<SeedInstruction>,
    pub retries: usize,
    /// Seeds accepted on the last attempt despite a repeated directive verb.
    pub relaxed: usize,
    pub failed: Vec<FailedSlot>,
    /// Missing seeds per topic; empty when the plan was met.
    pub shortfall: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotState {
    Pending(u32),
    Done,
}

struct Collector<'a> {
    plan: &'a SeedBatchPlan,
    options: &'a SeedOptions,
    state: BTreeMap<(usize, usize), SlotState>,
    accepted: BTreeMap<(usize, usize), (SeedInstruction, bool)>,
    /// Accepted seeds per topic in acceptance order.
    by_topic: Vec<Vec<(String, Option<String>)>>,
    normalized: HashSet<String>,
    retries: usize,
    failed: Vec<(usize, usize, String)>,
}

impl<'a> Collector<'a> {
    fn new(plan: &'a SeedBatchPlan, options: &'a SeedOptions) -> Self {
        let mut state = BTreeMap::new();
        for (t, q) in plan.quotas.iter().enumerate() {
            for slot in 0..q.quota {
                state.insert((t, slot), SlotState::Pending(0));
            }
        }
        Self {
            plan,
            options,
            state,
            accepted: BTreeMap::new(),
            by_topic: vec![Vec::new(); plan.quotas.len()],
            normalized: HashSet::new(),
            retries: 0,
            failed: Vec::new(),
        }
    }

    fn apply(&mut self, t: usize, slot: usize, attempt: u32, decision: &SlotDecision) {
        match decision {
            SlotDecision::Accepted { seed, relaxed } => {
                let verb = self.options.verbs.leading_verb(&seed.instruction_fr).map(str::to_string);
                self.normalized.insert(normalize_for_dedupe(&seed.instruction_fr));
                self.by_topic[t].push((seed.instruction_fr.clone(), verb));
                self.accepted.insert((t, slot), (seed.clone(), *relaxed));
                self.state.insert((t, slot), SlotState::Done);
            }
            SlotDecision::Retry { .. } => {
                self.retries += 1;
                self.state.insert((t, slot), SlotState::Pending(attempt + 1));
            }
            SlotDecision::Failed { reason } => {
                self.failed.push((t, slot, reason.clone()));
                self.state.insert((t, slot), SlotState::Done);
            }
        }
    }

    fn decide(&self, t: usize, slot: usize, attempt: u32, completion: &str) -> SlotDecision {
        let last = attempt + 1 >= self.options.max_attempts;
        let reject = |reason: String| {
            if last {
                SlotDecision::Failed { reason }
            } else {
                SlotDecision::Retry { reason }
            }
        };
        let quota = &self.plan.quotas[t];
        let parsed = match parse_seed_response(completion, &quota.topic_fr) {
            Ok(p) => p,
            Err(e) => return reject(e.to_string()),
        };
        if self.normalized.contains(&normalize_for_dedupe(&parsed.instruction_fr)) {
            return reject("duplicate instruction".into());
        }
        if self.by_topic[t]
            .iter()
            .any(|(text, _)| jaccard(text, &parsed.instruction_fr) > NEAR_DUPLICATE_JACCARD)
        {
            return reject("near-duplicate instruction".into());
        }
        let mut relaxed = false;
        if let Some(verb) = self.options.verbs.leading_verb(&parsed.instruction_fr) {
            let window = SeedBatchPlan::verb_window(quota.quota);
            let recent = self.by_topic[t].iter().rev().take(window);
            if recent.filter_map(|(_, v)| v.as_deref()).any(|v| v == verb) {
                if !last {
                    return SlotDecision::Retry {
                        reason: format!("directive verb {verb:?} used recently"),
                    };
                }
                relaxed = true;
            }
        }
        SlotDecision::Accepted {
            seed: parsed.into_seed(seed_id(quota.topic_id, slot)),
            relaxed,
        }
    }

    /// Pending slots at the lowest outstanding attempt, in slot order.
    fn next_round(&self) -> Vec<(usize, usize, u32)> {
        let Some(min) = self
            .state
            .values()
            .filter_map(|s| match s {
                SlotState::Pending(a) => Some(*a),
                SlotState::Done => None,
            })
            .min()
        else {
            return Vec::new();
        };
        self.state
            .iter()
            .filter(|(_, s)| **s == SlotState::Pending(min))
            .map(|(&(t, slot), _)| (t, slot, min))
            .collect()
    }

    fn report(self) -> SeedReport {
        let mut shortfall = BTreeMap::new();
        for (t, q) in self.plan.quotas.iter().enumerate() {
            let got = self.accepted.keys().filter(|(tt, _)| *tt == t).count();
            if got < q.quota {
                shortfall.insert(q.topic_fr.clone(), q.quota - got);
            }
        }
        let mut failed = self.failed;
        failed.sort_by_key(|(t, slot, _)| (*t, *slot));
        SeedReport {
            relaxed: self.accepted.values().filter(|(_, r)| *r).count(),
            seeds: self.accepted.into_values().map(|(s, _)| s).collect(),
            retries: self.retries,
            failed: failed
                .into_iter()
                .map(|(t, slot, reason)| FailedSlot {
                    topic_fr: self.plan.quotas[t].topic_fr.clone(),
                    slot,
                    reason,
                })
                .collect(),
            shortfall,
        }
    }
}

pub fn seed_request(topic_fr: &str, topic_id: u32, slot: usize, attempt: u32, options: &SeedOptions) -> GenerationRequest {
    GenerationRequest::new(
        "",
        prompt_for(topic_fr),
        format!("seed/{topic_id}/{slot}/{attempt}"),
    )
    .with_sampling(options.max_output_tokens, options.temperature)
}

/// Generate the seeds of `plan`. A gateway failure stops the run with the
/// decisions so far kept in the checkpoint; rerunning resumes from there.
pub fn generate_seeds(
    plan: &SeedBatchPlan,
    gateway: &Gateway,
    options: &SeedOptions,
) -> Result<SeedReport, SeedError> {
    if plan.quotas.iter().any(|q| q.quota == 0) {
        return Err(SeedError::Plan("quotas must be positive".into()));
    }
    let mut collector = Collector::new(plan, options);
    let log = match &options.checkpoint {
        Some(path) => {
            let (log, prior) = CheckpointLog::<SlotLogEntry>::open(path)?;
            for e in prior {
                let t = plan.quotas.iter().position(|q| q.topic_id == e.topic_id);
                let key = t.map(|t| (t, e.slot));
                match key.and_then(|k| collector.state.get(&k).copied()) {
                    Some(SlotState::Pending(a)) if a == e.attempt => {
                        collector.apply(key.unwrap().0, e.slot, e.attempt, &e.decision);
                    }
                    _ => {
                        return Err(SeedError::StaleCheckpoint {
                            topic_id: e.topic_id,
                            slot: e.slot,
                        })
                    }
                }
            }
            Some(log)
        }
        None => None,
    };

    loop {
        let round = collector.next_round();
        if round.is_empty() {
            break;
        }
        let abort = AtomicBool::new(false);
        let completions = map_ordered(&round, options.workers, |&(t, slot, attempt)| {
            if abort.load(Ordering::Relaxed) {
                return None;
            }
            let q = &plan.quotas[t];
            let result = gateway.generate(&seed_request(&q.topic_fr, q.topic_id, slot, attempt, options));
            if result.is_err() {
                abort.store(true, Ordering::Relaxed);
            }
            Some(result)
        });
        let mut completions = completions.into_iter();
        for &(t, slot, attempt) in &round {
            let completion = match completions.next().flatten() {
                Some(Ok(c)) => c,
                Some(Err(e)) => return Err(e.into()),
                // Skipped after another slot's failure; report that failure.
                None => {
                    let err = completions.flatten().find_map(Result::err);
                    return Err(err.expect("an aborted round holds the failure").into());
                }
            };
            let decision = collector.decide(t, slot, attempt, &completion.text);
            if let Some(log) = &log {
                log.append(&SlotLogEntry {
                    topic_id: plan.quotas[t].topic_id,
                    slot,
                    attempt,
                    decision: decision.clone(),
                })?;
            }
            collector.apply(t, slot, attempt, &decision);
        }
    }
    Ok(collector.report())
}
