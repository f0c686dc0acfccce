//! Target-language instruction-response drafts from French seeds.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::language_name;
use crate::checkpoint::{CheckpointError, CheckpointLog};
use crate::data::{validate_draft, Draft, LanguageCode, SeedInstruction, Topic, TopicCatalog, NO_COT};
use crate::gateway::{Gateway, GatewayError, GenerationRequest};
use crate::jsonl::first_json_object;
use crate::pool::map_ordered;

const SYSTEM_TEMPLATE: &str = "\
Vous êtes un assistant IA expert dans la génération de paires instruction–réponse pour des langues à faibles ressources, spécifiquement pour le {target_language}. Votre tâche : (1) générer instr_lrl—la version de l'instruction en {target_language}; (2) générer resp_lrl—une réponse pertinente et grammaticalement correcte en {target_language}; (3) pour les sujets de raisonnement, générer CoT_lrl—une explication des étapes de raisonnement (max 200 mots); pour les autres sujets, CoT_lrl doit être \"N/A\".

CONTRAINTES:
1. LES MOTS TECHNIQUES (SCIENCE, MÉDECINE, ETC.) DOIVENT RESTER INCHANGÉS MAIS UTILISER LEUR VERSION FRANÇAISE.
2. SI UN MOT N'A PAS D'ÉQUIVALENT EN {TARGET_LANGUAGE}, ÉCRIVEZ SA TRANSCRIPTION PHONÉTIQUE EN FRANÇAIS.
3. N'INVENTEZ PAS DE MOTS. SUIVEZ LES DIRECTIVES.
4. PAS DE TRADUCTION MOT À MOT.
5. LES RÉPONSES (resp_lrl) NE DOIVENT PAS DÉPASSER 100 MOTS.";

/// System and user parts of a draft request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DraftPrompt {
    pub system: String,
    pub user: String,
}

impl DraftPrompt {
    /// Both parts as one document.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

#[derive(Serialize)]
struct UserRequest<'a> {
    instruction_fr: &'a str,
    context_fr: &'a str,
    specific_guidelines: Vec<String>,
}

/// Fill the draft template for one seed. `{target_language}` inside a
/// guideline is replaced by the language name.
pub fn render_draft_prompt(seed: &SeedInstruction, lang: &LanguageCode, guidelines: &[String]) -> DraftPrompt {
    let name = language_name(lang.as_str());
    let system = SYSTEM_TEMPLATE
        .replace("{target_language}", name)
        .replace("{TARGET_LANGUAGE}", &name.to_uppercase());
    let request = UserRequest {
        instruction_fr: &seed.instruction_fr,
        context_fr: &seed.context_fr,
        specific_guidelines: guidelines
            .iter()
            .map(|g| g.replace("{target_language}", name))
            .collect(),
    };
    let json = serde_json::to_string_pretty(&request).expect("string fields serialize");
    let user = format!(
        "USER REQUEST (JSON INPUT):\n{json}\n\nEXPECTED OUTPUT (JSONL):\n{{\n  \"instr_fr\": \"...\", \"instr_lrl\": \"...\", \"resp_lrl\": \"...\", \"CoT_lrl\": \"...\", \"lang\": \"{lang}\"\n}}"
    );
    DraftPrompt { system, user }
}

#[derive(Debug, Error)]
pub enum DraftError {
    #[error("no JSON object in completion")]
    NoJson,
    #[error("schema: {0}")]
    Schema(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("duplicate seed id {0:?}")]
    DuplicateSeed(String),
}

/// Stable draft id for a seed.
pub fn draft_id(lang: &LanguageCode, seed_id: &str) -> String {
    format!("{lang}-{seed_id}")
}

fn text_field(map: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<String, DraftError> {
    match map.get(key) {
        Some(serde_json::Value::String(s)) => Ok(s.trim().to_string()),
        Some(_) => Err(DraftError::Schema(format!("{key} is not a string"))),
        None => Err(DraftError::Schema(format!("missing key {key:?}"))),
    }
}

/// Read a draft from a completion and enforce the draft invariants. The
/// French instruction always comes from the seed.
pub fn parse_draft_response(
    completion: &str,
    seed: &SeedInstruction,
    topic: &Topic,
    lang: &LanguageCode,
) -> Result<Draft, DraftError> {
    let map = first_json_object(completion).ok_or(DraftError::NoJson)?;
    let instr_lrl = text_field(&map, "instr_lrl")?;
    let resp_lrl = text_field(&map, "resp_lrl")?;
    let mut cot_lrl = text_field(&map, "CoT_lrl")?;
    if cot_lrl.eq_ignore_ascii_case(NO_COT) {
        cot_lrl = NO_COT.to_string();
    }
    if let Some(found) = map.get("lang") {
        if found.as_str() != Some(lang.as_str()) {
            return Err(DraftError::Schema(format!("lang {found} does not match {lang}")));
        }
    }
    let draft = Draft {
        id: draft_id(lang, &seed.id),
        instr_fr: seed.instruction_fr.clone(),
        instr_lrl,
        resp_lrl,
        cot_lrl,
        topic_fr: topic.name_fr.clone(),
        lang: lang.clone(),
    };
    let catalog = TopicCatalog::new(vec![topic.clone()]).expect("single topic catalog");
    let issues = validate_draft(&draft, &catalog);
    if !issues.is_empty() {
        let reasons: Vec<String> = issues.iter().map(ToString::to_string).collect();
        return Err(DraftError::Rejected(reasons.join("; ")));
    }
    Ok(draft)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SeedOutcome {
    Drafted { draft: Draft },
    Failed { reason: String },
}

/// One checkpoint line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftLogEntry {
    pub seed_id: String,
    pub retries: u32,
    #[serde(flatten)]
    pub outcome: SeedOutcome,
}

#[derive(Debug, Clone)]
pub struct DraftOptions {
    pub workers: usize,
    pub max_attempts: u32,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub guidelines: Vec<String>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for DraftOptions {
    fn default() -> Self {
        Self {
            workers: 4,
            max_attempts: 3,
            max_output_tokens: 1024,
            temperature: 0.7,
            guidelines: Vec::new(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftFailure {
    pub seed_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftReport {
    /// Seed order.
    pub drafts: Vec<Draft>,
    pub failures: Vec<DraftFailure>,
    pub retries: u32,
}

pub fn draft_request(
    seed: &SeedInstruction,
    lang: &LanguageCode,
    attempt: u32,
    options: &DraftOptions,
) -> GenerationRequest {
    let prompt = render_draft_prompt(seed, lang, &options.guidelines);
    GenerationRequest::new(prompt.system, prompt.user, format!("draft/{}/{attempt}", seed.id))
        .with_sampling(options.max_output_tokens, options.temperature)
}

fn draft_one(
    seed: &SeedInstruction,
    topic: &Topic,
    lang: &LanguageCode,
    gateway: &Gateway,
    options: &DraftOptions,
) -> Result<DraftLogEntry, GatewayError> {
    let mut reason = String::new();
    let attempts = options.max_attempts.max(1);
    for attempt in 0..attempts {
        let completion = gateway.generate(&draft_request(seed, lang, attempt, options))?;
        match parse_draft_response(&completion.text, seed, topic, lang) {
            Ok(draft) => {
                return Ok(DraftLogEntry {
                    seed_id: seed.id.clone(),
                    retries: attempt,
                    outcome: SeedOutcome::Drafted { draft },
                })
            }
            Err(e) => reason = e.to_string(),
        }
    }
    Ok(DraftLogEntry {
        seed_id: seed.id.clone(),
        retries: attempts - 1,
        outcome: SeedOutcome::Failed { reason },
    })
}

/// Draft every seed. Seeds whose topic is unknown fail without a model
/// call. A gateway failure stops the run; completed seeds stay in the
/// checkpoint and are not requested again.
pub fn generate_drafts(
    seeds: &[SeedInstruction],
    topics: &TopicCatalog,
    lang: &LanguageCode,
    gateway: &Gateway,
    options: &DraftOptions,
) -> Result<DraftReport, DraftError> {
    let mut seen = HashSet::new();
    if let Some(s) = seeds.iter().find(|s| !seen.insert(s.id.as_str())) {
        return Err(DraftError::DuplicateSeed(s.id.clone()));
    }
    let (log, prior) = match &options.checkpoint {
        Some(path) => {
            let (log, prior) = CheckpointLog::<DraftLogEntry>::open(path)?;
            (Some(log), prior)
        }
        None => (None, Vec::new()),
    };
    let mut done: HashMap<String, DraftLogEntry> =
        prior.into_iter().map(|e| (e.seed_id.clone(), e)).collect();

    let mut pending = Vec::new();
    for seed in seeds {
        if done.contains_key(&seed.id) {
            continue;
        }
        match topics.by_name(&seed.context_fr) {
            Some(topic) => pending.push((seed, topic)),
            None => {
                done.insert(
                    seed.id.clone(),
                    DraftLogEntry {
                        seed_id: seed.id.clone(),
                        retries: 0,
                        outcome: SeedOutcome::Failed {
                            reason: format!("unknown topic {:?}", seed.context_fr),
                        },
                    },
                );
            }
        }
    }

    let abort = AtomicBool::new(false);
    let results = map_ordered(&pending, options.workers, |(seed, topic)| {
        if abort.load(Ordering::Relaxed) {
            return None;
        }
        let outcome = draft_one(seed, topic, lang, gateway, options)
            .map_err(DraftError::from)
            .and_then(|entry| {
                if let Some(log) = &log {
                    log.append(&entry)?;
                }
                Ok(entry)
            });
        if outcome.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        Some(outcome)
    });
    for outcome in results.into_iter().flatten() {
        let entry = outcome?;
        done.insert(entry.seed_id.clone(), entry);
    }

    let mut report = DraftReport {
        drafts: Vec::new(),
        failures: Vec::new(),
        retries: 0,
    };
    for seed in seeds {
        let entry = done.remove(&seed.id).expect("every seed handled");
        report.retries += entry.retries;
        match entry.outcome {
            SeedOutcome::Drafted { draft } => report.drafts.push(draft),
            SeedOutcome::Failed { reason } => report.failures.push(DraftFailure {
                seed_id: seed.id.clone(),
                reason,
            }),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    fn dje() -> LanguageCode {
        LanguageCode::new("dje").unwrap()
    }

    fn seed(id: &str, instr: &str, topic: &str) -> SeedInstruction {
        SeedInstruction {
            id: id.into(),
            instruction_fr: instr.into(),
            context_fr: topic.into(),
        }
    }

    fn maths() -> Topic {
        assets::default_topics().by_name("Mathématiques").unwrap().clone()
    }

    #[test]
    fn prompt_has_constraints_and_guidelines() {
        let guidelines = assets::default_guidelines("dje").unwrap();
        let p = render_draft_prompt(&seed("s1", "Calcule 7 + 5.", "Mathématiques"), &dje(), &guidelines);
        assert!(p.system.contains("spécifiquement pour le Zarma."));
        assert!(p.system.contains("NE DOIVENT PAS DÉPASSER 100 MOTS"));
        assert!(p.system.contains("ÉQUIVALENT EN ZARMA,"));
        assert!(p.user.contains("\"instruction_fr\": \"Calcule 7 + 5.\""));
        assert!(p.user.contains("\"context_fr\": \"Mathématiques\""));
        assert!(p.user.contains("\"Conserver noms propres et emprunts établis, transcrits phonétiquement.\""));
        assert!(p.user.contains("\"La instr_lrl DOIT être uniquement en Zarma.\""));
        assert!(p.user.contains("\"lang\": \"dje\""));
        let again = render_draft_prompt(&seed("s1", "Calcule 7 + 5.", "Mathématiques"), &dje(), &guidelines);
        assert_eq!(p, again);
    }

    #[test]
    fn parses_table_row() {
        let d = parse_draft_response(
            r#"{"instr_fr":"Calcule 7 + 5.","instr_lrl":"7 nda 5 baani?","resp_lrl":"7 nda 5 ga baani 12.","CoT_lrl":"N/A","lang":"dje"}"#,
            &seed("seed-06-00000", "Calcule 7 + 5.", "Mathématiques"),
            &maths(),
            &dje(),
        )
        .unwrap();
        assert_eq!(d.id, "dje-seed-06-00000");
        assert_eq!(d.resp_lrl, "7 nda 5 ga baani 12.");
        assert!(!d.has_cot());
    }

    #[test]
    fn invariant_breaches_are_rejected() {
        let topics = assets::default_topics();
        let causal = topics.by_name("Raisonnement causal").unwrap();
        let err = parse_draft_response(
            r#"{"instr_lrl":"So dii, ko moto?","resp_lrl":"So dii, a ga buburu.","CoT_lrl":"N/A"}"#,
            &seed("s", "Si l'eau chauffe, que se passe-t-il ?", "Raisonnement causal"),
            causal,
            &dje(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("missing CoT for reasoning topic"));

        let long = vec!["boro"; 101].join(" ");
        let err = parse_draft_response(
            &serde_json::json!({"instr_lrl": "a", "resp_lrl": long, "CoT_lrl": "N/A"}).to_string(),
            &seed("s", "Calcule.", "Mathématiques"),
            &maths(),
            &dje(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("exceeds 100 words"));

        let err = parse_draft_response("{\"instr_lrl\": \"a\"}", &seed("s", "x", "Mathématiques"), &maths(), &dje());
        assert!(matches!(err, Err(DraftError::Schema(_))));
    }

    fn scripted(script: HashMap<String, String>) -> Gateway {
        Gateway::from_fn(move |r| {
            script.get(&r.request_tag).cloned().ok_or_else(|| GatewayError::Transport {
                attempts: 1,
                message: format!("no script for {}", r.request_tag),
            })
        })
    }

    fn ok(resp: &str) -> String {
        serde_json::json!({"instr_lrl": "x?", "resp_lrl": resp, "CoT_lrl": "N/A", "lang": "dje"}).to_string()
    }

    #[test]
    fn unknown_topic_fails_alone_and_retries_are_counted() {
        let seeds = vec![
            seed("a", "Calcule 1 + 1.", "Mathématiques"),
            seed("b", "?", "Astrologie"),
            seed("c", "Calcule 2 + 2.", "Mathématiques"),
        ];
        let gw = scripted(HashMap::from([
            ("draft/a/0".into(), ok("2.")),
            ("draft/c/0".into(), "no json".into()),
            ("draft/c/1".into(), ok("4.")),
        ]));
        let r = generate_drafts(&seeds, &assets::default_topics(), &dje(), &gw, &DraftOptions::default()).unwrap();
        assert_eq!(r.drafts.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["dje-a", "dje-c"]);
        assert_eq!(r.failures.len(), 1);
        assert!(r.failures[0].reason.contains("Astrologie"));
        assert_eq!(r.retries, 1);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let seeds: Vec<SeedInstruction> = (0..6)
            .map(|i| seed(&format!("s{i}"), &format!("Calcule {i} + 1."), "Mathématiques"))
            .collect();
        let full_script: HashMap<String, String> =
            (0..6).map(|i| (format!("draft/s{i}/0"), ok(&format!("{}.", i + 1)))).collect();
        let topics = assets::default_topics();
        let full = generate_drafts(&seeds, &topics, &dje(), &scripted(full_script.clone()), &DraftOptions::default()).unwrap();

        let mut partial = full_script.clone();
        partial.remove("draft/s3/0");
        let opts = DraftOptions {
            workers: 2,
            checkpoint: Some(dir.path().join("drafts.log")),
            ..DraftOptions::default()
        };
        assert!(generate_drafts(&seeds, &topics, &dje(), &scripted(partial), &opts).is_err());
        let resumed = generate_drafts(&seeds, &topics, &dje(), &scripted(full_script), &opts).unwrap();
        assert_eq!(resumed, full);
    }
}
