//! Production-cost model: LLM tokens plus human review per quality-control
//! mode.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcMode {
    /// LLM output used as is.
    None,
    /// Every pair reviewed by a person.
    FullHuman,
    /// Automated check; only flagged pairs reviewed.
    Instructlr,
}

impl QcMode {
    pub fn token(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::FullHuman => "full_human",
            Self::Instructlr => "instructlr",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("{field} must be a finite non-negative number, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("{field} must be in [0, 1], got {value}")]
    Fraction { field: &'static str, value: f64 },
    #[error("reviewed_pairs {reviewed} does not fit mode {mode} with {total} pairs")]
    Reviewed { mode: &'static str, reviewed: u64, total: u64 },
    #[error("scenario file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostScenario {
    pub model_name: String,
    pub price_per_million_tokens: f64,
    pub tokens_per_pair: f64,
    pub total_pairs: u64,
    pub error_rate: f64,
    pub qc_mode: QcMode,
    pub human_rate_per_pair: f64,
    pub reviewed_pairs: u64,
}

impl CostScenario {
    pub fn validate(&self) -> Result<(), CostError> {
        for (field, value) in [
            ("price_per_million_tokens", self.price_per_million_tokens),
            ("tokens_per_pair", self.tokens_per_pair),
            ("human_rate_per_pair", self.human_rate_per_pair),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CostError::Negative { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(CostError::Fraction {
                field: "error_rate",
                value: self.error_rate,
            });
        }
        let ok = match self.qc_mode {
            QcMode::None => self.reviewed_pairs == 0,
            QcMode::FullHuman => self.reviewed_pairs == self.total_pairs,
            QcMode::Instructlr => self.reviewed_pairs <= self.total_pairs,
        };
        if !ok {
            return Err(CostError::Reviewed {
                mode: self.qc_mode.token(),
                reviewed: self.reviewed_pairs,
                total: self.total_pairs,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub model_name: String,
    pub qc_mode: QcMode,
    pub error_rate: f64,
    pub llm_tokens: f64,
    pub llm_cost: f64,
    pub human_cost: f64,
    pub total_cost: f64,
    /// Relative to reviewing every pair by hand with the same model.
    pub saving_vs_full_human: f64,
}

pub fn scenario_cost(s: &CostScenario) -> Result<CostBreakdown, CostError> {
    s.validate()?;
    let pairs = s.total_pairs as f64;
    let llm_tokens = pairs * s.tokens_per_pair;
    let llm_cost = llm_tokens / 1_000_000.0 * s.price_per_million_tokens;
    let human_cost = s.reviewed_pairs as f64 * s.human_rate_per_pair;
    let total_cost = llm_cost + human_cost;
    let full = llm_cost + pairs * s.human_rate_per_pair;
    Ok(CostBreakdown {
        model_name: s.model_name.clone(),
        qc_mode: s.qc_mode,
        error_rate: s.error_rate,
        llm_tokens,
        llm_cost,
        human_cost,
        total_cost,
        saving_vs_full_human: if full > 0.0 { 1.0 - total_cost / full } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPricing {
    pub name: String,
    pub price_per_million_tokens: f64,
    pub error_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Shared assumptions plus the models and modes to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub total_pairs: u64,
    pub tokens_per_pair: f64,
    pub human_rate_per_pair: f64,
    /// Pairs reviewed under [`QcMode::Instructlr`].
    pub reviewed_pairs: u64,
    #[serde(default)]
    pub reviewed_pairs_presets: BTreeMap<String, u64>,
    pub modes: Vec<QcMode>,
    pub models: Vec<ModelPricing>,
}

impl ScenarioSet {
    pub fn from_json(text: &str) -> Result<Self, CostError> {
        serde_json::from_str(text).map_err(|e| CostError::Parse(e.to_string()))
    }

    pub fn builtin() -> Self {
        Self::from_json(crate::assets::SCENARIOS_JSON).expect("embedded scenarios are valid")
    }

    /// Switch the reviewed-pairs count to a named preset.
    pub fn with_preset(mut self, name: &str) -> Result<Self, CostError> {
        self.reviewed_pairs = *self
            .reviewed_pairs_presets
            .get(name)
            .ok_or_else(|| CostError::Parse(format!("unknown reviewed_pairs preset {name:?}")))?;
        Ok(self)
    }

    pub fn scenario(&self, model: &ModelPricing, mode: QcMode) -> CostScenario {
        CostScenario {
            model_name: model.name.clone(),
            price_per_million_tokens: model.price_per_million_tokens,
            tokens_per_pair: self.tokens_per_pair,
            total_pairs: self.total_pairs,
            error_rate: model.error_rate,
            qc_mode: mode,
            human_rate_per_pair: self.human_rate_per_pair,
            reviewed_pairs: match mode {
                QcMode::None => 0,
                QcMode::FullHuman => self.total_pairs,
                QcMode::Instructlr => self.reviewed_pairs,
            },
        }
    }
}

/// One breakdown per model and mode, model-major.
pub fn scenario_table(set: &ScenarioSet) -> Result<Vec<CostBreakdown>, CostError> {
    set.models
        .iter()
        .flat_map(|m| set.modes.iter().map(move |&mode| set.scenario(m, mode)))
        .map(|s| scenario_cost(&s))
        .collect()
}

const CSV_HEADER: &str = "model,qc_mode,error_rate,llm_tokens,llm_cost,human_cost,total_cost,saving_vs_full_human";

pub fn table_csv(rows: &[CostBreakdown]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let name = if r.model_name.contains([',', '"']) {
            format!("\"{}\"", r.model_name.replace('"', "\"\""))
        } else {
            r.model_name.clone()
        };
        let _ = writeln!(
            out,
            "{name},{},{:.2},{:.0},{:.2},{:.2},{:.2},{:.4}",
            r.qc_mode.token(),
            r.error_rate,
            r.llm_tokens,
            r.llm_cost,
            r.human_cost,
            r.total_cost,
            r.saving_vs_full_human
        );
    }
    out
}

pub fn table_text(rows: &[CostBreakdown]) -> String {
    let headers = ["model", "qc_mode", "error", "llm $", "human $", "total $", "saving"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.model_name.clone(),
                r.qc_mode.token().to_string(),
                format!("{:.0}%", r.error_rate * 100.0),
                format!("{:.2}", r.llm_cost),
                format!("{:.2}", r.human_cost),
                format!("{:.2}", r.total_cost),
                format!("{:.1}%", r.saving_vs_full_human * 100.0),
            ]
        })
        .collect();
    let mut widths = headers.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| {
        row.iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths[i] - c.chars().count();
                // Text columns left-aligned, numbers right-aligned.
                if i < 2 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&headers.map(String::from));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
