use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use instructlr_core::analytics::{dataset_stats, render_stats, triage_stats};
use instructlr_core::annotation::{
    agreement, export_merged_sheet, import_annotations, merge_annotations, write_review_sheets, AgreementLabel,
    MergedDecision, DEFAULT_BATCH_SIZE,
};
use instructlr_core::config::Config;
use instructlr_core::cost::{scenario_table, table_csv, table_text, ScenarioSet};
use instructlr_core::jsonl::{read_jsonl, to_jsonl_string, write_atomic, write_jsonl};
use instructlr_core::pipeline::{run_pipeline_until, Stage};
use instructlr_core::{AnnotationRecord, CheckedDraft, Draft, TriageStatus};

#[derive(Parser)]
#[command(name = "instructlr", version, about = "Build instruction-tuning data for a low-resource language")]
struct Cli {
    /// Log level filter, e.g. `info` or `instructlr_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate French seed instructions.
    Seed(ConfigArg),
    /// Seed, then draft target-language instruction/response pairs.
    Draft(ConfigArg),
    /// Seed, draft, then check and triage the drafts.
    Check(ConfigArg),
    /// Run every stage, resuming from what is already on disk.
    Run(ConfigArg),
    /// Write flagged drafts to review sheets for annotators.
    ExportReview {
        #[arg(long)]
        checked: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Statuses to include; all flagged drafts when omitted.
        #[arg(long, value_delimiter = ',')]
        status: Vec<TriageStatus>,
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        batch_size: usize,
    },
    /// Validate filled review sheets and append them to an annotation journal.
    ImportReview {
        #[arg(long)]
        annotator: String,
        /// Checked drafts; rows naming other drafts are rejected.
        #[arg(long)]
        checked: Option<PathBuf>,
        #[arg(long)]
        journal: PathBuf,
        #[arg(required = true)]
        sheets: Vec<PathBuf>,
    },
    /// Majority-vote the journaled annotations into one decision per draft.
    Merge {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        /// Decisions as JSON Lines, usable as `paths.decisions`.
        #[arg(long)]
        out: PathBuf,
        /// Also write the review sheet filled with the decisions.
        #[arg(long, requires = "checked")]
        sheet: Option<PathBuf>,
        #[arg(long)]
        checked: Option<PathBuf>,
    },
    /// Inter-annotator agreement (Krippendorff's alpha, nominal).
    Agreement {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        /// Use only the first N doubly-annotated drafts.
        #[arg(long)]
        items: Option<usize>,
        #[arg(long, value_enum, default_value_t = LabelArg::Verdict)]
        label: LabelArg,
    },
    /// Dataset characteristics and, given checked drafts, triage figures.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        checked: Option<PathBuf>,
        #[arg(long)]
        decisions: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Production cost per model and quality-control mode.
    Cost {
        /// Scenario file (JSON); built-in presets when omitted.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Named reviewed-pairs preset.
        #[arg(long)]
        preset: Option<String>,
        /// Write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the review API.
    Serve(ConfigArg),
}

#[derive(clap::Args)]
struct ConfigArg {
    #[arg(long, short, default_value = "instructlr.toml")]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Verdict,
    VerdictAndCategory,
}

impl From<LabelArg> for AgreementLabel {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Verdict => AgreementLabel::Verdict,
            LabelArg::VerdictAndCategory => AgreementLabel::VerdictAndCategory,
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<Config> {
    Config::load(&arg.config).with_context(|| format!("loading {}", arg.config.display()))
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn read_all<T: serde::de::DeserializeOwned>(paths: &[PathBuf]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read(p)?);
    }
    Ok(out)
}

fn run_stages(arg: &ConfigArg, last: Stage) -> Result<ExitCode> {
    let config = load_config(arg)?;
    let gateway = config.build_gateway()?;
    let report = run_pipeline_until(&config, &gateway, last)?;
    print!("{}", report.render());
    Ok(if report.stages.iter().all(|s| s.failures == 0) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn import_review(
    annotator: &str,
    checked: Option<&Path>,
    journal: &Path,
    sheets: &[PathBuf],
) -> Result<ExitCode> {
    let known: Option<HashSet<String>> = match checked {
        Some(p) => Some(read::<CheckedDraft>(p)?.into_iter().map(|c| c.draft.id).collect()),
        None => None,
    };
    let mut records: Vec<AnnotationRecord> = Vec::new();
    let mut errors = 0;
    for sheet in sheets {
        let text = std::fs::read_to_string(sheet).with_context(|| format!("reading {}", sheet.display()))?;
        let report = import_annotations(&text, annotator, known.as_ref())
            .with_context(|| format!("importing {}", sheet.display()))?;
        for e in &report.errors {
            eprintln!("{}: row {} ({}): {}", sheet.display(), e.row, e.draft_id, e.message);
        }
        errors += report.errors.len();
        records.extend(report.records);
    }
    if let Some(dir) = journal.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(journal)
        .with_context(|| format!("opening {}", journal.display()))?;
    file.write_all(to_jsonl_string(&records)?.as_bytes())?;
    println!("{} record(s) appended to {}; {errors} row error(s)", records.len(), journal.display());
    Ok(if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn merge(inputs: &[PathBuf], out: &Path, sheet: Option<&Path>, checked: Option<&Path>) -> Result<()> {
    let records: Vec<AnnotationRecord> = read_all(inputs)?;
    let decisions = merge_annotations(&records);
    write_jsonl(&decisions, out).with_context(|| format!("writing {}", out.display()))?;
    if let (Some(sheet), Some(checked)) = (sheet, checked) {
        let checked: Vec<CheckedDraft> = read(checked)?;
        let csv = export_merged_sheet(&checked, &decisions)?;
        write_atomic(sheet, csv.as_bytes())?;
    }
    let open = decisions.iter().filter(|d| d.needs_adjudication).count();
    println!(
        "{} draft(s): {} decided, {open} need adjudication",
        decisions.len(),
        decisions.len() - open
    );
    Ok(())
}

fn stats(input: &Path, checked: Option<&Path>, decisions: Option<&Path>, json: bool) -> Result<()> {
    let drafts: Vec<Draft> = read(input)?;
    let dataset = dataset_stats(&drafts);
    let triage = match checked {
        Some(p) => {
            let checked: Vec<CheckedDraft> = read(p)?;
            let decisions: Vec<MergedDecision> = match decisions {
                Some(d) => read(d)?,
                None => Vec::new(),
            };
            Some(triage_stats(&checked, &decisions))
        }
        None => None,
    };
    if json {
        let value = serde_json::json!({ "dataset": dataset, "triage": triage });
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{}", render_stats(&dataset, triage.as_ref()));
    }
    Ok(())
}

fn cost(scenarios: Option<&Path>, preset: Option<&str>, out: Option<&Path>) -> Result<()> {
    let mut set = match scenarios {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScenarioSet::from_json(&text)?
        }
        None => ScenarioSet::builtin(),
    };
    if let Some(name) = preset {
        set = set.with_preset(name)?;
    }
    let rows = scenario_table(&set)?;
    print!("{}", table_text(&rows));
    if let Some(out) = out {
        write_atomic(out, table_csv(&rows).as_bytes()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn serve(arg: &ConfigArg) -> Result<()> {
    let config = load_config(arg)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(instructlr_server::serve(&config))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&cli.log))
        .with_writer(std::io::stderr)
        .init();
    let result = match &cli.command {
        Command::Seed(c) => run_stages(c, Stage::Seed),
        Command::Draft(c) => run_stages(c, Stage::Draft),
        Command::Check(c) => run_stages(c, Stage::Check),
        Command::Run(c) => run_stages(c, Stage::Export),
        Command::ExportReview {
            checked,
            out_dir,
            status,
            batch_size,
        } => (|| {
            if *batch_size == 0 {
                bail!("--batch-size must be at least 1");
            }
            let checked: Vec<CheckedDraft> = read(checked)?;
            let paths = write_review_sheets(out_dir, &checked, status, *batch_size)?;
            for p in &paths {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        })(),
        Command::ImportReview {
            annotator,
            checked,
            journal,
            sheets,
        } => import_review(annotator, checked.as_deref(), journal, sheets),
        Command::Merge {
            inputs,
            out,
            sheet,
            checked,
        } => merge(inputs, out, sheet.as_deref(), checked.as_deref()).map(|_| ExitCode::SUCCESS),
        Command::Agreement { inputs, items, label } => (|| {
            let records: Vec<AnnotationRecord> = read_all(inputs)?;
            let report = agreement(&records, (*label).into(), *items)?;
            println!(
                "alpha {:.3} over {} item(s), {} annotator(s), {} rating(s)",
                report.alpha, report.items, report.annotators, report.ratings
            );
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Stats {
            input,
            checked,
            decisions,
            json,
        } => stats(input, checked.as_deref(), decisions.as_deref(), *json).map(|_| ExitCode::SUCCESS),
        Command::Cost { scenarios, preset, out } => {
            cost(scenarios.as_deref(), preset.as_deref(), out.as_deref()).map(|_| ExitCode::SUCCESS)
        }
        Command::Serve(c) => serve(c).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
