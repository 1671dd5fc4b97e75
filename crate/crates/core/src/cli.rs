//! Command-line front end: one subcommand per pipeline stage, settings from
//! an optional TOML file with one table per subcommand, flags on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::conformance::{compare_conformance, verify_corpus, ConformanceFinding, FindingKind, IodSpecs};
use crate::curate::{curate_corpus, CurationConfig, CurationError};
use crate::insertion::{generate_dataset, GenerationConfig};
use crate::keyset::{load_mapping, ActionType, MappingKind};
use crate::phantom::{write_phantom, PhantomConfig};
use crate::reports::{conformance_report, write_reports, write_table, CONFORMANCE_CSV, CONFORMANCE_HEADER};
use crate::validator::{run_validation, summary_line, Aggregation, ResultsStore, ValidationConfig, ValidationError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FATAL: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_FAILURES: u8 = 3;

pub const REGRESSIONS_CSV: &str = "dciodvfy_regressions.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Results database, or the directory holding it.
    pub results: PathBuf,
    pub output_dir: PathBuf,
    /// Aggregation unit; the one recorded with the results when unset.
    pub aggregation: Option<Aggregation>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            results: PathBuf::from("out/validation"),
            output_dir: PathBuf::from("out/reports"),
            aggregation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformanceConfig {
    /// Corpus under test.
    pub corpus_dir: PathBuf,
    /// Corpus it was derived from; findings already present there are not
    /// regressions. No comparison when unset.
    pub baseline_dir: Option<PathBuf>,
    /// Maps baseline SOP Instance UIDs to those of the corpus under test.
    pub uid_map: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ConformanceConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("out/curated"),
            baseline_dir: Some(PathBuf::from("out/synthetic")),
            uid_map: Some(PathBuf::from("out/uid_mapping.csv")),
            output_dir: PathBuf::from("out/conformance"),
        }
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub phantom: PhantomConfig,
    pub generate: GenerationConfig,
    pub curate: CurationConfig,
    pub validate: ValidationConfig,
    pub report: ReportConfig,
    pub conformance: ConformanceConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "deidbench", version, about = "Synthetic DICOM de-identification benchmark")]
pub struct Cli {
    /// TOML file with [phantom], [generate], [curate], [validate], [report]
    /// and [conformance] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic stand-in source corpus.
    Phantom(PhantomArgs),
    /// Insert synthetic PHI and write the answer key and mappings.
    Generate(GenerateArgs),
    /// De-identify a generated corpus by following its answer key.
    Curate(CurateArgs),
    /// Score a de-identified corpus against the answer key.
    Validate(ValidateArgs),
    /// Write the report tables from a results database.
    Report(ReportArgs),
    /// Check attribute types and compare against a baseline corpus.
    Conformance(ConformanceArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub patients: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub source_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
    #[arg(long)]
    pub burn_in_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub synthetic_dir: Option<PathBuf>,
    #[arg(long)]
    pub answer_key: Option<PathBuf>,
    #[arg(long)]
    pub patient_map: Option<PathBuf>,
    #[arg(long)]
    pub uid_map: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of answer entries to break on purpose.
    #[arg(long)]
    pub inject: Option<usize>,
    /// Only break entries with this action (repeatable).
    #[arg(long = "inject-action")]
    pub inject_actions: Vec<ActionType>,
    #[arg(long)]
    pub fault_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dicom_root: Option<PathBuf>,
    #[arg(long)]
    pub answer_key: Option<PathBuf>,
    #[arg(long)]
    pub patient_map: Option<PathBuf>,
    #[arg(long)]
    pub uid_map: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    /// Detector score at or above which burned-in text counts as present.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Args)]
pub struct ConformanceArgs {
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long)]
    pub baseline_dir: Option<PathBuf>,
    /// Report findings without comparing against a baseline.
    #[arg(long, conflicts_with = "baseline_dir")]
    pub no_baseline: bool,
    #[arg(long)]
    pub uid_map: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Parses `args` (program name first), runs the command and maps the
/// outcome to an exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FATAL } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

pub fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let workers = cli.workers;
    match cli.command {
        Command::Phantom(a) => {
            set(&mut config.phantom.patients, a.patients);
            set(&mut config.phantom.seed, a.seed);
            let dir = a.output_dir.unwrap_or(config.generate.source_dir);
            let n = write_phantom(&dir, &config.phantom)?;
            println!("{n} files written to {}", dir.display());
            Ok(EXIT_OK)
        }
        Command::Generate(a) => {
            let g = &mut config.generate;
            set(&mut g.source_dir, a.source_dir);
            set(&mut g.output_dir, a.output_dir);
            set(&mut g.seed, a.seed);
            set(&mut g.burn_in_fraction, a.burn_in_fraction);
            set(&mut g.workers, workers);
            if a.template_dir.is_some() {
                g.template_dir = a.template_dir;
            }
            cmd_generate(g)
        }
        Command::Curate(a) => {
            let c = &mut config.curate;
            set(&mut c.synthetic_dir, a.synthetic_dir);
            set(&mut c.answer_key, a.answer_key);
            set(&mut c.patient_map, a.patient_map);
            set(&mut c.uid_map, a.uid_map);
            set(&mut c.output_dir, a.output_dir);
            set(&mut c.seed, a.seed);
            set(&mut c.inject, a.inject);
            set(&mut c.fault_manifest, a.fault_manifest);
            set(&mut c.workers, workers);
            if !a.inject_actions.is_empty() {
                c.inject_actions = a.inject_actions;
            }
            cmd_curate(c)
        }
        Command::Validate(a) => {
            let v = &mut config.validate;
            set(&mut v.dicom_root, a.dicom_root);
            set(&mut v.answer_key, a.answer_key);
            set(&mut v.patient_map, a.patient_map);
            set(&mut v.uid_map, a.uid_map);
            set(&mut v.output_dir, a.output_dir);
            set(&mut v.aggregation, a.aggregation);
            set(&mut v.threshold, a.threshold);
            set(&mut v.batch_size, a.batch_size);
            set(&mut v.workers, workers);
            cmd_validate(v)
        }
        Command::Report(a) => {
            let r = &mut config.report;
            set(&mut r.results, a.results);
            set(&mut r.output_dir, a.output_dir);
            if a.aggregation.is_some() {
                r.aggregation = a.aggregation;
            }
            cmd_report(r)
        }
        Command::Conformance(a) => {
            let c = &mut config.conformance;
            set(&mut c.corpus_dir, a.corpus_dir);
            set(&mut c.output_dir, a.output_dir);
            if a.baseline_dir.is_some() {
                c.baseline_dir = a.baseline_dir;
            }
            if a.no_baseline {
                c.baseline_dir = None;
            }
            if a.uid_map.is_some() {
                c.uid_map = a.uid_map;
            }
            cmd_conformance(c)
        }
    }
}

pub fn cmd_generate(config: &GenerationConfig) -> anyhow::Result<u8> {
    let s = generate_dataset(config)?;
    println!("{:<10}{:>8}", "Patients", s.patients);
    println!("{:<10}{:>8}", "Studies", s.studies);
    println!("{:<10}{:>8}", "Series", s.series);
    println!("{:<10}{:>8}", "Instances", s.instances);
    println!("answer entries {}, burned-in images {}", s.answer_entries, s.burn_ins);
    if s.skipped.is_empty() {
        Ok(EXIT_OK)
    } else {
        for f in &s.skipped {
            eprintln!("skipped {}: {}", f.path, f.reason);
        }
        Ok(EXIT_PARTIAL)
    }
}

pub fn cmd_curate(config: &CurationConfig) -> anyhow::Result<u8> {
    match curate_corpus(config) {
        Ok(s) => {
            for p in &s.unreadable {
                eprintln!("not curated (unreadable): {p}");
            }
            println!("{} files curated, {} faults injected", s.files, s.faults.len());
            Ok(EXIT_OK)
        }
        Err(CurationError::Conflicts(cs)) => {
            for c in &cs {
                eprintln!("conflict: {c}");
            }
            eprintln!("error: {} conflicting answer entries", cs.len());
            Ok(EXIT_FATAL)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_validate(config: &ValidationConfig) -> anyhow::Result<u8> {
    let store = run_validation(config)?;
    store.save(&config.output_dir)?;
    let m = &store.metadata;
    if m.instances_missing > 0 {
        eprintln!("{} of {} answer-key instances not found", m.instances_missing, m.instances_in_key);
    }
    println!("{}", summary_line(&store));
    Ok(if store.failed() == 0 { EXIT_OK } else { EXIT_FAILURES })
}

pub fn cmd_report(config: &ReportConfig) -> anyhow::Result<u8> {
    let store = match ResultsStore::load(&config.results) {
        Ok(s) => s,
        Err(e @ ValidationError::StoreMissing(_)) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FATAL);
        }
        Err(e) => return Err(e.into()),
    };
    let unit = config.aggregation.unwrap_or_else(|| {
        toml::from_str::<ValidationConfig>(&store.metadata.config)
            .map(|c| c.aggregation)
            .unwrap_or_default()
    });
    for p in write_reports(&store, unit, &config.output_dir)? {
        println!("{}", p.display());
    }
    Ok(EXIT_OK)
}

/// Re-keys baseline findings by the UIDs the curated files carry.
fn rekey(
    found: BTreeMap<String, Vec<ConformanceFinding>>,
    uid_map: Option<&Path>,
) -> anyhow::Result<BTreeMap<String, Vec<ConformanceFinding>>> {
    let Some(path) = uid_map else { return Ok(found) };
    let map = load_mapping(path, MappingKind::Uid)?;
    Ok(found
        .into_iter()
        .map(|(k, v)| (map.get(&k).map(str::to_string).unwrap_or(k), v))
        .collect())
}

pub fn cmd_conformance(config: &ConformanceConfig) -> anyhow::Result<u8> {
    let specs = IodSpecs::bundled();
    let (after, unreadable) = verify_corpus(&config.corpus_dir, specs)
        .with_context(|| format!("reading {}", config.corpus_dir.display()))?;
    for p in &unreadable {
        eprintln!("not checked (unreadable): {}", p.display());
    }
    let all: Vec<ConformanceFinding> = after.values().flatten().cloned().collect();
    write_table(&config.output_dir.join(CONFORMANCE_CSV), &CONFORMANCE_HEADER, &conformance_report(&all))?;
    let errors = all.iter().filter(|f| f.kind == FindingKind::Error).count();
    println!("{} findings ({errors} errors) in {} files", all.len(), after.len());
    let Some(baseline) = &config.baseline_dir else { return Ok(EXIT_OK) };
    let (before, _) =
        verify_corpus(baseline, specs).with_context(|| format!("reading {}", baseline.display()))?;
    let before = rekey(before, config.uid_map.as_deref())?;
    let regressions = compare_conformance(&before, &after);
    write_table(
        &config.output_dir.join(REGRESSIONS_CSV),
        &CONFORMANCE_HEADER,
        &conformance_report(&regressions),
    )?;
    println!("{} regressions against {}", regressions.len(), baseline.display());
    Ok(if regressions.is_empty() { EXIT_OK } else { EXIT_FAILURES })
}
