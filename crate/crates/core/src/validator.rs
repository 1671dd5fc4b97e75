//! Answer-key driven validation of a de-identified corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use rayon::prelude::*;
use rusqlite::{params, Connection};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{self, decode_pixels, tags, DicomFile, ParseOptions, PixelBuffer, TagPath};
use crate::instance::{corpus_files, InstanceContext};
use crate::keyset::{
    load_answer_key, load_mapping, validate_key, ActionType, AnswerEntry, AnswerKey, Category, KeyError,
    MappingKind, MappingTable, PixelGeometry,
};
use crate::pixel::{region_unchanged, CorrelationDetector, TextDetector, DEFAULT_THRESHOLD};
use crate::tokenize::tokenize;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("corpus root {0} is not readable")]
    UnreadableRoot(String),
    #[error("answer key {path}: {cause}")]
    KeyLoad { path: String, cause: KeyError },
    #[error("answer key has {count} defects, first: {first}")]
    KeyDefects { count: usize, first: String },
    #[error("mapping {path}: {cause}")]
    MappingLoad { path: String, cause: KeyError },
    #[error("results store: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("results store {0} does not exist")]
    StoreMissing(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Unit at which report rows are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Instance,
    #[default]
    Series,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Instance => "instance",
            Aggregation::Series => "series",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "instance" => Ok(Aggregation::Instance),
            "series" => Ok(Aggregation::Series),
            _ => Err(format!("unknown aggregation {s:?}; expected instance or series")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub dicom_root: PathBuf,
    pub answer_key: PathBuf,
    pub patient_map: PathBuf,
    pub uid_map: PathBuf,
    /// Where `results.db` and `results.csv` are written.
    pub output_dir: PathBuf,
    pub aggregation: Aggregation,
    pub threshold: f64,
    pub workers: usize,
    pub batch_size: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            dicom_root: PathBuf::from("out/curated"),
            answer_key: PathBuf::from("out/answer_key.csv"),
            patient_map: PathBuf::from("out/patient_mapping.csv"),
            uid_map: PathBuf::from("out/uid_mapping.csv"),
            output_dir: PathBuf::from("out/validation"),
            aggregation: Aggregation::Series,
            threshold: DEFAULT_THRESHOLD,
            workers: 0,
            batch_size: 100,
        }
    }
}

/// Outcome of one answer entry against its target instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_passed: bool,
    /// 0 to 100.
    pub check_score: f64,
    pub tag_ds: String,
    pub tag_name: String,
    /// Value found in the de-identified file.
    pub file_value: String,
    /// Value recorded in the answer key.
    pub answer_value: String,
    pub action: ActionType,
    pub action_text: String,
    pub category: Category,
    pub subcategory: String,
    pub context: InstanceContext,
    /// SOP Instance UID the answer key knows the instance by.
    pub key_instance: String,
    /// The target file was not found.
    pub missing: bool,
}

impl CheckResult {
    fn sort_key(&self) -> (&str, &str, ActionType, &str, &str) {
        (&self.context.instance, &self.tag_ds, self.action, &self.action_text, &self.answer_value)
    }
}

/// Both identifier maps.
#[derive(Clone, Debug)]
pub struct Maps {
    pub patient: MappingTable,
    pub uid: MappingTable,
}

impl Maps {
    pub fn load(patient: &Path, uid: &Path) -> Result<Self, ValidationError> {
        let load = |p: &Path, kind| {
            load_mapping(p, kind).map_err(|cause| ValidationError::MappingLoad {
                path: p.display().to_string(),
                cause,
            })
        };
        Ok(Self {
            patient: load(patient, MappingKind::PatientId)?,
            uid: load(uid, MappingKind::Uid)?,
        })
    }
}

/// A de-identified file with its pixels decoded on first use.
pub struct Target {
    pub file: DicomFile,
    pub path: PathBuf,
    pixels: OnceLock<Option<PixelBuffer>>,
}

impl Target {
    pub fn new(file: DicomFile, path: PathBuf) -> Self {
        Self {
            file,
            path,
            pixels: OnceLock::new(),
        }
    }

    pub fn pixels(&self) -> Option<&PixelBuffer> {
        self.pixels.get_or_init(|| decode_pixels(&self.file).ok()).as_ref()
    }

    pub fn context(&self) -> InstanceContext {
        InstanceContext::from_file(&self.file, &self.path)
    }
}

/// Scores and thresholds applied to each entry.
pub struct Evaluator<'a> {
    pub maps: &'a Maps,
    pub detector: &'a dyn TextDetector,
    pub threshold: f64,
}

fn is_date(s: &str) -> bool {
    s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) && NaiveDate::parse_from_str(s, "%Y%m%d").is_ok()
}

fn binary(ok: bool) -> f64 {
    if ok {
        100.0
    } else {
        0.0
    }
}

/// Share (0..=100) of `expected` tokens whose presence in `found` equals `keep`.
fn token_share(expected: &[String], found: &[String], keep: bool) -> f64 {
    if expected.is_empty() {
        return 100.0;
    }
    let hits = expected.iter().filter(|t| found.contains(t) == keep).count();
    100.0 * hits as f64 / expected.len() as f64
}

impl Evaluator<'_> {
    /// Scores one entry. `target` is `None` when the instance's file is
    /// missing from the corpus.
    pub fn evaluate(&self, entry: &AnswerEntry, target: Option<&Target>) -> CheckResult {
        let (score, file_value, context, missing) = match target {
            None => {
                let score = binary(entry.action == ActionType::TextRemoved);
                (score, "<file missing>".to_string(), InstanceContext::default(), true)
            }
            Some(t) => {
                let (score, shown) = self.score(entry, t);
                (score, shown, t.context(), false)
            }
        };
        CheckResult {
            check_passed: score == 100.0,
            check_score: score,
            tag_ds: entry.tag_path.to_string(),
            tag_name: entry.tag_name.clone(),
            file_value,
            answer_value: entry.file_value.clone(),
            action: entry.action,
            action_text: entry.action_text.clone(),
            category: entry.category,
            subcategory: entry.subcategory.clone(),
            context,
            key_instance: entry.sop_instance_uid.clone(),
            missing,
        }
    }

    fn score(&self, entry: &AnswerEntry, target: &Target) -> (f64, String) {
        let el = target.file.dataset.get_element(&entry.tag_path);
        let value = el.map(|e| e.to_text().unwrap_or_default());
        let shown = value.clone().unwrap_or_default();
        let present = |v: &Option<String>| v.as_deref().filter(|s| !s.is_empty()).map(str::to_string);
        let score = match entry.action {
            ActionType::DateShifted => {
                binary(present(&value).is_some_and(|v| is_date(&v) && v != entry.file_value))
            }
            ActionType::PatidConsistent => {
                let want = self.maps.patient.get(&entry.file_value);
                binary(want.is_some() && value.as_deref() == want)
            }
            ActionType::UidChanged => binary(present(&value).is_some_and(|v| v != entry.file_value)),
            ActionType::UidConsistent => {
                let want = self.maps.uid.get(&entry.file_value);
                binary(want.is_some() && value.as_deref() == want)
            }
            ActionType::TagRetained => binary(el.is_some()),
            ActionType::TextNotnull => binary(el.is_some_and(|e| !e.is_empty())),
            ActionType::TextRemoved => match value {
                None => 100.0,
                Some(v) => token_share(&tokenize(&entry.action_text), &tokenize(&v), false),
            },
            ActionType::TextRetained => match value {
                None => 0.0,
                Some(v) => token_share(&tokenize(&entry.action_text), &tokenize(&v), true),
            },
            ActionType::PixelsHidden | ActionType::PixelsRetained => {
                let Some(buf) = target.pixels() else {
                    return (0.0, "<pixel data unreadable>".into());
                };
                return match &entry.pixel_geometry {
                    Some(PixelGeometry::BurnIn(rec)) => match self.detector.score(buf, rec) {
                        Ok(s) => (binary(s < self.threshold), format!("detector score {s:.4}")),
                        Err(e) => (0.0, format!("<{e}>")),
                    },
                    Some(PixelGeometry::Region(r)) => {
                        let same = region_unchanged(buf, r);
                        (binary(same), if same { "unchanged" } else { "changed" }.into())
                    }
                    None => (0.0, "<no geometry>".into()),
                };
            }
        };
        (score, shown)
    }
}

/// Scores one entry with the built-in detector.
pub fn evaluate_action(entry: &AnswerEntry, target: Option<&Target>, maps: &Maps, threshold: f64) -> CheckResult {
    Evaluator {
        maps,
        detector: &CorrelationDetector,
        threshold,
    }
    .evaluate(entry, target)
}

/// Indices of uid_consistent results to fail because their old UID was
/// rewritten to more than one new value somewhere in the corpus.
pub fn check_uid_global_consistency(results: &[CheckResult]) -> Vec<usize> {
    let mut seen: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for r in results.iter().filter(|r| r.action == ActionType::UidConsistent && !r.missing) {
        seen.entry(&r.answer_value).or_default().insert(&r.file_value);
    }
    results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.action == ActionType::UidConsistent && seen.get(r.answer_value.as_str()).is_some_and(|s| s.len() > 1))
        .map(|(i, _)| i)
        .collect()
}

/// Context for a missing instance, rebuilt from the key and the maps.
fn missing_context(key: &AnswerKey, uid: &str, maps: &Maps) -> InstanceContext {
    let find = |tag| {
        key.for_instance(uid)
            .find(|e| e.tag_path == TagPath::from(tag) && !e.file_value.is_empty())
            .map(|e| e.file_value.as_str())
    };
    let via = |m: &MappingTable, v: Option<&str>| v.map(|v| m.get(v).unwrap_or(v).to_string()).unwrap_or_default();
    InstanceContext {
        patient: via(&maps.patient, find(tags::PATIENT_ID)),
        study: via(&maps.uid, find(tags::STUDY_INSTANCE_UID)),
        series: via(&maps.uid, find(tags::SERIES_INSTANCE_UID)),
        instance: maps.uid.get(uid).unwrap_or(uid).to_string(),
        ..InstanceContext::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: String,
    pub started: String,
    pub finished: String,
    pub files_indexed: usize,
    pub files_unreadable: usize,
    pub instances_in_key: usize,
    pub instances_missing: usize,
    pub duplicate_instances: usize,
    pub results: usize,
}

/// All results of one run, sorted by instance, tag and action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsStore {
    pub results: Vec<CheckResult>,
    pub metadata: RunMetadata,
}

pub const RESULTS_DB: &str = "results.db";
pub const RESULTS_CSV: &str = "results.csv";

const COLUMNS: [&str; 20] = [
    "check_passed",
    "check_score",
    "tag_ds",
    "tag_name",
    "file_value",
    "answer_value",
    "action",
    "action_text",
    "category",
    "subcategory",
    "modality",
    "class",
    "patient",
    "study",
    "series",
    "instance",
    "file_name",
    "file_path",
    "key_instance",
    "missing",
];

fn row_values(r: &CheckResult) -> [String; 20] {
    let c = &r.context;
    [
        r.check_passed.to_string(),
        r.check_score.to_string(),
        r.tag_ds.clone(),
        r.tag_name.clone(),
        r.file_value.clone(),
        r.answer_value.clone(),
        r.action.to_string(),
        r.action_text.clone(),
        r.category.to_string(),
        r.subcategory.clone(),
        c.modality.clone(),
        c.class.clone(),
        c.patient.clone(),
        c.study.clone(),
        c.series.clone(),
        c.instance.clone(),
        c.file_name.clone(),
        c.file_path.clone(),
        r.key_instance.clone(),
        r.missing.to_string(),
    ]
}

pub fn pass_label(passed: bool) -> &'static str {
    if passed {
        "Pass"
    } else {
        "Fail"
    }
}

impl ResultsStore {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.check_passed).count()
    }

    pub fn failed(&self) -> usize {
        self.results.len() - self.passed()
    }

    /// Writes `results.db` (replacing any previous one) and `results.csv`.
    pub fn save(&self, dir: &Path) -> Result<(), ValidationError> {
        std::fs::create_dir_all(dir)?;
        let db = dir.join(RESULTS_DB);
        if db.exists() {
            std::fs::remove_file(&db)?;
        }
        let mut conn = Connection::open(&db)?;
        let cols: Vec<String> = COLUMNS.iter().map(|c| format!("{c} TEXT NOT NULL")).collect();
        conn.execute_batch(&format!(
            "CREATE TABLE results (id INTEGER PRIMARY KEY, {});
             CREATE TABLE run_metadata (key TEXT PRIMARY KEY, value TEXT NOT NULL);",
            cols.join(", ")
        ))?;
        let tx = conn.transaction()?;
        {
            let placeholders: Vec<String> = (1..=20).map(|i| format!("?{i}")).collect();
            let mut stmt = tx.prepare(&format!(
                "INSERT INTO results ({}) VALUES ({})",
                COLUMNS.join(", "),
                placeholders.join(", ")
            ))?;
            for r in &self.results {
                let v = row_values(r);
                stmt.execute(rusqlite::params_from_iter(v.iter()))?;
            }
            let meta = serde_json::to_value(&self.metadata).map_err(|e| ValidationError::Other(e.to_string()))?;
            if let serde_json::Value::Object(m) = meta {
                for (k, v) in m {
                    let text = match v {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    tx.execute("INSERT INTO run_metadata (key, value) VALUES (?1, ?2)", params![k, text])?;
                }
            }
        }
        tx.commit()?;

        let mut w = csv::Writer::from_path(dir.join(RESULTS_CSV))?;
        w.write_record(COLUMNS)?;
        for r in &self.results {
            w.write_record(row_values(r))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a store written by [`ResultsStore::save`]; `path` is the
    /// database file or the directory holding it.
    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let db = if path.is_dir() { path.join(RESULTS_DB) } else { path.to_path_buf() };
        if !db.is_file() {
            return Err(ValidationError::StoreMissing(db.display().to_string()));
        }
        let conn = Connection::open_with_flags(&db, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY)?;
        let mut stmt = conn.prepare(&format!("SELECT {} FROM results ORDER BY id", COLUMNS.join(", ")))?;
        let rows = stmt.query_map([], |row| {
            let mut v: Vec<String> = Vec::with_capacity(20);
            for i in 0..20 {
                v.push(row.get(i)?);
            }
            Ok(v)
        })?;
        let bad = |what: &str, v: &str| ValidationError::Other(format!("bad {what} {v:?} in store"));
        let mut results = Vec::new();
        for row in rows {
            let v = row?;
            results.push(CheckResult {
                check_passed: v[0] == "true",
                check_score: v[1].parse().map_err(|_| bad("score", &v[1]))?,
                tag_ds: v[2].clone(),
                tag_name: v[3].clone(),
                file_value: v[4].clone(),
                answer_value: v[5].clone(),
                action: v[6].parse().map_err(|_| bad("action", &v[6]))?,
                action_text: v[7].clone(),
                category: v[8].parse().map_err(|_| bad("category", &v[8]))?,
                subcategory: v[9].clone(),
                context: InstanceContext {
                    modality: v[10].clone(),
                    class: v[11].clone(),
                    patient: v[12].clone(),
                    study: v[13].clone(),
                    series: v[14].clone(),
                    instance: v[15].clone(),
                    file_name: v[16].clone(),
                    file_path: v[17].clone(),
                },
                key_instance: v[18].clone(),
                missing: v[19] == "true",
            });
        }
        let mut meta = serde_json::Map::new();
        let mut stmt = conn.prepare("SELECT key, value FROM run_metadata")?;
        for kv in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))? {
            let (k, v) = kv?;
            let value = v.parse::<u64>().map(serde_json::Value::from).unwrap_or(serde_json::Value::String(v));
            meta.insert(k, value);
        }
        let metadata = serde_json::from_value(serde_json::Value::Object(meta)).unwrap_or_default();
        Ok(Self { results, metadata })
    }
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, ValidationError> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ValidationError::Other(e.to_string()))?;
    Ok(pool.install(f))
}

/// Loads and checks the key.
pub fn load_key(path: &Path) -> Result<AnswerKey, ValidationError> {
    let key = load_answer_key(path).map_err(|cause| ValidationError::KeyLoad {
        path: path.display().to_string(),
        cause,
    })?;
    let defects = validate_key(&key);
    if let Some(first) = defects.first() {
        return Err(ValidationError::KeyDefects {
            count: defects.len(),
            first: first.to_string(),
        });
    }
    Ok(key)
}

/// Scores every answer entry against the corpus under `config.dicom_root`.
pub fn run_validation(config: &ValidationConfig) -> Result<ResultsStore, ValidationError> {
    let started = chrono::Utc::now().to_rfc3339();
    let root = &config.dicom_root;
    if !root.is_dir() {
        return Err(ValidationError::UnreadableRoot(root.display().to_string()));
    }
    let key = load_key(&config.answer_key)?;
    let maps = Maps::load(&config.patient_map, &config.uid_map)?;
    let evaluator = Evaluator {
        maps: &maps,
        detector: &CorrelationDetector,
        threshold: config.threshold,
    };
    validate_corpus(root, &key, &evaluator, config, started)
}

/// Validation with an explicit evaluator (for a custom text detector).
pub fn validate_corpus(
    root: &Path,
    key: &AnswerKey,
    evaluator: &Evaluator,
    config: &ValidationConfig,
    started: String,
) -> Result<ResultsStore, ValidationError> {
    let files = corpus_files(root).map_err(|_| ValidationError::UnreadableRoot(root.display().to_string()))?;
    let batch = config.batch_size.max(1);
    let maps = evaluator.maps;

    // Index: which file holds which key instance.
    let indexed: Vec<(PathBuf, Option<String>)> = in_pool(config.workers, || {
        files
            .par_chunks(batch)
            .flat_map_iter(|chunk| {
                chunk.iter().map(|p| {
                    let uid = dicom::read_file(p, ParseOptions::default()).ok().and_then(|f| f.sop_instance_uid());
                    (p.clone(), uid)
                })
            })
            .collect()
    })?;
    let mut unreadable = 0;
    let mut duplicates = 0;
    let mut by_key_uid: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (path, uid) in indexed {
        let Some(new_uid) = uid else {
            log::warn!("{}: not a readable DICOM file", path.display());
            unreadable += 1;
            continue;
        };
        let key_uid = match maps.uid.reverse(&new_uid) {
            Some(old) => old.to_string(),
            None => new_uid,
        };
        if key.indices_for(&key_uid).is_empty() {
            continue;
        }
        if by_key_uid.contains_key(&key_uid) {
            log::warn!("{}: second file for instance {key_uid}; ignored", path.display());
            duplicates += 1;
            continue;
        }
        by_key_uid.insert(key_uid, path);
    }

    let work: Vec<(&String, &PathBuf)> = by_key_uid.iter().collect();
    let mut results: Vec<CheckResult> = in_pool(config.workers, || {
        work.par_chunks(batch)
            .flat_map_iter(|chunk| {
                chunk.iter().flat_map(|(uid, path)| {
                    let target = dicom::read_file(path, ParseOptions::default())
                        .ok()
                        .map(|f| Target::new(f, path.strip_prefix(root).unwrap_or(path).to_path_buf()));
                    key.for_instance(uid)
                        .map(|e| evaluator.evaluate(e, target.as_ref()))
                        .collect::<Vec<_>>()
                })
            })
            .collect()
    })?;

    let key_uids: BTreeSet<&str> = key.instance_uids().collect();
    let mut missing = 0;
    for uid in key_uids.iter().filter(|u| !by_key_uid.contains_key(**u)) {
        missing += 1;
        let context = missing_context(key, uid, maps);
        for e in key.for_instance(uid) {
            let mut r = evaluator.evaluate(e, None);
            r.context = context.clone();
            results.push(r);
        }
    }
    for i in check_uid_global_consistency(&results) {
        let r = &mut results[i];
        r.check_passed = false;
        r.check_score = 0.0;
    }
    results.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let metadata = RunMetadata {
        config: toml::to_string(config).unwrap_or_default(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        files_indexed: files.len(),
        files_unreadable: unreadable,
        instances_in_key: key_uids.len(),
        instances_missing: missing,
        duplicate_instances: duplicates,
        results: results.len(),
    };
    Ok(ResultsStore { results, metadata })
}

/// Percentage with two decimals, rounded half up: `99.45%`.
pub fn format_score(pass: usize, total: usize) -> String {
    if total == 0 {
        return "0.00%".into();
    }
    let (p, t) = (pass as u128, total as u128);
    let hundredths = (p * 20_000 + t) / (2 * t);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

/// `PASS=<n> FAIL=<n> SCORE=<pct>` over raw results.
pub fn summary_line(store: &ResultsStore) -> String {
    format!(
        "PASS={} FAIL={} SCORE={}",
        store.passed(),
        store.failed(),
        format_score(store.passed(), store.results.len())
    )
}
