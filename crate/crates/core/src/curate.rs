//! Reference curator: applies an answer key to the synthetic corpus so that
//! every entry is satisfied, optionally breaking a chosen number of entries
//! on purpose.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{self, decode_pixels, dictionary, encode_pixels, tags, DataElement, DicomFile, ParseOptions, TagPath, Vr};
use crate::insertion::shift_date;
use crate::instance::corpus_files;
use crate::keyset::{ActionType, AnswerEntry, AnswerKey, PixelGeometry};
use crate::pixel::{self, CorrelationDetector, DEFAULT_THRESHOLD};
use crate::seeding;
use crate::tokenize::{remove_tokens, tokenize};
use crate::validator::{load_key, Evaluator, Maps, Target, ValidationError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub instance: String,
    pub tag: String,
    pub token: String,
}

impl std::fmt::Display for Conflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: token {:?} both removed and retained", self.instance, self.tag, self.token)
    }
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("{} conflicting entries, first: {}", .0.len(), .0[0])]
    Conflicts(Vec<Conflict>),
    #[error("{kind} {id:?} is not in the mapping")]
    MissingMapping { kind: &'static str, id: String },
    #[error("cannot shift {path}: {reason}")]
    BadDate { path: String, reason: String },
    #[error("only {found} of {wanted} faults could be injected")]
    InjectionShortfall { wanted: usize, found: usize },
    #[error("source directory {0} is not readable")]
    UnreadableSource(String),
    #[error(transparent)]
    Dicom(#[from] dicom::DicomError),
    #[error(transparent)]
    Pixel(#[from] pixel::PixelError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tokens an instance's entries want both removed and kept at one path.
pub fn conflicts(entries: &[&AnswerEntry]) -> Vec<Conflict> {
    let mut removed: HashMap<&TagPath, HashSet<String>> = HashMap::new();
    for e in entries.iter().filter(|e| e.action == ActionType::TextRemoved) {
        removed.entry(&e.tag_path).or_default().extend(tokenize(&e.action_text));
    }
    let mut out = Vec::new();
    for e in entries.iter().filter(|e| e.action == ActionType::TextRetained) {
        let Some(gone) = removed.get(&e.tag_path) else { continue };
        for t in tokenize(&e.action_text) {
            if gone.contains(&t) {
                out.push(Conflict {
                    instance: e.sop_instance_uid.clone(),
                    tag: e.tag_path.to_string(),
                    token: t,
                });
            }
        }
    }
    out
}

/// Day offset the curator applies to every date of one patient. Never 0.
pub fn curation_shift(seed: u64, patient: &str) -> i32 {
    let h = seeding::hash_u64(&[b"curation-shift", &seed.to_le_bytes(), patient.as_bytes()]);
    -(1 + (h % 365) as i32)
}

fn vr_at(file: &DicomFile, path: &TagPath) -> Vr {
    file.dataset
        .get_element(path)
        .map(|e| e.vr)
        .or_else(|| dictionary::vr_of(path.terminal()))
        .unwrap_or(Vr::LO)
}

fn put(file: &mut DicomFile, path: &TagPath, value: &str) -> Result<(), CurationError> {
    let vr = vr_at(file, path);
    file.dataset.set_element(path, DataElement::text(path.terminal(), vr, value), true)?;
    Ok(())
}

fn current(file: &DicomFile, path: &TagPath) -> Option<String> {
    file.dataset.get_element(path).and_then(DataElement::to_text)
}

/// Stand-in value for a required attribute that has none.
fn placeholder(vr: Vr) -> &'static str {
    match vr {
        Vr::DA => "19000101",
        Vr::TM => "000000",
        Vr::DS | Vr::IS | Vr::US | Vr::SS | Vr::UL | Vr::SL => "0",
        Vr::UI => "2.25.0",
        _ => "UNKNOWN",
    }
}

/// Smallest change to `file` that satisfies every entry: listed tokens
/// removed, dates shifted by `shift_days`, UIDs and Patient IDs replaced
/// through the maps, required elements kept or filled, burned-in boxes
/// blacked out. Everything else is left as it is.
pub fn apply_answer_key(
    file: &DicomFile,
    entries: &[&AnswerEntry],
    maps: &Maps,
    shift_days: i32,
) -> Result<DicomFile, CurationError> {
    let found = conflicts(entries);
    if !found.is_empty() {
        return Err(CurationError::Conflicts(found));
    }
    let mut out = file.clone();
    let mut done: HashSet<(&TagPath, ActionType)> = HashSet::new();
    let by = |a: ActionType| entries.iter().filter(move |e| e.action == a);

    for e in by(ActionType::TextRemoved) {
        if let Some(v) = current(&out, &e.tag_path) {
            let cleaned = remove_tokens(&v, &tokenize(&e.action_text));
            if cleaned != v {
                put(&mut out, &e.tag_path, &cleaned)?;
            }
        }
    }
    for e in by(ActionType::DateShifted) {
        if !done.insert((&e.tag_path, e.action)) {
            continue;
        }
        let v = current(&out, &e.tag_path).filter(|v| !v.is_empty()).unwrap_or_else(|| e.file_value.clone());
        let shifted = shift_date(&v, shift_days).map_err(|err| CurationError::BadDate {
            path: e.tag_path.to_string(),
            reason: err.to_string(),
        })?;
        put(&mut out, &e.tag_path, &shifted)?;
    }
    for e in entries
        .iter()
        .filter(|e| matches!(e.action, ActionType::UidChanged | ActionType::UidConsistent))
    {
        if !done.insert((&e.tag_path, ActionType::UidConsistent)) {
            continue;
        }
        let new = maps.uid.get(&e.file_value).ok_or_else(|| CurationError::MissingMapping {
            kind: "UID",
            id: e.file_value.clone(),
        })?;
        put(&mut out, &e.tag_path, new)?;
    }
    for e in by(ActionType::PatidConsistent) {
        let new = maps.patient.get(&e.file_value).ok_or_else(|| CurationError::MissingMapping {
            kind: "Patient ID",
            id: e.file_value.clone(),
        })?;
        put(&mut out, &e.tag_path, new)?;
    }
    for e in by(ActionType::TagRetained) {
        if out.dataset.get_element(&e.tag_path).is_none() {
            let vr = vr_at(&out, &e.tag_path);
            out.dataset.set_element(&e.tag_path, DataElement::empty(e.tag_path.terminal(), vr), true)?;
        }
    }
    for e in by(ActionType::TextNotnull) {
        if out.dataset.get_element(&e.tag_path).is_none_or(DataElement::is_empty) {
            let vr = vr_at(&out, &e.tag_path);
            put(&mut out, &e.tag_path, placeholder(vr))?;
        }
    }
    let boxes: Vec<_> = by(ActionType::PixelsHidden)
        .filter_map(|e| match &e.pixel_geometry {
            Some(PixelGeometry::BurnIn(r)) => Some(r),
            _ => None,
        })
        .collect();
    if !boxes.is_empty() {
        let mut buf = decode_pixels(&out)?;
        for r in boxes {
            pixel::black_out(&mut buf, r.x, r.y, r.width, r.height)?;
        }
        encode_pixels(&mut out, &buf)?;
    }
    Ok(out)
}

/// One deliberately broken entry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fault {
    /// SOP Instance UID of the curated file.
    pub instance: String,
    /// SOP Instance UID in the answer key.
    pub answer_uid: String,
    pub tag: String,
    pub action: ActionType,
}

pub const FAULT_MANIFEST_HEADER: [&str; 4] = ["instance", "answer_uid", "tag", "action"];

pub fn save_fault_manifest(faults: &[Fault], path: &Path) -> Result<(), CurationError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FAULT_MANIFEST_HEADER)?;
    for f in faults {
        w.write_record([&f.instance, &f.answer_uid, &f.tag, f.action.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_fault_manifest(path: &Path) -> Result<Vec<Fault>, CurationError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Breaks `entry` in `file`. Other entries may or may not survive; the
/// caller checks.
fn violate(file: &mut DicomFile, entry: &AnswerEntry) -> Result<(), CurationError> {
    let path = &entry.tag_path;
    match entry.action {
        ActionType::TextRemoved => {
            let v = current(file, path).unwrap_or_default();
            let joined = if v.trim().is_empty() { entry.action_text.clone() } else { format!("{v} {}", entry.action_text) };
            put(file, path, &joined)?;
        }
        ActionType::TextRetained => {
            let v = current(file, path).unwrap_or_default();
            put(file, path, &remove_tokens(&v, &tokenize(&entry.action_text)))?;
        }
        ActionType::DateShifted => put(file, path, &entry.file_value)?,
        ActionType::PatidConsistent => {
            let v = current(file, path).unwrap_or_default();
            put(file, path, &format!("{v}X"))?;
        }
        ActionType::TagRetained => {
            file.dataset.remove_element(path);
        }
        ActionType::TextNotnull => {
            let vr = vr_at(file, path);
            file.dataset.set_element(path, DataElement::empty(path.terminal(), vr), true)?;
        }
        ActionType::PixelsHidden | ActionType::PixelsRetained => {
            let mut buf = decode_pixels(file)?;
            match &entry.pixel_geometry {
                Some(PixelGeometry::BurnIn(r)) => pixel::burn_text(&mut buf, r)?,
                Some(PixelGeometry::Region(r)) => {
                    let (x, y) = (r.x + r.width / 2, r.y + r.height / 2);
                    buf.set(x, y, buf.get(x, y) ^ 1);
                }
                None => {}
            }
            encode_pixels(file, &buf)?;
        }
        ActionType::UidChanged | ActionType::UidConsistent => {}
    }
    Ok(())
}

/// Breaks `count` entries, each verified to turn exactly its own check
/// from pass to fail. Candidates alternate between action types so the
/// faults are mixed. UID actions are never chosen: they would also move
/// the file's identity. `files` maps answer-key UIDs to curated files and
/// is updated in place.
pub fn inject_faults(
    files: &mut BTreeMap<String, DicomFile>,
    key: &AnswerKey,
    maps: &Maps,
    count: usize,
    actions: &[ActionType],
    seed: u64,
) -> Result<Vec<Fault>, CurationError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let evaluator = Evaluator {
        maps,
        detector: &CorrelationDetector,
        threshold: DEFAULT_THRESHOLD,
    };
    let mut by_action: BTreeMap<ActionType, Vec<usize>> = BTreeMap::new();
    for (i, e) in key.entries().iter().enumerate() {
        let eligible = !matches!(e.action, ActionType::UidChanged | ActionType::UidConsistent)
            && (actions.is_empty() || actions.contains(&e.action))
            && files.contains_key(&e.sop_instance_uid);
        if eligible {
            by_action.entry(e.action).or_default().push(i);
        }
    }
    let mut rng = seeding::stream(seed, "inject", 0);
    let mut queues: Vec<std::vec::IntoIter<usize>> = by_action
        .into_values()
        .map(|mut v| {
            v.shuffle(&mut rng);
            v.into_iter()
        })
        .collect();

    let evaluate_all = |file: &DicomFile, uid: &str| -> Vec<bool> {
        let target = Target::new(file.clone(), PathBuf::new());
        key.for_instance(uid).map(|e| evaluator.evaluate(e, Some(&target)).check_passed).collect()
    };
    let mut faults = Vec::new();
    let mut touched_paths: HashSet<(String, TagPath)> = HashSet::new();
    'outer: while faults.len() < count {
        let mut progressed = false;
        for q in queues.iter_mut() {
            let Some(i) = q.next() else { continue };
            progressed = true;
            let entry = &key.entries()[i];
            let uid = &entry.sop_instance_uid;
            if touched_paths.contains(&(uid.clone(), entry.tag_path.clone())) {
                continue;
            }
            let file = &files[uid];
            let position = key.indices_for(uid).iter().position(|&j| j == i).expect("entry indexed");
            let before = evaluate_all(file, uid);
            if !before[position] {
                continue;
            }
            let mut broken = file.clone();
            violate(&mut broken, entry)?;
            let after = evaluate_all(&broken, uid);
            let flipped: Vec<usize> = (0..before.len()).filter(|&j| before[j] != after[j]).collect();
            if flipped != [position] {
                continue;
            }
            faults.push(Fault {
                instance: broken.sop_instance_uid().unwrap_or_default(),
                answer_uid: uid.clone(),
                tag: entry.tag_path.to_string(),
                action: entry.action,
            });
            touched_paths.insert((uid.clone(), entry.tag_path.clone()));
            files.insert(uid.clone(), broken);
            if faults.len() == count {
                break 'outer;
            }
        }
        if !progressed {
            return Err(CurationError::InjectionShortfall {
                wanted: count,
                found: faults.len(),
            });
        }
    }
    faults.sort();
    Ok(faults)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    /// Synthetic corpus to curate.
    pub synthetic_dir: PathBuf,
    pub answer_key: PathBuf,
    pub patient_map: PathBuf,
    pub uid_map: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Number of entries to break deliberately.
    pub inject: usize,
    /// Restrict injected faults to these actions; all non-UID actions when empty.
    pub inject_actions: Vec<ActionType>,
    pub fault_manifest: PathBuf,
    pub workers: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            synthetic_dir: PathBuf::from("out/synthetic"),
            answer_key: PathBuf::from("out/answer_key.csv"),
            patient_map: PathBuf::from("out/patient_mapping.csv"),
            uid_map: PathBuf::from("out/uid_mapping.csv"),
            output_dir: PathBuf::from("out/curated"),
            seed: 42,
            inject: 0,
            inject_actions: Vec::new(),
            fault_manifest: PathBuf::from("out/fault_manifest.csv"),
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CurationSummary {
    pub files: usize,
    pub unreadable: Vec<String>,
    pub faults: Vec<Fault>,
}

/// Curates every file under `synthetic_dir` into `output_dir`, keeping the
/// relative layout, then injects the requested faults and writes their
/// manifest (always written, header-only when no faults were asked for).
pub fn curate_corpus(config: &CurationConfig) -> Result<CurationSummary, CurationError> {
    let src = &config.synthetic_dir;
    if !src.is_dir() {
        return Err(CurationError::UnreadableSource(src.display().to_string()));
    }
    let key = load_key(&config.answer_key)?;
    let maps = Maps::load(&config.patient_map, &config.uid_map)?;
    let paths = corpus_files(src).map_err(|_| CurationError::UnreadableSource(src.display().to_string()))?;

    let run = || {
        paths
            .par_iter()
            .map(|p| -> Result<Option<(String, PathBuf, DicomFile)>, CurationError> {
                let rel = p.strip_prefix(src).unwrap_or(p).to_path_buf();
                let Ok(file) = dicom::read_file(p, ParseOptions::default()) else {
                    return Ok(None);
                };
                let uid = file.sop_instance_uid().unwrap_or_default();
                let entries: Vec<&AnswerEntry> = key.for_instance(&uid).collect();
                let patient = file.dataset.text(tags::PATIENT_ID).unwrap_or_default();
                let curated = apply_answer_key(&file, &entries, &maps, curation_shift(config.seed, &patient))?;
                Ok(Some((uid, rel, curated)))
            })
            .collect::<Vec<_>>()
    };
    let produced = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .install(run)
    } else {
        run()
    };

    let mut summary = CurationSummary::default();
    let mut conflicts_seen = Vec::new();
    let mut files: BTreeMap<String, DicomFile> = BTreeMap::new();
    let mut rels: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (p, r) in paths.iter().zip(produced) {
        match r {
            Ok(Some((uid, rel, f))) => {
                rels.insert(uid.clone(), rel);
                files.insert(uid, f);
            }
            Ok(None) => summary.unreadable.push(p.display().to_string()),
            Err(CurationError::Conflicts(c)) => conflicts_seen.extend(c),
            Err(e) => return Err(e),
        }
    }
    if !conflicts_seen.is_empty() {
        return Err(CurationError::Conflicts(conflicts_seen));
    }
    summary.faults = inject_faults(&mut files, &key, &maps, config.inject, &config.inject_actions, config.seed)?;
    let out = &config.output_dir;
    for (uid, f) in &files {
        dicom::write_file(f, out.join(&rels[uid]))?;
    }
    summary.files = files.len();
    if let Some(parent) = config.fault_manifest.parent() {
        std::fs::create_dir_all(parent)?;
    }
    save_fault_manifest(&summary.faults, &config.fault_manifest)?;
    Ok(summary)
}

/// Answer-key UIDs of the instances with at least one fault.
pub fn faulted_instances(faults: &[Fault]) -> BTreeSet<&str> {
    faults.iter().map(|f| f.answer_uid.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{DataSet, Tag};
    use crate::keyset::{Category, MappingKind, MappingTable, Scope};

    const DESC: Tag = Tag::new(0x0008, 0x1030);

    fn entry(tag: Tag, action: ActionType, value: &str, text: &str) -> AnswerEntry {
        AnswerEntry {
            sop_instance_uid: "1.2.3".into(),
            scope: Scope::Instance,
            tag_path: TagPath::from(tag),
            tag_name: String::new(),
            file_value: value.into(),
            action,
            action_text: text.into(),
            category: Category::Tcia,
            subcategory: "TCIA-P15-DESC-C".into(),
            pixel_geometry: None,
        }
    }

    fn maps() -> Maps {
        Maps {
            patient: MappingTable::from_pairs(MappingKind::PatientId, [("P1".into(), "DEID_001".into())]).unwrap(),
            uid: MappingTable::from_pairs(MappingKind::Uid, [("1.2.3".into(), "2.999.2.1".into())]).unwrap(),
        }
    }

    fn file() -> DicomFile {
        DicomFile::new(
            [
                DataElement::text(DESC, Vr::LO, "CT CHEST ORDERED BY DR SMITH"),
                DataElement::text(tags::PATIENT_NAME, Vr::PN, "SMITH^ANN"),
                DataElement::text(tags::SOP_INSTANCE_UID, Vr::UI, "1.2.3"),
                DataElement::text(tags::STUDY_DATE, Vr::DA, "20180805"),
                DataElement::text(tags::PATIENT_ID, Vr::LO, "P1"),
            ]
            .into_iter()
            .collect::<DataSet>(),
        )
    }

    #[test]
    fn no_entries_no_change() {
        assert_eq!(apply_answer_key(&file(), &[], &maps(), -10).unwrap(), file());
    }

    #[test]
    fn single_removal_touches_one_element() {
        let e = entry(DESC, ActionType::TextRemoved, "", "ORDERED BY DR SMITH");
        let out = apply_answer_key(&file(), &[&e], &maps(), -10).unwrap();
        let before = file();
        let changed: Vec<_> = out
            .dataset
            .iter()
            .filter(|el| before.dataset.get(el.tag) != Some(*el))
            .map(|el| el.tag)
            .collect();
        assert_eq!(changed, vec![DESC]);
        assert_eq!(out.dataset.text(DESC).unwrap(), "CT CHEST");
    }

    #[test]
    fn maps_dates_and_conflicts() {
        let entries = [
            entry(tags::SOP_INSTANCE_UID, ActionType::UidConsistent, "1.2.3", ""),
            entry(tags::STUDY_DATE, ActionType::DateShifted, "20180805", "20180805"),
            entry(tags::PATIENT_ID, ActionType::PatidConsistent, "P1", ""),
            entry(tags::ACCESSION_NUMBER, ActionType::TagRetained, "", ""),
            entry(tags::MODALITY, ActionType::TextNotnull, "", ""),
        ];
        let refs: Vec<&AnswerEntry> = entries.iter().collect();
        let out = apply_answer_key(&file(), &refs, &maps(), -42).unwrap();
        assert_eq!(out.sop_instance_uid().unwrap(), "2.999.2.1");
        assert_eq!(out.dataset.text(tags::STUDY_DATE).unwrap(), "20180624");
        assert_eq!(out.patient_id().unwrap(), "DEID_001");
        assert!(out.dataset.get(tags::ACCESSION_NUMBER).is_some());
        assert_eq!(out.modality().unwrap(), "UNKNOWN");

        let a = entry(DESC, ActionType::TextRemoved, "", "DR SMITH");
        let b = entry(DESC, ActionType::TextRetained, "", "CT SMITH");
        match apply_answer_key(&file(), &[&a, &b], &maps(), -1) {
            Err(CurationError::Conflicts(c)) => assert_eq!(c[0].token, "SMITH"),
            other => panic!("{other:?}"),
        }
        let unmapped = entry(tags::PATIENT_ID, ActionType::PatidConsistent, "P9", "");
        assert!(matches!(
            apply_answer_key(&file(), &[&unmapped], &maps(), -1),
            Err(CurationError::MissingMapping { .. })
        ));
    }

    #[test]
    fn shifts_are_nonzero_and_stable() {
        for p in ["A", "B", "1210679554"] {
            let s = curation_shift(7, p);
            assert!((-365..0).contains(&s));
            assert_eq!(s, curation_shift(7, p));
        }
    }
}
