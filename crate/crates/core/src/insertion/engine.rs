//! Applies an effective template to one file and derives the answer-key
//! entries that describe the result.

use std::collections::{HashMap, HashSet};

use super::functions::{apply_function, draw_label, is_drawn, Inserted, RuleContext};
use super::template::{Condition, Function, InsertionTemplate};
use super::InsertionError;
use crate::conformance::{apply_requirement, Applied, IodSpecs, TypeCode};
use crate::dicom::{dictionary, tags, DataElement, DicomFile, TagPath, Vr, WELL_KNOWN_UID_ROOT};
use crate::identity::SyntheticPatientRecord;
use crate::keyset::{ActionType, AnswerEntry, Category, Scope};
use crate::seeding;
use crate::tokenize::tokenize;

/// What one application of a template changed, in answer-key form, plus
/// the identifiers it minted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InsertionLog {
    pub answer_entries: Vec<AnswerEntry>,
    /// Source Patient ID to synthetic Patient ID.
    pub patid_map_entries: Vec<(String, String)>,
    /// Source UID to synthetic UID.
    pub uid_map_entries: Vec<(String, String)>,
}

impl InsertionLog {
    /// Appends `other`, dropping map pairs already present.
    pub fn extend(&mut self, other: InsertionLog) {
        self.answer_entries.extend(other.answer_entries);
        for (mine, theirs) in [
            (&mut self.patid_map_entries, other.patid_map_entries),
            (&mut self.uid_map_entries, other.uid_map_entries),
        ] {
            let seen: HashSet<(String, String)> = mine.iter().cloned().collect();
            mine.extend(theirs.into_iter().filter(|p| !seen.contains(p)));
        }
    }
}

/// Drawn values per scope entity, so that a study-scoped draw is made once
/// per study and a series-scoped draw once per series.
#[derive(Clone, Debug, Default)]
pub struct EntityCache {
    values: HashMap<(String, String), Inserted>,
    series_selected: HashMap<(String, String), bool>,
}

impl EntityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Source-side identity of the entities a file belongs to.
struct Entities {
    study: String,
    series: String,
    instance: String,
}

impl Entities {
    fn key(&self, scope: Scope) -> &str {
        match scope {
            Scope::Study => &self.study,
            Scope::Series => &self.series,
            Scope::Instance => &self.instance,
        }
    }
}

/// Whether a fractional rule applies to a series. Sampled once per
/// (series, rule path) and independent of instance order.
pub fn series_selected(seed: u64, series_uid: &str, path: &TagPath, fraction: f64) -> bool {
    if fraction >= 1.0 {
        return true;
    }
    let h = seeding::hash_u64(&[b"fraction", &seed.to_le_bytes(), series_uid.as_bytes(), path.to_string().as_bytes()]);
    seeding::unit_interval(h) < fraction
}

fn element_vr(file: &DicomFile, path: &TagPath) -> Vr {
    file.dataset
        .get_element(path)
        .map(|e| e.vr)
        .or_else(|| dictionary::vr_of(path.terminal()))
        .unwrap_or(Vr::LO)
}

fn entry(path: &TagPath, scope: Scope, value: &str, action: ActionType, text: &str, category: Category, sub: &str) -> AnswerEntry {
    AnswerEntry {
        sop_instance_uid: String::new(),
        scope,
        tag_path: path.clone(),
        tag_name: dictionary::name_of(path.terminal()).to_string(),
        file_value: value.to_string(),
        action,
        action_text: text.to_string(),
        category,
        subcategory: sub.to_string(),
        pixel_geometry: None,
    }
}

/// Runs every applicable rule of `template` against a copy of `file`.
///
/// `seed` is the run seed; minted UIDs, fractional selection and drawn
/// values are all derived from it together with the source entity UIDs, so
/// results do not depend on the order files are processed in.
pub fn apply_template(
    file: &DicomFile,
    record: &SyntheticPatientRecord,
    template: &InsertionTemplate,
    seed: u64,
    org_root: &str,
    cache: &mut EntityCache,
) -> Result<(DicomFile, InsertionLog), InsertionError> {
    let mut out = file.clone();
    let mut log = InsertionLog::default();
    let entities = Entities {
        study: file.study_uid().unwrap_or_default(),
        series: file.series_uid().unwrap_or_default(),
        instance: file.sop_instance_uid().unwrap_or_default(),
    };
    for rule in &template.rules {
        let current = out.dataset.get_element(&rule.path);
        let applies = match rule.condition {
            Condition::Always => true,
            Condition::OnlyIfPresent => current.is_some(),
            Condition::OnlyIfEmpty => current.is_some_and(DataElement::is_empty),
        };
        if !applies {
            continue;
        }
        let selected = *cache
            .series_selected
            .entry((entities.series.clone(), rule.path.to_string()))
            .or_insert_with(|| series_selected(seed, &entities.series, &rule.path, rule.fraction));
        if !selected {
            continue;
        }
        let original = current.and_then(DataElement::to_text);
        let study_date = out.dataset.text(tags::STUDY_DATE);
        let ctx = RuleContext {
            record,
            original: original.as_deref(),
            study_date: study_date.as_deref(),
            org_root,
        };
        let inserted = if is_drawn(rule) {
            let scope_key = entities.key(rule.scope).to_string();
            let key = (scope_key, draw_label(rule));
            match cache.values.get(&key) {
                Some(v) => v.clone(),
                None => {
                    let h = seeding::hash_u64(&[key.0.as_bytes(), key.1.as_bytes()]);
                    let mut rng = seeding::stream(seed, "draw", h);
                    let v = apply_function(rule, &ctx, seed, &mut rng)?;
                    cache.values.insert(key, v.clone());
                    v
                }
            }
        } else {
            apply_function(rule, &ctx, seed, &mut seeding::stream(seed, "unused", 0))?
        };

        if rule.function == Function::CodedUid {
            let pair = (original.clone().unwrap_or_default(), inserted.value.clone());
            if !log.uid_map_entries.contains(&pair) {
                log.uid_map_entries.push(pair);
            }
        }
        if rule.path == TagPath::from(tags::PATIENT_ID) {
            if let Some(old) = original.as_ref().filter(|o| !o.is_empty()) {
                let pair = (old.clone(), inserted.value.clone());
                if !log.patid_map_entries.contains(&pair) {
                    log.patid_map_entries.push(pair);
                }
            }
        }

        let vr = element_vr(&out, &rule.path);
        out.dataset
            .set_element(&rule.path, DataElement::text(rule.path.terminal(), vr, inserted.value.clone()), true)
            .map_err(|_| InsertionError::PathUnresolvable(rule.path.to_string()))?;
        log.answer_entries.push(entry(
            &rule.path,
            rule.scope,
            &inserted.value,
            rule.action,
            &inserted.action_text,
            rule.category,
            &rule.subcategory,
        ));
        if let Some(kept) = &inserted.retained {
            let removed: HashSet<String> = tokenize(&inserted.action_text).into_iter().collect();
            if tokenize(kept).iter().any(|t| removed.contains(t)) {
                log::debug!("{}: retained text {kept:?} overlaps inserted text; not recorded", rule.path);
            } else {
                log.answer_entries.push(entry(
                    &rule.path,
                    rule.scope,
                    &inserted.value,
                    ActionType::TextRetained,
                    kept,
                    Category::Tcia,
                    "TCIA-P15-DESC-K",
                ));
            }
        }
    }
    let uid = out.sop_instance_uid().unwrap_or_default();
    for e in &mut log.answer_entries {
        e.sop_instance_uid = uid.clone();
    }
    Ok((out, log))
}

/// VRs whose untouched values are expected to survive curation.
const RETAINED_VRS: [Vr; 5] = [Vr::CS, Vr::LO, Vr::SH, Vr::ST, Vr::LT];

/// Whether a UI value names an instance-level entity (as opposed to a SOP
/// class or transfer syntax defined by the standard).
pub fn is_instance_uid(uid: &str) -> bool {
    !uid.is_empty() && !uid.starts_with(WELL_KNOWN_UID_ROOT)
}

/// Expectations that follow from the file's content rather than from any
/// inserted value: UID changes and consistency, date shifts, Patient ID
/// consistency, presence of required attributes, and retention of the
/// remaining untouched text. Entries duplicating an existing (path, action)
/// are left out.
pub fn structural_entries(file: &DicomFile, existing: &[AnswerEntry], specs: &IodSpecs) -> Vec<AnswerEntry> {
    let uid = file.sop_instance_uid().unwrap_or_default();
    let mut have: HashSet<(TagPath, ActionType)> = existing.iter().map(|e| (e.tag_path.clone(), e.action)).collect();
    let touched: HashSet<&TagPath> = existing.iter().map(|e| &e.tag_path).collect();
    let mut out = Vec::new();
    let mut push = |e: AnswerEntry, out: &mut Vec<AnswerEntry>| {
        if have.insert((e.tag_path.clone(), e.action)) {
            out.push(AnswerEntry {
                sop_instance_uid: uid.clone(),
                ..e
            });
        }
    };
    let ds = &file.dataset;
    for (path, el) in ds.walk() {
        let Some(text) = el.to_text() else { continue };
        if el.vr == Vr::UI && is_instance_uid(&text) {
            for action in [ActionType::UidChanged, ActionType::UidConsistent] {
                push(entry(&path, Scope::Instance, &text, action, "", Category::Dicom, "DICOM-P15-U"), &mut out);
            }
        } else if el.vr == Vr::DA && !text.is_empty() && !touched.contains(&path) {
            push(
                entry(&path, Scope::Instance, &text, ActionType::DateShifted, &text, Category::Tcia, "TCIA-P15-MOD-C"),
                &mut out,
            );
        }
    }
    if let Some(id) = ds.text(tags::PATIENT_ID).filter(|s| !s.is_empty()) {
        let p = TagPath::from(tags::PATIENT_ID);
        push(entry(&p, Scope::Instance, &id, ActionType::PatidConsistent, "", Category::Hipaa, "HIPAA-H"), &mut out);
    }
    let iod = specs.spec_for(file.sop_class_uid().as_deref());
    for req in &iod.requirements {
        let Some(el) = ds.get(req.tag) else { continue };
        let value = el.to_text().unwrap_or_default();
        let p = TagPath::from(req.tag);
        let (action, sub) = match apply_requirement(req, ds) {
            // An already-empty Type 1 value is a defect of the source, not
            // something curation is expected to repair.
            Applied::Type1(_) if value.is_empty() => continue,
            Applied::Type1(TypeCode::OneC) => (ActionType::TextNotnull, "DICOM-IOD-1C"),
            Applied::Type1(_) => (ActionType::TextNotnull, "DICOM-IOD-1"),
            Applied::Type2(TypeCode::TwoC) => (ActionType::TagRetained, "DICOM-IOD-2C"),
            Applied::Type2(_) => (ActionType::TagRetained, "DICOM-IOD-2"),
            _ => continue,
        };
        push(entry(&p, Scope::Instance, &value, action, "", Category::Dicom, sub), &mut out);
    }
    for el in ds.iter() {
        if el.tag.is_private() || !RETAINED_VRS.contains(&el.vr) {
            continue;
        }
        let p = TagPath::from(el.tag);
        let text = el.to_text().unwrap_or_default();
        if text.trim().is_empty() || touched.contains(&p) || tokenize(&text).is_empty() {
            continue;
        }
        push(entry(&p, Scope::Instance, &text, ActionType::TextRetained, &text, Category::Dicom, "DICOM-P15-K"), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{DataSet, Tag};
    use crate::identity::{assign_identity, generate_pool};

    const STATION: Tag = Tag::new(0x0008, 0x1010);
    const ROOT: &str = "3.1.874.1.8955936";

    fn record() -> SyntheticPatientRecord {
        let pool = generate_pool(5, 10, 3, 20).unwrap();
        assign_identity(&pool, 0, &mut seeding::stream(5, "identity", 0)).unwrap()
    }

    fn template(scope: &str, condition: &str, fraction: f64) -> InsertionTemplate {
        InsertionTemplate::from_toml(&format!(
            "name = \"t\"\n[[rule]]\npath = \"(0008,1010)\"\nfunction = \"device_serial\"\n\
             params = {{ prefix = \"SN\" }}\nscope = \"{scope}\"\ncondition = \"{condition}\"\n\
             fraction = {fraction}\naction = \"text_removed\"\ncategory = \"HIPAA\"\nsubcategory = \"HIPAA-M\"\n"
        ))
        .unwrap()
    }

    fn file(study: &str, series: &str, instance: &str, station: bool) -> DicomFile {
        let mut ds = DataSet::new();
        ds.put(DataElement::text(tags::STUDY_INSTANCE_UID, Vr::UI, study));
        ds.put(DataElement::text(tags::SERIES_INSTANCE_UID, Vr::UI, series));
        ds.put(DataElement::text(tags::SOP_INSTANCE_UID, Vr::UI, instance));
        if station {
            ds.put(DataElement::text(STATION, Vr::SH, "CT01"));
        }
        DicomFile::new(ds)
    }

    fn station_of(f: &DicomFile) -> String {
        f.dataset.text(STATION).unwrap()
    }

    #[test]
    fn study_scope_is_constant_across_series() {
        let t = template("study", "always", 1.0);
        let r = record();
        let mut cache = EntityCache::new();
        let mut values = HashSet::new();
        for s in 0..3 {
            for i in 0..4 {
                let f = file("2.999.9.1", &format!("2.999.9.1.{s}"), &format!("2.999.9.1.{s}.{i}"), true);
                let (out, log) = apply_template(&f, &r, &t, 7, ROOT, &mut cache).unwrap();
                assert_eq!(log.answer_entries.len(), 1);
                values.insert(station_of(&out));
            }
        }
        assert_eq!(values.len(), 1);
        let other = file("2.999.9.2", "2.999.9.2.0", "2.999.9.2.0.0", true);
        let (out, _) = apply_template(&other, &r, &t, 7, ROOT, &mut cache).unwrap();
        assert!(!values.contains(&station_of(&out)));
    }

    #[test]
    fn instance_scope_varies() {
        let t = template("instance", "always", 1.0);
        let (r, mut cache) = (record(), EntityCache::new());
        let values: HashSet<String> = (0..10)
            .map(|i| {
                let f = file("2.999.9.1", "2.999.9.1.0", &format!("2.999.9.1.0.{i}"), true);
                station_of(&apply_template(&f, &r, &t, 7, ROOT, &mut cache).unwrap().0)
            })
            .collect();
        assert!(values.len() > 5);
    }

    #[test]
    fn only_if_present_skips_absent() {
        let t = template("series", "only_if_present", 1.0);
        let f = file("2.999.9.1", "2.999.9.1.0", "2.999.9.1.0.0", false);
        let (out, log) = apply_template(&f, &record(), &t, 7, ROOT, &mut EntityCache::new()).unwrap();
        assert_eq!(out, f);
        assert!(log.answer_entries.is_empty());
    }

    #[test]
    fn fractional_rules_select_series_consistently() {
        let t = template("series", "always", 0.5);
        let r = record();
        let run = || {
            let mut cache = EntityCache::new();
            let mut chosen = Vec::new();
            for s in 0..100 {
                let mut hits = 0;
                for i in 0..3 {
                    let f = file("2.999.9.1", &format!("2.999.9.1.{s}"), &format!("2.999.9.1.{s}.{i}"), true);
                    let (_, log) = apply_template(&f, &r, &t, 42, ROOT, &mut cache).unwrap();
                    hits += log.answer_entries.len();
                }
                assert!(hits == 0 || hits == 3, "series {s} partially selected");
                chosen.push(hits == 3);
            }
            chosen
        };
        let first = run();
        let n = first.iter().filter(|&&b| b).count();
        assert!((35..=65).contains(&n), "{n}");
        assert_eq!(first, run());
    }
}
