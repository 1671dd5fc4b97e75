//! Whole-corpus generation: synthetic files, answer key, identifier maps,
//! burn-in sidecars, and generation logs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{apply_template, is_instance_uid, series_selected, structural_entries, EntityCache, InsertionLog};
use super::template::{resolve_template, InsertionTemplate, TemplateSet, DEFAULT_TEMPLATE};
use super::InsertionError;
use crate::conformance::IodSpecs;
use crate::dicom::{self, decode_pixels, encode_pixels, tags, DicomFile, ParseOptions, TagPath, Vr};
use crate::identity::{assign_identity, generate_pool, SyntheticPatientRecord};
use crate::instance::corpus_files;
use crate::keyset::{
    save_answer_key, save_mapping, ActionType, AnswerEntry, AnswerKey, Category, MappingKind, MappingTable,
    PixelGeometry, Scope,
};
use crate::pixel::{self, font, BurnInRecord, RegionDigest};
use crate::seeding;

/// Modalities eligible for burned-in text.
pub const BURN_IN_MODALITIES: [&str; 3] = ["CR", "DX", "MG"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub seed: u64,
    pub source_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Root under which synthetic UIDs are minted.
    pub org_root: String,
    /// Root for the de-identified UIDs listed in the UID map.
    pub curated_uid_root: String,
    /// Prefix of the de-identified Patient IDs listed in the patient map.
    pub curated_patient_prefix: String,
    /// Share of eligible single-image projection series that receive text.
    pub burn_in_fraction: f64,
    /// Template directory; the bundled templates when unset.
    pub template_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            source_dir: PathBuf::from("phantom"),
            output_dir: PathBuf::from("out"),
            org_root: "3.1.874.1.8955936".into(),
            curated_uid_root: "2.999.2".into(),
            curated_patient_prefix: "DEID_".into(),
            burn_in_fraction: 0.5,
            template_dir: None,
            workers: 0,
        }
    }
}

/// Burn-in sidecar: the text box plus the regions expected to survive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(flatten)]
    pub burn_in: BurnInRecord,
    pub retained: Vec<RegionDigest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GenerationSummary {
    pub patients: usize,
    pub studies: usize,
    pub series: usize,
    pub instances: usize,
    pub answer_entries: usize,
    pub burn_ins: usize,
    pub skipped: Vec<SkippedFile>,
}

struct Produced {
    rel: PathBuf,
    file: DicomFile,
    log: InsertionLog,
    sidecar: Option<Sidecar>,
}

fn rel_path(root: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(root).unwrap_or(p).to_path_buf()
}

fn burn_text(record: &SyntheticPatientRecord) -> String {
    let p = &record.patient;
    format!("{} {} {}", p.family_name, p.given_name, record.patient_id)
        .to_uppercase()
        .chars()
        .filter(|c| font::glyph(*c).is_some())
        .collect()
}

fn pixel_entry(action: ActionType, text: &str, sub: &str, geometry: PixelGeometry) -> AnswerEntry {
    AnswerEntry {
        sop_instance_uid: String::new(),
        scope: Scope::Instance,
        tag_path: TagPath::from(tags::PIXEL_DATA),
        tag_name: "Pixel Data".into(),
        file_value: text.to_string(),
        action,
        action_text: text.to_string(),
        category: Category::Tcia,
        subcategory: sub.to_string(),
        pixel_geometry: Some(geometry),
    }
}

/// Burns text into eligible images and records what must change and what
/// must stay. Projection images without text only get retained regions.
fn pixel_step(
    file: &mut DicomFile,
    record: &SyntheticPatientRecord,
    burn: bool,
    seed: u64,
    series_uid: &str,
) -> Result<(Vec<AnswerEntry>, Option<Sidecar>), InsertionError> {
    let mut buf = decode_pixels(file)?;
    if !burn {
        let entries = pixel::retained_regions(&buf, true)
            .into_iter()
            .map(|r| pixel_entry(ActionType::PixelsRetained, "", "TCIA-P15-PIX-K", PixelGeometry::Region(r)))
            .collect();
        return Ok((entries, None));
    }
    let text = burn_text(record);
    let mut rng = seeding::stream(seed, "burn-in", seeding::hash_u64(&[series_uid.as_bytes()]));
    let rec = pixel::place_text(buf.columns, buf.rows, &text, &mut rng)
        .map_err(|e| InsertionError::FunctionFailure(e.to_string()))?;
    pixel::burn_text(&mut buf, &rec).map_err(|e| InsertionError::FunctionFailure(e.to_string()))?;
    encode_pixels(file, &buf)?;
    let retained = pixel::retained_regions(&buf, false);
    let mut entries = vec![pixel_entry(ActionType::PixelsHidden, &rec.text, "TCIA-P15-PIX-C", PixelGeometry::BurnIn(rec.clone()))];
    entries.extend(
        retained
            .iter()
            .map(|r| pixel_entry(ActionType::PixelsRetained, "", "TCIA-P15-PIX-K", PixelGeometry::Region(*r))),
    );
    Ok((entries, Some(Sidecar { burn_in: rec, retained })))
}

#[allow(clippy::too_many_arguments)]
fn produce_patient(
    files: &[(PathBuf, DicomFile)],
    record: &SyntheticPatientRecord,
    templates: &HashMap<String, InsertionTemplate>,
    template_set: &TemplateSet,
    config: &GenerationConfig,
    specs: &IodSpecs,
) -> (Vec<Produced>, Vec<SkippedFile>) {
    let mut cache = EntityCache::new();
    let mut series_sizes: HashMap<String, usize> = HashMap::new();
    for (_, f) in files {
        *series_sizes.entry(f.series_uid().unwrap_or_default()).or_default() += 1;
    }
    let mut produced = Vec::new();
    let mut skipped = Vec::new();
    for (rel, source) in files {
        let modality = source.modality().unwrap_or_default();
        let name = template_set.for_modality(&modality).unwrap_or(DEFAULT_TEMPLATE);
        let result = (|| -> Result<Produced, InsertionError> {
            let template = templates.get(name).ok_or_else(|| InsertionError::UnknownTemplate(name.to_string()))?;
            let (mut file, mut log) = apply_template(source, record, template, config.seed, &config.org_root, &mut cache)?;
            let series = source.series_uid().unwrap_or_default();
            let mut sidecar = None;
            if BURN_IN_MODALITIES.contains(&modality.as_str()) && series_sizes.get(&series) == Some(&1) {
                let burn = series_selected(
                    config.seed,
                    &series,
                    &TagPath::from(tags::PIXEL_DATA),
                    config.burn_in_fraction,
                ) && config.burn_in_fraction > 0.0;
                let (entries, sc) = pixel_step(&mut file, record, burn, config.seed, &series)?;
                log.answer_entries.extend(entries);
                sidecar = sc;
            }
            let uid = file.sop_instance_uid().unwrap_or_default();
            for e in &mut log.answer_entries {
                e.sop_instance_uid = uid.clone();
            }
            let structural = structural_entries(&file, &log.answer_entries, specs);
            log.answer_entries.extend(structural);
            Ok(Produced {
                rel: rel.clone(),
                file,
                log,
                sidecar,
            })
        })();
        match result {
            Ok(p) => produced.push(p),
            Err(e) => skipped.push(SkippedFile {
                path: rel.display().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    (produced, skipped)
}

fn write_pairs(path: &Path, kind: MappingKind, pairs: &[(String, String)]) -> Result<(), InsertionError> {
    let table = MappingTable::from_pairs(kind, pairs.iter().cloned())?;
    save_mapping(&table, path)?;
    Ok(())
}

/// Generates the synthetic corpus under `output_dir/synthetic`, mirroring
/// the source layout, with `answer_key.csv`, `patient_mapping.csv`,
/// `uid_mapping.csv`, burn-in sidecars under `sidecars/`, and generation
/// logs under `generation/`. Files that fail to parse or transform are
/// listed in the summary and in `generation/skipped.txt`.
pub fn generate_dataset(config: &GenerationConfig) -> Result<GenerationSummary, InsertionError> {
    let source_root = &config.source_dir;
    if !source_root.is_dir() {
        return Err(InsertionError::SourceUnreadable(source_root.display().to_string()));
    }
    let template_set = match &config.template_dir {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::bundled(),
    };
    let templates: HashMap<String, InsertionTemplate> = template_set
        .names()
        .map(|n| resolve_template(n, &template_set).map(|t| (n.to_string(), t)))
        .collect::<Result<_, _>>()?;
    if !templates.contains_key(DEFAULT_TEMPLATE) {
        return Err(InsertionError::UnknownTemplate(DEFAULT_TEMPLATE.into()));
    }
    let specs = IodSpecs::bundled();

    let paths = corpus_files(source_root).map_err(|_| InsertionError::SourceUnreadable(source_root.display().to_string()))?;
    let parsed: Vec<(PathBuf, Result<DicomFile, String>)> = paths
        .par_iter()
        .map(|p| {
            let r = dicom::read_file(p, ParseOptions::default()).map_err(|e| e.to_string());
            (rel_path(source_root, p), r)
        })
        .collect();
    let mut skipped = Vec::new();
    let mut by_patient: BTreeMap<String, Vec<(PathBuf, DicomFile)>> = BTreeMap::new();
    for (rel, r) in parsed {
        match r {
            Ok(f) => by_patient.entry(f.patient_id().unwrap_or_default()).or_default().push((rel, f)),
            Err(reason) => skipped.push(SkippedFile {
                path: rel.display().to_string(),
                reason,
            }),
        }
    }

    let n = by_patient.len().max(1);
    let pool = generate_pool(config.seed, n * 4, (n / 3).max(2), (n * 3).max(8))?;
    let records: Vec<SyntheticPatientRecord> = (0..by_patient.len())
        .map(|i| assign_identity(&pool, i, &mut seeding::stream(config.seed, "identity", i as u64)))
        .collect::<Result<_, _>>()?;
    let mut seen_ids = BTreeSet::new();
    for r in &records {
        if !seen_ids.insert(r.patient_id.clone()) {
            return Err(InsertionError::Collision(format!("synthetic Patient ID {}", r.patient_id)));
        }
    }

    let groups: Vec<&Vec<(PathBuf, DicomFile)>> = by_patient.values().collect();
    let run = || -> Vec<(Vec<Produced>, Vec<SkippedFile>)> {
        groups
            .par_iter()
            .zip(records.par_iter())
            .map(|(files, record)| produce_patient(files, record, &templates, &template_set, config, specs))
            .collect()
    };
    let results = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| InsertionError::FunctionFailure(e.to_string()))?
            .install(run)
    } else {
        run()
    };

    let out = &config.output_dir;
    let synthetic_root = out.join("synthetic");
    let generation = out.join("generation");
    std::fs::create_dir_all(&generation)?;
    let mut log = InsertionLog::default();
    let mut summary = GenerationSummary::default();
    let mut instance_uids: BTreeSet<String> = BTreeSet::new();
    let (mut studies, mut series) = (BTreeSet::new(), BTreeSet::new());
    let mut patient_pairs = Vec::new();
    for (i, ((produced, skip), record)) in results.into_iter().zip(&records).enumerate() {
        skipped.extend(skip);
        if produced.is_empty() {
            continue;
        }
        summary.patients += 1;
        patient_pairs.push((record.patient_id.clone(), format!("{}{:03}", config.curated_patient_prefix, i + 1)));
        for p in produced {
            dicom::write_file(&p.file, synthetic_root.join(&p.rel))?;
            if let Some(sc) = &p.sidecar {
                let mut name = p.rel.clone().into_os_string();
                name.push(".burnin.json");
                let path = out.join("sidecars").join(name);
                std::fs::create_dir_all(path.parent().unwrap())?;
                std::fs::write(&path, serde_json::to_string_pretty(sc)? + "\n")?;
                summary.burn_ins += 1;
            }
            for (_, el) in p.file.dataset.walk() {
                if el.vr == Vr::UI {
                    if let Some(u) = el.to_text().filter(|u| is_instance_uid(u)) {
                        instance_uids.insert(u);
                    }
                }
            }
            studies.insert(p.file.study_uid().unwrap_or_default());
            series.insert(p.file.series_uid().unwrap_or_default());
            summary.instances += 1;
            log.extend(p.log);
        }
    }
    summary.studies = studies.len();
    summary.series = series.len();
    summary.answer_entries = log.answer_entries.len();

    let key = AnswerKey::new(log.answer_entries);
    save_answer_key(&key, out.join("answer_key.csv"))?;
    write_pairs(&out.join("patient_mapping.csv"), MappingKind::PatientId, &patient_pairs)?;
    let uid_pairs: Vec<(String, String)> = instance_uids
        .into_iter()
        .enumerate()
        .map(|(i, u)| (u, format!("{}.{}", config.curated_uid_root, i + 1)))
        .collect();
    write_pairs(&out.join("uid_mapping.csv"), MappingKind::Uid, &uid_pairs)?;
    write_pairs(&generation.join("source_patient_mapping.csv"), MappingKind::PatientId, &log.patid_map_entries)?;
    write_pairs(&generation.join("source_uid_mapping.csv"), MappingKind::Uid, &log.uid_map_entries)?;
    skipped.sort_by(|a, b| a.path.cmp(&b.path));
    let skipped_text: String = skipped.iter().map(|s| format!("{}\t{}\n", s.path, s.reason)).collect();
    std::fs::write(generation.join("skipped.txt"), skipped_text)?;
    summary.skipped = skipped;
    std::fs::write(generation.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
