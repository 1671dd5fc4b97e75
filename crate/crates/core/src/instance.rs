//! Identifying context of one DICOM instance, shared by check results and
//! conformance findings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dicom::DicomFile;

/// Regular files under `root`, depth first in file-name order. Hidden files
/// are skipped.
pub fn corpus_files(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.') && entry.depth() > 0;
        if entry.file_type().is_file() && !hidden {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceContext {
    pub modality: String,
    pub class: String,
    pub patient: String,
    pub study: String,
    pub series: String,
    pub instance: String,
    pub file_name: String,
    pub file_path: String,
}

impl InstanceContext {
    pub fn from_file(file: &DicomFile, path: &Path) -> Self {
        let s = |v: Option<String>| v.unwrap_or_default();
        Self {
            modality: s(file.modality()),
            class: s(file.sop_class_uid()),
            patient: s(file.patient_id()),
            study: s(file.study_uid()),
            series: s(file.series_uid()),
            instance: s(file.sop_instance_uid()),
            file_name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            file_path: path.to_string_lossy().into_owned(),
        }
    }
}
