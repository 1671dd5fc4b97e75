#![allow(dead_code)]

use std::path::{Path, PathBuf};

use deidbench::curate::{curate_corpus, CurationConfig};
use deidbench::insertion::{generate_dataset, GenerationConfig, GenerationSummary};
use deidbench::phantom::{write_phantom, PhantomConfig};
use deidbench::validator::ValidationConfig;

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub summary: GenerationSummary,
}

impl Corpus {
    pub fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    pub fn curation(&self, inject: usize) -> CurationConfig {
        let out = self.out();
        CurationConfig {
            synthetic_dir: out.join("synthetic"),
            answer_key: out.join("answer_key.csv"),
            patient_map: out.join("patient_mapping.csv"),
            uid_map: out.join("uid_mapping.csv"),
            output_dir: out.join("curated"),
            inject,
            fault_manifest: out.join("fault_manifest.csv"),
            ..CurationConfig::default()
        }
    }

    pub fn validation(&self) -> ValidationConfig {
        let out = self.out();
        ValidationConfig {
            dicom_root: out.join("curated"),
            answer_key: out.join("answer_key.csv"),
            patient_map: out.join("patient_mapping.csv"),
            uid_map: out.join("uid_mapping.csv"),
            output_dir: out.join("validation"),
            ..ValidationConfig::default()
        }
    }

    pub fn curate(&self, inject: usize) {
        curate_corpus(&self.curation(inject)).unwrap();
    }
}

pub fn small_phantom(root: &Path, patients: usize) {
    let cfg = PhantomConfig {
        patients,
        ct_instances: 3,
        mr_instances: 2,
        ..PhantomConfig::default()
    };
    write_phantom(root, &cfg).unwrap();
}

pub fn generated(patients: usize) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("phantom");
    small_phantom(&src, patients);
    let cfg = GenerationConfig {
        source_dir: src,
        output_dir: dir.path().join("out"),
        ..GenerationConfig::default()
    };
    let summary = generate_dataset(&cfg).unwrap();
    Corpus { dir, summary }
}
