mod common;

use deidbench::insertion::{generate_dataset, GenerationConfig};
use deidbench::keyset::{load_answer_key, load_mapping, validate_key, ActionType, MappingKind};

#[test]
fn generates_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("phantom");
    common::small_phantom(&src, 6);
    let cfg = GenerationConfig {
        source_dir: src,
        output_dir: dir.path().join("out"),
        ..GenerationConfig::default()
    };
    let summary = generate_dataset(&cfg).unwrap();
    assert_eq!(summary.patients, 6);
    assert_eq!(summary.instances, 6 * 12);
    assert!(summary.skipped.is_empty());
    assert!(summary.burn_ins >= 1);
    let out = dir.path().join("out");
    let key = load_answer_key(out.join("answer_key.csv")).unwrap();
    assert!(validate_key(&key).is_empty(), "{:?}", &validate_key(&key)[..3.min(validate_key(&key).len())]);
    let pats = load_mapping(out.join("patient_mapping.csv"), MappingKind::PatientId).unwrap();
    assert_eq!(pats.len(), 6);
    let uids = load_mapping(out.join("uid_mapping.csv"), MappingKind::Uid).unwrap();
    for e in key.entries().iter().filter(|e| e.action == ActionType::UidConsistent) {
        assert!(uids.get(&e.file_value).is_some(), "{}", e.file_value);
    }
    for a in [ActionType::TextRemoved, ActionType::DateShifted, ActionType::PixelsHidden, ActionType::TextRetained] {
        assert!(key.entries().iter().any(|e| e.action == a), "{a}");
    }
}
