mod common;

use std::collections::BTreeSet;

use deidbench::curate::load_fault_manifest;
use deidbench::validator::run_validation;

#[test]
fn clean_curation_passes_everything() {
    let c = common::generated(6);
    c.curate(0);
    let store = run_validation(&c.validation()).unwrap();
    let failed: Vec<_> = store.results.iter().filter(|r| !r.check_passed).take(5).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(store.results.len(), c.summary.answer_entries);
}

#[test]
fn injected_faults_are_exactly_the_failures() {
    let c = common::generated(6);
    c.curate(25);
    let faults = load_fault_manifest(&c.out().join("fault_manifest.csv")).unwrap();
    assert_eq!(faults.len(), 25);
    let store = run_validation(&c.validation()).unwrap();
    let failed: BTreeSet<(String, String, String)> = store
        .results
        .iter()
        .filter(|r| !r.check_passed)
        .map(|r| (r.key_instance.clone(), r.tag_ds.clone(), r.action.to_string()))
        .collect();
    let expected: BTreeSet<(String, String, String)> =
        faults.iter().map(|f| (f.answer_uid.clone(), f.tag.clone(), f.action.to_string())).collect();
    assert_eq!(failed, expected);
    let kinds: BTreeSet<_> = faults.iter().map(|f| f.action).collect();
    assert!(kinds.len() >= 4, "{kinds:?}");
}

#[test]
fn deleting_a_file_fails_its_entries_except_removals() {
    let c = common::generated(3);
    c.curate(0);
    let victim = walkdir::WalkDir::new(c.out().join("curated"))
        .into_iter()
        .filter_map(Result::ok)
        .find(|e| e.file_type().is_file())
        .unwrap()
        .into_path();
    std::fs::remove_file(&victim).unwrap();
    let store = run_validation(&c.validation()).unwrap();
    let missing: Vec<_> = store.results.iter().filter(|r| r.missing).collect();
    assert!(!missing.is_empty());
    for r in &missing {
        assert_eq!(r.check_passed, r.action.as_str() == "text_removed", "{r:?}");
    }
    assert_eq!(store.metadata.instances_missing, 1);
}
