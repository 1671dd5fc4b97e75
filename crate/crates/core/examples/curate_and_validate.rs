//! Curates a generated corpus with a few deliberate faults, validates it,
//! and lists the failed checks next to the fault manifest.
//!
//! cargo run --example curate_and_validate -- /tmp/deid 5
//! (expects `generate_corpus` to have been run on the same directory)

use deidbench::curate::{curate_corpus, CurationConfig};
use deidbench::validator::{run_validation, summary_line, ValidationConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "deid-demo".into())).join("out");
    let inject: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let curation = CurationConfig {
        synthetic_dir: out.join("synthetic"),
        answer_key: out.join("answer_key.csv"),
        patient_map: out.join("patient_mapping.csv"),
        uid_map: out.join("uid_mapping.csv"),
        output_dir: out.join("curated"),
        fault_manifest: out.join("fault_manifest.csv"),
        inject,
        ..CurationConfig::default()
    };
    let summary = curate_corpus(&curation)?;
    println!("curated {} files", summary.files);
    for f in &summary.faults {
        println!("  fault  {} {} {}", f.instance, f.tag, f.action);
    }

    let validation = ValidationConfig {
        dicom_root: out.join("curated"),
        answer_key: curation.answer_key,
        patient_map: curation.patient_map,
        uid_map: curation.uid_map,
        output_dir: out.join("validation"),
        ..ValidationConfig::default()
    };
    let store = run_validation(&validation)?;
    store.save(&validation.output_dir)?;
    for r in store.results.iter().filter(|r| !r.check_passed) {
        println!("  failed {} {} {} ({:.0})", r.context.instance, r.tag_ds, r.action, r.check_score);
    }
    println!("{}", summary_line(&store));
    Ok(())
}
