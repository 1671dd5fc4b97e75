//! Checks attribute types in a corpus and compares the findings with
//! those of the corpus it was derived from.
//!
//! cargo run --example conformance_check -- /tmp/deid
//! (expects `curate_and_validate` to have been run on the same directory)

use deidbench::conformance::{compare_conformance, verify_corpus, IodSpecs};
use deidbench::keyset::{load_mapping, MappingKind};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "deid-demo".into())).join("out");
    let specs = IodSpecs::bundled();
    let uids = load_mapping(out.join("uid_mapping.csv"), MappingKind::Uid)?;
    let (before, _) = verify_corpus(&out.join("synthetic"), specs)?;
    let before = before.into_iter().map(|(k, v)| (uids.get(&k).unwrap_or(&k).to_string(), v)).collect();
    let (after, unreadable) = verify_corpus(&out.join("curated"), specs)?;
    println!("{} files checked, {} unreadable", after.len(), unreadable.len());
    for f in after.values().flatten() {
        println!("  {} {} {} {}", f.kind, f.tag, f.message, f.context.file_name);
    }
    let regressions = compare_conformance(&before, &after);
    println!("{} regressions", regressions.len());
    for f in &regressions {
        println!("  {} {} {} {}", f.kind, f.tag, f.message, f.context.instance);
    }
    Ok(())
}
