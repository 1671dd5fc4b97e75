//! Writes a phantom source corpus and generates the synthetic corpus,
//! answer key and mappings from it.
//!
//! cargo run --example generate_corpus -- /tmp/deid 20

use deidbench::insertion::{generate_dataset, GenerationConfig};
use deidbench::phantom::{write_phantom, PhantomConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = std::path::PathBuf::from(args.next().unwrap_or_else(|| "deid-demo".into()));
    let patients: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);

    let source = root.join("phantom");
    let n = write_phantom(&source, &PhantomConfig { patients, ..PhantomConfig::default() })?;
    println!("phantom: {n} files");

    let config = GenerationConfig {
        source_dir: source,
        output_dir: root.join("out"),
        ..GenerationConfig::default()
    };
    let summary = generate_dataset(&config)?;
    println!(
        "patients {} studies {} series {} instances {} answer entries {} burn-ins {}",
        summary.patients, summary.studies, summary.series, summary.instances, summary.answer_entries, summary.burn_ins
    );
    Ok(())
}
