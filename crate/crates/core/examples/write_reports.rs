//! Writes the report tables for a saved validation run at both aggregation
//! levels and prints the scoring tables.
//!
//! cargo run --example write_reports -- /tmp/deid
//! (expects `curate_and_validate` to have been run on the same directory)

use deidbench::reports::{aggregate, scoring_report, write_reports, SCORING_HEADER};
use deidbench::validator::{Aggregation, ResultsStore};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "deid-demo".into())).join("out");
    let store = ResultsStore::load(&out.join("validation"))?;
    for unit in [Aggregation::Instance, Aggregation::Series] {
        let dir = out.join("reports").join(unit.to_string());
        let written = write_reports(&store, unit, &dir)?;
        println!("{unit}: {} files in {}", written.len(), dir.display());
        println!("  {}", SCORING_HEADER.join("\t"));
        for row in scoring_report(&aggregate(&store.results, unit)) {
            println!("  {}", row.join("\t"));
        }
    }
    Ok(())
}
