//! Draws a small identity pool and assigns identities to a few patients.
//!
//! cargo run --example synthetic_identities -- 7

use deidbench::identity::{assign_identity, generate_pool};
use deidbench::seeding;

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let pool = generate_pool(seed, 30, 5, 60)?;
    for p in 0..5 {
        let r = assign_identity(&pool, p, &mut seeding::stream(seed, "identity", p as u64))?;
        println!(
            "{:<11} {:<28} born {}  {}  referred by {}  shift {:+} days",
            r.patient_id,
            r.patient.dicom_name(),
            r.patient.birth_date.format("%Y%m%d"),
            r.institution.name,
            r.referring_physician.dicom_name(),
            r.date_shift_days
        );
    }
    Ok(())
}
