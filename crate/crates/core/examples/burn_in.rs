//! Burns text into a blank image, detects it, blacks it out, and detects
//! again.
//!
//! cargo run --example burn_in -- "DOE^JANE 19670412"

use deidbench::dicom::PixelBuffer;
use deidbench::pixel::{black_out, burn_text, detect_text, place_text, region_unchanged, retained_regions};
use deidbench::seeding;

fn main() -> anyhow::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "DOE^JANE 19670412".into());
    let mut image = PixelBuffer::new(384, 256, 16);
    for (i, v) in image.samples.iter_mut().enumerate() {
        *v = 800 + (i % 256) as i32 * 10;
    }
    let kept = retained_regions(&image, false);
    let record = place_text(image.columns, image.rows, &text, &mut seeding::stream(1, "burn", 0))?;
    burn_text(&mut image, &record)?;
    println!("burned {:?} at ({}, {}) size {}", record.text, record.x, record.y, record.font_size);
    println!("detector score with text:   {:.3}", detect_text(&image, &record)?);
    black_out(&mut image, record.x, record.y, record.width, record.height)?;
    println!("detector score blacked out: {:.3}", detect_text(&image, &record)?);
    let intact = kept.iter().filter(|r| region_unchanged(&image, r)).count();
    println!("corner regions unchanged: {intact}/{}", kept.len());
    Ok(())
}
