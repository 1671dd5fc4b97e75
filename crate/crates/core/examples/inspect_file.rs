//! Prints the data elements of a DICOM file, nested items indented.
//!
//! cargo run --example inspect_file -- path/to/file.dcm

use deidbench::dicom::{dictionary, read_file, ParseOptions};

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).ok_or_else(|| anyhow::anyhow!("usage: inspect_file <file>"))?;
    let file = read_file(&path, ParseOptions { lenient: true })?;
    for (path, el) in file.dataset.walk() {
        let depth = path.to_string().matches('/').count();
        let value = match el.to_text() {
            Some(v) if v.len() > 64 => format!("{}...", &v[..64]),
            Some(v) => v,
            None => "<sequence>".into(),
        };
        println!("{:indent$}{} {:?} {:<32} {}", "", el.tag, el.vr, dictionary::name_of(el.tag), value, indent = depth * 2);
    }
    Ok(())
}
