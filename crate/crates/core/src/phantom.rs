//! Clean source corpus with no identifying content, used as the input to
//! generation when no real phantom scans are at hand.
//!
//! Layout is `<root>/<PATIENT-ID>/<study>/<series>/<n>.dcm`. Each patient
//! gets a CT study, an MR study and a projection study of two single-image
//! series (CR, DX or MG by patient).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dicom::{self, encode_pixels, tags, DataElement, DataSet, DicomError, DicomFile, PixelBuffer, Tag, Vr};
use crate::seeding;

pub const CT_IMAGE: &str = "1.2.840.10008.5.1.4.1.1.2";
pub const MR_IMAGE: &str = "1.2.840.10008.5.1.4.1.1.4";
pub const CR_IMAGE: &str = "1.2.840.10008.5.1.4.1.1.1";
pub const DX_IMAGE: &str = "1.2.840.10008.5.1.4.1.1.1.1";
pub const MG_IMAGE: &str = "1.2.840.10008.5.1.4.1.1.1.2";

/// Root of the phantom UIDs.
pub const PHANTOM_ROOT: &str = "2.999.1";
pub const PRIVATE_CREATOR: &str = "DEIDBENCH";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub patients: usize,
    pub seed: u64,
    pub ct_series: usize,
    pub ct_instances: usize,
    pub mr_series: usize,
    pub mr_instances: usize,
    /// Two single-image projection series per patient when set.
    pub projection: bool,
    /// Matrix side for CT and MR.
    pub tomo_size: u16,
    pub projection_rows: u16,
    pub projection_columns: u16,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            patients: 20,
            seed: 42,
            ct_series: 2,
            ct_instances: 14,
            mr_series: 2,
            mr_instances: 10,
            projection: true,
            tomo_size: 32,
            projection_rows: 384,
            projection_columns: 256,
        }
    }
}

impl PhantomConfig {
    pub fn files_per_patient(&self) -> usize {
        self.ct_series * self.ct_instances + self.mr_series * self.mr_instances + if self.projection { 2 } else { 0 }
    }
}

pub fn patient_id(p: usize) -> String {
    format!("PHANTOM-{:03}", p + 1)
}

fn projection_modality(p: usize) -> (&'static str, &'static str) {
    [("CR", CR_IMAGE), ("DX", DX_IMAGE), ("MG", MG_IMAGE)][p % 3]
}

struct Series<'a> {
    modality: &'a str,
    class: &'a str,
    study: usize,
    number: usize,
    instances: usize,
}

fn t(group: u16, element: u16) -> Tag {
    Tag::new(group, element)
}

fn date_for(seed: u64, p: usize) -> String {
    let h = seeding::hash_u64(&[b"phantom-date", &seed.to_le_bytes(), &(p as u64).to_le_bytes()]);
    let base = chrono::NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date");
    (base + chrono::Days::new(h % 2000)).format("%Y%m%d").to_string()
}

fn pixels(rows: u16, columns: u16, bits_stored: u16, phase: usize) -> PixelBuffer {
    let mut buf = PixelBuffer::new(usize::from(rows), usize::from(columns), 16);
    buf.bits_stored = bits_stored;
    let (r, c) = (f64::from(rows), f64::from(columns));
    for y in 0..buf.rows {
        for x in 0..buf.columns {
            let v = if bits_stored > 12 {
                // Projection: gentle gradient well below full scale.
                800.0 + 2000.0 * (x as f64 / c) + 1000.0 * (y as f64 / r)
            } else {
                let dx = x as f64 - c / 2.0;
                let dy = y as f64 - r / 2.0;
                let d = (dx * dx + dy * dy).sqrt() / (c / 2.0);
                let ring = ((d * 6.0 + phase as f64 * 0.3).sin() + 1.0) * 400.0;
                if d < 0.9 {
                    1000.0 + ring
                } else {
                    0.0
                }
            };
            buf.set(x, y, v.round() as i32);
        }
    }
    buf
}

fn instance(cfg: &PhantomConfig, p: usize, s: &Series, i: usize) -> Result<DicomFile, DicomError> {
    let uid = |parts: &[usize]| {
        let mut u = format!("{PHANTOM_ROOT}.{}", p + 1);
        for x in parts {
            u += &format!(".{}", x + 1);
        }
        u
    };
    let study_uid = uid(&[s.study]);
    let series_uid = uid(&[s.study, s.number]);
    let sop_uid = uid(&[s.study, s.number, i]);
    let date = date_for(cfg.seed, p);
    let projection = matches!(s.modality, "CR" | "DX" | "MG");
    let sex = ["F", "M", "O"][p % 3];

    let mut ds = DataSet::new();
    let mut text = |tag: Tag, vr: Vr, v: &str| ds.put(DataElement::text(tag, vr, v));
    // Patient
    text(tags::PATIENT_NAME, Vr::PN, "");
    text(tags::PATIENT_ID, Vr::LO, &patient_id(p));
    text(tags::PATIENT_BIRTH_DATE, Vr::DA, "");
    text(t(0x0010, 0x0040), Vr::CS, if s.modality == "MG" { "F" } else { sex });
    // Study
    text(tags::STUDY_INSTANCE_UID, Vr::UI, &study_uid);
    text(tags::STUDY_DATE, Vr::DA, &date);
    text(t(0x0008, 0x0030), Vr::TM, "093000");
    text(t(0x0008, 0x0090), Vr::PN, "");
    text(t(0x0020, 0x0010), Vr::SH, &format!("{}", s.study + 1));
    text(tags::ACCESSION_NUMBER, Vr::SH, "");
    let study_desc = match s.modality {
        "CT" => "CT CHEST ABDOMEN",
        "MR" => "MR BRAIN",
        "MG" => "SCREENING MAMMOGRAM",
        _ => "CHEST PA",
    };
    text(t(0x0008, 0x1030), Vr::LO, study_desc);
    // Series
    text(tags::MODALITY, Vr::CS, s.modality);
    text(tags::SERIES_INSTANCE_UID, Vr::UI, &series_uid);
    text(t(0x0020, 0x0011), Vr::IS, &format!("{}", s.number + 1));
    text(tags::SERIES_DATE, Vr::DA, &date);
    let series_desc = match (s.modality, s.number) {
        ("CT", 0) => "AXIAL 5MM",
        ("CT", _) => "CORONAL MPR",
        ("MR", 0) => "T1 AXIAL",
        ("MR", _) => "T2 FLAIR",
        ("MG", 0) => "L CC",
        ("MG", _) => "R CC",
        (_, 0) => "PA VIEW",
        _ => "LATERAL VIEW",
    };
    text(t(0x0008, 0x103E), Vr::LO, series_desc);
    let body_part = match s.modality {
        "MR" => "HEAD",
        "MG" => "BREAST",
        _ => "CHEST",
    };
    text(t(0x0018, 0x0015), Vr::CS, body_part);
    if !projection {
        text(t(0x0018, 0x1030), Vr::LO, if s.modality == "CT" { "ROUTINE CHEST" } else { "BRAIN ROUTINE" });
    }
    // Equipment
    text(t(0x0008, 0x0070), Vr::LO, "ACME IMAGING");
    text(t(0x0008, 0x1090), Vr::LO, "PHANTOM SCANNER");
    // Image
    text(tags::INSTANCE_NUMBER, Vr::IS, &format!("{}", i + 1));
    text(t(0x0008, 0x0022), Vr::DA, &date);
    text(t(0x0008, 0x0023), Vr::DA, &date);
    text(t(0x0008, 0x0012), Vr::DA, &date);
    text(tags::SOP_CLASS_UID, Vr::UI, s.class);
    text(tags::SOP_INSTANCE_UID, Vr::UI, &sop_uid);
    text(t(0x0028, 0x0004), Vr::CS, "MONOCHROME2");

    if projection {
        text(t(0x0020, 0x0020), Vr::CS, if s.number == 0 { "A\\R" } else { "P\\L" });
        text(t(0x0008, 0x0008), Vr::CS, "ORIGINAL\\PRIMARY");
        text(t(0x0018, 0x5101), Vr::CS, "PA");
        match s.modality {
            "CR" => text(t(0x0018, 0x1004), Vr::LO, &format!("PLATE{}", s.number + 1)),
            _ => {
                text(t(0x0008, 0x0068), Vr::CS, "FOR PRESENTATION");
                text(t(0x0028, 0x1040), Vr::CS, "LIN");
                text(t(0x0028, 0x1050), Vr::DS, "2000");
                text(t(0x0028, 0x1051), Vr::DS, "4000");
                text(t(0x0018, 0x1164), Vr::DS, "0.1\\0.1");
            }
        }
        if s.modality == "MG" {
            // Every sixth patient carries an empty laterality, a defect of
            // the source that conformance checks should report both before
            // and after curation.
            let laterality = if p % 6 == 2 { "" } else if s.number == 0 { "L" } else { "R" };
            text(t(0x0020, 0x0062), Vr::CS, laterality);
        }
    } else {
        text(tags::FRAME_OF_REFERENCE_UID, Vr::UI, &uid(&[s.study, s.number, 900]));
        text(t(0x0020, 0x1040), Vr::LO, "");
        text(t(0x0028, 0x0030), Vr::DS, "0.7\\0.7");
        text(t(0x0020, 0x0037), Vr::DS, "1\\0\\0\\0\\1\\0");
        text(t(0x0020, 0x0032), Vr::DS, &format!("-100\\-100\\{}", i * 5));
        text(t(0x0018, 0x0050), Vr::DS, "5");
        if s.modality == "CT" {
            text(t(0x0008, 0x0008), Vr::CS, "ORIGINAL\\PRIMARY\\AXIAL");
            text(t(0x0018, 0x0060), Vr::DS, "120");
            text(t(0x0020, 0x0012), Vr::IS, "1");
            text(t(0x0028, 0x1052), Vr::DS, "-1024");
            text(t(0x0028, 0x1053), Vr::DS, "1");
        } else {
            text(t(0x0008, 0x0008), Vr::CS, "ORIGINAL\\PRIMARY\\M");
            text(t(0x0018, 0x0020), Vr::CS, "SE");
            text(t(0x0018, 0x0021), Vr::CS, "NONE");
            text(t(0x0018, 0x0022), Vr::CS, "");
            text(t(0x0018, 0x0023), Vr::CS, "2D");
            text(t(0x0018, 0x0080), Vr::DS, "500");
            text(t(0x0018, 0x0081), Vr::DS, "15");
            text(t(0x0018, 0x0091), Vr::IS, "1");
            text(t(0x0018, 0x0087), Vr::DS, "1.5");
        }
    }
    text(t(0x0009, 0x0010), Vr::LO, PRIVATE_CREATOR);
    text(t(0x0009, 0x1001), Vr::LO, "PHANTOM");
    if projection {
        ds.put(DataElement::binary(t(0x0028, 0x1041), Vr::SS, 1i16.to_le_bytes().to_vec()));
    }
    if i > 0 {
        let mut item = DataSet::new();
        item.put(DataElement::text(t(0x0008, 0x1150), Vr::UI, s.class));
        item.put(DataElement::text(t(0x0008, 0x1155), Vr::UI, uid(&[s.study, s.number, 0])));
        ds.put(DataElement::sequence(t(0x0008, 0x1140), vec![item]));
    }
    let mut request = DataSet::new();
    request.put(DataElement::empty(tags::ACCESSION_NUMBER, Vr::SH));
    request.put(DataElement::text(t(0x0040, 0x1001), Vr::SH, "RP1"));
    ds.put(DataElement::sequence(t(0x0040, 0x0275), vec![request]));

    let mut file = DicomFile::new(ds);
    let buf = if projection {
        pixels(cfg.projection_rows, cfg.projection_columns, 16, i)
    } else {
        pixels(cfg.tomo_size, cfg.tomo_size, 12, i)
    };
    encode_pixels(&mut file, &buf)?;
    Ok(file)
}

/// Every phantom file with its path relative to the corpus root.
pub fn phantom_files(cfg: &PhantomConfig) -> Result<Vec<(PathBuf, DicomFile)>, DicomError> {
    let mut out = Vec::with_capacity(cfg.patients * cfg.files_per_patient());
    for p in 0..cfg.patients {
        let mut series = Vec::new();
        for n in 0..cfg.ct_series {
            series.push(Series { modality: "CT", class: CT_IMAGE, study: 0, number: n, instances: cfg.ct_instances });
        }
        for n in 0..cfg.mr_series {
            series.push(Series { modality: "MR", class: MR_IMAGE, study: 1, number: n, instances: cfg.mr_instances });
        }
        if cfg.projection {
            let (modality, class) = projection_modality(p);
            for n in 0..2 {
                series.push(Series { modality, class, study: 2, number: n, instances: 1 });
            }
        }
        for s in &series {
            for i in 0..s.instances {
                let rel = PathBuf::from(patient_id(p))
                    .join(format!("study{}-{}", s.study + 1, s.modality))
                    .join(format!("series{}", s.number + 1))
                    .join(format!("{:04}.dcm", i + 1));
                out.push((rel, instance(cfg, p, s, i)?));
            }
        }
    }
    Ok(out)
}

/// Writes the phantom corpus under `root` and returns the file count.
pub fn write_phantom(root: &Path, cfg: &PhantomConfig) -> Result<usize, DicomError> {
    let files = phantom_files(cfg)?;
    for (rel, f) in &files {
        dicom::write_file(f, root.join(rel))?;
    }
    Ok(files.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformance::{verify_file, FindingKind, IodSpecs};

    fn small() -> PhantomConfig {
        PhantomConfig {
            patients: 3,
            ct_instances: 3,
            mr_instances: 2,
            ..PhantomConfig::default()
        }
    }

    #[test]
    fn counts_and_layout() {
        let cfg = small();
        let files = phantom_files(&cfg).unwrap();
        assert_eq!(files.len(), 3 * cfg.files_per_patient());
        assert_eq!(PhantomConfig::default().files_per_patient() * 20, 1000);
        assert!(files[0].0.starts_with("PHANTOM-001"));
        let uids: std::collections::HashSet<_> = files.iter().map(|(_, f)| f.sop_instance_uid().unwrap()).collect();
        assert_eq!(uids.len(), files.len());
    }

    #[test]
    fn conformant_except_planted_defect() {
        let specs = IodSpecs::bundled();
        for (rel, f) in phantom_files(&small()).unwrap() {
            let errors: Vec<_> = verify_file(&f, specs, &rel)
                .into_iter()
                .filter(|x| x.kind == FindingKind::Error)
                .collect();
            let planted = rel.starts_with("PHANTOM-003") && f.modality().as_deref() == Some("MG");
            if planted {
                assert_eq!(errors.len(), 1, "{rel:?}");
                assert_eq!(errors[0].tag, "(0020,0062)");
            } else {
                assert!(errors.is_empty(), "{rel:?}: {errors:?}");
            }
        }
    }
}
