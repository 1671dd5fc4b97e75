//! A small data dictionary covering the attributes this toolkit reads,
//! writes, or checks. Used for implicit-VR decoding and for tag names.

use super::{Tag, Vr};

pub struct Entry {
    pub tag: Tag,
    pub vr: Vr,
    pub name: &'static str,
}

macro_rules! dict {
    ($(($g:literal, $e:literal, $vr:literal, $name:literal)),* $(,)?) => {
        &[$(Entry { tag: Tag::new($g, $e), vr: Vr::from_bytes(*$vr), name: $name }),*]
    };
}

static ENTRIES: &[Entry] = dict![
    (0x0002, 0x0000, b"UL", "File Meta Information Group Length"),
    (0x0002, 0x0001, b"OB", "File Meta Information Version"),
    (0x0002, 0x0002, b"UI", "Media Storage SOP Class UID"),
    (0x0002, 0x0003, b"UI", "Media Storage SOP Instance UID"),
    (0x0002, 0x0010, b"UI", "Transfer Syntax UID"),
    (0x0002, 0x0012, b"UI", "Implementation Class UID"),
    (0x0002, 0x0013, b"SH", "Implementation Version Name"),
    (0x0008, 0x0005, b"CS", "Specific Character Set"),
    (0x0008, 0x0008, b"CS", "Image Type"),
    (0x0008, 0x0012, b"DA", "Instance Creation Date"),
    (0x0008, 0x0013, b"TM", "Instance Creation Time"),
    (0x0008, 0x0016, b"UI", "SOP Class UID"),
    (0x0008, 0x0018, b"UI", "SOP Instance UID"),
    (0x0008, 0x0020, b"DA", "Study Date"),
    (0x0008, 0x0021, b"DA", "Series Date"),
    (0x0008, 0x0022, b"DA", "Acquisition Date"),
    (0x0008, 0x0023, b"DA", "Content Date"),
    (0x0008, 0x0030, b"TM", "Study Time"),
    (0x0008, 0x0031, b"TM", "Series Time"),
    (0x0008, 0x0032, b"TM", "Acquisition Time"),
    (0x0008, 0x0033, b"TM", "Content Time"),
    (0x0008, 0x0050, b"SH", "Accession Number"),
    (0x0008, 0x0060, b"CS", "Modality"),
    (0x0008, 0x0064, b"CS", "Conversion Type"),
    (0x0008, 0x0068, b"CS", "Presentation Intent Type"),
    (0x0008, 0x0070, b"LO", "Manufacturer"),
    (0x0008, 0x0080, b"LO", "Institution Name"),
    (0x0008, 0x0081, b"ST", "Institution Address"),
    (0x0008, 0x0090, b"PN", "Referring Physician's Name"),
    (0x0008, 0x0092, b"ST", "Referring Physician's Address"),
    (0x0008, 0x0094, b"SH", "Referring Physician's Telephone Numbers"),
    (0x0008, 0x1010, b"SH", "Station Name"),
    (0x0008, 0x1030, b"LO", "Study Description"),
    (0x0008, 0x103E, b"LO", "Series Description"),
    (0x0008, 0x1040, b"LO", "Institutional Department Name"),
    (0x0008, 0x1048, b"PN", "Physician(s) of Record"),
    (0x0008, 0x1050, b"PN", "Performing Physician's Name"),
    (0x0008, 0x1060, b"PN", "Name of Physician(s) Reading Study"),
    (0x0008, 0x1070, b"PN", "Operators' Name"),
    (0x0008, 0x1090, b"LO", "Manufacturer's Model Name"),
    (0x0008, 0x1140, b"SQ", "Referenced Image Sequence"),
    (0x0008, 0x1150, b"UI", "Referenced SOP Class UID"),
    (0x0008, 0x1155, b"UI", "Referenced SOP Instance UID"),
    (0x0008, 0x1190, b"UR", "Retrieve URL"),
    (0x0010, 0x0010, b"PN", "Patient's Name"),
    (0x0010, 0x0020, b"LO", "Patient ID"),
    (0x0010, 0x0030, b"DA", "Patient's Birth Date"),
    (0x0010, 0x0040, b"CS", "Patient's Sex"),
    (0x0010, 0x1000, b"LO", "Other Patient IDs"),
    (0x0010, 0x1010, b"AS", "Patient's Age"),
    (0x0010, 0x1020, b"DS", "Patient's Size"),
    (0x0010, 0x1030, b"DS", "Patient's Weight"),
    (0x0010, 0x1040, b"LO", "Patient's Address"),
    (0x0010, 0x2154, b"SH", "Patient's Telephone Numbers"),
    (0x0010, 0x21B0, b"LT", "Additional Patient History"),
    (0x0010, 0x4000, b"LT", "Patient Comments"),
    (0x0018, 0x0010, b"LO", "Contrast/Bolus Agent"),
    (0x0018, 0x0015, b"CS", "Body Part Examined"),
    (0x0018, 0x0020, b"CS", "Scanning Sequence"),
    (0x0018, 0x0021, b"CS", "Sequence Variant"),
    (0x0018, 0x0022, b"CS", "Scan Options"),
    (0x0018, 0x0023, b"CS", "MR Acquisition Type"),
    (0x0018, 0x0050, b"DS", "Slice Thickness"),
    (0x0018, 0x0060, b"DS", "KVP"),
    (0x0018, 0x0080, b"DS", "Repetition Time"),
    (0x0018, 0x0081, b"DS", "Echo Time"),
    (0x0018, 0x0087, b"DS", "Magnetic Field Strength"),
    (0x0018, 0x0088, b"DS", "Spacing Between Slices"),
    (0x0018, 0x0091, b"IS", "Echo Train Length"),
    (0x0018, 0x1000, b"LO", "Device Serial Number"),
    (0x0018, 0x1004, b"LO", "Plate ID"),
    (0x0018, 0x1020, b"LO", "Software Versions"),
    (0x0018, 0x1030, b"LO", "Protocol Name"),
    (0x0018, 0x1164, b"DS", "Imager Pixel Spacing"),
    (0x0018, 0x5101, b"CS", "View Position"),
    (0x0020, 0x000D, b"UI", "Study Instance UID"),
    (0x0020, 0x000E, b"UI", "Series Instance UID"),
    (0x0020, 0x0010, b"SH", "Study ID"),
    (0x0020, 0x0011, b"IS", "Series Number"),
    (0x0020, 0x0012, b"IS", "Acquisition Number"),
    (0x0020, 0x0013, b"IS", "Instance Number"),
    (0x0020, 0x0020, b"CS", "Patient Orientation"),
    (0x0020, 0x0032, b"DS", "Image Position (Patient)"),
    (0x0020, 0x0037, b"DS", "Image Orientation (Patient)"),
    (0x0020, 0x0052, b"UI", "Frame of Reference UID"),
    (0x0020, 0x0060, b"CS", "Laterality"),
    (0x0020, 0x0062, b"CS", "Image Laterality"),
    (0x0020, 0x1040, b"LO", "Position Reference Indicator"),
    (0x0020, 0x4000, b"LT", "Image Comments"),
    (0x0028, 0x0002, b"US", "Samples per Pixel"),
    (0x0028, 0x0004, b"CS", "Photometric Interpretation"),
    (0x0028, 0x0008, b"IS", "Number of Frames"),
    (0x0028, 0x0010, b"US", "Rows"),
    (0x0028, 0x0011, b"US", "Columns"),
    (0x0028, 0x0030, b"DS", "Pixel Spacing"),
    (0x0028, 0x0100, b"US", "Bits Allocated"),
    (0x0028, 0x0101, b"US", "Bits Stored"),
    (0x0028, 0x0102, b"US", "High Bit"),
    (0x0028, 0x0103, b"US", "Pixel Representation"),
    (0x0028, 0x0301, b"CS", "Burned In Annotation"),
    (0x0028, 0x1040, b"CS", "Pixel Intensity Relationship"),
    (0x0028, 0x1041, b"SS", "Pixel Intensity Relationship Sign"),
    (0x0028, 0x1050, b"DS", "Window Center"),
    (0x0028, 0x1051, b"DS", "Window Width"),
    (0x0028, 0x1052, b"DS", "Rescale Intercept"),
    (0x0028, 0x1053, b"DS", "Rescale Slope"),
    (0x0028, 0x2110, b"CS", "Lossy Image Compression"),
    (0x0032, 0x1060, b"LO", "Requested Procedure Description"),
    (0x0040, 0x0244, b"DA", "Performed Procedure Step Start Date"),
    (0x0040, 0x0253, b"SH", "Performed Procedure Step ID"),
    (0x0040, 0x0275, b"SQ", "Request Attributes Sequence"),
    (0x0040, 0x1001, b"SH", "Requested Procedure ID"),
    (0x0040, 0xA040, b"CS", "Value Type"),
    (0x0040, 0xA491, b"CS", "Completion Flag"),
    (0x0040, 0xA493, b"CS", "Verification Flag"),
    (0x0040, 0xA730, b"SQ", "Content Sequence"),
    (0x0054, 0x0081, b"US", "Number of Slices"),
    (0x0054, 0x1001, b"CS", "Units"),
    (0x7FE0, 0x0010, b"OW", "Pixel Data"),
];

pub fn lookup(tag: Tag) -> Option<&'static Entry> {
    ENTRIES
        .binary_search_by(|e| e.tag.cmp(&tag))
        .ok()
        .map(|i| &ENTRIES[i])
}

/// VR implied by the dictionary, used when decoding implicit-VR streams.
pub fn vr_of(tag: Tag) -> Option<Vr> {
    if tag.element == 0x0000 {
        return Some(Vr::UL);
    }
    if tag.is_private_creator() {
        return Some(Vr::LO);
    }
    lookup(tag).map(|e| e.vr)
}

/// Human-readable attribute name; private and unknown tags get generic labels.
pub fn name_of(tag: Tag) -> &'static str {
    match lookup(tag) {
        Some(e) => e.name,
        None if tag.is_private_creator() => "Private Creator",
        None if tag.is_private() => "Private Tag",
        None => "Unknown Tag",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_sorted_for_binary_search() {
        assert!(ENTRIES.windows(2).all(|w| w[0].tag < w[1].tag));
    }

    #[test]
    fn names_and_vrs() {
        assert_eq!(name_of(Tag::new(0x0008, 0x0050)), "Accession Number");
        assert_eq!(vr_of(Tag::new(0x0010, 0x0010)), Some(Vr::PN));
        assert_eq!(vr_of(Tag::new(0x0009, 0x0010)), Some(Vr::LO));
        assert_eq!(vr_of(Tag::new(0x0009, 0x1001)), None);
        assert_eq!(name_of(Tag::new(0x0009, 0x1001)), "Private Tag");
    }
}
