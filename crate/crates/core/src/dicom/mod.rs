//! In-memory DICOM model: tags, paths, elements, data sets, and Part-10
//! reading and writing for the uncompressed little-endian transfer syntaxes.

mod dataset;
pub mod dictionary;
mod pixels;
mod read;
mod tag;
mod vr;
mod write;

pub use dataset::{DataElement, DataSet, DicomFile, Value};
pub use pixels::{decode_pixels, encode_pixels, PixelBuffer};
pub use read::{parse_file, read_file, ParseOptions};
pub use tag::{PathSegment, Tag, TagPath};
pub use vr::Vr;
pub use write::{serialize_file, write_file};

use thiserror::Error;

pub const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

/// Prefix of UIDs defined by the DICOM standard itself (SOP classes,
/// transfer syntaxes). These are never instance identifiers.
pub const WELL_KNOWN_UID_ROOT: &str = "1.2.840.10008.";

/// Frequently used tags.
pub mod tags {
    use super::Tag;

    pub const TRANSFER_SYNTAX_UID: Tag = Tag::new(0x0002, 0x0010);
    pub const MEDIA_STORAGE_SOP_CLASS_UID: Tag = Tag::new(0x0002, 0x0002);
    pub const MEDIA_STORAGE_SOP_INSTANCE_UID: Tag = Tag::new(0x0002, 0x0003);
    pub const SOP_CLASS_UID: Tag = Tag::new(0x0008, 0x0016);
    pub const SOP_INSTANCE_UID: Tag = Tag::new(0x0008, 0x0018);
    pub const STUDY_DATE: Tag = Tag::new(0x0008, 0x0020);
    pub const SERIES_DATE: Tag = Tag::new(0x0008, 0x0021);
    pub const ACCESSION_NUMBER: Tag = Tag::new(0x0008, 0x0050);
    pub const MODALITY: Tag = Tag::new(0x0008, 0x0060);
    pub const PATIENT_NAME: Tag = Tag::new(0x0010, 0x0010);
    pub const PATIENT_ID: Tag = Tag::new(0x0010, 0x0020);
    pub const PATIENT_BIRTH_DATE: Tag = Tag::new(0x0010, 0x0030);
    pub const STUDY_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000E);
    pub const INSTANCE_NUMBER: Tag = Tag::new(0x0020, 0x0013);
    pub const FRAME_OF_REFERENCE_UID: Tag = Tag::new(0x0020, 0x0052);
    pub const SAMPLES_PER_PIXEL: Tag = Tag::new(0x0028, 0x0002);
    pub const ROWS: Tag = Tag::new(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag::new(0x0028, 0x0011);
    pub const BITS_ALLOCATED: Tag = Tag::new(0x0028, 0x0100);
    pub const BITS_STORED: Tag = Tag::new(0x0028, 0x0101);
    pub const PIXEL_REPRESENTATION: Tag = Tag::new(0x0028, 0x0103);
    pub const PIXEL_DATA: Tag = Tag::new(0x7FE0, 0x0010);
}

#[derive(Debug, Error)]
pub enum DicomError {
    #[error("missing 128-byte preamble and DICM magic")]
    MalformedPreamble,
    #[error("truncated element at byte offset {offset}")]
    TruncatedElement { offset: usize },
    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),
    #[error("malformed element at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("value of {tag} is too long to encode ({len} bytes)")]
    ValueLengthOverflow { tag: Tag, len: usize },
    #[error("value of {tag} does not match VR {vr}")]
    VrValueMismatch { tag: Tag, vr: Vr },
    #[error("path {0} does not resolve to an existing sequence item")]
    PathUnresolvable(String),
    #[error("bad tag syntax {0:?}")]
    BadTag(String),
    #[error("bad tag path syntax {0:?}")]
    BadPath(String),
    #[error("pixel data is compressed or encapsulated")]
    CompressedPixelsUnsupported,
    #[error("absent pixel module: {0}")]
    AbsentPixelModule(String),
    #[error("pixel geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
