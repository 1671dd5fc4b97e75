use std::path::Path;

use super::{dictionary, DataElement, DataSet, DicomError, DicomFile, Tag, Value, Vr};
use super::{EXPLICIT_VR_LE, IMPLICIT_VR_LE};

const ITEM: Tag = Tag::new(0xFFFE, 0xE000);
const ITEM_DELIMITER: Tag = Tag::new(0xFFFE, 0xE00D);
const SEQUENCE_DELIMITER: Tag = Tag::new(0xFFFE, 0xE0DD);
const UNDEFINED: u32 = 0xFFFF_FFFF;

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Accept a bare explicit-VR little-endian data set with no preamble.
    pub lenient: bool,
}

pub fn read_file(path: impl AsRef<Path>, options: ParseOptions) -> Result<DicomFile, DicomError> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut file = parse_file(&bytes, options)?;
    file.source_path = path.as_ref().to_path_buf();
    Ok(file)
}

/// Parses a Part-10 byte stream (or, in lenient mode, a raw explicit-VR
/// little-endian data set).
pub fn parse_file(bytes: &[u8], options: ParseOptions) -> Result<DicomFile, DicomError> {
    let has_magic = bytes.len() >= 132 && &bytes[128..132] == b"DICM";
    if !has_magic {
        if !options.lenient {
            return Err(DicomError::MalformedPreamble);
        }
        let mut reader = Reader::new(bytes, 0, true);
        let dataset = reader.dataset(bytes.len(), false)?;
        return Ok(DicomFile {
            meta: DataSet::new(),
            dataset,
            transfer_syntax: EXPLICIT_VR_LE.to_string(),
            source_path: Default::default(),
        });
    }

    let mut meta_reader = Reader::new(bytes, 132, true);
    let mut meta = DataSet::new();
    while meta_reader.pos + 4 <= bytes.len() && meta_reader.peek_tag()?.group == 0x0002 {
        let el = meta_reader.element()?;
        meta.put(el);
    }
    let transfer_syntax = meta
        .text(super::tags::TRANSFER_SYNTAX_UID)
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| EXPLICIT_VR_LE.to_string());
    let explicit = match transfer_syntax.as_str() {
        EXPLICIT_VR_LE => true,
        IMPLICIT_VR_LE => false,
        other => return Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
    };
    let start = meta_reader.pos;
    let mut reader = Reader::new(bytes, start, explicit);
    let dataset = reader.dataset(bytes.len(), false)?;
    Ok(DicomFile {
        meta,
        dataset,
        transfer_syntax,
        source_path: Default::default(),
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    explicit: bool,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], pos: usize, explicit: bool) -> Self {
        Self { bytes, pos, explicit }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DicomError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or(DicomError::TruncatedElement { offset: self.pos })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<Tag, DicomError> {
        let group = self.u16()?;
        let element = self.u16()?;
        Ok(Tag::new(group, element))
    }

    fn peek_tag(&mut self) -> Result<Tag, DicomError> {
        let save = self.pos;
        let tag = self.tag();
        self.pos = save;
        tag
    }

    /// Reads elements until `end` or, when `in_undefined_item`, until an
    /// item delimiter.
    fn dataset(&mut self, end: usize, in_undefined_item: bool) -> Result<DataSet, DicomError> {
        let mut ds = DataSet::new();
        while self.pos < end {
            if in_undefined_item && self.peek_tag()? == ITEM_DELIMITER {
                self.tag()?;
                self.u32()?;
                return Ok(ds);
            }
            let el = self.element()?;
            ds.put(el);
        }
        if in_undefined_item {
            return Err(DicomError::TruncatedElement { offset: self.pos });
        }
        Ok(ds)
    }

    fn element(&mut self) -> Result<DataElement, DicomError> {
        let offset = self.pos;
        let tag = self.tag()?;
        if tag.group == 0xFFFE {
            return Err(DicomError::Malformed {
                offset,
                reason: format!("unexpected delimiter {tag}"),
            });
        }
        let (vr, len) = if self.explicit || tag.group == 0x0002 {
            let code = self.take(2)?;
            let code = [code[0], code[1]];
            if !Vr::is_valid_code(code) {
                return Err(DicomError::Malformed {
                    offset,
                    reason: format!("invalid VR bytes {code:?} for {tag}"),
                });
            }
            let vr = Vr::from_bytes(code);
            if vr.has_long_length() {
                self.take(2)?;
                (vr, self.u32()?)
            } else {
                (vr, u32::from(self.u16()?))
            }
        } else {
            let vr = dictionary::vr_of(tag).unwrap_or(Vr::UN);
            (vr, self.u32()?)
        };

        if vr == Vr::SQ || (len == UNDEFINED && vr == Vr::UN) {
            let items = self.items(len)?;
            return Ok(DataElement::sequence(tag, items));
        }
        if len == UNDEFINED {
            if tag == super::tags::PIXEL_DATA {
                return Err(DicomError::CompressedPixelsUnsupported);
            }
            return Err(DicomError::Malformed {
                offset,
                reason: format!("undefined length on non-sequence {tag}"),
            });
        }
        let raw = self.take(len as usize)?;
        Ok(decode_value(tag, vr, raw))
    }

    fn items(&mut self, len: u32) -> Result<Vec<DataSet>, DicomError> {
        let mut items = Vec::new();
        let end = if len == UNDEFINED {
            None
        } else {
            Some(self.pos + len as usize)
        };
        loop {
            match end {
                Some(end) if self.pos >= end => break,
                _ => {}
            }
            let offset = self.pos;
            let tag = self.tag()?;
            let item_len = self.u32()?;
            match tag {
                SEQUENCE_DELIMITER if end.is_none() => break,
                ITEM if item_len == UNDEFINED => items.push(self.dataset(usize::MAX, true)?),
                ITEM => {
                    let item_end = self.pos + item_len as usize;
                    if item_end > self.bytes.len() {
                        return Err(DicomError::TruncatedElement { offset });
                    }
                    items.push(self.dataset(item_end, false)?);
                }
                other => {
                    return Err(DicomError::Malformed {
                        offset,
                        reason: format!("expected item, found {other}"),
                    })
                }
            }
        }
        Ok(items)
    }
}

fn decode_value(tag: Tag, vr: Vr, raw: &[u8]) -> DataElement {
    if raw.is_empty() {
        return DataElement { tag, vr, value: Value::Empty };
    }
    let keep_binary = tag.is_private() && !tag.is_private_creator();
    if vr.is_text() && !keep_binary {
        if let Ok(text) = std::str::from_utf8(raw) {
            return DataElement::text(tag, vr, text);
        }
    }
    DataElement {
        tag,
        vr,
        value: Value::Binary(raw.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{serialize_file, tags, TagPath};

    fn explicit_short(tag: Tag, vr: &[u8; 2], value: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&tag.group.to_le_bytes());
        out.extend_from_slice(&tag.element.to_le_bytes());
        out.extend_from_slice(vr);
        out.extend_from_slice(&(value.len() as u16).to_le_bytes());
        out.extend_from_slice(value);
        out
    }

    fn implicit(tag: Tag, value: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&tag.group.to_le_bytes());
        out.extend_from_slice(&tag.element.to_le_bytes());
        out.extend_from_slice(&(value.len() as u32).to_le_bytes());
        out.extend_from_slice(value);
        out
    }

    fn part10(ts: &str, body: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8; 128];
        out.extend_from_slice(b"DICM");
        let mut ts_bytes = ts.as_bytes().to_vec();
        if ts_bytes.len() % 2 == 1 {
            ts_bytes.push(0);
        }
        out.extend(explicit_short(tags::TRANSFER_SYNTAX_UID, b"UI", &ts_bytes));
        out.extend_from_slice(body);
        out
    }

    #[test]
    fn parses_patient_name_explicit() {
        let body = explicit_short(tags::PATIENT_NAME, b"PN", b"SANCHEZ^TIM ");
        let file = parse_file(&part10(EXPLICIT_VR_LE, &body), ParseOptions::default()).unwrap();
        assert_eq!(file.dataset.text(tags::PATIENT_NAME).unwrap(), "SANCHEZ^TIM");
        assert_eq!(file.dataset.get(tags::PATIENT_NAME).unwrap().vr, Vr::PN);
    }

    #[test]
    fn parses_implicit_with_dictionary_vrs() {
        let mut body = implicit(tags::PATIENT_NAME, b"SANCHEZ^TIM ");
        body.extend(implicit(Tag::new(0x0009, 0x1001), b"\x01\x02"));
        let file = parse_file(&part10(IMPLICIT_VR_LE, &body), ParseOptions::default()).unwrap();
        assert_eq!(file.dataset.get(tags::PATIENT_NAME).unwrap().vr, Vr::PN);
        let private = file.dataset.get(Tag::new(0x0009, 0x1001)).unwrap();
        assert_eq!(private.vr, Vr::UN);
        assert_eq!(private.value, Value::Binary(vec![1, 2]));
    }

    #[test]
    fn empty_dataset_after_preamble() {
        let file = parse_file(&part10(EXPLICIT_VR_LE, &[]), ParseOptions::default()).unwrap();
        assert!(file.dataset.is_empty());
    }

    #[test]
    fn preamble_required_unless_lenient() {
        let body = explicit_short(tags::PATIENT_ID, b"LO", b"31780971");
        assert!(matches!(
            parse_file(&body, ParseOptions::default()),
            Err(DicomError::MalformedPreamble)
        ));
        let file = parse_file(&body, ParseOptions { lenient: true }).unwrap();
        assert_eq!(file.dataset.text(tags::PATIENT_ID).unwrap(), "31780971");
    }

    #[test]
    fn truncated_and_unsupported() {
        let mut body = explicit_short(tags::PATIENT_ID, b"LO", b"31780971");
        body.truncate(body.len() - 3);
        assert!(matches!(
            parse_file(&part10(EXPLICIT_VR_LE, &body), ParseOptions::default()),
            Err(DicomError::TruncatedElement { .. })
        ));
        assert!(matches!(
            parse_file(&part10("1.2.840.10008.1.2.4.50", &[]), ParseOptions::default()),
            Err(DicomError::UnsupportedTransferSyntax(_))
        ));
    }

    #[test]
    fn undefined_length_sequences() {
        // (0040,0275) SQ, undefined length, one undefined-length item holding (0008,0050).
        let mut body = Vec::new();
        body.extend_from_slice(&[0x40, 0x00, 0x75, 0x02, b'S', b'Q', 0, 0]);
        body.extend_from_slice(&UNDEFINED.to_le_bytes());
        body.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0]);
        body.extend_from_slice(&UNDEFINED.to_le_bytes());
        body.extend(explicit_short(tags::ACCESSION_NUMBER, b"SH", b"A1"));
        body.extend_from_slice(&[0xFE, 0xFF, 0x0D, 0xE0, 0, 0, 0, 0]);
        body.extend_from_slice(&[0xFE, 0xFF, 0xDD, 0xE0, 0, 0, 0, 0]);
        body.extend(explicit_short(tags::PATIENT_ID, b"LO", b"ID"));
        let file = parse_file(&part10(EXPLICIT_VR_LE, &body), ParseOptions::default()).unwrap();
        let p: TagPath = "(0040,0275)[0]/(0008,0050)".parse().unwrap();
        assert_eq!(file.dataset.get_element(&p).unwrap().to_text().unwrap(), "A1");
        assert_eq!(file.dataset.text(tags::PATIENT_ID).unwrap(), "ID");

        // Re-encoding uses defined lengths; the content survives.
        let again = parse_file(&serialize_file(&file).unwrap(), ParseOptions::default()).unwrap();
        assert_eq!(again.dataset, file.dataset);
    }

    #[test]
    fn encapsulated_pixels_rejected() {
        let mut body = vec![0xE0, 0x7F, 0x10, 0x00, b'O', b'B', 0, 0];
        body.extend_from_slice(&UNDEFINED.to_le_bytes());
        assert!(matches!(
            parse_file(&part10(EXPLICIT_VR_LE, &body), ParseOptions::default()),
            Err(DicomError::CompressedPixelsUnsupported)
        ));
    }
}
