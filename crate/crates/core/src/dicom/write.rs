use std::path::Path;

use super::{tags, DataElement, DataSet, DicomError, DicomFile, Tag, Value, Vr, EXPLICIT_VR_LE};

const IMPLEMENTATION_CLASS_UID: &str = "2.999.7317.1";
const IMPLEMENTATION_VERSION: &str = "DEIDBENCH_01";

/// Encodes a file as Part-10 explicit-VR little endian with defined lengths
/// everywhere. Output depends only on the in-memory content.
///
/// The meta group is normalized: group length is recomputed, the transfer
/// syntax is set to explicit VR little endian, and the media storage UIDs
/// mirror the data set's SOP class and instance UIDs.
pub fn serialize_file(file: &DicomFile) -> Result<Vec<u8>, DicomError> {
    let meta = normalized_meta(file);
    let mut meta_body = Vec::new();
    write_dataset(&meta, &mut meta_body)?;

    let mut out = vec![0u8; 128];
    out.extend_from_slice(b"DICM");
    write_element(&DataElement::binary(Tag::new(2, 0), Vr::UL, (meta_body.len() as u32).to_le_bytes().to_vec()), &mut out)?;
    out.extend_from_slice(&meta_body);
    write_dataset(&file.dataset, &mut out)?;
    Ok(out)
}

pub fn write_file(file: &DicomFile, path: impl AsRef<Path>) -> Result<(), DicomError> {
    let bytes = serialize_file(file)?;
    if let Some(parent) = path.as_ref().parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn normalized_meta(file: &DicomFile) -> DataSet {
    let mut meta: DataSet = file
        .meta
        .iter()
        .filter(|el| el.tag.group == 0x0002 && el.tag.element != 0)
        .cloned()
        .collect();
    if meta.get(Tag::new(2, 1)).is_none() {
        meta.put(DataElement::binary(Tag::new(2, 1), Vr::OB, vec![0, 1]));
    }
    match file.sop_class_uid() {
        Some(uid) => meta.put(DataElement::text(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, uid)),
        None => {
            meta.take(tags::MEDIA_STORAGE_SOP_CLASS_UID);
        }
    }
    match file.sop_instance_uid() {
        Some(uid) => meta.put(DataElement::text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, uid)),
        None => {
            meta.take(tags::MEDIA_STORAGE_SOP_INSTANCE_UID);
        }
    }
    meta.put(DataElement::text(tags::TRANSFER_SYNTAX_UID, Vr::UI, EXPLICIT_VR_LE));
    if meta.get(Tag::new(2, 0x12)).is_none() {
        meta.put(DataElement::text(Tag::new(2, 0x12), Vr::UI, IMPLEMENTATION_CLASS_UID));
        meta.put(DataElement::text(Tag::new(2, 0x13), Vr::SH, IMPLEMENTATION_VERSION));
    }
    meta
}

fn write_dataset(ds: &DataSet, out: &mut Vec<u8>) -> Result<(), DicomError> {
    for el in ds.iter() {
        write_element(el, out)?;
    }
    Ok(())
}

fn value_bytes(el: &DataElement) -> Result<Vec<u8>, DicomError> {
    let mismatch = || DicomError::VrValueMismatch { tag: el.tag, vr: el.vr };
    let mut bytes = match (&el.value, el.vr) {
        (Value::Empty, _) => Vec::new(),
        (Value::Sequence(items), Vr::SQ) => {
            let mut out = Vec::new();
            for item in items {
                let mut body = Vec::new();
                write_dataset(item, &mut body)?;
                out.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0]);
                out.extend_from_slice(&len_u32(el.tag, body.len())?.to_le_bytes());
                out.extend_from_slice(&body);
            }
            return Ok(out);
        }
        (Value::Sequence(_), _) | (_, Vr::SQ) => return Err(mismatch()),
        (Value::Text(t), vr) if vr.is_text() => t.as_bytes().to_vec(),
        (Value::Text(_), _) => return Err(mismatch()),
        (Value::Binary(b), _) => b.clone(),
    };
    if bytes.len() % 2 == 1 {
        bytes.push(el.vr.padding());
    }
    Ok(bytes)
}

fn len_u32(tag: Tag, len: usize) -> Result<u32, DicomError> {
    u32::try_from(len)
        .ok()
        .filter(|l| *l != u32::MAX)
        .ok_or(DicomError::ValueLengthOverflow { tag, len })
}

fn write_element(el: &DataElement, out: &mut Vec<u8>) -> Result<(), DicomError> {
    let bytes = value_bytes(el)?;
    out.extend_from_slice(&el.tag.group.to_le_bytes());
    out.extend_from_slice(&el.tag.element.to_le_bytes());
    out.extend_from_slice(&el.vr.as_bytes());
    if el.vr.has_long_length() {
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&len_u32(el.tag, bytes.len())?.to_le_bytes());
    } else {
        let len = u16::try_from(bytes.len()).map_err(|_| DicomError::ValueLengthOverflow {
            tag: el.tag,
            len: bytes.len(),
        })?;
        out.extend_from_slice(&len.to_le_bytes());
    }
    out.extend_from_slice(&bytes);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{parse_file, ParseOptions};

    fn file_with(elements: Vec<DataElement>) -> DicomFile {
        DicomFile::new(elements.into_iter().collect())
    }

    fn body_of(bytes: &[u8]) -> &[u8] {
        // preamble + magic + (0002,0000) UL element, then meta body of the stated length
        let group_len = u32::from_le_bytes(bytes[140..144].try_into().unwrap()) as usize;
        &bytes[144 + group_len..]
    }

    #[test]
    fn zero_length_short_vr_is_eight_bytes() {
        let f = file_with(vec![DataElement::text(tags::PATIENT_NAME, Vr::PN, "")]);
        let bytes = serialize_file(&f).unwrap();
        assert_eq!(body_of(&bytes), &[0x10, 0x00, 0x10, 0x00, b'P', b'N', 0, 0]);
    }

    #[test]
    fn odd_values_are_padded() {
        let f = file_with(vec![
            DataElement::text(tags::PATIENT_NAME, Vr::PN, "ABC"),
            DataElement::text(tags::SOP_INSTANCE_UID, Vr::UI, "1.2.3"),
        ]);
        let bytes = serialize_file(&f).unwrap();
        let body = body_of(&bytes);
        assert_eq!(&body[..12], &[0x08, 0, 0x18, 0, b'U', b'I', 6, 0, b'1', b'.', b'2', b'.']);
        assert_eq!(&body[12..14], b"3\0");
        assert_eq!(&body[22..26], b"ABC ");
    }

    #[test]
    fn deterministic_and_round_trips() {
        let f = file_with(vec![
            DataElement::text(tags::PATIENT_NAME, Vr::PN, "SANCHEZ^TIM"),
            DataElement::text(tags::SOP_CLASS_UID, Vr::UI, "1.2.840.10008.5.1.4.1.1.2"),
            DataElement::text(tags::SOP_INSTANCE_UID, Vr::UI, "2.999.1.2.3"),
            DataElement::sequence(
                Tag::new(0x0008, 0x1140),
                vec![[DataElement::text(Tag::new(0x0008, 0x1155), Vr::UI, "2.999.1")].into_iter().collect()],
            ),
            DataElement::binary(Tag::new(0x0009, 0x1001), Vr::UN, vec![1, 2, 3, 4]),
        ]);
        let a = serialize_file(&f).unwrap();
        let b = serialize_file(&f).unwrap();
        assert_eq!(a, b);
        let parsed = parse_file(&a, ParseOptions::default()).unwrap();
        assert_eq!(parsed.dataset, f.dataset);
        assert_eq!(serialize_file(&parsed).unwrap(), a);
        assert_eq!(parsed.meta.text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID).unwrap(), "2.999.1.2.3");
    }

    #[test]
    fn vr_value_mismatch_and_overflow() {
        let bad = file_with(vec![DataElement {
            tag: tags::ROWS,
            vr: Vr::US,
            value: Value::Text("12".into()),
        }]);
        assert!(matches!(serialize_file(&bad), Err(DicomError::VrValueMismatch { .. })));
        let long = file_with(vec![DataElement::text(tags::PATIENT_NAME, Vr::PN, "X".repeat(70_000))]);
        assert!(matches!(serialize_file(&long), Err(DicomError::ValueLengthOverflow { .. })));
    }
}
