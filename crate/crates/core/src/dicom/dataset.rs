use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{dictionary, DicomError, PathSegment, Tag, TagPath, Vr};

/// Value held by a data element.
///
/// Multi-valued strings stay backslash-joined inside `Text`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Empty,
    Text(String),
    Binary(Vec<u8>),
    Sequence(Vec<DataSet>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataElement {
    pub tag: Tag,
    pub vr: Vr,
    pub value: Value,
}

impl DataElement {
    /// A text element. Trailing padding is stripped so that the stored value
    /// is what the writer will re-pad.
    pub fn text(tag: Tag, vr: Vr, text: impl Into<String>) -> Self {
        let text = text.into();
        let trimmed = text.trim_end_matches([' ', '\0']);
        let value = if trimmed.is_empty() {
            Value::Empty
        } else {
            Value::Text(trimmed.to_string())
        };
        Self { tag, vr, value }
    }

    pub fn empty(tag: Tag, vr: Vr) -> Self {
        let value = if vr == Vr::SQ {
            Value::Sequence(Vec::new())
        } else {
            Value::Empty
        };
        Self { tag, vr, value }
    }

    pub fn binary(tag: Tag, vr: Vr, bytes: Vec<u8>) -> Self {
        let value = if bytes.is_empty() {
            Value::Empty
        } else {
            Value::Binary(bytes)
        };
        Self { tag, vr, value }
    }

    pub fn sequence(tag: Tag, items: Vec<DataSet>) -> Self {
        Self {
            tag,
            vr: Vr::SQ,
            value: Value::Sequence(items),
        }
    }

    pub fn u16(tag: Tag, v: u16) -> Self {
        Self::binary(tag, Vr::US, v.to_le_bytes().to_vec())
    }

    pub fn items(&self) -> Option<&[DataSet]> {
        match &self.value {
            Value::Sequence(items) => Some(items),
            _ => None,
        }
    }

    pub fn items_mut(&mut self) -> Option<&mut Vec<DataSet>> {
        match &mut self.value {
            Value::Sequence(items) => Some(items),
            _ => None,
        }
    }

    /// Text rendering of the value, when it has one.
    ///
    /// Binary values of character-string VRs (as kept for private elements)
    /// and printable `UN` payloads decode as text; numeric binary VRs render
    /// as backslash-separated numbers.
    pub fn to_text(&self) -> Option<String> {
        match &self.value {
            Value::Empty => Some(String::new()),
            Value::Text(t) => Some(t.clone()),
            Value::Sequence(_) => None,
            Value::Binary(bytes) => {
                if self.vr.is_text() || self.vr == Vr::UN {
                    let trimmed = trim_padding(bytes);
                    if self.vr == Vr::UN && !trimmed.iter().all(|b| (0x20..0x7f).contains(b)) {
                        return None;
                    }
                    return Some(String::from_utf8_lossy(trimmed).into_owned());
                }
                match self.vr {
                    Vr::US => Some(join(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])))),
                    Vr::SS => Some(join(bytes.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])))),
                    Vr::UL => Some(join(
                        bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])),
                    )),
                    Vr::SL => Some(join(
                        bytes.chunks_exact(4).map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]])),
                    )),
                    _ => None,
                }
            }
        }
    }

    /// First value of an unsigned 16-bit element.
    pub fn as_u16(&self) -> Option<u16> {
        match &self.value {
            Value::Binary(b) if b.len() >= 2 => Some(u16::from_le_bytes([b[0], b[1]])),
            Value::Text(t) => t.split('\\').next()?.trim().parse().ok(),
            _ => None,
        }
    }

    /// True when the element carries no value (zero length or blank text).
    pub fn is_empty(&self) -> bool {
        match &self.value {
            Value::Empty => true,
            Value::Text(t) => t.trim().is_empty(),
            Value::Binary(b) => b.is_empty(),
            Value::Sequence(items) => items.is_empty(),
        }
    }
}

fn trim_padding(bytes: &[u8]) -> &[u8] {
    let end = bytes
        .iter()
        .rposition(|b| *b != b' ' && *b != 0)
        .map_or(0, |i| i + 1);
    &bytes[..end]
}

fn join<T: ToString>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join("\\")
}

/// Tag-ordered collection of elements; one element per tag at each level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DataSet {
    elements: BTreeMap<Tag, DataElement>,
}

impl DataSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataElement> {
        self.elements.values()
    }

    pub fn get(&self, tag: Tag) -> Option<&DataElement> {
        self.elements.get(&tag)
    }

    pub fn get_mut(&mut self, tag: Tag) -> Option<&mut DataElement> {
        self.elements.get_mut(&tag)
    }

    /// Inserts or replaces the element carrying `el.tag`.
    pub fn put(&mut self, el: DataElement) {
        self.elements.insert(el.tag, el);
    }

    pub fn take(&mut self, tag: Tag) -> Option<DataElement> {
        self.elements.remove(&tag)
    }

    /// Text value of a top-level element, if present and textual.
    pub fn text(&self, tag: Tag) -> Option<String> {
        self.get(tag).and_then(DataElement::to_text)
    }

    /// Sets a top-level text element, using the dictionary VR (LO if unknown).
    pub fn put_text(&mut self, tag: Tag, text: impl Into<String>) {
        let vr = dictionary::vr_of(tag).unwrap_or(Vr::LO);
        self.put(DataElement::text(tag, vr, text));
    }

    pub fn get_element(&self, path: &TagPath) -> Option<&DataElement> {
        let (last, init) = path.segments().split_last()?;
        let mut ds = self;
        for seg in init {
            ds = ds.get(seg.tag)?.items()?.get(seg.item?)?;
        }
        ds.get(last.tag)
    }

    pub fn get_element_mut(&mut self, path: &TagPath) -> Option<&mut DataElement> {
        let (last, init) = path.segments().split_last()?;
        let mut ds = self;
        for seg in init {
            ds = ds.get_mut(seg.tag)?.items_mut()?.get_mut(seg.item?)?;
        }
        ds.get_mut(last.tag)
    }

    /// Places `el` at `path`, replacing whatever was there. The element's own
    /// tag is overwritten with the path's terminal tag.
    ///
    /// With `create` set, missing sequences and items on the way are created
    /// (padding with empty items up to the requested index).
    pub fn set_element(&mut self, path: &TagPath, mut el: DataElement, create: bool) -> Result<(), DicomError> {
        let unresolvable = || DicomError::PathUnresolvable(path.to_string());
        let (last, init) = path.segments().split_last().ok_or_else(unresolvable)?;
        let mut ds = self;
        for PathSegment { tag, item } in init {
            let index = item.ok_or_else(unresolvable)?;
            if create {
                let entry = ds
                    .elements
                    .entry(*tag)
                    .or_insert_with(|| DataElement::sequence(*tag, Vec::new()));
                if entry.vr != Vr::SQ || !matches!(entry.value, Value::Sequence(_)) {
                    *entry = DataElement::sequence(*tag, Vec::new());
                }
                let items = entry.items_mut().ok_or_else(unresolvable)?;
                if items.len() <= index {
                    items.resize_with(index + 1, DataSet::new);
                }
                ds = &mut items[index];
            } else {
                ds = ds
                    .get_mut(*tag)
                    .and_then(DataElement::items_mut)
                    .and_then(|items| items.get_mut(index))
                    .ok_or_else(unresolvable)?;
            }
        }
        el.tag = last.tag;
        ds.put(el);
        Ok(())
    }

    /// Removes the element at `path`; a no-op when absent.
    pub fn remove_element(&mut self, path: &TagPath) -> Option<DataElement> {
        let (last, init) = path.segments().split_last()?;
        let mut ds = self;
        for seg in init {
            ds = ds.get_mut(seg.tag)?.items_mut()?.get_mut(seg.item?)?;
        }
        ds.take(last.tag)
    }

    /// Depth-first, tag-ordered traversal. A sequence element is yielded
    /// before the contents of its items.
    pub fn walk(&self) -> Vec<(TagPath, &DataElement)> {
        let mut out = Vec::new();
        walk_into(self, &[], &mut out);
        out
    }
}

fn walk_into<'a>(ds: &'a DataSet, prefix: &[PathSegment], out: &mut Vec<(TagPath, &'a DataElement)>) {
    for el in ds.iter() {
        let mut segments = prefix.to_vec();
        segments.push(PathSegment { tag: el.tag, item: None });
        out.push((TagPath::from_segments(segments.clone()).expect("walk builds valid paths"), el));
        if let Some(items) = el.items() {
            for (i, item) in items.iter().enumerate() {
                let last = segments.len() - 1;
                segments[last].item = Some(i);
                walk_into(item, &segments, out);
            }
        }
    }
}

impl FromIterator<DataElement> for DataSet {
    fn from_iter<I: IntoIterator<Item = DataElement>>(iter: I) -> Self {
        let mut ds = DataSet::new();
        for el in iter {
            ds.put(el);
        }
        ds
    }
}

/// A Part-10 file: meta group, main data set, and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct DicomFile {
    pub meta: DataSet,
    pub dataset: DataSet,
    pub transfer_syntax: String,
    pub source_path: PathBuf,
}

impl DicomFile {
    pub fn new(dataset: DataSet) -> Self {
        Self {
            meta: DataSet::new(),
            dataset,
            transfer_syntax: super::EXPLICIT_VR_LE.to_string(),
            source_path: PathBuf::new(),
        }
    }

    fn uid(&self, tag: Tag) -> Option<String> {
        self.dataset.text(tag).filter(|s| !s.is_empty())
    }

    pub fn sop_instance_uid(&self) -> Option<String> {
        self.uid(super::tags::SOP_INSTANCE_UID)
    }

    pub fn sop_class_uid(&self) -> Option<String> {
        self.uid(super::tags::SOP_CLASS_UID)
    }

    pub fn study_uid(&self) -> Option<String> {
        self.uid(super::tags::STUDY_INSTANCE_UID)
    }

    pub fn series_uid(&self) -> Option<String> {
        self.uid(super::tags::SERIES_INSTANCE_UID)
    }

    pub fn patient_id(&self) -> Option<String> {
        self.dataset.text(super::tags::PATIENT_ID)
    }

    pub fn modality(&self) -> Option<String> {
        self.dataset.text(super::tags::MODALITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::tags;

    fn t(g: u16, e: u16) -> Tag {
        Tag::new(g, e)
    }

    fn nested() -> DataSet {
        let item = |acc: &str| {
            [
                DataElement::text(t(8, 0x50), Vr::SH, acc),
                DataElement::text(t(0x40, 0x1001), Vr::SH, "RP1"),
                DataElement::text(t(0x32, 0x1060), Vr::LO, "CHEST"),
            ]
            .into_iter()
            .collect::<DataSet>()
        };
        let mut ds = DataSet::new();
        ds.put(DataElement::text(tags::ACCESSION_NUMBER, Vr::SH, "20180805E673674"));
        ds.put(DataElement::sequence(t(0x40, 0x275), vec![item("A1"), item("A2"), item("A3")]));
        ds
    }

    #[test]
    fn flat_and_nested_get() {
        let ds = nested();
        let acc = ds.get_element(&TagPath::root(tags::ACCESSION_NUMBER)).unwrap();
        assert_eq!(acc.to_text().unwrap(), "20180805E673674");
        let p: TagPath = "(0040,0275)[0]/(0008,0050)".parse().unwrap();
        assert_eq!(ds.get_element(&p).unwrap().to_text().unwrap(), "A1");
        assert!(ds.get_element(&TagPath::root(tags::PATIENT_NAME)).is_none());
        let out_of_range: TagPath = "(0040,0275)[7]/(0008,0050)".parse().unwrap();
        assert!(ds.get_element(&out_of_range).is_none());
    }

    #[test]
    fn set_then_get_and_overwrite() {
        let mut ds = DataSet::new();
        let p = TagPath::root(tags::PATIENT_BIRTH_DATE);
        ds.set_element(&p, DataElement::text(tags::PATIENT_BIRTH_DATE, Vr::DA, "19720701"), false)
            .unwrap();
        assert_eq!(ds.get_element(&p).unwrap().to_text().unwrap(), "19720701");
        ds.set_element(&p, DataElement::text(tags::PATIENT_BIRTH_DATE, Vr::DA, "19720702"), false)
            .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.text(tags::PATIENT_BIRTH_DATE).unwrap(), "19720702");
    }

    #[test]
    fn set_inside_middle_item_leaves_neighbours() {
        let before = nested();
        let mut ds = before.clone();
        let p: TagPath = "(0040,0275)[1]/(0008,0050)".parse().unwrap();
        ds.set_element(&p, DataElement::text(t(8, 0x50), Vr::SH, "NEW"), false).unwrap();
        let items_before = before.get(t(0x40, 0x275)).unwrap().items().unwrap();
        let items_after = ds.get(t(0x40, 0x275)).unwrap().items().unwrap();
        assert_eq!(items_before[0], items_after[0]);
        assert_eq!(items_before[2], items_after[2]);
        assert_ne!(items_before[1], items_after[1]);
    }

    #[test]
    fn set_needs_create_for_missing_items() {
        let mut ds = DataSet::new();
        let p: TagPath = "(0040,0275)[1]/(0008,0050)".parse().unwrap();
        let el = DataElement::text(t(8, 0x50), Vr::SH, "X");
        assert!(matches!(
            ds.set_element(&p, el.clone(), false),
            Err(DicomError::PathUnresolvable(_))
        ));
        ds.set_element(&p, el, true).unwrap();
        assert_eq!(ds.get(t(0x40, 0x275)).unwrap().items().unwrap().len(), 2);
        assert_eq!(ds.get_element(&p).unwrap().to_text().unwrap(), "X");
    }

    #[test]
    fn remove_is_idempotent_and_drops_subtrees() {
        let mut ds = nested();
        assert_eq!(ds.walk().len(), 1 + 1 + 9);
        ds.remove_element(&TagPath::root(t(0x40, 0x275)));
        assert_eq!(ds.walk().len(), 1);
        let once = ds.clone();
        ds.remove_element(&TagPath::root(t(0x40, 0x275)));
        assert_eq!(ds, once);
        ds.remove_element(&TagPath::root(tags::ACCESSION_NUMBER));
        assert!(ds.get_element(&TagPath::root(tags::ACCESSION_NUMBER)).is_none());
    }

    #[test]
    fn walk_counts_and_order() {
        let flat: DataSet = (0..10u16).map(|e| DataElement::text(t(0x11, 10 - e), Vr::LO, "v")).collect();
        let walked = flat.walk();
        assert_eq!(walked.len(), 10);
        assert!(walked.windows(2).all(|w| w[0].1.tag < w[1].1.tag));

        let leaf3 = || -> DataSet {
            (1..=3u16).map(|e| DataElement::text(t(0x11, e), Vr::LO, "v")).collect()
        };
        let mut sq = DataSet::new();
        sq.put(DataElement::sequence(t(0x40, 0x275), vec![leaf3(), leaf3()]));
        let walked = sq.walk();
        assert_eq!(walked.len(), 7);
        assert_eq!(walked[4].0.to_string(), "(0040,0275)[1]/(0011,0001)");
        assert!(DataSet::new().walk().is_empty());
    }

    #[test]
    fn empty_is_distinct_from_absent() {
        let mut ds = DataSet::new();
        ds.put(DataElement::text(tags::PATIENT_NAME, Vr::PN, ""));
        let el = ds.get(tags::PATIENT_NAME).unwrap();
        assert_eq!(el.value, Value::Empty);
        assert!(el.is_empty());
        assert!(ds.get(tags::PATIENT_ID).is_none());
    }

    #[test]
    fn binary_text_vrs_decode() {
        let el = DataElement::binary(t(9, 0x1001), Vr::LO, b"RECON A ".to_vec());
        assert_eq!(el.to_text().unwrap(), "RECON A");
        let un = DataElement::binary(t(9, 0x1002), Vr::UN, vec![0, 1, 2, 3]);
        assert!(un.to_text().is_none());
        let us = DataElement::u16(tags::ROWS, 512);
        assert_eq!(us.to_text().unwrap(), "512");
        assert_eq!(us.as_u16(), Some(512));
    }
}
