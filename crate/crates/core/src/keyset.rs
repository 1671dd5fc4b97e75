//! Answer key and identifier mapping tables: types, CSV persistence and
//! integrity checks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{tags, Tag, TagPath};
use crate::pixel::{BurnInRecord, RegionDigest};

pub const ANSWER_KEY_HEADER: [&str; 10] = [
    "UID",
    "Scope",
    "Tag",
    "Name",
    "FileValue",
    "Action",
    "ActionText",
    "Category",
    "Subcategory",
    "PixelGeometry",
];
pub const MAPPING_HEADER: [&str; 2] = ["id_old", "id_new"];

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: unknown action {action:?}")]
    UnknownAction { line: u64, action: String },
    #[error("line {line}: bad tag syntax {tag:?}")]
    BadTagSyntax { line: u64, tag: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    BadHeader { expected: Vec<String>, found: Vec<String> },
    #[error("line {line}: old id {id:?} appears twice")]
    DuplicateOldId { line: u64, id: String },
    #[error("line {line}: new id {id:?} already assigned to another old id")]
    CollisionNewId { line: u64, id: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(s.to_string()),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(|s| serde::de::Error::custom(format!("unknown {} {s:?}", stringify!($name))))
            }
        }
    };
}

string_enum!(
    /// Expected transformation of one element.
    ActionType {
        DateShifted => "date_shifted",
        PatidConsistent => "patid_consistent",
        PixelsHidden => "pixels_hidden",
        PixelsRetained => "pixels_retained",
        TagRetained => "tag_retained",
        TextNotnull => "text_notnull",
        TextRemoved => "text_removed",
        TextRetained => "text_retained",
        UidChanged => "uid_changed",
        UidConsistent => "uid_consistent",
    }
);

impl ActionType {
    pub fn is_pixel(self) -> bool {
        matches!(self, ActionType::PixelsHidden | ActionType::PixelsRetained)
    }

    pub fn needs_action_text(self) -> bool {
        matches!(self, ActionType::TextRemoved | ActionType::TextRetained)
    }
}

string_enum!(
    /// Information entity a value belongs to.
    Scope {
        Study => "Study",
        Series => "Series",
        Instance => "Instance",
    }
);

string_enum!(Category {
    Hipaa => "HIPAA",
    Dicom => "DICOM",
    Tcia => "TCIA",
});

const P15_ACTION_CODES: &[&str] = &["D", "Z", "X", "K", "C", "U", "Z/D", "X/Z", "X/D", "X/Z/D", "X/Z/U"];
const P15_OPTIONS: &[&str] = &["BASIC", "SAFE", "DEV", "PAT", "MOD", "DESC", "PIX"];

/// Whether `sub` follows the subcategory vocabulary of its category.
pub fn subcategory_is_known(category: Category, sub: &str) -> bool {
    let action_code = |c: &str| P15_ACTION_CODES.contains(&c);
    match category {
        Category::Hipaa => sub
            .strip_prefix("HIPAA-")
            .is_some_and(|c| c.len() == 1 && (b'A'..=b'R').contains(&c.as_bytes()[0])),
        Category::Dicom => {
            if let Some(t) = sub.strip_prefix("DICOM-IOD-") {
                matches!(t, "1" | "2" | "3" | "1C" | "2C")
            } else {
                sub.strip_prefix("DICOM-P15-").is_some_and(action_code)
            }
        }
        Category::Tcia => {
            if sub == "TCIA-REV" {
                return true;
            }
            if let Some(c) = sub.strip_prefix("TCIA-PTKB-") {
                return action_code(c);
            }
            sub.strip_prefix("TCIA-P15-")
                .and_then(|rest| rest.split_once('-'))
                .is_some_and(|(opt, c)| P15_OPTIONS.contains(&opt) && action_code(c))
        }
    }
}

/// Geometry attached to a pixel action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PixelGeometry {
    BurnIn(BurnInRecord),
    Region(RegionDigest),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerEntry {
    pub sop_instance_uid: String,
    pub scope: Scope,
    pub tag_path: TagPath,
    pub tag_name: String,
    pub file_value: String,
    pub action: ActionType,
    pub action_text: String,
    pub category: Category,
    pub subcategory: String,
    pub pixel_geometry: Option<PixelGeometry>,
}

#[derive(Serialize, Deserialize)]
struct AnswerRow {
    #[serde(rename = "UID")]
    uid: String,
    #[serde(rename = "Scope")]
    scope: String,
    #[serde(rename = "Tag")]
    tag: String,
    #[serde(rename = "Name")]
    name: String,
    #[serde(rename = "FileValue")]
    file_value: String,
    #[serde(rename = "Action")]
    action: String,
    #[serde(rename = "ActionText")]
    action_text: String,
    #[serde(rename = "Category")]
    category: String,
    #[serde(rename = "Subcategory")]
    subcategory: String,
    #[serde(rename = "PixelGeometry")]
    pixel_geometry: String,
}

/// Entries in file order plus an index by SOP Instance UID.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerKey {
    entries: Vec<AnswerEntry>,
    index: BTreeMap<String, Vec<usize>>,
}

impl AnswerKey {
    pub fn new(entries: Vec<AnswerEntry>) -> Self {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            index.entry(e.sop_instance_uid.clone()).or_default().push(i);
        }
        Self { entries, index }
    }

    pub fn entries(&self) -> &[AnswerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Positions of the entries for one instance, in file order.
    pub fn indices_for(&self, sop_instance_uid: &str) -> &[usize] {
        self.index.get(sop_instance_uid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn for_instance<'a>(&'a self, sop_instance_uid: &str) -> impl Iterator<Item = &'a AnswerEntry> + 'a {
        self.indices_for(sop_instance_uid).iter().map(|i| &self.entries[*i])
    }

    pub fn instance_uids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

pub fn save_answer_key(key: &AnswerKey, path: impl AsRef<Path>) -> Result<(), KeyError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    write_answer_key(key, &mut w)
}

pub fn write_answer_key<W: std::io::Write>(key: &AnswerKey, w: &mut csv::Writer<W>) -> Result<(), KeyError> {
    w.write_record(ANSWER_KEY_HEADER)?;
    for e in key.entries() {
        w.serialize(AnswerRow {
            uid: e.sop_instance_uid.clone(),
            scope: e.scope.to_string(),
            tag: e.tag_path.to_string(),
            name: e.tag_name.clone(),
            file_value: e.file_value.clone(),
            action: e.action.to_string(),
            action_text: e.action_text.clone(),
            category: e.category.to_string(),
            subcategory: e.subcategory.clone(),
            pixel_geometry: match &e.pixel_geometry {
                Some(g) => serde_json::to_string(g).expect("geometry serializes"),
                None => String::new(),
            },
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_answer_key(path: impl AsRef<Path>) -> Result<AnswerKey, KeyError> {
    read_answer_key(std::fs::File::open(path)?)
}

pub fn read_answer_key<R: std::io::Read>(reader: R) -> Result<AnswerKey, KeyError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers()?, &ANSWER_KEY_HEADER)?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| KeyError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: AnswerRow = rec
            .deserialize(None)
            .map_err(|e| KeyError::MalformedRow { line, reason: e.to_string() })?;
        let malformed = |reason: String| KeyError::MalformedRow { line, reason };
        let action = row
            .action
            .parse()
            .map_err(|action| KeyError::UnknownAction { line, action })?;
        let tag_path = row.tag.parse().map_err(|_| KeyError::BadTagSyntax {
            line,
            tag: row.tag.clone(),
        })?;
        let pixel_geometry = if row.pixel_geometry.is_empty() {
            None
        } else {
            Some(serde_json::from_str(&row.pixel_geometry).map_err(|e| malformed(format!("pixel geometry: {e}")))?)
        };
        entries.push(AnswerEntry {
            sop_instance_uid: row.uid,
            scope: row.scope.parse().map_err(|s| malformed(format!("unknown scope {s:?}")))?,
            tag_path,
            tag_name: row.name,
            file_value: row.file_value,
            action,
            action_text: row.action_text,
            category: row.category.parse().map_err(|s| malformed(format!("unknown category {s:?}")))?,
            subcategory: row.subcategory,
            pixel_geometry,
        });
    }
    Ok(AnswerKey::new(entries))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), KeyError> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(KeyError::BadHeader {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.iter().map(str::to_string).collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    PatientId,
    Uid,
}

/// Injective old-to-new identifier map, kept in insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingTable {
    pub kind: MappingKind,
    pairs: Vec<(String, String)>,
    forward: HashMap<String, usize>,
    reverse: HashMap<String, usize>,
}

impl MappingTable {
    pub fn new(kind: MappingKind) -> Self {
        Self {
            kind,
            pairs: Vec::new(),
            forward: HashMap::new(),
            reverse: HashMap::new(),
        }
    }

    pub fn from_pairs(
        kind: MappingKind,
        pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, KeyError> {
        let mut t = Self::new(kind);
        for (i, (old, new)) in pairs.into_iter().enumerate() {
            t.insert_at(old, new, i as u64 + 2)?;
        }
        Ok(t)
    }

    fn insert_at(&mut self, old: String, new: String, line: u64) -> Result<(), KeyError> {
        if self.forward.contains_key(&old) {
            return Err(KeyError::DuplicateOldId { line, id: old });
        }
        if self.reverse.contains_key(&new) {
            return Err(KeyError::CollisionNewId { line, id: new });
        }
        self.forward.insert(old.clone(), self.pairs.len());
        self.reverse.insert(new.clone(), self.pairs.len());
        self.pairs.push((old, new));
        Ok(())
    }

    pub fn insert(&mut self, old: impl Into<String>, new: impl Into<String>) -> Result<(), KeyError> {
        let line = self.pairs.len() as u64 + 2;
        self.insert_at(old.into(), new.into(), line)
    }

    pub fn get(&self, old: &str) -> Option<&str> {
        self.forward.get(old).map(|i| self.pairs[*i].1.as_str())
    }

    pub fn reverse(&self, new: &str) -> Option<&str> {
        self.reverse.get(new).map(|i| self.pairs[*i].0.as_str())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn load_mapping(path: impl AsRef<Path>, kind: MappingKind) -> Result<MappingTable, KeyError> {
    read_mapping(std::fs::File::open(path)?, kind)
}

pub fn read_mapping<R: std::io::Read>(reader: R, kind: MappingKind) -> Result<MappingTable, KeyError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(rdr.headers()?, &MAPPING_HEADER)?;
    let mut table = MappingTable::new(kind);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(KeyError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        table.insert_at(rec[0].to_string(), rec[1].to_string(), line)?;
    }
    Ok(table)
}

pub fn save_mapping(table: &MappingTable, path: impl AsRef<Path>) -> Result<(), KeyError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MAPPING_HEADER)?;
    for (old, new) in table.pairs() {
        w.write_record([old, new])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyDefect {
    /// Zero-based entry position.
    pub entry: usize,
    pub message: String,
}

impl fmt::Display for KeyDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry {}: {}", self.entry, self.message)
    }
}

/// Structural defects that make a key unusable for validation. Unknown
/// subcategory labels are not defects; see [`unknown_subcategories`].
pub fn validate_key(key: &AnswerKey) -> Vec<KeyDefect> {
    let mut defects = Vec::new();
    let mut seen = HashSet::new();
    for (i, e) in key.entries().iter().enumerate() {
        let mut defect = |message: String| defects.push(KeyDefect { entry: i, message });
        if e.sop_instance_uid.is_empty() {
            defect("empty SOP Instance UID".into());
        }
        if e.action.needs_action_text() && e.action_text.trim().is_empty() {
            defect(format!("{} requires action text", e.action));
        }
        match (e.action, &e.pixel_geometry) {
            (ActionType::PixelsHidden, Some(PixelGeometry::BurnIn(_)))
            | (ActionType::PixelsRetained, Some(PixelGeometry::Region(_))) => {}
            (a, None) if a.is_pixel() => defect(format!("{a} without pixel geometry")),
            (a, Some(_)) if a.is_pixel() => defect(format!("{a} with the wrong kind of pixel geometry")),
            (a, Some(_)) => defect(format!("{a} must not carry pixel geometry")),
            _ => {}
        }
        if e.action == ActionType::PatidConsistent && e.tag_path != TagPath::from(tags::PATIENT_ID) {
            defect(format!("patid_consistent on {} instead of {}", e.tag_path, tags::PATIENT_ID));
        }
        if !seen.insert((&e.sop_instance_uid, &e.tag_path, e.action, &e.action_text, &e.pixel_geometry)) {
            defect("duplicate entry".into());
        }
    }
    defects
}

/// Entries whose subcategory label falls outside the known vocabulary.
pub fn unknown_subcategories(key: &AnswerKey) -> Vec<(usize, String)> {
    key.entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| !subcategory_is_known(e.category, &e.subcategory))
        .map(|(i, e)| (i, e.subcategory.clone()))
        .collect()
}

/// Convenience for building a flat tag path.
pub fn flat(tag: Tag) -> TagPath {
    TagPath::from(tag)
}
