//! Attribute-type and basic value-encoding checks against a reduced set of
//! IOD definitions, and before/after comparison of the findings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{tags, DataSet, DicomFile, ParseOptions, Tag, TagPath, Vr};
use crate::instance::{corpus_files, InstanceContext};

#[derive(Debug, Error)]
pub enum IodError {
    #[error("IOD spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("IOD spec: unknown module {0:?}")]
    UnknownModule(String),
    #[error("IOD spec: bad tag {0:?}")]
    BadTag(String),
    #[error("IOD spec: bad type code {0:?}")]
    BadType(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeCode {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "1C")]
    OneC,
    #[serde(rename = "2C")]
    TwoC,
}

impl TypeCode {
    fn strength(self) -> u8 {
        match self {
            TypeCode::One => 0,
            TypeCode::OneC => 1,
            TypeCode::Two => 2,
            TypeCode::TwoC => 3,
            TypeCode::Three => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TypeCode::One => "1",
            TypeCode::Two => "2",
            TypeCode::Three => "3",
            TypeCode::OneC => "1C",
            TypeCode::TwoC => "2C",
        }
    }
}

/// Closed set of conditions understood for Type 1C/2C attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    Present(Tag),
    Absent(Tag),
    Equals(Tag, String),
    Modality(Vec<String>),
}

impl Predicate {
    pub fn parse(s: &str) -> Option<Predicate> {
        let (kind, arg) = s.split_once(':')?;
        match kind {
            "present" => arg.parse().ok().map(Predicate::Present),
            "absent" => arg.parse().ok().map(Predicate::Absent),
            "equals" => {
                let (tag, value) = arg.split_once('=')?;
                Some(Predicate::Equals(tag.parse().ok()?, value.to_string()))
            }
            "modality" => Some(Predicate::Modality(arg.split('|').map(str::to_string).collect())),
            _ => None,
        }
    }

    pub fn holds(&self, ds: &DataSet) -> bool {
        match self {
            Predicate::Present(t) => ds.get(*t).is_some(),
            Predicate::Absent(t) => ds.get(*t).is_none(),
            Predicate::Equals(t, v) => ds.text(*t).as_deref() == Some(v.as_str()),
            Predicate::Modality(ms) => ds.text(tags::MODALITY).is_some_and(|m| ms.contains(&m)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeRequirement {
    pub tag: Tag,
    pub type_code: TypeCode,
    pub condition: Option<String>,
    pub module: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iod {
    pub name: String,
    pub sop_class: Option<String>,
    pub requirements: Vec<AttributeRequirement>,
}

#[derive(Clone, Debug)]
pub struct IodSpecs {
    pub iods: Vec<Iod>,
    pub generic: Iod,
}

#[derive(Deserialize)]
struct RawAttr {
    tag: String,
    #[serde(rename = "type")]
    type_code: String,
    condition: Option<String>,
}

#[derive(Deserialize)]
struct RawModule {
    attributes: Vec<RawAttr>,
}

#[derive(Deserialize)]
struct RawIod {
    name: String,
    sop_class: Option<String>,
    modules: Vec<String>,
}

#[derive(Deserialize)]
struct RawSpecs {
    modules: BTreeMap<String, RawModule>,
    generic: RawIod,
    #[serde(default)]
    iods: Vec<RawIod>,
}

impl IodSpecs {
    pub fn bundled() -> &'static IodSpecs {
        static SPECS: OnceLock<IodSpecs> = OnceLock::new();
        SPECS.get_or_init(|| IodSpecs::from_toml(include_str!("../data/iods.toml")).expect("bundled IOD spec parses"))
    }

    pub fn from_toml(text: &str) -> Result<IodSpecs, IodError> {
        let raw: RawSpecs = toml::from_str(text)?;
        let build = |r: &RawIod| -> Result<Iod, IodError> {
            // The strictest requirement wins when modules repeat a tag.
            let mut by_tag: Vec<AttributeRequirement> = Vec::new();
            for m in &r.modules {
                let module = raw.modules.get(m).ok_or_else(|| IodError::UnknownModule(m.clone()))?;
                for a in &module.attributes {
                    let tag: Tag = a.tag.parse().map_err(|_| IodError::BadTag(a.tag.clone()))?;
                    let type_code: TypeCode = toml::Value::String(a.type_code.clone())
                        .try_into()
                        .map_err(|_| IodError::BadType(a.type_code.clone()))?;
                    let req = AttributeRequirement {
                        tag,
                        type_code,
                        condition: a.condition.clone(),
                        module: m.clone(),
                    };
                    match by_tag.iter_mut().find(|x| x.tag == tag) {
                        Some(existing) if type_code.strength() < existing.type_code.strength() => *existing = req,
                        Some(_) => {}
                        None => by_tag.push(req),
                    }
                }
            }
            Ok(Iod {
                name: r.name.clone(),
                sop_class: r.sop_class.clone(),
                requirements: by_tag,
            })
        };
        Ok(IodSpecs {
            iods: raw.iods.iter().map(build).collect::<Result<_, _>>()?,
            generic: build(&raw.generic)?,
        })
    }

    /// Spec for a SOP class, or the generic spec.
    pub fn spec_for(&self, sop_class: Option<&str>) -> &Iod {
        sop_class
            .and_then(|c| self.iods.iter().find(|i| i.sop_class.as_deref() == Some(c)))
            .unwrap_or(&self.generic)
    }
}

/// How a requirement applies to a particular data set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Applied {
    /// Present with a value; the type label (1 or 1C) is carried along.
    Type1(TypeCode),
    Type2(TypeCode),
    NotRequired,
    UnknownCondition,
}

pub fn apply_requirement(req: &AttributeRequirement, ds: &DataSet) -> Applied {
    let conditional = |then: fn(TypeCode) -> Applied| match req.condition.as_deref().map(Predicate::parse) {
        Some(Some(p)) if p.holds(ds) => then(req.type_code),
        Some(Some(_)) => Applied::NotRequired,
        _ => Applied::UnknownCondition,
    };
    match req.type_code {
        TypeCode::One => Applied::Type1(TypeCode::One),
        TypeCode::Two => Applied::Type2(TypeCode::Two),
        TypeCode::Three => Applied::NotRequired,
        TypeCode::OneC => conditional(Applied::Type1),
        TypeCode::TwoC => conditional(Applied::Type2),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    Warning,
    Error,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::Warning => "Warning",
            FindingKind::Error => "Error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceFinding {
    pub kind: FindingKind,
    pub tag: String,
    pub code: String,
    pub message: String,
    pub context: InstanceContext,
}

impl ConformanceFinding {
    pub fn signature(&self) -> (FindingKind, &str, &str) {
        (self.kind, &self.tag, &self.code)
    }
}

fn valid_date(s: &str) -> bool {
    s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) && NaiveDate::parse_from_str(s, "%Y%m%d").is_ok()
}

/// Problem with a UID value, if any.
pub fn uid_problem(uid: &str) -> Option<&'static str> {
    if uid.len() > 64 {
        return Some("uid-too-long");
    }
    let ok = !uid.is_empty()
        && uid.split('.').all(|c| {
            !c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()) && (c.len() == 1 || !c.starts_with('0'))
        });
    (!ok).then_some("uid-invalid")
}

fn value_findings(path: &TagPath, vr: Vr, text: &str, out: &mut Vec<(FindingKind, String, &'static str, String)>) {
    if text.is_empty() {
        return;
    }
    for v in text.split('\\') {
        let problem = match vr {
            Vr::DA if !v.is_empty() && !valid_date(v) => Some(("bad-date", format!("invalid date {v:?}"))),
            Vr::UI => uid_problem(v).map(|c| (c, format!("UID {v:?} ({} chars)", v.len()))),
            Vr::PN if v.split('=').count() > 3 || v.split('=').any(|g| g.split('^').count() > 5) => {
                Some(("pn-structure", format!("person name {v:?} has too many components")))
            }
            _ => None,
        };
        if let Some((code, msg)) = problem {
            out.push((FindingKind::Warning, path.to_string(), code, msg));
        }
    }
}

/// Findings for one file: errors for missing or empty Type 1, warnings for
/// missing Type 2, unknown conditions, and value encoding problems.
pub fn verify_file(file: &DicomFile, specs: &IodSpecs, path: &Path) -> Vec<ConformanceFinding> {
    let ds = &file.dataset;
    let iod = specs.spec_for(file.sop_class_uid().as_deref());
    let mut raw: Vec<(FindingKind, String, &'static str, String)> = Vec::new();
    for req in &iod.requirements {
        let tag = req.tag.to_string();
        let el = ds.get(req.tag);
        match apply_requirement(req, ds) {
            Applied::Type1(t) => match el {
                None => raw.push((
                    FindingKind::Error,
                    tag,
                    "missing-type1",
                    format!("missing Type {} attribute in {} module", t.label(), req.module),
                )),
                Some(e) if e.is_empty() => raw.push((
                    FindingKind::Error,
                    tag,
                    "empty-type1",
                    format!("empty Type {} attribute in {} module", t.label(), req.module),
                )),
                Some(_) => {}
            },
            Applied::Type2(t) if el.is_none() => raw.push((
                FindingKind::Warning,
                tag,
                "missing-type2",
                format!("missing Type {} attribute in {} module", t.label(), req.module),
            )),
            Applied::UnknownCondition => raw.push((
                FindingKind::Warning,
                tag,
                "unknown-condition",
                format!("condition {:?} not understood; treated as Type 3", req.condition.as_deref().unwrap_or("")),
            )),
            _ => {}
        }
    }
    for (p, el) in ds.walk() {
        if let Some(text) = el.to_text() {
            value_findings(&p, el.vr, &text, &mut raw);
        }
    }
    let context = InstanceContext::from_file(file, path);
    raw.into_iter()
        .map(|(kind, tag, code, message)| ConformanceFinding {
            kind,
            tag,
            code: code.to_string(),
            message,
            context: context.clone(),
        })
        .collect()
}

/// Findings keyed by SOP Instance UID.
pub type FindingsByInstance = BTreeMap<String, Vec<ConformanceFinding>>;

/// Findings for every readable file under `root`, keyed by SOP Instance
/// UID, plus the files that could not be parsed.
pub fn verify_corpus(
    root: &Path,
    specs: &IodSpecs,
) -> std::io::Result<(FindingsByInstance, Vec<PathBuf>)> {
    let paths = corpus_files(root)?;
    let parsed: Vec<_> = paths
        .par_iter()
        .map(|p| match crate::dicom::read_file(p, ParseOptions::default()) {
            Ok(f) => Ok((f.sop_instance_uid().unwrap_or_default(), verify_file(&f, specs, p))),
            Err(_) => Err(p.clone()),
        })
        .collect();
    let mut found = BTreeMap::new();
    let mut unreadable = Vec::new();
    for r in parsed {
        match r {
            Ok((uid, f)) => {
                found.insert(uid, f);
            }
            Err(p) => unreadable.push(p),
        }
    }
    Ok((found, unreadable))
}

/// Findings present after but not before, per instance key. Instances with
/// no "before" entry are compared against an empty set.
pub fn compare_conformance(
    before: &BTreeMap<String, Vec<ConformanceFinding>>,
    after: &BTreeMap<String, Vec<ConformanceFinding>>,
) -> Vec<ConformanceFinding> {
    let empty = Vec::new();
    let mut out = Vec::new();
    for (key, found) in after {
        let old: BTreeSet<_> = before.get(key).unwrap_or(&empty).iter().map(|f| f.signature()).collect();
        let mut counted: HashMap<(FindingKind, &str, &str), usize> = HashMap::new();
        for f in found {
            let sig = f.signature();
            let n = counted.entry(sig).or_insert(0);
            *n += 1;
            if !old.contains(&sig) && *n == 1 {
                out.push(f.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::DataElement;

    const CT: &str = "1.2.840.10008.5.1.4.1.1.2";

    fn complete_ct() -> DicomFile {
        let specs = IodSpecs::bundled();
        let mut ds = DataSet::new();
        for req in &specs.spec_for(Some(CT)).requirements {
            let vr = crate::dicom::dictionary::vr_of(req.tag).unwrap_or(Vr::LO);
            let value = match vr {
                Vr::UI => "2.999.1",
                Vr::DA => "20200101",
                Vr::US => "",
                _ => "X",
            };
            let el = if vr == Vr::US {
                DataElement::u16(req.tag, 16)
            } else {
                DataElement::text(req.tag, vr, value)
            };
            ds.put(el);
        }
        ds.put(DataElement::text(tags::SOP_CLASS_UID, Vr::UI, CT));
        DicomFile::new(ds)
    }

    fn codes(f: &DicomFile) -> Vec<String> {
        verify_file(f, IodSpecs::bundled(), Path::new("x.dcm")).into_iter().map(|f| f.code).collect()
    }

    #[test]
    fn bundled_specs_load() {
        let specs = IodSpecs::bundled();
        assert_eq!(specs.iods.len(), 8);
        assert_eq!(specs.spec_for(Some("1.2.3")).name, "Generic");
        let ct = specs.spec_for(Some(CT));
        let modality = ct.requirements.iter().find(|r| r.tag == tags::MODALITY).unwrap();
        assert_eq!(modality.type_code, TypeCode::One);
    }

    #[test]
    fn complete_file_is_clean() {
        assert!(codes(&complete_ct()).is_empty(), "{:?}", codes(&complete_ct()));
    }

    #[test]
    fn missing_modality_is_one_error() {
        let mut f = complete_ct();
        f.dataset.take(tags::MODALITY);
        let found = verify_file(&f, IodSpecs::bundled(), Path::new("x.dcm"));
        let errors: Vec<_> = found.iter().filter(|f| f.kind == FindingKind::Error).collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].tag, "(0008,0060)");
    }

    #[test]
    fn empty_type2_is_allowed() {
        let mut f = complete_ct();
        f.dataset.put(DataElement::text(tags::PATIENT_NAME, Vr::PN, ""));
        assert!(codes(&f).is_empty());
        f.dataset.take(tags::PATIENT_NAME);
        assert_eq!(codes(&f), ["missing-type2"]);
    }

    #[test]
    fn value_checks() {
        let mut f = complete_ct();
        f.dataset.put(DataElement::text(tags::FRAME_OF_REFERENCE_UID, Vr::UI, "1.2".repeat(35)));
        assert_eq!(codes(&f), ["uid-too-long"]);
        f.dataset.put(DataElement::text(tags::FRAME_OF_REFERENCE_UID, Vr::UI, "1.02.3"));
        assert_eq!(codes(&f), ["uid-invalid"]);
        f.dataset.put(DataElement::text(tags::FRAME_OF_REFERENCE_UID, Vr::UI, "1.2.3"));
        f.dataset.put(DataElement::text(tags::STUDY_DATE, Vr::DA, "20230230"));
        assert_eq!(codes(&f), ["bad-date"]);
        f.dataset.put(DataElement::text(tags::STUDY_DATE, Vr::DA, "20230228"));
        f.dataset.put(DataElement::text(tags::PATIENT_NAME, Vr::PN, "A^B^C^D^E^F"));
        assert_eq!(codes(&f), ["pn-structure"]);
    }

    #[test]
    fn conditional_and_unknown_conditions() {
        let spec = r#"
            [modules.m]
            attributes = [
              { tag = "(0028,1050)", type = "1C", condition = "equals:(0008,0068)=FOR PRESENTATION" },
              { tag = "(0020,0020)", type = "2C", condition = "absent:(0020,0037)" },
              { tag = "(0020,0060)", type = "2C", condition = "paired body part" },
            ]
            [generic]
            name = "G"
            modules = ["m"]
        "#;
        let specs = IodSpecs::from_toml(spec).unwrap();
        let mut ds = DataSet::new();
        ds.put(DataElement::text(Tag::new(0x0008, 0x0068), Vr::CS, "FOR PRESENTATION"));
        let f = DicomFile::new(ds);
        let found: Vec<String> = verify_file(&f, &specs, Path::new("a")).into_iter().map(|f| f.code).collect();
        assert_eq!(found, ["missing-type1", "missing-type2", "unknown-condition"]);
        let mut g = f.clone();
        g.dataset.put(DataElement::text(Tag::new(0x0008, 0x0068), Vr::CS, "FOR PROCESSING"));
        g.dataset.put(DataElement::text(Tag::new(0x0020, 0x0037), Vr::DS, "1\\0\\0\\0\\1\\0"));
        let found: Vec<String> = verify_file(&g, &specs, Path::new("a")).into_iter().map(|f| f.code).collect();
        assert_eq!(found, ["unknown-condition"]);
    }

    #[test]
    fn comparison_is_monotone() {
        let f = |code: &str| ConformanceFinding {
            kind: FindingKind::Error,
            tag: "(0008,0060)".into(),
            code: code.into(),
            message: String::new(),
            context: InstanceContext::default(),
        };
        let map = |v: Vec<ConformanceFinding>| BTreeMap::from([("i".to_string(), v)]);
        assert!(compare_conformance(&map(vec![f("a")]), &map(vec![f("a")])).is_empty());
        assert_eq!(compare_conformance(&map(vec![f("a")]), &map(vec![f("a"), f("b")])).len(), 1);
        assert!(compare_conformance(&map(vec![f("a"), f("b")]), &map(vec![f("a")])).is_empty());
        assert_eq!(compare_conformance(&BTreeMap::new(), &map(vec![f("a")])).len(), 1);
    }

    #[test]
    fn deterministic_findings() {
        let mut f = complete_ct();
        f.dataset.take(tags::MODALITY);
        f.dataset.take(tags::PATIENT_ID);
        assert_eq!(codes(&f), codes(&f));
    }
}
