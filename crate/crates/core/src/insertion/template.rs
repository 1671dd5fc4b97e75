//! Declarative insertion templates with single inheritance.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::InsertionError;
use crate::dicom::TagPath;
use crate::keyset::{ActionType, Category, Scope};

/// Closed registry of insertion functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Function {
    CodedUid,
    ShiftedDate,
    IdentityText,
    AddressText,
    FreeText,
    DeviceSerial,
    Url,
    IpAddress,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Set the element, creating it (and any enclosing items) if needed.
    #[default]
    Always,
    OnlyIfPresent,
    /// Only elements that exist with a zero-length value.
    OnlyIfEmpty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InsertionRule {
    pub path: TagPath,
    pub function: Function,
    pub params: BTreeMap<String, String>,
    pub scope: Scope,
    pub condition: Condition,
    /// Share of series the rule applies to, in (0,1].
    pub fraction: f64,
    pub action: ActionType,
    pub category: Category,
    pub subcategory: String,
}

impl InsertionRule {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.get(name).map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InsertionTemplate {
    pub name: String,
    /// Modalities this template is selected for; empty for abstract templates.
    pub modalities: Vec<String>,
    pub parent: Option<String>,
    pub rules: Vec<InsertionRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    path: String,
    function: Function,
    #[serde(default)]
    params: BTreeMap<String, String>,
    scope: String,
    #[serde(default)]
    condition: Condition,
    fraction: Option<f64>,
    action: String,
    category: String,
    subcategory: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    name: String,
    parent: Option<String>,
    #[serde(default)]
    modalities: Vec<String>,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
}

fn parse_scope(s: &str) -> Option<Scope> {
    match s.to_ascii_lowercase().as_str() {
        "study" => Some(Scope::Study),
        "series" => Some(Scope::Series),
        "instance" => Some(Scope::Instance),
        _ => None,
    }
}

impl InsertionTemplate {
    pub fn from_toml(text: &str) -> Result<Self, InsertionError> {
        let raw: RawTemplate = toml::from_str(text).map_err(|e| InsertionError::TemplateSyntax(e.to_string()))?;
        let bad = |rule: usize, what: String| InsertionError::BadRule {
            template: raw.name.clone(),
            rule,
            reason: what,
        };
        let mut rules = Vec::with_capacity(raw.rules.len());
        for (i, r) in raw.rules.iter().enumerate() {
            let fraction = r.fraction.unwrap_or(1.0);
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(bad(i, format!("fraction {fraction} outside (0,1]")));
            }
            rules.push(InsertionRule {
                path: TagPath::from_str(&r.path).map_err(|_| bad(i, format!("bad path {:?}", r.path)))?,
                function: r.function,
                params: r.params.clone(),
                scope: parse_scope(&r.scope).ok_or_else(|| bad(i, format!("bad scope {:?}", r.scope)))?,
                condition: r.condition,
                fraction,
                action: r.action.parse().map_err(|a| bad(i, format!("unknown action {a:?}")))?,
                category: r.category.parse().map_err(|c| bad(i, format!("unknown category {c:?}")))?,
                subcategory: r.subcategory.clone(),
            });
        }
        Ok(InsertionTemplate {
            name: raw.name,
            modalities: raw.modalities,
            parent: raw.parent,
            rules,
        })
    }
}

/// Named templates.
#[derive(Clone, Debug, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, InsertionTemplate>,
}

const BUNDLED: &[&str] = &[
    include_str!("../../templates/base.toml"),
    include_str!("../../templates/ct.toml"),
    include_str!("../../templates/mr.toml"),
    include_str!("../../templates/projection.toml"),
    include_str!("../../templates/cr.toml"),
    include_str!("../../templates/dx.toml"),
    include_str!("../../templates/mg.toml"),
];

/// Template used when no template names a file's modality.
pub const DEFAULT_TEMPLATE: &str = "base";

impl TemplateSet {
    pub fn new(templates: impl IntoIterator<Item = InsertionTemplate>) -> Self {
        Self {
            templates: templates.into_iter().map(|t| (t.name.clone(), t)).collect(),
        }
    }

    pub fn bundled() -> Self {
        Self::new(BUNDLED.iter().map(|t| InsertionTemplate::from_toml(t).expect("bundled template parses")))
    }

    /// Every `*.toml` file in `dir`, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self, InsertionError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            out.push(InsertionTemplate::from_toml(&std::fs::read_to_string(&p)?)?);
        }
        Ok(Self::new(out))
    }

    pub fn get(&self, name: &str) -> Option<&InsertionTemplate> {
        self.templates.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Name of the template selected for a modality, if any declares it.
    pub fn for_modality(&self, modality: &str) -> Option<&str> {
        self.templates
            .values()
            .find(|t| t.modalities.iter().any(|m| m == modality))
            .map(|t| t.name.as_str())
    }
}

/// Flattens a template and its ancestors. Parent rules come first; a child
/// rule with the same path replaces the inherited one in place, otherwise it
/// is appended. `name` may also be a modality.
pub fn resolve_template(name: &str, set: &TemplateSet) -> Result<InsertionTemplate, InsertionError> {
    let start = set
        .get(name)
        .or_else(|| set.for_modality(name).and_then(|n| set.get(n)))
        .ok_or_else(|| InsertionError::UnknownTemplate(name.to_string()))?;
    let mut chain = vec![start];
    let mut seen = BTreeSet::from([start.name.as_str()]);
    while let Some(parent) = chain.last().unwrap().parent.as_deref() {
        if !seen.insert(parent) {
            return Err(InsertionError::InheritanceCycle(parent.to_string()));
        }
        chain.push(set.get(parent).ok_or_else(|| InsertionError::UnknownTemplate(parent.to_string()))?);
    }
    let mut rules: Vec<InsertionRule> = Vec::new();
    for t in chain.iter().rev() {
        for r in &t.rules {
            match rules.iter_mut().find(|e| e.path == r.path) {
                Some(existing) => *existing = r.clone(),
                None => rules.push(r.clone()),
            }
        }
    }
    Ok(InsertionTemplate {
        name: start.name.clone(),
        modalities: start.modalities.clone(),
        parent: None,
        rules,
    })
}
