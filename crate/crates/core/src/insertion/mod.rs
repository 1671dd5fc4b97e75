//! Template-driven insertion of synthetic identifiers into clean DICOM
//! files, emitting the answer key and identifier maps alongside.

mod engine;
mod functions;
mod generate;
mod template;

pub use engine::{apply_template, is_instance_uid, series_selected, structural_entries, EntityCache, InsertionLog};
pub use functions::{
    apply_function, identity_field, mint_uid, render_placeholders, shift_date, Inserted, RuleContext,
};
pub use generate::{generate_dataset, GenerationConfig, GenerationSummary, Sidecar, SkippedFile};
pub use template::{
    resolve_template, Condition, Function, InsertionRule, InsertionTemplate, TemplateSet, DEFAULT_TEMPLATE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InsertionError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template inheritance cycle through {0:?}")]
    InheritanceCycle(String),
    #[error("template syntax: {0}")]
    TemplateSyntax(String),
    #[error("template {template:?} rule {rule}: {reason}")]
    BadRule { template: String, rule: usize, reason: String },
    #[error("unknown identity field {0:?}")]
    UnknownField(String),
    #[error("function failure: {0}")]
    FunctionFailure(String),
    #[error("minted UID {0:?} exceeds 64 characters")]
    UidOverflow(String),
    #[error("malformed date {0:?}")]
    MalformedDate(String),
    #[error("cannot resolve path {0}")]
    PathUnresolvable(String),
    #[error("identifier collision: {0}")]
    Collision(String),
    #[error("source directory {0} is not readable")]
    SourceUnreadable(String),
    #[error(transparent)]
    Identity(#[from] crate::identity::IdentityError),
    #[error(transparent)]
    Key(#[from] crate::keyset::KeyError),
    #[error(transparent)]
    Dicom(#[from] crate::dicom::DicomError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
