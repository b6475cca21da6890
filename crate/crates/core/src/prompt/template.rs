//! `{{name}}` templates and the JSON template catalog.
//!
//! A literal `{{` is written as `{{{{`. Templates are parsed once when the
//! catalog loads, so rendering never sees a malformed body.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Layer, TaskKind};

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("unresolved variable `{0}`")]
    UnresolvedVariable(String),
    #[error("malformed template at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

impl Template {
    pub fn parse(body: &str) -> Result<Template, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut pos = 0;
        while pos < body.len() {
            let rest = &body[pos..];
            if rest.starts_with("{{{{") {
                literal.push_str("{{");
                pos += 4;
            } else if let Some(inner) = rest.strip_prefix("{{") {
                let close = inner.find("}}").ok_or(TemplateError::Malformed {
                    offset: pos,
                    reason: "unterminated placeholder",
                })?;
                let name = inner[..close].trim();
                if name.is_empty() || !name.chars().all(is_name_char) {
                    return Err(TemplateError::Malformed { offset: pos, reason: "invalid variable name" });
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Var(name.to_owned()));
                pos += 2 + close + 2;
            } else {
                let ch = rest.chars().next().expect("pos < len");
                literal.push(ch);
                pos += ch.len_utf8();
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { segments })
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Var(v) if seen.insert(v.as_str()) => Some(v.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Substitutes every variable. Extra bindings are ignored; substituted
    /// values are inserted verbatim and never re-scanned.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Var(name) => out.push_str(
                    bindings
                        .get(name)
                        .ok_or_else(|| TemplateError::UnresolvedVariable(name.clone()))?,
                ),
            }
        }
        Ok(out)
    }
}

/// True when `text` contains a `{{...}}` marker.
pub fn has_placeholder_marker(text: &str) -> bool {
    text.find("{{").is_some_and(|i| text[i + 2..].contains("}}"))
}

/// One entry of the on-disk catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_kind: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<Layer>,
    pub body: String,
    pub schema_version: u32,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template `{id}` declares schema version {found}, expected {CATALOG_SCHEMA_VERSION}")]
    SchemaVersion { id: String, found: u32 },
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
    #[error("more than one template for {task:?}/{layer:?}")]
    DuplicateSlot { task: TaskKind, layer: Layer },
    #[error("template `{id}` has a task kind but no layer (or vice versa)")]
    PartialSlot { id: String },
    #[error("template `{id}`: {source}")]
    Template { id: String, source: TemplateError },
}

/// Immutable set of parsed templates, addressable by id and by
/// (task kind, layer) slot.
#[derive(Debug, Clone)]
pub struct TemplateCatalog {
    by_id: HashMap<String, Template>,
    slots: HashMap<(TaskKind, Layer), String>,
}

const BUILTIN_CATALOG: &str = include_str!("../../templates/catalog.en.json");

impl TemplateCatalog {
    /// The English catalog shipped with the crate.
    pub fn builtin() -> TemplateCatalog {
        TemplateCatalog::from_json(BUILTIN_CATALOG).expect("built-in catalog is valid")
    }

    pub fn from_json(json: &str) -> Result<TemplateCatalog, CatalogError> {
        let records: Vec<TemplateRecord> = serde_json::from_str(json)?;
        TemplateCatalog::from_records(records)
    }

    pub fn from_records(records: Vec<TemplateRecord>) -> Result<TemplateCatalog, CatalogError> {
        let mut by_id = HashMap::new();
        let mut slots = HashMap::new();
        for rec in records {
            if rec.schema_version != CATALOG_SCHEMA_VERSION {
                return Err(CatalogError::SchemaVersion { id: rec.id, found: rec.schema_version });
            }
            let template = Template::parse(&rec.body)
                .map_err(|source| CatalogError::Template { id: rec.id.clone(), source })?;
            match (rec.task_kind, rec.layer) {
                (Some(task), Some(layer)) => {
                    if slots.insert((task, layer), rec.id.clone()).is_some() {
                        return Err(CatalogError::DuplicateSlot { task, layer });
                    }
                }
                (None, None) => {}
                _ => return Err(CatalogError::PartialSlot { id: rec.id }),
            }
            if by_id.insert(rec.id.clone(), template).is_some() {
                return Err(CatalogError::DuplicateId(rec.id));
            }
        }
        Ok(TemplateCatalog { by_id, slots })
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.by_id.get(id)
    }

    pub fn slot(&self, task: TaskKind, layer: Layer) -> Option<&Template> {
        self.slots.get(&(task, layer)).and_then(|id| self.by_id.get(id))
    }

    pub fn supports(&self, task: TaskKind) -> bool {
        Layer::ORDER.iter().all(|l| self.slots.contains_key(&(task, *l)))
    }

    pub fn render_template(
        &self,
        template_id: &str,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        self.get(template_id)
            .ok_or_else(|| TemplateError::UnknownTemplate(template_id.to_owned()))?
            .render(bindings)
    }
}
