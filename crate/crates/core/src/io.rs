//! Versioned JSON documents for every artifact kind.
//!
//! A document is `{"format_version": 1, "kind": ..., "body": ...}`. Parsing
//! checks the envelope, deserializes the body for its kind (unknown fields
//! rejected), then validates the body against its module's invariants.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analysis::{Scenario, ScenarioSet};
use crate::compose::{ComposeError, OobnModel};
use crate::dbn::{DbnError, DbnTemplate};
use crate::management::Catalogue;
use crate::network::{Evidence, Network, NetworkError, NodeSpec};
use crate::pipeline::InterventionSpec;
use crate::probit::TimeSeriesDataset;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: String },
}

impl IoError {
    fn schema(path: impl Into<String>, message: impl fmt::Display) -> Self {
        IoError::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocumentKind {
    Network,
    Oobn,
    DbnTemplate,
    ScenarioSet,
    Catalogue,
    Intervention,
    Dataset,
}

impl DocumentKind {
    pub const ALL: [DocumentKind; 7] = [
        DocumentKind::Network,
        DocumentKind::Oobn,
        DocumentKind::DbnTemplate,
        DocumentKind::ScenarioSet,
        DocumentKind::Catalogue,
        DocumentKind::Intervention,
        DocumentKind::Dataset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DocumentKind::Network => "network",
            DocumentKind::Oobn => "oobn",
            DocumentKind::DbnTemplate => "dbn-template",
            DocumentKind::ScenarioSet => "scenario-set",
            DocumentKind::Catalogue => "catalogue",
            DocumentKind::Intervention => "intervention",
            DocumentKind::Dataset => "dataset",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for DocumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Plain network with optional query defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBody {
    pub nodes: Vec<NodeSpec>,
    /// Node queried when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Evidence applied by `query` unless disabled.
    #[serde(default, skip_serializing_if = "Evidence::is_empty")]
    pub default_evidence: Evidence,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OobnBody {
    pub model: OobnModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Evidence::is_empty")]
    pub default_evidence: Evidence,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbnBody {
    pub template: DbnTemplate,
    /// Slice-local node name queried per slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Evidence on unrolled (`label.node`) names.
    #[serde(default, skip_serializing_if = "Evidence::is_empty")]
    pub baseline_evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Network(NetworkBody),
    Oobn(OobnBody),
    DbnTemplate(DbnBody),
    ScenarioSet(ScenarioSet),
    Catalogue(Catalogue),
    Intervention(InterventionSpec),
    Dataset(TimeSeriesDataset),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub format_version: u64,
    pub body: ModelBody,
}

/// Network-valued document ready for queries.
#[derive(Debug, Clone)]
pub struct ScienceModel {
    pub network: Network,
    pub target: Option<String>,
    pub default_evidence: Evidence,
    pub scenarios: ScenarioSet,
    /// Instance name → flattened node names (OOBN documents only).
    pub groups: BTreeMap<String, Vec<String>>,
}

impl ModelDocument {
    pub fn new(body: ModelBody) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            body,
        }
    }

    pub fn kind(&self) -> DocumentKind {
        match &self.body {
            ModelBody::Network(_) => DocumentKind::Network,
            ModelBody::Oobn(_) => DocumentKind::Oobn,
            ModelBody::DbnTemplate(_) => DocumentKind::DbnTemplate,
            ModelBody::ScenarioSet(_) => DocumentKind::ScenarioSet,
            ModelBody::Catalogue(_) => DocumentKind::Catalogue,
            ModelBody::Intervention(_) => DocumentKind::Intervention,
            ModelBody::Dataset(_) => DocumentKind::Dataset,
        }
    }

    pub fn to_value(&self) -> Value {
        let body = match &self.body {
            ModelBody::Network(b) => serde_json::to_value(b),
            ModelBody::Oobn(b) => serde_json::to_value(b),
            ModelBody::DbnTemplate(b) => serde_json::to_value(b),
            ModelBody::ScenarioSet(b) => serde_json::to_value(b),
            ModelBody::Catalogue(b) => serde_json::to_value(b),
            ModelBody::Intervention(b) => serde_json::to_value(b),
            ModelBody::Dataset(b) => serde_json::to_value(b),
        }
        .expect("document bodies serialize");
        serde_json::json!({
            "format_version": self.format_version,
            "kind": self.kind().as_str(),
            "body": body,
        })
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("value serializes");
        s.push('\n');
        s
    }

    /// Compiles network-valued documents (network, oobn).
    pub fn science_model(&self) -> Result<ScienceModel, IoError> {
        let (network, target, default_evidence, scenarios, groups) = match &self.body {
            ModelBody::Network(b) => (
                Network::build(b.nodes.clone()).map_err(|e| network_error(&b.nodes, e))?,
                b.target.clone(),
                b.default_evidence.clone(),
                b.scenarios.clone(),
                BTreeMap::new(),
            ),
            ModelBody::Oobn(b) => (
                b.model.flatten().map_err(compose_error)?,
                b.target.clone(),
                b.default_evidence.clone(),
                b.scenarios.clone(),
                b.model.groups(),
            ),
            _ => {
                return Err(IoError::schema(
                    "kind",
                    format!("`{}` is not a network-valued document", self.kind()),
                ))
            }
        };
        if let Some(t) = &target {
            network.id(t).map_err(|e| IoError::schema("body.target", e))?;
        }
        network
            .resolve(&default_evidence)
            .map_err(|e| IoError::schema("body.default_evidence", e))?;
        let scenarios = ScenarioSet { model: None, scenarios };
        scenarios
            .validate(&network)
            .map_err(|e| IoError::schema("body.scenarios", e))?;
        Ok(ScienceModel {
            network,
            target,
            default_evidence,
            scenarios,
            groups,
        })
    }

    /// Checks the body against its module invariants.
    pub fn validate(&self) -> Result<(), IoError> {
        match &self.body {
            ModelBody::Network(_) | ModelBody::Oobn(_) => self.science_model().map(|_| ()),
            ModelBody::DbnTemplate(b) => {
                b.template.validate().map_err(dbn_error)?;
                if let Some(t) = &b.target {
                    if b.template.node(t).is_none() {
                        return Err(IoError::schema("body.target", format!("unknown slice node `{t}`")));
                    }
                }
                let n = b.template.slice_labels.len();
                let net = b.template.unroll(n).map_err(dbn_error)?;
                net.resolve(&b.baseline_evidence)
                    .map_err(|e| IoError::schema("body.baseline_evidence", e))?;
                Ok(())
            }
            ModelBody::ScenarioSet(s) => {
                let mut names = std::collections::BTreeSet::new();
                for (i, sc) in s.scenarios.iter().enumerate() {
                    if !names.insert(sc.name.as_str()) {
                        return Err(IoError::schema(
                            format!("body.scenarios[{i}].name"),
                            format!("duplicate scenario `{}`", sc.name),
                        ));
                    }
                }
                for (i, sc) in s.scenarios.iter().enumerate() {
                    if let Some(b) = &sc.baseline {
                        if s.get(b).is_none() {
                            return Err(IoError::schema(
                                format!("body.scenarios[{i}].baseline"),
                                format!("unknown scenario `{b}`"),
                            ));
                        }
                    }
                }
                Ok(())
            }
            ModelBody::Catalogue(c) => c.validate().map_err(|e| IoError::schema("body", e)),
            ModelBody::Intervention(_) => Ok(()),
            ModelBody::Dataset(d) => d.validate().map_err(|e| match e {
                crate::probit::ProbitError::InvalidRecord { row, reason } => {
                    IoError::schema(format!("body.rows[{row}]"), reason)
                }
                other => IoError::schema("body", other),
            }),
        }
    }
}

fn network_error(nodes: &[NodeSpec], e: NetworkError) -> IoError {
    let at = |name: &str| nodes.iter().position(|n| n.name == name);
    let path = match &e {
        NetworkError::RowNotNormalized { node, row, .. } | NetworkError::EntryOutOfRange { node, row, .. } => {
            at(node).map(|i| format!("body.nodes[{i}].cpt[{row}]"))
        }
        NetworkError::CptShapeMismatch { node, .. } | NetworkError::CptWidthMismatch { node, .. } => {
            at(node).map(|i| format!("body.nodes[{i}].cpt"))
        }
        NetworkError::UnknownParent { node, .. } | NetworkError::DuplicateParent { node, .. } => {
            at(node).map(|i| format!("body.nodes[{i}].parents"))
        }
        NetworkError::DuplicateState { node, .. } | NetworkError::TooFewStates { node } => {
            at(node).map(|i| format!("body.nodes[{i}].states"))
        }
        NetworkError::DuplicateNode(node) | NetworkError::InvalidName(node) => {
            at(node).map(|i| format!("body.nodes[{i}].name"))
        }
        _ => None,
    };
    IoError::schema(path.unwrap_or_else(|| "body.nodes".into()), e)
}

fn compose_error(e: ComposeError) -> IoError {
    IoError::schema("body.model", e)
}

fn dbn_error(e: DbnError) -> IoError {
    IoError::schema("body.template", e)
}

fn body_from<T: DeserializeOwned>(value: Value) -> Result<T, IoError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "body".to_string()
        } else {
            format!("body.{path}")
        };
        IoError::schema(path, e.into_inner())
    })
}

/// Parses and validates a document.
pub fn parse(text: &str) -> Result<ModelDocument, IoError> {
    let doc = parse_unchecked(text)?;
    doc.validate()?;
    Ok(doc)
}

/// Parses the envelope and body shape without module validation.
pub fn parse_unchecked(text: &str) -> Result<ModelDocument, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(mut map) = value else {
        return Err(IoError::schema("", "document must be an object"));
    };
    for key in map.keys() {
        if !matches!(key.as_str(), "format_version" | "kind" | "body") {
            return Err(IoError::schema(key.clone(), "unknown field"));
        }
    }
    let version = map
        .remove("format_version")
        .ok_or_else(|| IoError::schema("format_version", "missing field"))?;
    if version.as_u64() != Some(FORMAT_VERSION) {
        return Err(IoError::Version {
            found: version.to_string(),
        });
    }
    let kind = map
        .remove("kind")
        .ok_or_else(|| IoError::schema("kind", "missing field"))?;
    let kind = kind
        .as_str()
        .and_then(DocumentKind::parse)
        .ok_or_else(|| IoError::schema("kind", format!("unknown kind {kind}")))?;
    let body = map
        .remove("body")
        .ok_or_else(|| IoError::schema("body", "missing field"))?;
    let body = match kind {
        DocumentKind::Network => ModelBody::Network(body_from(body)?),
        DocumentKind::Oobn => ModelBody::Oobn(body_from(body)?),
        DocumentKind::DbnTemplate => ModelBody::DbnTemplate(body_from(body)?),
        DocumentKind::ScenarioSet => ModelBody::ScenarioSet(body_from(body)?),
        DocumentKind::Catalogue => ModelBody::Catalogue(body_from(body)?),
        DocumentKind::Intervention => ModelBody::Intervention(body_from(body)?),
        DocumentKind::Dataset => ModelBody::Dataset(body_from(body)?),
    };
    Ok(ModelDocument {
        format_version: FORMAT_VERSION,
        body,
    })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads and validates a document from disk. `.csv` files are read as
/// monthly datasets.
pub fn load(path: &Path) -> Result<ModelDocument, IoError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = read_text(path)?;
        let data = TimeSeriesDataset::from_csv(text.as_bytes()).map_err(|e| match e {
            crate::probit::ProbitError::InvalidRecord { row, reason } => {
                IoError::schema(format!("rows[{row}]"), reason)
            }
            other => IoError::schema("rows", other),
        })?;
        return Ok(ModelDocument::new(ModelBody::Dataset(data)));
    }
    parse(&read_text(path)?)
}

pub fn save(path: &Path, doc: &ModelDocument) -> Result<(), IoError> {
    std::fs::write(path, doc.to_json()).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
