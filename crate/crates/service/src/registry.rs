//! Read-only set of documents loaded from a model directory at startup.

use std::collections::BTreeMap;
use std::path::Path;

use ibn_core::analysis::Scenario;
use ibn_core::io::{self, DbnBody, DocumentKind, IoError, ModelBody, ModelDocument, ScienceModel};
use ibn_core::management::Catalogue;
use ibn_core::pipeline::InterventionSpec;
use ibn_core::probit::TimeSeriesDataset;
use ibn_core::{Evidence, Network};
use serde::Serialize;

#[derive(Debug)]
pub enum Compiled {
    Science(ScienceModel),
    Dynamic { body: DbnBody, unrolled: Network },
    Catalogue(Catalogue),
    ScenarioSet,
    Intervention(InterventionSpec),
    Dataset(TimeSeriesDataset),
}

#[derive(Debug)]
pub struct Entry {
    pub id: String,
    pub document: ModelDocument,
    pub compiled: Compiled,
}

impl Entry {
    pub fn kind(&self) -> DocumentKind {
        self.document.kind()
    }

    /// Network queried by `query` and `sensitivity`, if any.
    pub fn network(&self) -> Option<&Network> {
        match &self.compiled {
            Compiled::Science(m) => Some(&m.network),
            Compiled::Dynamic { unrolled, .. } => Some(unrolled),
            _ => None,
        }
    }

    pub fn default_target(&self) -> Option<&str> {
        match &self.compiled {
            Compiled::Science(m) => m.target.as_deref(),
            Compiled::Dynamic { body, .. } => body.target.as_deref(),
            _ => None,
        }
    }

    pub fn default_evidence(&self) -> Evidence {
        match &self.compiled {
            Compiled::Science(m) => m.default_evidence.clone(),
            Compiled::Dynamic { body, .. } => body.baseline_evidence.clone(),
            _ => Evidence::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub id: String,
    pub kind: DocumentKind,
}

#[derive(Debug, Default)]
pub struct Registry {
    entries: BTreeMap<String, Entry>,
    interventions: BTreeMap<String, InterventionSpec>,
}

#[derive(Debug)]
pub struct LoadError {
    pub path: String,
    pub error: IoError,
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.error)
    }
}

impl std::error::Error for LoadError {}

fn compile(document: &ModelDocument) -> Result<Compiled, IoError> {
    Ok(match &document.body {
        ModelBody::Network(_) | ModelBody::Oobn(_) => Compiled::Science(document.science_model()?),
        ModelBody::DbnTemplate(body) => {
            document.validate()?;
            let unrolled = body
                .template
                .unroll(body.template.slice_labels.len())
                .map_err(|e| IoError::Schema {
                    path: "body.template".into(),
                    message: e.to_string(),
                })?;
            Compiled::Dynamic {
                body: body.clone(),
                unrolled,
            }
        }
        ModelBody::Catalogue(c) => Compiled::Catalogue(c.clone()),
        ModelBody::ScenarioSet(_) => Compiled::ScenarioSet,
        ModelBody::Intervention(i) => Compiled::Intervention(i.clone()),
        ModelBody::Dataset(d) => Compiled::Dataset(d.clone()),
    })
}

impl Registry {
    /// Loads every `.json` and `.csv` file directly under `dir` (id = file
    /// stem) plus named interventions from `dir/interventions`.
    pub fn load_dir(dir: &Path) -> Result<Registry, LoadError> {
        let mut reg = Registry::default();
        for path in sorted_files(dir, &["json", "csv"])? {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            reg.insert(id, load_one(&path)?).map_err(|error| LoadError {
                path: path.display().to_string(),
                error,
            })?;
        }
        let ivs = dir.join("interventions");
        if ivs.is_dir() {
            for path in sorted_files(&ivs, &["json"])? {
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                match load_one(&path)?.body {
                    ModelBody::Intervention(iv) => {
                        reg.interventions.insert(id, iv);
                    }
                    other => {
                        return Err(LoadError {
                            path: path.display().to_string(),
                            error: IoError::Schema {
                                path: "kind".into(),
                                message: format!(
                                    "expected intervention, found {}",
                                    ModelDocument::new(other).kind().as_str()
                                ),
                            },
                        })
                    }
                }
            }
        }
        Ok(reg)
    }

    pub fn insert(&mut self, id: String, document: ModelDocument) -> Result<(), IoError> {
        let compiled = compile(&document)?;
        self.entries.insert(id.clone(), Entry { id, document, compiled });
        Ok(())
    }

    pub fn insert_intervention(&mut self, id: String, iv: InterventionSpec) {
        self.interventions.insert(id, iv);
    }

    pub fn get(&self, id: &str) -> Option<&Entry> {
        self.entries.get(id)
    }

    pub fn intervention(&self, id: &str) -> Option<&InterventionSpec> {
        self.interventions.get(id)
    }

    pub fn list(&self) -> Vec<ModelSummary> {
        self.entries
            .values()
            .map(|e| ModelSummary {
                id: e.id.clone(),
                kind: e.kind(),
            })
            .collect()
    }

    pub fn intervention_ids(&self) -> Vec<String> {
        self.interventions.keys().cloned().collect()
    }

    /// Scenarios for model `id`: those embedded in the model document, then
    /// those of every scenario-set document that names it.
    pub fn scenarios_for(&self, id: &str) -> Vec<Scenario> {
        let mut out: Vec<Scenario> = match self.get(id).map(|e| &e.compiled) {
            Some(Compiled::Science(m)) => m.scenarios.scenarios.clone(),
            _ => Vec::new(),
        };
        for e in self.entries.values() {
            if let ModelBody::ScenarioSet(set) = &e.document.body {
                if set.model.as_deref() == Some(id) {
                    out.extend(set.scenarios.iter().cloned());
                }
            }
        }
        out
    }

    /// The catalogue with the given id, or the only catalogue if `id` is
    /// absent.
    pub fn catalogue(&self, id: Option<&str>) -> Option<(&str, &Catalogue)> {
        fn pick(e: &Entry) -> Option<&Catalogue> {
            match &e.compiled {
                Compiled::Catalogue(c) => Some(c),
                _ => None,
            }
        }
        match id {
            Some(id) => self.get(id).and_then(|e| pick(e).map(|c| (e.id.as_str(), c))),
            None => {
                let mut all = self
                    .entries
                    .values()
                    .filter_map(|e| pick(e).map(|c| (e.id.as_str(), c)));
                let first = all.next();
                if all.next().is_some() {
                    None
                } else {
                    first
                }
            }
        }
    }
}

fn load_one(path: &Path) -> Result<ModelDocument, LoadError> {
    io::load(path).map_err(|error| LoadError {
        path: path.display().to_string(),
        error,
    })
}

fn sorted_files(dir: &Path, exts: &[&str]) -> Result<Vec<std::path::PathBuf>, LoadError> {
    let read_err = |e: std::io::Error| LoadError {
        path: dir.display().to_string(),
        error: IoError::Read {
            path: dir.display().to_string(),
            message: e.to_string(),
        },
    };
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(read_err)? {
        let path = e.map_err(read_err)?.path();
        if path.is_file()
            && path
                .extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| exts.contains(&x))
        {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
