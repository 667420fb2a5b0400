//! Dynamic networks: a per-slice template with lag-1 inter-slice edges,
//! unrolled into an ordinary [`Network`] with nodes named `label.node`.
//!
//! For slices after the first, each inter-edge destination takes its lagged
//! parents after its intra-slice parents, in `inter_edges` order, and uses
//! the template CPT. Slice 0 has no predecessor and uses `initial_cpts`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::infer::{posterior, InferError, PosteriorDistribution};
use crate::network::{check_cpt, check_states, Evidence, Network, NetworkError, NodeSpec};

pub const DEFAULT_SLICE_LABELS: [&str; 5] = ["Nov", "Dec", "Jan", "Feb", "Mar"];

fn default_labels() -> Vec<String> {
    DEFAULT_SLICE_LABELS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbnError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error("inter-slice edge names unknown slice node `{0}`")]
    UnknownSliceNode(String),
    #[error("inter-slice edge {from} -> {to} is declared twice")]
    DuplicateInterEdge { from: String, to: String },
    #[error("no initial CPT for inter-slice destination `{0}`")]
    MissingInitialCpt(String),
    #[error("initial CPT given for `{0}`, which has no lagged parent")]
    UnexpectedInitialCpt(String),
    #[error("{requested} slices requested but only {available} labels are defined")]
    LabelCountMismatch { requested: usize, available: usize },
    #[error("at least one slice is required")]
    NoSlices,
    #[error("duplicate slice label `{0}`")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterEdge {
    /// Node at slice t-1.
    pub from: String,
    /// Node at slice t.
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbnTemplate {
    /// Slice nodes with intra-slice parents only. For inter-edge
    /// destinations the CPT already includes the lagged parents (appended
    /// last).
    pub slice_nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub inter_edges: Vec<InterEdge>,
    #[serde(default)]
    pub initial_cpts: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default = "default_labels")]
    pub slice_labels: Vec<String>,
}

impl DbnTemplate {
    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.slice_nodes.iter().find(|n| n.name == name)
    }

    /// Lagged parents of `node`, in `inter_edges` order.
    pub fn lagged_parents(&self, node: &str) -> Vec<&str> {
        self.inter_edges
            .iter()
            .filter(|e| e.to == node)
            .map(|e| e.from.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<(), DbnError> {
        let mut labels = BTreeSet::new();
        for l in &self.slice_labels {
            if !labels.insert(l.as_str()) {
                return Err(DbnError::DuplicateLabel(l.clone()));
            }
        }
        for n in &self.slice_nodes {
            check_states(n)?;
        }
        let mut seen = BTreeSet::new();
        for e in &self.inter_edges {
            for end in [&e.from, &e.to] {
                if self.node(end).is_none() {
                    return Err(DbnError::UnknownSliceNode(end.clone()));
                }
            }
            if !seen.insert((e.from.as_str(), e.to.as_str())) {
                return Err(DbnError::DuplicateInterEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                });
            }
        }
        let dests: BTreeSet<&str> = self.inter_edges.iter().map(|e| e.to.as_str()).collect();
        for name in self.initial_cpts.keys() {
            if !dests.contains(name.as_str()) {
                return Err(DbnError::UnexpectedInitialCpt(name.clone()));
            }
        }
        let card = |name: &str| -> Result<usize, DbnError> {
            self.node(name).map(|n| n.states.len()).ok_or_else(|| {
                DbnError::Network(NetworkError::UnknownParent {
                    node: "<slice>".into(),
                    parent: name.to_string(),
                })
            })
        };
        for n in &self.slice_nodes {
            let intra: Vec<usize> = n.parents.iter().map(|p| card(p)).collect::<Result<_, _>>()?;
            let lagged: Vec<usize> = self
                .lagged_parents(&n.name)
                .iter()
                .map(|p| card(p))
                .collect::<Result<_, _>>()?;
            let mut full = intra.clone();
            full.extend(&lagged);
            check_cpt(n, &full)?;
            if !lagged.is_empty() {
                let init = self
                    .initial_cpts
                    .get(&n.name)
                    .ok_or_else(|| DbnError::MissingInitialCpt(n.name.clone()))?;
                let spec = NodeSpec {
                    cpt: init.clone(),
                    ..n.clone()
                };
                check_cpt(&spec, &intra)?;
            }
        }
        // intra-slice acyclicity
        self.slice(0, None)?;
        Ok(())
    }

    /// Node specs of one slice; `prev` is the previous slice's label.
    fn slice(&self, t: usize, prev: Option<&str>) -> Result<Vec<NodeSpec>, DbnError> {
        let label = self.slice_labels.get(t).map(String::as_str).unwrap_or("S0");
        let q = |l: &str, n: &str| format!("{l}.{n}");
        let mut out = Vec::with_capacity(self.slice_nodes.len());
        for n in &self.slice_nodes {
            let mut parents: Vec<String> = n.parents.iter().map(|p| q(label, p)).collect();
            let lagged = self.lagged_parents(&n.name);
            let cpt = match (prev, lagged.is_empty()) {
                (_, true) => n.cpt.clone(),
                (Some(prev), false) => {
                    parents.extend(lagged.iter().map(|p| q(prev, p)));
                    n.cpt.clone()
                }
                (None, false) => self
                    .initial_cpts
                    .get(&n.name)
                    .cloned()
                    .ok_or_else(|| DbnError::MissingInitialCpt(n.name.clone()))?,
            };
            out.push(NodeSpec {
                name: q(label, &n.name),
                states: n.states.clone(),
                parents,
                cpt,
            });
        }
        if prev.is_none() {
            Network::build(out.clone())?;
        }
        Ok(out)
    }

    /// Unrolls the template over the first `n_slices` labels.
    pub fn unroll(&self, n_slices: usize) -> Result<Network, DbnError> {
        if n_slices == 0 {
            return Err(DbnError::NoSlices);
        }
        if n_slices > self.slice_labels.len() {
            return Err(DbnError::LabelCountMismatch {
                requested: n_slices,
                available: self.slice_labels.len(),
            });
        }
        self.validate()?;
        let mut nodes = Vec::with_capacity(n_slices * self.slice_nodes.len());
        for t in 0..n_slices {
            let prev = t.checked_sub(1).map(|p| self.slice_labels[p].as_str());
            nodes.extend(self.slice(t, prev)?);
        }
        Ok(Network::build(nodes)?)
    }

    /// Posterior of `label.target` for every slice of the unrolled network.
    pub fn slice_posteriors(
        &self,
        n_slices: usize,
        target: &str,
        evidence: &Evidence,
        exec: Execution,
    ) -> Result<Vec<PosteriorDistribution>, DbnError> {
        if self.node(target).is_none() {
            return Err(NetworkError::UnknownNode(target.to_string()).into());
        }
        let net = self.unroll(n_slices)?;
        let names: Vec<String> = self.slice_labels[..n_slices]
            .iter()
            .map(|l| format!("{l}.{target}"))
            .collect();
        let results = exec.try_map(&names, |name| {
            posterior(&net, &[name.as_str()], evidence).map(|mut v| v.remove(0))
        })?;
        Ok(results)
    }
}
