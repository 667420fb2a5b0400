//! Discrete Bayesian networks: node definitions, structural validation and
//! the hard-evidence carrier used by every query.
//!
//! CPT layout: one row per joint parent state, rows enumerated
//! lexicographically with the first parent varying slowest, one column per
//! node state.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-sum tolerance accepted at load time.
pub const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("node `{node}` names unknown parent `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("node `{node}`: CPT has {found} rows, expected {expected}")]
    CptShapeMismatch {
        node: String,
        expected: usize,
        found: usize,
    },
    #[error("node `{node}`: CPT row {row} has {found} columns, expected {expected}")]
    CptWidthMismatch {
        node: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("node `{node}`: CPT row {row} sums to {sum}, not 1")]
    RowNotNormalized { node: String, row: usize, sum: f64 },
    #[error("node `{node}`: CPT row {row} has entry {value} outside [0, 1]")]
    EntryOutOfRange { node: String, row: usize, value: f64 },
    #[error("node `{node}` declares state `{state}` more than once")]
    DuplicateState { node: String, state: String },
    #[error("node `{node}` must have at least two states")]
    TooFewStates { node: String },
    #[error("node `{0}` is declared more than once")]
    DuplicateNode(String),
    #[error("node `{node}` lists parent `{parent}` more than once")]
    DuplicateParent { node: String, parent: String },
    #[error("invalid node name `{0}`")]
    InvalidName(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("node `{0}` appears in more than one of the query sets")]
    OverlappingSets(String),
}

/// One discrete variable as written in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, states: &[&str], parents: &[&str], cpt: Vec<Vec<f64>>) -> Self {
        NodeSpec {
            name: name.into(),
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            cpt,
        }
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Names may not be empty or contain whitespace or `=`; dots are allowed
/// because instance and slice prefixes use them.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || c == '=' || c == ',' || c.is_control())
}

/// Checks the CPT of `spec` against the given parent cardinalities.
pub(crate) fn check_cpt(spec: &NodeSpec, parent_cards: &[usize]) -> Result<(), NetworkError> {
    let expected: usize = parent_cards.iter().product();
    if spec.cpt.len() != expected {
        return Err(NetworkError::CptShapeMismatch {
            node: spec.name.clone(),
            expected,
            found: spec.cpt.len(),
        });
    }
    for (r, row) in spec.cpt.iter().enumerate() {
        if row.len() != spec.states.len() {
            return Err(NetworkError::CptWidthMismatch {
                node: spec.name.clone(),
                row: r,
                expected: spec.states.len(),
                found: row.len(),
            });
        }
        for &v in row {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(NetworkError::EntryOutOfRange {
                    node: spec.name.clone(),
                    row: r,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(NetworkError::RowNotNormalized {
                node: spec.name.clone(),
                row: r,
                sum,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_states(spec: &NodeSpec) -> Result<(), NetworkError> {
    if !is_valid_name(&spec.name) {
        return Err(NetworkError::InvalidName(spec.name.clone()));
    }
    if spec.states.len() < 2 {
        return Err(NetworkError::TooFewStates {
            node: spec.name.clone(),
        });
    }
    let mut seen = BTreeSet::new();
    for s in &spec.states {
        if !seen.insert(s.as_str()) {
            return Err(NetworkError::DuplicateState {
                node: spec.name.clone(),
                state: s.clone(),
            });
        }
    }
    Ok(())
}

/// Validated, immutable DAG of discrete nodes.
///
/// Nodes keep their declaration order; internal ids index that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<NodeSpec>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Network {
    /// Validates `specs` and computes a topological order. Rows are
    /// renormalized exactly once they pass the tolerance check.
    pub fn build(specs: Vec<NodeSpec>) -> Result<Network, NetworkError> {
        let mut index = HashMap::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            check_states(spec)?;
            if index.insert(spec.name.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(spec.name.clone()));
            }
        }
        let mut parents = Vec::with_capacity(specs.len());
        for spec in &specs {
            let mut ids = Vec::with_capacity(spec.parents.len());
            for p in &spec.parents {
                let id = *index.get(p).ok_or_else(|| NetworkError::UnknownParent {
                    node: spec.name.clone(),
                    parent: p.clone(),
                })?;
                if ids.contains(&id) {
                    return Err(NetworkError::DuplicateParent {
                        node: spec.name.clone(),
                        parent: p.clone(),
                    });
                }
                ids.push(id);
            }
            parents.push(ids);
        }
        let mut children = vec![Vec::new(); specs.len()];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(child);
            }
        }
        let topo = topological_order(&parents, &children)
            .map_err(|cycle| NetworkError::CycleDetected(cycle.iter().map(|&i| specs[i].name.clone()).collect()))?;

        for (i, spec) in specs.iter().enumerate() {
            let cards: Vec<usize> = parents[i].iter().map(|&p| specs[p].states.len()).collect();
            check_cpt(spec, &cards)?;
        }
        let nodes = specs
            .into_iter()
            .map(|mut spec| {
                for row in &mut spec.cpt {
                    let sum: f64 = row.iter().sum();
                    if sum != 1.0 {
                        row.iter_mut().for_each(|v| *v /= sum);
                    }
                }
                spec
            })
            .collect();
        Ok(Network {
            nodes,
            index,
            parents,
            children,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn id(&self, name: &str) -> Result<usize, NetworkError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
    }

    pub fn name(&self, id: usize) -> &str {
        &self.nodes[id].name
    }

    pub fn spec(&self, id: usize) -> &NodeSpec {
        &self.nodes[id]
    }

    pub fn cardinality(&self, id: usize) -> usize {
        self.nodes[id].states.len()
    }

    pub fn parent_ids(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn child_ids(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn topological_ids(&self) -> &[usize] {
        &self.topo
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.name(i)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Ids of `seeds` and all their ancestors.
    pub fn ancestral_set(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.into_iter().collect();
        while let Some(v) = stack.pop() {
            if !mark[v] {
                mark[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        mark
    }

    /// Ids of strict descendants of `id`.
    pub fn descendants(&self, id: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.children[id].clone();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.children[v].iter().copied());
            }
        }
        seen
    }

    /// Parents, children and co-parents of `name`.
    pub fn markov_blanket(&self, name: &str) -> Result<BTreeSet<String>, NetworkError> {
        let id = self.id(name)?;
        let mut blanket = BTreeSet::new();
        blanket.extend(self.parents[id].iter().copied());
        for &c in &self.children[id] {
            blanket.insert(c);
            blanket.extend(self.parents[c].iter().copied());
        }
        blanket.remove(&id);
        Ok(blanket.into_iter().map(|i| self.name(i).to_string()).collect())
    }

    /// Resolves evidence into `(node id, state index)` pairs sorted by id.
    pub fn resolve(&self, evidence: &Evidence) -> Result<Vec<(usize, usize)>, NetworkError> {
        let mut out = Vec::with_capacity(evidence.len());
        for (node, state) in evidence.iter() {
            let id = self.id(node)?;
            let s = self.nodes[id]
                .state_index(state)
                .ok_or_else(|| NetworkError::UnknownState {
                    node: node.to_string(),
                    state: state.to_string(),
                })?;
            out.push((id, s));
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Flat CPT for `id`, scope = parents then the node itself.
    pub(crate) fn flat_cpt(&self, id: usize) -> Vec<f64> {
        self.nodes[id].cpt.iter().flatten().copied().collect()
    }
}

/// Kahn's algorithm; ready nodes leave in declaration order. On failure
/// returns one directed cycle.
fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every remaining node has a remaining parent; walk parents until a repeat.
    let remaining: Vec<bool> = (0..n).map(|i| indeg[i] > 0).collect();
    let start = (0..n).find(|&i| remaining[i]).unwrap_or(0);
    let mut pos = HashMap::new();
    let mut path = Vec::new();
    let mut v = start;
    loop {
        if let Some(&k) = pos.get(&v) {
            let mut cycle: Vec<usize> = path[k..].to_vec();
            cycle.reverse();
            cycle.push(cycle[0]);
            return Err(cycle);
        }
        pos.insert(v, path.len());
        path.push(v);
        v = *parents[v]
            .iter()
            .find(|&&p| remaining[p])
            .expect("remaining node has remaining parent");
    }
}

/// Hard evidence: node name to observed state label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(BTreeMap<String, String>);

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn with(mut self, node: impl Into<String>, state: impl Into<String>) -> Self {
        self.insert(node, state);
        self
    }

    /// Returns the previous state when the node was already set.
    pub fn insert(&mut self, node: impl Into<String>, state: impl Into<String>) -> Option<String> {
        self.0.insert(node.into(), state.into())
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.0.get(node).map(String::as_str)
    }

    pub fn remove(&mut self, node: &str) -> Option<String> {
        self.0.remove(node)
    }

    pub fn contains(&self, node: &str) -> bool {
        self.0.contains_key(node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Parses `Node=State`; the split is on the first `=`.
    pub fn parse_assignment(text: &str) -> Option<(String, String)> {
        let (node, state) = text.split_once('=')?;
        let (node, state) = (node.trim(), state.trim());
        if node.is_empty() || state.is_empty() {
            return None;
        }
        Some((node.to_string(), state.to_string()))
    }
}

impl FromIterator<(String, String)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Evidence(iter.into_iter().collect())
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        Evidence(iter.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }
}
