//! Object-oriented networks: reusable classes with typed input placeholders
//! and output nodes, instantiated under a name prefix and flattened into a
//! single [`Network`].
//!
//! Interfaces are typed by state-label lists: a placeholder can only be bound
//! to a source whose states match its declared states in name and order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{check_states, is_valid_name, Network, NetworkError, NodeSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("instance name `{0}` is used more than once")]
    DuplicateInstanceName(String),
    #[error("invalid instance name `{0}`")]
    InvalidInstanceName(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` is declared more than once")]
    DuplicateClass(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("input `{placeholder}` of instance `{instance}` is not bound")]
    UnboundInput { instance: String, placeholder: String },
    #[error("input `{placeholder}` of instance `{instance}` is bound more than once")]
    DuplicateBinding { instance: String, placeholder: String },
    #[error("instance `{instance}` has no input `{placeholder}`")]
    UnknownInput { instance: String, placeholder: String },
    #[error("binding source `{0}` is not an output of its instance or a top-level node")]
    UnknownSource(String),
    #[error("states of `{source_node}` {found:?} do not match input `{placeholder}` {expected:?}")]
    StateMismatch {
        placeholder: String,
        source_node: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("bindings form a cycle across instances: {}", .0.join(" -> "))]
    CycleAcrossInstances(Vec<String>),
    #[error("class `{class}`: {reason}")]
    InvalidClass { class: String, reason: String },
}

/// An input placeholder: a state list with no CPT and no parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OobnClass {
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub outputs: Vec<String>,
    pub nodes: Vec<NodeSpec>,
}

impl OobnClass {
    /// Checks the class in isolation: outputs are real nodes, placeholders
    /// do not collide with nodes, and the class body is a valid network once
    /// each placeholder is stood in for by a uniform root.
    pub fn validate(&self) -> Result<(), ComposeError> {
        let invalid = |reason: String| ComposeError::InvalidClass {
            class: self.name.clone(),
            reason,
        };
        let node_names: BTreeSet<&str> = self.nodes.iter().map(|n| n.name.as_str()).collect();
        let mut inputs = BTreeSet::new();
        for input in &self.inputs {
            if node_names.contains(input.name.as_str()) {
                return Err(invalid(format!("placeholder `{}` is also a node", input.name)));
            }
            if !inputs.insert(input.name.as_str()) {
                return Err(invalid(format!("placeholder `{}` declared twice", input.name)));
            }
        }
        for out in &self.outputs {
            if !node_names.contains(out.as_str()) {
                return Err(invalid(format!("output `{out}` is not a node of the class")));
            }
        }
        for n in &self.nodes {
            if n.name.contains('.') {
                return Err(invalid(format!("node name `{}` may not contain `.`", n.name)));
            }
        }
        let mut body = self.nodes.clone();
        body.extend(self.inputs.iter().map(stub_node));
        Network::build(body)?;
        Ok(())
    }
}

fn stub_node(input: &InputSpec) -> NodeSpec {
    let k = input.states.len().max(1);
    NodeSpec {
        name: input.name.clone(),
        states: input.states.clone(),
        parents: Vec::new(),
        cpt: vec![vec![1.0 / k as f64; input.states.len()]],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub name: String,
    pub class: String,
}

/// Where a bound placeholder takes its value from: an output of another
/// instance, or a top-level node when `instance` is absent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub node: String,
}

impl BindingSource {
    pub fn qualified(&self) -> String {
        match &self.instance {
            Some(i) => format!("{i}.{}", self.node),
            None => self.node.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    pub instance: String,
    pub input: String,
    pub source: BindingSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OobnModel {
    pub classes: Vec<OobnClass>,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub bindings: Vec<Binding>,
    #[serde(default)]
    pub top_level: Vec<NodeSpec>,
}

/// An instantiated class: prefixed nodes plus the still-unbound stubs.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub instance: String,
    pub nodes: Vec<NodeSpec>,
    /// Prefixed placeholder names with their required states.
    pub stubs: Vec<InputSpec>,
}

/// Deep copy of `class` with every node and placeholder name prefixed by
/// `instance_name.`.
pub fn instantiate(class: &OobnClass, instance_name: &str) -> Result<Fragment, ComposeError> {
    if !is_valid_name(instance_name) || instance_name.contains('.') {
        return Err(ComposeError::InvalidInstanceName(instance_name.to_string()));
    }
    let q = |n: &str| format!("{instance_name}.{n}");
    let nodes = class
        .nodes
        .iter()
        .map(|n| NodeSpec {
            name: q(&n.name),
            states: n.states.clone(),
            parents: n.parents.iter().map(|p| q(p)).collect(),
            cpt: n.cpt.clone(),
        })
        .collect();
    let stubs = class
        .inputs
        .iter()
        .map(|i| InputSpec {
            name: q(&i.name),
            states: i.states.clone(),
        })
        .collect();
    Ok(Fragment {
        instance: instance_name.to_string(),
        nodes,
        stubs,
    })
}

impl OobnModel {
    pub fn class(&self, name: &str) -> Option<&OobnClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Instance name to its class's node names, for grouping in reports.
    pub fn groups(&self) -> BTreeMap<String, Vec<String>> {
        self.instances
            .iter()
            .filter_map(|i| {
                let class = self.class(&i.class)?;
                Some((
                    i.name.clone(),
                    class.nodes.iter().map(|n| format!("{}.{}", i.name, n.name)).collect(),
                ))
            })
            .collect()
    }

    /// Flattens the model: each bound placeholder is removed and its
    /// children re-parented onto the binding source.
    pub fn flatten(&self) -> Result<Network, ComposeError> {
        let mut classes = HashMap::new();
        for c in &self.classes {
            c.validate()?;
            if classes.insert(c.name.as_str(), c).is_some() {
                return Err(ComposeError::DuplicateClass(c.name.clone()));
            }
        }
        let mut fragments = Vec::with_capacity(self.instances.len());
        let mut seen = BTreeSet::new();
        for inst in &self.instances {
            if !seen.insert(inst.name.as_str()) {
                return Err(ComposeError::DuplicateInstanceName(inst.name.clone()));
            }
            let class = classes
                .get(inst.class.as_str())
                .ok_or_else(|| ComposeError::UnknownClass(inst.class.clone()))?;
            fragments.push((class, instantiate(class, &inst.name)?));
        }
        for n in &self.top_level {
            check_states(n)?;
        }
        let top: HashMap<&str, &NodeSpec> = self.top_level.iter().map(|n| (n.name.as_str(), n)).collect();

        // qualified placeholder -> qualified source
        let mut rewire: HashMap<String, String> = HashMap::new();
        let mut instance_edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for b in &self.bindings {
            let (class, _) = fragments
                .iter()
                .find(|(_, f)| f.instance == b.instance)
                .ok_or_else(|| ComposeError::UnknownInstance(b.instance.clone()))?;
            let input = class
                .inputs
                .iter()
                .find(|i| i.name == b.input)
                .ok_or_else(|| ComposeError::UnknownInput {
                    instance: b.instance.clone(),
                    placeholder: b.input.clone(),
                })?;
            let source_states = match &b.source.instance {
                Some(src_inst) => {
                    let (src_class, _) = fragments
                        .iter()
                        .find(|(_, f)| &f.instance == src_inst)
                        .ok_or_else(|| ComposeError::UnknownInstance(src_inst.clone()))?;
                    if !src_class.outputs.contains(&b.source.node) {
                        return Err(ComposeError::UnknownSource(b.source.qualified()));
                    }
                    instance_edges
                        .entry(src_inst.as_str())
                        .or_default()
                        .insert(b.instance.as_str());
                    &src_class
                        .nodes
                        .iter()
                        .find(|n| n.name == b.source.node)
                        .expect("outputs validated")
                        .states
                }
                None => {
                    &top.get(b.source.node.as_str())
                        .ok_or_else(|| ComposeError::UnknownSource(b.source.qualified()))?
                        .states
                }
            };
            if source_states != &input.states {
                return Err(ComposeError::StateMismatch {
                    placeholder: format!("{}.{}", b.instance, b.input),
                    source_node: b.source.qualified(),
                    expected: input.states.clone(),
                    found: source_states.clone(),
                });
            }
            let key = format!("{}.{}", b.instance, b.input);
            if rewire.insert(key, b.source.qualified()).is_some() {
                return Err(ComposeError::DuplicateBinding {
                    instance: b.instance.clone(),
                    placeholder: b.input.clone(),
                });
            }
        }
        for (_, frag) in &fragments {
            for stub in &frag.stubs {
                if !rewire.contains_key(&stub.name) {
                    let (instance, placeholder) = stub.name.split_once('.').expect("prefixed");
                    return Err(ComposeError::UnboundInput {
                        instance: instance.to_string(),
                        placeholder: placeholder.to_string(),
                    });
                }
            }
        }
        if let Some(cycle) = find_cycle(&instance_edges) {
            return Err(ComposeError::CycleAcrossInstances(cycle));
        }

        let mut nodes: Vec<NodeSpec> = Vec::new();
        for (_, frag) in fragments {
            for mut n in frag.nodes {
                for p in &mut n.parents {
                    if let Some(src) = rewire.get(p.as_str()) {
                        *p = src.clone();
                    }
                }
                nodes.push(n);
            }
        }
        nodes.extend(self.top_level.iter().cloned());
        Ok(Network::build(nodes)?)
    }
}

fn find_cycle(edges: &BTreeMap<&str, BTreeSet<&str>>) -> Option<Vec<String>> {
    fn dfs<'a>(
        v: &'a str,
        edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut HashMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(v, 1);
        path.push(v);
        for &w in edges.get(v).into_iter().flatten() {
            match state.get(w).copied().unwrap_or(0) {
                1 => {
                    let k = path.iter().position(|&x| x == w).expect("on path");
                    let mut cycle: Vec<String> = path[k..].iter().map(|s| s.to_string()).collect();
                    cycle.push(w.to_string());
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = dfs(w, edges, state, path) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(v, 2);
        None
    }
    let mut state = HashMap::new();
    for &v in edges.keys() {
        if state.get(v).copied().unwrap_or(0) == 0 {
            if let Some(c) = dfs(v, edges, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
