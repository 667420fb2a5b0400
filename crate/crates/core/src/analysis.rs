//! Influence ranking by conditional mutual information, and named scenarios
//! evaluated against a baseline.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::reachable;
use crate::exec::Execution;
use crate::infer::{joint_posterior, posterior, InferError, PosteriorDistribution};
use crate::network::{Evidence, Network, NetworkError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("duplicate scenario `{0}`")]
    DuplicateScenario(String),
}

impl From<NetworkError> for AnalysisError {
    fn from(e: NetworkError) -> Self {
        AnalysisError::Infer(e.into())
    }
}

/// Mutual information in bits of a joint table over (A, B), `A` slowest.
/// The table need not be normalized.
pub fn mutual_information_bits(joint: &[f64], card_a: usize, card_b: usize) -> f64 {
    assert_eq!(joint.len(), card_a * card_b, "joint table shape");
    let total: f64 = joint.iter().sum();
    let mut pa = vec![0.0; card_a];
    let mut pb = vec![0.0; card_b];
    for i in 0..card_a {
        for j in 0..card_b {
            let p = joint[i * card_b + j] / total;
            pa[i] += p;
            pb[j] += p;
        }
    }
    let mut mi = 0.0;
    for i in 0..card_a {
        for j in 0..card_b {
            let p = joint[i * card_b + j] / total;
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub node: String,
    pub mutual_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub target: String,
    pub evidence: Evidence,
    /// Descending by MI, ties by node name.
    pub entries: Vec<SensitivityEntry>,
}

impl SensitivityReport {
    pub fn rank(&self, node: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.node == node).map(|i| i + 1)
    }

    pub fn top(&self, k: usize) -> impl Iterator<Item = &str> {
        self.entries.iter().take(k).map(|e| e.node.as_str())
    }

    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.node.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "target: {}", self.target);
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>12}", "rank", "node", "MI (bits)");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{:>4}  {:<width$}  {:>12.6}", i + 1, e.node, e.mutual_information);
        }
        out
    }
}

/// MI(X; target | evidence) for every unobserved non-target node X.
pub fn sensitivity_ranking(
    net: &Network,
    target: &str,
    evidence: &Evidence,
) -> Result<SensitivityReport, AnalysisError> {
    sensitivity_ranking_with(net, target, evidence, Execution::default())
}

pub fn sensitivity_ranking_with(
    net: &Network,
    target: &str,
    evidence: &Evidence,
    exec: Execution,
) -> Result<SensitivityReport, AnalysisError> {
    let t = net.id(target)?;
    if evidence.contains(target) {
        return Err(InferError::TargetObserved(target.to_string()).into());
    }
    let observed: BTreeSet<usize> = net.resolve(evidence)?.into_iter().map(|(v, _)| v).collect();
    // Also surfaces impossible evidence before the sweep.
    posterior(net, &[target], evidence)?;
    let active = reachable(net, &BTreeSet::from([t]), &observed);
    let candidates: Vec<usize> = (0..net.len()).filter(|&v| v != t && !observed.contains(&v)).collect();
    let mut entries = exec.try_map(&candidates, |&v| -> Result<SensitivityEntry, AnalysisError> {
        let name = net.name(v);
        let mi = if active[v] {
            let joint = joint_posterior(net, &[name, target], evidence)?;
            mutual_information_bits(&joint.table, joint.cards[0], joint.cards[1])
        } else {
            0.0
        };
        Ok(SensitivityEntry {
            node: name.to_string(),
            mutual_information: mi,
        })
    })?;
    entries.sort_by(|a, b| {
        b.mutual_information
            .total_cmp(&a.mutual_information)
            .then_with(|| a.node.cmp(&b.node))
    });
    Ok(SensitivityReport {
        target: target.to_string(),
        evidence: evidence.clone(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub evidence: Evidence,
    /// Name of the reference scenario; absent means empty evidence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, evidence: Evidence) -> Self {
        Scenario {
            name: name.into(),
            description: String::new(),
            evidence,
            baseline: None,
        }
    }

    pub fn with_baseline(mut self, baseline: impl Into<String>) -> Self {
        self.baseline = Some(baseline.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    /// Model id the scenarios target, if bound to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn get(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Checks names are unique, baselines resolve and evidence is valid.
    pub fn validate(&self, net: &Network) -> Result<(), AnalysisError> {
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.name.as_str()) {
                return Err(AnalysisError::DuplicateScenario(s.name.clone()));
            }
        }
        for s in &self.scenarios {
            net.resolve(&s.evidence)?;
            if let Some(b) = &s.baseline {
                if self.get(b).is_none() {
                    return Err(AnalysisError::UnknownScenario(b.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub baseline: Option<String>,
    pub posterior: PosteriorDistribution,
    pub baseline_posterior: PosteriorDistribution,
    /// Scenario minus baseline, per state.
    pub delta: Vec<f64>,
}

/// Posterior of `target` under the scenario and its signed difference from
/// the baseline posterior. `known` resolves the baseline name.
pub fn evaluate_scenario(
    net: &Network,
    scenario: &Scenario,
    target: &str,
    known: &[Scenario],
) -> Result<ScenarioResult, AnalysisError> {
    let empty = Evidence::new();
    let base_ev = match &scenario.baseline {
        None => &empty,
        Some(b) => {
            &known
                .iter()
                .find(|s| &s.name == b)
                .ok_or_else(|| AnalysisError::UnknownScenario(b.clone()))?
                .evidence
        }
    };
    let post = posterior(net, &[target], &scenario.evidence)?.remove(0);
    let base = posterior(net, &[target], base_ev)?.remove(0);
    let delta = post
        .probabilities
        .iter()
        .zip(&base.probabilities)
        .map(|(a, b)| a - b)
        .collect();
    Ok(ScenarioResult {
        scenario: scenario.name.clone(),
        baseline: scenario.baseline.clone(),
        posterior: post,
        baseline_posterior: base,
        delta,
    })
}

/// Evaluates every scenario of a set.
pub fn evaluate_all(
    net: &Network,
    set: &ScenarioSet,
    target: &str,
    exec: Execution,
) -> Result<Vec<ScenarioResult>, AnalysisError> {
    exec.try_map(&set.scenarios, |s| evaluate_scenario(net, s, target, &set.scenarios))
}
