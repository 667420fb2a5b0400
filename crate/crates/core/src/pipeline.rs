//! Management intervention → catchment load → nutrient evidence → bloom
//! posterior, reported against the current-practice baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::infer::{posterior, InferError, PosteriorDistribution};
use crate::management::{load_to_evidence, uniform_assignment, Catalogue, ManagementError, NutrientLoad, Practice};
use crate::network::{Evidence, Network, NetworkError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Management(#[from] ManagementError),
    #[error(transparent)]
    Infer(#[from] InferError),
}

impl From<NetworkError> for PipelineError {
    fn from(e: NetworkError) -> Self {
        PipelineError::Infer(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSpec {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub practice_overrides: BTreeMap<String, Practice>,
    /// Source id → new land-use category.
    #[serde(default)]
    pub landuse_overrides: BTreeMap<String, String>,
    /// Science-node states pinned on top of the load-derived evidence.
    #[serde(default)]
    pub extra_evidence: Evidence,
}

impl InterventionSpec {
    pub fn labeled(label: impl Into<String>) -> Self {
        InterventionSpec {
            label: label.into(),
            ..Default::default()
        }
    }

    /// Every source of the catalogue recategorized as `category`.
    pub fn recategorize_all(catalogue: &Catalogue, category: &str) -> Self {
        InterventionSpec {
            label: format!("all {category}"),
            landuse_overrides: catalogue
                .sources
                .iter()
                .map(|s| (s.id.clone(), category.to_string()))
                .collect(),
            ..Default::default()
        }
    }

    /// Sources currently in `from` recategorized as `to`.
    pub fn convert(catalogue: &Catalogue, from: &str, to: &str) -> Self {
        InterventionSpec {
            label: format!("{from} to {to}"),
            landuse_overrides: catalogue
                .sources
                .iter()
                .filter(|s| s.category == from)
                .map(|s| (s.id.clone(), to.to_string()))
                .collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineWarning {
    /// Extra evidence replaced the state implied by the loads.
    EvidenceConflict {
        node: String,
        load_state: String,
        extra_state: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub label: String,
    pub target: String,
    pub target_state: String,
    pub loads: NutrientLoad,
    pub load_evidence: Evidence,
    pub evidence: Evidence,
    pub posterior: PosteriorDistribution,
    pub baseline_posterior: PosteriorDistribution,
    /// Posterior minus baseline, per state.
    pub delta: Vec<f64>,
    pub warnings: Vec<PipelineWarning>,
}

impl PipelineReport {
    pub fn probability(&self) -> f64 {
        self.posterior.probability(&self.target_state).unwrap_or(f64::NAN)
    }

    pub fn baseline_probability(&self) -> f64 {
        self.baseline_posterior
            .probability(&self.target_state)
            .unwrap_or(f64::NAN)
    }
}

/// Loads after applying the intervention's overrides.
pub fn intervention_loads(
    catalogue: &Catalogue,
    intervention: &InterventionSpec,
) -> Result<NutrientLoad, PipelineError> {
    let sources = catalogue.recategorize(&intervention.landuse_overrides)?;
    let mut assignment = uniform_assignment(&sources, Practice::Current);
    for (id, &p) in &intervention.practice_overrides {
        let slot = assignment
            .get_mut(id)
            .ok_or_else(|| ManagementError::UnknownSource(id.clone()))?;
        *slot = p;
    }
    Ok(catalogue.load_index(&sources, &assignment)?)
}

/// Load-derived evidence with `extra` merged on top; conflicts are resolved
/// in favor of `extra` and reported.
pub fn merge_evidence(load_evidence: &Evidence, extra: &Evidence) -> (Evidence, Vec<PipelineWarning>) {
    let mut merged = load_evidence.clone();
    let mut warnings = Vec::new();
    for (node, state) in extra.iter() {
        if let Some(prev) = merged.insert(node, state) {
            if prev != state {
                warnings.push(PipelineWarning::EvidenceConflict {
                    node: node.to_string(),
                    load_state: prev,
                    extra_state: state.to_string(),
                });
            }
        }
    }
    (merged, warnings)
}

/// Typical-year evidence: the state set implied by the baseline loads.
pub fn baseline_evidence(catalogue: &Catalogue) -> Result<Evidence, PipelineError> {
    let load = intervention_loads(catalogue, &InterventionSpec::default())?;
    Ok(load_to_evidence(&load, &catalogue.linkage)?)
}

pub fn run_pipeline(
    catalogue: &Catalogue,
    intervention: &InterventionSpec,
    science: &Network,
) -> Result<PipelineReport, PipelineError> {
    catalogue.validate()?;
    let link = &catalogue.linkage;
    let target = link.target.as_str();
    let base_ev = baseline_evidence(catalogue)?;
    let baseline = posterior(science, &[target], &base_ev)?.remove(0);
    run_with_baseline(catalogue, intervention, science, baseline)
}

fn run_with_baseline(
    catalogue: &Catalogue,
    intervention: &InterventionSpec,
    science: &Network,
    baseline: PosteriorDistribution,
) -> Result<PipelineReport, PipelineError> {
    let link = &catalogue.linkage;
    let loads = intervention_loads(catalogue, intervention)?;
    let load_evidence = load_to_evidence(&loads, link)?;
    let (evidence, warnings) = merge_evidence(&load_evidence, &intervention.extra_evidence);
    let post = posterior(science, &[link.target.as_str()], &evidence)?.remove(0);
    if post.probability(&link.target_state).is_none() {
        return Err(NetworkError::UnknownState {
            node: link.target.clone(),
            state: link.target_state.clone(),
        }
        .into());
    }
    let delta = post
        .probabilities
        .iter()
        .zip(&baseline.probabilities)
        .map(|(a, b)| a - b)
        .collect();
    Ok(PipelineReport {
        label: intervention.label.clone(),
        target: link.target.clone(),
        target_state: link.target_state.clone(),
        loads,
        load_evidence,
        evidence,
        posterior: post,
        baseline_posterior: baseline,
        delta,
        warnings,
    })
}

/// Runs a batch of interventions against one shared baseline.
pub fn run_batch(
    catalogue: &Catalogue,
    interventions: &[InterventionSpec],
    science: &Network,
    exec: Execution,
) -> Result<Vec<PipelineReport>, PipelineError> {
    catalogue.validate()?;
    let base_ev = baseline_evidence(catalogue)?;
    let baseline = posterior(science, &[catalogue.linkage.target.as_str()], &base_ev)?.remove(0);
    exec.try_map(interventions, |iv| {
        run_with_baseline(catalogue, iv, science, baseline.clone())
    })
}
