//! Bayesian probit regression with reversible-jump covariate selection and
//! model averaging, for monthly bloom prediction.

pub mod bma;
pub mod dataset;
pub mod design;
pub mod sampler;
pub mod truncnorm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bma::{bma_predict, bma_summary, BmaSummary, Estimate};
pub use dataset::{MonthlyRecord, TimeSeriesDataset};
pub use design::{build_design, CovariateSpec, Design};
pub use sampler::{rjmcmc_chain, rjmcmc_chains, rjmcmc_fit, ChainDiagnostics, JumpProposal, RjSample, RjmcmcConfig};

use crate::exec::Execution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbitError {
    #[error("need at least 2 rows, got {0}")]
    InsufficientRows(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has zero variance")]
    ZeroVarianceColumn(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("no samples")]
    EmptySamples,
    #[error("row {row}: {reason}")]
    InvalidRecord { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub candidates: Vec<String>,
    pub rows: usize,
    pub config: RjmcmcConfig,
    pub chains: usize,
    pub diagnostics: Vec<ChainDiagnostics>,
    pub summary: BmaSummary,
}

/// Builds the design, runs `chains` chains and summarizes the pooled draws.
pub fn fit_dataset(
    data: &TimeSeriesDataset,
    spec: &CovariateSpec,
    config: &RjmcmcConfig,
    chains: usize,
    exec: Execution,
) -> Result<FitReport, ProbitError> {
    let design = build_design(data, spec)?;
    let runs = rjmcmc_chains(&design, config, chains.max(1), exec)?;
    let pooled: Vec<RjSample> = runs.iter().flat_map(|c| c.samples.iter().cloned()).collect();
    let summary = bma_summary(&pooled, &design.names)?;
    Ok(FitReport {
        candidates: design.names.clone(),
        rows: design.rows(),
        config: config.clone(),
        chains: runs.len(),
        diagnostics: runs.into_iter().map(|c| c.diagnostics).collect(),
        summary,
    })
}
