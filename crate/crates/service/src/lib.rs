//! HTTP API over a directory of model documents.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | GET | `/models` | |
//! | GET | `/models/{id}` | |
//! | POST | `/models/{id}/query` | `{target?, evidence?}` |
//! | POST | `/models/{id}/scenario` | `{name?, evidence?, baseline?, target?}` |
//! | GET | `/models/{id}/sensitivity` | `?target=&scenario=&evidence=N=S,...` |
//! | GET | `/interventions` | |
//! | POST | `/pipeline/run` | `{catalogue?, model?, intervention?, intervention_id?}` |
//! | POST | `/probit/fit` | `{dataset, iterations?, burn_in?, seed?, chains?, ...}` |
//! | GET | `/probit/jobs/{id}` | |
//!
//! Errors are `{"error": {"code", "message"}}` with status 400, 404 or 422.

pub mod error;
pub mod registry;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use ibn_core::analysis::{evaluate_scenario, sensitivity_ranking_with, Scenario, ScenarioResult, SensitivityReport};
use ibn_core::io::ModelBody;
use ibn_core::pipeline::{run_pipeline, InterventionSpec, PipelineReport};
use ibn_core::probit::{fit_dataset, CovariateSpec, FitReport, JumpProposal, RjmcmcConfig};
use ibn_core::{posterior, Evidence, Execution, Network, PosteriorDistribution};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use error::ApiError;
pub use registry::{Compiled, Entry, LoadError, ModelSummary, Registry};

pub const DEFAULT_PORT: u16 = 8080;
pub const MAX_ITERATIONS: usize = 2_000_000;
pub const MAX_CHAINS: usize = 16;

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Succeeded { result: Box<FitReport> },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Job {
    pub job_id: u64,
    pub dataset: String,
    #[serde(flatten)]
    pub status: JobStatus,
}

#[derive(Default)]
struct Jobs {
    next: AtomicU64,
    table: Mutex<BTreeMap<u64, Job>>,
}

impl Jobs {
    fn set(&self, job: Job) {
        self.table.lock().expect("job table poisoned").insert(job.job_id, job);
    }

    fn get(&self, id: u64) -> Option<Job> {
        self.table.lock().expect("job table poisoned").get(&id).cloned()
    }
}

struct Inner {
    registry: Registry,
    jobs: Jobs,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(registry: Registry) -> Self {
        AppState(Arc::new(Inner {
            registry,
            jobs: Jobs::default(),
        }))
    }

    pub fn registry(&self) -> &Registry {
        &self.0.registry
    }
}

pub fn router(registry: Registry) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/query", post(query))
        .route("/models/{id}/scenario", post(scenario))
        .route("/models/{id}/sensitivity", get(sensitivity))
        .route("/interventions", get(list_interventions))
        .route("/pipeline/run", post(pipeline))
        .route("/probit/fit", post(probit_fit))
        .route("/probit/jobs/{id}", get(probit_job))
        .with_state(AppState::new(registry))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(registry: Registry, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(registry)).await
}

fn entry<'a>(state: &'a AppState, id: &str) -> Result<&'a Entry, ApiError> {
    state.registry().get(id).ok_or_else(|| ApiError::model_not_found(id))
}

fn network(entry: &Entry) -> Result<&Network, ApiError> {
    entry
        .network()
        .ok_or_else(|| ApiError::wrong_kind(&entry.id, "network, oobn or dbn-template"))
}

fn target_of(entry: &Entry, target: Option<String>) -> Result<String, ApiError> {
    target
        .or_else(|| entry.default_target().map(String::from))
        .ok_or_else(|| ApiError::bad_request("no target given and the model has no default target"))
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelSummary>> {
    Json(state.registry().list())
}

async fn get_model(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    Ok(Json(entry(&state, &id)?.document.to_value()))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    #[serde(default)]
    pub target: Option<String>,
    /// Replaces the model's default evidence when present.
    #[serde(default)]
    pub evidence: Option<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub model: String,
    pub target: String,
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorDistribution>,
    /// Per-slice posteriors when `target` is a slice-local node of a
    /// dynamic model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<Vec<PosteriorDistribution>>,
}

async fn query(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<QueryResponse> {
    let entry = entry(&state, &id)?;
    let Json(req) = body?;
    let net = network(entry)?;
    let target = target_of(entry, req.target)?;
    let evidence = req.evidence.unwrap_or_else(|| entry.default_evidence());
    let mut resp = QueryResponse {
        model: id,
        target: target.clone(),
        evidence,
        posterior: None,
        slices: None,
    };
    match &entry.compiled {
        Compiled::Dynamic { body, .. } if body.template.node(&target).is_some() => {
            let n = body.template.slice_labels.len();
            resp.slices = Some(
                body.template
                    .slice_posteriors(n, &target, &resp.evidence, Execution::default())?,
            );
        }
        _ => resp.posterior = Some(posterior(net, &[target.as_str()], &resp.evidence)?.remove(0)),
    }
    Ok(Json(resp))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    /// Name of a bundled scenario.
    #[serde(default)]
    pub name: Option<String>,
    /// Inline evidence, used when `name` is absent.
    #[serde(default)]
    pub evidence: Option<Evidence>,
    /// Baseline scenario name for inline evidence.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
}

async fn scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ScenarioRequest>, JsonRejection>,
) -> ApiResult<ScenarioResult> {
    let entry = entry(&state, &id)?;
    let Json(req) = body?;
    let net = network(entry)?;
    let target = target_of(entry, req.target)?;
    let known = state.registry().scenarios_for(&id);
    let sc = match (req.name, req.evidence) {
        (Some(name), None) => known.iter().find(|s| s.name == name).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "scenario_not_found",
                format!("no scenario `{name}`"),
            )
        })?,
        (None, Some(evidence)) => Scenario {
            name: "inline".into(),
            description: String::new(),
            evidence,
            baseline: req.baseline,
        },
        _ => return Err(ApiError::bad_request("give exactly one of `name` and `evidence`")),
    };
    Ok(Json(evaluate_scenario(net, &sc, &target, &known)?))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SensitivityParams {
    pub target: Option<String>,
    /// Bundled scenario whose evidence conditions the ranking.
    pub scenario: Option<String>,
    /// Comma-separated `Node=State` pairs, applied after `scenario`.
    pub evidence: Option<String>,
}

async fn sensitivity(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<SensitivityParams>,
) -> ApiResult<SensitivityReport> {
    let entry = entry(&state, &id)?;
    let net = network(entry)?;
    let target = target_of(entry, params.target)?;
    let mut ev = Evidence::new();
    if let Some(name) = params.scenario {
        let known = state.registry().scenarios_for(&id);
        let sc = known.iter().find(|s| s.name == name).ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "scenario_not_found",
                format!("no scenario `{name}`"),
            )
        })?;
        ev = sc.evidence.clone();
    }
    for pair in params
        .evidence
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.is_empty())
    {
        let (n, s) =
            Evidence::parse_assignment(pair).ok_or_else(|| ApiError::bad_request(format!("bad evidence `{pair}`")))?;
        ev.insert(n, s);
    }
    Ok(Json(sensitivity_ranking_with(net, &target, &ev, Execution::default())?))
}

async fn list_interventions(State(state): State<AppState>) -> Json<BTreeMap<String, InterventionSpec>> {
    let reg = state.registry();
    Json(
        reg.intervention_ids()
            .into_iter()
            .filter_map(|id| reg.intervention(&id).cloned().map(|iv| (id, iv)))
            .collect(),
    )
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineRequest {
    /// Catalogue id; defaults to the only catalogue in the registry.
    #[serde(default)]
    pub catalogue: Option<String>,
    /// Science model id; defaults to the catalogue's linkage.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub intervention: Option<InterventionSpec>,
    /// Name of a bundled intervention.
    #[serde(default)]
    pub intervention_id: Option<String>,
}

async fn pipeline(
    State(state): State<AppState>,
    body: Result<Json<PipelineRequest>, JsonRejection>,
) -> ApiResult<PipelineReport> {
    let Json(req) = body?;
    let reg = state.registry();
    let (_, catalogue) = match req.catalogue.as_deref() {
        Some(id) => {
            let e = entry(&state, id)?;
            reg.catalogue(Some(id))
                .ok_or_else(|| ApiError::wrong_kind(&e.id, "catalogue"))?
        }
        None => reg
            .catalogue(None)
            .ok_or_else(|| ApiError::bad_request("no unique catalogue; name one with `catalogue`"))?,
    };
    let model_id = req.model.unwrap_or_else(|| catalogue.linkage.science_model.clone());
    let model = entry(&state, &model_id)?;
    let Compiled::Science(science) = &model.compiled else {
        return Err(ApiError::wrong_kind(&model_id, "network or oobn"));
    };
    let intervention = match (req.intervention, req.intervention_id) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(
                "give at most one of `intervention` and `intervention_id`",
            ))
        }
        (Some(iv), None) => iv,
        (None, Some(id)) => reg.intervention(&id).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "intervention_not_found",
                format!("no intervention `{id}`"),
            )
        })?,
        (None, None) => InterventionSpec::default(),
    };
    Ok(Json(run_pipeline(catalogue, &intervention, &science.network)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub dataset: String,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub chains: Option<usize>,
    #[serde(default)]
    pub prior_scale: Option<f64>,
    #[serde(default)]
    pub thin: Option<usize>,
    #[serde(default)]
    pub proposal: Option<JumpProposal>,
}

impl FitRequest {
    pub fn config(&self) -> RjmcmcConfig {
        let d = RjmcmcConfig::default();
        RjmcmcConfig {
            prior_scale: self.prior_scale.unwrap_or(d.prior_scale),
            iterations: self.iterations.unwrap_or(d.iterations),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            seed: self.seed.unwrap_or(d.seed),
            thin: self.thin.unwrap_or(d.thin),
            proposal: self.proposal.unwrap_or(d.proposal),
        }
    }
}

async fn probit_fit(
    State(state): State<AppState>,
    body: Result<Json<FitRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Job>), ApiError> {
    let Json(req) = body?;
    let e = entry(&state, &req.dataset)?;
    let ModelBody::Dataset(data) = &e.document.body else {
        return Err(ApiError::wrong_kind(&req.dataset, "dataset"));
    };
    let config = req.config();
    config.validate()?;
    if config.iterations > MAX_ITERATIONS {
        return Err(ApiError::bad_request(format!("iterations above {MAX_ITERATIONS}")));
    }
    let chains = req.chains.unwrap_or(1);
    if !(1..=MAX_CHAINS).contains(&chains) {
        return Err(ApiError::bad_request(format!(
            "chains must be between 1 and {MAX_CHAINS}"
        )));
    }
    let data = data.clone();
    let job_id = state.0.jobs.next.fetch_add(1, Ordering::Relaxed) + 1;
    let job = Job {
        job_id,
        dataset: req.dataset.clone(),
        status: JobStatus::Running,
    };
    state.0.jobs.set(job.clone());
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let status = match fit_dataset(&data, &CovariateSpec::default(), &config, chains, Execution::default()) {
            Ok(r) => JobStatus::Succeeded { result: Box::new(r) },
            Err(e) => JobStatus::Failed { error: e.to_string() },
        };
        st.0.jobs.set(Job {
            job_id,
            dataset: req.dataset,
            status,
        });
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn probit_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Job> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "job_not_found", format!("no job `{id}`"));
    let n: u64 = id.parse().map_err(|_| not_found())?;
    state.0.jobs.get(n).map(Json).ok_or_else(not_found)
}
