//! `ibn` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error (unreadable or
//! invalid input, unknown names), 3 runtime error (impossible evidence,
//! numerical failure, server failure).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ibn_core::analysis::{evaluate_scenario, sensitivity_ranking, AnalysisError, Scenario};
use ibn_core::compose::ComposeError;
use ibn_core::dbn::{DbnError, DbnTemplate};
use ibn_core::io::{self, IoError, ModelBody, ModelDocument, NetworkBody};
use ibn_core::management::{hazard_report, ManagementError};
use ibn_core::pipeline::{run_pipeline, InterventionSpec, PipelineError};
use ibn_core::probit::{fit_dataset, CovariateSpec, FitReport, JumpProposal, ProbitError, RjmcmcConfig};
use ibn_core::{d_separated, posterior, Evidence, Execution, InferError, Network, NetworkError, PosteriorDistribution};
use serde_json::{json, Value};

/// Environment variable read by `serve` when `--port` is absent.
pub const PORT_ENV: &str = "IBN_PORT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// One JSON value per command on stdout; errors as JSON on stderr.
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Proposal {
    Prior,
    Conditional,
}

#[derive(Debug, Parser)]
#[command(name = "ibn", version, about = "Bayesian-network scenario workbench")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a model file.
    Validate { file: PathBuf },
    /// Posterior of one node.
    Query {
        model: PathBuf,
        /// Defaults to the model's declared target.
        #[arg(long)]
        target: Option<String>,
        /// Repeatable; merged over the model's default evidence.
        #[arg(long, value_name = "NODE=STATE")]
        evidence: Vec<String>,
        /// Ignore the model's default evidence.
        #[arg(long)]
        no_default_evidence: bool,
    },
    /// Is X independent of Y given Z?
    Dsep {
        model: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        z: Vec<String>,
    },
    /// Print the flat network of an OOBN document.
    Flatten { oobn: PathBuf },
    /// Print the unrolled network of a DBN template.
    Unroll {
        template: PathBuf,
        /// Defaults to every slice label.
        #[arg(long)]
        slices: Option<usize>,
    },
    /// Rank nodes by mutual information with the target.
    Sensitivity {
        model: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_name = "NODE=STATE")]
        evidence: Vec<String>,
    },
    /// Evaluate a named scenario against its baseline.
    Scenario {
        model: PathBuf,
        scenarios: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        target: Option<String>,
    },
    /// Hazard rating of every source, practice and nutrient.
    Hazard { catalogue: PathBuf },
    /// Catalogue → loads → evidence → posterior.
    Pipeline {
        catalogue: PathBuf,
        model: PathBuf,
        #[arg(long)]
        intervention: Option<PathBuf>,
    },
    /// Reversible-jump probit fit on a monthly dataset.
    ProbitFit {
        dataset: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        iterations: usize,
        #[arg(long, default_value_t = 2_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[arg(long, default_value_t = 3.0)]
        prior_scale: f64,
        #[arg(long, value_enum, default_value_t = Proposal::Prior)]
        proposal: Proposal,
    },
    /// Serve the HTTP API over a model directory.
    Serve {
        /// Falls back to $IBN_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "models")]
        models: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage_error",
            CliError::Validation(_) => "validation_error",
            CliError::Runtime(_) => "runtime_error",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ComposeError> for CliError {
    fn from(e: ComposeError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::Network(_) | InferError::EmptyTargets | InferError::TargetObserved(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Infer(i) => i.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<DbnError> for CliError {
    fn from(e: DbnError) -> Self {
        match e {
            DbnError::Infer(i) => i.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ManagementError> for CliError {
    fn from(e: ManagementError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Infer(i) => i.into(),
            PipelineError::Management(m) => m.into(),
        }
    }
}

impl From<ProbitError> for CliError {
    fn from(e: ProbitError) -> Self {
        match e {
            ProbitError::NumericalFailure(_) | ProbitError::EmptySamples => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let format = cli.format;
    match dispatch(cli.command, format, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = match format {
                Format::Text => writeln!(err, "error: {}", e.message()),
                Format::Structured => writeln!(err, "{}", json!({"error": {"code": e.code(), "message": e.message()}})),
            };
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let (text, value) = match cmd {
        Command::Validate { file } => validate(&file)?,
        Command::Query {
            model,
            target,
            evidence,
            no_default_evidence,
        } => query(&model, target, &evidence, no_default_evidence)?,
        Command::Dsep { model, x, y, z } => dsep(&model, &x, &y, &z)?,
        Command::Flatten { oobn } => document(flatten(&oobn)?),
        Command::Unroll { template, slices } => document(unroll(&template, slices)?),
        Command::Sensitivity {
            model,
            target,
            evidence,
        } => sensitivity(&model, target, &evidence)?,
        Command::Scenario {
            model,
            scenarios,
            name,
            target,
        } => scenario(&model, &scenarios, &name, target)?,
        Command::Hazard { catalogue } => hazard(&catalogue)?,
        Command::Pipeline {
            catalogue,
            model,
            intervention,
        } => pipeline(&catalogue, &model, intervention.as_deref())?,
        Command::ProbitFit {
            dataset,
            iterations,
            burn_in,
            seed,
            chains,
            prior_scale,
            proposal,
        } => {
            let config = RjmcmcConfig {
                prior_scale,
                iterations,
                burn_in,
                seed,
                thin: 1,
                proposal: match proposal {
                    Proposal::Prior => JumpProposal::Prior,
                    Proposal::Conditional => JumpProposal::Conditional,
                },
            };
            probit(&dataset, &config, chains)?
        }
        Command::Serve { port, models, host } => return serve(port, &models, host, out),
    };
    let written = match format {
        Format::Text => write!(out, "{text}"),
        Format::Structured => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&value).expect("values serialize")
        ),
    };
    written.map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("values serialize")
}

fn document(doc: ModelDocument) -> (String, Value) {
    (doc.to_json(), doc.to_value())
}

fn parse_evidence(pairs: &[String]) -> Result<Evidence, CliError> {
    let mut ev = Evidence::new();
    for p in pairs {
        let (n, s) =
            Evidence::parse_assignment(p).ok_or_else(|| CliError::Usage(format!("expected NODE=STATE, got `{p}`")))?;
        ev.insert(n, s);
    }
    Ok(ev)
}

/// Network-valued file ready for queries.
struct Loaded {
    network: Network,
    target: Option<String>,
    default_evidence: Evidence,
    scenarios: Vec<Scenario>,
    template: Option<DbnTemplate>,
}

fn load_model(path: &Path) -> Result<Loaded, CliError> {
    let doc = io::load(path)?;
    match doc.body {
        ModelBody::DbnTemplate(body) => Ok(Loaded {
            network: body.template.unroll(body.template.slice_labels.len())?,
            target: body.target,
            default_evidence: body.baseline_evidence,
            scenarios: Vec::new(),
            template: Some(body.template),
        }),
        ModelBody::Network(_) | ModelBody::Oobn(_) => {
            let m = doc.science_model()?;
            Ok(Loaded {
                network: m.network,
                target: m.target,
                default_evidence: m.default_evidence,
                scenarios: m.scenarios.scenarios,
                template: None,
            })
        }
        _ => Err(CliError::Validation(format!(
            "{}: expected a network, oobn or dbn-template document, found {}",
            path.display(),
            doc.kind().as_str()
        ))),
    }
}

fn pick_target(m: &Loaded, target: Option<String>) -> Result<String, CliError> {
    target
        .or_else(|| m.target.clone())
        .ok_or_else(|| CliError::Usage("no --target given and the model declares none".into()))
}

fn render_posterior(out: &mut String, p: &PosteriorDistribution) {
    let _ = writeln!(out, "{}", p.node);
    for (s, v) in p.states.iter().zip(&p.probabilities) {
        let _ = writeln!(out, "  {s}: {v:.4}");
    }
}

fn validate(file: &Path) -> Result<(String, Value), CliError> {
    let doc = io::load(file)?;
    doc.validate()?;
    let kind = doc.kind().as_str();
    Ok((
        format!("{}: valid {kind}\n", file.display()),
        json!({"file": file.display().to_string(), "kind": kind, "valid": true}),
    ))
}

fn query(path: &Path, target: Option<String>, pairs: &[String], no_default: bool) -> Result<(String, Value), CliError> {
    let m = load_model(path)?;
    let target = pick_target(&m, target)?;
    let mut ev = if no_default {
        Evidence::new()
    } else {
        m.default_evidence.clone()
    };
    for (n, s) in parse_evidence(pairs)?.iter() {
        ev.insert(n, s);
    }
    let mut text = String::new();
    if let Some(t) = m.template.as_ref().filter(|t| t.node(&target).is_some()) {
        let slices = t.slice_posteriors(t.slice_labels.len(), &target, &ev, Execution::default())?;
        for p in &slices {
            render_posterior(&mut text, p);
        }
        return Ok((text, json!({"target": target, "evidence": ev, "slices": slices})));
    }
    let p = posterior(&m.network, &[target.as_str()], &ev)?.remove(0);
    render_posterior(&mut text, &p);
    Ok((text, json!({"target": target, "evidence": ev, "posterior": p})))
}

fn dsep(path: &Path, x: &[String], y: &[String], z: &[String]) -> Result<(String, Value), CliError> {
    let m = load_model(path)?;
    fn r(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    let sep = d_separated(&m.network, &r(x), &r(y), &r(z))?;
    Ok((format!("{sep}\n"), json!({"x": x, "y": y, "z": z, "d_separated": sep})))
}

fn flatten(path: &Path) -> Result<ModelDocument, CliError> {
    let doc = io::load(path)?;
    let ModelBody::Oobn(body) = doc.body else {
        return Err(CliError::Validation(format!(
            "{}: expected an oobn document",
            path.display()
        )));
    };
    let net = body.model.flatten()?;
    Ok(ModelDocument::new(ModelBody::Network(NetworkBody {
        nodes: net.nodes().to_vec(),
        target: body.target,
        default_evidence: body.default_evidence,
        scenarios: body.scenarios,
    })))
}

fn unroll(path: &Path, slices: Option<usize>) -> Result<ModelDocument, CliError> {
    let doc = io::load(path)?;
    let ModelBody::DbnTemplate(body) = doc.body else {
        return Err(CliError::Validation(format!(
            "{}: expected a dbn-template document",
            path.display()
        )));
    };
    let n = slices.unwrap_or(body.template.slice_labels.len());
    let net = body.template.unroll(n)?;
    // baseline evidence only carries over when every referenced slice exists
    let default_evidence = if body.baseline_evidence.nodes().all(|v| net.node(v).is_some()) {
        body.baseline_evidence
    } else {
        Evidence::new()
    };
    Ok(ModelDocument::new(ModelBody::Network(NetworkBody {
        nodes: net.nodes().to_vec(),
        target: None,
        default_evidence,
        scenarios: Vec::new(),
    })))
}

fn sensitivity(path: &Path, target: Option<String>, pairs: &[String]) -> Result<(String, Value), CliError> {
    let m = load_model(path)?;
    let target = pick_target(&m, target)?;
    let report = sensitivity_ranking(&m.network, &target, &parse_evidence(pairs)?)?;
    Ok((report.to_text(), to_value(&report)))
}

fn scenario(model: &Path, file: &Path, name: &str, target: Option<String>) -> Result<(String, Value), CliError> {
    let m = load_model(model)?;
    let target = pick_target(&m, target)?;
    let doc = io::load(file)?;
    let ModelBody::ScenarioSet(set) = doc.body else {
        return Err(CliError::Validation(format!(
            "{}: expected a scenario-set document",
            file.display()
        )));
    };
    let mut known = m.scenarios.clone();
    known.extend(set.scenarios);
    let sc = known
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| CliError::Validation(format!("no scenario `{name}` in {}", file.display())))?;
    let r = evaluate_scenario(&m.network, &sc, &target, &known)?;
    let mut text = format!(
        "scenario {} vs {}\n",
        r.scenario,
        r.baseline.as_deref().unwrap_or("no evidence")
    );
    for (i, s) in r.posterior.states.iter().enumerate() {
        let _ = writeln!(
            text,
            "  {s}: {:.4} (baseline {:.4}, delta {:+.4})",
            r.posterior.probabilities[i], r.baseline_posterior.probabilities[i], r.delta[i]
        );
    }
    Ok((text, to_value(&r)))
}

fn load_catalogue(path: &Path) -> Result<ibn_core::management::Catalogue, CliError> {
    match io::load(path)?.body {
        ModelBody::Catalogue(c) => Ok(c),
        _ => Err(CliError::Validation(format!(
            "{}: expected a catalogue document",
            path.display()
        ))),
    }
}

fn hazard(path: &Path) -> Result<(String, Value), CliError> {
    let cat = load_catalogue(path)?;
    let rows = hazard_report(&cat.sources);
    let w = rows.iter().map(|r| r.source.len()).max().unwrap_or(6).max(6);
    let mut text = format!(
        "{:<w$}  {:<8}  {:<10}  {:>6}  {:>5}  class\n",
        "source", "practice", "nutrient", "p_high", "score"
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<w$}  {:<8}  {:<10}  {:>6.3}  {:>5}  {:?}",
            r.source,
            r.practice.as_str(),
            r.nutrient,
            r.p_high,
            r.rating.score,
            r.rating.value
        );
    }
    Ok((text, to_value(&rows)))
}

fn pipeline(catalogue: &Path, model: &Path, intervention: Option<&Path>) -> Result<(String, Value), CliError> {
    let cat = load_catalogue(catalogue)?;
    let m = load_model(model)?;
    let iv = match intervention {
        None => InterventionSpec::default(),
        Some(p) => match io::load(p)?.body {
            ModelBody::Intervention(iv) => iv,
            _ => {
                return Err(CliError::Validation(format!(
                    "{}: expected an intervention document",
                    p.display()
                )))
            }
        },
    };
    let r = run_pipeline(&cat, &iv, &m.network)?;
    let mut text = format!("{}\n", if r.label.is_empty() { "baseline" } else { &r.label });
    for (n, v) in &r.loads.0 {
        let _ = writeln!(text, "  load {n}: {v:.4}");
    }
    let _ = writeln!(text, "  load index: {:.4}", r.loads.total_index());
    for (n, s) in r.evidence.iter() {
        let _ = writeln!(text, "  evidence {n}={s}");
    }
    let _ = writeln!(
        text,
        "  P({}={}) = {:.4} (baseline {:.4}, delta {:+.4})",
        r.target,
        r.target_state,
        r.probability(),
        r.baseline_probability(),
        r.probability() - r.baseline_probability()
    );
    for w in &r.warnings {
        let _ = writeln!(text, "  warning: {w:?}");
    }
    Ok((text, to_value(&r)))
}

fn probit(path: &Path, config: &RjmcmcConfig, chains: usize) -> Result<(String, Value), CliError> {
    let ModelBody::Dataset(data) = io::load(path)?.body else {
        return Err(CliError::Validation(format!("{}: expected a dataset", path.display())));
    };
    config.validate()?;
    if chains == 0 {
        return Err(CliError::Usage("--chains must be at least 1".into()));
    }
    let report = fit_dataset(&data, &CovariateSpec::default(), config, chains, Execution::default())?;
    Ok((probit_text(&report), to_value(&report)))
}

fn probit_text(r: &FitReport) -> String {
    let s = &r.summary;
    let mut text = format!(
        "{} rows, {} candidates, {} chains, {} samples\n",
        r.rows,
        r.candidates.len(),
        r.chains,
        s.samples
    );
    let _ = writeln!(text, "top models:");
    for m in s.models.iter().take(8) {
        let inc = if m.included.is_empty() {
            "(none)".to_string()
        } else {
            m.included.join(" + ")
        };
        let _ = writeln!(
            text,
            "  {:.4} ± {:.4}  {inc}",
            m.probability.value, m.probability.std_error
        );
    }
    let _ = writeln!(text, "inclusion probabilities:");
    for c in &s.inclusion {
        let _ = writeln!(text, "  {:<28} {:.4}", c.candidate, c.probability.value);
    }
    text
}

fn serve(port: Option<u16>, models: &Path, host: std::net::IpAddr, out: &mut dyn Write) -> Result<(), CliError> {
    let port = match port {
        Some(p) => p,
        None => match std::env::var(PORT_ENV) {
            Ok(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("{PORT_ENV}={v} is not a port number")))?,
            Err(_) => ibn_service::DEFAULT_PORT,
        },
    };
    let registry = ibn_service::Registry::load_dir(models).map_err(|e| CliError::Validation(e.to_string()))?;
    let addr = SocketAddr::new(host, port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    let _ = writeln!(out, "serving {} models on http://{addr}", registry.list().len());
    let _ = out.flush();
    rt.block_on(ibn_service::serve(registry, addr))
        .map_err(|e| CliError::Runtime(format!("server on {addr}: {e}")))
}
