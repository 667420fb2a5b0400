use std::path::PathBuf;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ibn_core::analysis::{evaluate_scenario, sensitivity_ranking_with};
use ibn_core::io::ModelBody;
use ibn_core::pipeline::run_pipeline;
use ibn_core::probit::{fit_dataset, CovariateSpec, RjmcmcConfig};
use ibn_core::{posterior, Evidence, Execution};
use ibn_service::{router, Compiled, Registry};
use serde_json::{json, Value};
use tower::ServiceExt;

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn registry() -> Registry {
    Registry::load_dir(&models_dir()).expect("bundled models load")
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

fn demo_net(reg: &Registry) -> &ibn_core::Network {
    reg.get("demo").unwrap().network().unwrap()
}

#[tokio::test]
async fn lists_bundled_models() {
    let app = router(registry());
    let (s, v) = call(&app, "GET", "/models", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_str().unwrap())
        .collect();
    for id in ["bloom-monthly", "catalogue", "demo", "demo-dynamic", "scenarios"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    let (s, v) = call(&app, "GET", "/models/demo", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["kind"], "oobn");
    let (s, v) = call(&app, "GET", "/interventions", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_object().unwrap().len(), 8);
}

#[tokio::test]
async fn query_matches_library_exactly() {
    let reg = registry();
    let net = demo_net(&reg).clone();
    let default_ev = reg.get("demo").unwrap().default_evidence();
    let app = router(reg);

    let (s, v) = call(&app, "POST", "/models/demo/query", Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    let want = posterior(&net, &["BloomInitiation"], &default_ev).unwrap().remove(0);
    assert_eq!(v["posterior"], serde_json::to_value(&want).unwrap());
    assert_eq!(v["target"], "BloomInitiation");

    let ev = [("water.Rain", "High"), ("Temperature", "Low")]
        .into_iter()
        .collect::<Evidence>();
    let (s, v) = call(
        &app,
        "POST",
        "/models/demo/query",
        Some(json!({"target": "nutrients.AvailableNutrientPool", "evidence": ev})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let want = posterior(&net, &["nutrients.AvailableNutrientPool"], &ev)
        .unwrap()
        .remove(0);
    assert_eq!(v["posterior"], serde_json::to_value(&want).unwrap());
}

#[tokio::test]
async fn dynamic_query_returns_slices() {
    let reg = registry();
    let Compiled::Dynamic { body, .. } = &reg.get("demo-dynamic").unwrap().compiled else {
        panic!("demo-dynamic is not dynamic");
    };
    let n = body.template.slice_labels.len();
    let want = body
        .template
        .slice_posteriors(n, "BloomInitiation", &body.baseline_evidence, Execution::Sequential)
        .unwrap();
    let app = router(reg);
    let (s, v) = call(&app, "POST", "/models/demo-dynamic/query", Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["slices"], serde_json::to_value(&want).unwrap());
    assert!(v.get("posterior").is_none());

    let (s, v) = call(
        &app,
        "POST",
        "/models/demo-dynamic/query",
        Some(json!({"target": "Dec.BloomInitiation"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["posterior"], serde_json::to_value(&want[1]).unwrap());
}

#[tokio::test]
async fn scenario_and_sensitivity_match_library() {
    let reg = registry();
    let net = demo_net(&reg).clone();
    let known = reg.scenarios_for("demo");
    let app = router(reg);

    let storm = known.iter().find(|s| s.name == "storm").unwrap();
    let want = evaluate_scenario(&net, storm, "BloomInitiation", &known).unwrap();
    let (s, v) = call(&app, "POST", "/models/demo/scenario", Some(json!({"name": "storm"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(&want).unwrap());

    let want = sensitivity_ranking_with(&net, "BloomInitiation", &storm.evidence, Execution::Sequential).unwrap();
    let (s, v) = call(&app, "GET", "/models/demo/sensitivity?scenario=storm", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(&want).unwrap());

    let ev = [("Temperature", "High"), ("water.Rain", "Low")]
        .into_iter()
        .collect::<Evidence>();
    let want = sensitivity_ranking_with(&net, "BloomInitiation", &ev, Execution::Sequential).unwrap();
    let (s, v) = call(
        &app,
        "GET",
        "/models/demo/sensitivity?evidence=Temperature=High,water.Rain=Low",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(&want).unwrap());
}

#[tokio::test]
async fn pipeline_matches_library() {
    let reg = registry();
    let net = demo_net(&reg).clone();
    let (_, cat) = reg.catalogue(None).unwrap();
    let cat = cat.clone();
    let wwtp = reg.intervention("wwtp").unwrap().clone();
    let app = router(reg);

    let want = run_pipeline(&cat, &wwtp, &net).unwrap();
    let (s, v) = call(&app, "POST", "/pipeline/run", Some(json!({"intervention_id": "wwtp"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(&want).unwrap());

    let (s, v) = call(&app, "POST", "/pipeline/run", Some(json!({"intervention": wwtp}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(&want).unwrap());
}

fn code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or("")
}

#[tokio::test]
async fn error_statuses() {
    let app = router(registry());
    let (s, v) = call(&app, "GET", "/models/nope", None).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "model_not_found"));
    let (s, v) = call(&app, "POST", "/models/nope/query", Some(json!({}))).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "model_not_found"));
    let (s, v) = call(&app, "POST", "/models/demo/scenario", Some(json!({"name": "nope"}))).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "scenario_not_found"));
    let (s, v) = call(&app, "GET", "/probit/jobs/999", None).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "job_not_found"));

    // An Enough pool forces a bloom, so observing no bloom is impossible.
    let ev = json!({"nutrients.AvailableNutrientPool": "Enough", "BloomInitiation": "No"});
    let (s, v) = call(
        &app,
        "POST",
        "/models/demo/query",
        Some(json!({"target": "Temperature", "evidence": ev})),
    )
    .await;
    assert_eq!(
        (s, code(&v)),
        (StatusCode::UNPROCESSABLE_ENTITY, "zero_probability_evidence")
    );

    let (s, _) = call(&app, "POST", "/models/demo/query", Some(json!({"target": "Missing"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(
        &app,
        "POST",
        "/models/demo/query",
        Some(json!({"evidence": {"Temperature": "Boiling"}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/models/demo/query", Some(json!({"bogus": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&app, "POST", "/models/catalogue/query", Some(json!({}))).await;
    assert_eq!((s, code(&v)), (StatusCode::BAD_REQUEST, "wrong_model_kind"));
    let (s, _) = call(
        &app,
        "POST",
        "/probit/fit",
        Some(json!({"dataset": "bloom-monthly", "iterations": 100, "burn_in": 200})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&app, "POST", "/probit/fit", Some(json!({"dataset": "demo"}))).await;
    assert_eq!((s, code(&v)), (StatusCode::BAD_REQUEST, "wrong_model_kind"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_queries_agree() {
    let app = router(registry());
    let body = json!({"evidence": {"water.Rain": "High", "air.Wind": "Onshore"}});
    let mut handles = Vec::new();
    for _ in 0..50 {
        let app = app.clone();
        let body = body.clone();
        handles.push(tokio::spawn(async move {
            call(&app, "POST", "/models/demo/query", Some(body)).await
        }));
    }
    let mut results = Vec::new();
    for h in handles {
        let (s, v) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        results.push(v.to_string());
    }
    assert!(results.iter().all(|r| r == &results[0]));
}

async fn wait_for(app: &Router, id: u64) -> Value {
    let deadline = Instant::now() + Duration::from_secs(600);
    loop {
        let (s, v) = call(app, "GET", &format!("/probit/jobs/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if v["status"] != "running" {
            return v;
        }
        assert!(Instant::now() < deadline, "job {id} did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn probit_job_lifecycle() {
    let reg = registry();
    let ModelBody::Dataset(data) = &reg.get("bloom-monthly").unwrap().document.body else {
        panic!("bloom-monthly is not a dataset");
    };
    let config = RjmcmcConfig {
        iterations: 1500,
        burn_in: 300,
        seed: 9,
        ..RjmcmcConfig::default()
    };
    let want = fit_dataset(data, &CovariateSpec::default(), &config, 2, Execution::Sequential).unwrap();
    let app = router(reg);

    let (s, v) = call(
        &app,
        "POST",
        "/probit/fit",
        Some(json!({"dataset": "bloom-monthly", "iterations": 1500, "burn_in": 300, "seed": 9, "chains": 2})),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(v["status"], "running");
    let id = v["job_id"].as_u64().unwrap();
    let done = wait_for(&app, id).await;
    assert_eq!(done["status"], "succeeded");
    assert_eq!(done["result"], serde_json::to_value(&want).unwrap());
}

async fn median_query(app: &Router, n: usize) -> Duration {
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        let t = Instant::now();
        let (s, _) = call(app, "POST", "/models/demo/query", Some(json!({}))).await;
        times.push(t.elapsed());
        assert_eq!(s, StatusCode::OK);
    }
    times.sort();
    times[n / 2]
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn queries_stay_fast_during_a_fit() {
    let app = router(registry());
    let idle = median_query(&app, 15).await;
    let (s, v) = call(
        &app,
        "POST",
        "/probit/fit",
        Some(json!({"dataset": "bloom-monthly", "iterations": 30000, "burn_in": 1000, "chains": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let id = v["job_id"].as_u64().unwrap();
    let busy = median_query(&app, 15).await;
    let (_, j) = call(&app, "GET", &format!("/probit/jobs/{id}"), None).await;
    assert_eq!(j["status"], "running", "the fit finished before the queries did");
    assert!(busy < idle * 10, "median query {busy:?} during a fit, {idle:?} idle");
    assert_eq!(wait_for(&app, id).await["status"], "succeeded");
}
