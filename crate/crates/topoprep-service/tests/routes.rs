use serde_json::{json, Value};
use topoprep_service::api::{CategorySummary, Health, RunResponse, SweffResponse, TomographyResponse};
use topoprep_service::ErrorBody;

async fn base() -> String {
    let (addr, _task) = topoprep_service::spawn(([127, 0, 0, 1], 0).into()).await.unwrap();
    format!("http://{addr}")
}

async fn post(base: &str, path: &str, body: Value) -> reqwest::Response {
    reqwest::Client::new().post(format!("{base}{path}")).json(&body).send().await.unwrap()
}

async fn body<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> T {
    serde_json::from_slice(&resp.bytes().await.unwrap()).unwrap()
}

#[tokio::test]
async fn health_and_categories() {
    let base = base().await;
    let h: Health = body(reqwest::get(format!("{base}/health")).await.unwrap()).await;
    assert_eq!(h.status, "ok");
    let cats: Vec<CategorySummary> = body(reqwest::get(format!("{base}/categories")).await.unwrap()).await;
    assert_eq!(cats.len(), 5);
    assert!(cats.iter().all(|c| c.valid));
    let fib = cats.iter().find(|c| c.name == "fibonacci").unwrap();
    assert!((fib.total_dim - (2.5 + 0.5 * 5f64.sqrt()).sqrt()).abs() < 1e-12);
}

#[tokio::test]
async fn sweff_toric_order_two() {
    let base = base().await;
    let resp = post(&base, "/sweff", json!({"model": "toric", "field": [0.0, 0.0, 1.0]})).await;
    assert!(resp.status().is_success());
    let r: SweffResponse = body(resp).await;
    assert!(r.passed, "{:?}", r.checks);
    let lat = r.lattice.unwrap();
    assert_eq!(lat.tqo.order, Some(2));
    assert_eq!(lat.degeneracy, 4);
}

#[tokio::test]
async fn sweff_majorana_rows() {
    let base = base().await;
    let r: SweffResponse = body(post(&base, "/sweff", json!({"model": "majorana", "eps": 0.05, "chain_lengths": [2, 4]})).await).await;
    assert!(r.passed);
    assert_eq!(r.majorana.len(), 2);
    assert!(r.csv.starts_with("L,g,eps"));
}

#[tokio::test]
async fn simulate_majorana_point() {
    let base = base().await;
    let cfg = json!({"model": "majorana", "family": "theta", "T": 10.0, "dt": 0.1, "chain_lengths": [4]});
    let resp = post(&base, "/simulate", json!({"config": cfg})).await;
    assert!(resp.status().is_success());
    let r: RunResponse = body(resp).await;
    assert!(r.passed, "{:?}", r.output.checks);
    assert_eq!(r.output.rows.len(), 1);
}

#[tokio::test]
async fn simulate_rejects_several_points() {
    let base = base().await;
    let cfg = json!({"model": "majorana", "family": "theta", "T": [5.0, 10.0], "dt": 0.1, "chain_lengths": [4]});
    let resp = post(&base, "/simulate", json!({"config": cfg})).await;
    assert_eq!(resp.status(), 400);
    let e: ErrorBody = body(resp).await;
    assert_eq!(e.kind, "domain");
}

#[tokio::test]
async fn errors_map_to_statuses() {
    let base = base().await;
    let resp = post(&base, "/tomography", json!({"model": "majorana"})).await;
    assert_eq!(resp.status(), 422);
    let e: ErrorBody = body(resp).await;
    assert_eq!(e.kind, "unsupported");

    let cfg = json!({"model": "toric", "family": "theta", "T": 5.0, "dt": -0.1, "angles": [0.0]});
    assert_eq!(post(&base, "/scan", json!({"config": cfg})).await.status(), 400);

    let bad = json!({"config": {"model": "toric", "colour": "blue"}});
    assert!(post(&base, "/scan", bad).await.status().is_client_error());
}

#[tokio::test]
async fn tomography_toric_reference() {
    let base = base().await;
    let resp = post(&base, "/tomography", json!({"model": "toric", "T": 20.0})).await;
    assert!(resp.status().is_success());
    let r: TomographyResponse = body(resp).await;
    assert!(r.passed, "{:?}", r.checks);
    assert_eq!(r.run.report.sectors.len(), 2);
}

#[tokio::test]
async fn figures_skip_empty_tables() {
    let base = base().await;
    let cfg = json!({"model": "toric", "family": "theta", "T": 3.0, "dt": 0.1, "angles": [0.0, 1.0]});
    let r: Value = body(post(&base, "/figures", json!({"config": cfg})).await).await;
    let files = r["files"].as_object().unwrap();
    assert_eq!(files.keys().collect::<Vec<_>>(), vec!["toric_tc_groundspaceoverlap.csv"]);
    let resp = post(&base, "/figures", json!({"config": cfg, "figures": ["nope"]})).await;
    assert_eq!(resp.status(), 400);
}
