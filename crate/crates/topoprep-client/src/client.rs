use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use topoprep_service::api::{
    CategorySummary, FiguresRequest, FiguresResponse, Health, RunResponse, ScanRequest, SimulateRequest, SweffRequest, SweffResponse,
    TomographyRequest, TomographyResponse,
};
use topoprep_service::ErrorBody;

/// Thin JSON client for a running topoprep service.
#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Client { base, http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(&self, path: &str, resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        let bytes = resp.bytes().await.with_context(|| format!("reading {path}"))?;
        if !status.is_success() {
            match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(e) => bail!("{path}: {status} ({}): {}", e.kind, e.message),
                Err(_) => bail!("{path}: {status}: {}", String::from_utf8_lossy(&bytes)),
            }
        }
        serde_json::from_slice(&bytes).with_context(|| format!("decoding {path} response"))
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.get(&url).send().await.with_context(|| format!("GET {url}"))?;
        self.decode(path, resp).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.post(&url).json(body).send().await.with_context(|| format!("POST {url}"))?;
        self.decode(path, resp).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn categories(&self) -> Result<Vec<CategorySummary>> {
        self.get("/categories").await
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<RunResponse> {
        self.post("/simulate", req).await
    }

    pub async fn scan(&self, req: &ScanRequest) -> Result<RunResponse> {
        self.post("/scan", req).await
    }

    pub async fn sweff(&self, req: &SweffRequest) -> Result<SweffResponse> {
        self.post("/sweff", req).await
    }

    pub async fn tomography(&self, req: &TomographyRequest) -> Result<TomographyResponse> {
        self.post("/tomography", req).await
    }

    pub async fn figures(&self, req: &FiguresRequest) -> Result<FiguresResponse> {
        self.post("/figures", req).await
    }
}
