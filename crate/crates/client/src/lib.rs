//! Async client for the lighthouse service.

use std::time::Duration;

use lighthouse_api::{
    AdvanceRequest, AdvanceResponse, BiasReport, BiasRequest, ErrorBody, Health, NaiveReport,
    NaiveRequest, ScenarioConfig, ScenarioOutput, SessionConfig, SessionLogs, SessionState,
    Verdict, VerifyRequest,
};
use lighthouse_core::experiments::Tx;
use lighthouse_core::lighthouse::LighthousePulse;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service could not be reached at all.
    #[error("cannot reach {url}: {source}")]
    Unreachable {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("{status}: {}", format_api(.body))]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response ({status}): {message}")]
    Decode { status: StatusCode, message: String },
}

fn format_api(body: &ErrorBody) -> String {
    match &body.field {
        Some(f) => format!("{f}: {}", body.message),
        None => body.message.clone(),
    }
}

impl ClientError {
    /// True when the service rejected the caller's input.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, ClientError::Api { status, .. } if status.is_client_error() && *status != StatusCode::NOT_FOUND)
    }
}

#[derive(Debug, Clone)]
pub struct LighthouseClient {
    base: String,
    http: reqwest::Client,
}

impl LighthouseClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .build()
            .expect("static client config");
        LighthouseClient {
            base: base_url.into().trim_end_matches('/').to_string(),
            http,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req
            .send()
            .await
            .map_err(|source| ClientError::Unreachable {
                url: url.clone(),
                source,
            })?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| ClientError::Decode {
            status,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(body) => ClientError::Api { status, body },
                Err(_) => ClientError::Decode {
                    status,
                    message: String::from_utf8_lossy(&bytes).into_owned(),
                },
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
            status,
            message: e.to_string(),
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.send::<(), T>(Method::GET, path, None).await
    }

    async fn post<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        self.send(Method::POST, path, Some(body)).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn run_scenario(
        &self,
        config: &ScenarioConfig,
    ) -> Result<ScenarioOutput, ClientError> {
        self.post("/v1/scenarios/run", config).await
    }

    /// Send config JSON as written so the service reports errors against
    /// the caller's own field names.
    pub async fn run_scenario_json(
        &self,
        config: &serde_json::Value,
    ) -> Result<ScenarioOutput, ClientError> {
        self.post("/v1/scenarios/run", config).await
    }

    pub async fn bias(&self, req: &BiasRequest) -> Result<BiasReport, ClientError> {
        self.post("/v1/bias", req).await
    }

    pub async fn naive_demo(&self, req: &NaiveRequest) -> Result<NaiveReport, ClientError> {
        self.post("/v1/naive-demo", req).await
    }

    pub async fn verify(&self, req: &VerifyRequest) -> Result<Verdict, ClientError> {
        self.post("/v1/verify", req).await
    }

    pub async fn create_session(
        &self,
        config: &SessionConfig,
    ) -> Result<SessionState, ClientError> {
        self.post("/v1/sessions", config).await
    }

    pub async fn session(&self, id: u64) -> Result<SessionState, ClientError> {
        self.get(&format!("/v1/sessions/{id}")).await
    }

    pub async fn delete_session(&self, id: u64) -> Result<(), ClientError> {
        let url = format!("{}/v1/sessions/{id}", self.base);
        let resp = self
            .http
            .delete(&url)
            .send()
            .await
            .map_err(|source| ClientError::Unreachable { url, source })?;
        let status = resp.status();
        if status.is_success() {
            return Ok(());
        }
        let bytes = resp.bytes().await.unwrap_or_default();
        Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => ClientError::Api { status, body },
            Err(_) => ClientError::Decode {
                status,
                message: String::from_utf8_lossy(&bytes).into_owned(),
            },
        })
    }

    pub async fn submit(&self, id: u64, tx: &Tx) -> Result<SessionState, ClientError> {
        self.post(&format!("/v1/sessions/{id}/transactions"), tx)
            .await
    }

    pub async fn advance(&self, id: u64, blocks: u64) -> Result<AdvanceResponse, ClientError> {
        self.post(
            &format!("/v1/sessions/{id}/advance"),
            &AdvanceRequest { blocks },
        )
        .await
    }

    pub async fn pulses(&self, id: u64) -> Result<Vec<LighthousePulse>, ClientError> {
        self.get(&format!("/v1/sessions/{id}/pulses")).await
    }

    pub async fn latest_pulse(&self, id: u64) -> Result<LighthousePulse, ClientError> {
        self.get(&format!("/v1/sessions/{id}/pulses/latest")).await
    }

    pub async fn pulse(&self, id: u64, index: u64) -> Result<LighthousePulse, ClientError> {
        self.get(&format!("/v1/sessions/{id}/pulses/{index}")).await
    }

    pub async fn logs(&self, id: u64) -> Result<SessionLogs, ClientError> {
        self.get(&format!("/v1/sessions/{id}/logs")).await
    }
}
