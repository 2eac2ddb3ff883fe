//! Blocking HTTP client for the rtlmend service.

use rtlmend_api as api;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("job {id} failed: {error}")]
    JobFailed { id: String, error: String },
    #[error("decode: {0}")]
    Decode(#[from] serde_json::Error),
}

pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
    /// Poll interval for background jobs.
    pub poll_interval: Duration,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Client {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(600))
                .build()
                .expect("client builds"),
            poll_interval: Duration::from_millis(100),
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, ClientError> {
        let resp = self.http.post(format!("{}{}", self.base, path)).json(body).send()?;
        Self::decode(resp)
    }

    fn get<Resp: DeserializeOwned>(&self, path: &str) -> Result<Resp, ClientError> {
        let resp = self.http.get(format!("{}{}", self.base, path)).send()?;
        Self::decode(resp)
    }

    fn decode<Resp: DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<Resp, ClientError> {
        let status = resp.status();
        if status.is_success() {
            Ok(resp.json()?)
        } else {
            let message = resp
                .json::<api::ErrorBody>()
                .map(|b| b.error)
                .unwrap_or_else(|_| status.canonical_reason().unwrap_or("unknown").to_string());
            Err(ClientError::Server { status: status.as_u16(), message })
        }
    }

    pub fn health(&self) -> Result<api::HealthResponse, ClientError> {
        self.get("/health")
    }

    pub fn parse(&self, req: &api::ParseRequest) -> Result<api::ParseResponse, ClientError> {
        self.post("/api/parse", req)
    }

    pub fn lint(&self, req: &api::LintRequest) -> Result<api::LintResponse, ClientError> {
        self.post("/api/lint", req)
    }

    pub fn simulate(&self, req: &api::SimulateRequest) -> Result<api::SimulateResponse, ClientError> {
        self.post("/api/simulate", req)
    }

    pub fn verify(&self, req: &api::VerifyRequest) -> Result<api::VerifyResponse, ClientError> {
        self.post("/api/verify", req)
    }

    pub fn localize(&self, req: &api::LocalizeRequest) -> Result<api::LocalizeResponse, ClientError> {
        self.post("/api/localize", req)
    }

    pub fn inject(&self, req: &api::InjectRequest) -> Result<api::InjectResponse, ClientError> {
        self.post("/api/inject", req)
    }

    pub fn start_session(&self, req: &api::SessionRequest) -> Result<api::JobCreated, ClientError> {
        self.post("/api/sessions", req)
    }

    pub fn start_campaign(&self, req: &api::CampaignRequest) -> Result<api::JobCreated, ClientError> {
        self.post("/api/campaigns", req)
    }

    pub fn job(&self, id: &str) -> Result<api::JobStatus, ClientError> {
        self.get(&format!("/api/jobs/{id}"))
    }

    /// Poll a job to completion and return its result value.
    pub fn wait_job(&self, id: &str) -> Result<serde_json::Value, ClientError> {
        loop {
            let status = self.job(id)?;
            match status.state {
                api::JobState::Running => std::thread::sleep(self.poll_interval),
                api::JobState::Done => return Ok(status.result.unwrap_or(serde_json::Value::Null)),
                api::JobState::Failed => {
                    return Err(ClientError::JobFailed {
                        id: id.to_string(),
                        error: status.error.unwrap_or_default(),
                    })
                }
            }
        }
    }

    /// Start a session job and wait for its SessionResult JSON.
    pub fn run_session(&self, req: &api::SessionRequest) -> Result<serde_json::Value, ClientError> {
        let job = self.start_session(req)?;
        self.wait_job(&job.id)
    }

    /// Start a campaign job and wait for its CampaignResult JSON.
    pub fn run_campaign(&self, req: &api::CampaignRequest) -> Result<serde_json::Value, ClientError> {
        let job = self.start_campaign(req)?;
        self.wait_job(&job.id)
    }
}
