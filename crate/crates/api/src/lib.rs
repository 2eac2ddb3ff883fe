//! Request/response types shared by the rtlmend service and its clients.
//!
//! Heavyweight results (session results, campaign results, traces, error
//! info) travel as their core JSON serializations inside `serde_json::Value`
//! fields; this crate pins the envelope shapes and job lifecycle.

use serde::{Deserialize, Serialize};

pub const API_PREFIX: &str = "/api";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

// --- frontend ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseResponse {
    pub ok: bool,
    pub top: Option<String>,
    pub modules: Vec<String>,
    /// Canonical pretty-printed form, present when parsing succeeded.
    pub printed: Option<String>,
    /// Diagnostic objects `{"severity","line","col","code","message"}`.
    pub diagnostics: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LintRequest {
    pub text: String,
    /// Apply template fixes (W1-W3) and return the fixed text.
    #[serde(default)]
    pub fix: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LintResponse {
    pub ok: bool,
    pub diagnostics: Vec<serde_json::Value>,
    pub warnings: Vec<serde_json::Value>,
    pub fixed_text: Option<String>,
}

// --- simulation ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub text: String,
    /// "exhaustive" | "random" | "directed"
    pub mode: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cycles: u64,
    #[serde(default)]
    pub sequences: Option<Vec<Vec<u64>>>,
    /// Also render a VCD dump of the trace.
    #[serde(default)]
    pub vcd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub horizon: u64,
    /// `{"signal": [[time, "binstring"], ...]}`
    pub trace: serde_json::Value,
    pub vcd: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub dut: String,
    pub golden: String,
    /// Default suite when omitted: exhaustive if legal, else a seed sweep.
    #[serde(default)]
    pub seeds: Option<u64>,
    #[serde(default)]
    pub cycles_per_seed: Option<u64>,
    #[serde(default)]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub pass_rate: f64,
    pub total_checks: u64,
    pub passed_checks: u64,
    pub mismatches: Vec<serde_json::Value>,
    /// JSON-lines check log including the trailing summary line.
    pub log: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeRequest {
    pub dut: String,
    pub golden: String,
    /// Iteration number fed to the escalation rule.
    pub iter: u32,
    pub th: u32,
    #[serde(default)]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeResponse {
    /// `{"mode","signals","times","inputs","lines"}`
    pub err_info: serde_json::Value,
    pub pass_rate: f64,
}

// --- benchmark ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectRequest {
    /// Server-local corpus directory containing corpus.json.
    pub corpus_dir: String,
    #[serde(default = "default_per_kind")]
    pub per_kind: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, mutants and benchmark.json are written under this
    /// server-local directory.
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_per_kind() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectResponse {
    pub mutant_count: usize,
    pub discarded_equivalent: usize,
    pub manifest: serde_json::Value,
    pub empty_cells: Vec<(String, String)>,
    pub out_dir: Option<String>,
}

// --- repair sessions and campaigns --------------------------------------------

/// Backend selection for sessions started over the API.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    Null,
    /// Inverse of a known edit; `golden_text` backs whole-file mode.
    Oracle { wrong: String, right: String },
    /// Call-index -> raw response text.
    Scripted { responses: std::collections::BTreeMap<String, String> },
    Remote { endpoint: String, model: String, temperature: f64, key_env: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRequest {
    pub dut: String,
    pub golden: String,
    pub spec_text: String,
    pub backend: BackendSpec,
    /// Core SessionConfig JSON; defaults apply when omitted.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    /// Server-local directory for session artifacts.
    #[serde(default)]
    pub persist_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignRequest {
    /// Server-local corpus directory.
    pub corpus_dir: String,
    /// Reuse a previously injected benchmark (a directory holding
    /// benchmark.json and mutants/) instead of building a fresh one.
    #[serde(default)]
    pub benchmark_dir: Option<String>,
    #[serde(default = "default_per_kind")]
    pub per_kind: usize,
    #[serde(default)]
    pub seed: u64,
    pub backend: BackendSpec,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Server-local directory for campaign.json and heatmap.csv.
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobCreated {
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub state: JobState,
    pub result: Option<serde_json::Value>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
