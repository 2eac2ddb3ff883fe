//! Repair agent plumbing: prompt assembly, structured-response parsing, and
//! snippet-pair patch application, over a pluggable backend.
//!
//! Backends implement [`RepairBackend`]: scripted (fixture-driven), oracle
//! (replays the known golden edit; evaluation only), null (always returns an
//! empty patch list), and remote (generic chat-completion wire).

use crate::lexer::relexes_cleanly;
use crate::source::Diagnostic;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairMode {
    Pair,
    WholeFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptProfile {
    SyntaxFixer,
    FunctionalFixer,
}

/// Error information slot of the prompt: parse/elaboration diagnostics
/// during pre-processing, localization output afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ErrPayload {
    Diagnostics(Vec<Diagnostic>),
    Localization(crate::localize::ErrInfo),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairRequest {
    pub spec_text: String,
    pub dut_text: String,
    pub err_info: ErrPayload,
    /// Patch sets rejected by rollback earlier in this session.
    pub damage_repairs: Vec<PatchSet>,
    pub mode: RepairMode,
    pub profile: PromptProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchPair {
    pub wrong: String,
    pub right: String,
}

/// Ordered original->replacement pairs plus the backend's raw response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSet {
    pub pairs: Vec<PatchPair>,
    pub raw: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResponseError {
    #[error("response contains no JSON object")]
    NoJson,
    #[error("response JSON does not match the expected schema: {0}")]
    SchemaViolation(String),
    #[error("response 'correct' array is empty")]
    EmptyCorrect,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("scripted backend has no response for call {0}")]
    Exhausted(usize),
    #[error("missing API key in environment variable {0}")]
    MissingKey(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatchError {
    #[error("snippet not found: {0:?}")]
    NoMatch(String),
    #[error("snippet matches {count} locations: {snippet:?}")]
    AmbiguousMatch { snippet: String, count: usize },
}

pub trait RepairBackend: Send {
    fn send(&mut self, req: &RepairRequest, prompt: &str) -> Result<String, BackendError>;
    fn name(&self) -> &'static str;
    /// Number of calls made so far.
    fn calls(&self) -> usize;
}

// --- prompt -----------------------------------------------------------------

const REMINDER: &str = "\n\nREMINDER: respond with a single JSON object and nothing else, \
matching the OUTPUT CONTRACT above exactly.";

/// Deterministic prompt with fixed section order. The DAMAGE REPAIRS section
/// is omitted when no rollback has happened.
pub fn build_prompt(req: &RepairRequest) -> String {
    let mut p = String::new();
    match req.profile {
        PromptProfile::SyntaxFixer => {
            p.push_str("You are an RTL repair expert. Fix the syntax errors in the Verilog DUT below without changing its intended behavior.\n");
        }
        PromptProfile::FunctionalFixer => {
            p.push_str("You are an RTL repair expert. The Verilog DUT below fails differential verification against its specification. Find and fix the functional error.\n");
        }
    }
    p.push_str("\n## SPECIFICATION\n");
    p.push_str(&req.spec_text);
    p.push_str("\n\n## DUT CODE\n");
    for (i, line) in req.dut_text.lines().enumerate() {
        p.push_str(&format!("{:>5} | {}\n", i + 1, line));
    }
    p.push_str("\n## ERROR INFO\n");
    match &req.err_info {
        ErrPayload::Diagnostics(diags) => {
            for d in diags {
                p.push_str(&d.to_json_line());
                p.push('\n');
            }
        }
        ErrPayload::Localization(info) => {
            p.push_str(&render_err_info(info));
            p.push('\n');
        }
    }
    if !req.damage_repairs.is_empty() {
        p.push_str("\n## DAMAGE REPAIRS\n");
        p.push_str("These earlier patches made the score worse and were rolled back. Do not propose them again:\n");
        for (i, ps) in req.damage_repairs.iter().enumerate() {
            for pair in &ps.pairs {
                p.push_str(&format!(
                    "{}. wrong: {} right: {}\n",
                    i + 1,
                    serde_json::to_string(&pair.wrong).unwrap(),
                    serde_json::to_string(&pair.right).unwrap()
                ));
            }
        }
    }
    p.push_str("\n## OUTPUT CONTRACT\n");
    match req.mode {
        RepairMode::Pair => {
            p.push_str(
                "Respond with a single JSON object: {\"correct\": [{\"wrong\": \"<exact code snippet to replace>\", \"right\": \"<replacement code>\"}, ...]}. \
Each wrong snippet must appear verbatim (up to whitespace) exactly once in the DUT code.\n",
            );
        }
        RepairMode::WholeFile => {
            p.push_str("Respond with a single JSON object: {\"code\": \"<the complete repaired Verilog file>\"}.\n");
        }
    }
    p
}

/// Mismatch times and per-time input values are capped in the rendered
/// prompt; the full ErrInfo object still serializes uncapped.
fn render_err_info(info: &crate::localize::ErrInfo) -> String {
    const MAX_TIMES: usize = 8;
    let mut capped = info.clone();
    if capped.mismatch_times.len() > MAX_TIMES {
        capped.mismatch_times.truncate(MAX_TIMES);
        for vals in capped.input_values.values_mut() {
            vals.truncate(MAX_TIMES);
        }
    }
    let mut s = serde_json::to_string_pretty(&capped.to_json()).unwrap();
    if info.mismatch_times.len() > MAX_TIMES {
        s.push_str(&format!(
            "\n({} further mismatch times omitted)",
            info.mismatch_times.len() - MAX_TIMES
        ));
    }
    s
}

// --- response parsing -------------------------------------------------------

/// Extract the first JSON object from `raw`, tolerating surrounding prose
/// and code fences, and validate it against the mode's schema.
pub fn parse_response(raw: &str, mode: RepairMode, dut_text: &str) -> Result<PatchSet, ResponseError> {
    let json = extract_json(raw).ok_or(ResponseError::NoJson)?;
    match mode {
        RepairMode::Pair => {
            let arr = json
                .get("correct")
                .and_then(|v| v.as_array())
                .ok_or_else(|| ResponseError::SchemaViolation("missing 'correct' array".into()))?;
            if arr.is_empty() {
                return Err(ResponseError::EmptyCorrect);
            }
            let mut pairs = Vec::with_capacity(arr.len());
            for item in arr {
                let wrong = item
                    .get("wrong")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| ResponseError::SchemaViolation("pair missing 'wrong' string".into()))?;
                let right = item
                    .get("right")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| ResponseError::SchemaViolation("pair missing 'right' string".into()))?;
                if wrong.trim().is_empty() {
                    return Err(ResponseError::SchemaViolation("'wrong' snippet is empty".into()));
                }
                pairs.push(PatchPair { wrong: wrong.to_string(), right: right.to_string() });
            }
            Ok(PatchSet { pairs, raw: raw.to_string() })
        }
        RepairMode::WholeFile => {
            let code = json
                .get("code")
                .and_then(|v| v.as_str())
                .ok_or_else(|| ResponseError::SchemaViolation("missing 'code' string".into()))?;
            if code.trim().is_empty() {
                return Err(ResponseError::SchemaViolation("'code' is empty".into()));
            }
            Ok(PatchSet {
                pairs: vec![PatchPair { wrong: dut_text.to_string(), right: code.to_string() }],
                raw: raw.to_string(),
            })
        }
    }
}

fn extract_json(raw: &str) -> Option<serde_json::Value> {
    // fenced block first
    for fence in ["```json", "```"] {
        if let Some(start) = raw.find(fence) {
            let rest = &raw[start + fence.len()..];
            if let Some(end) = rest.find("```") {
                if let Ok(v) = serde_json::from_str::<serde_json::Value>(rest[..end].trim()) {
                    if v.is_object() {
                        return Some(v);
                    }
                }
            }
        }
    }
    // first balanced object
    let bytes = raw.as_bytes();
    let mut start = None;
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escape = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            if escape {
                escape = false;
            } else if b == b'\\' {
                escape = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => {
                if start.is_none() {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' => {
                if let Some(s) = start {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v) = serde_json::from_str::<serde_json::Value>(&raw[s..=i]) {
                            return Some(v);
                        }
                        start = None;
                    }
                }
            }
            _ => {}
        }
    }
    None
}

// --- patch application ------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ApplyReport {
    pub text: String,
    /// Indices of pairs that were applied.
    pub applied: Vec<usize>,
    pub issues: Vec<(usize, PatchError)>,
    /// True when the patched text still lexes without errors.
    pub relexes: bool,
}

impl ApplyReport {
    pub fn changed(&self) -> bool {
        !self.applied.is_empty()
    }
}

/// Apply pairs in order by whitespace-normalized unique matching. A failing
/// pair is skipped and recorded; the remaining pairs are still attempted.
pub fn apply_patchset(dut_text: &str, ps: &PatchSet) -> ApplyReport {
    let mut text = dut_text.to_string();
    let mut applied = Vec::new();
    let mut issues = Vec::new();
    for (i, pair) in ps.pairs.iter().enumerate() {
        match apply_pair(&text, pair) {
            Ok(next) => {
                text = next;
                applied.push(i);
            }
            Err(e) => issues.push((i, e)),
        }
    }
    let relexes = relexes_cleanly(&text);
    ApplyReport { text, applied, issues, relexes }
}

/// Normalized view of a text: runs of spaces/tabs collapse to one space,
/// leading/trailing whitespace per line is dropped, blank lines are dropped.
/// `map` gives the original byte offset of every normalized byte.
struct Normalized {
    text: String,
    map: Vec<usize>,
}

fn normalize(text: &str) -> Normalized {
    let mut out = String::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut line_start = 0usize;
    let mut first_line = true;
    while line_start <= bytes.len() {
        let line_end = text[line_start..]
            .find('\n')
            .map(|i| line_start + i)
            .unwrap_or(bytes.len());
        let line = &text[line_start..line_end];
        // trim and collapse, tracking offsets
        let mut pending_space: Option<usize> = None;
        let mut wrote_any = false;
        for (j, b) in line.bytes().enumerate() {
            if b == b' ' || b == b'\t' || b == b'\r' {
                if wrote_any {
                    pending_space = Some(line_start + j);
                }
            } else {
                if !wrote_any && !first_line && !out.is_empty() {
                    out.push('\n');
                    map.push(line_start + j);
                }
                if let Some(sp) = pending_space.take() {
                    out.push(' ');
                    map.push(sp);
                }
                out.push(b as char);
                map.push(line_start + j);
                wrote_any = true;
            }
        }
        if wrote_any {
            first_line = false;
        }
        if line_end >= bytes.len() {
            break;
        }
        line_start = line_end + 1;
    }
    Normalized { text: out, map }
}

fn apply_pair(text: &str, pair: &PatchPair) -> Result<String, PatchError> {
    let norm_text = normalize(text);
    let norm_snippet = normalize(&pair.wrong);
    if norm_snippet.text.is_empty() {
        return Err(PatchError::NoMatch(pair.wrong.clone()));
    }
    let mut matches = Vec::new();
    let mut from = 0usize;
    while let Some(pos) = norm_text.text[from..].find(&norm_snippet.text) {
        matches.push(from + pos);
        from = from + pos + norm_snippet.text.len();
    }
    match matches.len() {
        0 => Err(PatchError::NoMatch(pair.wrong.clone())),
        1 => {
            let start_norm = matches[0];
            let end_norm = start_norm + norm_snippet.text.len() - 1;
            let orig_start = norm_text.map[start_norm];
            let orig_end = norm_text.map[end_norm] + 1;
            // indentation of the line the match starts on
            let line_begin = text[..orig_start].rfind('\n').map(|i| i + 1).unwrap_or(0);
            let indent: String = text[line_begin..orig_start].to_string();
            let at_line_start = indent.chars().all(|c| c == ' ' || c == '\t');
            let replacement = reindent(&pair.right, if at_line_start { &indent } else { "" });
            let mut next = String::with_capacity(text.len());
            next.push_str(&text[..orig_start]);
            next.push_str(&replacement);
            next.push_str(&text[orig_end..]);
            Ok(next)
        }
        n => Err(PatchError::AmbiguousMatch { snippet: pair.wrong.clone(), count: n }),
    }
}

/// First line takes the matched region's indentation (replacing its own);
/// later lines are kept verbatim.
fn reindent(right: &str, indent: &str) -> String {
    let mut lines = right.lines();
    let mut out = String::new();
    if let Some(first) = lines.next() {
        out.push_str(first.trim_start());
        let _ = indent; // first line lands after the original indent, which is preserved in the text
    }
    for line in lines {
        out.push('\n');
        out.push_str(line);
    }
    out
}

/// Outcome of one repair call: the parsed patch set, calls made (1 or 2
/// with the retry), and wall time spent inside the backend itself. Backend
/// wait is accounted separately so algorithmic timing stays comparable
/// across local and remote backends.
#[derive(Debug)]
pub struct RepairCall {
    pub patchset: PatchSet,
    pub calls: usize,
    pub backend_wait_s: f64,
}

/// Send, parse, and on a malformed response retry once with a format
/// reminder appended.
pub fn request_patches(
    backend: &mut dyn RepairBackend,
    req: &RepairRequest,
) -> Result<RepairCall, RepairCallError> {
    let prompt = build_prompt(req);
    let mut wait = 0.0f64;
    let mut timed_send = |b: &mut dyn RepairBackend, p: &str| -> Result<String, BackendError> {
        let t = std::time::Instant::now();
        let out = b.send(req, p);
        wait += t.elapsed().as_secs_f64();
        out
    };
    let raw = timed_send(backend, &prompt).map_err(RepairCallError::Backend)?;
    match parse_response(&raw, req.mode, &req.dut_text) {
        Ok(ps) => Ok(RepairCall { patchset: ps, calls: 1, backend_wait_s: wait }),
        Err(first_err) => {
            let retry_prompt = format!("{prompt}{REMINDER}");
            let raw2 = timed_send(backend, &retry_prompt).map_err(RepairCallError::Backend)?;
            match parse_response(&raw2, req.mode, &req.dut_text) {
                Ok(ps) => Ok(RepairCall { patchset: ps, calls: 2, backend_wait_s: wait }),
                Err(second_err) => Err(RepairCallError::BadResponse { first: first_err, second: second_err }),
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum RepairCallError {
    #[error(transparent)]
    Backend(BackendError),
    #[error("malformed response after retry: {first}; retry: {second}")]
    BadResponse { first: ResponseError, second: ResponseError },
}

// --- backends ---------------------------------------------------------------

/// Fixture-driven backend: a JSON object mapping call index to raw response
/// text, e.g. `{"0": "...", "1": "..."}`. Records the prompts it received.
pub struct ScriptedBackend {
    responses: BTreeMap<usize, String>,
    cursor: usize,
    pub prompts: Vec<String>,
}

impl ScriptedBackend {
    pub fn new(responses: BTreeMap<usize, String>) -> Self {
        ScriptedBackend { responses, cursor: 0, prompts: Vec::new() }
    }

    pub fn from_responses(list: &[&str]) -> Self {
        Self::new(list.iter().enumerate().map(|(i, s)| (i, s.to_string())).collect())
    }

    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn from_json_str(text: &str) -> Result<Self, String> {
        let map: BTreeMap<String, String> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut responses = BTreeMap::new();
        for (k, v) in map {
            let idx: usize = k.parse().map_err(|_| format!("non-numeric call index '{k}'"))?;
            responses.insert(idx, v);
        }
        Ok(ScriptedBackend::new(responses))
    }
}

impl RepairBackend for ScriptedBackend {
    fn send(&mut self, _req: &RepairRequest, prompt: &str) -> Result<String, BackendError> {
        self.prompts.push(prompt.to_string());
        let idx = self.cursor;
        self.cursor += 1;
        self.responses.get(&idx).cloned().ok_or(BackendError::Exhausted(idx))
    }

    fn name(&self) -> &'static str {
        "scripted"
    }

    fn calls(&self) -> usize {
        self.cursor
    }
}

/// Replays the reverse of a known injected edit (pair mode) or the full
/// golden source (whole-file mode). Evaluation only.
pub struct OracleBackend {
    /// The injected (faulty) snippet, as it appears in the mutant.
    pub wrong: String,
    /// The original (correct) snippet.
    pub right: String,
    pub golden_text: String,
    calls: usize,
}

impl OracleBackend {
    pub fn new(wrong: String, right: String, golden_text: String) -> Self {
        OracleBackend { wrong, right, golden_text, calls: 0 }
    }
}

impl RepairBackend for OracleBackend {
    fn send(&mut self, req: &RepairRequest, _prompt: &str) -> Result<String, BackendError> {
        self.calls += 1;
        let body = match req.mode {
            RepairMode::Pair => serde_json::json!({
                "correct": [{"wrong": self.wrong, "right": self.right}]
            }),
            RepairMode::WholeFile => serde_json::json!({ "code": self.golden_text }),
        };
        Ok(body.to_string())
    }

    fn name(&self) -> &'static str {
        "oracle"
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Always returns an empty patch list; every repair iteration fails, leaving
/// only the script-only pre-processing path.
pub struct NullBackend {
    calls: usize,
}

impl NullBackend {
    pub fn new() -> Self {
        NullBackend { calls: 0 }
    }
}

impl Default for NullBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl RepairBackend for NullBackend {
    fn send(&mut self, _req: &RepairRequest, _prompt: &str) -> Result<String, BackendError> {
        self.calls += 1;
        Ok("{\"correct\":[]}".to_string())
    }

    fn name(&self) -> &'static str {
        "null"
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Generic chat-completion wire: POSTs `{"model","messages","temperature"}`
/// and reads `choices[0].message.content`. The API key comes from the
/// environment variable named in `key_env`.
pub struct RemoteBackend {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub key_env: String,
    client: reqwest::blocking::Client,
    calls: usize,
}

impl RemoteBackend {
    pub fn new(endpoint: String, model: String, temperature: f64, key_env: String) -> Self {
        RemoteBackend { endpoint, model, temperature, key_env, client: reqwest::blocking::Client::new(), calls: 0 }
    }
}

impl RepairBackend for RemoteBackend {
    fn send(&mut self, _req: &RepairRequest, prompt: &str) -> Result<String, BackendError> {
        self.calls += 1;
        let key = std::env::var(&self.key_env).map_err(|_| BackendError::MissingKey(self.key_env.clone()))?;
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let payload: serde_json::Value = resp.json().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}: {payload}")));
        }
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| BackendError::Transport("response lacks choices[0].message.content".into()))
    }

    fn name(&self) -> &'static str {
        "remote"
    }

    fn calls(&self) -> usize {
        self.calls
    }
}
