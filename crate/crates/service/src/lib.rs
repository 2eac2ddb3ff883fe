//! HTTP service exposing the verification and repair pipeline.
//!
//! Cheap operations (parse, lint, simulate, verify, localize, inject) are
//! synchronous; repair sessions and benchmark campaigns run as background
//! jobs polled via `/api/jobs/{id}`.

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use rtlmend_api as api;
use rtlmend_core::agent::{NullBackend, OracleBackend, RemoteBackend, RepairBackend, ScriptedBackend};
use rtlmend_core::campaign::{benchmark_from_manifest, heatmap_csv, run_campaign, BackendConfig, CampaignConfig};
use rtlmend_core::corpus::{load_corpus, validate_corpus};
use rtlmend_core::elaborate::parse_and_elaborate;
use rtlmend_core::errgen::{build_benchmark, Plan};
use rtlmend_core::lint::{apply_templates, lint};
use rtlmend_core::localize::fetch_err_info;
use rtlmend_core::orchestrator::{run_session, SessionConfig};
use rtlmend_core::printer::print;
use rtlmend_core::sim::simulate;
use rtlmend_core::source::SourceFile;
use rtlmend_core::stimulus::{default_suite, make_stimulus, StimMode, SuiteConfig};
use rtlmend_core::testbench::run_verify_suite;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use uuid::Uuid;

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<Mutex<HashMap<String, api::JobStatus>>>,
}

pub fn app() -> Router {
    let state = AppState::default();
    Router::new()
        .route("/health", get(health))
        .route("/api/parse", post(parse_handler))
        .route("/api/lint", post(lint_handler))
        .route("/api/simulate", post(simulate_handler))
        .route("/api/verify", post(verify_handler))
        .route("/api/localize", post(localize_handler))
        .route("/api/inject", post(inject_handler))
        .route("/api/sessions", post(session_handler))
        .route("/api/campaigns", post(campaign_handler))
        .route("/api/jobs/{id}", get(job_handler))
        .with_state(state)
}

/// Bind an ephemeral (or fixed) port and serve until the process exits.
pub async fn serve(addr: std::net::SocketAddr) -> anyhow::Result<std::net::SocketAddr> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        axum::serve(listener, app()).await.expect("server runs");
    });
    Ok(local)
}

type ApiError = (StatusCode, Json<api::ErrorBody>);

fn bad_request(msg: impl Into<String>) -> ApiError {
    (StatusCode::BAD_REQUEST, Json(api::ErrorBody { error: msg.into() }))
}

fn internal(msg: impl std::fmt::Display) -> ApiError {
    (StatusCode::INTERNAL_SERVER_ERROR, Json(api::ErrorBody { error: msg.to_string() }))
}

async fn health() -> Json<api::HealthResponse> {
    Json(api::HealthResponse { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

fn diag_values(diags: &[rtlmend_core::Diagnostic]) -> Vec<serde_json::Value> {
    diags.iter().map(|d| serde_json::to_value(d).unwrap()).collect()
}

async fn parse_handler(Json(req): Json<api::ParseRequest>) -> Json<api::ParseResponse> {
    let src = SourceFile::new("input.v", req.text);
    match rtlmend_core::parser::parse(&src) {
        Ok(design) => Json(api::ParseResponse {
            ok: true,
            top: Some(design.top.clone()),
            modules: design.modules.iter().map(|m| m.name.clone()).collect(),
            printed: Some(print(&design)),
            diagnostics: vec![],
        }),
        Err(diags) => Json(api::ParseResponse {
            ok: false,
            top: None,
            modules: vec![],
            printed: None,
            diagnostics: diag_values(&diags),
        }),
    }
}

async fn lint_handler(Json(req): Json<api::LintRequest>) -> Json<api::LintResponse> {
    let src = SourceFile::new("input.v", req.text);
    match parse_and_elaborate(&src) {
        Ok((design, elab)) => {
            let warns = lint(&design, &elab);
            let fixed_text = if req.fix {
                let fixable: Vec<_> = warns.iter().filter(|w| w.fixable).cloned().collect();
                if fixable.is_empty() {
                    None
                } else {
                    apply_templates(&design, &fixable).ok().map(|d| print(&d))
                }
            } else {
                None
            };
            Json(api::LintResponse {
                ok: true,
                diagnostics: vec![],
                warnings: warns.iter().map(|w| serde_json::to_value(w.to_diagnostic()).unwrap()).collect(),
                fixed_text,
            })
        }
        Err(diags) => Json(api::LintResponse {
            ok: false,
            diagnostics: diag_values(&diags),
            warnings: vec![],
            fixed_text: None,
        }),
    }
}

fn parse_mode(mode: &str) -> Result<StimMode, ApiError> {
    match mode {
        "exhaustive" => Ok(StimMode::Exhaustive),
        "random" => Ok(StimMode::Random),
        "directed" => Ok(StimMode::Directed),
        other => Err(bad_request(format!("unknown stimulus mode '{other}'"))),
    }
}

async fn simulate_handler(Json(req): Json<api::SimulateRequest>) -> Result<Json<api::SimulateResponse>, ApiError> {
    let mode = parse_mode(&req.mode)?;
    let out = tokio::task::spawn_blocking(move || -> Result<api::SimulateResponse, String> {
        let src = SourceFile::new("input.v", req.text);
        let (_, elab) = parse_and_elaborate(&src).map_err(|d| format!("{d:?}"))?;
        let stim =
            make_stimulus(&elab, mode, req.seed, req.cycles, req.sequences).map_err(|e| e.to_string())?;
        let trace = simulate(&elab, &stim).map_err(|e| e.to_string())?;
        let vcd = if req.vcd {
            let mut buf = Vec::new();
            rtlmend_core::vcd::write_vcd(&trace, &elab.top_name, &mut buf).map_err(|e| e.to_string())?;
            Some(String::from_utf8_lossy(&buf).into_owned())
        } else {
            None
        };
        Ok(api::SimulateResponse { horizon: trace.horizon, trace: trace.to_json(), vcd })
    })
    .await
    .map_err(internal)?
    .map_err(bad_request)?;
    Ok(Json(out))
}

fn suite_config(seeds: Option<u64>, cycles: Option<u64>, master: Option<u64>) -> SuiteConfig {
    let mut cfg = SuiteConfig::default();
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    if let Some(c) = cycles {
        cfg.cycles_per_seed = c;
    }
    if let Some(m) = master {
        cfg.master_seed = m;
    }
    cfg
}

async fn verify_handler(Json(req): Json<api::VerifyRequest>) -> Result<Json<api::VerifyResponse>, ApiError> {
    let out = tokio::task::spawn_blocking(move || -> Result<api::VerifyResponse, String> {
        let dut_src = SourceFile::new("dut.v", req.dut);
        let golden_src = SourceFile::new("golden.v", req.golden);
        let (_, dut) = parse_and_elaborate(&dut_src).map_err(|d| format!("dut: {d:?}"))?;
        let (_, golden) = parse_and_elaborate(&golden_src).map_err(|d| format!("golden: {d:?}"))?;
        let cfg = suite_config(req.seeds, req.cycles_per_seed, req.master_seed);
        let suite = default_suite(&golden, &cfg).map_err(|e| e.to_string())?;
        let report = run_verify_suite(&dut, &golden, &suite).map_err(|e| e.to_string())?;
        Ok(api::VerifyResponse {
            pass_rate: report.pass_rate,
            total_checks: report.total_checks,
            passed_checks: report.passed_checks,
            mismatches: report.mismatches.iter().map(|m| serde_json::to_value(m).unwrap()).collect(),
            log: report.log,
        })
    })
    .await
    .map_err(internal)?
    .map_err(bad_request)?;
    Ok(Json(out))
}

async fn localize_handler(Json(req): Json<api::LocalizeRequest>) -> Result<Json<api::LocalizeResponse>, ApiError> {
    let out = tokio::task::spawn_blocking(move || -> Result<api::LocalizeResponse, String> {
        let dut_src = SourceFile::new("dut.v", req.dut);
        let golden_src = SourceFile::new("golden.v", req.golden);
        let (_, dut) = parse_and_elaborate(&dut_src).map_err(|d| format!("dut: {d:?}"))?;
        let (_, golden) = parse_and_elaborate(&golden_src).map_err(|d| format!("golden: {d:?}"))?;
        let cfg = suite_config(None, None, req.master_seed);
        let suite = default_suite(&golden, &cfg).map_err(|e| e.to_string())?;
        let report = run_verify_suite(&dut, &golden, &suite).map_err(|e| e.to_string())?;
        let info = fetch_err_info(&dut, &report, req.iter, req.th).map_err(|e| e.to_string())?;
        Ok(api::LocalizeResponse { err_info: info.to_json(), pass_rate: report.pass_rate })
    })
    .await
    .map_err(internal)?
    .map_err(bad_request)?;
    Ok(Json(out))
}

async fn inject_handler(Json(req): Json<api::InjectRequest>) -> Result<Json<api::InjectResponse>, ApiError> {
    let out = tokio::task::spawn_blocking(move || -> Result<api::InjectResponse, String> {
        let corpus = load_corpus(&req.corpus_dir).map_err(|e| e.to_string())?;
        validate_corpus(&corpus).map_err(|e| e.to_string())?;
        let set = build_benchmark(&corpus, &Plan { per_kind: req.per_kind }, req.seed);
        let out_dir = if let Some(dir) = &req.out_dir {
            let dir = std::path::PathBuf::from(dir);
            std::fs::create_dir_all(dir.join("mutants")).map_err(|e| e.to_string())?;
            for m in &set.mutants {
                std::fs::write(dir.join("mutants").join(format!("{}.v", m.id)), &m.mutated_text)
                    .map_err(|e| e.to_string())?;
            }
            std::fs::write(
                dir.join("benchmark.json"),
                serde_json::to_string_pretty(&set.manifest_json()).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            Some(dir.display().to_string())
        } else {
            None
        };
        Ok(api::InjectResponse {
            mutant_count: set.mutants.len(),
            discarded_equivalent: set.discarded_equivalent,
            manifest: set.manifest_json(),
            empty_cells: set
                .empty_cells
                .iter()
                .map(|(f, k)| (f.clone(), k.as_str().to_string()))
                .collect(),
            out_dir,
        })
    })
    .await
    .map_err(internal)?
    .map_err(bad_request)?;
    Ok(Json(out))
}

fn build_backend(spec: &api::BackendSpec, golden_text: &str) -> Box<dyn RepairBackend> {
    match spec {
        api::BackendSpec::Null => Box::new(NullBackend::new()),
        api::BackendSpec::Oracle { wrong, right } => {
            Box::new(OracleBackend::new(wrong.clone(), right.clone(), golden_text.to_string()))
        }
        api::BackendSpec::Scripted { responses } => {
            let map = responses
                .iter()
                .filter_map(|(k, v)| k.parse::<usize>().ok().map(|i| (i, v.clone())))
                .collect();
            Box::new(ScriptedBackend::new(map))
        }
        api::BackendSpec::Remote { endpoint, model, temperature, key_env } => {
            Box::new(RemoteBackend::new(endpoint.clone(), model.clone(), *temperature, key_env.clone()))
        }
    }
}

fn session_config(value: Option<serde_json::Value>, persist_dir: Option<String>) -> Result<SessionConfig, String> {
    let mut config: SessionConfig = match value {
        Some(v) => serde_json::from_value(v).map_err(|e| format!("bad session config: {e}"))?,
        None => SessionConfig::default(),
    };
    if let Some(dir) = persist_dir {
        config.persist_dir = Some(dir.into());
    }
    Ok(config)
}

fn spawn_job<F>(state: &AppState, work: F) -> api::JobCreated
where
    F: FnOnce() -> Result<serde_json::Value, String> + Send + 'static,
{
    let id = Uuid::new_v4().to_string();
    state.jobs.lock().unwrap().insert(
        id.clone(),
        api::JobStatus { id: id.clone(), state: api::JobState::Running, result: None, error: None },
    );
    let jobs = Arc::clone(&state.jobs);
    let job_id = id.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = work();
        let mut jobs = jobs.lock().unwrap();
        let entry = jobs.get_mut(&job_id).expect("job exists");
        match outcome {
            Ok(value) => {
                entry.state = api::JobState::Done;
                entry.result = Some(value);
            }
            Err(e) => {
                entry.state = api::JobState::Failed;
                entry.error = Some(e);
            }
        }
    });
    api::JobCreated { id }
}

async fn session_handler(
    State(state): State<AppState>,
    Json(req): Json<api::SessionRequest>,
) -> Result<Json<api::JobCreated>, ApiError> {
    let created = spawn_job(&state, move || {
        let dut = SourceFile::new("dut.v", req.dut);
        let golden = SourceFile::new("golden.v", req.golden.clone());
        let config = session_config(req.config, req.persist_dir)?;
        let mut backend = build_backend(&req.backend, &req.golden);
        let result =
            run_session(&dut, &golden, &req.spec_text, backend.as_mut(), &config).map_err(|e| e.to_string())?;
        serde_json::to_value(&result).map_err(|e| e.to_string())
    });
    Ok(Json(created))
}

async fn campaign_handler(
    State(state): State<AppState>,
    Json(req): Json<api::CampaignRequest>,
) -> Result<Json<api::JobCreated>, ApiError> {
    let created = spawn_job(&state, move || {
        let corpus = load_corpus(&req.corpus_dir).map_err(|e| e.to_string())?;
        validate_corpus(&corpus).map_err(|e| e.to_string())?;
        let set = match &req.benchmark_dir {
            None => build_benchmark(&corpus, &Plan { per_kind: req.per_kind }, req.seed),
            Some(dir) => {
                let dir = std::path::PathBuf::from(dir);
                let manifest_text =
                    std::fs::read_to_string(dir.join("benchmark.json")).map_err(|e| e.to_string())?;
                let entries: Vec<rtlmend_core::errgen::ManifestEntry> =
                    serde_json::from_str(&manifest_text).map_err(|e| e.to_string())?;
                let golden_text = |module: &str| -> std::io::Result<String> {
                    corpus
                        .iter()
                        .find(|g| g.name == module)
                        .map(|g| g.source.text.clone())
                        .ok_or_else(|| {
                            std::io::Error::new(
                                std::io::ErrorKind::NotFound,
                                format!("module '{module}' not in corpus"),
                            )
                        })
                };
                benchmark_from_manifest(
                    &entries,
                    |e| std::fs::read_to_string(dir.join("mutants").join(format!("{}.v", e.id))),
                    |e| golden_text(&e.module),
                )
                .map_err(|e| e.to_string())?
            }
        };
        let backend = match &req.backend {
            api::BackendSpec::Null => BackendConfig::Null,
            api::BackendSpec::Oracle { .. } => BackendConfig::Oracle,
            api::BackendSpec::Scripted { responses } => BackendConfig::Scripted { responses: responses.clone() },
            api::BackendSpec::Remote { endpoint, model, temperature, key_env } => BackendConfig::Remote {
                endpoint: endpoint.clone(),
                model: model.clone(),
                temperature: *temperature,
                key_env: key_env.clone(),
            },
        };
        let session = session_config(req.config, None)?;
        let config = CampaignConfig { session, backend, workers: req.workers.unwrap_or(1) };
        let result = run_campaign(&set, &config).map_err(|e| e.to_string())?;
        if let Some(dir) = &req.out_dir {
            let dir = std::path::PathBuf::from(dir);
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            std::fs::write(dir.join("campaign.json"), serde_json::to_string_pretty(&result).unwrap())
                .map_err(|e| e.to_string())?;
            std::fs::write(dir.join("heatmap.csv"), heatmap_csv(&result)).map_err(|e| e.to_string())?;
        }
        serde_json::to_value(&result).map_err(|e| e.to_string())
    });
    Ok(Json(created))
}

async fn job_handler(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<api::JobStatus>, ApiError> {
    let jobs = state.jobs.lock().unwrap();
    match jobs.get(&id) {
        Some(status) => Ok(Json(status.clone())),
        None => Err((StatusCode::NOT_FOUND, Json(api::ErrorBody { error: format!("no job {id}") }))),
    }
}
