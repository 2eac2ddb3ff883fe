//! The outer repair loop: pre-process, verify, localize, repair, with a
//! version repository, score register, rollback, and damage-repair records.
//!
//! A session terminates with Success when the current version scores a 1.0
//! pass rate (and parses/lints clean), or Failure when the iteration budget
//! is exhausted; the best-scoring version is always the final text. A new
//! version scoring strictly below the best accepted score is rolled back:
//! its patch set is recorded as a damage repair and fed into every later
//! prompt, and the next iteration restarts from the best version's text.

use crate::agent::{
    apply_patchset, request_patches, ErrPayload, PatchSet, PromptProfile, RepairBackend, RepairMode, RepairRequest,
};
use crate::elaborate::{parse_and_elaborate, ElaboratedDesign};
use crate::lint::{preprocess_with_mode, PreprocessError, PreprocessLog};
use crate::localize::fetch_err_info;
use crate::source::SourceFile;
use crate::stimulus::{default_suite, extended_suite, SuiteConfig};
use crate::testbench::{run_verify_suite, VerifyReport};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VersionStatus {
    Accepted,
    RolledBack,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Version {
    pub index: usize,
    pub text: String,
    /// Pass rate of this version; 0.0 when it did not even pre-process.
    pub score: f64,
    /// The patch set that produced it; absent for version 0.
    pub patchset: Option<PatchSet>,
    pub status: VersionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Failure,
}

/// Which pipeline stage closed the session (for campaign attribution).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessStage {
    Preprocess,
    MsMode,
    SlMode,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocess_s: f64,
    pub simulate_s: f64,
    pub localize_s: f64,
    pub repair_s: f64,
    /// Wall time spent inside the repair backend, kept out of the
    /// algorithmic columns so timings compare across backends.
    pub backend_wait_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionResult {
    pub outcome: Outcome,
    pub final_text: String,
    pub final_score: f64,
    pub iterations_used: u32,
    pub history: Vec<Version>,
    pub damage_repairs: Vec<PatchSet>,
    pub timings: StageTimings,
    pub success_stage: Option<SuccessStage>,
    pub preprocess_log: Option<PreprocessLog>,
    pub failure_reason: Option<String>,
    /// Per-iteration notes (transport errors, patch issues, rollbacks).
    pub iteration_log: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub max_iter: u32,
    /// Escalation threshold: iterations below it use MS mode, at or above SL.
    pub th: u32,
    pub mode: RepairMode,
    pub stimulus: SuiteConfig,
    pub preprocess_rounds: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub persist_dir: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_iter: 5,
            th: 2,
            mode: RepairMode::Pair,
            stimulus: SuiteConfig::default(),
            preprocess_rounds: 5,
            persist_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("golden reference is invalid: {0:?}")]
    GoldenInvalid(Vec<crate::source::Diagnostic>),
    #[error("stimulus construction failed: {0}")]
    Stimulus(#[from] crate::stimulus::StimulusError),
    #[error("verification failed: {0}")]
    Verify(#[from] crate::testbench::VerifyError),
    #[error("session persistence failed: {0}")]
    Io(#[from] std::io::Error),
}

/// True when `new_score` is strictly below the best accepted score; ties do
/// not roll back.
pub fn should_rollback(history: &[Version], new_score: f64) -> bool {
    let best = history
        .iter()
        .filter(|v| v.status == VersionStatus::Accepted)
        .map(|v| v.score)
        .fold(f64::NEG_INFINITY, f64::max);
    new_score < best
}

fn best_accepted(history: &[Version]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for v in history {
        if v.status == VersionStatus::Accepted && v.score > best_score {
            best_score = v.score;
            best = v.index;
        }
    }
    best
}

pub fn run_session(
    dut: &SourceFile,
    golden: &SourceFile,
    spec_text: &str,
    backend: &mut dyn RepairBackend,
    config: &SessionConfig,
) -> Result<SessionResult, SessionError> {
    let t_start = Instant::now();
    let mut timings = StageTimings::default();
    let mut iteration_log = Vec::new();

    let (_, golden_elab) = parse_and_elaborate(golden).map_err(SessionError::GoldenInvalid)?;
    let suite = default_suite(&golden_elab, &config.stimulus)?;

    // Stage 1: pre-process the DUT
    let t0 = Instant::now();
    let pre = preprocess_with_mode(dut, backend, config.preprocess_rounds, spec_text, config.mode);
    timings.preprocess_s += t0.elapsed().as_secs_f64();
    let (mut current_text, mut current_elab, pre_log) = match pre {
        Ok(p) => {
            timings.backend_wait_s += p.log.backend_wait_s;
            (p.text, Some(p.elab), p.log)
        }
        Err(PreprocessError::Failed { diagnostics, log, .. }) => {
            timings.total_s = t_start.elapsed().as_secs_f64();
            let result = SessionResult {
                outcome: Outcome::Failure,
                final_text: dut.text.clone(),
                final_score: 0.0,
                iterations_used: 0,
                history: vec![],
                damage_repairs: vec![],
                timings,
                success_stage: None,
                preprocess_log: Some(log),
                failure_reason: Some(format!("pre-processing failed: {} diagnostics remain", diagnostics.len())),
                iteration_log,
            };
            persist(&result, config)?;
            return Ok(result);
        }
    };

    fn score_version(
        golden_elab: &ElaboratedDesign,
        suite: &[crate::stimulus::Stimulus],
        elab: Option<&ElaboratedDesign>,
        timings: &mut StageTimings,
    ) -> Result<(f64, Option<VerifyReport>), SessionError> {
        let t = Instant::now();
        let out = match elab {
            Some(e) => match run_verify_suite(e, golden_elab, suite) {
                Ok(report) => (report.pass_rate, Some(report)),
                // a patched design that cannot simulate (e.g. a created
                // combinational loop) scores zero and is left to rollback
                Err(crate::testbench::VerifyError::Sim(_)) => (0.0, None),
                Err(e) => return Err(e.into()),
            },
            None => (0.0, None),
        };
        timings.simulate_s += t.elapsed().as_secs_f64();
        Ok(out)
    }

    let (score0, mut current_report) = score_version(&golden_elab, &suite, current_elab.as_ref(), &mut timings)?;
    if let (Some(dir), Some(report)) = (&config.persist_dir, &current_report) {
        persist_report(dir, 0, report)?;
    }
    let mut history = vec![Version {
        index: 0,
        text: current_text.clone(),
        score: score0,
        patchset: None,
        status: VersionStatus::Accepted,
    }];
    let mut damage_repairs: Vec<PatchSet> = Vec::new();

    struct Finish {
        outcome: Outcome,
        iterations_used: u32,
        success_stage: Option<SuccessStage>,
        failure_reason: Option<String>,
    }

    let finish = |f: Finish,
                  history: Vec<Version>,
                  damage_repairs: Vec<PatchSet>,
                  mut timings: StageTimings,
                  iteration_log: Vec<String>,
                  pre_log: PreprocessLog|
     -> Result<SessionResult, SessionError> {
        let best = best_accepted(&history);
        timings.total_s = t_start.elapsed().as_secs_f64();
        let result = SessionResult {
            outcome: f.outcome,
            final_text: history[best].text.clone(),
            final_score: history[best].score,
            iterations_used: f.iterations_used,
            history,
            damage_repairs,
            timings,
            success_stage: f.success_stage,
            preprocess_log: Some(pre_log),
            failure_reason: f.failure_reason,
            iteration_log,
        };
        persist(&result, config)?;
        Ok(result)
    };

    if score0 >= 1.0 {
        return finish(
            Finish {
                outcome: Outcome::Success,
                iterations_used: 0,
                success_stage: Some(SuccessStage::Preprocess),
                failure_reason: None,
            },
            history,
            damage_repairs,
            timings,
            iteration_log,
            pre_log,
        );
    }

    for iter in 1..=config.max_iter {
        let Some(report) = &current_report else { break };
        let elab = current_elab.as_ref().expect("current version elaborates");

        // localize
        let t = Instant::now();
        let err_info = match fetch_err_info(elab, report, iter, config.th) {
            Ok(e) => e,
            Err(e) => {
                iteration_log.push(format!("iter {iter}: localization failed: {e}"));
                timings.localize_s += t.elapsed().as_secs_f64();
                continue;
            }
        };
        timings.localize_s += t.elapsed().as_secs_f64();
        if let Some(dir) = &config.persist_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(
                dir.join(format!("v{}.errinfo.json", history.len())),
                serde_json::to_string_pretty(&err_info.to_json()).expect("errinfo serializes"),
            )?;
        }

        // repair call
        let req = RepairRequest {
            spec_text: spec_text.to_string(),
            dut_text: current_text.clone(),
            err_info: ErrPayload::Localization(err_info.clone()),
            damage_repairs: damage_repairs.clone(),
            mode: config.mode,
            profile: PromptProfile::FunctionalFixer,
        };
        let t = Instant::now();
        let ps = match request_patches(backend, &req) {
            Ok(call) => {
                timings.backend_wait_s += call.backend_wait_s;
                call.patchset
            }
            Err(e) => {
                timings.repair_s += t.elapsed().as_secs_f64();
                iteration_log.push(format!("iter {iter}: repair call failed: {e}"));
                continue;
            }
        };
        timings.repair_s += t.elapsed().as_secs_f64();

        // apply
        let patched_text = match config.mode {
            RepairMode::Pair => {
                let rep = apply_patchset(&current_text, &ps);
                for (idx, err) in &rep.issues {
                    iteration_log.push(format!("iter {iter}: pair {idx}: {err}"));
                }
                if !rep.changed() {
                    iteration_log.push(format!("iter {iter}: patch had no effect"));
                    continue;
                }
                rep.text
            }
            RepairMode::WholeFile => ps.pairs[0].right.clone(),
        };

        // re-preprocess the patched text; repairs may introduce syntax errors
        let t = Instant::now();
        let pre = preprocess_with_mode(
            &SourceFile::new(dut.path.clone(), patched_text.clone()),
            backend,
            config.preprocess_rounds,
            spec_text,
            config.mode,
        );
        timings.preprocess_s += t.elapsed().as_secs_f64();
        let (new_text, new_elab) = match pre {
            Ok(p) => {
                timings.backend_wait_s += p.log.backend_wait_s;
                (p.text, Some(p.elab))
            }
            Err(PreprocessError::Failed { .. }) => {
                iteration_log.push(format!("iter {iter}: patched text does not pre-process; scoring 0"));
                (patched_text, None)
            }
        };

        let (score, new_report) = score_version(&golden_elab, &suite, new_elab.as_ref(), &mut timings)?;
        let index = history.len();
        if let (Some(dir), Some(report)) = (&config.persist_dir, &new_report) {
            persist_report(dir, index, report)?;
        }
        if should_rollback(&history, score) {
            history.push(Version {
                index,
                text: new_text,
                score,
                patchset: Some(ps.clone()),
                status: VersionStatus::RolledBack,
            });
            damage_repairs.push(ps);
            let best = best_accepted(&history);
            iteration_log.push(format!(
                "iter {iter}: version {index} scored {score:.4} < best; rolled back to version {best}"
            ));
            current_text = history[best].text.clone();
            // re-derive state for the reverted text
            let src = SourceFile::new(dut.path.clone(), current_text.clone());
            let (_, e) = parse_and_elaborate(&src).expect("accepted version re-elaborates");
            let (_, r) = score_version(&golden_elab, &suite, Some(&e), &mut timings)?;
            current_elab = Some(e);
            current_report = r;
        } else {
            history.push(Version {
                index,
                text: new_text.clone(),
                score,
                patchset: Some(ps),
                status: VersionStatus::Accepted,
            });
            current_text = new_text;
            current_elab = new_elab;
            current_report = new_report;
            if score >= 1.0 {
                let stage = if iter < config.th { SuccessStage::MsMode } else { SuccessStage::SlMode };
                return finish(
                    Finish {
                        outcome: Outcome::Success,
                        iterations_used: iter,
                        success_stage: Some(stage),
                        failure_reason: None,
                    },
                    history,
                    damage_repairs,
                    timings,
                    iteration_log,
                    pre_log,
                );
            }
        }
    }

    finish(
        Finish {
            outcome: Outcome::Failure,
            iterations_used: config.max_iter,
            success_stage: None,
            failure_reason: Some("iteration budget exhausted".into()),
        },
        history,
        damage_repairs,
        timings,
        iteration_log,
        pre_log,
    )
}

/// Re-verify a session's final text against the golden model under the
/// extended independent suite (the fix-rate oracle).
pub fn extended_validation(
    final_text: &str,
    golden: &SourceFile,
    stimulus: &SuiteConfig,
) -> Result<bool, SessionError> {
    let (_, golden_elab) = parse_and_elaborate(golden).map_err(SessionError::GoldenInvalid)?;
    let src = SourceFile::new("final.v", final_text);
    let Ok((_, elab)) = parse_and_elaborate(&src) else {
        return Ok(false);
    };
    let suite = extended_suite(&golden_elab, stimulus)?;
    match run_verify_suite(&elab, &golden_elab, &suite) {
        Ok(report) => Ok(report.passed()),
        Err(_) => Ok(false),
    }
}

// --- persistence -------------------------------------------------------------

/// Session directory layout: `v{N}.v`, `v{N}.patch.json`, `session.json`.
fn persist(result: &SessionResult, config: &SessionConfig) -> std::io::Result<()> {
    let Some(dir) = &config.persist_dir else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    for v in &result.history {
        std::fs::write(dir.join(format!("v{}.v", v.index)), &v.text)?;
        if let Some(ps) = &v.patchset {
            std::fs::write(dir.join(format!("v{}.patch.json", v.index)), serde_json::to_string_pretty(ps)?)?;
        }
    }
    std::fs::write(dir.join("session.json"), serde_json::to_string_pretty(result)?)?;
    Ok(())
}

/// Reload a persisted session; `session.json` is the source of truth.
pub fn load_session(dir: impl AsRef<Path>) -> std::io::Result<SessionResult> {
    let text = std::fs::read_to_string(dir.as_ref().join("session.json"))?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Write the verification log for one version of a persisted session.
pub fn persist_report(dir: impl AsRef<Path>, index: usize, report: &VerifyReport) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("v{index}.report.jsonl")), report.log.join("\n"))?;
    Ok(())
}
