//! Benchmark campaigns: one repair session per mutant on a worker pool,
//! hit/fix-rate aggregation, per-stage attribution, and report rendering
//! (JSON plus a family-by-error-kind CSV heat map).

use crate::agent::{NullBackend, OracleBackend, RepairBackend, RemoteBackend, ScriptedBackend};
use crate::errgen::{BenchmarkSet, ManifestEntry, Mutant, MutationKind, ALL_KINDS};
use crate::metrics::{compute_fr, compute_hr, MetricsError, Ratio, SessionOutcome};
use crate::orchestrator::{extended_validation, run_session, Outcome, SessionConfig, SuccessStage};
use crate::source::SourceFile;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("benchmark set is empty")]
    EmptyBenchmark,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("campaign io: {0}")]
    Io(#[from] std::io::Error),
}

/// How each session's backend is constructed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    /// Replays the inverse of the injected edit (golden text in whole-file
    /// mode). Evaluation only.
    Oracle,
    /// Always returns an empty patch list.
    Null,
    /// One fixture shared by every session.
    Scripted { responses: BTreeMap<String, String> },
    /// Chat-completion endpoint; the key is read from `key_env`.
    Remote { endpoint: String, model: String, temperature: f64, key_env: String },
}

impl BackendConfig {
    pub fn build(&self, mutant: &Mutant) -> Box<dyn RepairBackend> {
        match self {
            BackendConfig::Oracle => Box::new(OracleBackend::new(
                mutant.after.clone(),
                mutant.before.clone(),
                mutant.base_text.clone(),
            )),
            BackendConfig::Null => Box::new(NullBackend::new()),
            BackendConfig::Scripted { responses } => {
                let map = responses
                    .iter()
                    .filter_map(|(k, v)| k.parse::<usize>().ok().map(|i| (i, v.clone())))
                    .collect();
                Box::new(ScriptedBackend::new(map))
            }
            BackendConfig::Remote { endpoint, model, temperature, key_env } => Box::new(RemoteBackend::new(
                endpoint.clone(),
                model.clone(),
                *temperature,
                key_env.clone(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutantResult {
    pub id: String,
    pub module: String,
    pub family: String,
    pub kind: MutationKind,
    pub class: crate::errgen::MutantClass,
    pub outcome: Outcome,
    pub iterations: u32,
    pub t_exec_s: f64,
    pub stage: Option<SuccessStage>,
    pub backend_wait_s: f64,
    pub hr_pass: bool,
    pub fr_pass: Option<bool>,
    /// True when an SL-mode slice during the session contained the injected
    /// ground-truth line.
    pub localization_hit: bool,
    pub final_score: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageAggregate {
    /// FR contribution: sessions fixed at this stage that also pass the
    /// extended suite, over all sessions.
    pub fr_contribution: f64,
    pub fixed: u64,
    pub mean_t_exec_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub per_mutant: Vec<MutantResult>,
    pub hr: Ratio,
    pub fr: Ratio,
    pub mean_t_exec_s: f64,
    /// Mean wall time inside the repair backend, reported as its own column.
    pub mean_backend_wait_s: f64,
    pub stage_preprocess: StageAggregate,
    pub stage_ms: StageAggregate,
    pub stage_sl: StageAggregate,
    /// family -> kind -> FR cell; None marks an inapplicable ("x") cell.
    pub heatmap: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    pub localization_hit_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub session: SessionConfig,
    pub backend: BackendConfig,
    pub workers: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { session: SessionConfig::default(), backend: BackendConfig::Oracle, workers: 1 }
    }
}

/// Run one session per mutant, in parallel up to `config.workers`, and
/// aggregate. Per-mutant failures are recorded, never fatal.
pub fn run_campaign(benchmark: &BenchmarkSet, config: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    if benchmark.mutants.is_empty() {
        return Err(CampaignError::EmptyBenchmark);
    }
    let indices: Vec<usize> = (0..benchmark.mutants.len()).collect();
    let results: Mutex<Vec<MutantResult>> = Mutex::new(Vec::with_capacity(indices.len()));
    let next: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

    let workers = config.workers.max(1).min(indices.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= indices.len() {
                    break;
                }
                let mutant = &benchmark.mutants[indices[i]];
                let r = run_one(mutant, config);
                results.lock().unwrap().push(r);
            });
        }
    });

    let mut per_mutant = results.into_inner().unwrap();
    per_mutant.sort_by(|a, b| a.id.cmp(&b.id));
    aggregate(per_mutant)
}

fn run_one(mutant: &Mutant, config: &CampaignConfig) -> MutantResult {
    let dut = SourceFile::new(format!("{}.v", mutant.id), mutant.mutated_text.clone());
    let golden = SourceFile::new(format!("{}_golden.v", mutant.module), mutant.base_text.clone());
    let mut backend = config.backend.build(mutant);
    let spec_text = format!("Module '{}' ({} family).", mutant.module, mutant.family);

    let session = run_session(&dut, &golden, &spec_text, backend.as_mut(), &config.session);
    match session {
        Ok(s) => {
            let hr_pass = s.outcome == Outcome::Success;
            let fr_pass = if hr_pass {
                extended_validation(&s.final_text, &golden, &config.session.stimulus).ok()
            } else {
                None
            };
            let localization_hit = slice_contains_line(mutant, &config.session);
            MutantResult {
                id: mutant.id.clone(),
                module: mutant.module.clone(),
                family: mutant.family.clone(),
                kind: mutant.kind,
                class: mutant.class,
                outcome: s.outcome,
                iterations: s.iterations_used,
                t_exec_s: s.timings.total_s,
                stage: s.success_stage,
                backend_wait_s: s.timings.backend_wait_s,
                hr_pass,
                fr_pass,
                localization_hit,
                final_score: s.final_score,
            }
        }
        Err(e) => MutantResult {
            id: mutant.id.clone(),
            module: mutant.module.clone(),
            family: mutant.family.clone(),
            kind: mutant.kind,
            class: mutant.class,
            outcome: Outcome::Failure,
            iterations: 0,
            t_exec_s: 0.0,
            stage: None,
            backend_wait_s: 0.0,
            hr_pass: false,
            fr_pass: None,
            localization_hit: false,
            final_score: 0.0,
        }
        .tap_log(e),
    }
}

impl MutantResult {
    fn tap_log(self, e: crate::orchestrator::SessionError) -> Self {
        eprintln!("session {} errored: {e}", self.id);
        self
    }
}

/// Direct localization check for functional mutants: slice the first failing
/// report of the mutated design and test membership of the injected line.
fn slice_contains_line(mutant: &Mutant, session: &SessionConfig) -> bool {
    if mutant.class != crate::errgen::MutantClass::Functional {
        return false;
    }
    let src = SourceFile::new(format!("{}.v", mutant.id), mutant.mutated_text.clone());
    let golden_src = SourceFile::new("golden.v", mutant.base_text.clone());
    let Ok((_, elab)) = crate::elaborate::parse_and_elaborate(&src) else { return false };
    let Ok((_, golden_elab)) = crate::elaborate::parse_and_elaborate(&golden_src) else { return false };
    let Ok(suite) = crate::stimulus::default_suite(&golden_elab, &session.stimulus) else { return false };
    let Ok(report) = crate::testbench::run_verify_suite(&elab, &golden_elab, &suite) else { return false };
    let Ok(info) = crate::localize::fetch_err_info(&elab, &report, session.th, session.th) else { return false };
    info.suspicious_lines.iter().any(|(_, l)| *l == mutant.ground_truth_line)
}

fn aggregate(per_mutant: Vec<MutantResult>) -> Result<CampaignResult, CampaignError> {
    let outcomes: Vec<SessionOutcome> = per_mutant
        .iter()
        .map(|r| SessionOutcome { id: r.id.clone(), hr_pass: r.hr_pass, fr_pass: r.fr_pass })
        .collect();
    let hr = compute_hr(&outcomes)?;
    let fr = compute_fr(&outcomes)?;
    let n = per_mutant.len() as f64;
    let mean_t = per_mutant.iter().map(|r| r.t_exec_s).sum::<f64>() / n;
    let mean_wait = per_mutant.iter().map(|r| r.backend_wait_s).sum::<f64>() / n;

    let stage_agg = |stage: SuccessStage, rs: &[MutantResult]| -> StageAggregate {
        let fixed: Vec<&MutantResult> = rs
            .iter()
            .filter(|r| r.stage == Some(stage) && r.hr_pass && r.fr_pass == Some(true))
            .collect();
        let times: Vec<f64> = rs.iter().filter(|r| r.stage == Some(stage)).map(|r| r.t_exec_s).collect();
        StageAggregate {
            fr_contribution: fixed.len() as f64 / n,
            fixed: fixed.len() as u64,
            mean_t_exec_s: if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 },
        }
    };
    let stage_preprocess = stage_agg(SuccessStage::Preprocess, &per_mutant);
    let stage_ms = stage_agg(SuccessStage::MsMode, &per_mutant);
    let stage_sl = stage_agg(SuccessStage::SlMode, &per_mutant);

    // family x kind heat map of FR
    let mut heatmap: BTreeMap<String, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for r in &per_mutant {
        let row = heatmap.entry(r.family.clone()).or_default();
        row.entry(r.kind.as_str().to_string()).or_insert(Some(0.0));
    }
    for (family, row) in &mut heatmap {
        for kind in ALL_KINDS {
            let cell: Vec<&MutantResult> = per_mutant
                .iter()
                .filter(|r| &r.family == family && r.kind == kind)
                .collect();
            let entry = row.entry(kind.as_str().to_string()).or_insert(None);
            if cell.is_empty() {
                *entry = None;
            } else {
                let fixed = cell.iter().filter(|r| r.hr_pass && r.fr_pass == Some(true)).count();
                *entry = Some(fixed as f64 / cell.len() as f64);
            }
        }
    }

    let functional: Vec<&MutantResult> =
        per_mutant.iter().filter(|r| r.class == crate::errgen::MutantClass::Functional).collect();
    let localization_hit_rate = if functional.is_empty() {
        1.0
    } else {
        functional.iter().filter(|r| r.localization_hit).count() as f64 / functional.len() as f64
    };

    Ok(CampaignResult {
        per_mutant,
        hr,
        fr,
        mean_t_exec_s: mean_t,
        mean_backend_wait_s: mean_wait,
        stage_preprocess,
        stage_ms,
        stage_sl,
        heatmap,
        localization_hit_rate,
    })
}

/// CSV heat map: rows are module families, columns error kinds, cells FR or
/// `x` for inapplicable combinations.
pub fn heatmap_csv(result: &CampaignResult) -> String {
    let mut out = String::from("family");
    for kind in ALL_KINDS {
        out.push(',');
        out.push_str(kind.as_str());
    }
    out.push('\n');
    for (family, row) in &result.heatmap {
        out.push_str(family);
        for kind in ALL_KINDS {
            out.push(',');
            match row.get(kind.as_str()).copied().flatten() {
                Some(fr) => out.push_str(&format!("{fr:.3}")),
                None => out.push('x'),
            }
        }
        out.push('\n');
    }
    out
}

/// Human-readable summary table for the CLI `report` subcommand.
pub fn summary_table(result: &CampaignResult) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "sessions: {}  HR: {}/{} = {:.2}%  FR: {}/{} = {:.2}%  mean T_exec: {:.3}s (backend wait {:.3}s)\n",
        result.per_mutant.len(),
        result.hr.num,
        result.hr.den,
        result.hr.value * 100.0,
        result.fr.num,
        result.fr.den,
        result.fr.value * 100.0,
        result.mean_t_exec_s,
        result.mean_backend_wait_s,
    ));
    s.push_str(&format!(
        "stage contributions (FR): pre-processing {:.2}%  MS mode {:.2}%  SL mode {:.2}%\n",
        result.stage_preprocess.fr_contribution * 100.0,
        result.stage_ms.fr_contribution * 100.0,
        result.stage_sl.fr_contribution * 100.0,
    ));
    s.push_str(&format!(
        "localization hit rate (functional mutants): {:.2}%\n",
        result.localization_hit_rate * 100.0
    ));
    s
}

/// Load a benchmark set back from a manifest plus the mutant/golden sources.
pub fn benchmark_from_manifest(
    entries: &[ManifestEntry],
    read_mutant: impl Fn(&ManifestEntry) -> std::io::Result<String>,
    read_golden: impl Fn(&ManifestEntry) -> std::io::Result<String>,
) -> std::io::Result<BenchmarkSet> {
    let mut set = BenchmarkSet::default();
    for e in entries {
        set.mutants.push(Mutant {
            id: e.id.clone(),
            module: e.module.clone(),
            family: e.family.clone(),
            kind: e.kind,
            class: e.class,
            ground_truth_line: e.line,
            before: e.before.clone(),
            after: e.after.clone(),
            mutated_text: read_mutant(e)?,
            base_text: read_golden(e)?,
        });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errgen::{build_benchmark, GoldenEntry, Plan};

    const ADDER: &str = "module adder(\n    input wire [3:0] a,\n    input wire [3:0] b,\n    output wire [4:0] result\n);\n    assign result = a + b;\nendmodule\n";
    const COUNTER: &str = "module counter(\n    input wire clk,\n    input wire rstn,\n    input wire en,\n    output reg [7:0] count\n);\n    always @(posedge clk or negedge rstn) begin\n        if (!rstn) count <= 8'd0;\n        else if (en) count <= count + 8'd1;\n    end\nendmodule\n";

    fn small_benchmark() -> BenchmarkSet {
        let corpus = vec![
            GoldenEntry {
                name: "adder".into(),
                family: "adder".into(),
                spec: "adds".into(),
                source: SourceFile::new("adder.v", ADDER),
            },
            GoldenEntry {
                name: "counter".into(),
                family: "counter".into(),
                spec: "counts".into(),
                source: SourceFile::new("counter.v", COUNTER),
            },
        ];
        build_benchmark(&corpus, &Plan::default(), 7)
    }

    #[test]
    fn oracle_campaign_full_marks() {
        let bench = small_benchmark();
        let config = CampaignConfig::default();
        let result = run_campaign(&bench, &config).unwrap();
        assert_eq!(result.hr.value, 1.0, "{:?}", result.per_mutant);
        assert_eq!(result.fr.value, 1.0);
        // stage partition sums to FR
        let sum = result.stage_preprocess.fr_contribution
            + result.stage_ms.fr_contribution
            + result.stage_sl.fr_contribution;
        assert!((sum - result.fr.value).abs() < 1e-9);
    }

    #[test]
    fn workers_do_not_change_results() {
        let bench = small_benchmark();
        let mut config = CampaignConfig::default();
        let a = run_campaign(&bench, &config).unwrap();
        config.workers = 8;
        let b = run_campaign(&bench, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a.per_mutant.iter().map(|r| (&r.id, r.hr_pass, r.fr_pass, r.iterations)).collect::<Vec<_>>()).unwrap(),
            serde_json::to_string(&b.per_mutant.iter().map(|r| (&r.id, r.hr_pass, r.fr_pass, r.iterations)).collect::<Vec<_>>()).unwrap()
        );
        assert_eq!(a.hr, b.hr);
        assert_eq!(a.fr, b.fr);
    }

    #[test]
    fn null_backend_matches_template_only_ceiling() {
        let bench = small_benchmark();
        let config = CampaignConfig { backend: BackendConfig::Null, ..Default::default() };
        let result = run_campaign(&bench, &config).unwrap();
        // independent per-mutant measurement of the script-only ceiling
        let expected: u64 = bench
            .mutants
            .iter()
            .filter(|m| {
                let dut = SourceFile::new("d.v", m.mutated_text.clone());
                let mut null = NullBackend::new();
                match crate::lint::preprocess(&dut, &mut null, 5, "") {
                    Ok(pre) => {
                        let golden = SourceFile::new("g.v", m.base_text.clone());
                        let (_, gelab) = crate::elaborate::parse_and_elaborate(&golden).unwrap();
                        let suite = crate::stimulus::default_suite(&gelab, &SessionConfig::default().stimulus).unwrap();
                        crate::testbench::run_verify_suite(&pre.elab, &gelab, &suite)
                            .map(|r| r.pass_rate == 1.0)
                            .unwrap_or(false)
                    }
                    Err(_) => false,
                }
            })
            .count() as u64;
        assert_eq!(result.hr.num, expected);
    }

    #[test]
    fn heatmap_has_x_cells() {
        let bench = small_benchmark();
        let result = run_campaign(&bench, &CampaignConfig::default()).unwrap();
        let csv = heatmap_csv(&result);
        // adder is combinational: wrong-sensitivity cell must be x
        let adder_row: Vec<&str> = csv.lines().find(|l| l.starts_with("adder")).unwrap().split(',').collect();
        let kind_idx = 1 + ALL_KINDS.iter().position(|k| *k == MutationKind::WrongSensitivity).unwrap();
        assert_eq!(adder_row[kind_idx], "x", "{csv}");
    }

    #[test]
    fn fr_le_hr_always() {
        let bench = small_benchmark();
        for backend in [BackendConfig::Oracle, BackendConfig::Null] {
            let config = CampaignConfig { backend, ..Default::default() };
            let r = run_campaign(&bench, &config).unwrap();
            assert!(r.fr.value <= r.hr.value);
        }
    }
}
