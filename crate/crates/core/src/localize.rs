//! Fault localization: extracts mismatch facts from the verification log,
//! then computes time-aware dynamic slices over per-signal dataflow graphs.
//!
//! Error info comes in two granularities. Below the escalation threshold
//! only mismatch signals, times, and input values are reported (MS mode);
//! at or above it, suspicious source lines from dynamic slicing are added
//! (SL mode) and signals discovered on executed slice paths are appended to
//! the mismatch set.

use crate::dfg::{build_dfg, Dfg, DfgError, DepKind, GuardKind};
use crate::elaborate::{ElaboratedDesign, SignalId};
use crate::sim::{eval_with, SimError, Trace};
use crate::testbench::VerifyReport;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error("malformed verification log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Dfg(#[from] DfgError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrInfoMode {
    #[serde(rename = "MS")]
    MismatchSignals,
    #[serde(rename = "SL")]
    SuspiciousLines,
}

/// Localization payload embedded in the repair prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrInfo {
    pub mode: ErrInfoMode,
    pub mismatch_signals: Vec<String>,
    pub mismatch_times: Vec<u64>,
    /// input name -> binary value string per mismatch time (aligned with
    /// `mismatch_times`).
    pub input_values: BTreeMap<String, Vec<String>>,
    /// (file, line), most suspicious first. Empty in MS mode.
    pub suspicious_lines: Vec<(String, u32)>,
}

impl ErrInfo {
    /// Exact JSON object embedded in the agent prompt:
    /// `{"mode","signals":[...],"times":[...],"inputs":{...},"lines":[[file,line],...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": match self.mode { ErrInfoMode::MismatchSignals => "MS", ErrInfoMode::SuspiciousLines => "SL" },
            "signals": self.mismatch_signals,
            "times": self.mismatch_times,
            "inputs": self.input_values,
            "lines": self.suspicious_lines.iter().map(|(f, l)| serde_json::json!([f, l])).collect::<Vec<_>>(),
        })
    }
}

/// Parsed mismatch facts: sorted distinct times, sorted distinct signals,
/// and the value of every top-level input at each mismatch time.
pub struct MismatchFacts {
    pub times: Vec<u64>,
    pub signals: Vec<String>,
    pub input_values: BTreeMap<String, Vec<String>>,
}

/// Scan the check log for failing entries and collect (MT, MS, IV).
pub fn err_chk(elab: &ElaboratedDesign, log: &[String], trace: &Trace) -> Result<MismatchFacts, LocalizeError> {
    let mut times = BTreeSet::new();
    let mut signals = BTreeSet::new();
    for line in log {
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| LocalizeError::MalformedLog(e.to_string()))?;
        match v["kind"].as_str() {
            Some("check") => {
                let pass = v["pass"]
                    .as_bool()
                    .ok_or_else(|| LocalizeError::MalformedLog("check line missing pass".into()))?;
                if !pass {
                    let t = v["time"]
                        .as_u64()
                        .ok_or_else(|| LocalizeError::MalformedLog("check line missing time".into()))?;
                    let s = v["signal"]
                        .as_str()
                        .ok_or_else(|| LocalizeError::MalformedLog("check line missing signal".into()))?;
                    times.insert(t);
                    signals.insert(s.to_string());
                }
            }
            Some("summary") => {}
            _ => return Err(LocalizeError::MalformedLog(format!("unknown log line kind in: {line}"))),
        }
    }
    let times: Vec<u64> = times.into_iter().collect();
    let mut input_values = BTreeMap::new();
    if !times.is_empty() {
        for &id in &elab.top_inputs {
            let path = &elab.signal(id).path;
            let mut vals = Vec::with_capacity(times.len());
            for &t in &times {
                vals.push(trace.query(path, t)?.to_bin_string());
            }
            input_values.insert(path.clone(), vals);
        }
    }
    Ok(MismatchFacts { times, signals: signals.into_iter().collect(), input_values })
}

/// Result of one slice traversal.
pub struct SliceOutcome {
    /// (file, line) ordered by visit frequency descending, then line.
    pub lines: Vec<(String, u32)>,
    pub line_counts: HashMap<u32, u64>,
    /// Every signal visited on an executed path.
    pub visited_signals: BTreeSet<SignalId>,
}

/// Time-aware backward traversal from the DFG target at each mismatch time.
/// An assignment's edges are followed only when its guards evaluate, under
/// trace values at the relevant cycle, to the branch that actually executed;
/// unknown guard values are followed conservatively. Register edges decrement
/// the cycle.
pub fn dynamic_slice(
    elab: &ElaboratedDesign,
    dfg: &Dfg,
    mt: &[u64],
    trace: &Trace,
) -> Result<Vec<(String, u32)>, LocalizeError> {
    Ok(dynamic_slice_full(elab, dfg, mt, trace)?.lines)
}

pub fn dynamic_slice_full(
    elab: &ElaboratedDesign,
    dfg: &Dfg,
    mt: &[u64],
    trace: &Trace,
) -> Result<SliceOutcome, LocalizeError> {
    for &t in mt {
        if t > trace.horizon {
            return Err(LocalizeError::Sim(SimError::TimeBeyondHorizon { time: t, horizon: trace.horizon }));
        }
    }
    let mut line_counts: HashMap<u32, u64> = HashMap::new();
    let mut visited: HashSet<(SignalId, u64)> = HashSet::new();
    let mut visited_signals: BTreeSet<SignalId> = BTreeSet::new();
    let mut queue: VecDeque<(SignalId, u64)> = VecDeque::new();

    for &t in mt {
        if visited.insert((dfg.target, t)) {
            queue.push_back((dfg.target, t));
        }
    }
    visited_signals.insert(dfg.target);

    while let Some((sig, t)) = queue.pop_front() {
        let Some(deps) = dfg.deps.get(&sig) else { continue };
        for dep in deps {
            if !guards_pass(elab, &dep.guards, dep.kind, t, trace) {
                continue;
            }
            *line_counts.entry(dep.line).or_insert(0) += 1;
            if let Some(pl) = dep.process_line {
                // a register commit depends on its event control
                *line_counts.entry(pl).or_insert(0) += 1;
            }
            for (gsig, gline) in &dep.guard_srcs {
                *line_counts.entry(*gline).or_insert(0) += 1;
                visit(elab, *gsig, dep.kind, t, &mut visited, &mut visited_signals, &mut queue);
            }
            for src in &dep.data_srcs {
                visit(elab, *src, dep.kind, t, &mut visited, &mut visited_signals, &mut queue);
            }
        }
    }

    // definition sites of visited signals join the slice at unit weight so
    // declaration-level faults stay localizable without outranking the
    // executed statements
    for sig in &visited_signals {
        if let Some(line) = dfg.decl_lines.get(sig) {
            line_counts.entry(*line).or_insert(1);
        }
    }

    let file = if elab.file.is_empty() { elab.top_name.clone() } else { elab.file.clone() };
    let mut lines: Vec<(u32, u64)> = line_counts.iter().map(|(&l, &c)| (l, c)).collect();
    lines.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(SliceOutcome {
        lines: lines.into_iter().map(|(l, _)| (file.clone(), l)).collect(),
        line_counts,
        visited_signals,
    })
}

fn visit(
    elab: &ElaboratedDesign,
    sig: SignalId,
    kind: DepKind,
    t: u64,
    visited: &mut HashSet<(SignalId, u64)>,
    visited_signals: &mut BTreeSet<SignalId>,
    queue: &mut VecDeque<(SignalId, u64)>,
) {
    visited_signals.insert(sig);
    let t_next = match kind {
        DepKind::Comb => Some(t),
        DepKind::Seq => t.checked_sub(1),
    };
    // inputs terminate the walk; constants never appear as signals
    if elab.signal(sig).direction == crate::ast::Direction::Input {
        return;
    }
    if let Some(tn) = t_next {
        if visited.insert((sig, tn)) {
            queue.push_back((sig, tn));
        }
    }
}

/// Evaluate a dependency's guard chain under trace values. For a register
/// commit at cycle t, sequentially driven operands are read at t-1 (the
/// pre-commit value the block actually saw); everything else reads at t.
/// Unknown results pass conservatively.
fn guards_pass(
    elab: &ElaboratedDesign,
    guards: &[crate::dfg::Guard],
    kind: DepKind,
    t: u64,
    trace: &Trace,
) -> bool {
    if guards.is_empty() {
        return true;
    }
    let lookup = |id: SignalId| -> Value {
        let info = elab.signal(id);
        let time = if kind == DepKind::Seq && info.seq_driven {
            match t.checked_sub(1) {
                Some(tp) => tp,
                None => return Value::all_x(info.width),
            }
        } else {
            t
        };
        trace.query(&info.path, time).unwrap_or_else(|_| Value::all_x(info.width))
    };
    for g in guards {
        let pass = match &g.kind {
            GuardKind::Truthy(c) => eval_with(elab, &lookup, c, 0).truthiness() != Some(false),
            GuardKind::Falsy(c) => eval_with(elab, &lookup, c, 0).truthiness() != Some(true),
            GuardKind::CaseMatch { selector, labels } => {
                let sv = eval_with(elab, &lookup, selector, 0);
                match sv.as_u64() {
                    None => true, // unknown selector: follow conservatively
                    Some(s) => labels.iter().any(|l| {
                        let lv = eval_with(elab, &lookup, l, 0);
                        lv.as_u64().map_or(true, |x| x == s)
                    }),
                }
            }
            GuardKind::CaseDefault { selector, all_labels } => {
                let sv = eval_with(elab, &lookup, selector, 0);
                match sv.as_u64() {
                    None => true, // X selectors land in the default arm
                    Some(s) => !all_labels.iter().any(|l| {
                        let lv = eval_with(elab, &lookup, l, 0);
                        lv.as_u64() == Some(s)
                    }),
                }
            }
        };
        if !pass {
            return false;
        }
    }
    true
}

/// Full localization step: MS below the threshold, SL at or above it, with
/// mismatch-set expansion from executed slice paths.
pub fn fetch_err_info(
    elab: &ElaboratedDesign,
    report: &VerifyReport,
    iter: u32,
    th: u32,
) -> Result<ErrInfo, LocalizeError> {
    let facts = err_chk(elab, &report.log, &report.trace)?;
    if iter < th {
        return Ok(ErrInfo {
            mode: ErrInfoMode::MismatchSignals,
            mismatch_signals: facts.signals,
            mismatch_times: facts.times,
            input_values: facts.input_values,
            suspicious_lines: Vec::new(),
        });
    }
    let mut merged_counts: HashMap<u32, u64> = HashMap::new();
    let mut discovered: BTreeSet<SignalId> = BTreeSet::new();
    let mut file = elab.file.clone();
    for ms in &facts.signals {
        let dfg = build_dfg(elab, ms)?;
        let outcome = dynamic_slice_full(elab, &dfg, &facts.times, &report.trace)?;
        for (l, c) in outcome.line_counts {
            *merged_counts.entry(l).or_insert(0) += c;
        }
        discovered.extend(outcome.visited_signals);
        if let Some((f, _)) = outcome.lines.first() {
            file = f.clone();
        }
    }
    let mut signals = facts.signals.clone();
    for id in discovered {
        let path = &elab.signal(id).path;
        if !signals.contains(path) {
            signals.push(path.clone());
        }
    }
    let head: Vec<String> = facts.signals;
    // keep original mismatch signals first, discovered ones appended sorted
    let mut appended: Vec<String> = signals[head.len()..].to_vec();
    appended.sort();
    let mut mismatch_signals = head;
    mismatch_signals.extend(appended);

    let mut lines: Vec<(u32, u64)> = merged_counts.into_iter().collect();
    lines.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ErrInfo {
        mode: ErrInfoMode::SuspiciousLines,
        mismatch_signals,
        mismatch_times: facts.times,
        input_values: facts.input_values,
        suspicious_lines: lines.into_iter().map(|(l, _)| (file.clone(), l)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::parse_and_elaborate;
    use crate::source::SourceFile;
    use crate::stimulus::{make_stimulus, StimMode};
    use crate::testbench::run_verify;

    fn elab(name: &str, text: &str) -> (crate::ast::Design, ElaboratedDesign) {
        parse_and_elaborate(&SourceFile::new(name, text)).unwrap()
    }

    #[test]
    fn err_chk_empty_log_is_empty() {
        let (_, e) = elab("m.v", "module m(input a, output wire y);\nassign y = a;\nendmodule");
        let s = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        let report = run_verify(&e, &e, &s).unwrap();
        let facts = err_chk(&e, &report.log, &report.trace).unwrap();
        assert!(facts.times.is_empty());
        assert!(facts.signals.is_empty());
        assert!(facts.input_values.is_empty());
    }

    #[test]
    fn err_chk_collects_times_signals_inputs() {
        let (_, golden) = elab(
            "g.v",
            "module alu(input [3:0] a, input [3:0] b, output wire [4:0] sum);\nassign sum = a + b;\nendmodule",
        );
        let (_, dut) = elab(
            "d.v",
            "module alu(input [3:0] a, input [3:0] b, output wire [4:0] sum);\nassign sum = a - b;\nendmodule",
        );
        let s = make_stimulus(&dut, StimMode::Exhaustive, 0, 0, None).unwrap();
        let report = run_verify(&dut, &golden, &s).unwrap();
        let facts = err_chk(&dut, &report.log, &report.trace).unwrap();
        assert_eq!(facts.signals, vec!["sum".to_string()]);
        assert!(!facts.times.is_empty());
        // IV holds both inputs at every mismatch time
        assert_eq!(facts.input_values.len(), 2);
        assert_eq!(facts.input_values["a"].len(), facts.times.len());
        // cross-check one entry against the trace
        let t0 = facts.times[0];
        assert_eq!(facts.input_values["a"][0], report.trace.query("a", t0).unwrap().to_bin_string());
    }

    #[test]
    fn malformed_log_is_error() {
        let (_, e) = elab("m.v", "module m(input a, output wire y);\nassign y = a;\nendmodule");
        let s = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        let report = run_verify(&e, &e, &s).unwrap();
        let log = vec!["not json".to_string()];
        assert!(matches!(
            err_chk(&e, &log, &report.trace),
            Err(LocalizeError::MalformedLog(_))
        ));
    }

    #[test]
    fn mux_slice_follows_executed_branch() {
        let text = "module m(input sel, input a, input b, output reg y);\n\
                    always @(*) begin\nif (sel) y = a;\nelse y = b;\nend\nendmodule";
        let (_, e) = elab("mux.v", text);
        let dfg = build_dfg(&e, "y").unwrap();
        // directed stimulus: sel=1, a=0, b=1 -> y=0
        let stim = make_stimulus(&e, StimMode::Directed, 0, 0, Some(vec![vec![1, 0, 1]])).unwrap();
        let trace = crate::sim::simulate(&e, &stim).unwrap();
        let lines = dynamic_slice(&e, &dfg, &[0], &trace).unwrap();
        let nums: Vec<u32> = lines.iter().map(|(_, l)| *l).collect();
        assert!(nums.contains(&3), "then-branch line missing: {nums:?}");
        assert!(!nums.contains(&4), "else-branch line must be excluded: {nums:?}");
    }

    #[test]
    fn slice_is_subset_of_static() {
        let text = "module m(input sel, input a, input b, output reg y);\n\
                    always @(*) begin\nif (sel) y = a;\nelse y = b;\nend\nendmodule";
        let (_, e) = elab("mux.v", text);
        let dfg = build_dfg(&e, "y").unwrap();
        let stim = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        let trace = crate::sim::simulate(&e, &stim).unwrap();
        let static_lines = dfg.static_slice();
        for t in 0..=trace.horizon {
            let dynamic = dynamic_slice(&e, &dfg, &[t], &trace).unwrap();
            for (_, l) in dynamic {
                assert!(static_lines.contains(&l));
            }
        }
    }

    #[test]
    fn guard_free_slice_equals_static() {
        // purely combinational cone: with no guards to filter, the dynamic
        // slice degenerates to the full static backward slice
        let text = "module add(input [3:0] a, input [3:0] b, output wire [4:0] s);\n\
                    wire [3:0] t;\nassign t = a ^ b;\nassign s = t + (a & b);\nendmodule";
        let (_, e) = elab("add.v", text);
        let dfg = build_dfg(&e, "s").unwrap();
        let stim = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        let trace = crate::sim::simulate(&e, &stim).unwrap();
        let static_lines: Vec<u32> = dfg.static_slice().into_iter().collect();
        for t in [0u64, 7, 200] {
            let dynamic = dynamic_slice(&e, &dfg, &[t], &trace).unwrap();
            let mut dyn_lines: Vec<u32> = dynamic.iter().map(|(_, l)| *l).collect();
            dyn_lines.sort_unstable();
            assert_eq!(dyn_lines, static_lines);
        }
    }

    #[test]
    fn escalation_modes() {
        let (_, golden) = elab(
            "g.v",
            "module m(input [3:0] a, output wire [3:0] y);\nwire [3:0] tmp;\nassign tmp = a + 4'd1;\nassign y = tmp;\nendmodule",
        );
        let (_, dut) = elab(
            "d.v",
            "module m(input [3:0] a, output wire [3:0] y);\nwire [3:0] tmp;\nassign tmp = a - 4'd1;\nassign y = tmp;\nendmodule",
        );
        let s = make_stimulus(&dut, StimMode::Exhaustive, 0, 0, None).unwrap();
        let report = run_verify(&dut, &golden, &s).unwrap();
        let ms = fetch_err_info(&dut, &report, 1, 2).unwrap();
        assert_eq!(ms.mode, ErrInfoMode::MismatchSignals);
        assert!(ms.suspicious_lines.is_empty());
        assert_eq!(ms.mismatch_signals, vec!["y".to_string()]);

        let sl = fetch_err_info(&dut, &report, 2, 2).unwrap();
        assert_eq!(sl.mode, ErrInfoMode::SuspiciousLines);
        assert!(!sl.suspicious_lines.is_empty());
        // the faulty line (3) is in the slice
        assert!(sl.suspicious_lines.iter().any(|(_, l)| *l == 3));
        // signal expansion pulled the internal wire into MS
        assert!(sl.mismatch_signals.contains(&"tmp".to_string()));
        // monotone escalation
        for s in &ms.mismatch_signals {
            assert!(sl.mismatch_signals.contains(s));
        }
    }

    #[test]
    fn err_info_json_schema() {
        let info = ErrInfo {
            mode: ErrInfoMode::MismatchSignals,
            mismatch_signals: vec!["sum".into()],
            mismatch_times: vec![3, 7],
            input_values: BTreeMap::from([("a".to_string(), vec!["0011".into(), "0101".into()])]),
            suspicious_lines: vec![],
        };
        let j = info.to_json();
        assert_eq!(j["mode"], "MS");
        assert_eq!(j["signals"][0], "sum");
        assert_eq!(j["times"][1], 7);
        assert_eq!(j["inputs"]["a"][0], "0011");
        let back: ErrInfo = serde_json::from_value(serde_json::to_value(&info).unwrap()).unwrap();
        assert_eq!(back, info);
    }
}
