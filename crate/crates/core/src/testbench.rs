//! Differential testbench: drives DUT and golden reference side by side
//! under identical stimulus and scores each DUT output against the golden
//! output every post-reset cycle.
//!
//! The verification log is JSON lines,
//! `{"kind":"check","time":T,"signal":S,"expected":"bin","actual":"bin","pass":bool}`
//! followed by one `{"kind":"summary","pass_rate":R}` line. A failing check
//! is any line matching `"pass":false`.

use crate::elaborate::ElaboratedDesign;
use crate::sim::{simulate, SimError, Trace};
use crate::stimulus::Stimulus;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("port contract violation: {0}")]
    PortContractViolation(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no checks scored: stimulus has no post-reset cycles")]
    NoChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRecord {
    pub time: u64,
    pub signal: String,
    pub expected: Value,
    pub actual: Value,
}

/// Scoreboard outcome for one verification run (or a whole suite).
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub total_checks: u64,
    pub passed_checks: u64,
    pub pass_rate: f64,
    pub mismatches: Vec<MismatchRecord>,
    /// Structured log lines (checks then a summary line).
    pub log: Vec<String>,
    /// DUT-side trace, scored runs concatenated.
    pub trace: Trace,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.total_checks > 0 && self.passed_checks == self.total_checks
    }
}

/// Compare policy: an X bit on the DUT side against a known golden bit is a
/// mismatch; X against X passes.
fn outputs_match(expected: Value, actual: Value) -> bool {
    if expected.width != actual.width {
        return false;
    }
    // bits known on both sides must agree
    let both_known = !expected.xmask & !actual.xmask;
    if (expected.bits ^ actual.bits) & both_known != 0 {
        return false;
    }
    // DUT X where golden is known fails
    actual.xmask & !expected.xmask == 0
}

fn check_port_contract(dut: &ElaboratedDesign, golden: &ElaboratedDesign) -> Result<(), VerifyError> {
    let describe = |e: &ElaboratedDesign, ids: &[crate::elaborate::SignalId]| -> Vec<(String, u32)> {
        let mut v: Vec<(String, u32)> =
            ids.iter().map(|id| (e.signal(*id).path.clone(), e.width_of(*id))).collect();
        v.sort();
        v
    };
    let dins = describe(dut, &dut.top_inputs);
    let gins = describe(golden, &golden.top_inputs);
    if dins != gins {
        return Err(VerifyError::PortContractViolation(format!(
            "input ports differ: dut {dins:?} vs golden {gins:?}"
        )));
    }
    let douts = describe(dut, &dut.top_outputs);
    let gouts = describe(golden, &golden.top_outputs);
    if douts != gouts {
        return Err(VerifyError::PortContractViolation(format!(
            "output ports differ: dut {douts:?} vs golden {gouts:?}"
        )));
    }
    Ok(())
}

/// One stimulus run. See [`run_verify_suite`] for the multi-run form used by
/// sessions and the benchmark generator.
pub fn run_verify(
    dut: &ElaboratedDesign,
    golden: &ElaboratedDesign,
    stim: &Stimulus,
) -> Result<VerifyReport, VerifyError> {
    run_verify_suite(dut, golden, std::slice::from_ref(stim))
}

/// Run every stimulus in the suite and aggregate into one report. Traces and
/// check times from later runs are shifted past the previous horizon so the
/// report reads as a single timeline.
pub fn run_verify_suite(
    dut: &ElaboratedDesign,
    golden: &ElaboratedDesign,
    suite: &[Stimulus],
) -> Result<VerifyReport, VerifyError> {
    check_port_contract(dut, golden)?;
    let mut outputs: Vec<String> = dut.top_outputs.iter().map(|id| dut.signal(*id).path.clone()).collect();
    outputs.sort();

    let mut total = 0u64;
    let mut passed = 0u64;
    let mut mismatches = Vec::new();
    let mut log = Vec::new();
    let mut merged = Trace::new();

    for stim in suite {
        let dut_trace = simulate(dut, stim)?;
        let golden_trace = simulate(golden, stim)?;
        let offset = merged.append_shifted(&dut_trace);
        for cycle in stim.reset_cycles..=dut_trace.horizon {
            for name in &outputs {
                let expected = golden_trace.query(name, cycle)?;
                let actual = dut_trace.query(name, cycle)?;
                let pass = outputs_match(expected, actual);
                total += 1;
                if pass {
                    passed += 1;
                } else {
                    mismatches.push(MismatchRecord {
                        time: cycle + offset,
                        signal: name.clone(),
                        expected,
                        actual,
                    });
                }
                log.push(format!(
                    "{{\"kind\":\"check\",\"time\":{},\"signal\":\"{}\",\"expected\":\"{}\",\"actual\":\"{}\",\"pass\":{}}}",
                    cycle + offset,
                    name,
                    expected.to_bin_string(),
                    actual.to_bin_string(),
                    pass
                ));
            }
        }
    }
    if total == 0 {
        return Err(VerifyError::NoChecks);
    }
    let pass_rate = passed as f64 / total as f64;
    log.push(format!("{{\"kind\":\"summary\",\"pass_rate\":{pass_rate}}}"));
    Ok(VerifyReport { total_checks: total, passed_checks: passed, pass_rate, mismatches, log, trace: merged })
}
