//! Stimulus generation: directed, random, and exhaustive input sequences
//! with a fixed clock/reset protocol.
//!
//! Clock inputs are never part of the sequences; every simulated cycle
//! carries one implicit rising clock edge. Reset inputs are driven by the
//! protocol: held active for `reset_cycles`, then released. Only the
//! remaining "data" inputs are enumerated or randomized.

use crate::elaborate::{ElaboratedDesign, SignalId};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exhaustive enumeration is allowed up to this many data input bits.
pub const EXHAUSTIVE_MAX_BITS: u32 = 14;

/// Reset cycles prepended when the design has a recognized reset input.
pub const DEFAULT_RESET_CYCLES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimMode {
    Directed,
    Random,
    Exhaustive,
}

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("exhaustive mode needs <= {EXHAUSTIVE_MAX_BITS} data input bits, design has {0}")]
    ExhaustiveTooLarge(u32),
    #[error("directed mode requires explicit per-cycle sequences")]
    MissingSequences,
    #[error("directed sequence cycle {cycle} is missing a value for input '{input}'")]
    IncompleteSequence { cycle: usize, input: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetPolarity {
    ActiveLow,
    ActiveHigh,
}

/// Clock/reset recognition over top-level inputs, by naming convention.
#[derive(Debug, Clone)]
pub struct PortRoles {
    pub clocks: Vec<SignalId>,
    pub resets: Vec<(SignalId, ResetPolarity)>,
    pub data_inputs: Vec<SignalId>,
}

impl PortRoles {
    pub fn classify(elab: &ElaboratedDesign) -> PortRoles {
        let mut roles = PortRoles { clocks: Vec::new(), resets: Vec::new(), data_inputs: Vec::new() };
        for &id in &elab.top_inputs {
            let info = elab.signal(id);
            let lname = info.path.to_ascii_lowercase();
            if info.width == 1 && is_clock_name(&lname) {
                roles.clocks.push(id);
            } else if info.width == 1 && reset_polarity(&lname).is_some() {
                roles.resets.push((id, reset_polarity(&lname).unwrap()));
            } else {
                roles.data_inputs.push(id);
            }
        }
        roles
    }

    pub fn reset_ids(&self) -> Vec<SignalId> {
        self.resets.iter().map(|(id, _)| *id).collect()
    }

    pub fn data_bits(&self, elab: &ElaboratedDesign) -> u32 {
        self.data_inputs.iter().map(|id| elab.width_of(*id)).sum()
    }
}

fn is_clock_name(lname: &str) -> bool {
    matches!(lname, "clk" | "clock" | "clk_i" | "i_clk" | "sysclk")
}

pub(crate) fn reset_polarity(lname: &str) -> Option<ResetPolarity> {
    match lname {
        "rstn" | "rst_n" | "resetn" | "reset_n" | "nrst" | "nreset" | "rst_ni" | "aresetn" => {
            Some(ResetPolarity::ActiveLow)
        }
        "rst" | "reset" | "rst_i" | "i_rst" | "arst" => Some(ResetPolarity::ActiveHigh),
        _ => None,
    }
}

/// A fully materialized input schedule. `(mode, seed, cycles)` determines
/// every value; building the same stimulus twice yields an equal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub mode: StimMode,
    pub seed: u64,
    /// Cycles held in reset before `sequences` begin.
    pub reset_cycles: u64,
    /// Data input names, in top-port order.
    pub inputs: Vec<String>,
    /// One entry per post-reset cycle; values indexed like `inputs`.
    pub sequences: Vec<Vec<u64>>,
    /// Reset input names (driven by protocol, never randomized).
    pub resets: Vec<(String, bool)>, // (name, active_level_is_high)
}

impl Stimulus {
    pub fn total_cycles(&self) -> u64 {
        self.reset_cycles + self.sequences.len() as u64
    }

    /// Value of input `idx` (into `inputs`) at an absolute cycle.
    pub fn data_value(&self, idx: usize, cycle: u64) -> u64 {
        if cycle < self.reset_cycles {
            return 0;
        }
        let k = (cycle - self.reset_cycles) as usize;
        self.sequences.get(k).map_or(0, |row| row[idx])
    }

    /// Reset level (per reset input) at an absolute cycle.
    pub fn reset_value(&self, active_high: bool, cycle: u64) -> u64 {
        let in_reset = cycle < self.reset_cycles;
        match (in_reset, active_high) {
            (true, true) => 1,
            (true, false) => 0,
            (false, true) => 0,
            (false, false) => 1,
        }
    }
}

/// Build a stimulus for `elab`. `cycles` is the number of post-reset data
/// cycles for random mode; exhaustive mode derives it from the input space.
pub fn make_stimulus(
    elab: &ElaboratedDesign,
    mode: StimMode,
    seed: u64,
    cycles: u64,
    directed: Option<Vec<Vec<u64>>>,
) -> Result<Stimulus, StimulusError> {
    let roles = PortRoles::classify(elab);
    let inputs: Vec<String> = roles.data_inputs.iter().map(|id| elab.signal(*id).path.clone()).collect();
    let widths: Vec<u32> = roles.data_inputs.iter().map(|id| elab.width_of(*id)).collect();
    let resets: Vec<(String, bool)> = roles
        .resets
        .iter()
        .map(|(id, pol)| (elab.signal(*id).path.clone(), *pol == ResetPolarity::ActiveHigh))
        .collect();
    let reset_cycles = if resets.is_empty() { 0 } else { DEFAULT_RESET_CYCLES };

    let sequences = match mode {
        StimMode::Exhaustive => {
            let bits: u32 = widths.iter().sum();
            if bits > EXHAUSTIVE_MAX_BITS {
                return Err(StimulusError::ExhaustiveTooLarge(bits));
            }
            let patterns = 1u64 << bits;
            let mut rows = Vec::with_capacity(patterns as usize);
            for p in 0..patterns {
                let mut row = Vec::with_capacity(widths.len());
                let mut shift = 0u32;
                for &w in &widths {
                    row.push((p >> shift) & crate::value::width_mask(w));
                    shift += w;
                }
                rows.push(row);
            }
            rows
        }
        StimMode::Random => {
            let mut rng = SplitMix64::new(seed);
            let mut rows = Vec::with_capacity(cycles as usize);
            for _ in 0..cycles {
                let row = widths.iter().map(|&w| rng.next_u64() & crate::value::width_mask(w)).collect();
                rows.push(row);
            }
            rows
        }
        StimMode::Directed => {
            let rows = directed.ok_or(StimulusError::MissingSequences)?;
            for (i, row) in rows.iter().enumerate() {
                if row.len() != inputs.len() {
                    return Err(StimulusError::IncompleteSequence {
                        cycle: i,
                        input: inputs.get(row.len()).cloned().unwrap_or_default(),
                    });
                }
            }
            rows
        }
    };

    Ok(Stimulus { mode, seed, reset_cycles, inputs, sequences, resets })
}

/// Suite configuration shared by sessions and the benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Random runs when exhaustive mode is not legal.
    pub seeds: u64,
    pub cycles_per_seed: u64,
    /// Base seed; per-run seeds are derived from it.
    pub master_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seeds: 8, cycles_per_seed: 256, master_seed: 1 }
    }
}

impl SuiteConfig {
    /// Extended validation shape: 32 seeds x 1024 cycles.
    pub fn extended(master_seed: u64) -> SuiteConfig {
        SuiteConfig { seeds: 32, cycles_per_seed: 1024, master_seed }
    }

    /// Session runs draw from even derivation lanes.
    pub fn session_seed(&self, run: u64) -> u64 {
        SplitMix64::new(self.master_seed ^ (run.wrapping_mul(2) + 2)).next_u64()
    }

    /// Extended validation draws from odd lanes, disjoint from sessions'.
    pub fn extended_seed(&self, run: u64) -> u64 {
        SplitMix64::new(self.master_seed ^ (run.wrapping_mul(2) + 1)).next_u64()
    }
}

/// Default verification suite: one exhaustive stimulus when the data input
/// space allows it, otherwise a random seed sweep.
pub fn default_suite(elab: &ElaboratedDesign, cfg: &SuiteConfig) -> Result<Vec<Stimulus>, StimulusError> {
    let roles = PortRoles::classify(elab);
    if roles.data_bits(elab) <= EXHAUSTIVE_MAX_BITS {
        return Ok(vec![make_stimulus(elab, StimMode::Exhaustive, 0, 0, None)?]);
    }
    let mut suite = Vec::with_capacity(cfg.seeds as usize);
    for run in 0..cfg.seeds {
        suite.push(make_stimulus(elab, StimMode::Random, cfg.session_seed(run), cfg.cycles_per_seed, None)?);
    }
    Ok(suite)
}

/// Extended (independent) validation suite used by the fix-rate oracle.
pub fn extended_suite(elab: &ElaboratedDesign, cfg: &SuiteConfig) -> Result<Vec<Stimulus>, StimulusError> {
    let roles = PortRoles::classify(elab);
    if roles.data_bits(elab) <= EXHAUSTIVE_MAX_BITS {
        return Ok(vec![make_stimulus(elab, StimMode::Exhaustive, 0, 0, None)?]);
    }
    let ext = SuiteConfig::extended(cfg.master_seed);
    let mut suite = Vec::with_capacity(ext.seeds as usize);
    for run in 0..ext.seeds {
        suite.push(make_stimulus(elab, StimMode::Random, ext.extended_seed(run), ext.cycles_per_seed, None)?);
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::parser::parse_str;

    fn counter_elab() -> ElaboratedDesign {
        let d = parse_str(
            "counter.v",
            "module counter(input clk, input rstn, input en, output reg [7:0] count);\n\
             always @(posedge clk or negedge rstn) begin\n\
             if (!rstn) count <= 8'd0;\n\
             else if (en) count <= count + 8'd1;\n\
             end\nendmodule",
        );
        elaborate(&d).unwrap()
    }

    #[test]
    fn classifies_clock_and_reset() {
        let e = counter_elab();
        let roles = PortRoles::classify(&e);
        assert_eq!(roles.clocks.len(), 1);
        assert_eq!(roles.resets.len(), 1);
        assert_eq!(roles.data_inputs.len(), 1);
        assert_eq!(roles.resets[0].1, ResetPolarity::ActiveLow);
    }

    #[test]
    fn exhaustive_enumerates_all_patterns() {
        let d = parse_str("m.v", "module m(input [1:0] a, output wire y); assign y = a[0] ^ a[1]; endmodule");
        let e = elaborate(&d).unwrap();
        let s = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        assert_eq!(s.sequences.len(), 4);
        let mut seen: Vec<u64> = s.sequences.iter().map(|r| r[0]).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(s.reset_cycles, 0);
    }

    #[test]
    fn exhaustive_rejects_wide_inputs() {
        let d = parse_str("m.v", "module m(input [19:0] a, output wire y); assign y = a[0]; endmodule");
        let e = elaborate(&d).unwrap();
        match make_stimulus(&e, StimMode::Exhaustive, 0, 0, None) {
            Err(StimulusError::ExhaustiveTooLarge(20)) => {}
            other => panic!("expected ExhaustiveTooLarge(20), got {other:?}"),
        }
    }

    #[test]
    fn equal_seeds_equal_stimulus() {
        let e = counter_elab();
        let a = make_stimulus(&e, StimMode::Random, 7, 100, None).unwrap();
        let b = make_stimulus(&e, StimMode::Random, 7, 100, None).unwrap();
        assert_eq!(a, b);
        let c = make_stimulus(&e, StimMode::Random, 8, 100, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn session_and_extended_seed_domains_disjoint() {
        let cfg = SuiteConfig::default();
        let session: Vec<u64> = (0..64).map(|r| cfg.session_seed(r)).collect();
        let extended: Vec<u64> = (0..64).map(|r| cfg.extended_seed(r)).collect();
        for s in &session {
            assert!(!extended.contains(s), "seed domains overlap");
        }
    }
}
