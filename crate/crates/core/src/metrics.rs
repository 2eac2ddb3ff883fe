//! Hit rate and fix rate.
//!
//! HR is the fraction of instances whose repaired code passes every
//! in-session check. FR applies a stricter oracle to HR's survivors: the
//! final text is re-verified against the golden model under an extended
//! independent suite (exhaustive when the input space allows, otherwise 32
//! fresh seeds x 1024 cycles disjoint from the session's). FR <= HR by
//! construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty result set")]
    EmptyResultSet,
}

/// Exact ratio: numerator/denominator alongside the float value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
    pub value: f64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        Ratio { num, den, value: num as f64 / den as f64 }
    }
}

/// One session's outcome as the metrics see it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub id: String,
    /// All in-session checks passed (final pass rate = 1, parse/lint clean).
    pub hr_pass: bool,
    /// Extended-suite validation verdict; None when HR already failed.
    pub fr_pass: Option<bool>,
}

/// Eq.-style hit rate: sessions whose corrected code passes every test case,
/// over all sessions.
pub fn compute_hr(results: &[SessionOutcome]) -> Result<Ratio, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResultSet);
    }
    let hits = results.iter().filter(|r| r.hr_pass).count() as u64;
    Ok(Ratio::new(hits, results.len() as u64))
}

/// Fix rate: HR survivors whose final text also passes the extended
/// independent suite, over all sessions.
pub fn compute_fr(results: &[SessionOutcome]) -> Result<Ratio, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResultSet);
    }
    let fixes = results.iter().filter(|r| r.hr_pass && r.fr_pass == Some(true)).count() as u64;
    Ok(Ratio::new(fixes, results.len() as u64))
}
