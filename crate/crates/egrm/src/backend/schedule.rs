//! Decode schedules: the ordered sampling settings for a fan-out.

use serde::Deserialize;

use crate::types::DecodeParams;

use super::BackendError;

/// Default completion budget per decode call.
pub const DEFAULT_MAX_TOKENS: u32 = 256;

/// Seeds start at 43 and advance by one per schedule entry.
const BASE_SEED: u64 = 43;

/// An ordered, duplicate-free sequence of decode settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeSchedule {
    entries: Vec<DecodeParams>,
}

impl DecodeSchedule {
    pub fn new(entries: Vec<DecodeParams>) -> Result<Self, BackendError> {
        if entries.is_empty() {
            return Err(BackendError::EmptySchedule);
        }
        for (i, a) in entries.iter().enumerate() {
            for b in entries.iter().skip(i + 1) {
                if a.temperature() == b.temperature()
                    && a.top_p() == b.top_p()
                    && a.seed() == b.seed()
                {
                    return Err(BackendError::DuplicateScheduleEntry);
                }
            }
        }
        Ok(Self { entries })
    }

    /// Single-entry schedule for a lone greedy probe.
    pub fn single(params: DecodeParams) -> Self {
        Self { entries: vec![params] }
    }

    pub fn entries(&self) -> &[DecodeParams] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Knobs for [`default_schedules`], exposed so config files can reshape the
/// sweep ranges without code changes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleRanges {
    pub parallel_temperature: (f64, f64),
    pub parallel_top_p: f64,
    pub candidate_temperature: (f64, f64),
    pub candidate_top_ps: Vec<f64>,
    pub max_tokens: u32,
}

impl Default for ScheduleRanges {
    fn default() -> Self {
        Self {
            parallel_temperature: (0.3, 1.1),
            parallel_top_p: 0.95,
            candidate_temperature: (0.5, 1.2),
            candidate_top_ps: vec![0.9, 0.95],
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

fn spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Builds the two default schedules: `m` parallel probe decodes with
/// temperatures evenly spaced over the parallel range, and `k` candidate
/// decodes crossing candidate temperatures with the configured top-p values
/// (temperature-major order, truncated to `k`). Seeds run 43, 44, ... across
/// both schedules so every entry is distinct.
pub fn default_schedules(
    m: usize,
    k: usize,
    ranges: &ScheduleRanges,
) -> Result<(DecodeSchedule, DecodeSchedule), BackendError> {
    if m < 2 {
        return Err(BackendError::BadProbeCount(m));
    }
    if k == 0 {
        return Err(BackendError::BadCandidateCount);
    }

    let (plo, phi) = ranges.parallel_temperature;
    let parallel: Vec<DecodeParams> = spaced(plo, phi, m)
        .into_iter()
        .enumerate()
        .map(|(i, t)| DecodeParams::new(t, ranges.parallel_top_p, ranges.max_tokens, BASE_SEED + i as u64))
        .collect::<Result<_, _>>()?;

    let (clo, chi) = ranges.candidate_temperature;
    let top_ps = if ranges.candidate_top_ps.is_empty() { vec![0.95] } else { ranges.candidate_top_ps.clone() };
    let temp_count = k.div_ceil(top_ps.len());
    let mut candidates = Vec::with_capacity(k);
    'outer: for t in spaced(clo, chi, temp_count) {
        for &p in &top_ps {
            if candidates.len() == k {
                break 'outer;
            }
            let seed = BASE_SEED + (m + candidates.len()) as u64;
            candidates.push(DecodeParams::new(t, p, ranges.max_tokens, seed)?);
        }
    }

    Ok((DecodeSchedule::new(parallel)?, DecodeSchedule::new(candidates)?))
}
