//! Offline trace analysis: wave-model runtime predictions and least-squares
//! linear fits over per-SM block end times, plus block-duration statistics.
//!
//! The wave model says a grid assigned N blocks to an SM at residency R, each
//! block taking t cycles, finishes in ceil(N/R) * t. The linear fit regresses
//! block end times against their finish rank and extrapolates to the last
//! block. Both are normalized against the observed per-SM runtime (last end
//! minus first start).

use std::collections::BTreeMap;

use crate::model::{max_residency, Cycle, KernelSpec, SmConfig};
use crate::trace::Trace;
use thiserror::Error;

/// Per-SM view of one kernel invocation, blocks ordered by finish time.
#[derive(Debug, Clone)]
pub struct SmExecutionProfile {
    pub kernel_id: String,
    pub sm_id: u32,
    pub block_durations: Vec<Cycle>,
    pub end_times: Vec<Cycle>,
    pub n_blocks: u64,
    pub residency: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Staircase,
    LinearFit,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Staircase => "staircase",
            Method::LinearFit => "linear_fit",
        }
    }
}

/// One prediction compared against the observed runtime.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub kernel_id: String,
    pub invocation: u32,
    pub sm_id: u32,
    pub method: Method,
    pub predicted_cycles: f64,
    pub actual_cycles: Cycle,
    pub normalized: f64,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("fewer than two blocks, cannot fit a line")]
    DegenerateFit,
    #[error("no spec for kernel {0} in catalog")]
    MissingSpec(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Total wave-model time for `n_blocks` blocks at residency `residency`,
/// each taking `t` cycles.
pub fn staircase_predict(n_blocks: u64, residency: u32, t: Cycle) -> Cycle {
    assert!(n_blocks >= 1 && residency >= 1 && t >= 1);
    n_blocks.div_ceil(residency as u64) * t
}

/// Ordinary least squares of end time against finish rank (1..=N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub predicted_total: f64,
}

/// Fit end times against ranks 1..=len and evaluate at `predict_rank`.
/// `window` restricts the fit to the first `window` finishers while still
/// extrapolating to `predict_rank`.
pub fn linear_fit_predict_windowed(
    end_times: &[Cycle],
    window: Option<usize>,
    predict_rank: u64,
) -> Result<LinearFit, AnalysisError> {
    let m = window.map_or(end_times.len(), |w| w.min(end_times.len()));
    if m < 2 {
        return Err(AnalysisError::DegenerateFit);
    }
    let xs = (1..=m).map(|i| i as f64);
    let ys = end_times[..m].iter().map(|&e| e as f64);
    let mean_x = (m as f64 + 1.0) / 2.0;
    let mean_y = ys.clone().sum::<f64>() / m as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.zip(ys) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok(LinearFit { slope, intercept, predicted_total: intercept + slope * predict_rank as f64 })
}

pub fn linear_fit_predict(profile: &SmExecutionProfile) -> Result<LinearFit, AnalysisError> {
    linear_fit_predict_windowed(&profile.end_times, None, profile.n_blocks)
}

/// Restrict the linear fit to the first `2R` finishers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWindow {
    #[default]
    All,
    FirstTwoR,
}

/// Extract the per-SM profile of one kernel invocation from a trace.
pub fn sm_profile(
    trace: &Trace,
    kernel_id: &str,
    invocation: u32,
    sm_id: u32,
    residency: u32,
) -> SmExecutionProfile {
    let group = trace.sm_group(kernel_id, invocation, sm_id);
    SmExecutionProfile {
        kernel_id: kernel_id.to_owned(),
        sm_id,
        block_durations: group.iter().map(|r| r.duration()).collect(),
        end_times: group.iter().map(|r| r.end_cycle).collect(),
        n_blocks: group.len() as u64,
        residency,
    }
}

/// Run both predictors over every (kernel, invocation, SM) group of a trace.
///
/// The wave-model prediction uses the duration of the first block to finish as
/// t; the observed runtime is last end minus first start on that SM.
pub fn analyze_trace(
    trace: &Trace,
    specs: &BTreeMap<String, KernelSpec>,
    sm: &SmConfig,
    window: FitWindow,
) -> Result<Vec<PredictionRecord>, AnalysisError> {
    let mut out = Vec::new();
    for (kernel_id, invocation) in trace.kernel_invocations() {
        let spec = specs
            .get(&kernel_id)
            .ok_or_else(|| AnalysisError::MissingSpec(kernel_id.clone()))?;
        let residency = max_residency(spec, sm)?;
        for sm_id in trace.sms_for(&kernel_id, invocation) {
            let group = trace.sm_group(&kernel_id, invocation, sm_id);
            let first_start = group.iter().map(|r| r.start_cycle).min().unwrap();
            let last_end = group.last().unwrap().end_cycle;
            let actual = last_end - first_start;
            let profile = sm_profile(trace, &kernel_id, invocation, sm_id, residency);

            let t_first = group[0].duration();
            let stair = staircase_predict(profile.n_blocks, residency, t_first);
            out.push(PredictionRecord {
                kernel_id: kernel_id.clone(),
                invocation,
                sm_id,
                method: Method::Staircase,
                predicted_cycles: stair as f64,
                actual_cycles: actual,
                normalized: stair as f64 / actual as f64,
            });

            let w = match window {
                FitWindow::All => None,
                FitWindow::FirstTwoR => Some(2 * residency as usize),
            };
            if let Ok(fit) = linear_fit_predict_windowed(&profile.end_times, w, profile.n_blocks) {
                // Predictions are relative to the SM's first block start.
                let predicted = fit.predicted_total - first_start as f64;
                out.push(PredictionRecord {
                    kernel_id: kernel_id.clone(),
                    invocation,
                    sm_id,
                    method: Method::LinearFit,
                    predicted_cycles: predicted,
                    actual_cycles: actual,
                    normalized: predicted / actual as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Mean block duration and relative standard deviation per kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationStats {
    pub n_blocks: u64,
    pub mean_t: f64,
    pub rsd_percent: f64,
}

pub fn duration_stats(trace: &Trace) -> BTreeMap<String, DurationStats> {
    let mut durations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &trace.records {
        durations.entry(r.kernel_id.clone()).or_default().push(r.duration() as f64);
    }
    durations
        .into_iter()
        .map(|(kernel, ds)| {
            let n = ds.len() as f64;
            let mean = ds.iter().sum::<f64>() / n;
            let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
            let rsd = 100.0 * var.sqrt() / mean;
            (kernel, DurationStats { n_blocks: ds.len() as u64, mean_t: mean, rsd_percent: rsd })
        })
        .collect()
}
