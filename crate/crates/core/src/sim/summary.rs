//! Run summaries computed from a trace alone.

use std::collections::BTreeMap;

use serde::Serialize;

use super::monitor::intervals;
use super::trace::SimTrace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorStats {
    pub start: f64,
    pub end: f64,
    pub rms: f64,
    pub max: f64,
}

impl ErrorStats {
    /// Statistics of `|v|` over samples with `start <= t <= end`. `NaN` samples
    /// count as infinite.
    pub fn over(t: &[f64], v: &[f64], start: f64, end: f64) -> Self {
        let sel: Vec<f64> = t
            .iter()
            .zip(v)
            .filter(|(t, _)| **t >= start && **t <= end)
            .map(|(_, v)| if v.is_nan() { f64::INFINITY } else { v.abs() })
            .collect();
        let n = sel.len().max(1) as f64;
        Self {
            start,
            end,
            rms: (sel.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
            max: sel.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub machine: String,
    pub samples: usize,
    pub violated_intervals: Vec<(f64, f64)>,
    /// `(min, max)` of every determinant channel.
    pub determinant_extrema: BTreeMap<String, (f64, f64)>,
    /// Error statistics per estimator channel and labelled window.
    pub errors: BTreeMap<String, BTreeMap<String, ErrorStats>>,
    pub diverged_at: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub wall_clock_s: f64,
}

fn col(trace: &SimTrace, name: &str) -> Vec<f64> {
    trace.column(name).unwrap_or_else(|| vec![f64::NAN; trace.len()])
}

fn ekf_names(trace: &SimTrace, marker: &str) -> Vec<String> {
    trace.columns.iter().filter_map(|c| c.strip_suffix(marker).map(String::from)).collect()
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn all_in(t: &[f64], v: &[f64], start: f64, end: f64, pred: impl Fn(f64) -> bool) -> bool {
    t.iter().zip(v).filter(|(t, _)| **t >= start && **t <= end).all(|(_, v)| pred(*v))
}

fn base(trace: &SimTrace, machine: &str, dets: &[&str]) -> RunSummary {
    let t = col(trace, "t");
    let violated: Vec<bool> = col(trace, "violated").iter().map(|v| *v != 0.0).collect();
    let mut determinant_extrema = BTreeMap::new();
    for d in dets {
        determinant_extrema.insert(d.to_string(), extrema(&col(trace, d)));
    }
    let mut diverged_at = BTreeMap::new();
    for n in ekf_names(trace, "_diverged") {
        let flags = col(trace, &format!("{n}_diverged"));
        if let Some(k) = flags.iter().position(|v| *v != 0.0) {
            diverged_at.insert(n, t[k]);
        }
    }
    RunSummary {
        machine: machine.into(),
        samples: trace.len(),
        violated_intervals: intervals(&t, &violated),
        determinant_extrema,
        errors: BTreeMap::new(),
        diverged_at,
        checks: BTreeMap::new(),
        wall_clock_s: 0.0,
    }
}

/// Time after which the rotor-position error of `ekf` stays below `tol`
/// until `end`, searching from `start`.
pub fn settle_time(t: &[f64], err: &[f64], start: f64, end: f64, tol: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= start && t[k] <= end).collect();
    let last_bad = idx.iter().rev().find(|&&k| !(err[k].abs() < tol));
    match last_bad {
        None => idx.first().map(|&k| t[k]),
        Some(&k) if t[k] < end => Some(t[k + 1]),
        Some(_) => None,
    }
}

/// Context of the synchronous-machine scenario checks.
#[derive(Clone, Debug)]
pub struct WrsmChecks {
    pub injection_windows: Vec<(f64, f64)>,
    pub threshold: f64,
    pub monitor_window: f64,
    /// Current-loop settling excluded from the tracking check (s).
    pub settle: f64,
}

/// Context of the induction-machine scenario checks. Checks whose inputs
/// are absent are skipped.
#[derive(Clone, Debug)]
pub struct ImChecks {
    /// Zero-stator-frequency dwell.
    pub dwell: Option<(f64, f64)>,
    pub threshold: f64,
    /// Initial estimator convergence excluded from the steady-state checks (s).
    pub settle: f64,
    /// Slack around the dwell for the violated-interval check (s).
    pub margin: f64,
    pub with_speed: Option<String>,
    pub sensorless: Option<String>,
}

#[derive(Clone, Debug)]
pub enum ScenarioChecks {
    Wrsm(WrsmChecks),
    Im(ImChecks),
}

pub fn summarize(trace: &SimTrace, checks: &ScenarioChecks) -> RunSummary {
    match checks {
        ScenarioChecks::Wrsm(c) => summarize_wrsm(trace, c),
        ScenarioChecks::Im(c) => summarize_im(trace, c),
    }
}

fn summarize_wrsm(trace: &SimTrace, c: &WrsmChecks) -> RunSummary {
    let mut s = base(trace, "wrsm", &["det"]);
    let t = col(trace, "t");
    let end = t.last().copied().unwrap_or(0.0);
    let windows = &c.injection_windows;
    let first = windows.first().map_or(end, |w| w.0);
    let inside = |x: f64, slack: f64| windows.iter().any(|w| x >= w.0 && x <= w.1 + slack);

    for n in ekf_names(trace, "_theta_err") {
        let err = col(trace, &format!("{n}_theta_err"));
        let werr = col(trace, &format!("{n}_omega_err"));
        let mut m = BTreeMap::new();
        m.insert("theta_err_before_injection".into(), ErrorStats::over(&t, &err, 0.0, first));
        m.insert("theta_err_all".into(), ErrorStats::over(&t, &err, 0.0, end));
        m.insert("omega_err_all".into(), ErrorStats::over(&t, &werr, 0.0, end));
        for (i, w) in windows.iter().enumerate() {
            m.insert(format!("theta_err_injection_{i}"), ErrorStats::over(&t, &err, w.0, w.1));
        }
        s.errors.insert(n.clone(), m);

        let before = all_in(&t, &err, 0.0, first - 1e-9, |v| v.abs() > 0.2);
        s.checks.insert(format!("{n}_theta_err_held_before_injection"), before);
        if let Some(w) = windows.first() {
            let settled = settle_time(&t, &err, w.0, w.1, 0.05).is_some_and(|ts| ts <= w.0 + 0.5);
            s.checks.insert(format!("{n}_theta_converges_in_first_window"), settled);
        }
    }

    let o_rms = col(trace, "omega_o_rms");
    let slack = c.monitor_window + 1e-9;
    let departs_outside = t.iter().zip(&o_rms).any(|(tt, v)| *v >= c.threshold && !inside(*tt, slack));
    let departs_inside = windows.iter().all(|w| all_in(&t, &o_rms, w.0 + slack, w.1, |v| v >= c.threshold));
    s.checks.insert("omega_o_moves_only_in_injection_windows".into(), !departs_outside && departs_inside);

    let viol = col(trace, "violated");
    s.checks
        .insert("standstill_flagged_before_injection".into(), all_in(&t, &viol, c.settle, first - 1e-9, |v| v != 0.0));
    let cleared = windows.iter().all(|w| all_in(&t, &viol, w.0 + slack, w.1, |v| v == 0.0));
    s.checks.insert("flag_cleared_in_injection_windows".into(), cleared);

    let mut tracking = true;
    for (meas, reference) in [("i_d", "i_d_ref"), ("i_q", "i_q_ref"), ("i_f", "i_f_ref")] {
        let (m, r) = (col(trace, meas), col(trace, reference));
        tracking &= (0..t.len())
            .filter(|&k| t[k] >= c.settle && !inside(t[k], 0.05))
            .all(|k| (m[k] - r[k]).abs() <= 0.02 * r[k].abs());
    }
    s.checks.insert("currents_track_setpoints".into(), tracking);
    s
}

fn summarize_im(trace: &SimTrace, c: &ImChecks) -> RunSummary {
    let mut s = base(trace, "im", &["det_with_speed", "det_sensorless"]);
    let t = col(trace, "t");
    let end = t.last().copied().unwrap_or(0.0);
    for n in ekf_names(trace, "_flux_err") {
        let err = col(trace, &format!("{n}_flux_err"));
        let werr = col(trace, &format!("{n}_omega_err"));
        let mut m = BTreeMap::new();
        m.insert("flux_err_steady".into(), ErrorStats::over(&t, &err, c.settle, end));
        m.insert("omega_err_steady".into(), ErrorStats::over(&t, &werr, c.settle, end));
        if let Some((d0, d1)) = c.dwell {
            m.insert("flux_err_before_dwell".into(), ErrorStats::over(&t, &err, c.settle, d0));
            m.insert("flux_err_dwell".into(), ErrorStats::over(&t, &err, d0, d1));
            m.insert("flux_err_after_dwell".into(), ErrorStats::over(&t, &err, d1 + 1.0, end));
        }
        s.errors.insert(n, m);
    }
    if let Some(n) = &c.with_speed {
        let ws = col(trace, &format!("{n}_flux_err"));
        s.checks.insert("with_speed_flux_err_below_5pct".into(), all_in(&t, &ws, c.settle, end, |v| v < 0.05));
    }
    let Some((d0, d1)) = c.dwell else { return s };
    if let Some(n) = &c.sensorless {
        let sl = col(trace, &format!("{n}_flux_err"));
        let dwell_max = ErrorStats::over(&t, &sl, d0, d1).max;
        s.checks.insert("sensorless_flux_err_above_20pct_in_dwell".into(), dwell_max > 0.2);
        s.checks.insert("sensorless_flux_err_recovers_within_1s".into(), all_in(&t, &sl, d1 + 1.0, end, |v| v < 0.05));
    }
    let cond = col(trace, "im_condition");
    s.checks.insert("im_condition_small_in_dwell".into(), all_in(&t, &cond, d0, d1, |v| v.abs() < c.threshold));
    let covered = s.violated_intervals.iter().any(|iv| iv.0 <= d0 && iv.1 >= d1);
    s.checks.insert("violated_interval_contains_dwell".into(), covered);
    let (lo, hi) = (d0 - c.margin, d1 + c.margin);
    let only = s.violated_intervals.iter().filter(|iv| iv.1 > c.settle).all(|iv| iv.0 >= lo && iv.1 <= hi);
    s.checks.insert("violated_only_around_dwell".into(), only);
    s
}
