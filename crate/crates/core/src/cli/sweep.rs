//! Determinant and margin maps over operating-point grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::{ImParams, Machine};
use crate::observability::{
    field_oriented_point, flux_angular_velocity, im_condition, im_determinant, sm_condition_margin, sm_determinant,
    sm_observability_vector_at, sync_params, unobservability_line, DqOperatingPoint, ImMode, ImRates,
    UnobservabilityLineQuery,
};
use crate::sim::SimTrace;

/// Evenly spaced values from `min` to `max`. A single point needs `min == max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let bad = |why: &str| Err(Error::Config(format!("axis {name}: {why}")));
        if !(self.min.is_finite() && self.max.is_finite()) {
            return bad("bounds must be finite");
        }
        match self.n {
            0 => bad("needs at least one point"),
            1 if self.min == self.max => Ok(vec![self.min]),
            1 => bad("a single point needs min == max"),
            n if self.max > self.min => {
                let h = (self.max - self.min) / (n - 1) as f64;
                Ok((0..n).map(|k| if k + 1 == n { self.max } else { self.min + k as f64 * h }).collect())
            }
            _ => bad("max must exceed min"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Induction machine at field-oriented points.
    SpeedTorque {
        omega_e: Axis,
        t_m: Axis,
        psi_rd: f64,
        #[serde(default)]
        domega_e: f64,
    },
    /// Synchronous machine at constant currents.
    Currents {
        i_sd: Axis,
        i_sq: Axis,
        omega: f64,
        #[serde(default)]
        i_f: f64,
    },
}

/// Line `omega_e = slope T_m` fitted through the zero set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    /// `-(R_r/p) / psi_rd^2`.
    pub expected_slope: f64,
    pub relative_error: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub machine: String,
    pub cells: usize,
    /// `(omega_e, T_m)` roots of the sensorless determinant, one per sign change along speed.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub zero_set: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<LineFit>,
}

pub const IM_SWEEP_COLUMNS: [&str; 7] =
    ["omega_e", "t_m", "determinant", "with_speed_determinant", "margin", "line_distance", "guaranteed"];
pub const SM_SWEEP_COLUMNS: [&str; 5] = ["i_sd", "i_sq", "determinant", "margin", "guaranteed"];

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// `[det_sensorless, det_with_speed, condition, line distance]` at one point.
fn im_cell(p: &ImParams, omega_e: f64, t_m: f64, psi_rd: f64, domega_e: f64) -> Result<[f64; 4]> {
    let (state, v) = field_oriented_point(p, omega_e, t_m, psi_rd, domega_e)?;
    let dx = p.scaled_derivative(&state.to_array(), v);
    let rates = ImRates::from_derivative(&dx);
    let omega_s = flux_angular_velocity(&state, &rates)?;
    let (_, distance) = unobservability_line(&UnobservabilityLineQuery { omega_e, t_m, psi_rd }, p)?;
    Ok([
        im_determinant(ImMode::Sensorless, &state, &rates, p),
        im_determinant(ImMode::WithSpeed, &state, &rates, p),
        im_condition(omega_e, rates.domega_e, omega_s, p),
        distance,
    ])
}

/// Root of `f` on `[a, b]` given opposite signs at the ends.
fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Least-squares slope of a line through the origin, `omega_e = s T_m`.
pub fn fit_through_origin(points: &[(f64, f64)]) -> Option<f64> {
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), (w, t)| (n + w * t, d + t * t));
    (den > 0.0).then(|| num / den)
}

pub fn run_sweep(machine: &Machine, spec: &SweepSpec, threshold: f64) -> Result<(SimTrace, SweepSummary)> {
    match (machine, spec) {
        (Machine::Im(p), SweepSpec::SpeedTorque { omega_e, t_m, psi_rd, domega_e }) => {
            let (ws, ts) = (omega_e.values("omega_e")?, t_m.values("t_m")?);
            if !(*psi_rd > 0.0) || !domega_e.is_finite() {
                return Err(Error::Config("sweep needs psi_rd > 0 and a finite domega_e".into()));
            }
            let grid: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ws.iter().map(move |&w| (w, t))).collect();
            let cells: Vec<[f64; 4]> =
                grid.par_iter().map(|&(w, t)| im_cell(p, w, t, *psi_rd, *domega_e)).collect::<Result<_>>()?;
            let mut trace = SimTrace::new(IM_SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect());
            for ((w, t), c) in grid.iter().zip(&cells) {
                trace.push(vec![*w, *t, c[0], c[1], c[2], c[3], flag(c[2].abs() >= threshold)]);
            }
            let det = |w: f64, t: f64| im_cell(p, w, t, *psi_rd, *domega_e).map(|c| c[0]);
            let mut zero_set = Vec::new();
            for (row, &t) in ts.iter().enumerate() {
                let d = &cells[row * ws.len()..(row + 1) * ws.len()];
                for k in 0..ws.len() {
                    if d[k][0] == 0.0 {
                        zero_set.push((ws[k], t));
                    } else if k + 1 < ws.len() && d[k + 1][0] != 0.0 && (d[k][0] > 0.0) != (d[k + 1][0] > 0.0) {
                        zero_set.push((bisect(|w| det(w, t), ws[k], ws[k + 1])?, t));
                    }
                }
            }
            let expected_slope = -(p.r_r / p.pole_pairs()) / (psi_rd * psi_rd);
            let fit = fit_through_origin(&zero_set).map(|slope| LineFit {
                slope,
                expected_slope,
                relative_error: ((slope - expected_slope) / expected_slope).abs(),
                points: zero_set.len(),
            });
            let summary = SweepSummary { machine: "im".into(), cells: grid.len(), zero_set, fit };
            Ok((trace, summary))
        }
        (Machine::Wrsm(_) | Machine::Brushless(_), SweepSpec::Currents { i_sd, i_sq, omega, i_f }) => {
            let params = sync_params(machine)?;
            let (ds, qs) = (i_sd.values("i_sd")?, i_sq.values("i_sq")?);
            if !(omega.is_finite() && i_f.is_finite()) {
                return Err(Error::Config("sweep needs finite omega and i_f".into()));
            }
            let grid: Vec<(f64, f64)> = qs.iter().flat_map(|&q| ds.iter().map(move |&d| (d, q))).collect();
            let rows: Vec<Vec<f64>> = grid
                .par_iter()
                .map(|&(d, q)| {
                    let pt = DqOperatingPoint { i_sd: d, i_sq: q, i_f: *i_f, omega: *omega, ..Default::default() };
                    let margin = sm_condition_margin(*omega, sm_observability_vector_at(&params, &pt).omega_o)
                        .unwrap_or(f64::NAN);
                    vec![d, q, sm_determinant(&params, &pt), margin, flag(margin.abs() >= threshold)]
                })
                .collect();
            let mut trace = SimTrace::new(SM_SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect());
            for r in rows {
                trace.push(r);
            }
            let summary =
                SweepSummary { machine: machine.name().into(), cells: grid.len(), zero_set: Vec::new(), fit: None };
            Ok((trace, summary))
        }
        (m, _) => Err(Error::Config(format!("this sweep grid does not apply to {}", m.name()))),
    }
}
