//! Point-wise observability reports combining the closed forms and the oracle.

use nalgebra::DVector;
use serde::Serialize;

use super::dc::dcm_determinant;
use super::induction::{
    field_oriented_point, flux_angular_velocity, im_condition, im_determinant, sensorless_scale_factor, ImCoordinates,
    ImMode, ImRates,
};
use super::oracle::{numeric_observability_matrix, RowSpec};
use super::sync::{
    sm_condition_margin, sm_determinant, sm_observability_vector_at, stationary_point, wrsm_ratio, DqOperatingPoint,
    ObservabilityVector, SyncParams,
};
use crate::error::{Error, Result};
use crate::machines::{DcmParams, DriveModel, ImParams, Machine};

/// Default band below which a speed-like margin is treated as zero (rad/s).
pub const DEFAULT_THRESHOLD: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub machine: String,
    pub determinant: f64,
    pub oracle_determinant: f64,
    /// `oracle / closed form` convention factor (1 unless stated).
    pub scale_factor: f64,
    /// Synchronous machines: `omega - omega_O`. Induction machine: the
    /// stator-frequency condition. Absent for DC machines.
    pub margin: Option<f64>,
    pub rank: usize,
    pub dimension: usize,
    pub condition_number: f64,
    pub smallest_singular_value: f64,
    /// Observability is guaranteed at the threshold. `false` means "not
    /// guaranteed": the rank test is only sufficient.
    pub guaranteed: bool,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observability_vector: Option<ObservabilityVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_speed_determinant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_distance: Option<f64>,
}

/// Report for a synchronous machine at a rotor-frame operating point. The
/// stationary state is placed at rotor angle `theta`.
pub fn sm_report(
    params: &SyncParams,
    pt: &DqOperatingPoint,
    theta: f64,
    threshold: f64,
) -> Result<ObservabilityReport> {
    let (x, v) = stationary_point(params, pt, theta)?;
    let machine = match params {
        SyncParams::Wrsm(p) => Machine::Wrsm(*p),
        SyncParams::Brushless(p) => Machine::Brushless(*p),
    };
    let model = DriveModel::new(machine);
    let n_currents = if params.has_field() { 3 } else { 2 };
    let oracle = numeric_observability_matrix(
        &model,
        &DVector::from_vec(x),
        &DVector::from_vec(v),
        None,
        &RowSpec::synchronous(n_currents),
    )?;
    let vector = sm_observability_vector_at(params, pt);
    let margin = sm_condition_margin(pt.omega, vector.omega_o).ok();
    let guaranteed = margin.is_some_and(|m| m.abs() >= threshold);
    Ok(ObservabilityReport {
        machine: machine.name().to_string(),
        determinant: sm_determinant(params, pt),
        oracle_determinant: oracle.determinant()?,
        scale_factor: 1.0,
        margin,
        rank: oracle.rank,
        dimension: oracle.matrix.ncols(),
        condition_number: oracle.condition_number,
        smallest_singular_value: oracle.smallest_singular_value(),
        guaranteed,
        threshold,
        observability_vector: Some(vector),
        ratio: wrsm_ratio(params, pt.i_sd, pt.i_sq, pt.i_f).ok(),
        with_speed_determinant: None,
        line_distance: None,
    })
}

/// Sensorless report for an induction machine at a field-oriented operating
/// point `(omega_e, T_m, psi_rd, domega_e/dt)`.
pub fn im_report(
    params: &ImParams,
    omega_e: f64,
    t_m: f64,
    psi_rd: f64,
    domega_e: f64,
    threshold: f64,
) -> Result<ObservabilityReport> {
    let (state, v) = field_oriented_point(params, omega_e, t_m, psi_rd, domega_e)?;
    let x = state.to_array();
    let dx = params.scaled_derivative(&x, v);
    let rates = ImRates::from_derivative(&dx);
    let model = DriveModel::new(Machine::Im(*params));
    let oracle = numeric_observability_matrix(
        &model,
        &DVector::from_row_slice(&x),
        &DVector::from_row_slice(&v),
        None,
        &RowSpec::orders(&[0, 1], 2),
    )?;
    let omega_s = flux_angular_velocity(&state, &rates)?;
    let margin = im_condition(omega_e, rates.domega_e, omega_s, params);
    let (_, distance) = super::induction::unobservability_line(
        &super::induction::UnobservabilityLineQuery { omega_e, t_m, psi_rd },
        params,
    )?;
    Ok(ObservabilityReport {
        machine: "im".into(),
        determinant: im_determinant(ImMode::Sensorless, &state, &rates, params),
        oracle_determinant: oracle.determinant()?,
        scale_factor: sensorless_scale_factor(params, ImCoordinates::Scaled),
        margin: Some(margin),
        rank: oracle.rank,
        dimension: oracle.matrix.ncols(),
        condition_number: oracle.condition_number,
        smallest_singular_value: oracle.smallest_singular_value(),
        guaranteed: margin.abs() >= threshold,
        threshold,
        observability_vector: None,
        ratio: None,
        with_speed_determinant: Some(im_determinant(ImMode::WithSpeed, &state, &rates, params)),
        line_distance: Some(distance),
    })
}

/// DC-machine report at `[i_a, Omega, T_l]` with armature voltage `v`.
pub fn dcm_report(params: &DcmParams, x: [f64; 3], v: f64) -> Result<ObservabilityReport> {
    let model = DriveModel::new(Machine::Dcm(*params));
    let oracle = numeric_observability_matrix(
        &model,
        &DVector::from_row_slice(&x),
        &DVector::from_vec(vec![v]),
        None,
        &RowSpec::orders(&[0], 2),
    )?;
    let determinant = dcm_determinant(params, x[0]);
    let scale = oracle.singular_values.iter().copied().fold(0.0, f64::max).powi(3);
    Ok(ObservabilityReport {
        machine: Machine::Dcm(*params).name().into(),
        determinant,
        oracle_determinant: oracle.determinant()?,
        scale_factor: 1.0,
        margin: None,
        rank: oracle.rank,
        dimension: 3,
        condition_number: oracle.condition_number,
        smallest_singular_value: oracle.smallest_singular_value(),
        guaranteed: determinant.abs() > 1e-12 * scale,
        threshold: 0.0,
        observability_vector: None,
        ratio: None,
        with_speed_determinant: None,
        line_distance: None,
    })
}

/// Dispatches on the machine type for callers holding a [`Machine`].
pub fn sync_params(machine: &Machine) -> Result<SyncParams> {
    SyncParams::from_machine(machine)
        .ok_or_else(|| Error::InvalidParams(format!("{} is not a synchronous machine", machine.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{BrushlessKind, BrushlessSmParams, WrsmParams};

    #[test]
    fn spmsm_standstill_not_guaranteed() {
        let p = SyncParams::Brushless(BrushlessSmParams::example(BrushlessKind::Spmsm));
        let pt = DqOperatingPoint { i_sd: 1.0, i_sq: 10.0, omega: 0.0, ..Default::default() };
        let r = sm_report(&p, &pt, 0.3, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.determinant, 0.0);
        assert!(!r.guaranteed);
        assert!(r.rank < 4);
    }

    #[test]
    fn wrsm_standstill_rank_deficient() {
        let p = SyncParams::Wrsm(WrsmParams::default());
        let pt = DqOperatingPoint { i_sd: 2.0, i_sq: 15.0, i_f: 4.0, omega: 0.0, ..Default::default() };
        let r = sm_report(&p, &pt, 1.1, DEFAULT_THRESHOLD).unwrap();
        assert!(r.rank < 5, "rank {}", r.rank);
        assert!(!r.guaranteed);
    }

    #[test]
    fn im_on_line_not_guaranteed() {
        let p = ImParams::default();
        let r = im_report(&p, -1.5, 10.0, 0.05, 0.0, DEFAULT_THRESHOLD).unwrap();
        assert!(r.margin.unwrap().abs() < 1e-6);
        assert!(!r.guaranteed);
        let r = im_report(&p, 60.0, 10.0, 0.05, 0.0, DEFAULT_THRESHOLD).unwrap();
        assert!(r.guaranteed);
        assert!((r.determinant - r.oracle_determinant).abs() <= 1e-4 * r.determinant.abs());
    }
}
