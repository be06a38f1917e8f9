//! Induction-machine observability: with and without speed measurement, the
//! stator-frequency condition and the unobservability line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::{ImParams, ImState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImMode {
    WithSpeed,
    Sensorless,
}

/// Rates of the scaled flux and of the speed, as returned by the scaled dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImRates {
    pub dpsi_ra: f64,
    pub dpsi_rb: f64,
    pub domega_e: f64,
}

impl ImRates {
    pub fn from_derivative(dx: &[f64]) -> Self {
        Self { dpsi_ra: dx[2], dpsi_rb: dx[3], domega_e: dx[4] }
    }
}

/// Closed-form determinant. The sensorless value is evaluated with physical
/// (unscaled) fluxes and equals the determinant of the observability matrix
/// built on the scaled state.
pub fn im_determinant(mode: ImMode, state: &ImState, rates: &ImRates, params: &ImParams) -> f64 {
    let p_j = params.pole_pairs() / params.j;
    let tau = params.tau_r();
    let w = state.omega_e;
    match mode {
        ImMode::WithSpeed => -p_j * (w * w + 1.0 / (tau * tau)),
        ImMode::Sensorless => {
            let kr = params.k_r();
            let [pa, pb] = state.fluxes(params);
            let (dpa, dpb) = (rates.dpsi_ra / kr, rates.dpsi_rb / kr);
            p_j * kr * kr / (tau * tau)
                * (tau * rates.domega_e * (pa * pa + pb * pb) - (1.0 + tau * tau * w * w) * (dpa * pb - dpb * pa))
        }
    }
}

/// Coordinates in which a numeric oracle for the sensorless determinant is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImCoordinates {
    Scaled,
    Unscaled,
}

/// Factor `oracle / closed_form` for the sensorless determinant.
///
/// On the scaled state the two coincide. In physical variables the state is
/// `diag(1/L_sigma, 1/L_sigma, 1/k_r, 1/k_r, 1, 1)` times the scaled one and each
/// of the six output rows is divided by `L_sigma`, giving `k_r^2 / L_sigma^4`.
pub fn sensorless_scale_factor(params: &ImParams, coords: ImCoordinates) -> f64 {
    match coords {
        ImCoordinates::Scaled => 1.0,
        ImCoordinates::Unscaled => params.k_r().powi(2) / params.l_sigma().powi(4),
    }
}

/// Angular velocity of the rotor flux vector.
pub fn flux_angular_velocity(state: &ImState, rates: &ImRates) -> Result<f64> {
    let n2 = state.psi_ra.powi(2) + state.psi_rb.powi(2);
    if n2 == 0.0 {
        return Err(Error::NotAvailable("rotor flux is zero; its angle is undefined"));
    }
    Ok((state.psi_ra * rates.dpsi_rb - state.psi_rb * rates.dpsi_ra) / n2)
}

/// `tau_r domega_e/dt / (1 + tau_r^2 omega_e^2) + omega_s`.
pub fn im_condition(omega_e: f64, domega_e: f64, omega_s: f64, params: &ImParams) -> f64 {
    let tau = params.tau_r();
    tau * domega_e / (1.0 + tau * tau * omega_e * omega_e) + omega_s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnobservabilityLineQuery {
    pub omega_e: f64,
    /// Motor torque.
    pub t_m: f64,
    /// Rotor flux magnitude in the field-oriented frame.
    pub psi_rd: f64,
}

impl UnobservabilityLineQuery {
    /// `K = p psi_rd^2 / R_r`, the inverse slope of the line in the (omega_e, T_m) plane.
    pub fn k(&self, params: &ImParams) -> f64 {
        params.pole_pairs() * self.psi_rd * self.psi_rd / params.r_r
    }
}

/// Point on the line `omega_e = -(R_r/p) T_m / psi_rd^2` for the query torque,
/// and the signed speed distance of the query to it.
pub fn unobservability_line(query: &UnobservabilityLineQuery, params: &ImParams) -> Result<(f64, f64)> {
    if !(query.psi_rd > 0.0) {
        return Err(Error::DegenerateFlux(query.psi_rd));
    }
    let on_line = -params.r_r / params.pole_pairs() * query.t_m / (query.psi_rd * query.psi_rd);
    Ok((on_line, query.omega_e - on_line))
}

/// Scaled state and stator voltage of an operating point whose rotor flux has
/// magnitude `psi_rd` (aligned with the alpha axis) and rotates at the stator
/// frequency that produces torque `t_m` at speed `omega_e`.
///
/// The resistant torque is set to `t_m - (J/p) domega_e`, so the dynamics
/// reproduce the requested acceleration at this instant.
pub fn field_oriented_point(
    params: &ImParams,
    omega_e: f64,
    t_m: f64,
    psi_rd: f64,
    domega_e: f64,
) -> Result<(ImState, [f64; 2])> {
    if !(psi_rd > 0.0) {
        return Err(Error::DegenerateFlux(psi_rd));
    }
    let p = params.pole_pairs();
    let omega_r = params.r_r / p * t_m / (psi_rd * psi_rd);
    let omega_s = omega_e + omega_r;
    let tau = params.tau_r();
    // Rotor flux equation with d Psi/dt = omega_s J2 Psi and Psi = [psi_rd, 0].
    let i_a = psi_rd / params.m;
    let i_b = tau * omega_r * psi_rd / params.m;
    let ls = params.l_sigma();
    let kr = params.k_r();
    let (ia, ib) = (ls * i_a, ls * i_b);
    let (pa, pb) = (kr * psi_rd, 0.0);
    // Stator equation with d I/dt = omega_s J2 I.
    let (a, inv_tr) = (params.a(), 1.0 / tau);
    let (dia, dib) = (-omega_s * ib, omega_s * ia);
    let gpa = inv_tr * pa + omega_e * pb;
    let gpb = -omega_e * pa + inv_tr * pb;
    let v = [dia - a * ia - gpa, dib - a * ib - gpb];
    let t_r = t_m - params.j / p * domega_e;
    Ok((ImState { i_sa: ia, i_sb: ib, psi_ra: pa, psi_rb: pb, omega_e, t_r }, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn with_speed_at_standstill() {
        let p = ImParams::default();
        let s = ImState { i_sa: 0.0, i_sb: 0.0, psi_ra: 0.0, psi_rb: 0.0, omega_e: 0.0, t_r: 0.0 };
        let d = im_determinant(ImMode::WithSpeed, &s, &ImRates::default(), &p);
        let tau = 1.033e-4 / 1.5e-3;
        assert_relative_eq!(d, -(4.0 / 0.01) / (tau * tau), max_relative = 1e-12);
        assert!((d - (-8.43e4)).abs() < 0.01 * 8.43e4);
    }

    #[test]
    fn sensorless_constant_flux_is_zero() {
        let p = ImParams::default();
        let s = ImState { i_sa: 1e-3, i_sb: 2e-3, psi_ra: 0.04, psi_rb: -0.01, omega_e: 30.0, t_r: 1.0 };
        assert_eq!(im_determinant(ImMode::Sensorless, &s, &ImRates::default(), &p), 0.0);
    }

    #[test]
    fn condition_values() {
        let p = ImParams::default();
        assert_relative_eq!(im_condition(10.0, 0.0, 2.0 * PI * 50.0, &p), 314.159_265_358_979_3, max_relative = 1e-12);
        assert_eq!(im_condition(10.0, 0.0, 0.0, &p), 0.0);
    }

    #[test]
    fn line_examples() {
        let p = ImParams::default();
        let q = |t_m| UnobservabilityLineQuery { omega_e: 0.0, t_m, psi_rd: 0.05 };
        assert_eq!(unobservability_line(&q(0.0), &p).unwrap().0, 0.0);
        assert!(unobservability_line(&q(3.0), &p).unwrap().0 < 0.0);
        assert_relative_eq!(unobservability_line(&q(10.0), &p).unwrap().0, -1.5, max_relative = 1e-12);
        let bad = UnobservabilityLineQuery { omega_e: 0.0, t_m: 1.0, psi_rd: 0.0 };
        assert!(matches!(unobservability_line(&bad, &p), Err(Error::DegenerateFlux(_))));
    }

    #[test]
    fn field_oriented_point_is_consistent() {
        let p = ImParams::default();
        let (s, v) = field_oriented_point(&p, 40.0, 8.0, 0.05, 0.0).unwrap();
        let dx = p.scaled_derivative(&s.to_array(), v);
        assert!(dx[4].abs() < 1e-9 * 400.0 * 8.0, "speed rate {}", dx[4]);
        assert_relative_eq!(p.torque_scaled(&s.to_array()), 8.0, max_relative = 1e-12);
        let omega_s = flux_angular_velocity(&s, &ImRates::from_derivative(&dx)).unwrap();
        let omega_r = p.r_r / 4.0 * 8.0 / 0.0025;
        assert_relative_eq!(omega_s, 40.0 + omega_r, max_relative = 1e-9);
        // On the line the condition vanishes.
        let (s, v) = field_oriented_point(&p, -1.5, 10.0, 0.05, 0.0).unwrap();
        let dx = p.scaled_derivative(&s.to_array(), v);
        let omega_s = flux_angular_velocity(&s, &ImRates::from_derivative(&dx)).unwrap();
        assert!(im_condition(s.omega_e, dx[4], omega_s, &p).abs() < 1e-6);
    }
}
