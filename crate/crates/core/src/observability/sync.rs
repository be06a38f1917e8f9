//! Closed-form observability conditions of synchronous machines.
//!
//! The rank test uses the three measured currents (two for magnet and
//! reluctance machines) and the first derivatives of the two stator currents.
//! Its determinant reduces to a quadratic form in the rotor-frame currents and
//! their time derivatives, which is what this module evaluates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::{to_dq, BrushlessKind, BrushlessSmParams, Machine, WrsmParams};

/// Synchronous-machine parameter sets accepted by the closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyncParams {
    Wrsm(WrsmParams),
    Brushless(BrushlessSmParams),
}

impl SyncParams {
    pub fn from_machine(machine: &Machine) -> Option<Self> {
        match machine {
            Machine::Wrsm(p) => Some(SyncParams::Wrsm(*p)),
            Machine::Brushless(p) => Some(SyncParams::Brushless(*p)),
            _ => None,
        }
    }

    pub fn has_field(&self) -> bool {
        match self {
            SyncParams::Wrsm(_) => true,
            SyncParams::Brushless(p) => p.has_field(),
        }
    }

    fn constants(&self) -> SmConstants {
        match self {
            SyncParams::Wrsm(p) => SmConstants { l_d: p.l_d(), l_q: p.l_q(), m_f: p.m_f, l_f: p.l_f, psi_r: 0.0 },
            SyncParams::Brushless(p) => {
                let (m_f, l_f) = p.field.map_or((0.0, f64::INFINITY), |f| (f.m_f, f.l_f));
                SmConstants { l_d: p.l_d, l_q: p.l_q, m_f, l_f, psi_r: p.psi_r }
            }
        }
    }
}

struct SmConstants {
    l_d: f64,
    l_q: f64,
    m_f: f64,
    l_f: f64,
    psi_r: f64,
}

impl SmConstants {
    fn l_delta(&self) -> f64 {
        self.l_d - self.l_q
    }
    fn sigma_d(&self) -> f64 {
        1.0 - self.m_f * self.m_f / (self.l_d * self.l_f)
    }
    /// `sigma_delta * L_delta`, finite even when `L_delta = 0`.
    fn sigma_l_delta(&self) -> f64 {
        self.l_delta() - self.m_f * self.m_f / self.l_f
    }
}

/// Rotor-frame operating point: currents, their time derivatives and the rotor speed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DqOperatingPoint {
    pub i_sd: f64,
    pub i_sq: f64,
    #[serde(default)]
    pub i_f: f64,
    #[serde(default)]
    pub di_sd: f64,
    #[serde(default)]
    pub di_sq: f64,
    #[serde(default)]
    pub di_f: f64,
    pub omega: f64,
}

impl DqOperatingPoint {
    /// Builds the rotor-frame point from a stationary-frame state
    /// `[i_sa, i_sb, (i_f), omega, theta]` and its time derivative. The
    /// derivatives include the frame-rotation terms `+omega i_sq` and `-omega i_sd`.
    pub fn from_stationary(x: &[f64], dx: &[f64]) -> Result<Self> {
        let (n, has_field) = match x.len() {
            4 => (2, false),
            5 => (3, true),
            k => return Err(Error::DimensionMismatch(format!("synchronous state has 4 or 5 entries, got {k}"))),
        };
        if dx.len() != x.len() {
            return Err(Error::DimensionMismatch("state derivative length".into()));
        }
        let omega = x[n];
        let theta = x[n + 1];
        let [i_sd, i_sq] = to_dq([x[0], x[1]], theta);
        let [pd, pq] = to_dq([dx[0], dx[1]], theta);
        Ok(Self {
            i_sd,
            i_sq,
            i_f: if has_field { x[2] } else { 0.0 },
            di_sd: pd + omega * i_sq,
            di_sq: pq - omega * i_sd,
            di_f: if has_field { dx[2] } else { 0.0 },
            omega,
        })
    }
}

/// Observability vector in rotor coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityVector {
    pub psi_od: f64,
    pub psi_oq: f64,
    /// `atan2(psi_oq, psi_od)`; `None` for the zero vector.
    pub theta_o: Option<f64>,
    /// Angular velocity of the vector, when known.
    pub omega_o: Option<f64>,
}

fn vector_components(params: &SyncParams, i_sd: f64, i_sq: f64, i_f: f64) -> (f64, f64) {
    match params {
        SyncParams::Wrsm(p) => (p.l_delta() * i_sd + p.m_f * i_f, p.sigma_delta() * p.l_delta() * i_sq),
        SyncParams::Brushless(p) => match p.kind {
            BrushlessKind::Ipmsm => (p.l_delta() * i_sd + p.psi_r, p.l_delta() * i_sq),
            BrushlessKind::Spmsm => (p.psi_r, 0.0),
            BrushlessKind::Syrm => (p.l_delta() * i_sd, p.l_delta() * i_sq),
            BrushlessKind::Hesm => {
                let c = params.constants();
                (c.l_delta() * i_sd + c.m_f * i_f + c.psi_r, c.sigma_l_delta() * i_sq)
            }
        },
    }
}

/// Observability vector for the given rotor-frame currents. The field current is
/// ignored by machines without a field winding.
pub fn sm_observability_vector(params: &SyncParams, i_sd: f64, i_sq: f64, i_f: f64) -> ObservabilityVector {
    let (psi_od, psi_oq) = vector_components(params, i_sd, i_sq, i_f);
    let theta_o = if psi_od == 0.0 && psi_oq == 0.0 { None } else { Some(psi_oq.atan2(psi_od)) };
    ObservabilityVector { psi_od, psi_oq, theta_o, omega_o: None }
}

/// Observability vector with its angular velocity evaluated from the current derivatives.
pub fn sm_observability_vector_at(params: &SyncParams, point: &DqOperatingPoint) -> ObservabilityVector {
    let mut v = sm_observability_vector(params, point.i_sd, point.i_sq, point.i_f);
    if v.theta_o.is_some() {
        // The vector is linear in the currents up to a constant offset, so its
        // rate is the vector of the current rates without the offset.
        let (d0, q0) = vector_components(params, 0.0, 0.0, 0.0);
        let (d1, q1) = vector_components(params, point.di_sd, point.di_sq, point.di_f);
        let (dd, dq) = (d1 - d0, q1 - q0);
        let n2 = v.psi_od * v.psi_od + v.psi_oq * v.psi_oq;
        v.omega_o = Some((v.psi_od * dq - v.psi_oq * dd) / n2);
    }
    v
}

/// Closed-form determinant of the synchronous-machine observability matrix.
pub fn sm_determinant(params: &SyncParams, pt: &DqOperatingPoint) -> f64 {
    let DqOperatingPoint { i_sd, i_sq, i_f, di_sd, di_sq, di_f, omega } = *pt;
    match params {
        SyncParams::Wrsm(p) => {
            let (l_d, l_q, l_delta) = (p.l_d(), p.l_q(), p.l_delta());
            let (s_d, s_delta) = (p.sigma_d(), p.sigma_delta());
            let psi_od = l_delta * i_sd + p.m_f * i_f;
            let d = (psi_od.powi(2) + s_delta * l_delta.powi(2) * i_sq.powi(2)) / (s_d * l_d * l_q);
            let n = s_delta / s_d * l_delta / (l_d * l_q) * ((l_delta * di_sd + p.m_f * di_f) * i_sq - psi_od * di_sq);
            d * omega + n
        }
        SyncParams::Brushless(p) => {
            let (l_d, l_q, l_delta) = (p.l_d, p.l_q, p.l_delta());
            match p.kind {
                BrushlessKind::Ipmsm => {
                    let psi_od = l_delta * i_sd + p.psi_r;
                    (psi_od.powi(2) + l_delta.powi(2) * i_sq.powi(2)) / (l_d * l_q) * omega
                        + l_delta / (l_d * l_q) * (l_delta * i_sq * di_sd - psi_od * di_sq)
                }
                BrushlessKind::Spmsm => p.psi_r.powi(2) / p.l0().powi(2) * omega,
                BrushlessKind::Syrm => {
                    l_delta.powi(2) / (l_d * l_q)
                        * ((i_sd.powi(2) + i_sq.powi(2)) * omega + di_sd * i_sq - i_sd * di_sq)
                }
                BrushlessKind::Hesm => {
                    // Wound-rotor form with the magnet flux added to the d-axis vector.
                    let c = params.constants();
                    let (s_d, sl) = (c.sigma_d(), c.sigma_l_delta());
                    let psi_od = l_delta * i_sd + c.m_f * i_f + c.psi_r;
                    let d = (psi_od.powi(2) + sl * l_delta * i_sq.powi(2)) / (s_d * l_d * l_q);
                    let n = sl / (s_d * l_d * l_q) * ((l_delta * di_sd + c.m_f * di_f) * i_sq - psi_od * di_sq);
                    d * omega + n
                }
            }
        }
    }
}

/// `omega - omega_O`.
pub fn sm_condition_margin(omega: f64, omega_o: Option<f64>) -> Result<f64> {
    omega_o.map(|w| omega - w).ok_or(Error::NotAvailable("observability vector is zero; its angle is undefined"))
}

/// Ratio between the exact and the approximated speed condition for the
/// wound-rotor machine. Identically one when `sigma_delta = 1`.
pub fn wrsm_ratio(params: &SyncParams, i_sd: f64, i_sq: f64, i_f: f64) -> Result<f64> {
    let c = params.constants();
    let (psi_od, _) = vector_components(params, i_sd, i_sq, i_f);
    if psi_od == 0.0 && i_sq == 0.0 {
        return Err(Error::NotAvailable("ratio undefined for zero d-axis vector and zero i_sq"));
    }
    let sl = c.sigma_l_delta();
    let num = psi_od.powi(2) + sl.powi(2) * i_sq.powi(2);
    let den = psi_od.powi(2) + sl * c.l_delta() * i_sq.powi(2);
    Ok(num / den)
}

/// `omega - ratio * omega_O`, which vanishes exactly where the determinant does.
pub fn sm_corrected_margin(params: &SyncParams, pt: &DqOperatingPoint) -> Result<f64> {
    let v = sm_observability_vector_at(params, pt);
    let omega_o = v.omega_o.ok_or(Error::NotAvailable("observability vector is zero; its angle is undefined"))?;
    let ratio = wrsm_ratio(params, pt.i_sd, pt.i_sq, pt.i_f)?;
    Ok(pt.omega - ratio * omega_o)
}

/// Stationary-frame state and voltage that realise a rotor-frame operating
/// point at rotor angle `theta`.
pub fn stationary_point(params: &SyncParams, pt: &DqOperatingPoint, theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    use crate::machines::to_ab;
    let omega = pt.omega;
    let [ia, ib] = to_ab([pt.i_sd, pt.i_sq], theta);
    // d/dt of the stationary currents from the rotor-frame rates.
    let [da0, db0] = to_ab([pt.di_sd - omega * pt.i_sq, pt.di_sq + omega * pt.i_sd], theta);
    let (mut x, mut dx) = (vec![ia, ib], vec![da0, db0]);
    if params.has_field() {
        x.push(pt.i_f);
        dx.push(pt.di_f);
    }
    x.extend([omega, theta]);
    let machine = match params {
        SyncParams::Wrsm(p) => Machine::Wrsm(*p),
        SyncParams::Brushless(p) => Machine::Brushless(*p),
    };
    // The dynamics are affine in the voltage: f(x, v) = f(x, 0) + L^-1 v.
    let n = dx.len();
    let zero = vec![0.0; machine.input_dim()];
    let f0 = machine.dynamics(&x, &zero)?;
    let mut cols = Vec::with_capacity(n);
    for k in 0..machine.input_dim() {
        let mut e = zero.clone();
        e[k] = 1.0;
        let fk = machine.dynamics(&x, &e)?;
        cols.push((0..n).map(|r| fk[r] - f0[r]).collect::<Vec<_>>());
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| cols[c][r]);
    let rhs = nalgebra::DVector::from_fn(n, |r, _| dx[r] - f0[r]);
    let v = m.lu().solve(&rhs).ok_or(Error::SingularInductance { det: 0.0, floor: crate::machines::DET_L_FLOOR })?;
    Ok((x, v.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wrsm() -> SyncParams {
        SyncParams::Wrsm(WrsmParams::default())
    }

    #[test]
    fn spmsm_vector_is_magnet_flux() {
        let p =
            SyncParams::Brushless(BrushlessSmParams { psi_r: 0.1, ..BrushlessSmParams::example(BrushlessKind::Spmsm) });
        let v = sm_observability_vector(&p, 13.0, -4.0, 0.0);
        assert_eq!((v.psi_od, v.psi_oq), (0.1, 0.0));
        assert_eq!(v.theta_o, Some(0.0));
    }

    #[test]
    fn wrsm_vector_at_setpoint() {
        let v = sm_observability_vector(&wrsm(), 2.0, 15.0, 4.0);
        assert_relative_eq!(v.psi_od, 1e-4 * 2.0 + 5.7e-3 * 4.0, max_relative = 1e-12);
        let sigma_delta = 1.0 - 5.7e-3f64.powi(2) / (1e-4 * 0.85);
        assert_relative_eq!(v.psi_oq, sigma_delta * 1e-4 * 15.0, max_relative = 1e-12);
        assert!((v.psi_oq - 9.27e-4).abs() < 1e-6);
    }

    #[test]
    fn syrm_zero_currents_have_no_angle() {
        let p = SyncParams::Brushless(BrushlessSmParams::example(BrushlessKind::Syrm));
        let v = sm_observability_vector(&p, 0.0, 0.0, 0.0);
        assert_eq!(v.theta_o, None);
        assert!(sm_condition_margin(0.0, v.omega_o).is_err());
    }

    #[test]
    fn spmsm_determinant_values() {
        let p =
            SyncParams::Brushless(BrushlessSmParams { psi_r: 0.1, ..BrushlessSmParams::example(BrushlessKind::Spmsm) });
        let pt = DqOperatingPoint { i_sd: 3.0, i_sq: 9.0, omega: 100.0, ..Default::default() };
        assert_relative_eq!(sm_determinant(&p, &pt), 1.0e6, max_relative = 1e-12);
        let still = DqOperatingPoint { omega: 0.0, ..pt };
        assert_eq!(sm_determinant(&p, &still), 0.0);
    }

    #[test]
    fn syrm_zero_currents_zero_determinant() {
        let p = SyncParams::Brushless(BrushlessSmParams::example(BrushlessKind::Syrm));
        let pt = DqOperatingPoint { omega: 250.0, ..Default::default() };
        assert_eq!(sm_determinant(&p, &pt), 0.0);
    }

    #[test]
    fn margins() {
        assert_eq!(sm_condition_margin(0.0, Some(0.0)).unwrap(), 0.0);
        assert_eq!(sm_condition_margin(100.0, Some(0.0)).unwrap(), 100.0);
    }

    #[test]
    fn ratio_special_cases() {
        let ipm = SyncParams::Brushless(BrushlessSmParams::example(BrushlessKind::Ipmsm));
        assert_eq!(wrsm_ratio(&ipm, 2.0, 15.0, 0.0).unwrap(), 1.0);
        assert_eq!(wrsm_ratio(&wrsm(), 2.0, 0.0, 4.0).unwrap(), 1.0);
        let r = wrsm_ratio(&wrsm(), 2.0, 15.0, 4.0).unwrap();
        assert!(r > 0.0 && r <= 1.0, "{r}");
        assert!(wrsm_ratio(&wrsm(), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn from_stationary_recovers_rotor_frame_rates() {
        // Currents fixed in the rotor frame while the rotor turns.
        let (omega, theta) = (80.0, 0.4);
        let [ia, ib] = crate::machines::to_ab([2.0, 15.0], theta);
        let [da, db] = crate::machines::to_ab([-omega * 15.0, omega * 2.0], theta);
        let pt = DqOperatingPoint::from_stationary(&[ia, ib, 4.0, omega, theta], &[da, db, 0.0, 0.0, omega]).unwrap();
        assert!(pt.di_sd.abs() < 1e-12 && pt.di_sq.abs() < 1e-12);
        assert_relative_eq!(pt.i_sq, 15.0, max_relative = 1e-12);
    }

    #[test]
    fn stationary_point_round_trip() {
        for params in [wrsm(), SyncParams::Brushless(BrushlessSmParams::example(BrushlessKind::Ipmsm))] {
            let pt =
                DqOperatingPoint { i_sd: 2.0, i_sq: 15.0, i_f: 4.0, di_sd: 30.0, di_sq: -12.0, di_f: 5.0, omega: 40.0 };
            let (x, v) = stationary_point(&params, &pt, 0.9).unwrap();
            let machine = match params {
                SyncParams::Wrsm(p) => Machine::Wrsm(p),
                SyncParams::Brushless(p) => Machine::Brushless(p),
            };
            let dx = machine.dynamics(&x, &v).unwrap();
            let back = DqOperatingPoint::from_stationary(&x, &dx).unwrap();
            assert_relative_eq!(back.di_sd, 30.0, max_relative = 1e-9);
            assert_relative_eq!(back.di_sq, -12.0, max_relative = 1e-9);
            if params.has_field() {
                assert_relative_eq!(back.di_f, 5.0, max_relative = 1e-9);
            }
        }
    }
}
