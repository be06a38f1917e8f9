//! Wound-rotor and brushless synchronous machines in the stationary frame.
//!
//! State order is `[i_sa, i_sb, (i_f), omega, theta]`; the field current is
//! present for the WRSM and the hybrid-excited machine only. The rotor speed is
//! treated as a constant of the electrical model (`d omega/dt = 0`); a scenario
//! imposes it from outside.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refuse to invert an inductance matrix whose determinant is below this (SI units).
pub const DET_L_FLOOR: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrsmParams {
    pub r_s: f64,
    pub r_f: f64,
    /// Mean stator self-inductance.
    pub l0: f64,
    /// Saliency inductance.
    pub l2: f64,
    pub m_f: f64,
    pub l_f: f64,
    pub j: f64,
    pub p: u32,
}

impl Default for WrsmParams {
    /// Reference 2-pole-pair machine.
    fn default() -> Self {
        Self::from_dq(0.01, 6.5, 0.8e-3, 0.7e-3, 5.7e-3, 0.85, 1e-2, 2)
    }
}

impl WrsmParams {
    #[allow(clippy::too_many_arguments)]
    pub fn from_dq(r_s: f64, r_f: f64, l_d: f64, l_q: f64, m_f: f64, l_f: f64, j: f64, p: u32) -> Self {
        Self { r_s, r_f, l0: 0.5 * (l_d + l_q), l2: 0.5 * (l_d - l_q), m_f, l_f, j, p }
    }

    pub fn l_d(&self) -> f64 {
        self.l0 + self.l2
    }

    pub fn l_q(&self) -> f64 {
        self.l0 - self.l2
    }

    pub fn l_delta(&self) -> f64 {
        2.0 * self.l2
    }

    pub fn sigma_d(&self) -> f64 {
        1.0 - self.m_f * self.m_f / (self.l_d() * self.l_f)
    }

    pub fn sigma_delta(&self) -> f64 {
        1.0 - self.m_f * self.m_f / (self.l_delta() * self.l_f)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("r_s", self.r_s), ("r_f", self.r_f), ("l_f", self.l_f), ("j", self.j)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("WRSM {name} must be positive, got {v}")));
            }
        }
        if !(self.l_q() > 0.0) {
            return Err(Error::InvalidParams(format!("WRSM L_q must be positive, got {}", self.l_q())));
        }
        if self.l_d() < self.l_q() {
            return Err(Error::InvalidParams(format!(
                "WRSM requires L_d >= L_q (L_d = {}, L_q = {})",
                self.l_d(),
                self.l_q()
            )));
        }
        if !(self.sigma_d() > 0.0) {
            return Err(Error::InvalidParams(format!(
                "WRSM inductance matrix not positive definite (sigma_d = {})",
                self.sigma_d()
            )));
        }
        if self.p < 1 {
            return Err(Error::InvalidParams("WRSM pole-pair count must be at least 1".into()));
        }
        Ok(())
    }

    fn field(&self) -> FieldWinding {
        FieldWinding { m_f: self.m_f, l_f: self.l_f, r_f: self.r_f }
    }

    pub(crate) fn electrical(&self) -> SmElectrical {
        SmElectrical { r_s: self.r_s, l0: self.l0, l2: self.l2, psi_r: 0.0, field: Some(self.field()) }
    }

    /// Inductance matrix and its first two angle derivatives.
    pub fn inductance(&self, theta: f64) -> WrsmInductance {
        wrsm_inductance(theta, self)
    }
}

/// `L(theta)`, `dL/dtheta` and `d2L/dtheta2` for the stator-plus-field windings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WrsmInductance {
    pub l: Matrix3<f64>,
    pub dl: Matrix3<f64>,
    pub d2l: Matrix3<f64>,
}

pub fn wrsm_inductance(theta: f64, params: &WrsmParams) -> WrsmInductance {
    let (l0, l2, mf, lf) = (params.l0, params.l2, params.m_f, params.l_f);
    let (s1, c1) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let l = Matrix3::new(l0 + l2 * c2, l2 * s2, mf * c1, l2 * s2, l0 - l2 * c2, mf * s1, mf * c1, mf * s1, lf);
    let dl = Matrix3::new(
        -2.0 * l2 * s2,
        2.0 * l2 * c2,
        -mf * s1,
        2.0 * l2 * c2,
        2.0 * l2 * s2,
        mf * c1,
        -mf * s1,
        mf * c1,
        0.0,
    );
    let d2l = Matrix3::new(
        -4.0 * l2 * c2,
        -4.0 * l2 * s2,
        -mf * c1,
        -4.0 * l2 * s2,
        4.0 * l2 * c2,
        -mf * s1,
        -mf * c1,
        -mf * s1,
        0.0,
    );
    WrsmInductance { l, dl, d2l }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrushlessKind {
    Ipmsm,
    Spmsm,
    Syrm,
    Hesm,
}

/// Field winding of a hybrid-excited machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldWinding {
    pub m_f: f64,
    pub l_f: f64,
    pub r_f: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrushlessSmParams {
    pub kind: BrushlessKind,
    pub r_s: f64,
    pub l_d: f64,
    pub l_q: f64,
    /// Permanent-magnet flux linkage.
    #[serde(default)]
    pub psi_r: f64,
    pub j: f64,
    pub p: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldWinding>,
}

impl BrushlessSmParams {
    /// Representative parameter sets. The stator data reuse the reference WRSM;
    /// the IPMSM magnet flux is `M_f * I_f0` of that machine.
    pub fn example(kind: BrushlessKind) -> Self {
        let w = WrsmParams::default();
        let base =
            Self { kind, r_s: w.r_s, l_d: w.l_d(), l_q: w.l_q(), psi_r: w.m_f * 4.0, j: w.j, p: w.p, field: None };
        match kind {
            BrushlessKind::Ipmsm => base,
            BrushlessKind::Spmsm => Self { l_d: 1e-3, l_q: 1e-3, psi_r: 0.1, ..base },
            BrushlessKind::Syrm => Self { psi_r: 0.0, ..base },
            BrushlessKind::Hesm => Self { psi_r: 0.01, field: Some(w.field()), ..base },
        }
    }

    pub fn l0(&self) -> f64 {
        0.5 * (self.l_d + self.l_q)
    }

    pub fn l_delta(&self) -> f64 {
        self.l_d - self.l_q
    }

    pub fn has_field(&self) -> bool {
        self.field.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("r_s", self.r_s), ("l_d", self.l_d), ("l_q", self.l_q), ("j", self.j)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.p < 1 {
            return Err(Error::InvalidParams("pole-pair count must be at least 1".into()));
        }
        let salient = (self.l_d - self.l_q).abs() > 1e-12 * self.l_d.abs().max(self.l_q.abs());
        match self.kind {
            BrushlessKind::Spmsm if salient => return Err(Error::InvalidParams("SPMSM requires L_d = L_q".into())),
            BrushlessKind::Syrm if self.psi_r != 0.0 => {
                return Err(Error::InvalidParams("SyRM requires psi_r = 0".into()))
            }
            BrushlessKind::Ipmsm if !salient || !(self.psi_r > 0.0) => {
                return Err(Error::InvalidParams("IPMSM requires L_d != L_q and psi_r > 0".into()))
            }
            _ => {}
        }
        match (self.kind, &self.field) {
            (BrushlessKind::Hesm, None) => return Err(Error::InvalidParams("HESM requires a field winding".into())),
            (BrushlessKind::Hesm, Some(f)) => {
                if !(f.l_f > 0.0 && f.r_f > 0.0) {
                    return Err(Error::InvalidParams("HESM field L_f and R_f must be positive".into()));
                }
                if !(1.0 - f.m_f * f.m_f / (self.l_d * f.l_f) > 0.0) {
                    return Err(Error::InvalidParams("HESM inductance matrix not positive definite".into()));
                }
            }
            (_, Some(_)) => return Err(Error::InvalidParams("only the HESM carries a field winding".into())),
            _ => {}
        }
        Ok(())
    }

    pub(crate) fn electrical(&self) -> SmElectrical {
        SmElectrical { r_s: self.r_s, l0: self.l0(), l2: 0.5 * self.l_delta(), psi_r: self.psi_r, field: self.field }
    }
}

/// Electrical part shared by every synchronous machine: stator inductances with
/// saliency, an optional field winding and an optional magnet flux.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SmElectrical {
    pub r_s: f64,
    pub l0: f64,
    pub l2: f64,
    pub psi_r: f64,
    pub field: Option<FieldWinding>,
}

impl SmElectrical {
    pub fn n_currents(&self) -> usize {
        if self.field.is_some() {
            3
        } else {
            2
        }
    }

    /// Time derivative of the current vector from
    /// `L(theta) dI/dt = V - R I - omega (dL/dtheta I + dpsi_pm/dtheta)`.
    pub fn current_derivative(&self, currents: &[f64], omega: f64, theta: f64, v: &[f64]) -> Result<Vec<f64>> {
        let (s1, c1) = theta.sin_cos();
        match self.field {
            Some(f) => {
                let params = WrsmParams {
                    r_s: self.r_s,
                    r_f: f.r_f,
                    l0: self.l0,
                    l2: self.l2,
                    m_f: f.m_f,
                    l_f: f.l_f,
                    j: 1.0,
                    p: 1,
                };
                let ind = wrsm_inductance(theta, &params);
                let i = Vector3::new(currents[0], currents[1], currents[2]);
                let r = Vector3::new(self.r_s * i[0], self.r_s * i[1], f.r_f * i[2]);
                let pm = Vector3::new(-s1, c1, 0.0) * (omega * self.psi_r);
                let rhs = Vector3::new(v[0], v[1], v[2]) - r - ind.dl * i * omega - pm;
                let det = ind.l.determinant();
                if det.abs() < DET_L_FLOOR {
                    return Err(Error::SingularInductance { det, floor: DET_L_FLOOR });
                }
                let di = ind.l.lu().solve(&rhs).ok_or(Error::SingularInductance { det, floor: DET_L_FLOOR })?;
                Ok(vec![di[0], di[1], di[2]])
            }
            None => {
                let (s2, c2) = (2.0 * theta).sin_cos();
                let l = Matrix2::new(self.l0 + self.l2 * c2, self.l2 * s2, self.l2 * s2, self.l0 - self.l2 * c2);
                let dl = Matrix2::new(-s2, c2, c2, s2) * (2.0 * self.l2);
                let i = Vector2::new(currents[0], currents[1]);
                let pm = Vector2::new(-s1, c1) * (omega * self.psi_r);
                let rhs = Vector2::new(v[0], v[1]) - i * self.r_s - dl * i * omega - pm;
                let det = l.determinant();
                if det.abs() < DET_L_FLOOR {
                    return Err(Error::SingularInductance { det, floor: DET_L_FLOOR });
                }
                let inv = l.try_inverse().ok_or(Error::SingularInductance { det, floor: DET_L_FLOOR })?;
                let di = inv * rhs;
                Ok(vec![di[0], di[1]])
            }
        }
    }

    /// Full state derivative `[dI/dt, 0, omega]`.
    pub fn state_derivative(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_currents();
        let omega = x[n];
        let theta = x[n + 1];
        let mut dx = self.current_derivative(&x[..n], omega, theta, v)?;
        dx.push(0.0);
        dx.push(omega);
        Ok(dx)
    }
}

/// Synchronous-machine state with the field current absent for brushless kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmState {
    pub i_sa: f64,
    pub i_sb: f64,
    pub i_f: Option<f64>,
    pub omega: f64,
    /// Unwrapped electrical angle.
    pub theta: f64,
}

impl SmState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.i_sa, self.i_sb];
        v.extend(self.i_f);
        v.push(self.omega);
        v.push(self.theta);
        v
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x.len() {
            4 => Ok(Self { i_sa: x[0], i_sb: x[1], i_f: None, omega: x[2], theta: x[3] }),
            5 => Ok(Self { i_sa: x[0], i_sb: x[1], i_f: Some(x[2]), omega: x[3], theta: x[4] }),
            n => Err(Error::DimensionMismatch(format!("synchronous-machine state has 4 or 5 entries, got {n}"))),
        }
    }

    /// Angle wrapped to (-pi, pi] for reporting.
    pub fn theta_wrapped(&self) -> f64 {
        super::park::wrap_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}
