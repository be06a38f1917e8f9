//! Induction machine in the stationary frame, in physical and in scaled variables.
//!
//! Scaled state: `[L_sigma i_sa, L_sigma i_sb, k_r psi_ra, k_r psi_rb, omega_e, T_r]`.
//! Unscaled state: `[i_sa, i_sb, psi_ra, psi_rb, omega_e, T_r]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{selection, StateSpaceModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImParams {
    pub r_s: f64,
    pub r_r: f64,
    pub l_s: f64,
    pub l_r: f64,
    pub m: f64,
    pub p: u32,
    pub j: f64,
    pub f_v: f64,
}

impl Default for ImParams {
    fn default() -> Self {
        Self { r_s: 2.8e-3, r_r: 1.5e-3, l_s: 9.865e-5, l_r: 1.033e-4, m: 9.395e-5, p: 4, j: 1e-2, f_v: 1e-4 }
    }
}

impl ImParams {
    pub fn k_r(&self) -> f64 {
        self.m / self.l_r
    }
    pub fn k_s(&self) -> f64 {
        self.m / self.l_s
    }
    pub fn tau_r(&self) -> f64 {
        self.l_r / self.r_r
    }
    pub fn sigma(&self) -> f64 {
        1.0 - self.k_r() * self.k_s()
    }
    pub fn l_sigma(&self) -> f64 {
        self.sigma() * self.l_s
    }
    pub fn r_sigma(&self) -> f64 {
        self.r_s + self.k_r().powi(2) * self.r_r
    }
    pub fn a(&self) -> f64 {
        -self.r_sigma() / self.l_sigma()
    }
    pub fn b(&self) -> f64 {
        -self.r_s / self.l_sigma()
    }
    pub fn c(&self) -> f64 {
        f64::from(self.p).powi(2) / self.l_sigma()
    }
    pub fn pole_pairs(&self) -> f64 {
        f64::from(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive =
            [("r_s", self.r_s), ("r_r", self.r_r), ("l_s", self.l_s), ("l_r", self.l_r), ("m", self.m), ("j", self.j)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("IM {name} must be positive, got {v}")));
            }
        }
        if !(self.f_v >= 0.0) {
            return Err(Error::InvalidParams("IM friction must be non-negative".into()));
        }
        let s = self.sigma();
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParams(format!("IM leakage factor must lie in (0, 1), got {s}")));
        }
        if self.p < 1 {
            return Err(Error::InvalidParams("IM pole-pair count must be at least 1".into()));
        }
        Ok(())
    }

    /// Scaled dynamics: currents and fluxes multiplied by `L_sigma` and `k_r`.
    pub fn scaled_derivative(&self, x: &[f64], v: [f64; 2]) -> [f64; 6] {
        let (a, b) = (self.a(), self.b());
        let inv_tr = 1.0 / self.tau_r();
        let (ia, ib, pa, pb, w, tr) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        // gamma = I/tau_r - omega J2, J2 = [[0, -1], [1, 0]]
        let gpa = inv_tr * pa + w * pb;
        let gpb = -w * pa + inv_tr * pb;
        let p = self.pole_pairs();
        [
            v[0] + a * ia + gpa,
            v[1] + a * ib + gpb,
            -gpa - (a - b) * ia,
            -gpb - (a - b) * ib,
            self.c() / self.j * (ib * pa - ia * pb) - p / self.j * tr,
            0.0,
        ]
    }

    /// Dynamics in physical variables.
    pub fn unscaled_derivative(&self, x: &[f64], v: [f64; 2]) -> [f64; 6] {
        let (ls, kr) = (self.l_sigma(), self.k_r());
        let inv_tr = 1.0 / self.tau_r();
        let (ia, ib, pa, pb, w, tr) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        let gpa = inv_tr * pa + w * pb;
        let gpb = -w * pa + inv_tr * pb;
        let p = self.pole_pairs();
        let m_tr = self.m * inv_tr;
        [
            (-self.r_sigma() * ia + kr * gpa + v[0]) / ls,
            (-self.r_sigma() * ib + kr * gpb + v[1]) / ls,
            -gpa + m_tr * ia,
            -gpb + m_tr * ib,
            p * p / self.j * kr * (ib * pa - ia * pb) - p / self.j * tr,
            0.0,
        ]
    }

    /// Electromagnetic torque `p k_r (psi_ra i_sb - psi_rb i_sa)` from a scaled state.
    pub fn torque_scaled(&self, x: &[f64]) -> f64 {
        self.pole_pairs() / self.l_sigma() * (x[1] * x[2] - x[0] * x[3])
    }

    pub fn scale(&self, unscaled: &[f64]) -> [f64; 6] {
        let (ls, kr) = (self.l_sigma(), self.k_r());
        [unscaled[0] * ls, unscaled[1] * ls, unscaled[2] * kr, unscaled[3] * kr, unscaled[4], unscaled[5]]
    }

    pub fn unscale(&self, scaled: &[f64]) -> [f64; 6] {
        let (ls, kr) = (self.l_sigma(), self.k_r());
        [scaled[0] / ls, scaled[1] / ls, scaled[2] / kr, scaled[3] / kr, scaled[4], scaled[5]]
    }
}

/// Scaled induction-machine state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImState {
    /// `L_sigma i_s` (V s).
    pub i_sa: f64,
    pub i_sb: f64,
    /// `k_r psi_r` (Wb).
    pub psi_ra: f64,
    pub psi_rb: f64,
    pub omega_e: f64,
    pub t_r: f64,
}

impl ImState {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 6 {
            return Err(Error::DimensionMismatch(format!("IM state has 6 entries, got {}", x.len())));
        }
        Ok(Self { i_sa: x[0], i_sb: x[1], psi_ra: x[2], psi_rb: x[3], omega_e: x[4], t_r: x[5] })
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.i_sa, self.i_sb, self.psi_ra, self.psi_rb, self.omega_e, self.t_r]
    }

    /// Physical stator currents (A).
    pub fn currents(&self, params: &ImParams) -> [f64; 2] {
        let ls = params.l_sigma();
        [self.i_sa / ls, self.i_sb / ls]
    }

    /// Physical rotor fluxes (Wb).
    pub fn fluxes(&self, params: &ImParams) -> [f64; 2] {
        let kr = params.k_r();
        [self.psi_ra / kr, self.psi_rb / kr]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Induction machine in physical variables, used to cross-check the scaled model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnscaledIm {
    pub params: ImParams,
    pub speed_measured: bool,
}

impl StateSpaceModel for UnscaledIm {
    fn state_dim(&self) -> usize {
        6
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        if self.speed_measured {
            3
        } else {
            2
        }
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_row_slice(&self.params.unscaled_derivative(x.as_slice(), [u[0], u[1]])))
    }
    fn output_matrix(&self) -> DMatrix<f64> {
        if self.speed_measured {
            selection(&[0, 1, 4], 6)
        } else {
            selection(&[0, 1], 6)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn derived_constants() {
        let p = ImParams::default();
        assert_relative_eq!(p.tau_r(), 1.033e-4 / 1.5e-3, max_relative = 1e-14);
        assert_relative_eq!(p.k_r(), 9.395e-5 / 1.033e-4, max_relative = 1e-14);
        assert!(p.sigma() > 0.0 && p.sigma() < 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn pure_load_decelerates() {
        let p = ImParams::default();
        let dx = p.scaled_derivative(&[0.0, 0.0, 0.0, 0.0, 0.0, 5.0], [0.0, 0.0]);
        assert_relative_eq!(dx[4], -2000.0, max_relative = 1e-14);
    }

    #[test]
    fn accessors_invert_scaling() {
        let p = ImParams::default();
        let raw = [120.0, -40.0, 0.05, -0.02, 31.0, 2.0];
        let s = ImState::from_slice(&p.scale(&raw)).unwrap();
        assert_relative_eq!(s.currents(&p)[0], 120.0, max_relative = 1e-15);
        assert_relative_eq!(s.fluxes(&p)[1], -0.02, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn scaled_and_unscaled_dynamics_agree(
            ia in -500.0f64..500.0, ib in -500.0f64..500.0,
            pa in -0.1f64..0.1, pb in -0.1f64..0.1,
            w in -400.0f64..400.0, tr in -20.0f64..20.0,
            va in -5.0f64..5.0, vb in -5.0f64..5.0,
        ) {
            let p = ImParams::default();
            let raw = [ia, ib, pa, pb, w, tr];
            let d_raw = p.unscaled_derivative(&raw, [va, vb]);
            let d_scaled = p.scaled_derivative(&p.scale(&raw), [va, vb]);
            let back = p.unscale(&d_scaled);
            for k in 0..6 {
                let scale = d_raw[k].abs().max(1e-300);
                // Cancellation in the flux equation is bounded by the largest summand.
                let mag = match k {
                    0 | 1 => (p.r_sigma() * raw[k].abs() + p.k_r() * (pa.abs() + pb.abs()) * (1.0 / p.tau_r() + w.abs()) + 5.0) / p.l_sigma(),
                    2 | 3 => (pa.abs() + pb.abs()) * (1.0 / p.tau_r() + w.abs()) + p.m / p.tau_r() * (ia.abs() + ib.abs()),
                    _ => scale + 1.0,
                };
                prop_assert!((back[k] - d_raw[k]).abs() <= 1e-10 * mag.max(scale), "k={} {} vs {}", k, back[k], d_raw[k]);
            }
        }
    }
}
