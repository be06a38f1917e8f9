//! Machine parameter records, continuous-time dynamics and output maps.

pub mod dc;
pub mod induction;
pub mod park;
pub mod sync;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use dc::{DcmParams, DcmState};
pub use induction::{ImParams, ImState, UnscaledIm};
pub use park::{park, to_ab, to_dq, wrap_angle, ParkDirection};
pub use sync::{
    wrsm_inductance, BrushlessKind, BrushlessSmParams, FieldWinding, SmState, WrsmInductance, WrsmParams, DET_L_FLOOR,
};

use crate::error::{Error, Result};
use crate::model::{selection, StateSpaceModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum Machine {
    Wrsm(WrsmParams),
    Brushless(BrushlessSmParams),
    Im(ImParams),
    Dcm(DcmParams),
}

impl Machine {
    pub fn validate(&self) -> Result<()> {
        match self {
            Machine::Wrsm(p) => p.validate(),
            Machine::Brushless(p) => p.validate(),
            Machine::Im(p) => p.validate(),
            Machine::Dcm(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Machine::Wrsm(_) => "wrsm",
            Machine::Brushless(p) => match p.kind {
                BrushlessKind::Ipmsm => "ipmsm",
                BrushlessKind::Spmsm => "spmsm",
                BrushlessKind::Syrm => "syrm",
                BrushlessKind::Hesm => "hesm",
            },
            Machine::Im(_) => "im",
            Machine::Dcm(DcmParams::Pm { .. }) => "pm-dcm",
            Machine::Dcm(DcmParams::Series { .. }) => "s-dcm",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Machine::Wrsm(_) => 5,
            Machine::Brushless(p) => {
                if p.has_field() {
                    5
                } else {
                    4
                }
            }
            Machine::Im(_) => 6,
            Machine::Dcm(_) => 3,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Machine::Wrsm(_) => 3,
            Machine::Brushless(p) => {
                if p.has_field() {
                    3
                } else {
                    2
                }
            }
            Machine::Im(_) => 2,
            Machine::Dcm(_) => 1,
        }
    }

    /// Indices of the measured states.
    pub fn output_indices(&self, speed_measured: bool) -> Vec<usize> {
        match self {
            Machine::Wrsm(_) => vec![0, 1, 2],
            Machine::Brushless(p) => {
                if p.has_field() {
                    vec![0, 1, 2]
                } else {
                    vec![0, 1]
                }
            }
            Machine::Im(_) => {
                if speed_measured {
                    vec![0, 1, 4]
                } else {
                    vec![0, 1]
                }
            }
            Machine::Dcm(_) => vec![0],
        }
    }

    pub fn angle_index(&self) -> Option<usize> {
        match self {
            Machine::Wrsm(_) | Machine::Brushless(_) => Some(self.state_dim() - 1),
            _ => None,
        }
    }

    /// Time derivative of the state.
    pub fn dynamics(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}: expected state {} / input {}, got {} / {}",
                self.name(),
                self.state_dim(),
                self.input_dim(),
                x.len(),
                u.len()
            )));
        }
        match self {
            Machine::Wrsm(p) => p.electrical().state_derivative(x, u),
            Machine::Brushless(p) => p.electrical().state_derivative(x, u),
            Machine::Im(p) => Ok(p.scaled_derivative(x, [u[0], u[1]]).to_vec()),
            Machine::Dcm(p) => Ok(p.derivative(x, u[0]).to_vec()),
        }
    }

    /// Measurement vector. The speed flag only affects the induction machine.
    pub fn output(&self, x: &[f64], speed_measured: bool) -> Vec<f64> {
        self.output_indices(speed_measured).iter().map(|&i| x[i]).collect()
    }
}

/// A machine together with its measurement configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveModel {
    pub machine: Machine,
    pub speed_measured: bool,
}

impl DriveModel {
    pub fn new(machine: Machine) -> Self {
        Self { machine, speed_measured: false }
    }

    pub fn with_speed_measurement(machine: Machine) -> Self {
        Self { machine, speed_measured: true }
    }
}

impl StateSpaceModel for DriveModel {
    fn state_dim(&self) -> usize {
        self.machine.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.machine.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.machine.output_indices(self.speed_measured).len()
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.machine.dynamics(x.as_slice(), u.as_slice())?))
    }
    fn output_matrix(&self) -> DMatrix<f64> {
        selection(&self.machine.output_indices(self.speed_measured), self.state_dim())
    }
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.machine.output(x.as_slice(), self.speed_measured))
    }
    fn angle_index(&self) -> Option<usize> {
        self.machine.angle_index()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::jacobians;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn outputs() {
        let wrsm = Machine::Wrsm(WrsmParams::default());
        assert_eq!(wrsm.output(&[1.0, 2.0, 3.0, 4.0, 5.0], false), vec![1.0, 2.0, 3.0]);
        let im = Machine::Im(ImParams::default());
        let x = [0.1, 0.2, 0.3, 0.4, 50.0, 1.0];
        assert_eq!(im.output(&x, true), vec![0.1, 0.2, 50.0]);
        assert_eq!(im.output(&x, false).len(), 2);
        let dcm = Machine::Dcm(DcmParams::pm_example());
        assert_eq!(dcm.output(&[3.0, 1.0, 0.0], false), vec![3.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = Machine::Im(ImParams::default());
        assert!(matches!(m.dynamics(&[0.0; 5], &[0.0; 2]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn im_jacobian_rows_match_closed_form() {
        let p = ImParams::default();
        let model = DriveModel::with_speed_measurement(Machine::Im(p));
        let x = DVector::from_vec(vec![2e-3, -1e-3, 0.04, -0.03, 120.0, 3.0]);
        let u = DVector::from_vec(vec![1.0, -2.0]);
        let (a, c) = jacobians(&model, &x, &u).unwrap();
        let tol = 1e-6;
        assert!((a[(0, 0)] - p.a()).abs() <= tol * p.a().abs());
        assert!((a[(0, 2)] - 1.0 / p.tau_r()).abs() <= tol / p.tau_r());
        assert!((a[(0, 3)] - 120.0).abs() <= tol * 120.0);
        assert!((a[(0, 4)] - x[3]).abs() <= tol * x[3].abs());
        assert!((a[(1, 2)] + 120.0).abs() <= tol * 120.0);
        assert!((a[(1, 4)] + x[2]).abs() <= tol * x[2].abs());
        let cj = p.c() / p.j;
        assert!((a[(4, 0)] + cj * x[3]).abs() <= tol * (cj * x[3]).abs());
        assert!((a[(4, 1)] - cj * x[2]).abs() <= tol * (cj * x[2]).abs());
        assert!((a[(4, 2)] - cj * x[1]).abs() <= tol * (cj * x[1]).abs());
        assert!((a[(4, 3)] + cj * x[0]).abs() <= tol * (cj * x[0]).abs());
        assert!((a[(4, 5)] + 400.0).abs() <= tol * 400.0);
        assert_eq!(c, selection(&[0, 1, 4], 6));
    }

    #[test]
    fn pm_dcm_jacobian_is_state_independent() {
        let model = DriveModel::new(Machine::Dcm(DcmParams::pm_example()));
        let u = DVector::from_vec(vec![12.0]);
        let (a0, _) = jacobians(&model, &DVector::from_vec(vec![0.0, 0.0, 0.0]), &u).unwrap();
        let (a1, _) = jacobians(&model, &DVector::from_vec(vec![40.0, 300.0, -2.0]), &u).unwrap();
        assert!((a0 - a1).abs().max() < 1e-6 * 1e3);
    }

    #[test]
    fn wrsm_jacobian_matches_directional_difference() {
        let model = DriveModel::new(Machine::Wrsm(WrsmParams::default()));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = DVector::from_fn(5, |i, _| match i {
                3 => rng.random_range(-300.0..300.0),
                4 => rng.random_range(-3.0..3.0),
                _ => rng.random_range(-10.0..10.0),
            });
            let u = DVector::from_fn(3, |_, _| rng.random_range(-50.0..50.0));
            let (a, _) = jacobians(&model, &x, &u).unwrap();
            let delta = DVector::from_fn(5, |i, _| 1e-4 * x[i].abs().max(1.0) * rng.random_range(-1.0..1.0));
            let fp = model.derivative(&(&x + &delta), &u).unwrap();
            let fm = model.derivative(&(&x - &delta), &u).unwrap();
            let fd = (fp - fm) / 2.0;
            let lin = &a * &delta;
            let err = (&lin - &fd).norm();
            assert!(err <= 1e-5 * fd.norm(), "err {err} vs {}", fd.norm());
        }
    }

    #[test]
    fn spmsm_matches_constrained_wrsm_stator_rows() {
        // WRSM stator rows with d i_f/dt = 0, M_f i_f = psi_r and L_2 = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = BrushlessSmParams::example(BrushlessKind::Spmsm);
        let m_f = 5.7e-3;
        let w = WrsmParams { r_s: b.r_s, r_f: 1.0, l0: b.l0(), l2: 0.0, m_f, l_f: 0.85, j: b.j, p: b.p };
        let spm = Machine::Brushless(b);
        for _ in 0..50 {
            let (ia, ib) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let omega = rng.random_range(-300.0..300.0);
            let theta = rng.random_range(-10.0..10.0);
            let (va, vb) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let dx = spm.dynamics(&[ia, ib, omega, theta], &[va, vb]).unwrap();

            let i_f = b.psi_r / m_f;
            let ind = w.inductance(theta);
            let i = nalgebra::Vector3::new(ia, ib, i_f);
            let rhs = nalgebra::Vector3::new(va - w.r_s * ia, vb - w.r_s * ib, 0.0) - ind.dl * i * omega;
            let lss = ind.l.fixed_view::<2, 2>(0, 0).into_owned();
            let di = lss.try_inverse().unwrap() * rhs.fixed_rows::<2>(0);
            for k in 0..2 {
                assert!((dx[k] - di[k]).abs() <= 1e-9 * di[k].abs().max(1.0));
            }
        }
    }
}
