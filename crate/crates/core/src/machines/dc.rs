//! Permanent-magnet and series-wound DC machines. State `[i_a, Omega, T_l]`, input `[v]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DcmParams {
    Pm { r_a: f64, l_a: f64, k_e: f64, j: f64, f_v: f64 },
    Series { r_a: f64, l_a: f64, r_f: f64, l_f: f64, k: f64, j: f64, f_v: f64 },
}

impl DcmParams {
    pub fn pm_example() -> Self {
        DcmParams::Pm { r_a: 0.5, l_a: 1.5e-3, k_e: 0.1, j: 1e-4, f_v: 1e-5 }
    }

    pub fn series_example() -> Self {
        DcmParams::Series { r_a: 0.3, l_a: 1e-3, r_f: 0.2, l_f: 2e-3, k: 0.01, j: 1e-3, f_v: 1e-5 }
    }

    /// Total circuit resistance and inductance.
    pub fn circuit(&self) -> (f64, f64) {
        match *self {
            DcmParams::Pm { r_a, l_a, .. } => (r_a, l_a),
            DcmParams::Series { r_a, l_a, r_f, l_f, .. } => (r_a + r_f, l_a + l_f),
        }
    }

    pub fn inertia(&self) -> f64 {
        match *self {
            DcmParams::Pm { j, .. } | DcmParams::Series { j, .. } => j,
        }
    }

    pub fn friction(&self) -> f64 {
        match *self {
            DcmParams::Pm { f_v, .. } | DcmParams::Series { f_v, .. } => f_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values: Vec<(&str, f64)> = match *self {
            DcmParams::Pm { r_a, l_a, k_e, j, f_v } => {
                vec![("r_a", r_a), ("l_a", l_a), ("k_e", k_e), ("j", j), ("f_v", f_v)]
            }
            DcmParams::Series { r_a, l_a, r_f, l_f, k, j, f_v } => {
                vec![("r_a", r_a), ("l_a", l_a), ("r_f", r_f), ("l_f", l_f), ("k", k), ("j", j), ("f_v", f_v)]
            }
        };
        for (name, v) in values {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("DCM {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn derivative(&self, x: &[f64], v: f64) -> [f64; 3] {
        let (i_a, speed, t_l) = (x[0], x[1], x[2]);
        let (r, l) = self.circuit();
        let (j, f_v) = (self.inertia(), self.friction());
        match *self {
            DcmParams::Pm { k_e, .. } => {
                [(v - r * i_a - k_e * speed) / l, (k_e * i_a - t_l) / j - f_v / j * speed, 0.0]
            }
            DcmParams::Series { k, .. } => {
                [(v - r * i_a - k * i_a * speed) / l, (k * i_a * i_a - t_l) / j - f_v / j * speed, 0.0]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcmState {
    pub i_a: f64,
    pub speed: f64,
    pub t_l: f64,
}

impl DcmState {
    pub fn to_array(&self) -> [f64; 3] {
        [self.i_a, self.speed, self.t_l]
    }
}
