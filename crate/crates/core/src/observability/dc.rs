//! DC-machine determinants: state independent for the magnet machine, vanishing
//! with the armature current for the series machine.

use crate::machines::DcmParams;

pub fn dcm_determinant(params: &DcmParams, i_a: f64) -> f64 {
    let (_, l) = params.circuit();
    let j = params.inertia();
    match *params {
        DcmParams::Pm { k_e, .. } => -k_e * k_e / (j * l * l),
        DcmParams::Series { k, .. } => -k * k / (j * l * l) * i_a * i_a,
    }
}

/// Kalman observability matrix `[C; CA; CA^2]` of the linear magnet machine.
pub fn pm_dcm_kalman_matrix(params: &DcmParams) -> Option<nalgebra::Matrix3<f64>> {
    match *params {
        DcmParams::Pm { r_a, l_a, k_e, j, f_v } => Some(nalgebra::Matrix3::new(
            1.0,
            0.0,
            0.0,
            -r_a / l_a,
            -k_e / l_a,
            0.0,
            r_a * r_a / (l_a * l_a) - k_e * k_e / (j * l_a),
            k_e / l_a * (r_a / l_a + f_v / j),
            k_e / (j * l_a),
        )),
        DcmParams::Series { .. } => None,
    }
}
