//! Point-wise observability check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::Machine;
use crate::observability::{dcm_report, im_report, sm_report, sync_params, DqOperatingPoint, ObservabilityReport};

/// Operating point. Which fields are needed depends on the machine:
/// synchronous `omega, i_sd, i_sq` (and `i_f` with a field winding),
/// induction `omega_e, t_m, psi_rd`, DC `i_a, speed`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct CheckPoint {
    /// Rotor-frame stator currents (A).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_sd: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_sq: Option<f64>,
    /// Field current (A).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_f: Option<f64>,
    /// Current derivatives (A/s).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di_sd: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di_sq: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di_f: Option<f64>,
    /// Electrical rotor speed of a synchronous machine (rad/s).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Electrical rotor angle (rad).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Electrical rotor speed of an induction machine (rad/s).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_e: Option<f64>,
    /// Motor torque (N m).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_m: Option<f64>,
    /// Rotor flux magnitude (Wb).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_rd: Option<f64>,
    /// Electrical acceleration (rad/s^2).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domega_e: Option<f64>,
    /// Armature current (A).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_a: Option<f64>,
    /// Mechanical speed of a DC machine (rad/s).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// Load torque (N m).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_l: Option<f64>,
    /// Armature voltage (V).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<f64>,
}

impl CheckPoint {
    /// Fields set in `self` win over `base`.
    pub fn or(&self, base: &CheckPoint) -> CheckPoint {
        CheckPoint {
            i_sd: self.i_sd.or(base.i_sd),
            i_sq: self.i_sq.or(base.i_sq),
            i_f: self.i_f.or(base.i_f),
            di_sd: self.di_sd.or(base.di_sd),
            di_sq: self.di_sq.or(base.di_sq),
            di_f: self.di_f.or(base.di_f),
            omega: self.omega.or(base.omega),
            theta: self.theta.or(base.theta),
            omega_e: self.omega_e.or(base.omega_e),
            t_m: self.t_m.or(base.t_m),
            psi_rd: self.psi_rd.or(base.psi_rd),
            domega_e: self.domega_e.or(base.domega_e),
            i_a: self.i_a.or(base.i_a),
            speed: self.speed.or(base.speed),
            t_l: self.t_l.or(base.t_l),
            voltage: self.voltage.or(base.voltage),
        }
    }
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(Error::Config(format!("{name} must be finite, got {x}"))),
        None => Err(Error::Config(format!("operating point needs {name}"))),
    }
}

fn optional(v: Option<f64>, name: &str) -> Result<f64> {
    need(v.or(Some(0.0)), name)
}

pub fn check_report(machine: &Machine, pt: &CheckPoint, threshold: f64) -> Result<ObservabilityReport> {
    match machine {
        Machine::Wrsm(_) | Machine::Brushless(_) => {
            let params = sync_params(machine)?;
            let i_f = if params.has_field() { need(pt.i_f, "i_f")? } else { optional(pt.i_f, "i_f")? };
            let dq = DqOperatingPoint {
                i_sd: need(pt.i_sd, "i_sd")?,
                i_sq: need(pt.i_sq, "i_sq")?,
                i_f,
                di_sd: optional(pt.di_sd, "di_sd")?,
                di_sq: optional(pt.di_sq, "di_sq")?,
                di_f: optional(pt.di_f, "di_f")?,
                omega: need(pt.omega, "omega")?,
            };
            sm_report(&params, &dq, optional(pt.theta, "theta")?, threshold)
        }
        Machine::Im(p) => im_report(
            p,
            need(pt.omega_e, "omega_e")?,
            need(pt.t_m, "t_m")?,
            need(pt.psi_rd, "psi_rd")?,
            optional(pt.domega_e, "domega_e")?,
            threshold,
        ),
        Machine::Dcm(p) => dcm_report(
            p,
            [need(pt.i_a, "i_a")?, need(pt.speed, "speed")?, optional(pt.t_l, "t_l")?],
            optional(pt.voltage, "voltage")?,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{BrushlessKind, BrushlessSmParams, DcmParams, ImParams};

    #[test]
    fn spmsm_points() {
        let mut p = BrushlessSmParams::example(BrushlessKind::Spmsm);
        p.psi_r = 0.1;
        p.l_d = 1e-3;
        p.l_q = 1e-3;
        let m = Machine::Brushless(p);
        let pt = CheckPoint { i_sd: Some(0.0), i_sq: Some(5.0), omega: Some(100.0), ..Default::default() };
        let r = check_report(&m, &pt, 2.0).unwrap();
        assert!((r.determinant - 1.0e6).abs() < 1e-6 * 1.0e6);
        assert!(r.guaranteed);
        let still = CheckPoint { omega: Some(0.0), ..pt };
        let r = check_report(&m, &still, 2.0).unwrap();
        assert_eq!(r.determinant, 0.0);
        assert!(!r.guaranteed);
    }

    #[test]
    fn missing_or_bad_fields() {
        let im = Machine::Im(ImParams::default());
        let pt = CheckPoint { omega_e: Some(1.0), t_m: Some(2.0), ..Default::default() };
        assert!(matches!(check_report(&im, &pt, 2.0), Err(Error::Config(_))));
        let pt = CheckPoint { psi_rd: Some(f64::NAN), ..pt };
        assert!(matches!(check_report(&im, &pt, 2.0), Err(Error::Config(_))));
        let dcm = Machine::Dcm(DcmParams::pm_example());
        let pt = CheckPoint { i_a: Some(2.0), speed: Some(10.0), ..Default::default() };
        assert!(check_report(&dcm, &pt, 2.0).unwrap().guaranteed);
    }

    #[test]
    fn cli_flags_win() {
        let file = CheckPoint { omega: Some(1.0), i_sd: Some(2.0), ..Default::default() };
        let flags = CheckPoint { omega: Some(5.0), ..Default::default() };
        let m = flags.or(&file);
        assert_eq!((m.omega, m.i_sd), (Some(5.0), Some(2.0)));
    }
}
