//! Wound-rotor synchronous machine with its shaft driven at an imposed speed,
//! three PI current loops and high-frequency injection on the field setpoint.

use serde::{Deserialize, Serialize};

use super::control::PiController;
use super::integrate::rk4_step;
use super::monitor::TrailingRms;
use super::profile::{evaluate_profile, SignalProfile};
use super::summary::{ScenarioChecks, WrsmChecks};
use super::trace::SimTrace;
use super::{whole_steps, EkfSpec, NoiseSource, NoiseSpec, Tracked};
use crate::ekf::Ekf;
use crate::error::{Error, Result};
use crate::machines::{to_ab, to_dq, wrap_angle, DriveModel, Machine, WrsmParams};
use crate::observability::{
    sm_determinant, sm_observability_vector_at, stationary_point, DqOperatingPoint, SyncParams,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrsmScenario {
    #[serde(default)]
    pub params: WrsmParams,
    pub duration: f64,
    /// Integration step.
    pub dt: f64,
    /// Controller and sampling period; estimators run at this rate.
    pub control_ts: f64,
    /// Imposed electrical speed (rad/s).
    pub speed: SignalProfile,
    #[serde(default)]
    pub theta0: f64,
    pub i_d_ref: SignalProfile,
    pub i_q_ref: SignalProfile,
    pub i_f_ref: SignalProfile,
    /// Closed-loop bandwidths (rad/s).
    pub bandwidth_dq: f64,
    pub bandwidth_f: f64,
    /// Symmetric output limits of the stator and field loops (V).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stator_voltage_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_voltage_limit: Option<f64>,
    /// Margin below which observability is flagged as lost (rad/s).
    pub threshold: f64,
    /// Trailing window of the RMS monitors (s).
    pub monitor_window: f64,
    #[serde(default)]
    pub ekfs: Vec<EkfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

pub const WRSM_INJECTION_WINDOWS: [(f64, f64); 2] = [(1.0, 1.5), (4.5, 5.0)];

impl Default for WrsmScenario {
    fn default() -> Self {
        let duration = 6.0;
        let hf = 2.0 * std::f64::consts::PI * 1e3;
        let speed = SignalProfile::piecewise_linear(&[
            (0.0, 0.0),
            (1.5, 0.0),
            (2.5, 100.0),
            (4.0, 100.0),
            (4.5, 0.0),
            (duration, 0.0),
        ])
        .expect("static profile");
        Self {
            params: WrsmParams::default(),
            duration,
            dt: 1e-5,
            control_ts: 1e-4,
            speed,
            theta0: 0.3,
            i_d_ref: SignalProfile::constant(2.0, 0.0, duration),
            i_q_ref: SignalProfile::constant(15.0, 0.0, duration),
            i_f_ref: SignalProfile::with_injection(4.0, 0.5, hf, &WRSM_INJECTION_WINDOWS, 0.0, duration)
                .expect("static profile"),
            bandwidth_dq: 500.0,
            bandwidth_f: 50.0,
            stator_voltage_limit: None,
            field_voltage_limit: None,
            threshold: 2.0,
            monitor_window: 5e-3,
            ekfs: vec![EkfSpec {
                name: "ekf".into(),
                q: vec![1.0, 1.0, 1.0, 200.0, 5.0],
                r: vec![1.0; 3],
                p0: vec![1.0, 1.0, 1.0, 10.0, 1.0],
                x0: None,
                x0_offset: Some(vec![0.0, 0.0, 0.0, 0.0, 0.5]),
                ts: 1e-4,
                speed_measured: false,
                overflow_bound: None,
                coordinates: None,
            }],
            noise: None,
        }
    }
}

impl WrsmScenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        whole_steps(self.control_ts, self.dt, "control_ts")?;
        whole_steps(self.duration, self.control_ts, "duration")?;
        for (name, p) in
            [("speed", &self.speed), ("i_d_ref", &self.i_d_ref), ("i_q_ref", &self.i_q_ref), ("i_f_ref", &self.i_f_ref)]
        {
            if p.start() > 0.0 || p.end() < self.duration {
                return Err(Error::Config(format!("{name} profile must cover [0, {}]", self.duration)));
            }
        }
        for e in &self.ekfs {
            if (e.ts - self.control_ts).abs() > 1e-12 {
                return Err(Error::Config(format!("ekf {:?}: ts must equal control_ts", e.name)));
            }
            if e.coordinates.is_some() {
                return Err(Error::Config(format!(
                    "ekf {:?}: coordinates apply to the induction machine only",
                    e.name
                )));
            }
        }
        if !(self.threshold >= 0.0 && self.monitor_window > 0.0 && self.bandwidth_dq > 0.0 && self.bandwidth_f > 0.0) {
            return Err(Error::Config("threshold, monitor window and bandwidths must be positive".into()));
        }
        Ok(())
    }

    /// Spans where the field setpoint carries a sinusoid.
    pub fn injection_windows(&self) -> Vec<(f64, f64)> {
        self.i_f_ref.oscillating_windows()
    }

    pub fn checks(&self) -> ScenarioChecks {
        ScenarioChecks::Wrsm(WrsmChecks {
            injection_windows: self.injection_windows(),
            threshold: self.threshold,
            monitor_window: self.monitor_window,
            settle: 0.05,
        })
    }
}

/// Column names of the WRSM trace for the given estimator names.
pub fn wrsm_columns(ekf_names: &[&str]) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t",
        "omega",
        "theta",
        "i_sa",
        "i_sb",
        "i_f",
        "i_d",
        "i_q",
        "i_d_ref",
        "i_q_ref",
        "i_f_ref",
        "v_sa",
        "v_sb",
        "v_f",
        "saturated",
        "det",
        "psi_od",
        "psi_oq",
        "omega_o",
        "omega_o_rms",
        "margin",
        "margin_rms",
        "violated",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in ekf_names {
        for c in [
            "i_sa",
            "i_sb",
            "i_f",
            "omega",
            "theta",
            "theta_err",
            "omega_err",
            "innov_sa",
            "innov_sb",
            "innov_f",
            "nis",
            "p_asym",
            "p_eig_ratio",
            "diverged",
        ] {
            cols.push(format!("{n}_{c}"));
        }
    }
    cols
}

pub fn run_wrsm_scenario(sc: &WrsmScenario) -> Result<SimTrace> {
    sc.validate()?;
    let p = sc.params;
    let machine = Machine::Wrsm(p);
    let sync = SyncParams::Wrsm(p);
    let ts = sc.control_ts;
    let n_sub = whole_steps(ts, sc.dt, "control_ts")?;
    let steps = whole_steps(sc.duration, ts, "duration")?;
    let refs_at = |t: f64| -> Result<[f64; 3]> {
        let t = t.min(sc.duration);
        Ok([evaluate_profile(&sc.i_d_ref, t)?, evaluate_profile(&sc.i_q_ref, t)?, evaluate_profile(&sc.i_f_ref, t)?])
    };

    // Plant state [i_sa, i_sb, i_f, theta]; the speed is imposed.
    let r0 = refs_at(0.0)?;
    let [ia0, ib0] = to_ab([r0[0], r0[1]], sc.theta0);
    let mut x = vec![ia0, ib0, r0[2], sc.theta0];
    let omega0 = evaluate_profile(&sc.speed, 0.0)?;
    let truth0 = [ia0, ib0, r0[2], omega0, sc.theta0];

    let limit = |l: Option<f64>| l.map_or((f64::NEG_INFINITY, f64::INFINITY), |v| (-v, v));
    let (s_lo, s_hi) = limit(sc.stator_voltage_limit);
    let (f_lo, f_hi) = limit(sc.field_voltage_limit);
    let mut pi_d = PiController::pole_placement(p.r_s, p.l_d(), sc.bandwidth_dq).with_limits(s_lo, s_hi);
    let mut pi_q = PiController::pole_placement(p.r_s, p.l_q(), sc.bandwidth_dq).with_limits(s_lo, s_hi);
    let mut pi_f = PiController::pole_placement(p.r_f, p.l_f, sc.bandwidth_f).with_limits(f_lo, f_hi);

    let mut ekfs = sc
        .ekfs
        .iter()
        .map(|e| Ok(Tracked::new(Ekf::new(DriveModel::new(machine), e.config(&truth0)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut noise = NoiseSource::new(sc.noise.as_ref())?;

    let names: Vec<&str> = sc.ekfs.iter().map(|e| e.name.as_str()).collect();
    let mut trace = SimTrace::new(wrsm_columns(&names));
    let window = ((sc.monitor_window / ts).round() as usize).max(1);
    let (mut margin_rms, mut omega_o_rms) = (TrailingRms::new(window), TrailingRms::new(window));
    let mut v = vec![0.0; 3];

    for k in 0..=steps {
        let t = k as f64 * ts;
        let omega = evaluate_profile(&sc.speed, t)?;
        let theta = x[3];
        let mut y = vec![x[0], x[1], x[2]];
        if let Some(n) = noise.as_mut() {
            n.corrupt(&mut y);
        }
        if k > 0 {
            for e in ekfs.iter_mut() {
                e.step(&v, &y, t)?;
            }
        }

        let refs = refs_at(t)?;
        let mut saturated = false;
        if k < steps {
            // Feedforward realising the reference trajectory over the next
            // period, plus PI correction in the rotor frame.
            let next = refs_at(t + ts)?;
            let theta_mid = theta + 0.5 * omega * ts;
            let pt = DqOperatingPoint {
                i_sd: refs[0],
                i_sq: refs[1],
                i_f: refs[2],
                di_sd: (next[0] - refs[0]) / ts,
                di_sq: (next[1] - refs[1]) / ts,
                di_f: (next[2] - refs[2]) / ts,
                omega,
            };
            let (_, v_ff) = stationary_point(&sync, &pt, theta_mid)?;
            let [ff_d, ff_q] = to_dq([v_ff[0], v_ff[1]], theta_mid);
            let [m_d, m_q] = to_dq([y[0], y[1]], theta);
            let (v_d, sd) = pi_d.update(refs[0] - m_d, ff_d, ts);
            let (v_q, sq) = pi_q.update(refs[1] - m_q, ff_q, ts);
            let (v_f, sf) = pi_f.update(refs[2] - y[2], v_ff[2], ts);
            saturated = sd || sq || sf;
            let [va, vb] = to_ab([v_d, v_q], theta_mid);
            v = vec![va, vb, v_f];
        }

        // Observability channels from the true state and its right-hand rate.
        let full = [x[0], x[1], x[2], omega, theta];
        let dx = machine.dynamics(&full, &v)?;
        let pt = DqOperatingPoint::from_stationary(&full, &dx)?;
        let det = sm_determinant(&sync, &pt);
        let vec_o = sm_observability_vector_at(&sync, &pt);
        let omega_o = vec_o.omega_o.unwrap_or(f64::NAN);
        let margin = omega - omega_o;
        let m_rms = margin_rms.push(margin);
        let o_rms = omega_o_rms.push(omega_o);
        let violated = !(m_rms >= sc.threshold);

        let mut row = vec![
            t,
            omega,
            wrap_angle(theta),
            x[0],
            x[1],
            x[2],
            pt.i_sd,
            pt.i_sq,
            refs[0],
            refs[1],
            refs[2],
            v[0],
            v[1],
            v[2],
            f64::from(u8::from(saturated)),
            det,
            vec_o.psi_od,
            vec_o.psi_oq,
            omega_o,
            o_rms,
            margin,
            m_rms,
            f64::from(u8::from(violated)),
        ];
        for e in &ekfs {
            match e.estimate() {
                Some(xh) => {
                    row.extend([xh[0], xh[1], xh[2], xh[3], xh[4]]);
                    row.push(wrap_angle(xh[4] - theta));
                    row.push(xh[3] - omega);
                }
                None => row.extend([f64::NAN; 7]),
            }
            row.extend(e.innovation.iter().copied());
            row.push(e.nis);
            row.extend(e.covariance_health());
            row.push(f64::from(u8::from(e.diverged_at.is_some())));
        }
        trace.push(row);

        if k < steps {
            let speed = &sc.speed;
            let u_of_t =
                |s: f64| vec![v[0], v[1], v[2], evaluate_profile(speed, s.min(sc.duration)).unwrap_or(f64::NAN)];
            let dyn_fn = |xs: &[f64], u: &[f64]| -> Result<Vec<f64>> {
                let d = machine.dynamics(&[xs[0], xs[1], xs[2], u[3], xs[3]], &u[..3])?;
                Ok(vec![d[0], d[1], d[2], u[3]])
            };
            for j in 0..n_sub {
                x = rk4_step(dyn_fn, &x, u_of_t, t + j as f64 * sc.dt, sc.dt)?;
            }
        }
    }
    Ok(trace)
}
