//! Induction machine fed open loop by a rotating voltage vector, with the
//! speed and load dynamics simulated.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::integrate::{rk4_step, step_average};
use super::monitor::TrailingRms;
use super::profile::{evaluate_profile, Segment, SegmentKind, SignalProfile};
use super::summary::{ImChecks, ScenarioChecks};
use super::trace::SimTrace;
use super::{whole_steps, EkfSpec, NoiseSource, NoiseSpec, Tracked};
use crate::ekf::Ekf;
use crate::error::{Error, Result};
use crate::machines::{DriveModel, ImParams, ImState, Machine, UnscaledIm};
use crate::model::StateSpaceModel;
use crate::observability::{flux_angular_velocity, im_condition, im_determinant, ImCoordinates, ImMode, ImRates};

/// Voltage amplitude `v_floor + volts_per_rad * |omega|` for a command frequency `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageLaw {
    pub v_floor: f64,
    pub volts_per_rad: f64,
}

impl VoltageLaw {
    pub fn amplitude(&self, omega: f64) -> f64 {
        self.v_floor + self.volts_per_rad * omega.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImScenario {
    #[serde(default)]
    pub params: ImParams,
    pub duration: f64,
    pub dt: f64,
    /// Sampling period of the trace and of the estimators.
    pub sample_ts: f64,
    /// Time the plant runs under the initial commands before `t = 0` (s).
    #[serde(default)]
    pub preroll: f64,
    /// Angular frequency of the stator voltage vector (rad/s).
    pub frequency: SignalProfile,
    pub voltage: VoltageLaw,
    /// Load torque (N m); viscous friction is added by the plant.
    pub load: SignalProfile,
    pub threshold: f64,
    pub monitor_window: f64,
    /// State coordinates the estimators work in. Initial estimates, `Q`, `R`
    /// and the measurement are expressed in them.
    #[serde(default = "default_coordinates")]
    pub ekf_coordinates: ImCoordinates,
    #[serde(default)]
    pub ekfs: Vec<EkfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

fn default_coordinates() -> ImCoordinates {
    ImCoordinates::Unscaled
}

/// Induction-machine estimator model in either coordinate set.
#[derive(Clone, Copy, Debug)]
enum ImEstimator {
    Scaled(DriveModel),
    Unscaled(UnscaledIm),
}

impl ImEstimator {
    fn inner(&self) -> &dyn StateSpaceModel {
        match self {
            ImEstimator::Scaled(m) => m,
            ImEstimator::Unscaled(m) => m,
        }
    }
}

impl StateSpaceModel for ImEstimator {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner().output_dim()
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner().derivative(x, u)
    }
    fn output_matrix(&self) -> DMatrix<f64> {
        self.inner().output_matrix()
    }
}

/// Zero-frequency dwell of the default scenario.
pub const IM_DWELL: (f64, f64) = (4.0, 6.0);

impl Default for ImScenario {
    fn default() -> Self {
        let duration = 10.0;
        let w = 2.0 * std::f64::consts::PI * 10.0;
        let psi = 0.025;
        let params = ImParams::default();
        let frequency = SignalProfile::piecewise_linear(&[
            (0.0, w),
            (2.0, w),
            (IM_DWELL.0, 0.0),
            (IM_DWELL.1, 0.0),
            (8.0, w),
            (duration, w),
        ])
        .expect("static profile");
        let step = |t_start, t_end, value| Segment { t_start, t_end, kind: SegmentKind::Constant { value } };
        let load = SignalProfile::new(vec![
            step(0.0, 1.0, 0.0),
            step(1.0, 4.5, 5.0),
            Segment { t_start: 4.5, t_end: 5.5, kind: SegmentKind::Ramp { from: 5.0, to: -5.0 } },
            step(5.5, duration, -5.0),
        ])
        .expect("static profile");
        let q = vec![100.0, 100.0, 0.1, 0.1, 1e5, 1e4];
        let x0 = vec![0.0, 0.0, -0.02, -0.02, 50.0, 5.0];
        let ekf = |name: &str, speed_measured: bool| EkfSpec {
            name: name.into(),
            q: q.clone(),
            r: vec![100.0; if speed_measured { 3 } else { 2 }],
            p0: vec![0.1; 6],
            x0: Some(x0.clone()),
            x0_offset: None,
            ts: 5e-5,
            speed_measured,
            overflow_bound: None,
            coordinates: None,
        };
        Self {
            params,
            duration,
            dt: 5e-6,
            sample_ts: 5e-5,
            preroll: 0.0,
            frequency,
            voltage: VoltageLaw { v_floor: params.r_s * psi / params.m, volts_per_rad: psi },
            load,
            threshold: 2.0,
            monitor_window: 5e-3,
            ekf_coordinates: ImCoordinates::Unscaled,
            ekfs: vec![ekf("with_speed", true), ekf("sensorless", false)],
            noise: None,
        }
    }
}

impl ImScenario {
    /// Checks of the run. The dwell is the first zero-frequency window.
    pub fn checks(&self) -> ScenarioChecks {
        let first = |measured: bool| self.ekfs.iter().find(|e| e.speed_measured == measured).map(|e| e.name.clone());
        ScenarioChecks::Im(ImChecks {
            dwell: self.frequency.zero_windows().first().copied(),
            threshold: self.threshold,
            settle: 0.5,
            margin: 0.15,
            with_speed: first(true),
            sensorless: first(false),
        })
    }

    fn coordinates_of(&self, e: &EkfSpec) -> ImCoordinates {
        e.coordinates.unwrap_or(self.ekf_coordinates)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        whole_steps(self.sample_ts, self.dt, "sample_ts")?;
        whole_steps(self.duration, self.sample_ts, "duration")?;
        if !(self.preroll >= 0.0) {
            return Err(Error::Config("preroll must be non-negative".into()));
        }
        for (name, p) in [("frequency", &self.frequency), ("load", &self.load)] {
            if p.start() > 0.0 || p.end() < self.duration {
                return Err(Error::Config(format!("{name} profile must cover [0, {}]", self.duration)));
            }
        }
        for e in &self.ekfs {
            if (e.ts - self.sample_ts).abs() > 1e-12 {
                return Err(Error::Config(format!("ekf {:?}: ts must equal sample_ts", e.name)));
            }
        }
        if !(self.threshold >= 0.0 && self.monitor_window > 0.0) {
            return Err(Error::Config("threshold and monitor window must be positive".into()));
        }
        Ok(())
    }

    /// Stator voltage at `t`; before `t = 0` the initial command is held.
    /// Stator voltage vector commanded at `t`.
    pub fn voltage_at(&self, t: f64) -> Result<[f64; 2]> {
        let (omega, phase) = if t < 0.0 {
            let w = evaluate_profile(&self.frequency, 0.0)?;
            (w, w * t)
        } else {
            let t = t.min(self.duration);
            (evaluate_profile(&self.frequency, t)?, self.frequency.integral(t)?)
        };
        let amp = self.voltage.amplitude(omega);
        Ok([amp * phase.cos(), amp * phase.sin()])
    }

    pub fn load_at(&self, t: f64) -> Result<f64> {
        evaluate_profile(&self.load, t.clamp(0.0, self.duration))
    }
}

/// Physical dynamics with the resistant torque set to load plus friction.
fn plant_derivative(p: &ImParams, x: &[f64], u: &[f64]) -> Vec<f64> {
    let mut xs = [x[0], x[1], x[2], x[3], x[4], 0.0];
    xs[5] = u[2] + p.f_v * x[4] / p.pole_pairs();
    let mut d = p.unscaled_derivative(&xs, [u[0], u[1]]).to_vec();
    d[5] = 0.0;
    d
}

pub fn im_columns(ekf_names: &[&str]) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t",
        "i_sa",
        "i_sb",
        "psi_ra",
        "psi_rb",
        "omega_e",
        "t_r",
        "v_sa",
        "v_sb",
        "omega_cmd",
        "omega_s",
        "domega_e",
        "im_condition",
        "im_condition_rms",
        "det_with_speed",
        "det_sensorless",
        "violated",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in ekf_names {
        for c in [
            "i_sa",
            "i_sb",
            "psi_ra",
            "psi_rb",
            "omega_e",
            "t_r",
            "flux_err",
            "omega_err",
            "innov_sa",
            "innov_sb",
            "innov_omega",
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

pub fn run_im_scenario(sc: &ImScenario) -> Result<SimTrace> {
    sc.validate()?;
    let p = sc.params;
    let ts = sc.sample_ts;
    let n_sub = whole_steps(ts, sc.dt, "sample_ts")?;
    let steps = whole_steps(sc.duration, ts, "duration")?;
    let u_of_t = |t: f64| -> Vec<f64> {
        let v = sc.voltage_at(t).unwrap_or([f64::NAN; 2]);
        vec![v[0], v[1], sc.load_at(t).unwrap_or(f64::NAN)]
    };
    let f = |x: &[f64], u: &[f64]| Ok(plant_derivative(&p, x, u));

    // Physical plant state; entry 5 mirrors the resistant torque.
    let mut x = vec![0.0; 6];
    if sc.preroll > 0.0 {
        let n = (sc.preroll / sc.dt).ceil() as usize;
        let h = sc.preroll / n as f64;
        for j in 0..n {
            x = rk4_step(f, &x, u_of_t, -sc.preroll + j as f64 * h, h)?;
        }
    }
    let resistant = |x: &[f64], t: f64| -> Result<f64> { Ok(sc.load_at(t)? + p.f_v * x[4] / p.pole_pairs()) };
    x[5] = resistant(&x, 0.0)?;

    let mut ekfs = sc
        .ekfs
        .iter()
        .map(|e| {
            let (model, truth) = match sc.coordinates_of(e) {
                ImCoordinates::Scaled => {
                    let machine = Machine::Im(p);
                    let m = if e.speed_measured {
                        DriveModel::with_speed_measurement(machine)
                    } else {
                        DriveModel::new(machine)
                    };
                    (ImEstimator::Scaled(m), p.scale(&x).to_vec())
                }
                ImCoordinates::Unscaled => {
                    (ImEstimator::Unscaled(UnscaledIm { params: p, speed_measured: e.speed_measured }), x.clone())
                }
            };
            let mut cfg = e.config(&truth)?;
            if let (ImCoordinates::Scaled, Some(x0)) = (sc.coordinates_of(e), &e.x0) {
                // Absolute initial estimates are given in physical units.
                cfg.x0 = DVector::from_row_slice(&p.scale(x0));
            }
            Ok(Tracked::new(Ekf::new(model, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut noise = NoiseSource::new(sc.noise.as_ref())?;

    let names: Vec<&str> = sc.ekfs.iter().map(|e| e.name.as_str()).collect();
    let mut trace = SimTrace::new(im_columns(&names));
    let window = ((sc.monitor_window / ts).round() as usize).max(1);
    let mut cond_rms = TrailingRms::new(window);
    let mut v_avg = vec![0.0; 2];

    for k in 0..=steps {
        let t = k as f64 * ts;
        x[5] = resistant(&x, t)?;
        let mut y = vec![x[0], x[1], x[4]];
        if let Some(n) = noise.as_mut() {
            n.corrupt(&mut y);
        }
        if k > 0 {
            for (e, spec) in ekfs.iter_mut().zip(&sc.ekfs) {
                let m = if spec.speed_measured { 3 } else { 2 };
                let mut ye = y[..m].to_vec();
                if sc.coordinates_of(spec) == ImCoordinates::Scaled {
                    ye[0] *= p.l_sigma();
                    ye[1] *= p.l_sigma();
                }
                e.step(&v_avg, &ye, t)?;
            }
        }

        // Observability channels from the true state and its rate.
        let u_now = u_of_t(t);
        let dx = plant_derivative(&p, &x, &u_now);
        let scaled = p.scale(&x);
        let dscaled = p.scale(&dx);
        let state = ImState::from_slice(&scaled)?;
        let rates = ImRates::from_derivative(&dscaled);
        let omega_s = flux_angular_velocity(&state, &rates).unwrap_or(f64::NAN);
        let cond = im_condition(x[4], dx[4], omega_s, &p);
        let c_rms = cond_rms.push(cond);
        let violated = !(c_rms >= sc.threshold);
        let flux = x[2].hypot(x[3]);

        let mut row = vec![
            t,
            x[0],
            x[1],
            x[2],
            x[3],
            x[4],
            x[5],
            u_now[0],
            u_now[1],
            evaluate_profile(&sc.frequency, t.min(sc.duration))?,
            omega_s,
            dx[4],
            cond,
            c_rms,
            im_determinant(ImMode::WithSpeed, &state, &rates, &p),
            im_determinant(ImMode::Sensorless, &state, &rates, &p),
            f64::from(u8::from(violated)),
        ];
        for (e, spec) in ekfs.iter().zip(&sc.ekfs) {
            match e.estimate() {
                Some(xh) => {
                    let xh = match sc.coordinates_of(spec) {
                        ImCoordinates::Scaled => p.unscale(xh.as_slice()),
                        ImCoordinates::Unscaled => {
                            let mut a = [0.0; 6];
                            a.copy_from_slice(xh.as_slice());
                            a
                        }
                    };
                    row.extend(xh.iter().copied());
                    row.push((xh[2] - x[2]).hypot(xh[3] - x[3]) / flux);
                    row.push(xh[4] - x[4]);
                }
                None => row.extend([f64::NAN; 8]),
            }
            row.extend(e.innovation.iter().copied());
            if e.innovation.len() == 2 {
                row.push(f64::NAN);
            }
            row.push(e.nis);
            row.extend(e.covariance_health());
            row.push(f64::from(u8::from(e.diverged_at.is_some())));
        }
        trace.push(row);

        if k < steps {
            v_avg = vec![0.0; 2];
            for j in 0..n_sub {
                let tj = t + j as f64 * sc.dt;
                let avg = step_average(u_of_t, tj, sc.dt);
                v_avg[0] += avg[0] / n_sub as f64;
                v_avg[1] += avg[1] / n_sub as f64;
                x = rk4_step(f, &x, u_of_t, tj, sc.dt)?;
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let sc = ImScenario::default();
        let s = serde_json::to_string(&sc).unwrap();
        assert_eq!(serde_json::from_str::<ImScenario>(&s).unwrap(), sc);
    }

    #[test]
    fn voltage_is_continuous_at_zero() {
        let sc = ImScenario::default();
        let a = sc.voltage_at(-1e-9).unwrap();
        let b = sc.voltage_at(0.0).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
    }
}
