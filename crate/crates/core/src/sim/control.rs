//! Discrete PI current controller.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiController {
    pub k_p: f64,
    pub k_i: f64,
    pub integrator: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl PiController {
    pub fn new(k_p: f64, k_i: f64) -> Self {
        Self { k_p, k_i, integrator: 0.0, u_min: f64::NEG_INFINITY, u_max: f64::INFINITY }
    }

    /// Gains placing the closed-loop pole of a first-order `R + sL` plant at
    /// `-bandwidth` by cancelling the plant pole.
    pub fn pole_placement(r: f64, l: f64, bandwidth: f64) -> Self {
        Self::new(l * bandwidth, r * bandwidth)
    }

    pub fn with_limits(mut self, u_min: f64, u_max: f64) -> Self {
        self.u_min = u_min;
        self.u_max = u_max;
        self
    }

    /// Output for `error` plus `feedforward` over a step `dt`, and whether it
    /// saturated. The integrator is frozen while the output saturates.
    pub fn update(&mut self, error: f64, feedforward: f64, dt: f64) -> (f64, bool) {
        let candidate = self.integrator + self.k_i * error * dt;
        let raw = feedforward + self.k_p * error + candidate;
        let out = raw.clamp(self.u_min, self.u_max);
        let saturated = out != raw;
        if !saturated {
            self.integrator = candidate;
        }
        (out, saturated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Step response of `L di/dt = v - R i` under the controller.
    #[test]
    fn first_order_step_response() {
        let (r, l, bw, dt) = (0.01, 0.8e-3, 500.0, 1e-6);
        let mut pi = PiController::pole_placement(r, l, bw);
        let mut i = 0.0;
        let mut t = 0.0;
        while t < 1.0 / bw {
            let (v, _) = pi.update(1.0 - i, 0.0, dt);
            i += dt * (v - r * i) / l;
            t += dt;
        }
        // One time constant: 1 - e^-1.
        assert!((i - (1.0 - (-1.0f64).exp())).abs() < 2e-3, "{i}");
    }

    #[test]
    fn anti_windup_freezes_integrator() {
        let mut pi = PiController::new(1.0, 100.0).with_limits(-1.0, 1.0);
        for _ in 0..100 {
            let (out, sat) = pi.update(10.0, 0.0, 1e-2);
            assert_eq!(out, 1.0);
            assert!(sat);
        }
        assert_eq!(pi.integrator, 0.0);
        let (out, sat) = pi.update(0.5, 0.0, 1e-2);
        assert!(!sat);
        assert!((out - 1.0).abs() < 1e-12);
    }
}
