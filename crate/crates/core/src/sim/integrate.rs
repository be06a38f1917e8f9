//! Fixed-step classical Runge-Kutta integration.

use crate::error::Result;

/// One RK4 step of `dx/dt = f(x, u(t))` from `t` to `t + dt`, with the input
/// sampled at the stage times `t`, `t + dt/2` and `t + dt`.
pub fn rk4_step<F, U>(f: F, x: &[f64], u_of_t: U, t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    U: Fn(f64) -> Vec<f64>,
{
    let (u0, u_mid, u1) = (u_of_t(t), u_of_t(t + 0.5 * dt), u_of_t(t + dt));
    let shifted = |k: &[f64], s: f64| x.iter().zip(k).map(|(xi, ki)| xi + s * ki).collect::<Vec<_>>();
    let k1 = f(x, &u0)?;
    let k2 = f(&shifted(&k1, 0.5 * dt), &u_mid)?;
    let k3 = f(&shifted(&k2, 0.5 * dt), &u_mid)?;
    let k4 = f(&shifted(&k3, dt), &u1)?;
    Ok((0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Simpson average of the input over one step, matching the stage sampling of
/// [`rk4_step`].
pub fn step_average<U: Fn(f64) -> Vec<f64>>(u_of_t: U, t: f64, dt: f64) -> Vec<f64> {
    let (u0, um, u1) = (u_of_t(t), u_of_t(t + 0.5 * dt), u_of_t(t + dt));
    (0..u0.len()).map(|i| (u0[i] + 4.0 * um[i] + u1[i]) / 6.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{ImParams, Machine, WrsmParams};

    fn decay(x: &[f64], _u: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-x[0]])
    }

    #[test]
    fn exponential_step() {
        let x = rk4_step(decay, &[1.0], |_| vec![], 0.0, 0.1).unwrap();
        assert!((x[0] - 0.9048375).abs() < 1e-7);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn zero_dynamics() {
        let x = rk4_step(|x, _| Ok(vec![0.0; x.len()]), &[1.5, -2.0], |_| vec![], 3.0, 0.5).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn simpson_average_of_sine() {
        let avg = step_average(|t| vec![t.sin()], 0.0, 1e-3);
        let exact = (1.0 - 1e-3f64.cos()) / 1e-3;
        assert!((avg[0] - exact).abs() < 1e-14);
    }

    fn integrate(machine: &Machine, x0: &[f64], u: impl Fn(f64) -> Vec<f64> + Copy, t_end: f64, dt: f64) -> Vec<f64> {
        let n = (t_end / dt).round() as usize;
        let mut x = x0.to_vec();
        for k in 0..n {
            x = rk4_step(|x, u| machine.dynamics(x, u), &x, u, k as f64 * dt, dt).unwrap();
        }
        x
    }

    fn order(machine: &Machine, x0: &[f64], u: impl Fn(f64) -> Vec<f64> + Copy, t_end: f64, dt: f64) -> f64 {
        let reference = integrate(machine, x0, u, t_end, dt / 100.0);
        let err = |h: f64| {
            let x = integrate(machine, x0, u, t_end, h);
            x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        (err(dt) / err(dt / 2.0)).log2()
    }

    #[test]
    fn wrsm_self_convergence() {
        let m = Machine::Wrsm(WrsmParams::default());
        let u = |t: f64| vec![5.0 * (300.0 * t).cos(), 5.0 * (300.0 * t).sin(), 26.0];
        let p = order(&m, &[1.0, -2.0, 3.0, 150.0, 0.2], u, 4e-3, 1e-4);
        assert!(p >= 3.9, "order {p}");
    }

    #[test]
    fn im_self_convergence() {
        let params = ImParams::default();
        let m = Machine::Im(params);
        let x0 = params.scale(&[100.0, -50.0, 0.04, 0.02, 60.0, 2.0]);
        let u = |t: f64| vec![3.0 * (60.0 * t).cos(), 3.0 * (60.0 * t).sin()];
        let p = order(&m, &x0, u, 2e-3, 5e-5);
        assert!(p >= 3.9, "order {p}");
    }
}
