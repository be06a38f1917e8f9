//! Discrete-time extended Kalman filter with explicit Euler discretization and
//! a Joseph-form correction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::machines::wrap_angle;
use crate::model::{jacobians, StateSpaceModel};

/// Estimates or covariances beyond this magnitude are reported as divergence.
pub const DEFAULT_OVERFLOW_BOUND: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct EkfConfig {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p0: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub ts: f64,
    pub overflow_bound: f64,
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Config(format!("{name} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    if m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
        return Err(Error::Config(format!("{name} must be positive definite")));
    }
    Ok(())
}

impl EkfConfig {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, p0: DMatrix<f64>, x0: DVector<f64>, ts: f64) -> Result<Self> {
        check_spd("Q", &q)?;
        check_spd("R", &r)?;
        check_spd("P0", &p0)?;
        let n = x0.len();
        if q.nrows() != n || p0.nrows() != n {
            return Err(Error::Config(format!("Q and P0 must be {n}x{n} to match x0")));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::Config(format!("Ts must be positive, got {ts}")));
        }
        Ok(Self { q, r, p0, x0, ts, overflow_bound: DEFAULT_OVERFLOW_BOUND })
    }

    /// Diagonal `Q`, `R` and `P0`.
    pub fn diagonal(q: &[f64], r: &[f64], p0: &[f64], x0: &[f64], ts: f64) -> Result<Self> {
        let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_row_slice(v));
        Self::new(diag(q), diag(r), diag(p0), DVector::from_row_slice(x0), ts)
    }

    pub fn with_overflow_bound(mut self, bound: f64) -> Self {
        self.overflow_bound = bound;
        self
    }
}

/// Result of one correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    /// `y - h(x_prior)`.
    pub innovation: DVector<f64>,
    /// Normalized innovation squared, `nu^T S^-1 nu`.
    pub nis: f64,
}

/// Filter state. Every operation consumes the instance and returns the next one.
#[derive(Clone, Debug)]
pub struct Ekf<M> {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
    pub config: EkfConfig,
    pub model: M,
}

impl<M: StateSpaceModel> Ekf<M> {
    pub fn new(model: M, config: EkfConfig) -> Result<Self> {
        let n = model.state_dim();
        if config.x0.len() != n {
            return Err(Error::Config(format!("x0 has {} entries, the model has {n} states", config.x0.len())));
        }
        if config.r.nrows() != model.output_dim() {
            return Err(Error::Config(format!("R must be {0}x{0} to match the measurement", model.output_dim())));
        }
        Ok(Self { x: config.x0.clone(), p: config.p0.clone(), config, model })
    }

    fn check_bounds(&self) -> Result<()> {
        let bound = self.config.overflow_bound;
        // Covariance entries are numbered after the state entries.
        let entries = self.x.iter().chain(self.p.iter());
        for (index, &value) in entries.enumerate() {
            if !value.is_finite() || value.abs() > bound {
                return Err(Error::Divergence { index, value: value.abs(), bound });
            }
        }
        Ok(())
    }

    // Rounding in the products leaves P slightly asymmetric; over long runs
    // with large Q that drift reaches 1e-7.
    fn symmetrize(&mut self) {
        let n = self.p.nrows();
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (self.p[(i, j)] + self.p[(j, i)]);
                self.p[(i, j)] = m;
                self.p[(j, i)] = m;
            }
        }
    }

    /// `x <- x + Ts f(x, u)`, `P <- F P F^T + Q` with `F = I + Ts A`.
    pub fn predict(mut self, u: &DVector<f64>) -> Result<Self> {
        if u.len() != self.model.input_dim() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("input must be finite and match the model".into()));
        }
        let ts = self.config.ts;
        let (a, _) = jacobians(&self.model, &self.x, u)?;
        let dx = self.model.derivative(&self.x, u)?;
        let n = self.x.len();
        let f = DMatrix::identity(n, n) + a * ts;
        self.x += dx * ts;
        self.p = &f * &self.p * f.transpose() + &self.config.q;
        self.symmetrize();
        if let Some(k) = self.model.angle_index() {
            self.x[k] = wrap_angle(self.x[k]);
        }
        self.check_bounds()?;
        Ok(self)
    }

    /// Joseph-form correction with measurement `y`.
    pub fn update(mut self, y: &DVector<f64>) -> Result<(Self, Correction)> {
        if y.len() != self.model.output_dim() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("measurement must be finite and match the output".into()));
        }
        let c = self.model.output_matrix();
        let innovation = y - self.model.output(&self.x);
        let s = &c * &self.p * c.transpose() + &self.config.r;
        let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
        // K = P C^T S^-1, computed as (S^-1 C P)^T since S and P are symmetric.
        let gain = chol.solve(&(&c * &self.p)).transpose();
        let nis = innovation.dot(&chol.solve(&innovation));
        self.x += &gain * &innovation;
        let n = self.x.len();
        let ikc = DMatrix::identity(n, n) - &gain * &c;
        self.p = &ikc * &self.p * ikc.transpose() + &gain * &self.config.r * gain.transpose();
        self.symmetrize();
        if let Some(k) = self.model.angle_index() {
            self.x[k] = wrap_angle(self.x[k]);
        }
        self.check_bounds()?;
        Ok((self, Correction { innovation, nis }))
    }

    pub fn step(self, u: &DVector<f64>, y: &DVector<f64>) -> Result<(Self, Correction)> {
        self.predict(u)?.update(y)
    }

    /// `max |P - P^T|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.p - self.p.transpose()).amax()
    }

    /// Smallest and largest eigenvalue of the symmetric part of `P`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let sym = (&self.p + self.p.transpose()) * 0.5;
        let ev = sym.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{DcmParams, DriveModel, Machine};
    use crate::model::selection;
    use approx::assert_relative_eq;

    /// `dx/dt = a x`, all states measured.
    #[derive(Clone)]
    struct Linear {
        a: f64,
        n: usize,
    }

    impl StateSpaceModel for Linear {
        fn state_dim(&self) -> usize {
            self.n
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            self.n
        }
        fn derivative(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(x * self.a)
        }
        fn output_matrix(&self) -> DMatrix<f64> {
            selection(&(0..self.n).collect::<Vec<_>>(), self.n)
        }
    }

    fn scalar(q: f64, r: f64, p0: f64, x0: f64) -> Ekf<Linear> {
        let cfg = EkfConfig::diagonal(&[q], &[r], &[p0], &[x0], 1e-3).unwrap();
        Ekf::new(Linear { a: 0.0, n: 1 }, cfg).unwrap()
    }

    fn u0() -> DVector<f64> {
        DVector::from_vec(vec![0.0])
    }

    #[test]
    fn rejects_bad_config() {
        let i = DMatrix::<f64>::identity(2, 2);
        let x0 = DVector::zeros(2);
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(EkfConfig::new(not_pd, i.clone(), i.clone(), x0.clone(), 1e-4).is_err());
        let not_sym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(EkfConfig::new(i.clone(), not_sym, i.clone(), x0.clone(), 1e-4).is_err());
        assert!(EkfConfig::new(i.clone(), i.clone(), i.clone(), x0, 0.0).is_err());
    }

    #[test]
    fn predict_adds_q() {
        let f = scalar(0.3, 1.0, 1.0, 2.0).predict(&u0()).unwrap();
        assert_eq!(f.x[0], 2.0);
        assert_relative_eq!(f.p[(0, 0)], 1.3, epsilon = 1e-15);
    }

    #[test]
    fn scalar_gain_is_one_half() {
        let f = scalar(1e-300, 1.0, 1.0, 0.0);
        let (g, corr) = f.update(&DVector::from_vec(vec![2.0])).unwrap();
        assert_relative_eq!(g.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_eq!(corr.innovation[0], 2.0);
        assert_relative_eq!(corr.nis, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn huge_r_leaves_estimate() {
        let (g, _) = scalar(1.0, 1e12, 1.0, 0.5).update(&DVector::from_vec(vec![100.0])).unwrap();
        assert!((g.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn tiny_r_snaps_to_measurement() {
        let cfg = EkfConfig::diagonal(&[1.0; 3], &[1e-9; 3], &[1e6; 3], &[0.0; 3], 1e-3).unwrap();
        let f = Ekf::new(Linear { a: -1.0, n: 3 }, cfg).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let (g, _) = f.update(&y).unwrap();
        assert!((g.x - y).amax() < 1e-8);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = EkfConfig::diagonal(&[1.0], &[1.0], &[1.0], &[1.0], 1.0).unwrap().with_overflow_bound(1e3);
        let mut f = Ekf::new(Linear { a: 10.0, n: 1 }, cfg).unwrap();
        let err = loop {
            match f.predict(&u0()) {
                Ok(next) => f = next,
                Err(e) => break e,
            }
        };
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn pm_dcm_converges() {
        let p = DcmParams::pm_example();
        let machine = Machine::Dcm(p);
        let ts = 1e-4;
        let mut x = [2.0, 150.0, 0.2];
        let cfg = EkfConfig::diagonal(&[1.0; 3], &[1.0], &[1.0; 3], &[0.0, 0.0, 0.0], ts).unwrap();
        let mut f = Ekf::new(DriveModel::new(machine), cfg).unwrap();
        let err0 = (DVector::from_row_slice(&x) - &f.x).norm();
        let u = DVector::from_vec(vec![24.0]);
        for _ in 0..2000 {
            let dx = machine.dynamics(&x, &[24.0]).unwrap();
            for k in 0..3 {
                x[k] += ts * dx[k];
            }
            f = f.step(&u, &DVector::from_vec(vec![x[0]])).unwrap().0;
        }
        let err = (DVector::from_row_slice(&x) - &f.x).norm();
        assert!(err < 0.01 * err0, "{err} vs {err0}");
    }

    #[test]
    fn covariance_stays_symmetric_and_psd() {
        let machine = Machine::Dcm(DcmParams::series_example());
        let cfg = EkfConfig::diagonal(&[1.0, 10.0, 0.1], &[1.0], &[1.0; 3], &[1.0, 10.0, 0.0], 1e-4).unwrap();
        let mut f = Ekf::new(DriveModel::new(machine), cfg).unwrap();
        let mut x = [5.0, 50.0, 0.1];
        for k in 0..100_000 {
            let v = 20.0 + 5.0 * (k as f64 * 1e-3).sin();
            let dx = machine.dynamics(&x, &[v]).unwrap();
            for i in 0..3 {
                x[i] += 1e-4 * dx[i];
            }
            f = f.step(&DVector::from_vec(vec![v]), &DVector::from_vec(vec![x[0]])).unwrap().0;
            assert!(f.asymmetry() < 1e-9);
            if k % 100 == 0 {
                let (lo, hi) = f.eigen_range();
                assert!(lo >= -1e-9 * hi);
            }
        }
    }
}
