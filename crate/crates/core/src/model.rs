//! The state-space abstraction shared by the simulator, the estimator and the
//! numeric observability oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Relative step used for central-difference Jacobians: `h_i = REL_STEP * max(1, |x_i|)`.
pub const REL_STEP: f64 = 1e-6;

/// A continuous-time model `dx/dt = f(x, u)`, `y = h(x)` with a linear output map.
pub trait StateSpaceModel {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Output matrix `C = dh/dx`. Every model in this crate measures a subset of
    /// its states, so `h(x) = C x` exactly.
    fn output_matrix(&self) -> DMatrix<f64>;

    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        self.output_matrix() * x
    }

    /// Index of an electrical angle state, if any. Such a state is only
    /// meaningful modulo 2*pi.
    fn angle_index(&self) -> Option<usize> {
        None
    }
}

/// Central-difference Jacobian of `g` at `x` with per-component steps
/// `rel_step * max(1, |x_i|)`.
pub fn finite_difference_jacobian<F>(g: F, x: &DVector<f64>, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for i in 0..n {
        let h = rel_step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = g(&xp)?;
        xp[i] = x[i] - h;
        let fm = g(&xp)?;
        xp[i] = x[i];
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    let mut jac = DMatrix::zeros(rows, n);
    for (i, c) in cols.into_iter().enumerate() {
        jac.set_column(i, &c);
    }
    Ok(jac)
}

/// `A = df/dx` by central differences and the exact output matrix `C`.
pub fn jacobians<M: StateSpaceModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = finite_difference_jacobian(|xs| model.derivative(xs, u), x, REL_STEP)?;
    Ok((a, model.output_matrix()))
}

/// Selection matrix picking `indices` out of a `dim`-vector.
pub(crate) fn selection(indices: &[usize], dim: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(indices.len(), dim);
    for (row, &col) in indices.iter().enumerate() {
        c[(row, col)] = 1.0;
    }
    c
}
