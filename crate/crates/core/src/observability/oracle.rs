//! Numeric observability matrix built from recursively differentiated outputs.
//!
//! `L^0 h = h`, `L^{k+1} h = (d L^k h / dx) f + (d L^k h / du) du/dt`, with every
//! Jacobian taken by a five-point central stencil. Input derivatives beyond the first
//! order are not modelled, so orders above two ignore `d2u/dt2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;

/// Relative step of the five-point stencil. Its truncation error is fourth
/// order, so a wide step keeps nested round-off small.
const ORACLE_STEP: f64 = 1e-3;

fn stencil_jacobian<F>(g: F, x: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = ORACLE_STEP * x[i].abs().max(1.0);
        let mut at = |k: f64| {
            xp[i] = x[i] + k * h;
            g(&xp)
        };
        let (f2, f1, m1, m2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        xp[i] = x[i];
        cols.push((8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    let mut jac = DMatrix::zeros(rows, x.len());
    for (i, c) in cols.into_iter().enumerate() {
        jac.set_column(i, &c);
    }
    Ok(jac)
}

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Which output components and derivative orders are stacked, row by row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowSpec {
    /// `(output component, derivative order)` per row.
    pub rows: Vec<(usize, usize)>,
}

impl RowSpec {
    /// All listed outputs at every order `0..=max_order`, grouped by order.
    pub fn orders(outputs: &[usize], max_order: usize) -> Self {
        let rows = (0..=max_order).flat_map(|k| outputs.iter().map(move |&j| (j, k))).collect();
        Self { rows }
    }

    /// Synchronous machines: every measured current plus the first derivatives
    /// of the two stator currents.
    pub fn synchronous(n_currents: usize) -> Self {
        let mut rows: Vec<_> = (0..n_currents).map(|j| (j, 0)).collect();
        rows.extend([(0, 1), (1, 1)]);
        Self { rows }
    }

    pub fn max_order(&self) -> usize {
        self.rows.iter().map(|r| r.1).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericObservability {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Ratio of the extreme singular values (infinite when rank deficient to zero).
    pub condition_number: f64,
}

impl NumericObservability {
    pub fn determinant(&self) -> Result<f64> {
        if !self.matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "observability matrix is {}x{}, a determinant needs a square matrix",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        Ok(self.matrix.determinant())
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct LieChain<'a, M: ?Sized> {
    model: &'a M,
    du: Option<&'a DVector<f64>>,
}

impl<M: StateSpaceModel + ?Sized> LieChain<'_, M> {
    fn lie(&self, order: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if order == 0 {
            return Ok(self.model.output(x));
        }
        if order == 1 {
            // Outputs are linear in the state.
            return Ok(self.model.output_matrix() * self.model.derivative(x, u)?);
        }
        let prev = |xs: &DVector<f64>| self.lie(order - 1, xs, u);
        let jx = stencil_jacobian(prev, x)?;
        let mut out = jx * self.model.derivative(x, u)?;
        if let (Some(du), true) = (self.du, order >= 2) {
            let by_u = |us: &DVector<f64>| self.lie(order - 1, x, us);
            let ju = stencil_jacobian(by_u, u)?;
            out += ju * du;
        }
        Ok(out)
    }
}

/// Observability matrix of `model` at `(x, u, du/dt)` with rows selected by `spec`.
pub fn numeric_observability_matrix<M: StateSpaceModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
    du: Option<&DVector<f64>>,
    spec: &RowSpec,
) -> Result<NumericObservability> {
    let n = model.state_dim();
    if x.len() != n || u.len() != model.input_dim() {
        return Err(Error::DimensionMismatch("state or input length does not match the model".into()));
    }
    if let Some(bad) = spec.rows.iter().find(|r| r.0 >= model.output_dim()) {
        return Err(Error::DimensionMismatch(format!("row spec refers to output {} of {}", bad.0, model.output_dim())));
    }
    let chain = LieChain { model, du };
    let c = model.output_matrix();
    let mut jac_by_order: Vec<Option<DMatrix<f64>>> = vec![None; spec.max_order() + 1];
    for &(_, k) in &spec.rows {
        if jac_by_order[k].is_none() {
            let jk = if k == 0 { c.clone() } else { stencil_jacobian(|xs| chain.lie(k, xs, u), x)? };
            jac_by_order[k] = Some(jk);
        }
    }
    let mut matrix = DMatrix::zeros(spec.rows.len(), n);
    for (r, &(j, k)) in spec.rows.iter().enumerate() {
        let jk = jac_by_order[k].as_ref().expect("computed above");
        matrix.set_row(r, &jk.row(j));
    }
    let singular_values: Vec<f64> = matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    let smin = singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let rank = singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(NumericObservability { matrix, singular_values, rank, condition_number })
}
