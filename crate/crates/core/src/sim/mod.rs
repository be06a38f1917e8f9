//! Fixed-step simulation of the drive scenarios with estimators and
//! observability channels running alongside.

pub mod control;
pub mod im;
pub mod integrate;
pub mod monitor;
pub mod profile;
pub mod summary;
pub mod trace;
pub mod wrsm;

pub use control::PiController;
pub use im::{run_im_scenario, ImScenario, VoltageLaw};
pub use integrate::{rk4_step, step_average};
pub use monitor::{intervals, TrailingRms};
pub use profile::{evaluate_profile, Segment, SegmentKind, SignalProfile, Sinusoid};
pub use summary::{settle_time, summarize, ErrorStats, ImChecks, RunSummary, ScenarioChecks, WrsmChecks};
pub use trace::SimTrace;
pub use wrsm::{run_wrsm_scenario, WrsmScenario};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ekf::{Ekf, EkfConfig};
use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::observability::ImCoordinates;

/// Estimator block of a scenario. Matrices are diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EkfSpec {
    pub name: String,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub p0: Vec<f64>,
    /// Absolute initial estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Initial estimate as an offset from the true initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_offset: Option<Vec<f64>>,
    pub ts: f64,
    #[serde(default)]
    pub speed_measured: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overflow_bound: Option<f64>,
    /// Induction machine only: overrides the scenario-wide estimator coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<ImCoordinates>,
}

impl EkfSpec {
    pub(crate) fn config(&self, truth: &[f64]) -> Result<EkfConfig> {
        let x0 = match (&self.x0, &self.x0_offset) {
            (Some(x0), None) => x0.clone(),
            (None, Some(off)) if off.len() == truth.len() => truth.iter().zip(off).map(|(a, b)| a + b).collect(),
            (None, None) => truth.to_vec(),
            _ => {
                return Err(Error::Config(format!(
                    "ekf {:?}: give at most one of x0 and x0_offset, sized like the state",
                    self.name
                )))
            }
        };
        let cfg = EkfConfig::diagonal(&self.q, &self.r, &self.p0, &x0, self.ts)
            .map_err(|e| Error::Config(format!("ekf {:?}: {e}", self.name)))?;
        Ok(match self.overflow_bound {
            Some(b) => cfg.with_overflow_bound(b),
            None => cfg,
        })
    }
}

/// Optional white measurement noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation per measured channel, in physical units.
    pub std: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

pub(crate) struct NoiseSource {
    rng: ChaCha8Rng,
    dists: Vec<Normal<f64>>,
}

impl NoiseSource {
    pub(crate) fn new(spec: Option<&NoiseSpec>) -> Result<Option<Self>> {
        let Some(spec) = spec else { return Ok(None) };
        let dists = spec
            .std
            .iter()
            .map(|&s| Normal::new(0.0, s).map_err(|e| Error::Config(format!("noise std {s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Self { rng: ChaCha8Rng::seed_from_u64(spec.seed), dists }))
    }

    pub(crate) fn corrupt(&mut self, y: &mut [f64]) {
        for (v, d) in y.iter_mut().zip(&self.dists) {
            *v += d.sample(&mut self.rng);
        }
    }
}

/// An estimator in flight. After divergence it keeps reporting `NaN`.
pub(crate) struct Tracked<M> {
    pub ekf: Option<Ekf<M>>,
    pub diverged_at: Option<f64>,
    pub innovation: Vec<f64>,
    pub nis: f64,
}

impl<M: StateSpaceModel + Clone> Tracked<M> {
    pub(crate) fn new(ekf: Ekf<M>) -> Self {
        let m = ekf.model.output_dim();
        Self { ekf: Some(ekf), diverged_at: None, innovation: vec![0.0; m], nis: 0.0 }
    }

    pub(crate) fn step(&mut self, u: &[f64], y: &[f64], t: f64) -> Result<()> {
        let Some(ekf) = self.ekf.take() else { return Ok(()) };
        match ekf.step(&DVector::from_row_slice(u), &DVector::from_row_slice(y)) {
            Ok((next, corr)) => {
                self.innovation = corr.innovation.iter().copied().collect();
                self.nis = corr.nis;
                self.ekf = Some(next);
                Ok(())
            }
            Err(Error::Divergence { .. }) | Err(Error::SingularInnovation) => {
                self.diverged_at = Some(t);
                self.innovation.iter_mut().for_each(|v| *v = f64::NAN);
                self.nis = f64::NAN;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    pub(crate) fn estimate(&self) -> Option<&DVector<f64>> {
        self.ekf.as_ref().map(|e| &e.x)
    }

    /// `[max |P - P^T|, min eig / max eig]`.
    pub(crate) fn covariance_health(&self) -> [f64; 2] {
        match &self.ekf {
            Some(e) => {
                let (lo, hi) = e.eigen_range();
                [e.asymmetry(), lo / hi]
            }
            None => [f64::NAN, f64::NAN],
        }
    }
}

/// Number of `dt` steps in `span`, which must be a whole multiple.
pub(crate) fn whole_steps(span: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (span / dt).round();
    if !(dt > 0.0) || n < 1.0 || (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(Error::Config(format!("{what} ({span}) must be a positive whole multiple of {dt}")));
    }
    Ok(n as usize)
}
