//! Observability conditions: closed-form determinants, the observability
//! vector of synchronous machines, the induction-machine stator-frequency
//! condition, and a numeric Lie-derivative oracle to check them against.

pub mod dc;
pub mod induction;
pub mod oracle;
pub mod report;
pub mod sync;

pub use dc::dcm_determinant;
pub use induction::{
    field_oriented_point, flux_angular_velocity, im_condition, im_determinant, sensorless_scale_factor,
    unobservability_line, ImCoordinates, ImMode, ImRates, UnobservabilityLineQuery,
};
pub use oracle::{numeric_observability_matrix, NumericObservability, RowSpec, RANK_TOL};
pub use report::{dcm_report, im_report, sm_report, sync_params, ObservabilityReport, DEFAULT_THRESHOLD};
pub use sync::{
    sm_condition_margin, sm_corrected_margin, sm_determinant, sm_observability_vector, sm_observability_vector_at,
    stationary_point, wrsm_ratio, DqOperatingPoint, ObservabilityVector, SyncParams,
};
