//! Stability-constant bookkeeping: sampled bounds on a compact set, the ϖ/ι
//! constants, the sufficient gain conditions, the ultimate-bound radius, and the
//! three-stage gain-selection procedure.

mod bounds;
mod conditions;
mod constants;
mod sampling;
mod selection;

pub use bounds::{
    estimate_bounds, ApproximationSpec, BoundEstimates, CompactSetSpec, ExcitationSpec,
};
pub use conditions::{
    assess_gains, check_sufficient_conditions, ConditionLine, ConditionReport, ConditionStatus,
};
pub use constants::{compute_constants, default_xi, envelopes, ultimate_bound, StabilityConstants};
pub use sampling::ball_samples;
pub use selection::{select_gains, GainSelectionResult, SelectionOptions, StageRecord};
