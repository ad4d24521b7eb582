//! Synthetic scenario generation, censoring calibration, and Monte Carlo
//! rejection-rate studies.

pub mod checkerboard;
pub mod registry;
mod scalar_fn;
mod study;

pub use checkerboard::{checkerboard_sampler, CheckerboardParams};
pub use registry::{scenario_by_id, scenario_ids};
pub use scalar_fn::{Feature, ScalarFn};
pub use study::{
    calibrate_censoring, rejection_study, sample_scenario, CensoringMode, ConditionalLaw,
    CovariateLaw, RejectionReport, ResolvedScenario, Scenario, StudyConfig, ThetaChoice,
};
