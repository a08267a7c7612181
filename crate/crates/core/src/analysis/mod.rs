//! Model analysis: grouped permutation importance and short-term sampling
//! simulation.

pub mod importance;
pub mod sampling;

pub use importance::{
    grouped_permutation_importance, write_importance_csv, GpiOptions, GroupGain,
    GroupImportance,
};
pub use sampling::{
    simulate_sampling, ten_day_headline, write_curve_csv, CurvePoint, SamplingCurve,
    SamplingOptions, Scenario, Strategy,
};
