//! Bayesian optimization with a random-forest surrogate, and the two-stage
//! predictor-then-sampler search built on it.

mod bo;
mod forest;
mod space;
mod stages;

pub use bo::{
    expected_improvement, incumbent, parse_trials, rf_surrogate_fit, suggest_next, BoConfig, Objective, Search, Trial,
    TrialStatus,
};
pub use forest::{ForestConfig, RandomForest};
pub use space::{apply_predictor, apply_sampler, Dimension, Domain, ParamValue, Point, SearchSpace, Stage, RATIO_FLOOR};
pub use stages::*;
