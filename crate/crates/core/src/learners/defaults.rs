//! Versioned hyperparameter defaults and search ranges. Changing anything
//! here changes results, so bump the version when you do.

use super::search::{ParamDist, SearchSpace};
use super::{EstimatorKind, HyperParams};

pub const HYPERPARAMETER_CONFIG_VERSION: u32 = 1;

pub fn allowed_params(kind: EstimatorKind) -> &'static [&'static str] {
    match kind {
        EstimatorKind::BaselineMean | EstimatorKind::Linear => &[],
        EstimatorKind::DecisionTree => &["max_depth", "min_samples_split", "min_samples_leaf"],
        EstimatorKind::RandomForest => &[
            "n_trees",
            "max_depth",
            "min_samples_split",
            "min_samples_leaf",
            "max_features_frac",
            "bootstrap",
        ],
        EstimatorKind::GradientBoosting => &[
            "n_trees",
            "learning_rate",
            "max_depth",
            "min_samples_split",
            "min_samples_leaf",
            "subsample",
        ],
        EstimatorKind::RegularizedBoosting => &[
            "n_trees",
            "learning_rate",
            "max_depth",
            "lambda",
            "gamma",
            "min_child_weight",
            "colsample_bytree",
            "subsample",
        ],
    }
}

pub fn default_params(kind: EstimatorKind) -> HyperParams {
    let pairs: &[(&str, f64)] = match kind {
        EstimatorKind::BaselineMean | EstimatorKind::Linear => &[],
        EstimatorKind::DecisionTree => &[
            ("max_depth", 12.0),
            ("min_samples_split", 10.0),
            ("min_samples_leaf", 5.0),
        ],
        EstimatorKind::RandomForest => &[
            ("n_trees", 100.0),
            ("max_depth", 12.0),
            ("min_samples_split", 5.0),
            ("min_samples_leaf", 2.0),
            ("max_features_frac", 0.333),
            ("bootstrap", 1.0),
        ],
        EstimatorKind::GradientBoosting => &[
            ("n_trees", 150.0),
            ("learning_rate", 0.1),
            ("max_depth", 3.0),
            ("min_samples_split", 10.0),
            ("min_samples_leaf", 5.0),
            ("subsample", 1.0),
        ],
        EstimatorKind::RegularizedBoosting => &[
            ("n_trees", 150.0),
            ("learning_rate", 0.1),
            ("max_depth", 6.0),
            ("lambda", 1.0),
            ("gamma", 0.0),
            ("min_child_weight", 1.0),
            ("colsample_bytree", 0.8),
            ("subsample", 1.0),
        ],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn default_search_space(kind: EstimatorKind) -> SearchSpace {
    let mut s = SearchSpace::new();
    match kind {
        EstimatorKind::BaselineMean | EstimatorKind::Linear => {}
        EstimatorKind::DecisionTree => {
            s.add("max_depth", ParamDist::UniformInt { lo: 2, hi: 20 });
            s.add("min_samples_split", ParamDist::UniformInt { lo: 2, hi: 40 });
            s.add("min_samples_leaf", ParamDist::UniformInt { lo: 1, hi: 20 });
        }
        EstimatorKind::RandomForest => {
            s.add("n_trees", ParamDist::UniformInt { lo: 50, hi: 300 });
            s.add("max_depth", ParamDist::UniformInt { lo: 4, hi: 20 });
            s.add("min_samples_leaf", ParamDist::UniformInt { lo: 1, hi: 10 });
            s.add("max_features_frac", ParamDist::Uniform { lo: 0.2, hi: 1.0 });
        }
        EstimatorKind::GradientBoosting => {
            s.add("n_trees", ParamDist::UniformInt { lo: 50, hi: 300 });
            s.add("learning_rate", ParamDist::LogUniform { lo: 0.01, hi: 0.3 });
            s.add("max_depth", ParamDist::UniformInt { lo: 2, hi: 8 });
            s.add("subsample", ParamDist::Uniform { lo: 0.5, hi: 1.0 });
        }
        EstimatorKind::RegularizedBoosting => {
            s.add("n_trees", ParamDist::UniformInt { lo: 50, hi: 300 });
            s.add("learning_rate", ParamDist::LogUniform { lo: 0.01, hi: 0.3 });
            s.add("max_depth", ParamDist::UniformInt { lo: 2, hi: 10 });
            s.add("lambda", ParamDist::LogUniform { lo: 0.1, hi: 10.0 });
            s.add("gamma", ParamDist::Uniform { lo: 0.0, hi: 5.0 });
            s.add("min_child_weight", ParamDist::LogUniform { lo: 0.5, hi: 8.0 });
            s.add("colsample_bytree", ParamDist::Uniform { lo: 0.5, hi: 1.0 });
            s.add("subsample", ParamDist::Uniform { lo: 0.5, hi: 1.0 });
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_only_use_allowed_names() {
        for kind in EstimatorKind::ALL {
            let allowed = allowed_params(kind);
            for name in default_params(kind).keys() {
                assert!(allowed.contains(&name.as_str()), "{kind:?}: {name}");
            }
            for name in default_search_space(kind).names() {
                assert!(allowed.contains(&name), "{kind:?} search: {name}");
            }
        }
    }
}
