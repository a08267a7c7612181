//! Random hyperparameter search over a declared space.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_from;

use super::HyperParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ParamDist {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    UniformInt { lo: i64, hi: i64 },
    Choice { values: Vec<f64> },
}

/// Named sampling distributions; iteration (and therefore draw order) follows
/// the parameter name, so a space samples identically regardless of how it
/// was assembled.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dists: BTreeMap<String, ParamDist>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, dist: ParamDist) {
        self.dists.insert(name.to_string(), dist);
    }

    pub fn names(&self) -> Vec<&str> {
        self.dists.keys().map(String::as_str).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<HyperParams> {
        let mut out = HyperParams::new();
        for (name, dist) in &self.dists {
            let v = match dist {
                ParamDist::Uniform { lo, hi } => {
                    if !(hi > lo) {
                        return Err(Error::config(format!("empty uniform range for {name}")));
                    }
                    rng.gen_range(*lo..*hi)
                }
                ParamDist::LogUniform { lo, hi } => {
                    if !(*lo > 0.0 && hi > lo) {
                        return Err(Error::config(format!(
                            "log-uniform range for {name} must satisfy 0 < lo < hi"
                        )));
                    }
                    rng.gen_range(lo.ln()..hi.ln()).exp()
                }
                ParamDist::UniformInt { lo, hi } => {
                    if hi < lo {
                        return Err(Error::config(format!("empty integer range for {name}")));
                    }
                    rng.gen_range(*lo..=*hi) as f64
                }
                ParamDist::Choice { values } => {
                    if values.is_empty() {
                        return Err(Error::config(format!("empty choice set for {name}")));
                    }
                    values[rng.gen_range(0..values.len())]
                }
            };
            out.insert(name.clone(), v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trial {
    pub params: HyperParams,
    /// CV score of the trial; `None` when the evaluation failed.
    pub score: Option<f64>,
    /// The failure diagnostic, for failed trials.
    pub error: Option<String>,
}

/// Every candidate evaluated during a search, with the index of the winner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialLog {
    pub trials: Vec<Trial>,
    pub best_index: usize,
}

const TAG_SEARCH: u64 = 0x7365_6172; // "sear"

/// Draw `n_trials` candidates and score each with `eval` (lower is better).
/// Ties keep the earliest trial. The evaluator receives the trial index so it
/// can derive per-trial seeds. A trial whose evaluation fails is logged as
/// failed and the search continues; it is an error only when every trial
/// fails.
pub fn random_search(
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    mut eval: impl FnMut(usize, &HyperParams) -> Result<f64>,
) -> Result<(HyperParams, TrialLog)> {
    if n_trials == 0 {
        return Err(Error::config("random search needs at least one trial"));
    }
    let mut rng = rng_from(seed, &[TAG_SEARCH]);
    let mut trials: Vec<Trial> = Vec::with_capacity(n_trials);
    let mut best_index: Option<usize> = None;
    for t in 0..n_trials {
        let params = if space.is_empty() {
            HyperParams::new()
        } else {
            space.sample(&mut rng)?
        };
        let outcome = eval(t, &params).and_then(|s| {
            if s.is_finite() {
                Ok(s)
            } else {
                Err(Error::runtime("non-finite score"))
            }
        });
        match outcome {
            Ok(score) => {
                trials.push(Trial { params, score: Some(score), error: None });
                if best_index.map_or(true, |b| score < trials[b].score.unwrap()) {
                    best_index = Some(t);
                }
            }
            Err(e) => {
                log::warn!("random search trial {t} failed: {e}");
                trials.push(Trial {
                    params,
                    score: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let best_index = best_index
        .ok_or_else(|| Error::runtime("every random search trial failed"))?;
    Ok((trials[best_index].params.clone(), TrialLog { trials, best_index }))
}
