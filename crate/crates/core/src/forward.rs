//! Greedy forward selection scored by multivariate MI, halted by a
//! permutation test on the best candidate of each step.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_mi, KsgConfig, MiQuery};
use crate::resampling::{p_value, percentile, permutation_null, MiDistribution, PValue, MIN_PERMUTATIONS};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_PERMUTATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub ksg: KsgConfig,
    pub alpha: f64,
    pub permutations: usize,
    /// Upper bound on the number of selected features; `None` means `d`.
    pub max_features: Option<usize>,
    /// Keep walking the greedy path after the first failed test, up to
    /// `max_features`. Later steps are recorded but never accepted.
    pub full_path: bool,
}

impl ForwardConfig {
    pub fn new(k: usize) -> Self {
        ForwardConfig {
            ksg: KsgConfig::new(k),
            alpha: DEFAULT_ALPHA,
            permutations: DEFAULT_PERMUTATIONS,
            max_features: None,
            full_path: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub feature: usize,
    pub mi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardIteration {
    /// 1-based step number.
    pub step: usize,
    pub candidate_scores: Vec<CandidateScore>,
    pub chosen: usize,
    pub chosen_mi: f64,
    /// `(1 − alpha)` nearest-rank percentile of the permutation null.
    pub threshold: f64,
    pub p_value: PValue,
    pub null: MiDistribution,
    /// `chosen_mi > threshold`.
    pub significant: bool,
    /// Significant and no earlier step failed; equals `significant` unless
    /// the walk continued past a failure.
    pub accepted: bool,
    /// MI evaluations performed up to and including this step.
    pub mi_evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdFailed,
    MaxFeaturesReached,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub iterations: Vec<ForwardIteration>,
    pub selected: Vec<usize>,
    pub stop_reason: StopReason,
    pub mi_evaluations: usize,
    pub n_features: usize,
    pub config: ForwardConfig,
}

impl ForwardTrace {
    /// Closed form of the evaluation count: each performed step `t` scores
    /// the `d − t + 1` remaining candidates and draws `P` null samples.
    pub fn expected_evaluations(&self) -> usize {
        expected_evaluations(self.n_features, self.config.permutations, self.iterations.len())
    }
}

/// `Σ_{t=1..steps} (d − t + 1 + P)`.
pub fn expected_evaluations(d: usize, permutations: usize, steps: usize) -> usize {
    (1..=steps).map(|t| d - t + 1 + permutations).sum()
}

/// Runs the forward search on all rows of `data`.
///
/// Each step scores every remaining feature `j` by `MI(S ∪ {X_j}; Y)`, takes
/// the best (smallest index on ties), builds its permutation null with one
/// `u64` drawn from `rng`, and accepts it iff its MI exceeds the `(1 − alpha)`
/// percentile of that null. The search stops at the first rejection (which
/// is kept in the trace), at `max_features`, or when no candidates remain.
pub fn forward_select<R: RngCore + ?Sized>(
    data: &Dataset,
    config: &ForwardConfig,
    rng: &mut R,
) -> Result<ForwardTrace> {
    let d = data.n_features();
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1), got {}", config.alpha)));
    }
    if config.permutations < MIN_PERMUTATIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {}",
            config.permutations
        )));
    }
    let max_features = config.max_features.unwrap_or(d);
    if max_features == 0 || max_features > d {
        return Err(Error::invalid(format!(
            "max_features must be in 1..={d}, got {max_features}"
        )));
    }
    if config.ksg.k == 0 || config.ksg.k >= data.n_rows() {
        return Err(Error::invalid(format!(
            "k = {} is not valid for {} rows",
            config.ksg.k,
            data.n_rows()
        )));
    }

    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let mut path: Vec<usize> = Vec::new();
    let mut selected = Vec::new();
    let mut iterations: Vec<ForwardIteration> = Vec::new();
    let mut evaluations = 0;
    let mut failed = false;
    let mut stop_reason = StopReason::Exhausted;

    while path.len() < max_features {
        let step = path.len() + 1;
        let remaining: Vec<usize> = (0..d).filter(|j| !path.contains(j)).collect();
        let candidate_scores = remaining
            .par_iter()
            .map(|&j| {
                let mut features = path.clone();
                features.push(j);
                let q = MiQuery::new(features, config.ksg)?;
                Ok(CandidateScore {
                    feature: j,
                    mi: estimate_mi(data, &rows, &q)?.value,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        evaluations += candidate_scores.len();

        let best = candidate_scores
            .iter()
            .copied()
            .reduce(|a, b| if b.mi > a.mi { b } else { a })
            .expect("at least one candidate remains");

        let null = permutation_null(data, &path, best.feature, config.ksg, config.permutations, rng)?;
        evaluations += null.len();
        let threshold = percentile(&null, 1.0 - config.alpha)?;
        let p = p_value(best.mi, &null)?;
        let significant = best.mi > threshold;
        let accepted = significant && !failed;

        iterations.push(ForwardIteration {
            step,
            candidate_scores,
            chosen: best.feature,
            chosen_mi: best.mi,
            threshold,
            p_value: p,
            null,
            significant,
            accepted,
            mi_evaluations: evaluations,
        });
        path.push(best.feature);
        if accepted {
            selected.push(best.feature);
        } else if !failed {
            failed = true;
            stop_reason = StopReason::ThresholdFailed;
            if !config.full_path {
                break;
            }
        }
    }
    if !failed {
        stop_reason = if path.len() == d {
            StopReason::Exhausted
        } else {
            StopReason::MaxFeaturesReached
        };
    }

    Ok(ForwardTrace {
        iterations,
        selected,
        stop_reason,
        mi_evaluations: evaluations,
        n_features: d,
        config: *config,
    })
}

/// The prefix of the greedy path whose MI is largest (shortest on ties),
/// ignoring the permutation test.
pub fn max_mi_subset(trace: &ForwardTrace) -> Vec<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in trace.iterations.iter().enumerate() {
        if best.is_none_or(|(_, mi)| it.chosen_mi > mi) {
            best = Some((i, it.chosen_mi));
        }
    }
    match best {
        Some((i, _)) => trace.iterations[..=i].iter().map(|it| it.chosen).collect(),
        None => Vec::new(),
    }
}
