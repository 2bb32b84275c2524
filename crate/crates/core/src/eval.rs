//! Nearest-neighbor regression as a downstream check on a feature subset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{chebyshev, neighbor_order, order_free_moments};

pub const DEFAULT_K_REG: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_subset: Vec<usize>,
    pub rmse: f64,
    pub k_reg: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Test RMSE of a `k_reg`-nearest-neighbor regressor restricted to
/// `features`.
///
/// The selected columns are standardized with the training rows' mean and
/// standard deviation; distances are max-norm and equal distances go to the
/// lower training row index.
pub fn knn_rmse(train: &Dataset, test: &Dataset, features: &[usize], k_reg: usize) -> Result<EvalReport> {
    if features.is_empty() {
        return Err(Error::invalid("feature subset must not be empty"));
    }
    if let Some(&bad) = features
        .iter()
        .find(|&&j| j >= train.n_features() || j >= test.n_features())
    {
        return Err(Error::invalid(format!("feature index {bad} out of range")));
    }
    if k_reg == 0 || k_reg > train.n_rows() {
        return Err(Error::invalid(format!(
            "k_reg must be in 1..={}, got {k_reg}",
            train.n_rows()
        )));
    }

    let moments: Vec<(f64, f64)> = features
        .iter()
        .map(|&j| order_free_moments(&mut train.column(j).to_vec()))
        .collect();
    let embed = |data: &Dataset, i: usize| -> Vec<f64> {
        features
            .iter()
            .zip(&moments)
            .map(|(&j, &(mean, sd))| {
                let v = data.column(j)[i] - mean;
                if sd > 0.0 {
                    v / sd
                } else {
                    v
                }
            })
            .collect()
    };
    let train_points: Vec<Vec<f64>> = (0..train.n_rows()).map(|i| embed(train, i)).collect();

    let squared: Vec<f64> = (0..test.n_rows())
        .into_par_iter()
        .map(|i| {
            let query = embed(test, i);
            let mut dists: Vec<(f64, usize)> = train_points
                .iter()
                .enumerate()
                .map(|(j, p)| (chebyshev(&query, p), j))
                .collect();
            dists.select_nth_unstable_by(k_reg - 1, neighbor_order);
            let prediction =
                dists[..k_reg].iter().map(|&(_, j)| train.target()[j]).sum::<f64>() / k_reg as f64;
            (prediction - test.target()[i]).powi(2)
        })
        .collect();
    let mut sorted = squared;
    sorted.sort_by(f64::total_cmp);
    let rmse = (sorted.iter().sum::<f64>() / sorted.len() as f64).sqrt();

    Ok(EvalReport {
        feature_subset: features.to_vec(),
        rmse,
        k_reg,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
    })
}
