//! Choice of the estimator's neighbor count.
//!
//! For every feature `X_i` and every candidate `k`, two K-fold distributions
//! are built on the same partition: one of `MI(X_i; Y)` and one of
//! `MI(X_i^π; Y)`, where each fold evaluation shuffles `X_i` afresh. Their
//! separation
//!
//! ```text
//! t(i, k) = (μ − μ_π) / sqrt(σ² + σ²_π)
//! ```
//!
//! is tabulated and the `k` of the single largest cell wins. Averaging `t`
//! over features that pass a significance cut was considered and not
//! implemented; it needs an extra threshold parameter.

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::JointSample;
use crate::resampling::{check_fold_room, kfold_partition, MiDistribution};
use crate::rng::substream;

pub const DEFAULT_FOLDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunerConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub folds: usize,
    pub standardize: bool,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            k_min: 1,
            k_max: 20,
            folds: DEFAULT_FOLDS,
            standardize: true,
        }
    }
}

/// Summary statistics of one `(feature, k)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    pub variance: f64,
    pub null_mean: f64,
    pub null_variance: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_values: Vec<usize>,
    /// `t_grid[feature][k index]`.
    pub t_grid: Vec<Vec<f64>>,
    pub cells: Vec<Vec<CellStats>>,
    pub k_star: usize,
    pub argmax_feature: usize,
    pub t_max: f64,
    pub folds: usize,
}

/// `(μ − μ_π) / sqrt(σ² + σ²_π)`.
///
/// When both variances are zero the result is `+∞` if the means differ (and
/// `−∞` if the null mean is the larger), `0` if they are equal.
pub fn separation_statistic(dist: &MiDistribution, null: &MiDistribution) -> f64 {
    separation(dist.mean(), dist.variance(), null.mean(), null.variance())
}

fn separation(mean: f64, var: f64, null_mean: f64, null_var: f64) -> f64 {
    let diff = mean - null_mean;
    let spread = var + null_var;
    if spread > 0.0 {
        diff / spread.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Fills the `t` grid for every feature and every `k` in
/// `config.k_min..=config.k_max` and picks the `k` of its maximum.
///
/// The partition is drawn first from `rng`, then one `u64` seeds the
/// permutation streams `(seed, feature, fold)`. A fold's shuffle of a
/// feature is shared by every `k`, so each cell still sees K independent
/// permutations while neighboring `k` values are compared on the same
/// draws. Ties in the maximum go to the smaller `k`, then the smaller
/// feature index.
pub fn select_k<R: RngCore + ?Sized>(
    data: &Dataset,
    config: &TunerConfig,
    rng: &mut R,
) -> Result<KSelection> {
    if config.k_min == 0 || config.k_min > config.k_max {
        return Err(Error::invalid(format!(
            "k range must satisfy 1 <= k_min <= k_max, got {}..={}",
            config.k_min, config.k_max
        )));
    }
    let partition = kfold_partition(data.n_rows(), config.folds, rng)?;
    check_fold_room(&partition, config.k_max)?;
    let seed = rng.next_u64();

    let complements: Vec<Vec<usize>> = (0..partition.len()).map(|i| partition.complement(i)).collect();
    let k_values: Vec<usize> = (config.k_min..=config.k_max).collect();
    let d = data.n_features();
    let tasks: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..complements.len()).map(move |fold| (i, fold)))
        .collect();

    // For each (feature, fold): MI at every k on the retained rows, for the
    // feature as is and for one fresh shuffle of it.
    let fold_values = tasks
        .par_iter()
        .map(|&(feature, fold)| {
            let rows = &complements[fold];
            let column: Vec<f64> = rows.iter().map(|&r| data.column(feature)[r]).collect();
            let target: Vec<f64> = rows.iter().map(|&r| data.target()[r]).collect();
            let local: Vec<usize> = (0..rows.len()).collect();
            let actual = JointSample::gather(&[&column], &target, &local)?
                .mutual_information_for_ks(&k_values, config.standardize)?;
            let mut shuffled = column;
            shuffled.shuffle(&mut substream(seed, &[feature as u64, fold as u64]));
            let permuted = JointSample::gather(&[&shuffled], &target, &local)?
                .mutual_information_for_ks(&k_values, config.standardize)?;
            Ok((actual, permuted))
        })
        .collect::<Result<Vec<_>>>()?;

    let folds = complements.len();
    let mut stats = Vec::with_capacity(d * k_values.len());
    for feature in 0..d {
        let per_fold = &fold_values[feature * folds..(feature + 1) * folds];
        for ki in 0..k_values.len() {
            let dist = MiDistribution::from_samples(per_fold.iter().map(|(a, _)| a[ki]).collect())?;
            let null = MiDistribution::from_samples(per_fold.iter().map(|(_, p)| p[ki]).collect())?;
            stats.push(CellStats {
                mean: dist.mean(),
                variance: dist.variance(),
                null_mean: null.mean(),
                null_variance: null.variance(),
                t: separation_statistic(&dist, &null),
            });
        }
    }

    let width = k_values.len();
    let grid: Vec<Vec<CellStats>> = stats.chunks(width).map(<[CellStats]>::to_vec).collect();
    let t_grid: Vec<Vec<f64>> = grid.iter().map(|row| row.iter().map(|c| c.t).collect()).collect();

    let mut best: Option<(usize, usize, f64)> = None;
    for (ki, _) in k_values.iter().enumerate() {
        for (feature, row) in t_grid.iter().enumerate() {
            let t = row[ki];
            if best.is_none_or(|(_, _, b)| t > b) {
                best = Some((feature, ki, t));
            }
        }
    }
    let (argmax_feature, ki, t_max) = best.expect("grid is non-empty");
    Ok(KSelection {
        k_star: k_values[ki],
        k_values,
        t_grid,
        cells: grid,
        argmax_feature,
        t_max,
        folds: config.folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{friedman_generate, FriedmanVariant};
    use crate::rng::seeded;

    fn dist_with(mean: f64, var: f64) -> MiDistribution {
        // two points at mean ± sqrt(var/2) have unbiased variance `var`
        let h = (var / 2.0).sqrt();
        MiDistribution::from_samples(vec![mean - h, mean + h]).unwrap()
    }

    #[test]
    fn separation_examples() {
        let t = separation_statistic(&dist_with(0.5, 0.01), &dist_with(0.0, 0.01));
        assert!((t - 0.5 / 0.02f64.sqrt()).abs() < 1e-12);
        assert!((t - 3.5355).abs() < 1e-4);
        let same = dist_with(0.3, 0.02);
        assert_eq!(separation_statistic(&same, &same), 0.0);
        let t = separation_statistic(&dist_with(0.2, 0.02), &dist_with(0.1, 0.02));
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separation_sentinels() {
        let a = MiDistribution::from_samples(vec![0.4, 0.4]).unwrap();
        let b = MiDistribution::from_samples(vec![0.1, 0.1]).unwrap();
        assert_eq!(separation_statistic(&a, &b), f64::INFINITY);
        assert_eq!(separation_statistic(&a, &a), 0.0);
    }

    #[test]
    fn grid_is_consistent() {
        let data = friedman_generate(100, FriedmanVariant::Plain, &mut seeded(3)).unwrap();
        let config = TunerConfig {
            k_min: 2,
            k_max: 8,
            folds: 20,
            standardize: true,
        };
        let sel = select_k(&data, &config, &mut seeded(9)).unwrap();
        assert_eq!(sel.k_values, (2..=8).collect::<Vec<_>>());
        assert_eq!(sel.t_grid.len(), 10);
        let ki = sel.k_values.iter().position(|&k| k == sel.k_star).unwrap();
        assert_eq!(sel.t_grid[sel.argmax_feature][ki], sel.t_max);
        for (row, cells) in sel.t_grid.iter().zip(&sel.cells) {
            for (&t, c) in row.iter().zip(cells) {
                assert_eq!(t, separation(c.mean, c.variance, c.null_mean, c.null_variance));
                assert!(t <= sel.t_max);
            }
        }
        assert!(sel.argmax_feature < 5, "argmax on noise feature {}", sel.argmax_feature);
        let again = select_k(&data, &config, &mut seeded(9)).unwrap();
        assert_eq!(sel, again);
    }

    #[test]
    fn rejects_bad_ranges() {
        let data = friedman_generate(40, FriedmanVariant::Plain, &mut seeded(3)).unwrap();
        let bad = TunerConfig { k_min: 5, k_max: 4, ..Default::default() };
        assert!(select_k(&data, &bad, &mut seeded(0)).is_err());
        let zero = TunerConfig { k_min: 0, k_max: 4, ..Default::default() };
        assert!(select_k(&data, &zero, &mut seeded(0)).is_err());
        let wide = TunerConfig { k_min: 1, k_max: 38, folds: 20, standardize: true };
        assert!(select_k(&data, &wide, &mut seeded(0)).is_err());
    }

    #[test]
    fn independent_target_still_defines_k() {
        let data = friedman_generate(60, FriedmanVariant::Plain, &mut seeded(5)).unwrap();
        let mut rng = seeded(6);
        let noise = crate::resampling::permute_column(data.target(), &mut rng);
        let null_data = data.with_target(noise).unwrap();
        let config = TunerConfig { k_min: 1, k_max: 10, folds: 20, standardize: true };
        let sel = select_k(&null_data, &config, &mut rng).unwrap();
        assert!((1..=10).contains(&sel.k_star));
        assert!(sel.t_max.is_finite());
    }
}
