//! K-fold and permutation resampling of mutual information estimates,
//! permutation p-values with binomial confidence intervals, and empirical
//! percentiles.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_mi, JointSample, KsgConfig, MiQuery};
use crate::rng::substream;

/// Smallest null sample that supports a 95th percentile.
pub const MIN_PERMUTATIONS: usize = 10;

/// Confidence level of the interval around a permutation p-value.
pub const P_VALUE_CONFIDENCE: f64 = 0.95;

/// K disjoint row sets covering `0..n`, with sizes differing by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    folds: Vec<Vec<usize>>,
    n: usize,
}

impl FoldPartition {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// All rows outside fold `i`, ascending.
    pub fn complement(&self, i: usize) -> Vec<usize> {
        let mut held_out = vec![false; self.n];
        for &r in &self.folds[i] {
            held_out[r] = true;
        }
        (0..self.n).filter(|&r| !held_out[r]).collect()
    }

    /// Size of the smallest complement, i.e. the fewest rows any fold
    /// evaluation will see.
    pub fn min_complement(&self) -> usize {
        self.n - self.folds.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Shuffles the rows and cuts them into `folds` balanced groups. The first
/// `n mod folds` groups get the extra row.
pub fn kfold_partition<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Result<FoldPartition> {
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!(
            "fold count must satisfy 2 <= K <= n, got K = {folds}, n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for i in 0..folds {
        let size = base + usize::from(i < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += size;
    }
    Ok(FoldPartition { folds: out, n })
}

/// A sample of MI estimates with its mean and unbiased variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiDistribution {
    samples: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl MiDistribution {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a distribution needs at least 2 samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("distribution samples must be finite"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(MiDistribution {
            samples,
            mean,
            variance,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Estimates the query once per fold, each time on every row except that
/// fold's.
pub fn kfold_mi_distribution<R: Rng + ?Sized>(
    data: &Dataset,
    query: &MiQuery,
    folds: usize,
    rng: &mut R,
) -> Result<MiDistribution> {
    let partition = kfold_partition(data.n_rows(), folds, rng)?;
    kfold_mi_on(data, query, &partition)
}

/// Like [`kfold_mi_distribution`] with a fixed partition.
pub fn kfold_mi_on(
    data: &Dataset,
    query: &MiQuery,
    partition: &FoldPartition,
) -> Result<MiDistribution> {
    check_fold_room(partition, query.ksg.k)?;
    let samples = (0..partition.len())
        .into_par_iter()
        .map(|i| estimate_mi(data, &partition.complement(i), query).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    MiDistribution::from_samples(samples)
}

pub(crate) fn check_fold_room(partition: &FoldPartition, k: usize) -> Result<()> {
    if partition.min_complement() < k + 1 {
        return Err(Error::invalid(format!(
            "k = {k} needs at least {} rows per fold evaluation, smallest has {}",
            k + 1,
            partition.min_complement()
        )));
    }
    Ok(())
}

/// A uniformly random rearrangement of `values`.
pub fn permute_column<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = values.to_vec();
    out.shuffle(rng);
    out
}

/// Null distribution of `MI(S ∪ {X_c}; Y)` under independence of the
/// candidate: each of the `permutations` estimates shuffles only the
/// candidate column, afresh, leaving the base columns and target aligned.
///
/// One `u64` is drawn from `rng`; permutation `i` uses the substream
/// `(that seed, i)`, so the result does not depend on thread scheduling.
pub fn permutation_null<R: RngCore + ?Sized>(
    data: &Dataset,
    base: &[usize],
    candidate: usize,
    ksg: KsgConfig,
    permutations: usize,
    rng: &mut R,
) -> Result<MiDistribution> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {permutations}"
        )));
    }
    if base.contains(&candidate) {
        return Err(Error::invalid(format!(
            "candidate {candidate} is already in the base set"
        )));
    }
    let mut features = base.to_vec();
    features.push(candidate);
    // validates indices and k
    let query = MiQuery::new(features, ksg)?;
    if let Some(&bad) = query.features().iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::invalid(format!("feature index {bad} out of range")));
    }
    let seed = rng.next_u64();
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let samples = (0..permutations)
        .into_par_iter()
        .map(|i| {
            let shuffled = permute_column(data.column(candidate), &mut substream(seed, &[i as u64]));
            let mut columns: Vec<&[f64]> = base.iter().map(|&j| data.column(j)).collect();
            columns.push(&shuffled);
            JointSample::gather(&columns, data.target(), &rows)?.mutual_information(ksg)
        })
        .collect::<Result<Vec<_>>>()?;
    MiDistribution::from_samples(samples)
}

/// Permutation p-value with a Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_permutations: usize,
}

/// Fraction of null samples at least as large as `observed`, with the 95%
/// exact binomial interval for that fraction.
pub fn p_value(observed: f64, null: &MiDistribution) -> Result<PValue> {
    let p_count = null.len();
    if p_count < MIN_PERMUTATIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_PERMUTATIONS} null samples, got {p_count}"
        )));
    }
    if observed.is_nan() {
        return Err(Error::invalid("observed statistic is NaN"));
    }
    let hits = null.samples().iter().filter(|&&v| v >= observed).count();
    let (ci_low, ci_high) = clopper_pearson(hits, p_count, 1.0 - P_VALUE_CONFIDENCE);
    Ok(PValue {
        p: hits as f64 / p_count as f64,
        ci_low,
        ci_high,
        n_permutations: p_count,
    })
}

/// Exact two-sided `1 − alpha` interval for a binomial proportion.
pub fn clopper_pearson(successes: usize, trials: usize, alpha: f64) -> (f64, f64) {
    let x = successes as f64;
    let n = trials as f64;
    let low = if successes == 0 {
        0.0
    } else {
        inv_beta_reg(x, n - x + 1.0, alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        inv_beta_reg(x + 1.0, n - x, 1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Nearest-rank quantile: the `ceil(q·P)`-th smallest sample.
pub fn percentile(dist: &MiDistribution, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile must be in (0, 1), got {q}")));
    }
    if dist.len() < MIN_PERMUTATIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_PERMUTATIONS} samples for a percentile, got {}",
            dist.len()
        )));
    }
    let mut sorted = dist.samples().to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = nearest_rank(q, sorted.len());
    Ok(sorted[rank - 1])
}

fn nearest_rank(q: f64, len: usize) -> usize {
    // Guard against q·len landing a hair above an integer (0.95·20 in f64).
    let scaled = q * len as f64;
    let rounded = scaled.round();
    let rank = if (scaled - rounded).abs() < 1e-9 * len as f64 {
        rounded
    } else {
        scaled.ceil()
    };
    (rank as usize).clamp(1, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{friedman_generate, FriedmanVariant};
    use crate::rng::seeded;

    fn dist(values: impl IntoIterator<Item = f64>) -> MiDistribution {
        MiDistribution::from_samples(values.into_iter().collect()).unwrap()
    }

    #[test]
    fn fold_sizes() {
        let sizes = |n, k| {
            let mut s: Vec<usize> = kfold_partition(n, k, &mut seeded(0))
                .unwrap()
                .folds()
                .iter()
                .map(Vec::len)
                .collect();
            s.sort_unstable();
            s
        };
        assert_eq!(sizes(10, 3), vec![3, 3, 4]);
        assert_eq!(sizes(6, 6), vec![1; 6]);
        assert_eq!(sizes(100, 20), vec![5; 20]);
        assert!(kfold_partition(5, 6, &mut seeded(0)).is_err());
        assert!(kfold_partition(5, 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn complement_excludes_fold() {
        let p = kfold_partition(12, 4, &mut seeded(3)).unwrap();
        let c = p.complement(1);
        assert_eq!(c.len(), 9);
        assert!(p.folds()[1].iter().all(|r| !c.contains(r)));
    }

    #[test]
    fn distribution_moments() {
        let d = dist([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.mean(), 2.5);
        assert!((d.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!(MiDistribution::from_samples(vec![1.0]).is_err());
    }

    #[test]
    fn permutation_preserves_multiset() {
        let v = vec![1.0, 2.0, 3.0];
        let mut p = permute_column(&v, &mut seeded(8));
        p.sort_by(f64::total_cmp);
        assert_eq!(p, v);
        assert_eq!(permute_column(&[5.0], &mut seeded(1)), vec![5.0]);
    }

    #[test]
    fn p_value_extremes() {
        let null = dist((1..=50).map(f64::from));
        let r = p_value(100.0, &null).unwrap();
        assert_eq!(r.p, 0.0);
        assert_eq!(r.ci_low, 0.0);
        // closed form for zero successes: 1 − (α/2)^(1/n)
        let expected = 1.0 - 0.025f64.powf(1.0 / 50.0);
        assert!((r.ci_high - expected).abs() < 1e-9, "{}", r.ci_high);
        assert!((r.ci_high - 0.071).abs() < 1e-3);

        let r = p_value(0.0, &null).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(r.ci_high, 1.0);

        let odd = dist((1..=11).map(f64::from));
        assert!(p_value(6.0, &odd).unwrap().p >= 0.5);
        assert!(p_value(1.0, &dist((1..=5).map(f64::from))).is_err());
    }

    #[test]
    fn clopper_pearson_brackets_estimate() {
        let (lo, hi) = clopper_pearson(7, 40, 0.05);
        assert!(lo < 7.0 / 40.0 && 7.0 / 40.0 < hi);
        // x = n: lower bound is (α/2)^(1/n)
        let (lo, hi) = clopper_pearson(20, 20, 0.05);
        assert!((lo - 0.025f64.powf(1.0 / 20.0)).abs() < 1e-9);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn percentile_examples() {
        let d = dist((1..=20).map(f64::from));
        assert_eq!(percentile(&d, 0.95).unwrap(), 19.0);
        assert_eq!(percentile(&d, 0.5).unwrap(), 10.0);
        assert_eq!(percentile(&dist(vec![0.3; 12]), 0.8).unwrap(), 0.3);
        assert!(percentile(&d, 1.0).is_err());
        assert!(percentile(&d, 0.0).is_err());
        let fifty = dist((1..=50).map(f64::from));
        assert_eq!(percentile(&fifty, 0.95).unwrap(), 48.0);
    }

    #[test]
    fn permutation_null_shape_and_purity() {
        let data = friedman_generate(100, FriedmanVariant::Plain, &mut seeded(21)).unwrap();
        let before = data.clone();
        let null = permutation_null(&data, &[], 3, KsgConfig::new(6), 50, &mut seeded(1)).unwrap();
        assert_eq!(null.len(), 50);
        assert!(null.mean().abs() < 0.05, "{}", null.mean());
        assert_eq!(data, before);
        assert!(permutation_null(&data, &[3], 3, KsgConfig::new(6), 50, &mut seeded(1)).is_err());
        assert!(permutation_null(&data, &[], 3, KsgConfig::new(6), 9, &mut seeded(1)).is_err());
    }

    #[test]
    fn kfold_distribution_on_synthetic_data() {
        let data = friedman_generate(100, FriedmanVariant::Plain, &mut seeded(13)).unwrap();
        let relevant = MiQuery::new(vec![3], KsgConfig::new(6)).unwrap();
        let d = kfold_mi_distribution(&data, &relevant, 20, &mut seeded(2)).unwrap();
        assert_eq!(d.len(), 20);
        assert!(d.mean() > 0.0);
        let noise = MiQuery::new(vec![9], KsgConfig::new(6)).unwrap();
        let d = kfold_mi_distribution(&data, &noise, 20, &mut seeded(2)).unwrap();
        assert!(d.mean().abs() < 0.05, "{}", d.mean());
        let too_big = MiQuery::new(vec![0], KsgConfig::new(95)).unwrap();
        assert!(kfold_mi_distribution(&data, &too_big, 20, &mut seeded(2)).is_err());
    }

    #[test]
    fn constant_target_gives_zero_ish_samples() {
        let data = friedman_generate(60, FriedmanVariant::Plain, &mut seeded(4)).unwrap();
        let flat = data.with_target(vec![3.0; 60]).unwrap();
        let q = MiQuery::new(vec![0], KsgConfig::new(5)).unwrap();
        let d = kfold_mi_distribution(&flat, &q, 10, &mut seeded(0)).unwrap();
        assert!(d.samples().iter().all(|v| v.abs() < 0.1), "{:?}", d.samples());
    }
}
