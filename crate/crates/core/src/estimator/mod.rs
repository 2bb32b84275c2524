//! Neighbor-based mutual information between a block of feature columns and
//! a scalar target.
//!
//! The estimate uses the first Kraskov–Stögbauer–Grassberger form:
//!
//! ```text
//! MI ≈ ψ(k) + ψ(n) − ⟨ψ(n_x + 1) + ψ(n_y + 1)⟩
//! ```
//!
//! where, for each point, `ε` is the max-norm distance to its k-th neighbor
//! in the joint space (the joint distance being the max of the feature-block
//! distance and the target distance), and `n_x`, `n_y` count the points that
//! lie strictly closer than `ε` in each marginal space. When `ε` is zero the
//! counts are the points at distance exactly zero. Values are in nats and are
//! never clamped, so small negative estimates are expected under
//! independence.
//!
//! Results are a pure function of the multiset of rows: the same rows in any
//! order give a bit-identical estimate.

mod digamma;
mod neighbors;

pub use digamma::digamma;
pub use neighbors::{count_within, kth_neighbor_distance, Boundary};

pub(crate) use neighbors::{chebyshev, neighbor_order};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Rows at or above this size spread the per-point work over the rayon pool.
const PARALLEL_ROWS: usize = 256;

/// Settings of the neighbor estimator shared by every caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KsgConfig {
    /// Neighbor count.
    pub k: usize,
    /// Rescale every coordinate to zero mean and unit variance, over the
    /// rows in use, before measuring distances.
    pub standardize: bool,
}

impl KsgConfig {
    pub fn new(k: usize) -> Self {
        KsgConfig { k, standardize: true }
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }
}

/// A feature subset and the estimator settings to score it with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiQuery {
    features: Vec<usize>,
    pub ksg: KsgConfig,
}

impl MiQuery {
    /// Fails on an empty or repeated feature list and on `k == 0`. Range
    /// checks against a particular dataset happen at estimation time.
    pub fn new(features: Vec<usize>, ksg: KsgConfig) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("feature set must not be empty"));
        }
        let mut sorted = features.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate feature index in {features:?}")));
        }
        if ksg.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(MiQuery { features, ksg })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Estimated mutual information in nats.
    pub value: f64,
    pub n_used: usize,
}

/// Estimates `MI(X_S; Y)` for the query's features on the given rows.
pub fn estimate_mi(data: &Dataset, rows: &[usize], query: &MiQuery) -> Result<MiEstimate> {
    if let Some(&bad) = query.features.iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::invalid(format!(
            "feature index {bad} out of range for {} features",
            data.n_features()
        )));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.n_rows()) {
        return Err(Error::invalid(format!(
            "row index {bad} out of range for {} rows",
            data.n_rows()
        )));
    }
    let columns: Vec<&[f64]> = query.features.iter().map(|&j| data.column(j)).collect();
    let sample = JointSample::gather(&columns, data.target(), rows)?;
    let value = sample.mutual_information(query.ksg)?;
    Ok(MiEstimate {
        value,
        n_used: rows.len(),
    })
}

/// Estimates MI between arbitrary equal-length columns and a target.
pub fn estimate_mi_columns(columns: &[&[f64]], target: &[f64], ksg: KsgConfig) -> Result<f64> {
    if columns.is_empty() {
        return Err(Error::invalid("feature set must not be empty"));
    }
    if columns.iter().any(|c| c.len() != target.len()) {
        return Err(Error::invalid("feature columns and target differ in length"));
    }
    let rows: Vec<usize> = (0..target.len()).collect();
    JointSample::gather(columns, target, &rows)?.mutual_information(ksg)
}

/// Row-major copy of the selected rows of a feature block plus the target.
pub(crate) struct JointSample {
    x: Vec<f64>,
    dim: usize,
    y: Vec<f64>,
}

impl JointSample {
    pub(crate) fn gather(columns: &[&[f64]], target: &[f64], rows: &[usize]) -> Result<Self> {
        let dim = columns.len();
        let mut x = Vec::with_capacity(rows.len() * dim);
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            for (c, col) in columns.iter().enumerate() {
                let v = col[r];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: r,
                        column: format!("feature #{c} of query"),
                    });
                }
                x.push(v);
            }
            let t = target[r];
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    row: r,
                    column: "target".into(),
                });
            }
            y.push(t);
        }
        Ok(JointSample { x, dim, y })
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn standardize(&mut self) {
        let n = self.len();
        let mut scratch = Vec::with_capacity(n);
        for c in 0..self.dim {
            scratch.clear();
            scratch.extend(self.x.iter().skip(c).step_by(self.dim).copied());
            let (mean, sd) = order_free_moments(&mut scratch);
            for v in self.x.iter_mut().skip(c).step_by(self.dim) {
                *v = scale(*v, mean, sd);
            }
        }
        scratch.clear();
        scratch.extend_from_slice(&self.y);
        let (mean, sd) = order_free_moments(&mut scratch);
        for v in &mut self.y {
            *v = scale(*v, mean, sd);
        }
    }

    pub(crate) fn mutual_information(mut self, ksg: KsgConfig) -> Result<f64> {
        let n = self.len();
        if ksg.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if ksg.k >= n {
            return Err(Error::invalid(format!(
                "k = {} needs more than {n} rows",
                ksg.k
            )));
        }
        if ksg.standardize {
            self.standardize();
        }
        let counts: Vec<(usize, usize)> = if n >= PARALLEL_ROWS {
            (0..n)
                .into_par_iter()
                .map_init(|| Scratch::new(n), |s, i| self.marginal_counts(i, ksg.k, s))
                .collect()
        } else {
            let mut s = Scratch::new(n);
            (0..n).map(|i| self.marginal_counts(i, ksg.k, &mut s)).collect()
        };

        // Histogram the counts so the sum is independent of row order.
        let mut hist = vec![0u64; n];
        for &(nx, ny) in &counts {
            hist[nx] += 1;
            hist[ny] += 1;
        }
        let psi = digamma::integer_table(n + 1);
        Ok(psi[ksg.k - 1] + psi[n - 1] - histogram_sum(&hist, &psi) / n as f64)
    }

    /// Estimates for several neighbor counts at once, sharing the distance
    /// work between them. Each value is bit-identical to the single-`k`
    /// estimate.
    pub(crate) fn mutual_information_for_ks(mut self, ks: &[usize], standardize: bool) -> Result<Vec<f64>> {
        let n = self.len();
        let k_max = match ks.iter().max() {
            Some(&k) => k,
            None => return Ok(Vec::new()),
        };
        if ks.contains(&0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        if k_max >= n {
            return Err(Error::invalid(format!("k = {k_max} needs more than {n} rows")));
        }
        if standardize {
            self.standardize();
        }
        let mut sorted_y = self.y.clone();
        sorted_y.sort_by(f64::total_cmp);
        let sorted_x = (self.dim == 1).then(|| {
            let mut v = self.x.clone();
            v.sort_by(f64::total_cmp);
            v
        });

        let per_point = |i: usize, s: &mut Scratch| -> Vec<(usize, usize)> {
            let xi = &self.x[i * self.dim..(i + 1) * self.dim];
            let yi = self.y[i];
            s.dx.clear();
            s.joint.clear();
            for j in (0..n).filter(|&j| j != i) {
                let dx = chebyshev(xi, &self.x[j * self.dim..(j + 1) * self.dim]);
                let dy = (yi - self.y[j]).abs();
                if sorted_x.is_none() {
                    s.dx.push(dx);
                }
                s.joint.push(dx.max(dy));
            }
            s.joint.select_nth_unstable_by(k_max - 1, |a, b| a.total_cmp(b));
            s.joint[..k_max].sort_unstable_by(|a, b| a.total_cmp(b));
            if sorted_x.is_none() {
                s.dx.sort_unstable_by(|a, b| a.total_cmp(b));
            }
            ks.iter()
                .map(|&k| {
                    let eps = s.joint[k - 1];
                    let nx = match &sorted_x {
                        Some(sx) => count_sorted_1d(sx, xi[0], eps),
                        None => s.dx.partition_point(|&d| within(d, eps)),
                    };
                    (nx, count_sorted_1d(&sorted_y, yi, eps))
                })
                .collect()
        };
        let counts: Vec<Vec<(usize, usize)>> = if n >= PARALLEL_ROWS {
            (0..n)
                .into_par_iter()
                .map_init(|| Scratch::new(n), |s, i| per_point(i, s))
                .collect()
        } else {
            let mut s = Scratch::new(n);
            (0..n).map(|i| per_point(i, &mut s)).collect()
        };

        let psi = digamma::integer_table(n + 1);
        Ok(ks
            .iter()
            .enumerate()
            .map(|(ki, &k)| {
                let mut hist = vec![0u64; n];
                for c in &counts {
                    hist[c[ki].0] += 1;
                    hist[c[ki].1] += 1;
                }
                psi[k - 1] + psi[n - 1] - histogram_sum(&hist, &psi) / n as f64
            })
            .collect())
    }

    fn marginal_counts(&self, i: usize, k: usize, s: &mut Scratch) -> (usize, usize) {
        let n = self.len();
        let xi = &self.x[i * self.dim..(i + 1) * self.dim];
        let yi = self.y[i];
        s.dx.clear();
        s.dy.clear();
        s.joint.clear();
        for j in (0..n).filter(|&j| j != i) {
            let dx = chebyshev(xi, &self.x[j * self.dim..(j + 1) * self.dim]);
            let dy = (yi - self.y[j]).abs();
            s.dx.push(dx);
            s.dy.push(dy);
            s.joint.push(dx.max(dy));
        }
        let (_, eps, _) = s.joint.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let eps = *eps;
        (
            s.dx.iter().filter(|&&d| within(d, eps)).count(),
            s.dy.iter().filter(|&&d| within(d, eps)).count(),
        )
    }
}

/// Marginal neighbor predicate: strictly inside `eps`, or exactly at the
/// point when `eps` is zero.
#[inline]
fn within(d: f64, eps: f64) -> bool {
    if eps > 0.0 {
        d < eps
    } else {
        d <= 0.0
    }
}

/// Number of other values `w` in `sorted` with `within(|v − w|, eps)`.
/// `v` must itself be an element of `sorted`.
///
/// Floating-point subtraction is monotone, so the predicate is monotone on
/// each side of `v` and can be binary searched while matching the direct
/// count exactly.
fn count_sorted_1d(sorted: &[f64], v: f64, eps: f64) -> usize {
    let split = sorted.partition_point(|&w| w < v);
    let (left, right) = sorted.split_at(split);
    let from_left = left.len() - left.partition_point(|&w| !within(v - w, eps));
    let from_right = right.partition_point(|&w| within(w - v, eps));
    from_left + from_right - 1
}

fn histogram_sum(hist: &[u64], psi: &[f64]) -> f64 {
    hist.iter()
        .enumerate()
        .filter(|(_, &h)| h > 0)
        .map(|(c, &h)| h as f64 * psi[c])
        .sum()
}

struct Scratch {
    dx: Vec<f64>,
    dy: Vec<f64>,
    joint: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            dx: Vec::with_capacity(n),
            dy: Vec::with_capacity(n),
            joint: Vec::with_capacity(n),
        }
    }
}

/// Mean and population standard deviation, summed in sorted order so the
/// result does not depend on the order the values arrive in.
pub(crate) fn order_free_moments(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / n;
    (mean, var.sqrt())
}

#[inline]
fn scale(v: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        (v - mean) / sd
    } else {
        0.0
    }
}
