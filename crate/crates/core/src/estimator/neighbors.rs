//! Max-norm neighbor queries over small point sets.
//!
//! Distances are Chebyshev (`max_c |a_c − b_c|`). Equal distances are ordered
//! by row index, lower index first; the query row is never its own neighbor.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Which points on the boundary of a ball are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Distance strictly less than the radius.
    Strict,
    /// Distance less than or equal to the radius.
    Inclusive,
}

#[inline]
pub(crate) fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_points(points: &[Vec<f64>], row: usize) -> Result<()> {
    if row >= points.len() {
        return Err(Error::invalid(format!(
            "row {row} out of range for {} points",
            points.len()
        )));
    }
    let dim = points[row].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points must share a non-zero dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("points contain non-finite coordinates"));
    }
    Ok(())
}

/// Orders neighbors by (distance, row index).
pub(crate) fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Distance from `row` to its `k`-th nearest other row.
pub fn kth_neighbor_distance(points: &[Vec<f64>], row: usize, k: usize) -> Result<f64> {
    check_points(points, row)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= points.len() {
        return Err(Error::invalid(format!(
            "k = {k} needs more than {} points",
            points.len()
        )));
    }
    let mut dists: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != row)
        .map(|(j, p)| (chebyshev(&points[row], p), j))
        .collect();
    dists.sort_by(neighbor_order);
    Ok(dists[k - 1].0)
}

/// Number of rows other than `row` inside the max-norm ball of `radius`.
pub fn count_within(
    points: &[Vec<f64>],
    row: usize,
    radius: f64,
    boundary: Boundary,
) -> Result<usize> {
    check_points(points, row)?;
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let centre = &points[row];
    Ok(points
        .iter()
        .enumerate()
        .filter(|&(j, p)| {
            j != row && {
                let d = chebyshev(centre, p);
                match boundary {
                    Boundary::Strict => d < radius,
                    Boundary::Inclusive => d <= radius,
                }
            }
        })
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn kth_distance_on_a_line() {
        let pts = line(&[0.0, 1.0, 3.0]);
        assert_eq!(kth_neighbor_distance(&pts, 0, 1).unwrap(), 1.0);
        assert_eq!(kth_neighbor_distance(&pts, 0, 2).unwrap(), 3.0);
    }

    #[test]
    fn kth_distance_uses_max_norm() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 5.0], vec![2.0, 1.0]];
        assert_eq!(kth_neighbor_distance(&pts, 0, 1).unwrap(), 2.0);
    }

    #[test]
    fn kth_distance_rejects_bad_k() {
        let pts = line(&[0.0, 1.0, 3.0]);
        assert!(kth_neighbor_distance(&pts, 0, 0).is_err());
        assert!(kth_neighbor_distance(&pts, 0, 3).is_err());
        assert!(kth_neighbor_distance(&pts, 5, 1).is_err());
    }

    #[test]
    fn counts() {
        let pts = line(&[0.0, 0.4, 0.9, 2.0]);
        assert_eq!(count_within(&pts, 0, 1.0, Boundary::Strict).unwrap(), 2);
        assert_eq!(count_within(&pts, 0, 0.1, Boundary::Strict).unwrap(), 0);
        assert_eq!(count_within(&pts, 0, 0.9, Boundary::Strict).unwrap(), 1);
        assert_eq!(count_within(&pts, 0, 0.9, Boundary::Inclusive).unwrap(), 2);
        assert!(count_within(&pts, 0, 0.0, Boundary::Strict).is_err());
    }

    #[test]
    fn strict_count_includes_duplicates() {
        let pts = line(&[1.0, 1.0, 1.0, 5.0]);
        assert_eq!(count_within(&pts, 0, 1e-9, Boundary::Strict).unwrap(), 2);
    }
}
