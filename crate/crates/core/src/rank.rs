//! Ranks, pseudo-observations and leave-one-out multivariate PIT values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

/// Ranks scaled to `(0, 1)` by `rank / (k + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    pub u: Vec<f64>,
    /// Set when the input contained ties (average ranks were used).
    pub ties: bool,
}

impl PseudoObservations {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Leave-one-out componentwise domination frequencies
/// `w_i = #{k != i : row_k <= row_i} / (n - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitPseudoObservations {
    pub w: Vec<f64>,
}

/// 1-based ranks with ties receiving the average of the ranks they span.
pub fn ranks(x: &[f64]) -> Result<Vec<f64>> {
    Ok(ranks_with_ties(x)?.0)
}

fn ranks_with_ties(x: &[f64]) -> Result<(Vec<f64>, bool)> {
    if x.is_empty() {
        return Err(Error::invalid("cannot rank an empty vector"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot rank NaN values"));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut ties = false;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            ties = true;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            out[idx] = avg;
        }
        start = end;
    }
    Ok((out, ties))
}

pub fn pseudo_observations(x: &[f64]) -> Result<PseudoObservations> {
    let (r, ties) = ranks_with_ties(x)?;
    let denom = (x.len() + 1) as f64;
    Ok(PseudoObservations {
        u: r.into_iter().map(|r| r / denom).collect(),
        ties,
    })
}

/// Multivariate PIT pseudo-observations of the rows of `data`.
pub fn pit_pseudo_observations(data: &Matrix) -> Result<PitPseudoObservations> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "PIT pseudo-observations need n >= 2, got {n}"
        )));
    }
    if data.ncols() == 0 {
        return Err(Error::invalid(
            "PIT pseudo-observations need at least one column",
        ));
    }
    if data.as_slice().iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("PIT pseudo-observations of NaN values"));
    }
    let counts = match data.ncols() {
        1 => dominance_counts_1d(&data.column(0)),
        2 => dominance_counts_2d(&data.column(0), &data.column(1)),
        _ => dominance_counts_brute(data),
    };
    let denom = (n - 1) as f64;
    Ok(PitPseudoObservations {
        w: counts.into_iter().map(|c| c as f64 / denom).collect(),
    })
}

/// `#{k != i : x_k <= x_i}` for each i.
fn dominance_counts_1d(x: &[f64]) -> Vec<usize> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    x.iter()
        .map(|v| sorted.partition_point(|s| s <= v) - 1)
        .collect()
}

/// 2-d weak dominance counts by a sweep over x with a Fenwick tree on y ranks.
fn dominance_counts_2d(x: &[f64], y: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut ys = y.to_vec();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    // 1-based compressed y rank
    let yr: Vec<usize> = y
        .iter()
        .map(|v| ys.partition_point(|s| s < v) + 1)
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut tree = vec![0usize; ys.len() + 1];
    let add = |tree: &mut Vec<usize>, mut i: usize| {
        while i < tree.len() {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    };
    let query = |tree: &Vec<usize>, mut i: usize| {
        let mut s = 0;
        while i > 0 {
            s += tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    };

    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // rows tied in x dominate each other in x, so insert the block first
        for &i in &order[start..end] {
            add(&mut tree, yr[i]);
        }
        for &i in &order[start..end] {
            out[i] = query(&tree, yr[i]) - 1;
        }
        start = end;
    }
    out
}

fn dominance_counts_brute(data: &Matrix) -> Vec<usize> {
    let n = data.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = data.row(i);
            (0..n)
                .filter(|&k| k != i && data.row(k).iter().zip(ri).all(|(a, b)| a <= b))
                .count()
        })
        .collect()
}
