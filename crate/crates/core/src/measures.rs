//! Collapsed measures of association and canonical-correlation weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collapse::{collapse_group, Arity, CollapseSpec, CollapsedSample};
use crate::data::GroupedData;
use crate::error::{Error, Result};
use crate::rank::{pit_pseudo_observations, pseudo_observations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Pearson,
    Spearman,
    Tau,
    TailUpper,
    TailLower,
}

impl MeasureKind {
    pub fn label(self) -> &'static str {
        match self {
            MeasureKind::Pearson => "pearson",
            MeasureKind::Spearman => "spearman",
            MeasureKind::Tau => "tau",
            MeasureKind::TailUpper => "tail-upper",
            MeasureKind::TailLower => "tail-lower",
        }
    }

    pub fn is_tail(self) -> bool {
        matches!(self, MeasureKind::TailUpper | MeasureKind::TailLower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    /// Tail level; defaults to `ceil(sqrt(k))` for a series of length `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_k: Option<usize>,
}

impl MeasureSpec {
    pub fn new(kind: MeasureKind) -> Self {
        Self { kind, tail_k: None }
    }

    pub fn with_tail_k(mut self, k: usize) -> Self {
        self.tail_k = Some(k);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Asymptotic,
    Bootstrap,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceEstimate {
    pub measure: MeasureKind,
    pub value: f64,
    pub std_error: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub level: Option<f64>,
    pub method: CiMethod,
    /// Number of observations.
    pub n: usize,
    /// Length of the collapsed series the measure was applied to.
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_k: Option<usize>,
    /// Diagnostics such as detected ties or a clipped variance.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DependenceEstimate {
    pub fn point(measure: MeasureKind, value: f64, n: usize, k: usize) -> Self {
        Self {
            measure,
            value,
            std_error: None,
            ci: None,
            level: None,
            method: CiMethod::None,
            n,
            k,
            tail_k: None,
            warnings: Vec::new(),
        }
    }
}

fn check_pair(sx: &[f64], sy: &[f64]) -> Result<()> {
    if sx.len() != sy.len() {
        return Err(Error::DimensionMismatch {
            expected: sx.len(),
            got: sy.len(),
        });
    }
    if sx.len() < 2 {
        return Err(Error::invalid("need at least 2 observations"));
    }
    if sx.iter().chain(sy).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite collapsed value"));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(sx: &[f64], sy: &[f64]) -> Result<f64> {
    check_pair(sx, sy)?;
    let n = sx.len() as f64;
    let mx = sx.iter().sum::<f64>() / n;
    let my = sy.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in sx.iter().zip(sy) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::degenerate("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of the pseudo-observations.
pub fn spearman(sx: &[f64], sy: &[f64]) -> Result<f64> {
    check_pair(sx, sy)?;
    pearson(&pseudo_observations(sx)?.u, &pseudo_observations(sy)?.u)
}

/// Pair counts behind Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Concordance {
    /// Concordant minus discordant pairs.
    pub c_minus_d: i64,
    /// All pairs, `n(n-1)/2`.
    pub pairs: i64,
    /// Pairs tied in neither coordinate, `C + D`.
    pub untied: i64,
}

fn tie_pairs(sorted: &[f64]) -> i64 {
    let mut total = 0i64;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as i64;
        total += t * (t - 1) / 2;
        start = end;
    }
    total
}

/// Merge sort counting pairs `i < j` with `v[i] > v[j]`.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as i64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Concordance counts in `O(n log n)` (Knight's algorithm).
pub fn concordance(sx: &[f64], sy: &[f64]) -> Result<Concordance> {
    check_pair(sx, sy)?;
    let n = sx.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sx[a].total_cmp(&sx[b]).then(sy[a].total_cmp(&sy[b])));

    let xs: Vec<f64> = order.iter().map(|&i| sx[i]).collect();
    let tied_x = tie_pairs(&xs);
    let mut tied_xy = 0i64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sx[order[end]] == sx[order[start]] && sy[order[end]] == sy[order[start]] {
            end += 1;
        }
        let t = (end - start) as i64;
        tied_xy += t * (t - 1) / 2;
        start = end;
    }

    let mut ys: Vec<f64> = order.iter().map(|&i| sy[i]).collect();
    let discordant = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let tied_y = tie_pairs(&ys);

    let pairs = (n as i64) * (n as i64 - 1) / 2;
    let untied = pairs - tied_x - tied_y + tied_xy;
    Ok(Concordance {
        c_minus_d: untied - 2 * discordant,
        pairs,
        untied,
    })
}

/// Sample Kendall tau, `(C - D) / (n choose 2)`; tied pairs count as neither.
pub fn tau(sx: &[f64], sy: &[f64]) -> Result<f64> {
    let c = concordance(sx, sy)?;
    if c.untied == 0 {
        return Err(Error::degenerate("all pairs tied"));
    }
    Ok(c.c_minus_d as f64 / c.pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Upper,
    Lower,
}

/// Empirical copula `(1/n) #{i : ux_i <= u, uy_i <= v}`.
pub fn empirical_copula(ux: &[f64], uy: &[f64], u: f64, v: f64) -> f64 {
    let c = ux
        .iter()
        .zip(uy)
        .filter(|(a, b)| **a <= u && **b <= v)
        .count();
    c as f64 / ux.len() as f64
}

pub fn default_tail_k(len: usize) -> usize {
    (len as f64).sqrt().ceil() as usize
}

/// Empirical tail-dependence coefficient at level `k` from pseudo-observations.
pub fn tail_dependence(ux: &[f64], uy: &[f64], side: TailSide, k: usize) -> Result<f64> {
    check_pair(ux, uy)?;
    let n = ux.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "tail level k must lie in [1, {}], got {k}",
            n - 1
        )));
    }
    // with c = n * C(u, u) both forms reduce to integer ratios:
    // upper (u = 1 - k/n): (2k - n + c) / k, lower (u = k/n): c / k
    let count = |u: f64| {
        ux.iter()
            .zip(uy)
            .filter(|(a, b)| **a <= u && **b <= u)
            .count() as f64
    };
    let (n, kf) = (n as f64, k as f64);
    let lambda = match side {
        TailSide::Upper => (2.0 * kf - n + count(1.0 - kf / n)) / kf,
        TailSide::Lower => count(kf / n) / kf,
    };
    Ok(lambda.clamp(0.0, 1.0))
}

/// Pearson correlation over all ordered pairs `(i, j)`, `i != j`, of an
/// asymmetric pairwise collapse.
fn ordered_pair_pearson(sx: &CollapsedSample, sy: &CollapsedSample) -> Result<f64> {
    let fwd = |s: &CollapsedSample| -> Vec<f64> {
        let mut v = s.values.clone();
        v.extend_from_slice(s.reverse.as_deref().unwrap_or(&s.values));
        v
    };
    pearson(&fwd(sx), &fwd(sy))
}

/// Apply `mspec` to two aligned collapsed samples.
pub fn measure_collapsed(
    sx: &CollapsedSample,
    sy: &CollapsedSample,
    mspec: &MeasureSpec,
) -> Result<DependenceEstimate> {
    if sx.arity != sy.arity || sx.source_n != sy.source_n {
        return Err(Error::invalid(
            "collapsed samples have different arity or sample size",
        ));
    }
    let len = sx.len();
    let mut warnings = Vec::new();
    let mut tail_k = None;
    let value = match mspec.kind {
        MeasureKind::Pearson => {
            if sx.reverse.is_some() || sy.reverse.is_some() {
                ordered_pair_pearson(sx, sy)?
            } else {
                pearson(&sx.values, &sy.values)?
            }
        }
        MeasureKind::Spearman => {
            check_pair(&sx.values, &sy.values)?;
            let ux = pseudo_observations(&sx.values)?;
            let uy = pseudo_observations(&sy.values)?;
            if ux.ties || uy.ties {
                warnings.push("ties in collapsed values; average ranks used".to_string());
            }
            pearson(&ux.u, &uy.u)?
        }
        MeasureKind::Tau => tau(&sx.values, &sy.values)?,
        MeasureKind::TailUpper | MeasureKind::TailLower => {
            check_pair(&sx.values, &sy.values)?;
            let k = mspec.tail_k.unwrap_or_else(|| default_tail_k(len));
            tail_k = Some(k);
            let ux = pseudo_observations(&sx.values)?;
            let uy = pseudo_observations(&sy.values)?;
            if ux.ties || uy.ties {
                warnings.push("ties in collapsed values; average ranks used".to_string());
            }
            let side = if mspec.kind == MeasureKind::TailUpper {
                TailSide::Upper
            } else {
                TailSide::Lower
            };
            tail_dependence(&ux.u, &uy.u, side, k)?
        }
    };
    let mut est = DependenceEstimate::point(mspec.kind, value, sx.source_n, len);
    est.tail_k = tail_k;
    est.warnings = warnings;
    Ok(est)
}

/// Collapse groups `ga` and `gb` with `cspec` and measure their association.
pub fn chi_collapsed(
    data: &GroupedData,
    ga: &str,
    gb: &str,
    cspec: &CollapseSpec,
    mspec: &MeasureSpec,
) -> Result<DependenceEstimate> {
    let sx = collapse_group(data, ga, cspec)?;
    let sy = collapse_group(data, gb, cspec)?;
    debug_assert!(sx.arity == sy.arity);
    if sx.arity == Arity::Pairwise && sx.len() < 2 {
        return Err(Error::invalid(
            "need at least 3 observations for a pairwise collapse",
        ));
    }
    measure_collapsed(&sx, &sy, mspec)
}

fn pit_pair(data: &GroupedData, ga: &str, gb: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let w1 = pit_pseudo_observations(&data.view(ga)?.to_matrix())?;
    let w2 = pit_pseudo_observations(&data.view(gb)?.to_matrix())?;
    Ok((w1.w, w2.w))
}

/// Pearson correlation of the multivariate PIT pseudo-observations.
pub fn chi_pit_pearson(data: &GroupedData, ga: &str, gb: &str) -> Result<DependenceEstimate> {
    let (w1, w2) = pit_pair(data, ga, gb)?;
    let value = pearson(&w1, &w2)?;
    Ok(DependenceEstimate::point(
        MeasureKind::Pearson,
        value,
        data.n(),
        data.n(),
    ))
}

/// `(1/n) #{k : w_k <= w_i}` for each `i`.
fn empirical_cdf_at_sample(w: &[f64]) -> Vec<f64> {
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = w.len() as f64;
    w.iter()
        .map(|v| sorted.partition_point(|s| s <= v) as f64 / n)
        .collect()
}

/// Pearson correlation of the empirical Kendall margins evaluated at the PIT
/// pseudo-observations.
pub fn chi_pit_spearman(data: &GroupedData, ga: &str, gb: &str) -> Result<DependenceEstimate> {
    let (w1, w2) = pit_pair(data, ga, gb)?;
    let value = pearson(&empirical_cdf_at_sample(&w1), &empirical_cdf_at_sample(&w2))?;
    Ok(DependenceEstimate::point(
        MeasureKind::Spearman,
        value,
        data.n(),
        data.n(),
    ))
}

/// First canonical pair of two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalWeights {
    pub wa: Vec<f64>,
    pub wb: Vec<f64>,
    pub rho: f64,
}

const POWER_MAX_ITER: usize = 10_000;
const POWER_TOL: f64 = 1e-13;

fn sample_cov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    (a.transpose() * b) / (n - 1.0)
}

fn centered(data: &GroupedData, g: &str) -> Result<DMatrix<f64>> {
    let v = data.view(g)?;
    let mut m = DMatrix::from_fn(v.n(), v.dim(), |i, t| v.get(i, t));
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(m)
}

fn ridge_cholesky(s: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let p = s.nrows();
    let eps = 1e-8 * s.trace() / p as f64;
    let ridged = s + DMatrix::identity(p, p) * eps;
    ridged
        .cholesky()
        .ok_or_else(|| Error::degenerate("covariance block singular after ridge"))
}

/// Weights maximising the correlation of `wa' X` and `wb' Y`, each scaled to
/// unit sample variance.
pub fn optimal_weights(data: &GroupedData, ga: &str, gb: &str) -> Result<CanonicalWeights> {
    let xa = centered(data, ga)?;
    let xb = centered(data, gb)?;
    let (n, p, q) = (xa.nrows(), xa.ncols(), xb.ncols());
    if n <= p + q {
        return Err(Error::invalid(format!(
            "canonical correlation needs n > p + q, got n={n}, p+q={}",
            p + q
        )));
    }
    let saa = sample_cov(&xa, &xa);
    let sbb = sample_cov(&xb, &xb);
    let sab = sample_cov(&xa, &xb);
    let la = ridge_cholesky(saa.clone())?;
    let lb = ridge_cholesky(sbb.clone())?;
    let la_l = la.l();
    let lb_l = lb.l();

    // M = La^{-1} Sab Lb^{-T}; the squared canonical correlations are the
    // eigenvalues of M M'.
    let tmp = la_l
        .solve_lower_triangular(&sab)
        .ok_or_else(|| Error::degenerate("triangular solve failed"))?;
    let m = lb_l
        .solve_lower_triangular(&tmp.transpose())
        .ok_or_else(|| Error::degenerate("triangular solve failed"))?
        .transpose();
    let mmt = &m * m.transpose();

    let mut v = DVector::from_fn(p, |i, _| 1.0 + 0.1 * i as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..POWER_MAX_ITER {
        let next = &mmt * &v;
        let norm = next.norm();
        if norm == 0.0 {
            lambda = 0.0;
            converged = true;
            break;
        }
        let new_lambda = v.dot(&next);
        v = next / norm;
        if (new_lambda - lambda).abs() <= POWER_TOL * new_lambda.abs().max(f64::MIN_POSITIVE) {
            lambda = new_lambda;
            converged = true;
            break;
        }
        lambda = new_lambda;
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "canonical correlation power iteration",
            iterations: POWER_MAX_ITER,
        });
    }

    let wa = la_l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::degenerate("triangular solve failed"))?;
    let wb = lb.solve(&(sab.transpose() * &wa));
    let scale = |w: DVector<f64>, s: &DMatrix<f64>| -> Vec<f64> {
        let var = (w.transpose() * s * &w)[(0, 0)];
        if var > 0.0 {
            (w / var.sqrt()).iter().copied().collect()
        } else {
            w.iter().copied().collect()
        }
    };
    Ok(CanonicalWeights {
        wa: scale(wa, &saa),
        wb: scale(wb, &sbb),
        rho: lambda.max(0.0).sqrt().min(1.0),
    })
}
