//! Asymptotic variances of collapsed correlation and Kendall's tau
//! estimators (delta method on U-statistic moment vectors), confidence
//! intervals, and the pairs bootstrap.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archimedean::row_rng;
use crate::collapse::{Arity, CollapseSpec, CollapsedSample};
use crate::data::GroupedData;
use crate::error::{Error, Result};
use crate::measures::{
    chi_collapsed, chi_pit_pearson, chi_pit_spearman, CiMethod, DependenceEstimate, MeasureKind,
    MeasureSpec,
};
use crate::normal::normal_quantile;

/// Correlations this close to +-1 sit on the boundary where the delta method
/// has no non-degenerate limit.
const BOUNDARY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentVector5 {
    pub m_x: f64,
    pub m_y: f64,
    pub m_xx: f64,
    pub m_yy: f64,
    pub m_xy: f64,
}

impl MomentVector5 {
    pub fn as_array(&self) -> [f64; 5] {
        [self.m_x, self.m_y, self.m_xx, self.m_yy, self.m_xy]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            m_x: a[0],
            m_y: a[1],
            m_xx: a[2],
            m_yy: a[3],
            m_xy: a[4],
        }
    }

    fn variances(&self) -> Result<(f64, f64)> {
        let vx = self.m_xx - self.m_x * self.m_x;
        let vy = self.m_yy - self.m_y * self.m_y;
        if !(vx > 0.0 && vy > 0.0) {
            return Err(Error::degenerate("zero variance in moment vector"));
        }
        Ok((vx, vy))
    }
}

/// `f(a, b, c, d, e) = (e - ab) / (sqrt(c - a^2) sqrt(d - b^2))`.
pub fn f5(m: &MomentVector5) -> Result<f64> {
    let (vx, vy) = m.variances()?;
    Ok((m.m_xy - m.m_x * m.m_y) / (vx.sqrt() * vy.sqrt()))
}

pub fn gradient_f5(m: &MomentVector5) -> Result<[f64; 5]> {
    let (vx, vy) = m.variances()?;
    let d = vx.sqrt() * vy.sqrt();
    let num = m.m_xy - m.m_x * m.m_y;
    Ok([
        (-m.m_y + m.m_x * num / vx) / d,
        (-m.m_x + m.m_y * num / vy) / d,
        -num / (2.0 * vx * d),
        -num / (2.0 * vy * d),
        1.0 / d,
    ])
}

/// Concordance-probability moments for Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentVector3 {
    pub m_x: f64,
    pub m_y: f64,
    pub m_xy: f64,
}

impl MomentVector3 {
    fn variances(&self) -> Result<(f64, f64)> {
        let vx = self.m_x - self.m_x * self.m_x;
        let vy = self.m_y - self.m_y * self.m_y;
        if !(vx > 0.0 && vy > 0.0) {
            return Err(Error::degenerate(
                "concordance moment on the boundary {0, 1}",
            ));
        }
        Ok((vx, vy))
    }
}

/// `f(a, b, c) = (c - ab) / (sqrt(a - a^2) sqrt(b - b^2))`.
pub fn f3(m: &MomentVector3) -> Result<f64> {
    let (vx, vy) = m.variances()?;
    Ok((m.m_xy - m.m_x * m.m_y) / (vx.sqrt() * vy.sqrt()))
}

pub fn gradient_f3(m: &MomentVector3) -> Result<[f64; 3]> {
    let (vx, vy) = m.variances()?;
    let d = vx.sqrt() * vy.sqrt();
    let num = m.m_xy - m.m_x * m.m_y;
    Ok([
        (-m.m_y - num * (1.0 - 2.0 * m.m_x) / (2.0 * vx)) / d,
        (-m.m_x - num * (1.0 - 2.0 * m.m_y) / (2.0 * vy)) / d,
        1.0 / d,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceCase {
    /// One collapsed value per observation.
    PVariate,
    /// One collapsed value per pair of observations.
    #[serde(rename = "2p-variate")]
    TwoPVariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Plug-in estimate of the statistic the variance refers to.
    pub estimate: f64,
    pub sigma2: f64,
    pub case: VarianceCase,
    pub n: usize,
    /// Set when a negative plug-in value was clipped to zero.
    pub clipped: bool,
}

impl VarianceEstimate {
    fn new(estimate: f64, raw: f64, case: VarianceCase, n: usize) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::degenerate("non-finite variance estimate"));
        }
        Ok(Self {
            estimate,
            sigma2: raw.max(0.0),
            case,
            n,
            clipped: raw < 0.0,
        })
    }

    pub fn std_error(&self) -> f64 {
        (self.sigma2 / self.n as f64).sqrt()
    }

    /// `estimate +- z sqrt(sigma2 / n)`, clipped to `[-1, 1]`.
    pub fn ci(&self, level: f64) -> Result<(f64, f64)> {
        asymptotic_ci(self.estimate, self.sigma2, self.n, level)
    }
}

pub fn asymptotic_ci(estimate: f64, sigma2: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let half = z * (sigma2 / n as f64).sqrt();
    Ok(((estimate - half).max(-1.0), (estimate + half).min(1.0)))
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Sample covariance (denominator `n - 1`) of the columns of `rows`.
fn covariance<const D: usize>(rows: &[[f64; D]]) -> [[f64; D]; D] {
    let n = rows.len() as f64;
    let mut mean = [0.0; D];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = [[0.0; D]; D];
    for r in rows {
        for a in 0..D {
            let da = r[a] - mean[a];
            for b in a..D {
                cov[a][b] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..D {
        for b in a..D {
            cov[a][b] /= n - 1.0;
            cov[b][a] = cov[a][b];
        }
    }
    cov
}

fn quadratic<const D: usize>(g: &[f64; D], s: &[[f64; D]; D]) -> f64 {
    let mut acc = 0.0;
    for a in 0..D {
        for b in 0..D {
            acc += g[a] * s[a][b] * g[b];
        }
    }
    acc
}

/// Affine map to mean 0 and unit scale; the correlation and its delta-method
/// variance are invariant under it, and it keeps the moment vector well
/// conditioned.
fn standardizer(v: &[f64]) -> Result<(f64, f64)> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::degenerate("constant collapsed sample"));
    }
    Ok((mean, sd))
}

fn check_boundary(chi: f64) -> Result<()> {
    if chi.abs() >= 1.0 - BOUNDARY {
        return Err(Error::degenerate(
            "correlation on the boundary +-1; asymptotic variance undefined",
        ));
    }
    Ok(())
}

/// Plug-in variance of the sample correlation of one-sample collapses.
pub fn sigma2_chi_case1(sx: &[f64], sy: &[f64]) -> Result<VarianceEstimate> {
    if sx.len() != sy.len() {
        return Err(Error::DimensionMismatch {
            expected: sx.len(),
            got: sy.len(),
        });
    }
    let n = sx.len();
    if n < 3 {
        return Err(Error::invalid("asymptotic variance needs n >= 3"));
    }
    let (mx, dx) = standardizer(sx)?;
    let (my, dy) = standardizer(sy)?;
    let z: Vec<[f64; 5]> = sx
        .iter()
        .zip(sy)
        .map(|(x, y)| {
            let (x, y) = ((x - mx) / dx, (y - my) / dy);
            [x, y, x * x, y * y, x * y]
        })
        .collect();
    let mut m = [0.0; 5];
    for r in &z {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v / n as f64;
        }
    }
    let mv = MomentVector5::from_array(m);
    let chi = f5(&mv)?;
    check_boundary(chi)?;
    let g = gradient_f5(&mv)?;
    VarianceEstimate::new(
        chi,
        quadratic(&g, &covariance(&z)),
        VarianceCase::PVariate,
        n,
    )
}

fn check_pairwise(sx: &CollapsedSample, sy: &CollapsedSample) -> Result<usize> {
    if sx.arity != Arity::Pairwise || sy.arity != Arity::Pairwise {
        return Err(Error::invalid("pairwise collapsed samples required"));
    }
    if sx.source_n != sy.source_n {
        return Err(Error::DimensionMismatch {
            expected: sx.source_n,
            got: sy.source_n,
        });
    }
    let n = sx.source_n;
    if n < 3 {
        return Err(Error::invalid("asymptotic variance needs n >= 3"));
    }
    Ok(n)
}

/// Leave-self-out conditional means `g(i) = (1/(n-1)) sum_{j != i} h(i, j)`
/// of the five symmetrised kernels, and the overall pair moments.
pub fn case2_g_series(
    sx: &CollapsedSample,
    sy: &CollapsedSample,
) -> Result<(MomentVector5, Vec<[f64; 5]>)> {
    let n = check_pairwise(sx, sy)?;
    let all = |s: &CollapsedSample| -> Vec<f64> {
        let mut v = s.values.clone();
        if let Some(r) = &s.reverse {
            v.extend_from_slice(r);
        }
        v
    };
    let (mx, dx) = standardizer(&all(sx))?;
    let (my, dy) = standardizer(&all(sy))?;
    let kernel = |i: usize, j: usize| -> [f64; 5] {
        let (a, b) = (
            (sx.pair_value(i, j) - mx) / dx,
            (sy.pair_value(i, j) - my) / dy,
        );
        let (c, d) = (
            (sx.pair_value(j, i) - mx) / dx,
            (sy.pair_value(j, i) - my) / dy,
        );
        [
            0.5 * (a + c),
            0.5 * (b + d),
            0.5 * (a * a + c * c),
            0.5 * (b * b + d * d),
            0.5 * (a * b + c * d),
        ]
    };
    let g: Vec<[f64; 5]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 5];
            for j in (0..n).filter(|&j| j != i) {
                for (a, v) in acc.iter_mut().zip(kernel(i, j)) {
                    *a += v;
                }
            }
            acc.map(|v| v / (n - 1) as f64)
        })
        .collect();
    // averaging g over i averages h over all ordered pairs, which equals the
    // average over i < j because h is symmetric
    let mut m = [0.0; 5];
    for r in &g {
        for (a, v) in m.iter_mut().zip(r) {
            *a += v / n as f64;
        }
    }
    Ok((MomentVector5::from_array(m), g))
}

/// Plug-in variance of the correlation of pairwise collapses,
/// `4 grad' Sigma_g grad`.
pub fn sigma2_chi_case2(sx: &CollapsedSample, sy: &CollapsedSample) -> Result<VarianceEstimate> {
    let (m, g) = case2_g_series(sx, sy)?;
    let chi = f5(&m)?;
    check_boundary(chi)?;
    let grad = gradient_f5(&m)?;
    let raw = 4.0 * quadratic(&grad, &covariance(&g));
    VarianceEstimate::new(chi, raw, VarianceCase::TwoPVariate, sx.source_n)
}

/// Route to the one-sample or pairwise variance by arity.
pub fn sigma2_chi(sx: &CollapsedSample, sy: &CollapsedSample) -> Result<VarianceEstimate> {
    match sx.arity {
        Arity::OneSample => sigma2_chi_case1(&sx.values, &sy.values),
        Arity::Pairwise => sigma2_chi_case2(sx, sy),
    }
}

/// How the order-4 concordance U-statistic of pairwise collapses is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TupleSampling {
    /// All `C(n, 4)` tuples when that is at most the default budget,
    /// otherwise `DEFAULT_TUPLES` random tuples.
    Auto,
    Exhaustive,
    /// `b` seeded random 4-subsets; if `b >= C(n, 4)` every subset is visited
    /// once in random order.
    Incomplete {
        b: u64,
    },
}

pub const DEFAULT_TUPLES: u64 = 200_000;

fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

/// Concordance moments and their leave-one-out series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMoments {
    pub m: MomentVector3,
    /// Per-observation conditional moments `(g_x, g_y, g_xy)`.
    pub g: Vec<[f64; 3]>,
    /// Number of kernel evaluations behind `m`.
    pub tuples: u64,
}

/// Pairwise concordance moments of two scalar series, using the symmetrised
/// kernels `h_x = (1{x_i <= x_j} + 1{x_j <= x_i}) / 2` and
/// `h_xy = (1{x_i <= x_j, y_i <= y_j} + 1{x_j <= x_i, y_j <= y_i}) / 2`.
pub fn tau_case1_moments(sx: &[f64], sy: &[f64]) -> Result<TauMoments> {
    if sx.len() != sy.len() {
        return Err(Error::DimensionMismatch {
            expected: sx.len(),
            got: sy.len(),
        });
    }
    let n = sx.len();
    if n < 3 {
        return Err(Error::invalid("asymptotic variance needs n >= 3"));
    }
    // counts in units of 1/2
    let g: Vec<[u64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0u64; 3];
            for j in (0..n).filter(|&j| j != i) {
                let (a, b) = (sx[i] <= sx[j], sx[j] <= sx[i]);
                let (c, d) = (sy[i] <= sy[j], sy[j] <= sy[i]);
                acc[0] += a as u64 + b as u64;
                acc[1] += c as u64 + d as u64;
                acc[2] += (a && c) as u64 + (b && d) as u64;
            }
            acc
        })
        .collect();
    let denom = 2.0 * (n - 1) as f64;
    let total: [u64; 3] = g
        .iter()
        .fold([0; 3], |t, r| [t[0] + r[0], t[1] + r[1], t[2] + r[2]]);
    let all = denom * n as f64;
    Ok(TauMoments {
        m: MomentVector3 {
            m_x: total[0] as f64 / all,
            m_y: total[1] as f64 / all,
            m_xy: total[2] as f64 / all,
        },
        g: g.iter().map(|r| r.map(|v| v as f64 / denom)).collect(),
        tuples: (n * (n - 1) / 2) as u64,
    })
}

/// Order-4 kernel on observations `t = [i, j, k, l]`, in units of 1/6: the
/// pair values are compared over the three ways of splitting the tuple into
/// two pairs, in both orientations.
fn tuple_kernel(sx: &CollapsedSample, sy: &CollapsedSample, t: [usize; 4]) -> [u64; 3] {
    let splits = [
        ((t[0], t[1]), (t[2], t[3])),
        ((t[0], t[2]), (t[1], t[3])),
        ((t[0], t[3]), (t[1], t[2])),
    ];
    let mut acc = [0u64; 3];
    for ((a, b), (c, d)) in splits {
        let (x1, x2) = (sx.pair_value(a, b), sx.pair_value(c, d));
        let (y1, y2) = (sy.pair_value(a, b), sy.pair_value(c, d));
        let (p, q) = (x1 <= x2, x2 <= x1);
        let (r, s) = (y1 <= y2, y2 <= y1);
        acc[0] += p as u64 + q as u64;
        acc[1] += r as u64 + s as u64;
        acc[2] += (p && r) as u64 + (q && s) as u64;
    }
    acc
}

/// Combination of rank `r` in colexicographic order (combinatorial number
/// system), returned ascending.
fn unrank4(mut r: u64, n: usize) -> [usize; 4] {
    let mut out = [0usize; 4];
    let mut hi = n;
    for k in (1..=4u64).rev() {
        // largest c < hi with C(c, k) <= r
        let mut c = k as usize - 1;
        let (mut lo, mut up) = (k as usize - 1, hi - 1);
        while lo <= up {
            let mid = (lo + up) / 2;
            if choose(mid as u64, k) <= r {
                c = mid;
                lo = mid + 1;
            } else {
                if mid == 0 {
                    break;
                }
                up = mid - 1;
            }
        }
        out[k as usize - 1] = c;
        r -= choose(c as u64, k);
        hi = c;
    }
    out
}

#[derive(Default, Clone)]
struct TupleSums {
    total: [u64; 3],
    per_obs: Vec<[u64; 3]>,
    visits: Vec<u64>,
    tuples: u64,
}

impl TupleSums {
    fn new(n: usize) -> Self {
        Self {
            total: [0; 3],
            per_obs: vec![[0; 3]; n],
            visits: vec![0; n],
            tuples: 0,
        }
    }

    fn add(&mut self, t: [usize; 4], h: [u64; 3]) {
        for a in 0..3 {
            self.total[a] += h[a];
        }
        for &i in &t {
            for a in 0..3 {
                self.per_obs[i][a] += h[a];
            }
            self.visits[i] += 1;
        }
        self.tuples += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for a in 0..3 {
            self.total[a] += other.total[a];
        }
        for (x, y) in self.per_obs.iter_mut().zip(&other.per_obs) {
            for a in 0..3 {
                x[a] += y[a];
            }
        }
        for (x, y) in self.visits.iter_mut().zip(&other.visits) {
            *x += y;
        }
        self.tuples += other.tuples;
        self
    }
}

const CHUNK: u64 = 4096;

/// Concordance moments of pairwise collapses as order-4 U-statistics.
pub fn tau_case2_moments(
    sx: &CollapsedSample,
    sy: &CollapsedSample,
    sampling: TupleSampling,
    seed: u64,
) -> Result<TauMoments> {
    let n = check_pairwise(sx, sy)?;
    if n < 4 {
        return Err(Error::invalid("pairwise tau variance needs n >= 4"));
    }
    let total = choose(n as u64, 4);
    let sampling = match sampling {
        TupleSampling::Auto if total <= DEFAULT_TUPLES => TupleSampling::Exhaustive,
        TupleSampling::Auto => TupleSampling::Incomplete { b: DEFAULT_TUPLES },
        other => other,
    };
    let sums = match sampling {
        TupleSampling::Exhaustive => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = TupleSums::new(n);
                for j in i + 1..n {
                    for k in j + 1..n {
                        for l in k + 1..n {
                            let t = [i, j, k, l];
                            s.add(t, tuple_kernel(sx, sy, t));
                        }
                    }
                }
                s
            })
            .reduce(|| TupleSums::new(n), TupleSums::merge),
        TupleSampling::Incomplete { b } if b >= total => {
            let mut ranks: Vec<u64> = (0..total).collect();
            ranks.shuffle(&mut row_rng(seed, 0));
            ranks
                .par_chunks(CHUNK as usize)
                .map(|chunk| {
                    let mut s = TupleSums::new(n);
                    for &r in chunk {
                        let t = unrank4(r, n);
                        s.add(t, tuple_kernel(sx, sy, t));
                    }
                    s
                })
                .reduce(|| TupleSums::new(n), TupleSums::merge)
        }
        TupleSampling::Incomplete { b } => {
            if b == 0 {
                return Err(Error::invalid("number of tuples must be positive"));
            }
            let chunks = b.div_ceil(CHUNK);
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = row_rng(seed, c);
                    let mut s = TupleSums::new(n);
                    let len = CHUNK.min(b - c * CHUNK);
                    for _ in 0..len {
                        let idx = rand::seq::index::sample(&mut rng, n, 4);
                        let mut t = [idx.index(0), idx.index(1), idx.index(2), idx.index(3)];
                        t.sort_unstable();
                        s.add(t, tuple_kernel(sx, sy, t));
                    }
                    s
                })
                .reduce(|| TupleSums::new(n), TupleSums::merge)
        }
        TupleSampling::Auto => unreachable!(),
    };
    if let Some(i) = sums.visits.iter().position(|&v| v == 0) {
        return Err(Error::invalid(format!(
            "observation {i} appears in no sampled tuple; increase the number of tuples"
        )));
    }
    let all = 6.0 * sums.tuples as f64;
    Ok(TauMoments {
        m: MomentVector3 {
            m_x: sums.total[0] as f64 / all,
            m_y: sums.total[1] as f64 / all,
            m_xy: sums.total[2] as f64 / all,
        },
        g: sums
            .per_obs
            .iter()
            .zip(&sums.visits)
            .map(|(h, &v)| h.map(|x| x as f64 / (6.0 * v as f64)))
            .collect(),
        tuples: sums.tuples,
    })
}

/// Asymptotic variance of the sample tau of one-sample collapses,
/// `4 grad' Sigma grad`.
pub fn tau_asymptotics_case1(sx: &[f64], sy: &[f64]) -> Result<VarianceEstimate> {
    let tm = tau_case1_moments(sx, sy)?;
    tau_variance(&tm, 4.0, VarianceCase::PVariate, sx.len())
}

/// Asymptotic variance of tau for pairwise collapses, `16 grad' Sigma grad`.
pub fn tau_asymptotics_case2(
    sx: &CollapsedSample,
    sy: &CollapsedSample,
    sampling: TupleSampling,
    seed: u64,
) -> Result<VarianceEstimate> {
    let tm = tau_case2_moments(sx, sy, sampling, seed)?;
    tau_variance(&tm, 16.0, VarianceCase::TwoPVariate, sx.source_n)
}

pub fn tau_asymptotics(
    sx: &CollapsedSample,
    sy: &CollapsedSample,
    sampling: TupleSampling,
    seed: u64,
) -> Result<VarianceEstimate> {
    match sx.arity {
        Arity::OneSample => tau_asymptotics_case1(&sx.values, &sy.values),
        Arity::Pairwise => tau_asymptotics_case2(sx, sy, sampling, seed),
    }
}

fn tau_variance(
    tm: &TauMoments,
    factor: f64,
    case: VarianceCase,
    n: usize,
) -> Result<VarianceEstimate> {
    let est = f3(&tm.m)?;
    check_boundary(est)?;
    let grad = gradient_f3(&tm.m)?;
    VarianceEstimate::new(est, factor * quadratic(&grad, &covariance(&tm.g)), case, n)
}

/// Statistic recomputed on every bootstrap resample.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    PitPearson,
    PitSpearman,
    Collapsed {
        cspec: CollapseSpec,
        mspec: MeasureSpec,
    },
}

impl Estimator {
    pub fn measure(&self) -> MeasureKind {
        match self {
            Estimator::PitPearson => MeasureKind::Pearson,
            Estimator::PitSpearman => MeasureKind::Spearman,
            Estimator::Collapsed { mspec, .. } => mspec.kind,
        }
    }

    pub fn estimate(&self, data: &GroupedData, ga: &str, gb: &str) -> Result<DependenceEstimate> {
        match self {
            Estimator::PitPearson => chi_pit_pearson(data, ga, gb),
            Estimator::PitSpearman => chi_pit_spearman(data, ga, gb),
            Estimator::Collapsed { cspec, mspec } => chi_collapsed(data, ga, gb, cspec, mspec),
        }
    }
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const MIN_BOOTSTRAP: usize = 100;

/// Pairs-bootstrap percentile interval. Rows are resampled with replacement,
/// and the estimator (including any re-ranking) is recomputed per resample.
pub fn bootstrap_ci(
    data: &GroupedData,
    ga: &str,
    gb: &str,
    estimator: &Estimator,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<DependenceEstimate> {
    if b < MIN_BOOTSTRAP {
        return Err(Error::invalid(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP} resamples, got {b}"
        )));
    }
    check_level(level)?;
    let mut point = estimator.estimate(data, ga, gb)?;
    let n = data.n();
    let results: Vec<Result<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = row_rng(seed, r as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resample = data.select_rows(&rows)?;
            Ok(estimator.estimate(&resample, ga, gb)?.value)
        })
        .collect();
    let mut values = Vec::with_capacity(b);
    let mut failed = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed * 20 > b {
        return Err(Error::Bootstrap {
            failed,
            total: b,
            first: first.unwrap_or_default(),
        });
    }
    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lo = quantile_sorted(&values, alpha / 2.0).min(point.value);
    let hi = quantile_sorted(&values, 1.0 - alpha / 2.0).max(point.value);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd =
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt();
    point.std_error = Some(sd);
    point.ci = Some((lo, hi));
    point.level = Some(level);
    point.method = CiMethod::Bootstrap;
    if failed > 0 {
        point
            .warnings
            .push(format!("{failed} of {b} resamples failed and were dropped"));
    }
    Ok(point)
}

/// Attach an asymptotic interval to a point estimate of a Pearson or tau
/// measure computed on `sx`, `sy`.
pub fn with_asymptotic_ci(
    mut est: DependenceEstimate,
    sx: &CollapsedSample,
    sy: &CollapsedSample,
    level: f64,
    sampling: TupleSampling,
    seed: u64,
) -> Result<DependenceEstimate> {
    let var = match est.measure {
        MeasureKind::Pearson => sigma2_chi(sx, sy)?,
        MeasureKind::Tau => tau_asymptotics(sx, sy, sampling, seed)?,
        other => {
            return Err(Error::invalid(format!(
                "asymptotic intervals are available for pearson and tau, not {}",
                other.label()
            )))
        }
    };
    est.std_error = Some(var.std_error());
    est.ci = Some(asymptotic_ci(est.value, var.sigma2, var.n, level)?);
    est.level = Some(level);
    est.method = CiMethod::Asymptotic;
    if var.clipped {
        est.warnings
            .push("negative plug-in variance clipped to 0".to_string());
    }
    Ok(est)
}
