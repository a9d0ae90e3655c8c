//! Collapsing functions: maps from a random vector (or a pair of independent
//! copies of it) to a scalar.
//!
//! One-sample kinds produce `n` values. Pairwise kinds produce `n(n-1)/2`
//! values enumerated over `i < j` in lexicographic order, so the pairwise
//! series of two groups collapsed from the same sample align index by index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{GroupView, GroupedData, Matrix};
use crate::error::{Error, Result};
use crate::rank::{pit_pseudo_observations, pseudo_observations};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Largest,
    Smallest,
}

fn default_minkowski_order() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
    Canberra,
    Minkowski {
        #[serde(default = "default_minkowski_order")]
        r: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Kernel {
    Linear,
    /// `(1 + x'y)^degree`
    Polynomial {
        degree: u32,
    },
    /// `exp(-|x - y|^2 / (2 sigma^2))`; `sigma` defaults to the median
    /// pairwise Euclidean distance of the group being collapsed.
    Gaussian {
        #[serde(default)]
        sigma: Option<f64>,
    },
    /// `prod_t exp(kappa_t cos(x_t - y_t))`
    VonMises {
        kappa: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CollapseKind {
    /// `w'x`; equal weights `1/p` when `weights` is omitted.
    WeightedAverage {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// Mean of the `m` largest (or smallest) components.
    ExtremeAverage {
        m: usize,
        direction: Extreme,
    },
    Maximum,
    Minimum,
    Distance {
        metric: DistanceMetric,
    },
    Kernel {
        kernel: Kernel,
    },
    /// `1{x <= x'}` componentwise.
    MultivariateRank,
    /// Empirical multivariate probability integral transform.
    Pit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    OneSample,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseSpec {
    #[serde(flatten)]
    pub kind: CollapseKind,
    /// Replace every column by its pseudo-observations before collapsing.
    #[serde(default)]
    pub rank_margins: bool,
}

impl CollapseSpec {
    pub fn new(kind: CollapseKind) -> Self {
        Self {
            kind,
            rank_margins: false,
        }
    }

    pub fn with_rank_margins(mut self, on: bool) -> Self {
        self.rank_margins = on;
        self
    }

    pub fn average() -> Self {
        Self::new(CollapseKind::WeightedAverage { weights: None })
    }

    pub fn distance(metric: DistanceMetric) -> Self {
        Self::new(CollapseKind::Distance { metric })
    }

    pub fn arity(&self) -> Arity {
        match self.kind {
            CollapseKind::Distance { .. }
            | CollapseKind::Kernel { .. }
            | CollapseKind::MultivariateRank => Arity::Pairwise,
            _ => Arity::OneSample,
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self.kind {
            CollapseKind::WeightedAverage { .. } => "weighted-average",
            CollapseKind::ExtremeAverage { .. } => "extreme-average",
            CollapseKind::Maximum => "maximum",
            CollapseKind::Minimum => "minimum",
            CollapseKind::Distance { .. } => "distance",
            CollapseKind::Kernel { .. } => "kernel",
            CollapseKind::MultivariateRank => "multivariate-rank",
            CollapseKind::Pit => "pit",
        }
    }
}

/// Output of collapsing one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedSample {
    /// One value per observation, or one per pair `i < j`.
    pub values: Vec<f64>,
    /// For asymmetric pairwise kernels: the value with arguments swapped,
    /// `S(x_j, x_i)`, aligned with `values`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<Vec<f64>>,
    pub arity: Arity,
    pub source_n: usize,
}

impl CollapsedSample {
    pub fn one_sample(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            reverse: None,
            arity: Arity::OneSample,
            source_n: n,
        }
    }

    /// Wrap a symmetric pairwise series of length `n(n-1)/2`.
    pub fn pairwise(values: Vec<f64>, source_n: usize) -> Result<Self> {
        let k = pair_count(source_n);
        if values.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            reverse: None,
            arity: Arity::Pairwise,
            source_n,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `S(x_i, x_j)` for any ordered pair `i != j` of a pairwise sample.
    pub fn pair_value(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j);
        if i < j {
            self.values[pair_index(self.source_n, i, j)]
        } else {
            let idx = pair_index(self.source_n, j, i);
            match &self.reverse {
                Some(r) => r[idx],
                None => self.values[idx],
            }
        }
    }
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn weighted_average(x: &[f64], w: &[f64]) -> Result<f64> {
    check_len(x, w)?;
    validate_weights(w)?;
    Ok(x.iter().zip(w).map(|(a, b)| a * b).sum())
}

fn validate_weights(w: &[f64]) -> Result<()> {
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!("weights must sum to 1, got {s}")));
    }
    Ok(())
}

pub fn extreme_average(x: &[f64], m: usize, direction: Extreme) -> Result<f64> {
    if m == 0 || m > x.len() {
        return Err(Error::invalid(format!(
            "extreme average needs 1 <= m <= {}, got {m}",
            x.len()
        )));
    }
    let mut v = x.to_vec();
    match direction {
        Extreme::Largest => v.sort_by(|a, b| b.total_cmp(a)),
        Extreme::Smallest => v.sort_by(f64::total_cmp),
    }
    Ok(v[..m].iter().sum::<f64>() / m as f64)
}

pub fn pairwise_distance(x: &[f64], y: &[f64], metric: DistanceMetric) -> Result<f64> {
    check_len(x, y)?;
    let pairs = x.iter().zip(y);
    Ok(match metric {
        DistanceMetric::Euclidean => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        DistanceMetric::Manhattan => pairs.map(|(a, b)| (a - b).abs()).sum(),
        DistanceMetric::Canberra => pairs
            .map(|(a, b)| {
                let den = a.abs() + b.abs();
                if den == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / den
                }
            })
            .sum(),
        DistanceMetric::Minkowski { r } => {
            if !(r >= 1.0) {
                return Err(Error::invalid(format!(
                    "Minkowski order must be >= 1, got {r}"
                )));
            }
            pairs
                .map(|(a, b)| (a - b).abs().powf(r))
                .sum::<f64>()
                .powf(1.0 / r)
        }
    })
}

pub fn kernel_similarity(x: &[f64], y: &[f64], kernel: &Kernel) -> Result<f64> {
    check_len(x, y)?;
    let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    Ok(match kernel {
        Kernel::Linear => dot(),
        Kernel::Polynomial { degree } => {
            if *degree == 0 {
                return Err(Error::invalid("polynomial kernel degree must be >= 1"));
            }
            (1.0 + dot()).powi(*degree as i32)
        }
        Kernel::Gaussian { sigma } => {
            let sigma = sigma.ok_or_else(|| {
                Error::invalid("Gaussian kernel bandwidth must be resolved before evaluation")
            })?;
            if !(sigma > 0.0) {
                return Err(Error::invalid(format!(
                    "Gaussian sigma must be > 0, got {sigma}"
                )));
            }
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
        Kernel::VonMises { kappa } => {
            check_len(x, kappa)?;
            let s: f64 = x
                .iter()
                .zip(y)
                .zip(kappa)
                .map(|((a, b), k)| k * (a - b).cos())
                .sum();
            s.exp()
        }
    })
}

pub fn multivariate_rank_indicator(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    Ok(if x.iter().zip(y).all(|(a, b)| a <= b) {
        1.0
    } else {
        0.0
    })
}

/// Collapse group `group` of `data` according to `spec`.
pub fn collapse_group(
    data: &GroupedData,
    group: &str,
    spec: &CollapseSpec,
) -> Result<CollapsedSample> {
    let view = data.view(group)?;
    let matrix = if spec.rank_margins {
        rank_columns(&view)?
    } else {
        view.to_matrix()
    };
    collapse_matrix(&matrix, spec)
}

/// Collapse the rows of a bare matrix (one row per observation).
pub fn collapse_matrix(m: &Matrix, spec: &CollapseSpec) -> Result<CollapsedSample> {
    let n = m.nrows();
    let p = m.ncols();
    match &spec.kind {
        CollapseKind::WeightedAverage { weights } => {
            let w = match weights {
                Some(w) => {
                    if w.len() != p {
                        return Err(Error::DimensionMismatch {
                            expected: p,
                            got: w.len(),
                        });
                    }
                    validate_weights(w)?;
                    w.clone()
                }
                None => vec![1.0 / p as f64; p],
            };
            let values = m
                .rows()
                .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum())
                .collect();
            Ok(CollapsedSample::one_sample(values))
        }
        CollapseKind::ExtremeAverage { m: k, direction } => {
            let values = m
                .rows()
                .map(|r| extreme_average(r, *k, *direction))
                .collect::<Result<_>>()?;
            Ok(CollapsedSample::one_sample(values))
        }
        CollapseKind::Maximum => Ok(CollapsedSample::one_sample(
            m.rows()
                .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )),
        CollapseKind::Minimum => Ok(CollapsedSample::one_sample(
            m.rows()
                .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
                .collect(),
        )),
        CollapseKind::Pit => Ok(CollapsedSample::one_sample(pit_pseudo_observations(m)?.w)),
        CollapseKind::Distance { metric } => {
            // validate parameters once before the pair loop
            pairwise_distance(&vec![0.0; p], &vec![0.0; p], *metric)?;
            pairwise_symmetric(m, |a, b| {
                pairwise_distance(a, b, *metric).unwrap_or(f64::NAN)
            })
        }
        CollapseKind::Kernel { kernel } => {
            let kernel = match kernel {
                Kernel::Gaussian { sigma: None } => Kernel::Gaussian {
                    sigma: Some(median_pairwise_distance(m)?),
                },
                k => k.clone(),
            };
            kernel_similarity(&vec![0.0; p], &vec![0.0; p], &kernel)?;
            pairwise_symmetric(m, |a, b| {
                kernel_similarity(a, b, &kernel).unwrap_or(f64::NAN)
            })
        }
        CollapseKind::MultivariateRank => {
            let forward = pairwise_values(m, |a, b| {
                multivariate_rank_indicator(a, b).unwrap_or(f64::NAN)
            });
            let reverse = pairwise_values(m, |a, b| {
                multivariate_rank_indicator(b, a).unwrap_or(f64::NAN)
            });
            Ok(CollapsedSample {
                values: forward,
                reverse: Some(reverse),
                arity: Arity::Pairwise,
                source_n: n,
            })
        }
    }
}

fn pairwise_values(m: &Matrix, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = m.row(i);
            let f = &f;
            (i + 1..n).map(move |j| f(ri, m.row(j)))
        })
        .collect()
}

fn pairwise_symmetric(
    m: &Matrix,
    f: impl Fn(&[f64], &[f64]) -> f64 + Sync,
) -> Result<CollapsedSample> {
    let values = pairwise_values(m, f);
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::degenerate("pairwise collapse produced NaN"));
    }
    CollapsedSample::pairwise(values, m.nrows())
}

/// Median of the Euclidean distances over all pairs `i < j`.
pub fn median_pairwise_distance(m: &Matrix) -> Result<f64> {
    let mut d = pairwise_values(m, |a, b| {
        pairwise_distance(a, b, DistanceMetric::Euclidean).unwrap_or(f64::NAN)
    });
    if d.is_empty() {
        return Err(Error::invalid("median distance needs at least two rows"));
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    let med = if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    };
    if !(med > 0.0) {
        return Err(Error::degenerate("median pairwise distance is zero"));
    }
    Ok(med)
}

fn rank_columns(view: &GroupView<'_>) -> Result<Matrix> {
    let n = view.n();
    let p = view.dim();
    let mut out = Matrix::zeros(n, p);
    for t in 0..p {
        let u = pseudo_observations(&view.column(t))?.u;
        for (i, v) in u.into_iter().enumerate() {
            out.row_mut(i)[t] = v;
        }
    }
    Ok(out)
}
