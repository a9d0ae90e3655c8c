//! Kendall distributions, joint Kendall distributions and Kendall copulas of
//! Archimedean models, their empirical counterparts, and the collapsed copula
//! of the componentwise maximum.

use std::sync::Arc;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::archimedean::{ln_factorial, log_sum_exp, row_rng, ArchimedeanGenerator};
use crate::data::{GroupedData, Matrix};
use crate::error::{Error, Result};
use crate::rank::{pit_pseudo_observations, PitPseudoObservations};

const BISECTION_STEPS: usize = 60;
const BISECTION_TOL: f64 = 1e-10;

fn check_unit(name: &str, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "{name} must lie in [0, 1], got {t}"
        )));
    }
    Ok(())
}

/// `n * ln(a)`, with the convention `0 * ln(0) = 0`.
fn ln_pow(n: usize, a: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * a.ln()
    }
}

/// Kendall distribution `K(t) = P(C(U) <= t)` of a `p`-dimensional
/// Archimedean copula.
pub fn kendall_univariate(gen: &ArchimedeanGenerator, p: usize, t: f64) -> Result<f64> {
    check_unit("t", t)?;
    if p == 0 {
        return Err(Error::invalid("dimension p must be >= 1"));
    }
    gen.ensure_order(p - 1)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    Ok(kendall_at_arg(gen, p, gen.psi_inv_unchecked(t)))
}

/// `K(psi(s))` evaluated directly from `s = psi^{-1}(t)`.
fn kendall_at_arg(gen: &ArchimedeanGenerator, p: usize, s: f64) -> f64 {
    if s.is_infinite() {
        return 0.0;
    }
    let terms = (0..p).map(|k| gen.ln_poisson_term(k, s));
    log_sum_exp(terms).exp().min(1.0)
}

/// Smallest `x` in `[lo, hi]` with `f(x) >= u`, for nondecreasing `f`.
fn bisect(f: impl Fn(f64) -> Result<f64>, u: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let width = hi - lo;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.is_nan() {
            return Err(Error::NonConvergence {
                what: "quantile bisection",
                iterations: BISECTION_STEPS,
            });
        }
        if v >= u {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= BISECTION_TOL * 1e-3 * width.max(1.0) {
            break;
        }
    }
    if hi - lo > BISECTION_TOL * width.max(1.0) {
        return Err(Error::NonConvergence {
            what: "quantile bisection",
            iterations: BISECTION_STEPS,
        });
    }
    Ok(hi)
}

/// Joint Kendall distribution of `(F_X(X), F_Y(Y))` when `(X, Y)` has a
/// `(p + q)`-dimensional Archimedean copula with generator `gen`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointKendallModel {
    pub gen: ArchimedeanGenerator,
    pub p: usize,
    pub q: usize,
}

impl JointKendallModel {
    pub fn new(gen: ArchimedeanGenerator, p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::invalid("group dimensions must be >= 1"));
        }
        Ok(Self { gen, p, q })
    }

    pub fn margin_x(&self, t: f64) -> Result<f64> {
        kendall_univariate(&self.gen, self.p, t)
    }

    pub fn margin_y(&self, t: f64) -> Result<f64> {
        kendall_univariate(&self.gen, self.q, t)
    }

    /// `K_{X,Y}(t1, t2)`.
    ///
    /// Expands `P(Erlang_p > V a, Erlang_q > V b)` with `a = psi^{-1}(t1)`,
    /// `b = psi^{-1}(t2)` into
    /// `sum_{k<p, l<q} a^k b^l / (k! l!) (-1)^{k+l} psi^{(k+l)}(a + b)`.
    pub fn joint(&self, t1: f64, t2: f64) -> Result<f64> {
        check_unit("t1", t1)?;
        check_unit("t2", t2)?;
        self.gen.ensure_order(self.p + self.q - 2)?;
        if t1 == 0.0 || t2 == 0.0 {
            return Ok(0.0);
        }
        let a = self.gen.psi_inv_unchecked(t1);
        let b = self.gen.psi_inv_unchecked(t2);
        let s = a + b;
        if s == 0.0 {
            return Ok(1.0);
        }
        let mut terms = Vec::with_capacity(self.p * self.q);
        for m in 0..=(self.p + self.q - 2) {
            let deriv = self.gen.ln_abs_deriv(m, s);
            let lo = m.saturating_sub(self.q - 1);
            let hi = m.min(self.p - 1);
            for k in lo..=hi {
                let l = m - k;
                terms.push(ln_pow(k, a) - ln_factorial(k) + ln_pow(l, b) - ln_factorial(l) + deriv);
            }
        }
        Ok(log_sum_exp(terms.iter().copied()).exp().min(1.0))
    }

    pub fn quantile_x(&self, u: f64) -> Result<f64> {
        check_unit("u", u)?;
        bisect(|t| self.margin_x(t), u, 0.0, 1.0)
    }

    pub fn quantile_y(&self, u: f64) -> Result<f64> {
        check_unit("u", u)?;
        bisect(|t| self.margin_y(t), u, 0.0, 1.0)
    }

    /// Kendall copula `C_K(u1, u2) = K_{X,Y}(K_X^-(u1), K_Y^-(u2))`.
    pub fn copula(&self, u1: f64, u2: f64) -> Result<f64> {
        check_unit("u1", u1)?;
        check_unit("u2", u2)?;
        if u1 == 0.0 || u2 == 0.0 {
            return Ok(0.0);
        }
        if u1 == 1.0 {
            return Ok(u2);
        }
        if u2 == 1.0 {
            return Ok(u1);
        }
        let t1 = self.quantile_x(u1)?;
        let t2 = self.quantile_y(u2)?;
        self.joint(t1, t2)
    }

    /// `n` draws from the Kendall copula: sample the `(p + q)`-dimensional
    /// Archimedean copula, take `T1 = C_X(U)`, `T2 = C_Y(V)` and return
    /// `(K_X(T1), K_Y(T2))`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        self.gen.ensure_order(self.p.max(self.q) - 1)?;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut rng = row_rng(seed, r as u64);
                let v = self.gen.sample_frailty(&mut rng);
                // psi^{-1}(U_j) = E_j / V, so C_X(U) = psi(sum_j E_j / V)
                let mut block = |dim: usize| {
                    let e: f64 = (0..dim)
                        .map(|_| -> f64 { Exp1.sample(&mut rng) })
                        .sum::<f64>();
                    e / v
                };
                let s1 = block(self.p);
                let s2 = block(self.q);
                vec![
                    clamp_open(kendall_at_arg(&self.gen, self.p, s1)),
                    clamp_open(kendall_at_arg(&self.gen, self.q, s2)),
                ]
            })
            .collect();
        Matrix::from_rows(&rows)
    }
}

fn clamp_open(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Empirical joint Kendall distribution built from PIT pseudo-observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalKendall {
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl EmpiricalKendall {
    pub fn new(w1: PitPseudoObservations, w2: PitPseudoObservations) -> Result<Self> {
        if w1.w.len() != w2.w.len() {
            return Err(Error::DimensionMismatch {
                expected: w1.w.len(),
                got: w2.w.len(),
            });
        }
        if w1.w.is_empty() {
            return Err(Error::invalid("empty pseudo-observations"));
        }
        Ok(Self { w1: w1.w, w2: w2.w })
    }

    pub fn from_data(data: &GroupedData, group_a: &str, group_b: &str) -> Result<Self> {
        let w1 = pit_pseudo_observations(&data.view(group_a)?.to_matrix())?;
        let w2 = pit_pseudo_observations(&data.view(group_b)?.to_matrix())?;
        Self::new(w1, w2)
    }

    pub fn n(&self) -> usize {
        self.w1.len()
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    /// `K_n(t1, t2) = (1/n) #{i : W_i1 <= t1, W_i2 <= t2}`.
    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        let c = self
            .w1
            .iter()
            .zip(&self.w2)
            .filter(|(a, b)| **a <= t1 && **b <= t2)
            .count();
        c as f64 / self.n() as f64
    }

    pub fn margin_x(&self, t: f64) -> f64 {
        self.w1.iter().filter(|w| **w <= t).count() as f64 / self.n() as f64
    }

    pub fn margin_y(&self, t: f64) -> f64 {
        self.w2.iter().filter(|w| **w <= t).count() as f64 / self.n() as f64
    }
}

pub type JointCdf = dyn Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync;

/// A joint distribution function of `(X, Y)` viewed through the componentwise
/// maximum of each group.
#[derive(Clone)]
pub struct MaxCollapsedModel {
    cdf: Arc<JointCdf>,
    pub p: usize,
    pub q: usize,
    /// Support of the X components, used in place of infinite arguments.
    pub x_support: (f64, f64),
    pub y_support: (f64, f64),
}

impl std::fmt::Debug for MaxCollapsedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaxCollapsedModel")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("x_support", &self.x_support)
            .field("y_support", &self.y_support)
            .finish_non_exhaustive()
    }
}

impl MaxCollapsedModel {
    pub fn new(
        cdf: impl Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync + 'static,
        p: usize,
        q: usize,
        x_support: (f64, f64),
        y_support: (f64, f64),
    ) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::invalid("group dimensions must be >= 1"));
        }
        if !(x_support.0 < x_support.1 && y_support.0 < y_support.1) {
            return Err(Error::invalid("support bounds must satisfy lo < hi"));
        }
        Ok(Self {
            cdf: Arc::new(cdf),
            p,
            q,
            x_support,
            y_support,
        })
    }

    /// `F_{(max X, max Y)}(x, y) = F_{X,Y}(x, ..., x, y, ..., y)`.
    pub fn cdf(&self, x: f64, y: f64) -> Result<f64> {
        (self.cdf)(&vec![x; self.p], &vec![y; self.q])
    }

    pub fn margin_x(&self, x: f64) -> Result<f64> {
        self.cdf(x, self.y_support.1)
    }

    pub fn margin_y(&self, y: f64) -> Result<f64> {
        self.cdf(self.x_support.1, y)
    }

    /// Copula of `(max X, max Y)`.
    pub fn copula(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        let x = bisect(|x| self.margin_x(x), u, self.x_support.0, self.x_support.1)?;
        let y = bisect(|y| self.margin_y(y), v, self.y_support.0, self.y_support.1)?;
        self.cdf(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archimedean::Family;
    use approx::assert_relative_eq;

    fn clayton2() -> ArchimedeanGenerator {
        ArchimedeanGenerator::clayton(2.0).unwrap()
    }

    #[test]
    fn univariate_examples() {
        for g in [clayton2(), ArchimedeanGenerator::gumbel(3.0).unwrap()] {
            for t in [0.0, 0.1, 0.5, 0.93, 1.0] {
                assert_relative_eq!(kendall_univariate(&g, 1, t).unwrap(), t, epsilon = 1e-14);
            }
        }
        let ind = ArchimedeanGenerator::independence();
        assert_relative_eq!(
            kendall_univariate(&ind, 2, 0.5).unwrap(),
            0.5 + 0.5 * 2f64.ln(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            kendall_univariate(&clayton2(), 2, 0.5).unwrap(),
            0.6875,
            epsilon = 1e-14
        );
        assert!(kendall_univariate(&clayton2(), 2, 1.2).is_err());
        assert!(matches!(
            kendall_univariate(&clayton2(), 66, 0.5),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn univariate_monotone_and_above_diagonal() {
        for g in [
            clayton2(),
            ArchimedeanGenerator::gumbel(2.0).unwrap(),
            ArchimedeanGenerator::independence(),
        ] {
            for p in [2, 5, 20] {
                let mut prev = 0.0;
                for i in 0..=200 {
                    let t = i as f64 / 200.0;
                    let k = kendall_univariate(&g, p, t).unwrap();
                    assert!(k >= prev - 1e-15);
                    assert!(k >= t - 1e-13, "{:?} p={p} t={t}", g.family());
                    prev = k;
                }
                assert_eq!(prev, 1.0);
            }
        }
    }

    #[test]
    fn joint_reduces_to_bivariate_copula_for_scalars() {
        let g = clayton2();
        let m = JointKendallModel::new(g.clone(), 1, 1).unwrap();
        assert_relative_eq!(m.joint(0.5, 0.5).unwrap(), 7f64.powf(-0.5), epsilon = 1e-14);
        for (a, b) in [(0.2, 0.7), (0.9, 0.4)] {
            let c = g
                .psi(g.psi_inv(a).unwrap() + g.psi_inv(b).unwrap())
                .unwrap();
            assert_relative_eq!(m.joint(a, b).unwrap(), c, epsilon = 1e-14);
        }
    }

    #[test]
    fn joint_clayton_two_by_two() {
        // psi(6) + 6 (-psi'(6)) + 9 psi''(6) with psi(t) = (1 + t)^{-1/2}
        let exact = 7f64.powf(-0.5) + 6.0 * 0.5 * 7f64.powf(-1.5) + 9.0 * 0.75 * 7f64.powf(-2.5);
        let m = JointKendallModel::new(clayton2(), 2, 2).unwrap();
        assert_relative_eq!(m.joint(0.5, 0.5).unwrap(), exact, epsilon = 1e-14);
        assert_relative_eq!(exact, 0.592_015_781_703_228_4, epsilon = 1e-15);
    }

    #[test]
    fn joint_boundaries() {
        let m = JointKendallModel::new(ArchimedeanGenerator::gumbel(2.0).unwrap(), 3, 2).unwrap();
        assert_eq!(m.joint(0.0, 0.4).unwrap(), 0.0);
        assert_eq!(m.joint(1.0, 1.0).unwrap(), 1.0);
        assert!(m.joint(0.5, -0.1).is_err());
    }

    #[test]
    fn copula_boundaries_and_scalar_case() {
        let m = JointKendallModel::new(clayton2(), 2, 3).unwrap();
        assert_eq!(m.copula(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(m.copula(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(m.copula(1.0, 0.3).unwrap(), 0.3);
        assert_eq!(m.copula(0.3, 1.0).unwrap(), 0.3);
        let m1 = JointKendallModel::new(clayton2(), 1, 1).unwrap();
        assert_relative_eq!(
            m1.copula(0.5, 0.5).unwrap(),
            7f64.powf(-0.5),
            epsilon = 1e-9
        );
    }

    #[test]
    fn quantiles_invert_margins() {
        let m = JointKendallModel::new(ArchimedeanGenerator::gumbel(2.0).unwrap(), 3, 5).unwrap();
        for i in 1..20 {
            let u = i as f64 / 20.0;
            let t = m.quantile_x(u).unwrap();
            assert!((m.margin_x(t).unwrap() - u).abs() < 1e-8);
            let c = m.copula(u, 1.0 - 1e-15).unwrap();
            assert!((c - u).abs() < 1e-8, "u={u} c={c}");
        }
    }

    #[test]
    fn empirical_examples() {
        let w = PitPseudoObservations {
            w: vec![0.0, 0.5, 1.0],
        };
        let ek = EmpiricalKendall::new(w.clone(), w.clone()).unwrap();
        assert_eq!(ek.eval(1.0, 1.0), 1.0);
        assert_relative_eq!(ek.eval(0.5, 0.5), 2.0 / 3.0);
        let pos = PitPseudoObservations {
            w: vec![0.2, 0.5, 1.0],
        };
        let ek = EmpiricalKendall::new(pos.clone(), pos).unwrap();
        assert_eq!(ek.eval(0.0, 1.0), 0.0);
        assert!(EmpiricalKendall::new(w, PitPseudoObservations { w: vec![0.0] }).is_err());
    }

    #[test]
    fn kendall_copula_sample_shape() {
        let m = JointKendallModel::new(
            ArchimedeanGenerator::from_tau(Family::Gumbel, 0.5).unwrap(),
            2,
            2,
        )
        .unwrap();
        let s = m.sample(200, 5).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (200, 2));
        assert!(s.as_slice().iter().all(|&u| u > 0.0 && u < 1.0));
        assert_eq!(s, m.sample(200, 5).unwrap());
    }

    fn uniform_oracle(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        p: usize,
        q: usize,
    ) -> MaxCollapsedModel {
        MaxCollapsedModel::new(
            move |x: &[f64], y: &[f64]| {
                let mx = x.iter().copied().fold(1.0, f64::min).clamp(0.0, 1.0);
                let my = y.iter().copied().fold(1.0, f64::min).clamp(0.0, 1.0);
                Ok(f(mx, my))
            },
            p,
            q,
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn max_collapsed_cdf_examples() {
        let scalar = MaxCollapsedModel::new(
            |x: &[f64], y: &[f64]| Ok(x[0].clamp(0.0, 1.0) * y[0].clamp(0.0, 1.0)),
            1,
            1,
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(scalar.cdf(0.3, 0.6).unwrap(), 0.3 * 0.6);

        let indep = MaxCollapsedModel::new(
            |x: &[f64], y: &[f64]| Ok(x.iter().chain(y).map(|v| v.clamp(0.0, 1.0)).product()),
            2,
            1,
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(indep.cdf(0.5, 0.5).unwrap(), 0.125);

        let co = uniform_oracle(f64::min, 3, 2);
        assert_eq!(co.cdf(0.3, 0.8).unwrap(), 0.3);
        assert_eq!(co.cdf(0.9, 0.2).unwrap(), 0.2);

        let failing = MaxCollapsedModel::new(
            |_: &[f64], _: &[f64]| Err(Error::invalid("boom")),
            1,
            1,
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap();
        assert!(failing.cdf(0.1, 0.1).is_err());
    }

    #[test]
    fn max_collapsed_copula_frechet_bounds() {
        // comonotone with U(0,1) margins: F(x.., y..) = min(x.., y..)
        let co = uniform_oracle(f64::min, 3, 2);
        // countermonotone: X = U, Y = 1 - U
        let counter = uniform_oracle(|x, y| (x + y - 1.0).max(0.0), 2, 2);
        // independent blocks, each block independent uniforms
        let p = 2;
        let q = 3;
        let indep = MaxCollapsedModel::new(
            |x: &[f64], y: &[f64]| Ok(x.iter().chain(y).map(|v| v.clamp(0.0, 1.0)).product()),
            p,
            q,
            (0.0, 1.0),
            (0.0, 1.0),
        )
        .unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
                assert!((co.copula(u, v).unwrap() - u.min(v)).abs() < 1e-8);
                assert!((counter.copula(u, v).unwrap() - (u + v - 1.0).max(0.0)).abs() < 1e-8);
                assert!((indep.copula(u, v).unwrap() - u * v).abs() < 1e-8);
            }
        }
    }
}
