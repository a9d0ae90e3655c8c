//! Archimedean generators, their derivatives, and Marshall–Olkin samplers.
//!
//! A `d`-dimensional Archimedean copula with completely monotone generator
//! `psi` is sampled through its frailty representation: draw `V` whose
//! Laplace–Stieltjes transform is `psi`, iid unit exponentials `E_j`, and set
//! `U_j = psi(E_j / V)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{GroupedData, Matrix};
use crate::error::{Error, Result};
use crate::normal::normal_quantile;

/// Highest generator derivative order evaluated by default.
pub const DEFAULT_MAX_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Clayton,
    Gumbel,
    Independence,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Independence => "independence",
        })
    }
}

/// A completely monotone Archimedean generator `psi` with parameter `theta`.
#[derive(Debug, Clone)]
pub struct ArchimedeanGenerator {
    family: Family,
    theta: f64,
    max_order: usize,
    // ln of the positive coefficients b_{k,j} in
    // (-1)^k psi^(k)(t) = psi(t) t^{-k} sum_j b_{k,j} t^{j/theta}  (Gumbel only)
    gumbel_coeffs: Option<Arc<Vec<Vec<f64>>>>,
}

impl PartialEq for ArchimedeanGenerator {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.theta == other.theta
            && self.max_order == other.max_order
    }
}

impl ArchimedeanGenerator {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        match family {
            Family::Clayton if !(theta > 0.0 && theta.is_finite()) => {
                return Err(Error::invalid(format!(
                    "Clayton needs theta > 0, got {theta}"
                )));
            }
            Family::Gumbel if !(theta >= 1.0 && theta.is_finite()) => {
                return Err(Error::invalid(format!(
                    "Gumbel needs theta >= 1, got {theta}"
                )));
            }
            _ => {}
        }
        let theta = if family == Family::Independence {
            1.0
        } else {
            theta
        };
        let mut g = Self {
            family,
            theta,
            max_order: DEFAULT_MAX_ORDER,
            gumbel_coeffs: None,
        };
        g.rebuild_coeffs();
        Ok(g)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(Family::Clayton, theta)
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(Family::Gumbel, theta)
    }

    pub fn independence() -> Self {
        Self::new(Family::Independence, 1.0).expect("independence generator is always valid")
    }

    /// Generator whose bivariate Kendall's tau equals `tau`.
    pub fn from_tau(family: Family, tau: f64) -> Result<Self> {
        Self::new(family, tau_to_theta(family, tau)?)
    }

    /// Raise (or lower) the highest supported derivative order.
    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self.rebuild_coeffs();
        self
    }

    fn rebuild_coeffs(&mut self) {
        self.gumbel_coeffs = (self.family == Family::Gumbel)
            .then(|| Arc::new(gumbel_log_coeffs(1.0 / self.theta, self.max_order)));
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("psi needs t >= 0, got {t}")));
        }
        Ok(self.psi_unchecked(t))
    }

    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        match self.family {
            Family::Clayton => (1.0 + t).powf(-1.0 / self.theta),
            Family::Gumbel => (-t.powf(1.0 / self.theta)).exp(),
            Family::Independence => (-t).exp(),
        }
    }

    pub fn psi_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::invalid(format!(
                "psi_inv needs u in (0, 1], got {u}"
            )));
        }
        Ok(self.psi_inv_unchecked(u))
    }

    /// `psi^{-1}(u)` with `psi^{-1}(0) = inf`.
    pub(crate) fn psi_inv_unchecked(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::INFINITY;
        }
        match self.family {
            Family::Clayton => (u.powf(-self.theta) - 1.0).max(0.0),
            Family::Gumbel => (-u.ln()).max(0.0).powf(self.theta),
            Family::Independence => (-u.ln()).max(0.0),
        }
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k > self.max_order {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: self.max_order,
            });
        }
        Ok(())
    }

    /// `psi^(k)(t)`, the `k`-th derivative, for `t > 0`.
    pub fn psi_deriv(&self, k: usize, t: f64) -> Result<f64> {
        if k == 0 {
            return self.psi(t);
        }
        if !(t > 0.0) {
            return Err(Error::invalid(format!("psi_deriv needs t > 0, got {t}")));
        }
        self.check_order(k)?;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * self.ln_abs_deriv(k, t).exp())
    }

    /// `ln((-1)^k psi^(k)(t))`; finite for `t > 0` and `k <= max_order`.
    pub fn ln_abs_deriv(&self, k: usize, t: f64) -> f64 {
        match self.family {
            Family::Independence => -t,
            Family::Clayton => {
                let a = 1.0 / self.theta;
                let lc: f64 = (0..k).map(|i| (a + i as f64).ln()).sum();
                lc - (a + k as f64) * t.ln_1p()
            }
            Family::Gumbel => {
                let alpha = 1.0 / self.theta;
                let lt = t.ln();
                let ln_psi = -(alpha * lt).exp();
                if k == 0 {
                    return ln_psi;
                }
                let coeffs = &self.gumbel_coeffs.as_ref().expect("gumbel coefficients")[k];
                let terms = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, &lb)| lb + j as f64 * alpha * lt);
                ln_psi - k as f64 * lt + log_sum_exp(terms)
            }
        }
    }

    /// `ln(t^k (-1)^k psi^(k)(t) / k!)`, the building block of Kendall
    /// distributions; `-inf` when `t = 0` and `k > 0`.
    pub(crate) fn ln_poisson_term(&self, k: usize, t: f64) -> f64 {
        if k == 0 {
            return if t == 0.0 {
                0.0
            } else {
                self.ln_abs_deriv(0, t)
            };
        }
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        k as f64 * t.ln() + self.ln_abs_deriv(k, t) - ln_factorial(k)
    }

    pub(crate) fn ensure_order(&self, k: usize) -> Result<()> {
        self.check_order(k)
    }

    /// Draw the frailty `V` whose Laplace transform is `psi`.
    pub fn sample_frailty<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Independence => 1.0,
            Family::Clayton => Gamma::new(1.0 / self.theta, 1.0)
                .expect("valid gamma parameters")
                .sample(rng),
            Family::Gumbel => positive_stable(1.0 / self.theta, rng),
        }
    }

    /// `n` iid rows from the `d`-dimensional Archimedean copula.
    pub fn sample(&self, d: usize, n: usize, seed: u64) -> Result<Matrix> {
        if d == 0 || n == 0 {
            return Err(Error::invalid(format!(
                "sample needs d, n >= 1, got d={d}, n={n}"
            )));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut rng = row_rng(seed, r as u64);
                let v = self.sample_frailty(&mut rng);
                (0..d)
                    .map(|_| {
                        let e: f64 = Exp1.sample(&mut rng);
                        clamp_open(self.psi_unchecked(e / v))
                    })
                    .collect()
            })
            .collect();
        Matrix::from_rows(&rows)
    }
}

/// Deterministic per-row random stream derived from `seed`.
pub(crate) fn row_rng(seed: u64, row: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row);
    rng
}

fn clamp_open(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

pub(crate) fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Log-coefficients of the Gumbel derivative expansion, built from
/// `b_{k+1,j} = alpha b_{k,j-1} + (k - j alpha) b_{k,j}`, `b_{0,0} = 1`.
/// All coefficients are nonnegative for `alpha` in `(0, 1]`.
fn gumbel_log_coeffs(alpha: f64, max_order: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(max_order + 1);
    out.push(vec![0.0]);
    let la = alpha.ln();
    for k in 0..max_order {
        let prev: &Vec<f64> = &out[k];
        let next: Vec<f64> = (0..=k + 1)
            .map(|j| {
                let from_lower = if j >= 1 {
                    la + prev[j - 1]
                } else {
                    f64::NEG_INFINITY
                };
                let w = k as f64 - j as f64 * alpha;
                let from_same = if j <= k && w > 0.0 {
                    w.ln() + prev[j]
                } else {
                    f64::NEG_INFINITY
                };
                log_add_exp(from_lower, from_same)
            })
            .collect();
        out.push(next);
    }
    out
}

/// Positive `alpha`-stable draw with `E[exp(-t V)] = exp(-t^alpha)`, via the
/// Chambers–Mallows–Stuck construction (Kanter's form for the totally skewed
/// case).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = PI * rng.random::<f64>();
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

pub fn tau_to_theta(family: Family, tau: f64) -> Result<f64> {
    match family {
        Family::Clayton if tau > 0.0 && tau < 1.0 => Ok(2.0 * tau / (1.0 - tau)),
        Family::Gumbel if (0.0..1.0).contains(&tau) => Ok(1.0 / (1.0 - tau)),
        Family::Independence if tau == 0.0 => Ok(1.0),
        _ => Err(Error::invalid(format!(
            "Kendall's tau {tau} is not attainable by the {family} family"
        ))),
    }
}

pub fn theta_to_tau(family: Family, theta: f64) -> f64 {
    match family {
        Family::Clayton => theta / (theta + 2.0),
        Family::Gumbel => 1.0 - 1.0 / theta,
        Family::Independence => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    IndependentGroups,
    Comonotone,
    Countermonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    #[default]
    Uniform,
    Normal,
    Exponential,
}

impl Margin {
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            Margin::Uniform => u,
            Margin::Normal => normal_quantile(u),
            Margin::Exponential => -(-u).ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub p: usize,
    pub q: usize,
    #[serde(default)]
    pub margin: Margin,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, p: usize, q: usize) -> Self {
        Self {
            kind,
            p,
            q,
            margin: Margin::Uniform,
        }
    }
}

/// Two-group sample (`X` = first `p` columns, `Y` = next `q`) from one of the
/// extreme dependence scenarios.
pub fn sample_scenario(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<GroupedData> {
    if spec.p == 0 || spec.q == 0 {
        return Err(Error::invalid("scenario needs p, q >= 1"));
    }
    let d = spec.p + spec.q;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = row_rng(seed, r as u64);
            let mut uniform = || clamp_open(rng.random::<f64>());
            let u: Vec<f64> = match spec.kind {
                ScenarioKind::IndependentGroups => (0..d).map(|_| uniform()).collect(),
                ScenarioKind::Comonotone => vec![uniform(); d],
                ScenarioKind::Countermonotone => {
                    let v = uniform();
                    (0..d)
                        .map(|j| if j < spec.p { v } else { 1.0 - v })
                        .collect()
                }
            };
            u.into_iter().map(|v| spec.margin.quantile(v)).collect()
        })
        .collect();
    GroupedData::two_groups(Matrix::from_rows(&rows)?, spec.p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn psi_examples() {
        let c = ArchimedeanGenerator::clayton(2.0).unwrap();
        assert_relative_eq!(c.psi(3.0).unwrap(), 0.5, epsilon = 1e-15);
        let g = ArchimedeanGenerator::gumbel(1.0).unwrap();
        assert_relative_eq!(g.psi(1.0).unwrap(), 1.0 / E, epsilon = 1e-15);
        for gen in [c.clone(), g.clone(), ArchimedeanGenerator::independence()] {
            assert_eq!(gen.psi(0.0).unwrap(), 1.0);
            assert!(gen.psi(-1.0).is_err());
        }
    }

    #[test]
    fn psi_inv_examples() {
        let c = ArchimedeanGenerator::clayton(2.0).unwrap();
        assert_relative_eq!(c.psi_inv(0.5).unwrap(), 3.0, epsilon = 1e-14);
        assert_eq!(c.psi_inv(1.0).unwrap(), 0.0);
        let i = ArchimedeanGenerator::independence();
        assert_relative_eq!(i.psi_inv((-2.0f64).exp()).unwrap(), 2.0, epsilon = 1e-15);
        assert!(c.psi_inv(0.0).is_err());
        assert!(c.psi_inv(1.5).is_err());
    }

    #[test]
    fn psi_deriv_examples() {
        let c = ArchimedeanGenerator::clayton(2.0).unwrap();
        assert_relative_eq!(c.psi_deriv(1, 3.0).unwrap(), -0.0625, epsilon = 1e-15);
        let i = ArchimedeanGenerator::independence();
        for m in 0..6 {
            let expect = if m % 2 == 0 { 1.0 } else { -1.0 } * (-1.3f64).exp();
            assert_relative_eq!(i.psi_deriv(m, 1.3).unwrap(), expect, max_relative = 1e-14);
        }
        let g = ArchimedeanGenerator::gumbel(2.0).unwrap();
        assert_relative_eq!(g.psi_deriv(1, 1.0).unwrap(), -0.5 / E, max_relative = 1e-14);
        assert!(matches!(
            g.psi_deriv(DEFAULT_MAX_ORDER + 1, 1.0),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    /// Richardson-extrapolated central difference of `f` at `t`.
    fn richardson(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
        let d1 = d(h);
        let d2 = d(h / 2.0);
        let d3 = d(h / 4.0);
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d3 - d2) / 3.0;
        (16.0 * r2 - r1) / 15.0
    }

    #[test]
    fn gumbel_recurrence_matches_finite_differences() {
        for theta in [1.0, 1.5, 2.0, 4.0] {
            let g = ArchimedeanGenerator::gumbel(theta).unwrap();
            for k in 1..=6 {
                for &t in &[0.1, 0.3, 1.0, 2.5, 5.0, 10.0] {
                    let lower = |s: f64| g.psi_deriv(k - 1, s).unwrap();
                    let h = 0.05 * t;
                    let fd = richardson(&lower, t, h);
                    let exact = g.psi_deriv(k, t).unwrap();
                    assert!(
                        ((fd - exact) / exact).abs() < 1e-6,
                        "theta={theta} k={k} t={t}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn clayton_derivative_matches_finite_differences() {
        let c = ArchimedeanGenerator::clayton(0.7).unwrap();
        for k in 1..=8 {
            for &t in &[0.05, 0.5, 3.0, 20.0] {
                let lower = |s: f64| c.psi_deriv(k - 1, s).unwrap();
                let fd = richardson(&lower, t, 0.02 * t);
                let exact = c.psi_deriv(k, t).unwrap();
                assert!(((fd - exact) / exact).abs() < 1e-6, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn complete_monotonicity_signs() {
        let gens = [
            ArchimedeanGenerator::clayton(0.3).unwrap(),
            ArchimedeanGenerator::clayton(5.0).unwrap(),
            ArchimedeanGenerator::gumbel(1.2).unwrap(),
            ArchimedeanGenerator::gumbel(8.0).unwrap(),
            ArchimedeanGenerator::independence(),
        ];
        for g in &gens {
            for k in 0..=DEFAULT_MAX_ORDER {
                for &t in &[1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3] {
                    let v = g.psi_deriv(k, t).unwrap();
                    let signed = if k % 2 == 0 { v } else { -v };
                    assert!(
                        signed > 0.0 || (signed == 0.0 && g.ln_abs_deriv(k, t).is_finite()),
                        "{:?} k={k} t={t} v={v}",
                        g.family()
                    );
                    assert!(g.ln_abs_deriv(k, t).is_finite());
                }
            }
        }
    }

    #[test]
    fn psi_roundtrip() {
        for g in [
            ArchimedeanGenerator::clayton(2.0).unwrap(),
            ArchimedeanGenerator::gumbel(3.0).unwrap(),
            ArchimedeanGenerator::independence(),
        ] {
            for i in 1..=1000 {
                let u = i as f64 / 1000.0;
                let back = g.psi(g.psi_inv(u).unwrap()).unwrap();
                assert!((back - u).abs() < 1e-12, "{:?} u={u}", g.family());
            }
        }
    }

    #[test]
    fn tau_theta_examples() {
        assert_relative_eq!(tau_to_theta(Family::Clayton, 0.5).unwrap(), 2.0);
        assert_relative_eq!(tau_to_theta(Family::Gumbel, 0.5).unwrap(), 2.0);
        assert_relative_eq!(
            tau_to_theta(Family::Gumbel, 1e-12).unwrap(),
            1.0,
            epsilon = 1e-11
        );
        assert_eq!(tau_to_theta(Family::Gumbel, 0.0).unwrap(), 1.0);
        assert!(tau_to_theta(Family::Clayton, 0.0).is_err());
        assert!(tau_to_theta(Family::Gumbel, 1.0).is_err());
        assert!(tau_to_theta(Family::Clayton, -0.2).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(ArchimedeanGenerator::clayton(0.0).is_err());
        assert!(ArchimedeanGenerator::gumbel(0.9).is_err());
        assert!(ArchimedeanGenerator::clayton(f64::NAN).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_in_unit_cube() {
        let g = ArchimedeanGenerator::gumbel(2.0).unwrap();
        let a = g.sample(3, 500, 11).unwrap();
        let b = g.sample(3, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&u| u > 0.0 && u < 1.0));
        assert_ne!(a, g.sample(3, 500, 12).unwrap());
        assert!(g.sample(0, 5, 1).is_err());
    }

    #[test]
    fn positive_stable_laplace_transform() {
        // E[exp(-t V)] = exp(-t^alpha)
        let alpha = 0.5;
        let n = 200_000;
        let mut rng = row_rng(3, 0);
        let draws: Vec<f64> = (0..n).map(|_| positive_stable(alpha, &mut rng)).collect();
        for t in [0.25, 1.0, 3.0] {
            let mc: f64 = draws.iter().map(|v| (-t * v).exp()).sum::<f64>() / n as f64;
            let exact = (-t.powf(alpha)).exp();
            // each term lies in [0, 1] so the MC standard error is below 0.5/sqrt(n)
            assert!((mc - exact).abs() < 5.0 * 0.5 / (n as f64).sqrt(), "t={t}");
        }
    }

    #[test]
    fn scenario_examples() {
        let co =
            sample_scenario(&ScenarioSpec::new(ScenarioKind::Comonotone, 1, 1), 50, 1).unwrap();
        for r in co.values().rows() {
            assert_eq!(r[0], r[1]);
        }
        let ct = sample_scenario(
            &ScenarioSpec::new(ScenarioKind::Countermonotone, 1, 1),
            50,
            1,
        )
        .unwrap();
        for r in ct.values().rows() {
            assert!((r[0] + r[1] - 1.0).abs() < 1e-15);
        }
        let spec = ScenarioSpec {
            margin: Margin::Normal,
            ..ScenarioSpec::new(ScenarioKind::Comonotone, 2, 3)
        };
        let d = sample_scenario(&spec, 10, 4).unwrap();
        assert_eq!(d.d(), 5);
        assert_eq!(d.group("Y").unwrap().columns, vec![2, 3, 4]);
    }
}
