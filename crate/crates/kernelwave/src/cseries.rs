//! Truncated complex power series in one and two variables, and the recursive
//! solver for the algebraic branches that straighten a phase near a saddle.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::phase::{poly_eval, poly_taylor_shift, PhaseSpec};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Univariate series `a_0 + a_1 x + ... + a_order x^order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Series1Repr", into = "Series1Repr")]
pub struct TruncatedSeries1 {
    coeffs: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct Series1Repr {
    order: usize,
    coeffs: Vec<C64>,
}

impl TryFrom<Series1Repr> for TruncatedSeries1 {
    type Error = String;
    fn try_from(r: Series1Repr) -> std::result::Result<Self, String> {
        if r.coeffs.len() != r.order + 1 {
            return Err(format!("expected {} coefficients, got {}", r.order + 1, r.coeffs.len()));
        }
        Ok(Self { coeffs: r.coeffs })
    }
}

impl From<TruncatedSeries1> for Series1Repr {
    fn from(s: TruncatedSeries1) -> Self {
        Self { order: s.order(), coeffs: s.coeffs }
    }
}

impl TruncatedSeries1 {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return usage("a series needs at least one coefficient");
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(order: usize) -> Self {
        Self { coeffs: vec![ZERO; order + 1] }
    }

    pub fn constant(c: C64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = c;
        s
    }

    /// The series `x`.
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zeros(order);
        if order >= 1 {
            s.coeffs[1] = ONE;
        }
        s
    }

    /// Builds a series from the leading terms of `coeffs`, padding with zeros.
    pub fn from_prefix(coeffs: &[C64], order: usize) -> Self {
        let mut s = Self::zeros(order);
        for (dst, src) in s.coeffs.iter_mut().zip(coeffs) {
            *dst = *src;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn set(&mut self, k: usize, c: C64) {
        self.coeffs[k] = c;
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return usage(format!("order mismatch: {} vs {}", self.order(), other.order()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self { coeffs })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let n = self.order();
        let mut out = vec![ZERO; n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs[..=n - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(Self { coeffs: out })
    }

    /// `outer(inner(x))`. `inner` must vanish at 0; the result has the order of `inner`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        if inner.coeffs[0] != ZERO {
            return usage("compose needs an inner series with zero constant term; recenter the outer series first");
        }
        let n = inner.order();
        let mut acc = Self::zeros(n);
        for c in outer.coeffs.iter().take(n + 1).rev() {
            acc = acc.mul(inner)?;
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 == ZERO {
            return Err(Error::SingularSeries("reciprocal of a series with zero constant term".into()));
        }
        let n = self.order();
        let mut r = vec![ZERO; n + 1];
        r[0] = ONE / a0;
        for m in 1..=n {
            let s: C64 = (1..=m).map(|k| self.coeffs[k] * r[m - k]).sum();
            r[m] = -s / a0;
        }
        Ok(Self { coeffs: r })
    }

    /// `exp` of the series; a nonzero constant term is factored out as `e^{a_0}`.
    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut e = vec![ZERO; n + 1];
        e[0] = self.coeffs[0].exp();
        for m in 1..=n {
            let s: C64 = (1..=m).map(|k| self.coeffs[k] * e[m - k] * k as f64).sum();
            e[m] = s / m as f64;
        }
        Self { coeffs: e }
    }

    /// Termwise derivative; the result has order one less (order 0 stays 0).
    pub fn derivative(&self) -> Self {
        let n = self.order();
        if n == 0 {
            return Self::zeros(0);
        }
        Self { coeffs: (1..=n).map(|k| self.coeffs[k] * k as f64).collect() }
    }

    /// Coefficients of `x -> self(alpha x)`.
    pub fn scale_arg(&self, alpha: C64) -> Self {
        let mut p = ONE;
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| {
                let c = a * p;
                p *= alpha;
                c
            })
            .collect();
        Self { coeffs }
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::from_prefix(&self.coeffs, order)
    }

    pub fn eval(&self, x: C64) -> C64 {
        poly_eval(&self.coeffs, x)
    }

    /// Value and derivative at `x`.
    pub fn eval_with_derivative(&self, x: C64) -> (C64, C64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }
}

/// Coefficientwise complex conjugate, i.e. the series of `conj(g(conj x))`.
pub fn conjugate_coeffs(g: &TruncatedSeries1) -> TruncatedSeries1 {
    TruncatedSeries1 { coeffs: g.coeffs.iter().map(|c| c.conj()).collect() }
}

/// Bivariate series truncated at total degree `order`; entry `(k, l)` is the
/// coefficient of `x^k y^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Series2Repr", into = "Series2Repr")]
pub struct TruncatedSeries2 {
    order: usize,
    coeffs: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct Series2Repr {
    order: usize,
    coeffs: Vec<Vec<C64>>,
}

impl TryFrom<Series2Repr> for TruncatedSeries2 {
    type Error = String;
    fn try_from(r: Series2Repr) -> std::result::Result<Self, String> {
        let n = r.order + 1;
        if r.coeffs.len() != n || r.coeffs.iter().any(|row| row.len() != n) {
            return Err(format!("expected a {n}x{n} coefficient matrix"));
        }
        let mut s = TruncatedSeries2::zeros(r.order);
        for (k, row) in r.coeffs.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                if k + l <= r.order {
                    s.set(k, l, *c);
                } else if *c != ZERO {
                    return Err(format!("entry ({k},{l}) exceeds total degree {}", r.order));
                }
            }
        }
        Ok(s)
    }
}

impl From<TruncatedSeries2> for Series2Repr {
    fn from(s: TruncatedSeries2) -> Self {
        let n = s.order + 1;
        let coeffs = (0..n).map(|k| (0..n).map(|l| s.coeff(k, l)).collect()).collect();
        Self { order: s.order, coeffs }
    }
}

impl TruncatedSeries2 {
    pub fn zeros(order: usize) -> Self {
        Self { order, coeffs: vec![ZERO; (order + 1) * (order + 1)] }
    }

    pub fn constant(c: C64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.set(0, 0, c);
        s
    }

    /// Embeds `g(x)` as a bivariate series in `x` only.
    pub fn from_x(g: &TruncatedSeries1, order: usize) -> Self {
        let mut s = Self::zeros(order);
        for k in 0..=order {
            s.set(k, 0, g.coeff(k));
        }
        s
    }

    /// Embeds `g(y)` as a bivariate series in `y` only.
    pub fn from_y(g: &TruncatedSeries1, order: usize) -> Self {
        let mut s = Self::zeros(order);
        for l in 0..=order {
            s.set(0, l, g.coeff(l));
        }
        s
    }

    /// Builds a series from a coefficient function over total degree ≤ order.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut s = Self::zeros(order);
        for k in 0..=order {
            for l in 0..=order - k {
                s.set(k, l, f(k, l));
            }
        }
        s
    }

    /// `(h(alpha x) - h(beta y)) / (alpha x - beta y)`, formed coefficientwise
    /// from `(X^k - Y^k)/(X - Y) = sum_j X^j Y^(k-1-j)`. `h` must carry at least
    /// `order + 1` coefficients.
    pub fn divided_difference(h: &TruncatedSeries1, alpha: C64, beta: C64, order: usize) -> Result<Self> {
        if h.order() < order + 1 {
            return usage(format!("divided difference to order {order} needs h of order {}", order + 1));
        }
        let mut s = Self::zeros(order);
        for k in 1..=order + 1 {
            let hk = h.coeff(k);
            for j in 0..k {
                let c = hk * alpha.powu(j as u32) * beta.powu((k - 1 - j) as u32);
                s.add_to(j, k - 1 - j, c);
            }
        }
        Ok(s)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn idx(&self, k: usize, l: usize) -> usize {
        k * (self.order + 1) + l
    }

    pub fn coeff(&self, k: usize, l: usize) -> C64 {
        if k + l > self.order {
            return ZERO;
        }
        self.coeffs[self.idx(k, l)]
    }

    /// Sets entry `(k, l)`; writes beyond total degree `order` are ignored.
    pub fn set(&mut self, k: usize, l: usize, c: C64) {
        if k + l <= self.order {
            let i = self.idx(k, l);
            self.coeffs[i] = c;
        }
    }

    fn add_to(&mut self, k: usize, l: usize, c: C64) {
        if k + l <= self.order {
            let i = self.idx(k, l);
            self.coeffs[i] += c;
        }
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return usage(format!("order mismatch: {} vs {}", self.order, other.order));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self::from_fn(self.order, |k, l| self.coeff(k, l) + other.coeff(k, l)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self::from_fn(self.order, |k, l| self.coeff(k, l) - other.coeff(k, l)))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_fn(self.order, |k, l| self.coeff(k, l) * c)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let n = self.order;
        let mut out = Self::zeros(n);
        for k1 in 0..=n {
            for l1 in 0..=n - k1 {
                let a = self.coeff(k1, l1);
                if a == ZERO {
                    continue;
                }
                let rest = n - k1 - l1;
                for k2 in 0..=rest {
                    for l2 in 0..=rest - k2 {
                        out.add_to(k1 + k2, l1 + l2, a * other.coeff(k2, l2));
                    }
                }
            }
        }
        Ok(out)
    }

    /// The series with its constant term removed.
    fn without_constant(&self) -> Self {
        let mut s = self.clone();
        s.set(0, 0, ZERO);
        s
    }

    /// Reciprocal via the geometric series in the nilpotent part.
    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeff(0, 0);
        if a0 == ZERO {
            return Err(Error::SingularSeries("reciprocal of a bivariate series with zero constant term".into()));
        }
        let q = self.without_constant().scale(-ONE / a0);
        let mut term = Self::constant(ONE, self.order);
        let mut sum = term.clone();
        for _ in 0..self.order {
            term = term.mul(&q)?;
            sum = sum.add(&term)?;
        }
        Ok(sum.scale(ONE / a0))
    }

    /// `exp` of the series; the constant term is factored out as `e^{a_00}`.
    pub fn exp(&self) -> Self {
        let q = self.without_constant();
        let mut term = Self::constant(ONE, self.order);
        let mut sum = term.clone();
        for m in 1..=self.order {
            term = term.mul(&q).expect("same order").scale(C64::from(1.0 / m as f64));
            sum = sum.add(&term).expect("same order");
        }
        sum.scale(self.coeff(0, 0).exp())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.order, |k, l| self.coeff(k, l).conj())
    }

    pub fn eval(&self, x: C64, y: C64) -> C64 {
        let mut acc = ZERO;
        for k in (0..=self.order).rev() {
            let row = (0..=self.order - k).rev().fold(ZERO, |r, l| r * y + self.coeff(k, l));
            acc = acc * x + row;
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.order.max(other.order);
        let mut m: f64 = 0.0;
        for k in 0..=n {
            for l in 0..=n - k {
                m = m.max((self.coeff(k, l) - other.coeff(k, l)).norm());
            }
        }
        m
    }
}

/// Selects whether the branch maps `x^2` to an increase or a decrease of `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Solves `f(g(x)) - level = sign * x^2` for the branch with `g(0) = center`
/// and `g'(0) = first_coeff`, through `order`.
pub fn solve_branch(
    phase: &PhaseSpec,
    center: C64,
    sign: Sign,
    level: C64,
    first_coeff: C64,
    order: usize,
) -> Result<TruncatedSeries1> {
    let (f0, f1, f2) = phase.eval_derivs(center);
    let scale = 1.0 + center.norm().powi(phase.degree() as i32);
    if f1.norm() > 1e-10 * scale {
        return usage(format!("center {center} is not a stationary point (f' = {f1})"));
    }
    if f2.norm() < 1e-12 * scale {
        return Err(Error::DegenerateSaddle(center));
    }
    if (f0 - level).norm() > 1e-10 * scale {
        return usage(format!("level {level} differs from f(center) = {f0}"));
    }
    let pivot = f2 * first_coeff * first_coeff / 2.0;
    if (pivot - sign.value()).norm() > 1e-10 {
        return Err(Error::Branch(format!(
            "first coefficient {first_coeff} gives f''a1^2/2 = {pivot}, expected {}",
            sign.value()
        )));
    }

    // f(center + y) as a polynomial in y; the recursion only needs its Taylor data.
    let shifted = poly_taylor_shift(phase.coeffs(), center);
    let mut g = TruncatedSeries1::zeros(order.max(1));
    g.set(0, center);
    g.set(1, first_coeff);
    let denom = f2 * first_coeff;
    for k in 2..=order {
        // Coefficient of x^(k+1) in f(g) with a_k = 0 so far; the unknown a_k
        // enters that coefficient linearly as f''(center) a_1 a_k.
        let inner = TruncatedSeries1::from_prefix(&g.coeffs()[..k], k + 1);
        let mut dz = inner.clone();
        dz.set(0, ZERO);
        let outer = TruncatedSeries1::from_prefix(&shifted, k + 1);
        let comp = TruncatedSeries1::compose(&outer, &dz)?;
        g.set(k, -comp.coeff(k + 1) / denom);
    }
    Ok(g.truncate(order))
}

/// Coefficients of `f(g(x)) - level - sign x^2` through the order of `g`;
/// all entries vanish for an exact branch.
pub fn branch_residual(phase: &PhaseSpec, g: &TruncatedSeries1, level: C64, sign: Sign) -> Result<TruncatedSeries1> {
    let n = g.order();
    let shifted = poly_taylor_shift(phase.coeffs(), g.coeff(0));
    let mut dz = g.clone();
    dz.set(0, ZERO);
    let outer = TruncatedSeries1::from_prefix(&shifted, n);
    let mut comp = TruncatedSeries1::compose(&outer, &dz)?;
    comp.set(0, comp.coeff(0) - level);
    if n >= 2 {
        comp.set(2, comp.coeff(2) - sign.value());
    }
    Ok(comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{make_phase, PhaseKind};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real_series(v: &[f64]) -> TruncatedSeries1 {
        TruncatedSeries1::new(v.iter().map(|&x| c(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn difference_of_squares() {
        let p = real_series(&[1.0, 1.0, 0.0]).mul(&real_series(&[1.0, -1.0, 0.0])).unwrap();
        assert_eq!(p, real_series(&[1.0, 0.0, -1.0]));
    }

    #[test]
    fn exp_squared_matches_exp_two_x() {
        let e = TruncatedSeries1::variable(6).exp();
        let sq = e.mul(&e).unwrap();
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((sq.coeff(k) - c(2f64.powi(k as i32) / fact, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn order_mismatch_is_usage_error() {
        let r = TruncatedSeries1::zeros(2).mul(&TruncatedSeries1::zeros(3));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn compose_by_hand() {
        let outer = real_series(&[0.0, 0.0, 1.0, 0.0]);
        let inner = real_series(&[0.0, 1.0, 1.0, 0.0]);
        let r = TruncatedSeries1::compose(&outer, &inner).unwrap();
        assert_eq!(r, real_series(&[0.0, 0.0, 1.0, 2.0]));
        let id = TruncatedSeries1::variable(3);
        assert_eq!(TruncatedSeries1::compose(&id, &inner).unwrap(), inner);
        let bad = real_series(&[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(TruncatedSeries1::compose(&outer, &bad), Err(Error::Usage(_))));
    }

    #[test]
    fn geometric_reciprocal() {
        let r = real_series(&[1.0, -1.0, 0.0, 0.0, 0.0]).reciprocal().unwrap();
        assert_eq!(r, real_series(&[1.0; 5]));
        assert!(matches!(TruncatedSeries1::zeros(3).reciprocal(), Err(Error::SingularSeries(_))));
        assert_eq!(TruncatedSeries1::zeros(3).exp(), TruncatedSeries1::constant(c(1.0, 0.0), 3));
    }

    #[test]
    fn airy_branch_coefficients() {
        let ph = make_phase(PhaseKind::AiryCubic);
        let i = c(0.0, 1.0);
        let g = solve_branch(&ph, i, Sign::Minus, i * (2.0 / 3.0), C64::from_polar(1.0, PI / 4.0), 8).unwrap();
        let sqrt_i = C64::from_polar(1.0, PI / 4.0);
        assert!((g.coeff(0) - i).norm() < 1e-15);
        assert!((g.coeff(2) - c(-1.0 / 6.0, 0.0)).norm() < 1e-14);
        assert!((g.coeff(3) - 5.0 / (72.0 * sqrt_i)).norm() < 1e-14);
        let res = branch_residual(&ph, &g, i * (2.0 / 3.0), Sign::Minus).unwrap();
        assert!(res.coeffs().iter().all(|r| r.norm() < 1e-13));
    }

    #[test]
    fn pearcey_branch_third_coefficient() {
        let ph = make_phase(PhaseKind::PearceyQuartic);
        let z0 = C64::from_polar(1.0, PI / 3.0);
        let a1 = C64::from_polar((2.0f64 / 3.0).sqrt(), 2.0 * PI / 3.0);
        let g = solve_branch(&ph, z0, Sign::Plus, ph.level_at(z0), a1, 6).unwrap();
        assert!((g.coeff(2) - c(2.0 / 9.0, 0.0)).norm() < 1e-14);
        let a3 = -(7.0 / 54.0) * (2.0f64 / 3.0).sqrt() * z0;
        assert!((g.coeff(3) - a3).norm() < 1e-14);
    }

    #[test]
    fn quadratic_phase_gives_identity_branch() {
        let ph = PhaseSpec::custom(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let g = solve_branch(&ph, c(0.0, 0.0), Sign::Plus, c(0.0, 0.0), c(1.0, 0.0), 6).unwrap();
        assert!(g.max_abs_diff(&TruncatedSeries1::variable(6)) < 1e-15);
    }

    #[test]
    fn branch_errors() {
        let ph = make_phase(PhaseKind::AiryCubic);
        let i = c(0.0, 1.0);
        let bad = solve_branch(&ph, i, Sign::Minus, i * (2.0 / 3.0), c(1.0, 0.0), 4);
        assert!(matches!(bad, Err(Error::Branch(_))));
        let cubic = PhaseSpec::custom(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let degen = solve_branch(&cubic, c(0.0, 0.0), Sign::Plus, c(0.0, 0.0), c(1.0, 0.0), 4);
        assert!(matches!(degen, Err(Error::DegenerateSaddle(_))));
    }

    #[test]
    fn conjugation() {
        let ph = make_phase(PhaseKind::AiryCubic);
        let i = c(0.0, 1.0);
        let g = solve_branch(&ph, i, Sign::Minus, i * (2.0 / 3.0), C64::from_polar(1.0, PI / 4.0), 5).unwrap();
        let gb = conjugate_coeffs(&g);
        assert!((gb.coeff(0) + i).norm() < 1e-15);
        assert_eq!(conjugate_coeffs(&gb), g);
    }

    #[test]
    fn bivariate_divided_difference_round_trip() {
        let h = TruncatedSeries1::new((0..9).map(|k| c(1.0 / (k as f64 + 1.0), 0.3 * k as f64)).collect()).unwrap();
        let alpha = c(1.0, 0.0);
        let beta = c(0.0, 1.0);
        let n = 7;
        let d = TruncatedSeries2::divided_difference(&h, alpha, beta, n).unwrap();
        let x_minus_iy = TruncatedSeries2::from_fn(n, |k, l| match (k, l) {
            (1, 0) => c(1.0, 0.0),
            (0, 1) => -beta,
            _ => ZERO,
        });
        let lhs = d.mul(&x_minus_iy).unwrap();
        let rhs = TruncatedSeries2::from_x(&h.scale_arg(alpha), n)
            .sub(&TruncatedSeries2::from_y(&h.scale_arg(beta), n))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        let back = x_minus_iy.mul(&d.reciprocal().unwrap()).unwrap().mul(&d).unwrap();
        assert!(back.max_abs_diff(&x_minus_iy) < 1e-13);
    }

    #[test]
    fn json_round_trip() {
        let s = real_series(&[1.0, 2.0, 3.0]);
        let txt = serde_json::to_string(&s).unwrap();
        assert_eq!(txt, r#"{"order":2,"coeffs":[[1.0,0.0],[2.0,0.0],[3.0,0.0]]}"#);
        let back: TruncatedSeries1 = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, s);
        let t = TruncatedSeries2::from_fn(2, |k, l| c(k as f64, l as f64));
        let back2: TruncatedSeries2 = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back2, t);
    }
}
