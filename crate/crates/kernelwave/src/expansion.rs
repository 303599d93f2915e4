//! Complete asymptotic expansions of the rescaled Airy and Pearcey kernels
//! around their sine-kernel limits.
//!
//! Amplitude coefficients are computed at a concrete point by series
//! arithmetic; the Gauss moments are closed-form Gamma products.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cseries::{conjugate_coeffs, solve_branch, Sign, TruncatedSeries1, TruncatedSeries2};
use crate::error::{usage, Error, Result};
use crate::kernels::{eval_kernel, KernelId, KernelQuery};
use crate::phase::{make_phase, PhaseKind};
use crate::special::gamma_half;
use crate::I;

/// Default truncation order of the amplitude series (enough for six terms).
pub const DEFAULT_ORDER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transition {
    AiryToS1,
    PearceyToS2,
}

impl Transition {
    pub fn name(self) -> &'static str {
        match self {
            Transition::AiryToS1 => "airy-to-s1",
            Transition::PearceyToS2 => "pearcey-to-s2",
        }
    }

    /// Power of `a` carried by each successive term: `a^{-p nu}`.
    pub fn power(self) -> f64 {
        match self {
            Transition::AiryToS1 => 1.5,
            Transition::PearceyToS2 => 4.0 / 3.0,
        }
    }

    /// Oscillation frequency `theta(a)` of the saddle-to-saddle contributions.
    pub fn theta(self, a: f64) -> f64 {
        match self {
            Transition::AiryToS1 => 4.0 / 3.0 * a.powf(1.5),
            Transition::PearceyToS2 => 3.0 * 3f64.sqrt() / 4.0 * a.powf(4.0 / 3.0),
        }
    }

    /// Local period of `theta` in `a`.
    pub fn period(self, a: f64) -> f64 {
        match self {
            Transition::AiryToS1 => PI / a.sqrt(),
            Transition::PearceyToS2 => 2.0 * PI / (3f64.sqrt() * a.cbrt()),
        }
    }

    pub fn limit_kernel(self) -> KernelId {
        match self {
            Transition::AiryToS1 => KernelId::S1,
            Transition::PearceyToS2 => KernelId::S2,
        }
    }

    /// Sign of the phase in `e^{+- i theta}` multiplying the `c` coefficients.
    fn phase_sign(self) -> f64 {
        match self {
            Transition::AiryToS1 => 1.0,
            Transition::PearceyToS2 => -1.0,
        }
    }
}

impl std::str::FromStr for Transition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "airy-to-s1" | "airy" => Ok(Transition::AiryToS1),
            "pearcey-to-s2" | "pearcey" => Ok(Transition::PearceyToS2),
            _ => Err(Error::Parse(format!("unknown transition '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub u: f64,
    pub v: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { u: 0.0, v: 0.0, tau1: 0.0, tau2: 0.0 };

    pub fn new(u: f64, v: f64, tau1: f64, tau2: f64) -> Self {
        Self { u, v, tau1, tau2 }
    }
}

impl std::str::FromStr for Point {
    type Err = Error;
    /// Parses `u,v,tau1,tau2`.
    fn from_str(s: &str) -> Result<Self> {
        let xs: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("point '{s}': {e}"))))
            .collect::<Result<_>>()?;
        match xs[..] {
            [u, v, tau1, tau2] => Ok(Point { u, v, tau1, tau2 }),
            _ => Err(Error::Parse(format!("point '{s}' needs four comma-separated numbers"))),
        }
    }
}

/// Taylor coefficients of the saddle-point amplitudes: `b` from the crossing
/// saddle pair, `c` from the opposite pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub transition: Transition,
    pub order: usize,
    pub b: TruncatedSeries2,
    pub c: TruncatedSeries2,
    pub at_point: Point,
}

/// The two conjugate-side amplitudes (starred), built from their own formulas.
#[derive(Clone, Debug, PartialEq)]
pub struct StarredAmplitudes {
    pub phi_star: TruncatedSeries2,
    pub big_phi_star: TruncatedSeries2,
}

/// `B_{k,l}`: moment of `e^{-x^2-y^2} x^k y^l / (x - iy)` times `(x - iy)^2`,
/// reduced to `1/2 Gamma((k+l+1)/2) int_0^{2pi} e^{i phi} cos^k sin^l dphi`.
pub fn gauss_moment_b(k: usize, l: usize) -> C64 {
    if (k + l).is_multiple_of(2) {
        return C64::new(0.0, 0.0);
    }
    let radial = 0.5 * gamma_half((k + l + 1) as u32);
    radial * C64::new(angular(k + 1, l), angular(k, l + 1))
}

/// `int_0^{2pi} cos^m sin^n`, nonzero only for even `m` and `n`.
fn angular(m: usize, n: usize) -> f64 {
    if m % 2 == 1 || n % 2 == 1 {
        return 0.0;
    }
    2.0 * gamma_half((m + 1) as u32) * gamma_half((n + 1) as u32) / gamma_half((m + n + 2) as u32)
}

/// `C_k = int e^{-x^2} x^k dx`.
pub fn gauss_moment_c(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        gamma_half((k + 1) as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussMoments {
    pub b: Vec<Vec<C64>>,
    pub c: Vec<f64>,
}

impl GaussMoments {
    pub fn new(max_index: usize) -> Self {
        let b = (0..=max_index).map(|k| (0..=max_index).map(|l| gauss_moment_b(k, l)).collect()).collect();
        let c = (0..=max_index).map(gauss_moment_c).collect();
        Self { b, c }
    }
}

/// Branch series `g` through the crossing saddle, to `order`.
pub fn branch_series(transition: Transition, order: usize) -> Result<TruncatedSeries1> {
    match transition {
        Transition::AiryToS1 => {
            let phase = make_phase(PhaseKind::AiryCubic);
            let (s, level) = phase.saddle(0)?;
            solve_branch(&phase, s, Sign::Minus, level, C64::from_polar(1.0, PI / 4.0), order)
        }
        Transition::PearceyToS2 => {
            let phase = make_phase(PhaseKind::PearceyQuartic);
            let (s, level) = phase.saddle(0)?;
            solve_branch(&phase, s, Sign::Plus, level, C64::from_polar((2.0f64 / 3.0).sqrt(), 2.0 * PI / 3.0), order)
        }
    }
}

/// One substitution `z = sigma h(alpha x)` for a path variable.
#[derive(Clone, Copy)]
struct Leg<'a> {
    h: &'a TruncatedSeries1,
    sigma: f64,
    scale: C64,
}

impl<'a> Leg<'a> {
    fn new(h: &'a TruncatedSeries1, sigma: f64, scale: C64) -> Self {
        Self { h, sigma, scale }
    }

    fn value(&self, order: usize, in_x: bool) -> TruncatedSeries2 {
        let s = self.h.scale_arg(self.scale);
        let s = if in_x { TruncatedSeries2::from_x(&s, order) } else { TruncatedSeries2::from_y(&s, order) };
        s.scale(C64::from(self.sigma))
    }

    fn slope(&self, order: usize, in_x: bool) -> TruncatedSeries2 {
        let d = self.h.derivative().scale_arg(self.scale);
        let d = if in_x { TruncatedSeries2::from_x(&d, order) } else { TruncatedSeries2::from_y(&d, order) };
        d.scale(self.sigma * self.scale)
    }
}

/// `exp(-v Z - tau2 Z^2 + u W + tau1 W^2) Z' W' / (Z - W)` with `Z` a series
/// in `x` and `W` in `y`. When both legs pass through the same saddle, the
/// vanishing factor `alpha x - beta y` is divided out analytically.
fn amplitude(zeta: Leg, omega: Leg, p: Point, order: usize, crossing: bool) -> Result<TruncatedSeries2> {
    let z = zeta.value(order, true);
    let w = omega.value(order, false);
    let expo = z
        .scale(C64::from(-p.v))
        .sub(&z.mul(&z)?.scale(C64::from(p.tau2)))?
        .add(&w.scale(C64::from(p.u)))?
        .add(&w.mul(&w)?.scale(C64::from(p.tau1)))?
        .exp();
    let jac = zeta.slope(order, true).mul(&omega.slope(order, false))?;
    let inv = if crossing {
        let d = TruncatedSeries2::divided_difference(zeta.h, zeta.scale, omega.scale, order)?;
        d.reciprocal()
            .map_err(|_| Error::Branch("divided difference has a vanishing constant term".into()))?
            .scale(1.0 / (zeta.sigma * zeta.scale))
    } else {
        z.sub(&w)?
            .reciprocal()
            .map_err(|_| Error::Geometry("the two saddles of a non-crossing amplitude coincide".into()))?
    };
    expo.mul(&jac)?.mul(&inv)
}

fn check_point(p: Point) -> Result<()> {
    if [p.u, p.v, p.tau1, p.tau2].iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        usage("expansion point must be finite")
    }
}

pub fn build_amplitudes(transition: Transition, point: Point, order: usize) -> Result<ExpansionCoefficients> {
    check_point(point)?;
    let g = branch_series(transition, order + 2)?;
    let one = C64::new(1.0, 0.0);
    let (b, c) = match transition {
        Transition::AiryToS1 => (
            amplitude(Leg::new(&g, 1.0, one), Leg::new(&g, 1.0, I), point, order, true)?,
            amplitude(Leg::new(&g, 1.0, one), Leg::new(&g, -1.0, -one), point, order, false)?,
        ),
        Transition::PearceyToS2 => {
            let gb = conjugate_coeffs(&g);
            (
                amplitude(Leg::new(&g, 1.0, one), Leg::new(&g, 1.0, I), point, order, true)?,
                amplitude(Leg::new(&g, 1.0, one), Leg::new(&gb, 1.0, I), point, order, false)?,
            )
        }
    };
    Ok(ExpansionCoefficients { transition, order, b, c, at_point: point })
}

/// The starred amplitudes from their own substitutions (the lower saddle).
pub fn build_starred(transition: Transition, point: Point, order: usize) -> Result<StarredAmplitudes> {
    check_point(point)?;
    let g = branch_series(transition, order + 2)?;
    let one = C64::new(1.0, 0.0);
    let (phi_star, big_phi_star) = match transition {
        Transition::AiryToS1 => (
            amplitude(Leg::new(&g, -1.0, -I), Leg::new(&g, -1.0, -one), point, order, true)?,
            amplitude(Leg::new(&g, -1.0, -I), Leg::new(&g, 1.0, I), point, order, false)?,
        ),
        Transition::PearceyToS2 => {
            let gb = conjugate_coeffs(&g);
            (
                amplitude(Leg::new(&gb, 1.0, -one), Leg::new(&gb, 1.0, I), point, order, true)?,
                amplitude(Leg::new(&gb, 1.0, -one), Leg::new(&g, 1.0, I), point, order, false)?,
            )
        }
    };
    Ok(StarredAmplitudes { phi_star, big_phi_star })
}

/// The starred amplitudes predicted by conjugation and negation of `b`, `c`.
pub fn starred_from_symmetry(coeffs: &ExpansionCoefficients) -> StarredAmplitudes {
    let parity = |k: usize, l: usize| if (k + l).is_multiple_of(2) { 1.0 } else { -1.0 };
    StarredAmplitudes {
        phi_star: TruncatedSeries2::from_fn(coeffs.order, |k, l| -parity(k, l) * coeffs.b.coeff(k, l).conj()),
        big_phi_star: TruncatedSeries2::from_fn(coeffs.order, |k, l| parity(k, l) * coeffs.c.coeff(k, l).conj()),
    }
}

/// Closed form of `c_{0,0}` for the Airy transition.
pub fn airy_c00(p: Point) -> C64 {
    0.5 * (-(p.tau1 - p.tau2)).exp() * C64::from_polar(1.0, -(p.u + p.v))
}

/// Closed form of `c_{0,0}` for the Pearcey transition.
pub fn pearcey_c00(p: Point) -> C64 {
    let r3 = 3f64.sqrt();
    let modulus = 2.0 / (3.0 * r3) * ((p.u - p.v) / 2.0 - (p.tau1 - p.tau2) / 2.0).exp();
    C64::from_polar(modulus, -r3 / 2.0 * (p.u + p.v + p.tau1 + p.tau2))
}

fn require_positive(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        usage("a must be positive and finite")
    }
}

/// First correction of the Airy-to-sine limit (order `a^{-3/2}`).
pub fn fluc_s1(p: Point, a: f64) -> Result<f64> {
    require_positive(a)?;
    let d = p.u - p.v;
    let smooth = (p.u + p.v) * d.cos() - 2.0 * (p.tau1 + p.tau2) * d.sin();
    let osc = (4.0 / 3.0 * a.powf(1.5) - (p.u + p.v)).cos();
    Ok(-1.0 / (4.0 * PI) * a.powf(-1.5) * (-(p.tau1 - p.tau2)).exp() * (smooth + osc))
}

fn fluc_s2_smooth(p: Point) -> (f64, f64) {
    let r3 = 3f64.sqrt();
    let envelope = ((p.u - p.v) / 2.0 - (p.tau1 - p.tau2) / 2.0).exp();
    let ps = r3 / 2.0 * (p.u - p.v + p.tau1 - p.tau2);
    let sum = (p.u + p.v) / 2.0;
    let t = p.tau1 + p.tau2;
    (envelope, (sum - t) * ps.sin() + r3 * (sum + t) * ps.cos())
}

/// First correction of the Pearcey-to-sine limit (order `a^{-4/3}`), with the
/// oscillation phase `theta + (sqrt3/2)(u + v + tau1 + tau2)` that the
/// expansion's leading `c_{0,0}` term produces.
pub fn fluc_s2(p: Point, a: f64) -> Result<f64> {
    require_positive(a)?;
    let (envelope, smooth) = fluc_s2_smooth(p);
    let phase = Transition::PearceyToS2.theta(a) + 3f64.sqrt() / 2.0 * (p.u + p.v + p.tau1 + p.tau2);
    Ok(envelope * a.powf(-4.0 / 3.0) / (6.0 * PI) * (smooth - 2.0 / 3f64.sqrt() * phase.cos()))
}

/// The same correction with the alternative cosine phase
/// `theta - (u+v)/2 - (tau1+tau2)/2`, kept for comparison. Agrees with [`fluc_s2`] only
/// when `u + v + tau1 + tau2 = 0`.
pub fn fluc_s2_alt_phase(p: Point, a: f64) -> Result<f64> {
    require_positive(a)?;
    let (envelope, smooth) = fluc_s2_smooth(p);
    let phase = Transition::PearceyToS2.theta(a) - (p.u + p.v) / 2.0 - (p.tau1 + p.tau2) / 2.0;
    Ok(envelope * a.powf(-4.0 / 3.0) / (6.0 * PI) * (smooth - 2.0 / 3f64.sqrt() * phase.cos()))
}

pub fn fluc(transition: Transition, p: Point, a: f64) -> Result<f64> {
    match transition {
        Transition::AiryToS1 => fluc_s1(p, a),
        Transition::PearceyToS2 => fluc_s2(p, a),
    }
}

const TWO_PI_I_SQ: f64 = -4.0 * PI * PI;

fn check_terms(coeffs: &ExpansionCoefficients, n: usize) -> Result<()> {
    if n > 0 && 2 * n - 1 > coeffs.order {
        return usage(format!("{n} terms need amplitude order {}, have {}", 2 * n - 1, coeffs.order));
    }
    Ok(())
}

/// The `nu`-th correction term, `nu >= 1`, summing the upper and lower saddle
/// contributions separately when `starred` is given (the result must then be
/// real) and as `2 Re` of the upper ones otherwise.
pub fn nu_term(coeffs: &ExpansionCoefficients, starred: Option<&StarredAmplitudes>, nu: usize, a: f64) -> Result<C64> {
    if nu == 0 {
        return usage("correction terms start at nu = 1");
    }
    check_terms(coeffs, nu)?;
    let tr = coeffs.transition;
    let osc = C64::from_polar(1.0, tr.phase_sign() * tr.theta(a));
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..2 * nu {
        let l = 2 * nu - 1 - k;
        let m = gauss_moment_b(k, l);
        let upper = coeffs.b.coeff(k, l) * m;
        acc += match starred {
            Some(s) => upper + s.phi_star.coeff(k, l) * m.conj(),
            None => 2.0 * upper.re * C64::new(1.0, 0.0),
        };
    }
    for k in 0..nu {
        let l = nu - 1 - k;
        let gammas = gamma_half(2 * k as u32 + 1) * gamma_half(2 * l as u32 + 1);
        let upper = coeffs.c.coeff(2 * k, 2 * l) * osc * gammas;
        acc += match starred {
            Some(s) => upper + s.big_phi_star.coeff(2 * k, 2 * l) * osc.conj() * gammas,
            None => 2.0 * upper.re * C64::new(1.0, 0.0),
        };
    }
    Ok(acc / (TWO_PI_I_SQ * a.powf(tr.power() * nu as f64)))
}

/// `leading + sum_{nu=1}^{n} nu_term`, with precomputed coefficients.
pub fn partial_sum_with(coeffs: &ExpansionCoefficients, leading: f64, n: usize, a: f64) -> Result<f64> {
    require_positive(a)?;
    check_terms(coeffs, n)?;
    let mut s = leading;
    for nu in 1..=n {
        s += nu_term(coeffs, None, nu, a)?.re;
    }
    Ok(s)
}

/// The limiting sine-type kernel at the point.
pub fn leading_kernel(transition: Transition, p: Point) -> Result<f64> {
    Ok(eval_kernel(&KernelQuery::new(transition.limit_kernel(), p.tau1, p.tau2, p.u, p.v))?.value.re)
}

pub fn expansion_partial_sum(transition: Transition, n: usize, p: Point, a: f64) -> Result<f64> {
    require_positive(a)?;
    let leading = leading_kernel(transition, p)?;
    if n == 0 {
        return Ok(leading);
    }
    let coeffs = build_amplitudes(transition, p, DEFAULT_ORDER.max(2 * n))?;
    partial_sum_with(&coeffs, leading, n, a)
}

/// JSON dump of the coefficient matrices as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDump {
    pub transition: Transition,
    pub point: Point,
    pub order: usize,
    pub b: Vec<Vec<C64>>,
    pub c: Vec<Vec<C64>>,
}

impl From<&ExpansionCoefficients> for CoefficientDump {
    fn from(e: &ExpansionCoefficients) -> Self {
        let matrix = |s: &TruncatedSeries2| {
            (0..=e.order).map(|k| (0..=e.order).map(|l| s.coeff(k, l)).collect()).collect()
        };
        Self { transition: e.transition, point: e.at_point, order: e.order, b: matrix(&e.b), c: matrix(&e.c) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn first_moments() {
        assert_eq!(gauss_moment_b(0, 0), C64::new(0.0, 0.0));
        assert!(close(gauss_moment_b(1, 0), C64::new(PI / 2.0, 0.0), 1e-15));
        assert!(close(gauss_moment_b(0, 1), C64::new(0.0, PI / 2.0), 1e-15));
        assert_eq!(gauss_moment_c(1), 0.0);
        assert!((gauss_moment_c(2) - PI.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn airy_known_coefficients() {
        let e = build_amplitudes(Transition::AiryToS1, Point::ORIGIN, 4).unwrap();
        assert!(close(e.b.coeff(1, 0), C64::new(0.0, -1.0 / 6.0), 1e-13));
        assert!(close(e.b.coeff(0, 1), C64::new(1.0 / 6.0, 0.0), 1e-13));
        assert!(close(e.c.coeff(0, 0), C64::new(0.5, 0.0), 1e-13));

        let p = Point::new(0.3, -0.2, 0.1, 0.05);
        let e = build_amplitudes(Transition::AiryToS1, p, 4).unwrap();
        let pre = (-(p.tau1 - p.tau2)).exp() * C64::from_polar(1.0, p.u - p.v);
        assert!(close(e.b.coeff(1, 0), pre * (p.v + I * (2.0 * p.tau2 - 1.0 / 6.0)), 1e-13));
        assert!(close(e.b.coeff(0, 1), pre * (-I * p.u + 2.0 * p.tau1 + 1.0 / 6.0), 1e-13));
        assert!(close(e.c.coeff(0, 0), airy_c00(p), 1e-13));
    }

    #[test]
    fn pearcey_known_coefficients() {
        let e = build_amplitudes(Transition::PearceyToS2, Point::ORIGIN, 4).unwrap();
        assert!(close(e.b.coeff(1, 0), C64::new(0.0, 2.0 / 9.0), 1e-13));
        let p = Point::new(0.4, -0.7, 0.2, -0.1);
        let e = build_amplitudes(Transition::PearceyToS2, p, 4).unwrap();
        assert!(close(e.c.coeff(0, 0), pearcey_c00(p), 1e-13));
    }

    #[test]
    fn fluc_examples() {
        let a = (1.5 * PI).powf(2.0 / 3.0);
        let f = fluc_s1(Point::ORIGIN, a).unwrap();
        assert!((f + 1.0 / (6.0 * PI * PI)).abs() < 1e-15);
        let a: f64 = 3.0;
        let expected = -a.powf(-4.0 / 3.0) / (3.0 * 3f64.sqrt() * PI) * Transition::PearceyToS2.theta(a).cos();
        assert!((fluc_s2(Point::ORIGIN, a).unwrap() - expected).abs() < 1e-15);
        assert!((fluc_s2_alt_phase(Point::ORIGIN, a).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn too_many_terms() {
        let e = build_amplitudes(Transition::AiryToS1, Point::ORIGIN, 3).unwrap();
        assert!(partial_sum_with(&e, 0.0, 2, 5.0).is_ok());
        assert!(partial_sum_with(&e, 0.0, 3, 5.0).is_err());
    }

    #[test]
    fn point_parsing() {
        let p: Point = "0.5, -0.3,0.2,-0.4".parse().unwrap();
        assert_eq!(p, Point::new(0.5, -0.3, 0.2, -0.4));
        assert!("1,2,3".parse::<Point>().is_err());
    }
}
