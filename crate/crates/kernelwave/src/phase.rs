//! Polynomial phase functions, their saddle points, steepest-descent paths and
//! level-curve export.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cseries::{solve_branch, Sign, TruncatedSeries1};
use crate::error::{usage, Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Horner evaluation of `sum c_k z^k`.
pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
}

/// Coefficients of `p(center + y)` as a polynomial in `y`.
pub fn poly_taylor_shift(coeffs: &[C64], center: C64) -> Vec<C64> {
    let mut out = coeffs.to_vec();
    let n = out.len();
    // Repeated synthetic division by (z - center).
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let hi = out[j + 1];
            out[j] += center * hi;
        }
    }
    out
}

fn poly_derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

/// All roots of a polynomial (ascending coefficients) by Aberth iteration
/// followed by Newton polishing.
fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().map(|x| x.norm() == 0.0).unwrap_or(false) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = c[deg];
    let monic: Vec<C64> = c.iter().map(|x| x / lead).collect();
    let dmonic = poly_derivative(&monic);
    let bound = 1.0 + monic[..deg].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(0.5 * bound, 2.0 * PI * k as f64 / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for k in 0..deg {
            let p = poly_eval(&monic, z[k]);
            let dp = poly_eval(&dmonic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm() / (1.0 + z[k].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let dp = poly_eval(&dmonic, *r);
            if dp.norm() > 0.0 {
                *r -= poly_eval(&monic, *r) / dp;
            }
        }
    }
    if z.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::Geometry("root finder diverged".into()));
    }
    Ok(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    AiryCubic,
    PearceyQuartic,
    CustomPolynomial,
}

/// A polynomial phase `f` with its saddle points and the values of `f` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub kind: PhaseKind,
    coeffs: Vec<C64>,
    pub saddles: Vec<C64>,
    pub levels: Vec<C64>,
}

/// The cubic `z^3/3 + z` or the quartic `z^4/4 + z`.
pub fn make_phase(kind: PhaseKind) -> PhaseSpec {
    let c = |re: f64| C64::new(re, 0.0);
    let (coeffs, saddles) = match kind {
        PhaseKind::AiryCubic => (vec![c(0.0), c(1.0), c(0.0), c(1.0 / 3.0)], vec![C64::i(), -C64::i()]),
        PhaseKind::PearceyQuartic => (
            vec![c(0.0), c(1.0), c(0.0), c(0.0), c(0.25)],
            vec![C64::from_polar(1.0, PI / 3.0), C64::from_polar(1.0, -PI / 3.0), c(-1.0)],
        ),
        PhaseKind::CustomPolynomial => panic!("custom phases are built with PhaseSpec::custom"),
    };
    let levels = saddles.iter().map(|&s| poly_eval(&coeffs, s)).collect();
    PhaseSpec { kind, coeffs, saddles, levels }
}

impl PhaseSpec {
    /// A phase from ascending polynomial coefficients; saddles are the roots of `f'`.
    pub fn custom(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() < 3 {
            return usage("a phase needs degree at least 2");
        }
        let saddles = poly_roots(&poly_derivative(&coeffs))?;
        let levels = saddles.iter().map(|&s| poly_eval(&coeffs, s)).collect();
        Ok(Self { kind: PhaseKind::CustomPolynomial, coeffs, saddles, levels })
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        poly_eval(&self.coeffs, z)
    }

    pub fn level_at(&self, z: C64) -> C64 {
        self.eval(z)
    }

    /// `(f, f', f'')` at `z`.
    pub fn eval_derivs(&self, z: C64) -> (C64, C64, C64) {
        let (mut p, mut d1, mut d2) = (ZERO, ZERO, ZERO);
        for c in self.coeffs.iter().rev() {
            d2 = d2 * z + d1 * 2.0;
            d1 = d1 * z + p;
            p = p * z + c;
        }
        (p, d1, d2)
    }

    pub fn saddle(&self, index: usize) -> Result<(C64, C64)> {
        match (self.saddles.get(index), self.levels.get(index)) {
            (Some(&s), Some(&l)) => Ok((s, l)),
            _ => usage(format!("saddle index {index} out of range ({} saddles)", self.saddles.len())),
        }
    }

    /// The two unit directions `d` with `f''(s) d^2 / 2` a positive multiple of `sign`.
    pub fn branch_directions(&self, index: usize, sign: Sign) -> Result<[C64; 2]> {
        let (s, _) = self.saddle(index)?;
        let (_, _, f2) = self.eval_derivs(s);
        if f2.norm() < 1e-12 {
            return Err(Error::DegenerateSaddle(s));
        }
        let d = (C64::from(sign.value()) / f2).sqrt();
        let d = d / d.norm();
        Ok([d, -d])
    }

    /// The branch coefficient `a_1` with `f'' a_1^2 / 2 = sign`, pointing along `direction`.
    pub fn first_coeff(&self, index: usize, sign: Sign, direction: usize) -> Result<C64> {
        let (s, _) = self.saddle(index)?;
        let (_, _, f2) = self.eval_derivs(s);
        let d = self.branch_directions(index, sign)?[direction % 2];
        Ok(d * (2.0 / f2.norm()).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentOf {
    F,
    MinusF,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionTag {
    pub descent_of: DescentOf,
    pub ray: usize,
}

/// A traced steepest path starting at a saddle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathPolyline {
    pub points: Vec<C64>,
    pub saddle_index: usize,
    pub direction: DirectionTag,
    pub arc_params: Vec<f64>,
}

impl PathPolyline {
    /// Two-column `x y` text, one point per line.
    pub fn to_text(&self) -> String {
        points_to_text(&self.points)
    }
}

pub fn points_to_text(points: &[C64]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{:.17e} {:.17e}", p.re, p.im);
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    pub max_arclength: f64,
    pub step_tol: f64,
    pub decay_budget: f64,
    pub launch_offset: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { max_arclength: 12.0, step_tol: 1e-10, decay_budget: 60.0, launch_offset: 1e-4 }
    }
}

/// Follows a steepest-descent ray of `f` (or of `-f`) away from a saddle.
pub fn trace_steepest(
    phase: &PhaseSpec,
    saddle_index: usize,
    descent_of: DescentOf,
    ray_selector: usize,
    opts: &TraceOptions,
) -> Result<PathPolyline> {
    if opts.max_arclength <= 0.0 {
        return usage("max_arclength must be positive");
    }
    let (s, level) = phase.saddle(saddle_index)?;
    let sgn = match descent_of {
        DescentOf::F => 1.0,
        DescentOf::MinusF => -1.0,
    };
    let h = |z: C64| {
        let (f, d, _) = phase.eval_derivs(z);
        (f * sgn, d * sgn)
    };
    let target_im = (level * sgn).im;
    let start_re = (level * sgn).re;
    // Descent of h: h'' d^2 real negative.
    let d0 = phase.branch_directions(saddle_index, if sgn > 0.0 { Sign::Minus } else { Sign::Plus })?[ray_selector % 2];

    let velocity = |z: C64| -> Option<C64> {
        let (_, d) = h(z);
        let n = d.norm();
        if n < 1e-13 {
            None
        } else {
            Some(-d.conj() / n)
        }
    };
    let project = |mut z: C64| {
        for _ in 0..3 {
            let (v, d) = h(z);
            if d.norm() < 1e-14 {
                break;
            }
            z -= C64::i() * (v.im - target_im) / d;
        }
        z
    };
    let rk4 = |z: C64, ds: f64| -> Option<C64> {
        let k1 = velocity(z)?;
        let k2 = velocity(z + k1 * (ds / 2.0))?;
        let k3 = velocity(z + k2 * (ds / 2.0))?;
        let k4 = velocity(z + k3 * ds)?;
        Some(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0))
    };

    let mut points = vec![s];
    let mut arcs = vec![0.0];
    let mut z = project(s + d0 * opts.launch_offset);
    let mut arc = opts.launch_offset;
    points.push(z);
    arcs.push(arc);
    let mut ds: f64 = 0.01;
    while arc < opts.max_arclength && start_re - h(z).0.re < opts.decay_budget {
        let step = ds.min(opts.max_arclength - arc);
        let full = rk4(z, step);
        let half = rk4(z, step / 2.0).and_then(|m| rk4(m, step / 2.0));
        let (full, half) = match (full, half) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Trace(format!("trace reached a stationary point near {z}"))),
        };
        let err = (full - half).norm();
        if err > opts.step_tol && step > 1e-12 {
            ds = step / 2.0;
            if ds < 1e-12 {
                return Err(Error::Trace(format!("step size underflow near {z}")));
            }
            continue;
        }
        let next = project(half);
        let prev_re = h(z).0.re;
        if h(next).0.re >= prev_re {
            return Err(Error::Trace(format!("descent stalled near {z}")));
        }
        arc += (next - z).norm();
        z = next;
        points.push(z);
        arcs.push(arc);
        if err < opts.step_tol / 32.0 {
            ds = (step * 2.0).min(0.25);
        }
    }
    Ok(PathPolyline {
        points,
        saddle_index,
        direction: DirectionTag { descent_of, ray: ray_selector % 2 },
        arc_params: arcs,
    })
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn square(half: f64) -> Self {
        Self { x_min: -half, x_max: half, y_min: -half, y_max: half }
    }
}

/// Points on `Im f = Im level` inside `window`, located on the edges of a grid
/// with spacing `resolution` by sign change plus bisection.
pub fn export_level_curve(phase: &PhaseSpec, level: C64, window: Window, resolution: f64) -> Result<Vec<C64>> {
    if resolution <= 0.0 || window.x_max <= window.x_min || window.y_max <= window.y_min {
        return usage("level-curve export needs a positive resolution and a nonempty window");
    }
    let nx = ((window.x_max - window.x_min) / resolution).ceil() as usize;
    let ny = ((window.y_max - window.y_min) / resolution).ceil() as usize;
    let hx = (window.x_max - window.x_min) / nx as f64;
    let hy = (window.y_max - window.y_min) / ny as f64;
    let node = |i: usize, j: usize| C64::new(window.x_min + i as f64 * hx, window.y_min + j as f64 * hy);
    let g = |z: C64| phase.eval(z).im - level.im;
    let values: Vec<Vec<f64>> = (0..=nx).map(|i| (0..=ny).map(|j| g(node(i, j))).collect()).collect();

    let bisect = |mut a: C64, mut b: C64, mut ga: f64| {
        for _ in 0..60 {
            let m = (a + b) * 0.5;
            let gm = g(m);
            if gm == 0.0 {
                return m;
            }
            if (gm > 0.0) == (ga > 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        (a + b) * 0.5
    };
    let mut out = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let v = values[i][j];
            if v == 0.0 {
                out.push(node(i, j));
                continue;
            }
            if i < nx && values[i + 1][j] != 0.0 && (values[i + 1][j] > 0.0) != (v > 0.0) {
                out.push(bisect(node(i, j), node(i + 1, j), v));
            }
            if j < ny && values[i][j + 1] != 0.0 && (values[i][j + 1] > 0.0) != (v > 0.0) {
                out.push(bisect(node(i, j), node(i, j + 1), v));
            }
        }
    }
    Ok(out)
}

/// A steepest path through a saddle parameterized exactly by the level
/// variable: `f(z(t)) - f(saddle) = sign * t^2`. Near the saddle the branch
/// series is used; further out a precomputed continuation table seeds Newton.
#[derive(Clone, Debug)]
pub struct LevelPath {
    phase: PhaseSpec,
    center: C64,
    level: C64,
    sign: f64,
    series: TruncatedSeries1,
    series_radius: f64,
    step: f64,
    table_pos: Vec<(C64, C64)>,
    table_neg: Vec<(C64, C64)>,
    t_lo: f64,
    t_hi: f64,
}

impl LevelPath {
    const SERIES_ORDER: usize = 30;
    const TABLE_STEP: f64 = 0.02;

    /// Builds the path and clips it to the parameter range where
    /// `envelope(z(t))` stays within `budget` of its running maximum.
    pub fn truncated(
        phase: &PhaseSpec,
        saddle_index: usize,
        sign: Sign,
        first_coeff: C64,
        envelope: &dyn Fn(C64) -> f64,
        budget: f64,
    ) -> Result<Self> {
        if budget <= 0.0 {
            return Err(Error::Geometry("truncation budget must be positive".into()));
        }
        let (center, level) = phase.saddle(saddle_index)?;
        let series = solve_branch(phase, center, sign, level, first_coeff, Self::SERIES_ORDER)?;
        // Convergence radius of the branch series is set by the nearest other critical value.
        let radius = phase
            .levels
            .iter()
            .filter(|&&l| (l - level).norm() > 1e-9)
            .map(|l| (l - level).norm().sqrt())
            .fold(f64::INFINITY, f64::min);
        let series_radius = if radius.is_finite() { 0.25 * radius } else { 0.5 };
        let mut path = Self {
            phase: phase.clone(),
            center,
            level,
            sign: sign.value(),
            series,
            series_radius,
            step: Self::TABLE_STEP,
            table_pos: Vec::new(),
            table_neg: Vec::new(),
            t_lo: 0.0,
            t_hi: 0.0,
        };
        path.t_hi = path.walk(1.0, envelope, budget)?;
        path.t_lo = -path.walk(-1.0, envelope, budget)?;
        Ok(path)
    }

    fn walk(&mut self, dir: f64, envelope: &dyn Fn(C64) -> f64, budget: f64) -> Result<f64> {
        const T_CAP: f64 = 1e3;
        let mut table = Vec::new();
        let mut z = self.center;
        let mut dz = self.series.coeff(1);
        table.push((z, dz));
        let mut running_max = envelope(z);
        let mut k = 0usize;
        loop {
            k += 1;
            let t = dir * k as f64 * self.step;
            if t.abs() > T_CAP {
                return Err(Error::Geometry("envelope does not decay along a steepest path".into()));
            }
            let (zn, dzn) = if t.abs() <= self.series_radius {
                self.series.eval_with_derivative(C64::from(t))
            } else {
                let guess = z + dz * (dir * self.step);
                self.newton(t, guess).ok_or_else(|| Error::Geometry(format!("level path lost at t = {t}")))?
            };
            z = zn;
            dz = dzn;
            table.push((z, dz));
            let e = envelope(z);
            running_max = running_max.max(e);
            if e < running_max - budget {
                break;
            }
        }
        // Keep one spare entry so seeds are available up to the clip point.
        table.push(match self.newton(dir * (k + 1) as f64 * self.step, z + dz * (dir * self.step)) {
            Some(p) => p,
            None => (z, dz),
        });
        if dir > 0.0 {
            self.table_pos = table;
        } else {
            self.table_neg = table;
        }
        Ok(k as f64 * self.step)
    }

    fn newton(&self, t: f64, mut z: C64) -> Option<(C64, C64)> {
        let rhs = self.level + self.sign * t * t;
        for _ in 0..40 {
            let (f, d, _) = self.phase.eval_derivs(z);
            if d.norm() == 0.0 {
                return None;
            }
            let dz = (f - rhs) / d;
            z -= dz;
            if dz.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
                let (_, d, _) = self.phase.eval_derivs(z);
                return Some((z, C64::from(2.0 * self.sign * t) / d));
            }
        }
        let (f, d, _) = self.phase.eval_derivs(z);
        ((f - rhs).norm() < 1e-12 * (1.0 + rhs.norm())).then(|| (z, C64::from(2.0 * self.sign * t) / d))
    }

    /// Point and derivative `dz/dt` at parameter `t`.
    pub fn point(&self, t: f64) -> (C64, C64) {
        if t.abs() <= self.series_radius {
            return self.series.eval_with_derivative(C64::from(t));
        }
        let table = if t > 0.0 { &self.table_pos } else { &self.table_neg };
        let k = ((t.abs() / self.step).round() as usize).min(table.len() - 1);
        let (zk, dk) = table[k];
        let tk = t.signum() * k as f64 * self.step;
        let (_, f1, f2) = self.phase.eval_derivs(zk);
        let d2 = (C64::from(2.0 * self.sign) - f2 * dk * dk) / f1;
        let dt = t - tk;
        let guess = zk + dk * dt + d2 * (0.5 * dt * dt);
        self.newton(t, guess).unwrap_or((guess, dk + d2 * dt))
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_lo, self.t_hi)
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn first_coeff(&self) -> C64 {
        self.series.coeff(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airy_levels() {
        let p = make_phase(PhaseKind::AiryCubic);
        assert!((p.levels[0] - C64::new(0.0, 2.0 / 3.0)).norm() < 1e-15);
        for (s, l) in p.saddles.iter().zip(&p.levels) {
            assert!(p.eval_derivs(*s).1.norm() < 1e-13);
            assert!((p.eval(*s) - l).norm() < 1e-13);
        }
    }

    #[test]
    fn pearcey_levels() {
        let p = make_phase(PhaseKind::PearceyQuartic);
        let expect = C64::new(3.0 / 8.0, 3.0 * 3f64.sqrt() / 8.0);
        assert!((p.levels[0] - expect).norm() < 1e-15);
        assert!((p.levels[2] - C64::new(-0.75, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn custom_phase_finds_pearcey_saddles() {
        let p = make_phase(PhaseKind::PearceyQuartic);
        let q = PhaseSpec::custom(p.coeffs().to_vec()).unwrap();
        for s in &p.saddles {
            assert!(q.saddles.iter().any(|r| (r - s).norm() < 1e-13));
        }
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let p = make_phase(PhaseKind::PearceyQuartic);
        let c0 = C64::new(0.3, -0.7);
        let shifted = poly_taylor_shift(p.coeffs(), c0);
        let y = C64::new(0.2, 0.1);
        assert!((poly_eval(&shifted, y) - p.eval(c0 + y)).norm() < 1e-14);
    }

    #[test]
    fn level_path_stays_on_level() {
        let p = make_phase(PhaseKind::AiryCubic);
        let a1 = C64::from_polar(1.0, PI / 4.0);
        let path = LevelPath::truncated(&p, 0, Sign::Minus, a1, &|z| (p.eval(z) - p.levels[0]).re * 5.0, 60.0).unwrap();
        let (lo, hi) = path.range();
        assert!(lo < -3.0 && hi > 3.0);
        for k in 0..=40 {
            let t = lo + (hi - lo) * k as f64 / 40.0;
            let (z, dz) = path.point(t);
            let target = p.levels[0] - t * t;
            assert!((p.eval(z) - target).norm() < 1e-12 * (1.0 + target.norm()), "t={t}");
            let h = 1e-6;
            let fd = (path.point(t + h).0 - path.point(t - h).0) / (2.0 * h);
            assert!((fd - dz).norm() < 1e-6 * (1.0 + dz.norm()));
        }
    }
}
