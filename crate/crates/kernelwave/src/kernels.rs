//! Extended Airy, Pearcey, sine (and its two variants) and Pearcey-to-Airy
//! transition kernels, the rescaled left-hand sides of the sine-limit
//! theorems, and the identities relating the kernels.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cseries::Sign;
use crate::error::{usage, Error, Result};
use crate::phase::{make_phase, LevelPath, PhaseKind, PhaseSpec};
use crate::quadrature::{integrate_double, integrate_single, truncate_rays, Contour, Panel, QuadOptions, QuadResult};
use crate::I;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelId {
    AiryExt,
    PearceyExt,
    SineExt,
    S1,
    S2,
    TransitionA,
}

impl KernelId {
    pub const ALL: [KernelId; 6] =
        [KernelId::AiryExt, KernelId::PearceyExt, KernelId::SineExt, KernelId::S1, KernelId::S2, KernelId::TransitionA];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::AiryExt => "airy-ext",
            KernelId::PearceyExt => "pearcey-ext",
            KernelId::SineExt => "sine-ext",
            KernelId::S1 => "s1",
            KernelId::S2 => "s2",
            KernelId::TransitionA => "transition-a",
        }
    }
}

impl std::str::FromStr for KernelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KernelId::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown kernel '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Direct,
    Saddle,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Direct => "direct",
            Backend::Saddle => "saddle",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "saddle" => Ok(Backend::Saddle),
            _ => Err(Error::Parse(format!("unknown backend '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub kernel: KernelId,
    pub tau1: f64,
    pub tau2: f64,
    pub u: f64,
    pub v: f64,
    #[serde(default, alias = "a", skip_serializing_if = "Option::is_none")]
    pub a_param: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub opts: QuadOptions,
}

impl KernelQuery {
    pub fn new(kernel: KernelId, tau1: f64, tau2: f64, u: f64, v: f64) -> Self {
        Self { kernel, tau1, tau2, u, v, a_param: None, backend: Backend::Direct, opts: QuadOptions::default() }
    }

    pub fn transition(a: f64, tau1: f64, tau2: f64, u: f64, v: f64) -> Self {
        Self { a_param: Some(a), ..Self::new(KernelId::TransitionA, tau1, tau2, u, v) }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_opts(mut self, opts: QuadOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("tau1", self.tau1), ("tau2", self.tau2), ("u", self.u), ("v", self.v)] {
            if !x.is_finite() {
                return usage(format!("{name} must be finite"));
            }
        }
        match (self.kernel, self.a_param) {
            (KernelId::TransitionA, Some(a)) if a >= 0.0 && a.is_finite() => {}
            (KernelId::TransitionA, _) => return usage("transition-a needs a finite a_param >= 0"),
            (_, Some(_)) => return usage(format!("a_param is only meaningful for transition-a, not {}", self.kernel.name())),
            _ => {}
        }
        self.opts.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: C64,
    pub imag_residual: f64,
    pub error_estimate: f64,
    pub backend_used: Backend,
    /// False when adaptive refinement stopped before meeting the tolerance.
    pub converged: bool,
}

impl KernelValue {
    fn from_parts(value: C64, error_estimate: f64, backend_used: Backend, converged: bool) -> Self {
        Self { value, imag_residual: value.im.abs(), error_estimate, backend_used, converged }
    }

    fn scaled(self, s: f64) -> Self {
        Self::from_parts(self.value * s, self.error_estimate * s.abs(), self.backend_used, self.converged)
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variance {
    FourPi,
    TwoPi,
}

/// Gaussian subtracted from an extended kernel when `dt = tau1 - tau2 > 0`.
pub fn heat_term(dt: f64, dx: f64, variance: Variance) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    match variance {
        Variance::FourPi => (-dx * dx / (4.0 * dt)).exp() / (4.0 * PI * dt).sqrt(),
        Variance::TwoPi => (-dx * dx / (2.0 * dt)).exp() / (2.0 * PI * dt).sqrt(),
    }
}

const TWO_PI_I_SQ: C64 = C64::new(-4.0 * PI * PI, 0.0);

/// Ray angle of the zeta contour in the direct Airy geometry. Steeper than the
/// defining pi/3 (same decay sector), which keeps cancellation small when the
/// saddles sit far up the imaginary axis.
const AIRY_ZETA_ANGLE: f64 = 4.0 * PI / 9.0;
const TRANSITION_ZETA_ANGLE: f64 = 7.0 * PI / 16.0;
const TRANSITION_RIGHT_ANGLE: f64 = 7.0 * PI / 48.0;

/// Phase advance allowed per panel on the direct contours.
const PANEL_PHASE: f64 = 12.0;

pub fn eval_kernel(q: &KernelQuery) -> Result<KernelValue> {
    q.validate()?;
    let dt = q.tau1 - q.tau2;
    let dx = q.u - q.v;
    match q.kernel {
        KernelId::SineExt => {
            // Gaussian factor e^{-dt w^2 / 2}: the sign that makes the heat-term
            // subtraction and the S1 relation consistent.
            let r = integrate_single(
                &|w| (-0.5 * dt * w * w + I * dx * w).exp() / (2.0 * PI),
                &Contour::segment(C64::from(-PI), C64::from(PI)),
                &q.opts,
            )?;
            Ok(single_value(r, heat_term(dt, dx, Variance::TwoPi)))
        }
        KernelId::S1 => Ok(single_value(s1_integral(dt, dx, &q.opts)?, heat_term(dt, dx, Variance::FourPi))),
        KernelId::S2 => Ok(single_value(s2_integral(dt, dx, &q.opts)?, heat_term(dt, dx, Variance::FourPi))),
        KernelId::AiryExt => match q.backend {
            Backend::Direct => airy_direct(q.tau1, q.tau2, q.u, q.v, &q.opts),
            Backend::Saddle => {
                // Any a > 0 gives an exact representation; pick one that keeps the
                // rescaled arguments moderate.
                let a = (-(q.u + q.v) / 2.0).max(1.0);
                let s = a.sqrt();
                let lhs = airy_saddle(a, a * q.tau1, a * q.tau2, s * (q.u + a), s * (q.v + a), &q.opts)?;
                Ok(lhs.scaled(s))
            }
        },
        KernelId::PearceyExt => match q.backend {
            Backend::Direct => pearcey_direct(q.tau1, q.tau2, q.u, q.v, &q.opts),
            Backend::Saddle => {
                let a = ((q.u + q.v) / 2.0).max(1.0);
                let c = a.cbrt();
                let t = a.powf(2.0 / 3.0) / 2.0;
                let lhs = pearcey_saddle(a, t * q.tau1, t * q.tau2, c * (q.u - a), c * (q.v - a), &q.opts)?;
                Ok(lhs.scaled(c))
            }
        },
        KernelId::TransitionA => transition_direct(q.a_param.unwrap_or(0.0), q.tau1, q.tau2, q.u, q.v, &q.opts),
    }
}

fn single_value(r: QuadResult, heat: f64) -> KernelValue {
    KernelValue::from_parts(r.value - heat, r.error, Backend::Direct, r.converged)
}

/// `(1/2 pi i) int_{-i}^{i} exp(dt w^2 + dx w) dw`.
fn s1_integral(dt: f64, dx: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_single(&|w| (dt * w * w + dx * w).exp() / (2.0 * PI * I), &Contour::segment(-I, I), opts)
}

/// Same integrand over the segment from `e^{-i pi/3}` to `e^{i pi/3}`.
fn s2_integral(dt: f64, dx: f64, opts: &QuadOptions) -> Result<QuadResult> {
    let end = C64::from_polar(1.0, PI / 3.0);
    integrate_single(&|w| (dt * w * w + dx * w).exp() / (2.0 * PI * I), &Contour::segment(end.conj(), end), opts)
}

/// Exponent pieces of a double-contour kernel.
struct Exponents<'a> {
    zeta: &'a (dyn Fn(C64) -> C64 + Sync),
    zeta_slope: &'a dyn Fn(C64) -> C64,
    omega: &'a (dyn Fn(C64) -> C64 + Sync),
    omega_slope: &'a dyn Fn(C64) -> C64,
}

/// Truncates ray contours by their envelopes and panelizes them so that the
/// local phase advances by a bounded amount per panel.
fn prepare_rays(contours: Vec<Contour>, exp: &dyn Fn(C64) -> C64, slope: &dyn Fn(C64) -> C64, opts: &QuadOptions) -> Result<Vec<Contour>> {
    contours
        .into_iter()
        .map(|c| {
            let t = truncate_rays(&c, &|z| exp(z).re, opts.ray_truncation_budget)?;
            Ok(t.subdivide(&|z| (PANEL_PHASE / (slope(z).norm() + 1e-300)).clamp(0.05, 2.0)))
        })
        .collect()
}

fn double_kernel(e: &Exponents, zetas: &[Contour], omegas: &[Contour], opts: &QuadOptions) -> Result<QuadResult> {
    let f = |z: C64, w: C64| ((e.zeta)(z) + (e.omega)(w)).exp() / ((z - w) * TWO_PI_I_SQ);
    let mut value = C64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = true;
    for a in zetas {
        for b in omegas {
            let r = integrate_double(&f, a, b, opts)?;
            value += r.value;
            error += r.error;
            converged &= r.converged;
        }
    }
    Ok(QuadResult { value, error, converged })
}

fn direct_double(e: &Exponents, zetas: Vec<Contour>, omegas: Vec<Contour>, opts: &QuadOptions) -> Result<QuadResult> {
    let zetas = prepare_rays(zetas, e.zeta, e.zeta_slope, opts)?;
    let omegas = prepare_rays(omegas, e.omega, e.omega_slope, opts)?;
    double_kernel(e, &zetas, &omegas, opts)
}

fn polar(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

fn airy_direct(tau1: f64, tau2: f64, u: f64, v: f64, opts: &QuadOptions) -> Result<KernelValue> {
    let d = opts.direct_offset;
    let e = Exponents {
        zeta: &|z| z * z * z / 3.0 - v * z - tau2 * z * z,
        zeta_slope: &|z| z * z - v - 2.0 * tau2 * z,
        omega: &|w| -w * w * w / 3.0 + u * w + tau1 * w * w,
        omega_slope: &|w| -w * w + u + 2.0 * tau1 * w,
    };
    // Vertices at tau2 and tau1 complete the cubes and remove the quadratic
    // growth along the rays; Sigma has to stay to the right of Gamma.
    let mid = 0.5 * (tau1 + tau2);
    let th = AIRY_ZETA_ANGLE;
    let sigma = Contour::wedge(C64::from(tau2.max(mid) + d), polar(-th), polar(th));
    let gamma = Contour::wedge(C64::from(tau1.min(mid) - d), polar(-(PI - th)), polar(PI - th));
    let r = direct_double(&e, vec![sigma], vec![gamma], opts)?;
    let heat = heat_term(tau1 - tau2, u - v, Variance::FourPi);
    Ok(KernelValue::from_parts(r.value - heat, r.error, Backend::Direct, r.converged))
}

fn pearcey_direct(tau1: f64, tau2: f64, u: f64, v: f64, opts: &QuadOptions) -> Result<KernelValue> {
    let d = opts.direct_offset;
    let e = Exponents {
        zeta: &|z| -z.powu(4) / 4.0 - tau2 * z * z / 2.0 - v * z,
        zeta_slope: &|z| -z.powu(3) - tau2 * z - v,
        omega: &|w| w.powu(4) / 4.0 + tau1 * w * w / 2.0 + u * w,
        omega_slope: &|w| w.powu(3) + tau1 * w + u,
    };
    let line = Contour::wedge(C64::from(d), -I, I);
    let right = Contour::wedge(C64::from(2.0 * d), polar(PI / 4.0), polar(-PI / 4.0));
    let left = Contour::wedge(C64::from(-d), polar(-3.0 * PI / 4.0), polar(3.0 * PI / 4.0));
    let r = direct_double(&e, vec![line], vec![right, left], opts)?;
    let heat = heat_term(tau1 - tau2, u - v, Variance::TwoPi);
    Ok(KernelValue::from_parts(r.value - heat, r.error, Backend::Direct, r.converged))
}

fn transition_direct(a: f64, tau1: f64, tau2: f64, u: f64, v: f64, opts: &QuadOptions) -> Result<KernelValue> {
    let d = opts.direct_offset;
    let e = Exponents {
        zeta: &|z| -z.powu(4) / 4.0 + a * z.powu(3) / 3.0 - tau2 * z * z / 2.0 - v * z,
        zeta_slope: &|z| -z.powu(3) + a * z * z - tau2 * z - v,
        omega: &|w| w.powu(4) / 4.0 - a * w.powu(3) / 3.0 + tau1 * w * w / 2.0 + u * w,
        omega_slope: &|w| w.powu(3) - a * w * w + tau1 * w + u,
    };
    let zeta = Contour::wedge(C64::from(d), polar(-TRANSITION_ZETA_ANGLE), polar(TRANSITION_ZETA_ANGLE));
    let right = Contour::wedge(C64::from(2.0 * d), polar(TRANSITION_RIGHT_ANGLE), polar(-TRANSITION_RIGHT_ANGLE));
    let left = Contour::wedge(C64::from(-d), polar(-3.0 * PI / 4.0), polar(3.0 * PI / 4.0));
    let r = direct_double(&e, vec![zeta], vec![right, left], opts)?;
    let heat = heat_term(tau1 - tau2, u - v, Variance::TwoPi);
    Ok(KernelValue::from_parts(r.value - heat, r.error, Backend::Direct, r.converged))
}

/// A steepest path through saddle `index` as a panelized contour, clipped by
/// `envelope`, with a crossing declared at the saddle.
fn level_contour(
    phase: &PhaseSpec,
    index: usize,
    sign: Sign,
    first_coeff: C64,
    envelope: &dyn Fn(C64) -> f64,
    opts: &QuadOptions,
) -> Result<Contour> {
    let path = Arc::new(LevelPath::truncated(phase, index, sign, first_coeff, envelope, opts.ray_truncation_budget)?);
    let (lo, hi) = path.range();
    let first = opts.duffy_radius / first_coeff.norm();
    // Panel boundaries at 0, +-first, +-2 first, +-4 first, ... clipped to the range.
    let mut cuts = vec![0.0];
    let mut step = first;
    let mut x = 0.0;
    while x < hi {
        x = (x + step).min(hi);
        cuts.push(x);
        step *= 2.0;
    }
    let (mut step, mut x) = (first, 0.0);
    while x > lo {
        x = (x - step).max(lo);
        cuts.insert(0, x);
        step *= 2.0;
    }
    let panels = cuts
        .windows(2)
        .map(|w| Panel::Level { path: path.clone(), t0: w[0], t1: w[1] })
        .collect();
    Contour::new(panels)?.with_crossing(path.center())
}

/// Shared machinery of the two saddle evaluations: `phase_sign` is +1 when the
/// zeta exponent carries `+A f`, -1 for `-A f`.
#[allow(clippy::too_many_arguments)]
fn saddle_double(
    phase: &PhaseSpec,
    amp: f64,
    phase_sign: f64,
    zeta_paths: [(usize, Sign, C64); 2],
    omega_paths: [(usize, Sign, C64); 2],
    tau1: f64,
    tau2: f64,
    u: f64,
    v: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let zeta_exp = |z: C64| phase.eval(z) * (phase_sign * amp) - v * z - tau2 * z * z;
    let omega_exp = |w: C64| -phase.eval(w) * (phase_sign * amp) + u * w + tau1 * w * w;
    let zetas = zeta_paths
        .iter()
        .map(|&(k, s, a1)| level_contour(phase, k, s, a1, &|z| zeta_exp(z).re, opts))
        .collect::<Result<Vec<_>>>()?;
    let omegas = omega_paths
        .iter()
        .map(|&(k, s, a1)| level_contour(phase, k, s, a1, &|w| omega_exp(w).re, opts))
        .collect::<Result<Vec<_>>>()?;
    let none = |_: C64| C64::new(0.0, 0.0);
    let e = Exponents { zeta: &zeta_exp, zeta_slope: &none, omega: &omega_exp, omega_slope: &none };
    double_kernel(&e, &zetas, &omegas, opts)
}

fn airy_saddle(a: f64, tau1: f64, tau2: f64, u: f64, v: f64, opts: &QuadOptions) -> Result<KernelValue> {
    let phase = make_phase(PhaseKind::AiryCubic);
    let r = saddle_double(
        &phase,
        a.powf(1.5),
        1.0,
        [(0, Sign::Minus, polar(PI / 4.0)), (1, Sign::Minus, polar(3.0 * PI / 4.0))],
        [(0, Sign::Plus, polar(3.0 * PI / 4.0)), (1, Sign::Plus, polar(PI / 4.0))],
        tau1,
        tau2,
        u,
        v,
        opts,
    )?;
    let s1 = eval_kernel(&KernelQuery::new(KernelId::S1, tau1, tau2, u, v).with_opts(*opts))?;
    Ok(KernelValue::from_parts(r.value + s1.value, r.error + s1.error_estimate, Backend::Saddle, r.converged && s1.converged))
}

fn pearcey_saddle(a: f64, tau1: f64, tau2: f64, u: f64, v: f64, opts: &QuadOptions) -> Result<KernelValue> {
    let phase = make_phase(PhaseKind::PearceyQuartic);
    let r23 = (2.0f64 / 3.0).sqrt();
    let r = saddle_double(
        &phase,
        a.powf(4.0 / 3.0),
        -1.0,
        [(0, Sign::Plus, C64::from_polar(r23, 2.0 * PI / 3.0)), (1, Sign::Plus, C64::from_polar(r23, PI / 3.0))],
        [(0, Sign::Minus, C64::from_polar(r23, 7.0 * PI / 6.0)), (1, Sign::Minus, C64::from_polar(r23, -PI / 6.0))],
        tau1,
        tau2,
        u,
        v,
        opts,
    )?;
    let s2 = eval_kernel(&KernelQuery::new(KernelId::S2, tau1, tau2, u, v).with_opts(*opts))?;
    Ok(KernelValue::from_parts(r.value + s2.value, r.error + s2.error_estimate, Backend::Saddle, r.converged && s2.converged))
}

/// `a^{-1/2} K^Ai_{tau1/a, tau2/a}(u/sqrt(a) - a, v/sqrt(a) - a)`.
pub fn rescaled_airy_lhs(a: f64, tau1: f64, tau2: f64, u: f64, v: f64, backend: Backend, opts: &QuadOptions) -> Result<KernelValue> {
    if a.is_nan() || a <= 0.0 {
        return usage("rescaling parameter a must be positive");
    }
    match backend {
        Backend::Saddle => airy_saddle(a, tau1, tau2, u, v, opts),
        Backend::Direct => {
            let s = a.sqrt();
            let q = KernelQuery::new(KernelId::AiryExt, tau1 / a, tau2 / a, u / s - a, v / s - a).with_opts(*opts);
            Ok(eval_kernel(&q)?.scaled(1.0 / s))
        }
    }
}

/// `a^{-1/3} K^P_{2 tau1/a^{2/3}, 2 tau2/a^{2/3}}(u/a^{1/3} + a, v/a^{1/3} + a)`.
pub fn rescaled_pearcey_lhs(a: f64, tau1: f64, tau2: f64, u: f64, v: f64, backend: Backend, opts: &QuadOptions) -> Result<KernelValue> {
    if a.is_nan() || a <= 0.0 {
        return usage("rescaling parameter a must be positive");
    }
    match backend {
        Backend::Saddle => pearcey_saddle(a, tau1, tau2, u, v, opts),
        Backend::Direct => {
            let c = a.cbrt();
            let t = 2.0 / (c * c);
            let q = KernelQuery::new(KernelId::PearceyExt, t * tau1, t * tau2, u / c + a, v / c + a).with_opts(*opts);
            Ok(eval_kernel(&q)?.scaled(1.0 / c))
        }
    }
}

/// Both sides of `pi K^{S1}_{pi^2 tau/2}(pi u, pi v) = K^sine_tau(u, v)`.
pub fn relation_conn_s(tau1: f64, tau2: f64, u: f64, v: f64) -> Result<(KernelValue, KernelValue)> {
    let t = PI * PI / 2.0;
    let lhs = eval_kernel(&KernelQuery::new(KernelId::S1, t * tau1, t * tau2, PI * u, PI * v))?.scaled(PI);
    let rhs = eval_kernel(&KernelQuery::new(KernelId::SineExt, tau1, tau2, u, v))?;
    Ok((lhs, rhs))
}

/// Both sides of the gauge relation between the S2 and S1 variants.
pub fn relation_conn_ss(tau1: f64, tau2: f64, u: f64, v: f64) -> Result<(KernelValue, KernelValue)> {
    let r3 = 3f64.sqrt();
    let gauge = 2.0 / r3 * ((tau1 - tau2) / 3.0 - (u - v) / r3).exp();
    let q = KernelQuery::new(
        KernelId::S2,
        4.0 * tau1 / 3.0,
        4.0 * tau2 / 3.0,
        2.0 * u / r3 - 4.0 * tau1 / 3.0,
        2.0 * v / r3 - 4.0 * tau2 / 3.0,
    );
    let lhs = eval_kernel(&q)?.scaled(gauge);
    let rhs = eval_kernel(&KernelQuery::new(KernelId::S1, tau1, tau2, u, v))?;
    Ok((lhs, rhs))
}

/// `(a^{1/3} K^a_{2a^{2/3}tau}(a^{1/3}u, a^{1/3}v), K^Ai_tau(u, v))`; at `a = 0`
/// the first entry is the unscaled `K^0` evaluated at the unscaled arguments.
pub fn transition_interpolation_check(a: f64, tau1: f64, tau2: f64, u: f64, v: f64) -> Result<(KernelValue, KernelValue)> {
    if a.is_nan() || a < 0.0 {
        return usage("a must be nonnegative");
    }
    let airy = eval_kernel(&KernelQuery::new(KernelId::AiryExt, tau1, tau2, u, v))?;
    if a == 0.0 {
        return Ok((eval_kernel(&KernelQuery::transition(0.0, tau1, tau2, u, v))?, airy));
    }
    let c = a.cbrt();
    let t = 2.0 * c * c;
    let k = eval_kernel(&KernelQuery::transition(a, t * tau1, t * tau2, c * u, c * v))?.scaled(c);
    Ok((k, airy))
}

pub const CSV_HEADER: &str = "kernel,a,tau1,tau2,u,v,re,im,err,backend";

/// One CSV row in the batch output format, with 17 significant digits.
pub fn csv_row(q: &KernelQuery, r: &KernelValue) -> String {
    let mut s = String::new();
    let a = q.a_param.map(|a| format!("{a:.16e}")).unwrap_or_default();
    let _ = write!(
        s,
        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        q.kernel.name(),
        a,
        q.tau1,
        q.tau2,
        q.u,
        q.v,
        r.value.re,
        r.value.im,
        r.error_estimate,
        r.backend_used.name()
    );
    s
}

/// Reads queries from JSON lines or from the CSV batch format (detected by the header).
pub fn parse_queries(text: &str, defaults: &QuadOptions) -> Result<Vec<KernelQuery>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, first)) = lines.next() else { return Ok(vec![]) };
    if first.trim().starts_with("kernel,") {
        let cols: Vec<&str> = first.trim().split(',').collect();
        let col = |name: &str| cols.iter().position(|c| *c == name);
        let idx = |name: &str| col(name).ok_or_else(|| Error::Parse(format!("CSV header lacks column '{name}'")));
        let (ik, it1, it2, iu, iv) = (idx("kernel")?, idx("tau1")?, idx("tau2")?, idx("u")?, idx("v")?);
        let (ia, ib) = (col("a"), col("backend"));
        return lines
            .map(|(n, line)| {
                let f: Vec<&str> = line.trim().split(',').collect();
                let get = |i: usize| f.get(i).copied().ok_or_else(|| Error::Parse(format!("line {}: missing field", n + 1)));
                let num = |i: usize| -> Result<f64> {
                    get(i)?.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
                };
                let a_param = match ia.map(get).transpose()? {
                    Some(s) if !s.trim().is_empty() => {
                        Some(s.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?)
                    }
                    _ => None,
                };
                let backend = match ib {
                    Some(i) => get(i)?.trim().parse()?,
                    None => Backend::Direct,
                };
                let q = KernelQuery {
                    kernel: get(ik)?.trim().parse()?,
                    tau1: num(it1)?,
                    tau2: num(it2)?,
                    u: num(iu)?,
                    v: num(iv)?,
                    a_param,
                    backend,
                    opts: *defaults,
                };
                q.validate()?;
                Ok(q)
            })
            .collect();
    }
    std::iter::once((0, first))
        .chain(lines)
        .map(|(n, line)| {
            let mut value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            if value.get("opts").is_none() {
                value["opts"] = serde_json::to_value(defaults)?;
            }
            let q: KernelQuery = serde_json::from_value(value).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            q.validate()?;
            Ok(q)
        })
        .collect()
}
