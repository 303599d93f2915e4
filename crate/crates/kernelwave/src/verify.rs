//! Convergence-rate studies for the two sine limits, backend cross-checks and
//! report output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::expansion::{build_amplitudes, leading_kernel, nu_term, Point, Transition, DEFAULT_ORDER};
use crate::kernels::{
    eval_kernel, relation_conn_s, relation_conn_ss, rescaled_airy_lhs, rescaled_pearcey_lhs, Backend, KernelId,
    KernelQuery, KernelValue,
};
use crate::quadrature::QuadOptions;

/// The default sweep of the rescaling parameter.
pub const DEFAULT_A_VALUES: [f64; 7] = [4.0, 5.5, 7.0, 8.5, 10.0, 12.0, 14.0];

/// Sample points `(u, v, tau1, tau2)` used by the checked studies.
pub const SAMPLE_POINTS: [Point; 3] = [
    Point { u: 0.0, v: 0.0, tau1: 0.0, tau2: 0.0 },
    Point { u: 0.5, v: -0.3, tau1: 0.2, tau2: -0.4 },
    Point { u: 0.3, v: -0.2, tau1: 0.1, tau2: 0.05 },
];

/// How residuals at each `a` are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    /// The residual at `a` itself.
    Plain,
    /// The maximum over a half-period window of the oscillation around `a`.
    Envelope,
    /// Plain, switching to the envelope when a plain fit is too noisy.
    #[default]
    Auto,
}

/// Samples per envelope window.
const ENVELOPE_SAMPLES: usize = 9;
/// Standard error above which `Auto` switches to the envelope.
const NOISY_FIT: f64 = 0.2;
/// Residuals must exceed this multiple of the quadrature error to be fitted.
const NOISE_FACTOR: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub transition: Transition,
    pub point: Point,
    pub a_values: Vec<f64>,
    /// `residuals[n][j]` for `n = 0..=n_max` and `a_values[j]`.
    pub residuals: Vec<Vec<f64>>,
    /// Quadrature error estimate per `a`.
    pub noise: Vec<f64>,
    pub slopes: Vec<f64>,
    pub slope_ci: Vec<f64>,
    pub envelope: bool,
}

/// Ordinary least squares on `(ln x, ln y)`; returns `(slope, stderr)`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return usage("xs and ys differ in length");
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 usable points, have {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok((slope, (sse / (nf - 2.0) / sxx).sqrt()))
}

/// The rescaled kernel whose limit is described by `transition`.
pub fn rescaled_lhs(transition: Transition, p: Point, a: f64, backend: Backend, opts: &QuadOptions) -> Result<KernelValue> {
    match transition {
        Transition::AiryToS1 => rescaled_airy_lhs(a, p.tau1, p.tau2, p.u, p.v, backend, opts),
        Transition::PearceyToS2 => rescaled_pearcey_lhs(a, p.tau1, p.tau2, p.u, p.v, backend, opts),
    }
}

/// Residuals `|lhs - partial_sum(n)|` for `n = 0..=n_max` at one `a`, and the
/// error estimate of the evaluation.
#[allow(clippy::too_many_arguments)]
fn residuals_at(
    transition: Transition,
    p: Point,
    a: f64,
    n_max: usize,
    leading: f64,
    terms_of: &dyn Fn(f64) -> Result<Vec<f64>>,
    backend: Backend,
    opts: &QuadOptions,
) -> Result<(Vec<f64>, f64)> {
    let lhs = rescaled_lhs(transition, p, a, backend, opts)?;
    let terms = terms_of(a)?;
    let mut sum = leading;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push((lhs.value.re - sum).abs());
    for t in terms.iter().take(n_max) {
        sum += t;
        out.push((lhs.value.re - sum).abs());
    }
    Ok((out, lhs.error_estimate))
}

/// Fits each row of `rows` against `xs`, ignoring cells below the noise floor.
fn fit_rows(xs: &[f64], rows: &[Vec<f64>], noise: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut slopes = Vec::new();
    let mut cis = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        let (fx, fy): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(row)
            .zip(noise)
            .filter(|((_, r), e)| **r > NOISE_FACTOR * **e)
            .map(|((x, r), _)| (*x, *r))
            .unzip();
        if fx.len() < 3 {
            return Err(Error::InsufficientPrecision(format!(
                "N={n}: only {} residuals above {NOISE_FACTOR}x the quadrature error; use the saddle backend or larger a",
                fx.len()
            )));
        }
        let (s, e) = fit_loglog_slope(&fx, &fy)?;
        slopes.push(s);
        cis.push(e);
    }
    Ok((slopes, cis))
}

pub fn residual_study(
    transition: Transition,
    point: Point,
    a_values: &[f64],
    n_max: usize,
    backend: Backend,
    opts: &QuadOptions,
    mode: ResidualMode,
) -> Result<ResidualTable> {
    if a_values.len() < 3 {
        return usage("a rate study needs at least 3 values of a");
    }
    if a_values.windows(2).any(|w| w[1] <= w[0]) || a_values[0] <= 0.0 {
        return usage("a values must be positive and strictly increasing");
    }
    let coeffs = build_amplitudes(transition, point, DEFAULT_ORDER.max(2 * n_max))?;
    let leading = leading_kernel(transition, point)?;
    let terms_of = |a: f64| -> Result<Vec<f64>> { (1..=n_max).map(|nu| Ok(nu_term(&coeffs, None, nu, a)?.re)).collect() };

    let mut table = ResidualTable {
        transition,
        point,
        a_values: a_values.to_vec(),
        residuals: vec![],
        noise: vec![],
        slopes: vec![],
        slope_ci: vec![],
        envelope: false,
    };

    if mode != ResidualMode::Envelope {
        let cells: Vec<(Vec<f64>, f64)> = a_values
            .par_iter()
            .map(|&a| residuals_at(transition, point, a, n_max, leading, &terms_of, backend, opts))
            .collect::<Result<_>>()?;
        table.noise = cells.iter().map(|c| c.1).collect();
        table.residuals = (0..=n_max).map(|n| cells.iter().map(|c| c.0[n]).collect()).collect();
        let (s, e) = fit_rows(a_values, &table.residuals, &table.noise)?;
        let noisy = e.iter().any(|&x| x > NOISY_FIT);
        table.slopes = s;
        table.slope_ci = e;
        if mode == ResidualMode::Plain || !noisy {
            return Ok(table);
        }
    }

    // Envelope: sample each half-period window, then normalise the samples to
    // the window centre with the fitted power itself, iterated to a fixed point.
    let windows: Vec<Vec<f64>> = a_values
        .iter()
        .map(|&a| {
            let half = transition.period(a) / 4.0;
            (0..ENVELOPE_SAMPLES)
                .map(|j| a - half + 2.0 * half * j as f64 / (ENVELOPE_SAMPLES - 1) as f64)
                .collect()
        })
        .collect();
    let flat: Vec<f64> = windows.iter().flatten().copied().collect();
    let cells: Vec<(Vec<f64>, f64)> = flat
        .par_iter()
        .map(|&s| residuals_at(transition, point, s, n_max, leading, &terms_of, backend, opts))
        .collect::<Result<_>>()?;
    let noise: Vec<f64> = cells
        .chunks(ENVELOPE_SAMPLES)
        .map(|w| w.iter().map(|c| c.1).fold(0.0, f64::max))
        .collect();
    let mut residuals = Vec::new();
    let mut slopes = Vec::new();
    let mut cis = Vec::new();
    for n in 0..=n_max {
        let mut p = 0.0;
        let mut row = vec![];
        let mut fit = (0.0, 0.0);
        for _ in 0..20 {
            row = windows
                .iter()
                .zip(a_values)
                .zip(cells.chunks(ENVELOPE_SAMPLES))
                .map(|((ss, &a), cs)| ss.iter().zip(cs).map(|(s, c)| c.0[n] * (s / a).powf(-p)).fold(0.0, f64::max))
                .collect();
            let (s, e) = fit_rows(a_values, std::slice::from_ref(&row), &noise)?;
            fit = (s[0], e[0]);
            let done = (fit.0 - p).abs() < 1e-6;
            p = fit.0;
            if done {
                break;
            }
        }
        residuals.push(row);
        slopes.push(fit.0);
        cis.push(fit.1);
    }
    table.residuals = residuals;
    table.noise = noise;
    table.slopes = slopes;
    table.slope_ci = cis;
    table.envelope = true;
    Ok(table)
}

/// Acceptance window for the fitted slope of the `n`-term residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeWindow {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

pub fn default_windows(transition: Transition) -> Vec<SlopeWindow> {
    let w = |n, lo, hi| SlopeWindow { n, lo, hi };
    match transition {
        Transition::AiryToS1 => vec![w(0, -1.7, -1.3), w(1, -3.35, -2.65), w(2, -4.9, -4.1)],
        Transition::PearceyToS2 => vec![w(0, -1.55, -1.15), w(1, -3.0, -2.35)],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub n: usize,
    pub slope: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

pub fn check_windows(table: &ResidualTable, windows: &[SlopeWindow]) -> Vec<WindowCheck> {
    windows
        .iter()
        .map(|w| {
            let slope = table.slopes.get(w.n).copied().unwrap_or(f64::NAN);
            let stderr = table.slope_ci.get(w.n).copied().unwrap_or(f64::NAN);
            WindowCheck { n: w.n, slope, stderr, lo: w.lo, hi: w.hi, pass: slope >= w.lo && slope <= w.hi }
        })
        .collect()
}

pub const RESIDUAL_CSV_HEADER: &str = "transition,u,v,tau1,tau2,N,a,residual";

pub fn residual_csv(tables: &[ResidualTable]) -> String {
    let mut s = format!("{RESIDUAL_CSV_HEADER}\n");
    for t in tables {
        let p = t.point;
        for (n, row) in t.residuals.iter().enumerate() {
            for (a, r) in t.a_values.iter().zip(row) {
                let _ = writeln!(
                    s,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{n},{a:.16e},{r:.16e}",
                    t.transition.name(),
                    p.u,
                    p.v,
                    p.tau1,
                    p.tau2
                );
            }
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub transition: Transition,
    pub point: Point,
    pub envelope: bool,
    pub slopes: Vec<f64>,
    pub slope_ci: Vec<f64>,
    pub checks: Vec<WindowCheck>,
    pub pass: bool,
}

pub fn summarize(table: &ResidualTable, windows: &[SlopeWindow]) -> StudySummary {
    let checks = check_windows(table, windows);
    StudySummary {
        transition: table.transition,
        point: table.point,
        envelope: table.envelope,
        slopes: table.slopes.clone(),
        slope_ci: table.slope_ci.clone(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

/// One two-sided numerical check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum CrossCheck {
    /// DIRECT against SADDLE for a kernel query.
    Backends { query: KernelQuery },
    /// DIRECT against SADDLE for a rescaled left-hand side.
    Rescaled { transition: Transition, a: f64, point: Point },
    /// The transition kernel at `a = 0` against the Pearcey kernel.
    PearceyLimit { point: Point },
    ConnS { point: Point },
    ConnSs { point: Point },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub check: CrossCheck,
    pub lhs: KernelValue,
    pub rhs: KernelValue,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub flagged: bool,
}

fn compare(check: CrossCheck, lhs: KernelValue, rhs: KernelValue) -> CrossRow {
    let discrepancy = (lhs.value - rhs.value).norm();
    let tolerance = (10.0 * (lhs.error_estimate + rhs.error_estimate)).max(1e-8);
    CrossRow { check, lhs, rhs, discrepancy, tolerance, flagged: discrepancy > tolerance }
}

fn run_check(check: CrossCheck) -> Result<CrossRow> {
    let (lhs, rhs) = match check {
        CrossCheck::Backends { query } => {
            (eval_kernel(&query.with_backend(Backend::Direct))?, eval_kernel(&query.with_backend(Backend::Saddle))?)
        }
        CrossCheck::Rescaled { transition, a, point } => {
            let opts = QuadOptions::default();
            (
                rescaled_lhs(transition, point, a, Backend::Direct, &opts)?,
                rescaled_lhs(transition, point, a, Backend::Saddle, &opts)?,
            )
        }
        CrossCheck::PearceyLimit { point: p } => (
            eval_kernel(&KernelQuery::transition(0.0, p.tau1, p.tau2, p.u, p.v))?,
            eval_kernel(&KernelQuery::new(KernelId::PearceyExt, p.tau1, p.tau2, p.u, p.v))?,
        ),
        CrossCheck::ConnS { point: p } => relation_conn_s(p.tau1, p.tau2, p.u, p.v)?,
        CrossCheck::ConnSs { point: p } => relation_conn_ss(p.tau1, p.tau2, p.u, p.v)?,
    };
    Ok(compare(check, lhs, rhs))
}

/// Runs every check; rows come back in input order.
pub fn cross_validate(checks: &[CrossCheck]) -> Result<Vec<CrossRow>> {
    checks.par_iter().map(|&c| run_check(c)).collect()
}
