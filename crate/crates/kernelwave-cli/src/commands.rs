use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use kernelwave::expansion::{
    build_amplitudes, expansion_partial_sum, CoefficientDump, GaussMoments, Point, Transition,
};
use kernelwave::kernels::{csv_row, eval_kernel, parse_queries, KernelQuery, KernelValue, CSV_HEADER};
use kernelwave::phase::{export_level_curve, make_phase, points_to_text, trace_steepest, DescentOf, PhaseKind, PhaseSpec, TraceOptions, Window};
use kernelwave::verify::{
    cross_validate, default_windows, rescaled_lhs, residual_csv, residual_study, summarize, CrossCheck, CrossRow,
    ResidualMode, StudySummary, DEFAULT_A_VALUES, SAMPLE_POINTS,
};
use kernelwave::kernels::KernelId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{CoeffsArgs, EvalArgs, ExpandArgs, Format, ModeArg, PhaseArg, SweepArgs, TraceArgs, TraceFormat, VerifyArgs};

type CmdResult = Result<u8, Box<dyn std::error::Error>>;

/// Exit code when every value was computed but some did not reach tolerance.
const ACCURACY_WARNING: u8 = 2;

fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    query: &'a KernelQuery,
    result: &'a KernelValue,
}

/// Evaluates in parallel, keeping input order, and writes the rows.
fn evaluate_and_write(queries: &[KernelQuery], format: Format, output: Option<&Path>) -> CmdResult {
    let results: Vec<_> = queries.par_iter().map(eval_kernel).collect();
    let mut values = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        values.push(r.map_err(|e| format!("query {}: {e}", i + 1))?);
    }
    let mut text = String::new();
    match format {
        Format::Csv => {
            text.push_str(CSV_HEADER);
            text.push('\n');
            for (q, v) in queries.iter().zip(&values) {
                text.push_str(&csv_row(q, v));
                text.push('\n');
            }
        }
        Format::Json => {
            for (q, v) in queries.iter().zip(&values) {
                text.push_str(&serde_json::to_string(&EvalRecord { query: q, result: v })?);
                text.push('\n');
            }
        }
    }
    emit(output, &text)?;
    let unconverged = values.iter().filter(|v| !v.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} of {} values did not reach the requested tolerance", values.len());
        return Ok(ACCURACY_WARNING);
    }
    Ok(0)
}

pub fn eval(args: &EvalArgs) -> CmdResult {
    let opts = args.quad.options();
    let mut queries = match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            parse_queries(&text, &opts)?
        }
        None => {
            let kernel = args.kernel.ok_or("either --kernel or --input is required")?;
            let q = KernelQuery { a_param: args.a, ..KernelQuery::new(kernel, args.tau1, args.tau2, args.u, args.v) };
            vec![q.with_opts(opts)]
        }
    };
    if let Some(b) = args.backend {
        queries.iter_mut().for_each(|q| q.backend = b);
    }
    for (i, q) in queries.iter().enumerate() {
        q.validate().map_err(|e| format!("query {}: {e}", i + 1))?;
    }
    evaluate_and_write(&queries, args.format, args.output.as_deref())
}

#[derive(Serialize)]
struct ExpandRow {
    transition: Transition,
    point: Point,
    #[serde(rename = "N")]
    n: usize,
    a: f64,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

pub fn expand(args: &ExpandArgs) -> CmdResult {
    let opts = args.quad.options();
    let (tr, p) = (args.transition, args.point);
    let lhs: Vec<Option<f64>> = if args.compare {
        args.a
            .par_iter()
            .map(|&a| rescaled_lhs(tr, p, a, args.backend, &opts).map(|v| Some(v.value.re)))
            .collect::<kernelwave::Result<_>>()?
    } else {
        vec![None; args.a.len()]
    };
    let mut rows = Vec::new();
    for (&a, l) in args.a.iter().zip(&lhs) {
        for n in 0..=args.terms {
            let value = expansion_partial_sum(tr, n, p, a)?;
            rows.push(ExpandRow { transition: tr, point: p, n, a, value, lhs: *l, residual: l.map(|l| (l - value).abs()) });
        }
    }
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut s = String::from("transition,u,v,tau1,tau2,N,a,value");
            s.push_str(if args.compare { ",lhs,residual\n" } else { "\n" });
            for r in &rows {
                let _ = write!(
                    s,
                    "{},{},{},{},{},{},{},{:.16e}",
                    r.transition.name(),
                    r.point.u,
                    r.point.v,
                    r.point.tau1,
                    r.point.tau2,
                    r.n,
                    r.a,
                    r.value
                );
                if let (Some(l), Some(d)) = (r.lhs, r.residual) {
                    let _ = write!(s, ",{l:.16e},{d:.16e}");
                }
                s.push('\n');
            }
            s
        }
    };
    emit(args.output.as_deref(), &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct CoeffsOut {
    #[serde(flatten)]
    dump: CoefficientDump,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<GaussMoments>,
}

pub fn coeffs(args: &CoeffsArgs) -> CmdResult {
    let e = build_amplitudes(args.transition, args.point, args.order)?;
    let out = CoeffsOut { dump: CoefficientDump::from(&e), moments: args.moments.then(|| GaussMoments::new(args.order)) };
    emit(args.output.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(0)
}

fn pick_saddle(phase: &PhaseSpec, level: &str) -> Result<usize, String> {
    let by = |key: fn(&kernelwave::C64) -> f64, max: bool| {
        let it = phase.saddles.iter().enumerate();
        let pick = if max {
            it.max_by(|a, b| key(a.1).total_cmp(&key(b.1)))
        } else {
            it.min_by(|a, b| key(a.1).total_cmp(&key(b.1)))
        };
        pick.map(|(i, _)| i).expect("phases have saddles")
    };
    let idx = match level {
        "upper" => by(|z| z.im, true),
        "lower" => by(|z| z.im, false),
        "real" => phase
            .saddles
            .iter()
            .position(|z| z.im.abs() < 1e-12)
            .ok_or_else(|| "this phase has no real saddle".to_string())?,
        other => other.parse::<usize>().map_err(|_| format!("unknown level '{other}'; use upper, lower, real or an index"))?,
    };
    if idx >= phase.saddles.len() {
        return Err(format!("saddle index {idx} out of range ({} saddles)", phase.saddles.len()));
    }
    Ok(idx)
}

pub fn trace(args: &TraceArgs) -> CmdResult {
    let phase = make_phase(match args.phase {
        PhaseArg::Airy => PhaseKind::AiryCubic,
        PhaseArg::Pearcey => PhaseKind::PearceyQuartic,
    });
    let idx = pick_saddle(&phase, &args.level)?;
    let text = if args.paths {
        let opts = TraceOptions { max_arclength: args.max_arclength, ..TraceOptions::default() };
        let paths = [(DescentOf::F, 0), (DescentOf::F, 1), (DescentOf::MinusF, 0), (DescentOf::MinusF, 1)]
            .into_par_iter()
            .map(|(d, ray)| trace_steepest(&phase, idx, d, ray, &opts))
            .collect::<kernelwave::Result<Vec<_>>>()?;
        match args.format {
            TraceFormat::Json => serde_json::to_string_pretty(&paths)? + "\n",
            // Blank lines separate the paths, as plotting tools expect.
            TraceFormat::Text => paths.iter().map(|p| p.to_text()).collect::<Vec<_>>().join("\n"),
        }
    } else {
        let pts = export_level_curve(&phase, phase.levels[idx], Window::square(args.window), args.resolution)?;
        match args.format {
            TraceFormat::Json => {
                let xy: Vec<[f64; 2]> = pts.iter().map(|z| [z.re, z.im]).collect();
                serde_json::to_string(&xy)? + "\n"
            }
            TraceFormat::Text => points_to_text(&pts),
        }
    };
    emit(args.output.as_deref(), &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    summaries: Vec<StudySummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    cross: Vec<CrossRow>,
    pass: bool,
}

fn standard_cross_checks(tr: Transition, p: Point, a: f64) -> Vec<CrossCheck> {
    let mut v = vec![CrossCheck::Rescaled { transition: tr, a, point: p }];
    if tr == Transition::PearceyToS2 {
        v.push(CrossCheck::PearceyLimit { point: p });
    }
    v.push(CrossCheck::ConnS { point: p });
    v.push(CrossCheck::ConnSs { point: p });
    v.push(CrossCheck::Backends { query: KernelQuery::new(KernelId::AiryExt, p.tau1, p.tau2, p.u, p.v) });
    v
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let opts = args.quad.options();
    let transitions = match args.transition {
        Some(t) => vec![t],
        None => vec![Transition::AiryToS1, Transition::PearceyToS2],
    };
    let points = if args.point.is_empty() { SAMPLE_POINTS.to_vec() } else { args.point.clone() };
    let a_values = if args.a.is_empty() { DEFAULT_A_VALUES.to_vec() } else { args.a.clone() };
    let mode = match args.mode {
        ModeArg::Plain => ResidualMode::Plain,
        ModeArg::Envelope => ResidualMode::Envelope,
        ModeArg::Auto => ResidualMode::Auto,
    };
    let mut tables = Vec::new();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();
    for &tr in &transitions {
        let windows = default_windows(tr);
        let n_max = args.n_max.unwrap_or_else(|| windows.iter().map(|w| w.n).max().unwrap_or(0));
        for &p in &points {
            let t = residual_study(tr, p, &a_values, n_max, args.backend, &opts, mode)?;
            let s = summarize(&t, &windows);
            for c in &s.checks {
                eprintln!(
                    "{} ({}, {}, {}, {}) N={} slope {:.3} +- {:.3} window [{}, {}] {}{}",
                    tr.name(),
                    p.u,
                    p.v,
                    p.tau1,
                    p.tau2,
                    c.n,
                    c.slope,
                    c.stderr,
                    c.lo,
                    c.hi,
                    if c.pass { "PASS" } else { "FAIL" },
                    if t.envelope { " (envelope)" } else { "" },
                );
            }
            if args.cross {
                checks.extend(standard_cross_checks(tr, p, a_values[0]));
            }
            tables.push(t);
            summaries.push(s);
        }
    }
    let cross = if checks.is_empty() { Vec::new() } else { cross_validate(&checks)? };
    for r in cross.iter().filter(|r| r.flagged) {
        eprintln!("cross-check flagged: {:?} discrepancy {:.3e} > {:.3e}", r.check, r.discrepancy, r.tolerance);
    }
    let pass = summaries.iter().all(|s| s.pass) && cross.iter().all(|r| !r.flagged);
    let report = VerifyReport { summaries, cross, pass };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &args.summary {
        std::fs::write(path, &json)?;
    }
    let text = match args.format {
        Format::Csv => residual_csv(&tables),
        Format::Json => json,
    };
    emit(args.output.as_deref(), &text)?;
    if args.check && !pass {
        eprintln!("verification failed");
        return Ok(1);
    }
    Ok(0)
}

/// A single value or an inclusive grid `lo:hi:n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    lo: f64,
    hi: f64,
    n: usize,
}

impl FromStr for Range {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}' in range '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let r = match parts.as_slice() {
            [x] => {
                let x = num(x)?;
                Range { lo: x, hi: x, n: 1 }
            }
            [lo, hi, n] => {
                let n = n.trim().parse::<usize>().map_err(|_| format!("bad count in range '{s}'"))?;
                Range { lo: num(lo)?, hi: num(hi)?, n }
            }
            _ => return Err(format!("expected a value or lo:hi:n, got '{s}'")),
        };
        if r.n == 0 || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(format!("range '{s}' is empty or not finite"));
        }
        Ok(r)
    }
}

impl Range {
    fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|k| if k + 1 == self.n { self.hi } else { self.lo + step * k as f64 }).collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo.min(self.hi)..=self.lo.max(self.hi))
        }
    }
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let opts = args.quad.options();
    let make = |t1, t2, u, v| {
        KernelQuery { a_param: args.a, ..KernelQuery::new(args.kernel, t1, t2, u, v) }
            .with_backend(args.backend)
            .with_opts(opts)
    };
    let queries: Vec<KernelQuery> = match args.random {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..n)
                .map(|_| {
                    let t1 = args.tau1.sample(&mut rng);
                    let t2 = args.tau2.sample(&mut rng);
                    let u = args.u.sample(&mut rng);
                    let v = args.v.sample(&mut rng);
                    make(t1, t2, u, v)
                })
                .collect()
        }
        None => {
            let mut q = Vec::new();
            for t1 in args.tau1.values() {
                for t2 in args.tau2.values() {
                    for u in args.u.values() {
                        for v in args.v.values() {
                            q.push(make(t1, t2, u, v));
                        }
                    }
                }
            }
            q
        }
    };
    if let Some(q) = queries.first() {
        q.validate()?;
    }
    evaluate_and_write(&queries, args.format, args.output.as_deref())
}
