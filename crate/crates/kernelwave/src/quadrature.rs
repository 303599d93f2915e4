//! Panelized Gauss–Legendre quadrature along complex contours, for single and
//! double integrals, with Duffy regularization where two contours cross.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::LevelPath;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub nodes_per_panel: usize,
    pub max_refine_depth: u32,
    pub ray_truncation_budget: f64,
    pub duffy_radius: f64,
    /// Half the gap between the non-crossing contours of the direct geometry.
    pub direct_offset: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            nodes_per_panel: 32,
            max_refine_depth: 12,
            ray_truncation_budget: 60.0,
            duffy_radius: 0.3,
            direct_offset: 0.25,
        }
    }
}

impl QuadOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.nodes_per_panel > 0
            && self.max_refine_depth > 0
            && self.ray_truncation_budget > 0.0
            && self.duffy_radius > 0.0
            && self.direct_offset > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Usage("quadrature options must all be positive".into()))
        }
    }
}

/// Value, error estimate and convergence flag of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub converged: bool,
}

/// Gauss–Legendre nodes and weights on [0, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n.div_ceil(2) {
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = 0.5 * (1.0 - x);
            nodes[n - 1 - k] = 0.5 * (1.0 + x);
            weights[k] = 0.5 * w;
            weights[n - 1 - k] = 0.5 * w;
        }
        Self { nodes, weights }
    }
}

/// One parameterized arc of a contour, traversed for `s` in [0, 1].
#[derive(Clone, Debug)]
pub enum Panel {
    Segment { start: C64, end: C64 },
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
    /// Infinite ray `origin + r * direction`; inward rays are traversed from infinity to the origin.
    Ray { origin: C64, direction: C64, inward: bool },
    Level { path: Arc<LevelPath>, t0: f64, t1: f64 },
}

impl Panel {
    /// Point and `dz/ds` at `s` in [0, 1].
    pub fn eval(&self, s: f64) -> (C64, C64) {
        match self {
            Panel::Segment { start, end } => (start + (end - start) * s, end - start),
            Panel::Arc { center, radius, theta0, theta1 } => {
                let th = theta0 + (theta1 - theta0) * s;
                let e = C64::from_polar(*radius, th);
                (center + e, e * C64::i() * (theta1 - theta0))
            }
            Panel::Level { path, t0, t1 } => {
                let (z, dz) = path.point(t0 + (t1 - t0) * s);
                (z, dz * (t1 - t0))
            }
            Panel::Ray { .. } => panic!("an untruncated ray has no finite parameterization"),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Panel::Ray { .. })
    }

    /// Start point, `None` at infinity.
    pub fn start(&self) -> Option<C64> {
        match self {
            Panel::Ray { origin, inward, .. } => (!inward).then_some(*origin),
            _ => Some(self.eval(0.0).0),
        }
    }

    pub fn end(&self) -> Option<C64> {
        match self {
            Panel::Ray { origin, inward, .. } => inward.then_some(*origin),
            _ => Some(self.eval(1.0).0),
        }
    }

    /// Splits at parameter `s` into two panels covering [0, s] and [s, 1].
    pub fn split(&self, s: f64) -> (Panel, Panel) {
        match self {
            Panel::Segment { start, end } => {
                let m = start + (end - start) * s;
                (Panel::Segment { start: *start, end: m }, Panel::Segment { start: m, end: *end })
            }
            Panel::Arc { center, radius, theta0, theta1 } => {
                let m = theta0 + (theta1 - theta0) * s;
                (
                    Panel::Arc { center: *center, radius: *radius, theta0: *theta0, theta1: m },
                    Panel::Arc { center: *center, radius: *radius, theta0: m, theta1: *theta1 },
                )
            }
            Panel::Level { path, t0, t1 } => {
                let m = t0 + (t1 - t0) * s;
                (
                    Panel::Level { path: path.clone(), t0: *t0, t1: m },
                    Panel::Level { path: path.clone(), t0: m, t1: *t1 },
                )
            }
            Panel::Ray { .. } => panic!("truncate rays before splitting"),
        }
    }

    /// Arclength by 16-point Gauss–Legendre on `|dz/ds|`.
    pub fn arclength(&self) -> f64 {
        if self.is_infinite() {
            return f64::INFINITY;
        }
        let gl = GaussLegendre::new(16);
        gl.nodes.iter().zip(&gl.weights).map(|(&s, &w)| w * self.eval(s).1.norm()).sum()
    }
}

/// A crossing point located at the boundary between panels `boundary - 1` and `boundary`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingMarker {
    pub boundary: usize,
    pub point: C64,
}

/// Oriented chain of panels with declared crossing points.
#[derive(Clone, Debug, Default)]
pub struct Contour {
    pub panels: Vec<Panel>,
    pub crossings: Vec<CrossingMarker>,
    /// `(panel index, clipped distance from the finite end)` for every truncated ray.
    pub truncations: Vec<(usize, f64)>,
}

impl Contour {
    pub fn new(panels: Vec<Panel>) -> Result<Self> {
        if panels.is_empty() {
            return Err(Error::Geometry("empty contour".into()));
        }
        for (k, w) in panels.windows(2).enumerate() {
            match (w[0].end(), w[1].start()) {
                (Some(a), Some(b)) if (a - b).norm() <= 1e-12 * (1.0 + a.norm()) => {}
                _ => return Err(Error::Geometry(format!("panels {k} and {} do not join", k + 1))),
            }
        }
        Ok(Self { panels, crossings: Vec::new(), truncations: Vec::new() })
    }

    pub fn segment(start: C64, end: C64) -> Self {
        Self::new(vec![Panel::Segment { start, end }]).expect("single panel")
    }

    /// Counterclockwise circle split into `pieces` arcs.
    pub fn circle(center: C64, radius: f64, pieces: usize) -> Self {
        let step = 2.0 * PI / pieces as f64;
        let panels = (0..pieces)
            .map(|k| Panel::Arc { center, radius, theta0: k as f64 * step, theta1: (k + 1) as f64 * step })
            .collect();
        Self::new(panels).expect("arcs join")
    }

    /// Two rays from `vertex`: in along `incoming` (a direction pointing away from
    /// the vertex) and out along `outgoing`.
    pub fn wedge(vertex: C64, incoming: C64, outgoing: C64) -> Self {
        Self::new(vec![
            Panel::Ray { origin: vertex, direction: incoming / incoming.norm(), inward: true },
            Panel::Ray { origin: vertex, direction: outgoing / outgoing.norm(), inward: false },
        ])
        .expect("rays meet at the vertex")
    }

    /// Declares a crossing at `point`, which must be a panel boundary.
    pub fn with_crossing(mut self, point: C64) -> Result<Self> {
        for k in 1..self.panels.len() {
            if let Some(p) = self.panels[k].start() {
                if (p - point).norm() <= 1e-10 * (1.0 + point.norm()) {
                    self.crossings.push(CrossingMarker { boundary: k, point });
                    return Ok(self);
                }
            }
        }
        Err(Error::Geometry(format!("crossing {point} is not on a panel boundary")))
    }

    /// Splits every finite panel into pieces whose arclength does not exceed
    /// `max_len(midpoint)`; crossing markers follow the boundaries.
    pub fn subdivide(&self, max_len: &dyn Fn(C64) -> f64) -> Self {
        let mut panels = Vec::new();
        let mut boundary_map = vec![0usize; self.panels.len() + 1];
        for (k, p) in self.panels.iter().enumerate() {
            boundary_map[k] = panels.len();
            if p.is_infinite() {
                panels.push(p.clone());
                continue;
            }
            let mut rest = p.clone();
            loop {
                let len = rest.arclength();
                let (mid, _) = rest.eval(0.5);
                let (start, _) = rest.eval(0.0);
                let lim = max_len(start).min(max_len(mid)).max(1e-3);
                if len <= lim * 1.000_001 {
                    panels.push(rest);
                    break;
                }
                let (a, b) = rest.split(lim / len);
                panels.push(a);
                rest = b;
            }
        }
        boundary_map[self.panels.len()] = panels.len();
        let crossings = self
            .crossings
            .iter()
            .map(|c| CrossingMarker { boundary: boundary_map[c.boundary], point: c.point })
            .collect();
        let truncations = self.truncations.iter().map(|&(k, r)| (boundary_map[k], r)).collect();
        Self { panels, crossings, truncations }
    }

    /// Splits panels adjacent to crossings so that the piece touching the crossing
    /// has arclength at most `radius`.
    fn isolate_crossings(&self, radius: f64) -> Self {
        let mut out = self.clone();
        let mut markers: Vec<usize> = out.crossings.iter().map(|c| c.boundary).collect();
        markers.sort_unstable();
        for &b in markers.iter().rev() {
            // Panel after the crossing: keep its first `radius` of arclength separate.
            let after = b;
            let len = out.panels[after].arclength();
            if len > radius * 1.5 {
                let (x, y) = out.panels[after].split(radius / len);
                out.panels.splice(after..=after, [x, y]);
                out.shift_after(after, 1);
            }
            let before = b - 1;
            let len = out.panels[before].arclength();
            if len > radius * 1.5 {
                let (x, y) = out.panels[before].split(1.0 - radius / len);
                out.panels.splice(before..=before, [x, y]);
                out.shift_after(before, 1);
            }
        }
        out
    }

    fn shift_after(&mut self, split_panel: usize, by: usize) {
        for c in self.crossings.iter_mut() {
            if c.boundary > split_panel {
                c.boundary += by;
            }
        }
        for t in self.truncations.iter_mut() {
            if t.0 > split_panel {
                t.0 += by;
            }
        }
    }

    pub fn has_infinite_panels(&self) -> bool {
        self.panels.iter().any(Panel::is_infinite)
    }
}

/// Clips every infinite ray at the first distance where `envelope` has dropped
/// by more than `budget` below its running maximum along the ray.
pub fn truncate_rays(contour: &Contour, envelope: &dyn Fn(C64) -> f64, budget: f64) -> Result<Contour> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::Geometry("ray truncation budget must be positive".into()));
    }
    let mut out = contour.clone();
    for (k, p) in contour.panels.iter().enumerate() {
        let Panel::Ray { origin, direction, inward } = *p else { continue };
        let r = clip_radius(&|r| envelope(origin + direction * r), budget)?;
        let far = origin + direction * r;
        out.panels[k] = if inward {
            Panel::Segment { start: far, end: origin }
        } else {
            Panel::Segment { start: origin, end: far }
        };
        out.truncations.push((k, r));
    }
    Ok(out)
}

fn clip_radius(env: &dyn Fn(f64) -> f64, budget: f64) -> Result<f64> {
    const R_CAP: f64 = 1e4;
    let mut best = env(0.0);
    let mut r_prev = 0.0;
    let mut r = 1e-3;
    loop {
        let e = env(r);
        if e > best {
            best = e;
        } else if e < best - budget {
            // Bisect on [r_prev, r] for the crossing of best - budget.
            let (mut lo, mut hi) = (r_prev, r);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if env(m) < best - budget {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            return Ok(hi);
        }
        if r > R_CAP {
            return Err(Error::Geometry("phase envelope does not decay along a ray".into()));
        }
        r_prev = r;
        r += (0.02 * r).clamp(1e-3, 0.05);
    }
}

/// Integrates `f(z) dz` along `contour`.
pub fn integrate_single(f: &dyn Fn(C64) -> C64, contour: &Contour, opts: &QuadOptions) -> Result<QuadResult> {
    opts.validate()?;
    if contour.has_infinite_panels() {
        return Err(Error::Geometry("truncate rays before integrating".into()));
    }
    let gl = GaussLegendre::new(opts.nodes_per_panel);
    let rule = |job: usize, r: &Rect| -> (C64, f64) {
        let p = &contour.panels[job];
        let h = r.x1 - r.x0;
        let mut acc = ZERO;
        let mut abs = 0.0;
        for (&s, &w) in gl.nodes.iter().zip(&gl.weights) {
            let (z, dz) = p.eval(r.x0 + h * s);
            let term = f(z) * dz * (w * h);
            acc += term;
            abs += term.norm();
        }
        (acc, abs)
    };
    let jobs: Vec<usize> = (0..contour.panels.len()).collect();
    adaptive(&jobs, 1, &rule, opts)
}

/// How a panel pair is integrated.
#[derive(Clone, Copy, Debug)]
enum PairJob {
    Plain { a: usize, b: usize },
    /// Pair touching a common crossing: `a_from_end` / `b_from_end` say whether
    /// the crossing sits at the panel's end; `swap` picks the Duffy triangle.
    Duffy { a: usize, b: usize, a_from_end: bool, b_from_end: bool, swap: bool },
}

/// Integrates `f(zeta, omega) dzeta domega` over `ca x cb`.
pub fn integrate_double(
    f: &(dyn Fn(C64, C64) -> C64 + Sync),
    ca: &Contour,
    cb: &Contour,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    opts.validate()?;
    if ca.has_infinite_panels() || cb.has_infinite_panels() {
        return Err(Error::Geometry("truncate rays before integrating".into()));
    }
    let ca = ca.isolate_crossings(opts.duffy_radius);
    let cb = cb.isolate_crossings(opts.duffy_radius);

    let mut singular = std::collections::HashSet::new();
    let mut jobs = Vec::new();
    for xa in &ca.crossings {
        for xb in &cb.crossings {
            if (xa.point - xb.point).norm() > 1e-10 * (1.0 + xa.point.norm()) {
                continue;
            }
            let sides_a = [(xa.boundary - 1, true), (xa.boundary, false)];
            let sides_b = [(xb.boundary - 1, true), (xb.boundary, false)];
            for &(a, a_from_end) in &sides_a {
                for &(b, b_from_end) in &sides_b {
                    singular.insert((a, b));
                    for swap in [false, true] {
                        jobs.push(PairJob::Duffy { a, b, a_from_end, b_from_end, swap });
                    }
                }
            }
        }
    }
    let lines_a: Vec<Vec<C64>> = ca.panels.iter().map(polyline).collect();
    let lines_b: Vec<Vec<C64>> = cb.panels.iter().map(polyline).collect();
    let declared: Vec<C64> = ca.crossings.iter().map(|c| c.point).collect();
    for (a, la) in lines_a.iter().enumerate() {
        for (b, lb) in lines_b.iter().enumerate() {
            if singular.contains(&(a, b)) {
                continue;
            }
            if let Some(z) = polylines_meet(la, lb) {
                if !declared.iter().any(|d| (d - z).norm() < 1e-8 * (1.0 + d.norm())) {
                    return Err(Error::Geometry(format!("contours meet near {z} without a declared crossing")));
                }
            }
            jobs.push(PairJob::Plain { a, b });
        }
    }

    let gl = GaussLegendre::new(opts.nodes_per_panel);
    let n = gl.nodes.len();
    let too_close = Cell::new(None::<C64>);
    let rule = |job: usize, r: &Rect| -> (C64, f64) {
        let hx = r.x1 - r.x0;
        let hy = r.y1 - r.y0;
        let mut acc = ZERO;
        let mut abs = 0.0;
        match jobs[job] {
            PairJob::Plain { a, b } => {
                let pa = &ca.panels[a];
                let pb = &cb.panels[b];
                let za: Vec<(C64, C64)> = gl.nodes.iter().map(|&s| pa.eval(r.x0 + hx * s)).collect();
                let zb: Vec<(C64, C64)> = gl.nodes.iter().map(|&s| pb.eval(r.y0 + hy * s)).collect();
                for (&(z, dz), wi) in za.iter().zip(&gl.weights) {
                    let mut row = ZERO;
                    let mut row_abs = 0.0;
                    for (&(w, dw), wj) in zb.iter().zip(&gl.weights) {
                        if (z - w).norm() < 1e-9 * (1.0 + z.norm()) {
                            too_close.set(Some(z));
                        }
                        let t = f(z, w) * dw * wj;
                        row += t;
                        row_abs += t.norm();
                    }
                    let s = wi * hx * hy;
                    acc += row * dz * s;
                    abs += row_abs * dz.norm() * s;
                }
            }
            PairJob::Duffy { a, b, a_from_end, b_from_end, swap } => {
                let pa = &ca.panels[a];
                let pb = &cb.panels[b];
                let at = |p: &Panel, d: f64, from_end: bool| if from_end { p.eval(1.0 - d) } else { p.eval(d) };
                for i in 0..n {
                    let sigma = r.x0 + hx * gl.nodes[i];
                    // The coordinate equal to sigma is evaluated once per row.
                    let (fixed, fixed_d) = if swap { at(pb, sigma, b_from_end) } else { at(pa, sigma, a_from_end) };
                    let mut row = ZERO;
                    let mut row_abs = 0.0;
                    for j in 0..n {
                        let w = r.y0 + hy * gl.nodes[j];
                        let (other, other_d) =
                            if swap { at(pa, sigma * w, a_from_end) } else { at(pb, sigma * w, b_from_end) };
                        let (z, dz, om, dom) =
                            if swap { (other, other_d, fixed, fixed_d) } else { (fixed, fixed_d, other, other_d) };
                        let t = f(z, om) * dz * dom * gl.weights[j];
                        row += t;
                        row_abs += t.norm();
                    }
                    let s = gl.weights[i] * hx * hy * sigma;
                    acc += row * s;
                    abs += row_abs * s;
                }
            }
        }
        (acc, abs)
    };
    let ids: Vec<usize> = (0..jobs.len()).collect();
    let res = adaptive(&ids, 2, &rule, opts)?;
    if let Some(z) = too_close.get() {
        return Err(Error::Geometry(format!("contours meet near {z} without a declared crossing")));
    }
    if !res.value.re.is_finite() || !res.value.im.is_finite() {
        return Err(Error::Geometry("integrand exploded; undeclared singularity".into()));
    }
    Ok(res)
}

fn polyline(p: &Panel) -> Vec<C64> {
    let n = if matches!(p, Panel::Segment { .. }) { 1 } else { 16 };
    (0..=n).map(|k| p.eval(k as f64 / n as f64).0).collect()
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// First intersection point of two polylines, if any.
fn polylines_meet(p: &[C64], q: &[C64]) -> Option<C64> {
    let bbox = |v: &[C64]| {
        v.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |b, z| {
            (b.0.min(z.re), b.1.max(z.re), b.2.min(z.im), b.3.max(z.im))
        })
    };
    let (bp, bq) = (bbox(p), bbox(q));
    if bp.1 < bq.0 || bq.1 < bp.0 || bp.3 < bq.2 || bq.3 < bp.2 {
        return None;
    }
    for s in p.windows(2) {
        for t in q.windows(2) {
            let (r, d) = (s[1] - s[0], t[1] - t[0]);
            let den = cross(r, d);
            if den.abs() < 1e-300 {
                continue;
            }
            let e = t[0] - s[0];
            let (x, y) = (cross(e, d) / den, cross(e, r) / den);
            if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                return Some(s[0] + r * x);
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    fn children(&self, dims: usize) -> Vec<Rect> {
        let xm = 0.5 * (self.x0 + self.x1);
        if dims == 1 {
            return vec![Rect { x1: xm, ..*self }, Rect { x0: xm, ..*self }];
        }
        let ym = 0.5 * (self.y0 + self.y1);
        vec![
            Rect { x0: self.x0, x1: xm, y0: self.y0, y1: ym },
            Rect { x0: xm, x1: self.x1, y0: self.y0, y1: ym },
            Rect { x0: self.x0, x1: xm, y0: ym, y1: self.y1 },
            Rect { x0: xm, x1: self.x1, y0: ym, y1: self.y1 },
        ]
    }
}

struct Region {
    job: usize,
    rect: Rect,
    depth: u32,
    fine: C64,
    err: f64,
    roundoff: f64,
    children: Vec<C64>,
}

impl Region {
    /// Error above the roundoff floor; zero means nothing to gain by refining.
    fn excess(&self) -> f64 {
        if self.err <= self.roundoff {
            0.0
        } else {
            self.err
        }
    }
}

#[derive(PartialEq)]
struct Key(f64, usize);
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Global adaptive refinement: the region with the largest difference between
/// its own rule and the sum over its children is split until the summed
/// difference meets the tolerance.
fn adaptive(
    jobs: &[usize],
    dims: usize,
    rule: &dyn Fn(usize, &Rect) -> (C64, f64),
    opts: &QuadOptions,
) -> Result<QuadResult> {
    const MAX_REGIONS: usize = 400_000;
    let roundoff_factor = 64.0 * f64::EPSILON;
    let make = |job: usize, rect: Rect, depth: u32, coarse: C64| -> Region {
        let kids: Vec<(C64, f64)> = rect.children(dims).iter().map(|c| rule(job, c)).collect();
        let fine: C64 = kids.iter().map(|k| k.0).sum();
        let abs: f64 = kids.iter().map(|k| k.1).sum();
        Region {
            job,
            rect,
            depth,
            fine,
            err: (fine - coarse).norm(),
            roundoff: roundoff_factor * abs,
            children: kids.into_iter().map(|k| k.0).collect(),
        }
    };
    let mut regions: Vec<Option<Region>> = Vec::new();
    let mut heap = BinaryHeap::new();
    for &job in jobs {
        let (coarse, _) = rule(job, &Rect::UNIT);
        let id = regions.len();
        let r = make(job, Rect::UNIT, 0, coarse);
        heap.push(Key(r.excess(), id));
        regions.push(Some(r));
    }
    let total = |regions: &[Option<Region>]| -> (C64, f64, f64) {
        let mut v = ZERO;
        let mut e = 0.0;
        let mut x = 0.0;
        for r in regions.iter().flatten() {
            v += r.fine;
            e += r.err;
            x += r.excess();
        }
        (v, e, x)
    };
    let (mut value, _, mut excess) = total(&regions);
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.norm());
        if excess <= tol {
            break;
        }
        let Some(Key(ex, id)) = heap.pop() else { break };
        if ex == 0.0 || regions.len() > MAX_REGIONS {
            break;
        }
        let parent = regions[id].take().expect("live region");
        if parent.depth >= opts.max_refine_depth {
            // Keep it, but never revisit.
            regions[id] = Some(parent);
            continue;
        }
        value -= parent.fine;
        excess -= parent.excess();
        for (rect, coarse) in parent.rect.children(dims).into_iter().zip(parent.children) {
            let cid = regions.len();
            let r = make(parent.job, rect, parent.depth + 1, coarse);
            value += r.fine;
            excess += r.excess();
            heap.push(Key(r.excess(), cid));
            regions.push(Some(r));
        }
    }
    // Deterministic final summation in creation order.
    let (value, err, excess) = total(&regions);
    let tol = opts.abs_tol.max(opts.rel_tol * value.norm());
    Ok(QuadResult { value, error: err, converged: excess <= tol })
}
