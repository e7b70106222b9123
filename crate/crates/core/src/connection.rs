//! Geodesics of the flat connection `∇ᵖ` (Christoffel symbols `Γ(z,p̄)`),
//! straight-line and naturality checks, and the intrinsic distance.

use std::collections::HashMap;

use num_complex::Complex64;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{Automorphism, KernelModel, PolarizedPoint};
use crate::linalg::{c, det, CVec};
use crate::metric::{christoffel_from, metric_at};
use crate::representative::RepCoordinates;

pub const DEFAULT_ODE_TOL: f64 = 1e-10;
pub const MIN_STEP: f64 = 1e-14;
pub const EVENT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Completed,
    HitVariety,
    LeftDomain,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicState {
    pub t: f64,
    pub z: CVec,
    pub v: CVec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicTrace {
    pub samples: Vec<GeodesicState>,
    pub terminal: Terminal,
    /// Largest accepted local error estimate (weighted norm, ≤ 1 means within tolerance).
    pub max_error_estimate: f64,
}

impl GeodesicTrace {
    pub fn last(&self) -> &GeodesicState {
        self.samples.last().expect("trace has a start sample")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicOptions {
    pub atol: f64,
    pub rtol: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Event when `min(|K(z,p̄)|/K(p,p̄), |det G(z,p̄)|/det G(p,p̄))` falls below this.
    pub event_threshold: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            atol: DEFAULT_ODE_TOL,
            rtol: DEFAULT_ODE_TOL,
            min_step: MIN_STEP,
            max_steps: 200_000,
            event_threshold: EVENT_THRESHOLD,
        }
    }
}

impl GeodesicOptions {
    pub fn with_tol(tol: f64) -> Self {
        GeodesicOptions { atol: tol, rtol: tol, ..Default::default() }
    }
}

/// Right-hand side and monitors of the geodesic ODE with `w̄` frozen at `p̄`.
struct GeodesicField<'a> {
    model: &'a KernelModel,
    p: CVec,
    k_scale: f64,
    g_scale: f64,
}

enum Probe {
    Ok(CVec),
    Variety,
    Outside,
}

impl<'a> GeodesicField<'a> {
    fn new(model: &'a KernelModel, p: &CVec) -> Result<Self> {
        let diag = PolarizedPoint::diag(p);
        let k_scale = model.kernel_raw(&diag)?.norm();
        let g_scale = det(&model.metric(&diag)?).norm();
        Ok(GeodesicField { model, p: p.clone(), k_scale, g_scale })
    }

    /// Variety monitor `m(z)` if the point is inside.
    fn monitor(&self, z: &CVec) -> Option<f64> {
        if !self.model.domain().contains(z.as_slice()) {
            return None;
        }
        let pt = PolarizedPoint::frozen(z, &self.p);
        let k = self.model.kernel_raw(&pt).ok()?.norm() / self.k_scale;
        if k < EVENT_THRESHOLD * 1e-3 {
            return Some(k);
        }
        let g = self.model.metric(&pt).ok().map(|g| det(&g).norm() / self.g_scale).unwrap_or(0.0);
        Some(k.min(g))
    }

    /// Acceleration `−Γ(z,p̄)(v,v)` and the monitor.
    fn accel(&self, z: &CVec, v: &CVec, threshold: f64) -> Probe {
        let Some(m) = self.monitor(z) else { return Probe::Outside };
        if m < threshold {
            return Probe::Variety;
        }
        let pt = PolarizedPoint::frozen(z, &self.p);
        let gamma = self
            .model
            .metric(&pt)
            .and_then(|g| Ok((g, self.model.metric_derivative(&pt)?)))
            .and_then(|(g, dg)| christoffel_from(&g, &dg, &pt));
        match gamma {
            Ok(gm) => Probe::Ok(-gm.contract(v)),
            Err(_) => Probe::Variety,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

enum StepOutcome {
    Accepted { z: CVec, v: CVec, err: f64 },
    Rejected { err: f64 },
    Variety,
    Outside,
}

fn rk_step(field: &GeodesicField, z: &CVec, v: &CVec, a0: &CVec, h: f64, opts: &GeodesicOptions) -> StepOutcome {
    let mut kz: Vec<CVec> = vec![v.clone()];
    let mut kv: Vec<CVec> = vec![a0.clone()];
    for (s, row) in A.iter().enumerate() {
        let mut zs = z.clone();
        let mut vs = v.clone();
        for (j, &a) in row.iter().enumerate().take(s + 1) {
            if a != 0.0 {
                zs += &kz[j] * c(h * a, 0.0);
                vs += &kv[j] * c(h * a, 0.0);
            }
        }
        match field.accel(&zs, &vs, opts.event_threshold) {
            Probe::Ok(acc) => {
                kz.push(vs);
                kv.push(acc);
            }
            Probe::Variety => return StepOutcome::Variety,
            Probe::Outside => return StepOutcome::Outside,
        }
    }
    let combine = |k: &[CVec], b: &[f64; 7], base: &CVec| {
        let mut out = base.clone();
        for (kk, &bb) in k.iter().zip(b) {
            if bb != 0.0 {
                out += kk * c(h * bb, 0.0);
            }
        }
        out
    };
    let z5 = combine(&kz, &B5, z);
    let v5 = combine(&kv, &B5, v);
    let z4 = combine(&kz, &B4, z);
    let v4 = combine(&kv, &B4, v);
    let mut err: f64 = 0.0;
    for (hi, lo, old) in [(&z5, &z4, z), (&v5, &v4, v)] {
        for i in 0..hi.len() {
            let sc = opts.atol + opts.rtol * hi[i].norm().max(old[i].norm());
            err = err.max((hi[i] - lo[i]).norm() / sc);
        }
    }
    if err <= 1.0 {
        StepOutcome::Accepted { z: z5, v: v5, err }
    } else {
        StepOutcome::Rejected { err }
    }
}

/// Integrates `z̈ʲ + Γʲₖₗ(z,p̄) żᵏ żˡ = 0` from `(q0, v0)` over `t ∈ [0, t_max]`,
/// landing exactly on each requested output time.
fn integrate(
    model: &KernelModel,
    p: &CVec,
    q0: &CVec,
    v0: &CVec,
    stops: &[f64],
    record_all: bool,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrace> {
    let n = model.dim();
    for len in [p.len(), q0.len(), v0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let t_max = stops.last().copied().unwrap_or(0.0);
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter("t_max must be finite and non-negative".into()));
    }
    let field = GeodesicField::new(model, p)?;
    let mut z = q0.clone();
    let mut v = v0.clone();
    let mut a = match field.accel(&z, &v, opts.event_threshold) {
        Probe::Ok(acc) => acc,
        Probe::Variety => {
            return Err(Error::InvalidParameter("initial point lies on a zero variety".into()));
        }
        Probe::Outside => return Err(Error::OutsideDomain("initial point".into())),
    };
    let mut t = 0.0;
    let mut samples = vec![GeodesicState { t, z: z.clone(), v: v.clone() }];
    let speed = v.norm().max(1e-300);
    let mut h = (0.01 / speed).min(t_max.max(opts.min_step)).max(opts.min_step);
    let mut err_prev: f64 = 1e-4;
    let mut next_stop = 0;
    while next_stop < stops.len() && stops[next_stop] <= 0.0 {
        next_stop += 1;
    }
    let mut max_err: f64 = 0.0;
    let mut steps = 0;
    let mut stagnant = 0;
    let mut terminal = Terminal::Completed;
    while next_stop < stops.len() {
        if steps >= opts.max_steps {
            terminal = Terminal::StepUnderflow;
            break;
        }
        steps += 1;
        let target = stops[next_stop];
        let clipped = h >= target - t;
        let step = if clipped { target - t } else { h };
        match rk_step(&field, &z, &v, &a, step, opts) {
            StepOutcome::Accepted { z: zn, v: vn, err } => {
                max_err = max_err.max(err);
                t = if clipped { target } else { t + step };
                // Accepted steps that no longer move z in floating point.
                if (&zn - &z).norm() <= 1e-15 * z.norm().max(1.0) {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                z = zn;
                v = vn;
                a = match field.accel(&z, &v, opts.event_threshold) {
                    Probe::Ok(acc) => acc,
                    Probe::Variety => {
                        samples.push(GeodesicState { t, z: z.clone(), v: v.clone() });
                        terminal = Terminal::HitVariety;
                        break;
                    }
                    Probe::Outside => {
                        terminal = Terminal::LeftDomain;
                        break;
                    }
                };
                if clipped {
                    next_stop += 1;
                }
                if clipped || record_all {
                    samples.push(GeodesicState { t, z: z.clone(), v: v.clone() });
                }
                // PI controller.
                let e = err.max(1e-10);
                let factor = 0.9 * e.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                if !clipped {
                    h = step * factor.clamp(0.2, 5.0);
                }
                err_prev = e;
            }
            StepOutcome::Rejected { err } => {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            StepOutcome::Variety | StepOutcome::Outside => {
                h = step * 0.5;
            }
        }
        if h < opts.min_step || stagnant >= STAGNATION_STEPS {
            terminal = classify_stall(&field, &z, &v, step, opts);
            break;
        }
    }
    Ok(GeodesicTrace { samples, terminal, max_error_estimate: max_err })
}

/// Decides why the step collapsed: a variety ahead, the boundary ahead, or neither.
fn classify_stall(field: &GeodesicField, z: &CVec, v: &CVec, last_step: f64, opts: &GeodesicOptions) -> Terminal {
    // Look ahead along the tangent by the last attempted step scale.
    let probe = z + v * c(last_step.max(opts.min_step) * 4.0, 0.0);
    match field.monitor(&probe) {
        None => Terminal::LeftDomain,
        Some(m) if m < opts.event_threshold => Terminal::HitVariety,
        Some(_) => match field.monitor(z) {
            Some(m) if m < 1e3 * opts.event_threshold => Terminal::HitVariety,
            _ => Terminal::StepUnderflow,
        },
    }
}

pub fn integrate_geodesic(
    model: &KernelModel,
    p: &CVec,
    q0: &CVec,
    v0: &CVec,
    t_max: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrace> {
    integrate(model, p, q0, v0, &[t_max], true, opts)
}

/// States at the given increasing times only.
pub fn geodesic_at_times(
    model: &KernelModel,
    p: &CVec,
    q0: &CVec,
    v0: &CVec,
    times: &[f64],
    opts: &GeodesicOptions,
) -> Result<GeodesicTrace> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("output times must increase".into()));
    }
    integrate(model, p, q0, v0, times, false, opts)
}

/// Maps the segment `ζ0 + s·dir`, `s ∈ [0,1]`, through `exph_p` and compares
/// it with the geodesic re-integrated from the image's own initial data.
pub fn verify_straight_lines(
    model: &KernelModel,
    p: &CVec,
    zeta0: &CVec,
    dir: &CVec,
    samples: usize,
    opts: &GeodesicOptions,
) -> Result<f64> {
    let samples = samples.max(2);
    let rc = RepCoordinates::new(model, p, false)?;
    let times: Vec<f64> = (1..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
    let chart = |s: f64| -> Result<CVec> {
        let ex = rc.invert(&(zeta0 + dir * c(s, 0.0)), 1e-14)?;
        if !ex.converged {
            return Err(Error::NotConverged(format!("chart exit at s = {s}")));
        }
        Ok(ex.z)
    };
    let z0 = chart(0.0)?;
    let v0 = rc
        .jacobian(&z0)?
        .lu()
        .solve(dir)
        .ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
    let trace = geodesic_at_times(model, p, &z0, &v0, &times, opts)?;
    if trace.terminal != Terminal::Completed {
        return Err(Error::NotConverged(format!("geodesic ended with {:?}", trace.terminal)));
    }
    let mut gap: f64 = 0.0;
    for st in &trace.samples[1..] {
        gap = gap.max((chart(st.t)? - &st.z).norm());
    }
    Ok(gap)
}

/// Pushes a `∇ᵖ` geodesic through `f` and returns the largest residual of the
/// pushed curve in the `∇^{f(p)}` geodesic equation, relative to `1 + |σ̇|²`.
pub fn verify_naturality(
    model_src: &KernelModel,
    model_dst: &KernelModel,
    f: &Automorphism,
    p: &CVec,
    q0: &CVec,
    v0: &CVec,
    t_max: f64,
    opts: &GeodesicOptions,
) -> Result<f64> {
    if !f.preserves(model_src.domain()) {
        return Err(Error::Unsupported(format!("{f:?} is not an automorphism of {}", model_src.domain().name())));
    }
    let trace = integrate_geodesic(model_src, p, q0, v0, t_max, opts)?;
    let fp = f.apply(p);
    let src = GeodesicField::new(model_src, p)?;
    let dst = GeodesicField::new(model_dst, &fp)?;
    let mut worst: f64 = 0.0;
    for st in &trace.samples {
        let Probe::Ok(acc) = src.accel(&st.z, &st.v, 0.0) else { continue };
        let sigma = f.apply(&st.z);
        let jac = f.jacobian(&st.z);
        let sdot = &jac * &st.v;
        let mut sddot = &jac * &acc;
        if !matches!(f, Automorphism::Identity) {
            for j in 0..sigma.len() {
                sddot[j] += f.second_derivative(st.z[j]) * st.v[j] * st.v[j];
            }
        }
        let Probe::Ok(want) = dst.accel(&sigma, &sdot, 0.0) else { continue };
        worst = worst.max((sddot - want).norm() / (1.0 + sdot.norm_squared()));
    }
    Ok(worst)
}

/// `|∂w̄ log K(x,p̄) − ∂w̄ log K(y,p̄)|`, the un-normalized bracket difference.
pub fn intrinsic_delta(model: &KernelModel, p: &CVec, x: &CVec, y: &CVec) -> Result<f64> {
    let bx = model.grad_wbar_log(&PolarizedPoint::frozen(x, p))?;
    let by = model.grad_wbar_log(&PolarizedPoint::frozen(y, p))?;
    Ok((bx - by).norm())
}

const STAGNATION_STEPS: usize = 100;
pub const DEFAULT_CHART_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    /// Upper bound on the intrinsic distance from the shortest graph path.
    pub distance: f64,
    /// One-segment value `δᵖ(x, y)`.
    pub delta: f64,
    pub nodes: usize,
    pub edges: usize,
    pub resolution: usize,
    pub chart_radius: f64,
}

/// Grid-graph upper bound on the intrinsic distance. Nodes are the points of
/// a `resolution`-per-axis vertex grid on `[−1,1]^{2n}` inside the domain,
/// plus `x` and `y`; an edge joins two nodes within `chart_radius` whose
/// segment stays clear of the zero varieties (sampled) and along which the
/// bracket is nearly affine. Edge weights are `δᵖ`.
pub fn intrinsic_distance(
    model: &KernelModel,
    p: &CVec,
    x: &CVec,
    y: &CVec,
    resolution: usize,
    chart_radius: f64,
) -> Result<DistanceResult> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("resolution must be at least 2".into()));
    }
    let n = model.dim();
    let domain = model.domain();
    for z in [x, y] {
        if !domain.contains(z.as_slice()) {
            return Err(Error::OutsideDomain(format!("{:?}", z.as_slice())));
        }
    }
    let field = GeodesicField::new(model, p)?;
    let bracket = |z: &CVec| -> Option<CVec> {
        let m = field.monitor(z)?;
        if m < EVENT_THRESHOLD {
            return None;
        }
        model.grad_wbar_log(&PolarizedPoint::frozen(z, p)).ok()
    };
    // Endpoints only need to avoid the varieties themselves, not the event band around them.
    let endpoint = |z: &CVec| -> Result<CVec> {
        let pt = PolarizedPoint::frozen(z, p);
        metric_at(model, &pt)?;
        model.grad_wbar_log(&pt)
    };
    let bx = endpoint(x)?;
    let by = endpoint(y)?;
    let delta = (&bx - &by).norm();

    let spacing = 2.0 / (resolution - 1) as f64;
    let coord = |i: usize| -1.0 + spacing * i as f64;
    let total = resolution.pow(2 * n as u32);
    let candidates: Vec<CVec> = (0..total)
        .map(|mut idx| {
            let mut re = vec![0.0; 2 * n];
            for slot in re.iter_mut() {
                *slot = coord(idx % resolution);
                idx /= resolution;
            }
            CVec::from_fn(n, |j, _| c(re[2 * j], re[2 * j + 1]))
        })
        .filter(|z| domain.contains(z.as_slice()))
        .collect();
    let mut points: Vec<(CVec, CVec)> = vec![(x.clone(), bx), (y.clone(), by)];
    points.extend(
        candidates
            .into_par_iter()
            .filter_map(|z| bracket(&z).map(|b| (z, b)))
            .collect::<Vec<_>>(),
    );

    // Spatial hash on cells of size chart_radius.
    let key = |z: &CVec| -> Vec<i64> {
        z.iter()
            .flat_map(|v| [(v.re / chart_radius).floor() as i64, (v.im / chart_radius).floor() as i64])
            .collect()
    };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, (z, _)) in points.iter().enumerate() {
        cells.entry(key(z)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(2 * n as u32))
        .map(|mut k| {
            (0..2 * n)
                .map(|_| {
                    let d = (k % 3) as i64 - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .collect();
    let edges: Vec<(usize, usize, f64)> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (zi, bi) = &points[i];
            let base = key(zi);
            let mut out = Vec::new();
            for off in &offsets {
                let cell: Vec<i64> = base.iter().zip(off).map(|(a, b)| a + b).collect();
                let Some(list) = cells.get(&cell) else { continue };
                for &j in list {
                    if j <= i {
                        continue;
                    }
                    let (zj, bj) = &points[j];
                    if (zi - zj).norm() > chart_radius {
                        continue;
                    }
                    let w = (bi - bj).norm();
                    if segment_is_chart_local(&bracket, zi, bi, zj, bj, w) {
                        out.push((i, j, w));
                    }
                }
            }
            out.into_iter()
        })
        .collect();

    let mut graph: UnGraph<(), f64> = UnGraph::with_capacity(points.len(), edges.len());
    let nodes: Vec<NodeIndex> = (0..points.len()).map(|_| graph.add_node(())).collect();
    for &(i, j, w) in &edges {
        graph.add_edge(nodes[i], nodes[j], w);
    }
    let dist = dijkstra(&graph, nodes[0], Some(nodes[1]), |e| *e.weight());
    let distance = *dist.get(&nodes[1]).ok_or(Error::Unreachable)?;
    Ok(DistanceResult {
        distance,
        delta,
        nodes: points.len(),
        edges: edges.len(),
        resolution,
        chart_radius,
    })
}

/// Samples the segment; rejects it if any sample is on a variety or outside,
/// or if the bracket's polyline length exceeds the chord by more than half.
fn segment_is_chart_local<F>(bracket: &F, za: &CVec, ba: &CVec, zb: &CVec, bb: &CVec, chord: f64) -> bool
where
    F: Fn(&CVec) -> Option<CVec>,
{
    const PIECES: usize = 4;
    let mut prev = ba.clone();
    let mut length = 0.0;
    for k in 1..PIECES {
        let s = k as f64 / PIECES as f64;
        let z = za + (zb - za) * Complex64::new(s, 0.0);
        let Some(b) = bracket(&z) else { return false };
        length += (&b - &prev).norm();
        prev = b;
    }
    length += (bb - &prev).norm();
    length <= 1.5 * chord + 1e-12
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernels::DomainDescriptor;
    use crate::linalg::cvec;
    use crate::representative::rep_map;

    fn catalog() -> Vec<DomainDescriptor> {
        vec![
            DomainDescriptor::Disk,
            DomainDescriptor::Ball { n: 2 },
            DomainDescriptor::Polydisc { n: 2 },
            DomainDescriptor::Annulus { r: 0.3 },
            DomainDescriptor::Product {
                factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk],
            },
        ]
    }

    #[test]
    fn disk_origin_geodesics_are_lines() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let zero = cvec(&[c(0.0, 0.0)]);
        let v = cvec(&[c(0.5, 0.3)]);
        let tr = integrate_geodesic(&m, &zero, &zero, &v, 1.0, &GeodesicOptions::default()).unwrap();
        assert_eq!(tr.terminal, Terminal::Completed);
        for s in &tr.samples {
            assert!((s.z[0] - v[0] * s.t).norm() < 1e-14);
        }
    }

    #[test]
    fn geodesics_straighten_in_rep_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for d in catalog() {
            let m = KernelModel::new(d.clone()).unwrap();
            for _ in 0..4 {
                let p = d.sample_point(&mut rng, 0.15);
                let rc = RepCoordinates::new(&m, &p, false).unwrap();
                let radius = 0.3 * d.depth(p.as_slice());
                let zeta = CVec::from_fn(d.dim(), |_, _| {
                    Complex64::from_polar(radius / (d.dim() as f64).sqrt(), rng.random_range(0.0..6.3))
                });
                let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
                let tr = geodesic_at_times(&m, &p, &p, &zeta, &times, &GeodesicOptions::default()).unwrap();
                assert_eq!(tr.terminal, Terminal::Completed, "{}", d.name());
                for s in &tr.samples {
                    let dev = (rc.eval(&s.z).unwrap() - &zeta * c(s.t, 0.0)).norm();
                    assert!(dev < 1e-7 * (1.0 + zeta.norm()), "{} dev {dev:e}", d.name());
                }
            }
        }
    }

    #[test]
    fn disk_offset_base_straightens() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let p = cvec(&[c(0.5, 0.0)]);
        let zeta = cvec(&[c(-0.3, 0.2)]);
        let tr = integrate_geodesic(&m, &p, &p, &zeta, 1.0, &GeodesicOptions::default()).unwrap();
        for s in &tr.samples {
            let dev = (rep_map(&m, &p, &s.z, false).unwrap() - &zeta * c(s.t, 0.0)).norm();
            assert!(dev < 1e-7);
        }
    }

    #[test]
    fn affine_reparametrization() {
        let m = KernelModel::new(DomainDescriptor::Annulus { r: 0.3 }).unwrap();
        let p = cvec(&[c(0.6, 0.1)]);
        let q0 = cvec(&[c(0.55, 0.3)]);
        let v0 = cvec(&[c(-0.1, 0.15)]);
        let o = GeodesicOptions::default();
        let a = integrate_geodesic(&m, &p, &q0, &v0, 1.0, &o).unwrap();
        let b = integrate_geodesic(&m, &p, &q0, &(&v0 * c(2.0, 0.0)), 0.5, &o).unwrap();
        assert!((&a.last().z - &b.last().z).norm() < 1e-9);
    }

    #[test]
    fn annulus_geodesic_runs_into_kernel_zero() {
        let r = 0.3;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let p = cvec(&[c(0.6, 0.0)]);
        let roots = crate::zeros::annulus_roots(r).unwrap();
        let q = [roots.lambda1, roots.lambda2]
            .into_iter()
            .map(|l| l / 0.6)
            .find(|x| x.abs() > r && x.abs() < 1.0)
            .expect("a kernel zero in the annulus");
        // Start next to q on the ray ζ(t) = (1+t)·rep_p(q0), which runs into the pole of rep_p at q.
        let rc = RepCoordinates::new(&m, &p, false).unwrap();
        let q0 = cvec(&[c(q, 0.0) + c(0.0, 0.05 * q.abs())]);
        let v0 = crate::linalg::inverse(&rc.jacobian(&q0).unwrap()).unwrap() * rc.eval(&q0).unwrap();
        let tr = integrate_geodesic(&m, &p, &q0, &v0, 1e12, &GeodesicOptions::default()).unwrap();
        assert!(matches!(tr.terminal, Terminal::HitVariety | Terminal::StepUnderflow), "{:?}", tr.terminal);
        assert!((tr.last().z[0] - q).norm() < 1e-4, "{:?}", tr.last().z);
    }

    #[test]
    fn straight_lines_map_to_geodesics() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let o = GeodesicOptions::default();
        let p = cvec(&[c(0.2, -0.3)]);
        let through0 = verify_straight_lines(&m, &p, &cvec(&[c(0.0, 0.0)]), &cvec(&[c(0.3, 0.2)]), 11, &o).unwrap();
        assert!(through0 < 1e-8);
        let offset = verify_straight_lines(&m, &p, &cvec(&[c(0.2, 0.1)]), &cvec(&[c(-0.3, 0.2)]), 11, &o).unwrap();
        assert!(offset < 1e-7);
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.3 }).unwrap();
        let p = cvec(&[c(0.65, 0.0)]);
        let gap = verify_straight_lines(&ma, &p, &cvec(&[c(0.02, 0.03)]), &cvec(&[c(-0.04, 0.03)]), 11, &o).unwrap();
        assert!(gap < 1e-6);
    }

    #[test]
    fn naturality() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let o = GeodesicOptions::default();
        let p = cvec(&[c(0.1, 0.2)]);
        let q0 = cvec(&[c(0.0, 0.3)]);
        let v0 = cvec(&[c(0.4, -0.2)]);
        let f = Automorphism::DiskMobius { a: c(0.3, -0.2), theta: 0.4 };
        assert!(verify_naturality(&m, &m, &f, &p, &q0, &v0, 1.0, &o).unwrap() < 1e-7);
        assert!(verify_naturality(&m, &m, &Automorphism::Identity, &p, &q0, &v0, 1.0, &o).unwrap() <= 1e-10);
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.3 }).unwrap();
        let pa = cvec(&[c(0.6, 0.0)]);
        let qa = cvec(&[c(0.5, 0.2)]);
        for f in [Automorphism::Rotation { theta: 1.3 }, Automorphism::AnnulusInversion { r: 0.3 }] {
            assert!(verify_naturality(&ma, &ma, &f, &pa, &qa, &v0.map(|x| x * 0.3), 1.0, &o).unwrap() < 1e-7);
        }
    }

    #[test]
    fn rotation_commutes_pointwise() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let o = GeodesicOptions::default();
        let f = Automorphism::Rotation { theta: 0.8 };
        let p = cvec(&[c(0.3, 0.1)]);
        let q0 = cvec(&[c(-0.2, 0.2)]);
        let v0 = cvec(&[c(0.3, 0.3)]);
        let times: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();
        let a = geodesic_at_times(&m, &p, &q0, &v0, &times, &o).unwrap();
        let b = geodesic_at_times(&m, &f.apply(&p), &f.apply(&q0), &(f.jacobian(&q0) * &v0), &times, &o).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert!((f.apply(&sa.z) - &sb.z).norm() < 1e-9);
        }
    }

    #[test]
    fn delta_examples() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let zero = cvec(&[c(0.0, 0.0)]);
        let x = cvec(&[c(0.3, -0.2)]);
        let y = cvec(&[c(-0.5, 0.1)]);
        let d = intrinsic_delta(&m, &zero, &x, &y).unwrap();
        assert!((d - 2.0 * (x[0] - y[0]).norm()).abs() < 1e-14);
        let p = cvec(&[c(0.4, 0.4)]);
        assert_eq!(intrinsic_delta(&m, &p, &x, &y).unwrap(), intrinsic_delta(&m, &p, &y, &x).unwrap());
        assert_eq!(intrinsic_delta(&m, &p, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn disk_distance_at_origin_is_flat() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let zero = cvec(&[c(0.0, 0.0)]);
        let x = cvec(&[c(0.1, 0.05)]);
        let y = cvec(&[c(-0.05, -0.1)]);
        let r = intrinsic_distance(&m, &zero, &x, &y, 9, DEFAULT_CHART_RADIUS).unwrap();
        assert!((r.distance - 2.0 * (x[0] - y[0]).norm()).abs() < 1e-12);
        assert!(r.distance <= r.delta + 1e-15);
    }

    #[test]
    fn distance_refines_monotonically() {
        let m = KernelModel::new(DomainDescriptor::Annulus { r: 0.3 }).unwrap();
        let p = cvec(&[c(0.6, 0.0)]);
        let x = cvec(&[c(0.7, 0.2)]);
        let y = cvec(&[c(-0.6, 0.5)]);
        let ds: Vec<f64> = [9, 17, 33]
            .iter()
            .map(|&res| intrinsic_distance(&m, &p, &x, &y, res, 0.4).unwrap().distance)
            .collect();
        assert!(ds.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{ds:?}");
    }

    #[test]
    fn distance_diverges_near_kernel_zero() {
        let r = 0.3;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let pr = 0.6;
        let p = cvec(&[c(pr, 0.0)]);
        let roots = crate::zeros::annulus_roots(r).unwrap();
        let q = [roots.lambda1, roots.lambda2]
            .into_iter()
            .map(|l| l / pr)
            .find(|x| x.abs() > r && x.abs() < 1.0)
            .unwrap();
        let y = cvec(&[c(0.6, 0.3)]);
        let xk = cvec(&[c(q, 0.0) + Complex64::from_polar(2f64.powi(-12), 2.0)]);
        let d = intrinsic_distance(&m, &p, &xk, &y, 17, 0.4).unwrap();
        assert!(d.distance > 1e3, "{d:?}");
    }
}
