//! Seeded verification suites. Each check records the measured figure, its
//! threshold and the comparison; a report passes iff every check does.

use std::f64::consts::PI;

use bgeo_core::connection::{integrate_geodesic, intrinsic_distance, verify_naturality, verify_straight_lines, Terminal};
use bgeo_core::elliptic::{self, make_lattice_with_guard};
use bgeo_core::kernels::{
    annulus_cross_check, build_gram_kernel, gram_kernel_eval, transformation_check, Automorphism, DomainDescriptor,
    KernelModel, PolarizedPoint,
};
use bgeo_core::linalg::{c, cvec, det, CVec};
use bgeo_core::metric::{christoffel_at, curvature_residual};
use bgeo_core::representative::{
    exph_q_inverse, exph_with, rep_map, verify_linearity, verify_normal_coordinates, ChartFactor, ExphMethod,
    RepCoordinates,
};
use bgeo_core::zeros::{annulus_h, annulus_roots, pole_probe, product_gap_search, z0_locus, zhat1_det, zhat1_locus};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 9] =
    ["kernels", "flatness", "linearity", "normal", "geodesics", "charts", "annulus", "zeros", "distance"];

const DEFAULT_ANNULUS_RADII: [f64; 5] = [0.05, 0.1, 0.3, 0.5, 0.7];
/// Largest radius for the Laurent cross-check and the Z₀ grid scan.
const MODERATE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// measured < threshold
    Below,
    /// measured ≥ threshold
    AtLeast,
    /// measured = threshold
    Equal,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub suites: Vec<String>,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub total: usize,
    pub failed: usize,
    pub passed: bool,
}

pub struct SuiteContext {
    pub seed: u64,
    pub domain: Option<DomainDescriptor>,
    pub r: Option<f64>,
    pub tol: Tolerances,
}

impl SuiteContext {
    fn rng(&self, suite: &str) -> ChaCha8Rng {
        let salt = SUITES.iter().position(|s| *s == suite).unwrap_or(0) as u64;
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt))
    }

    fn model(&self, d: &DomainDescriptor) -> CliResult<KernelModel> {
        self.tol.model(d)
    }

    /// The `--domain` override, or the built-in catalog.
    fn domains(&self) -> Vec<DomainDescriptor> {
        match &self.domain {
            Some(d) => vec![d.clone()],
            None => vec![
                DomainDescriptor::Disk,
                DomainDescriptor::Ball { n: 2 },
                DomainDescriptor::Polydisc { n: 2 },
                DomainDescriptor::Annulus { r: self.r.unwrap_or(0.3) },
                DomainDescriptor::Product {
                    factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk],
                },
            ],
        }
    }

    fn radii(&self) -> Vec<f64> {
        self.r.map_or(DEFAULT_ANNULUS_RADII.to_vec(), |r| vec![r])
    }
}

struct Recorder<'a> {
    suite: &'a str,
    checks: Vec<Check>,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, name: String, measured: f64, threshold: f64, comparison: Comparison, note: Option<String>) {
        let passed = match comparison {
            Comparison::Below => measured < threshold,
            Comparison::AtLeast => measured >= threshold,
            Comparison::Equal => measured == threshold,
        };
        self.checks.push(Check { suite: self.suite.into(), name, measured, threshold, comparison, passed, note });
    }

    /// Records `f`'s figure, or a failed check carrying the error.
    fn check<F>(&mut self, name: impl Into<String>, threshold: f64, comparison: Comparison, f: F)
    where
        F: FnOnce() -> CliResult<f64>,
    {
        let name = name.into();
        match f() {
            Ok(v) => self.record(name, v, threshold, comparison, None),
            Err(e) => {
                self.checks.push(Check {
                    suite: self.suite.into(),
                    name,
                    measured: f64::NAN,
                    threshold,
                    comparison,
                    passed: false,
                    note: Some(e.to_string()),
                });
            }
        }
    }

    fn below<F: FnOnce() -> CliResult<f64>>(&mut self, name: impl Into<String>, threshold: f64, f: F) {
        self.check(name, threshold, Comparison::Below, f)
    }
}

pub fn parse_suites(list: &str) -> CliResult<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for part in list.split(',') {
        if part == "all" {
            out.extend(SUITES.iter().map(|s| s.to_string()));
        } else if SUITES.contains(&part) {
            out.push(part.to_string());
        } else {
            return Err(CliError::Usage(format!("unknown suite {part:?}; choose from all, {}", SUITES.join(", "))));
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|s| seen.insert(s.clone()));
    Ok(out)
}

pub fn run_verify_suite(ctx: &SuiteContext, suites: &[String]) -> CliResult<VerifyReport> {
    if let Some(r) = ctx.r {
        DomainDescriptor::Annulus { r }.validate()?;
    }
    let mut checks = Vec::new();
    for suite in suites {
        let mut rec = Recorder { suite, checks: Vec::new() };
        match suite.as_str() {
            "kernels" => kernels(ctx, &mut rec)?,
            "flatness" => flatness(ctx, &mut rec)?,
            "linearity" => linearity(ctx, &mut rec)?,
            "normal" => normal(ctx, &mut rec)?,
            "geodesics" => geodesics(ctx, &mut rec)?,
            "charts" => charts(ctx, &mut rec)?,
            "annulus" => annulus(ctx, &mut rec)?,
            "zeros" => zeros(ctx, &mut rec)?,
            "distance" => distance(ctx, &mut rec)?,
            other => return Err(CliError::Usage(format!("unknown suite {other:?}"))),
        }
        checks.extend(rec.checks);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(VerifyReport {
        tool: "bgeo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: ctx.seed,
        suites: suites.to_vec(),
        tolerances: ctx.tol,
        total: checks.len(),
        failed,
        passed: failed == 0,
        checks,
    })
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn sample_off_zero(m: &KernelModel, rng: &mut ChaCha8Rng, margin: f64) -> (CVec, CVec) {
    let d = m.domain();
    loop {
        let z = d.sample_point(rng, margin);
        let w = d.sample_point(rng, margin);
        let pt = PolarizedPoint::frozen(&z, &w);
        if let Ok(k) = m.kernel_raw(&pt) {
            if k.norm() >= 0.01 * m.kernel_scale(&pt) {
                return (z, w);
            }
        }
    }
}

fn kernels(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("kernels");
    let disk = ctx.model(&DomainDescriptor::Disk)?;
    rec.below("disk Möbius transformation rule", 1e-10, || {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let a = Complex64::from_polar(rng.random_range(0.0..0.8), rng.random_range(-PI..PI));
            let f = Automorphism::DiskMobius { a, theta: rng.random_range(-PI..PI) };
            let (z, w) = sample_off_zero(&disk, &mut rng, 0.05);
            worst = worst.max(transformation_check(&f, &disk, &disk, &PolarizedPoint::frozen(&z, &w))?);
        }
        Ok(worst)
    });
    for r in ctx.radii() {
        let m = ctx.model(&DomainDescriptor::Annulus { r })?;
        rec.below(format!("annulus({r}) rotation and inversion rule"), 1e-9, || {
            let mut worst: f64 = 0.0;
            for f in [Automorphism::AnnulusInversion { r }, Automorphism::Rotation { theta: 1.1 }] {
                for _ in 0..10 {
                    let (z, w) = sample_off_zero(&m, &mut rng, 0.02);
                    worst = worst.max(transformation_check(&f, &m, &m, &PolarizedPoint::frozen(&z, &w))?);
                }
            }
            Ok(worst)
        });
        if r > MODERATE_RADIUS {
            continue;
        }
        rec.below(format!("annulus({r}) Weierstrass vs Laurent"), 1e-8, || {
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let lambda = Complex64::from_polar(rng.random_range(r * r * 1.01..0.99), rng.random_range(-PI..PI));
                let (a, b) = annulus_cross_check(r, lambda)?;
                worst = worst.max((a - b).norm() / b.norm());
            }
            Ok(worst)
        });
    }
    let poly = DomainDescriptor::Polydisc { n: 2 };
    let mp = ctx.model(&poly)?;
    rec.below("polydisc(2) product rule vs Gram approximation", 1e-8, || {
        let gk = build_gram_kernel(&poly, 40, 30)?;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let z = poly.sample_point(&mut rng, 0.5);
            let w = poly.sample_point(&mut rng, 0.5);
            let pt = PolarizedPoint::frozen(&z, &w);
            let exact = mp.kernel_raw(&pt)?;
            worst = worst.max((gram_kernel_eval(&gk, &pt)? - exact).norm() / exact.norm());
        }
        Ok(worst)
    });
    let mut errs = Vec::new();
    for cap in [5, 10, 20, 30] {
        let gk = build_gram_kernel(&DomainDescriptor::Disk, cap, 40)?;
        let mut worst: f64 = 0.0;
        for i in 0..15 {
            for j in 0..15 {
                let z = c(-0.7 + 1.4 * i as f64 / 14.0, -0.7 + 1.4 * j as f64 / 14.0);
                if z.norm() > 0.7 {
                    continue;
                }
                let exact = 1.0 / (PI * (1.0 - z.norm_sqr()).powi(2));
                worst = worst.max((gram_kernel_eval(&gk, &PolarizedPoint::diag(&cvec(&[z])))?.re - exact).abs() / exact);
            }
        }
        errs.push(worst);
    }
    rec.record("disk Gram kernel at degree cap 30".into(), errs[3], 1e-6, Comparison::Below, None);
    let increases = errs.windows(2).filter(|w| w[1] >= w[0]).count();
    rec.record(
        "disk Gram error decreasing over caps 5, 10, 20, 30".into(),
        increases as f64,
        0.0,
        Comparison::Equal,
        Some(format!("errors {}", sci(&errs))),
    );
    Ok(())
}

fn flatness(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("flatness");
    for d in ctx.domains() {
        let m = ctx.model(&d)?;
        let mut curv: f64 = 0.0;
        let mut asym: f64 = 0.0;
        let mut err = None;
        let mut done = 0;
        let mut tries = 0;
        while done < 50 && tries < 500 {
            tries += 1;
            let z = d.sample_point(&mut rng, 0.1);
            let p = d.sample_point(&mut rng, 0.1);
            match (curvature_residual(&m, &p, &z, 1e-4), christoffel_at(&m, &PolarizedPoint::frozen(&z, &p))) {
                (Ok(res), Ok(g)) => {
                    curv = curv.max(res);
                    asym = asym.max(g.max_asymmetry());
                    done += 1;
                }
                (Err(e), _) | (_, Err(e)) => err = Some(e.to_string()),
            }
        }
        let note = (done < 50).then(|| format!("only {done} admissible samples; last error: {}", err.unwrap_or_default()));
        let curv = if done < 50 { f64::NAN } else { curv };
        rec.record(format!("{} curvature residual", d.name()), curv, 1e-6, Comparison::Below, note.clone());
        rec.record(format!("{} Christoffel symmetry", d.name()), asym, 1e-10, Comparison::Below, note);
    }
    Ok(())
}

fn linearity(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("linearity");
    let md = ctx.model(&DomainDescriptor::Disk)?;
    let mut res: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    let mut failure = None;
    for k in 0..10 {
        let a = Complex64::from_polar(rng.random_range(0.0..0.7), rng.random_range(-PI..PI));
        let f = Automorphism::DiskMobius { a, theta: rng.random_range(-PI..PI) };
        let p = DomainDescriptor::Disk.sample_point(&mut rng, 0.3);
        match verify_linearity(&md, &f, &p, 12, ctx.seed.wrapping_add(k)) {
            Ok(rep) => {
                res = res.max(rep.residual);
                ratio = ratio.min(rep.conjugate_ratio());
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let res = if failure.is_some() { f64::NAN } else { res };
    rec.record("disk Möbius maps: linear fit residual".into(), res, 1e-8, Comparison::Below, failure.clone());
    rec.record("disk Möbius maps: conjugate-linear fit ratio".into(), ratio, 10.0, Comparison::AtLeast, failure);
    for r in ctx.radii() {
        let ma = ctx.model(&DomainDescriptor::Annulus { r })?;
        for (label, f) in [
            ("rotation", Automorphism::Rotation { theta: rng.random_range(-PI..PI) }),
            ("inversion", Automorphism::AnnulusInversion { r }),
        ] {
            let p = cvec(&[Complex64::from_polar((r.sqrt() + 1.0) / 2.0 * r.sqrt().max(0.6), rng.random_range(-PI..PI))]);
            match verify_linearity(&ma, &f, &p, 12, ctx.seed) {
                Ok(rep) => {
                    rec.record(format!("annulus({r}) {label}: linear fit residual"), rep.residual, 1e-8, Comparison::Below, None);
                    rec.record(
                        format!("annulus({r}) {label}: conjugate-linear fit ratio"),
                        rep.conjugate_ratio(),
                        10.0,
                        Comparison::AtLeast,
                        None,
                    );
                }
                Err(e) => rec.record(
                    format!("annulus({r}) {label}: linear fit residual"),
                    f64::NAN,
                    1e-8,
                    Comparison::Below,
                    Some(e.to_string()),
                ),
            }
        }
    }
    Ok(())
}

fn normal(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("normal");
    for d in [DomainDescriptor::Disk, DomainDescriptor::Ball { n: 2 }] {
        let m = ctx.model(&d)?;
        rec.below(format!("{} normal-coordinate residuals", d.name()), 1e-5, || {
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let p = d.sample_point(&mut rng, 0.3);
                let res = verify_normal_coordinates(&m, &p, 1e-3)?;
                worst = worst.max(res.metric_identity).max(res.first_derivative).max(res.pure_second);
            }
            Ok(worst)
        });
    }
    Ok(())
}

fn geodesics(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("geodesics");
    let opts = ctx.tol.geodesic_options();
    for d in ctx.domains() {
        let m = ctx.model(&d)?;
        rec.below(format!("{} straightening |rep_p(γ(t)) − tζ|/(1+|ζ|)", d.name()), 1e-7, || {
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let p = d.sample_point(&mut rng, 0.2);
                let rc = RepCoordinates::new(&m, &p, false)?;
                let u = CVec::from_fn(d.dim(), |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let v0 = &u * c(0.5 * d.depth(p.as_slice()) / u.norm(), 0.0);
                let zeta = rc.jacobian(&p)? * &v0;
                let tr = integrate_geodesic(&m, &p, &p, &v0, 1.0, &opts)?;
                if tr.terminal != Terminal::Completed {
                    return Err(CliError::Failure(format!("geodesic ended with {:?}", tr.terminal)));
                }
                for s in &tr.samples {
                    worst = worst.max((rc.eval(&s.z)? - &zeta * c(s.t, 0.0)).norm() / (1.0 + zeta.norm()));
                }
            }
            Ok(worst)
        });
    }
    let disk = ctx.model(&DomainDescriptor::Disk)?;
    rec.below("disk straight lines through exph are geodesics", 1e-7, || {
        let p = DomainDescriptor::Disk.sample_point(&mut rng, 0.3);
        let z0 = cvec(&[c(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))]);
        let dir = cvec(&[c(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))]);
        Ok(verify_straight_lines(&disk, &p, &z0, &dir, 11, &opts)?)
    });
    rec.below("disk Möbius naturality residual", 1e-7, || {
        let f = Automorphism::DiskMobius { a: c(0.3, -0.2), theta: 0.4 };
        Ok(verify_naturality(&disk, &disk, &f, &cvec(&[c(0.1, 0.2)]), &cvec(&[c(0.0, 0.3)]), &cvec(&[c(0.4, -0.2)]), 1.0, &opts)?)
    });
    rec.below("disk exph Newton vs ODE", 1e-8, || {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let p = DomainDescriptor::Disk.sample_point(&mut rng, 0.3);
            let z = DomainDescriptor::Disk.sample_point(&mut rng, 0.3);
            let zeta = rep_map(&disk, &p, &z, false)?;
            let a = exph_with(&disk, &p, &zeta, ExphMethod::Newton, false, ctx.tol.newton_tol)?;
            let b = exph_with(&disk, &p, &zeta, ExphMethod::Ode, false, ctx.tol.newton_tol)?;
            if !(a.converged && b.converged) {
                return Err(CliError::Failure("exph did not converge".into()));
            }
            worst = worst.max((&a.z - &b.z).norm());
        }
        Ok(worst)
    });
    Ok(())
}

fn affinity(m: &KernelModel, p: &CVec, q: &CVec, factor: ChartFactor, rng: &mut ChaCha8Rng) -> CliResult<f64> {
    let rc = RepCoordinates::new(m, p, false)?;
    let radius = 0.2 * m.domain().depth(p.as_slice());
    let n = m.dim();
    let chart = |zeta: &CVec| -> CliResult<CVec> {
        let ex = rc.invert(zeta, 1e-14)?;
        if !ex.converged {
            return Err(CliError::Failure("exph did not converge".into()));
        }
        Ok(exph_q_inverse(m, p, q, &ex.z, factor)?)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut draw = || CVec::from_fn(n, |_, _| c(rng.random_range(-radius..radius), rng.random_range(-radius..radius)));
        let (a, b) = (draw(), draw());
        let t = rng.random_range(-0.5..1.5);
        let mid = &a + (&b - &a) * c(t, 0.0);
        let (fa, fb, fm) = (chart(&a)?, chart(&b)?, chart(&mid)?);
        worst = worst.max((&fm - &fa - (&fb - &fa) * c(t, 0.0)).norm() / (1.0 + (&fb - &fa).norm()));
    }
    Ok(worst)
}

fn charts(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("charts");
    let disk = ctx.model(&DomainDescriptor::Disk)?;
    for (label, f) in [("raw", ChartFactor::Raw), ("sqrt", ChartFactor::Sqrt)] {
        rec.below(format!("disk affine chart compatibility ({label})"), 1e-7, || {
            affinity(&disk, &cvec(&[c(0.3, -0.2)]), &cvec(&[c(-0.1, 0.25)]), f, &mut rng)
        });
    }
    for r in ctx.radii() {
        let ma = ctx.model(&DomainDescriptor::Annulus { r })?;
        let rho = 0.5 * (1.0 + r);
        rec.below(format!("annulus({r}) affine chart compatibility (raw)"), 1e-7, || {
            affinity(&ma, &cvec(&[c(rho, 0.0)]), &cvec(&[Complex64::from_polar(rho, 0.6)]), ChartFactor::Raw, &mut rng)
        });
    }
    for d in ctx.domains() {
        let m = ctx.model(&d)?;
        rec.below(format!("{} exph round trip", d.name()), 1e-9, || {
            let p = d.reference_point();
            let rc = RepCoordinates::new(&m, &p, false)?;
            let radius = 0.3 * d.depth(p.as_slice());
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let zeta = CVec::from_fn(d.dim(), |_, _| c(rng.random_range(-radius..radius), rng.random_range(-radius..radius)));
                let ex = rc.invert(&zeta, ctx.tol.newton_tol)?;
                if !ex.converged {
                    return Err(CliError::Failure("exph did not converge".into()));
                }
                worst = worst.max((rc.eval(&ex.z)? - &zeta).norm());
            }
            Ok(worst)
        });
    }
    Ok(())
}

fn annulus(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("annulus");
    for r in ctx.radii() {
        let ar = match annulus_roots(r) {
            Ok(ar) => ar,
            Err(e) => {
                rec.record(format!("r={r} roots"), f64::NAN, 0.0, Comparison::Equal, Some(e.to_string()));
                continue;
            }
        };
        let [a, b, cc] = ar.sign_values;
        rec.record(
            format!("r={r} sign pattern h(−1)<0, h(−r)>0, h(−r²)<0"),
            (a < 0.0 && b > 0.0 && cc < 0.0) as u8 as f64,
            1.0,
            Comparison::Equal,
            Some(format!("h = {a:.6e}, {b:.6e}, {cc:.6e}")),
        );
        let placed = ar.lambda2 > -1.0 && ar.lambda2 < -r && ar.lambda1 > -r && ar.lambda1 < -r * r;
        rec.record(
            format!("r={r} roots in (−1,−r) and (−r,−r²)"),
            placed as u8 as f64,
            1.0,
            Comparison::Equal,
            Some(format!("λ₁ = {:.15e}, λ₂ = {:.15e}", ar.lambda1, ar.lambda2)),
        );
        rec.record(format!("r={r} exactly two sign changes"), ar.sign_changes as f64, 2.0, Comparison::Equal, None);
        rec.record(format!("r={r} root residual |h|"), ar.residuals[0].max(ar.residuals[1]), 1e-12, Comparison::Below, None);
        rec.below(format!("r={r} identity h(−1) = h(−r²)"), 1e-10, || {
            Ok((annulus_h(r, c(-1.0, 0.0))? - annulus_h(r, c(-r * r, 0.0))?).norm())
        });
        let lat = make_lattice_with_guard(r, ctx.tol.pole_guard)?;
        rec.record(format!("r={r} Legendre relation"), lat.legendre_residual(), 1e-10, Comparison::Below, None);
        rec.below(format!("r={r} Weierstrass differential equation"), 1e-9, || {
            let mut worst: f64 = 0.0;
            for _ in 0..50 {
                let u = c(rng.random_range(2.0 * r.ln()..0.0), rng.random_range(-PI..PI));
                let Ok(v) = elliptic::evaluate(&lat, u) else { continue };
                let rhs = 4.0 * v.wp * v.wp * v.wp - lat.g2 * v.wp - lat.g3;
                worst = worst.max((v.wp_prime * v.wp_prime - rhs).norm() / rhs.norm().max(1.0));
            }
            Ok(worst)
        });
        if r > MODERATE_RADIUS {
            continue;
        }
        let p = 0.5 * (1.0 + r);
        let m = ctx.model(&DomainDescriptor::Annulus { r })?;
        rec.check(format!("r={r} Z₀ scan at p={p} matches λᵢ/p"), 0.0, Comparison::Equal, || {
            let want: Vec<f64> =
                [ar.lambda1, ar.lambda2].iter().map(|l| l / p).filter(|x| x.abs() > r && x.abs() < 1.0).collect();
            let probe = z0_locus(&m, &cvec(&[c(p, 0.0)]), 120)?;
            let matched = want.iter().filter(|&&w| probe.hits.iter().any(|z| (z[0] - c(w, 0.0)).norm() < 1e-8)).count();
            Ok((probe.hits.len() as f64 - want.len() as f64).abs() + (want.len() - matched) as f64)
        });
    }
    Ok(())
}

fn zeros(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ctx.rng("zeros");
    for d in ctx.domains() {
        let m = ctx.model(&d)?;
        rec.below(format!("{} Ẑ₁ numerator / K^(2n) = det G", d.name()), 1e-9, || {
            let n = d.dim() as i32;
            let mut worst: f64 = 0.0;
            for _ in 0..30 {
                let (z, p) = sample_off_zero(&m, &mut rng, 0.05);
                let pt = PolarizedPoint::frozen(&z, &p);
                let lhs = zhat1_det(&m, &p, &z)? / m.kernel_raw(&pt)?.powi(2 * n);
                let rhs = det(&m.metric(&pt)?);
                worst = worst.max((lhs - rhs).norm() / rhs.norm());
            }
            Ok(worst)
        });
    }
    for (d, p, grid) in [
        (DomainDescriptor::Disk, cvec(&[c(0.3, -0.4)]), 60),
        (DomainDescriptor::Ball { n: 2 }, cvec(&[c(0.2, 0.1), c(-0.3, 0.2)]), 10),
    ] {
        let m = ctx.model(&d)?;
        rec.check(format!("{} Ẑ₁ scan is empty", d.name()), 0.0, Comparison::Equal, || {
            Ok(zhat1_locus(&m, &p, grid)?.hits.len() as f64)
        });
    }
    let mut notes = Vec::new();
    let mut found = 0;
    for r in [0.01, 0.02, 0.05] {
        match product_gap_search(r, 0.5, 120) {
            Ok(rep) => {
                let ok = rep.witnesses.iter().filter(|w| w.metric_modulus < 1e-10 && w.kernel_ratio > 0.1).count();
                found += (ok > 0) as usize;
                notes.push(format!("r={r}: {ok} witnesses"));
            }
            Err(e) => notes.push(format!("r={r}: {e}")),
        }
    }
    rec.record(
        "A_r × D product gap: radii with a Ẑ₁∖Z₀ witness".into(),
        found as f64,
        1.0,
        Comparison::AtLeast,
        Some(notes.join("; ")),
    );
    let disk = ctx.model(&DomainDescriptor::Disk)?;
    rec.check("disk representative map injective on sample", 1.0, Comparison::Equal, || {
        Ok(pole_probe(&disk, &cvec(&[c(0.5, 0.2)]), 60)?.injective_on_sample as u8 as f64)
    });
    let ma = ctx.model(&DomainDescriptor::Annulus { r: 0.3 })?;
    rec.check("annulus(0.3) representative map at p=0.6 has collisions", 1.0, Comparison::AtLeast, || {
        Ok(pole_probe(&ma, &cvec(&[c(0.6, 0.0)]), 100)?.collisions.len() as f64)
    });
    Ok(())
}

fn distance(ctx: &SuiteContext, rec: &mut Recorder) -> CliResult<()> {
    let disk = ctx.model(&DomainDescriptor::Disk)?;
    rec.below("disk at p=0: distance equals |2x − 2y|", 1e-12, || {
        let x = cvec(&[c(0.1, 0.05)]);
        let y = cvec(&[c(-0.05, -0.1)]);
        let res = intrinsic_distance(&disk, &cvec(&[c(0.0, 0.0)]), &x, &y, 9, 0.25)?;
        Ok((res.distance - 2.0 * (x[0] - y[0]).norm()).abs())
    });
    let r = 0.3;
    let pr = 0.6;
    let m = ctx.model(&DomainDescriptor::Annulus { r })?;
    let ar = annulus_roots(r)?;
    let Some(q) = [ar.lambda1, ar.lambda2].into_iter().map(|l| l / pr).find(|x| x.abs() > r && x.abs() < 1.0) else {
        rec.record("annulus kernel zero in A".into(), 0.0, 1.0, Comparison::AtLeast, None);
        return Ok(());
    };
    let p = cvec(&[c(pr, 0.0)]);
    let y = cvec(&[c(0.6, 0.3)]);
    let mut ds = Vec::new();
    let mut failure = None;
    for k in 16..=20 {
        let x = cvec(&[c(q, 0.0) + Complex64::from_polar(2f64.powi(-k), 0.3)]);
        match intrinsic_distance(&m, &p, &x, &y, 17, 0.4) {
            Ok(res) => ds.push(res.distance),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    let last = if failure.is_some() { f64::NAN } else { ds.last().copied().unwrap_or(f64::NAN) };
    rec.record(
        "annulus(0.3), p=0.6: distance to q + 2⁻²⁰e^{0.3i}".into(),
        last,
        1e3,
        Comparison::AtLeast,
        failure.clone().or(Some(format!("k = 16..20: {}", sci(&ds)))),
    );
    let drops = ds.windows(2).filter(|w| w[1] <= w[0]).count();
    rec.record("distance increasing over k = 16..20".into(), drops as f64, 0.0, Comparison::Equal, failure);
    Ok(())
}
