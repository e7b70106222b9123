//! Zero varieties of `K(·,p̄)`, `det G(·,p̄)` and the determinant numerator,
//! the real roots of the annulus profile `h`, the product-domain gap search
//! and a sampled injectivity probe for `rep_p`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{self, LatticeParams};
use crate::error::{Error, Result};
use crate::kernels::{self, annulus_profile, AnnulusRepr, DomainDescriptor, KernelModel, PolarizedPoint};
use crate::linalg::{c, det, CVec};
use crate::representative::RepCoordinates;

const SCAN_STEP: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-12;

/// `h(λ) = ℘(log λ) + η₁/ω₁`; equals `π·λ·K(z,w̄)` for `λ = z·w̄`.
pub fn annulus_h(r: f64, lambda: Complex64) -> Result<Complex64> {
    let lat = elliptic::make_lattice(r)?;
    h_with(&lat, lambda)
}

fn h_with(lat: &LatticeParams, lambda: Complex64) -> Result<Complex64> {
    let m = lambda.norm();
    let r = lat.r;
    if !(m >= r * r * (1.0 - 1e-12) && m <= 1.0 + 1e-12) {
        return Err(Error::OutsideDomain(format!("h needs r² ≤ |λ| ≤ 1, got {m}")));
    }
    Ok(elliptic::wp(lat, lambda.ln())? + lat.eta_ratio())
}

fn h_real(lat: &LatticeParams, x: f64) -> Result<f64> {
    Ok(h_with(lat, c(x, 0.0))?.re)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusRoots {
    pub r: f64,
    /// Root in `(−r, −r²)`.
    pub lambda1: f64,
    /// Root in `(−1, −r)`.
    pub lambda2: f64,
    pub residuals: [f64; 2],
    /// `h(−1)`, `h(−r)`, `h(−r²)`.
    pub sign_values: [f64; 3],
    /// Sign changes found by the scan on `(−1, −r²)`.
    pub sign_changes: usize,
}

fn bisect(lat: &LatticeParams, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = h_real(lat, a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = h_real(lat, m)?;
        if fm.abs() < ROOT_TOL || (b - a).abs() < 4.0 * f64::EPSILON * m.abs() {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

pub fn annulus_roots(r: f64) -> Result<AnnulusRoots> {
    let lat = elliptic::make_lattice(r)?;
    let (h1, hr, hr2) = (h_real(&lat, -1.0)?, h_real(&lat, -r)?, h_real(&lat, -r * r)?);
    if !(h1 < 0.0 && hr > 0.0 && hr2 < 0.0) {
        return Err(Error::SignPattern(format!(
            "h(−1) = {h1:e}, h(−r) = {hr:e}, h(−r²) = {hr2:e}"
        )));
    }
    // Scan in log|λ|, uniform at the requested resolution.
    let lo = (r * r).ln();
    let steps = ((-lo) / SCAN_STEP).ceil() as usize;
    let mut changes = Vec::new();
    let mut prev_x = -1.0;
    let mut prev = h1;
    for k in 1..=steps {
        let x = -(-(k as f64) * (-lo) / steps as f64).exp();
        let v = h_real(&lat, x)?;
        if (v < 0.0) != (prev < 0.0) {
            changes.push((prev_x, x));
        }
        prev_x = x;
        prev = v;
    }
    if changes.len() != 2 {
        return Err(Error::SignPattern(format!("expected two sign changes, found {}", changes.len())));
    }
    let lambda2 = bisect(&lat, changes[0].0, changes[0].1)?;
    let lambda1 = bisect(&lat, changes[1].0, changes[1].1)?;
    if !(lambda2 > -1.0 && lambda2 < -r && lambda1 > -r && lambda1 < -r * r) {
        return Err(Error::SignPattern(format!("roots {lambda2}, {lambda1} outside their intervals")));
    }
    Ok(AnnulusRoots {
        r,
        lambda1,
        lambda2,
        residuals: [h_real(&lat, lambda1)?.abs(), h_real(&lat, lambda2)?.abs()],
        sign_values: [h1, hr, hr2],
        sign_changes: changes.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarietyKind {
    Z0,
    Z1,
    Zhat1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarietyProbe {
    pub p: CVec,
    pub kind: VarietyKind,
    pub hits: Vec<CVec>,
    /// `|defining function| / scale` at each hit.
    pub defining_values: Vec<f64>,
    pub scale: f64,
}

/// `det[K·∂z∂w̄K − ∂zK·∂w̄K]` at `(z, p̄)`.
pub fn zhat1_det(model: &KernelModel, p: &CVec, z: &CVec) -> Result<Complex64> {
    let jet = model.jet(&PolarizedPoint::frozen(z, p))?;
    Ok(det(&jet.metric_numerator()))
}

struct Definer<'a> {
    model: &'a KernelModel,
    p: CVec,
    kind: VarietyKind,
    k_scale: f64,
    g_scale: f64,
}

impl<'a> Definer<'a> {
    fn new(model: &'a KernelModel, p: &CVec, kind: VarietyKind) -> Result<Self> {
        let diag = PolarizedPoint::diag(p);
        let k_scale = model.kernel_raw(&diag)?.norm();
        let g_scale = det(&model.metric(&diag)?).norm();
        Ok(Definer { model, p: p.clone(), kind, k_scale, g_scale })
    }

    fn scale(&self) -> f64 {
        match self.kind {
            VarietyKind::Z0 => self.k_scale,
            VarietyKind::Z1 => self.g_scale,
            VarietyKind::Zhat1 => self.g_scale * self.k_scale.powi(2 * self.model.dim() as i32),
        }
    }

    fn value(&self, z: &CVec) -> Result<Complex64> {
        let pt = PolarizedPoint::frozen(z, &self.p);
        match self.kind {
            VarietyKind::Z0 => self.model.kernel_raw(&pt),
            VarietyKind::Z1 => {
                let jet = self.model.jet(&pt)?;
                let n = self.model.dim() as i32;
                Ok(det(&jet.metric_numerator()) / jet.k.powi(2 * n))
            }
            VarietyKind::Zhat1 => zhat1_det(self.model, &self.p, z),
        }
    }

    fn gradient(&self, z: &CVec) -> Result<CVec> {
        let n = self.model.dim();
        let mut g = CVec::zeros(n);
        for j in 0..n {
            let h = 1e-6 * z[j].norm().max(1.0);
            g[j] = kernels::stencil(h, |t| {
                let mut q = z.clone();
                q[j] += t;
                self.value(&q)
            })?;
        }
        Ok(g)
    }

    /// Minimal-norm Newton on the scalar defining function.
    fn refine(&self, z0: &CVec, tol: f64) -> Option<(CVec, f64)> {
        let mut z = z0.clone();
        let scale = self.scale();
        for _ in 0..60 {
            let f = self.value(&z).ok()?;
            if f.norm() < tol * scale {
                return Some((z, f.norm() / scale));
            }
            let g = self.gradient(&z).ok()?;
            let gn = g.norm_squared();
            if gn == 0.0 || !gn.is_finite() {
                return None;
            }
            let step = g.map(|x| x.conj()) * (f / gn);
            z -= step;
            if !self.model.domain().contains(z.as_slice()) {
                return None;
            }
        }
        None
    }
}

/// Cell-centred grid of `[−1,1]^{2n}` with `grid` points per real axis,
/// restricted to the domain; returns the points and the spacing.
pub fn domain_grid(domain: &DomainDescriptor, grid: usize) -> (Vec<CVec>, f64) {
    let n = domain.dim();
    let h = 2.0 / grid as f64;
    let coord = |i: usize| -1.0 + h * (i as f64 + 0.5);
    let total = grid.pow(2 * n as u32);
    let pts = (0..total)
        .map(|mut idx| {
            let mut re = vec![0.0; 2 * n];
            for slot in re.iter_mut() {
                *slot = coord(idx % grid);
                idx /= grid;
            }
            CVec::from_fn(n, |j, _| c(re[2 * j], re[2 * j + 1]))
        })
        .filter(|z| domain.contains(z.as_slice()))
        .collect();
    (pts, h)
}

const CANDIDATE_LEVEL: f64 = 0.05;
const HIT_TOL: f64 = 1e-10;

fn locus(model: &KernelModel, p: &CVec, kind: VarietyKind, grid: usize) -> Result<VarietyProbe> {
    let def = Definer::new(model, p, kind)?;
    let scale = def.scale();
    let (pts, h) = domain_grid(model.domain(), grid);
    let values: Vec<f64> = pts
        .par_iter()
        .map(|z| def.value(z).map(|v| v.norm() / scale).unwrap_or(f64::INFINITY))
        .collect();
    let mut hits: Vec<CVec> = Vec::new();
    let mut defining_values = Vec::new();
    let refined: Vec<Option<(CVec, f64)>> = pts
        .par_iter()
        .zip(&values)
        .map(|(z, &v)| if v < CANDIDATE_LEVEL { def.refine(z, HIT_TOL) } else { None })
        .collect();
    for (z, v) in refined.into_iter().flatten() {
        if kind == VarietyKind::Z1 {
            let k = model.kernel_raw(&PolarizedPoint::frozen(&z, p))?.norm();
            if k < HIT_TOL * def.k_scale {
                continue;
            }
        }
        if hits.iter().any(|w| (w - &z).norm() < 0.1 * h) {
            continue;
        }
        hits.push(z);
        defining_values.push(v);
    }
    Ok(VarietyProbe { p: p.clone(), kind, hits, defining_values, scale })
}

pub fn z0_locus(model: &KernelModel, p: &CVec, grid: usize) -> Result<VarietyProbe> {
    locus(model, p, VarietyKind::Z0, grid)
}

pub fn z1_locus(model: &KernelModel, p: &CVec, grid: usize) -> Result<VarietyProbe> {
    locus(model, p, VarietyKind::Z1, grid)
}

pub fn zhat1_locus(model: &KernelModel, p: &CVec, grid: usize) -> Result<VarietyProbe> {
    locus(model, p, VarietyKind::Zhat1, grid)
}

pub fn variety_locus(model: &KernelModel, p: &CVec, kind: VarietyKind, grid: usize) -> Result<VarietyProbe> {
    locus(model, p, kind, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapWitness {
    pub z: Complex64,
    /// `|g_A(z, p̄)|`
    pub metric_modulus: f64,
    /// `|K_A(z, p̄)| / K_A(p, p̄)`
    pub kernel_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductGapReport {
    pub r: f64,
    pub p: f64,
    pub witnesses: Vec<GapWitness>,
    pub found: bool,
}

/// `g(λ) = (λF′/F)′` for `K = F(z·w̄)`, and its derivative.
fn annulus_metric_profile(lat: &LatticeParams, lambda: Complex64) -> Result<(Complex64, Complex64)> {
    let [f0, f1, f2, f3] = annulus_profile(lat, lambda, AnnulusRepr::Weierstrass)?;
    let a = f1 / f0;
    let da = f2 / f0 - a * a;
    let dda = f3 / f0 - 3.0 * a * f2 / f0 + 2.0 * a * a * a;
    Ok((a + lambda * da, 2.0 * da + lambda * dda))
}

/// Scans `A_r` within 60° of the imaginary axis for zeros of the annulus
/// metric `g(z, p̄)` with `|K(z, p̄)|` bounded away from zero. Each witness
/// `z` gives the point `(z, w₂)` of `Ẑ₁ᵖ ∖ Z₀ᵖ` in `A_r × D` for any `w₂`.
pub fn product_gap_search(r: f64, p: f64, grid: usize) -> Result<ProductGapReport> {
    let lat = elliptic::make_lattice(r)?;
    if !(p.abs() > r && p.abs() < 1.0) {
        return Err(Error::OutsideDomain(format!("p = {p} not in the annulus")));
    }
    let k_scale = annulus_profile(&lat, c(p * p, 0.0), AnnulusRepr::Weierstrass)?[0].norm();
    let domain = DomainDescriptor::Annulus { r };
    let (pts, h) = domain_grid(&domain, grid);
    let band: Vec<Complex64> = pts
        .into_iter()
        .map(|z| z[0])
        .filter(|z| z.re.abs() <= 0.5 * z.norm())
        .collect();
    let found: Vec<Complex64> = band
        .par_iter()
        .filter_map(|&z0| {
            // Newton in λ = z·p̄ on the holomorphic function g(λ).
            let mut lambda = z0 * p;
            for _ in 0..40 {
                let (g, dg) = annulus_metric_profile(&lat, lambda).ok()?;
                if g.norm() < 1e-14 {
                    break;
                }
                let next = lambda - g / dg;
                if (next - lambda).norm() > 0.5 * h * p.abs() {
                    return None;
                }
                lambda = next;
            }
            let z = lambda / p;
            let (g, _) = annulus_metric_profile(&lat, lambda).ok()?;
            (domain.contains(&[z]) && g.norm() < 1e-12).then_some(z)
        })
        .collect();
    let mut witnesses: Vec<GapWitness> = Vec::new();
    for z in found {
        if witnesses.iter().any(|w| (w.z - z).norm() < 1e-8) {
            continue;
        }
        let lambda = z * p;
        let (g, _) = annulus_metric_profile(&lat, lambda)?;
        let k = annulus_profile(&lat, lambda, AnnulusRepr::Weierstrass)?[0].norm();
        let kernel_ratio = k / k_scale;
        if kernel_ratio > 0.1 && g.norm() < 1e-10 {
            witnesses.push(GapWitness { z, metric_modulus: g.norm(), kernel_ratio });
        }
    }
    witnesses.sort_by(|a, b| a.z.im.total_cmp(&b.z.im).then(a.z.re.total_cmp(&b.z.re)));
    let found = !witnesses.is_empty();
    Ok(ProductGapReport { r, p, witnesses, found })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionPair {
    pub z1: CVec,
    pub z2: CVec,
    pub zeta_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleProbeReport {
    pub injective_on_sample: bool,
    pub collisions: Vec<CollisionPair>,
    pub sampled: usize,
    pub resolution: f64,
    pub summary: String,
}

const MAX_REPORTED_COLLISIONS: usize = 64;

/// Evaluates `rep_p` on the grid and reports pairs with
/// `|ζᵢ − ζⱼ| < ½·h·min(‖Jᵢ‖, ‖Jⱼ‖)` and `|zᵢ − zⱼ| > 3h`. Sampled evidence only.
pub fn pole_probe(model: &KernelModel, p: &CVec, grid: usize) -> Result<PoleProbeReport> {
    let rc = RepCoordinates::new(model, p, false)?;
    let (pts, h) = domain_grid(model.domain(), grid);
    let mut evals: Vec<(CVec, CVec, f64)> = pts
        .into_par_iter()
        .filter_map(|z| {
            let zeta = rc.eval(&z).ok()?;
            let j = rc.jacobian(&z).ok()?;
            let sv = j.singular_values();
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            (zeta.iter().all(|v| v.re.is_finite() && v.im.is_finite())).then_some((z, zeta, smin))
        })
        .collect();
    evals.sort_by(|a, b| a.1[0].re.total_cmp(&b.1[0].re));
    let sep = 3.0 * h;
    let tol_max = evals.iter().map(|e| 0.5 * h * e.2).fold(0.0, f64::max);
    let mut collisions = Vec::new();
    let mut count = 0usize;
    for i in 0..evals.len() {
        for j in (i + 1)..evals.len() {
            if evals[j].1[0].re - evals[i].1[0].re > tol_max {
                break;
            }
            let tol = 0.5 * h * evals[i].2.min(evals[j].2);
            let gap = (&evals[i].1 - &evals[j].1).norm();
            if gap < tol && (&evals[i].0 - &evals[j].0).norm() > sep {
                count += 1;
                if collisions.len() < MAX_REPORTED_COLLISIONS {
                    collisions.push(CollisionPair { z1: evals[i].0.clone(), z2: evals[j].0.clone(), zeta_gap: gap });
                }
            }
        }
    }
    let injective = count == 0;
    let summary = if injective {
        format!("no collision found at resolution {h}")
    } else {
        format!("{count} collision pairs at resolution {h}")
    };
    Ok(PoleProbeReport { injective_on_sample: injective, collisions, sampled: evals.len(), resolution: h, summary })
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernels::Automorphism;
    use crate::linalg::cvec;

    #[test]
    fn h_symmetry_and_reality() {
        for r in [0.1, 0.3, 0.5] {
            let a = annulus_h(r, c(-1.0, 0.0)).unwrap();
            let b = annulus_h(r, c(-r * r, 0.0)).unwrap();
            assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
            for x in [-0.9f64, -0.5, -0.2, 0.3, 0.8] {
                if x.abs() <= r * r {
                    continue;
                }
                assert!(annulus_h(r, c(x, 0.0)).unwrap().im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn h_matches_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let r = 0.2;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        for _ in 0..30 {
            let z = DomainDescriptor::Annulus { r }.sample_point(&mut rng, 0.01);
            let w = DomainDescriptor::Annulus { r }.sample_point(&mut rng, 0.01);
            let lam = z[0] * w[0].conj();
            let k = m.kernel_raw(&PolarizedPoint::frozen(&z, &w)).unwrap();
            let h = annulus_h(r, lam).unwrap();
            assert!((h - std::f64::consts::PI * lam * k).norm() < 1e-10 * h.norm().max(1e-3));
        }
    }

    #[test]
    fn roots_in_intervals() {
        for r in [0.05, 0.1, 0.3, 0.5, 0.7] {
            let ar = annulus_roots(r).unwrap();
            assert!(ar.lambda2 > -1.0 && ar.lambda2 < -r);
            assert!(ar.lambda1 > -r && ar.lambda1 < -r * r);
            assert!(ar.residuals.iter().all(|&x| x < 1e-12), "{ar:?}");
            assert_eq!(ar.sign_changes, 2);
        }
    }

    #[test]
    fn annulus_z0_matches_roots() {
        let r = 0.1;
        let p = 0.5;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let ar = annulus_roots(r).unwrap();
        let want: Vec<f64> = [ar.lambda1, ar.lambda2]
            .iter()
            .map(|l| l / p)
            .filter(|x| x.abs() > r && x.abs() < 1.0)
            .collect();
        let probe = z0_locus(&m, &cvec(&[c(p, 0.0)]), 120).unwrap();
        assert_eq!(probe.hits.len(), want.len(), "{probe:?}");
        for w in want {
            assert!(probe.hits.iter().any(|z| (z[0] - c(w, 0.0)).norm() < 1e-8));
        }
    }

    #[test]
    fn zero_count_depends_on_basepoint() {
        // For p close to 1 only λ₂/p lies in the annulus.
        let r = 0.1;
        let ar = annulus_roots(r).unwrap();
        let p = 0.99;
        let inside = [ar.lambda1, ar.lambda2].iter().filter(|l| (*l / p).abs() > r && (*l / p).abs() < 1.0).count();
        assert_eq!(inside, 1);
    }

    #[test]
    fn lu_qi_keng_domains_have_empty_loci() {
        let md = KernelModel::new(DomainDescriptor::Disk).unwrap();
        for p in [c(0.0, 0.0), c(0.6, -0.3)] {
            for kind in [VarietyKind::Z0, VarietyKind::Z1, VarietyKind::Zhat1] {
                assert!(variety_locus(&md, &cvec(&[p]), kind, 60).unwrap().hits.is_empty());
            }
        }
        let mb = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let zero = CVec::zeros(2);
        assert!(z0_locus(&mb, &zero, 10).unwrap().hits.is_empty());
        assert!(z1_locus(&mb, &zero, 10).unwrap().hits.is_empty());
    }

    #[test]
    fn determinant_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for d in [
            DomainDescriptor::Disk,
            DomainDescriptor::Ball { n: 2 },
            DomainDescriptor::Annulus { r: 0.3 },
            DomainDescriptor::Product { factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk] },
        ] {
            let m = KernelModel::new(d.clone()).unwrap();
            let n = d.dim() as i32;
            let mut done = 0;
            while done < 30 {
                let p = d.sample_point(&mut rng, 0.05);
                let z = d.sample_point(&mut rng, 0.05);
                let pt = PolarizedPoint::frozen(&z, &p);
                let k = m.kernel_raw(&pt).unwrap();
                if k.norm() < 0.01 * m.kernel_scale(&pt) {
                    continue;
                }
                let lhs = zhat1_det(&m, &p, &z).unwrap() / k.powi(2 * n);
                let rhs = det(&m.metric(&pt).unwrap());
                assert!((lhs - rhs).norm() < 1e-9 * rhs.norm(), "{}", d.name());
                done += 1;
            }
        }
        // Disk: numerator is 2K²/(1−zp̄)².
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let (z, p) = (c(0.3, 0.4), c(-0.2, 0.5));
        let k = 1.0 / (std::f64::consts::PI * (1.0 - z * p.conj()).powi(2));
        let want = 2.0 * k * k / (1.0 - z * p.conj()).powi(2);
        assert!((zhat1_det(&m, &cvec(&[p]), &cvec(&[z])).unwrap() - want).norm() < 1e-13 * want.norm());
    }

    #[test]
    fn product_z0_lies_in_zhat1() {
        let d = DomainDescriptor::Product { factors: vec![DomainDescriptor::Annulus { r: 0.1 }, DomainDescriptor::Disk] };
        let m = KernelModel::new(d).unwrap();
        let ar = annulus_roots(0.1).unwrap();
        let p = cvec(&[c(0.5, 0.0), c(0.2, 0.1)]);
        let z = cvec(&[c(ar.lambda2 / 0.5, 0.0), c(-0.3, 0.4)]);
        let scale = m.kernel_raw(&PolarizedPoint::diag(&p)).unwrap().norm();
        assert!(m.kernel_raw(&PolarizedPoint::frozen(&z, &p)).unwrap().norm() < 1e-10 * scale);
        let g_scale = det(&m.metric(&PolarizedPoint::diag(&p)).unwrap()).norm() * scale.powi(4);
        assert!(zhat1_det(&m, &p, &z).unwrap().norm() < 1e-10 * g_scale);
    }

    #[test]
    fn product_gap_witnesses() {
        let mut any = false;
        for r in [0.01, 0.02, 0.05] {
            let rep = product_gap_search(r, 0.5, 120).unwrap();
            for w in &rep.witnesses {
                assert!(w.metric_modulus < 1e-10 && w.kernel_ratio > 0.1);
                assert!(w.z.re.abs() <= 0.5 * w.z.norm());
            }
            any |= rep.found;
        }
        assert!(any);
    }

    #[test]
    fn product_factorization_and_disk_factor() {
        // F = det numerator; for A×D it factors as K_A²K_D²F_A F_D.
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.05 }).unwrap();
        let md = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let mp = KernelModel::new(DomainDescriptor::Product {
            factors: vec![DomainDescriptor::Annulus { r: 0.05 }, DomainDescriptor::Disk],
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let z1 = c(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
            let z2 = c(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
            if !(z1.norm() > 0.1 && z1.norm() < 0.95) {
                continue;
            }
            let p = cvec(&[c(0.5, 0.0), c(0.1, -0.2)]);
            let z = cvec(&[z1, z2]);
            let fa = zhat1_det(&ma, &cvec(&[p[0]]), &cvec(&[z1])).unwrap();
            let fd = zhat1_det(&md, &cvec(&[p[1]]), &cvec(&[z2])).unwrap();
            let ka = ma.kernel_raw(&PolarizedPoint::frozen(&cvec(&[z1]), &cvec(&[p[0]]))).unwrap();
            let kd = md.kernel_raw(&PolarizedPoint::frozen(&cvec(&[z2]), &cvec(&[p[1]]))).unwrap();
            let f = zhat1_det(&mp, &p, &z).unwrap();
            let want = ka * ka * kd * kd * fa * fd;
            assert!((f - want).norm() < 1e-9 * want.norm());
            assert!((kd * kd * fd).norm() > 0.0);
        }
    }

    #[test]
    fn pole_probe_examples() {
        let md = KernelModel::new(DomainDescriptor::Disk).unwrap();
        for p in [c(0.0, 0.0), c(0.5, 0.2)] {
            assert!(pole_probe(&md, &cvec(&[p]), 60).unwrap().injective_on_sample);
        }
        let mb = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        assert!(pole_probe(&mb, &CVec::zeros(2), 8).unwrap().injective_on_sample);
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.3 }).unwrap();
        for p in [0.6, 0.8] {
            let rep = pole_probe(&ma, &cvec(&[c(p, 0.0)]), 100).unwrap();
            assert!(!rep.injective_on_sample, "p = {p}: {}", rep.summary);
        }
    }

    #[test]
    fn loci_transform_under_rotation() {
        let r = 0.1;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let f = Automorphism::Rotation { theta: 0.7 };
        let p = cvec(&[c(0.5, 0.0)]);
        let a = z0_locus(&m, &p, 120).unwrap();
        let b = z0_locus(&m, &f.apply(&p), 120).unwrap();
        assert_eq!(a.hits.len(), b.hits.len());
        for z in &a.hits {
            let fz = f.apply(z);
            assert!(b.hits.iter().any(|w| (w - &fz).norm() < 1e-8));
        }
    }
}
