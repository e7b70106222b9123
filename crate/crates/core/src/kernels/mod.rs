//! Catalog of domains with closed-form polarized Bergman kernels, a
//! finite-difference derivative path, a Gram-matrix approximator, and the
//! built-in automorphism families.

mod automorphism;
mod domain;
mod gram;
mod jet;

pub use automorphism::{transformation_check, Automorphism};
pub use domain::{DomainDescriptor, Factor, PolarizedPoint};
pub use gram::{build_gram_kernel, gram_kernel_eval, GramKernel};
pub use jet::{annulus_profile, AnnulusRepr, Jet};

use num_complex::Complex64;

use crate::elliptic::DEFAULT_POLE_GUARD;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

pub const DEFAULT_KERNEL_FLOOR: f64 = 1e-12;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    #[default]
    ClosedForm,
    FiniteDifference,
}

/// A domain plus its kernel oracle. Immutable after construction.
#[derive(Debug, Clone)]
pub struct KernelModel {
    domain: DomainDescriptor,
    factors: Vec<Factor>,
    pub mode: DerivativeMode,
    pub annulus_repr: AnnulusRepr,
    /// Relative floor on `|K(z,w̄)|` below which log-derivatives are refused.
    pub kernel_floor: f64,
    /// Base finite-difference step for first derivatives.
    pub fd_step: f64,
}

impl KernelModel {
    pub fn new(domain: DomainDescriptor) -> Result<Self> {
        Self::with_pole_guard(domain, DEFAULT_POLE_GUARD)
    }

    pub fn with_pole_guard(domain: DomainDescriptor, pole_guard: f64) -> Result<Self> {
        let factors = domain.factors(pole_guard)?;
        Ok(KernelModel {
            domain,
            factors,
            mode: DerivativeMode::ClosedForm,
            annulus_repr: AnnulusRepr::Weierstrass,
            kernel_floor: DEFAULT_KERNEL_FLOOR,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_annulus_repr(mut self, repr: AnnulusRepr) -> Self {
        self.annulus_repr = repr;
        self
    }

    pub fn with_kernel_floor(mut self, floor: f64) -> Self {
        self.kernel_floor = floor;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn check_dims(&self, pt: &PolarizedPoint) -> Result<()> {
        let n = self.dim();
        for len in [pt.z.len(), pt.wbar.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok(())
    }

    /// Closed-form jet. Requires only that the polarized point lies in the
    /// region where the kernel formula is analytic.
    pub fn jet(&self, pt: &PolarizedPoint) -> Result<Jet> {
        self.check_dims(pt)?;
        let mut off = 0;
        let mut acc: Option<Jet> = None;
        for f in &self.factors {
            let d = f.dim();
            let z = &pt.z.as_slice()[off..off + d];
            let w = &pt.wbar.as_slice()[off..off + d];
            let j = match f {
                Factor::Ball { n } => jet::ball_jet(*n, z, w)?,
                Factor::Annulus { lat } => jet::annulus_jet(lat, self.annulus_repr, z[0], w[0])?,
            };
            acc = Some(match acc {
                None => j,
                Some(a) => Jet::product(&a, &j),
            });
            off += d;
        }
        Ok(acc.expect("at least one factor"))
    }

    /// `K(z, w̄)` without membership checks (analytic region only).
    pub fn kernel_raw(&self, pt: &PolarizedPoint) -> Result<Complex64> {
        self.check_dims(pt)?;
        let mut off = 0;
        let mut k = Complex64::new(1.0, 0.0);
        for f in &self.factors {
            let d = f.dim();
            let z = &pt.z.as_slice()[off..off + d];
            let w = &pt.wbar.as_slice()[off..off + d];
            k *= match f {
                Factor::Ball { n } => jet::ball_jet(*n, z, w)?.k,
                Factor::Annulus { lat } => annulus_profile(lat, z[0] * w[0], self.annulus_repr)?[0],
            };
            off += d;
        }
        Ok(k)
    }

    /// `√(K(z,z̄)·K(w,w̄))`, the Cauchy–Schwarz bound for `|K(z,w̄)|`; used
    /// as the scale for the kernel floor. Falls back to 1 off the domain.
    pub fn kernel_scale(&self, pt: &PolarizedPoint) -> f64 {
        let z = &pt.z;
        let w = pt.w();
        match (
            self.kernel_raw(&PolarizedPoint::diag(z)),
            self.kernel_raw(&PolarizedPoint::diag(&w)),
        ) {
            (Ok(a), Ok(b)) if self.domain.contains(z.as_slice()) && self.domain.contains(w.as_slice()) => {
                (a.re * b.re).abs().sqrt()
            }
            _ => 1.0,
        }
    }

    fn check_floor(&self, pt: &PolarizedPoint, k: Complex64) -> Result<()> {
        let floor = self.kernel_floor * self.kernel_scale(pt);
        if k.norm() < floor || !k.norm().is_finite() {
            return Err(Error::NearZeroKernel { modulus: k.norm(), floor });
        }
        Ok(())
    }

    /// `(∂w̄ log K, ∂z∂w̄ log K)` in the model's derivative mode.
    pub fn log_derivatives(&self, pt: &PolarizedPoint) -> Result<(CVec, CMat)> {
        match self.mode {
            DerivativeMode::ClosedForm => {
                let j = self.jet(pt)?;
                self.check_floor(pt, j.k)?;
                Ok((j.grad_wbar_log(), j.metric()))
            }
            DerivativeMode::FiniteDifference => {
                let k = self.kernel_raw(pt)?;
                self.check_floor(pt, k)?;
                let fd = self.fd_first(pt)?;
                let n = self.dim();
                let grad = CVec::from_iterator(n, fd.dw.iter().map(|d| d / k));
                let mixed = self.fd_mixed(pt)?;
                let hess = CMat::from_fn(n, n, |j, l| (k * mixed[(j, l)] - fd.dz[j] * fd.dw[l]) / (k * k));
                Ok((grad, hess))
            }
        }
    }

    /// `∂w̄ log K` only.
    pub fn grad_wbar_log(&self, pt: &PolarizedPoint) -> Result<CVec> {
        match self.mode {
            DerivativeMode::ClosedForm => {
                let j = self.jet(pt)?;
                self.check_floor(pt, j.k)?;
                Ok(j.grad_wbar_log())
            }
            DerivativeMode::FiniteDifference => {
                let k = self.kernel_raw(pt)?;
                self.check_floor(pt, k)?;
                let fd = self.fd_first(pt)?;
                Ok(CVec::from_iterator(self.dim(), fd.dw.iter().map(|d| d / k)))
            }
        }
    }

    /// Polarized metric `G(z,w̄)`.
    pub fn metric(&self, pt: &PolarizedPoint) -> Result<CMat> {
        self.log_derivatives(pt).map(|(_, g)| g)
    }

    /// `∂_l G(z, w̄)` for each `l`; closed form or nested differencing of
    /// the metric with a step 10× the metric step.
    pub fn metric_derivative(&self, pt: &PolarizedPoint) -> Result<Vec<CMat>> {
        match self.mode {
            DerivativeMode::ClosedForm => {
                let j = self.jet(pt)?;
                self.check_floor(pt, j.k)?;
                Ok(j.metric_derivative())
            }
            DerivativeMode::FiniteDifference => {
                let n = self.dim();
                (0..n)
                    .map(|l| {
                        let h = 10.0 * self.mixed_step(pt.z[l]);
                        stencil(h, |t| {
                            let mut q = pt.clone();
                            q.z[l] += t;
                            self.metric(&q)
                        })
                    })
                    .collect()
            }
        }
    }

    fn first_step(&self, x: Complex64) -> f64 {
        self.fd_step * x.norm().max(1.0)
    }

    /// Step for mixed second differences: balances the h⁴ truncation error
    /// against ε/h² roundoff.
    fn mixed_step(&self, x: Complex64) -> f64 {
        self.fd_step.sqrt() * 0.5 * x.norm().max(1.0)
    }

    fn fd_first(&self, pt: &PolarizedPoint) -> Result<FirstDiffs> {
        let n = self.dim();
        let mut dz = Vec::with_capacity(n);
        let mut dw = Vec::with_capacity(n);
        for j in 0..n {
            let h = self.first_step(pt.z[j]);
            dz.push(stencil(h, |t| {
                let mut q = pt.clone();
                q.z[j] += t;
                self.kernel_raw(&q)
            })?);
            let h = self.first_step(pt.wbar[j]);
            dw.push(stencil(h, |t| {
                let mut q = pt.clone();
                q.wbar[j] += t;
                self.kernel_raw(&q)
            })?);
        }
        Ok(FirstDiffs { dz, dw })
    }

    fn fd_mixed(&self, pt: &PolarizedPoint) -> Result<CMat> {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let hz = self.mixed_step(pt.z[j]);
                let hw = self.mixed_step(pt.wbar[k]);
                out[(j, k)] = stencil(hz, |s| {
                    let mut q = pt.clone();
                    q.z[j] += s;
                    stencil(hw, |t| {
                        let mut q2 = q.clone();
                        q2.wbar[k] += t;
                        self.kernel_raw(&q2)
                    })
                })?;
            }
        }
        Ok(out)
    }
}

struct FirstDiffs {
    dz: Vec<Complex64>,
    dw: Vec<Complex64>,
}

/// Fourth-order central difference of a holomorphic function along a real
/// step: `(f(−2h) − 8f(−h) + 8f(h) − f(2h)) / 12h`.
pub(crate) fn stencil<T, F>(h: f64, mut f: F) -> Result<T>
where
    F: FnMut(Complex64) -> Result<T>,
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<Complex64, Output = T>,
{
    let hc = |k: f64| Complex64::new(k * h, 0.0);
    let fm2 = f(hc(-2.0))?;
    let fm1 = f(hc(-1.0))?;
    let fp1 = f(hc(1.0))?;
    let fp2 = f(hc(2.0))?;
    let w = Complex64::new(1.0 / (12.0 * h), 0.0);
    Ok(((fm2 - fp2) + (fp1 - fm1) * Complex64::new(8.0, 0.0)) * w)
}

/// `K(z, w̄)` with domain-membership checks on `z` and `w`.
pub fn kernel_eval(model: &KernelModel, pt: &PolarizedPoint) -> Result<Complex64> {
    model.check_dims(pt)?;
    let d = model.domain();
    if !d.contains(pt.z.as_slice()) {
        return Err(Error::OutsideDomain(format!("z = {:?} not in {}", pt.z.as_slice(), d.name())));
    }
    let w = pt.w();
    if !d.contains(w.as_slice()) {
        return Err(Error::OutsideDomain(format!("w = {:?} not in {}", w.as_slice(), d.name())));
    }
    model.kernel_raw(pt)
}

/// `(∂w̄ log K, ∂²log K/∂z∂w̄)` at `pt`.
pub fn kernel_derivatives(model: &KernelModel, pt: &PolarizedPoint) -> Result<(CVec, CMat)> {
    model.log_derivatives(pt)
}

/// Annulus kernel at `λ = z·w̄` by both the ℘ formula and the Laurent series.
pub fn annulus_cross_check(r: f64, lambda: Complex64) -> Result<(Complex64, Complex64)> {
    let lat = crate::elliptic::make_lattice(r)?;
    let a = annulus_profile(&lat, lambda, AnnulusRepr::Weierstrass)?[0];
    let b = annulus_profile(&lat, lambda, AnnulusRepr::Laurent)?[0];
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::{c, cvec};

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

    /// Orthonormal-monomial series for the disk: Σ (n+1)(zw̄)ⁿ/π.
    fn disk_series(lambda: Complex64) -> Complex64 {
        (0..2000).map(|n| (n as f64 + 1.0) * lambda.powi(n) / PI).sum()
    }

    #[test]
    fn disk_origin_value() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let k = kernel_eval(&m, &PolarizedPoint::diag(&cvec(&[c(0.0, 0.0)]))).unwrap();
        assert!((k - disk_series(c(0.0, 0.0))).norm() < 1e-15);
        assert!((k.re - 1.0 / PI).abs() < 1e-15);
        let pt = PolarizedPoint::new(cvec(&[c(0.3, 0.2)]), cvec(&[c(-0.5, 0.4)]));
        let k = kernel_eval(&m, &pt).unwrap();
        assert!((k - disk_series(c(0.3, 0.2) * c(-0.5, 0.4))).norm() < 1e-13);
    }

    #[test]
    fn ball_origin_value() {
        // Orthonormal monomials on B²: ‖z^α‖² = π² α!/(|α|+2)!, so K(0,0) = 2/π².
        let m = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let k = kernel_eval(&m, &PolarizedPoint::diag(&cvec(&[c(0.0, 0.0); 2]))).unwrap();
        assert!((k.re - 2.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn ball_matches_monomial_series() {
        // K(z,w̄) = Σ_α z^α w̄^α / ‖z^α‖² with ‖z^α‖² = π² α₁!α₂!/(|α|+2)!.
        let z = [c(0.3, 0.1), c(-0.2, 0.25)];
        let w = [c(0.1, -0.4), c(0.35, 0.05)];
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        let mut s = c(0.0, 0.0);
        for a in 0..80u32 {
            for b in 0..80u32 {
                let norm2 = PI * PI * fact(a) * fact(b) / fact(a + b + 2);
                s += z[0].powu(a) * w[0].powu(a) * z[1].powu(b) * w[1].powu(b) / norm2;
            }
        }
        let m = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let k = m.kernel_raw(&PolarizedPoint::new(cvec(&z), cvec(&w))).unwrap();
        assert!((k - s).norm() < 1e-12 * s.norm());
    }

    #[test]
    fn disk_log_derivatives() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let pt = PolarizedPoint::new(cvec(&[c(0.3, 0.0)]), cvec(&[c(0.0, 0.0)]));
        let (g, h) = kernel_derivatives(&m, &pt).unwrap();
        assert!((g[0] - c(0.6, 0.0)).norm() < 1e-15);
        let (_, h0) = kernel_derivatives(&m, &PolarizedPoint::diag(&cvec(&[c(0.0, 0.0)]))).unwrap();
        assert!((h0[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((h[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn annulus_two_representations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in [0.05, 0.1, 0.3, 0.5] {
            for _ in 0..100 {
                let m = rng.random_range((r * r * 1.0001)..0.9999);
                let th = rng.random_range(-PI..PI);
                let lambda = Complex64::from_polar(m, th);
                let (a, b) = annulus_cross_check(r, lambda).unwrap();
                assert!((a - b).norm() < 1e-8 * b.norm(), "r={r} λ={lambda}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn annulus_branch_cut_is_invisible() {
        let m = KernelModel::new(DomainDescriptor::Annulus { r: 0.2 }).unwrap();
        for rho in [0.1f64, 0.5, 0.9] {
            let above = PolarizedPoint::new(cvec(&[Complex64::from_polar(rho.sqrt(), PI - 1e-12)]), cvec(&[c(rho.sqrt(), 0.0)]));
            let below = PolarizedPoint::new(cvec(&[Complex64::from_polar(rho.sqrt(), -PI + 1e-12)]), cvec(&[c(rho.sqrt(), 0.0)]));
            let a = m.kernel_raw(&above).unwrap();
            let b = m.kernel_raw(&below).unwrap();
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0));
            let ja = m.jet(&above).unwrap().metric();
            let jb = m.jet(&below).unwrap().metric();
            assert!((ja[(0, 0)] - jb[(0, 0)]).norm() < 1e-8 * ja[(0, 0)].norm().max(1.0));
        }
    }

    #[test]
    fn annulus_rejects_bad_polarized_argument() {
        let m = KernelModel::new(DomainDescriptor::Annulus { r: 0.5 }).unwrap();
        let pt = PolarizedPoint::new(cvec(&[c(0.45, 0.0)]), cvec(&[c(0.45, 0.0)]));
        assert!(matches!(m.kernel_raw(&pt), Err(Error::OutsideDomain(_))));
        assert!(matches!(kernel_eval(&m, &pt), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn diagonal_positivity_on_grids() {
        for d in catalog() {
            let m = KernelModel::new(d.clone()).unwrap();
            let n = d.dim();
            let mut checked = 0;
            for i in 0..50 {
                for j in 0..50 {
                    let x = -1.0 + 2.0 * (i as f64 + 0.5) / 50.0;
                    let y = -1.0 + 2.0 * (j as f64 + 0.5) / 50.0;
                    let mut z = vec![c(0.0, 0.0); n];
                    z[0] = c(x, y);
                    if n > 1 {
                        z[n - 1] = c(0.3 * y, -0.2 * x);
                    }
                    if d.contains(&z) {
                        let k = m.kernel_raw(&PolarizedPoint::diag(&cvec(&z))).unwrap();
                        assert!(k.re > 0.0 && k.im.abs() < 1e-10 * k.re, "{} at {z:?}: {k}", d.name());
                        checked += 1;
                    }
                }
            }
            assert!(checked > 100);
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in catalog() {
            let m = KernelModel::new(d.clone()).unwrap();
            for _ in 0..100 {
                let z = d.sample_point(&mut rng, 0.02);
                let w = d.sample_point(&mut rng, 0.02);
                let a = m.kernel_raw(&PolarizedPoint::frozen(&z, &w)).unwrap();
                let b = m.kernel_raw(&PolarizedPoint::frozen(&w, &z)).unwrap();
                assert!((a - b.conj()).norm() < 1e-12 * a.norm().max(1.0), "{}", d.name());
            }
        }
    }

    #[test]
    fn finite_differences_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in catalog() {
            let cf = KernelModel::new(d.clone()).unwrap();
            let fd = cf.clone().with_mode(DerivativeMode::FiniteDifference);
            for _ in 0..20 {
                let z = d.sample_point(&mut rng, 0.15);
                let w = d.sample_point(&mut rng, 0.15);
                let pt = PolarizedPoint::frozen(&z, &w);
                let (g1, h1) = cf.log_derivatives(&pt).unwrap();
                let (g2, h2) = fd.log_derivatives(&pt).unwrap();
                let eg = (&g1 - &g2).norm() / g1.norm().max(1.0);
                let eh = (&h1 - &h2).norm() / h1.norm().max(1.0);
                assert!(eg < 1e-7, "{} grad {eg:e}", d.name());
                assert!(eh < 1e-7, "{} hess {eh:e}", d.name());
            }
        }
    }

    #[test]
    fn product_kernel_is_product_of_factors() {
        let d = DomainDescriptor::Product {
            factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk],
        };
        let m = KernelModel::new(d).unwrap();
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.2 }).unwrap();
        let md = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let z = cvec(&[c(0.5, 0.3), c(0.1, -0.6)]);
        let w = cvec(&[c(-0.4, 0.4), c(0.2, 0.2)]);
        let k = m.kernel_raw(&PolarizedPoint::frozen(&z, &w)).unwrap();
        let ka = ma.kernel_raw(&PolarizedPoint::frozen(&cvec(&[z[0]]), &cvec(&[w[0]]))).unwrap();
        let kd = md.kernel_raw(&PolarizedPoint::frozen(&cvec(&[z[1]]), &cvec(&[w[1]]))).unwrap();
        assert_eq!(k, ka * kd);
    }

    #[test]
    fn near_zero_kernel_is_refused() {
        // h has a zero at λ₂ ∈ (−1, −r); put z·p̄ right on it.
        let r = 0.3;
        let roots = crate::zeros::annulus_roots(r).unwrap();
        let p = 0.9;
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let pt = PolarizedPoint::new(cvec(&[c(roots.lambda2 / p, 0.0)]), cvec(&[c(p, 0.0)]));
        assert!(matches!(m.log_derivatives(&pt), Err(Error::NearZeroKernel { .. })));
    }
}
