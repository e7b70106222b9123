//! Polarized Bergman metric `G(z,w̄)`, the Christoffel symbols of the
//! connection `ω = ∂G·G⁻¹`, its curvature defect, and the Cholesky
//! normalization used by normal coordinates.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{KernelModel, PolarizedPoint};
use crate::linalg::{cholesky_lower, det, inverse, max_abs, CMat, CVec};

/// Relative threshold on `|det G|` below which the metric is treated as
/// singular (the point is near `Z₁`).
pub const SINGULAR_DET_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    /// `g[(j, k)] = g_{jk̄}(z, w̄)`
    pub g: CMat,
    pub at_point: PolarizedPoint,
    pub det_g: Complex64,
}

impl MetricTensor {
    /// Hermitian with all Cholesky pivots positive.
    pub fn is_positive_definite(&self) -> bool {
        cholesky_lower(&self.g).is_ok()
    }
}

/// `Γʲₖₗ(z, w̄)`; stored as one matrix per `l` with `gamma_l[(k, j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    pub gamma: Vec<CMat>,
    pub at_point: PolarizedPoint,
}

impl ChristoffelTensor {
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// `Γʲₖₗ`
    pub fn get(&self, j: usize, k: usize, l: usize) -> Complex64 {
        self.gamma[l][(k, j)]
    }

    /// `Γʲₖₗ vᵏ vˡ` for each `j`.
    pub fn contract(&self, v: &CVec) -> CVec {
        let n = self.dim();
        let mut out = CVec::zeros(n);
        for l in 0..n {
            // (vᵀ Γ_l)_j = Σ_k v_k Γʲ_{kl}
            let row = self.gamma[l].tr_mul(v);
            out += row * v[l];
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    worst = worst.max((self.get(j, k, l) - self.get(j, l, k)).norm());
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationMatrix {
    /// Lower-triangular `A` with positive diagonal, `G(p) = A·Aᴴ`.
    pub a: CMat,
    pub sqrt_g_inv: CMat,
}

impl NormalizationMatrix {
    /// `‖A⁻¹·G·A⁻ᴴ − I‖∞`
    pub fn defect(&self, g: &CMat) -> f64 {
        let n = g.nrows();
        max_abs(&(&self.sqrt_g_inv * g * self.sqrt_g_inv.adjoint() - CMat::identity(n, n)))
    }
}

/// `√(|det G(z,z̄)|·|det G(w,w̄)|)`, falling back to 1 off the domain.
pub fn metric_det_scale(model: &KernelModel, pt: &PolarizedPoint) -> f64 {
    let z = &pt.z;
    let w = pt.w();
    let d = model.domain();
    if !(d.contains(z.as_slice()) && d.contains(w.as_slice())) {
        return 1.0;
    }
    match (
        model.metric(&PolarizedPoint::diag(z)),
        model.metric(&PolarizedPoint::diag(&w)),
    ) {
        (Ok(a), Ok(b)) => (det(&a).norm() * det(&b).norm()).sqrt(),
        _ => 1.0,
    }
}

pub fn metric_at(model: &KernelModel, pt: &PolarizedPoint) -> Result<MetricTensor> {
    let g = model.metric(pt)?;
    let det_g = det(&g);
    let threshold = SINGULAR_DET_RTOL * metric_det_scale(model, pt);
    if det_g.norm() < threshold || !det_g.norm().is_finite() {
        return Err(Error::SingularMetric { modulus: det_g.norm(), threshold });
    }
    Ok(MetricTensor { g, at_point: pt.clone(), det_g })
}

/// Christoffel symbols from `G` and `∂G`, without the singularity check.
pub(crate) fn christoffel_from(g: &CMat, dg: &[CMat], pt: &PolarizedPoint) -> Result<ChristoffelTensor> {
    let ginv = inverse(g).ok_or(Error::SingularMetric { modulus: det(g).norm(), threshold: 0.0 })?;
    Ok(ChristoffelTensor {
        gamma: dg.iter().map(|d| d * &ginv).collect(),
        at_point: pt.clone(),
    })
}

pub fn christoffel_at(model: &KernelModel, pt: &PolarizedPoint) -> Result<ChristoffelTensor> {
    let m = metric_at(model, pt)?;
    let dg = model.metric_derivative(pt)?;
    christoffel_from(&m.g, &dg, pt)
}

/// Max-norm finite-difference estimate of the curvature `dω − ω∧ω` of the
/// connection with `w̄` frozen at `p̄`, with central differences of step
/// `probe_scale` (second order). Every component is a `dz_k∧dz_l`
/// coefficient, so this vanishes identically in one dimension.
pub fn curvature_residual(model: &KernelModel, p: &CVec, z: &CVec, probe_scale: f64) -> Result<f64> {
    if !(probe_scale > 0.0) {
        return Err(Error::InvalidParameter("probe scale must be positive".into()));
    }
    let n = z.len();
    let gamma_at = |x: &CVec| -> Result<Vec<CMat>> {
        Ok(christoffel_at(model, &PolarizedPoint::frozen(x, p))?.gamma)
    };
    let center = gamma_at(z)?;
    // ∂_k Γ_l for all k, l.
    let mut dgamma: Vec<Vec<CMat>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += probe_scale;
        zm[k] -= probe_scale;
        let gp = gamma_at(&zp)?;
        let gm = gamma_at(&zm)?;
        let inv2h = Complex64::new(0.5 / probe_scale, 0.0);
        dgamma.push(gp.iter().zip(&gm).map(|(a, b)| (a - b) * inv2h).collect());
    }
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for l in (k + 1)..n {
            let omega = &dgamma[k][l] - &dgamma[l][k] - (&center[k] * &center[l] - &center[l] * &center[k]);
            worst = worst.max(max_abs(&omega));
        }
    }
    Ok(worst)
}

pub fn normalization_at(model: &KernelModel, p: &CVec) -> Result<NormalizationMatrix> {
    let g = model.metric(&PolarizedPoint::diag(p))?;
    let a = cholesky_lower(&g)?;
    let n = g.nrows();
    let sqrt_g_inv = a
        .clone()
        .solve_lower_triangular(&CMat::identity(n, n))
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(NormalizationMatrix { a, sqrt_g_inv })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernels::{DerivativeMode, DomainDescriptor};
    use crate::linalg::{c, cvec};

    fn catalog() -> Vec<DomainDescriptor> {
        vec![
            DomainDescriptor::Disk,
            DomainDescriptor::Ball { n: 2 },
            DomainDescriptor::Ball { n: 3 },
            DomainDescriptor::Polydisc { n: 2 },
            DomainDescriptor::Annulus { r: 0.3 },
            DomainDescriptor::Product {
                factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk],
            },
        ]
    }

    #[test]
    fn disk_metric_closed_form() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        for z in [c(0.0, 0.0), c(0.3, -0.4), c(-0.7, 0.1)] {
            let t = metric_at(&m, &PolarizedPoint::diag(&cvec(&[z]))).unwrap();
            let want = 2.0 / (1.0 - z.norm_sqr()).powi(2);
            assert!((t.g[(0, 0)].re - want).abs() < 1e-13 * want);
            assert!(t.is_positive_definite());
        }
    }

    #[test]
    fn ball_metric_at_origin() {
        for n in 1..=3 {
            let m = KernelModel::new(DomainDescriptor::Ball { n }).unwrap();
            let t = metric_at(&m, &PolarizedPoint::diag(&CVec::zeros(n))).unwrap();
            let want = CMat::identity(n, n) * c((n + 1) as f64, 0.0);
            assert!(max_abs(&(&t.g - want)) < 1e-14);
        }
    }

    #[test]
    fn product_metric_is_block_diagonal() {
        let d = DomainDescriptor::Product {
            factors: vec![DomainDescriptor::Annulus { r: 0.2 }, DomainDescriptor::Disk],
        };
        let m = KernelModel::new(d).unwrap();
        let ma = KernelModel::new(DomainDescriptor::Annulus { r: 0.2 }).unwrap();
        let md = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let z = cvec(&[c(0.5, 0.2), c(0.1, -0.3)]);
        let p = cvec(&[c(0.6, 0.0), c(-0.2, 0.1)]);
        let pt = PolarizedPoint::frozen(&z, &p);
        let g = metric_at(&m, &pt).unwrap().g;
        let ga = ma.metric(&PolarizedPoint::frozen(&cvec(&[z[0]]), &cvec(&[p[0]]))).unwrap();
        let gd = md.metric(&PolarizedPoint::frozen(&cvec(&[z[1]]), &cvec(&[p[1]]))).unwrap();
        assert!(g[(0, 1)].norm() < 1e-14 && g[(1, 0)].norm() < 1e-14);
        assert!((g[(0, 0)] - ga[(0, 0)]).norm() < 1e-12 * ga[(0, 0)].norm());
        assert!((g[(1, 1)] - gd[(0, 0)]).norm() < 1e-12 * gd[(0, 0)].norm());
        let gam = christoffel_at(&m, &pt).unwrap();
        assert!(gam.get(0, 1, 1).norm() < 1e-14 && gam.get(1, 0, 0).norm() < 1e-14);
        assert!(gam.get(0, 0, 1).norm() < 1e-14);
    }

    #[test]
    fn disk_christoffel_values() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let pt = PolarizedPoint::new(cvec(&[c(0.2, 0.0)]), cvec(&[c(0.5, 0.0)]));
        let g = christoffel_at(&m, &pt).unwrap();
        assert!((g.get(0, 0, 0) - c(1.0 / 0.9, 0.0)).norm() < 1e-14);
        for z in [c(0.3, 0.2), c(-0.8, 0.0)] {
            let g = christoffel_at(&m, &PolarizedPoint::frozen(&cvec(&[z]), &cvec(&[c(0.0, 0.0)]))).unwrap();
            assert_eq!(g.get(0, 0, 0), c(0.0, 0.0));
        }
    }

    #[test]
    fn christoffel_is_symmetric_and_fd_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in catalog() {
            let m = KernelModel::new(d.clone()).unwrap();
            let fd = m.clone().with_mode(DerivativeMode::FiniteDifference).with_fd_step(1e-6);
            for i in 0..50 {
                let z = d.sample_point(&mut rng, 0.1);
                let p = d.sample_point(&mut rng, 0.1);
                let pt = PolarizedPoint::frozen(&z, &p);
                let g = christoffel_at(&m, &pt).unwrap();
                assert!(g.max_asymmetry() < 1e-10, "{}", d.name());
                if i < 5 {
                    let gf = christoffel_at(&fd, &pt).unwrap();
                    for l in 0..d.dim() {
                        let e = max_abs(&(&g.gamma[l] - &gf.gamma[l])) / max_abs(&g.gamma[l]).max(1.0);
                        assert!(e < 1e-4, "{} fd christoffel {e:e}", d.name());
                    }
                }
            }
        }
    }

    #[test]
    fn curvature_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in catalog() {
            let m = KernelModel::new(d.clone()).unwrap();
            for _ in 0..10 {
                let z = d.sample_point(&mut rng, 0.1);
                let p = d.sample_point(&mut rng, 0.1);
                let res = curvature_residual(&m, &p, &z, 1e-4).unwrap();
                assert!(res < 1e-6, "{}: {res:e}", d.name());
            }
        }
    }

    #[test]
    fn curvature_residual_converges_at_second_order() {
        let m = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let p = cvec(&[c(0.3, 0.2), c(-0.2, 0.4)]);
        let z = cvec(&[c(-0.1, 0.3), c(0.25, -0.15)]);
        let r1 = curvature_residual(&m, &p, &z, 2e-2).unwrap();
        let r2 = curvature_residual(&m, &p, &z, 1e-2).unwrap();
        let ratio = r1 / r2;
        assert!((3.5..=4.5).contains(&ratio), "{r1:e} {r2:e} ratio {ratio}");
    }

    #[test]
    fn normalization_examples() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let nm = normalization_at(&m, &cvec(&[c(0.0, 0.0)])).unwrap();
        assert!((nm.a[(0, 0)] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((nm.sqrt_g_inv[(0, 0)] - c(1.0 / 2f64.sqrt(), 0.0)).norm() < 1e-15);
        let m2 = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let nm2 = normalization_at(&m2, &CVec::zeros(2)).unwrap();
        let want = CMat::identity(2, 2) * c(1.0 / 3f64.sqrt(), 0.0);
        assert!(max_abs(&(&nm2.sqrt_g_inv - want)) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [DomainDescriptor::Disk, DomainDescriptor::Ball { n: 3 }] {
            let m = KernelModel::new(d.clone()).unwrap();
            for _ in 0..20 {
                let p = d.sample_point(&mut rng, 0.05);
                let nm = normalization_at(&m, &p).unwrap();
                let g = m.metric(&PolarizedPoint::diag(&p)).unwrap();
                assert!(nm.defect(&g) < 1e-12);
            }
        }
    }

    #[test]
    fn polarized_metric_is_holomorphic() {
        // Cauchy–Riemann: ∂f/∂x + i ∂f/∂y = 0 in z and in w̄.
        let d = DomainDescriptor::Annulus { r: 0.3 };
        let m = KernelModel::new(d).unwrap();
        let z = cvec(&[c(0.4, 0.5)]);
        let w = cvec(&[c(0.7, -0.1)]);
        let h = 1e-5;
        for which in 0..2 {
            let f = |dx: Complex64| {
                let mut pt = PolarizedPoint::frozen(&z, &w);
                if which == 0 {
                    pt.z[0] += dx;
                } else {
                    pt.wbar[0] += dx;
                }
                m.metric(&pt).unwrap()[(0, 0)]
            };
            let fx = (f(c(h, 0.0)) - f(c(-h, 0.0))) / (2.0 * h);
            let fy = (f(c(0.0, h)) - f(c(0.0, -h))) / (2.0 * h);
            assert!((fx + c(0.0, 1.0) * fy).norm() < 1e-7 * fx.norm().max(1.0));
        }
    }

    #[test]
    fn singular_metric_detected() {
        // On the annulus, G(z, p̄) has zeros; the zeros module finds one and
        // metric_at must refuse it.
        let r = 0.02;
        let p = cvec(&[c(0.5, 0.0)]);
        let m = KernelModel::new(DomainDescriptor::Annulus { r }).unwrap();
        let wit = crate::zeros::product_gap_search(r, 0.5, 200).unwrap();
        let w = wit.witnesses.first().expect("witness");
        let err = metric_at(&m, &PolarizedPoint::frozen(&cvec(&[w.z]), &p)).unwrap_err();
        assert!(matches!(err, Error::SingularMetric { .. }));
    }
}
