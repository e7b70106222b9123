//! Finite-rank kernel approximation from Cholesky-orthonormalized monomials.
//!
//! Inner products are computed by quadrature: Gauss–Legendre in the radius
//! and the trapezoid rule in the angle, per coordinate. Polydisc Gram
//! entries factor coordinatewise.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use super::{DomainDescriptor, PolarizedPoint};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, CMat, CVec};

const MAX_CONDITION: f64 = 1e15;

#[derive(Debug, Clone)]
pub struct GramKernel {
    pub domain: DomainDescriptor,
    /// Monomial exponents, one entry per coordinate (negative allowed on the annulus).
    pub basis: Vec<Vec<i32>>,
    /// Lower Cholesky factor `L` of the Gram matrix, `Gram = L·Lᴴ`.
    pub gram_chol: CMat,
    linv: CMat,
    /// Radial Gauss–Legendre nodes and weights on the radial interval.
    pub radial_nodes: Vec<(f64, f64)>,
    pub angular_nodes: usize,
    pub condition: f64,
}

fn radial_interval(domain: &DomainDescriptor) -> Result<(f64, f64)> {
    match domain {
        DomainDescriptor::Disk | DomainDescriptor::Polydisc { .. } => Ok((0.0, 1.0)),
        DomainDescriptor::Annulus { r } => Ok((*r, 1.0)),
        other => Err(Error::Unsupported(format!(
            "Gram kernel needs a monomial-dense domain (disk, annulus, polydisc), got {}",
            other.name()
        ))),
    }
}

fn basis_for(domain: &DomainDescriptor, cap: usize) -> Vec<Vec<i32>> {
    let cap = cap as i32;
    match domain {
        DomainDescriptor::Disk => (0..=cap).map(|k| vec![k]).collect(),
        DomainDescriptor::Annulus { .. } => (-cap..=cap).map(|k| vec![k]).collect(),
        DomainDescriptor::Polydisc { n } => {
            // Total degree ≤ cap.
            let mut out: Vec<Vec<i32>> = vec![vec![]];
            for _ in 0..*n {
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        let used: i32 = prefix.iter().sum();
                        (0..=cap - used).map(move |k| {
                            let mut v = prefix.clone();
                            v.push(k);
                            v
                        })
                    })
                    .collect();
            }
            out
        }
        _ => Vec::new(),
    }
}

pub fn build_gram_kernel(domain: &DomainDescriptor, degree_cap: usize, quad_resolution: usize) -> Result<GramKernel> {
    domain.validate()?;
    let (a, b) = radial_interval(domain)?;
    let resolution = NonZeroUsize::new(quad_resolution)
        .ok_or_else(|| Error::InvalidParameter("quadrature resolution must be positive".into()))?;
    let rule = GaussLegendre::new(resolution);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let radial_nodes: Vec<(f64, f64)> = rule
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();

    let basis = basis_for(domain, degree_cap);
    let span = 2 * degree_cap + 1;
    let angular_nodes = (2 * quad_resolution).max(span + 1);

    // One-dimensional inner products ⟨z^α, z^β⟩ for α, β ∈ [lo, hi].
    let lo = basis.iter().flatten().copied().min().unwrap_or(0);
    let hi = basis.iter().flatten().copied().max().unwrap_or(0);
    let width = (hi - lo + 1) as usize;
    let dtheta = 2.0 * PI / angular_nodes as f64;
    let mut table = vec![Complex64::new(0.0, 0.0); width * width];
    for (ia, alpha) in (lo..=hi).enumerate() {
        for (ib, beta) in (lo..=hi).enumerate() {
            let mut radial = 0.0;
            for &(rho, w) in &radial_nodes {
                radial += w * rho.powi(alpha + beta + 1);
            }
            let mut angular = Complex64::new(0.0, 0.0);
            for t in 0..angular_nodes {
                angular += Complex64::from_polar(1.0, (alpha - beta) as f64 * t as f64 * dtheta);
            }
            table[ia * width + ib] = radial * angular * dtheta;
        }
    }

    let nb = basis.len();
    let gram = CMat::from_fn(nb, nb, |i, j| {
        basis[i]
            .iter()
            .zip(&basis[j])
            .map(|(&x, &y)| table[(x - lo) as usize * width + (y - lo) as usize])
            .product()
    });
    // Symmetrize away quadrature roundoff before factoring.
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let l = cholesky_lower(&gram).map_err(|_| Error::IllConditionedGram { condition: f64::INFINITY })?;
    let diag: Vec<f64> = (0..nb).map(|i| l[(i, i)].norm()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = (dmax / dmin).powi(2);
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditionedGram { condition });
    }
    let linv = l
        .clone()
        .solve_lower_triangular(&CMat::identity(nb, nb))
        .ok_or(Error::IllConditionedGram { condition })?;
    Ok(GramKernel {
        domain: domain.clone(),
        basis,
        gram_chol: l,
        linv,
        radial_nodes,
        angular_nodes,
        condition,
    })
}

fn monomials(basis: &[Vec<i32>], x: &CVec) -> CVec {
    CVec::from_iterator(
        basis.len(),
        basis.iter().map(|alpha| alpha.iter().zip(x.iter()).map(|(&k, v)| v.powi(k)).product::<Complex64>()),
    )
}

/// `Σⱼ φⱼ(z)·φⱼ(w)‾` over the orthonormalized basis, with `φⱼ(w)‾` evaluated
/// as a holomorphic function of `w̄`.
pub fn gram_kernel_eval(gk: &GramKernel, pt: &PolarizedPoint) -> Result<Complex64> {
    let n = gk.domain.dim();
    if pt.z.len() != n || pt.wbar.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pt.z.len() });
    }
    let u = &gk.linv * monomials(&gk.basis, &pt.z);
    let v = gk.linv.map(|x| x.conj()) * monomials(&gk.basis, &pt.wbar);
    Ok(u.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
}
