//! The Bergman representative map, normalized normal coordinates, the
//! holomorphic exponential map that inverts them, and affine charts at
//! other basepoints.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connection::{integrate_geodesic, GeodesicOptions, Terminal};
use crate::error::{Error, Result};
use crate::kernels::{Automorphism, KernelModel, PolarizedPoint};
use crate::linalg::{c, inverse, lstsq, sqrtm, CMat, CVec};
use crate::metric::normalization_at;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExphMethod {
    #[default]
    Newton,
    Ode,
}

/// Square-root convention for the off-diagonal factor of `exph_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartFactor {
    /// `(G(q,p̄)ᵀ)⁻¹`
    #[default]
    Raw,
    /// Inverse principal square root of `G(q,p̄)ᵀ`.
    Sqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExphResult {
    pub z: CVec,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// The representative chart at `p`, with the constant factor cached.
#[derive(Debug, Clone)]
pub struct RepCoordinates<'a> {
    pub model: &'a KernelModel,
    pub p: CVec,
    pub normalized: bool,
    /// `ζ = factor · (∂w̄ log K(z,p̄) − ∂w̄ log K(p,p̄))`
    pub factor: CMat,
    base: CVec,
}

impl<'a> RepCoordinates<'a> {
    pub fn new(model: &'a KernelModel, p: &CVec, normalized: bool) -> Result<Self> {
        check_point(model, p)?;
        let diag = PolarizedPoint::diag(p);
        let factor = if normalized {
            normalization_at(model, p)?.sqrt_g_inv.map(|x| x.conj())
        } else {
            let g = model.metric(&diag)?;
            inverse(&g.transpose()).ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?
        };
        let base = model.grad_wbar_log(&diag)?;
        Ok(RepCoordinates { model, p: p.clone(), normalized, factor, base })
    }

    /// `∂w̄ log K(z,p̄) − ∂w̄ log K(p,p̄)`
    pub fn bracket(&self, z: &CVec) -> Result<CVec> {
        check_point(self.model, z)?;
        Ok(self.model.grad_wbar_log(&PolarizedPoint::frozen(z, &self.p))? - &self.base)
    }

    pub fn eval(&self, z: &CVec) -> Result<CVec> {
        Ok(&self.factor * self.bracket(z)?)
    }

    /// `∂ζ/∂z = factor · G(z,p̄)ᵀ`
    pub fn jacobian(&self, z: &CVec) -> Result<CMat> {
        check_point(self.model, z)?;
        let g = self.model.metric(&PolarizedPoint::frozen(z, &self.p))?;
        Ok(&self.factor * g.transpose())
    }

    /// Damped Newton solve of `rep_p(z) = ζ`.
    pub fn invert(&self, zeta: &CVec, tol: f64) -> Result<ExphResult> {
        let j0 = self.jacobian(&self.p)?;
        let step0 = j0.lu().solve(zeta).ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
        let scale = 1.0 + zeta.norm();
        let mut z = &self.p + &step0;
        let mut res = match self.eval(&z) {
            Ok(v) => (v - zeta).norm(),
            Err(_) => {
                z = self.p.clone();
                zeta.norm()
            }
        };
        for it in 0..=NEWTON_MAX_ITER {
            if res <= tol * scale {
                return Ok(ExphResult { z, converged: true, iterations: it, residual: res });
            }
            if it == NEWTON_MAX_ITER {
                break;
            }
            let f = self.eval(&z)? - zeta;
            let jac = self.jacobian(&z)?;
            let dz = jac.lu().solve(&f).ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial = &z - &dz * c(lambda, 0.0);
                if let Ok(v) = self.eval(&trial) {
                    let r = (v - zeta).norm();
                    if r < res {
                        z = trial;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Ok(ExphResult { z, converged: false, iterations: it + 1, residual: res });
            }
        }
        Ok(ExphResult { z, converged: false, iterations: NEWTON_MAX_ITER, residual: res })
    }
}

fn check_point(model: &KernelModel, z: &CVec) -> Result<()> {
    let n = model.dim();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    if !model.domain().contains(z.as_slice()) {
        return Err(Error::OutsideDomain(format!("{:?} not in {}", z.as_slice(), model.domain().name())));
    }
    Ok(())
}

pub fn rep_map(model: &KernelModel, p: &CVec, z: &CVec, normalized: bool) -> Result<CVec> {
    RepCoordinates::new(model, p, normalized)?.eval(z)
}

/// Holomorphic exponential at `p` in raw coordinates.
pub fn exph(model: &KernelModel, p: &CVec, zeta: &CVec, method: ExphMethod) -> Result<ExphResult> {
    exph_with(model, p, zeta, method, false, DEFAULT_NEWTON_TOL)
}

pub fn exph_with(
    model: &KernelModel,
    p: &CVec,
    zeta: &CVec,
    method: ExphMethod,
    normalized: bool,
    tol: f64,
) -> Result<ExphResult> {
    let rc = RepCoordinates::new(model, p, normalized)?;
    if zeta.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: zeta.len() });
    }
    match method {
        ExphMethod::Newton => rc.invert(zeta, tol),
        ExphMethod::Ode => {
            let v0 = rc
                .jacobian(p)?
                .lu()
                .solve(zeta)
                .ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
            let trace = integrate_geodesic(model, p, p, &v0, 1.0, &GeodesicOptions::default())?;
            let last = trace.samples.last().expect("trace has a start sample");
            let residual = match rc.eval(&last.z) {
                Ok(v) => (v - zeta).norm(),
                Err(_) => f64::INFINITY,
            };
            Ok(ExphResult {
                z: last.z.clone(),
                converged: trace.terminal == Terminal::Completed,
                iterations: trace.samples.len() - 1,
                residual,
            })
        }
    }
}

/// Affine coordinate of `z` in the chart of `∇ᵖ` centred at `q`.
pub fn exph_q_inverse(model: &KernelModel, p: &CVec, q: &CVec, z: &CVec, factor: ChartFactor) -> Result<CVec> {
    check_point(model, p)?;
    check_point(model, q)?;
    check_point(model, z)?;
    let gq = crate::metric::metric_at(model, &PolarizedPoint::frozen(q, p))?.g.transpose();
    let m = match factor {
        ChartFactor::Raw => inverse(&gq),
        ChartFactor::Sqrt => inverse(&sqrtm(&gq)?),
    }
    .ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
    let bz = model.grad_wbar_log(&PolarizedPoint::frozen(z, p))?;
    let bq = model.grad_wbar_log(&PolarizedPoint::frozen(q, p))?;
    Ok(m * (bz - bq))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityReport {
    /// Max row deviation of the best ℂ-linear fit.
    pub residual: f64,
    /// Same for the best conjugate-linear fit `η ≈ L·ζ̄`.
    pub conjugate_residual: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub samples: usize,
    pub rejected: usize,
}

impl LinearityReport {
    pub fn conjugate_ratio(&self) -> f64 {
        self.conjugate_residual / self.residual.max(f64::MIN_POSITIVE)
    }
}

/// Fit `rep_{f(p)} ∘ f ∘ rep_p⁻¹` by a ℂ-linear map on random `ζ` around 0.
pub fn verify_linearity(
    model: &KernelModel,
    f: &Automorphism,
    p: &CVec,
    samples: usize,
    seed: u64,
) -> Result<LinearityReport> {
    if !f.preserves(model.domain()) {
        return Err(Error::Unsupported(format!("{f:?} is not an automorphism of {}", model.domain().name())));
    }
    if samples < model.dim() {
        return Err(Error::InvalidParameter("need at least n samples".into()));
    }
    let n = model.dim();
    let src = RepCoordinates::new(model, p, false)?;
    let fp = f.apply(p);
    let dst = RepCoordinates::new(model, &fp, false)?;
    let radius = 0.5 * model.domain().depth(p.as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<CVec> = Vec::with_capacity(samples);
    let mut ys: Vec<CVec> = Vec::with_capacity(samples);
    let mut rejected = 0;
    while xs.len() < samples {
        if rejected > samples {
            return Err(Error::SamplingFailed { failed: rejected, total: rejected + xs.len() });
        }
        let zeta = CVec::from_fn(n, |_, _| {
            Complex64::from_polar(radius * rng.random::<f64>().sqrt() / (n as f64).sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
        });
        let Ok(ex) = src.invert(&zeta, DEFAULT_NEWTON_TOL) else {
            rejected += 1;
            continue;
        };
        if !ex.converged {
            rejected += 1;
            continue;
        }
        match dst.eval(&f.apply(&ex.z)) {
            Ok(eta) => {
                xs.push(zeta);
                ys.push(eta);
            }
            Err(_) => rejected += 1,
        }
    }
    let m = xs.len();
    let x = CMat::from_fn(m, n, |i, j| xs[i][j]);
    let y = CMat::from_fn(m, n, |i, j| ys[i][j]);
    let fit = |x: &CMat| -> Result<(f64, CMat)> {
        let lt = lstsq(x, &y)?;
        let resid = &y - x * &lt;
        let worst = (0..m).map(|i| resid.row(i).norm()).fold(0.0, f64::max);
        Ok((worst, lt.transpose()))
    };
    let (residual, l) = fit(&x)?;
    let (conjugate_residual, _) = fit(&x.map(|v| v.conj()))?;
    Ok(LinearityReport {
        residual,
        conjugate_residual,
        matrix: (0..n).map(|i| (0..n).map(|j| [l[(i, j)].re, l[(i, j)].im]).collect()).collect(),
        samples: m,
        rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalCoordinateResiduals {
    /// `max |g̃(0) − I|`
    pub metric_identity: f64,
    /// `max |∂ζ g̃(0)|` over all directions.
    pub first_derivative: f64,
    /// `max |∂ζᵣ∂ζₛ g̃(0)|`
    pub pure_second: f64,
    /// `max |∂ζᵣ∂ζ̄ₛ g̃(0)|`; curvature, not expected to vanish.
    pub mixed_second: f64,
}

/// Pulls the diagonal metric back through `exph_p` in normalized coordinates
/// and differentiates at `ζ = 0` with central differences of step `h`.
pub fn verify_normal_coordinates(model: &KernelModel, p: &CVec, h: f64) -> Result<NormalCoordinateResiduals> {
    let n = model.dim();
    let rc = RepCoordinates::new(model, p, true)?;
    // Real coordinates x = (Re ζ₁, Im ζ₁, …).
    let pulled = |x: &[f64]| -> Result<CMat> {
        let zeta = CVec::from_fn(n, |j, _| c(x[2 * j], x[2 * j + 1]));
        let ex = rc.invert(&zeta, 1e-14)?;
        if !ex.converged {
            return Err(Error::NotConverged(format!("exph residual {:e}", ex.residual)));
        }
        let jac = rc.jacobian(&ex.z)?;
        let phi = inverse(&jac).ok_or(Error::SingularMetric { modulus: 0.0, threshold: 0.0 })?;
        let g = model.metric(&PolarizedPoint::diag(&ex.z))?;
        Ok(phi.transpose() * g * phi.map(|v| v.conj()))
    };
    let dim = 2 * n;
    let origin = vec![0.0; dim];
    let g0 = pulled(&origin)?;
    let shifted = |steps: &[(usize, f64)]| -> Result<CMat> {
        let mut x = origin.clone();
        for &(i, s) in steps {
            x[i] += s;
        }
        pulled(&x)
    };
    // Real first and second partials.
    let mut d1: Vec<CMat> = Vec::with_capacity(dim);
    for a in 0..dim {
        d1.push((shifted(&[(a, h)])? - shifted(&[(a, -h)])?) * c(0.5 / h, 0.0));
    }
    let mut d2 = vec![vec![CMat::zeros(n, n); dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let v = if a == b {
                (shifted(&[(a, h)])? - &g0 * c(2.0, 0.0) + shifted(&[(a, -h)])?) * c(1.0 / (h * h), 0.0)
            } else {
                (shifted(&[(a, h), (b, h)])? - shifted(&[(a, h), (b, -h)])? - shifted(&[(a, -h), (b, h)])?
                    + shifted(&[(a, -h), (b, -h)])?)
                    * c(0.25 / (h * h), 0.0)
            };
            d2[a][b] = v.clone();
            d2[b][a] = v;
        }
    }
    let i = c(0.0, 1.0);
    let half = c(0.5, 0.0);
    let quarter = c(0.25, 0.0);
    let mut first: f64 = 0.0;
    let mut pure: f64 = 0.0;
    let mut mixed: f64 = 0.0;
    let norm = |m: &CMat| m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for r in 0..n {
        let (xr, yr) = (2 * r, 2 * r + 1);
        let dzeta = (&d1[xr] - &d1[yr] * i) * half;
        let dzetabar = (&d1[xr] + &d1[yr] * i) * half;
        first = first.max(norm(&dzeta)).max(norm(&dzetabar));
        for s in 0..n {
            let (xs, ys) = (2 * s, 2 * s + 1);
            // (∂x_r − i∂y_r)(∂x_s ∓ i∂y_s)/4
            let pure_rs = (&d2[xr][xs] - &d2[yr][ys] - (&d2[xr][ys] + &d2[yr][xs]) * i) * quarter;
            let mixed_rs = (&d2[xr][xs] + &d2[yr][ys] + (&d2[xr][ys] - &d2[yr][xs]) * i) * quarter;
            pure = pure.max(norm(&pure_rs));
            mixed = mixed.max(norm(&mixed_rs));
        }
    }
    Ok(NormalCoordinateResiduals {
        metric_identity: norm(&(g0 - CMat::identity(n, n))),
        first_derivative: first,
        pure_second: pure,
        mixed_second: mixed,
    })
}
