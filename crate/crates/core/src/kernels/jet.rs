//! Closed-form kernel jets: `K` together with its polarized derivatives
//! `∂z K`, `∂w̄ K`, `∂z∂z K`, `∂z∂w̄ K` and `∂z∂z∂w̄ K`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::elliptic::{self, LatticeParams};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Which representation of the annulus kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnnulusRepr {
    /// `(℘(log λ) + η₁/ω₁)/(πλ)`.
    #[default]
    Weierstrass,
    /// `Σ_{n≠−1} (n+1)λⁿ/(π(1−r^{2n+2})) + λ⁻¹/(2π log(1/r))`.
    Laurent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub n: usize,
    pub k: Complex64,
    pub dz: Vec<Complex64>,
    pub dw: Vec<Complex64>,
    /// `dzz[j*n + l] = ∂z_j ∂z_l K`
    pub dzz: Vec<Complex64>,
    /// `dzw[j*n + k] = ∂z_j ∂w̄_k K`
    pub dzw: Vec<Complex64>,
    /// `dzzw[(j*n + l)*n + k] = ∂z_j ∂z_l ∂w̄_k K`
    pub dzzw: Vec<Complex64>,
}

impl Jet {
    fn zeros(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Jet {
            n,
            k: z,
            dz: vec![z; n],
            dw: vec![z; n],
            dzz: vec![z; n * n],
            dzw: vec![z; n * n],
            dzzw: vec![z; n * n * n],
        }
    }

    /// Derivative with respect to the listed `z` and `w̄` indices
    /// (at most two `z` and one `w̄`).
    pub fn get(&self, zs: &[usize], ws: &[usize]) -> Complex64 {
        let n = self.n;
        match (zs, ws) {
            ([], []) => self.k,
            ([j], []) => self.dz[*j],
            ([], [k]) => self.dw[*k],
            ([j, l], []) => self.dzz[j * n + l],
            ([j], [k]) => self.dzw[j * n + k],
            ([j, l], [k]) => self.dzzw[(j * n + l) * n + k],
            _ => unreachable!("jet order exceeded"),
        }
    }

    /// Jet of `K_a(z_a, w̄_a)·K_b(z_b, w̄_b)` in the concatenated variables.
    /// Variables are disjoint, so each mixed partial factors exactly.
    pub fn product(a: &Jet, b: &Jet) -> Jet {
        let n = a.n + b.n;
        let mut out = Jet::zeros(n);
        let split = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
            let mut ia = Vec::new();
            let mut ib = Vec::new();
            for &i in idx {
                if i < a.n {
                    ia.push(i);
                } else {
                    ib.push(i - a.n);
                }
            }
            (ia, ib)
        };
        let val = |zs: &[usize], ws: &[usize]| {
            let (za, zb) = split(zs);
            let (wa, wb) = split(ws);
            a.get(&za, &wa) * b.get(&zb, &wb)
        };
        out.k = val(&[], &[]);
        for j in 0..n {
            out.dz[j] = val(&[j], &[]);
            out.dw[j] = val(&[], &[j]);
            for l in 0..n {
                out.dzz[j * n + l] = val(&[j, l], &[]);
                out.dzw[j * n + l] = val(&[j], &[l]);
                for k in 0..n {
                    out.dzzw[(j * n + l) * n + k] = val(&[j, l], &[k]);
                }
            }
        }
        out
    }

    /// `∂w̄ log K = ∂w̄K / K`.
    pub fn grad_wbar_log(&self) -> CVec {
        CVec::from_iterator(self.n, self.dw.iter().map(|d| d / self.k))
    }

    /// `∂z log K = ∂zK / K`.
    pub fn grad_z_log(&self) -> CVec {
        CVec::from_iterator(self.n, self.dz.iter().map(|d| d / self.k))
    }

    /// `K·∂z∂w̄K − ∂zK·∂w̄K`, the numerator of the polarized metric.
    pub fn metric_numerator(&self) -> CMat {
        let n = self.n;
        CMat::from_fn(n, n, |j, k| self.k * self.dzw[j * n + k] - self.dz[j] * self.dw[k])
    }

    /// `g_{jk̄} = ∂²log K/∂z_j∂w̄_k`.
    pub fn metric(&self) -> CMat {
        self.metric_numerator() / (self.k * self.k)
    }

    /// `∂_l g_{jk̄}`, returned as one matrix per `l`.
    pub fn metric_derivative(&self) -> Vec<CMat> {
        let n = self.n;
        let k = self.k;
        let k2 = k * k;
        let k3 = k2 * k;
        (0..n)
            .map(|l| {
                CMat::from_fn(n, n, |j, m| {
                    let num = k * self.dzw[j * n + m] - self.dz[j] * self.dw[m];
                    let dnum = self.dz[l] * self.dzw[j * n + m] + k * self.dzzw[(j * n + l) * n + m]
                        - self.dzz[j * n + l] * self.dw[m]
                        - self.dz[j] * self.dzw[l * n + m];
                    dnum / k2 - 2.0 * self.dz[l] * num / k3
                })
            })
            .collect()
    }
}

/// Ball of dimension `n`: `K = n!/πⁿ · (1 − ⟨z, w̄⟩)^{−(n+1)}`.
pub fn ball_jet(n: usize, z: &[Complex64], w: &[Complex64]) -> Result<Jet> {
    let s: Complex64 = z.iter().zip(w).map(|(a, b)| a * b).sum();
    if s.norm() >= 1.0 {
        return Err(Error::OutsideDomain(format!(
            "ball kernel needs |<z,w>| < 1, got {}",
            s.norm()
        )));
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let c = fact / PI.powi(n as i32);
    let a = (n + 1) as f64;
    let base = Complex64::new(1.0, 0.0) - s;
    let inv = 1.0 / base;
    let p0 = c * inv.powf(a);
    let p1 = p0 * a * inv;
    let p2 = p1 * (a + 1.0) * inv;
    let p3 = p2 * (a + 2.0) * inv;

    let mut jet = Jet::zeros(n);
    jet.k = p0;
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    for j in 0..n {
        jet.dz[j] = p1 * w[j];
        jet.dw[j] = p1 * z[j];
        for l in 0..n {
            jet.dzz[j * n + l] = p2 * w[j] * w[l];
            jet.dzw[j * n + l] = p2 * w[j] * z[l] + p1 * delta(j, l);
            for k in 0..n {
                jet.dzzw[(j * n + l) * n + k] =
                    p3 * w[j] * w[l] * z[k] + p2 * (w[j] * delta(l, k) + w[l] * delta(j, k));
            }
        }
    }
    Ok(jet)
}

/// `F(λ)` and three derivatives for the annulus kernel `K(z, w̄) = F(z·w̄)`.
pub fn annulus_profile(lat: &LatticeParams, lambda: Complex64, repr: AnnulusRepr) -> Result<[Complex64; 4]> {
    let r = lat.r;
    let m = lambda.norm();
    if !(m > r * r && m < 1.0) {
        return Err(Error::OutsideDomain(format!(
            "annulus kernel needs r² < |λ| < 1, got |λ| = {m} (r = {r})"
        )));
    }
    match repr {
        AnnulusRepr::Weierstrass => weierstrass_profile(lat, lambda),
        AnnulusRepr::Laurent => Ok(laurent_profile(lat, lambda)),
    }
}

fn weierstrass_profile(lat: &LatticeParams, lambda: Complex64) -> Result<[Complex64; 4]> {
    // Principal log; the 2πi branch jump is the period 2ω₂, so ℘(log λ) is
    // single valued.
    let [p0, p1, p2, p3] = elliptic::wp_jet(lat, lambda.ln())?;
    let l = lambda;
    let h0 = p0 + lat.eta_ratio();
    let h1 = p1 / l;
    let h2 = (p2 - p1) / (l * l);
    let h3 = (p3 - 3.0 * p2 + 2.0 * p1) / (l * l * l);
    let u0 = 1.0 / (PI * l);
    let u1 = -u0 / l;
    let u2 = -2.0 * u1 / l;
    let u3 = -3.0 * u2 / l;
    Ok([
        h0 * u0,
        h1 * u0 + h0 * u1,
        h2 * u0 + 2.0 * h1 * u1 + h0 * u2,
        h3 * u0 + 3.0 * h2 * u1 + 3.0 * h1 * u2 + h0 * u3,
    ])
}

const LAURENT_MAX_TERMS: usize = 5_000_000;

fn laurent_profile(lat: &LatticeParams, lambda: Complex64) -> [Complex64; 4] {
    let r2 = lat.r * lat.r;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    // t0 = c·λⁿ and its first three derivatives.
    let add = |t0: Complex64, n: f64, out: &mut [Complex64; 4]| -> f64 {
        let t1 = t0 * n / lambda;
        let t2 = t1 * (n - 1.0) / lambda;
        let t3 = t2 * (n - 2.0) / lambda;
        out[0] += t0;
        out[1] += t1;
        out[2] += t2;
        out[3] += t3;
        t0.norm().max(t3.norm())
    };
    let done = |mag: f64, k: usize, out: &[Complex64; 4]| k > 4 && mag <= 1e-18 * out[0].norm().max(out[3].norm());
    add(Complex64::new(1.0 / (2.0 * PI * lat.omega1), 0.0) / lambda, -1.0, &mut out);
    // Non-negative powers.
    let mut pw = Complex64::new(1.0, 0.0);
    let mut r2pow = r2;
    for n in 0..LAURENT_MAX_TERMS {
        let nf = n as f64;
        let mag = add(pw * ((nf + 1.0) / (PI * (1.0 - r2pow))), nf, &mut out);
        if done(mag, n, &out) {
            break;
        }
        pw *= lambda;
        r2pow *= r2;
    }
    // Powers λ⁻ᵐ, m ≥ 2, with (n+1)/(1−r^{2n+2}) = (m−1)·r^{2m−2}/(1 − r^{2m−2}),
    // accumulated as (r²/λ)^{m−1}/λ to avoid overflow near |λ| = r².
    let q = r2 / lambda;
    let mut qp = q;
    let mut r2pow = r2;
    for m in 2..LAURENT_MAX_TERMS {
        let mf = m as f64;
        let mag = add(qp / lambda * ((mf - 1.0) / (PI * (1.0 - r2pow))), -mf, &mut out);
        if done(mag, m, &out) {
            break;
        }
        qp *= q;
        r2pow *= r2;
    }
    out
}

pub fn annulus_jet(lat: &LatticeParams, repr: AnnulusRepr, z: Complex64, w: Complex64) -> Result<Jet> {
    let lambda = z * w;
    let [f0, f1, f2, f3] = annulus_profile(lat, lambda, repr)?;
    let mut jet = Jet::zeros(1);
    jet.k = f0;
    jet.dz[0] = f1 * w;
    jet.dw[0] = f1 * z;
    jet.dzz[0] = f2 * w * w;
    jet.dzw[0] = lambda * f2 + f1;
    jet.dzzw[0] = f3 * lambda * w + 2.0 * f2 * w;
    Ok(jet)
}
