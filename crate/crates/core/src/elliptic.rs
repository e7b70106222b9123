//! Weierstrass functions for the rectangular lattice with half periods
//! `ω₁ = log(1/r)` and `ω₂ = πi`.
//!
//! Everything is evaluated from the nome expansions in `v = πu/(2ω₁)`,
//! `q = exp(-π²/ω₁)`:
//!
//! ```text
//! ℘(u)  = -η₁/ω₁ + (π/2ω₁)² [ csc²v − 8 Σ n q²ⁿ/(1−q²ⁿ) cos 2nv ]
//! ℘'(u) =          (π/2ω₁)³ [ −2 csc²v cot v + 16 Σ n² q²ⁿ/(1−q²ⁿ) sin 2nv ]
//! ζ(u)  =  η₁u/ω₁ + (π/2ω₁)  [ cot v + 4 Σ q²ⁿ/(1−q²ⁿ) sin 2nv ]
//! ```
//!
//! Arguments are first reduced into the centred cell `(-ω₁, ω₁] × (-π, π]`
//! so that the Fourier terms decay like `qⁿ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_POLE_GUARD: f64 = 1e-8;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 64;

const SERIES_RTOL: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeParams {
    /// Annulus inner radius the lattice was built from.
    pub r: f64,
    pub omega1: f64,
    pub omega2: Complex64,
    pub eta1: Complex64,
    /// ζ-increment over `2ω₂`, computed independently of the Legendre relation.
    pub eta2: Complex64,
    pub nome_q: f64,
    pub g2: Complex64,
    pub g3: Complex64,
    pub pole_guard: f64,
}

/// Values of ℘, ℘′ and ζ at one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeierstrassValues {
    pub wp: Complex64,
    pub wp_prime: Complex64,
    pub zeta: Complex64,
}

fn sum_series<F>(mut term: F) -> Result<Complex64>
where
    F: FnMut(usize) -> Complex64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 1..=MAX_TERMS {
        let t = term(n);
        sum += t;
        let scale = sum.norm().max(f64::MIN_POSITIVE);
        if t.norm() <= SERIES_RTOL * scale {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNotConverged { terms: MAX_TERMS })
}

fn lambert(q2n: f64, k: i32, n: usize) -> f64 {
    (n as f64).powi(k) * q2n / (1.0 - q2n)
}

fn real_series<F>(mut term: F) -> Result<f64>
where
    F: FnMut(usize) -> f64,
{
    sum_series(|n| Complex64::new(term(n), 0.0)).map(|s| s.re)
}

pub fn make_lattice(r: f64) -> Result<LatticeParams> {
    make_lattice_with_guard(r, DEFAULT_POLE_GUARD)
}

pub fn make_lattice_with_guard(r: f64, pole_guard: f64) -> Result<LatticeParams> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "annulus radius must lie in (0,1), got {r}"
        )));
    }
    if !(pole_guard > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pole guard must be positive, got {pole_guard}"
        )));
    }
    let omega1 = (1.0 / r).ln();
    let q = (-PI * PI / omega1).exp();
    let q2 = q * q;

    // Lambert series Σ nᵏ q²ⁿ/(1−q²ⁿ) = Σ σ_k(m) q²ᵐ.
    let s1 = real_series(|n| lambert(q2.powi(n as i32), 1, n))?;
    let s3 = real_series(|n| lambert(q2.powi(n as i32), 3, n))?;
    let s5 = real_series(|n| lambert(q2.powi(n as i32), 5, n))?;

    let eta1 = PI * PI / (12.0 * omega1) * (1.0 - 24.0 * s1);
    let e4 = 1.0 + 240.0 * s3;
    let e6 = 1.0 - 504.0 * s5;
    let g2 = PI.powi(4) / (12.0 * omega1.powi(4)) * e4;
    let g3 = PI.powi(6) / (216.0 * omega1.powi(6)) * e6;

    let mut lat = LatticeParams {
        r,
        omega1,
        omega2: Complex64::new(0.0, PI),
        eta1: Complex64::new(eta1, 0.0),
        eta2: Complex64::new(0.0, 0.0),
        nome_q: q,
        g2: Complex64::new(g2, 0.0),
        g3: Complex64::new(g3, 0.0),
        pole_guard,
    };
    // ω₂ already sits on the boundary of the centred cell, so the raw series
    // value is ζ(ω₂) = η₂ with no quasi-period correction.
    lat.eta2 = zeta_series(&lat, lat.omega2)?;
    Ok(lat)
}

impl LatticeParams {
    /// `η₁/ω₁`, the additive constant in the annulus kernel.
    pub fn eta_ratio(&self) -> f64 {
        self.eta1.re / self.omega1
    }

    /// `|η₁ω₂ − η₂ω₁ − πi/2|`.
    pub fn legendre_residual(&self) -> f64 {
        (self.eta1 * self.omega2 - self.eta2 * self.omega1 - Complex64::new(0.0, PI / 2.0)).norm()
    }

    /// Reduce `u` into the centred fundamental cell; returns the reduced
    /// argument and the period multiples `(m, k)` with `u = ũ + 2mω₁ + 2kω₂`.
    pub fn reduce(&self, u: Complex64) -> (Complex64, i64, i64) {
        let m = (u.re / (2.0 * self.omega1)).round();
        let k = (u.im / (2.0 * PI)).round();
        let red = Complex64::new(u.re - 2.0 * m * self.omega1, u.im - 2.0 * k * PI);
        (red, m as i64, k as i64)
    }

    fn guarded(&self, u: Complex64) -> Result<(Complex64, i64, i64)> {
        if !(u.re.is_finite() && u.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite argument {u}")));
        }
        let (red, m, k) = self.reduce(u);
        let d = red.norm();
        if d < self.pole_guard {
            return Err(Error::PoleProximity {
                distance: d,
                guard: self.pole_guard,
            });
        }
        Ok((red, m, k))
    }

    fn half_scale(&self) -> f64 {
        PI / (2.0 * self.omega1)
    }
}

fn wp_series(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let c = lat.half_scale();
    let v = u * c;
    let s = v.sin();
    let q2 = lat.nome_q * lat.nome_q;
    let tail = sum_series(|n| (2.0 * n as f64 * v).cos() * lambert(q2.powi(n as i32), 1, n))?;
    Ok(-lat.eta_ratio() + c * c * (1.0 / (s * s) - 8.0 * tail))
}

fn wp_prime_series(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let c = lat.half_scale();
    let v = u * c;
    let s = v.sin();
    let q2 = lat.nome_q * lat.nome_q;
    let tail = sum_series(|n| (2.0 * n as f64 * v).sin() * lambert(q2.powi(n as i32), 2, n))?;
    Ok(c * c * c * (-2.0 * v.cos() / (s * s * s) + 16.0 * tail))
}

fn zeta_series(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let c = lat.half_scale();
    let v = u * c;
    let q2 = lat.nome_q * lat.nome_q;
    let tail = sum_series(|n| (2.0 * n as f64 * v).sin() * lambert(q2.powi(n as i32), 0, n))?;
    Ok(lat.eta1 * u / lat.omega1 + c * (v.cos() / v.sin() + 4.0 * tail))
}

pub fn wp(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let (red, _, _) = lat.guarded(u)?;
    wp_series(lat, red)
}

pub fn wp_prime(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let (red, _, _) = lat.guarded(u)?;
    wp_prime_series(lat, red)
}

pub fn w_zeta(lat: &LatticeParams, u: Complex64) -> Result<Complex64> {
    let (red, m, k) = lat.guarded(u)?;
    let z = zeta_series(lat, red)?;
    Ok(z + 2.0 * (m as f64) * lat.eta1 + 2.0 * (k as f64) * lat.eta2)
}

/// ℘ and its first three derivatives at `u`, using ℘'' = 6℘² − g₂/2 and
/// ℘''' = 12℘℘'.
pub fn wp_jet(lat: &LatticeParams, u: Complex64) -> Result<[Complex64; 4]> {
    let (red, _, _) = lat.guarded(u)?;
    let p = wp_series(lat, red)?;
    let p1 = wp_prime_series(lat, red)?;
    let p2 = 6.0 * p * p - lat.g2 / 2.0;
    let p3 = 12.0 * p * p1;
    Ok([p, p1, p2, p3])
}

pub fn evaluate(lat: &LatticeParams, u: Complex64) -> Result<WeierstrassValues> {
    Ok(WeierstrassValues {
        wp: wp(lat, u)?,
        wp_prime: wp_prime(lat, u)?,
        zeta: w_zeta(lat, u)?,
    })
}


#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn samples() -> Vec<Complex64> {
        vec![
            c(0.37, 0.21),
            c(-1.1, 2.3),
            c(0.9, -1.7),
            c(1.9, 0.4),
            c(-0.2, -2.9),
            c(0.05, 3.0),
            c(2.2, -0.6),
            c(-1.7, 1.1),
            c(0.61, 1.4),
            c(-0.8, -0.35),
        ]
    }

    #[test]
    fn half_period_and_nome() {
        let lat = make_lattice(0.1).unwrap();
        assert!((lat.omega1 - 10f64.ln()).abs() < 1e-15);
        assert_eq!(lat.omega2, c(0.0, PI));
        // exp(−π²/ln 10) evaluated independently.
        let expected = (-(PI * PI) / std::f64::consts::LN_10).exp();
        assert!((lat.nome_q - expected).abs() < 1e-17);
        // mpmath, 30 digits: exp(-pi^2/log(10)) = 0.0137555248271465345...
        assert!((lat.nome_q - 0.013_755_524_827_146_534).abs() < 1e-16);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(make_lattice(0.0).is_err());
        assert!(make_lattice(1.0).is_err());
        assert!(make_lattice(-0.3).is_err());
        assert!(make_lattice(f64::NAN).is_err());
    }

    #[test]
    fn legendre_relation() {
        for r in [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9] {
            let lat = make_lattice(r).unwrap();
            assert!(lat.legendre_residual() < 1e-10, "r={r}: {}", lat.legendre_residual());
            assert!(lat.g2.im == 0.0 && lat.g3.im == 0.0);
        }
    }

    #[test]
    fn agrees_with_lattice_sum() {
        for r in [0.1, 0.3] {
            let lat = make_lattice(r).unwrap();
            for u in samples() {
                let (red, _, _) = lat.reduce(u);
                let want = oracle::wp_lattice(&lat, red);
                let got = wp(&lat, u).unwrap();
                assert!((got - want).norm() < 1e-8 * want.norm().max(1.0), "r={r} u={u}: {got} vs {want}");
                let want_d = oracle::wp_prime_lattice(&lat, red);
                let got_d = wp_prime(&lat, u).unwrap();
                assert!((got_d - want_d).norm() < 1e-8 * want_d.norm().max(1.0), "wp' u={u}: {got_d} vs {want_d}");
            }
        }
    }

    #[test]
    fn differential_equation_holds() {
        let lat = make_lattice(0.2).unwrap();
        for u in samples() {
            let p = wp(&lat, u).unwrap();
            let d = wp_prime(&lat, u).unwrap();
            let rhs = 4.0 * p * p * p - lat.g2 * p - lat.g3;
            assert!((d * d - rhs).norm() < 1e-9 * rhs.norm().max(1.0), "u={u}");
        }
    }

    #[test]
    fn real_values_at_half_periods() {
        let lat = make_lattice(0.1).unwrap();
        let w1 = c(lat.omega1, 0.0);
        for u in [w1, lat.omega2, w1 + lat.omega2] {
            assert!(wp(&lat, u).unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_quasi_periods() {
        let lat = make_lattice(0.25).unwrap();
        let u = c(0.3, 0.7);
        let z0 = w_zeta(&lat, u).unwrap();
        let z1 = w_zeta(&lat, u + 2.0 * lat.omega1).unwrap();
        let z2 = w_zeta(&lat, u + 2.0 * lat.omega2).unwrap();
        assert!((z1 - z0 - 2.0 * lat.eta1).norm() < 1e-10);
        assert!((z2 - z0 - 2.0 * lat.eta2).norm() < 1e-10);
        // ζ' = −℘, checked by a central difference.
        let h = 1e-5;
        let dz = (w_zeta(&lat, u + h).unwrap() - w_zeta(&lat, u - h).unwrap()) / (2.0 * h);
        assert!((dz + wp(&lat, u).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn pole_guard_trips() {
        let lat = make_lattice(0.1).unwrap();
        let err = wp(&lat, c(2.0 * lat.omega1 + 1e-10, 0.0)).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
        assert!(w_zeta(&lat, lat.omega2 * 2.0).is_err());
        let loose = make_lattice_with_guard(0.1, 1e-3).unwrap();
        assert!(wp(&loose, c(5e-4, 0.0)).is_err());
        assert!(wp(&lat, c(5e-4, 0.0)).is_ok());
    }

    #[test]
    fn tiny_radius_hits_term_cap() {
        // q → 1 as r → 0; the series can no longer converge in 64 terms.
        let err = make_lattice(1e-12).unwrap_err();
        assert!(matches!(err, Error::SeriesNotConverged { .. }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]
            #[test]
            fn periodic_even_and_conjugate(
                r in 0.05f64..0.8,
                x in -3.0f64..3.0,
                y in -3.0f64..3.0,
            ) {
                let lat = make_lattice(r).unwrap();
                let u = c(x, y);
                prop_assume!(lat.reduce(u).0.norm() > 1e-2);
                let p = wp(&lat, u).unwrap();
                let scale = p.norm().max(1.0);
                let p1 = wp(&lat, u + 2.0 * lat.omega1).unwrap();
                let p2 = wp(&lat, u + 2.0 * lat.omega2).unwrap();
                prop_assert!((p1 - p).norm() < 1e-10 * scale);
                prop_assert!((p2 - p).norm() < 1e-10 * scale);
                prop_assert!((wp(&lat, -u).unwrap() - p).norm() < 1e-10 * scale);
                prop_assert!((wp(&lat, u.conj()).unwrap() - p.conj()).norm() < 1e-10 * scale);
                let d = wp_prime(&lat, u).unwrap();
                let dscale = d.norm().max(1.0);
                prop_assert!((wp_prime(&lat, -u).unwrap() + d).norm() < 1e-10 * dscale);
                let rhs = 4.0 * p * p * p - lat.g2 * p - lat.g3;
                prop_assert!((d * d - rhs).norm() < 1e-9 * rhs.norm().max(1.0));
            }
        }
    }
}
