use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DomainDescriptor, KernelModel, PolarizedPoint};
use crate::error::{Error, Result};
use crate::linalg::{det, CMat, CVec};

/// Built-in biholomorphisms of catalog domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Automorphism {
    Identity,
    /// `z ↦ e^{iθ}(z − a)/(1 − āz)` on the disk.
    DiskMobius { a: Complex64, theta: f64 },
    /// `z ↦ e^{iθ}z` on the disk or an annulus.
    Rotation { theta: f64 },
    /// `z ↦ r/z` on the annulus of inner radius `r`.
    AnnulusInversion { r: f64 },
}

impl Automorphism {
    /// Whether this map is an automorphism of `domain`.
    pub fn preserves(&self, domain: &DomainDescriptor) -> bool {
        match (self, domain) {
            (Automorphism::Identity, _) => true,
            (Automorphism::DiskMobius { a, .. }, DomainDescriptor::Disk) => a.norm() < 1.0,
            (Automorphism::Rotation { .. }, DomainDescriptor::Disk | DomainDescriptor::Annulus { .. }) => true,
            (Automorphism::AnnulusInversion { r }, DomainDescriptor::Annulus { r: ra }) => r == ra,
            _ => false,
        }
    }

    fn scalar(&self, z: Complex64) -> [Complex64; 3] {
        match *self {
            Automorphism::Identity => [z, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Automorphism::DiskMobius { a, theta } => {
                let e = Complex64::from_polar(1.0, theta);
                let den = 1.0 - a.conj() * z;
                let s = 1.0 - a.norm_sqr();
                [
                    e * (z - a) / den,
                    e * s / (den * den),
                    2.0 * a.conj() * e * s / (den * den * den),
                ]
            }
            Automorphism::Rotation { theta } => {
                let e = Complex64::from_polar(1.0, theta);
                [e * z, e, Complex64::new(0.0, 0.0)]
            }
            Automorphism::AnnulusInversion { r } => [r / z, -r / (z * z), 2.0 * r / (z * z * z)],
        }
    }

    pub fn apply(&self, z: &CVec) -> CVec {
        match self {
            Automorphism::Identity => z.clone(),
            _ => z.map(|x| self.scalar(x)[0]),
        }
    }

    /// Holomorphic Jacobian `∂f_i/∂z_j`.
    pub fn jacobian(&self, z: &CVec) -> CMat {
        match self {
            Automorphism::Identity => CMat::identity(z.len(), z.len()),
            _ => CMat::from_diagonal(&z.map(|x| self.scalar(x)[1])),
        }
    }

    /// `f''` for the one-dimensional families (zero for the identity).
    pub fn second_derivative(&self, z: Complex64) -> Complex64 {
        self.scalar(z)[2]
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.scalar(z)[1]
    }

    pub fn inverse(&self) -> Automorphism {
        match *self {
            Automorphism::Identity => Automorphism::Identity,
            Automorphism::DiskMobius { a, theta } => Automorphism::DiskMobius {
                a: -a * Complex64::from_polar(1.0, theta),
                theta: -theta,
            },
            Automorphism::Rotation { theta } => Automorphism::Rotation { theta: -theta },
            Automorphism::AnnulusInversion { r } => Automorphism::AnnulusInversion { r },
        }
    }
}

/// Relative residual of `K_src(z,w̄) = K_dst(f(z), f(w)‾)·det f′(z)·det f′(w)‾`.
pub fn transformation_check(
    f: &Automorphism,
    model_src: &KernelModel,
    model_dst: &KernelModel,
    pt: &PolarizedPoint,
) -> Result<f64> {
    if !f.preserves(model_src.domain()) {
        return Err(Error::Unsupported(format!(
            "{f:?} is not an automorphism of {}",
            model_src.domain().name()
        )));
    }
    let w = pt.w();
    let ksrc = super::kernel_eval(model_src, pt)?;
    let fz = f.apply(&pt.z);
    let fw = f.apply(&w);
    let kdst = super::kernel_eval(model_dst, &PolarizedPoint::frozen(&fz, &fw))?;
    let jz = det(&f.jacobian(&pt.z));
    let jw = det(&f.jacobian(&w));
    Ok((ksrc - kdst * jz * jw.conj()).norm() / ksrc.norm())
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::{c, cvec};

    #[test]
    fn mobius_transformation_formula() {
        let m = KernelModel::new(DomainDescriptor::Disk).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Automorphism::DiskMobius { a: c(0.3, -0.4), theta: 0.7 };
        for _ in 0..20 {
            let z = DomainDescriptor::Disk.sample_point(&mut rng, 0.05);
            let w = DomainDescriptor::Disk.sample_point(&mut rng, 0.05);
            let res = transformation_check(&f, &m, &m, &PolarizedPoint::frozen(&z, &w)).unwrap();
            assert!(res < 1e-10, "{res:e}");
        }
    }

    #[test]
    fn identity_is_exact() {
        let m = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let pt = PolarizedPoint::frozen(&cvec(&[c(0.1, 0.2), c(0.3, -0.1)]), &cvec(&[c(-0.2, 0.0), c(0.4, 0.4)]));
        assert_eq!(transformation_check(&Automorphism::Identity, &m, &m, &pt).unwrap(), 0.0);
    }

    #[test]
    fn annulus_inversion_and_rotation() {
        let r = 0.3;
        let d = DomainDescriptor::Annulus { r };
        let m = KernelModel::new(d.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in [Automorphism::AnnulusInversion { r }, Automorphism::Rotation { theta: 1.1 }] {
            for _ in 0..20 {
                let z = d.sample_point(&mut rng, 0.02);
                let w = d.sample_point(&mut rng, 0.02);
                let res = transformation_check(&f, &m, &m, &PolarizedPoint::frozen(&z, &w)).unwrap();
                assert!(res < 1e-9, "{f:?}: {res:e}");
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for f in [
            Automorphism::DiskMobius { a: c(0.2, 0.5), theta: -0.4 },
            Automorphism::Rotation { theta: 2.0 },
            Automorphism::AnnulusInversion { r: 0.4 },
        ] {
            let z = cvec(&[c(rng.random_range(0.5..0.9), rng.random_range(-0.1..0.1))]);
            let back = f.inverse().apply(&f.apply(&z));
            assert!((back[0] - z[0]).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_foreign_domain() {
        let m = KernelModel::new(DomainDescriptor::Ball { n: 2 }).unwrap();
        let pt = PolarizedPoint::diag(&cvec(&[c(0.0, 0.0); 2]));
        let f = Automorphism::AnnulusInversion { r: 0.3 };
        assert!(transformation_check(&f, &m, &m, &pt).is_err());
    }
}
