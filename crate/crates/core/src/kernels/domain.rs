use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::elliptic::{self, LatticeParams};
use crate::error::{Error, Result};
use crate::linalg::{CVec, c};

/// A domain from the built-in catalog. Serializes as
/// `{"type":"annulus","r":0.1}`, `{"type":"ball","n":2}`,
/// `{"type":"product","factors":[…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainDescriptor {
    Disk,
    Ball { n: usize },
    Polydisc { n: usize },
    Annulus { r: f64 },
    Product { factors: Vec<DomainDescriptor> },
}

/// An irreducible kernel factor after flattening products and polydiscs.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Ball { n: usize },
    Annulus { lat: LatticeParams },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Ball { n } => *n,
            Factor::Annulus { .. } => 1,
        }
    }
}

impl DomainDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            DomainDescriptor::Disk | DomainDescriptor::Annulus { .. } => 1,
            DomainDescriptor::Ball { n } | DomainDescriptor::Polydisc { n } => *n,
            DomainDescriptor::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainDescriptor::Disk => Ok(()),
            DomainDescriptor::Ball { n } | DomainDescriptor::Polydisc { n } => {
                if *n == 0 {
                    Err(Error::InvalidParameter("dimension must be positive".into()))
                } else {
                    Ok(())
                }
            }
            DomainDescriptor::Annulus { r } => {
                if *r > 0.0 && *r < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("annulus needs 0 < r < 1, got {r}")))
                }
            }
            DomainDescriptor::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidParameter("product needs at least one factor".into()));
                }
                factors.iter().try_for_each(|f| f.validate())
            }
        }
    }

    pub fn factors(&self, pole_guard: f64) -> Result<Vec<Factor>> {
        self.validate()?;
        let mut out = Vec::new();
        self.push_factors(pole_guard, &mut out)?;
        Ok(out)
    }

    fn push_factors(&self, pole_guard: f64, out: &mut Vec<Factor>) -> Result<()> {
        match self {
            DomainDescriptor::Disk => out.push(Factor::Ball { n: 1 }),
            DomainDescriptor::Ball { n } => out.push(Factor::Ball { n: *n }),
            DomainDescriptor::Polydisc { n } => out.extend((0..*n).map(|_| Factor::Ball { n: 1 })),
            DomainDescriptor::Annulus { r } => out.push(Factor::Annulus {
                lat: elliptic::make_lattice_with_guard(*r, pole_guard)?,
            }),
            DomainDescriptor::Product { factors } => {
                for f in factors {
                    f.push_factors(pole_guard, out)?;
                }
            }
        }
        Ok(())
    }

    /// Strict interior membership.
    pub fn contains(&self, z: &[Complex64]) -> bool {
        if z.len() != self.dim() {
            return false;
        }
        match self {
            DomainDescriptor::Disk => z[0].norm() < 1.0,
            DomainDescriptor::Ball { .. } => z.iter().map(|x| x.norm_sqr()).sum::<f64>() < 1.0,
            DomainDescriptor::Polydisc { .. } => z.iter().all(|x| x.norm() < 1.0),
            DomainDescriptor::Annulus { r } => {
                let m = z[0].norm();
                m > *r && m < 1.0
            }
            DomainDescriptor::Product { factors } => {
                let mut off = 0;
                factors.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains(&z[off..off + d]);
                    off += d;
                    ok
                })
            }
        }
    }

    /// A crude distance-to-boundary measure (0 outside), used to keep
    /// samples and finite-difference stencils inside.
    pub fn depth(&self, z: &[Complex64]) -> f64 {
        if !self.contains(z) {
            return 0.0;
        }
        match self {
            DomainDescriptor::Disk => 1.0 - z[0].norm(),
            DomainDescriptor::Ball { .. } => 1.0 - z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
            DomainDescriptor::Polydisc { .. } => z.iter().map(|x| 1.0 - x.norm()).fold(f64::INFINITY, f64::min),
            DomainDescriptor::Annulus { r } => {
                let m = z[0].norm();
                (m - r).min(1.0 - m)
            }
            DomainDescriptor::Product { factors } => {
                let mut off = 0;
                factors
                    .iter()
                    .map(|f| {
                        let d = f.dim();
                        let v = f.depth(&z[off..off + d]);
                        off += d;
                        v
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// A uniformly drawn interior point at depth at least `margin`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> CVec {
        let n = self.dim();
        loop {
            let bound = 1.0;
            let z: Vec<Complex64> = (0..n)
                .map(|_| c(rng.random_range(-bound..bound), rng.random_range(-bound..bound)))
                .collect();
            if self.depth(&z) > margin {
                return CVec::from_vec(z);
            }
        }
    }

    /// A simple interior point: the origin, or a point on the positive real
    /// axis at mid-radius for annulus factors.
    pub fn reference_point(&self) -> CVec {
        let mut out = Vec::with_capacity(self.dim());
        self.push_reference(&mut out);
        CVec::from_vec(out)
    }

    fn push_reference(&self, out: &mut Vec<Complex64>) {
        match self {
            DomainDescriptor::Annulus { r } => out.push(c(0.5 * (1.0 + r), 0.0)),
            DomainDescriptor::Product { factors } => factors.iter().for_each(|f| f.push_reference(out)),
            other => out.extend((0..other.dim()).map(|_| c(0.0, 0.0))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DomainDescriptor::Disk => "disk".into(),
            DomainDescriptor::Ball { n } => format!("ball({n})"),
            DomainDescriptor::Polydisc { n } => format!("polydisc({n})"),
            DomainDescriptor::Annulus { r } => format!("annulus({r})"),
            DomainDescriptor::Product { factors } => {
                let parts: Vec<String> = factors.iter().map(|f| f.name()).collect();
                parts.join("×")
            }
        }
    }
}

/// `(z, w̄)` with `w̄` treated as an independent holomorphic variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedPoint {
    pub z: CVec,
    pub wbar: CVec,
}

impl PolarizedPoint {
    pub fn new(z: CVec, wbar: CVec) -> Self {
        PolarizedPoint { z, wbar }
    }

    /// The diagonal point `(z, z̄)`.
    pub fn diag(z: &CVec) -> Self {
        PolarizedPoint {
            z: z.clone(),
            wbar: z.map(|x| x.conj()),
        }
    }

    /// `(z, p̄)`.
    pub fn frozen(z: &CVec, p: &CVec) -> Self {
        PolarizedPoint {
            z: z.clone(),
            wbar: p.map(|x| x.conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// The point `w` whose conjugate is the second argument.
    pub fn w(&self) -> CVec {
        self.wbar.map(|x| x.conj())
    }
}
