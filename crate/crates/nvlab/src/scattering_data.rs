//! Admissible scattering data b(λ) and the d-bar coefficient r(λ, z, t).
//!
//! Both built-in families are real and radial functions of s = ln|λ|, even in s,
//! and vanish to all orders on |λ| = 1, so every symmetry holds node by node on a
//! log-polar grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};
use crate::phase_geometry::phase_raw;

/// Below this |ln|λ|| the families are treated as identically zero.
pub const FLAT_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// c·exp(−s² − 1/s²), supported on the whole punctured plane.
    Default,
    /// c·exp(4 − w/|s| − w/(w − |s|)) for 0 < |s| < w, compactly supported in s.
    Bump,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Default => "default",
            Family::Bump => "bump",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = NvError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Family::Default),
            "bump" => Ok(Family::Bump),
            other => Err(NvError::Config(format!("unknown scattering family '{other}'"))),
        }
    }
}

pub const DEFAULT_BUMP_WIDTH: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub family: Family,
    pub c: f64,
    /// Half-width in s of the bump family; ignored by the default family.
    pub width: f64,
}

impl ScatteringData {
    pub fn new(family: Family, c: f64) -> Self {
        ScatteringData { family, c, width: DEFAULT_BUMP_WIDTH }
    }

    pub fn bump(c: f64, width: f64) -> Self {
        ScatteringData { family: Family::Bump, c, width }
    }

    /// Largest |s| where the data is nonzero, or None when unbounded.
    pub fn support(&self) -> Option<f64> {
        match self.family {
            Family::Default => None,
            Family::Bump => Some(self.width),
        }
    }

    /// Unit-strength radial profile as a function of s = ln|λ|.
    pub fn profile(&self, s: f64) -> f64 {
        match self.family {
            Family::Default => default_profile(s),
            Family::Bump => bump_profile(s, self.width),
        }
    }

    /// d/ds of the unit-strength profile.
    pub fn profile_ds(&self, s: f64) -> f64 {
        match self.family {
            Family::Default => {
                let p = default_profile(s);
                if p == 0.0 {
                    0.0
                } else {
                    p * (-2.0 * s + 2.0 / (s * s * s))
                }
            }
            Family::Bump => {
                let p = bump_profile(s, self.width);
                if p == 0.0 {
                    return 0.0;
                }
                let a = s.abs();
                let w = self.width;
                s.signum() * p * (w / (a * a) - w / ((w - a) * (w - a)))
            }
        }
    }

    /// b(λ, 0).
    pub fn b(&self, lambda: Complex64) -> Complex64 {
        let rho = lambda.norm();
        if rho == 0.0 || !rho.is_finite() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(self.c * self.profile(rho.ln()), 0.0)
    }

    /// b(λ, t).
    pub fn b_at(&self, lambda: Complex64, t: f64) -> Result<Complex64> {
        evolve_b(self.b(lambda), lambda, t)
    }

    /// Static coefficient r(λ).
    pub fn r(&self, lambda: Complex64) -> Result<Complex64> {
        r_static_with(lambda, self.b(lambda))
    }

    /// r(λ, z, t) = exp(iS(λ, z, t))·r(λ).
    pub fn r_at(&self, lambda: Complex64, z: Complex64, t: f64) -> Result<Complex64> {
        let r0 = self.r(lambda)?;
        let s = phase_raw(z, t, lambda)?;
        Ok(r0 * Complex64::from_polar(1.0, s))
    }
}

impl Default for ScatteringData {
    fn default() -> Self {
        ScatteringData { family: Family::Bump, c: 0.05, width: DEFAULT_BUMP_WIDTH }
    }
}

fn default_profile(s: f64) -> f64 {
    if s.abs() < FLAT_CUTOFF {
        return 0.0;
    }
    (-s * s - 1.0 / (s * s)).exp()
}

fn bump_profile(s: f64, w: f64) -> f64 {
    let a = s.abs();
    if a < FLAT_CUTOFF || a >= w {
        return 0.0;
    }
    (4.0 - w / a - w / (w - a)).exp()
}

/// c·exp(−s² − 1/s²) with s = ln|λ|; zero at λ = 0 and for |s| < 1e−8.
pub fn default_b(lambda: Complex64, c: f64) -> Complex64 {
    let rho = lambda.norm();
    if rho == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(c * default_profile(rho.ln()), 0.0)
}

/// Compactly supported admissible bump with peak value c at |s| = width/2.
pub fn bump_b(lambda: Complex64, c: f64, width: f64) -> Complex64 {
    let rho = lambda.norm();
    if rho == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(c * bump_profile(rho.ln(), width), 0.0)
}

/// λ³ + λ̄³ + 1/λ³ + 1/λ̄³, the dispersion factor of the time flow.
pub fn dispersion(lambda: Complex64) -> f64 {
    let l3 = lambda * lambda * lambda;
    2.0 * (l3.re + l3.inv().re)
}

/// b0·exp(i t (λ³ + λ̄³ + 1/λ³ + 1/λ̄³)).
pub fn evolve_b(b0: Complex64, lambda: Complex64, t: f64) -> Result<Complex64> {
    if lambda.norm_sqr() == 0.0 {
        return Err(NvError::InvalidSpectralPoint);
    }
    Ok(b0 * Complex64::from_polar(1.0, t * dispersion(lambda)))
}

/// π·sgn(|λ|² − 1)/λ̄·b0 with sgn(0) = 0.
pub fn r_static_with(lambda: Complex64, b0: Complex64) -> Result<Complex64> {
    let n2 = lambda.norm_sqr();
    if n2 == 0.0 {
        return Err(NvError::InvalidSpectralPoint);
    }
    let sgn = if n2 > 1.0 {
        1.0
    } else if n2 < 1.0 {
        -1.0
    } else {
        0.0
    };
    if sgn == 0.0 || b0 == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(b0 * sgn * PI / lambda.conj())
}

/// r(λ) for the default family at strength c.
pub fn r_static(lambda: Complex64, c: f64) -> Result<Complex64> {
    r_static_with(lambda, default_b(lambda, c))
}
