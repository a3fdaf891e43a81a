//! Phase S(u, ζ), its ζ-derivatives, the cubic P(ξ) = ξ³ − (ū/6)ξ² + (u/6)ξ − 1
//! whose roots are the squared stationary points, and the classification
//! of velocities u against the deltoid u = 6(2e^{−iφ} + e^{2iφ}).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};

pub const TOL_CIRCLE: f64 = 1e-7;
/// Roots closer than this count as coincident.
pub const TOL_DOUBLE: f64 = 1e-6;
/// Roots farther apart than this count as distinct; in between is ambiguous.
pub const TOL_DISTINCT: f64 = 1e-5;
/// Off-circle roots must leave the circle by at least this much.
pub const TOL_OFF_CIRCLE: f64 = 1e-5;
pub const TOL_RECIPROCAL: f64 = 1e-9;
pub const TOL_CUSP: f64 = 1e-7;

/// S(u, ζ) = −½(ζ̄u + ζū + u/ζ + ū/ζ̄) + (ζ³ + ζ̄³ + 1/ζ³ + 1/ζ̄³).
pub fn phase(u: Complex64, zeta: Complex64) -> Result<f64> {
    if zeta.norm_sqr() == 0.0 {
        return Err(NvError::PoleAtOrigin);
    }
    let inv = zeta.inv();
    let z3 = zeta * zeta * zeta;
    Ok(-(zeta.conj() * u + u * inv).re + 2.0 * (z3.re + z3.inv().re))
}

/// S(λ, z, t) = −½(λ̄z + λz̄ + z/λ + z̄/λ̄) + t(λ³ + λ̄³ + 1/λ³ + 1/λ̄³).
pub fn phase_raw(z: Complex64, t: f64, lambda: Complex64) -> Result<f64> {
    if lambda.norm_sqr() == 0.0 {
        return Err(NvError::PoleAtOrigin);
    }
    let inv = lambda.inv();
    let l3 = lambda * lambda * lambda;
    Ok(-(lambda.conj() * z + z * inv).re + 2.0 * t * (l3.re + l3.inv().re))
}

/// S'_ζ = −ū/2 + u/(2ζ²) + 3ζ² − 3/ζ⁴.
pub fn phase_dzeta(u: Complex64, zeta: Complex64) -> Result<Complex64> {
    if zeta.norm_sqr() == 0.0 {
        return Err(NvError::PoleAtOrigin);
    }
    let z2 = zeta * zeta;
    let i2 = z2.inv();
    Ok(-u.conj() * 0.5 + u * i2 * 0.5 + z2 * 3.0 - i2 * i2 * 3.0)
}

/// S''_ζζ = −u/ζ³ + 6ζ + 12/ζ⁵.
pub fn phase_d2zeta(u: Complex64, zeta: Complex64) -> Result<Complex64> {
    if zeta.norm_sqr() == 0.0 {
        return Err(NvError::PoleAtOrigin);
    }
    let inv = zeta.inv();
    let i3 = inv * inv * inv;
    Ok(-u * i3 + zeta * 6.0 + i3 * inv * inv * 12.0)
}

/// Product form (3/ζ⁴)·Π(ζ² − ξᵢ) of S'_ζ.
pub fn phase_dzeta_product(roots: &CubicRoots, zeta: Complex64) -> Result<Complex64> {
    if zeta.norm_sqr() == 0.0 {
        return Err(NvError::PoleAtOrigin);
    }
    let z2 = zeta * zeta;
    let p = roots.xi.iter().fold(Complex64::new(1.0, 0.0), |acc, &x| acc * (z2 - x));
    Ok(p * 3.0 / (z2 * z2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicRoots {
    pub u: Complex64,
    pub xi: [Complex64; 3],
    pub multiplicity: [u8; 3],
}

impl CubicRoots {
    pub fn residuals(&self) -> [f64; 3] {
        self.xi.map(|x| cubic_eval(self.u, x).norm())
    }

    pub fn product(&self) -> Complex64 {
        self.xi[0] * self.xi[1] * self.xi[2]
    }

    pub fn moduli(&self) -> [f64; 3] {
        self.xi.map(|x| x.norm())
    }
}

pub fn cubic_eval(u: Complex64, x: Complex64) -> Complex64 {
    let a = -u.conj() / 6.0;
    let b = u / 6.0;
    ((x + a) * x + b) * x - 1.0
}

fn cubic_deriv(u: Complex64, x: Complex64) -> Complex64 {
    let a = -u.conj() / 6.0;
    let b = u / 6.0;
    (x * 3.0 + a * 2.0) * x + b
}

fn raw_roots(u: Complex64) -> [Complex64; 3] {
    let a = -u.conj() / 6.0;
    let b = u / 6.0;
    let c0 = Complex64::new(-1.0, 0.0);
    let p = b - a * a / 3.0;
    let q = a * a * a * (2.0 / 27.0) - a * b / 3.0 + c0;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let c1 = -q / 2.0 + disc;
    let c2 = -q / 2.0 - disc;
    let big = if c1.norm() >= c2.norm() { c1 } else { c2 };
    let shift = -a / 3.0;
    if big.norm() == 0.0 {
        return [shift; 3];
    }
    let cc = big.powf(1.0 / 3.0);
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut ck = cc;
    for o in out.iter_mut() {
        *o = ck - p / (ck * 3.0) + shift;
        ck *= w;
    }
    out
}

fn polish(u: Complex64, mut x: Complex64) -> Complex64 {
    for _ in 0..2 {
        let d = cubic_deriv(u, x);
        let fx = cubic_eval(u, x);
        if d.norm() < 1e-14 * (1.0 + u.norm()) {
            break;
        }
        let nx = x - fx / d;
        if cubic_eval(u, nx).norm() <= fx.norm() {
            x = nx;
        }
    }
    x
}

fn angle(x: Complex64) -> f64 {
    let a = x.arg();
    if a < -1e-12 {
        a + 2.0 * PI
    } else {
        a.max(0.0)
    }
}

/// Cardano solve with two Newton polish steps per root.
///
/// Ordering: an off-circle root of modulus > 1 first and its reciprocal partner
/// last; a double root occupies slots 0 and 1; otherwise ascending argument.
pub fn solve_cubic(u: Complex64) -> CubicRoots {
    let mut xi = raw_roots(u).map(|x| polish(u, x));
    let d = |a: Complex64, b: Complex64| (a - b).norm();
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let coincide: Vec<(usize, usize)> =
        pairs.iter().copied().filter(|&(i, j)| d(xi[i], xi[j]) < TOL_DOUBLE).collect();
    let multiplicity;
    if coincide.len() >= 2 {
        xi.sort_by(|a, b| angle(*a).total_cmp(&angle(*b)));
        multiplicity = [3, 3, 3];
    } else if coincide.len() == 1 {
        let (i, j) = coincide[0];
        let k = 3 - i - j;
        xi = [xi[i], xi[j], xi[k]];
        multiplicity = [2, 2, 1];
    } else {
        let off: Vec<usize> = (0..3).filter(|&i| (xi[i].norm() - 1.0).abs() > TOL_CIRCLE).collect();
        if off.len() == 2 {
            let (hi, lo) = if xi[off[0]].norm() >= xi[off[1]].norm() {
                (off[0], off[1])
            } else {
                (off[1], off[0])
            };
            let mid = 3 - hi - lo;
            xi = [xi[hi], xi[mid], xi[lo]];
        } else {
            xi.sort_by(|a, b| angle(*a).total_cmp(&angle(*b)));
        }
        multiplicity = [1, 1, 1];
    }
    CubicRoots { u, xi, multiplicity }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub zeta: Complex64,
    /// Index of the cubic root ξ = ζ².
    pub root: usize,
    pub multiplicity: u8,
    pub degenerate: bool,
}

/// The six points ±√ξᵢ.
pub fn stationary_points(u: Complex64) -> Vec<StationaryPoint> {
    let roots = solve_cubic(u);
    let tol = 1e-6 * (1.0 + u.norm());
    let mut out = Vec::with_capacity(6);
    for (i, &x) in roots.xi.iter().enumerate() {
        let r = x.sqrt();
        for zeta in [r, -r] {
            let d2 = phase_d2zeta(u, zeta).map(|v| v.norm()).unwrap_or(f64::INFINITY);
            out.push(StationaryPoint {
                zeta,
                root: i,
                multiplicity: roots.multiplicity[i],
                degenerate: roots.multiplicity[i] > 1 || d2 < tol,
            });
        }
    }
    out
}

/// 6(2e^{−iφ} + e^{2iφ}).
pub fn curve_point(phi: f64) -> Complex64 {
    (Complex64::from_polar(2.0, -phi) + Complex64::from_polar(1.0, 2.0 * phi)) * 6.0
}

/// curve_point(φ) + s·e^{iφ/2}.
pub fn tangent_line(phi: f64, s: f64) -> Complex64 {
    curve_point(phi) + Complex64::from_polar(s, phi / 2.0)
}

/// Signed distance from u to the tangent line at parameter φ.
pub fn tangent_distance(phi: f64, u: Complex64) -> f64 {
    ((u - curve_point(phi)) * Complex64::from_polar(1.0, -phi / 2.0)).im
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum RegionClass {
    Interior,
    BoundaryRegular { phi: f64 },
    BoundaryCusp { k: u8 },
    /// ζ₀ = (1 + ω)e^{iφ/2} is the off-circle stationary point.
    Exterior { omega: f64, phi: f64 },
}

impl RegionClass {
    pub fn name(&self) -> &'static str {
        match self {
            RegionClass::Interior => "Interior",
            RegionClass::BoundaryRegular { .. } => "BoundaryRegular",
            RegionClass::BoundaryCusp { .. } => "BoundaryCusp",
            RegionClass::Exterior { .. } => "Exterior",
        }
    }

    /// Interior or on the closed curve.
    pub fn in_closed_region(&self) -> bool {
        !matches!(self, RegionClass::Exterior { .. })
    }
}

pub fn classify_roots(roots: &CubicRoots) -> Result<RegionClass> {
    let u = roots.u;
    let moduli = roots.moduli();
    let ambiguous = Err(NvError::AmbiguousClassification { moduli });
    for k in 0..3u8 {
        let cusp = Complex64::from_polar(18.0, 2.0 * PI * k as f64 / 3.0);
        if (u - cusp).norm() < TOL_CUSP {
            return Ok(RegionClass::BoundaryCusp { k });
        }
    }
    let dev = moduli.map(|m| (m - 1.0).abs());
    let on: Vec<usize> = (0..3).filter(|&i| dev[i] < TOL_CIRCLE).collect();
    let off: Vec<usize> = (0..3).filter(|&i| dev[i] > TOL_OFF_CIRCLE).collect();
    let x = roots.xi;
    if on.len() == 3 {
        let dmin = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| (x[i] - x[j]).norm())
            .fold(f64::INFINITY, f64::min);
        if dmin < TOL_DOUBLE {
            let dbl = if roots.multiplicity == [2, 2, 1] { (x[0] + x[1]) / 2.0 } else { x[0] };
            return Ok(RegionClass::BoundaryRegular { phi: angle(dbl) });
        }
        if dmin > TOL_DISTINCT {
            return Ok(RegionClass::Interior);
        }
        return ambiguous;
    }
    if on.len() == 1 && off.len() == 2 {
        // ξ₀ = (1+τ)e^{iφ}, ξ₂ = (1+τ)^{−1}e^{iφ}: reciprocal under reflection in the circle.
        let recip = (x[0] * x[2].conj() - 1.0).norm();
        if recip < TOL_RECIPROCAL && on[0] == 1 {
            let omega = x[0].norm().sqrt() - 1.0;
            return Ok(RegionClass::Exterior { omega, phi: angle(x[0]) });
        }
    }
    ambiguous
}

pub fn classify_region(u: Complex64) -> Result<RegionClass> {
    classify_roots(&solve_cubic(u))
}

/// Parameters φ ∈ [0, 2π) whose tangent line passes through u, by sign-change scan plus bisection.
pub fn tangent_parameters(u: Complex64, samples: usize) -> Vec<f64> {
    let n = samples.max(16);
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::new();
    let mut prev = tangent_distance(0.0, u);
    if prev == 0.0 {
        out.push(0.0);
    }
    for k in 1..=n {
        let phi = k as f64 * h;
        let cur = tangent_distance(phi, u);
        if prev * cur < 0.0 {
            let (mut a, mut b) = (phi - h, phi);
            let mut fa = prev;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = tangent_distance(m, u);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            let root = 0.5 * (a + b);
            if root < 2.0 * PI {
                out.push(root);
            }
        } else if cur == 0.0 && k < n {
            out.push(phi);
        }
        prev = cur;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn same_set(a: &[Complex64; 3], b: &[Complex64; 3], tol: f64) -> bool {
        let mut used = [false; 3];
        for x in a {
            let mut hit = false;
            for (j, y) in b.iter().enumerate() {
                if !used[j] && (x - y).norm() < tol {
                    used[j] = true;
                    hit = true;
                    break;
                }
            }
            if !hit {
                return false;
            }
        }
        true
    }

    #[test]
    fn phase_examples() {
        let u = c(3.5, -1.25);
        assert!((phase(u, c(1.0, 0.0)).unwrap() - (4.0 - 2.0 * u.re)).abs() < 1e-13);
        assert_eq!(phase(c(18.0, 0.0), c(1.0, 0.0)).unwrap(), -32.0);
        let z = c(0.7, 1.9);
        let a = phase(u, z).unwrap();
        let b = phase(u.conj(), z.conj()).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(phase(u, c(0.0, 0.0)), Err(NvError::PoleAtOrigin));
    }

    #[test]
    fn phase_raw_examples() {
        let z = c(1.5, -0.5);
        assert!((phase_raw(z, 0.0, c(1.0, 0.0)).unwrap() + 3.0).abs() < 1e-14);
        let u = c(0.4, 0.9);
        let l = c(1.2, -0.3);
        let lhs = phase_raw(u * 2.0, 2.0, l).unwrap();
        assert!((lhs - 2.0 * phase(u, l).unwrap()).abs() < 1e-12);
        let v = phase_raw(c(0.0, 0.0), 1.0, Complex64::from_polar(1.0, PI / 3.0)).unwrap();
        assert!((v + 4.0).abs() < 1e-13);
    }

    #[test]
    fn derivative_examples() {
        let one = c(1.0, 0.0);
        assert!(phase_dzeta(c(18.0, 0.0), one).unwrap().norm() < 1e-14);
        assert!(phase_d2zeta(c(18.0, 0.0), one).unwrap().norm() < 1e-14);
        assert!(phase_dzeta(c(0.0, 0.0), one).unwrap().norm() < 1e-14);
    }

    #[test]
    fn derivative_matches_wirtinger_difference() {
        let u = c(4.0, -7.0);
        let z = c(0.8, 0.6);
        let h = 1e-6;
        let dx = (phase(u, z + h).unwrap() - phase(u, z - h).unwrap()) / (2.0 * h);
        let dy = (phase(u, z + c(0.0, h)).unwrap() - phase(u, z - c(0.0, h)).unwrap()) / (2.0 * h);
        let wirt = c(dx, -dy) * 0.5;
        assert!((wirt - phase_dzeta(u, z).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn cubic_anchors() {
        let r = solve_cubic(c(18.0, 0.0));
        assert!(r.xi.iter().all(|x| (x - 1.0).norm() < 1e-5));
        assert_eq!(r.multiplicity, [3, 3, 3]);
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let r = solve_cubic(c(0.0, 0.0));
        assert!(same_set(&r.xi, &[c(1.0, 0.0), w, w.conj()], 1e-12));
        let s3 = 3f64.sqrt();
        let r = solve_cubic(c(30.0, 0.0));
        assert!((r.xi[0] - (2.0 + s3)).norm() < 1e-12);
        assert!((r.xi[1] - 1.0).norm() < 1e-12);
        assert!((r.xi[2] - (2.0 - s3)).norm() < 1e-12);
        let r = solve_cubic(c(-6.0, 0.0));
        assert!(same_set(&r.xi, &[c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)], 1e-6));
        assert_eq!(r.multiplicity, [2, 2, 1]);
    }

    #[test]
    fn stationary_examples() {
        let p = stationary_points(c(18.0, 0.0));
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|s| s.degenerate && s.multiplicity == 3));
        assert!(p.iter().all(|s| (s.zeta - 1.0).norm() < 1e-4 || (s.zeta + 1.0).norm() < 1e-4));
        let p = stationary_points(c(30.0, 0.0));
        let on: Vec<_> = p.iter().filter(|s| (s.zeta.norm() - 1.0).abs() < 1e-9).collect();
        assert_eq!(on.len(), 2);
        assert!(on.iter().all(|s| (s.zeta.re.abs() - 1.0).abs() < 1e-12));
        for s in &p {
            assert!(phase_dzeta(c(30.0, 0.0), s.zeta).unwrap().norm() < 1e-8 * 31.0);
        }
    }

    #[test]
    fn curve_examples() {
        assert!((curve_point(0.0) - 18.0).norm() < 1e-14);
        assert!((curve_point(PI) + 6.0).norm() < 1e-13);
        assert_eq!(tangent_line(1.1, 0.0), curve_point(1.1));
    }

    #[test]
    fn classify_anchors() {
        assert_eq!(classify_region(c(0.0, 0.0)).unwrap(), RegionClass::Interior);
        match classify_region(c(30.0, 0.0)).unwrap() {
            RegionClass::Exterior { omega, .. } => {
                assert!((omega - ((2.0 + 3f64.sqrt()).sqrt() - 1.0)).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(classify_region(c(18.0, 0.0)).unwrap(), RegionClass::BoundaryCusp { k: 0 });
        assert!(matches!(classify_region(c(-6.0, 0.0)).unwrap(), RegionClass::BoundaryRegular { .. }));
    }

    #[test]
    fn exterior_roots_follow_curve_parameterization() {
        // u = curve(φ) pushed outward along the tangent through the double root.
        let phi = 0.9f64;
        let tau = 0.3f64;
        let xi0 = Complex64::from_polar(1.0 + tau, phi);
        let xi2 = Complex64::from_polar(1.0 / (1.0 + tau), phi);
        let xi1 = Complex64::from_polar(1.0, -2.0 * phi);
        // Recover u from Vieta: ξ₀ξ₁ + ξ₀ξ₂ + ξ₁ξ₂ = u/6.
        let u = (xi0 * xi1 + xi0 * xi2 + xi1 * xi2) * 6.0;
        let r = solve_cubic(u);
        assert!((r.xi[0] - xi0).norm() < 1e-10);
        assert!((r.xi[1] - xi1).norm() < 1e-10);
        assert!((r.xi[2] - xi2).norm() < 1e-10);
        assert!(matches!(classify_roots(&r).unwrap(), RegionClass::Exterior { .. }));
    }

    #[test]
    fn tangent_counts() {
        assert_eq!(tangent_parameters(c(0.0, 0.0), 4096).len(), 3);
        assert_eq!(tangent_parameters(c(30.0, 0.0), 4096).len(), 1);
        assert_eq!(tangent_parameters(c(2.0, 5.0), 4096).len(), 3);
    }
}
