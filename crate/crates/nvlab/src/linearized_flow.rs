//! Linearized solutions I(t,z) = ∬ f e^{iS(ζ,z,t)} dA and J(t,z) = −3∬ (ζ̄/ζ) f e^{iS} dA,
//! their PDE and Born-support checks, and the D_ε stationary-phase decomposition.
//!
//! S is invariant under ζ → 1/ζ̄, so the s < 0 half of the grid is folded onto
//! s > 0. Writing W = ζ + 1/ζ̄ = (ρ + 1/ρ)e^{iθ} the spatial phase is −Re(z W̄),
//! separable in x and y, which turns lattice evaluation into a matrix product.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cplane_quadrature::{neumaier_c, GridUse, RadialGrid, ResolutionPolicy};
use crate::error::{NvError, Result};
use crate::phase_geometry::{phase, phase_d2zeta, phase_dzeta, stationary_points};
use crate::scattering_data::ScatteringData;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearProfile {
    /// f = b.
    Plain,
    /// f = sgn(|ζ|² − 1)(1 + |ζ|⁻²)·b, the first Born term of v.
    BornMatched,
}

/// Radial test function f for the linearized flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearData {
    pub data: ScatteringData,
    pub profile: LinearProfile,
}

impl LinearData {
    pub fn plain(data: ScatteringData) -> Self {
        LinearData { data, profile: LinearProfile::Plain }
    }

    pub fn born(data: ScatteringData) -> Self {
        LinearData { data, profile: LinearProfile::BornMatched }
    }

    pub fn is_zero(&self) -> bool {
        self.data.c == 0.0
    }

    /// f as a function of s = ln|ζ|.
    pub fn radial(&self, s: f64) -> f64 {
        let b = self.data.c * self.data.profile(s);
        match self.profile {
            LinearProfile::Plain => b,
            LinearProfile::BornMatched => {
                if b == 0.0 {
                    0.0
                } else {
                    s.signum() * (1.0 + (-2.0 * s).exp()) * b
                }
            }
        }
    }

    pub fn radial_ds(&self, s: f64) -> f64 {
        let c = self.data.c;
        match self.profile {
            LinearProfile::Plain => c * self.data.profile_ds(s),
            LinearProfile::BornMatched => {
                let p = self.data.profile(s);
                if p == 0.0 {
                    return 0.0;
                }
                let e = (-2.0 * s).exp();
                c * s.signum() * (-2.0 * e * p + (1.0 + e) * self.data.profile_ds(s))
            }
        }
    }

    pub fn f(&self, zeta: Complex64) -> Complex64 {
        let r = zeta.norm();
        if r == 0.0 {
            return ZERO;
        }
        Complex64::new(self.radial(r.ln()), 0.0)
    }

    /// ∂_ζ f = f_s/(2ζ) for radial f.
    pub fn f_zeta(&self, zeta: Complex64) -> Complex64 {
        let r = zeta.norm();
        if r == 0.0 {
            return ZERO;
        }
        let d = self.radial_ds(r.ln());
        if d == 0.0 {
            ZERO
        } else {
            Complex64::new(d, 0.0) / (zeta * 2.0)
        }
    }

    pub fn s_max(&self, default: f64) -> f64 {
        self.data.support().unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    I,
    J,
}

/// Folded node set for radial f on a log-polar grid.
pub struct LinearNodes {
    pub grid: RadialGrid,
    sigma: Vec<f64>,
    cube: Vec<f64>,
    weight: Vec<f64>,
    abs_weight: Vec<f64>,
    cos3: Vec<f64>,
    e2: Vec<Complex64>,
}

impl LinearNodes {
    pub fn new(f: &LinearData, grid: RadialGrid) -> Self {
        let half = grid.n_r / 2;
        let mut sigma = Vec::with_capacity(half);
        let mut cube = Vec::with_capacity(half);
        let mut weight = Vec::with_capacity(half);
        let mut abs_weight = Vec::with_capacity(half);
        for j in half..grid.n_r {
            let s = grid.s[j];
            let rho = grid.rho[j];
            let a = rho * rho * f.radial(s);
            let b = f.radial(-s) / (rho * rho);
            sigma.push(rho + 1.0 / rho);
            cube.push(2.0 * (rho.powi(3) + rho.powi(-3)));
            weight.push((a + b) * grid.ds * grid.dtheta);
            abs_weight.push((a.abs() + b.abs()) * grid.ds * grid.dtheta);
        }
        let cos3 = grid.theta.iter().map(|t| (3.0 * t).cos()).collect();
        let e2 = grid.theta.iter().map(|t| Complex64::from_polar(1.0, -2.0 * t)).collect();
        LinearNodes { grid, sigma, cube, weight, abs_weight, cos3, e2 }
    }

    /// Nodes resolving |z| ≤ z_abs at time t.
    pub fn resolved(f: &LinearData, policy: &ResolutionPolicy, s_max: f64, z_abs: f64, t: f64) -> Result<Self> {
        Ok(LinearNodes::new(f, policy.grid(s_max, z_abs, t, GridUse::Integral)?))
    }

    pub fn rings(&self) -> usize {
        self.sigma.len()
    }

    /// ∬ |f| dA.
    pub fn abs_mass(&self) -> f64 {
        self.abs_weight.iter().sum::<f64>() * self.grid.n_theta as f64
    }

    pub fn mass(&self) -> f64 {
        self.weight.iter().sum::<f64>() * self.grid.n_theta as f64
    }

    #[inline]
    fn coef(&self, field: Field, j: usize, k: usize) -> Complex64 {
        match field {
            Field::I => Complex64::new(self.weight[j], 0.0),
            Field::J => self.e2[k] * (-3.0 * self.weight[j]),
        }
    }

    /// Single-point value of I or J at (t, z).
    pub fn point(&self, field: Field, t: f64, z: Complex64) -> Complex64 {
        let nt = self.grid.n_theta;
        let parts: Vec<Complex64> = (0..self.rings())
            .into_par_iter()
            .map(|j| {
                if self.weight[j] == 0.0 {
                    return ZERO;
                }
                let mut acc = ZERO;
                for k in 0..nt {
                    let w1 = self.sigma[j] * self.grid.cos_t[k];
                    let w2 = self.sigma[j] * self.grid.sin_t[k];
                    let ph = t * self.cube[j] * self.cos3[k] - (z.re * w1 + z.im * w2);
                    acc += self.coef(field, j, k) * Complex64::from_polar(1.0, ph);
                }
                acc
            })
            .collect();
        neumaier_c(parts)
    }

    /// Values on the lattice z = xs[a] + i·ys[b], stored with index a·ny + b.
    pub fn lattice(&self, field: Field, t: f64, xs: &[f64], ys: &[f64]) -> Vec<Complex64> {
        let (nx, ny) = (xs.len(), ys.len());
        let nt = self.grid.n_theta;
        let active: Vec<usize> = (0..self.rings()).filter(|&j| self.weight[j] != 0.0).collect();
        const PARTS: usize = 32;
        const BLOCK: usize = 256;
        let chunk = active.len().div_ceil(PARTS).max(1);
        let partials: Vec<(Vec<f64>, Vec<f64>)> = active
            .par_chunks(chunk)
            .map(|rings| {
                let mut rr = vec![0.0; nx * ny];
                let mut ri = vec![0.0; nx * ny];
                let mut ar = vec![0.0; nx * BLOCK];
                let mut ai = vec![0.0; nx * BLOCK];
                let mut br = vec![0.0; BLOCK * ny];
                let mut bi = vec![0.0; BLOCK * ny];
                for &j in rings {
                    let sig = self.sigma[j];
                    let mut k0 = 0;
                    while k0 < nt {
                        let kb = BLOCK.min(nt - k0);
                        for q in 0..kb {
                            let k = k0 + q;
                            let w1 = sig * self.grid.cos_t[k];
                            let w2 = sig * self.grid.sin_t[k];
                            let c = self.coef(field, j, k) * Complex64::from_polar(1.0, t * self.cube[j] * self.cos3[k]);
                            for (a, &x) in xs.iter().enumerate() {
                                let v = c * Complex64::from_polar(1.0, -x * w1);
                                ar[a * kb + q] = v.re;
                                ai[a * kb + q] = v.im;
                            }
                            for (b, &y) in ys.iter().enumerate() {
                                let (sn, cs) = (-y * w2).sin_cos();
                                br[q * ny + b] = cs;
                                bi[q * ny + b] = sn;
                            }
                        }
                        // (ar + i ai)(br + i bi)
                        unsafe {
                            gemm(nx, kb, ny, 1.0, &ar, &br, &mut rr);
                            gemm(nx, kb, ny, -1.0, &ai, &bi, &mut rr);
                            gemm(nx, kb, ny, 1.0, &ar, &bi, &mut ri);
                            gemm(nx, kb, ny, 1.0, &ai, &br, &mut ri);
                        }
                        k0 += kb;
                    }
                }
                (rr, ri)
            })
            .collect();
        let mut out = vec![ZERO; nx * ny];
        for (rr, ri) in partials {
            for i in 0..nx * ny {
                out[i] += Complex64::new(rr[i], ri[i]);
            }
        }
        out
    }
}

/// c += alpha·a·b with a (m×k) and b (k×n) row-major.
unsafe fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], b: &[f64], c: &mut [f64]) {
    matrixmultiply::dgemm(
        m,
        k,
        n,
        alpha,
        a.as_ptr(),
        k as isize,
        1,
        b.as_ptr(),
        n as isize,
        1,
        1.0,
        c.as_mut_ptr(),
        n as isize,
        1,
    );
}

/// Nodes fine enough for both fields at |z| ≤ z_abs.
fn nodes_for(f: &LinearData, policy: &ResolutionPolicy, z_abs: f64, t: f64) -> Result<LinearNodes> {
    LinearNodes::resolved(f, policy, f.s_max(3.0), z_abs, t)
}

/// I(t, u) = ∬ f e^{itS(u,ζ)} dA.
pub fn eval_i(t: f64, u: Complex64, f: &LinearData, policy: &ResolutionPolicy) -> Result<Complex64> {
    eval_i_z(t, u * t, f, policy)
}

pub fn eval_j(t: f64, u: Complex64, f: &LinearData, policy: &ResolutionPolicy) -> Result<Complex64> {
    eval_j_z(t, u * t, f, policy)
}

/// I(t, z) in the raw (z, t) form.
pub fn eval_i_z(t: f64, z: Complex64, f: &LinearData, policy: &ResolutionPolicy) -> Result<Complex64> {
    if f.is_zero() {
        return Ok(ZERO);
    }
    let nodes = nodes_for(f, policy, z.norm(), t)?;
    finite(nodes.point(Field::I, t, z))
}

pub fn eval_j_z(t: f64, z: Complex64, f: &LinearData, policy: &ResolutionPolicy) -> Result<Complex64> {
    if f.is_zero() {
        return Ok(ZERO);
    }
    let nodes = nodes_for(f, policy, z.norm(), t)?;
    finite(nodes.point(Field::J, t, z))
}

fn finite(v: Complex64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(NvError::NonFiniteSample { index: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    pub h_t: f64,
    pub h_z: f64,
    pub residual: f64,
    pub residual_half: f64,
    pub ratio: f64,
    pub constraint: f64,
    pub constraint_half: f64,
    pub constraint_ratio: f64,
    /// |∂_t I| at the finer step, for scale.
    pub scale: f64,
}

fn stencil_residuals(nodes: &LinearNodes, t: f64, z: Complex64, h_t: f64, h: f64) -> (f64, f64, f64) {
    let offs: Vec<f64> = (-2..=2).map(|a| a as f64 * h).collect();
    let xs: Vec<f64> = offs.iter().map(|o| z.re + o).collect();
    let ys: Vec<f64> = offs.iter().map(|o| z.im + o).collect();
    let i_lat = nodes.lattice(Field::I, t, &xs, &ys);
    let j_lat = nodes.lattice(Field::J, t, &xs, &ys);
    let at = |v: &[Complex64], a: i32, b: i32| v[((a + 2) * 5 + (b + 2)) as usize];
    let i = Complex64::i();
    // one-dimensional central operators composed on the 5×5 stencil
    let dx = |v: &[Complex64], b: i32| (at(v, 1, b) - at(v, -1, b)) / (2.0 * h);
    let dy = |v: &[Complex64], a: i32| (at(v, a, 1) - at(v, a, -1)) / (2.0 * h);
    let dxx = |v: &[Complex64], b: i32| (at(v, 1, b) - at(v, 0, b) * 2.0 + at(v, -1, b)) / (h * h);
    let dyy = |v: &[Complex64], a: i32| (at(v, a, 1) - at(v, a, 0) * 2.0 + at(v, a, -1)) / (h * h);
    let dxxx = (at(&i_lat, 2, 0) - at(&i_lat, 1, 0) * 2.0 + at(&i_lat, -1, 0) * 2.0 - at(&i_lat, -2, 0)) / (2.0 * h * h * h);
    let dyyy = (at(&i_lat, 0, 2) - at(&i_lat, 0, 1) * 2.0 + at(&i_lat, 0, -1) * 2.0 - at(&i_lat, 0, -2)) / (2.0 * h * h * h);
    let dxxy = (dxx(&i_lat, 1) - dxx(&i_lat, -1)) / (2.0 * h);
    let dxyy = (dyy(&i_lat, 1) - dyy(&i_lat, -1)) / (2.0 * h);
    let dz3 = (dxxx - i * dxxy * 3.0 - dxyy * 3.0 + i * dyyy) / 8.0;
    let dz_j = (dx(&j_lat, 0) - i * dy(&j_lat, 0)) * 0.5;
    let dzb_j = (dx(&j_lat, 0) + i * dy(&j_lat, 0)) * 0.5;
    let dz_i = (dx(&i_lat, 0) - i * dy(&i_lat, 0)) * 0.5;
    let ip = nodes.point(Field::I, t + h_t, z);
    let im = nodes.point(Field::I, t - h_t, z);
    let dt = (ip - im) / (2.0 * h_t);
    let rhs = (dz3 * 4.0 - dz_j).re * 4.0;
    let residual = (dt - Complex64::new(rhs, 0.0)).norm();
    let constraint = (dzb_j + dz_i * 3.0).norm();
    (residual, constraint, dt.norm())
}

/// |∂_t I − 4Re(4∂_z³I − ∂_z J)| and |∂_z̄ J + 3∂_z I| by central differences at
/// steps (h_t, h_z) and (h_t/2, h_z/2).
pub fn check_linearized_pde(
    f: &LinearData,
    t: f64,
    z: Complex64,
    steps: (f64, f64),
    policy: &ResolutionPolicy,
) -> Result<PdeResidual> {
    let (h_t, h_z) = steps;
    if !(h_t > 0.0 && h_z > 0.0) {
        return Err(NvError::Config("finite-difference steps must be positive".into()));
    }
    if f.is_zero() {
        return Ok(PdeResidual {
            h_t,
            h_z,
            residual: 0.0,
            residual_half: 0.0,
            ratio: f64::NAN,
            constraint: 0.0,
            constraint_half: 0.0,
            constraint_ratio: f64::NAN,
            scale: 0.0,
        });
    }
    let nodes = nodes_for(f, policy, z.norm() + 3.0 * h_z, t.abs() + h_t)?;
    let (r1, c1, _) = stencil_residuals(&nodes, t, z, h_t, h_z);
    let (r2, c2, scale) = stencil_residuals(&nodes, t, z, h_t / 2.0, h_z / 2.0);
    if ![r1, c1, r2, c2].iter().all(|v| v.is_finite()) {
        return Err(NvError::NonFiniteSample { index: 0 });
    }
    Ok(PdeResidual {
        h_t,
        h_z,
        residual: r1,
        residual_half: r2,
        ratio: r1 / r2,
        constraint: c1,
        constraint_half: c2,
        constraint_ratio: c1 / c2,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornCheck {
    pub max_in_gap: f64,
    pub boundary_ratio: f64,
    pub half_width: f64,
    pub spacing: f64,
    /// |p| of the spectral peak.
    pub peak_p: f64,
}

/// Windowed DFT of z ↦ I(t, z) on [−L, L)² with the given spacing; returns the
/// largest relative spectral magnitude inside |p| < 1.6.
pub fn born_support_check(
    f: &LinearData,
    t: f64,
    half_width: f64,
    spacing: f64,
    policy: &ResolutionPolicy,
) -> Result<BornCheck> {
    let m = (2.0 * half_width / spacing).round() as usize;
    if m < 8 {
        return Err(NvError::Config("Born window needs at least 8 samples per side".into()));
    }
    if f.is_zero() {
        return Ok(BornCheck { max_in_gap: 0.0, boundary_ratio: 0.0, half_width, spacing, peak_p: 0.0 });
    }
    let xs: Vec<f64> = (0..m).map(|a| -half_width + a as f64 * spacing).collect();
    let nodes = nodes_for(f, policy, half_width * std::f64::consts::SQRT_2, t)?;
    let vals = nodes.lattice(Field::I, t, &xs, &xs);
    let max = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut edge = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            if a == 0 || b == 0 || a == m - 1 || b == m - 1 {
                edge = edge.max(vals[a * m + b].norm());
            }
        }
    }
    let boundary_ratio = edge / max;
    if boundary_ratio > 1e-3 {
        return Err(NvError::WindowTooSmall { ratio: boundary_ratio });
    }
    let spec = fft2(&vals, m);
    let dp = 2.0 * PI / (m as f64 * spacing);
    let freq = |a: usize| if a < m / 2 { a as f64 } else { a as f64 - m as f64 } * dp;
    let smax = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut gap = 0.0f64;
    let mut peak = (0.0, 0.0);
    for a in 0..m {
        for b in 0..m {
            let p = freq(a).hypot(freq(b));
            let v = spec[a * m + b].norm();
            if p < 1.6 {
                gap = gap.max(v);
            }
            if v > peak.0 {
                peak = (v, p);
            }
        }
    }
    Ok(BornCheck { max_in_gap: gap / smax, boundary_ratio, half_width, spacing, peak_p: peak.1 })
}

fn fft2(vals: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut data = vals.to_vec();
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![ZERO; m];
    for b in 0..m {
        for a in 0..m {
            col[a] = data[a * m + b];
        }
        fft.process(&mut col);
        for a in 0..m {
            data[a * m + b] = col[a];
        }
    }
    data
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub t: f64,
    pub u: Complex64,
    pub eps: f64,
    pub i_direct: Complex64,
    pub i_int: Complex64,
    /// I − I_int.
    pub i_ext: Complex64,
    pub i1: Complex64,
    pub i2: Complex64,
    pub i3: Complex64,
    /// −(1/t)(I₁ − I₂ − I₃).
    pub i_ext_parts: Complex64,
    /// |I − (I_int + I_ext_parts)| / |I|.
    pub rel_error: f64,
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[inline]
fn smooth_step(x: f64) -> f64 {
    // 1 for x ≤ 0, 0 for x ≥ 1, C^∞ in between
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - x)).exp();
        let b = (-1.0 / x).exp();
        a / (a + b)
    }
}

struct LocalPatch {
    center: Complex64,
    r_in: f64,
    r_out: f64,
}

impl LocalPatch {
    fn psi(&self, zeta: Complex64) -> f64 {
        let r = (zeta - self.center).norm();
        smooth_step((r - self.r_in) / (self.r_out - self.r_in))
    }
}

/// I = I_int + I_ext over D_ε (ε-disks around the stationary points) with
/// I_ext expanded by one integration by parts.
pub fn decompose_integral(
    f: &LinearData,
    t: f64,
    u: Complex64,
    eps: f64,
    policy: &ResolutionPolicy,
) -> Result<Decomposition> {
    if t == 0.0 || !t.is_finite() {
        return Err(NvError::Config("decomposition needs t ≠ 0".into()));
    }
    let z = u * t;
    let s_max = f.s_max(3.0);
    let grid = policy.grid(s_max, z.norm(), t, GridUse::Integral)?;
    let mut centers: Vec<Complex64> = Vec::new();
    for p in stationary_points(u) {
        if centers.iter().all(|c| (c - p.zeta).norm() > 1e-9) {
            centers.push(p.zeta);
        }
    }
    let spacing = centers.iter().map(|c| grid.spacing_at(*c)).fold(0.0, f64::max);
    if !(eps > 2.0 * spacing) {
        return Err(NvError::EpsilonTooSmall { eps, spacing });
    }
    for c in &centers {
        let s = c.norm().ln();
        let j = ((s + grid.s_max) / grid.ds - 0.5).round();
        let k = (c.arg().rem_euclid(2.0 * PI) / grid.dtheta).round();
        if j >= 0.0 && (j as usize) < grid.n_r {
            let node = grid.node(j as usize, (k as usize) % grid.n_theta);
            if (node - c).norm() < 1e-12 * c.norm() {
                return Err(NvError::StationaryPointOnGridNode);
            }
        }
    }
    let zero = Decomposition {
        t,
        u,
        eps,
        i_direct: ZERO,
        i_int: ZERO,
        i_ext: ZERO,
        i1: ZERO,
        i2: ZERO,
        i3: ZERO,
        i_ext_parts: ZERO,
        rel_error: 0.0,
    };
    if f.is_zero() {
        return Ok(zero);
    }
    let nodes = LinearNodes::new(f, grid.clone());
    let i_direct = nodes.point(Field::I, t, z);

    let phase_t = |zeta: Complex64| t * phase(u, zeta).unwrap_or(0.0);
    let inside = |zeta: Complex64| centers.iter().filter(|c| (zeta - **c).norm() < eps).count();

    // local patch radii: disjoint outer disks wherever possible
    let min_sep = |i: usize| {
        centers
            .iter()
            .enumerate()
            .filter(|(q, _)| *q != i)
            .map(|(_, c)| (c - centers[i]).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let patches: Vec<LocalPatch> = (0..centers.len())
        .map(|i| {
            let r_out = (0.45 * min_sep(i)).min(0.25).max(3.0 * eps);
            let r_in = (0.5 * r_out).max(1.5 * eps);
            LocalPatch { center: centers[i], r_in, r_out }
        })
        .collect();
    let psi_sum = |zeta: Complex64| patches.iter().map(|p| p.psi(zeta)).sum::<f64>();
    // partition weight of patch p, and of the global grid
    let local_weight = |p: &LocalPatch, zeta: Complex64| {
        let s = psi_sum(zeta);
        if s <= 1.0 {
            p.psi(zeta)
        } else {
            p.psi(zeta) / s
        }
    };
    let global_weight = |zeta: Complex64| (1.0 - psi_sum(zeta)).max(0.0);

    let integrands = |zeta: Complex64| -> (Complex64, Complex64) {
        let fz = f.f(zeta);
        let fd = f.f_zeta(zeta);
        if fz == ZERO && fd == ZERO {
            return (ZERO, ZERO);
        }
        let sp = phase_dzeta(u, zeta).unwrap_or(ZERO);
        let spp = phase_d2zeta(u, zeta).unwrap_or(ZERO);
        let e = Complex64::from_polar(1.0, phase_t(zeta));
        let x2 = fd * e / sp;
        let x3 = fz * spp * e / (sp * sp);
        (x2, x3)
    };

    // global part of I₂, I₃
    let nt = grid.n_theta;
    let g_parts: Vec<(Complex64, Complex64)> = (0..grid.n_r)
        .into_par_iter()
        .map(|j| {
            let w = grid.weight(j);
            let mut a2 = ZERO;
            let mut a3 = ZERO;
            for k in 0..nt {
                let zeta = grid.node(j, k);
                let gw = global_weight(zeta);
                if gw == 0.0 {
                    continue;
                }
                let (x2, x3) = integrands(zeta);
                a2 += x2 * gw;
                a3 += x3 * gw;
            }
            (a2 * w, a3 * w)
        })
        .collect();
    let mut x2 = neumaier_c(g_parts.iter().map(|p| p.0));
    let mut x3 = neumaier_c(g_parts.iter().map(|p| p.1));

    // local polar patches in (ln r, φ) on ε ≤ r ≤ r_out, and the disks r < ε
    let mut i_int = ZERO;
    // a patch whose annulus misses supp f contributes nothing
    let support = f.data.support();
    let misses = |c: Complex64, r: f64| match support {
        Some(w) => {
            let lo = (c.norm() - r).max(1e-300).ln();
            let hi = (c.norm() + r).ln();
            lo >= w || hi <= -w
        }
        None => false,
    };
    for p in &patches {
        if misses(p.center, p.r_out) {
            continue;
        }
        // phase rate per unit ln r, sampled only where the integrand lives
        let mut band = 0.0f64;
        for m in 0..=4 {
            let r = eps * (p.r_out / eps).powf(m as f64 / 4.0);
            for q in 0..256 {
                let zeta = p.center + Complex64::from_polar(r, 2.0 * PI * q as f64 / 256.0);
                if f.f(zeta) == ZERO && f.f_zeta(zeta) == ZERO {
                    continue;
                }
                let rate = phase_dzeta(u, zeta).map(|v| v.norm()).unwrap_or(0.0);
                band = band.max(2.0 * t.abs() * rate * r);
            }
        }
        let n_phi = (1.3 * band) as usize + 96;
        let span = (p.r_out / eps).ln();
        let n_l = (0.7 * band * span) as usize + 64;
        let (gx, gw) = gauss_legendre(n_l);
        let dphi = 2.0 * PI / n_phi as f64;
        let parts: Vec<(Complex64, Complex64)> = (0..n_l)
            .into_par_iter()
            .map(|a| {
                let l = eps.ln() + 0.5 * span * (gx[a] + 1.0);
                let r = l.exp();
                let w = 0.5 * span * gw[a] * r * r * dphi;
                let mut a2 = ZERO;
                let mut a3 = ZERO;
                for q in 0..n_phi {
                    let zeta = p.center + Complex64::from_polar(r, q as f64 * dphi);
                    if inside(zeta) > 0 {
                        continue;
                    }
                    let lw = local_weight(p, zeta);
                    if lw == 0.0 {
                        continue;
                    }
                    let (v2, v3) = integrands(zeta);
                    a2 += v2 * lw;
                    a3 += v3 * lw;
                }
                (a2 * w, a3 * w)
            })
            .collect();
        x2 += neumaier_c(parts.iter().map(|p| p.0));
        x3 += neumaier_c(parts.iter().map(|p| p.1));

        // I_int over the ε-disk, shared points weighted by multiplicity
        let nr_int = 48;
        let nphi_int = 96;
        let (dx, dw) = gauss_legendre(nr_int);
        let dphi = 2.0 * PI / nphi_int as f64;
        let mut acc = ZERO;
        for a in 0..nr_int {
            let r = 0.5 * eps * (dx[a] + 1.0);
            let w = 0.5 * eps * dw[a] * r * dphi;
            for q in 0..nphi_int {
                let zeta = p.center + Complex64::from_polar(r, q as f64 * dphi);
                let fz = f.f(zeta);
                if fz == ZERO {
                    continue;
                }
                let mult = inside(zeta).max(1) as f64;
                acc += fz * Complex64::from_polar(1.0, phase_t(zeta)) * (w / mult);
            }
        }
        i_int += acc;
    }

    // boundary term over the union boundary, clockwise around each disk
    let mut boundary = ZERO;
    let contour = |zeta: Complex64| -> Complex64 {
        let fz = f.f(zeta);
        if fz == ZERO {
            return ZERO;
        }
        let sp = phase_dzeta(u, zeta).unwrap_or(ZERO);
        fz * Complex64::from_polar(1.0, phase_t(zeta)) / sp
    };
    for (i, c) in centers.iter().enumerate() {
        if misses(*c, eps) {
            continue;
        }
        // ∮_cw F dζ̄ = ∫₀^{2π} F·iεe^{−iφ} dφ
        let factor = |phi: f64| Complex64::i() * Complex64::from_polar(eps, -phi);
        let mut cuts: Vec<f64> = Vec::new();
        for (q, o) in centers.iter().enumerate() {
            if q == i {
                continue;
            }
            let d = (o - c).norm();
            if d < 2.0 * eps {
                let base = (o - c).arg();
                let half = (d / (2.0 * eps)).acos();
                cuts.push((base - half).rem_euclid(2.0 * PI));
                cuts.push((base + half).rem_euclid(2.0 * PI));
            }
        }
        if cuts.is_empty() {
            let n = 64;
            let h = 2.0 * PI / n as f64;
            for q in 0..n {
                let phi = q as f64 * h;
                let zeta = c + Complex64::from_polar(eps, phi);
                boundary += contour(zeta) * factor(phi) * h;
            }
        } else {
            cuts.sort_by(|a, b| a.total_cmp(b));
            let (gx, gw) = gauss_legendre(64);
            for a in 0..cuts.len() {
                let lo = cuts[a];
                let hi = if a + 1 < cuts.len() { cuts[a + 1] } else { cuts[0] + 2.0 * PI };
                let mid = 0.5 * (lo + hi);
                let zm = c + Complex64::from_polar(eps, mid);
                let covered = centers.iter().enumerate().any(|(q, o)| q != i && (zm - o).norm() < eps);
                if covered {
                    continue;
                }
                for g in 0..64 {
                    let phi = mid + 0.5 * (hi - lo) * gx[g];
                    let zeta = c + Complex64::from_polar(eps, phi);
                    boundary += contour(zeta) * factor(phi) * (0.5 * (hi - lo) * gw[g]);
                }
            }
        }
    }
    let i1 = -boundary * 0.5;
    let i2 = Complex64::i() * x2;
    let i3 = -Complex64::i() * x3;
    let i_ext_parts = -(i1 - i2 - i3) / t;
    let i_ext = i_direct - i_int;
    let rel_error = (i_direct - (i_int + i_ext_parts)).norm() / i_direct.norm();
    Ok(Decomposition { t, u, eps, i_direct, i_int, i_ext, i1, i2, i3, i_ext_parts, rel_error })
}

/// max over the u-lattice of |I(t,u)|·(1+t)/ln(3+t) for each t.
pub fn uniform_decay(
    f: &LinearData,
    t_list: &[f64],
    us: &[f64],
    vs: &[f64],
    policy: &ResolutionPolicy,
) -> Result<Vec<(f64, f64, Complex64)>> {
    let mut out = Vec::new();
    let umax = us.iter().chain(vs.iter()).fold(0.0f64, |a, b| a.max(b.abs())) * std::f64::consts::SQRT_2;
    for &t in t_list {
        let nodes = nodes_for(f, policy, umax * t.abs(), t)?;
        let xs: Vec<f64> = us.iter().map(|x| x * t).collect();
        let ys: Vec<f64> = vs.iter().map(|y| y * t).collect();
        let vals = nodes.lattice(Field::I, t, &xs, &ys);
        let norm = (1.0 + t.abs()) / (3.0 + t.abs()).ln();
        let mut best = (0.0, ZERO);
        for (idx, v) in vals.iter().enumerate() {
            let m = v.norm() * norm;
            if m > best.0 {
                best = (m, Complex64::new(us[idx / vs.len()], vs[idx % vs.len()]));
            }
        }
        out.push((t, best.0, best.1));
    }
    Ok(out)
}
