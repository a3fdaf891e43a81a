//! Neumann iteration for μ = 1 + A μ and reconstruction of v(z, t) = 2i ∂_z μ₋₁.
//!
//! (A f)(λ) = −(1/π)∬ r(ζ)e^{iS(ζ,z,t)} conj(f(ζ))/(ζ − λ) dA,
//! B·f = ∬ r(ζ)e^{iS(ζ,z,t)} conj(f(ζ)) dA and μ₋₁ = (1/π)·B·μ.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cplane_quadrature::{
    integrate_samples, neumaier_c, CauchyPlan, GridUse, RadialGrid, ResolutionPolicy,
};
use crate::error::{NvError, Result};
use crate::scattering_data::ScatteringData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_mu: f64,
    pub max_iter: usize,
    pub stencil_h: f64,
    /// Upper bound on ‖A²·1‖∞ accepted before iterating.
    pub gate: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_mu: 1e-9, max_iter: 50, stencil_h: 1e-3, gate: 0.5 }
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Grid-dependent tables shared by every (z, t) on one grid.
pub struct DbarContext {
    pub grid: RadialGrid,
    pub data: ScatteringData,
    pub config: SolverConfig,
    plan: CauchyPlan,
    r0: Vec<Complex64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    omega: Vec<f64>,
}

impl DbarContext {
    pub fn new(data: ScatteringData, grid: RadialGrid, config: SolverConfig) -> Result<Self> {
        let n = grid.len();
        let mut r0 = vec![ZERO; n];
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut omega = vec![0.0; n];
        let nt = grid.n_theta;
        for j in 0..grid.n_r {
            let rho = grid.rho[j];
            let sigma = rho + 1.0 / rho;
            let cube = 2.0 * (rho.powi(3) + rho.powi(-3));
            for k in 0..nt {
                let i = j * nt + k;
                let lam = grid.node(j, k);
                r0[i] = data.r(lam)?;
                w1[i] = sigma * grid.cos_t[k];
                w2[i] = sigma * grid.sin_t[k];
                omega[i] = cube * (3.0 * grid.theta[k]).cos();
            }
        }
        let plan = CauchyPlan::new(&grid);
        Ok(DbarContext { grid, data, config, plan, r0, w1, w2, omega })
    }

    /// Context whose grid resolves the phase for |z| ≤ z_abs at time t.
    pub fn for_point(
        data: ScatteringData,
        s_max: f64,
        policy: &ResolutionPolicy,
        z_abs: f64,
        t: f64,
        config: SolverConfig,
    ) -> Result<Self> {
        let grid = policy.grid(s_max, z_abs, t, GridUse::Operator)?;
        DbarContext::new(data, grid, config)
    }

    pub fn operator(&self, z: Complex64, t: f64) -> DbarOperator<'_> {
        let n = self.grid.len();
        let mut q = vec![ZERO; n];
        q.par_iter_mut().enumerate().for_each(|(i, v)| {
            let r = self.r0[i];
            if r != ZERO {
                let s = -(z.re * self.w1[i] + z.im * self.w2[i]) + t * self.omega[i];
                *v = r * Complex64::from_polar(1.0, s);
            }
        });
        let trivial = q.iter().all(|v| *v == ZERO);
        DbarOperator { ctx: self, z, t, q, trivial }
    }

    pub fn solve_mu(&self, z: Complex64, t: f64) -> Result<MuSolution> {
        self.operator(z, t).solve(None, true)
    }

    pub fn reconstruct_v(&self, z: Complex64, t: f64) -> Result<PotentialSample> {
        let h = self.config.stencil_h;
        let offsets = [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)];
        let first = self.operator(z + offsets[0], t).solve(None, true)?;
        let mut m = [first.mu_minus1, ZERO, ZERO, ZERO];
        let mut iterations = first.iterations;
        let mut residual = first.residual;
        for (slot, dz) in offsets.iter().enumerate().skip(1) {
            let sol = self.operator(z + dz, t).solve(Some(&first.mu), false)?;
            m[slot] = sol.mu_minus1;
            iterations = iterations.max(sol.iterations);
            residual = residual.max(sol.residual);
        }
        let dx = (m[0] - m[1]) / (2.0 * h);
        let dy = (m[2] - m[3]) / (2.0 * h);
        let dz = (dx - Complex64::i() * dy) * 0.5;
        let v = Complex64::i() * 2.0 * dz;
        Ok(PotentialSample { z, t, v, imag_leak: v.im.abs(), iterations, residual })
    }
}

pub struct DbarOperator<'a> {
    ctx: &'a DbarContext,
    pub z: Complex64,
    pub t: f64,
    q: Vec<Complex64>,
    trivial: bool,
}

impl<'a> DbarOperator<'a> {
    /// r(ζ)e^{iS(ζ,z,t)} at the nodes.
    pub fn coefficient(&self) -> &[Complex64] {
        &self.q
    }

    fn density(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        assert_eq!(f.len(), self.q.len());
        if let Some(index) = f.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(NvError::NonFiniteSample { index });
        }
        Ok(self.q.par_iter().zip(f.par_iter()).map(|(q, v)| q * v.conj()).collect())
    }

    pub fn apply_a(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.trivial {
            return Ok(vec![ZERO; self.q.len()]);
        }
        let g = self.density(f)?;
        let mut out = self.ctx.plan.transform(&g);
        out.par_iter_mut().for_each(|v| *v *= -1.0 / PI);
        Ok(out)
    }

    pub fn apply_b(&self, f: &[Complex64]) -> Result<Complex64> {
        if self.trivial {
            return Ok(ZERO);
        }
        let g = self.density(f)?;
        integrate_samples(&self.ctx.grid, &g)
    }

    /// Fixed-point iteration μ ← 1 + Aμ from `init` (or 1).
    pub fn solve(&self, init: Option<&[Complex64]>, gate: bool) -> Result<MuSolution> {
        let n = self.q.len();
        let cfg = &self.ctx.config;
        if self.trivial {
            return Ok(MuSolution {
                mu: vec![ONE; n],
                mu_minus1: ZERO,
                iterations: 0,
                residual: 0.0,
                series: vec![ZERO; 3],
                contraction: 0.0,
                a2_norm: 0.0,
            });
        }
        let cold = init.is_none();
        let mut mu: Vec<Complex64> = match init {
            Some(m) => m.to_vec(),
            None => vec![ONE; n],
        };
        let mut series = Vec::new();
        let mut prev_increment: Option<Vec<Complex64>> = None;
        let mut residual = f64::INFINITY;
        let mut last_res = f64::INFINITY;
        let mut contraction = 0.0;
        let mut a2_norm = f64::NAN;
        let mut iterations = 0;
        while iterations < cfg.max_iter {
            let amu = self.apply_a(&mu)?;
            let next: Vec<Complex64> = amu.iter().map(|v| ONE + v).collect();
            let increment: Vec<Complex64> = next.iter().zip(mu.iter()).map(|(a, b)| a - b).collect();
            residual = increment.iter().map(|v| v.norm()).fold(0.0, f64::max);
            iterations += 1;
            if cold && iterations <= 3 {
                // increments of the cold iteration are the terms A^k·1
                let term = if iterations == 1 { vec![ONE; n] } else { prev_increment.clone().unwrap() };
                series.push(self.apply_b(&term)? / PI);
                if iterations == 2 {
                    a2_norm = residual;
                    if gate && !(a2_norm < cfg.gate) {
                        return Err(NvError::NoConvergence { residual: a2_norm, iterations });
                    }
                }
            }
            if last_res.is_finite() && last_res > 0.0 {
                contraction = residual / last_res;
            }
            mu = next;
            if !residual.is_finite() {
                return Err(NvError::NoConvergence { residual, iterations });
            }
            if residual < cfg.tol_mu {
                break;
            }
            last_res = residual;
            prev_increment = Some(increment);
        }
        if !(residual < cfg.tol_mu) {
            return Err(NvError::NoConvergence { residual, iterations });
        }
        let mu_minus1 = self.apply_b(&mu)? / PI;
        Ok(MuSolution { mu, mu_minus1, iterations, residual, series, contraction, a2_norm })
    }
}

#[derive(Debug, Clone)]
pub struct MuSolution {
    pub mu: Vec<Complex64>,
    pub mu_minus1: Complex64,
    pub iterations: usize,
    pub residual: f64,
    /// aₖ = (1/π)·B·(A^{k−1}·1) for the first terms of a cold start.
    pub series: Vec<Complex64>,
    /// Ratio of the last two update norms.
    pub contraction: f64,
    /// ‖A²·1‖∞ (NaN for warm starts).
    pub a2_norm: f64,
}

impl MuSolution {
    /// max |μ − 1|·|λ| / |μ₋₁| over the outermost ring.
    pub fn outer_ring_ratio(&self, grid: &RadialGrid) -> f64 {
        let j = grid.n_r - 1;
        let nt = grid.n_theta;
        let worst = self.mu[j * nt..(j + 1) * nt].iter().map(|m| (m - ONE).norm()).fold(0.0, f64::max);
        worst * grid.rho[j] / self.mu_minus1.norm()
    }

    /// Largest jump of μ between adjacent rings relative to the median jump.
    pub fn ring_jump_ratio(&self, grid: &RadialGrid) -> f64 {
        let nt = grid.n_theta;
        let mut jumps: Vec<f64> = (1..grid.n_r)
            .map(|j| {
                (0..nt).map(|k| (self.mu[j * nt + k] - self.mu[(j - 1) * nt + k]).norm()).fold(0.0, f64::max)
            })
            .collect();
        let max = jumps.iter().cloned().fold(0.0, f64::max);
        jumps.sort_by(|a, b| a.total_cmp(b));
        let median = jumps[jumps.len() / 2];
        if median == 0.0 {
            if max == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            max / median
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub z: Complex64,
    pub t: f64,
    pub v: Complex64,
    pub imag_leak: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// −(1/π)∬ r e^{iS} conj(f)/(ζ − λ) dA by a plain Riemann sum on an
/// (n_r × n_theta) log-polar grid rotated by `theta_offset`.
#[allow(clippy::too_many_arguments)]
pub fn direct_apply_a<F>(
    data: &ScatteringData,
    z: Complex64,
    t: f64,
    s_max: f64,
    n_r: usize,
    n_theta: usize,
    theta_offset: f64,
    f: F,
    lambda: Complex64,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let ds = 2.0 * s_max / n_r as f64;
    let dt = 2.0 * PI / n_theta as f64;
    let rings: Vec<Result<Complex64>> = (0..n_r)
        .into_par_iter()
        .map(|j| {
            let s = -s_max + (j as f64 + 0.5) * ds;
            let rho = s.exp();
            let mut acc = ZERO;
            for k in 0..n_theta {
                let zeta = Complex64::from_polar(rho, k as f64 * dt + theta_offset);
                let r = data.r_at(zeta, z, t)?;
                if r == ZERO {
                    continue;
                }
                acc += r * f(zeta).conj() / (zeta - lambda);
            }
            Ok(acc * rho * rho * ds * dt)
        })
        .collect();
    let parts: Result<Vec<Complex64>> = rings.into_iter().collect();
    Ok(-neumaier_c(parts?) / PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(c: f64, n_r: usize, n_t: usize) -> DbarContext {
        let data = ScatteringData::bump(c, 0.6);
        DbarContext::new(data, RadialGrid::new(0.6, n_r, n_t).unwrap(), SolverConfig::default()).unwrap()
    }

    #[test]
    fn zero_data_is_free() {
        let cx = ctx(0.0, 32, 32);
        let op = cx.operator(Complex64::new(1.0, 2.0), 0.5);
        let ones = vec![ONE; cx.grid.len()];
        assert!(op.apply_a(&ones).unwrap().iter().all(|v| *v == ZERO));
        let sol = cx.solve_mu(Complex64::new(1.0, 2.0), 0.5).unwrap();
        assert!(sol.mu.iter().all(|m| *m == ONE));
        assert_eq!(sol.mu_minus1, ZERO);
        assert_eq!(cx.reconstruct_v(Complex64::new(0.3, 0.0), 1.0).unwrap().v, ZERO);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let cx = ctx(0.05, 32, 32);
        let op = cx.operator(Complex64::new(1.0, 0.0), 0.2);
        let zeros = vec![ZERO; cx.grid.len()];
        assert!(op.apply_a(&zeros).unwrap().iter().all(|v| v.norm() == 0.0));
        assert_eq!(op.apply_b(&zeros).unwrap(), ZERO);
    }

    #[test]
    fn conjugate_linear() {
        let cx = ctx(0.05, 64, 64);
        let op = cx.operator(Complex64::new(0.5, -1.0), 0.3);
        let f: Vec<Complex64> = (0..cx.grid.len()).map(|i| Complex64::new((i as f64 * 0.01).sin(), 0.3)).collect();
        let a = Complex64::new(0.2, 1.7);
        let af: Vec<Complex64> = f.iter().map(|v| v * a).collect();
        let lhs = op.apply_a(&af).unwrap();
        let rhs = op.apply_a(&f).unwrap();
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            assert!((l - r * a.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn series_and_fixed_point_agree() {
        let cx = ctx(0.05, 96, 128);
        let z = Complex64::new(1.0, 1.0);
        let op = cx.operator(z, 0.5);
        let sol = op.solve(None, true).unwrap();
        let ones = vec![ONE; cx.grid.len()];
        let b1 = op.apply_b(&ones).unwrap() / PI;
        assert!((sol.series[0] - b1).norm() < 1e-15);
        let a1 = op.apply_a(&ones).unwrap();
        let a2 = op.apply_a(&a1).unwrap();
        let a3 = op.apply_a(&a2).unwrap();
        let q = a2.iter().map(|v| v.norm()).fold(0.0, f64::max) / a1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tail = a3.iter().map(|v| v.norm()).fold(0.0, f64::max) * q / (1.0 - q);
        let err = (0..cx.grid.len())
            .map(|i| (sol.mu[i] - (ONE + a1[i] + a2[i] + a3[i])).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1.1 * tail + 1e-9, "{err} {tail}");
        assert!(sol.iterations <= 50);
    }
}
