//! Log-polar discretization of the plane and area quadrature.
//!
//! Nodes sit at midpoints s_j = −S + (j + ½)Δs of [−S, S] and θ_k = kΔθ, so the
//! unit circle s = 0 is never a node and the reflection ρ → 1/ρ maps nodes to nodes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};

pub mod cauchy;
pub use cauchy::CauchyPlan;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub s_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub ds: f64,
    pub dtheta: f64,
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub cos_t: Vec<f64>,
    pub sin_t: Vec<f64>,
}

impl RadialGrid {
    pub fn new(s_max: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(NvError::Config(format!("s_max must be positive, got {s_max}")));
        }
        if n_r < 2 || !n_r.is_multiple_of(2) || n_theta < 2 || !n_theta.is_multiple_of(2) {
            return Err(NvError::Config(format!("n_r={n_r} and n_theta={n_theta} must be even and >= 2")));
        }
        let ds = 2.0 * s_max / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let s: Vec<f64> = (0..n_r).map(|j| -s_max + (j as f64 + 0.5) * ds).collect();
        let rho = s.iter().map(|v| v.exp()).collect();
        let theta: Vec<f64> = (0..n_theta).map(|k| k as f64 * dtheta).collect();
        let cos_t = theta.iter().map(|t| t.cos()).collect();
        let sin_t = theta.iter().map(|t| t.sin()).collect();
        Ok(RadialGrid { s_max, n_r, n_theta, ds, dtheta, s, rho, theta, cos_t, sin_t })
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> Complex64 {
        Complex64::new(self.rho[j] * self.cos_t[k], self.rho[j] * self.sin_t[k])
    }

    /// Area weight ρ²ΔsΔθ of every node on ring j.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.rho[j] * self.rho[j] * self.ds * self.dtheta
    }

    pub fn total_weight(&self) -> f64 {
        neumaier((0..self.n_r).map(|j| self.weight(j) * self.n_theta as f64))
    }

    /// Exact area of the annulus covered by the grid.
    pub fn annulus_area(&self) -> f64 {
        PI * ((2.0 * self.s_max).exp() - (-2.0 * self.s_max).exp())
    }

    pub fn refined(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.s_max, 2 * self.n_r, 2 * self.n_theta)
    }

    /// Number of rings with |s| < width.
    pub fn rings_within(&self, width: f64) -> usize {
        self.s.iter().filter(|s| s.abs() < width).count()
    }

    /// Samples a function of the node position, ring-major.
    pub fn sample<F>(&self, f: F) -> Vec<Complex64>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        out.par_chunks_mut(self.n_theta).enumerate().for_each(|(j, row)| {
            for (k, v) in row.iter_mut().enumerate() {
                *v = f(self.node(j, k));
            }
        });
        out
    }

    /// Grid spacing near λ in the plane.
    pub fn spacing_at(&self, lambda: Complex64) -> f64 {
        lambda.norm().max((-self.s_max).exp()) * self.ds.max(self.dtheta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub est_error: f64,
}

/// Neumaier-compensated sum in iteration order.
pub fn neumaier<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn neumaier_c<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for z in it {
        re.push(z.re);
        im.push(z.im);
    }
    Complex64::new(neumaier(re), neumaier(im))
}

/// Ring partial sums in parallel, then a compensated reduce in ring order.
fn reduce_rings<F>(n_r: usize, ring: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync + Send,
{
    let parts: Vec<Complex64> = (0..n_r).into_par_iter().map(ring).collect();
    neumaier_c(parts)
}

/// Weighted sum of node samples.
pub fn integrate_samples(grid: &RadialGrid, values: &[Complex64]) -> Result<Complex64> {
    assert_eq!(values.len(), grid.len());
    if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(NvError::NonFiniteSample { index });
    }
    Ok(reduce_rings(grid.n_r, |j| {
        let row = &values[j * grid.n_theta..(j + 1) * grid.n_theta];
        row.iter().sum::<Complex64>() * grid.weight(j)
    }))
}

/// ∬ f dA over the grid; with `estimate` the ×2-refined grid supplies est_error.
pub fn integrate<F>(grid: &RadialGrid, f: F, estimate: bool) -> Result<QuadratureResult>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let value = integrate_samples(grid, &grid.sample(&f))?;
    let est_error = if estimate {
        let fine = grid.refined()?;
        (integrate_samples(&fine, &fine.sample(&f))? - value).norm()
    } else {
        0.0
    };
    Ok(QuadratureResult { value, est_error })
}

/// Relative exclusion radius below which the cutoff would no longer be resolved.
pub const MIN_EXCLUSION: f64 = 0.15;

/// Exclusion radius of the singularity subtraction around λ.
pub fn exclusion_radius(grid: &RadialGrid, lambda: Complex64) -> f64 {
    let scale = lambda.norm().max((-grid.s_max).exp());
    (2.0 * grid.ds.max(grid.dtheta)).max(MIN_EXCLUSION) * scale
}

/// Smooth radial cutoff, 1 at the center and flat at radius 1.
#[inline]
fn cutoff(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

fn cauchy_sum<F>(grid: &RadialGrid, f: &F, lambda: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let delta = exclusion_radius(grid, lambda);
    let f_lambda = f(lambda);
    if !f_lambda.re.is_finite() || !f_lambda.im.is_finite() {
        return Err(NvError::NonFiniteSample { index: usize::MAX });
    }
    let bad = std::sync::atomic::AtomicUsize::new(usize::MAX);
    let total = reduce_rings(grid.n_r, |j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..grid.n_theta {
            let zeta = grid.node(j, k);
            let mut v = f(zeta);
            if !v.re.is_finite() || !v.im.is_finite() {
                bad.store(j * grid.n_theta + k, std::sync::atomic::Ordering::Relaxed);
                continue;
            }
            let d = zeta - lambda;
            let x = d.norm() / delta;
            if x < 1.0 {
                v -= f_lambda * cutoff(x);
            }
            if d.norm_sqr() > 0.0 {
                acc += v / d;
            }
        }
        acc * grid.weight(j)
    });
    let index = bad.load(std::sync::atomic::Ordering::Relaxed);
    if index != usize::MAX {
        return Err(NvError::NonFiniteSample { index });
    }
    Ok(total)
}

/// ∬ f(ζ)/(ζ − λ) dA by local singularity subtraction.
///
/// f(λ)·χ(|ζ − λ|/δ) is removed from the integrand; its Cauchy integral vanishes
/// by angular symmetry for any radial χ.
pub fn integrate_cauchy<F>(grid: &RadialGrid, f: F, lambda: Complex64, estimate: bool) -> Result<QuadratureResult>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let value = cauchy_sum(grid, &f, lambda)?;
    let est_error = if estimate {
        let fine = grid.refined()?;
        (cauchy_sum(&fine, &f, lambda)? - value).norm()
    } else {
        0.0
    };
    Ok(QuadratureResult { value, est_error })
}

/// Smallest even integer ≥ n whose only prime factors are 2, 3 and 5.
pub fn smooth_even(n: usize) -> usize {
    let mut m = n.max(2);
    if m % 2 == 1 {
        m += 1;
    }
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}

/// Phase bandwidths of e^{iS(λ,z,t)} on |s| ≤ S: (per unit θ, per unit s).
pub fn phase_bandwidth(s_max: f64, z_abs: f64, t: f64) -> (f64, f64) {
    let t = t.abs();
    let b_theta = 2.0 * s_max.cosh() * z_abs + 12.0 * t * (3.0 * s_max).cosh();
    let b_s = 2.0 * s_max.sinh() * z_abs + 12.0 * t * (3.0 * s_max).sinh();
    (b_theta, b_s)
}

/// How a grid will be used; FFT-based operators need alias-free mode products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridUse {
    Integral,
    Operator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    pub min_n_r: usize,
    pub min_n_theta: usize,
    /// Scale the phase-resolving node counts by this factor.
    pub oversample: f64,
    pub max_nodes: usize,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy { min_n_r: 96, min_n_theta: 96, oversample: 1.0, max_nodes: 40_000_000 }
    }
}

impl ResolutionPolicy {
    /// Grid sizes resolving e^{iS} for |z| ≤ z_abs at time t.
    pub fn sizes(&self, s_max: f64, z_abs: f64, t: f64, usage: GridUse) -> Result<(usize, usize)> {
        let (bt, bs) = phase_bandwidth(s_max, z_abs, t);
        let k = self.oversample;
        let theta_factor = match usage {
            GridUse::Integral => 1.2,
            GridUse::Operator => 2.4,
        };
        let n_theta = ((theta_factor * k * bt).ceil() as usize + 64).max(self.min_n_theta);
        let mut n_r = ((1.3 * k * bs * 2.0 * s_max / PI).ceil() as usize + 128).max(self.min_n_r);
        // keep at least 8 rings inside the flat band |s| < 0.2
        let min_for_band = (2.0 * s_max / (0.4 / 9.0)).ceil() as usize;
        n_r = n_r.max(min_for_band);
        let (n_r, n_theta) = (smooth_even(n_r), smooth_even(n_theta));
        let nodes = n_r * n_theta;
        if nodes > self.max_nodes {
            return Err(NvError::ResolutionBudget { nodes, budget: self.max_nodes });
        }
        Ok((n_r, n_theta))
    }

    pub fn grid(&self, s_max: f64, z_abs: f64, t: f64, usage: GridUse) -> Result<RadialGrid> {
        let (n_r, n_theta) = self.sizes(s_max, z_abs, t, usage)?;
        RadialGrid::new(s_max, n_r, n_theta)
    }
}
