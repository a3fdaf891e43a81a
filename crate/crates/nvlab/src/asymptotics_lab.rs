//! Decay sweeps of the reconstructed potential, ray scans and the fitted
//! constant of the ln(3+t)/(1+t) estimate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cplane_quadrature::ResolutionPolicy;
use crate::dbar_solver::{DbarContext, PotentialSample, SolverConfig};
use crate::error::{NvError, Result};
use crate::scattering_data::ScatteringData;

pub fn normalizer(t: f64) -> f64 {
    (3.0 + t.abs()).ln() / (1.0 + t.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub t: f64,
    pub sup_v: f64,
    pub argmax_z: Complex64,
    pub normalizer: f64,
    pub ratio: f64,
    pub failed: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DecayCurve {
    pub entries: Vec<DecayEntry>,
}

impl DecayCurve {
    pub fn from_entries(entries: Vec<DecayEntry>) -> Result<Self> {
        if entries.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(NvError::Config("decay curve times must be strictly increasing".into()));
        }
        if entries.iter().any(|e| !(e.sup_v >= 0.0)) {
            return Err(NvError::Config("sup_v must be non-negative".into()));
        }
        Ok(DecayCurve { entries })
    }

    /// Curve with sup_v given directly; argmax and counts left empty.
    pub fn synthetic(points: &[(f64, f64)]) -> Result<Self> {
        let entries = points
            .iter()
            .map(|&(t, sup_v)| DecayEntry {
                t,
                sup_v,
                argmax_z: Complex64::new(0.0, 0.0),
                normalizer: normalizer(t),
                ratio: sup_v / normalizer(t),
                failed: 0,
                points: 0,
            })
            .collect();
        DecayCurve::from_entries(entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Lattice points per side.
    pub n: usize,
    /// Half-width of the window in units of |t|.
    pub window_factor: f64,
    pub s_max: f64,
    pub solver: SolverConfig,
    pub policy: ResolutionPolicy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: 64,
            window_factor: 30.0,
            s_max: 0.6,
            solver: SolverConfig::default(),
            policy: ResolutionPolicy::default(),
        }
    }
}

impl SweepConfig {
    pub fn half_width(&self, t: f64) -> f64 {
        self.window_factor * t.abs().max(1.0)
    }

    /// The lattice nodes at time t, row-major over (x, y).
    pub fn lattice(&self, t: f64) -> Vec<Complex64> {
        let l = self.half_width(t);
        let n = self.n;
        let step = if n > 1 { 2.0 * l / (n - 1) as f64 } else { 0.0 };
        let coord = |a: usize| if n > 1 { -l + a as f64 * step } else { 0.0 };
        (0..n * n).map(|i| Complex64::new(coord(i / n), coord(i % n))).collect()
    }
}

/// v at one (z, t) on a grid sized for that point.
pub fn sample_v(data: &ScatteringData, z: Complex64, t: f64, cfg: &SweepConfig) -> Result<PotentialSample> {
    if data.c == 0.0 {
        return Ok(PotentialSample {
            z,
            t,
            v: Complex64::new(0.0, 0.0),
            imag_leak: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let ctx = DbarContext::for_point(*data, cfg.s_max, &cfg.policy, z.norm(), t, cfg.solver)?;
    ctx.reconstruct_v(z, t)
}

/// sup |v| over the z-lattice of half-width window_factor·t for each t.
pub fn decay_sweep(data: &ScatteringData, t_list: &[f64], cfg: &SweepConfig) -> Result<DecayCurve> {
    if cfg.n < 3 {
        return Err(NvError::Config("sweep lattice needs n ≥ 3".into()));
    }
    let mut entries = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let zs = cfg.lattice(t);
        let results: Vec<Result<PotentialSample>> = zs.par_iter().map(|&z| sample_v(data, z, t, cfg)).collect();
        let mut failed = 0;
        let mut best: Option<(f64, usize)> = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(p) => {
                    let a = p.v.norm();
                    if best.is_none_or(|b| a > b.0) {
                        best = Some((a, i));
                    }
                }
                Err(NvError::NoConvergence { .. }) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        let total = zs.len();
        if failed * 100 > total {
            return Err(NvError::TooManyFailures { failed, total });
        }
        let (sup_v, idx) = best.unwrap_or((0.0, 0));
        let n = cfg.n;
        let (a, b) = (idx / n, idx % n);
        if sup_v > 0.0 && (a == 0 || b == 0 || a == n - 1 || b == n - 1) {
            return Err(NvError::WindowBoundary { argmax: format!("{}", zs[idx]) });
        }
        let nz = normalizer(t);
        entries.push(DecayEntry {
            t,
            sup_v,
            argmax_z: zs[idx],
            normalizer: nz,
            ratio: sup_v / nz,
            failed,
            points: total,
        });
    }
    DecayCurve::from_entries(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayScan {
    pub u: Complex64,
    /// (t, |v(ut, t)|)
    pub samples: Vec<(f64, f64)>,
}

impl RayScan {
    pub fn strictly_decreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// |v(ut, t)| along the ray z = ut.
pub fn ray_scan(data: &ScatteringData, u: Complex64, t_list: &[f64], cfg: &SweepConfig) -> Result<RayScan> {
    if t_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NvError::Config("ray times must be strictly increasing".into()));
    }
    let samples: Vec<Result<(f64, f64)>> =
        t_list.par_iter().map(|&t| sample_v(data, u * t, t, cfg).map(|p| (t, p.v.norm()))).collect();
    Ok(RayScan { u, samples: samples.into_iter().collect::<Result<_>>()? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    /// max sup_v·(1+t)/ln(3+t)
    pub c_hat: f64,
    /// max ratio relative to the first entry's ratio
    pub max_ratio: f64,
    /// max sup_v·(1+t), the constant of a plain 1/t fit
    pub c_hat_inverse_t: f64,
    /// growth of sup_v·(1+t) relative to the first entry
    pub max_ratio_inverse_t: f64,
    /// max_ratio ≤ 3
    pub bounded: bool,
}

pub fn fit_constant(curve: &DecayCurve) -> Result<ConstantFit> {
    let e = &curve.entries;
    if e.len() < 4 {
        return Err(NvError::InsufficientData { needed: 4, got: e.len() });
    }
    let rel = |xs: Vec<f64>| {
        let first = xs[0];
        let max = xs.iter().cloned().fold(0.0, f64::max);
        let growth = if first > 0.0 { max / first } else if max == 0.0 { 0.0 } else { f64::INFINITY };
        (max, growth)
    };
    let (c_hat, max_ratio) = rel(e.iter().map(|x| x.ratio).collect());
    let (c_hat_inverse_t, max_ratio_inverse_t) = rel(e.iter().map(|x| x.sup_v * (1.0 + x.t.abs())).collect());
    Ok(ConstantFit { c_hat, max_ratio, c_hat_inverse_t, max_ratio_inverse_t, bounded: max_ratio <= 3.0 })
}

/// Ray velocities of the n×n lattice over [−r, r]².
pub fn ray_lattice(n: usize, r: f64) -> Vec<Complex64> {
    let step = if n > 1 { 2.0 * r / (n - 1) as f64 } else { 0.0 };
    (0..n * n)
        .map(|i| Complex64::new(-r + (i / n) as f64 * step, -r + (i % n) as f64 * step))
        .collect()
}
