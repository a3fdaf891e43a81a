//! Cauchy transform C[g](λ) = ∬ g(ζ)/(ζ − λ) dA at every grid node.
//!
//! Angular Fourier modes decouple the kernel: output mode n receives input mode
//! n + 1 through a one-sided exponential convolution in s, which is solved
//! spectrally on the periodic s-grid and then corrected for the wrap-around by
//! the homogeneous solution. Requires g to vanish smoothly at |s| = S.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::RadialGrid;

pub struct CauchyPlan {
    n_r: usize,
    n_theta: usize,
    ds: f64,
    s_max: f64,
    exp_s: Vec<f64>,
    omega: Vec<f64>,
    theta_fwd: Arc<dyn Fft<f64>>,
    theta_inv: Arc<dyn Fft<f64>>,
    s_fwd: Arc<dyn Fft<f64>>,
    s_inv: Arc<dyn Fft<f64>>,
}

impl CauchyPlan {
    pub fn new(grid: &RadialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n_r = grid.n_r;
        let period = 2.0 * grid.s_max;
        let omega = (0..n_r)
            .map(|q| {
                let qs = if q <= n_r / 2 { q as f64 } else { q as f64 - n_r as f64 };
                2.0 * PI * qs / period
            })
            .collect();
        CauchyPlan {
            n_r,
            n_theta: grid.n_theta,
            ds: grid.ds,
            s_max: grid.s_max,
            exp_s: grid.rho.clone(),
            omega,
            theta_fwd: planner.plan_fft_forward(grid.n_theta),
            theta_inv: planner.plan_fft_inverse(grid.n_theta),
            s_fwd: planner.plan_fft_forward(n_r),
            s_inv: planner.plan_fft_inverse(n_r),
        }
    }

    fn mode_index(&self, n: i64) -> usize {
        if n >= 0 {
            n as usize
        } else {
            (self.n_theta as i64 + n) as usize
        }
    }

    /// C[g] at the nodes; `g` is ring-major like the grid.
    pub fn transform(&self, g: &[Complex64]) -> Vec<Complex64> {
        let (n_r, n_t) = (self.n_r, self.n_theta);
        assert_eq!(g.len(), n_r * n_t);
        let mut spec = g.to_vec();
        spec.par_chunks_mut(n_t).for_each_init(
            || vec![Complex64::new(0.0, 0.0); self.theta_fwd.get_inplace_scratch_len()],
            |scratch, row| self.theta_fwd.process_with_scratch(row, scratch),
        );
        let half = (n_t / 2) as i64;
        let modes: Vec<i64> = (-half + 1..half - 1).collect();
        let columns: Vec<(usize, Vec<Complex64>)> = modes
            .par_iter()
            .map_init(
                || {
                    let len = self.s_fwd.get_inplace_scratch_len().max(self.s_inv.get_inplace_scratch_len());
                    vec![Complex64::new(0.0, 0.0); len]
                },
                |scratch, &n| {
                    let src = self.mode_index(n + 1);
                    let scale = 1.0 / n_t as f64;
                    let col: Vec<Complex64> =
                        (0..n_r).map(|j| spec[j * n_t + src] * (scale * self.exp_s[j])).collect();
                    (self.mode_index(n), self.mode_solve(n, col, scratch))
                },
            )
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_t];
        for (dst, col) in columns {
            for (j, v) in col.into_iter().enumerate() {
                out[j * n_t + dst] = v;
            }
        }
        out.par_chunks_mut(n_t).for_each_init(
            || vec![Complex64::new(0.0, 0.0); self.theta_inv.get_inplace_scratch_len()],
            |scratch, row| self.theta_inv.process_with_scratch(row, scratch),
        );
        out
    }

    /// Radial convolution for output mode n with G = g_{n+1}(s)·e^s.
    fn mode_solve(&self, n: i64, g: Vec<Complex64>, scratch: &mut [Complex64]) -> Vec<Complex64> {
        let n_r = self.n_r;
        let h = self.ds;
        let s_max = self.s_max;
        let period = 2.0 * s_max;
        if g.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
            return g;
        }
        let mut buf = g.clone();
        self.s_fwd.process_with_scratch(&mut buf, scratch);
        let nyq = n_r / 2;
        let nf = n as f64;
        let m = nf.abs();
        for (q, v) in buf.iter_mut().enumerate() {
            if q == nyq {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            let w = self.omega[q];
            *v = if n > 0 {
                // H' − nH = −G
                *v / Complex64::new(nf, -w)
            } else if n == 0 {
                if q == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    // H' = −(G − mean)
                    *v / Complex64::new(0.0, w)
                }
            } else {
                // K' + mK = G
                *v / Complex64::new(m, w)
            };
            if n == 0 && q != 0 {
                *v = -*v;
            }
        }
        self.s_inv.process_with_scratch(&mut buf, scratch);
        let inv_n = 1.0 / n_r as f64;
        for v in buf.iter_mut() {
            *v *= inv_n;
        }
        let s = |j: usize| -s_max + (j as f64 + 0.5) * h;
        if n > 0 {
            // H(S) = 0: subtract H_per(S)·e^{n(s−S)}, H_per(S) = ∫G e^{−n(s+S)} / (1 − e^{−nP})
            let mut acc = Complex64::new(0.0, 0.0);
            let step = (-nf * h).exp();
            let mut e = (-nf * h * 0.5).exp();
            for gj in g.iter() {
                if e < 1e-300 {
                    break;
                }
                acc += gj * e;
                e *= step;
            }
            let h_per_s = acc * h / (1.0 - (-nf * period).exp());
            let mut e = (-nf * h * 0.5).exp();
            for j in (0..n_r).rev() {
                if e < 1e-300 {
                    break;
                }
                buf[j] -= h_per_s * e;
                e *= step;
            }
        } else if n == 0 {
            let total: Complex64 = g.iter().sum::<Complex64>() * h;
            let first: Complex64 = g.iter().enumerate().map(|(j, v)| v * s(j)).sum::<Complex64>() * h;
            let c0 = total / period;
            for (j, v) in buf.iter_mut().enumerate() {
                *v += -c0 * s(j) + c0 * s_max + first / period;
            }
        } else {
            // K(−S) = 0: subtract K_per(−S)·e^{−m(s+S)}, K_per(−S) = ∫G e^{−m(S−s)} / (1 − e^{−mP})
            let mut acc = Complex64::new(0.0, 0.0);
            let step = (-m * h).exp();
            let mut e = (-m * h * 0.5).exp();
            for gj in g.iter().rev() {
                if e < 1e-300 {
                    break;
                }
                acc += gj * e;
                e *= step;
            }
            let k_per = acc * h / (1.0 - (-m * period).exp());
            let mut e = (-m * h * 0.5).exp();
            for v in buf.iter_mut() {
                if e < 1e-300 {
                    break;
                }
                *v -= k_per * e;
                e *= step;
            }
        }
        let factor = if n >= 0 { 2.0 * PI } else { -2.0 * PI };
        for v in buf.iter_mut() {
            *v *= factor;
        }
        buf
    }
}
