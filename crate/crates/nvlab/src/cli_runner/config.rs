//! Run configuration. JSON on disk; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics_lab::SweepConfig;
use crate::cplane_quadrature::ResolutionPolicy;
use crate::dbar_solver::SolverConfig;
use crate::error::{NvError, Result};
use crate::scattering_data::{Family, ScatteringData, DEFAULT_BUMP_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatteringConfig {
    pub family: Family,
    pub c: f64,
    pub width: f64,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig { family: Family::Bump, c: 0.05, width: DEFAULT_BUMP_WIDTH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Truncation radius in s; defaults to the bump width, or 3 for the default family.
    pub s_max: Option<f64>,
    /// Minimum ring and angle counts; grids grow with the phase bandwidth.
    pub n_r: usize,
    pub n_theta: usize,
    pub oversample: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { s_max: None, n_r: 96, n_theta: 96, oversample: 1.0, max_nodes: 40_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_mu: f64,
    pub max_iter: usize,
    pub stencil_h: f64,
    pub gate: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection { tol_mu: s.tol_mu, max_iter: s.max_iter, stencil_h: s.stencil_h, gate: s.gate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub t_list: Vec<f64>,
    pub lattice: usize,
    pub window_factor: f64,
    pub ray_t_list: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            t_list: vec![5.0, 10.0, 20.0, 40.0],
            lattice: 64,
            window_factor: 30.0,
            ray_t_list: vec![10.0, 20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scattering: ScatteringConfig,
    pub quadrature: QuadratureConfig,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub output: OutputConfig,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| NvError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NvError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NvError::Config(m.to_string()));
        let sc = &self.scattering;
        if !(sc.c >= 0.0 && sc.c.is_finite()) {
            return bad("scattering.c must be finite and ≥ 0");
        }
        if !(sc.width > 0.0 && sc.width.is_finite()) {
            return bad("scattering.width must be positive");
        }
        let q = &self.quadrature;
        if q.n_r == 0 || q.n_theta == 0 || !q.n_r.is_multiple_of(2) || !q.n_theta.is_multiple_of(2) {
            return bad("quadrature.n_r and n_theta must be positive and even");
        }
        if let Some(s) = q.s_max {
            if !(s > 0.0 && s.is_finite()) {
                return bad("quadrature.s_max must be positive");
            }
        }
        if !(q.oversample > 0.0) || q.max_nodes == 0 {
            return bad("quadrature.oversample and max_nodes must be positive");
        }
        let s = &self.solver;
        if !(s.tol_mu > 0.0 && s.stencil_h > 0.0 && s.gate > 0.0) || s.max_iter == 0 {
            return bad("solver tolerances, stencil_h, gate and max_iter must be positive");
        }
        let w = &self.sweep;
        if w.lattice < 3 || !(w.window_factor > 0.0) {
            return bad("sweep.lattice must be ≥ 3 and window_factor positive");
        }
        if w.t_list.iter().chain(&w.ray_t_list).any(|t| !t.is_finite()) {
            return bad("sweep times must be finite");
        }
        if self.threads == Some(0) {
            return bad("threads must be ≥ 1");
        }
        Ok(())
    }

    pub fn data(&self) -> ScatteringData {
        ScatteringData { family: self.scattering.family, c: self.scattering.c, width: self.scattering.width }
    }

    pub fn s_max(&self) -> f64 {
        self.quadrature.s_max.unwrap_or(match self.scattering.family {
            Family::Bump => self.scattering.width,
            Family::Default => 3.0,
        })
    }

    pub fn policy(&self) -> ResolutionPolicy {
        let q = &self.quadrature;
        ResolutionPolicy { min_n_r: q.n_r, min_n_theta: q.n_theta, oversample: q.oversample, max_nodes: q.max_nodes }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig { tol_mu: s.tol_mu, max_iter: s.max_iter, stencil_h: s.stencil_h, gate: s.gate }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            n: self.sweep.lattice,
            window_factor: self.sweep.window_factor,
            s_max: self.s_max(),
            solver: self.solver_config(),
            policy: self.policy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.scattering.c = 0.01;
        c.seed = 42;
        c.threads = Some(3);
        c.quadrature.s_max = Some(0.5);
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_json(r#"{"scattering": {"c": 0.0}}"#).unwrap();
        assert_eq!(c.scattering.c, 0.0);
        assert_eq!(c.quadrature, QuadratureConfig::default());
    }

    #[test]
    fn rejects_invalid() {
        assert!(RunConfig::from_json(r#"{"quadrature": {"n_r": 95}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"scattering": {"c": -1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"solver": {"tol_mu": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
