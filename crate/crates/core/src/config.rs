//! JSON run configuration. Every field has a default; the defaults are the
//! reference configuration (m = 3, η = 0.02, ε = 1e-4, K = {0} ∪ [1, 2], R = 4).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barrier::{auto_beta, BarrierParams};
use crate::error::{Error, Result};
use crate::gap::{SingularSetSpec, BETA_MAX};
use crate::profile::ProfileParams;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaKeyword {
    Auto,
}

/// `"auto"` picks `min(2⁻⁷, 0.9 η/(36 b₀ + 16))`; a number is used as is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaPolicy {
    Explicit(f64),
    Keyword(BetaKeyword),
}

impl BetaPolicy {
    pub fn resolve(self, eta: f64, b0: f64) -> f64 {
        match self {
            BetaPolicy::Explicit(b) => b,
            BetaPolicy::Keyword(BetaKeyword::Auto) => auto_beta(eta, b0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub r_max: f64,
    pub tol: f64,
    pub fit_window: [f64; 2],
    pub fit_rel_tol: f64,
    pub rescale_taus: Vec<f64>,
    /// Allowed multiple of `tol` for the supersolution identity residual.
    pub identity_factor: f64,
    pub ordering_samples: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            r_max: 1e3,
            tol: 1e-10,
            fit_window: [50.0, 500.0],
            fit_rel_tol: 0.02,
            rescale_taus: vec![0.1, 1.0, 10.0],
            identity_factor: 100.0,
            ordering_samples: 2001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub n_r: usize,
    pub n_y: usize,
    /// Values of s compared against s = ε for monotonicity.
    pub monotonicity_s: Vec<f64>,
    pub monotonicity_n: usize,
    pub gap_samples: usize,
    pub comparison_pairs: usize,
    /// Every `dump_stride`-th node in each direction goes to the CSV.
    pub dump_stride: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            n_r: 512,
            n_y: 512,
            monotonicity_s: vec![2e-4, 1e-3, 1e-2, 0.1],
            monotonicity_n: 128,
            gap_samples: 4096,
            comparison_pairs: 2000,
            dump_stride: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub decay_thetas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { decay_thetas: vec![0.5, 0.25] }
    }
}

/// Smooth positive gap `h₀(1 + a cos(πy/R))`, empty K, with `u₁ = φ_τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCase {
    pub tau: f64,
    pub h0: f64,
    pub amp: f64,
    pub beta: f64,
}

impl Default for SyntheticCase {
    fn default() -> Self {
        SyntheticCase { tau: 5e-4, h0: 0.25, amp: 0.2, beta: BETA_MAX }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlueConfig {
    /// Extra ε values above the main ε, solved on the ladder grid; the main run is the last rung.
    pub eps_ladder: Vec<f64>,
    pub ladder_n_sigma: usize,
    pub ladder_n_y: usize,
    /// Samples per column and columns for the Cauchy gaps.
    pub limit_n_r: usize,
    pub limit_n_y: usize,
    /// Radial cells of the glue grid on s = r/h ∈ [0, 1.5]; a multiple of 6.
    pub n_s: usize,
    pub n_y: usize,
    /// Relative change allowed in the decay constants under one refinement.
    pub decay_stability: f64,
    pub synthetic: Option<SyntheticCase>,
}

impl Default for GlueConfig {
    fn default() -> Self {
        GlueConfig {
            eps_ladder: vec![1e-3, 3e-4],
            ladder_n_sigma: 129,
            ladder_n_y: 64,
            limit_n_r: 65,
            limit_n_y: 128,
            n_s: 96,
            n_y: 64,
            decay_stability: 0.2,
            synthetic: Some(SyntheticCase::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub rtol: f64,
    pub atol: f64,
    /// The refined run divides both tolerances by this.
    pub tol_refinement: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { rtol: 1e-9, atol: 1e-15, tol_refinement: 16.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub m: u32,
    pub eta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub beta: BetaPolicy,
    pub sigma_bound: f64,
    pub delta: f64,
    #[serde(rename = "R")]
    pub half_period: f64,
    #[serde(rename = "K")]
    pub k: Vec<[f64; 2]>,
    pub profile: ProfileConfig,
    pub barrier: BarrierConfig,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub glue: GlueConfig,
    pub metric: MetricConfig,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 3,
            eta: 0.02,
            eps: 1e-4,
            alpha: 1.1,
            beta: BetaPolicy::Keyword(BetaKeyword::Auto),
            sigma_bound: 0.1,
            delta: 0.1,
            half_period: 4.0,
            k: vec![[0.0, 0.0], [1.0, 2.0]],
            profile: ProfileConfig::default(),
            barrier: BarrierConfig::default(),
            solver: SolverConfig { n_sigma: 256, n_y: 512, ..SolverConfig::default() },
            diagnostics: DiagnosticsConfig::default(),
            glue: GlueConfig::default(),
            metric: MetricConfig::default(),
            out_dir: "out".to_string(),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn singular_set(&self) -> SingularSetSpec {
        SingularSetSpec { half_period: self.half_period, intervals: self.k.clone() }
    }

    pub fn profile_params(&self, eta: f64) -> ProfileParams {
        ProfileParams::new(self.m, eta).with_r_max(self.profile.r_max).with_tol(self.profile.tol)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { sigma_bound: self.sigma_bound, ..self.solver }
    }

    pub fn barrier_params(&self, beta: f64, b0: f64, eps: f64) -> BarrierParams {
        BarrierParams { m: self.m, beta, eta: self.eta, eps, b0, sigma: self.sigma_bound, alpha: self.alpha }
    }

    /// Node counts of every grid multiplied by `k`.
    pub fn scaled(mut self, k: usize) -> Self {
        if k <= 1 {
            return self;
        }
        self.barrier.n_r = (self.barrier.n_r - 1) * k + 1;
        self.barrier.n_y *= k;
        self.solver = self.solver.refined(k);
        self.glue.n_s *= k;
        self.glue.n_y *= k;
        self.glue.ladder_n_sigma = (self.glue.ladder_n_sigma - 1) * k + 1;
        self.glue.ladder_n_y *= k;
        self
    }

    /// Range checks of every upstream module, run at load time.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| cfg_err(e.to_string());
        self.profile_params(0.0).validate().map_err(wrap)?;
        self.profile_params(self.eta).validate().map_err(wrap)?;
        if !(self.eta > 0.0) {
            return Err(cfg_err("eta must be positive"));
        }
        if !(self.eps > 0.0 && self.eps <= 0.25) {
            return Err(cfg_err(format!("eps = {} outside (0, 1/4]", self.eps)));
        }
        if !(self.alpha > 1.0) {
            return Err(cfg_err(format!("alpha = {} must exceed 1", self.alpha)));
        }
        if let BetaPolicy::Explicit(b) = self.beta {
            if !(b > 0.0 && b <= BETA_MAX) {
                return Err(cfg_err(format!("beta = {b} outside (0, 2^-7]")));
            }
        }
        if !(self.sigma_bound > 0.0) {
            return Err(cfg_err("sigma_bound must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5 && self.delta <= self.sigma_bound) {
            return Err(cfg_err(format!("need 0 < delta < 1/2 and delta <= sigma_bound (delta = {}, sigma = {})", self.delta, self.sigma_bound)));
        }
        self.singular_set().validate().map_err(wrap)?;
        self.solver_config().validate().map_err(wrap)?;
        let p = &self.profile;
        if !(p.fit_window[0] > 0.0 && p.fit_window[0] < p.fit_window[1] && p.fit_window[1] <= p.r_max) {
            return Err(cfg_err("profile.fit_window must lie in (0, r_max]"));
        }
        if p.rescale_taus.iter().any(|t| !(*t > 0.0)) || p.ordering_samples < 2 {
            return Err(cfg_err("profile.rescale_taus must be positive and ordering_samples >= 2"));
        }
        let b = &self.barrier;
        if b.n_r < 2 || b.n_y < 2 || b.monotonicity_n < 2 || b.gap_samples < 2 || b.comparison_pairs < 1 {
            return Err(cfg_err("barrier grid sizes too small"));
        }
        if b.monotonicity_s.iter().any(|s| !(*s > 0.0)) {
            return Err(cfg_err("barrier.monotonicity_s must be positive"));
        }
        if self.diagnostics.decay_thetas.iter().any(|t| !(*t > 0.0 && *t <= 0.5)) {
            return Err(cfg_err("diagnostics.decay_thetas must lie in (0, 1/2]"));
        }
        let g = &self.glue;
        let mut prev = f64::INFINITY;
        for &e in g.eps_ladder.iter().chain(std::iter::once(&self.eps)) {
            if !(e < prev && e > 0.0 && e <= 0.25) {
                return Err(cfg_err("glue.eps_ladder must be strictly decreasing, in (0, 1/4], and above eps"));
            }
            prev = e;
        }
        if g.n_s == 0 || g.n_s % 6 != 0 || g.n_y < 4 || g.limit_n_r < 2 || g.limit_n_y < 2 {
            return Err(cfg_err("glue.n_s must be a positive multiple of 6 and n_y >= 4"));
        }
        if g.ladder_n_sigma < 8 || g.ladder_n_y < 8 {
            return Err(cfg_err("ladder grid too small (need 8x8)"));
        }
        if !(g.decay_stability > 0.0) {
            return Err(cfg_err("glue.decay_stability must be positive"));
        }
        if let Some(s) = &g.synthetic {
            if !(s.tau > 0.0 && s.h0 > 0.0 && s.amp >= 0.0 && s.amp < 1.0 && s.beta > 0.0 && s.beta <= BETA_MAX) {
                return Err(cfg_err("glue.synthetic needs tau, h0 > 0, 0 <= amp < 1, beta in (0, 2^-7]"));
            }
        }
        let mc = &self.metric;
        if !(mc.rtol > 0.0 && mc.atol > 0.0 && mc.tol_refinement >= 1.0) {
            return Err(cfg_err("metric tolerances must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(c.to_json().contains("\"beta\": \"auto\""));
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"eps": 1e-3, "beta": 0.001, "solver": {"n_sigma": 65}}"#).unwrap();
        assert_eq!(c.beta, BetaPolicy::Explicit(0.001));
        assert_eq!(c.solver.n_sigma, 65);
        assert_eq!(c.solver.n_y, 64);
        assert_eq!(c.m, 3);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        };
        bad(&|c| c.eta = 0.3);
        bad(&|c| c.delta = 0.2);
        bad(&|c| c.beta = BetaPolicy::Explicit(0.01));
        bad(&|c| c.glue.eps_ladder = vec![1e-5]);
        bad(&|c| c.glue.n_s = 100);
        bad(&|c| c.k = vec![]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn scaling_multiplies_node_counts() {
        let c = RunConfig::default().scaled(2);
        assert_eq!(c.solver.n_sigma, 511);
        assert_eq!(c.solver.n_y, 1024);
        assert_eq!(c.glue.n_s, 192);
    }
}
