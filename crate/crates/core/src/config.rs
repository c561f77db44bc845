//! Suite configuration: the default parameter matrix, centralized tolerances,
//! and the flat JSON config file the CLI reads (flags override file values).

use crate::density::{DensitySpec, Variant};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every tolerance and threshold the verification suites use, pinned in one
/// place. Inequality slacks absorb stacked quadrature error, never theorem
/// margins; the anchors state their own accuracy targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// Inequality slack for oracle-vs-bound checks (two nested adaptive passes).
    pub ineq_slack: f64,
    /// Slack for the assumption certificates (pure evaluation, no quadrature).
    pub assumption_slack: f64,
    /// Closed-form L1 norm vs radial quadrature.
    pub l1_rel: f64,
    /// Table mass vs ||f||_1^n.
    pub mass_rel: f64,
    /// Two-fold convolution closed-form anchor (d=1, gamma=0).
    pub anchor_rel: f64,
    /// G_n table vs the exact 1-d formula.
    pub gn1d_rel: f64,
    /// Ratio-to-limit accuracy at the x = 100 anchor.
    pub thm1d_ratio_tol: f64,
    /// Slack for the closed-form H/G bounds (single quadrature pass).
    pub closed_bound_slack: f64,
    /// Required relative truncation certificate for p_lambda.
    pub trunc_rel: f64,
    /// Internal p_lambda series target (tighter than trunc_rel).
    pub p_lambda_tol: f64,
    /// phi(1,0,1) absolute tolerance.
    pub wright_anchor_abs: f64,
    /// series/asymptotic agreement at t = 400.
    pub wright_t400_rel: f64,
    /// series/asymptotic agreement at t = 1e4.
    pub wright_t1e4_rel: f64,
    /// identity B_x(a,b) = x^a (1-x)^b / a F(a+b,1,a+1;x).
    pub hyper_identity_rel: f64,
    /// Monte Carlo draws for the sampler cross-check.
    pub sampler_draws: usize,
    /// KS acceptance: critical coefficient / sqrt(n) (1.628 = 1% level).
    pub ks_critical_coeff: f64,
    /// Atom-fraction tolerance in binomial sigmas.
    pub atom_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ineq_slack: 1e-5,
            assumption_slack: 1e-12,
            l1_rel: 1e-8,
            mass_rel: 1e-5,
            anchor_rel: 1e-7,
            gn1d_rel: 1e-8,
            thm1d_ratio_tol: 1e-6,
            closed_bound_slack: 1e-6,
            trunc_rel: 1e-8,
            p_lambda_tol: 1e-9,
            wright_anchor_abs: 1e-6,
            wright_t400_rel: 0.05,
            wright_t1e4_rel: 0.01,
            hyper_identity_rel: 1e-9,
            sampler_draws: 100_000,
            ks_critical_coeff: 1.628,
            atom_sigmas: 4.0,
        }
    }
}

/// Parameter matrix a suite sweeps.
#[derive(Debug, Clone)]
pub struct Matrix {
    pub specs: Vec<DensitySpec>,
    pub lambdas: Vec<f64>,
    pub xs: Vec<f64>,
    pub small_xs: Vec<f64>,
    pub ns: Vec<u32>,
    pub seed: u64,
}

impl Matrix {
    /// The default matrix: d in {1,2,3}, gamma in {0, (d+1)/4} (inside both
    /// gamma < d and the main range), m in {0.5, 1}, pure power profile.
    pub fn default_matrix() -> Self {
        let mut specs = Vec::new();
        for d in [1u32, 2, 3] {
            for k in 0..2 {
                let gamma = if k == 0 { 0.0 } else { (d as f64 + 1.0) / 4.0 };
                for m in [0.5, 1.0] {
                    specs.push(DensitySpec::new(d, m, gamma, Variant::PurePower).unwrap());
                }
            }
        }
        Matrix {
            specs,
            lambdas: vec![0.25, 1.0, 4.0],
            xs: vec![1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0],
            small_xs: vec![0.1, 0.5, 0.9],
            ns: vec![2, 3],
            seed: 20_240_911,
        }
    }

    /// The beyond-main-range density of the bounded-h_2 checks.
    pub fn dsp_spec() -> DensitySpec {
        DensitySpec::new(1, 1.0, 2.0, Variant::Cutoff).unwrap()
    }
}

/// Flat JSON config: suite name, per-field lists, tolerance overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: Option<String>,
    pub d: Option<Vec<u32>>,
    pub m: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub variant: Option<String>,
    pub lambda: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub small_x: Option<Vec<f64>>,
    pub n: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub sampler_draws: Option<usize>,
    pub ineq_slack: Option<f64>,
    pub trunc_rel: Option<f64>,
    pub mass_rel: Option<f64>,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("config parse: {e}")))
    }

    /// Resolve against the defaults: explicit lists replace default axes.
    pub fn resolve(&self) -> Result<(Matrix, Tolerances)> {
        let mut matrix = Matrix::default_matrix();
        let mut tol = Tolerances::default();
        if self.d.is_some() || self.m.is_some() || self.gamma.is_some() || self.variant.is_some() {
            let ds = self.d.clone().unwrap_or_else(|| vec![1, 2, 3]);
            let ms = self.m.clone().unwrap_or_else(|| vec![0.5, 1.0]);
            let variant: Variant = match &self.variant {
                Some(s) => s.parse()?,
                None => Variant::PurePower,
            };
            let mut specs = Vec::new();
            for &d in &ds {
                let gammas = self
                    .gamma
                    .clone()
                    .unwrap_or_else(|| vec![0.0, (d as f64 + 1.0) / 4.0]);
                for &gamma in &gammas {
                    for &m in &ms {
                        specs.push(DensitySpec::new(d, m, gamma, variant)?);
                    }
                }
            }
            matrix.specs = specs;
        }
        if let Some(l) = &self.lambda {
            matrix.lambdas = l.clone();
        }
        if let Some(x) = &self.x {
            matrix.xs = x.clone();
        }
        if let Some(x) = &self.small_x {
            matrix.small_xs = x.clone();
        }
        if let Some(n) = &self.n {
            matrix.ns = n.clone();
        }
        if let Some(s) = self.seed {
            matrix.seed = s;
        }
        if let Some(v) = self.sampler_draws {
            tol.sampler_draws = v;
        }
        if let Some(v) = self.ineq_slack {
            tol.ineq_slack = v;
        }
        if let Some(v) = self.trunc_rel {
            tol.trunc_rel = v;
        }
        if let Some(v) = self.mass_rel {
            tol.mass_rel = v;
        }
        Ok((matrix, tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matrix_is_in_range() {
        let m = Matrix::default_matrix();
        assert_eq!(m.specs.len(), 12);
        assert!(m.specs.iter().all(|s| s.in_main_range()));
        assert!(m.specs.iter().all(|s| s.validate().is_ok()));
        assert!(!Matrix::dsp_spec().in_main_range());
    }

    #[test]
    fn config_round_trip_and_overrides() {
        let cfg = SuiteConfig::from_json(
            r#"{"suite":"thm1","d":[1],"gamma":[0.0],"m":[1.0],"lambda":[1.0],"ineq_slack":2e-5}"#,
        )
        .unwrap();
        let (m, t) = cfg.resolve().unwrap();
        assert_eq!(m.specs.len(), 1);
        assert_eq!(m.lambdas, vec![1.0]);
        assert_eq!(t.ineq_slack, 2e-5);
        assert!(SuiteConfig::from_json("{bad").is_err());
    }
}
