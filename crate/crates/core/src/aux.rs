//! The one-dimensional recursive majorants H_n and minorants G_n, their
//! closed-form bounds, and the exact one-dimensional g_n formula.
//!
//! These recursions are kept in the canceled g-form (no exponential factors
//! except the truncated Gaussian inside G_n for d >= 2), so for d = 1 they are
//! an independent route to the same functions the oracle computes from f; the
//! two must agree to 1e-8 on pure power profiles, which is the coherence
//! anchor for both implementations.

use crate::constants::ConstantsBundle;
use crate::density::{DensitySpec, Variant};
use crate::error::{Error, Result};
use crate::quad::{self, Plan1d};
use crate::special::{lgamma, lower_gamma};
use crate::table::{graded_grid, RadialTable, TableKind, GRID_RMAX};
use rayon::prelude::*;
use std::sync::{Arc, Mutex};

/// Memoized H_n / G_n tables for one density.
pub struct Recursions {
    pub spec: DensitySpec,
    grid: Vec<f64>,
    h: Mutex<Vec<Arc<RadialTable>>>,
    g: Mutex<Vec<Arc<RadialTable>>>,
}

/// int_0^u e^{-m s^2} s^{d-2} ds in incomplete-gamma form.
fn gauss_inner(d: u32, m: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * (d as f64 - 1.0);
    lower_gamma(a, m * u * u).unwrap_or(0.0) / (2.0 * m.powf(a))
}

impl Recursions {
    pub fn new(spec: DensitySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Recursions {
            spec,
            grid: graded_grid(GRID_RMAX),
            h: Mutex::new(Vec::new()),
            g: Mutex::new(Vec::new()),
        })
    }

    /// H_n(r). H_1 = 1 on [0, inf); H_n vanishes on [0, n] for n >= 2.
    pub fn big_h(&self, n: u32, r: f64) -> Result<f64> {
        if n == 0 || r < 0.0 {
            return Err(Error::InvalidArgument("big_h needs n >= 1, r >= 0".into()));
        }
        if n == 1 {
            return Ok(1.0);
        }
        Ok(self.h_table(n)?.value(r))
    }

    /// G_n(r). G_1 = 1 on [0, inf); G_n(0) = 0 for n >= 2.
    pub fn big_g(&self, n: u32, r: f64) -> Result<f64> {
        if n == 0 || r < 0.0 {
            return Err(Error::InvalidArgument("big_g needs n >= 1, r >= 0".into()));
        }
        if n == 1 {
            return Ok(1.0);
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.g_table(n)?.value(r))
    }

    pub fn h_table(&self, n: u32) -> Result<Arc<RadialTable>> {
        if n < 2 {
            return Err(Error::InvalidArgument("H tables start at n = 2".into()));
        }
        let mut tabs = self.h.lock().unwrap();
        while (tabs.len() as u32) < n - 1 {
            let level = tabs.len() as u32 + 2;
            let prev = if level == 2 { None } else { Some(tabs[level as usize - 3].clone()) };
            let table = self.build_h_level(level, prev.as_deref())?;
            tabs.push(Arc::new(table));
        }
        Ok(tabs[n as usize - 2].clone())
    }

    pub fn g_table(&self, n: u32) -> Result<Arc<RadialTable>> {
        if n < 2 {
            return Err(Error::InvalidArgument("G tables start at n = 2".into()));
        }
        let mut tabs = self.g.lock().unwrap();
        while (tabs.len() as u32) < n - 1 {
            let level = tabs.len() as u32 + 2;
            let prev = if level == 2 { None } else { Some(tabs[level as usize - 3].clone()) };
            let table = self.build_g_level(level, prev.as_deref())?;
            tabs.push(Arc::new(table));
        }
        Ok(tabs[n as usize - 2].clone())
    }

    fn build_h_level(&self, level: u32, prev: Option<&RadialTable>) -> Result<RadialTable> {
        let spec = self.spec;
        let we = 0.5 * (spec.dim() - 1.0);
        let support = level as f64;
        let logs: Vec<Result<f64>> = self
            .grid
            .par_iter()
            .map(|&r| {
                if r <= support * (1.0 + 1e-12) || r <= 2.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let prev_at = |rho: f64| match prev {
                    None => 1.0,
                    Some(t) => t.value(rho),
                };
                let integrand = |rho: f64| {
                    let hv = prev_at(rho);
                    if hv == 0.0 {
                        return 0.0;
                    }
                    spec.profile_g(r - rho)
                        * (r - rho).powf(we)
                        * spec.profile_g(rho)
                        * rho.powf(we)
                        * hv
                };
                let mut plan = Plan1d::new(1.0, r - 1.0).with_breaks(&[0.5 * r]);
                if let Some(t) = prev {
                    plan = plan.with_breaks(&[t.support_start]);
                }
                if spec.variant == Variant::Cutoff {
                    plan = plan.with_breaks(&[(r - 1.0).min(r - 1.0), 1.0]);
                }
                let q = quad::integrate_plan(&integrand, &plan, 1e-10, 0.0)
                    .map_err(Error::Quadrature)?;
                let denom = spec.profile_g(r) * r.powf(we);
                let v = q.value / denom;
                Ok(if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            })
            .collect();
        let logs = logs.into_iter().collect::<Result<Vec<_>>>()?;
        RadialTable::from_log_values(spec, level, TableKind::BigH, self.grid.clone(), logs, support)
    }

    fn build_g_level(&self, level: u32, prev: Option<&RadialTable>) -> Result<RadialTable> {
        let spec = self.spec;
        let logs: Vec<Result<f64>> = self
            .grid
            .par_iter()
            .map(|&r| {
                let v = g_level_node(&spec, prev, r)?;
                Ok(if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            })
            .collect();
        let logs = logs.into_iter().collect::<Result<Vec<_>>>()?;
        RadialTable::from_log_values(spec, level, TableKind::BigG, self.grid.clone(), logs, 0.0)
    }

    /// G_2 at an arbitrary radius by direct quadrature (no table), for checks
    /// past the table range (the incomplete-beta threshold r_0 can exceed it).
    pub fn big_g2_direct(&self, r: f64) -> Result<f64> {
        g_level_node(&self.spec, None, r)
    }
}

/// One node of the G recursion: the integral against the previous level.
fn g_level_node(spec: &DensitySpec, prev: Option<&RadialTable>, r: f64) -> Result<f64> {
    let d = spec.d;
    let we = 0.5 * (spec.dim() - 1.0);
    let gamma = spec.gamma;
    let prev_origin_power = prev.map(|t| t.origin_power()).unwrap_or(0.0);
    let prev_at = |rho: f64| match prev {
        None => 1.0,
        Some(t) => t.value(rho),
    };
    let integrand = |rho: f64| {
        let gv = prev_at(rho);
        if gv == 0.0 {
            return 0.0;
        }
        let base = spec.profile_g(r - rho)
            * (r - rho).powf(we)
            * spec.profile_g(rho)
            * rho.powf(we)
            * gv;
        if d == 1 {
            base
        } else {
            base * gauss_inner(d, spec.m, (rho.min(r - rho)).sqrt())
        }
    };
    // endpoint exponents: rho^{we - gamma + p} at 0 (pure power),
    // (r-rho)^{we - gamma} at r, plus (r-rho)^{we} from the inner
    // Gaussian factor for d >= 2
    let alpha0 = if spec.variant == Variant::PurePower {
        (gamma - we - prev_origin_power).max(0.0)
    } else {
        0.0
    };
    let alpha_r = if spec.variant == Variant::PurePower {
        (gamma - we - if d >= 2 { we } else { 0.0 }).max(0.0)
    } else {
        0.0
    };
    let mut plan = Plan1d::new(0.0, r)
        .with_singularity(0.0, alpha0.min(0.95))
        .with_singularity(r, alpha_r.min(0.95))
        .with_breaks(&[0.5 * r]);
    if spec.variant == Variant::Cutoff {
        plan = plan.with_breaks(&[1.0, r - 1.0]);
    }
    let q = quad::integrate_plan(&integrand, &plan, 1e-10, 0.0).map_err(Error::Quadrature)?;
    let denom = spec.profile_g(r) * r.powf(we);
    Ok(q.value / denom)
}

/// Closed-form majorant of H_n: Gamma(nu)^n / Gamma(nu n) r^{nu (n-1)} with
/// nu = (d+1)/2 - gamma.
pub fn h_n_closed_bound(d: u32, gamma: f64, n: u32, r: f64) -> Result<f64> {
    let nu = 0.5 * (d as f64 + 1.0) - gamma;
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "closed H bound needs gamma < (d+1)/2, got gamma={gamma}, d={d}"
        )));
    }
    if n == 0 || r < 0.0 {
        return Err(Error::InvalidArgument("closed H bound needs n >= 1, r >= 0".into()));
    }
    let nf = n as f64;
    Ok((nf * lgamma(nu) - lgamma(nu * nf) + nu * (nf - 1.0) * r.ln()).exp())
}

/// ln of the G_n lower bound of the main range, r >= 1:
/// (C/2)^{n-1} Gamma(a)^n / Gamma(a n) r^{((d+1)/2-gamma)(n-1)} with a = d-gamma
/// (pure power) or d (cutoff). The constant C = C(r_0) underflows f64 for
/// d >= 2, hence the log form is primary.
pub fn g_n_lower_bound_log(bundle: &ConstantsBundle, n: u32, r: f64) -> Result<f64> {
    if r < 0.0 || n == 0 {
        return Err(Error::InvalidArgument("g_n lower bound needs n >= 1, r >= 0".into()));
    }
    let spec = &bundle.spec;
    let a = match spec.variant {
        Variant::PurePower => spec.dim() - spec.gamma,
        Variant::Cutoff => spec.dim(),
    };
    let rho2 = bundle.rho2;
    if !(rho2 > 0.0) {
        return Err(Error::InvalidArgument("g_n lower bound needs gamma < (d+1)/2".into()));
    }
    let nf = n as f64;
    Ok((nf - 1.0) * (bundle.ln_c_r0 - 2.0f64.ln()) + nf * lgamma(a) - lgamma(a * nf)
        + rho2 * (nf - 1.0) * r.ln())
}

pub fn g_n_lower_bound(bundle: &ConstantsBundle, n: u32, r: f64) -> Result<f64> {
    Ok(g_n_lower_bound_log(bundle, n, r)?.exp())
}

/// ln of the small-argument lower bound (r in (0, r_0]): pure power
/// C^{n-1} Gamma(d-g)^n/Gamma((d-g)n) r^{(d-g)(n-1)}; cutoff
/// C^{n-1} Gamma(d)^n/Gamma(dn) (r^d (1 v r)^{-g})^{n-1}.
pub fn g_n_small_arg_lower_bound_log(bundle: &ConstantsBundle, n: u32, r: f64) -> Result<f64> {
    if !(r > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("small-arg bound needs n >= 1, r > 0".into()));
    }
    let spec = &bundle.spec;
    let nf = n as f64;
    match spec.variant {
        Variant::PurePower => {
            let a = spec.dim() - spec.gamma;
            Ok((nf - 1.0) * bundle.ln_c_r0 + nf * lgamma(a) - lgamma(a * nf)
                + a * (nf - 1.0) * r.ln())
        }
        Variant::Cutoff => {
            let a = spec.dim();
            Ok((nf - 1.0) * bundle.ln_c_r0 + nf * lgamma(a) - lgamma(a * nf)
                + (nf - 1.0) * (a * r.ln() - spec.gamma * r.max(1.0).ln()))
        }
    }
}

/// Exact d = 1 pure power formula: g_n(x) = Gamma(1-g)^n / Gamma((1-g)n)
/// |x|^{(1-g)(n-1)}.
pub fn g_n_exact_1d(gamma: f64, n: u32, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "exact 1-d g_n needs gamma in [0,1), got {gamma}"
        )));
    }
    if n == 0 || x < 0.0 {
        return Err(Error::InvalidArgument("exact 1-d g_n needs n >= 1, x >= 0".into()));
    }
    let nf = n as f64;
    let a = 1.0 - gamma;
    Ok((nf * lgamma(a) - lgamma(a * nf) + a * (nf - 1.0) * x.ln().max(f64::NEG_INFINITY)).exp())
}

/// Right-hand side of the one-step inequality of the small branch
/// (r <= r_0): C r^{d-g} int_0^1 (1-u)^{d-1-g} u^{d-1-g} G_n(ru) du for the
/// pure power profile, and the cutoff analogue. `g_prev` supplies G_n.
pub fn estima_small_branch_rhs(
    bundle: &ConstantsBundle,
    r: f64,
    g_prev: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let spec = &bundle.spec;
    let d = spec.dim();
    let g = spec.gamma;
    let (expo, weight_pow): (f64, f64) = match spec.variant {
        Variant::PurePower => (d - g, d - 1.0 - g),
        Variant::Cutoff => (d, d - 1.0),
    };
    let alpha = (-weight_pow).max(0.0);
    let plan = Plan1d::new(0.0, 1.0)
        .with_singularity(0.0, alpha.min(0.95))
        .with_singularity(1.0, alpha.min(0.95));
    let q = quad::integrate_plan(
        |u| (1.0 - u).powf(weight_pow) * u.powf(weight_pow) * g_prev(r * u),
        &plan,
        1e-10,
        0.0,
    )
    .map_err(Error::Quadrature)?;
    let profile_factor = match spec.variant {
        Variant::PurePower => r.powf(expo),
        Variant::Cutoff => r.powf(d) * r.max(1.0).powf(-g),
    };
    Ok(bundle.ln_c_r0.exp() * profile_factor * q.value)
}

/// Right-hand side of the one-step inequality of the large branch (r >= r_0):
/// C r^{(d+1)/2-g} int_{1/r}^1 (1-u)^{p} u^{q} G_n(ru) du.
pub fn estima_large_branch_rhs(
    bundle: &ConstantsBundle,
    r: f64,
    g_prev: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let spec = &bundle.spec;
    let d = spec.dim();
    let g = spec.gamma;
    let (p, qexp): (f64, f64) = match spec.variant {
        Variant::PurePower => (d - 1.0 - g, 0.5 * (d - 1.0) - g),
        Variant::Cutoff => (d - 1.0, 0.5 * (d - 1.0)),
    };
    let plan = Plan1d::new(1.0 / r, 1.0).with_singularity(1.0, (-p).max(0.0).min(0.95));
    let q = quad::integrate_plan(
        |u| (1.0 - u).powf(p) * u.powf(qexp) * g_prev(r * u),
        &plan,
        1e-10,
        0.0,
    )
    .map_err(Error::Quadrature)?;
    Ok(bundle.ln_c_r0.exp() * r.powf(0.5 * (d + 1.0) - g) * q.value)
}
