//! Named verification suites: each one sweeps a parameter matrix and returns
//! the per-instance `BoundCheckRecord`s for one family of statements.
//!
//! A `Session` owns the oracle and recursion caches so that tables built for
//! one suite are reused by the next (convolution tables for a spec are by far
//! the dominant cost).

use crate::aux::{
    estima_large_branch_rhs, estima_small_branch_rhs, g_n_exact_1d, g_n_lower_bound_log,
    h_n_closed_bound, Recursions,
};
use crate::config::{Matrix, Tolerances};
use crate::constants::verify_assumptions;
use crate::density::{DensitySpec, Variant};
use crate::error::{Error, Result};
use crate::oracle::{splitting_identity_residual, Oracle};
use crate::poisson::{
    fit_regime_envelopes, nstar_bounds, p_lambda, p_lambda_bounds_regimes, p_lambda_bounds_wright,
    p_lambda_radial_cdf, p_lambda_series_bounds, p_lambda_small_x_bounds, p_lambda_total_mass,
};
use crate::records::BoundCheckRecord;
use crate::sampler::{ks_statistic, sample_compound_poisson};
use crate::special::{beta, beta_quotient_threshold, gamma, inc_beta, lgamma};
use crate::wright::{wright_asymptotic_log, wright_phi, wright_series_log};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

#[derive(Hash, PartialEq, Eq, Clone)]
struct SpecKey(u32, u64, u64, bool);

fn key_of(spec: &DensitySpec) -> SpecKey {
    SpecKey(
        spec.d,
        spec.m.to_bits(),
        spec.gamma.to_bits(),
        spec.variant == Variant::Cutoff,
    )
}

/// Shared caches for one verification run.
pub struct Session {
    pub matrix: Matrix,
    pub tol: Tolerances,
    oracles: Mutex<HashMap<SpecKey, Arc<Oracle>>>,
    recursions: Mutex<HashMap<SpecKey, Arc<Recursions>>>,
}

impl Session {
    pub fn new(matrix: Matrix, tol: Tolerances) -> Self {
        Session {
            matrix,
            tol,
            oracles: Mutex::new(HashMap::new()),
            recursions: Mutex::new(HashMap::new()),
        }
    }

    pub fn oracle(&self, spec: &DensitySpec) -> Result<Arc<Oracle>> {
        let key = key_of(spec);
        if let Some(o) = self.oracles.lock().unwrap().get(&key) {
            return Ok(o.clone());
        }
        let o = Arc::new(Oracle::new(*spec)?);
        self.oracles.lock().unwrap().insert(key, o.clone());
        Ok(o)
    }

    pub fn recursions(&self, spec: &DensitySpec) -> Result<Arc<Recursions>> {
        let key = key_of(spec);
        if let Some(r) = self.recursions.lock().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let r = Arc::new(Recursions::new(*spec)?);
        self.recursions.lock().unwrap().insert(key, r.clone());
        Ok(r)
    }
}

/// All suite names, in the order `all` runs them.
pub const SUITE_NAMES: &[&str] = &[
    "assumptions",
    "anchor",
    "gn1d",
    "thm_1d",
    "thm1",
    "es_dob",
    "le1",
    "thm2",
    "thm4",
    "alt_hn",
    "g_lower",
    "estima",
    "beta_quotient",
    "gamma_est",
    "hyper_identity",
    "wright",
    "poisson_nstar",
    "poisson_wright",
    "cor_poiss",
    "cor_final",
    "dsp",
    "divergence",
    "sampler",
];

/// Run one named suite (or `all`).
pub fn run_suite(session: &Session, name: &str) -> Result<Vec<BoundCheckRecord>> {
    let started = Instant::now();
    let mut records = match name {
        "assumptions" => suite_assumptions(session)?,
        "anchor" => suite_anchor(session)?,
        "gn1d" => suite_gn1d(session)?,
        "thm_1d" => suite_thm_1d(session)?,
        "thm1" => suite_thm1(session)?,
        "es_dob" => suite_es_dob(session)?,
        "le1" => suite_le1(session)?,
        "thm2" => suite_thm2(session)?,
        "thm4" => suite_thm4(session)?,
        "alt_hn" => suite_alt_hn(session)?,
        "g_lower" => suite_g_lower(session)?,
        "estima" => suite_estima(session)?,
        "beta_quotient" => suite_beta_quotient(session)?,
        "gamma_est" => suite_gamma_est(session)?,
        "hyper_identity" => suite_hyper_identity(session)?,
        "wright" => suite_wright(session)?,
        "poisson_nstar" => suite_poisson_nstar(session)?,
        "poisson_wright" => suite_poisson_wright(session)?,
        "cor_poiss" => suite_cor_poiss(session)?,
        "cor_final" => suite_cor_final(session)?,
        "dsp" => suite_dsp(session)?,
        "divergence" => suite_divergence(session)?,
        "sampler" => suite_sampler(session)?,
        "all" => {
            let mut all = Vec::new();
            for s in SUITE_NAMES {
                all.extend(run_suite(session, s)?);
            }
            return Ok(all);
        }
        other => {
            return Err(Error::InvalidArgument(format!("unknown suite '{other}'")));
        }
    };
    let ms = started.elapsed().as_secs_f64() * 1e3 / records.len().max(1) as f64;
    for r in &mut records {
        r.runtime_ms = ms;
    }
    Ok(records)
}

fn suite_assumptions(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        out.extend(verify_assumptions(spec, &grid, s.tol.assumption_slack)?);
    }
    out.extend(verify_assumptions(
        &Matrix::dsp_spec(),
        &grid,
        s.tol.assumption_slack,
    )?);
    Ok(out)
}

/// Closed-form anchors for the oracle: the d=1 two-fold convolution, the n=1
/// identity, table masses, the L1 norm, and factor symmetry of the reduction.
fn suite_anchor(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    // 1) (e^{-|x|})*2 = e^{-x}(x+1)
    let anchor = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let o = s.oracle(&anchor)?;
    for &x in &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let v = o.conv_at(2, x)?;
        let exact = (-x).exp() * (x + 1.0);
        out.push(BoundCheckRecord::deviation(
            "anchor.twofold_closed_form",
            &anchor,
            Some(2),
            None,
            Some(x),
            v / exact - 1.0,
            s.tol.anchor_rel,
        ));
    }
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        // analytic L1 norm against the radial quadrature oracle
        let surf = spec.sphere_surface();
        let origin_alpha = if spec.variant == Variant::PurePower {
            (spec.gamma + 1.0 - spec.dim()).max(0.0)
        } else {
            0.0
        };
        let plan = crate::quad::Plan1d::new(0.0, 1.0).with_singularity(0.0, origin_alpha);
        let head = crate::quad::integrate_plan(
            |r| spec.density_f(r) * r.powf(spec.dim() - 1.0),
            &plan,
            1e-12,
            0.0,
        )
        .map_err(Error::Quadrature)?;
        let tail = crate::quad::integrate_tail(
            |r| spec.density_f(r) * r.powf(spec.dim() - 1.0),
            1.0,
            1e-12,
            0.0,
        )
        .map_err(Error::Quadrature)?;
        let quad_l1 = surf * (head.value + tail.value);
        out.push(BoundCheckRecord::deviation(
            "anchor.l1_norm",
            spec,
            None,
            None,
            None,
            spec.l1_norm()? / quad_l1 - 1.0,
            s.tol.l1_rel,
        ));
        // n = 1 table is the density
        let t1 = o.conv_table(1)?;
        let mid = t1.grid[t1.grid.len() / 2];
        out.push(BoundCheckRecord::deviation(
            "anchor.n1_identity",
            spec,
            Some(1),
            None,
            Some(mid),
            t1.value(mid) / spec.density_f(mid) - 1.0,
            1e-12,
        ));
        // masses of the low convolution powers
        let l1 = spec.l1_norm()?;
        for n in 2..=3u32 {
            if !o.mass_check_applicable(n) {
                continue;
            }
            let mass = o.conv_table(n)?.mass()?;
            out.push(BoundCheckRecord::deviation(
                "anchor.mass",
                spec,
                Some(n),
                None,
                None,
                mass / l1.powi(n as i32) - 1.0,
                s.tol.mass_rel,
            ));
        }
        // radial decreasing is inherited by the tables
        let t2 = o.conv_table(2)?;
        let monotone = t2
            .grid
            .windows(2)
            .all(|w| t2.log_value(w[1]) <= t2.log_value(w[0]) + 1e-9);
        out.push(BoundCheckRecord::linear(
            "anchor.radial_decreasing",
            spec,
            Some(2),
            None,
            None,
            if monotone { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }
    // reduction symmetry in the two factors (d = 2 and 3)
    for d in [2u32, 3] {
        let spec = DensitySpec::new(d, 1.0, 0.0, Variant::PurePower)?;
        let f1 = |r: f64| (-r).exp();
        let f2 = |r: f64| (-2.0 * r).exp() * (1.0 + r);
        let a = crate::oracle::reduce_radial_integral(d, 2.0, f1, f2, 1e-9)?;
        let b = crate::oracle::reduce_radial_integral(d, 2.0, f2, f1, 1e-9)?;
        out.push(BoundCheckRecord::deviation(
            "anchor.reduce_symmetry",
            &spec,
            None,
            None,
            Some(2.0),
            a / b - 1.0,
            1e-7,
        ));
    }
    Ok(out)
}

/// G_n tables against the exact one-dimensional formula.
fn suite_gn1d(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for &gamma in &[0.0, 0.25, 0.5] {
        let spec = DensitySpec::new(1, 1.0, gamma, Variant::PurePower)?;
        let rec = s.recursions(&spec)?;
        for n in 2..=4u32 {
            let table = rec.g_table(n)?;
            let mut worst = 0.0f64;
            let mut worst_r = 0.0;
            for &r in table.grid.iter().filter(|&&r| r <= 80.0) {
                let exact = g_n_exact_1d(gamma, n, r)?;
                let dev = (table.value(r) / exact - 1.0).abs();
                if dev > worst {
                    worst = dev;
                    worst_r = r;
                }
            }
            out.push(BoundCheckRecord::deviation(
                "direct_1d.gn_closed_form",
                &spec,
                Some(n),
                None,
                Some(worst_r),
                worst,
                s.tol.gn1d_rel,
            ));
        }
    }
    Ok(out)
}

/// d = 1 sandwich and exact limit for the convolution ratio.
fn suite_thm_1d(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for &gamma in &[0.0, 0.5] {
        let spec = DensitySpec::new(1, 1.0, gamma, Variant::PurePower)?;
        let o = s.oracle(&spec)?;
        let m2 = o.bundle.m2;
        let a = 1.0 - gamma;
        for &n in &[2u32, 3] {
            let nf = n as f64;
            let limit = (nf * lgamma(a) - lgamma(a * nf)).exp();
            for &x in &[10.0, 50.0, 100.0] {
                let ratio = o.conv_at(n, x)? / (spec.density_f(x) * x.powf(a * (nf - 1.0)));
                let upper = limit + 2.0 * m2 * nf * (m2 + lgamma(a).exp()).powf(nf - 1.0) / x.powf(a);
                out.push(BoundCheckRecord::linear(
                    "thm_1d.ratio_lower",
                    &spec,
                    Some(n),
                    None,
                    Some(x),
                    limit,
                    ratio,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::linear(
                    "thm_1d.ratio_upper",
                    &spec,
                    Some(n),
                    None,
                    Some(x),
                    ratio,
                    upper,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    // the x = 100 limit anchor: ratio = (x+1)/x = 1.01 for gamma = 0, n = 2
    let spec = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let o = s.oracle(&spec)?;
    let ratio = o.conv_at(2, 100.0)? / (spec.density_f(100.0) * 100.0);
    out.push(BoundCheckRecord::deviation(
        "thm_1d.limit_anchor",
        &spec,
        Some(2),
        None,
        Some(100.0),
        ratio - 1.01,
        s.tol.thm1d_ratio_tol,
    ));
    Ok(out)
}

/// Binomial upper bound and the g_n v M_1^{n-1} lower bound.
fn suite_thm1(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        let b = &o.bundle;
        for &n in s.matrix.ns.iter().filter(|&&n| n <= 3) {
            for &x in &s.matrix.xs {
                let conv = o.conv_at(n, x)?;
                let fx = spec.density_f(x);
                // upper: sum_i C(n,i) M2^{n-i} h_i(x) f(x)
                let nf = n as f64;
                let mut sum = 0.0;
                for i in 1..=n {
                    let fi = i as f64;
                    let binom =
                        (lgamma(nf + 1.0) - lgamma(fi + 1.0) - lgamma(nf - fi + 1.0)).exp();
                    sum += binom * b.m2.powf(nf - fi) * o.h_n(i, x)?;
                }
                out.push(BoundCheckRecord::linear(
                    "thm1.binomial",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    conv,
                    sum * fx,
                    s.tol.ineq_slack,
                ));
                let lower = o.g_n(n, x)?.max(b.m1.powi(n as i32 - 1));
                out.push(BoundCheckRecord::linear(
                    "lower_gen.gn_or_m1",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    lower,
                    conv / fx,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// Doubling-region bound f^{n*}(x) <= n (C2 ||f||)^{n-1} f(x) for |x| <= 2.
fn suite_es_dob(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        let c = o.bundle.c2 * o.bundle.l1_norm;
        for &n in s.matrix.ns.iter().filter(|&&n| n <= 3) {
            for &x in &[0.5, 1.0, 1.9] {
                let conv = o.conv_at(n, x)?;
                let bound = n as f64 * c.powi(n as i32 - 1) * spec.density_f(x);
                out.push(BoundCheckRecord::linear(
                    "es_for_dob.small_x",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    conv,
                    bound,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// The exact splitting identity behind the exponential estimates.
fn suite_le1(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = DensitySpec::new(3, 1.0, 0.0, Variant::PurePower)?;
    let mut out = Vec::new();
    let mut state = s.matrix.seed | 1;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..120 {
        let x1 = 0.3 + 12.0 * next();
        let y = [6.0 * next() - 2.0, 3.0 * next() - 1.5, 3.0 * next() - 1.5];
        let r = splitting_identity_residual(x1, &y);
        out.push(BoundCheckRecord::deviation(
            "le1.splitting_identity",
            &spec,
            Some(i as u32),
            None,
            Some(x1),
            r,
            1e-10,
        ));
    }
    Ok(out)
}

/// h_n <= M_3^{n-1} H_n for d >= 2.
fn suite_thm2(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in s.matrix.specs.iter().filter(|s| s.d >= 2) {
        let o = s.oracle(spec)?;
        let rec = s.recursions(spec)?;
        let m3 = o.bundle.m3;
        for &n in s.matrix.ns.iter().filter(|&&n| (2..=3).contains(&n)) {
            for &x in &[5.0, 10.0, 20.0, 40.0] {
                let h = o.h_n(n, x)?;
                let big = rec.big_h(n, x)?;
                out.push(BoundCheckRecord::linear(
                    "thm2.hn_le_hn_major",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    h,
                    m3.powi(n as i32 - 1) * big,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// g_n >= M_4^{n-1} G_n for d >= 2.
fn suite_thm4(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in s.matrix.specs.iter().filter(|s| s.d >= 2) {
        let o = s.oracle(spec)?;
        let rec = s.recursions(spec)?;
        let m4 = o.bundle.m4;
        for &n in s.matrix.ns.iter().filter(|&&n| (2..=3).contains(&n)) {
            for &x in &[5.0, 10.0, 20.0, 40.0] {
                let g = o.g_n(n, x)?;
                let big = rec.big_g(n, x)?;
                out.push(BoundCheckRecord::linear(
                    "thm4.gn_ge_gn_minor",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    m4.powi(n as i32 - 1) * big,
                    g,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// H_n against its closed-form majorant.
fn suite_alt_hn(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let rec = s.recursions(spec)?;
        for n in 2..=3u32 {
            for &r in &[5.0, 10.0, 20.0, 40.0, 80.0] {
                let h = rec.big_h(n, r)?;
                let bound = h_n_closed_bound(spec.d, spec.gamma, n, r)?;
                out.push(BoundCheckRecord::linear(
                    "alt_hn.closed_majorant",
                    spec,
                    Some(n),
                    None,
                    Some(r),
                    h,
                    bound,
                    s.tol.closed_bound_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// G_n against the explicit lower bound (r >= 1, log scale for d >= 2 where
/// the constant underflows).
fn suite_g_lower(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        let rec = s.recursions(spec)?;
        for n in 2..=3u32 {
            for &r in &[1.0, 2.0, 5.0, 20.0, 80.0] {
                let lhs = g_n_lower_bound_log(&o.bundle, n, r)?;
                let rhs = rec.g_table(n)?.log_value(r);
                out.push(BoundCheckRecord::log_scale(
                    "g_lower.explicit",
                    spec,
                    Some(n),
                    None,
                    Some(r),
                    lhs,
                    rhs,
                    s.tol.closed_bound_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// One-step inequality behind the G_n induction, both branches around r_0.
fn suite_estima(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        let rec = s.recursions(spec)?;
        let r0 = o.bundle.r0;
        let g1 = |_: f64| 1.0;
        // small branch at r in (0, r0]
        for &r in &[0.5, 1.0, r0.min(80.0) * 0.5] {
            let lhs = estima_small_branch_rhs(&o.bundle, r, &g1)?;
            let g2 = rec.big_g(2, r)?;
            out.push(BoundCheckRecord::linear(
                "estima.small_branch",
                spec,
                Some(2),
                None,
                Some(r),
                lhs,
                g2,
                s.tol.closed_bound_slack,
            ));
        }
        // large branch at r >= r0 (direct G_2 when r is past the table)
        for &factor in &[1.0, 2.0] {
            let r = r0 * factor;
            let lhs = estima_large_branch_rhs(&o.bundle, r, &g1)?;
            let g2 = if r <= 100.0 {
                rec.big_g(2, r)?
            } else {
                rec.big_g2_direct(r)?
            };
            out.push(BoundCheckRecord::linear(
                "estima.large_branch",
                spec,
                Some(2),
                None,
                Some(r),
                lhs,
                g2,
                s.tol.closed_bound_slack,
            ));
        }
    }
    Ok(out)
}

/// 2 B_{1/r}(a, b) <= B(a, b) for r past the threshold.
fn suite_beta_quotient(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let mut out = Vec::new();
    let mut bs = vec![0.3, 0.5, 1.0, 1.5, 2.5];
    for sp in &s.matrix.specs {
        bs.push(sp.dim() - sp.gamma);
        bs.push(sp.dim());
    }
    bs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bs.dedup();
    for &a0 in &[0.25, 0.5, 1.0] {
        for &b in &bs {
            let r0 = beta_quotient_threshold(a0, b)?;
            let mut a = a0;
            while a <= a0 + 10.0 {
                for k in 0..20 {
                    let r = r0 * 100.0f64.powf(k as f64 / 19.0);
                    let lhs = 2.0 * inc_beta(1.0 / r, a, b)?;
                    let rhs = beta(a, b)?;
                    out.push(BoundCheckRecord::linear(
                        "lem.beta_quotient",
                        &spec,
                        None,
                        Some(a),
                        Some(r),
                        lhs,
                        rhs,
                        1e-12,
                    ));
                }
                a += 2.43;
            }
        }
    }
    Ok(out)
}

/// Gamma(t) >= 1/2 on (0, 20].
fn suite_gamma_est(_s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let mut out = Vec::new();
    let mut t = 1e-3;
    while t <= 20.0 {
        out.push(BoundCheckRecord::linear(
            "gamma_est.half",
            &spec,
            None,
            None,
            Some(t),
            0.5,
            gamma(t)?,
            0.0,
        ));
        t += 0.04;
    }
    Ok(out)
}

/// Incomplete-beta/hypergeometric identity on pseudo-random points.
fn suite_hyper_identity(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let mut out = Vec::new();
    let mut state = s.matrix.seed ^ 0xabcd_ef01;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..60 {
        let a = 0.2 + 4.0 * next();
        let b = 0.2 + 4.0 * next();
        let x = 0.02 + 0.93 * next();
        let lhs = inc_beta(x, a, b)?;
        let f = crate::special::hypergeom_2f1(a + b, 1.0, a + 1.0, x)?;
        let rhs = x.powf(a) * (1.0 - x).powf(b) / a * f;
        out.push(BoundCheckRecord::deviation(
            "hyper.inc_beta_identity",
            &spec,
            None,
            Some(a),
            Some(x),
            lhs / rhs - 1.0,
            s.tol.hyper_identity_rel,
        ));
    }
    Ok(out)
}

/// Wright anchors and regime agreement.
fn suite_wright(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = DensitySpec::new(1, 1.0, 0.0, Variant::PurePower)?;
    let mut out = Vec::new();
    let e = wright_phi(1.0, 0.0, 1.0)?;
    out.push(BoundCheckRecord::deviation(
        "wright.series_anchor",
        &spec,
        None,
        None,
        Some(1.0),
        (e.value - 1.590_636_8) / 1.0,
        s.tol.wright_anchor_abs,
    ));
    for &rho in &[0.5, 1.0, 2.0] {
        for (t, tol) in [(400.0, s.tol.wright_t400_rel), (1e4, s.tol.wright_t1e4_rel)] {
            let series = wright_series_log(rho, 0.0, t)?;
            let asym = wright_asymptotic_log(rho, 0.0, t)?;
            out.push(BoundCheckRecord::deviation(
                "wright.regime_agreement",
                &spec,
                None,
                Some(rho),
                Some(t),
                (series - asym).exp_m1(),
                tol,
            ));
        }
    }
    // monotonicity of the series in t below the switch
    for &rho in &[0.5, 1.0, 2.0] {
        let ts = crate::wright::t_switch(rho);
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for i in 1..=24 {
            let v = wright_series_log(rho, 0.0, ts * i as f64 / 24.0)?;
            ok &= v > prev;
            prev = v;
        }
        out.push(BoundCheckRecord::linear(
            "wright.series_monotone",
            &spec,
            None,
            Some(rho),
            None,
            if ok { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }
    Ok(out)
}

/// Convolution sandwich of the main theorem (sharper direct form for d = 1).
fn suite_poisson_nstar(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        for &n in s.matrix.ns.iter().filter(|&&n| n <= 3) {
            for &x in s.matrix.xs.iter().filter(|&&x| x >= 1.0) {
                let v = o.conv_at(n, x)?.ln();
                let sw = nstar_bounds(&o.bundle, n, x)?;
                out.push(BoundCheckRecord::log_scale(
                    "thm_poisson.nstar_lower",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    sw.ln_lower,
                    v,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::log_scale(
                    "thm_poisson.nstar_upper",
                    spec,
                    Some(n),
                    None,
                    Some(x),
                    v,
                    sw.ln_upper,
                    s.tol.ineq_slack,
                ));
            }
        }
    }
    Ok(out)
}

/// Wright-function sandwich for p_lambda plus truncation certificates.
fn suite_poisson_wright(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        for &lambda in &s.matrix.lambdas {
            for &x in s.matrix.xs.iter().filter(|&&x| x >= 1.0) {
                let p = p_lambda(&o, lambda, x, s.tol.p_lambda_tol)?;
                let sw = p_lambda_bounds_wright(&o.bundle, lambda, x)?;
                out.push(BoundCheckRecord::log_scale(
                    "thm_poisson.sandwich_lower",
                    spec,
                    Some(p.n_terms),
                    Some(lambda),
                    Some(x),
                    sw.ln_lower,
                    p.log_value,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::log_scale(
                    "thm_poisson.sandwich_upper",
                    spec,
                    Some(p.n_terms),
                    Some(lambda),
                    Some(x),
                    p.log_value,
                    sw.ln_upper,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::linear(
                    "thm_poisson.truncation",
                    spec,
                    Some(p.n_terms),
                    Some(lambda),
                    Some(x),
                    p.truncation_rel,
                    s.tol.trunc_rel,
                    0.0,
                ));
            }
        }
    }
    Ok(out)
}

/// Small-x sandwich, the series-form sandwich at x >= 1, and total mass.
fn suite_cor_poiss(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        for &lambda in &s.matrix.lambdas {
            for &x in &s.matrix.small_xs {
                let p = p_lambda(&o, lambda, x, s.tol.p_lambda_tol)?;
                let sw = p_lambda_small_x_bounds(&o.bundle, lambda, x)?;
                out.push(BoundCheckRecord::log_scale(
                    "cor_poiss.small_x_lower",
                    spec,
                    None,
                    Some(lambda),
                    Some(x),
                    sw.ln_lower,
                    p.log_value,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::log_scale(
                    "cor_poiss.small_x_upper",
                    spec,
                    None,
                    Some(lambda),
                    Some(x),
                    p.log_value,
                    sw.ln_upper,
                    s.tol.ineq_slack,
                ));
            }
            // series form with direct h_n/g_n, n <= 3, plus majorant tail
            for &x in &[2.0, 10.0, 40.0] {
                let p = p_lambda(&o, lambda, x, s.tol.p_lambda_tol)?;
                let sw = p_lambda_series_bounds(&o, lambda, x, 3)?;
                out.push(BoundCheckRecord::log_scale(
                    "cor_poiss.series_lower",
                    spec,
                    Some(3),
                    Some(lambda),
                    Some(x),
                    sw.ln_lower,
                    p.log_value,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::log_scale(
                    "cor_poiss.series_upper",
                    spec,
                    Some(3),
                    Some(lambda),
                    Some(x),
                    p.log_value,
                    sw.ln_upper,
                    s.tol.ineq_slack,
                ));
            }
        }
        // probability normalization at the largest lambda whose bulk radius
        // stays well inside the table range
        if let Some(&lambda) = s
            .matrix
            .lambdas
            .iter()
            .filter(|&&l| o.p_lambda_bulk_fits(l).map(|r| 3.0 * r < 90.0).unwrap_or(false))
            .last()
        {
            let total = p_lambda_total_mass(&o, lambda, s.tol.p_lambda_tol)?;
            out.push(BoundCheckRecord::deviation(
                "cor_poiss.total_mass",
                spec,
                None,
                Some(lambda),
                None,
                total - 1.0,
                s.tol.mass_rel,
            ));
        }
    }
    Ok(out)
}

/// Two-regime explicit bounds with the fitted envelope constants.
fn suite_cor_final(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for spec in &s.matrix.specs {
        let o = s.oracle(spec)?;
        let env = fit_regime_envelopes(&o.bundle)?;
        for &lambda in &s.matrix.lambdas {
            for &x in s.matrix.xs.iter().filter(|&&x| x >= 1.0) {
                let p = p_lambda(&o, lambda, x, s.tol.p_lambda_tol)?;
                let (regime, sw) = p_lambda_bounds_regimes(&o.bundle, &env, lambda, x)?;
                let id = match regime {
                    crate::poisson::Regime::Small => "cor_final.small_regime",
                    crate::poisson::Regime::Large => "cor_final.large_regime",
                };
                out.push(BoundCheckRecord::log_scale(
                    format!("{id}_lower"),
                    spec,
                    None,
                    Some(lambda),
                    Some(x),
                    sw.ln_lower,
                    p.log_value,
                    s.tol.ineq_slack,
                ));
                out.push(BoundCheckRecord::log_scale(
                    format!("{id}_upper"),
                    spec,
                    None,
                    Some(lambda),
                    Some(x),
                    p.log_value,
                    sw.ln_upper,
                    s.tol.ineq_slack,
                ));
            }
        }
        // regime boundary: both bound pairs bracket p at lambda x^{rho2} = 1
        let x = 4.0f64;
        let lambda = x.powf(-o.bundle.rho2);
        let p = p_lambda(&o, lambda, x, s.tol.p_lambda_tol)?;
        for nudge in [1.0 - 1e-9, 1.0 + 1e-9] {
            let (_, sw) = p_lambda_bounds_regimes(&o.bundle, &env, lambda * nudge, x)?;
            out.push(BoundCheckRecord::log_scale(
                "cor_final.boundary",
                spec,
                None,
                Some(lambda * nudge),
                Some(x),
                sw.ln_lower,
                p.log_value,
                s.tol.ineq_slack,
            ));
            out.push(BoundCheckRecord::log_scale(
                "cor_final.boundary",
                spec,
                None,
                Some(lambda * nudge),
                Some(x),
                p.log_value,
                sw.ln_upper,
                s.tol.ineq_slack,
            ));
        }
    }
    Ok(out)
}

/// Bounded-h_2 regime (cutoff, gamma = 2 > (d+1)/2): geometric-in-n sandwich.
fn suite_dsp(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let spec = Matrix::dsp_spec();
    let o = s.oracle(&spec)?;
    let c_sup = o.h_table(2)?.max_value();
    let b = &o.bundle;
    let mut out = Vec::new();
    for n in 1..=3u32 {
        let nf = n as f64;
        for &x in &[2.0, 5.0, 10.0, 20.0] {
            let conv = o.conv_at(n, x)?;
            let fx = spec.density_f(x);
            out.push(BoundCheckRecord::linear(
                "general_prop.dsp_lower",
                &spec,
                Some(n),
                None,
                Some(x),
                nf * (b.m1 / 2.0).powf(nf - 1.0) * fx,
                conv,
                s.tol.ineq_slack,
            ));
            out.push(BoundCheckRecord::linear(
                "general_prop.dsp_upper",
                &spec,
                Some(n),
                None,
                Some(x),
                conv,
                nf * (b.m2 + c_sup).powf(nf - 1.0) * fx,
                s.tol.ineq_slack,
            ));
        }
    }
    Ok(out)
}

/// Divergence diagnostics: g_2 and f^{3*}/f^{2*} strictly increasing.
fn suite_divergence(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    let xs = [10.0, 20.0, 40.0, 80.0];
    for spec in s.matrix.specs.iter().filter(|s| s.in_main_range()) {
        let o = s.oracle(spec)?;
        let mut prev_g2 = 0.0;
        let mut prev_ratio = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let g2 = o.g_n(2, x)?;
            let ratio = (o.conv_log_at(3, x)? - o.conv_log_at(2, x)?).exp();
            if i > 0 {
                out.push(BoundCheckRecord::linear(
                    "general_prop.g2_increasing",
                    spec,
                    Some(2),
                    None,
                    Some(x),
                    prev_g2,
                    g2,
                    0.0,
                ));
                out.push(BoundCheckRecord::linear(
                    "general_prop.conv_ratio_increasing",
                    spec,
                    Some(3),
                    None,
                    Some(x),
                    prev_ratio,
                    ratio,
                    0.0,
                ));
            }
            prev_g2 = g2;
            prev_ratio = ratio;
        }
        // desk-scale proxy of the asymptotic equality at d = 1, n = 2
        if spec.d == 1 && spec.gamma == 0.0 {
            let x = 80.0;
            let ratio = o.conv_at(2, x)? / (spec.density_f(x) * o.g_n(2, x)?);
            out.push(BoundCheckRecord::linear(
                "general_prop.ratio_near_one_lower",
                spec,
                Some(2),
                None,
                Some(x),
                0.7,
                ratio,
                0.0,
            ));
            out.push(BoundCheckRecord::linear(
                "general_prop.ratio_near_one_upper",
                spec,
                Some(2),
                None,
                Some(x),
                ratio,
                1.3,
                0.0,
            ));
        }
    }
    Ok(out)
}

/// Monte Carlo cross-check: KS of sampled radii vs the numeric p_lambda CDF
/// and the atom mass.
fn suite_sampler(s: &Session) -> Result<Vec<BoundCheckRecord>> {
    let mut out = Vec::new();
    for (d, gamma, m, lambda) in [(1u32, 0.0, 1.0, 1.0), (2, 0.5, 1.0, 2.0)] {
        let spec = DensitySpec::new(d, m, gamma, Variant::PurePower)?;
        let o = s.oracle(&spec)?;
        let batch = sample_compound_poisson(&spec, lambda, s.tol.sampler_draws, s.matrix.seed)?;
        let p0 = (-lambda * o.bundle.l1_norm).exp();
        let frac = batch.atom_count as f64 / batch.total() as f64;
        let sd = (p0 * (1.0 - p0) / batch.total() as f64).sqrt();
        out.push(BoundCheckRecord::linear(
            "sampler.atom_fraction",
            &spec,
            None,
            Some(lambda),
            None,
            (frac - p0).abs(),
            s.tol.atom_sigmas * sd,
            0.0,
        ));
        let mut radii = batch.radii();
        let r_hi = radii.iter().cloned().fold(0.0, f64::max) + 1.0;
        let cdf = p_lambda_radial_cdf(&o, lambda, r_hi, 1200)?;
        let ks = ks_statistic(&mut radii, &|r| cdf(r));
        let critical = s.tol.ks_critical_coeff / (radii.len() as f64).sqrt();
        out.push(BoundCheckRecord::linear(
            "sampler.ks_radial",
            &spec,
            None,
            Some(lambda),
            None,
            ks,
            critical,
            0.0,
        ));
    }
    Ok(out)
}
