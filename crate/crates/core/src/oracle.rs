//! Brute-force oracle: n-fold radial convolutions and the restricted-domain
//! ratios h_n, g_n by direct adaptive quadrature.
//!
//! For d = 1 a convolution node is a one-dimensional integral with splits at
//! the kinks y = 0 and y = x and power-flattening at the profile poles. For
//! d >= 2 the integral over R^d reduces to nested one-dimensional integrals in
//! (rho, s) = (|y|, |x - y|) coordinates:
//!
//!   int F1(|x-y|) F2(|y|) dy = sigma_{d-2} int_0^inf F2(rho) rho^{d-1}
//!       int_{|x-rho|}^{x+rho} F1(s) [(s^2-a^2)(b^2-s^2)]^{(d-3)/2}
//!       (2 x rho)^{3-d} s / (x rho) ds drho,
//!
//! which keeps the (interpolated, relatively expensive) F2 factor in the outer
//! loop and turns the restricted lens domains D(x), E(x) into plain boxes
//! rho < bound, s < bound. The d = 2 angular weight has inverse-square-root
//! endpoint singularities; they are flattened by the usual substitution.
//!
//! Tables are built node-parallel, lowest n first, each level integrating the
//! interpolant of the previous one; n = 2 integrates the analytic density on
//! both sides. The d = 1 grid is 8x finer than the d >= 2 grid (nodes align at
//! the quarter-integer radii) because the compound Poisson reference check
//! demands ~1e-9 end-to-end table fidelity there and one-dimensional nodes
//! are cheap.

use crate::constants::{compute_constants, ConstantsBundle};
use crate::density::{DensitySpec, Variant};
use crate::error::{Error, Result};
use crate::quad::{self, Plan1d, QuadFail};
use crate::table::{RadialTable, TableKind, GRID_RMAX};
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Surface measure of S^{d-2} in R^{d-1}: the weight of the (y1, w) reduction.
fn sigma_reduced(d: u32) -> f64 {
    let dm1 = d as f64 - 1.0;
    (0.5 * dm1 * std::f64::consts::PI.ln() + 2.0f64.ln() - crate::special::lgamma(0.5 * dm1)).exp()
}

/// The angular integral A(x, rho) = int_0^pi F1(s(alpha)) sin^{d-2}(alpha) dalpha
/// with the chord s(alpha) = sqrt((x-rho)^2 + 4 x rho sin^2(alpha/2)), cut off
/// at s < s_cap (for the restricted lens domains). d = 3 collapses to the
/// exact chord form int_a^b F1(s) s ds / (x rho); other dimensions integrate
/// in alpha, where the weight is smooth and the chord formula is stable at
/// alpha -> 0. `pole_alpha` flattens an integrable F1 pole at s = 0 (it can
/// only be reached when rho ~ x) and `break_at_one` adds the cutoff-profile
/// kink at s = 1.
fn angular_integral<F: Fn(f64) -> f64>(
    d: u32,
    x: f64,
    rho: f64,
    s_cap: f64,
    f1: &F,
    m_scale: f64,
    pole_alpha: f64,
    break_at_one: bool,
    rel_tol: f64,
) -> Result<f64> {
    let a = (x - rho).abs();
    let b = x + rho;
    let hi = b.min(s_cap);
    if hi <= a {
        return Ok(0.0);
    }
    if d == 3 {
        let integrand = |s: f64| f1(s) * s / (x * rho);
        let mut plan = Plan1d::new(a, hi);
        let mut step = 1.0 / m_scale;
        while a + step < hi {
            plan = plan.with_breaks(&[a + step]);
            step *= 3.0;
        }
        if break_at_one {
            plan = plan.with_breaks(&[1.0]);
        }
        return Ok(quad::integrate_plan(&integrand, &plan, rel_tol, 0.0)
            .map_err(Error::Quadrature)?
            .value);
    }
    let chord = |alpha: f64| {
        let h = (0.5 * alpha).sin();
        (a * a + 4.0 * x * rho * h * h).sqrt()
    };
    // cap in the angle: s is increasing in alpha
    let alpha_hi = if hi >= b {
        std::f64::consts::PI
    } else {
        let c = ((x * x + rho * rho - hi * hi) / (2.0 * x * rho)).clamp(-1.0, 1.0);
        c.acos()
    };
    let p = d as f64 - 2.0;
    let integrand = |alpha: f64| {
        let v = f1(chord(alpha));
        if v == 0.0 {
            return 0.0;
        }
        v * alpha.sin().powf(p)
    };
    let mut plan = Plan1d::new(0.0, alpha_hi)
        .with_singularity(0.0, if a < 1e-3 * b { pole_alpha } else { 0.0 })
        .with_breaks(&[0.5 * alpha_hi]);
    // Seed the mesh at the decay scale of f along the chord: the integrand
    // falls off once chord - a exceeds ~1/m, i.e. past alpha ~ sqrt(delta/(x rho)).
    let delta = (2.0 / m_scale) * (a + 1.0 / m_scale);
    let mut alpha_s = (delta / (x * rho)).sqrt();
    while alpha_s < alpha_hi {
        plan = plan.with_breaks(&[alpha_s]);
        alpha_s *= 3.0;
    }
    if break_at_one && a < 1.0 && b > 1.0 {
        let c = ((x * x + rho * rho - 1.0) / (2.0 * x * rho)).clamp(-1.0, 1.0);
        plan = plan.with_breaks(&[c.acos()]);
    }
    Ok(quad::integrate_plan(&integrand, &plan, rel_tol, 0.0)
        .map_err(Error::Quadrature)?
        .value)
}

/// Angular integral specialized to F1 = the density f itself. For d = 3 the
/// chord form has a closed primitive in incomplete gammas,
/// int e^{-ms} s^{1-g} ds = m^{g-2} Gamma(2-g, ms), used unless the difference
/// cancels or the exponent leaves its domain; then it falls back to quadrature.
fn angular_density(spec: &DensitySpec, x: f64, rho: f64, s_cap: f64, rel_tol: f64) -> Result<f64> {
    let a = (x - rho).abs();
    let b = x + rho;
    let hi = b.min(s_cap);
    if hi <= a {
        return Ok(0.0);
    }
    if spec.d == 3 && a > 0.0 {
        let m = spec.m;
        // piece integral of e^{-ms} s^{1-g} over [u, v] via upper gammas
        let piece = |u: f64, v: f64, g: f64| -> Result<Option<f64>> {
            if v <= u {
                return Ok(Some(0.0));
            }
            let s_par = 2.0 - g;
            if s_par < 0.05 {
                return Ok(None);
            }
            let ga = crate::special::upper_gamma(s_par, m * u)?;
            let gb = crate::special::upper_gamma(s_par, m * v)?;
            let diff = ga - gb;
            if diff < 1e-10 * ga.abs() {
                return Ok(None);
            }
            Ok(Some(m.powf(g - 2.0) * diff))
        };
        let closed = match spec.variant {
            Variant::PurePower => piece(a, hi, spec.gamma)?,
            Variant::Cutoff => {
                let lo_part = piece(a, hi.min(1.0), 0.0)?;
                let hi_part = piece(a.max(1.0), hi, spec.gamma)?;
                match (lo_part, hi_part) {
                    (Some(p), Some(q)) => Some(p + q),
                    _ => None,
                }
            }
        };
        if let Some(v) = closed {
            return Ok(v / (x * rho));
        }
    }
    let pole_alpha = if spec.variant == Variant::PurePower {
        spec.gamma.min(0.95)
    } else {
        0.0
    };
    let f1 = |s: f64| spec.density_f(s);
    angular_integral(
        spec.d,
        x,
        rho,
        s_cap,
        &f1,
        spec.m,
        pole_alpha,
        spec.variant == Variant::Cutoff,
        rel_tol,
    )
}

/// Cubic Hermite interpolant of one smooth piece of ln A(x, .).
struct PiecewiseCubic {
    xs: Vec<f64>,
    w: Vec<f64>,
    m: Vec<f64>,
}

impl PiecewiseCubic {
    fn new(xs: Vec<f64>, w: Vec<f64>) -> Self {
        let m = crate::table::hermite_slopes_pub(&xs, &w);
        PiecewiseCubic { xs, w, m }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.w[0] + self.m[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.w[n - 1] + self.m[n - 1] * (x - self.xs[n - 1]);
        }
        let idx = match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.w[i],
            Err(i) => i - 1,
        };
        let h = self.xs[idx + 1] - self.xs[idx];
        let t = (x - self.xs[idx]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.w[idx]
            + (t3 - 2.0 * t2 + t) * h * self.m[idx]
            + (-2.0 * t3 + 3.0 * t2) * self.w[idx + 1]
            + (t3 - t2) * h * self.m[idx + 1]
}
}

/// Per-node cache of the angular factor ln A(x, rho), smooth on each side of
/// the chord kink at rho = x. Built once per grid node and shared by every
/// series level (the factor does not depend on n).
///
/// Near the kink A has a cusp A0 - c |x-rho|^{d-1-gamma} (pure power profile),
/// so each side is interpolated against u = delta^kappa, which turns the cusp
/// into a straight line; past delta_c the map continues linearly (C^1).
pub struct AngularCache {
    x: f64,
    kappa: f64,
    left: PiecewiseCubic,
    right: PiecewiseCubic,
}

impl AngularCache {
    fn u_of_delta(&self, delta: f64) -> f64 {
        delta.powf(self.kappa)
    }

    fn build(spec: &DensitySpec, x: f64, rho_max: f64) -> Result<Self> {
        let m = spec.m;
        let h0 = 0.1 / m;
        let mut mesh = vec![0.0f64];
        // base mesh: geometric on (0, 1] (curvature scales like 1/rho^2 and
        // 1/x^2 near the origin), uniform at the 1/m scale beyond
        let mut r = (x / 16.0).min(1e-4);
        while r < 1.0f64.min(rho_max) {
            mesh.push(r);
            r *= 1.06;
        }
        let mut r = 1.0f64.min(rho_max);
        while r < rho_max {
            mesh.push(r);
            r += h0;
        }
        // sqrt(2)-spaced ladder into the chord kink from both sides, starting
        // wide enough to cover the region the cusp coordinate warps
        let mut dj = (2.0 / m).min(0.9 * x).max(1e-8);
        while dj > 1e-8 * (1.0 + x) {
            if x - dj > 0.0 {
                mesh.push(x - dj);
            }
            mesh.push(x + dj);
            dj /= std::f64::consts::SQRT_2;
        }
        // cutoff profile: secondary kinks where the chord range crosses s = 1
        if spec.variant == Variant::Cutoff {
            for k in [x - 1.0, x + 1.0, 1.0 - x] {
                if k > 0.0 && k < rho_max {
                    mesh.push(k);
                    let mut dj = (0.5 / m).min(0.45 * k);
                    while dj > 1e-7 {
                        if k - dj > 0.0 {
                            mesh.push(k - dj);
                        }
                        mesh.push(k + dj);
                        dj /= std::f64::consts::SQRT_2;
                    }
                }
            }
        }
        // the exact kink value diverges when the profile pole is not
        // slice-integrable; skip it there and let the ladder carry the shape
        if !(spec.variant == Variant::PurePower && spec.gamma >= spec.dim() - 1.0) {
            mesh.push(x);
        }
        mesh.push(rho_max);
        mesh.sort_by(|p, q| p.partial_cmp(q).unwrap());
        mesh.dedup_by(|p, q| (*p - *q).abs() < 1e-14 * (1.0 + q.abs()));
        let mut left_xs = Vec::new();
        let mut left_w = Vec::new();
        let mut right_xs = Vec::new();
        let mut right_w = Vec::new();
        for &rho in &mesh {
            let val = if rho == 0.0 {
                // A(x, 0) = f(x) int_0^pi sin^{d-2}
                let wd = std::f64::consts::PI.sqrt()
                    * (crate::special::lgamma(0.5 * (spec.dim() - 1.0))
                        - crate::special::lgamma(0.5 * spec.dim()))
                    .exp();
                spec.density_f(x) * wd
            } else {
                angular_density(spec, x, rho, f64::INFINITY, 1e-9)?
            };
            let lw = val.ln();
            if !lw.is_finite() {
                continue;
            }
            if rho <= x {
                left_xs.push(rho);
                left_w.push(lw);
            }
            if rho >= x {
                right_xs.push(rho);
                right_w.push(lw);
            }
        }
        if left_xs.len() < 4 || right_xs.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "angular cache mesh degenerate at x={x}"
            )));
        }
        let kappa = match spec.variant {
            Variant::PurePower => (spec.dim() - 1.0 - spec.gamma).clamp(0.2, 1.0),
            Variant::Cutoff => 1.0,
        };
        let proto = AngularCache {
            x,
            kappa,
            left: PiecewiseCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 4]),
            right: PiecewiseCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 4]),
        };
        let left_u: Vec<f64> = left_xs.iter().map(|&r| -proto.u_of_delta(x - r)).collect();
        let right_u: Vec<f64> = right_xs.iter().map(|&r| proto.u_of_delta(r - x)).collect();
        Ok(AngularCache {
            left: PiecewiseCubic::new(left_u, left_w),
            right: PiecewiseCubic::new(right_u, right_w),
            ..proto
        })
    }

    pub fn eval_ln(&self, rho: f64) -> f64 {
        if rho <= self.x {
            self.left.eval(-self.u_of_delta(self.x - rho))
        } else {
            self.right.eval(self.u_of_delta(rho - self.x))
        }
    }
}

/// Diagnostic: worst cache-vs-direct relative error by region (dev tool).
pub fn probe_angular_cache_error(spec: &DensitySpec, x: f64) {
    let cache = AngularCache::build(spec, x, GRID_RMAX + 12.0 / spec.m).unwrap();
    let mut worst = (0.0f64, 0.0f64);
    let mut rho = 1e-3;
    while rho < 130.0 {
        let direct = angular_density(spec, x, rho, f64::INFINITY, 1e-10).unwrap();
        let e = (cache.eval_ln(rho) - direct.ln()).abs();
        if e > worst.1 {
            worst = (rho, e);
        }
        rho *= 1.013;
    }
    println!("x={x}: worst ln-err {:.3e} at rho={:.4}", worst.1, worst.0);
}

/// Computes int_{R^d} F1(|x-y|) F2(|y|) dy for radial F1, F2 at x = (x1,0,...,0)
/// by nested adaptive quadrature in (rho, s) coordinates. d >= 2 only.
pub fn reduce_radial_integral<F1, F2>(d: u32, x1: f64, f1: F1, f2: F2, rel_tol: f64) -> Result<f64>
where
    F1: Fn(f64) -> f64 + Sync,
    F2: Fn(f64) -> f64 + Sync,
{
    if d < 2 {
        return Err(Error::InvalidArgument("reduce_radial_integral needs d >= 2".into()));
    }
    if !(x1 > 0.0) {
        return Err(Error::InvalidArgument("reduce_radial_integral needs x1 > 0".into()));
    }
    let sigma = sigma_reduced(d);
    let fail: RefCell<Option<QuadFail>> = RefCell::new(None);
    let inner_tol = rel_tol / 3.0;
    let dim = d as f64;
    let outer = |rho: f64| -> f64 {
        let f2v = f2(rho);
        if f2v == 0.0 {
            return 0.0;
        }
        match angular_integral(d, x1, rho, f64::INFINITY, &f1, 1.0, 0.0, false, inner_tol) {
            Ok(a) => f2v * rho.powf(dim - 1.0) * a,
            Err(Error::Quadrature(e)) => {
                fail.borrow_mut().get_or_insert(e);
                0.0
            }
            Err(_) => f64::NAN,
        }
    };
    let mut total = quad::integrate_cells(
        &outer,
        &[(0.0, 0.5 * x1), (0.5 * x1, x1)],
        rel_tol,
        0.0,
        4000,
    )
    .map_err(Error::Quadrature)?
    .value;
    total += quad::integrate_tail(&outer, x1, rel_tol, 0.0)
        .map_err(Error::Quadrature)?
        .value;
    if let Some(e) = fail.into_inner() {
        return Err(Error::Quadrature(e));
    }
    Ok(sigma * total)
}

/// What stands in for the inner factor of an iterated integrand: the analytic
/// density, a memoized table, or the constant 1 (h_1 = g_1).
enum Prev<'a> {
    Analytic,
    Table(&'a RadialTable),
    Unit,
}

impl Prev<'_> {
    fn log_at(&self, spec: &DensitySpec, r: f64) -> f64 {
        match self {
            Prev::Analytic => spec.log_density_f(r),
            Prev::Table(t) => t.log_value(r),
            Prev::Unit => 0.0,
        }
    }

    /// Power-law exponent near the origin (negative = integrable pole).
    fn origin_power(&self, spec: &DensitySpec) -> f64 {
        match self {
            Prev::Analytic => {
                if spec.variant == Variant::PurePower {
                    -spec.gamma
                } else {
                    0.0
                }
            }
            Prev::Table(t) => t.origin_power(),
            Prev::Unit => 0.0,
        }
    }
}

/// One d=1 convolution node: int_0^inf T(u) [f(|x-u|) + f(x+u)] du, computed
/// with the previous table rescaled by `shift` so deep series levels (whose
/// values pass e^{700}) stay inside f64; the result is ln(value) which
/// includes the shift again.
fn conv_node_d1(spec: &DensitySpec, prev: &Prev, x: f64, rel_tol: f64, shift: f64) -> Result<f64> {
    let alpha_f = if spec.variant == Variant::PurePower { spec.gamma } else { 0.0 };
    let alpha_t = (-prev.origin_power(spec)).max(0.0);
    let integrand = |u: f64| {
        let lt = prev.log_at(spec, u);
        if lt == f64::NEG_INFINITY {
            return 0.0;
        }
        let a = (lt - shift + spec.log_density_f((x - u).abs())).exp();
        let b = (lt - shift + spec.log_density_f(x + u)).exp();
        a + b
    };
    let u_hi = x + 8.0 / spec.m + 20.0;
    let mut plan = Plan1d::new(0.0, u_hi)
        .with_singularity(0.0, alpha_t)
        .with_singularity(x, alpha_f);
    if spec.variant == Variant::Cutoff {
        // profile kinks where an argument radius crosses 1
        plan = plan.with_breaks(&[(x - 1.0).max(0.0), x + 1.0, 1.0]);
    }
    let head = quad::integrate_plan(&integrand, &plan, rel_tol, 0.0).map_err(Error::Quadrature)?;
    let tail = quad::integrate_tail(&integrand, u_hi, rel_tol, 0.0).map_err(Error::Quadrature)?;
    Ok((head.value + tail.value).ln() + shift)
}

/// One d>=2 convolution node in (rho, s) coordinates; the outer factor is the
/// previous table read in the log domain (values reach e^{300} for deep n), so
/// the outer integrand is rescaled by its running log maximum to stay finite.
fn conv_node_dge2(
    spec: &DensitySpec,
    prev: &Prev,
    x: f64,
    rel_tol: f64,
    ang: Option<&AngularCache>,
    shift: f64,
) -> Result<f64> {
    let d = spec.d;
    let sigma = sigma_reduced(d);
    let dim = d as f64;
    let fail: RefCell<Option<QuadFail>> = RefCell::new(None);
    let inner_tol = rel_tol / 3.0;
    let cutoff = spec.variant == Variant::Cutoff;
    let outer = |rho: f64| -> f64 {
        let lt = prev.log_at(spec, rho);
        if lt == f64::NEG_INFINITY {
            return 0.0;
        }
        if let Some(cache) = ang {
            return (lt - shift + (dim - 1.0) * rho.ln() + cache.eval_ln(rho)).exp();
        }
        match angular_density(spec, x, rho, f64::INFINITY, inner_tol) {
            Ok(a) => (lt - shift + (dim - 1.0) * rho.ln()).exp() * a,
            Err(Error::Quadrature(e)) => {
                fail.borrow_mut().get_or_insert(e);
                0.0
            }
            Err(_) => f64::NAN,
        }
    };
    let alpha_prev = (-prev.origin_power(spec)).max(0.0) - (dim - 1.0);
    let mut plan = Plan1d::new(0.0, x)
        .with_breaks(&[0.5 * x])
        .with_singularity(0.0, alpha_prev.max(0.0).min(0.95))
        .with_singularity(x, (spec.gamma - (dim - 1.0)).max(0.0).min(0.95));
    // seed the exponential structure near both endpoints
    let mut step = 0.5 / spec.m;
    while step < 0.5 * x {
        plan = plan.with_breaks(&[step, x - step]);
        step *= 3.0;
    }
    if cutoff {
        plan = plan.with_breaks(&[1.0, (x - 1.0).max(0.0), x + 1.0]);
    }
    let mut total = quad::integrate_plan(&outer, &plan, rel_tol, 0.0)
        .map_err(Error::Quadrature)?
        .value;
    total += quad::integrate_tail(&outer, x, rel_tol, 0.0)
        .map_err(Error::Quadrature)?
        .value;
    if let Some(e) = fail.into_inner() {
        return Err(Error::Quadrature(e));
    }
    Ok((sigma * total).ln() + shift)
}

/// ln f^{(n)}-style node: the log of the convolution of `prev` with f at x.
fn conv_node_log(
    spec: &DensitySpec,
    prev: &Prev,
    x: f64,
    rel_tol: f64,
    ang: Option<&AngularCache>,
    shift: f64,
) -> Result<f64> {
    if spec.d == 1 {
        conv_node_d1(spec, prev, x, rel_tol, shift)
    } else {
        conv_node_dge2(spec, prev, x, rel_tol, ang, shift)
    }
}

/// Restricted-integral domains of the h_n / g_n recursions.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Restricted {
    /// D(x): both radii below |x| - 1 (and below |x| - 1 from x).
    LensD,
    /// E(x): both radii below |x|.
    LensE,
}

/// One node of h_{level} (LensD) or g_{level} (LensE): the restricted integral
/// of f(x-y) f(y) prev(|y|) / f(x).
fn restricted_node(
    spec: &DensitySpec,
    prev: &Prev,
    x: f64,
    dom: Restricted,
    rel_tol: f64,
) -> Result<f64> {
    let bound = match dom {
        Restricted::LensD => x - 1.0,
        Restricted::LensE => x,
    };
    let (y_lo, y_hi) = match dom {
        Restricted::LensD => (1.0, x - 1.0),
        Restricted::LensE => (0.0, x),
    };
    if y_hi <= y_lo {
        return Ok(0.0);
    }
    let lfx = spec.log_density_f(x);
    if spec.d == 1 {
        let alpha0 = if dom == Restricted::LensE {
            (-prev.origin_power(spec)).max(0.0) + if spec.variant == Variant::PurePower { spec.gamma } else { 0.0 }
        } else {
            0.0
        };
        let alpha_x = if spec.variant == Variant::PurePower { spec.gamma } else { 0.0 };
        let integrand = |y: f64| {
            let lt = prev.log_at(spec, y);
            if lt == f64::NEG_INFINITY {
                return 0.0;
            }
            (spec.log_density_f(x - y) + spec.log_density_f(y) + lt - lfx).exp()
        };
        let mut plan = Plan1d::new(y_lo, y_hi)
            .with_singularity(y_lo, alpha0.min(0.95))
            .with_singularity(y_hi, alpha_x)
            .with_breaks(&[0.5 * x]);
        if spec.variant == Variant::Cutoff {
            plan = plan.with_breaks(&[1.0, x - 1.0]);
        }
        let q = quad::integrate_plan(&integrand, &plan, rel_tol, 0.0).map_err(Error::Quadrature)?;
        return Ok(q.value);
    }
    let sigma = sigma_reduced(spec.d);
    let dim = spec.dim();
    let fail: RefCell<Option<QuadFail>> = RefCell::new(None);
    let inner_tol = rel_tol / 3.0;
    let cutoff = spec.variant == Variant::Cutoff;
    // In (rho, s) = (|y|, |x-y|) coordinates both lens constraints are plain
    // caps: rho < bound and s < bound.
    let outer = |rho: f64| -> f64 {
        let lt = prev.log_at(spec, rho);
        if lt == f64::NEG_INFINITY {
            return 0.0;
        }
        match angular_density(spec, x, rho, bound, inner_tol) {
            Ok(a) => (lt + spec.log_density_f(rho) - lfx + (dim - 1.0) * rho.ln()).exp() * a,
            Err(Error::Quadrature(e)) => {
                fail.borrow_mut().get_or_insert(e);
                0.0
            }
            Err(_) => f64::NAN,
        }
    };
    let alpha0 = if spec.variant == Variant::PurePower {
        (spec.gamma + (-prev.origin_power(spec)).max(0.0) - (dim - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mut plan = Plan1d::new(0.0, bound)
        .with_breaks(&[0.5 * x, (x - bound).abs()])
        .with_singularity(0.0, alpha0.min(0.95))
        .with_singularity(x.min(bound), (spec.gamma - (dim - 1.0)).max(0.0).min(0.95));
    let mut step = 0.5 / spec.m;
    while step < 0.5 * bound {
        plan = plan.with_breaks(&[step, bound - step]);
        step *= 3.0;
    }
    if cutoff {
        plan = plan.with_breaks(&[1.0, (x - 1.0).max(0.0)]);
    }
    let q = quad::integrate_plan(&outer, &plan, rel_tol, 0.0).map_err(Error::Quadrature)?;
    if let Some(e) = fail.into_inner() {
        return Err(Error::Quadrature(e));
    }
    Ok(sigma * q.value)
}

/// Cost guard for the restricted integrals.
pub const RESTRICTED_N_CAP: u32 = 4;

/// Oracle with memoized tables for one density.
pub struct Oracle {
    pub spec: DensitySpec,
    pub bundle: ConstantsBundle,
    grid: Vec<f64>,
    aux_grid: Vec<f64>,
    conv: Mutex<Vec<Arc<RadialTable>>>,
    aux: Mutex<HashMap<(char, u32), Arc<RadialTable>>>,
    ang: Mutex<Option<Arc<Vec<AngularCache>>>>,
    restricted_memo: Mutex<HashMap<(char, u32, u64), f64>>,
}

/// Dimension-dependent convolution grid (see module docs).
pub fn conv_grid(d: u32) -> Vec<f64> {
    if d == 1 {
        let mut grid = Vec::with_capacity(512 + 3810);
        let n_geo = 512usize;
        for i in 0..n_geo {
            grid.push(1e-4 * (1e4f64).powf(i as f64 / (n_geo - 1) as f64));
        }
        let mut k = 1u64;
        loop {
            let r = 1.0 + k as f64 / 32.0;
            if r > GRID_RMAX + 1e-9 {
                break;
            }
            grid.push(r);
            k += 1;
        }
        grid
    } else {
        crate::table::graded_grid(GRID_RMAX)
    }
}

/// Node quadrature tolerance: tight where low-n accuracy matters, relaxed in
/// the deep tail of the compound Poisson series where sandwich margins are
/// huge. The d = 1 anchors (two-fold closed form, compound Poisson reference)
/// demand more than the d >= 2 mass/inequality budgets do.
fn tol_for_level(d: u32, n: u32) -> f64 {
    if d == 1 {
        if n <= 4 {
            1e-10
        } else if n <= 12 {
            1e-9
        } else {
            1e-7
        }
    } else if n <= 4 {
        3e-9
    } else if n <= 12 {
        1e-7
    } else if n <= 40 {
        1e-5
    } else {
        // deep bulk levels: feed only sandwich checks with enormous margins
        1e-4
    }
}

impl Oracle {
    pub fn new(spec: DensitySpec) -> Result<Self> {
        spec.validate()?;
        let bundle = compute_constants(&spec)?;
        Ok(Oracle {
            spec,
            bundle,
            grid: conv_grid(spec.d),
            aux_grid: crate::table::graded_grid(GRID_RMAX),
            conv: Mutex::new(Vec::new()),
            aux: Mutex::new(HashMap::new()),
            ang: Mutex::new(None),
            restricted_memo: Mutex::new(HashMap::new()),
        })
    }

    /// Angular caches for every grid node (d >= 2; d = 1 has no angular
    /// factor). For d = 3 the builder itself runs on the closed form, so the
    /// cache is cheap and turns deep series levels into memory-speed sweeps.
    fn ang_caches(&self) -> Result<Option<Arc<Vec<AngularCache>>>> {
        if self.spec.d == 1 {
            return Ok(None);
        }
        let mut slot = self.ang.lock().unwrap();
        if slot.is_none() {
            let rho_max = GRID_RMAX + 12.0 / self.spec.m;
            let caches: Vec<Result<AngularCache>> = self
                .grid
                .par_iter()
                .map(|&x| AngularCache::build(&self.spec, x, rho_max))
                .collect();
            let caches = caches.into_iter().collect::<Result<Vec<_>>>()?;
            *slot = Some(Arc::new(caches));
        }
        Ok(slot.clone())
    }

    /// f^{n*} as a table, building every level up to n on first use.
    pub fn conv_table(&self, n: u32) -> Result<Arc<RadialTable>> {
        if n < 1 {
            return Err(Error::InvalidArgument("convolution power n must be >= 1".into()));
        }
        let mut tabs = self.conv.lock().unwrap();
        while (tabs.len() as u32) < n {
            let level = tabs.len() as u32 + 1;
            let table = if level == 1 {
                let logs: Vec<f64> = self.grid.iter().map(|&r| self.spec.log_density_f(r)).collect();
                RadialTable::from_log_values(
                    self.spec,
                    1,
                    TableKind::ConvPower,
                    self.grid.clone(),
                    logs,
                    0.0,
                )?
            } else {
                let prev = if level == 2 {
                    Prev::Analytic
                } else {
                    Prev::Table(&tabs[level as usize - 2])
                };
                let tol = tol_for_level(self.spec.d, level);
                let caches = self.ang_caches()?;
                let shift = match &prev {
                    Prev::Table(t) => t.max_log(),
                    _ => 0.0,
                };
                let logs: Vec<Result<f64>> = self
                    .grid
                    .par_iter()
                    .enumerate()
                    .map(|(i, &r)| {
                        let ang = caches.as_ref().map(|c| &c[i]);
                        let v = conv_node_log(&self.spec, &prev, r, tol, ang, shift)?;
                        if v.is_finite() || ang.is_none() {
                            return Ok(v);
                        }
                        // rare pathological node: redo without the cache
                        conv_node_log(&self.spec, &prev, r, tol, None, shift)
                    })
                    .collect();
                let logs: Vec<f64> = logs.into_iter().collect::<Result<Vec<_>>>()?;
                RadialTable::from_log_values(
                    self.spec,
                    level,
                    TableKind::ConvPower,
                    self.grid.clone(),
                    logs,
                    0.0,
                )?
            };
            tabs.push(Arc::new(table));
        }
        Ok(tabs[n as usize - 1].clone())
    }

    /// f^{n*}(x) with a fresh outer integral at exactly x (n = 1, 2 touch no
    /// table at all; deeper levels interpolate f^{(n-1)*}).
    pub fn conv_at(&self, n: u32, x: f64) -> Result<f64> {
        if n == 1 {
            return Ok(self.spec.density_f(x));
        }
        if n == 2 {
            return conv_node_log(&self.spec, &Prev::Analytic, x, tol_for_level(self.spec.d, 2), None, 0.0)
                .map(f64::exp);
        }
        let prev = self.conv_table(n - 1)?;
        let shift = prev.max_log();
        conv_node_log(&self.spec, &Prev::Table(&prev), x, tol_for_level(self.spec.d, n), None, shift)
            .map(f64::exp)
    }

    pub fn conv_log_at(&self, n: u32, x: f64) -> Result<f64> {
        if n == 1 {
            return Ok(self.spec.log_density_f(x));
        }
        let t = self.conv_table(n)?;
        Ok(t.log_value(x))
    }

    fn aux_table(&self, dom: Restricted, level: u32) -> Result<Arc<RadialTable>> {
        let key = (if dom == Restricted::LensD { 'h' } else { 'g' }, level);
        if let Some(t) = self.aux.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let prev_table = if level > 2 {
            Some(self.aux_table(dom, level - 1)?)
        } else {
            None
        };
        let prev = match &prev_table {
            Some(t) => Prev::Table(t),
            None => Prev::Unit,
        };
        let support = match dom {
            Restricted::LensD => level as f64,
            Restricted::LensE => 0.0,
        };
        let tol = 1e-8;
        let logs: Vec<Result<f64>> = self
            .aux_grid
            .par_iter()
            .map(|&r| {
                if r <= support * (1.0 + 1e-12) {
                    return Ok(f64::NEG_INFINITY);
                }
                let v = restricted_node(&self.spec, &prev, r, dom, tol)?;
                Ok(if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            })
            .collect();
        let logs = logs.into_iter().collect::<Result<Vec<_>>>()?;
        let kind = if dom == Restricted::LensD { TableKind::LittleH } else { TableKind::LittleG };
        let table = Arc::new(RadialTable::from_log_values(
            self.spec,
            level,
            kind,
            self.aux_grid.clone(),
            logs,
            support,
        )?);
        self.aux.lock().unwrap().insert(key, table.clone());
        Ok(table)
    }

    /// h_n(x) by direct restricted integration (n <= 4 cost guard).
    pub fn h_n(&self, n: u32, x: f64) -> Result<f64> {
        self.restricted_value(Restricted::LensD, n, x)
    }

    /// g_n(x) by direct restricted integration (n <= 4 cost guard).
    pub fn g_n(&self, n: u32, x: f64) -> Result<f64> {
        self.restricted_value(Restricted::LensE, n, x)
    }

    fn restricted_value(&self, dom: Restricted, n: u32, x: f64) -> Result<f64> {
        if n < 1 || n > RESTRICTED_N_CAP {
            return Err(Error::InvalidArgument(format!(
                "restricted integrals support 1 <= n <= {RESTRICTED_N_CAP}, got {n}"
            )));
        }
        if !(x > 0.0) {
            return Err(Error::InvalidArgument("restricted integrals need x > 0".into()));
        }
        if n == 1 {
            return Ok(1.0);
        }
        if dom == Restricted::LensD && x <= n as f64 {
            return Ok(0.0);
        }
        let key = (
            if dom == Restricted::LensD { 'h' } else { 'g' },
            n,
            x.to_bits(),
        );
        if let Some(&v) = self.restricted_memo.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = if n == 2 {
            restricted_node(&self.spec, &Prev::Unit, x, dom, 1e-9)?
        } else {
            let prev = self.aux_table(dom, n - 1)?;
            restricted_node(&self.spec, &Prev::Table(&prev), x, dom, 1e-8)?
        };
        self.restricted_memo.lock().unwrap().insert(key, v);
        Ok(v)
    }

    /// The memoized h_n table (interpolation surface used by series bounds).
    pub fn h_table(&self, n: u32) -> Result<Arc<RadialTable>> {
        if n < 2 || n > RESTRICTED_N_CAP {
            return Err(Error::InvalidArgument("h tables exist for 2 <= n <= 4".into()));
        }
        self.aux_table(Restricted::LensD, n)
    }

    pub fn g_table(&self, n: u32) -> Result<Arc<RadialTable>> {
        if n < 2 || n > RESTRICTED_N_CAP {
            return Err(Error::InvalidArgument("g tables exist for 2 <= n <= 4".into()));
        }
        self.aux_table(Restricted::LensE, n)
    }

    /// Whether the n-fold bulk sits far enough inside the grid for the table
    /// mass to be meaningful against ||f||_1^n.
    pub fn mass_check_applicable(&self, n: u32) -> bool {
        let mu = 1.5 * self.spec.dim() / self.spec.m + 1.0;
        let nf = n as f64;
        nf * mu + 6.0 * nf.sqrt() * mu <= 0.9 * GRID_RMAX
    }

    /// Whether the compound Poisson bulk (sum of ~lambda ||f||_1 isotropic
    /// jumps) fits inside the grid, so that radial integrals of p_lambda are
    /// trustworthy end to end.
    pub fn p_lambda_bulk_fits(&self, lambda: f64) -> Result<f64> {
        let spec = &self.spec;
        let a = match spec.variant {
            Variant::PurePower => spec.dim() - spec.gamma,
            Variant::Cutoff => spec.dim(),
        };
        // E[r^2] of one jump ~ a (a+1) / m^2 for the gamma-type radial law
        let r2 = a * (a + 1.0) / (spec.m * spec.m);
        let mean_n = lambda * self.bundle.l1_norm;
        Ok((mean_n.max(1.0) * r2).sqrt())
    }
}

/// Residual of the exact splitting identity
/// |x-y| + |y| - |x| - r^2/(|y|+y1) - r^2/(|x-y|+(x1-y1)) with r^2 = y2^2+...+yd^2.
pub fn splitting_identity_residual(x1: f64, y: &[f64]) -> f64 {
    let y1 = y[0];
    let r2: f64 = y[1..].iter().map(|v| v * v).sum();
    let norm_y = (y1 * y1 + r2).sqrt();
    let norm_xy = ((x1 - y1) * (x1 - y1) + r2).sqrt();
    norm_xy + norm_y - x1 - r2 / (norm_y + y1) - r2 / (norm_xy + (x1 - y1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: u32, m: f64, gamma: f64, variant: Variant) -> DensitySpec {
        DensitySpec::new(d, m, gamma, variant).unwrap()
    }

    #[test]
    fn reduce_disjoint_balls_is_zero() {
        let ind = |r: f64| if r <= 1.0 { 1.0 } else { 0.0 };
        let v = reduce_radial_integral(2, 3.0, ind, ind, 1e-8).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn reduce_matches_d3_radial_reference() {
        // (e^{-|.|} * e^{-|.|})(x) in R^3 via the classical 1-D reduction
        // (2 pi / x) int_0^inf s e^{-s} [ int_{|x-s|}^{x+s} t e^{-t} dt ] ds.
        let x = 1.0;
        let inner_exact = |a: f64, b: f64| {
            // int_a^b t e^{-t} dt = (1+a)e^{-a} - (1+b)e^{-b}
            (1.0 + a) * (-a).exp() - (1.0 + b) * (-b).exp()
        };
        let reference = quad::integrate_tail(
            |s: f64| s * (-s).exp() * inner_exact((x - s).abs(), x + s),
            0.0,
            1e-12,
            0.0,
        )
        .unwrap()
        .value
            * 2.0
            * std::f64::consts::PI
            / x;
        let v =
            reduce_radial_integral(3, x, |r: f64| (-r).exp(), |r: f64| (-r).exp(), 1e-9).unwrap();
        assert!(
            (v - reference).abs() < 1e-6 * reference,
            "{v} vs {reference}"
        );
    }

    #[test]
    fn reduce_is_symmetric_in_factors() {
        let f1 = |r: f64| (-r).exp();
        let f2 = |r: f64| (-2.0 * r).exp() * (1.0 + r);
        let a = reduce_radial_integral(2, 2.0, f1, f2, 1e-9).unwrap();
        let b = reduce_radial_integral(2, 2.0, f2, f1, 1e-9).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn d1_twofold_closed_form() {
        // (e^{-|x|})*2 = e^{-|x|}(|x|+1)
        let o = Oracle::new(spec(1, 1.0, 0.0, Variant::PurePower)).unwrap();
        for &x in &[0.5f64, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let v = o.conv_at(2, x).unwrap();
            let exact = (-x).exp() * (x + 1.0);
            assert!(
                (v - exact).abs() < 1e-9 * exact,
                "x={x}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn n1_table_is_the_density() {
        let o = Oracle::new(spec(2, 1.0, 0.5, Variant::PurePower)).unwrap();
        let t = o.conv_table(1).unwrap();
        for &r in &[t.grid[0], t.grid[40], t.grid[200], *t.grid.last().unwrap()] {
            assert!((t.value(r) - o.spec.density_f(r)).abs() <= 1e-13 * o.spec.density_f(r));
        }
        // between nodes the interpolant stays within its fidelity budget
        for &r in &[1e-3, 0.3, 2.1, 37.1] {
            assert!((t.value(r) - o.spec.density_f(r)).abs() <= 1e-5 * o.spec.density_f(r));
        }
    }

    #[test]
    fn d1_threefold_mass() {
        let o = Oracle::new(spec(1, 1.0, 0.0, Variant::PurePower)).unwrap();
        let t = o.conv_table(3).unwrap();
        assert!(o.mass_check_applicable(3));
        let m = t.mass().unwrap();
        assert!((m - 8.0).abs() < 1e-5 * 8.0, "mass {m}");
    }

    #[test]
    fn d2_twofold_mass_and_monotonicity() {
        let o = Oracle::new(spec(2, 1.0, 0.5, Variant::PurePower)).unwrap();
        let t = o.conv_table(2).unwrap();
        let l1 = o.spec.l1_norm().unwrap();
        let m = t.mass().unwrap();
        assert!((m - l1 * l1).abs() < 1e-5 * l1 * l1, "mass {m} vs {}", l1 * l1);
        // radial decreasing is inherited
        let mut prev = f64::INFINITY;
        for &r in t.grid.iter() {
            let v = t.value(r);
            assert!(v <= prev * (1.0 + 1e-9));
            prev = v;
        }
    }

    #[test]
    fn h2_g2_d1_closed_values() {
        // gamma = 0, d = 1: g_2(5) = 5, h_2(5) = 3 (plain interval lengths)
        let o = Oracle::new(spec(1, 1.0, 0.0, Variant::PurePower)).unwrap();
        let g2 = o.g_n(2, 5.0).unwrap();
        assert!((g2 - 5.0).abs() < 1e-8, "{g2}");
        let h2 = o.h_n(2, 5.0).unwrap();
        assert!((h2 - 3.0).abs() < 1e-8, "{h2}");
        // h_n vanishes below its support radius
        assert_eq!(o.h_n(2, 1.5).unwrap(), 0.0);
        assert_eq!(o.h_n(3, 2.9).unwrap(), 0.0);
        // n = 1 is the constant 1
        assert_eq!(o.h_n(1, 0.7).unwrap(), 1.0);
        // cost guard
        assert!(o.h_n(5, 10.0).is_err());
    }

    #[test]
    fn h_below_g_pointwise() {
        let o = Oracle::new(spec(2, 1.0, 0.0, Variant::PurePower)).unwrap();
        for &x in &[3.0, 6.0, 10.0] {
            let h = o.h_n(2, x).unwrap();
            let g = o.g_n(2, x).unwrap();
            assert!(h <= g * (1.0 + 1e-9), "x={x}: h={h} g={g}");
        }
    }

    #[test]
    fn splitting_identity_random_points() {
        // deterministic pseudo-random probe of the exact identity
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let x1 = 0.5 + 10.0 * next();
            let y = [4.0 * next() - 1.0, 2.0 * next() - 1.0, 2.0 * next() - 1.0];
            let r = splitting_identity_residual(x1, &y);
            assert!(r.abs() < 1e-10, "x1={x1} y={y:?}: residual {r}");
        }
    }
}
