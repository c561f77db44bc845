//! Exact Monte Carlo sampler for the compound Poisson measure, used to
//! cross-validate p_lambda at moderate radii.
//!
//! Reproducibility contract: each sample index gets its own generator seeded
//! by splitmix64(seed, index), so a batch is identical no matter how draws are
//! scheduled across threads; merging keeps index order.

use crate::density::{DensitySpec, Variant};
use crate::error::{Error, Result};
use crate::special::{gamma_p, lower_gamma, upper_gamma};
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub spec: DensitySpec,
    pub lambda: f64,
    pub seed: u64,
    /// Points of the absolutely continuous part (N >= 1 summands).
    pub points: Vec<Vec<f64>>,
    /// Draws that landed on the atom at the origin (N = 0).
    pub atom_count: usize,
}

/// splitmix64 round, the standard 64-bit finalizer chain.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-stream generator: a splitmix64 walk keyed by (seed, stream).
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut s = seed ^ 0x6a09_e667_f3bc_c909u64.wrapping_mul(stream.wrapping_add(1));
        // decorrelate nearby stream indices
        splitmix64(&mut s);
        splitmix64(&mut s);
        Stream { state: s }
    }

    /// Uniform in (0, 1) (never exactly 0 or 1).
    pub fn uniform(&mut self) -> f64 {
        let u = (splitmix64(&mut self.state) >> 11) as f64 / (1u64 << 53) as f64;
        u.max(f64::MIN_POSITIVE).min(1.0 - f64::EPSILON)
    }

    /// Standard normal via Box-Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        (r * t.cos(), r * t.sin())
    }

    /// Poisson by inversion-by-multiplication; fine for the moderate means
    /// (lambda ||f||_1 <~ 30) the test matrix uses.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        let limit = (-mean).exp();
        let mut n = 0u64;
        let mut prod = self.uniform();
        while prod > limit {
            n += 1;
            prod *= self.uniform();
            if n > 10_000_000 {
                break;
            }
        }
        n
    }
}

/// Weights of the cutoff profile's two radial pieces (r in [0,1] and [1,inf)),
/// each equal to surface * integral of its piece; they sum to ||f||_1.
pub fn cutoff_piece_weights(spec: &DensitySpec) -> Result<(f64, f64)> {
    if spec.variant != Variant::Cutoff {
        return Err(Error::InvalidArgument("piece weights exist for the cutoff profile".into()));
    }
    let d = spec.dim();
    let surf = spec.sphere_surface();
    let head = surf * lower_gamma(d, spec.m)? / spec.m.powf(d);
    let s = d - spec.gamma;
    let tail = surf * upper_gamma(s, spec.m)? * (-s * spec.m.ln()).exp();
    Ok((head, tail))
}

/// Inverse CDF of the radial marginal of f / ||f||_1.
///
/// Pure power: radius ~ Gamma(d - gamma, rate m), inverted by bisection with
/// Newton polish on P(a, m r). Cutoff: a two-piece mixture with the lower
/// piece a [0,1]-truncated Gamma(d, m) and the upper piece inverted through
/// the general upper incomplete gamma.
pub fn sample_radius(spec: &DensitySpec, rng: &mut Stream) -> Result<f64> {
    let u = rng.uniform();
    radius_quantile(spec, u)
}

/// Quantile function of the radial marginal (u in (0,1)).
pub fn radius_quantile(spec: &DensitySpec, u: f64) -> Result<f64> {
    match spec.variant {
        Variant::PurePower => {
            let a = spec.dim() - spec.gamma;
            let x = inv_gamma_p(a, u)?;
            Ok(x / spec.m)
        }
        Variant::Cutoff => {
            let (w1, w2) = cutoff_piece_weights(spec)?;
            let p1 = w1 / (w1 + w2);
            if u < p1 {
                // truncated Gamma(d, m) on [0, 1]
                let a = spec.dim();
                let cap = gamma_p(a, spec.m)?;
                let x = inv_gamma_p(a, (u / p1) * cap)?;
                Ok((x / spec.m).min(1.0))
            } else {
                // density ~ r^{d-1-gamma} e^{-mr} on [1, inf):
                // CDF(r) = 1 - Gamma(s, m r)/Gamma(s, m)
                let s = spec.dim() - spec.gamma;
                let target = (1.0 - (u - p1) / (1.0 - p1)) * upper_gamma(s, spec.m)?;
                let f = |r: f64| upper_gamma(s, spec.m * r).unwrap_or(f64::NAN);
                let (mut lo, mut hi) = (1.0f64, 2.0f64);
                while f(hi) > target {
                    hi *= 2.0;
                    if hi > 1e9 {
                        break;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 * hi {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Invert the regularized lower incomplete gamma: x with P(a, x) = p.
fn inv_gamma_p(a: f64, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("quantile level {p} outside (0,1)")));
    }
    // Wilson-Hilferty start, then safeguarded Newton.
    let g13 = 1.0 / (9.0 * a);
    let z = inv_norm(p);
    let mut x = a * (1.0 - g13 + z * g13.sqrt()).powi(3);
    if !(x > 0.0) || !x.is_finite() {
        x = a;
    }
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let fx = gamma_p(a, x)? - p;
        if fx > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // density of P at x
        let ld = (a - 1.0) * x.ln() - x - crate::special::lgamma(a);
        let step = fx / ld.exp();
        let mut next = x - step;
        if !(next > lo) || !(next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { x * 2.0 };
        }
        if (next - x).abs() <= 1e-14 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Acklam-style rational inverse normal CDF (only used as a Newton seed).
fn inv_norm(p: f64) -> f64 {
    let a = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    let b = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    let c = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    let dd = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -inv_norm(1.0 - p)
    }
}

/// One isotropic unit direction in R^d.
fn sample_direction(d: u32, rng: &mut Stream) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.uniform() < 0.5 { -1.0 } else { 1.0 }];
    }
    loop {
        let mut v = Vec::with_capacity(d as usize);
        while v.len() < d as usize {
            let (a, b) = rng.normal_pair();
            v.push(a);
            if v.len() < d as usize {
                v.push(b);
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Draw `count` samples of P_lambda. Each sample is N ~ Poisson(lambda ||f||_1)
/// iid jump vectors summed; N = 0 draws land on the atom.
pub fn sample_compound_poisson(
    spec: &DensitySpec,
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    spec.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be > 0".into()));
    }
    let l1 = spec.l1_norm()?;
    let mean = lambda * l1;
    let d = spec.d as usize;
    let draws: Vec<Result<Option<Vec<f64>>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = Stream::new(seed, i as u64);
            let n = rng.poisson(mean);
            if n == 0 {
                return Ok(None);
            }
            let mut point = vec![0.0f64; d];
            for _ in 0..n {
                let radius = sample_radius(spec, &mut rng)?;
                let dir = sample_direction(spec.d, &mut rng);
                for (p, u) in point.iter_mut().zip(&dir) {
                    *p += radius * u;
                }
            }
            Ok(Some(point))
        })
        .collect();
    let mut points = Vec::new();
    let mut atom_count = 0usize;
    for r in draws {
        match r? {
            Some(p) => points.push(p),
            None => atom_count += 1,
        }
    }
    Ok(SampleBatch {
        spec: *spec,
        lambda,
        seed,
        points,
        atom_count,
    })
}

impl SampleBatch {
    pub fn total(&self) -> usize {
        self.points.len() + self.atom_count
    }

    pub fn radii(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    /// CSV: `x_1,...,x_d` rows after a header comment carrying the metadata.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "# spec d={} m={:.16e} gamma={:.16e} variant={} lambda={:.16e} seed={} atom_count={}",
            self.spec.d,
            self.spec.m,
            self.spec.gamma,
            self.spec.variant,
            self.lambda,
            self.seed,
            self.atom_count
        )?;
        let header: Vec<String> = (1..=self.spec.d).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Kolmogorov-Smirnov statistic of `radii` against a numeric CDF.
pub fn ks_statistic(radii: &mut [f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = radii.len() as f64;
    let mut worst = 0.0f64;
    for (i, &r) in radii.iter().enumerate() {
        let f = cdf(r);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((f - lo).abs()).max((hi - f).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: u32, m: f64, gamma: f64, variant: Variant) -> DensitySpec {
        DensitySpec::new(d, m, gamma, variant).unwrap()
    }

    #[test]
    fn radius_mean_matches_gamma_law() {
        // d=1, gamma=0, m=1: Gamma(1,1), mean 1
        let s = spec(1, 1.0, 0.0, Variant::PurePower);
        let mut rng = Stream::new(7, 0);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| sample_radius(&s, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        // sd of the mean: 1/sqrt(n)
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
        // d=3, gamma=1, m=2: Gamma(2, 2), mean 1
        let s = spec(3, 2.0, 1.0, Variant::PurePower);
        let mean: f64 = (0..n)
            .map(|_| sample_radius(&s, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let sd = (2.0f64 / 4.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd, "{mean}");
    }

    #[test]
    fn cutoff_piece_weights_match_l1() {
        let s = spec(1, 1.0, 2.0, Variant::Cutoff);
        let (w1, w2) = cutoff_piece_weights(&s).unwrap();
        let l1 = s.l1_norm().unwrap();
        assert!((w1 + w2 - l1).abs() < 1e-10 * l1);
        // and against direct quadrature of each piece
        let surf = s.sphere_surface();
        let q1 = crate::quad::integrate(|r| s.density_f(r), 0.0, 1.0, 1e-12, 0.0)
            .unwrap()
            .value
            * surf;
        let q2 = crate::quad::integrate_tail(|r| s.density_f(r), 1.0, 1e-12, 0.0)
            .unwrap()
            .value
            * surf;
        assert!((w1 - q1).abs() < 1e-10 * q1, "{w1} vs {q1}");
        assert!((w2 - q2).abs() < 1e-10 * q2, "{w2} vs {q2}");
    }

    #[test]
    fn atom_fraction_matches_poisson_zero_mass() {
        let s = spec(1, 1.0, 0.0, Variant::PurePower);
        let lambda = 1.0;
        let batch = sample_compound_poisson(&s, lambda, 100_000, 42).unwrap();
        let p0 = (-lambda * 2.0f64).exp();
        let frac = batch.atom_count as f64 / batch.total() as f64;
        let sd = (p0 * (1.0 - p0) / batch.total() as f64).sqrt();
        assert!((frac - p0).abs() < 4.0 * sd, "{frac} vs {p0}");
        // tiny lambda: essentially everything is the atom
        let batch = sample_compound_poisson(&s, 1e-6, 2000, 3).unwrap();
        assert!(batch.atom_count >= 1995);
    }

    #[test]
    fn same_seed_same_batch() {
        let s = spec(2, 1.0, 0.5, Variant::PurePower);
        let a = sample_compound_poisson(&s, 1.5, 500, 9).unwrap();
        let b = sample_compound_poisson(&s, 1.5, 500, 9).unwrap();
        assert_eq!(a.atom_count, b.atom_count);
        assert_eq!(a.points, b.points);
        let c = sample_compound_poisson(&s, 1.5, 500, 10).unwrap();
        assert!(a.points != c.points);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = spec(2, 1.0, 0.0, Variant::PurePower);
        let batch = sample_compound_poisson(&s, 1.0, 50, 5).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# spec d=2"));
        assert!(text.contains("x_1,x_2"));
        assert_eq!(text.lines().count(), 2 + batch.points.len());
    }

    #[test]
    fn ks_of_uniform_sample_against_itself() {
        // quantile inversion sanity: U(0,1) radii against identity CDF
        let mut rng = Stream::new(11, 0);
        let mut xs: Vec<f64> = (0..50_000).map(|_| rng.uniform()).collect();
        let ks = ks_statistic(&mut xs, &|x| x.clamp(0.0, 1.0));
        // 1% critical value 1.628/sqrt(n)
        assert!(ks < 1.628 / (xs.len() as f64).sqrt(), "{ks}");
    }
}
