//! The density family f(x) = e^{-m|x|} g(|x|) on R^d with a pure power or
//! cutoff power profile, its L1 norm in closed form, and the radial surface
//! measure helpers shared by every integral in the crate.

use crate::error::{Error, Result};
use crate::special::{lgamma, lower_gamma, upper_gamma};
use serde::{Deserialize, Serialize};

/// Profile variant: g(r) = r^{-gamma} or g(r) = (1 v r)^{-gamma}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    PurePower,
    Cutoff,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::PurePower => write!(f, "pure"),
            Variant::Cutoff => write!(f, "cutoff"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pure" | "purepower" | "power" => Ok(Variant::PurePower),
            "cutoff" | "cut" => Ok(Variant::Cutoff),
            other => Err(Error::Format(format!("unknown variant '{other}'"))),
        }
    }
}

/// Parameters of one density. Single source of truth for f and g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub d: u32,
    pub m: f64,
    pub gamma: f64,
    pub variant: Variant,
}

impl std::fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d={} m={} gamma={} {}", self.d, self.m, self.gamma, self.variant)
    }
}

impl DensitySpec {
    pub fn new(d: u32, m: f64, gamma: f64, variant: Variant) -> Result<Self> {
        let spec = DensitySpec { d, m, gamma, variant };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidSpec("dimension d must be >= 1".into()));
        }
        if !(self.m > 0.0) {
            return Err(Error::InvalidSpec(format!("rate m must be > 0, got {}", self.m)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.variant == Variant::PurePower && self.gamma >= self.d as f64 {
            return Err(Error::InvalidSpec(format!(
                "pure power profile needs gamma < d for integrability (gamma={}, d={})",
                self.gamma, self.d
            )));
        }
        Ok(())
    }

    /// Whether the main-theorem range gamma < (d+1)/2 holds; gates those suites.
    pub fn in_main_range(&self) -> bool {
        self.gamma < (self.d as f64 + 1.0) / 2.0
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    /// Profile g(r). For the pure power profile with gamma > 0 the value at
    /// r = 0 is a tagged infinity, not a fault: the pole is integrable.
    pub fn profile_g(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match self.variant {
            Variant::PurePower => {
                if r == 0.0 {
                    if self.gamma == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(-self.gamma)
                }
            }
            Variant::Cutoff => r.max(1.0).powf(-self.gamma),
        }
    }

    /// ln g(r); -inf never occurs (g > 0), +inf tags the pure power pole.
    pub fn log_profile_g(&self, r: f64) -> f64 {
        match self.variant {
            Variant::PurePower => {
                if r == 0.0 && self.gamma > 0.0 {
                    f64::INFINITY
                } else if self.gamma == 0.0 {
                    0.0
                } else {
                    -self.gamma * r.ln()
                }
            }
            Variant::Cutoff => -self.gamma * r.max(1.0).ln(),
        }
    }

    /// f at radius r.
    pub fn density_f(&self, r: f64) -> f64 {
        (-self.m * r).exp() * self.profile_g(r)
    }

    /// ln f(r).
    pub fn log_density_f(&self, r: f64) -> f64 {
        -self.m * r + self.log_profile_g(r)
    }

    /// Surface measure of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
    pub fn sphere_surface(&self) -> f64 {
        let d = self.dim();
        (0.5 * d * std::f64::consts::PI.ln() + (2.0f64).ln() - lgamma(0.5 * d)).exp()
    }

    /// Closed-form L1 norm.
    ///
    /// Pure power: surface * Gamma(d-gamma) / m^{d-gamma}. Cutoff: surface *
    /// (lower_gamma(d, m)/m^d + upper_gamma(d-gamma, m)/m^{d-gamma}).
    pub fn l1_norm(&self) -> Result<f64> {
        self.validate()?;
        let d = self.dim();
        let surf = self.sphere_surface();
        match self.variant {
            Variant::PurePower => {
                let a = d - self.gamma;
                Ok(surf * (lgamma(a) - a * self.m.ln()).exp())
            }
            Variant::Cutoff => {
                let head = lower_gamma(d, self.m)? / self.m.powf(d);
                let s = d - self.gamma;
                let tail = upper_gamma(s, self.m)? * (-s * self.m.ln()).exp();
                Ok(surf * (head + tail))
            }
        }
    }

    /// Radial mass integrand weight surface * r^{d-1}.
    pub fn radial_weight(&self, r: f64) -> f64 {
        self.sphere_surface() * r.powf(self.dim() - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_plan, integrate_tail, Plan1d};

    fn spec(d: u32, m: f64, gamma: f64, variant: Variant) -> DensitySpec {
        DensitySpec::new(d, m, gamma, variant).unwrap()
    }

    #[test]
    fn profile_examples() {
        let s = spec(1, 1.0, 0.5, Variant::PurePower);
        assert!((s.profile_g(4.0) - 0.5).abs() < 1e-15);
        let s = spec(3, 1.0, 2.0, Variant::Cutoff);
        assert!((s.profile_g(0.3) - 1.0).abs() < 1e-15);
        let s = spec(2, 1.0, 1.0, Variant::PurePower);
        assert!(s.profile_g(0.0).is_infinite());
        assert!(s.log_profile_g(0.0).is_infinite());
        // gamma = 0 has no pole
        let s = spec(2, 1.0, 0.0, Variant::PurePower);
        assert_eq!(s.profile_g(0.0), 1.0);
    }

    #[test]
    fn density_examples() {
        let s = spec(1, 1.0, 0.0, Variant::PurePower);
        assert!((s.density_f(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((s.density_f(0.0) - 1.0).abs() < 1e-15);
        let s = spec(2, 2.0, 0.5, Variant::PurePower);
        assert!((s.density_f(4.0) - (-8.0f64).exp() * 0.5).abs() < 1e-18);
    }

    #[test]
    fn density_is_radial_decreasing() {
        for variant in [Variant::PurePower, Variant::Cutoff] {
            let s = spec(2, 0.7, 0.6, variant);
            let mut prev = f64::INFINITY;
            let mut r = 0.0;
            while r < 30.0 {
                let v = s.density_f(r);
                assert!(v <= prev * (1.0 + 1e-15));
                prev = v;
                r += 0.05;
            }
        }
    }

    #[test]
    fn doubling_certificate_for_g() {
        // g(r) <= 2^gamma g(2r) on a wide grid, both variants
        for variant in [Variant::PurePower, Variant::Cutoff] {
            let s = spec(2, 1.0, 0.75, variant);
            let c3 = 2.0f64.powf(s.gamma);
            let mut r = 1e-3;
            while r < 200.0 {
                assert!(s.profile_g(r) <= c3 * s.profile_g(2.0 * r) * (1.0 + 1e-14));
                r *= 1.17;
            }
        }
    }

    #[test]
    fn l1_norm_anchors() {
        let s = spec(1, 1.0, 0.0, Variant::PurePower);
        assert!((s.l1_norm().unwrap() - 2.0).abs() < 1e-14);
        let s = spec(1, 1.0, 0.5, Variant::PurePower);
        let exact = 2.0 * std::f64::consts::PI.sqrt();
        assert!((s.l1_norm().unwrap() - exact).abs() < 1e-13 * exact);
        let s = spec(2, 1.0, 0.0, Variant::PurePower);
        let exact = 2.0 * std::f64::consts::PI;
        assert!((s.l1_norm().unwrap() - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn l1_norm_rejects_non_integrable() {
        assert!(DensitySpec::new(1, 1.0, 1.0, Variant::PurePower).is_err());
        assert!(DensitySpec::new(2, 1.0, 2.5, Variant::PurePower).is_err());
        // cutoff takes any gamma >= 0
        assert!(DensitySpec::new(1, 1.0, 2.0, Variant::Cutoff).is_ok());
    }

    #[test]
    fn l1_norm_matches_radial_quadrature() {
        for s in [
            spec(1, 1.0, 0.5, Variant::PurePower),
            spec(2, 0.5, 0.75, Variant::PurePower),
            spec(3, 1.0, 1.0, Variant::PurePower),
            spec(1, 1.0, 2.0, Variant::Cutoff),
            spec(2, 0.5, 1.5, Variant::Cutoff),
            spec(3, 2.0, 4.0, Variant::Cutoff),
        ] {
            let surf = s.sphere_surface();
            let origin_alpha = if s.variant == Variant::PurePower {
                (s.gamma + 1.0 - s.dim()).max(0.0)
            } else {
                0.0
            };
            let head_plan = Plan1d::new(0.0, 1.0)
                .with_singularity(0.0, origin_alpha)
                .with_breaks(&[0.5]);
            let head = integrate_plan(
                |r| s.density_f(r) * r.powf(s.dim() - 1.0),
                &head_plan,
                1e-12,
                0.0,
            )
            .unwrap()
            .value;
            let tail = integrate_tail(|r| s.density_f(r) * r.powf(s.dim() - 1.0), 1.0, 1e-12, 0.0)
                .unwrap()
                .value;
            let quad = surf * (head + tail);
            let closed = s.l1_norm().unwrap();
            assert!(
                (quad - closed).abs() <= 1e-8 * closed,
                "{s}: closed={closed} quad={quad}"
            );
        }
    }

    #[test]
    fn in_main_range_flag() {
        assert!(spec(1, 1.0, 0.5, Variant::PurePower).in_main_range());
        assert!(!spec(1, 1.0, 2.0, Variant::Cutoff).in_main_range());
        assert!(spec(3, 1.0, 1.0, Variant::PurePower).in_main_range());
    }
}
