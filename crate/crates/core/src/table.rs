//! Radial function tables on a graded grid.
//!
//! A `RadialTable` stores log-values of a positive radial function on a grid
//! that is geometric on (0, 1] (64 nodes from 1e-4) and uniform with step 0.25
//! beyond, up to r_max = 120. Interpolation is shape-limited piecewise-cubic
//! Hermite on (u, ln v) with fourth-order slope estimates, where the abscissa
//! u depends on the table kind: convolution powers decay like e^{-mr} times a
//! slowly varying factor, so they use u = ln r on (0,1] seamed C^1 into u = r-1
//! beyond (exponentials are linear there); the auxiliary recursions grow like
//! powers of r, so they use u = ln r throughout (power laws are exactly
//! linear, hence reproduced to round-off). Below the first node values extend
//! by the first-segment power law; beyond the last node by the terminal
//! exponential slope. Functions with a support cut (h_n and H_n vanish up to
//! radius n) ramp linearly from the cut inside the cell that contains it.

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::quad;
use std::io::{BufRead, Write};

/// What a table carries; fixes CSV tagging and interpolation conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// n-fold convolution f^{n*}.
    ConvPower,
    /// restricted-integral ratio h_n.
    LittleH,
    /// restricted-integral ratio g_n.
    LittleG,
    /// one-dimensional majorant recursion H_n.
    BigH,
    /// one-dimensional minorant recursion G_n.
    BigG,
}

impl TableKind {
    pub fn tag(&self) -> &'static str {
        match self {
            TableKind::ConvPower => "conv_power",
            TableKind::LittleH => "h",
            TableKind::LittleG => "g",
            TableKind::BigH => "H",
            TableKind::BigG => "G",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        Ok(match s {
            "conv_power" => TableKind::ConvPower,
            "h" => TableKind::LittleH,
            "g" => TableKind::LittleG,
            "H" => TableKind::BigH,
            "G" => TableKind::BigG,
            other => return Err(Error::Format(format!("unknown table kind '{other}'"))),
        })
    }
}

/// The standard graded grid: geometric 1e-4 .. 1 (64 nodes), then uniform
/// step 0.25 up to `r_max` (120 for the full grid).
pub fn graded_grid(r_max: f64) -> Vec<f64> {
    let mut grid = Vec::with_capacity(64 + ((r_max - 1.0) / 0.25).ceil() as usize + 1);
    let n_geo = 64usize;
    for i in 0..n_geo {
        grid.push(1e-4 * (1e4f64).powf(i as f64 / (n_geo - 1) as f64));
    }
    let mut r = 1.25;
    while r <= r_max + 1e-9 {
        grid.push(r);
        r += 0.25;
    }
    grid
}

pub const GRID_RMAX: f64 = 120.0;

#[derive(Debug, Clone)]
pub struct RadialTable {
    pub grid: Vec<f64>,
    pub log_values: Vec<f64>,
    pub spec: DensitySpec,
    pub n: u32,
    pub kind: TableKind,
    /// Radius at and below which the function is identically zero.
    pub support_start: f64,
    first_finite: usize,
    /// dw/du at nodes in the kind's abscissa, for nodes >= first_finite.
    slopes: Vec<f64>,
}

/// Kind-dependent abscissa map, strictly increasing and smooth.
/// Convolution powers use u = r - 1 + ln r (behaves like ln r near 0 where the
/// grid is geometric and like r at infinity where the data is exponential);
/// the auxiliary recursions use u = ln r so power laws are exactly linear.
fn to_u(kind: TableKind, r: f64) -> f64 {
    match kind {
        TableKind::ConvPower => r - 1.0 + r.ln(),
        _ => r.ln(),
    }
}

fn du_dr(kind: TableKind, r: f64) -> f64 {
    match kind {
        TableKind::ConvPower => 1.0 + 1.0 / r,
        _ => 1.0 / r,
    }
}

impl RadialTable {
    pub fn from_log_values(
        spec: DensitySpec,
        n: u32,
        kind: TableKind,
        grid: Vec<f64>,
        log_values: Vec<f64>,
        support_start: f64,
    ) -> Result<Self> {
        if grid.len() != log_values.len() || grid.len() < 4 {
            return Err(Error::InvalidArgument(
                "table grid/values length mismatch or too short".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("table grid must be strictly increasing".into()));
        }
        let first_finite = log_values
            .iter()
            .position(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidArgument("table has no finite values".into()))?;
        if let Some(bad) = log_values[first_finite..].iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "table {} n={} has a non-finite value ({}) at r={} inside its support",
                kind.tag(),
                n,
                log_values[first_finite + bad],
                grid[first_finite + bad]
            )));
        }
        let us: Vec<f64> = grid[first_finite..].iter().map(|&r| to_u(kind, r)).collect();
        let slopes = hermite_slopes(&us, &log_values[first_finite..]);
        Ok(RadialTable {
            grid,
            log_values,
            spec,
            n,
            kind,
            support_start,
            first_finite,
            slopes,
        })
    }

    pub fn from_values(
        spec: DensitySpec,
        n: u32,
        kind: TableKind,
        grid: Vec<f64>,
        values: Vec<f64>,
        support_start: f64,
    ) -> Result<Self> {
        let logs = values.iter().map(|v| v.ln()).collect();
        Self::from_log_values(spec, n, kind, grid, logs, support_start)
    }

    pub fn r_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// d ln v / d ln r at the first finite node (the origin power-law exponent).
    pub fn origin_power(&self) -> f64 {
        let r = self.grid[self.first_finite];
        self.slopes[0] * du_dr(self.kind, r) * r
    }

    /// Largest node value (sup over the grid).
    pub fn max_value(&self) -> f64 {
        self.max_log().exp()
    }

    /// Largest node log-value.
    pub fn max_log(&self) -> f64 {
        self.log_values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.log_value(r).exp()
    }

    /// ln of the interpolated value; -inf where the function vanishes.
    pub fn log_value(&self, r: f64) -> f64 {
        if r <= self.support_start {
            return f64::NEG_INFINITY;
        }
        let ff = self.first_finite;
        let lo = self.grid[ff];
        if r < lo {
            if self.support_start > 0.0 {
                // Linear ramp in value from the support cut to the first node.
                return self.log_values[ff] + ((r - self.support_start) / (lo - self.support_start)).ln();
            }
            // Power-law extension from the first node slope.
            let s = self.slopes[0] * du_dr(self.kind, lo) * lo;
            return self.log_values[ff] + s * (r.ln() - lo.ln());
        }
        let last = self.grid.len() - 1;
        if r > self.grid[last] {
            // Exponential extension with the terminal slope dw/dr.
            let s_u = self.slopes[self.slopes.len() - 1];
            let dwdr = s_u * du_dr(self.kind, self.grid[last]);
            return self.log_values[last] + dwdr * (r - self.grid[last]);
        }
        // Binary search for the segment in the finite range.
        let g = &self.grid[ff..];
        let w = &self.log_values[ff..];
        let idx = match g.binary_search_by(|p| p.partial_cmp(&r).unwrap()) {
            Ok(i) => return w[i],
            Err(i) => i - 1,
        };
        let (u0, u1) = (to_u(self.kind, g[idx]), to_u(self.kind, g[idx + 1]));
        let h = u1 - u0;
        let t = (to_u(self.kind, r) - u0) / h;
        let (w0, w1) = (w[idx], w[idx + 1]);
        let (m0, m1) = (self.slopes[idx], self.slopes[idx + 1]);
        // Cubic Hermite basis.
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * w0 + h10 * h * m0 + h01 * w1 + h11 * h * m1
    }

    /// Total mass int f(|x|) dx = surface * int v(r) r^{d-1} dr, including the
    /// power extension below the grid and the exponential tail beyond it.
    pub fn mass(&self) -> Result<f64> {
        let d = self.spec.dim();
        let surf = self.spec.sphere_surface();
        let ff = self.first_finite;
        let r0 = self.grid[ff];
        let mut total = 0.0;
        if self.support_start <= 0.0 {
            let q = self.slopes[0];
            if q + d <= 0.0 {
                return Err(Error::InvalidArgument(
                    "table origin behavior is not integrable against r^{d-1}".into(),
                ));
            }
            total += self.log_values[ff].exp() * r0.powf(d) / (q + d);
        } else if self.support_start < r0 {
            // ramp piece
            let v0 = self.log_values[ff].exp();
            let ss = self.support_start;
            let q = quad::integrate(
                |r| v0 * (r - ss) / (r0 - ss) * r.powf(d - 1.0),
                ss,
                r0,
                1e-10,
                0.0,
            )
            .map_err(Error::Quadrature)?;
            total += q.value;
        }
        for i in ff..self.grid.len() - 1 {
            let (a, b) = (self.grid[i], self.grid[i + 1]);
            let q = quad::integrate(
                |r| self.log_value(r).exp() * r.powf(d - 1.0),
                a,
                b,
                1e-9,
                0.0,
            )
            .map_err(Error::Quadrature)?;
            total += q.value;
        }
        let q = quad::integrate_tail(
            |r| self.log_value(r).exp() * r.powf(d - 1.0),
            self.r_max(),
            1e-9,
            0.0,
        )
        .map_err(Error::Quadrature)?;
        total += q.value;
        Ok(surf * total)
    }

    /// CSV serialization: `# kind,n,d,m,gamma,variant` header then `r,value`
    /// rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "# {},{},{},{:.16e},{:.16e},{}",
            self.kind.tag(),
            self.n,
            self.spec.d,
            self.spec.m,
            self.spec.gamma,
            self.spec.variant
        )?;
        writeln!(w, "r,value")?;
        for (r, lv) in self.grid.iter().zip(&self.log_values) {
            writeln!(w, "{:.16e},{:.16e}", r, lv.exp())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty table csv".into()))??;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("table csv must start with '# kind,n,d,m,gamma,variant'".into()))?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Format("bad table csv header".into()));
        }
        let kind = TableKind::from_tag(parts[0])?;
        let n: u32 = parts[1].parse().map_err(|_| Error::Format("bad n".into()))?;
        let d: u32 = parts[2].parse().map_err(|_| Error::Format("bad d".into()))?;
        let m: f64 = parts[3].parse().map_err(|_| Error::Format("bad m".into()))?;
        let gamma: f64 = parts[4].parse().map_err(|_| Error::Format("bad gamma".into()))?;
        let variant = parts[5].parse()?;
        let spec = DensitySpec::new(d, m, gamma, variant)?;
        let mut grid = Vec::new();
        let mut logs = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() || line.starts_with("r,") {
                continue;
            }
            let mut it = line.split(',');
            let r: f64 = it
                .next()
                .ok_or_else(|| Error::Format("bad row".into()))?
                .parse()
                .map_err(|_| Error::Format("bad radius".into()))?;
            let v: f64 = it
                .next()
                .ok_or_else(|| Error::Format("bad row".into()))?
                .parse()
                .map_err(|_| Error::Format("bad value".into()))?;
            grid.push(r);
            logs.push(v.ln());
        }
        let support = match kind {
            TableKind::LittleH | TableKind::BigH => {
                if n >= 2 {
                    n as f64
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        Self::from_log_values(spec, n, kind, grid, logs, support)
    }
}

/// Slopes for external piecewise-cubic users (the oracle's angular cache).
pub(crate) fn hermite_slopes_pub(u: &[f64], w: &[f64]) -> Vec<f64> {
    hermite_slopes(u, w)
}

/// Derivative at `x` of the cubic through four (u, w) points (Newton form).
fn cubic_deriv_at(u: &[f64], w: &[f64], x: f64) -> f64 {
    let f01 = (w[1] - w[0]) / (u[1] - u[0]);
    let f12 = (w[2] - w[1]) / (u[2] - u[1]);
    let f23 = (w[3] - w[2]) / (u[3] - u[2]);
    let f012 = (f12 - f01) / (u[2] - u[0]);
    let f123 = (f23 - f12) / (u[3] - u[1]);
    let f0123 = (f123 - f012) / (u[3] - u[0]);
    let (a, b, c) = (x - u[0], x - u[1], x - u[2]);
    f01 + f012 * (a + b) + f0123 * (a * b + a * c + b * c)
}

/// Fourth-order node slopes with a shape limiter: where the data is locally
/// monotone the slope is clamped to [0, 3 min(|secant|)] in the secant's
/// direction, which keeps the Hermite interpolant from overshooting while
/// leaving smooth (in particular exactly linear) data untouched.
fn hermite_slopes(u: &[f64], w: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0f64; n - 1];
    for i in 0..n - 1 {
        d[i] = (w[i + 1] - w[i]) / (u[i + 1] - u[i]);
    }
    let mut m = vec![0.0f64; n];
    for i in 0..n {
        let est = if n < 4 {
            // Too few points for a cubic: fall back to secants.
            if i == 0 {
                d[0]
            } else if i == n - 1 {
                d[n - 2]
            } else {
                0.5 * (d[i - 1] + d[i])
            }
        } else {
            let lo = i.saturating_sub(1).min(n - 4);
            let lo2 = i.saturating_sub(2).min(n - 4);
            let e1 = cubic_deriv_at(&u[lo..lo + 4], &w[lo..lo + 4], u[i]);
            let e2 = cubic_deriv_at(&u[lo2..lo2 + 4], &w[lo2..lo2 + 4], u[i]);
            0.5 * (e1 + e2)
        };
        let (dl, dr) = (
            if i > 0 { d[i - 1] } else { d[0] },
            if i < n - 1 { d[i] } else { d[n - 2] },
        );
        m[i] = if dl * dr > 0.0 {
            let cap = 3.0 * dl.abs().min(dr.abs());
            if est * dl <= 0.0 {
                0.0
            } else {
                est.clamp(-cap, cap)
            }
        } else if i == 0 || i == n - 1 {
            est
        } else {
            0.0
        };
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Variant;

    fn spec1() -> DensitySpec {
        DensitySpec::new(1, 1.0, 0.0, Variant::PurePower).unwrap()
    }

    #[test]
    fn grid_matches_design() {
        let g = graded_grid(GRID_RMAX);
        assert_eq!(g.len(), 64 + 476);
        assert!((g[0] - 1e-4).abs() < 1e-19);
        assert!((g[63] - 1.0).abs() < 1e-12);
        assert!((g[64] - 1.25).abs() < 1e-12);
        assert!((g.last().unwrap() - 120.0).abs() < 1e-9);
    }

    #[test]
    fn power_law_is_reproduced_exactly() {
        let g = graded_grid(40.0);
        let vals: Vec<f64> = g.iter().map(|r| 3.0 * r.powf(1.7)).collect();
        let t = RadialTable::from_values(spec1(), 2, TableKind::BigG, g, vals, 0.0).unwrap();
        for &r in &[2.3e-4f64, 0.013, 0.77, 1.31, 7.77, 39.9, 0.5e-4] {
            let exact = 3.0 * r.powf(1.7);
            assert!(
                (t.value(r) - exact).abs() < 1e-12 * exact,
                "r={r}: {} vs {exact}",
                t.value(r)
            );
        }
    }

    #[test]
    fn exponential_tail_extension() {
        let g = graded_grid(40.0);
        let vals: Vec<f64> = g.iter().map(|r| (-1.3 * r).exp()).collect();
        let t = RadialTable::from_values(spec1(), 2, TableKind::ConvPower, g, vals, 0.0).unwrap();
        for &r in &[0.4, 3.17, 39.0] {
            let exact = (-1.3f64 * r).exp();
            assert!((t.value(r) - exact).abs() < 2e-6 * exact, "r={r}");
        }
        // extension past the grid keeps the decay rate
        let v = t.value(44.0);
        let exact = (-1.3f64 * 44.0).exp();
        assert!((v - exact).abs() < 1e-3 * exact, "{v} vs {exact}");
    }

    #[test]
    fn interpolation_accuracy_for_conv_like_data() {
        // e^{-r}(1+r): the d=1 two-fold convolution shape
        let g = graded_grid(GRID_RMAX);
        let vals: Vec<f64> = g.iter().map(|r| (-r).exp() * (1.0 + r)).collect();
        let t = RadialTable::from_values(spec1(), 2, TableKind::ConvPower, g, vals, 0.0).unwrap();
        let mut worst = 0.0f64;
        let mut r = 1e-4f64;
        while r < 100.0 {
            let exact = (-r).exp() * (1.0 + r);
            worst = worst.max(((t.value(r) - exact) / exact).abs());
            r *= 1.01;
        }
        assert!(worst < 1e-5, "worst interpolation error {worst}");
    }

    #[test]
    fn mass_of_interpolated_convolution_shape() {
        // int e^{-r}(1+r) dr over R (d=1, two-sided) = 2 * 2 = 4 = ||f||_1^2
        let g = graded_grid(GRID_RMAX);
        let vals: Vec<f64> = g.iter().map(|r| (-r).exp() * (1.0 + r)).collect();
        let t = RadialTable::from_values(spec1(), 2, TableKind::ConvPower, g, vals, 0.0).unwrap();
        let m = t.mass().unwrap();
        assert!((m - 4.0).abs() < 1e-5 * 4.0, "mass {m}");
    }

    #[test]
    fn support_cut_ramp() {
        let g = graded_grid(20.0);
        let vals: Vec<f64> = g
            .iter()
            .map(|&r| if r > 2.0 { (r - 2.0) * 0.3 } else { f64::NEG_INFINITY })
            .map(|w| if w.is_finite() { w.max(1e-300).ln() } else { w })
            .collect();
        let t =
            RadialTable::from_log_values(spec1(), 2, TableKind::LittleH, g, vals, 2.0).unwrap();
        assert_eq!(t.value(1.5), 0.0);
        assert_eq!(t.value(2.0), 0.0);
        assert!(t.value(2.1) > 0.0);
        let v = t.value(5.0);
        assert!((v - 0.9).abs() < 1e-6, "{v}");
    }

    #[test]
    fn csv_round_trip() {
        let g = graded_grid(10.0);
        let vals: Vec<f64> = g.iter().map(|r| (-0.5 * r).exp() * (1.0 + r)).collect();
        let t = RadialTable::from_values(spec1(), 3, TableKind::ConvPower, g, vals, 0.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf.clone()).unwrap();
        assert!(s.starts_with("# conv_power,3,1,"));
        let back = RadialTable::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.grid.len(), t.grid.len());
        for (a, b) in back.log_values.iter().zip(&t.log_values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
