//! Construction of `ψ(x) = a·exp(∫ dx/φ(x))` and one-variable inversion.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interval::Interval;

/// Number of knots in a tabulated primitive.
pub const TABLE_KNOTS: usize = 2048;

/// Half-width used in place of an infinite side of the tabulation range.
const UNBOUNDED_REACH: f64 = 64.0;

/// A primitive `F` of `integrand`, tabulated on a fixed grid and normalised
/// so that `F(anchor) = 0`.
///
/// Segment integrals come from adaptive Simpson quadrature; between knots
/// the table uses cubic Hermite interpolation with the exact slopes
/// `integrand(knot)`. Arguments outside the grid are clamped to the end
/// values and [`TabulatedPrimitive::extrapolated`] is raised.
#[derive(Debug)]
pub struct TabulatedPrimitive {
    integrand: Expr,
    lo: f64,
    hi: f64,
    anchor: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    extrapolated: AtomicBool,
}

fn simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

impl TabulatedPrimitive {
    pub fn new(integrand: Expr, lo: f64, hi: f64, anchor: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSpec(format!(
                "tabulation range ({lo}, {hi}) must be finite and nonempty"
            )));
        }
        if !(lo..=hi).contains(&anchor) {
            return Err(Error::InvalidSpec(format!(
                "anchor {anchor} outside tabulation range ({lo}, {hi})"
            )));
        }
        if integrand.max_coord().is_some() {
            return Err(Error::InvalidSpec("integrand must be a one-variable expression".into()));
        }
        let n = TABLE_KNOTS;
        let step = (hi - lo) / (n - 1) as f64;
        let knot = |m: usize| if m == n - 1 { hi } else { lo + step * m as f64 };
        let f = |x: f64| integrand.eval1(x);
        let slopes = (0..n).map(|m| f(knot(m))).collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(n);
        values.push(0.0);
        let mut acc = 0.0;
        for m in 1..n {
            let (a, b) = (knot(m - 1), knot(m));
            let scale = slopes[m - 1].abs().max(slopes[m].abs()).max(1.0);
            acc += adaptive_simpson(&f, a, b, 1e-15 * scale * (b - a))?;
            values.push(acc);
        }
        let mut table = TabulatedPrimitive {
            integrand,
            lo,
            hi,
            anchor,
            values,
            slopes,
            extrapolated: AtomicBool::new(false),
        };
        let offset = table.interpolate(anchor);
        for v in &mut table.values {
            *v -= offset;
        }
        Ok(table)
    }

    pub fn integrand(&self) -> &Expr {
        &self.integrand
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Whether any evaluation so far fell outside the tabulated range.
    pub fn extrapolated(&self) -> bool {
        self.extrapolated.load(Ordering::Relaxed)
    }

    fn interpolate(&self, x: f64) -> f64 {
        let n = self.values.len();
        let step = (self.hi - self.lo) / (n - 1) as f64;
        let s = ((x - self.lo) / step).clamp(0.0, (n - 1) as f64);
        let m = (s.floor() as usize).min(n - 2);
        let x0 = self.lo + step * m as f64;
        let x1 = if m + 1 == n - 1 { self.hi } else { x0 + step };
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[m] + h10 * h * self.slopes[m] + h01 * self.values[m + 1] + h11 * h * self.slopes[m + 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            self.extrapolated.store(true, Ordering::Relaxed);
            let n = self.values.len();
            return if x < self.lo {
                self.values[0]
            } else {
                self.values[n - 1]
            };
        }
        self.interpolate(x)
    }
}

/// Finite stand-in for an interval used for sampling and tabulation.
fn working_range(interval: Interval) -> (f64, f64) {
    let anchor = interval.anchor();
    let l = if interval.lo.is_finite() {
        interval.lo
    } else {
        anchor - UNBOUNDED_REACH
    };
    let h = if interval.hi.is_finite() {
        interval.hi
    } else {
        anchor + UNBOUNDED_REACH
    };
    let delta = 1e-9 * (h - l);
    (
        if interval.lo.is_finite() { l + delta } else { l },
        if interval.hi.is_finite() { h - delta } else { h },
    )
}

/// Check that `f` has no zero and no sign change over `samples` evenly
/// spread points of the interval.
fn nonvanishing_on(f: &Expr, interval: Interval, samples: usize, what: &str) -> Result<f64> {
    let (l, h) = working_range(interval);
    let mut sign = 0.0;
    for m in 0..samples {
        let x = l + (h - l) * (m as f64 + 0.5) / samples as f64;
        let v = f.eval1(x)?;
        if v == 0.0 || !v.is_finite() || (sign != 0.0 && v.signum() != sign) {
            return Err(Error::Vanishing {
                what: what.to_string(),
                point: vec![x],
            });
        }
        sign = v.signum();
    }
    Ok(sign)
}

/// Build `ψ(x) = a·exp(∫ dx/φ(x))` on `interval`.
///
/// Recognised integrands get their canonical closed-form primitive:
/// `φ = q` gives `x/q`, `φ = p·x + q` gives `(1/p)·log|x + q/p|` and
/// `φ = k·x^m` gives `x^(1-m)/(k(1-m))`. Anything else is tabulated with
/// the integration constant fixed at [`Interval::anchor`].
pub fn psi_from_phi(phi: &Expr, a: f64, interval: Interval) -> Result<Expr> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "psi scale a must be finite and nonzero, got {a}"
        )));
    }
    if phi.max_coord().is_some() {
        return Err(Error::InvalidSpec("phi must be a one-variable expression".into()));
    }
    nonvanishing_on(phi, interval, 64, "phi")?;
    let scale = |e: Expr| Expr::Const(a).mul(e);

    if let Some((p, q)) = phi.affine_coeffs() {
        if p == 0.0 {
            return Ok(scale(Expr::Const(1.0 / q).mul(Expr::X).exp()));
        }
        let shift = q / p;
        let (l, h) = working_range(interval);
        let base = if l + shift > 0.0 {
            Expr::X.add(Expr::Const(shift))
        } else if h + shift < 0.0 {
            Expr::X.neg().add(Expr::Const(-shift))
        } else {
            return Err(Error::Vanishing {
                what: "phi".into(),
                point: vec![-shift],
            });
        };
        return Ok(scale(base.powf(1.0 / p)));
    }
    if let Some((k, m)) = phi.monomial_coeffs() {
        if m != 1.0 && k != 0.0 {
            let c = 1.0 / (k * (1.0 - m));
            return Ok(scale(Expr::Const(c).mul(Expr::X.powf(1.0 - m)).exp()));
        }
    }

    let (l, h) = working_range(interval);
    let integrand = Expr::Const(1.0).div(phi.clone());
    let table = TabulatedPrimitive::new(integrand, l, h, interval.anchor().clamp(l, h))?;
    Ok(scale(Expr::Primitive(Arc::new(table), Box::new(Expr::X)).exp()))
}

/// A monotone one-variable function prepared for repeated inversion on a
/// fixed bracket.
#[derive(Clone, Debug)]
pub struct MonotoneInverse {
    f: Expr,
    df: Expr,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl MonotoneInverse {
    /// Validate monotonicity via derivative signs at the (slightly inset)
    /// endpoints and seven interior points.
    pub fn new(f: &Expr, bracket: (f64, f64)) -> Result<Self> {
        let (lo, hi) = bracket;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSpec(format!("bad bracket ({lo}, {hi})")));
        }
        let inset = 1e-12 * (hi - lo);
        let (l, h) = (lo + inset, hi - inset);
        let df = f.derivative();
        let (mut pos, mut neg) = (false, false);
        for m in 0..=8 {
            let x = l + (h - l) * m as f64 / 8.0;
            if let Ok(d) = df.eval1(x) {
                pos |= d > 0.0;
                neg |= d < 0.0;
            }
        }
        let f_lo = f.eval1(l)?;
        let f_hi = f.eval1(h)?;
        if (pos && neg) || f_lo == f_hi {
            return Err(Error::NotMonotone { lo, hi });
        }
        Ok(MonotoneInverse {
            f: f.clone(),
            df,
            lo: l,
            hi: h,
            f_lo,
            f_hi,
        })
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Solve `f(x) = y` inside the bracket.
    pub fn solve(&self, y: f64) -> Result<f64> {
        let tol = 1e-12 * y.abs().max(1.0);
        let (ymin, ymax) = if self.f_lo < self.f_hi {
            (self.f_lo, self.f_hi)
        } else {
            (self.f_hi, self.f_lo)
        };
        if !(y >= ymin - tol && y <= ymax + tol) {
            return Err(Error::NoRoot {
                target: y,
                lo: self.lo,
                hi: self.hi,
            });
        }
        if let Some(x) = self.f.closed_inverse(y) {
            if x >= self.lo && x <= self.hi {
                if let Ok(v) = self.f.eval1(x) {
                    if (v - y).abs() <= tol {
                        return Ok(x);
                    }
                }
            }
        }
        self.newton_bisect(y, tol)
    }

    fn newton_bisect(&self, y: f64, tol: f64) -> Result<f64> {
        let increasing = self.f_hi > self.f_lo;
        // g(a) ≤ 0 ≤ g(b) in the orientation of the function
        let (mut a, mut b) = if increasing {
            (self.lo, self.hi)
        } else {
            (self.hi, self.lo)
        };
        let mut x = {
            let t = (y - self.f_lo) / (self.f_hi - self.f_lo);
            self.lo + t.clamp(0.0, 1.0) * (self.hi - self.lo)
        };
        let mut best = (f64::INFINITY, x);
        for _ in 0..200 {
            let g = self.f.eval1(x)? - y;
            if g.abs() < best.0 {
                best = (g.abs(), x);
            }
            if g.abs() <= 0.5 * tol {
                return Ok(x);
            }
            if g < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let d = self.df.eval1(x).unwrap_or(0.0);
            let newton = if d != 0.0 { x - g / d } else { f64::NAN };
            let (l, h) = if a < b { (a, b) } else { (b, a) };
            x = if newton.is_finite() && newton > l && newton < h {
                newton
            } else {
                0.5 * (a + b)
            };
            if (h - l) <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(best.1)
    }
}

/// Solve `f(x) = y` for `x` in `bracket`, where `f` is monotone there.
pub fn inverse(f: &Expr, y: f64, bracket: (f64, f64)) -> Result<f64> {
    MonotoneInverse::new(f, bracket)?.solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &Expr, x: f64) -> f64 {
        let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
        (f.eval1(x + h).unwrap() - f.eval1(x - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn identity_phi_gives_identity_psi() {
        let psi = psi_from_phi(&Expr::X, 1.0, Interval::positive()).unwrap();
        assert!(matches!(psi, Expr::X), "{psi}");
        assert_eq!(psi.eval1(2.5).unwrap(), 2.5);
    }

    #[test]
    fn scaled_identity_phi_gives_power() {
        for c in [2.0, 0.5, 3.0, -1.5] {
            let phi = Expr::X.div(Expr::Const(c));
            let psi = psi_from_phi(&phi, 1.0, Interval::positive()).unwrap();
            for x in [0.3, 1.0, 1.7, 4.0] {
                let want = f64::powf(x, c);
                assert!(
                    (psi.eval1(x).unwrap() - want).abs() <= 1e-14 * want.abs().max(1.0),
                    "c={c} x={x}"
                );
            }
        }
    }

    #[test]
    fn constant_phi_gives_exponential() {
        let psi = psi_from_phi(&Expr::Const(1.0), 2.0, Interval::new(-3.0, 3.0).unwrap()).unwrap();
        for x in [-2.0, 0.0, 0.7, 2.9] {
            assert!((psi.eval1(x).unwrap() - 2.0 * f64::exp(x)).abs() < 1e-14 * f64::exp(x).max(1.0));
            // defining ODE checked independently by finite differences
            let d = fd(&psi, x);
            assert!((d - psi.eval1(x).unwrap()).abs() < 1e-8 * d.abs().max(1.0));
        }
    }

    #[test]
    fn negative_affine_branch() {
        // phi = x - 5 on (0, 4): x - 5 < 0 there, psi = |x - 5|
        let phi: Expr = "(sub x 5)".parse().unwrap();
        let psi = psi_from_phi(&phi, 1.0, Interval::new(0.0, 4.0).unwrap()).unwrap();
        assert!((psi.eval1(1.0).unwrap() - 4.0).abs() < 1e-14);
        let dpsi = psi.derivative();
        for x in [0.5, 2.0, 3.5] {
            let lhs = dpsi.eval1(x).unwrap() * phi.eval1(x).unwrap();
            assert!((lhs - psi.eval1(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn power_phi_closed_form() {
        // phi = x^2: ∫ dx/x^2 = -1/x
        let psi = psi_from_phi(&Expr::X.powf(2.0), 1.0, Interval::positive()).unwrap();
        assert!((psi.eval1(2.0).unwrap() - f64::exp(-0.5)).abs() < 1e-15);
        assert!(!format!("{psi}").contains("primitive"));
    }

    #[test]
    fn tabulated_primitive_matches_arctangent() {
        // phi = 1 + x^2 has no pattern: ψ = exp(atan x - atan(anchor))
        let phi: Expr = "(add 1 (pow x 2))".parse().unwrap();
        let iv = Interval::new(-1.0, 3.0).unwrap();
        let psi = psi_from_phi(&phi, 1.0, iv).unwrap();
        assert!(format!("{psi}").contains("primitive"));
        let anchor = iv.anchor();
        for x in [-0.9f64, 0.0, 0.77, 1.5, 2.95] {
            let want = (x.atan() - anchor.atan()).exp();
            assert!((psi.eval1(x).unwrap() - want).abs() < 1e-10 * want, "x={x}");
        }
    }

    #[test]
    fn tabulated_psi_satisfies_defining_ode() {
        let phi: Expr = "(add 2 (exp (neg x)))".parse().unwrap();
        let iv = Interval::new(0.0, 5.0).unwrap();
        let psi = psi_from_phi(&phi, -1.5, iv).unwrap();
        let dpsi = psi.derivative();
        for m in 0..100 {
            let x = 0.01 + 4.98 * (m as f64 * 0.618_033_988_75).fract();
            let p = psi.eval1(x).unwrap();
            let lhs = dpsi.eval1(x).unwrap() * phi.eval1(x).unwrap();
            assert!((lhs - p).abs() <= 1e-8 * p.abs(), "x={x}");
            let d = fd(&psi, x);
            assert!((d - dpsi.eval1(x).unwrap()).abs() <= 1e-6 * d.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn extrapolation_is_clamped_and_flagged() {
        let table = TabulatedPrimitive::new("(div 1 (add 1 (pow x 2)))".parse().unwrap(), 0.0, 1.0, 0.5).unwrap();
        assert!(!table.extrapolated());
        let end = table.eval(1.0);
        assert_eq!(table.eval(7.0), end);
        assert!(table.extrapolated());
    }

    #[test]
    fn psi_rejections() {
        assert!(matches!(
            psi_from_phi(&Expr::X, 0.0, Interval::positive()),
            Err(Error::InvalidSpec(_))
        ));
        // phi = x vanishes inside (-1, 1)
        let r = psi_from_phi(&Expr::X, 1.0, Interval::new(-1.0, 1.0).unwrap());
        assert!(matches!(r, Err(Error::Vanishing { .. })), "{r:?}");
        let r = psi_from_phi(
            &"(sub (pow x 2) 1)".parse().unwrap(),
            1.0,
            Interval::new(0.0, 2.0).unwrap(),
        );
        assert!(matches!(r, Err(Error::Vanishing { .. })), "{r:?}");
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Expr::X, 3.0, (0.0, 10.0)).unwrap(), 3.0);
        assert_eq!(inverse(&Expr::X.powf(2.0), 9.0, (0.0, 10.0)).unwrap(), 3.0);
        let two_exp = Expr::Const(2.0).mul(Expr::X.exp());
        assert_eq!(inverse(&two_exp, 2.0, (-5.0, 5.0)).unwrap(), 0.0);
    }

    /// Plain bisection, kept independent of the solver under test.
    fn bisection(f: impl Fn(f64) -> f64, y: f64, mut a: f64, mut b: f64) -> f64 {
        let inc = f(b) > f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) < y) == inc {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn numeric_inverse_agrees_with_bisection_oracle() {
        // x·e^x has no closed inverse in the table
        let f: Expr = "(mul x (exp x))".parse().unwrap();
        for y in [0.1, 1.0, 5.0, 40.0] {
            let x = inverse(&f, y, (0.0, 4.0)).unwrap();
            let oracle = bisection(|t| t * t.exp(), y, 0.0, 4.0);
            assert!((x - oracle).abs() < 1e-12, "y={y}");
            assert!((f.eval1(x).unwrap() - y).abs() <= 1e-12 * y.max(1.0));
        }
        // decreasing function
        let g: Expr = "(add (neg x) (exp (neg x)))".parse().unwrap();
        let x = inverse(&g, -1.0, (0.0, 3.0)).unwrap();
        assert!((x - bisection(|t| -t + (-t).exp(), -1.0, 0.0, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn inverse_errors() {
        let sq = Expr::X.powf(2.0);
        assert!(matches!(inverse(&sq, 200.0, (0.0, 10.0)), Err(Error::NoRoot { .. })));
        assert!(matches!(inverse(&sq, 1.0, (-2.0, 3.0)), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn closed_form_outside_bracket_falls_back() {
        // x^2 on (-10, -0.5): the closed form returns the positive root
        let x = inverse(&Expr::X.powf(2.0), 9.0, (-10.0, -0.5)).unwrap();
        assert!((x + 3.0).abs() < 1e-12);
    }
}
