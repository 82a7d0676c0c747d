//! The example systems: integrable three-dimensional Lotka–Volterra, its
//! quasi-polynomial generalisation, the circle-maps structure and the
//! n-dimensional Lotka–Volterra family.
//!
//! Default boxes put `ψ_m` inside `(m − 0.3, m + 0.3)` for the one-based
//! axis `m`, so `ψ_1 < ψ_2 < …` and every `ω_ij` is nonzero.

use std::sync::Arc;

use crate::casimir::CasimirSet;
use crate::dynamics::PoissonSystem;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::family::{AxisSpec, PoissonFamilySpec};
use crate::interval::{Interval, IntervalBox};

/// Stable catalog identifiers.
pub const NAMES: [&str; 4] = ["lv3", "qp-lv3", "circle-maps", "nlv"];

pub const DEFAULT_LV3_K: f64 = 0.5;

fn x(i: usize) -> Expr {
    Expr::coord(i)
}

/// Box whose axis `m` is the preimage of `(m + 1 − 0.3, m + 1 + 0.3)` under `inv(m, ·)`.
fn psi_target_box(n: usize, inv: impl Fn(usize, f64) -> f64) -> IntervalBox {
    let axes = (0..n)
        .map(|m| {
            let c = (m + 1) as f64;
            let (p, q) = (inv(m, c - 0.3), inv(m, c + 0.3));
            Interval::new(p.min(q), p.max(q)).expect("finite ordered bounds")
        })
        .collect();
    IntervalBox::new(axes).expect("nonempty")
}

fn require_positive(domain: &IntervalBox, what: &str) -> Result<()> {
    if domain.axes().iter().all(|a| a.lo >= 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "{what} domain must lie in the positive orthant"
        )))
    }
}

fn require_disjoint(domain: &IntervalBox, i: usize, j: usize) -> Result<()> {
    let (a, b) = (domain.axis(i), domain.axis(j));
    if a.hi <= b.lo || b.hi <= a.lo {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "axes {} and {} of the domain overlap",
            i + 1,
            j + 1
        )))
    }
}

fn require_dim(domain: &IntervalBox, n: usize) -> Result<()> {
    if domain.dim() == n {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "domain has {} axes, expected {n}",
            domain.dim()
        )))
    }
}

/// `H = −k·log(x3(x1−x2)²/(x1x2)) + (k−1)·log(x1(x2−x3)²/(x2x3))` in terms
/// of arbitrary expressions for `x1, x2, x3`.
fn lv3_hamiltonian_of(k: f64, v: [Expr; 3]) -> Expr {
    let [x1, x2, x3] = v;
    let first = x3
        .clone()
        .mul(x1.clone().sub(x2.clone()).powf(2.0))
        .div(x1.clone().mul(x2.clone()))
        .ln();
    let second = x1.mul(x2.clone().sub(x3.clone()).powf(2.0)).div(x2.mul(x3)).ln();
    Expr::Const(-k).mul(first).add(Expr::Const(k - 1.0).mul(second))
}

pub fn lv3_hamiltonian(k: f64) -> Expr {
    lv3_hamiltonian_of(k, [x(0), x(1), x(2)])
}

/// `ẋ1 = x1(x2 + x3)`, `ẋ2 = x2(x1 + x3)`, `ẋ3 = x3(x1 + x2)`.
pub fn lv3_field(v: &[f64]) -> Vec<f64> {
    vec![v[0] * (v[1] + v[2]), v[1] * (v[0] + v[2]), v[2] * (v[0] + v[1])]
}

pub fn lv3_default_box() -> IntervalBox {
    psi_target_box(3, |_, t| t)
}

/// Integrable Lotka–Volterra system with `η = 1`, `φ_i = ψ_i = x_i`.
pub fn make_lv3(k: f64, domain: Option<IntervalBox>) -> Result<PoissonSystem> {
    if !k.is_finite() {
        return Err(Error::InvalidSpec(format!("k must be finite, got {k}")));
    }
    let domain = domain.unwrap_or_else(lv3_default_box);
    require_dim(&domain, 3)?;
    require_positive(&domain, "lv3")?;
    require_disjoint(&domain, 0, 1)?;
    require_disjoint(&domain, 1, 2)?;
    let spec = PoissonFamilySpec::builder(Expr::Const(1.0), vec![AxisSpec::phi(Expr::X, 1.0); 3], domain).build()?;
    PoissonSystem::new(Arc::new(spec), lv3_hamiltonian(k))?.with_explicit_field(Arc::new(|v: &[f64]| Ok(lv3_field(v))))
}

/// Quasimonomial change of variables `x_i = y_i^{c_i}` with the time change
/// `dτ = (Π c_i y_i^{c_i − 1})⁻¹ dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpTransform {
    c: [f64; 3],
}

impl QpTransform {
    pub fn new(c: [f64; 3]) -> Result<Self> {
        if c.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "exponents must be finite and nonzero, got {c:?}"
            )));
        }
        Ok(QpTransform { c })
    }

    pub fn exponents(&self) -> [f64; 3] {
        self.c
    }

    pub fn is_identity(&self) -> bool {
        self.c == [1.0; 3]
    }

    pub fn to_x(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.c).map(|(v, c)| v.powf(*c)).collect()
    }

    pub fn to_y(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.c).map(|(v, c)| v.powf(1.0 / c)).collect()
    }

    /// `Π c_i y_i^{c_i − 1}`.
    pub fn time_factor(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.c).map(|(v, c)| c * v.powf(c - 1.0)).product()
    }

    /// `η = c1c2c3·y1^{c1−1}y2^{c2−1}y3^{c3−1}`.
    pub fn eta(&self) -> Expr {
        let mut f = vec![Expr::Const(self.c.iter().product())];
        f.extend((0..3).map(|i| x(i).powf(self.c[i] - 1.0)));
        Expr::product(f)
    }
}

/// `ẏ1 = c2c3·y1^{c1}y2^{c2−1}y3^{c3−1}(y2^{c2} + y3^{c3})` and cyclically.
pub fn qp_field(c: [f64; 3], y: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = (0..3).map(|i| y[i].powf(c[i])).collect();
    let q: Vec<f64> = (0..3).map(|i| y[i].powf(c[i] - 1.0)).collect();
    (0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            c[j] * c[k] * p[i] * q[j] * q[k] * (p[j] + p[k])
        })
        .collect()
}

pub fn qp_default_box(c: [f64; 3]) -> IntervalBox {
    psi_target_box(3, |m, t| t.powf(1.0 / c[m]))
}

/// Quasi-polynomial system: `η` from [`QpTransform::eta`], `φ_i = y_i/c_i`,
/// `ψ_i = y_i^{c_i}`, `H*(y) = H(y^c)`.
pub fn make_qp_lv(c: [f64; 3], k: f64, domain: Option<IntervalBox>) -> Result<PoissonSystem> {
    let tr = QpTransform::new(c)?;
    if !k.is_finite() {
        return Err(Error::InvalidSpec(format!("k must be finite, got {k}")));
    }
    let domain = domain.unwrap_or_else(|| qp_default_box(c));
    require_dim(&domain, 3)?;
    require_positive(&domain, "qp-lv3")?;
    let axes = c
        .iter()
        .map(|ci| AxisSpec::phi(Expr::Const(1.0 / ci).mul(Expr::X), 1.0))
        .collect();
    let spec = PoissonFamilySpec::builder(tr.eta(), axes, domain).build()?;
    let h = lv3_hamiltonian_of(k, [x(0).powf(c[0]), x(1).powf(c[1]), x(2).powf(c[2])]);
    PoissonSystem::new(Arc::new(spec), h)?.with_explicit_field(Arc::new(move |y: &[f64]| Ok(qp_field(c, y))))
}

/// Relative deviation between the transformed Lotka–Volterra field and
/// [`qp_field`] at the point `y`.
pub fn qp_pullback_check(c: [f64; 3], y: &[f64]) -> Result<f64> {
    let tr = QpTransform::new(c)?;
    if y.len() != 3 || y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::OutsideDomain { point: y.to_vec() });
    }
    let xdot = lv3_field(&tr.to_x(y));
    let factor = tr.time_factor(y);
    // ẋ_i = c_i y_i^{c_i−1} ẏ_i, then d/dτ = factor · d/dt
    let pulled: Vec<f64> = (0..3)
        .map(|i| factor * xdot[i] / (c[i] * y[i].powf(c[i] - 1.0)))
        .collect();
    Ok(crate::dynamics::relative_deviation(&pulled, &qp_field(c, y)))
}

pub fn circle_maps_default_box() -> IntervalBox {
    IntervalBox::from_bounds(&[(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)]).expect("valid bounds")
}

/// `η = −[(x1−x2)(x2−x3)(x3−x1)]⁻¹`.
pub fn circle_maps_eta() -> Expr {
    let d = Expr::product(vec![x(0).sub(x(1)), x(1).sub(x(2)), x(2).sub(x(0))]);
    Expr::Const(-1.0).div(d)
}

/// Circle-maps structure, `ψ_i = φ_i = x_i`; no Hamiltonian is attached.
pub fn make_circle_maps(domain: Option<IntervalBox>) -> Result<PoissonFamilySpec> {
    let domain = domain.unwrap_or_else(circle_maps_default_box);
    require_dim(&domain, 3)?;
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        require_disjoint(&domain, i, j)?;
    }
    if domain.axes().iter().any(|a| a.contains(0.0)) {
        return Err(Error::InvalidSpec("circle-maps domain must exclude x_i = 0".into()));
    }
    let axes = vec![AxisSpec::psi(Expr::X); 3];
    PoissonFamilySpec::builder(circle_maps_eta(), axes, domain).build()
}

/// The three Casimir forms `C1`, `C2`, `C3`, built on the pairs
/// `(2,3)`, `(3,1)` and `(1,2)`.
pub fn circle_maps_casimirs(spec: Arc<PoissonFamilySpec>) -> Result<[CasimirSet; 3]> {
    Ok([
        CasimirSet::with_pair(spec.clone(), (1, 2))?,
        CasimirSet::with_pair(spec.clone(), (2, 0))?,
        CasimirSet::with_pair(spec, (0, 1))?,
    ])
}

pub fn nlv_default_box(a: &[f64]) -> IntervalBox {
    psi_target_box(a.len(), |m, t| t / a[m].abs())
}

/// `ẋ_i = x_i Σ_j α_ij x_j` with `α_ii = a_i Σ_{k≠i} b_k`, `α_ij = −a_j b_j`.
pub fn nlv_field(a: &[f64], b: &[f64], v: &[f64]) -> Vec<f64> {
    let n = a.len();
    let btot: f64 = b.iter().sum();
    (0..n)
        .map(|i| {
            let s: f64 = (0..n)
                .map(|j| {
                    if i == j {
                        a[i] * (btot - b[i]) * v[i]
                    } else {
                        -a[j] * b[j] * v[j]
                    }
                })
                .sum();
            v[i] * s
        })
        .collect()
}

/// n-dimensional Lotka–Volterra system: `η = 1`, `φ_i = x_i`, `ψ_i = a_i x_i`,
/// `H = Σ b_i log x_i`.
pub fn make_nlv(a: &[f64], b: &[f64], domain: Option<IntervalBox>) -> Result<PoissonSystem> {
    let n = a.len();
    if n < 3 {
        return Err(Error::InvalidSpec(format!("nlv needs n >= 3, got {n}")));
    }
    if b.len() != n {
        return Err(Error::InvalidSpec(format!("b has {} entries, expected {n}", b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) || a.contains(&0.0) {
        return Err(Error::InvalidSpec("a must be finite and nonzero, b finite".into()));
    }
    let domain = domain.unwrap_or_else(|| nlv_default_box(a));
    require_dim(&domain, n)?;
    require_positive(&domain, "nlv")?;
    let axes = a.iter().map(|ai| AxisSpec::phi(Expr::X, *ai)).collect();
    let spec = PoissonFamilySpec::builder(Expr::Const(1.0), axes, domain).build()?;
    let h = Expr::sum((0..n).map(|i| Expr::Const(b[i]).mul(x(i).ln())).collect());
    let (a, b) = (a.to_vec(), b.to_vec());
    PoissonSystem::new(Arc::new(spec), h)?.with_explicit_field(Arc::new(move |v: &[f64]| Ok(nlv_field(&a, &b, v))))
}
