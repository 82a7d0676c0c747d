//! Members of the family `J_ij(x) = η(x)·φ_i(x_i)·φ_j(x_j)·(ψ_i(x_i) − ψ_j(x_j))`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::halton;
use crate::interval::IntervalBox;
use crate::primitive::psi_from_phi;

/// Default number of quasi-random points used to certify the nonvanishing
/// hypotheses at construction.
pub const DEFAULT_CERTIFY_POINTS: usize = 1000;

/// How one axis is specified.
#[derive(Clone, Debug)]
pub enum AxisSpec {
    /// `φ_i` together with the scale `a_i ≠ 0`; `ψ_i` is derived.
    Phi { phi: Expr, a: f64 },
    /// `ψ_i` directly; `φ_i = ψ_i/ψ_i'`.
    Psi { psi: Expr },
}

impl AxisSpec {
    pub fn phi(phi: Expr, a: f64) -> Self {
        AxisSpec::Phi { phi, a }
    }

    pub fn psi(psi: Expr) -> Self {
        AxisSpec::Psi { psi }
    }
}

/// Resolved per-axis functions.
#[derive(Clone, Debug)]
pub struct Axis {
    pub phi: Expr,
    pub psi: Expr,
    pub dpsi: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisValues {
    pub phi: f64,
    pub psi: f64,
    pub dpsi: f64,
}

/// A skew-symmetric matrix evaluated at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureMatrixValue {
    pub point: Vec<f64>,
    pub entries: DMatrix<f64>,
}

impl StructureMatrixValue {
    /// Fill the strict upper triangle from `upper(i, j)` and mirror it by
    /// negation, so skew-symmetry and the zero diagonal hold exactly.
    pub fn from_upper<F>(point: Vec<f64>, n: usize, mut upper: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = upper(i, j)?;
                entries[(i, j)] = v;
                entries[(j, i)] = -v;
            }
        }
        Ok(StructureMatrixValue { point, entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Validated data of one family member.
///
/// Indices are zero-based throughout the API; reports and the text
/// interfaces use one-based names (`x1`, `C3`, ...).
#[derive(Clone, Debug)]
pub struct PoissonFamilySpec {
    eta: Expr,
    axes: Vec<Axis>,
    sources: Vec<AxisSpec>,
    pair: (usize, usize),
    domain: IntervalBox,
}

#[derive(Clone, Debug)]
pub struct FamilyBuilder {
    eta: Expr,
    axes: Vec<AxisSpec>,
    domain: IntervalBox,
    pair: (usize, usize),
    certify_points: usize,
    seed: u64,
}

impl FamilyBuilder {
    pub fn pair(mut self, i: usize, j: usize) -> Self {
        self.pair = (i, j);
        self
    }

    pub fn certify_points(mut self, count: usize) -> Self {
        self.certify_points = count;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Result<PoissonFamilySpec> {
        let n = self.axes.len();
        if n < 2 {
            return Err(Error::InvalidSpec(format!("dimension must be at least 2, got {n}")));
        }
        if self.domain.dim() != n {
            return Err(Error::InvalidSpec(format!(
                "domain has {} axes, expected {n}",
                self.domain.dim()
            )));
        }
        if !self.domain.is_bounded() {
            return Err(Error::InvalidSpec("domain box must be bounded to be sampled".into()));
        }
        let (i, j) = self.pair;
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidSpec(format!(
                "invalid distinguished pair ({}, {})",
                i + 1,
                j + 1
            )));
        }
        if self.eta.max_coord().is_some_and(|m| m >= n) {
            return Err(Error::InvalidSpec(
                "eta references a coordinate beyond the dimension".into(),
            ));
        }
        if self.eta.uses_x() {
            return Err(Error::InvalidSpec("eta must use x1..xn, not x".into()));
        }
        let mut axes = Vec::with_capacity(n);
        for (k, src) in self.axes.iter().enumerate() {
            let axis = match src {
                AxisSpec::Phi { phi, a } => {
                    let psi = psi_from_phi(phi, *a, self.domain.axis(k))?;
                    Axis {
                        phi: phi.clone(),
                        dpsi: psi.derivative(),
                        psi,
                    }
                }
                AxisSpec::Psi { psi } => {
                    if psi.max_coord().is_some() {
                        return Err(Error::InvalidSpec(format!(
                            "psi{} must be a one-variable expression",
                            k + 1
                        )));
                    }
                    let dpsi = psi.derivative();
                    Axis {
                        phi: psi.clone().div(dpsi.clone()),
                        psi: psi.clone(),
                        dpsi,
                    }
                }
            };
            axes.push(axis);
        }
        let spec = PoissonFamilySpec {
            eta: self.eta,
            axes,
            sources: self.axes,
            pair: self.pair,
            domain: self.domain,
        };
        spec.certify(self.certify_points, self.seed)?;
        Ok(spec)
    }
}

struct SignTracker {
    name: String,
    sign: f64,
}

impl SignTracker {
    fn new(name: String) -> Self {
        SignTracker { name, sign: 0.0 }
    }

    /// Reject zeros, non-finite values and sign changes (a continuous
    /// function changing sign on the connected box must vanish somewhere).
    fn observe(&mut self, v: f64, x: &[f64]) -> Result<()> {
        if v == 0.0 || !v.is_finite() || (self.sign != 0.0 && v.signum() != self.sign) {
            return Err(Error::Vanishing {
                what: self.name.clone(),
                point: x.to_vec(),
            });
        }
        self.sign = v.signum();
        Ok(())
    }
}

impl PoissonFamilySpec {
    pub fn builder(eta: Expr, axes: Vec<AxisSpec>, domain: IntervalBox) -> FamilyBuilder {
        FamilyBuilder {
            eta,
            axes,
            domain,
            pair: (0, 1),
            certify_points: DEFAULT_CERTIFY_POINTS,
            seed: 0,
        }
    }

    fn certify(&self, count: usize, seed: u64) -> Result<()> {
        let n = self.dim();
        let mut eta = SignTracker::new("eta".into());
        let mut trackers: Vec<[SignTracker; 3]> = (1..=n)
            .map(|k| {
                [
                    SignTracker::new(format!("phi{k}")),
                    SignTracker::new(format!("psi{k}")),
                    SignTracker::new(format!("dpsi{k}")),
                ]
            })
            .collect();
        let (i, j) = self.pair;
        let mut omega = SignTracker::new(format!("omega{}{}", i + 1, j + 1));
        for x in halton::sample_box(&self.domain, count, seed) {
            eta.observe(self.eta.eval(&x)?, &x)?;
            let mut psi = vec![0.0; n];
            for (k, (axis, tr)) in self.axes.iter().zip(&mut trackers).enumerate() {
                let v = self.raw_axis_values(axis, x[k])?;
                tr[0].observe(v.phi, &x)?;
                tr[1].observe(v.psi, &x)?;
                tr[2].observe(v.dpsi, &x)?;
                psi[k] = v.psi;
            }
            omega.observe(psi[i] - psi[j], &x)?;
        }
        Ok(())
    }

    fn raw_axis_values(&self, axis: &Axis, xk: f64) -> Result<AxisValues> {
        Ok(AxisValues {
            phi: axis.phi.eval1(xk)?,
            psi: axis.psi.eval1(xk)?,
            dpsi: axis.dpsi.eval1(xk)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn domain(&self) -> &IntervalBox {
        &self.domain
    }

    pub fn eta(&self) -> &Expr {
        &self.eta
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn axis_sources(&self) -> &[AxisSpec] {
        &self.sources
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains(x)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) && self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: x.to_vec() })
        }
    }

    pub fn psi(&self, k: usize, xk: f64) -> Result<f64> {
        self.axes[k].psi.eval1(xk)
    }

    pub fn dpsi(&self, k: usize, xk: f64) -> Result<f64> {
        self.axes[k].dpsi.eval1(xk)
    }

    pub fn phi(&self, k: usize, xk: f64) -> Result<f64> {
        self.axes[k].phi.eval1(xk)
    }

    /// η at a domain point, re-checked against the nonvanishing hypothesis.
    pub fn eta_at(&self, x: &[f64]) -> Result<f64> {
        let v = self.eta.eval(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { factor: "eta".into() });
        }
        if v == 0.0 {
            return Err(Error::Vanishing {
                what: "eta".into(),
                point: x.to_vec(),
            });
        }
        Ok(v)
    }

    fn checked_phi(&self, k: usize, x: &[f64]) -> Result<f64> {
        let v = self.phi(k, x[k])?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                factor: format!("phi{}", k + 1),
            });
        }
        if v == 0.0 {
            return Err(Error::Vanishing {
                what: format!("phi{}", k + 1),
                point: x.to_vec(),
            });
        }
        Ok(v)
    }

    fn checked_psi(&self, k: usize, x: &[f64]) -> Result<f64> {
        let v = self.psi(k, x[k])?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                factor: format!("psi{}", k + 1),
            });
        }
        Ok(v)
    }

    /// `ω_ij = ψ_i(x_i) − ψ_j(x_j)`.
    pub fn omega(&self, i: usize, j: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if i == j {
            return Ok(0.0);
        }
        Ok(self.checked_psi(i, x)? - self.checked_psi(j, x)?)
    }

    /// Structure matrix `J_ij = η·φ_i·φ_j·ω_ij`.
    pub fn structure_matrix(&self, x: &[f64]) -> Result<StructureMatrixValue> {
        self.check_point(x)?;
        let n = self.dim();
        let eta = self.eta_at(x)?;
        let phi = (0..n).map(|k| self.checked_phi(k, x)).collect::<Result<Vec<_>>>()?;
        let psi = (0..n).map(|k| self.checked_psi(k, x)).collect::<Result<Vec<_>>>()?;
        StructureMatrixValue::from_upper(x.to_vec(), n, |i, j| {
            let v = eta * phi[i] * phi[j] * (psi[i] - psi[j]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    factor: format!("J{}{}", i + 1, j + 1),
                })
            }
        })
    }

    /// Structure matrix through `ψ` and `ψ'` only:
    /// `J_ij = η·ψ_iψ_j/(ψ_i'ψ_j')·(ψ_i − ψ_j)`.
    pub fn structure_matrix_alt(&self, x: &[f64]) -> Result<StructureMatrixValue> {
        self.check_point(x)?;
        let n = self.dim();
        let eta = self.eta_at(x)?;
        let mut ratio = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        for k in 0..n {
            let p = self.checked_psi(k, x)?;
            let d = self.dpsi(k, x[k])?;
            if d == 0.0 {
                return Err(Error::Vanishing {
                    what: format!("dpsi{}", k + 1),
                    point: x.to_vec(),
                });
            }
            ratio.push(p / d);
            psi.push(p);
        }
        StructureMatrixValue::from_upper(x.to_vec(), n, |i, j| {
            let v = eta * ratio[i] * ratio[j] * (psi[i] - psi[j]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    factor: format!("J{}{}", i + 1, j + 1),
                })
            }
        })
    }
}
