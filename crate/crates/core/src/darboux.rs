//! Global Darboux chart: keep `x_i`, `x_j` and replace every other
//! coordinate by its Casimir. In the new coordinates the structure matrix
//! is `J_ij(x(y))·E_ij`, and the time change `dτ = J_ij(x(y)) dt` turns it
//! into the constant canonical matrix.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::casimir::CasimirSet;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::family::{PoissonFamilySpec, StructureMatrixValue};
use crate::fd;
use crate::primitive::MonotoneInverse;

#[derive(Clone, Debug)]
pub struct DarbouxChart {
    casimirs: CasimirSet,
    /// Prepared inverses of `ψ_k` over the `k`-th axis of the domain.
    zeta: Vec<Option<MonotoneInverse>>,
    hamiltonian: Option<Expr>,
}

impl DarbouxChart {
    pub fn new(spec: Arc<PoissonFamilySpec>) -> Result<Self> {
        Self::from_casimirs(CasimirSet::new(spec))
    }

    pub fn with_pair(spec: Arc<PoissonFamilySpec>, pair: (usize, usize)) -> Result<Self> {
        Self::from_casimirs(CasimirSet::with_pair(spec, pair)?)
    }

    pub fn from_casimirs(casimirs: CasimirSet) -> Result<Self> {
        let spec = casimirs.spec();
        let mut zeta = vec![None; spec.dim()];
        for &k in casimirs.indices() {
            let axis = spec.domain().axis(k);
            zeta[k] = Some(MonotoneInverse::new(&spec.axis(k).psi, (axis.lo, axis.hi))?);
        }
        Ok(DarbouxChart {
            casimirs,
            zeta,
            hamiltonian: None,
        })
    }

    pub fn with_hamiltonian(mut self, h: Expr) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn spec(&self) -> &Arc<PoissonFamilySpec> {
        self.casimirs.spec()
    }

    pub fn casimirs(&self) -> &CasimirSet {
        &self.casimirs
    }

    pub fn pair(&self) -> (usize, usize) {
        self.casimirs.pair()
    }

    pub fn dim(&self) -> usize {
        self.spec().dim()
    }

    /// `y_i = x_i`, `y_j = x_j`, `y_k = C_k(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let c = self.casimirs.eval_all(x)?;
        let mut y = x.to_vec();
        for (&k, v) in self.casimirs.indices().iter().zip(c) {
            y[k] = v;
        }
        Ok(y)
    }

    fn inner(&self, y: &[f64]) -> Result<(f64, f64)> {
        let n = self.dim();
        if y.len() != n || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfChart(format!(
                "{y:?} is not a finite point of dimension {n}"
            )));
        }
        let (i, j) = self.pair();
        let dom = self.spec().domain();
        if !dom.axis(i).contains(y[i]) || !dom.axis(j).contains(y[j]) {
            return Err(Error::OutOfChart(format!("kept coordinates of {y:?} leave the domain")));
        }
        let pi = self.spec().psi(i, y[i])?;
        let pj = self.spec().psi(j, y[j])?;
        if pi == pj {
            return Err(Error::SingularChart {
                pair: (i, j),
                point: y.to_vec(),
            });
        }
        Ok((pi, pj))
    }

    /// `x_k = ζ_k[ψ_i ψ_j / (ψ_i + y_k ω_ij)]` with `ζ_k = ψ_k⁻¹`.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (pi, pj) = self.inner(y)?;
        let w = pi - pj;
        let mut x = y.to_vec();
        for &k in self.casimirs.indices() {
            let den = pi + y[k] * w;
            if den == 0.0 {
                return Err(Error::OutOfChart(format!("psi_i + y{} omega_ij vanishes", k + 1)));
            }
            let target = pi * pj / den;
            let zeta = self.zeta[k].as_ref().expect("prepared for every Casimir index");
            x[k] = zeta.solve(target).map_err(|e| match e {
                Error::NoRoot { .. } => Error::OutOfChart(format!("no preimage for y{} = {}", k + 1, y[k])),
                other => other,
            })?;
        }
        if !self.spec().contains(&x) {
            return Err(Error::OutOfChart(format!("preimage {x:?} leaves the domain")));
        }
        Ok(x)
    }

    /// Analytic Jacobian `∂x/∂y` of the inverse chart.
    pub fn inverse_jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let x = self.inverse(y)?;
        let (i, j) = self.pair();
        let s = self.spec();
        let (pi, pj) = (s.psi(i, x[i])?, s.psi(j, x[j])?);
        let (di, dj) = (s.dpsi(i, x[i])?, s.dpsi(j, x[j])?);
        let w = pi - pj;
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        m[(i, i)] = 1.0;
        m[(j, j)] = 1.0;
        for &k in self.casimirs.indices() {
            let yk = y[k];
            let den = pi + yk * w;
            let den2 = den * den;
            let dk = s.dpsi(k, x[k])?;
            // q = ψ_iψ_j/den, x_k = ζ_k(q), dζ_k/dq = 1/ψ_k'(x_k)
            let dq_dyi = (di * pj * den - pi * pj * di * (1.0 + yk)) / den2;
            let dq_dyj = pi * dj * (den + yk * pj) / den2;
            let dq_dyk = -pi * pj * w / den2;
            m[(k, i)] = dq_dyi / dk;
            m[(k, j)] = dq_dyj / dk;
            m[(k, k)] = dq_dyk / dk;
        }
        Ok(m)
    }

    /// `J*(y) = Dy·J(x(y))·Dyᵀ` with the chart Jacobian `Dy` taken by
    /// finite differences of [`DarbouxChart::forward`].
    pub fn pushforward_structure(&self, y: &[f64]) -> Result<StructureMatrixValue> {
        let x = self.inverse(y)?;
        let j = self.spec().structure_matrix(&x)?;
        let inside = |p: &[f64]| self.spec().contains(p);
        let (dy, _) = fd::jacobian_extrapolated(&|p: &[f64]| self.forward(p), &x, &inside)?;
        let full = &dy * &j.entries * dy.transpose();
        StructureMatrixValue::from_upper(y.to_vec(), self.dim(), |a, b| Ok(full[(a, b)]))
    }

    /// `J_ij(x(y)) = η·φ_i(y_i)·φ_j(y_j)·ω_ij(y_i, y_j)`.
    pub fn reparam_factor(&self, y: &[f64]) -> Result<f64> {
        let x = self.inverse(y)?;
        let (i, j) = self.pair();
        let s = self.spec();
        let v = s.eta_at(&x)? * s.phi(i, x[i])? * s.phi(j, x[j])? * (s.psi(i, x[i])? - s.psi(j, x[j])?);
        if v == 0.0 || !v.is_finite() {
            return Err(Error::SingularChart {
                pair: (i, j),
                point: y.to_vec(),
            });
        }
        Ok(v)
    }

    /// The constant matrix with `+1` at `(i, j)`, `−1` at `(j, i)`.
    pub fn canonical_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let (i, j) = self.pair();
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m[(j, i)] = -1.0;
        m
    }

    /// Largest entry deviation of `J*(y)/J_ij(x(y))` from the canonical matrix.
    /// Finite-difference noise grows like `|C|/|ω_ij|` as the chart degenerates.
    pub fn canonical_check(&self, y: &[f64]) -> Result<f64> {
        let pushed = self.pushforward_structure(y)?;
        let mu_inv = self.reparam_factor(y)?;
        let target = self.canonical_matrix();
        Ok(pushed
            .entries
            .iter()
            .zip(target.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a / mu_inv - b).abs())))
    }

    /// `H*(y) = H(x(y))`.
    pub fn reduced_hamiltonian(&self, y: &[f64]) -> Result<f64> {
        let h = self
            .hamiltonian
            .as_ref()
            .ok_or_else(|| Error::InvalidSpec("chart has no Hamiltonian attached".into()))?;
        h.eval(&self.inverse(y)?)
    }

    /// Relative round-trip error `|x(y(x)) − x|∞ / |x|∞`.
    pub fn round_trip_error(&self, x: &[f64]) -> Result<f64> {
        let back = self.inverse(&self.forward(x)?)?;
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        Ok(back.iter().zip(x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale)
    }
}
