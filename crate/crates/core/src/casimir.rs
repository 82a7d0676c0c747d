//! The complete Casimir set attached to a distinguished pair `(i, j)`:
//! `C_k = ψ_i·ω_jk / (ψ_k·ω_ij)` for every `k ∉ {i, j}`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::family::PoissonFamilySpec;
use crate::fd;
use crate::verify::{annihilation_defect, Defect};

#[derive(Clone, Debug)]
pub struct CasimirSet {
    spec: Arc<PoissonFamilySpec>,
    pair: (usize, usize),
    indices: Vec<usize>,
}

/// Conditioning of the Casimir Jacobian restricted to the `k` coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Independence {
    /// Smallest `|∂C_k/∂x_k|·max(1,|x_k|)/max(1,|C_k|)`.
    pub min_scaled_diagonal: f64,
    /// Largest `|∂C_k/∂x_l|`, `l ≠ k`, on the same scale (ideally zero).
    pub max_scaled_offdiagonal: f64,
    pub nonsingular: bool,
}

impl CasimirSet {
    /// Casimirs for the spec's own distinguished pair.
    pub fn new(spec: Arc<PoissonFamilySpec>) -> Self {
        let pair = spec.pair();
        Self::with_pair(spec, pair).expect("spec pair is validated at construction")
    }

    pub fn with_pair(spec: Arc<PoissonFamilySpec>, pair: (usize, usize)) -> Result<Self> {
        let n = spec.dim();
        if pair.0 == pair.1 || pair.0 >= n || pair.1 >= n {
            return Err(Error::InvalidSpec(format!(
                "invalid pair ({}, {})",
                pair.0 + 1,
                pair.1 + 1
            )));
        }
        let indices = (0..n).filter(|&k| k != pair.0 && k != pair.1).collect();
        Ok(CasimirSet { spec, pair, indices })
    }

    pub fn spec(&self) -> &Arc<PoissonFamilySpec> {
        &self.spec
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    /// The Casimir indices `k`, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn formula(&self, k: usize, x: &[f64]) -> Result<f64> {
        let (i, j) = self.pair;
        let s = &self.spec;
        let (pi, pj, pk) = (s.psi(i, x[i])?, s.psi(j, x[j])?, s.psi(k, x[k])?);
        let wij = pi - pj;
        if wij == 0.0 {
            return Err(Error::SingularChart {
                pair: self.pair,
                point: x.to_vec(),
            });
        }
        if pk == 0.0 {
            return Err(Error::Vanishing {
                what: format!("psi{}", k + 1),
                point: x.to_vec(),
            });
        }
        Ok(pi * (pj - pk) / (pk * wij))
    }

    /// `C_k(x)`.
    pub fn eval(&self, k: usize, x: &[f64]) -> Result<f64> {
        if !self.indices.contains(&k) {
            return Err(Error::InvalidSpec(format!(
                "C{} is not part of the Casimir set for pair ({}, {})",
                k + 1,
                self.pair.0 + 1,
                self.pair.1 + 1
            )));
        }
        self.spec.check_point(x)?;
        self.formula(k, x)
    }

    /// All Casimirs in the order of [`CasimirSet::indices`].
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_point(x)?;
        self.indices.iter().map(|&k| self.formula(k, x)).collect()
    }

    /// `max_r |(J·∇C_k)_r|` with a finite-difference gradient.
    pub fn gradient_check(&self, k: usize, x: &[f64]) -> Result<Defect> {
        self.eval(k, x)?;
        annihilation_defect(&*self.spec, &|y: &[f64]| self.eval(k, y), x)
    }

    /// Finite-difference check that the `(n−2)×(n−2)` block `∂C_k/∂x_l`,
    /// `k, l ∉ {i, j}`, is nonsingular.
    pub fn independence(&self, x: &[f64]) -> Result<Independence> {
        let m = self.len();
        if m == 0 {
            return Ok(Independence {
                min_scaled_diagonal: f64::INFINITY,
                max_scaled_offdiagonal: 0.0,
                nonsingular: true,
            });
        }
        let values = self.eval_all(x)?;
        let f = |y: &[f64]| self.eval_all(y);
        let inside = |y: &[f64]| self.spec.contains(y);
        let mut block = DMatrix::zeros(m, m);
        for (c, &l) in self.indices.iter().enumerate() {
            let p = fd::partial(&f, x, l, &inside)?;
            for r in 0..m {
                block[(r, c)] = p.value[r] * x[l].abs().max(1.0) / values[r].abs().max(1.0);
            }
        }
        let mut min_diag = f64::INFINITY;
        let mut max_off: f64 = 0.0;
        for r in 0..m {
            for c in 0..m {
                if r == c {
                    min_diag = min_diag.min(block[(r, c)].abs());
                } else {
                    max_off = max_off.max(block[(r, c)].abs());
                }
            }
        }
        let sv = block.svd(false, false).singular_values;
        let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        Ok(Independence {
            min_scaled_diagonal: min_diag,
            max_scaled_offdiagonal: max_off,
            nonsingular: min_diag > 1e-10 && smin > 1e-10,
        })
    }
}
