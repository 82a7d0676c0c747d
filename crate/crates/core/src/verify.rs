//! Numerical certification of the Poisson axioms.
//!
//! Everything here works against the [`StructureField`] trait and
//! differentiates the structure matrix by finite differences, so the
//! checker never shares a code path with the closed-form construction and
//! can falsify a wrong matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::expr::Expr;
use crate::family::{PoissonFamilySpec, StructureMatrixValue};
use crate::fd;

/// Relative singular-value threshold used by [`rank_at`].
pub const RANK_THRESHOLD: f64 = 1e-10;

/// A skew-symmetric matrix field on an open domain.
pub trait StructureField: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    fn matrix_at(&self, x: &[f64]) -> Result<StructureMatrixValue>;
}

impl StructureField for PoissonFamilySpec {
    fn dim(&self) -> usize {
        PoissonFamilySpec::dim(self)
    }

    fn contains(&self, x: &[f64]) -> bool {
        PoissonFamilySpec::contains(self, x)
    }

    fn matrix_at(&self, x: &[f64]) -> Result<StructureMatrixValue> {
        self.structure_matrix(x)
    }
}

fn flatten(m: &StructureMatrixValue) -> Vec<f64> {
    m.entries.iter().copied().collect()
}

/// `{f, g}(x) = Σ ∂_i f · J_ij · ∂_j g` with symbolic gradients.
pub fn bracket<S: StructureField + ?Sized>(field: &S, f: &Expr, g: &Expr, x: &[f64]) -> Result<f64> {
    let j = field.matrix_at(x)?;
    let n = field.dim();
    let df = f.gradient(n).iter().map(|d| d.eval(x)).collect::<Result<Vec<_>>>()?;
    let dg = g.gradient(n).iter().map(|d| d.eval(x)).collect::<Result<Vec<_>>>()?;
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += df[a] * j.get(a, b) * dg[b];
        }
    }
    Ok(s)
}

/// Jacobi-identity residuals at one point.
#[derive(Clone, Debug)]
pub struct JacobiResidual {
    pub point: Vec<f64>,
    n: usize,
    residuals: Vec<f64>,
    pub max_abs: f64,
    /// `max|J| · max|∂J|`; the residual is a sum of such products.
    pub scale: f64,
    /// Some derivative used a one-sided stencil near the boundary.
    pub one_sided: bool,
}

impl JacobiResidual {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.residuals[(i * self.n + j) * self.n + k]
    }

    /// `max_abs / scale`, zero when the matrix and its derivatives vanish.
    pub fn normalized(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }
}

/// `R_ijk = Σ_l (J_li ∂_l J_jk + J_lj ∂_l J_ki + J_lk ∂_l J_ij)` for every triple.
pub fn jacobi_residual<S: StructureField + ?Sized>(field: &S, x: &[f64]) -> Result<JacobiResidual> {
    let n = field.dim();
    let j = field.matrix_at(x)?;
    let f = |y: &[f64]| field.matrix_at(y).map(|m| flatten(&m));
    let inside = |y: &[f64]| field.contains(y);
    let mut dj = Vec::with_capacity(n);
    let mut one_sided = false;
    for l in 0..n {
        let p = fd::partial(&f, x, l, &inside)?;
        one_sided |= p.one_sided;
        // nalgebra storage is column-major: entry (a, b) sits at a + b·n
        dj.push(DMatrix::from_column_slice(n, n, &p.value));
    }
    let mut residuals = vec![0.0; n * n * n];
    let mut max_abs: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut r = 0.0;
                for (l, d) in dj.iter().enumerate() {
                    r += j.get(l, a) * d[(b, c)] + j.get(l, b) * d[(c, a)] + j.get(l, c) * d[(a, b)];
                }
                residuals[(a * n + b) * n + c] = r;
                max_abs = max_abs.max(r.abs());
            }
        }
    }
    let d_max = dj.iter().flat_map(|d| d.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(JacobiResidual {
        point: x.to_vec(),
        n,
        residuals,
        max_abs,
        scale: j.max_abs() * d_max,
        one_sided,
    })
}

/// Numerical rank from singular values above `RANK_THRESHOLD·σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_THRESHOLD * smax).count()
}

pub fn rank_at<S: StructureField + ?Sized>(field: &S, x: &[f64]) -> Result<usize> {
    Ok(numerical_rank(&field.matrix_at(x)?.entries))
}

/// `max_r |(J·∇f)_r|` with `∇f` by finite differences.
#[derive(Clone, Copy, Debug)]
pub struct Defect {
    pub max_abs: f64,
    /// `max|J| · max|∇f|`.
    pub scale: f64,
}

impl Defect {
    pub fn normalized(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }
}

/// How far `f` is from being annihilated by `J` at `x`.
pub fn annihilation_defect<S, F>(field: &S, f: &F, x: &[f64]) -> Result<Defect>
where
    S: StructureField + ?Sized,
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let j = field.matrix_at(x)?;
    let inside = |y: &[f64]| field.contains(y);
    let (g, _) = fd::gradient(f, x, &inside)?;
    let n = field.dim();
    let mut max_abs: f64 = 0.0;
    for r in 0..n {
        let v: f64 = (0..n).map(|s| j.get(r, s) * g[s]).sum();
        max_abs = max_abs.max(v.abs());
    }
    let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Defect {
        max_abs,
        scale: j.max_abs() * g_max,
    })
}

/// Worst normalized Jacobi residual over a point set.
#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub points: usize,
    pub max_normalized: f64,
    pub max_abs: f64,
    pub worst_point: Vec<f64>,
    pub one_sided: usize,
}

/// Evaluate the residual at every point in parallel; the reduction is a
/// sequential max over the collected results, so it is order independent.
pub fn jacobi_sweep<S: StructureField + ?Sized>(field: &S, points: &[Vec<f64>]) -> Result<SweepSummary> {
    let results = points
        .par_iter()
        .map(|x| jacobi_residual(field, x))
        .collect::<Result<Vec<_>>>()?;
    let mut s = SweepSummary {
        points: results.len(),
        max_normalized: 0.0,
        max_abs: 0.0,
        worst_point: Vec::new(),
        one_sided: 0,
    };
    for r in results {
        s.max_abs = s.max_abs.max(r.max_abs);
        s.one_sided += r.one_sided as usize;
        if r.normalized() > s.max_normalized || s.worst_point.is_empty() {
            s.max_normalized = s.max_normalized.max(r.normalized());
            s.worst_point = r.point;
        }
    }
    Ok(s)
}

/// Rank at every point, as a histogram indexed by rank.
pub fn rank_histogram<S: StructureField + ?Sized>(field: &S, points: &[Vec<f64>]) -> Result<Vec<usize>> {
    let ranks = points
        .par_iter()
        .map(|x| rank_at(field, x))
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0; field.dim() + 1];
    for r in ranks {
        hist[r] += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::AxisSpec;
    use crate::interval::IntervalBox;

    /// `J_ij = x_i + x_j` above the diagonal, mirrored below: skew but not Poisson.
    struct SumField;

    impl StructureField for SumField {
        fn dim(&self) -> usize {
            3
        }
        fn contains(&self, _: &[f64]) -> bool {
            true
        }
        fn matrix_at(&self, x: &[f64]) -> Result<StructureMatrixValue> {
            StructureMatrixValue::from_upper(x.to_vec(), 3, |i, j| Ok(x[i] + x[j]))
        }
    }

    fn lv3() -> PoissonFamilySpec {
        PoissonFamilySpec::builder(
            Expr::Const(1.0),
            vec![AxisSpec::phi(Expr::X, 1.0); 3],
            IntervalBox::from_bounds(&[(0.5, 1.5), (1.5, 2.5), (2.5, 3.5)]).unwrap(),
        )
        .build()
        .unwrap()
    }

    #[test]
    fn residual_detects_non_poisson_matrix() {
        // Hand expansion of the (1,2,3) triple at x = (1,2,3):
        // J12 = 3, J13 = 4, J23 = 5; ∂J23 = (0,1,1), ∂J31 = (-1,0,-1), ∂J12 = (1,1,0)
        // Σ J_l1 ∂_l J23 = J21 + J31 = -7
        // Σ J_l2 ∂_l J31 = -J12 - J32 = 2
        // Σ J_l3 ∂_l J12 = J13 + J23 = 9
        let r = jacobi_residual(&SumField, &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.get(0, 1, 2) - 4.0).abs() < 1e-8);
        assert!(r.max_abs > 0.1);
        // total antisymmetry
        assert!((r.get(1, 0, 2) + r.get(0, 1, 2)).abs() < 1e-8);
        assert!((r.get(1, 2, 0) - r.get(0, 1, 2)).abs() < 1e-8);
    }

    #[test]
    fn lv3_residual_is_at_finite_difference_floor() {
        let r = jacobi_residual(&lv3(), &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.max_abs <= 1e-6 * r.scale, "{} vs {}", r.max_abs, r.scale);
        assert!(!r.one_sided);
    }

    #[test]
    fn bracket_examples() {
        let spec = lv3();
        let x = [1.0, 2.0, 3.0];
        let b = bracket(&spec, &Expr::coord(0), &Expr::coord(1), &x).unwrap();
        assert_eq!(b, -2.0);
        let f: Expr = "(mul x1 (exp x3))".parse().unwrap();
        let g: Expr = "(log x2)".parse().unwrap();
        assert!(bracket(&spec, &f, &f, &x).unwrap().abs() < 1e-10);
        let fg = bracket(&spec, &f, &g, &x).unwrap();
        let gf = bracket(&spec, &g, &f, &x).unwrap();
        assert!((fg + gf).abs() <= 1e-10 * fg.abs());
    }

    #[test]
    fn rank_of_skew_matrices() {
        assert_eq!(rank_at(&lv3(), &[1.0, 2.0, 3.0]).unwrap(), 2);
        assert_eq!(numerical_rank(&DMatrix::zeros(4, 4)), 0);
        // the sum field is generic: rank 2 in three dimensions
        assert_eq!(rank_at(&SumField, &[1.0, 2.0, 3.0]).unwrap(), 2);
    }
}
