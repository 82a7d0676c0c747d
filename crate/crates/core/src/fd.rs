//! Finite-difference derivatives that respect an open domain.
//!
//! The step is `h = cbrt(eps)·max(1, |x_l|)`. When a central stencil would
//! leave the domain the step is halved (up to four times); after that a
//! second-order one-sided stencil is used and the result is flagged.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

#[derive(Clone, Debug)]
pub struct Partial {
    pub value: Vec<f64>,
    pub one_sided: bool,
}

fn shifted(x: &[f64], l: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[l] += h;
    y
}

/// ∂f/∂x_l at `x` for a vector-valued `f`.
pub fn partial<F, D>(f: &F, x: &[f64], l: usize, inside: &D) -> Result<Partial>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    partial_impl(f, x, l, inside, false)
}

fn central<F>(f: &F, x: &[f64], l: usize, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let (fp, fm) = (f(&shifted(x, l, h))?, f(&shifted(x, l, -h))?);
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

fn partial_impl<F, D>(f: &F, x: &[f64], l: usize, inside: &D, richardson: bool) -> Result<Partial>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    let h0 = step(x[l]);
    let mut h = h0;
    for _ in 0..5 {
        if inside(&shifted(x, l, h)) && inside(&shifted(x, l, -h)) {
            let coarse = central(f, x, l, h)?;
            let value = if richardson {
                let fine = central(f, x, l, 0.5 * h)?;
                fine.iter().zip(&coarse).map(|(a, b)| (4.0 * a - b) / 3.0).collect()
            } else {
                coarse
            };
            return Ok(Partial {
                value,
                one_sided: false,
            });
        }
        h *= 0.5;
    }
    let mut h = h0;
    for _ in 0..5 {
        for dir in [1.0, -1.0] {
            let (x1, x2) = (shifted(x, l, dir * h), shifted(x, l, 2.0 * dir * h));
            if inside(&x1) && inside(&x2) {
                let (f0, f1, f2) = (f(x)?, f(&x1)?, f(&x2)?);
                let value = f0
                    .iter()
                    .zip(&f1)
                    .zip(&f2)
                    .map(|((a, b), c)| dir * (-3.0 * a + 4.0 * b - c) / (2.0 * h))
                    .collect();
                return Ok(Partial { value, one_sided: true });
            }
        }
        h *= 0.5;
    }
    Err(Error::OutsideDomain { point: x.to_vec() })
}

/// Gradient of a scalar function; the flag reports any one-sided stencil.
pub fn gradient<F, D>(f: &F, x: &[f64], inside: &D) -> Result<(Vec<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    let wrapped = |y: &[f64]| f(y).map(|v| vec![v]);
    let mut g = Vec::with_capacity(x.len());
    let mut flagged = false;
    for l in 0..x.len() {
        let p = partial(&wrapped, x, l, inside)?;
        flagged |= p.one_sided;
        g.push(p.value[0]);
    }
    Ok((g, flagged))
}

/// Jacobian `D[r][l] = ∂f_r/∂x_l`.
pub fn jacobian<F, D>(f: &F, x: &[f64], inside: &D) -> Result<(DMatrix<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    jacobian_impl(f, x, inside, false)
}

/// Like [`jacobian`], with central differences Richardson-extrapolated to
/// fourth order. For maps with large curvature, e.g. a chart near `ω = 0`.
pub fn jacobian_extrapolated<F, D>(f: &F, x: &[f64], inside: &D) -> Result<(DMatrix<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    jacobian_impl(f, x, inside, true)
}

fn jacobian_impl<F, D>(f: &F, x: &[f64], inside: &D, richardson: bool) -> Result<(DMatrix<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
    D: Fn(&[f64]) -> bool + ?Sized,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut flagged = false;
    for l in 0..n {
        let p = partial_impl(f, x, l, inside, richardson)?;
        flagged |= p.one_sided;
        cols.push(p.value);
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((DMatrix::from_fn(m, n, |r, l| cols[l][r]), flagged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolated_jacobian_is_sharper() {
        // 1/(x − 0.99) at x = 1: the plain stencil's error is (h/d)²-sized
        let f = |x: &[f64]| Ok(vec![1.0 / (x[0] - 0.99)]);
        let exact = -1e4;
        let all = |_: &[f64]| true;
        let (plain, _) = jacobian(&f, &[1.0], &all).unwrap();
        let (rich, _) = jacobian_extrapolated(&f, &[1.0], &all).unwrap();
        let (e1, e2) = ((plain[(0, 0)] - exact).abs(), (rich[(0, 0)] - exact).abs());
        assert!(e2 < 1e-3 * e1 && e2 <= 1e-6 * exact.abs(), "{e1} {e2}");
    }

    #[test]
    fn central_gradient() {
        let f = |x: &[f64]| Ok(x[0] * x[0] * x[1] + x[1].exp());
        let (g, flagged) = gradient(&f, &[1.5, 0.3], &|_: &[f64]| true).unwrap();
        assert!(!flagged);
        assert!((g[0] - 2.0 * 1.5 * 0.3).abs() < 1e-9);
        assert!((g[1] - (2.25 + 0.3f64.exp())).abs() < 1e-9);
    }

    #[test]
    fn falls_back_to_one_sided_near_boundary() {
        let f = |x: &[f64]| Ok(x[0].ln());
        let inside = |x: &[f64]| x[0] > 0.0 && x[0] < 1.0;
        let x = 1.0 - 1e-9;
        let (g, flagged) = gradient(&f, &[x], &inside).unwrap();
        assert!(flagged);
        assert!((g[0] - 1.0 / x).abs() < 1e-8);
    }

    #[test]
    fn jacobian_shape() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[1], x[0] + 2.0 * x[1], x[1]]);
        let (j, _) = jacobian(&f, &[2.0, 3.0], &|_: &[f64]| true).unwrap();
        assert_eq!(j.shape(), (3, 2));
        assert!((j[(0, 0)] - 3.0).abs() < 1e-9 && (j[(0, 1)] - 2.0).abs() < 1e-9);
        assert!((j[(1, 1)] - 2.0).abs() < 1e-9 && j[(2, 0)].abs() < 1e-9);
    }
}
