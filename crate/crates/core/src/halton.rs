//! Scrambled Halton points for reproducible domain sampling.
//!
//! Each dimension uses its own prime base and a seed-derived permutation of
//! the nonzero digits (zero stays fixed so points remain in the open unit
//! cube). Index 0 is skipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::interval::IntervalBox;

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= c)
            .all(|&p| !c.is_multiple_of(p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[derive(Clone, Debug)]
pub struct Halton {
    bases: Vec<u64>,
    perms: Vec<Vec<u64>>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let bases = first_primes(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = bases
            .iter()
            .map(|&b| {
                let mut tail: Vec<u64> = (1..b).collect();
                tail.shuffle(&mut rng);
                std::iter::once(0).chain(tail).collect()
            })
            .collect();
        Halton { bases, perms }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// The `index`-th point (`index ≥ 1`) in `(0, 1)^dim`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&b, perm)| {
                let mut i = index;
                let mut f = 1.0;
                let mut r = 0.0;
                while i > 0 {
                    f /= b as f64;
                    r += f * perm[(i % b) as usize] as f64;
                    i /= b;
                }
                r
            })
            .collect()
    }

    /// First `count` points mapped into the open box. Points that round onto
    /// the boundary are skipped, so the result is deterministic for a seed.
    pub fn sample_box(&self, domain: &IntervalBox, count: usize) -> Vec<Vec<f64>> {
        assert_eq!(domain.dim(), self.dim(), "dimension mismatch");
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        while out.len() < count {
            let u = self.point(index);
            index += 1;
            let x: Vec<f64> = u.iter().zip(domain.axes()).map(|(&u, a)| a.lerp(u)).collect();
            if domain.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// Convenience wrapper: `count` scrambled Halton points of `domain`.
pub fn sample_box(domain: &IntervalBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    Halton::new(domain.dim(), seed).sample_box(domain, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn points_are_in_open_cube_and_distinct() {
        let h = Halton::new(5, 7);
        let pts: Vec<_> = (1..500).map(|i| h.point(i)).collect();
        for p in &pts {
            assert!(p.iter().all(|&u| u > 0.0 && u < 1.0));
        }
        for (a, b) in pts.iter().zip(pts.iter().skip(1)) {
            assert_ne!(a, b);
        }
    }

    #[test]
    fn base_two_is_van_der_corput() {
        let h = Halton::new(1, 123);
        let got: Vec<f64> = (1..8).map(|i| h.point(i)[0]).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875]);
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = Halton::new(3, 1).point(17);
        let b = Halton::new(3, 1).point(17);
        let c = Halton::new(3, 2).point(17);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn low_discrepancy_mean() {
        let d = IntervalBox::from_bounds(&[(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)]).unwrap();
        let pts = sample_box(&d, 1000, 7);
        for (k, centre) in [0.5, 2.5, 4.5].iter().enumerate() {
            let mean: f64 = pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64;
            assert!((mean - centre).abs() < 0.01, "axis {k}: {mean}");
        }
    }
}
