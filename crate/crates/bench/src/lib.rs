//! Fixtures shared by the criterion benches.

use poisfam::catalog;
use poisfam::{sample_box, PoissonSystem};

/// Default-box Lotka–Volterra system and `count` Halton points in its box.
pub fn lv3_fixture(count: usize) -> (PoissonSystem, Vec<Vec<f64>>) {
    let sys = catalog::make_lv3(catalog::DEFAULT_LV3_K, None).expect("default lv3");
    let pts = sample_box(sys.spec().domain(), count, 1);
    (sys, pts)
}

/// n-dimensional Lotka–Volterra with `a = b = 1`.
pub fn nlv_fixture(n: usize, count: usize) -> (PoissonSystem, Vec<Vec<f64>>) {
    let sys = catalog::make_nlv(&vec![1.0; n], &vec![1.0; n], None).expect("default nlv");
    let pts = sample_box(sys.spec().domain(), count, 1);
    (sys, pts)
}
