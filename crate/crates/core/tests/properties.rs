use std::sync::Arc;

use proptest::prelude::*;

use poisfam::catalog;
use poisfam::fd;
use poisfam::primitive::{inverse, psi_from_phi};
use poisfam::verify::numerical_rank;
use poisfam::{
    bracket, jacobi_residual, rank_at, AxisSpec, DarbouxChart, Expr, Interval, IntervalBox, PoissonFamilySpec,
};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![Just(Expr::X), (-3.0..3.0f64).prop_map(Expr::Const)]
}

/// One-variable expressions; some are undefined at some points, which the
/// properties skip.
fn expr1() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.div(b)),
            inner.clone().prop_map(|a| a.mul(Expr::Const(0.3)).exp()),
            inner.clone().prop_map(Expr::ln),
            (inner, prop_oneof![Just(2.0), Just(3.0), Just(0.5), Just(-1.0)]).prop_map(|(a, p)| a.powf(p)),
        ]
    })
}

/// φ candidates that stay positive on `(0.2, 6)`, covering the closed-form
/// and tabulated branches.
fn phi_choice() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::X),
        (0.5..2.0f64).prop_map(Expr::Const),
        (0.5..2.0f64).prop_map(|k| Expr::Const(k).mul(Expr::X.powf(2.0))),
        (0.5..2.0f64).prop_map(|q| Expr::X.add(Expr::Const(q))),
        Just("(add 1 (pow x 2))".parse().unwrap()),
        Just("(exp (mul 0.2 x))".parse().unwrap()),
    ]
}

fn eta_choice() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::Const(1.0)),
        Just("(exp x1)".parse().unwrap()),
        Just("(add 1 (mul x1 x2))".parse().unwrap()),
        Just("(div 1 (add x2 x3))".parse().unwrap()),
    ]
}

/// A random three-dimensional family member on separated unit-width axes.
fn spec3() -> impl Strategy<Value = PoissonFamilySpec> {
    (
        eta_choice(),
        prop::collection::vec((phi_choice(), 0.5..2.0f64, any::<bool>()), 3),
        0.2..1.0f64,
    )
        .prop_filter_map("hypotheses fail on the box", |(eta, axes, lo)| {
            let bounds: Vec<(f64, f64)> = (0..3)
                .map(|k| (lo + 2.0 * k as f64, lo + 2.0 * k as f64 + 1.0))
                .collect();
            let axes = axes
                .into_iter()
                .map(|(phi, a, neg)| AxisSpec::phi(phi, if neg { -a } else { a }))
                .collect();
            PoissonFamilySpec::builder(eta, axes, IntervalBox::from_bounds(&bounds).ok()?)
                .certify_points(200)
                .build()
                .ok()
        })
}

fn unit_point() -> impl Strategy<Value = [f64; 3]> {
    [0.001..0.999f64, 0.001..0.999f64, 0.001..0.999f64]
}

fn at(spec: &PoissonFamilySpec, u: [f64; 3]) -> Vec<f64> {
    (0..3).map(|k| spec.domain().axis(k).lerp(u[k])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_finite_difference(e in expr1(), x in 0.3..3.0f64) {
        let d = e.derivative();
        let (Ok(v), Ok(dv)) = (e.eval1(x), d.eval1(x)) else { return Ok(()) };
        let h = fd::step(x);
        let central = |h: f64| -> Option<f64> {
            let (p, m) = (e.eval1(x + h).ok()?, e.eval1(x - h).ok()?);
            (p.is_finite() && m.is_finite()).then(|| (p - m) / (2.0 * h))
        };
        let (Some(d1), Some(d2)) = (central(h), central(h / 2.0)) else { return Ok(()) };
        prop_assume!(v.is_finite() && dv.is_finite());
        // keep away from poles, where the difference quotient itself is meaningless
        prop_assume!(v.abs() < 1e6 && dv.abs() < 1e6);
        // Richardson: fourth-order accurate, so near-pole curvature does not swamp it
        let fdv = (4.0 * d2 - d1) / 3.0;
        prop_assert!((dv - fdv).abs() <= 1e-6 * dv.abs().max(1.0), "{e}: {dv} vs {fdv}");
    }

    #[test]
    fn psi_satisfies_its_ode(phi in phi_choice(), a in 0.5..2.0f64, lo in 0.2..2.0f64, u in 0.0..1.0f64) {
        let iv = Interval::new(lo, lo + 3.0).unwrap();
        let psi = psi_from_phi(&phi, a, iv).unwrap();
        let x = iv.lerp(0.001 + 0.998 * u);
        let lhs = psi.derivative().eval1(x).unwrap() * phi.eval1(x).unwrap();
        let rhs = psi.eval1(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn inverse_undoes_eval(which in 0usize..4, u in 0.01..0.99f64) {
        let f: Expr = ["(add (pow x 3) x)", "(exp x)", "(log x)", "(pow x -1)"][which].parse().unwrap();
        let (lo, hi) = (0.3, 4.0);
        let x = lo + (hi - lo) * u;
        let y = f.eval1(x).unwrap();
        let back = inverse(&f, y, (lo, hi)).unwrap();
        prop_assert!((back - x).abs() <= 1e-10 * x.abs());
    }

    #[test]
    fn structure_forms_agree_and_are_exactly_skew(spec in spec3(), u in unit_point()) {
        let x = at(&spec, u);
        let j = spec.structure_matrix(&x).unwrap();
        let alt = spec.structure_matrix_alt(&x).unwrap();
        for r in 0..3 {
            prop_assert_eq!(j.get(r, r), 0.0);
            for s in 0..3 {
                prop_assert_eq!(j.get(r, s), -j.get(s, r));
                prop_assert!((j.get(r, s) - alt.get(r, s)).abs() <= 1e-10 * j.get(r, s).abs().max(1e-300));
            }
        }
    }

    #[test]
    fn family_members_satisfy_jacobi(spec in spec3(), u in unit_point()) {
        let x = at(&spec, u);
        let r = jacobi_residual(&spec, &x).unwrap();
        prop_assert!(r.max_abs <= 1e-6 * r.scale, "{} vs scale {}", r.max_abs, r.scale);
        prop_assert_eq!(rank_at(&spec, &x).unwrap(), 2);
    }

    #[test]
    fn bracket_is_antisymmetric(spec in spec3(), u in unit_point(), f in expr1(), g in expr1()) {
        let x = at(&spec, u);
        let (f, g) = (f.compose(&Expr::coord(0)).mul(Expr::coord(2)), g.compose(&Expr::coord(1)));
        let (Ok(fg), Ok(gf)) = (bracket(&spec, &f, &g, &x), bracket(&spec, &g, &f, &x)) else { return Ok(()) };
        prop_assume!(fg.is_finite());
        prop_assert!((fg + gf).abs() <= 1e-10 * fg.abs().max(1e-300));
    }

    #[test]
    fn casimirs_are_annihilated_and_chart_round_trips(spec in spec3(), u in unit_point()) {
        let spec = Arc::new(spec);
        let x = at(&spec, u);
        let chart = DarbouxChart::new(spec.clone()).unwrap();
        let d = chart.casimirs().gradient_check(2, &x).unwrap();
        prop_assert!(d.max_abs <= 1e-6 * d.scale);
        prop_assert!(chart.round_trip_error(&x).unwrap() <= 1e-9);
        let psi: Vec<f64> = (0..3).map(|k| spec.psi(k, x[k]).unwrap()).collect();
        let psi_max = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // canonical form only where the chart is not close to degenerate
        if (psi[0] - psi[1]).abs() >= 0.05 * psi_max {
            let y = chart.forward(&x).unwrap();
            let dev = chart.canonical_check(&y).unwrap();
            prop_assert!(dev <= 1e-6, "canonical deviation {dev:e} at {x:?}");
        }
    }

    #[test]
    fn skew_matrices_have_even_rank(v in prop::collection::vec(-5.0..5.0f64, 6), zero in 0usize..7) {
        let mut m = nalgebra::DMatrix::zeros(4, 4);
        let mut it = v.into_iter();
        for i in 0..4 {
            for j in i + 1..4 {
                let e = it.next().unwrap();
                m[(i, j)] = e;
                m[(j, i)] = -e;
            }
        }
        if zero < 6 {
            m[(0, 1)] = 0.0;
            m[(1, 0)] = 0.0;
        }
        prop_assert!(numerical_rank(&m).is_multiple_of(2));
    }

    #[test]
    fn qp_pullback_holds(c in [prop_oneof![0.5..3.0f64, -3.0..-0.5f64], prop_oneof![0.5..3.0f64, -3.0..-0.5f64], prop_oneof![0.5..3.0f64, -3.0..-0.5f64]],
                         y in [0.3..3.0f64, 0.3..3.0f64, 0.3..3.0f64]) {
        prop_assert!(catalog::qp_pullback_check(c, &y).unwrap() <= 1e-8);
    }

    #[test]
    fn circle_map_casimirs_multiply_to_one(u in unit_point()) {
        let spec = Arc::new(catalog::make_circle_maps(None).unwrap());
        let x = at(&spec, u);
        let [c1, c2, c3] = catalog::circle_maps_casimirs(spec).unwrap();
        let p = c1.eval(0, &x).unwrap() * c2.eval(1, &x).unwrap() * c3.eval(2, &x).unwrap();
        prop_assert!((p - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn nlv_paths_agree(a in prop::collection::vec(0.5..2.0f64, 5), b in prop::collection::vec(-2.0..2.0f64, 5), u in prop::collection::vec(0.01..0.99f64, 5)) {
        let sys = catalog::make_nlv(&a, &b, None).unwrap();
        let x: Vec<f64> = (0..5).map(|k| sys.spec().domain().axis(k).lerp(u[k])).collect();
        prop_assert!(sys.two_path_deviation(&x).unwrap().unwrap() <= 1e-6);
    }
}
