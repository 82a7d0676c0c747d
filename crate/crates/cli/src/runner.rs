//! Executes a resolved scenario and assembles the report.

use anyhow::Result;

use poisfam::{
    integrate, jacobi_sweep, rank_histogram, sample_box, DarbouxChart, Error, IntegrationOptions, PoissonSystem,
    TrajectoryRecord,
};

use crate::report::{self, Check, Integration, Reduction, Report, SystemInfo, Verification};
use crate::scenario::{Built, Resolved, SchemaError};

pub const JACOBI_TOL: f64 = 1e-6;
pub const CASIMIR_TOL: f64 = 1e-6;
pub const TWO_PATH_TOL: f64 = 1e-6;
pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const CANONICAL_TOL: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 1e-6;

const TWO_PATH_POINTS: usize = 100;
const CHART_POINTS: usize = 200;

fn center(built: &Built) -> Vec<f64> {
    built.spec.domain().axes().iter().map(|iv| iv.lerp(0.5)).collect()
}

fn point_arg(v: &Option<Vec<f64>>, built: &Built, what: &str) -> Result<Vec<f64>, SchemaError> {
    match v {
        None => Ok(center(built)),
        Some(x) if x.len() == built.spec.dim() => Ok(x.clone()),
        Some(x) => Err(SchemaError(format!(
            "{what} has {} entries, expected {}",
            x.len(),
            built.spec.dim()
        ))),
    }
}

/// Scenario-level validation that needs the built system; runs before any work.
pub fn precheck(r: &Resolved, built: &Built) -> Result<(), SchemaError> {
    if r.action.reduces() {
        point_arg(&r.x, built, "x")?;
    }
    if r.action.integrates() {
        if built.system.is_none() {
            return Err(SchemaError(format!(
                "{} has no hamiltonian; integration needs one",
                built.name
            )));
        }
        point_arg(&r.x0, built, "x0")?;
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return Err(SchemaError(format!(
                "t_end must be positive and finite, got {}",
                r.t_end
            )));
        }
    }
    Ok(())
}

pub fn run(r: &Resolved, built: &Built) -> Result<Report> {
    let spec = &built.spec;
    let (i, j) = spec.pair();
    let mut report = Report {
        system: SystemInfo {
            name: built.name.clone(),
            dim: spec.dim(),
            pair: [i + 1, j + 1],
            domain: spec.domain().axes().iter().map(|iv| [iv.lo, iv.hi]).collect(),
            eta: spec.eta().to_string(),
            hamiltonian: built.hamiltonian.clone(),
        },
        action: r.action.name().into(),
        points: r.points,
        seed: r.seed,
        verification: None,
        reduction: None,
        integration: None,
        checks: Vec::new(),
        passed: false,
    };
    let pts = sample_box(spec.domain(), r.points, r.seed);
    if r.action.verifies() {
        report.verification = Some(verify(built, &pts, &mut report.checks));
    }
    if r.action.reduces() {
        let x = point_arg(&r.x, built, "x")?;
        report.reduction = Some(reduce(built, &x, &pts, &mut report.checks));
    }
    if r.action.integrates() {
        let x0 = point_arg(&r.x0, built, "x0")?;
        let sys = built.system.as_ref().expect("checked by precheck");
        let (info, rec) = run_integration(r, sys, &x0, &mut report.checks);
        if let Some(rec) = rec {
            report::write_trajectory(&r.out, &rec)?;
        }
        report.integration = Some(info);
    }
    report.passed = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

fn verify(built: &Built, pts: &[Vec<f64>], checks: &mut Vec<Check>) -> Verification {
    let spec = built.spec.as_ref();
    let mut v = Verification::default();

    match jacobi_sweep(spec, pts) {
        Ok(s) => {
            v.jacobi_max_normalized = s.max_normalized;
            v.jacobi_max_abs = s.max_abs;
            v.jacobi_worst_point = s.worst_point;
            v.one_sided_points = s.one_sided;
            checks.push(Check::at_most("jacobi_residual", s.max_normalized, JACOBI_TOL));
        }
        Err(e) => checks.push(Check::failed("jacobi_residual", JACOBI_TOL, e)),
    }

    match rank_histogram(spec, pts) {
        Ok(h) => {
            let off = h
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != 2)
                .map(|(_, c)| c)
                .sum::<usize>();
            v.rank_histogram = h;
            checks.push(Check::at_most("rank_not_two", off as f64, 0.0));
        }
        Err(e) => checks.push(Check::failed("rank_not_two", 0.0, e)),
    }

    let mut grad: poisfam::Result<f64> = Ok(0.0);
    let mut indep: poisfam::Result<(f64, usize)> = Ok((f64::INFINITY, 0));
    for set in &built.casimir_sets {
        for x in pts {
            for &k in set.indices() {
                grad = grad.and_then(|m| Ok(m.max(set.gradient_check(k, x)?.normalized())));
            }
            indep = indep.and_then(|(m, bad)| {
                let d = set.independence(x)?;
                Ok((m.min(d.min_scaled_diagonal), bad + !d.nonsingular as usize))
            });
        }
    }
    match grad {
        Ok(m) => {
            v.casimir_gradient_max_normalized = m;
            checks.push(Check::at_most("casimir_gradient", m, CASIMIR_TOL));
        }
        Err(e) => checks.push(Check::failed("casimir_gradient", CASIMIR_TOL, e)),
    }
    match indep {
        Ok((m, bad)) => {
            v.casimir_independence_min = if m.is_finite() { m } else { 0.0 };
            checks.push(Check::at_most("casimir_dependent_points", bad as f64, 0.0));
        }
        Err(e) => checks.push(Check::failed("casimir_dependent_points", 0.0, e)),
    }

    if let Some(sys) = built.system.as_ref().filter(|s| s.has_explicit_field()) {
        let mut worst: poisfam::Result<f64> = Ok(0.0);
        for x in pts.iter().take(TWO_PATH_POINTS) {
            worst = worst.and_then(|m| Ok(m.max(sys.two_path_deviation(x).expect("explicit field present")?)));
        }
        match worst {
            Ok(m) => {
                v.two_path_max = Some(m);
                checks.push(Check::at_most("two_path", m, TWO_PATH_TOL));
            }
            Err(e) => checks.push(Check::failed("two_path", TWO_PATH_TOL, e)),
        }
    }
    v
}

fn reduce(built: &Built, x: &[f64], pts: &[Vec<f64>], checks: &mut Vec<Check>) -> Reduction {
    let mut red = Reduction {
        x: x.to_vec(),
        ..Default::default()
    };
    let chart = match DarbouxChart::new(built.spec.clone()) {
        Ok(c) => c,
        Err(e) => {
            checks.push(Check::failed("chart", 0.0, e));
            return red;
        }
    };
    let at_x = chart.forward(x).and_then(|y| {
        let f = chart.reparam_factor(&y)?;
        let dev = chart.canonical_check(&y)?;
        Ok((y, f, dev))
    });
    match at_x {
        Ok((y, f, dev)) => {
            red.y = y;
            red.reparam_factor = f;
            red.canonical_deviation = dev;
            checks.push(Check::at_most("canonical_at_x", dev, CANONICAL_TOL));
        }
        Err(e) => checks.push(Check::failed("canonical_at_x", CANONICAL_TOL, e)),
    }

    let sample = &pts[..pts.len().min(CHART_POINTS)];
    red.chart_points = sample.len();
    let mut trip: poisfam::Result<f64> = Ok(0.0);
    let mut canon: poisfam::Result<f64> = Ok(0.0);
    for p in sample {
        trip = trip.and_then(|m| Ok(m.max(chart.round_trip_error(p)?)));
        canon = canon.and_then(|m| Ok(m.max(chart.canonical_check(&chart.forward(p)?)?)));
    }
    match trip {
        Ok(m) => {
            red.round_trip_max = m;
            checks.push(Check::at_most("round_trip", m, ROUND_TRIP_TOL));
        }
        Err(e) => checks.push(Check::failed("round_trip", ROUND_TRIP_TOL, e)),
    }
    match canon {
        Ok(m) => {
            red.canonical_max = m;
            checks.push(Check::at_most("canonical", m, CANONICAL_TOL));
        }
        Err(e) => checks.push(Check::failed("canonical", CANONICAL_TOL, e)),
    }
    red
}

fn run_integration(
    r: &Resolved,
    sys: &PoissonSystem,
    x0: &[f64],
    checks: &mut Vec<Check>,
) -> (Integration, Option<TrajectoryRecord>) {
    let mut info = Integration {
        x0: x0.to_vec(),
        t_end: r.t_end,
        rtol: r.rtol,
        atol: r.atol,
        trajectory: report::TRAJECTORY_FILE.into(),
        ..Default::default()
    };
    let opts = IntegrationOptions::tolerances(r.rtol, r.atol);
    let rec = match integrate(sys, x0, r.t_end, &opts) {
        Ok(rec) => {
            info.status = "finished".into();
            checks.push(Check::at_most("integration_completed", 0.0, 0.0));
            rec
        }
        Err(e) => {
            info.status = match &e {
                Error::DomainExit { .. } => "domain-exit",
                Error::StepSizeUnderflow { .. } => "step-underflow",
                Error::MaxSteps(_) => "max-steps",
                _ => "error",
            }
            .into();
            let partial = e.partial_trajectory().cloned();
            checks.push(Check::failed("integration_completed", 0.0, &e));
            match partial {
                Some(p) => p,
                None => {
                    info.trajectory.clear();
                    return (info, None);
                }
            }
        }
    };
    info.t_reached = rec.times.last().copied().unwrap_or(0.0);
    info.steps_accepted = rec.stats.accepted;
    info.steps_rejected = rec.stats.rejected;
    info.hamiltonian_drift = rec.hamiltonian_drift();
    checks.push(Check::at_most("hamiltonian_drift", info.hamiltonian_drift, DRIFT_TOL));
    for (k, d) in rec.casimir_indices.iter().zip(rec.casimir_drifts()) {
        let name = format!("C{}", k + 1);
        checks.push(Check::at_most(format!("casimir_drift_{name}"), d, DRIFT_TOL));
        info.casimir_drifts.insert(name, d);
    }
    (info, Some(rec))
}
