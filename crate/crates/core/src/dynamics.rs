//! Poisson systems `ẋ = J(x)·∇H(x)` and their Darboux-reduced form.

use std::fmt;
use std::sync::Arc;

use crate::casimir::CasimirSet;
use crate::darboux::DarbouxChart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::family::PoissonFamilySpec;
use crate::halton;
use crate::ode::{self, SolverOptions, StepStats, Stop};

/// Points used to validate an explicit vector field against `J·∇H`.
pub const TWO_PATH_POINTS: usize = 100;
/// Relative tolerance of that validation.
pub const TWO_PATH_TOL: f64 = 1e-6;

pub type FieldFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// `max|a − b| / max(|a|∞, |b|∞)`, zero when both vanish.
pub fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Clone)]
pub struct PoissonSystem {
    spec: Arc<PoissonFamilySpec>,
    hamiltonian: Expr,
    grad: Vec<Expr>,
    explicit: Option<FieldFn>,
    casimirs: CasimirSet,
}

impl fmt::Debug for PoissonSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonSystem")
            .field("spec", &self.spec)
            .field("hamiltonian", &self.hamiltonian)
            .field("explicit", &self.explicit.is_some())
            .finish()
    }
}

impl PoissonSystem {
    pub fn new(spec: Arc<PoissonFamilySpec>, hamiltonian: Expr) -> Result<Self> {
        let n = spec.dim();
        if hamiltonian.uses_x() || hamiltonian.max_coord().is_some_and(|m| m >= n) {
            return Err(Error::InvalidSpec(format!("Hamiltonian must be written in x1..x{n}")));
        }
        let grad = hamiltonian.gradient(n);
        let casimirs = CasimirSet::new(spec.clone());
        Ok(PoissonSystem {
            spec,
            hamiltonian,
            grad,
            explicit: None,
            casimirs,
        })
    }

    /// Attach an explicit right-hand side after checking it against `J·∇H`
    /// at [`TWO_PATH_POINTS`] Halton points of the domain.
    pub fn with_explicit_field(mut self, field: FieldFn) -> Result<Self> {
        for x in halton::sample_box(self.spec.domain(), TWO_PATH_POINTS, 0) {
            let a = self.vector_field(&x)?;
            let b = field(&x)?;
            let d = relative_deviation(&a, &b);
            if !(d <= TWO_PATH_TOL) {
                return Err(Error::InvalidSpec(format!(
                    "explicit field disagrees with J·grad H at {x:?} (relative deviation {d:e})"
                )));
            }
        }
        self.explicit = Some(field);
        Ok(self)
    }

    pub fn spec(&self) -> &Arc<PoissonFamilySpec> {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    pub fn casimirs(&self) -> &CasimirSet {
        &self.casimirs
    }

    pub fn has_explicit_field(&self) -> bool {
        self.explicit.is_some()
    }

    pub fn hamiltonian_at(&self, x: &[f64]) -> Result<f64> {
        self.hamiltonian.eval(x)
    }

    pub fn grad_hamiltonian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    /// `J(x)·∇H(x)` with the symbolic gradient.
    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        let j = self.spec.structure_matrix(x)?;
        let g = self.grad_hamiltonian(x)?;
        let n = self.dim();
        Ok((0..n).map(|r| (0..n).map(|s| j.get(r, s) * g[s]).sum()).collect())
    }

    pub fn explicit_field(&self, x: &[f64]) -> Option<Result<Vec<f64>>> {
        let f = self.explicit.as_ref()?;
        Some(self.spec.check_point(x).and_then(|_| f(x)))
    }

    /// Relative deviation between the two vector-field paths, `None`
    /// without an explicit field.
    pub fn two_path_deviation(&self, x: &[f64]) -> Option<Result<f64>> {
        let b = self.explicit_field(x)?;
        Some(b.and_then(|b| Ok(relative_deviation(&self.vector_field(x)?, &b))))
    }

    pub fn field(&self, x: &[f64], source: FieldSource) -> Result<Vec<f64>> {
        match (source, &self.explicit) {
            (FieldSource::Explicit, Some(_)) => self.explicit_field(x).expect("checked"),
            (FieldSource::Explicit, None) => Err(Error::InvalidSpec("system has no explicit field".into())),
            (FieldSource::Poisson, _) => self.vector_field(x),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FieldSource {
    /// `J·∇H`.
    #[default]
    Poisson,
    Explicit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationOptions {
    pub solver: SolverOptions,
    pub source: FieldSource,
}

impl IntegrationOptions {
    pub fn tolerances(rtol: f64, atol: f64) -> Self {
        IntegrationOptions {
            solver: SolverOptions {
                rtol,
                atol,
                ..SolverOptions::default()
            },
            ..Self::default()
        }
    }
}

/// Accepted steps of one run.
///
/// For reduced runs `times` holds `τ`, `states` the chart coordinates, and
/// `original_times` / `original_states` the matching `t` and `x(y)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub hamiltonian: Vec<f64>,
    /// One row per step, ordered as `casimir_indices`.
    pub casimirs: Vec<Vec<f64>>,
    pub casimir_indices: Vec<usize>,
    pub original_times: Option<Vec<f64>>,
    pub original_states: Option<Vec<Vec<f64>>>,
    pub stats: StepStats,
}

fn drift(series: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for v in series {
        let v0 = *first.get_or_insert(v);
        worst = worst.max((v - v0).abs() / v0.abs().max(1.0));
    }
    worst
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// `max_t |H(t) − H(0)| / max(1, |H(0)|)`.
    pub fn hamiltonian_drift(&self) -> f64 {
        drift(self.hamiltonian.iter().copied())
    }

    /// Drift of each Casimir, in the order of `casimir_indices`.
    pub fn casimir_drifts(&self) -> Vec<f64> {
        (0..self.casimir_indices.len())
            .map(|c| drift(self.casimirs.iter().map(|row| row[c])))
            .collect()
    }

    pub fn max_drift(&self) -> f64 {
        self.casimir_drifts()
            .into_iter()
            .fold(self.hamiltonian_drift(), f64::max)
    }
}

fn finish(stop: Stop, stats: StepStats, mut rec: TrajectoryRecord) -> Result<TrajectoryRecord> {
    rec.stats = stats;
    match stop {
        Stop::Finished => Ok(rec),
        Stop::DomainExit { t } => Err(Error::DomainExit {
            t,
            last_state: rec.states.last().cloned().unwrap_or_default(),
            partial: Box::new(rec),
        }),
        Stop::Underflow { t, h } => Err(Error::StepSizeUnderflow {
            t,
            h,
            partial: Box::new(rec),
        }),
        Stop::MaxSteps => Err(Error::MaxSteps(stats.accepted)),
    }
}

fn solve_full(
    sys: &PoissonSystem,
    x0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord> {
    sys.spec.check_point(x0)?;
    let mut rec = TrajectoryRecord {
        casimir_indices: sys.casimirs.indices().to_vec(),
        ..Default::default()
    };
    let (stop, stats) = ode::solve(
        |_, x| sys.field(x, opts.source),
        t0,
        x0,
        t1,
        &opts.solver,
        |t, x| {
            rec.hamiltonian.push(sys.hamiltonian_at(x)?);
            rec.casimirs.push(sys.casimirs.eval_all(x)?);
            rec.times.push(t);
            rec.states.push(x.to_vec());
            Ok(())
        },
    )?;
    finish(stop, stats, rec)
}

/// Integrate from `x0` over `[0, t_end]`, recording `H` and every Casimir
/// at each accepted step. Leaving the domain aborts with the partial record.
pub fn integrate(sys: &PoissonSystem, x0: &[f64], t_end: f64, opts: &IntegrationOptions) -> Result<TrajectoryRecord> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    solve_full(sys, x0, 0.0, t_end, opts)
}

fn check_chart(sys: &PoissonSystem, chart: &DarbouxChart) -> Result<()> {
    if Arc::ptr_eq(sys.spec(), chart.spec()) {
        Ok(())
    } else {
        Err(Error::InvalidSpec("chart was built for a different spec".into()))
    }
}

/// Right-hand side of the reduced flow in `(y_i, y_j, t)`.
fn reduced_rhs(sys: &PoissonSystem, chart: &DarbouxChart, y: &[f64]) -> Result<[f64; 3]> {
    let (i, j) = chart.pair();
    let x = chart.inverse(y)?;
    let dx = chart.inverse_jacobian(y)?;
    let g = sys.grad_hamiltonian(&x)?;
    let dh = |m: usize| (0..y.len()).map(|r| g[r] * dx[(r, m)]).sum::<f64>();
    let mu_inv = chart.reparam_factor(y)?;
    Ok([dh(j), -dh(i), 1.0 / mu_inv])
}

/// Integrate `dy/dτ = J_D·∇H*(y)` together with `dt/dτ = 1/J_ij(x(y))`.
/// Only `y_i` and `y_j` move; the remaining coordinates are copied from `y0`.
pub fn integrate_reduced(
    sys: &PoissonSystem,
    chart: &DarbouxChart,
    y0: &[f64],
    tau_end: f64,
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord> {
    check_chart(sys, chart)?;
    if !tau_end.is_finite() {
        return Err(Error::InvalidSpec(format!("tau_end must be finite, got {tau_end}")));
    }
    chart.inverse(y0)?;
    let (i, j) = chart.pair();
    let assemble = |z: &[f64]| {
        let mut y = y0.to_vec();
        y[i] = z[0];
        y[j] = z[1];
        y
    };
    let mut rec = TrajectoryRecord {
        casimir_indices: sys.casimirs.indices().to_vec(),
        original_times: Some(Vec::new()),
        original_states: Some(Vec::new()),
        ..Default::default()
    };
    let (stop, stats) = ode::solve(
        |_, z| reduced_rhs(sys, chart, &assemble(z)).map(Vec::from),
        0.0,
        &[y0[i], y0[j], 0.0],
        tau_end,
        &opts.solver,
        |tau, z| {
            let y = assemble(z);
            let x = chart.inverse(&y)?;
            rec.hamiltonian.push(sys.hamiltonian_at(&x)?);
            rec.casimirs.push(sys.casimirs.eval_all(&x)?);
            rec.times.push(tau);
            rec.states.push(y);
            rec.original_times.as_mut().expect("set above").push(z[2]);
            rec.original_states.as_mut().expect("set above").push(x);
            Ok(())
        },
    )?;
    finish(stop, stats, rec)
}

/// Agreement between a reduced run and the original flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedConsistency {
    /// Largest relative deviation of `C_k(x(y(τ)))` from `y0_k`.
    pub casimir_level: f64,
    /// Largest relative drift of `H(x(y(τ)))`.
    pub hamiltonian_level: f64,
    /// Largest relative distance between `x(y(τ))` and the original flow
    /// evaluated at the matching time `t(τ)`.
    pub state: f64,
    pub compared: usize,
}

impl ReducedConsistency {
    pub fn max(&self) -> f64 {
        self.casimir_level.max(self.hamiltonian_level).max(self.state)
    }
}

/// Reduced run followed by the original flow through the matching times.
pub fn reduced_consistency(
    sys: &PoissonSystem,
    chart: &DarbouxChart,
    y0: &[f64],
    tau_end: f64,
    opts: &IntegrationOptions,
) -> Result<ReducedConsistency> {
    const SAMPLES: usize = 20;
    let rec = integrate_reduced(sys, chart, y0, tau_end, opts)?;
    let idx = sys.casimirs.indices();
    let mut casimir_level: f64 = 0.0;
    for row in &rec.casimirs {
        for (c, &k) in idx.iter().enumerate() {
            casimir_level = casimir_level.max((row[c] - y0[k]).abs() / y0[k].abs().max(1.0));
        }
    }
    let ts = rec.original_times.as_ref().expect("reduced record");
    let xs = rec.original_states.as_ref().expect("reduced record");
    let stride = (rec.len() / SAMPLES).max(1);
    let mut t_prev = 0.0;
    let mut x = xs[0].clone();
    let mut state: f64 = 0.0;
    let mut compared = 0;
    for s in (stride..rec.len()).step_by(stride) {
        let seg = solve_full(sys, &x, t_prev, ts[s], opts)?;
        x = seg.final_state().expect("nonempty").to_vec();
        t_prev = ts[s];
        state = state.max(relative_deviation(&x, &xs[s]));
        compared += 1;
    }
    Ok(ReducedConsistency {
        casimir_level,
        hamiltonian_level: rec.hamiltonian_drift(),
        state,
        compared,
    })
}
