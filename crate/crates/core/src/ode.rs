//! Adaptive Dormand–Prince 5(4) integration.
//!
//! The right-hand side may fail (for instance when a stage point leaves the
//! domain); such a step is rejected and retried with a smaller step. When
//! the step collapses because of repeated failures the run ends with
//! [`Stop::DomainExit`]; when it collapses because of the error estimate
//! it ends with [`Stop::Underflow`].

use crate::error::Result;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; estimated from the field when `None`.
    pub h0: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            h0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections caused by a failing right-hand side rather than the error test.
    pub failed_evaluations: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stop {
    Finished,
    DomainExit { t: f64 },
    Underflow { t: f64, h: f64 },
    MaxSteps,
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &SolverOptions) -> f64 {
    let s: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / y.len().max(1) as f64).sqrt()
}

fn initial_step(y: &[f64], f0: &[f64], span: f64, opts: &SolverOptions) -> f64 {
    let sc = |v: f64| opts.atol + opts.rtol * v.abs();
    let d0 = (y.iter().map(|v| (v / sc(*v)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let d1 = (y.iter().zip(f0).map(|(v, f)| (f / sc(*v)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs())
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `observe` sees the initial state and every accepted step.
pub fn solve<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
    mut observe: O,
) -> Result<(Stop, StepStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    observe(t, &y)?;
    if t_end == t0 {
        return Ok((Stop::Finished, stats));
    }
    let dir = (t_end - t0).signum();
    let mut k0 = f(t, &y)?;
    stats.evaluations += 1;
    let mut h = opts
        .h0
        .map_or_else(|| initial_step(&y, &k0, t_end - t0, opts), f64::abs);
    let mut last_failure_was_domain = false;
    let mut k = vec![vec![0.0; n]; 7];
    let mut y_stage = vec![0.0; n];

    loop {
        if stats.accepted >= opts.max_steps {
            return Ok((Stop::MaxSteps, stats));
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            let stop = if last_failure_was_domain {
                Stop::DomainExit { t }
            } else {
                Stop::Underflow { t, h }
            };
            return Ok((stop, stats));
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = dir * step;

        k[0].clone_from(&k0);
        let mut failed = false;
        for s in 1..7 {
            for r in 0..n {
                let mut acc = 0.0;
                for (q, kq) in k.iter().enumerate().take(s) {
                    acc += A[s][q] * kq[r];
                }
                y_stage[r] = y[r] + hs * acc;
            }
            stats.evaluations += 1;
            match f(t + C[s] * hs, &y_stage) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            stats.rejected += 1;
            stats.failed_evaluations += 1;
            last_failure_was_domain = true;
            h = step * 0.25;
            continue;
        }
        // the seventh stage is evaluated at the fifth-order solution
        let y_new = y_stage.clone();
        let err: Vec<f64> = (0..n)
            .map(|r| hs * (0..7).map(|s| E[s] * k[s][r]).sum::<f64>())
            .collect();
        let en = error_norm(&y, &y_new, &err, opts);
        let factor = if en == 0.0 {
            10.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 10.0)
        };
        if en <= 1.0 {
            t = if last { t_end } else { t + hs };
            y = y_new;
            k0.clone_from(&k[6]);
            stats.accepted += 1;
            observe(t, &y)?;
            if last {
                return Ok((Stop::Finished, stats));
            }
            last_failure_was_domain = false;
            h = step * factor;
        } else {
            stats.rejected += 1;
            last_failure_was_domain = false;
            h = step * factor.min(1.0);
        }
    }
}
