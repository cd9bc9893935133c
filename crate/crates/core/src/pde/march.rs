//! Time marching shared by the mitosis and adder solvers.
//!
//! Each scheme exposes an explicit update with per-node step sizes. With global
//! stepping every node uses the same Δt; with local stepping each node uses its own
//! CFL-limited pseudo time step, which reaches the same stationary state much faster
//! when the growth rate varies over orders of magnitude. After every step the field
//! is renormalized to unit mass and the eigenvalue estimate λ is corrected from the
//! mass change, so the iteration converges to the pair (N, λ).

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stepping {
    #[default]
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Global time step. Defaults to `cfl * h / max g`.
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Convergence threshold on the stabilization residual.
    pub eps: f64,
    pub max_steps: usize,
    pub stepping: Stepping,
    /// Residuals are logged every `checkpoint_every` steps.
    pub checkpoint_every: usize,
    pub detect_oscillation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dt: None,
            cfl: 0.9,
            eps: 1e-6,
            max_steps: 1_000_000,
            stepping: Stepping::Global,
            checkpoint_every: 500,
            detect_oscillation: true,
        }
    }
}

impl SolverOptions {
    pub fn local() -> Self {
        SolverOptions {
            stepping: Stepping::Local,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "CFL factor must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "ε must be positive, got {}",
                self.eps
            )));
        }
        if self.max_steps == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config(
                "max_steps and checkpoint_every must be positive".into(),
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!(
                    "time step must be positive, got {dt}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a stationary solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationary<G> {
    pub density: G,
    /// Malthus eigenvalue, averaged over the last 100 steps.
    pub lambda: f64,
    pub steps: usize,
    pub residual: f64,
    /// Set when the residual stalled and the returned density is a period average.
    pub oscillation: bool,
    /// Number of node updates that produced negative values and were clamped to 0.
    pub clamped: usize,
    /// Residual at every checkpoint.
    pub checkpoints: Vec<f64>,
}

/// A discretized growth-fragmentation operator.
pub(crate) trait Scheme {
    fn len(&self) -> usize;
    /// Transport speed at each node (used for CFL limits).
    fn speeds(&self) -> &[f64];
    fn spacing(&self) -> f64;
    /// Quadrature weights (including the cell area) defining the mass.
    fn weights(&self) -> &[f64];
    /// Weights times the size coordinate, for the first moment.
    fn moment_weights(&self) -> &[f64];
    /// One explicit update with per-node steps `tau`, including boundary values.
    fn advance(&self, n: &[f64], tau: &[f64], lambda: f64, out: &mut [f64]);
}

pub(crate) struct Marched {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub steps: usize,
    pub residual: f64,
    pub oscillation: bool,
    pub clamped: usize,
    pub checkpoints: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mass-weighted mean step, so that local stepping measures growth per unit pseudo time.
fn mean_step(w: &[f64], n: &[f64], tau: &[f64]) -> f64 {
    w.iter()
        .zip(n)
        .zip(tau)
        .map(|((wi, ni), ti)| wi * ni * ti)
        .sum::<f64>()
        / dot(w, n)
}

fn step_sizes<S: Scheme>(scheme: &S, opts: &SolverOptions) -> Result<Vec<f64>> {
    let h = scheme.spacing();
    let speeds = scheme.speeds();
    let gmax = speeds.iter().cloned().fold(0.0, f64::max);
    if !(gmax > 0.0) || !gmax.is_finite() {
        return Err(Error::Config(format!(
            "growth rate must be positive somewhere (max {gmax})"
        )));
    }
    match opts.stepping {
        Stepping::Global => {
            let dt = opts.dt.unwrap_or(opts.cfl * h / gmax);
            let courant = dt * gmax / h;
            if courant > 1.0 + 1e-12 {
                return Err(Error::Config(format!(
                    "CFL condition violated: dt·max(g)/dx = {courant:.4} > 1"
                )));
            }
            Ok(vec![dt; scheme.len()])
        }
        Stepping::Local => {
            let cap = opts.cfl * h / gmax * 1e12;
            Ok(speeds
                .iter()
                .map(|&g| {
                    if g > 0.0 {
                        (opts.cfl * h / g).min(cap)
                    } else {
                        cap
                    }
                })
                .collect())
        }
    }
}

/// Marches `init` to stationarity.
pub(crate) fn march<S: Scheme>(
    scheme: &S,
    init: Vec<f64>,
    lambda0: f64,
    opts: &SolverOptions,
) -> Result<Marched> {
    opts.validate()?;
    let tau = step_sizes(scheme, opts)?;
    let w = scheme.weights();
    let len = scheme.len();
    assert_eq!(init.len(), len);

    let mut n = init;
    let m0 = dot(w, &n);
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(Error::Instability(format!(
            "initial mass {m0} is not positive"
        )));
    }
    n.iter_mut().for_each(|v| *v /= m0);

    let mut next = vec![0.0; len];
    let mut lambda = lambda0;
    let mut recent_lambda = std::collections::VecDeque::with_capacity(100);
    let mut clamped = 0usize;
    let mut checkpoints = Vec::new();
    let mut window_min = f64::INFINITY;
    let mut prev_window_min = f64::INFINITY;
    let mut stalled_windows = 0usize;
    let mut residual = f64::INFINITY;
    let every = opts.checkpoint_every;

    for step in 1..=opts.max_steps {
        scheme.advance(&n, &tau, lambda, &mut next);
        for v in next.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-14 {
                    clamped += 1;
                }
                *v = 0.0;
            }
        }
        let m = dot(w, &next);
        if !(m > 1e-12) || !m.is_finite() {
            return Err(Error::Instability(format!(
                "mass collapsed to {m:e} at step {step} (λ = {lambda})"
            )));
        }
        let tau_bar = mean_step(w, &n, &tau);
        next.iter_mut().for_each(|v| *v /= m);
        // Without death the Malthus parameter is positive; a transiently negative
        // estimate would overflow exp(−λ/g) where g vanishes.
        lambda = (lambda + m.ln() / tau_bar).max(0.0);
        if recent_lambda.len() == 100 {
            recent_lambda.pop_front();
        }
        recent_lambda.push_back(lambda);

        residual = n
            .iter()
            .zip(&next)
            .zip(&tau)
            .map(|((a, b), t)| (a - b).abs() / t)
            .sum::<f64>();
        std::mem::swap(&mut n, &mut next);
        if !residual.is_finite() {
            return Err(Error::Instability(format!(
                "non-finite residual at step {step}"
            )));
        }
        window_min = window_min.min(residual);

        if residual < opts.eps {
            checkpoints.push(residual);
            debug!("converged after {step} steps, λ = {lambda}");
            let lam = recent_lambda.iter().sum::<f64>() / recent_lambda.len() as f64;
            return Ok(Marched {
                values: n,
                lambda: lam,
                steps: step,
                residual,
                oscillation: false,
                clamped,
                checkpoints,
            });
        }

        if step % every == 0 {
            checkpoints.push(residual);
            if window_min >= prev_window_min * (1.0 - 1e-3) {
                stalled_windows += 1;
            } else {
                stalled_windows = 0;
            }
            prev_window_min = window_min;
            window_min = f64::INFINITY;
            if opts.detect_oscillation && stalled_windows >= 4 && step >= 10 * every {
                warn!("oscillation suspected after {step} steps (residual {residual:e}); averaging over one period");
                return period_average(scheme, n, &tau, lambda, step, opts, clamped, checkpoints);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_steps,
        residual,
        history: checkpoints,
    })
}

/// Continues the march, detects the period from the first moment and returns the
/// density averaged over one period.
#[allow(clippy::too_many_arguments)]
fn period_average<S: Scheme>(
    scheme: &S,
    mut n: Vec<f64>,
    tau: &[f64],
    mut lambda: f64,
    step0: usize,
    opts: &SolverOptions,
    mut clamped: usize,
    checkpoints: Vec<f64>,
) -> Result<Marched> {
    let w = scheme.weights();
    let mw = scheme.moment_weights();
    let len = scheme.len();
    let mut next = vec![0.0; len];
    let probe = 8 * opts.checkpoint_every;
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(probe);
    let mut moments = Vec::with_capacity(probe);
    let mut lambdas = Vec::with_capacity(probe);
    for _ in 0..probe {
        scheme.advance(&n, tau, lambda, &mut next);
        for v in next.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-14 {
                    clamped += 1;
                }
                *v = 0.0;
            }
        }
        let m = dot(w, &next);
        if !(m > 1e-12) || !m.is_finite() {
            return Err(Error::Instability(
                "mass collapsed while averaging an oscillation".into(),
            ));
        }
        let tau_bar = mean_step(w, &n, tau);
        next.iter_mut().for_each(|v| *v /= m);
        lambda = (lambda + m.ln() / tau_bar).max(0.0);
        std::mem::swap(&mut n, &mut next);
        moments.push(dot(mw, &n));
        lambdas.push(lambda);
        history.push(n.clone());
    }
    let peaks: Vec<usize> = (1..moments.len() - 1)
        .filter(|&k| moments[k] > moments[k - 1] && moments[k] >= moments[k + 1])
        .collect();
    if peaks.len() < 2 {
        return Err(Error::NoConvergence {
            iterations: step0 + probe,
            residual: f64::NAN,
            history: checkpoints,
        });
    }
    let (start, end) = (peaks[peaks.len() - 2], peaks[peaks.len() - 1]);
    let period = end - start;
    let mut avg = vec![0.0; len];
    for snap in &history[start..end] {
        avg.iter_mut().zip(snap).for_each(|(a, s)| *a += s);
    }
    let m = dot(w, &avg);
    avg.iter_mut().for_each(|v| *v /= m);
    let lam = lambdas[start..end].iter().sum::<f64>() / period as f64;
    Ok(Marched {
        values: avg,
        lambda: lam,
        steps: step0 + probe,
        residual: f64::NAN,
        oscillation: true,
        clamped,
        checkpoints,
    })
}

/// Column-normalized quadrature matrix for `∫ h(x/y) D(y) dy / y` on a uniform grid.
///
/// Entry `(i, j)` approximates `h(x_i / y_j) / y_j` times the y-quadrature weight; each
/// column is scaled so that `Σ_i w_i M_ij = 1`, which makes the discrete fragmentation
/// operator conserve the number of fragments exactly. Stored densely in row-major order
/// and zero for `x_i > y_j`.
pub(crate) fn fragmentation_matrix(
    kernel: &crate::kernels::KernelSpec,
    n: usize,
    h: f64,
    w: &[f64],
) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for j in 1..n {
        let y = j as f64 * h;
        let mut col = 0.0;
        for i in 0..=j {
            let v = kernel.eval_unchecked((i as f64 * h / y).min(1.0)) / y;
            m[i * n + j] = v;
            col += w[i] * v;
        }
        if col > 0.0 {
            for i in 0..=j {
                m[i * n + j] /= col;
            }
        }
    }
    m
}
