//! Size-structured mitosis model
//! `∂t n + ∂x(g n) + B n = 2 ∫ B(x/θ) n(x/θ) h(θ) dθ/θ`, with `n(t, 0) = 0`.
//!
//! Transport uses an exponentially fitted upwind box scheme: along each cell the loss
//! rate `(λ + B)/g` is integrated exactly, and the fragmentation source is averaged
//! over the two cell ends. The equal-mitosis source is `4 B(2x) n(2x)`.

use serde::{Deserialize, Serialize};

use super::grid::{trapezoid_weight, DensityGrid1D};
use super::march::{fragmentation_matrix, march, Scheme, SolverOptions, Stationary};
use super::model::{ModelFamily, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_max: f64,
    pub n_x: usize,
}

impl Default for Grid1D {
    fn default() -> Self {
        Grid1D {
            x_max: 10.0,
            n_x: 1000,
        }
    }
}

impl Grid1D {
    pub fn new(x_max: f64, n_x: usize) -> Result<Self> {
        if !(x_max > 0.0) || !x_max.is_finite() || n_x < 4 {
            return Err(Error::Config(format!(
                "invalid 1-D grid: x_max = {x_max}, n_x = {n_x}"
            )));
        }
        Ok(Grid1D { x_max, n_x })
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }

    pub fn of(d: &DensityGrid1D) -> Self {
        Grid1D {
            x_max: d.x_max,
            n_x: d.n_x,
        }
    }
}

pub(crate) struct MitosisScheme {
    h: f64,
    g: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    xw: Vec<f64>,
    /// Dense fragmentation matrix for absolutely continuous kernels.
    frag: Option<Vec<f64>>,
    scratch: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl MitosisScheme {
    pub(crate) fn new(spec: &ModelSpec, grid: Grid1D) -> Result<Self> {
        if spec.family.is_adder() {
            return Err(Error::Config("solve_mitosis needs a mitosis model".into()));
        }
        let grid = Grid1D::new(grid.x_max, grid.n_x)?;
        let n = grid.n_x;
        let h = grid.dx();
        let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let w: Vec<f64> = (0..n).map(|i| trapezoid_weight(i, n) * h).collect();
        let xw = x.iter().zip(&w).map(|(x, w)| x * w).collect();
        let frag = if spec.kernel.is_dirac() {
            None
        } else {
            let tw: Vec<f64> = (0..n).map(|i| trapezoid_weight(i, n)).collect();
            Some(fragmentation_matrix(&spec.kernel, n, h, &tw))
        };
        let (g, b) = match spec.family {
            ModelFamily::MitosisConstant => (vec![1.0; n], vec![spec.big_r; n]),
            _ => (
                x.iter().map(|&x| spec.growth(x)).collect(),
                x.iter().map(|&x| spec.division(x)).collect(),
            ),
        };
        Ok(MitosisScheme {
            h,
            g,
            b,
            w,
            xw,
            frag,
            scratch: std::cell::RefCell::new((vec![0.0; n], vec![0.0; n])),
        })
    }

    /// Fragmentation source at every node.
    fn gain(&self, n: &[f64], out: &mut [f64], div: &mut [f64]) {
        let len = n.len();
        for i in 0..len {
            div[i] = self.b[i] * n[i];
        }
        match &self.frag {
            None => {
                for i in 0..len {
                    out[i] = if 2 * i < len { 4.0 * div[2 * i] } else { 0.0 };
                }
            }
            Some(m) => {
                for i in 0..len {
                    let row = &m[i * len + i..(i + 1) * len];
                    out[i] = 2.0 * row.iter().zip(&div[i..]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}

impl Scheme for MitosisScheme {
    fn len(&self) -> usize {
        self.g.len()
    }
    fn speeds(&self) -> &[f64] {
        &self.g
    }
    fn spacing(&self) -> f64 {
        self.h
    }
    fn weights(&self) -> &[f64] {
        &self.w
    }
    fn moment_weights(&self) -> &[f64] {
        &self.xw
    }

    fn advance(&self, n: &[f64], tau: &[f64], lambda: f64, out: &mut [f64]) {
        let mut scratch = self.scratch.borrow_mut();
        let (gain, div) = &mut *scratch;
        self.gain(n, gain, div);
        let h = self.h;
        let rate = |i: usize| {
            if self.g[i] > 0.0 {
                (lambda + self.b[i]) / self.g[i]
            } else {
                f64::INFINITY
            }
        };
        out[0] = 0.0;
        let mut c_prev = rate(0);
        for i in 1..n.len() {
            let c = rate(i);
            let e = (-0.5 * h * (c + c_prev)).exp();
            c_prev = c;
            let flux = self.g[i] * n[i] - e * self.g[i - 1] * n[i - 1];
            out[i] = n[i] - tau[i] / h * flux + tau[i] * 0.5 * (gain[i] + e * gain[i - 1]);
        }
    }
}

/// Normalized Gaussian bump used as the default initial condition.
pub fn initial_bump_1d(grid: Grid1D) -> DensityGrid1D {
    let c = grid.x_max / 2.0;
    let s = grid.x_max / 14.0;
    let mut d = DensityGrid1D::from_fn(grid.x_max, grid.n_x, |x| {
        if x > 0.0 {
            (-(x - c) * (x - c) / (2.0 * s * s)).exp()
        } else {
            0.0
        }
    });
    d.normalize().expect("bump has positive mass");
    d
}

/// Stationary profile of the mitosis model and its Malthus eigenvalue.
pub fn solve_mitosis(
    spec: &ModelSpec,
    grid: Grid1D,
    opts: &SolverOptions,
) -> Result<Stationary<DensityGrid1D>> {
    let init = initial_bump_1d(Grid1D::new(grid.x_max, grid.n_x)?);
    solve_mitosis_from(spec, &init, 0.0, opts)
}

/// As [`solve_mitosis`] but starting from a given profile and eigenvalue guess.
pub fn solve_mitosis_from(
    spec: &ModelSpec,
    init: &DensityGrid1D,
    lambda0: f64,
    opts: &SolverOptions,
) -> Result<Stationary<DensityGrid1D>> {
    let grid = Grid1D::of(init);
    let scheme = MitosisScheme::new(spec, grid)?;
    let out = march(&scheme, init.values.clone(), lambda0, opts)?;
    if out.clamped * 1000 > grid.n_x * out.steps.max(1) {
        log::warn!("{} negative values clamped during the solve", out.clamped);
    }
    let mut density = DensityGrid1D {
        x_max: grid.x_max,
        n_x: grid.n_x,
        values: out.values,
    };
    density.normalize()?;
    Ok(Stationary {
        density,
        lambda: out.lambda,
        steps: out.steps,
        residual: out.residual,
        oscillation: out.oscillation,
        clamped: out.clamped,
        checkpoints: out.checkpoints,
    })
}
