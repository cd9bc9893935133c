//! Adder model in (size increment a, size x):
//! `∂t n + ∂a(g n) + ∂x(g n) + g(x) B(a) n = 0` for `x ≥ a`, with the birth boundary
//! `g(x) n(t, 0, x) = 2 ∫ J(y) h(x/y) dy/y` (or `4 J(2x)` under equal mitosis), where
//! `J(y) = g(y) ∫ B(a) n(t, a, y) da` is the division flux at size y.
//!
//! Both transport directions move at the same speed, so with `da = dx` the
//! characteristics run along the lattice diagonals and the exponentially fitted
//! upwind scheme of the mitosis solver applies along them.

use serde::{Deserialize, Serialize};

use super::grid::{trapezoid_weight, DensityGrid2D};
use super::march::{fragmentation_matrix, march, Scheme, SolverOptions, Stationary};
use super::model::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub a_max: f64,
    pub x_max: f64,
    pub n_a: usize,
    pub n_x: usize,
}

impl Default for Grid2D {
    fn default() -> Self {
        Grid2D {
            a_max: 6.0,
            x_max: 8.0,
            n_a: 300,
            n_x: 400,
        }
    }
}

impl Grid2D {
    pub fn new(a_max: f64, x_max: f64, n_a: usize, n_x: usize) -> Result<Self> {
        if !(a_max > 0.0 && x_max > 0.0) || n_a < 4 || n_x < 4 {
            return Err(Error::Config(format!(
                "invalid 2-D grid: [0, {a_max}] × [0, {x_max}], {n_a} × {n_x}"
            )));
        }
        Ok(Grid2D {
            a_max,
            x_max,
            n_a,
            n_x,
        })
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }

    pub fn of(d: &DensityGrid2D) -> Self {
        Grid2D {
            a_max: d.a_max,
            x_max: d.x_max,
            n_a: d.n_a,
            n_x: d.n_x,
        }
    }
}

pub(crate) struct AdderScheme {
    h: f64,
    n_a: usize,
    n_x: usize,
    g: Vec<f64>,
    inv_g: Vec<f64>,
    /// `exp(−h (B_i + B_{i−1}) / 2)`.
    row_decay: Vec<f64>,
    b: Vec<f64>,
    /// Per-node transport speed (g of the column), for the CFL limits.
    speed: Vec<f64>,
    /// Mass weights in (a, s = x − a) trapezoid form, times h².
    w: Vec<f64>,
    xw: Vec<f64>,
    frag: Option<Vec<f64>>,
    scratch: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl AdderScheme {
    pub(crate) fn new(spec: &ModelSpec, grid: Grid2D) -> Result<Self> {
        if !spec.family.is_adder() {
            return Err(Error::Config("solve_adder needs an adder model".into()));
        }
        let grid = Grid2D::new(grid.a_max, grid.x_max, grid.n_a, grid.n_x)?;
        let h = grid.dx();
        if (grid.da() - h).abs() > 1e-12 * h {
            return Err(Error::Config(format!(
                "the adder solver needs da = dx (got {} and {})",
                grid.da(),
                h
            )));
        }
        let (n_a, n_x) = (grid.n_a, grid.n_x);
        let g: Vec<f64> = (0..n_x).map(|j| spec.growth(j as f64 * h)).collect();
        let b: Vec<f64> = (0..n_a).map(|i| spec.division(i as f64 * h)).collect();
        let mut w = vec![0.0; n_a * n_x];
        let mut xw = vec![0.0; n_a * n_x];
        let half = |k: usize| if k == 0 { 0.5 } else { 1.0 };
        for i in 0..n_a {
            for j in i..n_x {
                let v = half(i) * half(j - i) * h * h;
                w[i * n_x + j] = v;
                xw[i * n_x + j] = v * j as f64 * h;
            }
        }
        let speed = (0..n_a).flat_map(|_| g.iter().cloned()).collect();
        let frag = if spec.kernel.is_dirac() {
            None
        } else {
            let tw: Vec<f64> = (0..n_x).map(|j| trapezoid_weight(j, n_x)).collect();
            Some(fragmentation_matrix(&spec.kernel, n_x, h, &tw))
        };
        Ok(AdderScheme {
            h,
            n_a,
            n_x,
            inv_g: g
                .iter()
                .map(|&g| if g > 0.0 { 1.0 / g } else { f64::INFINITY })
                .collect(),
            row_decay: (0..n_a)
                .map(|i| {
                    if i == 0 {
                        0.0
                    } else {
                        (-0.5 * h * (b[i] + b[i - 1])).exp()
                    }
                })
                .collect(),
            g,
            b,
            speed,
            w,
            xw,
            frag,
            scratch: std::cell::RefCell::new((vec![0.0; n_x], vec![0.0; n_x])),
        })
    }

    /// Division flux `J(x_j)` and birth flux `g(x) n(0, x)`.
    fn birth_flux(&self, n: &[f64], flux: &mut [f64], birth: &mut [f64]) {
        let (n_a, n_x, h) = (self.n_a, self.n_x, self.h);
        flux.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n_a {
            let bi = self.b[i];
            let half_i = if i == 0 { 0.5 } else { 1.0 };
            let row = &n[i * n_x..(i + 1) * n_x];
            for j in i..n_x {
                let half_s = if j == i { 0.5 } else { 1.0 };
                flux[j] += half_i * half_s * bi * row[j];
            }
        }
        for j in 0..n_x {
            flux[j] *= self.g[j] * h;
        }
        match &self.frag {
            None => {
                for j in 0..n_x {
                    birth[j] = if 2 * j < n_x { 4.0 * flux[2 * j] } else { 0.0 };
                }
            }
            Some(m) => {
                for j in 0..n_x {
                    let row = &m[j * n_x + j..(j + 1) * n_x];
                    birth[j] = 2.0 * row.iter().zip(&flux[j..]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}

impl Scheme for AdderScheme {
    fn len(&self) -> usize {
        self.n_a * self.n_x
    }
    fn speeds(&self) -> &[f64] {
        &self.speed
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
        let (n_a, n_x, h) = (self.n_a, self.n_x, self.h);
        let mut scratch = self.scratch.borrow_mut();
        let (flux, birth) = &mut *scratch;
        self.birth_flux(n, flux, birth);
        // exp(−κ) factors into a column part (λ/g) and a row part (B).
        let col: Vec<f64> = (0..n_x)
            .map(|j| {
                if j == 0 || self.inv_g[j].is_infinite() || self.inv_g[j - 1].is_infinite() {
                    0.0
                } else {
                    (-0.5 * h * lambda * (self.inv_g[j] + self.inv_g[j - 1])).exp()
                }
            })
            .collect();
        for j in 0..n_x {
            out[j] = if self.g[j] > 0.0 {
                birth[j] / self.g[j]
            } else {
                0.0
            };
        }
        for i in 1..n_a {
            let row_decay = self.row_decay[i];
            let row = i * n_x;
            let prev = (i - 1) * n_x;
            out[row..row + i.min(n_x)].iter_mut().for_each(|v| *v = 0.0);
            for j in i..n_x {
                let e = row_decay * col[j];
                let up = self.g[j - 1] * n[prev + j - 1];
                let k = row + j;
                out[k] = n[k] - tau[k] / h * (self.g[j] * n[k] - e * up);
            }
        }
    }
}

/// Normalized Gaussian bump on `x ≥ a` used as the default initial condition.
pub fn initial_bump_2d(grid: Grid2D) -> DensityGrid2D {
    let (ca, cx) = (grid.a_max / 6.0, grid.x_max / 4.0);
    let s = grid.a_max.min(grid.x_max) / 8.5;
    let mut d = DensityGrid2D::from_fn(grid.a_max, grid.x_max, grid.n_a, grid.n_x, |a, x| {
        if x >= a {
            (-((a - ca) * (a - ca) + (x - cx) * (x - cx)) / (2.0 * s * s)).exp()
        } else {
            0.0
        }
    });
    d.normalize().expect("bump has positive mass");
    d
}

/// Stationary adder density `N(a, x)` (zero for `x < a`).
pub fn solve_adder(
    spec: &ModelSpec,
    grid: Grid2D,
    opts: &SolverOptions,
) -> Result<Stationary<DensityGrid2D>> {
    let init = initial_bump_2d(Grid2D::new(grid.a_max, grid.x_max, grid.n_a, grid.n_x)?);
    solve_adder_from(spec, &init, 0.0, opts)
}

pub fn solve_adder_from(
    spec: &ModelSpec,
    init: &DensityGrid2D,
    lambda0: f64,
    opts: &SolverOptions,
) -> Result<Stationary<DensityGrid2D>> {
    let grid = Grid2D::of(init);
    let scheme = AdderScheme::new(spec, grid)?;
    let mut values = init.values.clone();
    for i in 0..grid.n_a {
        for j in 0..i.min(grid.n_x) {
            values[i * grid.n_x + j] = 0.0;
        }
    }
    let out = march(&scheme, values, lambda0, opts)?;
    let mut density = DensityGrid2D {
        a_max: grid.a_max,
        x_max: grid.x_max,
        n_a: grid.n_a,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelVariant;

    fn coarse() -> Grid2D {
        Grid2D::new(6.0, 8.0, 90, 120).unwrap()
    }

    #[test]
    fn support_is_above_the_diagonal() {
        let spec = ModelSpec::adder_case(1, KernelVariant::DiracHalf).unwrap();
        let sol = solve_adder(&spec, coarse(), &SolverOptions::default()).unwrap();
        let d = &sol.density;
        for i in 0..d.n_a {
            for j in 0..i.min(d.n_x) {
                assert_eq!(d.at(i, j), 0.0);
            }
        }
        assert!((d.mass() - 1.0).abs() < 1e-8);
        assert!((sol.lambda - 1.0).abs() < 0.02, "λ = {}", sol.lambda);
    }

    #[test]
    fn unequal_spacing_is_rejected() {
        let spec = ModelSpec::adder_case(1, KernelVariant::DiracHalf).unwrap();
        let g = Grid2D::new(6.0, 8.0, 100, 100).unwrap();
        assert!(solve_adder(&spec, g, &SolverOptions::default())
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn uniform_kernel_grows_at_unit_rate() {
        // With g = B = 1 every cell divides at rate one, so λ = 1 whatever the kernel.
        let spec = ModelSpec::adder_case(1, KernelVariant::Uniform).unwrap();
        let sol = solve_adder(&spec, coarse(), &SolverOptions::default()).unwrap();
        assert!((sol.lambda - 1.0).abs() < 0.02, "λ = {}", sol.lambda);
    }
}
