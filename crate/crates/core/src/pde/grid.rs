//! Tabulated densities on uniform grids.
//!
//! Nodes sit at `x_i = i * dx` for `i < n_x` with `dx = x_max / n_x`. Masses use the
//! trapezoid rule; squared L² norms use the plain Riemann sum `Σ v² · cell`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::interp_uniform;

/// Operations shared by the 1-D and 2-D grids.
pub trait GridDensity {
    fn values(&self) -> &[f64];
    /// Area (or length) of one grid cell.
    fn cell(&self) -> f64;
    /// Cheap structural description used to check that two grids match.
    fn shape_key(&self) -> (usize, usize, u64, u64);

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.shape_key() != other.shape_key() {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.shape_key(),
                other.shape_key()
            )));
        }
        Ok(())
    }

    fn l2_norm_sq(&self) -> f64 {
        self.values().iter().map(|v| v * v).sum::<f64>() * self.cell()
    }

    fn l2_dist_sq(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            * self.cell())
    }

    fn l1_dist(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.cell())
    }
}

/// `(1/Δt) Σ |curr − prev|` over all grid nodes.
pub fn stabilization_residual<G: GridDensity>(prev: &G, curr: &G, dt: f64) -> Result<f64> {
    prev.check_same_grid(curr)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(prev
        .values()
        .iter()
        .zip(curr.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / dt)
}

pub fn l2_norm_sq<G: GridDensity>(d: &G) -> f64 {
    d.l2_norm_sq()
}

pub fn l2_dist_sq<G: GridDensity>(a: &G, b: &G) -> Result<f64> {
    a.l2_dist_sq(b)
}

#[inline]
pub(crate) fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid1D {
    pub x_max: f64,
    pub n_x: usize,
    pub values: Vec<f64>,
}

impl DensityGrid1D {
    pub fn new(x_max: f64, values: Vec<f64>) -> Result<Self> {
        if !(x_max > 0.0) || values.len() < 2 {
            return Err(Error::Config(format!(
                "1-D grid needs x_max > 0 and at least two nodes (x_max = {x_max}, n = {})",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(DensityGrid1D {
            x_max,
            n_x: values.len(),
            values,
        })
    }

    pub fn zeros(x_max: f64, n_x: usize) -> Self {
        DensityGrid1D {
            x_max,
            n_x,
            values: vec![0.0; n_x],
        }
    }

    /// Tabulates `f` at the grid nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(x_max: f64, n_x: usize, f: F) -> Self {
        let dx = x_max / n_x as f64;
        DensityGrid1D {
            x_max,
            n_x,
            values: (0..n_x).map(|i| f(i as f64 * dx)).collect(),
        }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_x).map(move |i| self.x(i))
    }

    /// Right end of the tabulated support.
    pub fn x_last(&self) -> f64 {
        self.x(self.n_x - 1)
    }

    pub fn mass(&self) -> f64 {
        crate::quad::trapezoid(&self.values, self.dx())
    }

    pub fn first_moment(&self) -> f64 {
        let dx = self.dx();
        let n = self.n_x;
        (0..n)
            .map(|i| trapezoid_weight(i, n) * self.x(i) * self.values[i])
            .sum::<f64>()
            * dx
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Instability(format!(
                "cannot normalize density of mass {m}"
            )));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// Linear interpolation, zero outside the tabulated range.
    pub fn eval(&self, x: f64) -> f64 {
        interp_uniform(&self.values, self.dx(), x)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Cumulative distribution at the nodes (trapezoid), scaled to end at 1.
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.n_x);
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            out.push(acc);
        }
        if acc > 0.0 {
            out.iter_mut().for_each(|c| *c /= acc);
        }
        out
    }

    /// Resamples onto another uniform grid by linear interpolation.
    pub fn resample(&self, x_max: f64, n_x: usize) -> Self {
        DensityGrid1D::from_fn(x_max, n_x, |x| self.eval(x))
    }
}

impl GridDensity for DensityGrid1D {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn cell(&self) -> f64 {
        self.dx()
    }
    fn shape_key(&self) -> (usize, usize, u64, u64) {
        (1, self.n_x, self.x_max.to_bits(), 0)
    }
}

/// Density in (a, x): rows are size increments `a`, columns are sizes `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid2D {
    pub a_max: f64,
    pub x_max: f64,
    pub n_a: usize,
    pub n_x: usize,
    /// Row-major, `values[i * n_x + j] = N(a_i, x_j)`.
    pub values: Vec<f64>,
}

impl DensityGrid2D {
    pub fn zeros(a_max: f64, x_max: f64, n_a: usize, n_x: usize) -> Self {
        DensityGrid2D {
            a_max,
            x_max,
            n_a,
            n_x,
            values: vec![0.0; n_a * n_x],
        }
    }

    pub fn new(a_max: f64, x_max: f64, n_a: usize, n_x: usize, values: Vec<f64>) -> Result<Self> {
        if !(a_max > 0.0 && x_max > 0.0) || n_a < 2 || n_x < 2 {
            return Err(Error::Config(
                "2-D grid needs positive extents and ≥ 2 nodes per axis".into(),
            ));
        }
        if values.len() != n_a * n_x {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                n_a * n_x,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(DensityGrid2D {
            a_max,
            x_max,
            n_a,
            n_x,
            values,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(
        a_max: f64,
        x_max: f64,
        n_a: usize,
        n_x: usize,
        f: F,
    ) -> Self {
        let mut g = DensityGrid2D::zeros(a_max, x_max, n_a, n_x);
        let (da, dx) = (g.da(), g.dx());
        for i in 0..n_a {
            for j in 0..n_x {
                g.values[i * n_x + j] = f(i as f64 * da, j as f64 * dx);
            }
        }
        g
    }

    #[inline]
    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_x + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn mass(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_a {
            let wa = trapezoid_weight(i, self.n_a);
            for j in 0..self.n_x {
                acc += wa * trapezoid_weight(j, self.n_x) * self.at(i, j);
            }
        }
        acc * self.da() * self.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Instability(format!(
                "cannot normalize density of mass {m}"
            )));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    /// Bilinear interpolation, zero outside the tabulated box.
    pub fn eval(&self, a: f64, x: f64) -> f64 {
        if a < 0.0 || x < 0.0 {
            return 0.0;
        }
        let ta = a / self.da();
        let tx = x / self.dx();
        let i = ta.floor() as usize;
        let j = tx.floor() as usize;
        if i + 1 >= self.n_a || j + 1 >= self.n_x {
            // On the last node line only.
            if i < self.n_a && j < self.n_x && (i + 1 == self.n_a || j + 1 == self.n_x) {
                let wa = ta - i as f64;
                let wx = tx - j as f64;
                if (i + 1 == self.n_a && wa > 1e-12) || (j + 1 == self.n_x && wx > 1e-12) {
                    return 0.0;
                }
                let i1 = (i + 1).min(self.n_a - 1);
                let j1 = (j + 1).min(self.n_x - 1);
                return self.bilinear(i, j, i1, j1, wa, wx);
            }
            return 0.0;
        }
        self.bilinear(i, j, i + 1, j + 1, ta - i as f64, tx - j as f64)
    }

    #[inline]
    fn bilinear(&self, i0: usize, j0: usize, i1: usize, j1: usize, wa: f64, wx: f64) -> f64 {
        self.at(i0, j0) * (1.0 - wa) * (1.0 - wx)
            + self.at(i1, j0) * wa * (1.0 - wx)
            + self.at(i0, j1) * (1.0 - wa) * wx
            + self.at(i1, j1) * wa * wx
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Size marginal `N(x) = ∫ N(a, x) da` (trapezoid in `a`).
    pub fn marginal_x(&self) -> DensityGrid1D {
        let da = self.da();
        let values = (0..self.n_x)
            .map(|j| {
                (0..self.n_a)
                    .map(|i| trapezoid_weight(i, self.n_a) * self.at(i, j))
                    .sum::<f64>()
                    * da
            })
            .collect();
        DensityGrid1D {
            x_max: self.x_max,
            n_x: self.n_x,
            values,
        }
    }

    /// Size-increment marginal `N(a) = ∫ N(a, x) dx` (trapezoid in `x`).
    pub fn marginal_a(&self) -> DensityGrid1D {
        let dx = self.dx();
        let values = (0..self.n_a)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| trapezoid_weight(j, self.n_x) * v)
                    .sum::<f64>()
                    * dx
            })
            .collect();
        DensityGrid1D {
            x_max: self.a_max,
            n_x: self.n_a,
            values,
        }
    }
}

impl GridDensity for DensityGrid2D {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn cell(&self) -> f64 {
        self.da() * self.dx()
    }
    fn shape_key(&self) -> (usize, usize, u64, u64) {
        (
            self.n_a,
            self.n_x,
            self.a_max.to_bits(),
            self.x_max.to_bits(),
        )
    }
}

/// Size marginal of a joint density (free-function form).
pub fn marginal_x(n2: &DensityGrid2D) -> DensityGrid1D {
    n2.marginal_x()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_of_identical_fields_is_zero() {
        let g = DensityGrid1D::from_fn(1.0, 10, |x| x);
        assert_eq!(stabilization_residual(&g, &g, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn residual_scales_with_inverse_time_step() {
        let a = DensityGrid1D::from_fn(1.0, 10, |_| 1.0);
        let mut b = a.clone();
        b.values[3] += 0.25;
        let r = stabilization_residual(&a, &b, 0.01).unwrap();
        assert!((r - 25.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = DensityGrid1D::from_fn(1.0, 10, |_| 1.0);
        let b = DensityGrid1D::from_fn(1.0, 11, |_| 1.0);
        assert!(matches!(a.l2_dist_sq(&b), Err(Error::GridMismatch(_))));
        assert!(stabilization_residual(&a, &b, 0.1).is_err());
    }

    #[test]
    fn constant_on_unit_square_has_unit_norm() {
        let g = DensityGrid2D::from_fn(1.0, 1.0, 100, 100, |_, _| 1.0);
        assert!((g.l2_norm_sq() - 1.0).abs() <= 0.01);
        assert_eq!(g.l2_dist_sq(&g).unwrap(), 0.0);
    }

    #[test]
    fn triangle_marginal_is_linear() {
        let n = 201;
        let mut g = DensityGrid2D::from_fn(1.0, 1.0, n, n, |a, x| if x >= a { 1.0 } else { 0.0 });
        g.normalize().unwrap();
        let m = g.marginal_x();
        assert!((m.mass() - g.mass()).abs() < 1e-10);
        // ∝ x with the normalization 2x
        for j in (20..n - 20).step_by(20) {
            let x = m.x(j);
            assert!(
                (m.values[j] - 2.0 * x).abs() < 0.03,
                "x={x}: {}",
                m.values[j]
            );
        }
    }

    #[test]
    fn bilinear_reproduces_affine_functions() {
        let g = DensityGrid2D::from_fn(2.0, 2.0, 20, 20, |a, x| 1.0 + a + 2.0 * x);
        assert!((g.eval(0.33, 0.71) - (1.0 + 0.33 + 1.42)).abs() < 1e-12);
        assert_eq!(g.eval(-0.1, 0.5), 0.0);
        assert_eq!(g.eval(0.5, 5.0), 0.0);
    }
}
