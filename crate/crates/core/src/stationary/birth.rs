//! Birth-size fixed points of the adder model with `g(x) = x^γ`, `B(a) = a^η`.
//!
//! Writing `M(a, s) = N(a, a + s)` with `s` the size at birth, the stationary
//! equation becomes an ODE in `a` whose solution carries `M(0, s)` along each
//! characteristic. The birth boundary then turns into a fixed-point equation on the
//! birth flux `G(s) = s^γ M(0, s)`:
//!
//! `G(s) = 2 ∫₀¹ h(θ)/θ ∫₀^{s/θ} G(α) E_λ(α, s/θ) Φ(s/θ − α) dα dθ`,
//!
//! with `Φ(a) = a^η exp(−a^{η+1}/(η+1))` and `E_λ(α, y) = exp(−λ (y^{1−γ} − α^{1−γ})/(1−γ))`
//! (`(α/y)^λ` when γ = 1). For γ = 1, λ = 1 and `f(s) = s G(s)` satisfies
//! `f(s) = 2 ∫ h(θ) ∫ f(α) Φ(s/θ − α) dα dθ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::pde::{DensityGrid2D, Grid2D};
use crate::quad::interp_uniform;

const THETA_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthOptions {
    pub s_max: f64,
    pub n_s: usize,
    /// L¹ tolerance on the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BirthOptions {
    fn default() -> Self {
        BirthOptions {
            s_max: 20.0,
            n_s: 2000,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthForm {
    /// `f(s) = s² M(0, s)` (γ = 1).
    SizeWeighted,
    /// `G(s) = s^γ M(0, s)`.
    Flux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSizeDensity {
    pub s_max: f64,
    pub n_s: usize,
    pub values: Vec<f64>,
    pub form: BirthForm,
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kernel: KernelVariant,
    pub iterations: usize,
    pub residual: f64,
}

impl BirthSizeDensity {
    pub fn ds(&self) -> f64 {
        self.s_max / self.n_s as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    pub fn eval(&self, s: f64) -> f64 {
        interp_uniform(&self.values, self.ds(), s)
    }

    /// `s² M(0, s)`, the size-weighted birth density, whatever the stored form.
    pub fn size_weighted(&self, s: f64) -> f64 {
        match self.form {
            BirthForm::SizeWeighted => self.eval(s),
            BirthForm::Flux => s.powf(2.0 - self.gamma) * self.eval(s),
        }
    }

    /// `G(s) = s^γ M(0, s)`.
    pub fn flux(&self, s: f64) -> f64 {
        match self.form {
            BirthForm::Flux => self.eval(s),
            BirthForm::SizeWeighted => {
                if s > 0.0 {
                    self.eval(s) / s
                } else {
                    0.0
                }
            }
        }
    }

    /// Normalized cumulative distribution of the stored density at the nodes.
    pub fn cdf(&self) -> Vec<f64> {
        let ds = self.ds();
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * ds;
            out.push(acc);
        }
        out.iter_mut().for_each(|c| *c /= acc);
        out
    }
}

/// Lifetime density `Φ(a) = a^η exp(−a^{η+1}/(η+1))`.
pub fn lifetime_density(eta: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return if eta == 0.0 { 1.0 } else { 0.0 };
    }
    a.powf(eta) * (-a.powf(eta + 1.0) / (eta + 1.0)).exp()
}

/// Survival function `Ψ(a) = exp(−a^{η+1}/(η+1))`.
pub fn survival(eta: f64, a: f64) -> f64 {
    (-a.max(0.0).powf(eta + 1.0) / (eta + 1.0)).exp()
}

/// Damping factor `E_λ(α, y)` for `0 ≤ α ≤ y`.
pub fn damping(gamma: f64, lambda: f64, alpha: f64, y: f64) -> f64 {
    if alpha >= y {
        return 1.0;
    }
    if alpha <= 0.0 {
        return if gamma < 1.0 {
            (-lambda * y.powf(1.0 - gamma) / (1.0 - gamma)).exp()
        } else {
            0.0
        };
    }
    if (gamma - 1.0).abs() < 1e-12 {
        (alpha / y).powf(lambda)
    } else {
        let p = 1.0 - gamma;
        (-lambda * (y.powf(p) - alpha.powf(p)) / p).exp()
    }
}

struct Operator {
    n: usize,
    ds: f64,
    /// Lower-triangular kernel `K[j][i]`, `i ≤ j`, including trapezoid weights in α.
    kmat: Vec<f64>,
    kernel: KernelSpec,
    /// Include the `1/θ` factor of the flux form.
    inv_theta: bool,
}

impl Operator {
    fn new(
        n: usize,
        ds: f64,
        eta: f64,
        kernel: KernelSpec,
        weight: impl Fn(f64, f64) -> f64,
        inv_theta: bool,
    ) -> Self {
        let phi: Vec<f64> = (0..n)
            .map(|k| lifetime_density(eta, k as f64 * ds))
            .collect();
        let mut kmat = vec![0.0; n * (n + 1) / 2];
        for j in 1..n {
            let y = j as f64 * ds;
            let base = j * (j + 1) / 2;
            for i in 0..=j {
                let tw = if i == 0 || i == j { 0.5 } else { 1.0 };
                kmat[base + i] = tw * ds * phi[j - i] * weight(i as f64 * ds, y);
            }
        }
        Operator {
            n,
            ds,
            kmat,
            kernel,
            inv_theta,
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut k = vec![0.0; n];
        for j in 1..n {
            let base = j * (j + 1) / 2;
            k[j] = self.kmat[base..base + j + 1]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum();
        }
        if self.kernel.is_dirac() {
            let scale = if self.inv_theta { 4.0 } else { 2.0 };
            for (i, o) in out.iter_mut().enumerate() {
                *o = scale * interp_uniform(&k, self.ds, 2.0 * i as f64 * self.ds);
            }
            return;
        }
        let thetas: Vec<(f64, f64)> = (0..THETA_POINTS)
            .map(|m| {
                let t = (m as f64 + 0.5) / THETA_POINTS as f64;
                let w = self.kernel.eval_unchecked(t) / THETA_POINTS as f64;
                (t, if self.inv_theta { w / t } else { w })
            })
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            let s = i as f64 * self.ds;
            *o = 2.0
                * thetas
                    .iter()
                    .map(|&(t, w)| w * interp_uniform(&k, self.ds, s / t))
                    .sum::<f64>();
        }
    }
}

fn l1(v: &[f64], ds: f64) -> f64 {
    crate::quad::trapezoid(&v.iter().map(|x| x.abs()).collect::<Vec<_>>(), ds)
}

/// Damped power iteration `v ← (v + T v)/2`, normalized. Returns the dominant
/// eigenvalue of `T`, the iteration count and the final `‖v − Tv/ρ‖₁`.
fn power_iterate(
    op: &Operator,
    v: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize, f64)> {
    let ds = op.ds;
    let mass = crate::quad::trapezoid(v, ds);
    v.iter_mut().for_each(|x| *x /= mass);
    let mut tv = vec![0.0; v.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        op.apply(v, &mut tv);
        let rho = crate::quad::trapezoid(&tv, ds);
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Instability(format!(
                "birth operator lost all mass (ρ = {rho})"
            )));
        }
        let diff: Vec<f64> = v.iter().zip(&tv).map(|(a, b)| a - b / rho).collect();
        residual = l1(&diff, ds);
        let mut next: Vec<f64> = v
            .iter()
            .zip(&tv)
            .map(|(a, b)| 0.5 * a + 0.5 * b / rho)
            .collect();
        let m = crate::quad::trapezoid(&next, ds);
        next.iter_mut().for_each(|x| *x /= m);
        *v = next;
        if residual < tol {
            return Ok((rho, it, residual));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
        history: vec![],
    })
}

fn initial_guess(n: usize, ds: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = i as f64 * ds;
            (-(s - 1.0) * (s - 1.0)).exp() * s
        })
        .collect()
}

fn check_inputs(eta: f64, opts: &BirthOptions) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("η must be positive, got {eta}")));
    }
    if !(opts.s_max > 0.0) || opts.n_s < 16 || !(opts.tol > 0.0) {
        return Err(Error::Config("invalid birth-size grid or tolerance".into()));
    }
    let tail = survival(eta, opts.s_max);
    if tail > 1e-12 {
        return Err(Error::Config(format!(
            "s_max = {} is too short for η = {eta}: survival there is {tail:e}",
            opts.s_max
        )));
    }
    Ok(())
}

/// Fixed point of `T` for γ = 1 (λ = 1), normalized to unit mass.
pub fn birth_fixed_point_gamma1(
    eta: f64,
    kernel: KernelVariant,
    opts: &BirthOptions,
) -> Result<BirthSizeDensity> {
    check_inputs(eta, opts)?;
    let ds = opts.s_max / opts.n_s as f64;
    let op = Operator::new(
        opts.n_s,
        ds,
        eta,
        KernelSpec::new(kernel),
        |_, _| 1.0,
        false,
    );
    let mut f = initial_guess(opts.n_s, ds);
    let (_rho, iterations, residual) = power_iterate(&op, &mut f, opts.tol, opts.max_iter)?;
    Ok(BirthSizeDensity {
        s_max: opts.s_max,
        n_s: opts.n_s,
        values: f,
        form: BirthForm::SizeWeighted,
        lambda: 1.0,
        gamma: 1.0,
        eta,
        kernel,
        iterations,
        residual,
    })
}

/// Dominant eigenvalue of `S_λ` and its normalized eigenvector.
fn spectral_radius(
    gamma: f64,
    eta: f64,
    lambda: f64,
    kernel: KernelSpec,
    opts: &BirthOptions,
    v: &mut Vec<f64>,
) -> Result<(f64, usize, f64)> {
    let ds = opts.s_max / opts.n_s as f64;
    let op = Operator::new(
        opts.n_s,
        ds,
        eta,
        kernel,
        |a, y| damping(gamma, lambda, a, y),
        true,
    );
    power_iterate(&op, v, opts.tol, opts.max_iter)
}

/// Fixed point of `S` with λ chosen so that the dominant eigenvalue of `S_λ` is 1.
///
/// The spectral radius decreases in λ, so λ is bracketed and then found by the
/// secant method on `ln ρ(λ)`.
pub fn birth_fixed_point_general(
    gamma: f64,
    eta: f64,
    kernel: KernelVariant,
    opts: &BirthOptions,
) -> Result<BirthSizeDensity> {
    check_inputs(eta, opts)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("γ must be positive, got {gamma}")));
    }
    let kspec = KernelSpec::new(kernel);
    let ds = opts.s_max / opts.n_s as f64;
    let mut v = initial_guess(opts.n_s, ds);
    let eval = |lambda: f64, v: &mut Vec<f64>| -> Result<f64> {
        let (rho, _, _) = spectral_radius(gamma, eta, lambda, kspec, opts, v)?;
        Ok(rho.ln())
    };

    // ρ(0) ≥ 1 since S_0 conserves mass up to truncation; bracket from there.
    let mut lo = 0.0;
    let mut f_lo = eval(lo, &mut v)?;
    let mut hi = 1.0;
    let mut f_hi = eval(hi, &mut v)?;
    let mut expansions = 0;
    while f_hi > 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = eval(hi, &mut v)?;
        expansions += 1;
        if expansions > 40 {
            return Err(Error::Instability(
                "could not bracket the growth eigenvalue".into(),
            ));
        }
    }
    if f_lo < 0.0 {
        return Err(Error::Instability(format!(
            "spectral radius below one already at λ = {lo} (ln ρ = {f_lo})"
        )));
    }
    // Illinois-modified regula falsi.
    let mut side = 0i8;
    let mut lambda = hi;
    for _ in 0..200 {
        lambda = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let f = eval(lambda, &mut v)?;
        if f.abs() < 1e-12 || (hi - lo) < 1e-12 {
            break;
        }
        if f > 0.0 {
            lo = lambda;
            f_lo = f;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = lambda;
            f_hi = f;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    let (rho, iterations, residual) = spectral_radius(gamma, eta, lambda, kspec, opts, &mut v)?;
    log::debug!("growth eigenvalue λ = {lambda} (ρ = {rho})");
    Ok(BirthSizeDensity {
        s_max: opts.s_max,
        n_s: opts.n_s,
        values: v,
        form: BirthForm::Flux,
        lambda,
        gamma,
        eta,
        kernel,
        iterations,
        residual,
    })
}

/// Stationary adder density `N(a, x) = M(a, x − a)` reconstructed from a birth-size
/// fixed point, normalized to unit mass on `grid`.
pub fn reconstruct_n_from_birth(bsd: &BirthSizeDensity, grid: Grid2D) -> Result<DensityGrid2D> {
    let gamma = bsd.gamma;
    let eta = bsd.eta;
    let mut d = DensityGrid2D::from_fn(grid.a_max, grid.x_max, grid.n_a, grid.n_x, |a, x| {
        if x < a || x <= 0.0 {
            return 0.0;
        }
        let s = x - a;
        let w = survival(eta, a);
        match bsd.form {
            BirthForm::SizeWeighted => bsd.eval(s) * w / (x * x),
            BirthForm::Flux => bsd.eval(s) * damping(gamma, bsd.lambda, s, x) * w / x.powf(gamma),
        }
    });
    d.normalize()?;
    Ok(d)
}

/// `∫∫ a^η x^γ N(a, x)`, which equals λ for a normalized stationary density.
pub fn division_moment(n: &DensityGrid2D, gamma: f64, eta: f64) -> f64 {
    let (da, dx) = (n.da(), n.dx());
    let mut acc = 0.0;
    for i in 0..n.n_a {
        let a = i as f64 * da;
        let wa = crate::pde::grid::trapezoid_weight(i, n.n_a) * a.powf(eta);
        for j in 0..n.n_x {
            let x = j as f64 * dx;
            acc += wa * crate::pde::grid::trapezoid_weight(j, n.n_x) * x.powf(gamma) * n.at(i, j);
        }
    }
    acc * da * dx
}
