//! Browser bindings: tabulate the equal-mitosis profile, solve a mitosis model, test a simulated sample.

use celldiv::basis::BasisFamily;
use celldiv::gof::{calibrate, run_test, NullModel};
use celldiv::io::to_json_string;
use celldiv::kernels::KernelVariant;
use celldiv::pde::{solve_mitosis, Grid1D, ModelSpec, SolverOptions};
use celldiv::sampling::{rejection_sample_1d, Sample};
use celldiv::stationary::ExplicitNull;
use wasm_bindgen::prelude::*;

fn js(e: celldiv::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Values of the constant-rate equal-mitosis profile at `n_x` nodes of `(0, x_max]`.
#[wasm_bindgen]
pub fn explicit_profile(big_r: f64, x_max: f64, n_x: usize) -> Result<Vec<f64>, JsError> {
    Ok(ExplicitNull::new(big_r)
        .map_err(js)?
        .tabulate(x_max, n_x)
        .values)
}

/// Stationary profile of constant-rate mitosis with the named kernel on the same nodes.
#[wasm_bindgen]
pub fn solve_profile(
    big_r: f64,
    kernel: &str,
    x_max: f64,
    n_x: usize,
) -> Result<Vec<f64>, JsError> {
    let kernel: KernelVariant = kernel.parse().map_err(js)?;
    let spec = ModelSpec::mitosis_constant(big_r, kernel).map_err(js)?;
    let grid = Grid1D::new(x_max, n_x).map_err(js)?;
    Ok(solve_mitosis(&spec, grid, &SolverOptions::default())
        .map_err(js)?
        .density
        .values)
}

/// Draws `n` sizes under `kernel`, tests equal mitosis at rate `big_r` and returns the report as JSON.
#[wasm_bindgen]
pub fn simulate_and_test(
    big_r: f64,
    kernel: &str,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<String, JsError> {
    let kernel: KernelVariant = kernel.parse().map_err(js)?;
    let grid = Grid1D::new(10.0 / big_r, 1000).map_err(js)?;
    let null = NullModel::explicit(big_r, grid).map_err(js)?;
    let spec = ModelSpec::mitosis_constant(big_r, kernel).map_err(js)?;
    let alt = solve_mitosis(&spec, grid, &SolverOptions::default()).map_err(js)?;
    let cal =
        calibrate(&null, n, 0.05, &BasisFamily::laguerre_default(), reps, seed).map_err(js)?;
    let sample =
        rejection_sample_1d(&alt.density, n, seed.wrapping_add(1), kernel.name()).map_err(js)?;
    let report = run_test(&Sample::One(sample), &cal, &null).map_err(js)?;
    to_json_string(&report).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solved_dirac_profile_tracks_the_explicit_one() {
        let a = explicit_profile(1.0, 10.0, 500).unwrap();
        let b = solve_profile(1.0, "dirac", 10.0, 500).unwrap();
        let h = 10.0 / 500.0;
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h;
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>() * h;
        assert!((diff / norm).sqrt() < 2e-2);
    }

    #[test]
    fn report_is_json_with_a_decision() {
        let s = simulate_and_test(1.0, "mixture", 300, 100, 5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["decision"], 1);
    }
}
