use celldiv::basis::BasisFamily;
use celldiv::fitting::{fit_least_squares_r, fit_moments, FitParams};
use celldiv::gof::{calibrate, run_test, NullModel};
use celldiv::io::{read_density_1d, write_density_1d};
use celldiv::kernels::KernelVariant;
use celldiv::pde::{solve_mitosis, Grid1D, ModelSpec, SolverOptions};
use celldiv::sampling::{rejection_sample_1d, Sample};
use celldiv::stationary::ExplicitNull;

#[test]
fn solved_density_survives_csv_and_serves_as_a_null() {
    let grid = Grid1D::new(8.0, 400).unwrap();
    let spec = ModelSpec::mitosis_constant(1.0, KernelVariant::Uniform).unwrap();
    let sol = solve_mitosis(&spec, grid, &SolverOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_density_1d(&mut buf, &sol.density, "x").unwrap();
    let back = read_density_1d(buf.as_slice()).unwrap();
    assert_eq!(back.values, sol.density.values);

    let null = NullModel::from_grid_1d("uniform-kernel mitosis", back).unwrap();
    let basis = BasisFamily::laguerre_default();
    let cal = calibrate(&null, 200, 0.05, &basis, 100, 1).unwrap();
    assert!(cal.empirical_level <= 0.05);

    let from_null = Sample::One(rejection_sample_1d(&sol.density, 200, 2, "null").unwrap());
    let equal = ExplicitNull::new(1.0).unwrap().tabulate(8.0, 400);
    let from_alt = Sample::One(rejection_sample_1d(&equal, 200, 3, "equal mitosis").unwrap());
    let r_null = run_test(&from_null, &cal, &null).unwrap();
    let r_alt = run_test(&from_alt, &cal, &null).unwrap();
    assert_eq!(r_null.sample_seed, 2);
    assert!(r_alt.t_alpha > r_null.t_alpha);
}

#[test]
fn constant_rate_fits_recover_the_rate_of_an_explicit_profile() {
    for r in [0.7, 1.37, 2.5] {
        let data = ExplicitNull::new(r).unwrap().tabulate(12.0 / r, 1200);
        let FitParams::Constant { big_r, .. } = fit_moments(&data).unwrap().params else {
            panic!("constant fit")
        };
        assert!((big_r - r).abs() < 1e-3 * r, "moments {big_r} vs {r}");
        let grid: Vec<f64> = (1..=300).map(|k| k as f64 * 0.01).collect();
        let FitParams::Constant { big_r, .. } = fit_least_squares_r(&data, &grid).unwrap().params
        else {
            panic!("constant fit")
        };
        assert!((big_r - r).abs() < 0.006, "least squares {big_r} vs {r}");
    }
}

#[test]
fn equal_and_unequal_division_separate_under_the_test() {
    let null = NullModel::explicit(1.0, Grid1D::default()).unwrap();
    let cal = calibrate(&null, 500, 0.05, &BasisFamily::laguerre_default(), 200, 9).unwrap();
    let spec = ModelSpec::mitosis_constant(1.0, KernelVariant::GaussMixture).unwrap();
    let alt = solve_mitosis(&spec, Grid1D::default(), &SolverOptions::default()).unwrap();
    let sample = Sample::One(rejection_sample_1d(&alt.density, 500, 10, "mixture").unwrap());
    assert!(run_test(&sample, &cal, &null).unwrap().rejects());
}
