//! Simulation studies: power tables for the mitosis and adder models and the
//! fitting-and-testing pipeline on a size density.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::error::Result;
use crate::fitting::{
    adder_grid_for, adder_marginal, default_r_grid, fit_least_squares_r, fit_moments,
    grid_search_adder, grid_search_mitosis, FitParams, FitResult, SearchGrid, SearchOptions,
};
use crate::gof::{calibrate, rejection_rate, run_test, NullModel, PowerEstimate, TestReport};
use crate::kernels::KernelVariant;
use crate::pde::{
    solve_adder, solve_mitosis, solve_mitosis_from, DensityGrid1D, Grid1D, Grid2D, ModelSpec,
    SolverOptions,
};
use crate::sampling::{
    derive_seed, kde_1d, rejection_draw_1d, stream_rng, SampleData, SamplingGrid,
};

/// Sample sizes used for each adder case.
pub fn adder_case_sizes(case: usize) -> Vec<usize> {
    match case {
        1 => vec![100, 200, 500, 1000],
        2 => vec![100, 200, 500],
        6 => vec![10, 20, 50, 100],
        _ => vec![10, 20, 50],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub u_alpha: f64,
    /// Rejection rate on fresh null samples.
    pub level: PowerEstimate,
    pub powers: Vec<(KernelVariant, PowerEstimate)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub label: String,
    pub alpha: f64,
    pub calibration_reps: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<PowerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub alpha: f64,
    pub calibration_reps: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Seeds for sample size `n`: tag 0 calibrates, tag 1 estimates the level and tag
/// `2 + j` draws from alternative `j`.
pub fn study_seed(seed: u64, n: usize, tag: u64) -> u64 {
    derive_seed(derive_seed(seed, n as u64), tag)
}

fn power_rows(
    null: &NullModel,
    alts: &[(KernelVariant, SamplingGrid)],
    sizes: &[usize],
    basis: &BasisFamily,
    s: &StudySettings,
) -> Result<Vec<PowerRow>> {
    sizes
        .iter()
        .map(|&n| {
            let cal = calibrate(
                null,
                n,
                s.alpha,
                basis,
                s.calibration_reps,
                study_seed(s.seed, n, 0),
            )?;
            let level =
                rejection_rate(&null.sampler, null, &cal, s.reps, study_seed(s.seed, n, 1))?;
            let powers = alts
                .iter()
                .enumerate()
                .map(|(j, (k, alt))| {
                    Ok((
                        *k,
                        rejection_rate(
                            alt,
                            null,
                            &cal,
                            s.reps,
                            study_seed(s.seed, n, 2 + j as u64),
                        )?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PowerRow {
                n,
                u_alpha: cal.u_alpha,
                level,
                powers,
            })
        })
        .collect()
}

/// Powers of the 1-D test of the explicit constant-rate null against mitosis with
/// each non-equal kernel.
pub fn mitosis_power_table(
    big_r: f64,
    sizes: &[usize],
    grid: Grid1D,
    solver: &SolverOptions,
    s: &StudySettings,
) -> Result<PowerTable> {
    let null = NullModel::explicit(big_r, grid)?;
    let alts = KernelVariant::alternatives()
        .iter()
        .map(|&k| {
            let sol = solve_mitosis(&ModelSpec::mitosis_constant(big_r, k)?, grid, solver)?;
            Ok((k, SamplingGrid::One(sol.density)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTable {
        label: format!("mitosis-constant R={big_r}"),
        alpha: s.alpha,
        calibration_reps: s.calibration_reps,
        reps: s.reps,
        seed: s.seed,
        rows: power_rows(&null, &alts, sizes, &BasisFamily::laguerre_default(), s)?,
    })
}

/// Powers of the 2-D test of the equal-mitosis adder profile of `case` against the
/// other kernels.
pub fn adder_power_table(
    case: usize,
    sizes: &[usize],
    grid: Grid2D,
    solver: &SolverOptions,
    s: &StudySettings,
) -> Result<PowerTable> {
    let null_sol = solve_adder(
        &ModelSpec::adder_case(case, KernelVariant::DiracHalf)?,
        grid,
        solver,
    )?;
    let null = NullModel::from_grid_2d(&format!("adder case {case}"), null_sol.density)?;
    let alts = KernelVariant::alternatives()
        .iter()
        .map(|&k| {
            let sol = solve_adder(&ModelSpec::adder_case(case, k)?, grid, solver)?;
            Ok((k, SamplingGrid::Two(sol.density)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTable {
        label: format!("adder case {case}"),
        alpha: s.alpha,
        calibration_reps: s.calibration_reps,
        reps: s.reps,
        seed: s.seed,
        rows: power_rows(&null, &alts, sizes, &BasisFamily::wavelet_default(), s)?,
    })
}

/// How the general-mitosis and adder parameters are chosen in the fitting study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterChoice {
    /// Use the given `(r, γ, η)`.
    Fixed([f64; 3]),
    /// Grid search on the given grid.
    Search(SearchGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitStudyOptions {
    pub sample_size: usize,
    pub alpha: f64,
    pub calibration_reps: usize,
    pub seed: u64,
    /// KDE bandwidth; Silverman's rule when `None`.
    pub bandwidth: Option<f64>,
    pub mitosis: ParameterChoice,
    pub adder: ParameterChoice,
    pub search: SearchOptions,
}

impl FitStudyOptions {
    /// The reference fits and settings, without grid searches.
    pub fn reference(seed: u64) -> Self {
        FitStudyOptions {
            sample_size: 10_000,
            alpha: 0.05,
            calibration_reps: 200,
            seed,
            bandwidth: None,
            mitosis: ParameterChoice::Fixed([0.05, 1.325, 9.0]),
            adder: ParameterChoice::Fixed([5.0, 9.0, 3.775]),
            search: SearchOptions {
                solver: SolverOptions {
                    eps: 1e-5,
                    ..SearchOptions::default().solver
                },
                adder_nodes: Some(150),
                ..SearchOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTest {
    pub fit: FitResult,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStudy {
    pub sample_size: usize,
    pub seed: u64,
    pub moments: FittedTest,
    pub least_squares: FittedTest,
    pub mitosis: FittedTest,
    pub adder: FittedTest,
}

fn fixed_fit(
    method: &str,
    params: FitParams,
    data: &DensityGrid1D,
    model: &DensityGrid1D,
    lambda: f64,
) -> Result<FitResult> {
    use crate::pde::GridDensity;
    Ok(FitResult {
        method: method.into(),
        params,
        objective: model.l2_dist_sq(data)?,
        lambda: Some(lambda),
        search_grid: "fixed".into(),
    })
}

/// Resamples `density`, estimates it by KDE on its own grid, fits the four null
/// models and tests the resample against each fitted null.
///
/// Seeds derived from `seed`: tag 0 draws the resample, tags 1–4 calibrate the
/// moment, least-squares, general-mitosis and adder nulls.
pub fn fit_study(density: &DensityGrid1D, opts: &FitStudyOptions) -> Result<FitStudy> {
    let grid = Grid1D::of(density);
    let sample_seed = derive_seed(opts.seed, 0);
    let points = rejection_draw_1d(density, opts.sample_size, &mut stream_rng(sample_seed, 0))?;
    let sample =
        SampleData::One(points.clone()).into_sample(sample_seed, "resample of the size density");
    let kde = kde_1d(&points, opts.bandwidth, grid)?;
    let basis = BasisFamily::laguerre_default();
    let test = |null: &NullModel, tag: u64| -> Result<TestReport> {
        let cal = calibrate(
            null,
            opts.sample_size,
            opts.alpha,
            &basis,
            opts.calibration_reps,
            derive_seed(opts.seed, tag),
        )?;
        run_test(&sample, &cal, null)
    };
    let constant = |fit: FitResult, tag: u64| -> Result<FittedTest> {
        let FitParams::Constant { big_r, .. } = fit.params else {
            unreachable!("constant-rate fits return R")
        };
        let null = NullModel::explicit(big_r, Grid1D::new(10.0 / big_r, 1000)?)?;
        Ok(FittedTest {
            report: test(&null, tag)?,
            fit,
        })
    };
    let moments = constant(fit_moments(&kde)?, 1)?;
    let least_squares = constant(fit_least_squares_r(&kde, &default_r_grid())?, 2)?;

    let mitosis_fit = match &opts.mitosis {
        ParameterChoice::Search(g) => grid_search_mitosis(&kde, g, &opts.search)?.best,
        ParameterChoice::Fixed([r, gamma, eta]) => {
            let spec = ModelSpec::mitosis_general(*r, *gamma, *eta, KernelVariant::DiracHalf)?;
            let sol =
                solve_mitosis_from(&spec, &kde.clone().normalized()?, 0.0, &opts.search.solver)?;
            fixed_fit(
                "fixed",
                FitParams::Mitosis {
                    r: *r,
                    gamma: *gamma,
                    eta: *eta,
                },
                &kde,
                &sol.density,
                sol.lambda,
            )?
        }
    };
    let FitParams::Mitosis { r, gamma, eta } = mitosis_fit.params else {
        unreachable!("mitosis fits return (r, γ, η)")
    };
    let spec = ModelSpec::mitosis_general(r, gamma, eta, KernelVariant::DiracHalf)?;
    let profile =
        solve_mitosis_from(&spec, &kde.clone().normalized()?, 0.0, &opts.search.solver)?.density;
    let mitosis = FittedTest {
        report: test(&NullModel::from_grid_1d("mitosis-general fit", profile)?, 3)?,
        fit: mitosis_fit,
    };

    let g2 = adder_grid_for(&kde, opts.search.adder_nodes);
    let adder_profile = |r: f64, gamma: f64, eta: f64| -> Result<(DensityGrid1D, f64)> {
        let p = adder_marginal(r, gamma, eta, g2, &opts.search.solver)?;
        let coarse = DensityGrid1D {
            x_max: g2.x_max,
            n_x: g2.n_x,
            values: p.values,
        };
        Ok((coarse.resample(kde.x_max, kde.n_x).normalized()?, p.lambda))
    };
    let adder_fit = match &opts.adder {
        ParameterChoice::Search(g) => grid_search_adder(&kde, g, &opts.search)?.best,
        ParameterChoice::Fixed([r, gamma, eta]) => {
            let (m, lambda) = adder_profile(*r, *gamma, *eta)?;
            fixed_fit(
                "fixed",
                FitParams::Adder {
                    r: *r,
                    gamma: *gamma,
                    eta: *eta,
                },
                &kde,
                &m,
                lambda,
            )?
        }
    };
    let FitParams::Adder { r, gamma, eta } = adder_fit.params else {
        unreachable!("adder fits return (r, γ, η)")
    };
    let (marginal, _) = adder_profile(r, gamma, eta)?;
    let adder = FittedTest {
        report: test(&NullModel::from_grid_1d("adder fit", marginal)?, 4)?,
        fit: adder_fit,
    };
    Ok(FitStudy {
        sample_size: opts.sample_size,
        seed: opts.seed,
        moments,
        least_squares,
        mitosis,
        adder,
    })
}
