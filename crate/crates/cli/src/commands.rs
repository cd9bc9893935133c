//! One function per subcommand. Each writes its artifacts through a [`Run`], which
//! removes them again if the command fails.

use std::fs;
use std::io::Write;
use std::path::Path;

use celldiv::basis::BasisFamily;
use celldiv::fitting::{
    default_r_grid, fit_least_squares_r, fit_moments, grid_search_adder, grid_search_mitosis,
    objective_table_rows, FitParams, SearchGrid, SearchOptions, OBJECTIVE_TABLE_HEADER,
};
use celldiv::gof::{calibrate as calibrate_null, rejection_rate, run_test, Calibration, NullModel};
use celldiv::io::{
    fmt_num, read_density_1d, read_density_2d, read_numeric_table, read_sample, write_table,
};
use celldiv::kernels::KernelVariant;
use celldiv::pde::{
    solve_adder, solve_mitosis, DensityGrid1D, DensityGrid2D, GridDensity, ModelFamily, ModelSpec,
};
use celldiv::sampling::{kde_1d, rejection_sample_1d, rejection_sample_2d, Sample, SamplingGrid};
use celldiv::stationary::ExplicitNull;
use celldiv::studies::{
    adder_case_sizes, adder_power_table, fit_study, mitosis_power_table, study_seed, FitStudy,
    FitStudyOptions, ParameterChoice, PowerTable, StudySettings,
};
use serde::Serialize;

use crate::artifacts::Run;
use crate::config::{ExperimentConfig, FitMethod};
use crate::error::CliError;

/// Runs `body` and finalizes the manifest, or removes all outputs on error.
fn with_run<F>(cfg: &ExperimentConfig, command: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Run) -> Result<(), CliError>,
{
    let mut run = Run::new(command, cfg.out_dir())?;
    run.seed("seed", cfg.seed());
    match body(&mut run) {
        Ok(()) => {
            let manifest = run.finish(cfg)?;
            eprintln!("wrote {}", manifest.display());
            Ok(())
        }
        Err(e) => {
            run.abort();
            Err(e)
        }
    }
}

#[derive(Serialize)]
struct SolveSummary {
    lambda: f64,
    steps: usize,
    residual: f64,
    oscillation: bool,
    clamped: usize,
}

enum Density {
    One(DensityGrid1D),
    Two(DensityGrid2D),
}

/// Stationary profile of `spec` on the configured grid.
fn solve_spec(
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
) -> Result<(Density, SolveSummary), CliError> {
    let opts = cfg.solver();
    Ok(if spec.family.is_adder() {
        let s = solve_adder(spec, cfg.grid_2d()?, &opts)?;
        let sum = SolveSummary {
            lambda: s.lambda,
            steps: s.steps,
            residual: s.residual,
            oscillation: s.oscillation,
            clamped: s.clamped,
        };
        (Density::Two(s.density), sum)
    } else {
        let s = solve_mitosis(spec, cfg.grid_1d()?, &opts)?;
        let sum = SolveSummary {
            lambda: s.lambda,
            steps: s.steps,
            residual: s.residual,
            oscillation: s.oscillation,
            clamped: s.clamped,
        };
        (Density::One(s.density), sum)
    })
}

fn write_density(run: &mut Run, name: &str, d: &Density) -> Result<(), CliError> {
    run.write(name, |w| {
        match d {
            Density::One(d) => celldiv::io::write_density_1d(w, d, "x")?,
            Density::Two(d) => celldiv::io::write_density_2d(w, d)?,
        }
        Ok(())
    })?;
    Ok(())
}

pub fn solve(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    with_run(cfg, "solve", |run| {
        let (density, summary) = solve_spec(cfg, &spec)?;
        write_density(run, "density.csv", &density)?;
        run.result("solve", &summary);
        if let (ModelFamily::MitosisConstant, true, Density::One(d)) =
            (spec.family, spec.kernel.is_dirac(), &density)
        {
            let exact = ExplicitNull::new(spec.big_r)?.tabulate(d.x_max, d.n_x);
            let dist = d.l2_dist_sq(&exact)?.sqrt();
            run.result("l2_distance_to_explicit", &dist);
            run.result(
                "relative_l2_error_to_explicit",
                &(dist / exact.l2_norm_sq().sqrt()),
            );
        }
        Ok(())
    })
}

/// Reads a density CSV, choosing the dimension from the column count.
fn read_density(path: &Path) -> Result<Density, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let (header, _) = read_numeric_table(bytes.as_slice())?;
    Ok(match header.len() {
        2 => Density::One(read_density_1d(bytes.as_slice())?),
        3 => Density::Two(read_density_2d(bytes.as_slice())?),
        k => {
            return Err(CliError::Config(format!(
                "{}: density files have 2 or 3 columns, got {k}",
                path.display()
            )))
        }
    })
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(&Sha256::digest(bytes)[..6]))
}

fn model_label(cfg: &ExperimentConfig, spec: &ModelSpec) -> String {
    match (spec.family, cfg.model.case) {
        (ModelFamily::MitosisConstant, _) => format!("mitosis-constant R={}", spec.big_r),
        (ModelFamily::MitosisGeneral, _) => format!(
            "mitosis-general r={} gamma={} eta={}",
            spec.r, spec.gamma, spec.eta
        ),
        (ModelFamily::Adder, Some(c)) => format!("adder case {c}"),
        (ModelFamily::Adder, None) => format!(
            "adder r={} gamma={} R={} eta={}",
            spec.r, spec.gamma, spec.big_r, spec.eta
        ),
    }
}

/// The null hypothesis: an input density if given, otherwise the configured model with
/// equal division.
fn null_model(cfg: &ExperimentConfig) -> Result<NullModel, CliError> {
    if let Some(path) = &cfg.input.density {
        let label = format!("density sha256:{}", file_digest(path)?);
        return Ok(match read_density(path)? {
            Density::One(d) => NullModel::from_grid_1d(&label, d)?,
            Density::Two(d) => NullModel::from_grid_2d(&label, d)?,
        });
    }
    let spec = cfg.model_spec_with(KernelVariant::DiracHalf)?;
    let label = model_label(cfg, &spec);
    if spec.family == ModelFamily::MitosisConstant {
        return Ok(NullModel::explicit(spec.big_r, cfg.grid_1d()?)?);
    }
    Ok(match solve_spec(cfg, &spec)?.0 {
        Density::One(d) => NullModel::from_grid_1d(&label, d)?,
        Density::Two(d) => NullModel::from_grid_2d(&label, d)?,
    })
}

pub fn sample(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let n = cfg.require_n()?;
    let seed = cfg.seed();
    with_run(cfg, "sample", |run| {
        let (density, source) = match &cfg.input.density {
            Some(p) => (
                read_density(p)?,
                format!("density sha256:{}", file_digest(p)?),
            ),
            None => {
                let spec = cfg.model_spec()?;
                let label = format!(
                    "{} kernel={}",
                    model_label(cfg, &spec),
                    spec.kernel.variant.name()
                );
                (solve_spec(cfg, &spec)?.0, label)
            }
        };
        let sample = match &density {
            Density::One(d) => Sample::One(rejection_sample_1d(d, n, seed, &source)?),
            Density::Two(d) => Sample::Two(rejection_sample_2d(d, n, seed, &source)?),
        };
        run.write("sample.csv", |w| Ok(celldiv::io::write_sample(w, &sample)?))?;
        run.result("n", &n);
        run.result("source", &source);
        Ok(())
    })
}

pub fn calibrate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let n = cfg.require_n()?;
    with_run(cfg, "calibrate", |run| {
        let null = null_model(cfg)?;
        let basis = BasisFamily::default_for_dimension(null.dimension());
        let cal = calibrate_null(
            &null,
            n,
            cfg.alpha(),
            &basis,
            cfg.calibration_reps(),
            cfg.seed(),
        )?;
        for w in &cal.warnings {
            log::warn!("{w}");
        }
        run.write_json("calibration.json", &cal)?;
        run.result("u_alpha", &cal.u_alpha);
        run.result("empirical_level", &cal.empirical_level);
        Ok(())
    })
}

fn read_calibration(path: &Path) -> Result<Calibration, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn test(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let sample_path = cfg
        .input
        .sample
        .as_ref()
        .ok_or_else(|| CliError::Config("test needs an input sample (--sample)".into()))?;
    let cal_path = cfg
        .input
        .calibration
        .as_ref()
        .ok_or_else(|| CliError::Config("test needs a calibration (--calibration)".into()))?;
    let sample =
        read_sample(fs::File::open(sample_path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", sample_path.display()))
        })?)?;
    let cal = read_calibration(cal_path)?;
    with_run(cfg, "test", |run| {
        run.seed("sample_seed", sample.seed());
        run.seed("calibration_seed", cal.seed);
        let report = run_test(&sample, &cal, &null_model(cfg)?)?;
        run.write_json("report.json", &report)?;
        run.result("t_alpha", &report.t_alpha);
        run.result("rejects", &report.rejects());
        Ok(())
    })
}

/// The configured model solved with `kernel`, as a sampling grid.
fn alternative(cfg: &ExperimentConfig, kernel: KernelVariant) -> Result<SamplingGrid, CliError> {
    let spec = cfg.model_spec_with(kernel)?;
    Ok(match solve_spec(cfg, &spec)?.0 {
        Density::One(d) => SamplingGrid::One(d),
        Density::Two(d) => SamplingGrid::Two(d),
    })
}

pub fn power(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let n = cfg.require_n()?;
    let kernel = cfg.kernel()?;
    let seed = cfg.seed();
    // Same seed layout as the power tables, so single cells can be recomputed.
    let tag = match KernelVariant::alternatives()
        .iter()
        .position(|k| k.name() == kernel.name())
    {
        Some(j) => 2 + j as u64,
        None => 1,
    };
    with_run(cfg, "power", |run| {
        let null = null_model(cfg)?;
        let basis = BasisFamily::default_for_dimension(null.dimension());
        let cal_seed = study_seed(seed, n, 0);
        let alt_seed = study_seed(seed, n, tag);
        run.seed("calibration_seed", cal_seed);
        run.seed("replication_seed", alt_seed);
        let cal = calibrate_null(
            &null,
            n,
            cfg.alpha(),
            &basis,
            cfg.calibration_reps(),
            cal_seed,
        )?;
        let alt = if kernel.is_dirac() {
            null.sampler.clone()
        } else {
            alternative(cfg, kernel)?
        };
        let est = rejection_rate(&alt, &null, &cal, cfg.reps(), alt_seed)?;
        run.write_json("calibration.json", &cal)?;
        run.write("power.csv", |w| {
            let row = vec![
                n.to_string(),
                kernel.name().to_string(),
                fmt_num(cal.u_alpha),
                est.rejections.to_string(),
                est.reps.to_string(),
                fmt_num(est.power),
                fmt_num(est.se),
            ];
            Ok(write_table(
                w,
                &[
                    "n",
                    "kernel",
                    "u_alpha",
                    "rejections",
                    "reps",
                    "power",
                    "se",
                ],
                &[row],
            )?)
        })?;
        run.result("power", &est);
        Ok(())
    })
}

/// Density to fit: an input density, a KDE of an input sample on the 1-D grid, or the
/// bundled size density.
fn fit_data(cfg: &ExperimentConfig) -> Result<DensityGrid1D, CliError> {
    if let Some(p) = &cfg.input.density {
        return match read_density(p)? {
            Density::One(d) => Ok(d),
            Density::Two(_) => Err(CliError::Config("fits need a 1-D density".into())),
        };
    }
    if let Some(p) = &cfg.input.sample {
        let s = read_sample(
            fs::File::open(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        )?;
        let Sample::One(s) = s else {
            return Err(CliError::Config("fits need a 1-D sample".into()));
        };
        return Ok(kde_1d(&s.points, cfg.fit.bandwidth, cfg.grid_1d()?)?);
    }
    Ok(celldiv::bundled::size_density()?)
}

fn search_options(cfg: &ExperimentConfig) -> SearchOptions {
    let d = SearchOptions::default();
    SearchOptions {
        solver: cfg.solver.clone().unwrap_or(d.solver),
        cache_dir: cfg.fit.cache_dir.clone(),
        adder_nodes: cfg.fit.adder_nodes,
    }
}

pub fn fit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let method = cfg.fit.method.ok_or_else(|| {
        CliError::Config("fit needs --method {moments|lsq|grid-mitosis|grid-adder}".into())
    })?;
    with_run(cfg, "fit", |run| {
        let data = fit_data(cfg)?;
        let opts = search_options(cfg);
        let (fit, table) = match method {
            FitMethod::Moments => (fit_moments(&data)?, None),
            FitMethod::Lsq => (
                fit_least_squares_r(&data, cfg.fit.r.as_deref().unwrap_or(&default_r_grid()))?,
                None,
            ),
            FitMethod::GridMitosis => {
                let g = grid_search_mitosis(
                    &data,
                    &cfg.search_grid(SearchGrid::reference_mitosis()),
                    &opts,
                )?;
                (g.best, Some(g.table))
            }
            FitMethod::GridAdder => {
                let g = grid_search_adder(
                    &data,
                    &cfg.search_grid(SearchGrid::reference_adder()),
                    &opts,
                )?;
                (g.best, Some(g.table))
            }
        };
        if let Some(table) = table {
            let failed = table.iter().filter(|r| r.error.is_some()).count();
            run.result("failed_solves", &failed);
            run.write("objectives.csv", |w| {
                Ok(write_table(
                    w,
                    &OBJECTIVE_TABLE_HEADER,
                    &objective_table_rows(&table),
                )?)
            })?;
        }
        run.write_json("fit.json", &fit)?;
        run.result("fit", &fit);
        Ok(())
    })
}

fn settings(cfg: &ExperimentConfig, default_reps: usize) -> StudySettings {
    StudySettings {
        alpha: cfg.alpha(),
        calibration_reps: cfg.calibration_reps(),
        reps: cfg.test.reps.unwrap_or(default_reps),
        seed: cfg.seed(),
    }
}

const POWER_HEADER: [&str; 7] = [
    "n",
    "u_alpha",
    "level",
    "beta22",
    "uniform",
    "truncnorm",
    "mixture",
];

fn power_rows(t: &PowerTable, prefix: &[String]) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .map(|r| {
            let mut row = prefix.to_vec();
            row.extend([r.n.to_string(), fmt_num(r.u_alpha), fmt_num(r.level.power)]);
            row.extend(r.powers.iter().map(|(_, p)| fmt_num(p.power)));
            row
        })
        .collect()
}

pub fn reproduce_table(cfg: &ExperimentConfig, table: &str) -> Result<(), CliError> {
    with_run(
        cfg,
        &format!("reproduce-table {table}"),
        |run| match table {
            "1" => {
                let sizes = cfg
                    .test
                    .sizes
                    .clone()
                    .unwrap_or_else(|| vec![100, 200, 500]);
                let t = mitosis_power_table(
                    cfg.big_r(),
                    &sizes,
                    cfg.grid_1d()?,
                    &cfg.solver(),
                    &settings(cfg, 200),
                )?;
                run.write("table1.csv", |w| {
                    Ok(write_table(w, &POWER_HEADER, &power_rows(&t, &[]))?)
                })?;
                run.write_json("table1.json", &t)?;
                Ok(())
            }
            "3" => {
                let cases = cfg.test.cases.clone().unwrap_or_else(|| vec![1, 7]);
                let grid = cfg.grid_2d()?;
                let mut tables = Vec::new();
                let mut rows = Vec::new();
                for case in cases {
                    let sizes = cfg
                        .test
                        .sizes
                        .clone()
                        .unwrap_or_else(|| adder_case_sizes(case));
                    let t =
                        adder_power_table(case, &sizes, grid, &cfg.solver(), &settings(cfg, 500))?;
                    rows.extend(power_rows(&t, &[case.to_string()]));
                    tables.push(t);
                }
                let mut header = vec!["case"];
                header.extend(POWER_HEADER);
                run.write("table3.csv", |w| Ok(write_table(w, &header, &rows)?))?;
                run.write_json("table3.json", &tables)?;
                Ok(())
            }
            "5" => {
                let study = table5(cfg)?;
                run.write("table5.csv", |w| write_table5(w, &study))?;
                run.write_json("table5.json", &study)?;
                Ok(())
            }
            other => Err(CliError::Config(format!("unknown table {other}"))),
        },
    )
}

fn table5(cfg: &ExperimentConfig) -> Result<FitStudy, CliError> {
    let density = match &cfg.input.density {
        Some(p) => match read_density(p)? {
            Density::One(d) => d,
            Density::Two(_) => {
                return Err(CliError::Config(
                    "the fitting study needs a 1-D density".into(),
                ))
            }
        },
        None => celldiv::bundled::size_density()?,
    };
    let mut opts = FitStudyOptions::reference(cfg.seed());
    if let Some(n) = cfg.fit.sample_size {
        opts.sample_size = n;
    }
    opts.alpha = cfg.alpha();
    opts.calibration_reps = cfg.calibration_reps();
    opts.bandwidth = cfg.fit.bandwidth;
    if let Some(s) = &cfg.solver {
        opts.search.solver = s.clone();
    }
    opts.search.cache_dir = cfg.fit.cache_dir.clone();
    if cfg.fit.adder_nodes.is_some() {
        opts.search.adder_nodes = cfg.fit.adder_nodes;
    }
    if cfg.fit.search == Some(true) {
        opts.mitosis = ParameterChoice::Search(SearchGrid::reference_mitosis());
        opts.adder = ParameterChoice::Search(SearchGrid::reference_adder());
    }
    Ok(fit_study(&density, &opts)?)
}

fn write_table5<W: Write>(w: W, s: &FitStudy) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = [
        ("moments", &s.moments),
        ("lsq", &s.least_squares),
        ("mitosis-general", &s.mitosis),
        ("adder", &s.adder),
    ]
    .iter()
    .map(|(name, f)| {
        let (a, b, c) = match f.fit.params {
            FitParams::Constant { big_r, n_bar } => (big_r, n_bar, f64::NAN),
            FitParams::Mitosis { r, gamma, eta } | FitParams::Adder { r, gamma, eta } => {
                (r, gamma, eta)
            }
        };
        let cell = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                fmt_num(v)
            }
        };
        vec![
            name.to_string(),
            cell(a),
            cell(b),
            cell(c),
            fmt_num(f.fit.objective),
            fmt_num(f.report.t_alpha),
            f.report.decision.to_string(),
        ]
    })
    .collect();
    Ok(write_table(
        w,
        &[
            "model",
            "p1",
            "p2",
            "p3",
            "objective",
            "t_alpha",
            "decision",
        ],
        &rows,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adder_cases_are_labelled_by_number() {
        let cfg = ExperimentConfig {
            seed: Some(1),
            model: crate::config::ModelConfig {
                family: Some(crate::config::Family::Adder),
                case: Some(7),
                ..Default::default()
            },
            ..Default::default()
        };
        let spec = cfg.model_spec().unwrap();
        assert_eq!(model_label(&cfg, &spec), "adder case 7");
    }
}
