//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Slow parts (adder cases 2–6, full grid searches) run only with
//! `CELLDIV_LONG_TESTS=1`. The process exits with status 0 unless
//! `CELLDIV_ACCEPTANCE_STRICT=1` is set, in which case any FAIL makes it exit 1.

use std::time::Instant;

use celldiv::basis::{
    laguerre_fill, scaling_table, BasisFamily, LaguerreBasis, WaveletBasis2D, SUPPORT,
};
use celldiv::bundled::size_density;
use celldiv::fitting::{
    grid_search_adder, grid_search_mitosis, FitParams, SearchGrid, SearchOptions,
};
use celldiv::gof::{calibrate, simulate_statistics, NullModel};
use celldiv::io::{to_json_string, write_sample};
use celldiv::kernels::KernelVariant;
use celldiv::pde::{
    solve_adder, solve_mitosis, Grid1D, Grid2D, GridDensity, ModelSpec, SolverOptions,
};
use celldiv::sampling::{
    rejection_draw_1d, rejection_draw_2d, rejection_sample_1d, stream_rng, Sample, SampleData,
};
use celldiv::stationary::{
    birth_fixed_point_gamma1, birth_fixed_point_general, reconstruct_n_from_birth, BirthOptions,
    ExplicitNull,
};
use celldiv::studies::{
    adder_case_sizes, adder_power_table, fit_study, mitosis_power_table, FitStudyOptions,
    PowerTable, StudySettings,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const TABLE1_SEED: u64 = 2024;
const TABLE3_SEED: u64 = 2024;
const TABLE5_SEED: u64 = 20240601;

/// Reference powers by sample size, columns Beta(2,2), Uniform, truncated Gaussian, Gaussian mixture.
type PowerRows = [(usize, [f64; 4])];

const TABLE1: [(usize, [f64; 4]); 3] = [
    (100, [0.42, 0.74, 0.45, 0.915]),
    (200, [0.62, 0.965, 0.68, 0.99]),
    (500, [0.995, 1.0, 0.99, 1.0]),
];

const TABLE3: [(usize, &PowerRows); 7] = [
    (
        1,
        &[
            (100, [0.608, 0.938, 0.61, 0.99]),
            (200, [0.834, 0.996, 0.802, 1.0]),
            (500, [0.994, 1.0, 1.0, 1.0]),
            (1000, [1.0, 1.0, 1.0, 1.0]),
        ],
    ),
    (
        2,
        &[
            (100, [0.416, 0.852, 0.402, 0.93]),
            (200, [0.708, 0.99, 0.688, 0.998]),
            (500, [0.944, 1.0, 0.954, 1.0]),
        ],
    ),
    (
        3,
        &[
            (10, [0.796, 0.94, 0.732, 0.966]),
            (20, [0.954, 0.998, 0.924, 1.0]),
            (50, [1.0, 1.0, 1.0, 1.0]),
        ],
    ),
    (
        4,
        &[
            (10, [0.748, 0.916, 0.794, 0.976]),
            (20, [0.97, 0.994, 0.976, 1.0]),
            (50, [1.0, 1.0, 1.0, 1.0]),
        ],
    ),
    (
        5,
        &[
            (10, [0.492, 0.762, 0.474, 0.854]),
            (20, [0.802, 0.966, 0.714, 0.978]),
            (50, [0.974, 1.0, 0.952, 1.0]),
        ],
    ),
    (
        6,
        &[
            (10, [0.304, 0.552, 0.274, 0.674]),
            (20, [0.438, 0.766, 0.452, 0.878]),
            (50, [0.786, 0.988, 0.808, 0.996]),
            (100, [0.964, 1.0, 0.95, 1.0]),
        ],
    ),
    (
        7,
        &[
            (10, [0.76, 0.934, 0.696, 0.968]),
            (20, [0.932, 0.992, 0.936, 0.998]),
            (50, [1.0, 1.0, 1.0, 1.0]),
        ],
    ),
];

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: &str, name: &str, pass: bool, details: &[String]) {
        if !pass {
            self.failures += 1;
        }
        println!("{} {id} {name}", if pass { "PASS" } else { "FAIL" });
        for d in details {
            println!("    {d}");
        }
    }

    fn skip(&self, id: &str, name: &str) {
        println!("SKIP {id} {name} (set CELLDIV_LONG_TESTS=1)");
    }

    fn error(&mut self, id: &str, name: &str, e: celldiv::Error) {
        self.report(id, name, false, &[format!("error: {e}")]);
    }
}

fn long_tests() -> bool {
    std::env::var("CELLDIV_LONG_TESTS").is_ok_and(|v| v == "1")
}

fn criterion_1(s: &mut Suite) {
    let name = "explicit-solution oracle";
    let t = Instant::now();
    let grid = Grid1D::default();
    let spec = ModelSpec::mitosis_constant(1.0, KernelVariant::DiracHalf).unwrap();
    let sol = match solve_mitosis(&spec, grid, &SolverOptions::default()) {
        Ok(sol) => sol,
        Err(e) => return s.error("1", name, e),
    };
    let secs = t.elapsed().as_secs_f64();
    let exact = ExplicitNull::new(1.0)
        .unwrap()
        .tabulate(grid.x_max, grid.n_x);
    let rel = (sol.density.l2_dist_sq(&exact).unwrap() / exact.l2_norm_sq()).sqrt();
    s.report(
        "1",
        name,
        rel < 1e-2 && secs < 60.0,
        &[format!(
            "relative L2 error {rel:.3e} (< 1e-2), runtime {secs:.1} s (< 60 s)"
        )],
    )
}

/// Compares a power table with reference powers; returns failure descriptions.
fn compare_powers(
    t: &PowerTable,
    reference: &PowerRows,
    tol: f64,
    prefix: &str,
) -> (Vec<String>, Vec<String>) {
    let mut details = Vec::new();
    let mut failures = Vec::new();
    for row in &t.rows {
        let Some((_, reference)) = reference.iter().find(|(n, _)| *n == row.n) else {
            continue;
        };
        let level = row.level.power;
        let mut line = format!("{prefix}n = {:4}: level {level:.3}", row.n);
        if !(0.02..=0.10).contains(&level) {
            failures.push(format!(
                "{prefix}n = {} level {level:.3} outside [0.02, 0.10]",
                row.n
            ));
        }
        for ((k, est), p) in row.powers.iter().zip(reference) {
            line.push_str(&format!(", {} {:.3} (reference {p})", k.name(), est.power));
            if (est.power - p).abs() > tol + 1e-12 {
                failures.push(format!(
                    "{prefix}n = {} {}: {:.3} vs {p} (±{tol})",
                    row.n,
                    k.name(),
                    est.power
                ));
            }
        }
        details.push(line);
    }
    (details, failures)
}

fn criterion_2(s: &mut Suite) {
    let name = "Table 1 powers within ±0.10, levels in [0.02, 0.10]";
    let settings = StudySettings {
        alpha: 0.05,
        calibration_reps: 200,
        reps: 200,
        seed: TABLE1_SEED,
    };
    let t = Instant::now();
    let table = match mitosis_power_table(
        1.0,
        &[100, 200, 500],
        Grid1D::default(),
        &SolverOptions::default(),
        &settings,
    ) {
        Ok(t) => t,
        Err(e) => return s.error("2", name, e),
    };
    let (mut details, failures) = compare_powers(&table, &TABLE1, 0.10, "");
    details.push(format!("{:.1} s", t.elapsed().as_secs_f64()));
    let pass = failures.is_empty();
    details.extend(failures.into_iter().map(|f| format!("miss: {f}")));
    s.report("2", name, pass, &details);
}

fn adder_cases(s: &mut Suite, id: &str, cases: &[usize]) {
    let name = format!("Table 3 cases {cases:?} powers within ±0.08, levels in [0.02, 0.10]");
    let settings = StudySettings {
        alpha: 0.05,
        calibration_reps: 500,
        reps: 500,
        seed: TABLE3_SEED,
    };
    let mut details = Vec::new();
    let mut failures = Vec::new();
    for &case in cases {
        let t = Instant::now();
        let table = match adder_power_table(
            case,
            &adder_case_sizes(case),
            Grid2D::default(),
            &SolverOptions::default(),
            &settings,
        ) {
            Ok(t) => t,
            Err(e) => return s.error(id, &name, e),
        };
        let expected = TABLE3.iter().find(|(c, _)| *c == case).unwrap().1;
        let (d, f) = compare_powers(&table, expected, 0.08, &format!("case {case} "));
        details.extend(d);
        details.push(format!("case {case}: {:.1} s", t.elapsed().as_secs_f64()));
        failures.extend(f);
    }
    let pass = failures.is_empty();
    details.extend(failures.into_iter().map(|f| format!("miss: {f}")));
    s.report(id, &name, pass, &details);
}

fn criterion_4(s: &mut Suite) {
    let name = "Table 5 fits and fitted tests on the bundled density";
    let density = size_density().unwrap();
    let t = Instant::now();
    let study = match fit_study(&density, &FitStudyOptions::reference(TABLE5_SEED)) {
        Ok(st) => st,
        Err(e) => return s.error("4", name, e),
    };
    let constant = |f: &celldiv::fitting::FitResult| match f.params {
        FitParams::Constant { big_r, n_bar } => (big_r, n_bar),
        _ => unreachable!(),
    };
    let (r_mom, n_bar) = constant(&study.moments.fit);
    let (r_lsq, _) = constant(&study.least_squares.fit);
    let checks = [
        (
            (1.6..=1.9).contains(&r_mom),
            format!("moment R = {r_mom:.4} in [1.6, 1.9]"),
        ),
        (
            (11.0..=13.0).contains(&n_bar),
            format!("moment N = {n_bar:.3} in [11, 13]"),
        ),
        (
            (1.3..=1.55).contains(&r_lsq),
            format!("least-squares R = {r_lsq:.4} in [1.3, 1.55]"),
        ),
        (
            study.moments.report.t_alpha > 0.0,
            format!(
                "moment-fit test rejects: T = {:.4}",
                study.moments.report.t_alpha
            ),
        ),
        (
            study.least_squares.report.t_alpha > 0.0,
            format!(
                "least-squares-fit test rejects: T = {:.4}",
                study.least_squares.report.t_alpha
            ),
        ),
        (
            study.mitosis.report.t_alpha <= 0.0,
            format!(
                "general-mitosis fitted test accepts: T = {:.4}",
                study.mitosis.report.t_alpha
            ),
        ),
        (
            study.adder.report.t_alpha <= 0.0,
            format!(
                "adder fitted test accepts: T = {:.4}",
                study.adder.report.t_alpha
            ),
        ),
    ];
    let pass = checks.iter().all(|(ok, _)| *ok);
    let mut details: Vec<String> = checks
        .iter()
        .map(|(ok, d)| format!("{} {d}", if *ok { "ok  " } else { "miss" }))
        .collect();
    details.push(format!("{:.1} s", t.elapsed().as_secs_f64()));
    s.report("4", name, pass, &details);
}

fn criterion_4_long(s: &mut Suite) {
    let name = "grid-search argmins equal the reference triples";
    let density = size_density().unwrap();
    let cache = std::env::temp_dir().join("celldiv-acceptance-cache");
    let _ = std::fs::create_dir_all(&cache);
    let mut opts = SearchOptions {
        cache_dir: Some(cache),
        ..SearchOptions::default()
    };
    let t = Instant::now();
    let mitosis = grid_search_mitosis(&density, &SearchGrid::reference_mitosis(), &opts);
    opts.solver.eps = 1e-5;
    opts.adder_nodes = Some(150);
    let adder = grid_search_adder(&density, &SearchGrid::reference_adder(), &opts);
    let (mitosis, adder) = match (mitosis, adder) {
        (Ok(m), Ok(a)) => (m, a),
        (Err(e), _) | (_, Err(e)) => return s.error("4-long", name, e),
    };
    let triple = |p: &FitParams| match *p {
        FitParams::Mitosis { r, gamma, eta } | FitParams::Adder { r, gamma, eta } => {
            [r, gamma, eta]
        }
        _ => unreachable!(),
    };
    let (m, a) = (triple(&mitosis.best.params), triple(&adder.best.params));
    let (m_ok, a_ok) = (m == [0.05, 1.325, 9.0], a == [5.0, 9.0, 3.775]);
    s.report(
        "4-long",
        name,
        m_ok && a_ok,
        &[
            format!(
                "mitosis argmin {m:?} (reference [0.05, 1.325, 9.0]), objective {:.4e}",
                mitosis.best.objective
            ),
            format!(
                "adder argmin {a:?} (reference [5.0, 9.0, 3.775]), objective {:.4e}",
                adder.best.objective
            ),
            format!(
                "failed solves: mitosis {}, adder {}; {:.0} s",
                mitosis.table.iter().filter(|r| r.error.is_some()).count(),
                adder.table.iter().filter(|r| r.error.is_some()).count(),
                t.elapsed().as_secs_f64()
            ),
        ],
    );
}

fn criterion_5(s: &mut Suite) {
    let name = "birth fixed point agrees with the adder solver; co-iterated λ = 1";
    let grid = Grid2D::default();
    let mut details = Vec::new();
    let mut pass = true;
    for eta in [1.0, 2.0] {
        let spec = ModelSpec::adder(1.0, 1.0, 1.0, eta, KernelVariant::Uniform).unwrap();
        let res = solve_adder(&spec, grid, &SolverOptions::default()).and_then(|sol| {
            let b =
                birth_fixed_point_gamma1(eta, KernelVariant::Uniform, &BirthOptions::default())?;
            let n = reconstruct_n_from_birth(&b, grid)?;
            let lam = birth_fixed_point_general(
                1.0,
                eta,
                KernelVariant::Uniform,
                &BirthOptions::default(),
            )?
            .lambda;
            Ok((sol.density.l1_dist(&n)?, lam))
        });
        match res {
            Ok((l1, lam)) => {
                pass &= l1 < 0.05 && (lam - 1.0).abs() <= 0.02;
                details.push(format!(
                    "η = {eta}: L1 distance {l1:.4e} (< 0.05), λ = {lam:.5} (1 ± 0.02)"
                ));
            }
            Err(e) => return s.error("5", name, e),
        }
    }
    s.report("5", name, pass, &details);
}

/// Composite Simpson weights on `[0, b]` with `m` (even) intervals.
fn simpson(b: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = b / m as f64;
    let xs = (0..=m).map(|i| i as f64 * h).collect();
    let ws = (0..=m)
        .map(|i| {
            let c = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (xs, ws)
}

fn laguerre_orthonormality() -> (bool, String) {
    let d = 20;
    let (xs, ws) = simpson(60.0, 1 << 16);
    let mut gram = vec![0.0; d * d];
    let mut phi = vec![0.0; d];
    for (x, w) in xs.iter().zip(&ws) {
        laguerre_fill(*x, &mut phi);
        for i in 0..d {
            for j in 0..d {
                gram[i * d + j] += w * phi[i] * phi[j];
            }
        }
    }
    let err = (0..d * d)
        .map(|k| (gram[k] - if k / d == k % d { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    (
        err < 1e-6,
        format!("Laguerre Gram matrix D = 20: max deviation {err:.2e} (< 1e-6)"),
    )
}

fn partition_of_unity() -> (bool, String) {
    let table = scaling_table();
    let mut err: f64 = 0.0;
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        let sum: f64 = (-(SUPPORT as i64)..=1)
            .map(|k| table.eval(t - k as f64))
            .sum();
        err = err.max((sum - 1.0).abs());
    }
    (
        err < 1e-6,
        format!("scaling-function partition of unity: max deviation {err:.2e} (< 1e-6)"),
    )
}

/// Pairwise-sum U-statistic.
fn naive_u_1d(xs: &[f64], d: usize) -> f64 {
    let b = LaguerreBasis::new(d).unwrap();
    let phis: Vec<Vec<f64>> = xs.iter().map(|&x| b.eval_all(x).unwrap()).collect();
    let n = xs.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += phis[i]
                    .iter()
                    .zip(&phis[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }
    }
    s / (n * (n - 1)) as f64
}

fn naive_u_2d(pts: &[[f64; 2]], level: u32, k_max: i32) -> f64 {
    let b = WaveletBasis2D::new(level, k_max).unwrap();
    let m = b.translations();
    let evals: Vec<(Vec<f64>, Vec<f64>)> = pts
        .iter()
        .map(|p| {
            let (mut pa, mut px) = (vec![0.0; m], vec![0.0; m]);
            b.eval_1d(p[0], &mut pa);
            b.eval_1d(p[1], &mut px);
            (pa, px)
        })
        .collect();
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let da: f64 = evals[i].0.iter().zip(&evals[j].0).map(|(a, b)| a * b).sum();
            let dx: f64 = evals[i].1.iter().zip(&evals[j].1).map(|(a, b)| a * b).sum();
            s += da * dx;
        }
    }
    s / (n * (n - 1)) as f64
}

fn u_stat_matches_naive() -> (bool, String) {
    let mut rng = stream_rng(606, 0);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let n = rng.gen_range(2..40);
        let (fast, naive) = if inst % 2 == 0 {
            let d = rng.gen_range(1..=20);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..8.0)).collect();
            let fast = BasisFamily::Laguerre { dims: vec![d] }
                .u_stats(&SampleData::One(xs.clone()))
                .unwrap()[0];
            (fast, naive_u_1d(&xs, d))
        } else {
            let level = rng.gen_range(0..=4);
            let span = 8.0 / f64::powi(2.0, level as i32);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(0.0..span), rng.gen_range(0.0..span)])
                .collect();
            let fast = BasisFamily::Wavelet {
                levels: vec![level],
                k_max: 10,
            }
            .u_stats(&SampleData::Two(pts.clone()))
            .unwrap()[0];
            (fast, naive_u_2d(&pts, level, 10))
        };
        worst = worst.max((fast - naive).abs() / naive.abs().max(1.0));
    }
    (
        worst < 1e-12,
        format!(
            "O(nD) U-statistic vs pairwise sum, 100 instances: max deviation {worst:.2e} (< 1e-12)"
        ),
    )
}

fn u_stat_unbiased() -> (bool, String) {
    // Exp(1) data: E[U_D] = Σ_{l<D} <φ_l, e^{-x}>².
    let d = 6;
    let (xs, ws) = simpson(60.0, 1 << 14);
    let mut coef = vec![0.0; d];
    let mut phi = vec![0.0; d];
    for (x, w) in xs.iter().zip(&ws) {
        laguerre_fill(*x, &mut phi);
        for l in 0..d {
            coef[l] += w * phi[l] * (-x).exp();
        }
    }
    let target: f64 = coef.iter().map(|c| c * c).sum();
    let basis = BasisFamily::Laguerre { dims: vec![d] };
    let reps = 10_000;
    let mut rng = stream_rng(707, 0);
    let us: Vec<f64> = (0..reps)
        .map(|_| {
            let sample: Vec<f64> = (0..20).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            basis.u_stats(&SampleData::One(sample)).unwrap()[0]
        })
        .collect();
    let mean = us.iter().sum::<f64>() / reps as f64;
    let sd = (us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    let z = (mean - target) / se;
    (
        z.abs() < 3.0,
        format!(
            "U-statistic mean {mean:.5} vs projection norm {target:.5} at n = 20: {z:.2} SE (< 3)"
        ),
    )
}

fn calibration_level() -> (bool, String) {
    let null = NullModel::explicit(1.0, Grid1D::default()).unwrap();
    let basis = BasisFamily::laguerre_default();
    let (n, reps, seed, alpha) = (100, 200, 808, 0.05);
    let cal = calibrate(&null, n, alpha, &basis, reps, seed).unwrap();
    let stats = simulate_statistics(&null.sampler, &null, &basis, n, reps, seed).unwrap();
    let rejected = stats
        .iter()
        .filter(|row| row.iter().zip(&cal.quantiles).any(|(t, q)| t > q))
        .count();
    let level = rejected as f64 / reps as f64;
    (
        level <= alpha && (level - cal.empirical_level).abs() < 1e-15,
        format!("union rejection rate on the calibration replications {level:.3} (≤ {alpha})"),
    )
}

fn chi_square_1d() -> (bool, String) {
    let d = ExplicitNull::new(1.0)
        .unwrap()
        .tabulate(10.0, 1000)
        .normalized()
        .unwrap();
    let n = 100_000;
    let xs = rejection_draw_1d(&d, n, &mut stream_rng(909, 0)).unwrap();
    let cdf = d.cdf();
    let bins = 20;
    // Equiprobable bin edges from the piecewise-linear CDF.
    let edges: Vec<f64> = (1..bins)
        .map(|k| {
            let p = k as f64 / bins as f64;
            let i = cdf.iter().position(|&c| c >= p).unwrap();
            let (c0, c1) = (cdf[i - 1], cdf[i]);
            d.x(i - 1) + (p - c0) / (c1 - c0) * d.dx()
        })
        .collect();
    let mut counts = vec![0usize; bins];
    for x in xs {
        counts[edges.partition_point(|&e| e <= x)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let crit = ChiSquared::new((bins - 1) as f64)
        .unwrap()
        .inverse_cdf(0.999);
    (
        stat < crit,
        format!(
            "1-D sampler χ² = {stat:.2} on {} df (< {crit:.2})",
            bins - 1
        ),
    )
}

fn chi_square_2d() -> (bool, String) {
    let d = celldiv::pde::DensityGrid2D::from_fn(2.0, 2.0, 40, 40, |a, x| {
        if x >= a {
            (1.0 + a) * (-x).exp()
        } else {
            0.0
        }
    });
    let n = 100_000;
    let pts = rejection_draw_2d(&d, n, &mut stream_rng(1010, 0)).unwrap();
    // 4 × 4 blocks; expected mass by fine midpoint quadrature of the bilinear interpolant.
    let m = 200;
    let h = 2.0 / m as f64;
    let mut probs = vec![0.0; 16];
    for i in 0..m {
        for j in 0..m {
            let (a, x) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let v = if x >= a { d.eval(a, x) } else { 0.0 };
            probs[(i * 4 / m) * 4 + j * 4 / m] += v * h * h;
        }
    }
    let total: f64 = probs.iter().sum();
    let mut counts = [0usize; 16];
    for p in pts {
        let (i, j) = (
            ((p[0] / 0.5) as usize).min(3),
            ((p[1] / 0.5) as usize).min(3),
        );
        counts[i * 4 + j] += 1;
    }
    let mut stat = 0.0;
    let mut df = 0;
    for (c, p) in counts.iter().zip(&probs) {
        let e = n as f64 * p / total;
        if e > 5.0 {
            stat += (*c as f64 - e).powi(2) / e;
            df += 1;
        }
    }
    let crit = ChiSquared::new((df - 1) as f64).unwrap().inverse_cdf(0.999);
    (
        stat < crit,
        format!("2-D sampler χ² = {stat:.2} on {} df (< {crit:.2})", df - 1),
    )
}

fn determinism() -> (bool, String) {
    let d = ExplicitNull::new(1.0).unwrap().tabulate(10.0, 1000);
    let bytes = |seed| {
        let s = Sample::One(rejection_sample_1d(&d, 500, seed, "determinism").unwrap());
        let mut buf = Vec::new();
        write_sample(&mut buf, &s).unwrap();
        buf
    };
    let samples_equal = bytes(5) == bytes(5) && bytes(5) != bytes(6);
    let null = NullModel::explicit(1.0, Grid1D::default()).unwrap();
    let basis = BasisFamily::laguerre_default();
    let cal_json = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            to_json_string(&calibrate(&null, 50, 0.05, &basis, 100, 42).unwrap()).unwrap()
        })
    };
    let cal_equal = cal_json(1) == cal_json(3);
    (
        samples_equal && cal_equal,
        format!("sample bytes reproducible: {samples_equal}; calibration JSON identical on 1 and 3 threads: {cal_equal}"),
    )
}

fn criterion_6(s: &mut Suite) {
    let checks = [
        laguerre_orthonormality(),
        partition_of_unity(),
        u_stat_matches_naive(),
        u_stat_unbiased(),
        calibration_level(),
        chi_square_1d(),
        chi_square_2d(),
        determinism(),
    ];
    let pass = checks.iter().all(|(ok, _)| *ok);
    let details: Vec<String> = checks
        .iter()
        .map(|(ok, d)| format!("{} {d}", if *ok { "ok  " } else { "miss" }))
        .collect();
    s.report("6", "property suites", pass, &details);
}

fn main() {
    let mut s = Suite { failures: 0 };
    let t = Instant::now();
    criterion_1(&mut s);
    criterion_2(&mut s);
    adder_cases(&mut s, "3", &[1, 7]);
    if long_tests() {
        adder_cases(&mut s, "3-long", &[2, 3, 4, 5, 6]);
    } else {
        s.skip("3-long", "Table 3 cases 2–6");
    }
    criterion_4(&mut s);
    if long_tests() {
        criterion_4_long(&mut s);
    } else {
        s.skip("4-long", "grid-search argmins equal the reference triples");
    }
    criterion_5(&mut s);
    criterion_6(&mut s);
    println!(
        "{} failing criteria; {:.0} s",
        s.failures,
        t.elapsed().as_secs_f64()
    );
    let strict = std::env::var("CELLDIV_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && s.failures > 0 {
        std::process::exit(1);
    }
}
