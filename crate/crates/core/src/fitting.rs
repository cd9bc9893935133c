//! Parameter estimation for the null models: moment and least-squares fits of the
//! constant-rate mitosis density, and L² grid searches over `(r, γ, η)` for the
//! general mitosis and adder models.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gof::replicate;
use crate::kernels::KernelVariant;
use crate::pde::{
    initial_bump_2d, solve_adder_from, solve_mitosis_from, DensityGrid1D, Grid2D, GridDensity,
    ModelSpec, SolverOptions,
};
use crate::stationary::{alpha_coefficients, ExplicitNull, DEFAULT_TERMS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitParams {
    Constant {
        #[serde(rename = "R")]
        big_r: f64,
        n_bar: f64,
    },
    Mitosis {
        r: f64,
        gamma: f64,
        eta: f64,
    },
    Adder {
        r: f64,
        gamma: f64,
        eta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: String,
    pub params: FitParams,
    /// Squared L² distance between the fitted density and the data.
    pub objective: f64,
    /// Malthus eigenvalue of the fitted model, when a solver was involved.
    pub lambda: Option<f64>,
    pub search_grid: String,
}

fn check_data(data: &DensityGrid1D) -> Result<DensityGrid1D> {
    data.clone()
        .normalized()
        .map_err(|_| Error::Domain("data density has no mass".into()))
}

/// Closed-form moment estimates of `R` and `N̄` matching mass and mean size.
pub fn fit_moments(data: &DensityGrid1D) -> Result<FitResult> {
    let mass = data.mass();
    let moment = data.first_moment();
    if !(moment > 0.0) || !moment.is_finite() || !(mass > 0.0) {
        return Err(Error::Domain(format!(
            "data first moment must be positive, got {moment}"
        )));
    }
    let alpha = alpha_coefficients(DEFAULT_TERMS);
    let (s1, s2) = (alpha.mass_constant(), alpha.moment_constant());
    let big_r = s2 / s1 * mass / moment;
    let n_bar = big_r * mass / s1;
    let objective = explicit_objective(big_r, &check_data(data)?)?;
    Ok(FitResult {
        method: "moments".into(),
        params: FitParams::Constant { big_r, n_bar },
        objective,
        lambda: None,
        search_grid: "closed form".into(),
    })
}

fn explicit_objective(big_r: f64, data: &DensityGrid1D) -> Result<f64> {
    let n0 = ExplicitNull::new(big_r)?;
    n0.tabulate(data.x_max, data.n_x).l2_dist_sq(data)
}

/// `{0.01, 0.02, …, 20}`.
pub fn default_r_grid() -> Vec<f64> {
    (1..=2000).map(|k| k as f64 / 100.0).collect()
}

/// Least-squares `R` over a grid; `N̄ = R / Σ(−1)^n α_n 2^{−n−1}`.
pub fn fit_least_squares_r(data: &DensityGrid1D, grid: &[f64]) -> Result<FitResult> {
    if grid.is_empty() {
        return Err(Error::Config("least-squares grid is empty".into()));
    }
    let data = check_data(data)?;
    let mut best: Option<(f64, f64)> = None;
    for &r in grid {
        let obj = explicit_objective(r, &data)?;
        if best.is_none_or(|(_, b)| obj < b) {
            best = Some((r, obj));
        }
    }
    let (big_r, objective) = best.expect("grid is non-empty");
    let n_bar = ExplicitNull::new(big_r)?.n_bar;
    Ok(FitResult {
        method: "lsq".into(),
        params: FitParams::Constant { big_r, n_bar },
        objective,
        lambda: None,
        search_grid: format!(
            "{} values in [{}, {}]",
            grid.len(),
            grid[0],
            grid[grid.len() - 1]
        ),
    })
}

/// Axes of a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub r: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
}

fn arith(start_milli: i64, step_milli: i64, count: usize) -> Vec<f64> {
    (0..count as i64)
        .map(|k| (start_milli + k * step_milli) as f64 / 1000.0)
        .collect()
}

impl SearchGrid {
    /// General mitosis grid. The `r` list repeats 0.01; duplicates only repeat a row of the objective table.
    pub fn reference_mitosis() -> Self {
        let mut eta = arith(500, 325, 21);
        eta.extend(arith(7500, 500, 6));
        SearchGrid {
            r: vec![0.001, 0.01, 0.05, 0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 20.0],
            gamma: arith(500, 275, 21),
            eta,
        }
    }

    pub fn reference_adder() -> Self {
        SearchGrid {
            r: vec![0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            gamma: arith(5000, 500, 11),
            eta: arith(100, 245, 21),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len() * self.gamma.len() * self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Triples in `r`-major order.
    pub fn triples(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for &r in &self.r {
            for &g in &self.gamma {
                for &e in &self.eta {
                    out.push([r, g, e]);
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!(
            "{} × {} × {} grid",
            self.r.len(),
            self.gamma.len(),
            self.eta.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRow {
    pub r: f64,
    pub gamma: f64,
    pub eta: f64,
    pub objective: Option<f64>,
    pub lambda: Option<f64>,
    pub steps: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: FitResult,
    pub table: Vec<ObjectiveRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub solver: SolverOptions,
    /// Directory for cached stationary profiles.
    pub cache_dir: Option<PathBuf>,
    /// Nodes per axis of the adder solves; the marginal is interpolated back onto the data grid.
    pub adder_nodes: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            solver: SolverOptions {
                max_steps: 200_000,
                ..SolverOptions::local()
            },
            cache_dir: None,
            adder_nodes: None,
        }
    }
}

/// Cached marginal profile of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedProfile {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub steps: usize,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    model: &'a str,
    triple: [u64; 3],
    grid: [u64; 3],
    init: String,
    solver: &'a SolverOptions,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn values_digest(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    digest(&bytes)
}

fn cache_path(dir: &Path, key: &CacheKey) -> Result<PathBuf> {
    let text = serde_json::to_string(key).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(dir.join(format!("{}.json", &digest(text.as_bytes())[..24])))
}

fn cached_solve<F>(dir: Option<&Path>, key: &CacheKey, solve: F) -> Result<CachedProfile>
where
    F: FnOnce() -> Result<CachedProfile>,
{
    let path = match dir {
        Some(d) => Some(cache_path(d, key)?),
        None => None,
    };
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            match serde_json::from_str::<CachedProfile>(&text) {
                Ok(c) => return Ok(c),
                Err(e) => warn!("ignoring unreadable cache entry {}: {e}", p.display()),
            }
        }
    }
    let profile = solve()?;
    if let Some(p) = &path {
        // Written to a temporary name first so an interrupted run leaves no torn entry.
        let tmp = p.with_extension(format!("tmp{}", std::process::id()));
        let text = serde_json::to_string(&profile).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, p)?;
    }
    Ok(profile)
}

fn search<F>(
    method: &str,
    data: &DensityGrid1D,
    grid: &SearchGrid,
    make: impl Fn(f64, f64, f64) -> FitParams,
    solve: F,
) -> Result<GridSearchResult>
where
    F: Fn([f64; 3]) -> Result<CachedProfile> + Sync + Send,
{
    if grid.is_empty() {
        return Err(Error::Config("search grid has an empty axis".into()));
    }
    let triples = grid.triples();
    let rows = replicate(triples.len(), |k| {
        let t = triples[k];
        let row = match solve(t) {
            Ok(p) => {
                let model = DensityGrid1D {
                    x_max: data.x_max,
                    n_x: data.n_x,
                    values: p.values,
                };
                match model.l2_dist_sq(data) {
                    Ok(obj) if obj.is_finite() => ObjectiveRow {
                        r: t[0],
                        gamma: t[1],
                        eta: t[2],
                        objective: Some(obj),
                        lambda: Some(p.lambda),
                        steps: Some(p.steps),
                        error: None,
                    },
                    Ok(obj) => failed(t, format!("non-finite objective {obj}")),
                    Err(e) => failed(t, e.to_string()),
                }
            }
            Err(e) => failed(t, e.to_string()),
        };
        Ok(row)
    })?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        warn!(
            "{failures} of {} solves failed and were skipped",
            rows.len()
        );
    }
    // First minimum in table order wins ties.
    let best = rows
        .iter()
        .filter_map(|r| r.objective.map(|o| (o, r)))
        .fold(None::<(f64, &ObjectiveRow)>, |acc, (o, r)| match acc {
            Some((b, _)) if b <= o => acc,
            _ => Some((o, r)),
        })
        .ok_or_else(|| {
            Error::Instability(format!("all {} grid-search solves failed", rows.len()))
        })?;
    let (objective, row) = best;
    info!(
        "{method}: best (r, γ, η) = ({}, {}, {}), objective {objective:e}",
        row.r, row.gamma, row.eta
    );
    Ok(GridSearchResult {
        best: FitResult {
            method: method.into(),
            params: make(row.r, row.gamma, row.eta),
            objective,
            lambda: row.lambda,
            search_grid: grid.describe(),
        },
        table: rows,
    })
}

fn failed(t: [f64; 3], msg: String) -> ObjectiveRow {
    ObjectiveRow {
        r: t[0],
        gamma: t[1],
        eta: t[2],
        objective: None,
        lambda: None,
        steps: None,
        error: Some(msg),
    }
}

/// Grid search of `g = r x^γ`, `B = x^η` under equal mitosis, each solve started
/// from the data density on the data grid.
pub fn grid_search_mitosis(
    data: &DensityGrid1D,
    grid: &SearchGrid,
    opts: &SearchOptions,
) -> Result<GridSearchResult> {
    let data = check_data(data)?;
    opts.solver.validate()?;
    let init_hash = values_digest(&data.values);
    search(
        "grid-mitosis",
        &data,
        grid,
        |r, gamma, eta| FitParams::Mitosis { r, gamma, eta },
        |t| {
            let key = CacheKey {
                model: "mitosis-general",
                triple: t.map(f64::to_bits),
                grid: [data.x_max.to_bits(), data.n_x as u64, 0],
                init: init_hash.clone(),
                solver: &opts.solver,
            };
            cached_solve(opts.cache_dir.as_deref(), &key, || {
                let spec = ModelSpec::mitosis_general(t[0], t[1], t[2], KernelVariant::DiracHalf)?;
                let s = solve_mitosis_from(&spec, &data, 0.0, &opts.solver)?;
                Ok(CachedProfile {
                    values: s.density.values,
                    lambda: s.lambda,
                    steps: s.steps,
                })
            })
        },
    )
}

/// Joint grid for the adder search: `a` and `x` share one spacing over the data range,
/// with `nodes` points per axis (the data's node count by default).
pub fn adder_grid_for(data: &DensityGrid1D, nodes: Option<usize>) -> Grid2D {
    let n = nodes.unwrap_or(data.n_x);
    Grid2D {
        a_max: data.x_max,
        x_max: data.x_max,
        n_a: n,
        n_x: n,
    }
}

/// Stationary size marginal of the adder model `g = r x^γ`, `B = a^η` on `grid`.
pub fn adder_marginal(
    r: f64,
    gamma: f64,
    eta: f64,
    grid: Grid2D,
    opts: &SolverOptions,
) -> Result<CachedProfile> {
    let spec = ModelSpec::adder(r, gamma, 1.0, eta, KernelVariant::DiracHalf)?;
    let s = solve_adder_from(&spec, &initial_bump_2d(grid), 0.0, opts)?;
    let marginal = s.density.marginal_x().normalized()?;
    Ok(CachedProfile {
        values: marginal.values,
        lambda: s.lambda,
        steps: s.steps,
    })
}

/// Grid search of the adder model, scoring the size marginal against the data.
///
/// Dividing the stationary adder equation by `r` leaves a problem in `λ/r` only, so
/// the profile does not depend on `r`: each `(γ, η)` is solved once with `r = 1` and
/// the row is repeated for every `r` with `λ` scaled by `r`. The objective is then
/// flat in `r` and ties resolve to the first `r` of the grid.
pub fn grid_search_adder(
    data: &DensityGrid1D,
    grid: &SearchGrid,
    opts: &SearchOptions,
) -> Result<GridSearchResult> {
    let data = check_data(data)?;
    opts.solver.validate()?;
    let g2 = adder_grid_for(&data, opts.adder_nodes);
    let reduced = SearchGrid {
        r: vec![1.0],
        gamma: grid.gamma.clone(),
        eta: grid.eta.clone(),
    };
    let unit = search(
        "grid-adder",
        &data,
        &reduced,
        |_, _, _| FitParams::Adder {
            r: 1.0,
            gamma: 0.0,
            eta: 0.0,
        },
        |t| {
            let key = CacheKey {
                model: "adder",
                triple: t.map(f64::to_bits),
                grid: [g2.a_max.to_bits(), g2.n_a as u64, g2.n_x as u64],
                init: "bump".into(),
                solver: &opts.solver,
            };
            cached_solve(opts.cache_dir.as_deref(), &key, || {
                let mut p = adder_marginal(t[0], t[1], t[2], g2, &opts.solver)?;
                if g2.n_x != data.n_x {
                    let coarse = DensityGrid1D {
                        x_max: g2.x_max,
                        n_x: g2.n_x,
                        values: p.values,
                    };
                    p.values = coarse.resample(data.x_max, data.n_x).normalized()?.values;
                }
                Ok(p)
            })
        },
    )?;
    let mut table = Vec::with_capacity(grid.len());
    for &r in &grid.r {
        for row in &unit.table {
            table.push(ObjectiveRow {
                r,
                lambda: row.lambda.map(|l| l * r),
                ..row.clone()
            });
        }
    }
    let best = table
        .iter()
        .filter(|row| row.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
        .expect("the reduced search found a minimum");
    Ok(GridSearchResult {
        best: FitResult {
            method: "grid-adder".into(),
            params: FitParams::Adder {
                r: best.r,
                gamma: best.gamma,
                eta: best.eta,
            },
            objective: best.objective.unwrap(),
            lambda: best.lambda,
            search_grid: grid.describe(),
        },
        table,
    })
}

/// Objective table as CSV rows (`r,gamma,eta,objective,lambda,status`).
pub fn objective_table_rows(table: &[ObjectiveRow]) -> Vec<Vec<String>> {
    use crate::io::fmt_num;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    table
        .iter()
        .map(|row| {
            vec![
                fmt_num(row.r),
                fmt_num(row.gamma),
                fmt_num(row.eta),
                opt(row.objective),
                opt(row.lambda),
                row.error
                    .clone()
                    .map_or_else(|| "ok".to_string(), |e| e.replace([',', '\n'], ";")),
            ]
        })
        .collect()
}

pub const OBJECTIVE_TABLE_HEADER: [&str; 6] =
    ["r", "gamma", "eta", "objective", "lambda", "status"];

#[cfg(test)]
mod tests {
    use super::*;

    fn n0_table(big_r: f64) -> DensityGrid1D {
        ExplicitNull::new(big_r)
            .unwrap()
            .tabulate(10.0 / big_r, 2000)
    }

    #[test]
    fn moments_recover_r_of_exact_table() {
        for r in [0.7, 1.0, 2.3] {
            let fit = fit_moments(&n0_table(r)).unwrap();
            let FitParams::Constant { big_r, .. } = fit.params else {
                panic!()
            };
            assert!((big_r - r).abs() < 1e-3, "{big_r} vs {r}");
        }
    }

    #[test]
    fn moments_scale_with_the_size_unit() {
        let d = DensityGrid1D::from_fn(6.0, 600, |x| x * x * (-2.0 * x).exp());
        let c = 2.0;
        let scaled = DensityGrid1D::from_fn(6.0 / c, 600, |x| c * d.eval(c * x));
        let r1 = match fit_moments(&d).unwrap().params {
            FitParams::Constant { big_r, .. } => big_r,
            _ => unreachable!(),
        };
        let r2 = match fit_moments(&scaled).unwrap().params {
            FitParams::Constant { big_r, .. } => big_r,
            _ => unreachable!(),
        };
        assert!((r2 / r1 - c).abs() < 1e-9);
    }

    #[test]
    fn least_squares_hits_the_grid_point() {
        let data = ExplicitNull::new(1.37).unwrap().tabulate(3.0, 300);
        let fit = fit_least_squares_r(&data, &default_r_grid()).unwrap();
        let FitParams::Constant { big_r, n_bar } = fit.params else {
            panic!()
        };
        assert_eq!(big_r, 1.37);
        assert!((n_bar - ExplicitNull::new(1.37).unwrap().n_bar).abs() < 1e-12);
        assert!(fit_least_squares_r(&data, &[]).unwrap_err().is_config());
    }

    #[test]
    fn reference_grids_have_the_listed_values() {
        let m = SearchGrid::reference_mitosis();
        assert_eq!((m.r.len(), m.gamma.len(), m.eta.len()), (10, 21, 27));
        assert!(m.gamma.contains(&1.325) && m.eta.contains(&9.0) && m.r.contains(&0.05));
        assert_eq!(m.eta[20], 7.0);
        let a = SearchGrid::reference_adder();
        assert_eq!(a.len(), 2310);
        assert!(a.gamma.contains(&9.0) && a.eta.contains(&3.775) && a.r.contains(&5.0));
        assert_eq!(a.eta[20], 5.0);
    }

    #[test]
    fn mitosis_search_recovers_an_on_grid_triple() {
        let grid = crate::pde::Grid1D::new(3.0, 150).unwrap();
        let spec = ModelSpec::mitosis_general(0.5, 1.0, 2.0, KernelVariant::DiracHalf).unwrap();
        let truth = crate::pde::solve_mitosis(&spec, grid, &SolverOptions::local()).unwrap();
        let sg = SearchGrid {
            r: vec![0.25, 0.5, 1.0],
            gamma: vec![0.5, 1.0, 1.5],
            eta: vec![1.0, 2.0, 3.0],
        };
        let res = grid_search_mitosis(&truth.density, &sg, &SearchOptions::default()).unwrap();
        assert_eq!(
            res.best.params,
            FitParams::Mitosis {
                r: 0.5,
                gamma: 1.0,
                eta: 2.0
            }
        );
        assert_eq!(res.table.len(), 27);
        assert!(res
            .table
            .iter()
            .all(|r| r.objective.is_none_or(f64::is_finite)));
    }

    #[test]
    fn cache_is_reused() {
        let dir = std::env::temp_dir().join(format!("celldiv-cache-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let data = crate::pde::initial_bump_1d(crate::pde::Grid1D::new(3.0, 100).unwrap());
        let sg = SearchGrid {
            r: vec![1.0],
            gamma: vec![1.0],
            eta: vec![1.0, 2.0],
        };
        let opts = SearchOptions {
            cache_dir: Some(dir.clone()),
            ..SearchOptions::default()
        };
        let a = grid_search_mitosis(&data, &sg, &opts).unwrap();
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 2);
        let b = grid_search_mitosis(&data, &sg, &opts).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
