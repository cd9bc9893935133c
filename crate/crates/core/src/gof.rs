//! Calibrated goodness-of-fit test of a null stationary density.
//!
//! For each resolution `D` the squared distance `‖N − N0‖²` is estimated by
//! `T̂_D = N̂_D − (2/n) Σ N0(Z_i) + ‖N0‖²`, where `N̂_D` is the U-statistic of the
//! projection onto the first `D` basis functions. Quantiles `t_D(u)` of `T̂_D` under
//! the null are estimated by Monte Carlo, `u_α` is the largest `u` whose union
//! rejection rate stays below α, and the test rejects when `max_D (T̂_D − t_D(u_α)) > 0`.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::error::{Error, Result};
use crate::pde::{DensityGrid1D, DensityGrid2D, Grid1D, GridDensity};
use crate::sampling::{derive_seed, stream_rng, Sample, SampleData, SamplingGrid};
use crate::stationary::ExplicitNull;

/// Minimum number of Monte Carlo replications for calibration and power studies.
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NullDensity {
    Explicit(ExplicitNull),
    Grid1D(DensityGrid1D),
    Grid2D(DensityGrid2D),
}

/// Null density with its squared norm and a sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub label: String,
    pub density: NullDensity,
    pub norm_sq: f64,
    pub sampler: SamplingGrid,
}

impl NullModel {
    /// Constant-rate equal mitosis: evaluated by the series, sampled from its table on `grid`.
    pub fn explicit(big_r: f64, grid: Grid1D) -> Result<Self> {
        let n0 = ExplicitNull::new(big_r)?;
        let table = n0.tabulate(grid.x_max, grid.n_x).normalized()?;
        let norm_sq = n0.l2_norm_sq();
        Ok(NullModel {
            label: format!("mitosis-constant R={big_r}"),
            density: NullDensity::Explicit(n0),
            norm_sq,
            sampler: SamplingGrid::One(table),
        })
    }

    pub fn from_grid_1d(label: &str, d: DensityGrid1D) -> Result<Self> {
        let d = d.normalized()?;
        let norm_sq = d.l2_norm_sq();
        Self::checked(
            label,
            NullDensity::Grid1D(d.clone()),
            norm_sq,
            SamplingGrid::One(d),
        )
    }

    pub fn from_grid_2d(label: &str, mut d: DensityGrid2D) -> Result<Self> {
        d.normalize()?;
        let norm_sq = d.l2_norm_sq();
        Self::checked(
            label,
            NullDensity::Grid2D(d.clone()),
            norm_sq,
            SamplingGrid::Two(d),
        )
    }

    fn checked(
        label: &str,
        density: NullDensity,
        norm_sq: f64,
        sampler: SamplingGrid,
    ) -> Result<Self> {
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::Domain(format!(
                "null density has squared norm {norm_sq}"
            )));
        }
        Ok(NullModel {
            label: label.to_string(),
            density,
            norm_sq,
            sampler,
        })
    }

    pub fn dimension(&self) -> usize {
        match self.density {
            NullDensity::Explicit(_) | NullDensity::Grid1D(_) => 1,
            NullDensity::Grid2D(_) => 2,
        }
    }

    /// `Σ_i N0(Z_i)`.
    pub fn eval_sum(&self, data: &SampleData) -> Result<f64> {
        match (&self.density, data) {
            (NullDensity::Explicit(n0), SampleData::One(xs)) => {
                xs.iter().map(|&x| n0.eval(x)).sum::<Result<f64>>()
            }
            (NullDensity::Grid1D(d), SampleData::One(xs)) => {
                Ok(xs.iter().map(|&x| d.eval(x)).sum())
            }
            (NullDensity::Grid2D(d), SampleData::Two(ps)) => {
                Ok(ps.iter().map(|p| d.eval(p[0], p[1])).sum())
            }
            _ => Err(Error::Config(format!(
                "sample dimension does not match the {}-D null",
                self.dimension()
            ))),
        }
    }
}

/// `T̂_D` for every resolution of `basis`.
pub fn t_stats(data: &SampleData, null: &NullModel, basis: &BasisFamily) -> Result<Vec<f64>> {
    let u = basis.u_stats(data)?;
    let cross = 2.0 * null.eval_sum(data)? / data.len() as f64;
    Ok(u.into_iter().map(|u| u - cross + null.norm_sq).collect())
}

fn single_resolution(basis: &BasisFamily, d: usize) -> Result<BasisFamily> {
    let single = match basis {
        BasisFamily::Laguerre { .. } => BasisFamily::Laguerre { dims: vec![d] },
        BasisFamily::Wavelet { k_max, .. } => BasisFamily::Wavelet {
            levels: vec![d as u32],
            k_max: *k_max,
        },
    };
    single.validate()?;
    Ok(single)
}

/// U-statistic `N̂_D` at one resolution (the Laguerre dimension or the wavelet level).
pub fn u_stat(sample: &Sample, basis: &BasisFamily, d: usize) -> Result<f64> {
    Ok(single_resolution(basis, d)?.u_stats(&SampleData::from(sample))?[0])
}

/// `T̂_D` at one resolution.
pub fn t_stat(sample: &Sample, null: &NullModel, basis: &BasisFamily, d: usize) -> Result<f64> {
    Ok(t_stats(
        &SampleData::from(sample),
        null,
        &single_resolution(basis, d)?,
    )?[0])
}

/// Runs `f(b)` for `b < reps`, in parallel when the feature is enabled; results keep the order of `b`.
pub(crate) fn replicate<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..reps).map(f).collect()
    }
}

/// `reps × |𝒟|` matrix of statistics on samples of size `n` drawn from `source`;
/// replication `b` uses random stream `b` of `seed`.
pub fn simulate_statistics(
    source: &SamplingGrid,
    null: &NullModel,
    basis: &BasisFamily,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if source.dimension() != null.dimension() || basis.dimension() != null.dimension() {
        return Err(Error::Config(
            "sampler, null and basis dimensions differ".into(),
        ));
    }
    replicate(reps, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let data = source.draw(n, &mut rng)?;
        t_stats(&data, null, basis)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub basis: BasisFamily,
    /// The resolution family 𝒟, in the order of `quantiles`.
    pub resolutions: Vec<usize>,
    pub u_alpha: f64,
    /// `t_D(u_α)` per resolution.
    pub quantiles: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub n: usize,
    pub null_label: String,
    pub dimension: usize,
    /// Union rejection rate at `u_α` on the calibration replications.
    pub empirical_level: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Order statistic `T_(B−k)` (1-based) of each column, i.e. `t_D(k/B)`.
fn quantiles_at(sorted: &[Vec<f64>], k: usize) -> Vec<f64> {
    sorted.iter().map(|col| col[col.len() - k - 1]).collect()
}

fn union_rejections(stats: &[Vec<f64>], t: &[f64]) -> usize {
    stats
        .iter()
        .filter(|row| row.iter().zip(t).any(|(s, q)| s - q > 0.0))
        .count()
}

/// Selects `u_α` and the quantiles from a replication matrix.
pub fn calibrate_from_statistics(
    stats: &[Vec<f64>],
    alpha: f64,
) -> Result<(f64, Vec<f64>, f64, Vec<String>)> {
    let b = stats.len();
    let m = stats.first().map_or(0, |r| r.len());
    if b < 2 || m == 0 || stats.iter().any(|r| r.len() != m) {
        return Err(Error::Config(
            "calibration needs a full replication matrix".into(),
        ));
    }
    if stats.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Instability(
            "non-finite statistic in calibration replications".into(),
        ));
    }
    let mut sorted: Vec<Vec<f64>> = (0..m)
        .map(|d| stats.iter().map(|r| r[d]).collect())
        .collect();
    sorted
        .iter_mut()
        .for_each(|c: &mut Vec<f64>| c.sort_by(|a, b| a.total_cmp(b)));
    let mut warnings = Vec::new();
    if alpha * (b as f64) < 5.0 {
        warnings.push(format!(
            "alpha * B = {} < 5: the level constraint is resolved by fewer than five replications",
            alpha * b as f64
        ));
    }
    let limit = (alpha * b as f64 + 1e-9).floor() as usize;
    // Rejections grow with k, so the largest admissible k is found by a scan.
    let mut best = None;
    for k in 1..b {
        let count = union_rejections(stats, &quantiles_at(&sorted, k));
        if count <= limit {
            best = Some((k, count));
        } else {
            break;
        }
    }
    let (k, count) = match best {
        Some(v) => v,
        None => {
            warnings.push(
                "no grid value of u meets the level constraint; using the replication maxima"
                    .into(),
            );
            (0, union_rejections(stats, &quantiles_at(&sorted, 0)))
        }
    };
    Ok((
        k as f64 / b as f64,
        quantiles_at(&sorted, k),
        count as f64 / b as f64,
        warnings,
    ))
}

/// Monte Carlo calibration of the test under `null` for samples of size `n`.
pub fn calibrate(
    null: &NullModel,
    n: usize,
    alpha: f64,
    basis: &BasisFamily,
    replications: usize,
    seed: u64,
) -> Result<Calibration> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }
    if replications < MIN_REPLICATIONS {
        return Err(Error::Config(format!(
            "calibration needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "sample size must be at least 2, got {n}"
        )));
    }
    basis.validate()?;
    let stats = simulate_statistics(&null.sampler, null, basis, n, replications, seed)?;
    let (u_alpha, quantiles, empirical_level, warnings) = calibrate_from_statistics(&stats, alpha)?;
    Ok(Calibration {
        alpha,
        basis: basis.clone(),
        resolutions: basis.resolutions(),
        u_alpha,
        quantiles,
        replications,
        seed,
        n,
        null_label: null.label.clone(),
        dimension: null.dimension(),
        empirical_level,
        warnings,
        notes: vec![
            "the same replications estimate the quantiles and enforce the level constraint".into(),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub resolutions: Vec<usize>,
    pub t_hat: Vec<f64>,
    /// `T̂_D − t_D(u_α)`.
    pub exceedances: Vec<f64>,
    pub t_alpha: f64,
    /// 1 when the null is rejected.
    pub decision: u8,
    pub n: usize,
    pub sample_seed: u64,
    pub calibration_seed: u64,
    pub alpha: f64,
    pub u_alpha: f64,
    pub null_label: String,
    pub basis: BasisFamily,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision == 1
    }
}

fn check_calibration(data: &SampleData, calibration: &Calibration, null: &NullModel) -> Result<()> {
    if calibration.null_label != null.label || calibration.dimension != null.dimension() {
        return Err(Error::Config(format!(
            "calibration was made for {:?}, not {:?}",
            calibration.null_label, null.label
        )));
    }
    if data.len() != calibration.n {
        return Err(Error::Config(format!(
            "calibration is for n = {}, sample has {} points",
            calibration.n,
            data.len()
        )));
    }
    if calibration.quantiles.len() != calibration.resolutions.len() {
        return Err(Error::Parse(
            "calibration quantiles and resolutions differ in length".into(),
        ));
    }
    Ok(())
}

fn decide(
    data: &SampleData,
    calibration: &Calibration,
    null: &NullModel,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    check_calibration(data, calibration, null)?;
    let t_hat = t_stats(data, null, &calibration.basis)?;
    let exc: Vec<f64> = t_hat
        .iter()
        .zip(&calibration.quantiles)
        .map(|(t, q)| t - q)
        .collect();
    let t_alpha = exc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((t_hat, exc, t_alpha))
}

pub fn run_test(
    sample: &Sample,
    calibration: &Calibration,
    null: &NullModel,
) -> Result<TestReport> {
    let data = SampleData::from(sample);
    let (t_hat, exceedances, t_alpha) = decide(&data, calibration, null)?;
    Ok(TestReport {
        resolutions: calibration.resolutions.clone(),
        t_hat,
        exceedances,
        t_alpha,
        decision: u8::from(t_alpha > 0.0),
        n: data.len(),
        sample_seed: sample.seed(),
        calibration_seed: calibration.seed,
        alpha: calibration.alpha,
        u_alpha: calibration.u_alpha,
        null_label: null.label.clone(),
        basis: calibration.basis.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub rejections: usize,
    pub reps: usize,
    pub power: f64,
    /// Binomial standard error `√(p(1−p)/reps)`.
    pub se: f64,
}

impl PowerEstimate {
    pub fn new(rejections: usize, reps: usize) -> Self {
        let p = rejections as f64 / reps as f64;
        PowerEstimate {
            rejections,
            reps,
            power: p,
            se: (p * (1.0 - p) / reps as f64).sqrt(),
        }
    }
}

/// Fraction of `reps` fresh samples from `source` on which the calibrated test rejects.
pub fn rejection_rate(
    source: &SamplingGrid,
    null: &NullModel,
    calibration: &Calibration,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::Config(format!(
            "power studies need at least {MIN_REPLICATIONS} replications, got {reps}"
        )));
    }
    if source.dimension() != null.dimension() {
        return Err(Error::Config(
            "alternative and null dimensions differ".into(),
        ));
    }
    let hits = replicate(reps, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let data = source.draw(calibration.n, &mut rng)?;
        Ok(decide(&data, calibration, null)?.2 > 0.0)
    })?;
    Ok(PowerEstimate::new(
        hits.into_iter().filter(|&h| h).count(),
        reps,
    ))
}

/// Calibrates under `null` (seed `seed`) and estimates the rejection rate under `alt`
/// on samples drawn with a seed derived from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn power_study(
    alt: &SamplingGrid,
    null: &NullModel,
    n: usize,
    alpha: f64,
    basis: &BasisFamily,
    calibration_reps: usize,
    reps: usize,
    seed: u64,
) -> Result<(PowerEstimate, Calibration)> {
    let calibration = calibrate(null, n, alpha, basis, calibration_reps, seed)?;
    let est = rejection_rate(alt, null, &calibration, reps, derive_seed(seed, 1))?;
    Ok((est, calibration))
}
