//! Rejection sampling from tabulated densities and kernel density estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{DensityGrid1D, DensityGrid2D, Grid1D};

/// Minimum acceptable acceptance rate of the uniform-envelope sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Random stream `stream` of the generator seeded with `seed`.
///
/// Streams of one seed are independent by construction, so replication `b` of a
/// Monte Carlo study always draws from stream `b` whatever the scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an unrelated seed from `seed` and a tag (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample1D {
    pub points: Vec<f64>,
    pub seed: u64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample2D {
    /// `(a, x)` pairs.
    pub points: Vec<[f64; 2]>,
    pub seed: u64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    One(Sample1D),
    Two(Sample2D),
}

impl Sample {
    pub fn len(&self) -> usize {
        match self {
            Sample::One(s) => s.points.len(),
            Sample::Two(s) => s.points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        match self {
            Sample::One(_) => 1,
            Sample::Two(_) => 2,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Sample::One(s) => s.seed,
            Sample::Two(s) => s.seed,
        }
    }
}

/// A tabulated density that can be sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingGrid {
    One(DensityGrid1D),
    Two(DensityGrid2D),
}

impl SamplingGrid {
    pub fn dimension(&self) -> usize {
        match self {
            SamplingGrid::One(_) => 1,
            SamplingGrid::Two(_) => 2,
        }
    }

    /// Draws `n` points from the given random stream.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SampleData> {
        match self {
            SamplingGrid::One(d) => rejection_draw_1d(d, n, rng).map(SampleData::One),
            SamplingGrid::Two(d) => rejection_draw_2d(d, n, rng).map(SampleData::Two),
        }
    }
}

/// Sample points without provenance.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleData {
    One(Vec<f64>),
    Two(Vec<[f64; 2]>),
}

impl SampleData {
    pub fn len(&self) -> usize {
        match self {
            SampleData::One(v) => v.len(),
            SampleData::Two(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_sample(self, seed: u64, source: &str) -> Sample {
        match self {
            SampleData::One(points) => Sample::One(Sample1D {
                points,
                seed,
                source: source.to_string(),
            }),
            SampleData::Two(points) => Sample::Two(Sample2D {
                points,
                seed,
                source: source.to_string(),
            }),
        }
    }
}

impl From<&Sample> for SampleData {
    fn from(s: &Sample) -> Self {
        match s {
            Sample::One(s) => SampleData::One(s.points.clone()),
            Sample::Two(s) => SampleData::Two(s.points.clone()),
        }
    }
}

fn acceptance_1d(d: &DensityGrid1D) -> Result<(f64, f64)> {
    let max = d.max_value();
    let width = d.x_last();
    let mass = d.mass();
    if !(max > 0.0) || !max.is_finite() || !(mass > 0.0) {
        return Err(Error::Domain(
            "cannot sample from a density with no positive finite values".into(),
        ));
    }
    let rate = mass / (max * width);
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Efficiency { rate });
    }
    Ok((max, width))
}

/// Rejection sampling with a uniform proposal on the grid's range.
pub fn rejection_draw_1d<R: Rng + ?Sized>(
    d: &DensityGrid1D,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (max, width) = acceptance_1d(d)?;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.gen::<f64>() * width;
        if rng.gen::<f64>() * max < d.eval(x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// True when the density vanishes below the diagonal `x < a`.
fn is_triangular(d: &DensityGrid2D) -> bool {
    (0..d.n_a).all(|i| {
        let a = i as f64 * d.da();
        (0..d.n_x)
            .take_while(|&j| j as f64 * d.dx() < a - 1e-12)
            .all(|j| d.at(i, j) == 0.0)
    })
}

/// Rejection sampling in (a, x); points below the diagonal are never returned for
/// densities supported on `x ≥ a`.
pub fn rejection_draw_2d<R: Rng + ?Sized>(
    d: &DensityGrid2D,
    n: usize,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    let max = d.max_value();
    let (wa, wx) = ((d.n_a - 1) as f64 * d.da(), (d.n_x - 1) as f64 * d.dx());
    let mass = d.mass();
    if !(max > 0.0) || !max.is_finite() || !(mass > 0.0) {
        return Err(Error::Domain(
            "cannot sample from a density with no positive finite values".into(),
        ));
    }
    let rate = mass / (max * wa * wx);
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Efficiency { rate });
    }
    let triangular = is_triangular(d);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = rng.gen::<f64>() * wa;
        let x = rng.gen::<f64>() * wx;
        let u = rng.gen::<f64>() * max;
        if triangular && x < a {
            continue;
        }
        if u < d.eval(a, x) {
            out.push([a, x]);
        }
    }
    Ok(out)
}

pub fn rejection_sample_1d(
    d: &DensityGrid1D,
    n: usize,
    seed: u64,
    source: &str,
) -> Result<Sample1D> {
    let mut rng = stream_rng(seed, 0);
    Ok(Sample1D {
        points: rejection_draw_1d(d, n, &mut rng)?,
        seed,
        source: source.to_string(),
    })
}

pub fn rejection_sample_2d(
    d: &DensityGrid2D,
    n: usize,
    seed: u64,
    source: &str,
) -> Result<Sample2D> {
    let mut rng = stream_rng(seed, 0);
    Ok(Sample2D {
        points: rejection_draw_2d(d, n, &mut rng)?,
        seed,
        source: source.to_string(),
    })
}

/// Silverman's rule of thumb `0.9 min(σ, IQR/1.34) n^{−1/5}`.
pub fn silverman_bandwidth(points: &[f64]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Config(
            "bandwidth selection needs at least two points".into(),
        ));
    }
    let mean = points.iter().sum::<f64>() / n as f64;
    let sd = (points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let h = p * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * (n as f64).powf(-0.2);
    if !(bw > 0.0) {
        return Err(Error::Domain(
            "sample has zero spread; supply a bandwidth".into(),
        ));
    }
    Ok(bw)
}

/// Gaussian kernel density estimate on `grid`, renormalized to unit mass.
///
/// `bandwidth = None` selects Silverman's rule.
pub fn kde_1d(points: &[f64], bandwidth: Option<f64>, grid: Grid1D) -> Result<DensityGrid1D> {
    if points.len() < 2 {
        return Err(Error::Config(
            "kernel density estimation needs at least two points".into(),
        ));
    }
    let bw = match bandwidth {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {b}"
            )))
        }
        None => silverman_bandwidth(points)?,
    };
    let norm = 1.0 / (points.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let reach = 9.0 * bw;
    let mut d = DensityGrid1D::from_fn(grid.x_max, grid.n_x, |x| {
        let lo = sorted.partition_point(|&p| p < x - reach);
        let hi = sorted.partition_point(|&p| p <= x + reach);
        sorted[lo..hi]
            .iter()
            .map(|&p| {
                let z = (x - p) / bw;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    });
    d.normalize()?;
    Ok(d)
}
