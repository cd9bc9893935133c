//! Orthonormal projection bases: Laguerre functions on the half line and tensorized
//! Daubechies scaling functions in the plane.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SampleData;

/// Largest supported Laguerre index.
pub const MAX_LAGUERRE_INDEX: usize = 30;

/// `√2 L_j(2x) e^{−x}`.
pub fn laguerre_fn(j: usize, x: f64) -> Result<f64> {
    if j > MAX_LAGUERRE_INDEX {
        return Err(Error::Config(format!(
            "Laguerre index {j} exceeds {MAX_LAGUERRE_INDEX}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "Laguerre functions are defined for x ≥ 0, got {x}"
        )));
    }
    let mut out = [0.0; MAX_LAGUERRE_INDEX + 1];
    laguerre_fill(x, &mut out[..=j]);
    Ok(out[j])
}

/// Fills `out[j] = φ_j(x)` for `j < out.len()`, assuming `x ≥ 0`.
pub fn laguerre_fill(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let t = 2.0 * x;
    let scale = std::f64::consts::SQRT_2 * (-x).exp();
    let (mut prev, mut cur) = (0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = scale * cur;
        // (k+1) L_{k+1} = (2k+1−t) L_k − k L_{k−1}
        let next =
            ((2 * k + 1) as f64 - t) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
}

/// `L_j(t) = Σ_k C(j,k) (−t)^k / k!`, the explicit form (test oracle, small j).
pub fn laguerre_poly_explicit(j: usize, t: f64) -> f64 {
    let mut binom = 1.0;
    let mut fact = 1.0;
    let mut acc = 0.0;
    for k in 0..=j {
        if k > 0 {
            binom *= (j - k + 1) as f64 / k as f64;
            fact *= k as f64;
        }
        acc += binom * (-t).powi(k as i32) / fact;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaguerreBasis {
    pub max_degree: usize,
}

impl LaguerreBasis {
    pub fn new(max_degree: usize) -> Result<Self> {
        if max_degree == 0 || max_degree > MAX_LAGUERRE_INDEX + 1 {
            return Err(Error::Config(format!(
                "Laguerre dimension must be in 1..=31, got {max_degree}"
            )));
        }
        Ok(LaguerreBasis { max_degree })
    }

    /// `φ_0(x), …, φ_{D−1}(x)`.
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!(
                "Laguerre functions are defined for x ≥ 0, got {x}"
            )));
        }
        let mut v = vec![0.0; self.max_degree];
        laguerre_fill(x, &mut v);
        Ok(v)
    }
}

/// Daubechies-4 (eight taps) low-pass filter, normalized to sum √2.
pub const DB4_FILTER: [f64; 8] = [
    0.230_377_813_308_896_4,
    0.714_846_570_552_915_4,
    0.630_880_767_929_858_8,
    -0.027_983_769_416_859_9,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_7,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_0,
];

/// Support of the scaling function is `[0, SUPPORT]`.
pub const SUPPORT: usize = 7;

/// Scaling function tabulated on `2^{−depth} ℤ ∩ [0, 7]` by the cascade algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub depth: u32,
    pub values: Vec<f64>,
}

/// Solves `A v = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

impl ScalingTable {
    pub fn cascade(depth: u32) -> Self {
        let h = DB4_FILTER;
        let s2 = std::f64::consts::SQRT_2;
        // Integer values φ(1..6): φ(m) = √2 Σ_k h_k φ(2m − k), with Σ φ(m) = 1.
        let inner = SUPPORT - 1;
        let mut a = vec![vec![0.0; inner]; inner];
        for m in 1..=inner {
            for k in 0..h.len() {
                let j = 2 * m as isize - k as isize;
                if (1..=inner as isize).contains(&j) {
                    a[m - 1][j as usize - 1] += s2 * h[k];
                }
            }
            a[m - 1][m - 1] -= 1.0;
        }
        let mut b = vec![0.0; inner];
        a[inner - 1] = vec![1.0; inner];
        b[inner - 1] = 1.0;
        let ints = solve_dense(a, b);
        let mut cur = vec![0.0; SUPPORT + 1];
        cur[1..=inner].copy_from_slice(&ints);
        for level in 1..=depth {
            let half = 1usize << (level - 1);
            let len = SUPPORT * (1 << level) + 1;
            let mut next = vec![0.0; len];
            for (idx, slot) in next.iter_mut().enumerate() {
                if idx % 2 == 0 {
                    *slot = cur[idx / 2];
                    continue;
                }
                let mut acc = 0.0;
                for (k, hk) in h.iter().enumerate() {
                    // 2x − k on the coarser lattice
                    if let Some(j) = idx.checked_sub(k * half) {
                        if j < cur.len() {
                            acc += hk * cur[j];
                        }
                    }
                }
                *slot = s2 * acc;
            }
            cur = next;
        }
        ScalingTable { depth, values: cur }
    }

    pub fn step(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    /// φ(t) by linear interpolation; zero outside `[0, 7]`.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t > 0.0) || t >= SUPPORT as f64 {
            return 0.0;
        }
        let u = t / self.step();
        let i = u.floor() as usize;
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[(i + 1).min(self.values.len() - 1)] * w
    }
}

/// Shared depth-12 table.
pub fn scaling_table() -> &'static ScalingTable {
    static TABLE: OnceLock<ScalingTable> = OnceLock::new();
    TABLE.get_or_init(|| ScalingTable::cascade(12))
}

/// `φ_{J,k}(t) = 2^{J/2} φ(2^J t − k)`.
pub fn scaling_eval(level: u32, k: i32, t: f64) -> f64 {
    let s = 2f64.powi(level as i32);
    s.sqrt() * scaling_table().eval(s * t - k as f64)
}

/// `2^J φ(2^J a − k1) φ(2^J x − k2)`.
pub fn tensor_scaling_eval(level: u32, k1: i32, k2: i32, a: f64, x: f64) -> f64 {
    scaling_eval(level, k1, a) * scaling_eval(level, k2, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletBasis2D {
    pub level: u32,
    pub k_max: i32,
}

impl WaveletBasis2D {
    pub fn new(level: u32, k_max: i32) -> Result<Self> {
        if level > 20 || k_max < 0 {
            return Err(Error::Config(format!(
                "invalid wavelet basis J = {level}, k_max = {k_max}"
            )));
        }
        Ok(WaveletBasis2D { level, k_max })
    }

    /// `φ_{J,k}(t)` for `k = −k_max..=k_max`.
    pub fn eval_1d(&self, t: f64, out: &mut [f64]) {
        for (slot, k) in out.iter_mut().zip(-self.k_max..=self.k_max) {
            *slot = scaling_eval(self.level, k, t);
        }
    }

    pub fn translations(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }
}

/// Family of nested projection spaces indexed by a resolution `D`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    /// First `D` Laguerre functions for each listed `D`.
    Laguerre { dims: Vec<usize> },
    /// Tensor scaling functions at each listed level `J`, translations `|k| ≤ k_max`.
    Wavelet { levels: Vec<u32>, k_max: i32 },
}

impl BasisFamily {
    /// `D ∈ {3, …, 20}`.
    pub fn laguerre_default() -> Self {
        BasisFamily::Laguerre {
            dims: (3..=20).collect(),
        }
    }

    /// `J ∈ {3, …, 10}`, `|k| ≤ 10`.
    pub fn wavelet_default() -> Self {
        BasisFamily::Wavelet {
            levels: (3..=10).collect(),
            k_max: 10,
        }
    }

    pub fn default_for_dimension(dim: usize) -> Self {
        if dim == 1 {
            Self::laguerre_default()
        } else {
            Self::wavelet_default()
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BasisFamily::Laguerre { .. } => 1,
            BasisFamily::Wavelet { .. } => 2,
        }
    }

    /// Resolution labels, in the order statistics are returned.
    pub fn resolutions(&self) -> Vec<usize> {
        match self {
            BasisFamily::Laguerre { dims } => dims.clone(),
            BasisFamily::Wavelet { levels, .. } => levels.iter().map(|&j| j as usize).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BasisFamily::Laguerre { dims } => {
                if dims.is_empty() || dims.iter().any(|&d| d == 0 || d > MAX_LAGUERRE_INDEX + 1) {
                    return Err(Error::Config(format!(
                        "Laguerre dimensions must be in 1..=31, got {dims:?}"
                    )));
                }
            }
            BasisFamily::Wavelet { levels, k_max } => {
                if levels.is_empty() || levels.iter().any(|&j| j > 20) || *k_max < 0 {
                    return Err(Error::Config(format!(
                        "invalid wavelet levels {levels:?} / k_max {k_max}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// U-statistics `N̂_D` for every resolution in the family, in O(n · |Λ|) time.
    pub fn u_stats(&self, data: &SampleData) -> Result<Vec<f64>> {
        let n = data.len();
        if n < 2 {
            return Err(Error::Config(format!(
                "U-statistics need at least two points, got {n}"
            )));
        }
        let norm = 1.0 / (n as f64 * (n as f64 - 1.0));
        match (self, data) {
            (BasisFamily::Laguerre { dims }, SampleData::One(xs)) => {
                let d_max = dims.iter().copied().max().unwrap_or(0);
                let mut v = vec![0.0; d_max];
                let mut diag = vec![0.0; d_max];
                let mut phi = vec![0.0; d_max];
                for &x in xs {
                    if !(x >= 0.0) {
                        return Err(Error::Domain(format!("sample point {x} is negative")));
                    }
                    laguerre_fill(x, &mut phi);
                    for l in 0..d_max {
                        v[l] += phi[l];
                        diag[l] += phi[l] * phi[l];
                    }
                }
                // Prefix sums over l give every D at once.
                let mut cum = vec![0.0; d_max + 1];
                for l in 0..d_max {
                    cum[l + 1] = cum[l] + v[l] * v[l] - diag[l];
                }
                Ok(dims.iter().map(|&d| cum[d] * norm).collect())
            }
            (BasisFamily::Wavelet { levels, k_max }, SampleData::Two(pts)) => levels
                .iter()
                .map(|&j| {
                    let basis = WaveletBasis2D::new(j, *k_max)?;
                    Ok(wavelet_u_sum(&basis, pts) * norm)
                })
                .collect(),
            _ => Err(Error::Config(format!(
                "sample dimension {} does not match a {}-D basis",
                match data {
                    SampleData::One(_) => 1,
                    SampleData::Two(_) => 2,
                },
                self.dimension()
            ))),
        }
    }
}

/// `Σ_{i≠j} Σ_{k1,k2} φ_{k1}(a_i)φ_{k2}(x_i) φ_{k1}(a_j)φ_{k2}(x_j)`.
fn wavelet_u_sum(basis: &WaveletBasis2D, pts: &[[f64; 2]]) -> f64 {
    let m = basis.translations();
    let mut v = vec![0.0; m * m];
    let mut diag = 0.0;
    let mut pa = vec![0.0; m];
    let mut px = vec![0.0; m];
    for p in pts {
        basis.eval_1d(p[0], &mut pa);
        basis.eval_1d(p[1], &mut px);
        let (sa, sx): (f64, f64) = (
            pa.iter().map(|u| u * u).sum(),
            px.iter().map(|u| u * u).sum(),
        );
        diag += sa * sx;
        for (k1, &u) in pa.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            let row = &mut v[k1 * m..(k1 + 1) * m];
            for (slot, &w) in row.iter_mut().zip(&px) {
                *slot += u * w;
            }
        }
    }
    v.iter().map(|c| c * c).sum::<f64>() - diag
}
