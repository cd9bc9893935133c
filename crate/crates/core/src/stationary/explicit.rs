//! Explicit stationary density of equal mitosis with constant rates,
//! `N0(x) = N̄ Σ (−1)^n α_n exp(−2^{n+1} R x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::DensityGrid1D;

/// Default truncation of the alternating series.
pub const DEFAULT_TERMS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSeries {
    /// α_0, …, α_K.
    pub coefficients: Vec<f64>,
}

impl AlphaSeries {
    pub fn truncation(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `Σ_{n ≤ k} (−1)^n α_n`.
    pub fn partial_sum(&self, k: usize) -> f64 {
        self.coefficients[..=k]
            .iter()
            .enumerate()
            .map(|(n, a)| if n % 2 == 0 { *a } else { -*a })
            .sum()
    }

    /// Closed form of [`partial_sum`](Self::partial_sum): `(−1)^k / Π_{j=1}^k (2^j − 1)`.
    pub fn partial_sum_closed_form(k: usize) -> f64 {
        let prod: f64 = (1..=k).map(|j| 2f64.powi(j as i32) - 1.0).product();
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / prod
    }

    /// `Σ (−1)^n α_n / 2^{n+1}`, the mass of the series with R = N̄ = 1.
    pub fn mass_constant(&self) -> f64 {
        self.signed_sum(|n| 0.5f64.powi(n as i32 + 1))
    }

    /// `Σ (−1)^n α_n / 2^{2n+2}`, the first moment of the series with R = N̄ = 1.
    pub fn moment_constant(&self) -> f64 {
        self.signed_sum(|n| 0.25f64.powi(n as i32 + 1))
    }

    fn signed_sum<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        // Summed from the smallest terms up.
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .map(|(n, a)| if n % 2 == 0 { a * f(n) } else { -a * f(n) })
            .sum()
    }
}

/// `α_0 = 1`, `α_n = α_{n−1} · 2 / (2^n − 1)`.
pub fn alpha_coefficients(k: usize) -> AlphaSeries {
    let mut c = Vec::with_capacity(k + 1);
    c.push(1.0);
    for n in 1..=k {
        let prev = c[n - 1];
        c.push(prev * 2.0 / (2f64.powi(n as i32) - 1.0));
    }
    AlphaSeries { coefficients: c }
}

/// Normalizing constant N̄ making `N0(·, R)` a probability density.
pub fn normalize_n0(big_r: f64, k: usize) -> f64 {
    big_r / alpha_coefficients(k).mass_constant()
}

/// `N0(x)` for rate `R` using `k + 1` series terms.
pub fn eval_n0(x: f64, big_r: f64, k: usize) -> Result<f64> {
    ExplicitNull::with_terms(big_r, k)?.eval(x)
}

/// The explicit null density for a given division rate R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitNull {
    #[serde(rename = "R")]
    pub big_r: f64,
    pub n_bar: f64,
    pub alpha: AlphaSeries,
}

impl ExplicitNull {
    pub fn new(big_r: f64) -> Result<Self> {
        Self::with_terms(big_r, DEFAULT_TERMS)
    }

    pub fn with_terms(big_r: f64, k: usize) -> Result<Self> {
        if !(big_r > 0.0) || !big_r.is_finite() {
            return Err(Error::Config(format!("R must be positive, got {big_r}")));
        }
        let alpha = alpha_coefficients(k);
        let n_bar = big_r / alpha.mass_constant();
        Ok(ExplicitNull {
            big_r,
            n_bar,
            alpha,
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("N0 is defined for x ≥ 0, got {x}")));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let rx = self.big_r * x;
        let mut acc = 0.0;
        for (n, a) in self.alpha.coefficients.iter().enumerate().rev() {
            let t = a * (-(2f64.powi(n as i32 + 1)) * rx).exp();
            acc += if n % 2 == 0 { t } else { -t };
        }
        (self.n_bar * acc).max(0.0)
    }

    pub fn tabulate(&self, x_max: f64, n_x: usize) -> DensityGrid1D {
        DensityGrid1D::from_fn(x_max, n_x, |x| self.eval_unchecked(x))
    }

    /// Mean size `∫ x N0 = moment_constant / (mass_constant · R)`.
    pub fn mean(&self) -> f64 {
        self.alpha.moment_constant() / (self.alpha.mass_constant() * self.big_r)
    }

    /// `‖N0‖²₂` from the closed-form double series.
    pub fn l2_norm_sq(&self) -> f64 {
        let c = &self.alpha.coefficients;
        let mut acc = 0.0;
        for m in (0..c.len()).rev() {
            for n in (0..c.len()).rev() {
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * c[m] * c[n] / (2f64.powi(m as i32 + 1) + 2f64.powi(n as i32 + 1));
            }
        }
        acc * self.n_bar * self.n_bar / self.big_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coefficients() {
        assert_eq!(alpha_coefficients(0).coefficients, vec![1.0]);
        let a = alpha_coefficients(2);
        assert_eq!(a.coefficients[1], 2.0);
        assert!((a.coefficients[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((alpha_coefficients(3).partial_sum(3) + 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn partial_sums_match_closed_form() {
        // The sums cancel down to ~1e-63 at k = 20, so the identity is checked in exact
        // rational arithmetic; the f64 coefficients must round the exact values.
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::{One, ToPrimitive, Zero};
        let a = alpha_coefficients(20);
        let mut alpha = BigRational::one();
        let mut sum = BigRational::zero();
        let mut prod = BigRational::one();
        for k in 0..=20usize {
            if k > 0 {
                let d = BigRational::from_integer(BigInt::from((1u64 << k) - 1));
                alpha = alpha * BigRational::from_integer(BigInt::from(2)) / d.clone();
                prod *= d;
            }
            sum = if k % 2 == 0 {
                sum + alpha.clone()
            } else {
                sum - alpha.clone()
            };
            let sign = if k % 2 == 0 {
                BigRational::one()
            } else {
                -BigRational::one()
            };
            assert_eq!(sum, sign / prod.clone(), "k={k}");
            let exact = alpha.to_f64().unwrap();
            assert!(((a.coefficients[k] - exact) / exact).abs() < 1e-14, "k={k}");
            let closed = AlphaSeries::partial_sum_closed_form(k);
            let rel = ((closed - sum.to_f64().unwrap()) / closed).abs();
            assert!(rel < 1e-12, "k={k}: {rel}");
        }
        // In floating point the partial sums are accurate to rounding of the largest term.
        for k in 0..=20 {
            assert!((a.partial_sum(k) - AlphaSeries::partial_sum_closed_form(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_values_vanish() {
        let n = ExplicitNull::new(1.3).unwrap();
        assert!(n.eval(0.0).unwrap().abs() < 1e-10);
        assert!(n.eval(1e-9).unwrap().abs() < 1e-6);
        assert!(n.eval(50.0 / 1.3).unwrap().abs() < 1e-12);
        assert!(n.eval(-0.1).is_err());
    }

    #[test]
    fn normalization_scales_linearly_in_r() {
        let a = normalize_n0(1.0, 40);
        for c in [0.5, 2.0, 7.25] {
            assert!((normalize_n0(c, 40) - c * a).abs() < 1e-12 * c * a);
        }
    }

    #[test]
    fn reference_normalizing_constant() {
        let n_bar = normalize_n0(1.732, 40);
        assert!((n_bar - 11.993).abs() < 2e-4 * 11.993, "{n_bar}");
    }

    #[test]
    fn mean_is_reciprocal_rate() {
        // The two series constants coincide, so the mean size is 1/R.
        let n = ExplicitNull::new(1.7).unwrap();
        assert!((n.mean() - 1.0 / 1.7).abs() < 1e-14);
    }

    #[test]
    fn positive_on_open_half_line() {
        let n = ExplicitNull::new(1.0).unwrap();
        for i in 1..2000 {
            let x = i as f64 * 0.01;
            assert!(n.eval(x).unwrap() > 0.0, "x={x}");
        }
    }
}
