//! Division kernels: the distribution of the fraction θ ∈ [0, 1] of the mother's
//! size inherited by one daughter.
//!
//! The null hypothesis is the point mass at 1/2 ([`KernelVariant::DiracHalf`]);
//! the four absolutely continuous variants are the alternatives. All continuous
//! variants are symmetric about 1/2.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quad::simpson;

/// Number of Simpson intervals used to normalize the continuous kernels.
const NORMALIZATION_INTERVALS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelVariant {
    DiracHalf,
    Beta22,
    Uniform,
    TruncNormal { mu: f64, sigma: f64 },
    GaussMixture,
}

impl KernelVariant {
    pub const TRUNC_NORMAL_DEFAULT: KernelVariant = KernelVariant::TruncNormal {
        mu: 0.5,
        sigma: 0.25,
    };

    /// The four alternatives in the column order used by the power tables.
    pub fn alternatives() -> [KernelVariant; 4] {
        [
            KernelVariant::Beta22,
            KernelVariant::Uniform,
            KernelVariant::TRUNC_NORMAL_DEFAULT,
            KernelVariant::GaussMixture,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelVariant::DiracHalf => "dirac",
            KernelVariant::Beta22 => "beta22",
            KernelVariant::Uniform => "uniform",
            KernelVariant::TruncNormal { .. } => "truncnorm",
            KernelVariant::GaussMixture => "mixture",
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, KernelVariant::DiracHalf)
    }

    /// Density without its normalizing constant.
    fn shape(&self, theta: f64) -> f64 {
        match *self {
            KernelVariant::DiracHalf => 0.0,
            KernelVariant::Beta22 => theta * (1.0 - theta),
            KernelVariant::Uniform => 1.0,
            KernelVariant::TruncNormal { mu, sigma } => {
                let z = (theta - mu) / sigma;
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            KernelVariant::GaussMixture => {
                let a = theta - 0.9;
                let b = 1.0 - theta - 0.9;
                (-a * a / 0.1).exp() + (-b * b / 0.1).exp()
            }
        }
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirac" | "dirac_half" => Ok(KernelVariant::DiracHalf),
            "beta22" | "beta" => Ok(KernelVariant::Beta22),
            "uniform" | "unif" => Ok(KernelVariant::Uniform),
            "truncnorm" | "tn" => Ok(KernelVariant::TRUNC_NORMAL_DEFAULT),
            "mixture" | "mix" => Ok(KernelVariant::GaussMixture),
            other => Err(Error::Config(format!(
                "unknown kernel '{other}' (expected dirac|beta22|uniform|truncnorm|mixture)"
            ))),
        }
    }
}

/// Standard normal cdf.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// A division kernel with its cached normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub normalizing_constant: f64,
    /// Upper bound of the density on [0, 1], used by the θ sampler.
    density_bound: f64,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant) -> Self {
        let normalizing_constant = normalizing_constant(variant);
        let mut spec = KernelSpec {
            variant,
            normalizing_constant,
            density_bound: 1.0,
        };
        if !variant.is_dirac() {
            let max = (0..=10_000)
                .map(|i| spec.eval_unchecked(i as f64 / 10_000.0))
                .fold(0.0_f64, f64::max);
            spec.density_bound = max * 1.01;
        }
        spec
    }

    pub fn dirac() -> Self {
        Self::new(KernelVariant::DiracHalf)
    }

    pub fn is_dirac(&self) -> bool {
        self.variant.is_dirac()
    }

    /// h(θ) including the normalizing constant.
    pub fn density(&self, theta: f64) -> Result<f64> {
        if self.is_dirac() {
            return Err(Error::NoDensity("dirac"));
        }
        if !(0.0..=1.0).contains(&theta) || theta.is_nan() {
            return Err(Error::Domain(format!("θ = {theta} is outside [0, 1]")));
        }
        Ok(self.eval_unchecked(theta))
    }

    /// h(θ) for θ already known to be in [0, 1]; zero for the Dirac variant.
    #[inline]
    pub(crate) fn eval_unchecked(&self, theta: f64) -> f64 {
        self.normalizing_constant * self.variant.shape(theta)
    }

    /// Draws a division fraction θ.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.variant {
            KernelVariant::DiracHalf => 0.5,
            KernelVariant::Uniform => rng.gen::<f64>(),
            _ => loop {
                let theta: f64 = rng.gen();
                let u: f64 = rng.gen::<f64>() * self.density_bound;
                if u < self.eval_unchecked(theta) {
                    break theta;
                }
            },
        }
    }
}

impl From<KernelVariant> for KernelSpec {
    fn from(v: KernelVariant) -> Self {
        KernelSpec::new(v)
    }
}

/// Constant turning the kernel shape into a probability density on [0, 1].
///
/// The Dirac variant has no density; its constant is reported as 1.
pub fn normalizing_constant(variant: KernelVariant) -> f64 {
    match variant {
        KernelVariant::DiracHalf | KernelVariant::Uniform => 1.0,
        KernelVariant::TruncNormal { mu, sigma } => {
            1.0 / (sigma * (std_normal_cdf((1.0 - mu) / sigma) - std_normal_cdf(-mu / sigma)))
        }
        KernelVariant::Beta22 | KernelVariant::GaussMixture => {
            1.0 / simpson(|t| variant.shape(t), 0.0, 1.0, NORMALIZATION_INTERVALS)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_values() {
        let u = KernelSpec::new(KernelVariant::Uniform);
        assert_eq!(u.density(0.3).unwrap(), 1.0);
        let b = KernelSpec::new(KernelVariant::Beta22);
        assert!((b.density(0.5).unwrap() - 1.5).abs() < 1e-12);
        assert!((normalizing_constant(KernelVariant::Beta22) - 6.0).abs() < 1e-12);
        assert_eq!(normalizing_constant(KernelVariant::Uniform), 1.0);
    }

    #[test]
    fn dirac_has_no_density() {
        let d = KernelSpec::dirac();
        assert!(matches!(d.density(0.5), Err(Error::NoDensity(_))));
    }

    #[test]
    fn out_of_range_theta_is_a_domain_error() {
        let b = KernelSpec::new(KernelVariant::Beta22);
        assert!(matches!(b.density(1.2), Err(Error::Domain(_))));
        assert!(matches!(b.density(-0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn parse_cli_names() {
        for v in KernelVariant::alternatives() {
            assert_eq!(v.name().parse::<KernelVariant>().unwrap(), v);
        }
        assert!("cauchy".parse::<KernelVariant>().is_err());
    }

    #[test]
    fn sampled_fractions_are_symmetric_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in KernelVariant::alternatives() {
            let k = KernelSpec::new(v);
            let n = 20_000;
            let mean = (0..n).map(|_| k.sample_theta(&mut rng)).sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() < 0.01, "{v}: {mean}");
        }
    }
}
