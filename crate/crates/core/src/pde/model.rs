use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, KernelVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    /// g(x) = 1, B(x) = R.
    MitosisConstant,
    /// g(x) = r x^γ, B(x) = R x^η.
    MitosisGeneral,
    /// g(x) = r x^γ, division rate g(x) B(a) with B(a) = R a^η.
    Adder,
}

impl ModelFamily {
    pub fn is_adder(&self) -> bool {
        matches!(self, ModelFamily::Adder)
    }
}

/// Growth rate `g(x) = r x^γ` and division rate `B = R · (size or increment)^η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub r: f64,
    pub gamma: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub eta: f64,
    pub kernel: KernelSpec,
}

impl ModelSpec {
    pub fn mitosis_constant(big_r: f64, kernel: KernelVariant) -> Result<Self> {
        ModelSpec {
            family: ModelFamily::MitosisConstant,
            r: 1.0,
            gamma: 0.0,
            big_r,
            eta: 0.0,
            kernel: KernelSpec::new(kernel),
        }
        .validated()
    }

    /// General mitosis model; the division rate carries no prefactor (R = 1).
    pub fn mitosis_general(r: f64, gamma: f64, eta: f64, kernel: KernelVariant) -> Result<Self> {
        ModelSpec {
            family: ModelFamily::MitosisGeneral,
            r,
            gamma,
            big_r: 1.0,
            eta,
            kernel: KernelSpec::new(kernel),
        }
        .validated()
    }

    pub fn adder(r: f64, gamma: f64, big_r: f64, eta: f64, kernel: KernelVariant) -> Result<Self> {
        ModelSpec {
            family: ModelFamily::Adder,
            r,
            gamma,
            big_r,
            eta,
            kernel: KernelSpec::new(kernel),
        }
        .validated()
    }

    /// One of the seven adder test cases (g, B) ∈ {1, √x, x} × {1, √a, a, a²}.
    pub fn adder_case(case: usize, kernel: KernelVariant) -> Result<Self> {
        let (gamma, eta) = match case {
            1 => (0.0, 0.0),
            2 => (0.5, 0.0),
            3 => (0.5, 2.0),
            4 => (0.0, 2.0),
            5 => (0.5, 1.0),
            6 => (0.5, 0.5),
            7 => (1.0, 2.0),
            _ => {
                return Err(Error::Config(format!(
                    "adder case must be in 1..=7, got {case}"
                )))
            }
        };
        ModelSpec::adder(1.0, gamma, 1.0, eta, kernel)
    }

    pub fn with_kernel(mut self, kernel: KernelVariant) -> Self {
        self.kernel = KernelSpec::new(kernel);
        self
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.r) || !ok(self.big_r) || !nonneg(self.gamma) || !nonneg(self.eta) {
            return Err(Error::Config(format!(
                "rate parameters must be positive (r = {}, γ = {}, R = {}, η = {})",
                self.r, self.gamma, self.big_r, self.eta
            )));
        }
        Ok(self)
    }

    #[inline]
    pub fn growth(&self, x: f64) -> f64 {
        if self.gamma == 0.0 {
            self.r
        } else {
            self.r * x.powf(self.gamma)
        }
    }

    /// Division rate as a function of size (mitosis) or size increment (adder).
    #[inline]
    pub fn division(&self, z: f64) -> f64 {
        if self.eta == 0.0 {
            self.big_r
        } else {
            self.big_r * z.powf(self.eta)
        }
    }
}
