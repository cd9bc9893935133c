//! Data shipped with the crate.

use crate::error::Result;
use crate::io::read_density_1d;
use crate::pde::DensityGrid1D;

const SIZE_DENSITY_CSV: &str = include_str!("../data/bio_density.csv");

/// Reference size density on [0, 3] with 300 cells, used by the fitting study.
pub fn size_density() -> Result<DensityGrid1D> {
    read_density_1d(SIZE_DENSITY_CSV.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_density_parses_and_has_unit_mass() {
        let d = size_density().unwrap();
        assert_eq!(d.n_x, 300);
        assert!((d.x_max - 3.0).abs() < 1e-9);
        assert!((d.mass() - 1.0).abs() < 1e-6);
    }
}
