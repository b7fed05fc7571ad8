//! Physical constants and truncation settings shared by the energy modules.

use crate::error::{Error, Result};
use crate::special_functions::{SeriesTolerance, MAX_ORDER};

/// Screening and prefactor settings.
///
/// Lengths may be given in any unit as long as κ_D and the braid geometry
/// agree; energies per unit length come out in multiples of `prefactor`,
/// which is e²/(ε_w l_c²) in reduced units (1 by default).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub kappa_d: f64,
    pub prefactor: f64,
    /// Mean helix phase rate ω_ξ used by the diagonal approximation.
    pub omega_xi: f64,
}

impl PhysicalParams {
    pub fn new(kappa_d: f64) -> Result<Self> {
        let p = Self { kappa_d, prefactor: 1.0, omega_xi: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_d > 0.0 && self.kappa_d.is_finite()) {
            return Err(Error::Domain(format!("κ_D must be positive, got {}", self.kappa_d)));
        }
        if !self.prefactor.is_finite() || !self.omega_xi.is_finite() {
            return Err(Error::Domain("physical parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Index caps for the mode sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// |n|, |n'| caps (azimuthal modes).
    pub n_max: usize,
    /// |m|, |m'| caps (addition-theorem index).
    pub m_max: usize,
    /// |j|, |j'| caps (axial-offset index).
    pub j_max: usize,
    /// n' cap of the inner image sums.
    pub n_image_max: usize,
    pub series: SeriesTolerance,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n_max: 8, m_max: 6, j_max: 6, n_image_max: 12, series: SeriesTolerance::default() }
    }
}

impl Truncation {
    pub fn new(n_max: usize, m_max: usize, j_max: usize) -> Result<Self> {
        let t = Self { n_max, m_max, j_max, ..Self::default() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let widest = (2 * self.n_max).max(self.n_max + self.m_max).max(2 * self.m_max + self.j_max);
        if widest + 2 > MAX_ORDER || self.n_image_max + self.n_max + 2 > MAX_ORDER {
            return Err(Error::Domain(format!("truncation {self:?} needs Bessel orders beyond {MAX_ORDER}")));
        }
        Ok(())
    }
}
