//! Interaction potentials in the internal unit system.
//!
//! Everything in this crate is expressed in units with `hbar = mu = r0 = 1`,
//! where `mu` is the reduced mass of the colliding pair and `r0` the range of
//! the interaction. Energies are therefore measured in `hbar^2 / (mu r0^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Reduced mass in internal units.
pub const MU: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `V0 (r0 / r) exp(-r / r0)`
    ScreenedCoulomb,
    /// `V0` inside `r < r0`, zero outside.
    SquareWell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Strength; negative values are attractive.
    pub v0: f64,
    /// Range (screening length or well radius).
    pub r0: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, v0: f64, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Domain(format!("potential range must be positive, got {r0}")));
        }
        if !v0.is_finite() {
            return Err(Error::Domain(format!("potential strength must be finite, got {v0}")));
        }
        Ok(Self { kind, v0, r0 })
    }

    pub fn screened_coulomb(v0: f64) -> Self {
        Self { kind: PotentialKind::ScreenedCoulomb, v0, r0: 1.0 }
    }

    pub fn square_well(v0: f64) -> Self {
        Self { kind: PotentialKind::SquareWell, v0, r0: 1.0 }
    }

    pub fn with_v0(self, v0: f64) -> Self {
        Self { v0, ..self }
    }

    pub fn is_zero(&self) -> bool {
        self.v0 == 0.0
    }

    /// Radius beyond which `|V|` is below `tol` (relative to `|V0|`).
    pub fn negligible_beyond(&self, tol: f64) -> f64 {
        match self.kind {
            PotentialKind::SquareWell => self.r0,
            PotentialKind::ScreenedCoulomb => {
                // exp(-x)/x < tol, solved by fixed point from x = -ln tol.
                let mut x = -tol.ln();
                for _ in 0..20 {
                    x = -(tol * x).ln();
                }
                x * self.r0
            }
        }
    }

    /// Evaluation without the domain check; `r` must be positive for the
    /// screened Coulomb form.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::ScreenedCoulomb => self.v0 * (self.r0 / r) * (-r / self.r0).exp(),
            PotentialKind::SquareWell => {
                if r < self.r0 {
                    self.v0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn evaluate(p: &PotentialSpec, r: f64) -> Result<f64> {
    match p.kind {
        PotentialKind::ScreenedCoulomb if !(r > 0.0) => {
            domain(format!("screened Coulomb potential needs r > 0, got {r}"))
        }
        PotentialKind::SquareWell if !(r >= 0.0) => domain(format!("square well needs r >= 0, got {r}")),
        _ => Ok(p.value(r)),
    }
}

/// Potential plus the centrifugal barrier `l(l+1) / (2 mu r^2)`.
pub fn effective_radial(p: &PotentialSpec, r: f64, l: u32) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("effective radial potential needs r > 0, got {r}"));
    }
    Ok(p.value(r) + centrifugal(l, r))
}

#[inline]
pub fn centrifugal(l: u32, r: f64) -> f64 {
    let l = l as f64;
    l * (l + 1.0) / (2.0 * MU * r * r)
}
