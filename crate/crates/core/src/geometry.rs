//! State spaces and flat-torus arithmetic.
//!
//! Torus positions are stored wrapped into `[0, ℓ)`. Position *differences*
//! between two copies live on the covering space `ℝ` and are never wrapped;
//! [`minimal_difference`] maps them to the representative in `[-ℓ/2, ℓ/2]`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Relative tolerance (in units of ℓ) within which a difference is treated as
/// lying exactly on the antipodal set `ℓ/2 + ℓℤ`.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean,
    Torus,
}

/// `m` particles with `n` coordinates each, either in `ℝ^{mn}` or on the flat
/// torus of circumference `ell` (torus requires `n = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub m: usize,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
}

fn one() -> usize {
    1
}

impl SpaceSpec {
    pub fn euclidean(m: usize, n: usize) -> Result<Self> {
        let space = SpaceSpec {
            kind: SpaceKind::Euclidean,
            m,
            n,
            ell: None,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn torus(m: usize, ell: f64) -> Result<Self> {
        let space = SpaceSpec {
            kind: SpaceKind::Torus,
            m,
            n: 1,
            ell: Some(ell),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config(format!(
                "particle count m and dimension n must be positive (m = {}, n = {})",
                self.m, self.n
            )));
        }
        match (self.kind, self.ell) {
            (SpaceKind::Euclidean, None) => Ok(()),
            (SpaceKind::Euclidean, Some(_)) => Err(Error::Config(
                "circumference ell only applies to a torus".into(),
            )),
            (SpaceKind::Torus, None) => {
                Err(Error::Config("torus requires a circumference ell".into()))
            }
            (SpaceKind::Torus, Some(ell)) => {
                if !(ell.is_finite() && ell > 0.0) {
                    return Err(Error::Config(format!("ell must be positive, got {ell}")));
                }
                if self.n != 1 {
                    return Err(Error::Config(format!(
                        "torus spaces support one coordinate per particle, got n = {}",
                        self.n
                    )));
                }
                Ok(())
            }
        }
    }

    /// Total number of position coordinates, `m·n`.
    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn is_torus(&self) -> bool {
        self.kind == SpaceKind::Torus
    }

    /// Circumference, or `None` for Euclidean space.
    pub fn circumference(&self) -> Option<f64> {
        match self.kind {
            SpaceKind::Torus => self.ell,
            SpaceKind::Euclidean => None,
        }
    }

    /// The coordinate range of particle `i` in a flat state vector.
    pub fn block(&self, i: usize) -> std::ops::Range<usize> {
        i * self.n..(i + 1) * self.n
    }
}

/// Reduces one coordinate into `[0, ℓ)`.
#[inline]
pub fn wrap_scalar(x: f64, ell: f64) -> f64 {
    let r = x.rem_euclid(ell);
    // rem_euclid can round up to ℓ for tiny negative inputs.
    if r >= ell {
        0.0
    } else {
        r
    }
}

pub fn wrap_position(x: &[f64], ell: f64) -> Result<Vec<f64>> {
    check_circumference(ell)?;
    ensure_finite(x, "x")?;
    Ok(x.iter().map(|&xi| wrap_scalar(xi, ell)).collect())
}

pub(crate) fn wrap_in_place(x: &mut [f64], ell: f64) {
    for xi in x {
        *xi = wrap_scalar(*xi, ell);
    }
}

/// Representative of `z mod ℓ` in `[-ℓ/2, ℓ/2]`.
///
/// Off the antipodal set this is `z - ⌊(z + ℓ/2)/ℓ⌋ℓ`. When `z` lies on
/// `ℓ/2 + ℓℤ` (within [`BOUNDARY_TOL`]`·ℓ`) the sign is chosen from the
/// relative velocity `w`: `+ℓ/2` if `w < 0`, `-ℓ/2` otherwise. This makes
/// `t ↦ ζ(z + wt, w)` right-continuous. Non-finite inputs propagate as NaN.
#[inline]
pub fn minimal_difference(z: f64, w: f64, ell: f64) -> f64 {
    let half = 0.5 * ell;
    let offset = (z - half).rem_euclid(ell);
    let tol = BOUNDARY_TOL * ell;
    if offset < tol || ell - offset < tol {
        return if w < 0.0 { half } else { -half };
    }
    let zeta = z - ((z + half) / ell).floor() * ell;
    zeta.clamp(-half, half)
}

/// `τ_z(x)`: translate a torus point by a tangent vector.
pub fn translate(x: &[f64], z: &[f64], ell: f64) -> Result<Vec<f64>> {
    check_circumference(ell)?;
    ensure_len(z, x.len())?;
    ensure_finite(x, "x")?;
    ensure_finite(z, "z")?;
    Ok(x
        .iter()
        .zip(z)
        .map(|(&xi, &zi)| wrap_scalar(xi + zi, ell))
        .collect())
}

fn check_circumference(ell: f64) -> Result<()> {
    if ell.is_finite() && ell > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("ell must be positive, got {ell}")))
    }
}
