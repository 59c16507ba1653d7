//! Phase-space states for single and coupled runs.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::geometry::{minimal_difference, wrap_in_place, wrap_scalar, SpaceSpec};
use crate::potentials::Potential;

/// Positions and velocities of all particles, flattened particle-major
/// (`x[i*n .. (i+1)*n]` is particle `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        PhasePoint { x, v }
    }

    pub fn zeros(dim: usize) -> Self {
        PhasePoint {
            x: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    /// Checks dimensions and finiteness; wraps torus positions.
    pub(crate) fn normalize(&mut self, space: &SpaceSpec) -> Result<()> {
        ensure_len(&self.x, space.dim())?;
        ensure_len(&self.v, space.dim())?;
        ensure_finite(&self.x, "x")?;
        ensure_finite(&self.v, "v")?;
        if let Some(ell) = space.circumference() {
            wrap_in_place(&mut self.x, ell);
        }
        Ok(())
    }

    /// `H(x, v) = ½|v|² + U(x)`.
    pub fn hamiltonian(&self, potential: &Potential) -> f64 {
        0.5 * self.v.iter().map(|v| v * v).sum::<f64>() + potential.energy_unchecked(&self.x)
    }
}

/// Torus coupling state `(x, v, z, w)`: the first copy `(x, v)`, and the
/// differences `z`, `w` to the second copy on the covering space, so that the
/// second copy is `(τ_{-z}(x), v − w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPair {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl TorusPair {
    /// Builds the difference representation of two torus copies, choosing
    /// `z` as the minimal difference of the positions.
    pub fn from_copies(first: &PhasePoint, second: &PhasePoint, ell: f64) -> Result<Self> {
        ensure_len(&second.x, first.x.len())?;
        let w: Vec<f64> = first.v.iter().zip(&second.v).map(|(a, b)| a - b).collect();
        let z = first
            .x
            .iter()
            .zip(&second.x)
            .zip(&w)
            .map(|((a, b), &wi)| minimal_difference(a - b, wi, ell))
            .collect();
        let mut x = first.x.clone();
        wrap_in_place(&mut x, ell);
        Ok(TorusPair {
            x,
            v: first.v.clone(),
            z,
            w,
        })
    }

    /// `π^C(x, v, z, w) = ((x, v), (τ_{-z}(x), v − w))`.
    pub fn project(&self, ell: f64) -> (PhasePoint, PhasePoint) {
        let second_x = self
            .x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| wrap_scalar(x - z, ell))
            .collect();
        let second_v = self.v.iter().zip(&self.w).map(|(v, w)| v - w).collect();
        (
            PhasePoint::new(self.x.clone(), self.v.clone()),
            PhasePoint::new(second_x, second_v),
        )
    }

    /// Minimal differences `ζ(z, w)` per particle.
    pub fn zeta(&self, ell: f64) -> Vec<f64> {
        self.z
            .iter()
            .zip(&self.w)
            .map(|(&z, &w)| minimal_difference(z, w, ell))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupledState {
    Euclidean {
        first: PhasePoint,
        second: PhasePoint,
    },
    Torus(TorusPair),
}

impl CoupledState {
    pub fn first(&self) -> PhasePoint {
        match self {
            CoupledState::Euclidean { first, .. } => first.clone(),
            CoupledState::Torus(p) => PhasePoint::new(p.x.clone(), p.v.clone()),
        }
    }

    /// Both copies as ordinary phase points.
    pub fn copies(&self, space: &SpaceSpec) -> (PhasePoint, PhasePoint) {
        match self {
            CoupledState::Euclidean { first, second } => (first.clone(), second.clone()),
            CoupledState::Torus(p) => p.project(space.circumference().unwrap_or(f64::INFINITY)),
        }
    }

    /// Position and velocity differences `(z, w)` between the copies; for the
    /// torus `z` is the covering-space difference.
    pub fn differences(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CoupledState::Euclidean { first, second } => (
                first.x.iter().zip(&second.x).map(|(a, b)| a - b).collect(),
                first.v.iter().zip(&second.v).map(|(a, b)| a - b).collect(),
            ),
            CoupledState::Torus(p) => (p.z.clone(), p.w.clone()),
        }
    }

    pub(crate) fn normalize(&mut self, space: &SpaceSpec) -> Result<()> {
        match (self, space.circumference()) {
            (CoupledState::Euclidean { first, second }, None) => {
                first.normalize(space)?;
                second.normalize(space)
            }
            (CoupledState::Torus(p), Some(ell)) => {
                let dim = space.dim();
                for (name, block) in [("x", &p.x), ("v", &p.v), ("z", &p.z), ("w", &p.w)] {
                    ensure_len(block, dim)?;
                    ensure_finite(block, name)?;
                }
                wrap_in_place(&mut p.x, ell);
                Ok(())
            }
            (CoupledState::Euclidean { .. }, Some(_)) => Err(Error::Config(
                "torus space needs a torus coupled state".into(),
            )),
            (CoupledState::Torus(_), None) => Err(Error::Config(
                "Euclidean space needs a Euclidean coupled state".into(),
            )),
        }
    }
}
