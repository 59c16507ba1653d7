//! Potential energy families.
//!
//! [`PotentialSpec`] is the serialisable description used in run configs; it
//! is sized against a [`SpaceSpec`] by [`PotentialSpec::build`] to give a
//! [`Potential`] that evaluates energies, forces and the analytic constants
//! consumed by the rate calculators in [`crate::metrics`].

use std::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::geometry::SpaceSpec;
use crate::rng::standard_normal_fill;

/// How the precision matrix `𝒞⁻¹` of a quadratic potential is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecisionSpec {
    Named(PrecisionName),
    Diagonal(Vec<f64>),
    Dense(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionName {
    /// `diag(1, 4, …, N²)`: a truncated infinite-dimensional Gaussian.
    Neal,
    Identity,
}

/// Interaction graph of a [`PotentialSpec::TorusCosine`] potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NeighborGraph {
    Named(GraphName),
    Edges(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphName {
    None,
    /// Nearest neighbours on a periodic chain.
    Ring,
    Complete,
}

impl Default for NeighborGraph {
    fn default() -> Self {
        NeighborGraph::Named(GraphName::None)
    }
}

impl NeighborGraph {
    fn edges(&self, m: usize) -> Result<Vec<(usize, usize)>> {
        let mut edges: Vec<(usize, usize)> = match self {
            NeighborGraph::Named(GraphName::None) => Vec::new(),
            NeighborGraph::Named(GraphName::Ring) => match m {
                0 | 1 => Vec::new(),
                2 => vec![(0, 1)],
                _ => (0..m).map(|i| (i, (i + 1) % m)).collect(),
            },
            NeighborGraph::Named(GraphName::Complete) => (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .collect(),
            NeighborGraph::Edges(list) => list.clone(),
        };
        for e in edges.iter_mut() {
            if e.0 >= m || e.1 >= m {
                return Err(Error::Config(format!(
                    "edge ({}, {}) references a particle outside 0..{m}",
                    e.0, e.1
                )));
            }
            if e.0 == e.1 {
                return Err(Error::Config(format!("self-loop on particle {}", e.0)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        let before = edges.len();
        edges.sort_unstable();
        edges.dedup();
        if edges.len() != before {
            return Err(Error::Config("duplicate edges in neighbor graph".into()));
        }
        Ok(edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Free streaming, `U ≡ 0`.
    Zero,
    /// `U(x) = ½ xᵀ𝒞⁻¹x`.
    Quadratic { c_inv: PrecisionSpec },
    /// `U(x) = ½ xᵀ𝒞⁻¹x + L_G·ln cosh|x|`.
    QuadraticPlusConvex {
        c_inv: PrecisionSpec,
        lipschitz_g: f64,
    },
    /// `U(x) = Σᵢ A(1 − cos(2πxᵢ/ℓ)) + Σ_{(i,j)∈E} J̄(1 − cos(2π(xᵢ − xⱼ)/ℓ))`.
    TorusCosine {
        amp_local: f64,
        amp_pair: f64,
        #[serde(default)]
        neighbors: NeighborGraph,
    },
}

impl PotentialSpec {
    pub fn build(&self, space: &SpaceSpec) -> Result<Potential> {
        space.validate()?;
        let dim = space.dim();
        let euclidean_only = |name: &str| -> Result<()> {
            if space.is_torus() {
                Err(Error::Config(format!(
                    "{name} potential is not periodic and cannot be used on a torus"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            PotentialSpec::Zero => Ok(Potential::Zero { dim }),
            PotentialSpec::Quadratic { c_inv } => {
                euclidean_only("quadratic")?;
                Ok(Potential::Quadratic {
                    precision: Precision::from_spec(c_inv, dim)?,
                })
            }
            PotentialSpec::QuadraticPlusConvex { c_inv, lipschitz_g } => {
                euclidean_only("quadratic_plus_convex")?;
                Ok(Potential::QuadraticPlusConvex {
                    precision: Precision::from_spec(c_inv, dim)?,
                    perturbation: LogCoshNorm::new(*lipschitz_g)?,
                })
            }
            PotentialSpec::TorusCosine {
                amp_local,
                amp_pair,
                neighbors,
            } => {
                let Some(ell) = space.circumference() else {
                    return Err(Error::Config(
                        "torus_cosine potential requires a torus space".into(),
                    ));
                };
                TorusCosine::new(*amp_local, *amp_pair, ell, neighbors.edges(space.m)?, space.m)
                    .map(Potential::TorusCosine)
            }
        }
    }
}

/// Symmetric positive definite precision matrix `𝒞⁻¹`.
#[derive(Debug, Clone)]
pub enum Precision {
    Diagonal(Vec<f64>),
    Dense {
        matrix: DMatrix<f64>,
        cholesky: Cholesky<f64, Dyn>,
        min_eigenvalue: f64,
    },
}

impl Precision {
    pub fn from_spec(spec: &PrecisionSpec, dim: usize) -> Result<Self> {
        match spec {
            PrecisionSpec::Named(PrecisionName::Neal) => Ok(Precision::Diagonal(
                (1..=dim).map(|i| (i * i) as f64).collect(),
            )),
            PrecisionSpec::Named(PrecisionName::Identity) => {
                Ok(Precision::Diagonal(vec![1.0; dim]))
            }
            PrecisionSpec::Diagonal(d) => {
                ensure_len(d, dim)?;
                Precision::diagonal(d.clone())
            }
            PrecisionSpec::Dense(rows) => {
                if rows.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: rows.len(),
                    });
                }
                for row in rows {
                    ensure_len(row, dim)?;
                }
                Precision::dense(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }

    pub fn diagonal(d: Vec<f64>) -> Result<Self> {
        if let Some(bad) = d.iter().find(|&&c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::NotPositiveDefinite(format!(
                "diagonal entry {bad} is not positive"
            )));
        }
        Ok(Precision::Diagonal(d))
    }

    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotPositiveDefinite("matrix is not square".into()));
        }
        ensure_finite(matrix.as_slice(), "c_inv")?;
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let cholesky = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let min_eigenvalue = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
        if min_eigenvalue <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min_eigenvalue:e}"
            )));
        }
        Ok(Precision::Dense {
            matrix,
            cholesky,
            min_eigenvalue,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Precision::Diagonal(d) => d.len(),
            Precision::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    /// `out = 𝒞⁻¹x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Precision::Diagonal(d) => {
                for ((o, &c), &xi) in out.iter_mut().zip(d).zip(x) {
                    *o = c * xi;
                }
            }
            Precision::Dense { matrix, .. } => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = matrix.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// `xᵀ𝒞⁻¹x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        match self {
            Precision::Diagonal(d) => d.iter().zip(x).map(|(c, xi)| c * xi * xi).sum(),
            Precision::Dense { matrix, .. } => {
                let v = DVector::from_column_slice(x);
                v.dot(&(matrix * &v))
            }
        }
    }

    /// Smallest eigenvalue of `𝒞⁻¹`, i.e. `σ_max⁻²`.
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Precision::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            Precision::Dense { min_eigenvalue, .. } => *min_eigenvalue,
        }
    }

    /// `σ_max`, the square root of the largest eigenvalue of `𝒞`.
    pub fn sigma_max(&self) -> f64 {
        self.min_eigenvalue().sqrt().recip()
    }

    pub fn as_dense(&self) -> DMatrix<f64> {
        match self {
            Precision::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Precision::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// Draws `x ~ 𝒩(0, 𝒞/β)`, the position marginal of the Gaussian
    /// Boltzmann–Gibbs measure.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        standard_normal_fill(rng, &mut x);
        let scale = beta.sqrt().recip();
        match self {
            Precision::Diagonal(d) => {
                for (xi, c) in x.iter_mut().zip(d) {
                    *xi *= scale / c.sqrt();
                }
                x
            }
            Precision::Dense { cholesky, .. } => {
                // 𝒞⁻¹ = LLᵀ, so L⁻ᵀξ has covariance 𝒞.
                let l = cholesky.l();
                let mut v = DVector::from_vec(x) * scale;
                l.transpose().solve_upper_triangular_mut(&mut v);
                v.as_slice().to_vec()
            }
        }
    }
}

/// Convex perturbation `G(x) = L_G·ln cosh|x|`.
///
/// Its Hessian has radial eigenvalue `L_G·sech²r` and tangential eigenvalues
/// `L_G·tanh(r)/r`, all in `[0, L_G]`, so `∇G` is `L_G`-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCoshNorm {
    pub lipschitz: f64,
}

impl LogCoshNorm {
    pub fn new(lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::Config(format!(
                "lipschitz_g must be non-negative, got {lipschitz}"
            )));
        }
        Ok(LogCoshNorm { lipschitz })
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        // ln cosh r, stable for large r
        self.lipschitz * (r + (-2.0 * r).exp().ln_1p() - LN_2)
    }

    /// Adds `∇G(x)` to `out`.
    pub fn add_gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        // tanh(r)/r, with its limit 1 at the origin
        let ratio = if r < 1e-4 {
            1.0 - r * r / 3.0
        } else {
            r.tanh() / r
        };
        let k = self.lipschitz * ratio;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += k * xi;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusCosine {
    pub amp_local: f64,
    pub amp_pair: f64,
    pub ell: f64,
    edges: Vec<(usize, usize)>,
    max_degree: usize,
    m: usize,
}

impl TorusCosine {
    pub fn new(
        amp_local: f64,
        amp_pair: f64,
        ell: f64,
        edges: Vec<(usize, usize)>,
        m: usize,
    ) -> Result<Self> {
        if !(amp_local.is_finite() && amp_local >= 0.0 && amp_pair.is_finite() && amp_pair >= 0.0)
        {
            return Err(Error::Config(format!(
                "torus_cosine amplitudes must be non-negative (amp_local = {amp_local}, amp_pair = {amp_pair})"
            )));
        }
        let mut degree = vec![0usize; m];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        Ok(TorusCosine {
            amp_local,
            amp_pair,
            ell,
            max_degree: degree.into_iter().max().unwrap_or(0),
            edges,
            m,
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI / self.ell
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let k = self.wavenumber();
        let local: f64 = x.iter().map(|&xi| 1.0 - (k * xi).cos()).sum();
        let pair: f64 = self
            .edges
            .iter()
            .map(|&(i, j)| 1.0 - (k * (x[i] - x[j])).cos())
            .sum();
        self.amp_local * local + self.amp_pair * pair
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.wavenumber();
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.amp_local * k * (k * xi).sin();
        }
        if self.amp_pair != 0.0 {
            for &(i, j) in &self.edges {
                let g = self.amp_pair * k * (k * (x[i] - x[j])).sin();
                out[i] += g;
                out[j] -= g;
            }
        }
    }

    /// `L = sup |∂²U/∂xᵢ²| = (2π/ℓ)²(A + J̄·max degree)`.
    pub fn diagonal_bound(&self) -> f64 {
        let k = self.wavenumber();
        k * k * (self.amp_local + self.amp_pair * self.max_degree as f64)
    }

    /// `J = sup |∂²U/∂xᵢ∂xⱼ| = (2π/ℓ)²J̄` when any edge exists.
    pub fn coupling_bound(&self) -> f64 {
        if self.edges.is_empty() {
            0.0
        } else {
            let k = self.wavenumber();
            k * k * self.amp_pair
        }
    }
}

/// Analytic constants of a potential; `None` where a constant does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub sigma_max: Option<f64>,
    pub lipschitz_g: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Potential {
    Zero {
        dim: usize,
    },
    Quadratic {
        precision: Precision,
    },
    QuadraticPlusConvex {
        precision: Precision,
        perturbation: LogCoshNorm,
    },
    TorusCosine(TorusCosine),
}

impl Potential {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Zero { dim } => *dim,
            Potential::Quadratic { precision }
            | Potential::QuadraticPlusConvex { precision, .. } => precision.dim(),
            Potential::TorusCosine(t) => t.m,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero { .. })
    }

    pub fn precision(&self) -> Option<&Precision> {
        match self {
            Potential::Quadratic { precision }
            | Potential::QuadraticPlusConvex { precision, .. } => Some(precision),
            _ => None,
        }
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        ensure_len(x, self.dim())?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero { .. } => 0.0,
            Potential::Quadratic { precision } => 0.5 * precision.quadratic_form(x),
            Potential::QuadraticPlusConvex {
                precision,
                perturbation,
            } => 0.5 * precision.quadratic_form(x) + perturbation.energy(x),
            Potential::TorusCosine(t) => t.energy(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len(x, self.dim())?;
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        Ok(out)
    }

    /// Writes `∇U(x)` into `out` without dimension checks.
    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Zero { .. } => out.fill(0.0),
            Potential::Quadratic { precision } => precision.apply(x, out),
            Potential::QuadraticPlusConvex {
                precision,
                perturbation,
            } => {
                precision.apply(x, out);
                perturbation.add_gradient(x, out);
            }
            Potential::TorusCosine(t) => t.gradient_into(x, out),
        }
    }

    pub fn constants(&self) -> PotentialConstants {
        match self {
            Potential::Zero { .. } => PotentialConstants {
                sigma_max: None,
                lipschitz_g: Some(0.0),
                l: Some(0.0),
                j: Some(0.0),
            },
            Potential::Quadratic { precision } => PotentialConstants {
                sigma_max: Some(precision.sigma_max()),
                lipschitz_g: Some(0.0),
                ..Default::default()
            },
            Potential::QuadraticPlusConvex {
                precision,
                perturbation,
            } => PotentialConstants {
                sigma_max: Some(precision.sigma_max()),
                lipschitz_g: Some(perturbation.lipschitz),
                ..Default::default()
            },
            Potential::TorusCosine(t) => PotentialConstants {
                sigma_max: None,
                lipschitz_g: None,
                l: Some(t.diagonal_bound()),
                j: Some(t.coupling_bound()),
            },
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
