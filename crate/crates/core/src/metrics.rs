//! Contraction metrics and their rate/condition calculators.
//!
//! Euclidean, weakly anharmonic case: the quadratic form `ρ²(z, w)` with
//! block matrix `𝖦`. Torus case: the concave, capped transform `f` applied to
//! a per-particle weighted distance `r_i`, summed over particles.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::geometry::minimal_difference;
use crate::potentials::Precision;

/// Rate and condition of the weakly anharmonic contraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WahRate {
    pub c: f64,
    pub condition_ok: bool,
    /// Condition number of `𝖦`; only known when the full precision is given.
    pub kappa_g: Option<f64>,
}

/// `c = (λ/m)·min(1/8, (8/5)·m²/(σ²λ²))`, valid when `λ/m ≥ 4·L_G·σ_max`.
pub fn wah_rate(lambda: f64, m: f64, sigma_max: f64, lipschitz_g: f64) -> WahRate {
    let ratio = lambda / m;
    let c = ratio * f64::min(0.125, 1.6 / (sigma_max * sigma_max * ratio * ratio));
    WahRate {
        c,
        condition_ok: ratio >= 4.0 * lipschitz_g * sigma_max,
        kappa_g: None,
    }
}

/// The metric `ρ²(z, w) = ½(|w|² + zᵀ𝒞⁻¹z) + λ/(4m)·z·w + λ²/(8m²)·|z|²`.
#[derive(Debug, Clone)]
pub struct WahMetric {
    pub lambda: f64,
    pub m: f64,
    pub c_inv: Precision,
}

impl WahMetric {
    pub fn new(lambda: f64, m: f64, c_inv: Precision) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0 && m.is_finite() && m > 0.0) {
            return Err(Error::Config(format!(
                "lambda and m must be positive, got {lambda} and {m}"
            )));
        }
        Ok(WahMetric { lambda, m, c_inv })
    }

    /// The `2d × 2d` matrix `𝖦` acting on `(z, w)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.c_inv.dim();
        let (zz, zw) = self.block_coefficients();
        let c_inv = self.c_inv.as_dense();
        let mut g = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = 0.5 * c_inv[(i, j)];
            }
            g[(i, i)] += zz;
            g[(i, d + i)] = zw;
            g[(d + i, i)] = zw;
            g[(d + i, d + i)] = 0.5;
        }
        g
    }

    fn block_coefficients(&self) -> (f64, f64) {
        let r = self.lambda / self.m;
        (r * r / 8.0, r / 8.0)
    }

    /// Eigenvalues of `𝒞⁻¹`: read off for diagonal precisions, otherwise a
    /// symmetric eigensolve of the `d × d` matrix.
    fn precision_spectrum(&self) -> Vec<f64> {
        match &self.c_inv {
            Precision::Diagonal(d) => d.clone(),
            Precision::Dense { matrix, .. } => {
                SymmetricEigen::new(matrix.clone()).eigenvalues.as_slice().to_vec()
            }
        }
    }

    /// Smallest and largest eigenvalues of `𝖦`.
    ///
    /// Off-diagonal blocks of `𝖦` are multiples of the identity, so in an
    /// eigenbasis of `𝒞⁻¹` it splits into `2 × 2` blocks
    /// `[[λ²/8m² + μ/2, λ/8m], [λ/8m, 1/2]]`, one per eigenvalue `μ`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let (zz, zw) = self.block_coefficients();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mu in self.precision_spectrum() {
            let p = zz + 0.5 * mu;
            let q = 0.5;
            let mean = 0.5 * (p + q);
            let radius = (0.25 * (p - q) * (p - q) + zw * zw).sqrt();
            // The smaller root via the determinant avoids cancellation.
            let big = mean + radius;
            let small = (p * q - zw * zw) / big;
            lo = lo.min(small);
            hi = hi.max(big);
        }
        (lo, hi)
    }

    /// `κ(𝖦) = λ_max / λ_min`.
    pub fn kappa(&self) -> f64 {
        let (lo, hi) = self.eigen_range();
        hi / lo
    }

    /// Rate for a perturbation with gradient-Lipschitz constant `lipschitz_g`.
    pub fn rate(&self, lipschitz_g: f64) -> WahRate {
        WahRate {
            kappa_g: Some(self.kappa()),
            ..wah_rate(self.lambda, self.m, self.c_inv.sigma_max(), lipschitz_g)
        }
    }
}

/// `ρ²(z, w)` under `metric`.
pub fn rho_squared_wah(z: &[f64], w: &[f64], metric: &WahMetric) -> Result<f64> {
    let d = metric.c_inv.dim();
    ensure_len(z, d)?;
    ensure_len(w, d)?;
    let (zz, zw) = metric.block_coefficients();
    let mut z_sq = 0.0;
    let mut w_sq = 0.0;
    let mut zw_dot = 0.0;
    for (a, b) in z.iter().zip(w) {
        z_sq += a * a;
        w_sq += b * b;
        zw_dot += a * b;
    }
    Ok(0.5 * (w_sq + metric.c_inv.quadratic_form(z)) + 2.0 * zw * zw_dot + zz * z_sq)
}

/// Parameters of the torus semimetric and the associated rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusMetricParams {
    pub beta: f64,
    pub lambda: f64,
    pub m: f64,
    pub ell: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// Cap `R = ℓ/2 + m/(√β λ)` beyond which `f` is flat.
    pub r_cap: f64,
    pub gamma: f64,
    pub a: f64,
    pub alpha: f64,
    pub c_a: f64,
    pub cond_lambda_ok: bool,
    #[serde(rename = "cond_J_ok")]
    pub cond_j_ok: bool,
}

/// Derives `R, γ, a, α`, the rate `c_A` and both sufficient conditions.
pub fn torus_params(beta: f64, lambda: f64, m: f64, ell: f64, l: f64, j: f64) -> Result<TorusMetricParams> {
    for (name, v) in [("beta", beta), ("lambda", lambda), ("m", m), ("ell", ell)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("L", l), ("J", j)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
        }
    }
    let sb = beta.sqrt();
    let ratio = lambda / m;
    let half = 0.5 * ell;
    let r_cap = half + 1.0 / (sb * ratio);
    let damping = (-sb * ratio * half).exp();
    let cond_j_ok = if m <= 1.0 {
        true
    } else {
        let bound = (beta * l * ell * ell).sqrt().max(1.0) * damping
            / (75.0 * (m - 1.0) * beta * ell * ell);
        j <= bound
    };
    Ok(TorusMetricParams {
        beta,
        lambda,
        m,
        ell,
        l,
        j,
        r_cap,
        gamma: 1.0 / (sb * r_cap),
        a: sb * ratio,
        alpha: (1.0 + beta * l * r_cap * r_cap).sqrt(),
        c_a: ratio * damping / 90.0,
        cond_lambda_ok: sb * ratio * half >= 25.0 / 6.0 + 11.0 * beta * l * half * half,
        cond_j_ok,
    })
}

impl TorusMetricParams {
    /// `f(r) = (1 − e^{−a·min(r, R)}) / a`.
    pub fn profile(&self, r: f64) -> f64 {
        -(-self.a * r.min(self.r_cap)).exp_m1() / self.a
    }

    /// Left derivative of [`Self::profile`]: `e^{−ar}` up to and including
    /// `R`, zero beyond.
    pub fn profile_left_derivative(&self, r: f64) -> f64 {
        if r <= self.r_cap {
            (-self.a * r).exp()
        } else {
            0.0
        }
    }

    /// `r_i = √(ζ² + α⁻²(ζ + w/γ)²)` for one particle.
    pub fn particle_distance(&self, zeta: f64, w: f64) -> f64 {
        let q = zeta + w / self.gamma;
        (zeta * zeta + q * q / (self.alpha * self.alpha)).sqrt()
    }
}

/// Distances between the two copies of a torus coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusDistance {
    pub r: Vec<f64>,
    /// `Σ f(r_i)`.
    pub rho: f64,
    /// `(1/m)·Σ √(ζ_i² + w_i²)`.
    pub rho_simple: f64,
}

/// Evaluates `r_i`, `ρ` and the plain averaged distance from the covering
/// differences `z`, `w`.
pub fn torus_distance(z: &[f64], w: &[f64], params: &TorusMetricParams) -> Result<TorusDistance> {
    ensure_len(w, z.len())?;
    let mut r = Vec::with_capacity(z.len());
    let mut rho = 0.0;
    let mut simple = 0.0;
    for (&zi, &wi) in z.iter().zip(w) {
        let zeta = minimal_difference(zi, wi, params.ell);
        let ri = params.particle_distance(zeta, wi);
        rho += params.profile(ri);
        simple += (zeta * zeta + wi * wi).sqrt();
        r.push(ri);
    }
    let m = z.len().max(1) as f64;
    Ok(TorusDistance {
        r,
        rho,
        rho_simple: simple / m,
    })
}

/// `(1/m)·Σ √(ζ_i² + w_i²)` without the other parts of [`torus_distance`].
pub fn rho_simple(z: &[f64], w: &[f64], ell: f64) -> f64 {
    let sum: f64 = z
        .iter()
        .zip(w)
        .map(|(&zi, &wi)| {
            let zeta = minimal_difference(zi, wi, ell);
            (zeta * zeta + wi * wi).sqrt()
        })
        .sum();
    sum / z.len().max(1) as f64
}

/// `ρ = Σ f(r_i)` without allocating the per-particle distances.
pub fn rho_theorem(z: &[f64], w: &[f64], params: &TorusMetricParams) -> f64 {
    z.iter()
        .zip(w)
        .map(|(&zi, &wi)| {
            let zeta = minimal_difference(zi, wi, params.ell);
            params.profile(params.particle_distance(zeta, wi))
        })
        .sum()
}
