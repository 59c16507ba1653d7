//! Deterministic Hamiltonian flows between velocity randomizations.
//!
//! Free streaming and diagonal harmonic potentials are integrated in closed
//! form. Everything else uses velocity Verlet, finishing each interval with a
//! partial step so that the requested end time is hit exactly.

use std::f64::consts::TAU;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{wrap_in_place, wrap_scalar, SpaceSpec};
use crate::potentials::{Potential, Precision};
use crate::state::{PhasePoint, TorusPair};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    #[default]
    Exact,
    /// Leapfrog with step `h`; `None` picks `10⁻³` of the characteristic
    /// period of the potential.
    Verlet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
    },
}

impl FlowConfig {
    pub fn verlet(step: f64) -> Self {
        FlowConfig::Verlet { step: Some(step) }
    }

    /// Exact where a closed form exists, otherwise Verlet with the default step.
    pub fn preferred_for(potential: &Potential) -> Self {
        if supports_exact(potential) {
            FlowConfig::Exact
        } else {
            FlowConfig::Verlet { step: None }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scheme {
    ExactFree,
    ExactHarmonic,
    Verlet(f64),
}

fn supports_exact(potential: &Potential) -> bool {
    matches!(
        potential,
        Potential::Zero { .. }
            | Potential::Quadratic {
                precision: Precision::Diagonal(_)
            }
    )
}

/// Largest natural angular frequency of the potential, if it has one.
pub fn characteristic_frequency(potential: &Potential) -> Option<f64> {
    let max_eig = |p: &Precision| match p {
        Precision::Diagonal(d) => d.iter().copied().fold(0.0, f64::max),
        Precision::Dense { matrix, .. } => SymmetricEigen::new(matrix.clone()).eigenvalues.max(),
    };
    let curvature = match potential {
        Potential::Zero { .. } => return None,
        Potential::Quadratic { precision } => max_eig(precision),
        Potential::QuadraticPlusConvex {
            precision,
            perturbation,
        } => max_eig(precision) + perturbation.lipschitz,
        Potential::TorusCosine(t) => t.diagonal_bound() + t.coupling_bound(),
    };
    (curvature > 0.0).then(|| curvature.sqrt())
}

fn default_step(potential: &Potential) -> f64 {
    let period = characteristic_frequency(potential).map_or(1.0, |w| TAU / w);
    1e-3 * period
}

/// Reusable integrator bound to one space and potential.
#[derive(Debug)]
pub struct Propagator<'a> {
    space: &'a SpaceSpec,
    potential: &'a Potential,
    scheme: Scheme,
    grad: Vec<f64>,
    grad_second: Vec<f64>,
    second_x: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(space: &'a SpaceSpec, potential: &'a Potential, config: FlowConfig) -> Result<Self> {
        if potential.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: potential.dim(),
            });
        }
        let scheme = match config {
            FlowConfig::Exact => match potential {
                Potential::Zero { .. } => Scheme::ExactFree,
                Potential::Quadratic {
                    precision: Precision::Diagonal(_),
                } => Scheme::ExactHarmonic,
                _ => {
                    return Err(Error::Config(
                        "exact flow is only available for zero and diagonal quadratic potentials"
                            .into(),
                    ))
                }
            },
            FlowConfig::Verlet { step } => {
                let h = step.unwrap_or_else(|| default_step(potential));
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::Config(format!("Verlet step must be positive, got {h}")));
                }
                Scheme::Verlet(h)
            }
        };
        let dim = space.dim();
        Ok(Propagator {
            space,
            potential,
            scheme,
            grad: vec![0.0; dim],
            grad_second: vec![0.0; dim],
            second_x: vec![0.0; dim],
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        self.space
    }

    pub fn potential(&self) -> &Potential {
        self.potential
    }

    /// True when the flow is exact straight-line motion.
    pub fn is_free_streaming(&self) -> bool {
        self.scheme == Scheme::ExactFree
    }

    /// Advances `state` by `t ≥ 0` in place.
    pub fn advance(&mut self, state: &mut PhasePoint, t: f64) -> Result<()> {
        check_duration(t)?;
        if t == 0.0 {
            return Ok(());
        }
        match self.scheme {
            Scheme::ExactFree => {
                for (x, v) in state.x.iter_mut().zip(&state.v) {
                    *x += v * t;
                }
            }
            Scheme::ExactHarmonic => {
                let Potential::Quadratic {
                    precision: Precision::Diagonal(d),
                } = self.potential
                else {
                    unreachable!("scheme chosen from potential")
                };
                for ((x, v), &c) in state.x.iter_mut().zip(state.v.iter_mut()).zip(d) {
                    let omega = c.sqrt();
                    let (s, co) = (omega * t).sin_cos();
                    let (x0, v0) = (*x, *v);
                    *x = x0 * co + v0 / omega * s;
                    *v = -x0 * omega * s + v0 * co;
                }
            }
            Scheme::Verlet(h) => {
                let ell = self.space.circumference();
                self.potential.gradient_into(&state.x, &mut self.grad);
                let mut step = |dt: f64, grad: &mut Vec<f64>| {
                    for (v, f) in state.v.iter_mut().zip(grad.iter()) {
                        *v -= 0.5 * dt * f;
                    }
                    for (x, v) in state.x.iter_mut().zip(&state.v) {
                        *x += dt * v;
                    }
                    if let Some(ell) = ell {
                        wrap_in_place(&mut state.x, ell);
                    }
                    self.potential.gradient_into(&state.x, grad);
                    for (v, f) in state.v.iter_mut().zip(grad.iter()) {
                        *v -= 0.5 * dt * f;
                    }
                };
                let (full, rest) = split_steps(t, h);
                for _ in 0..full {
                    step(h, &mut self.grad);
                }
                if rest > 0.0 {
                    step(rest, &mut self.grad);
                }
            }
        }
        if let Some(ell) = self.space.circumference() {
            wrap_in_place(&mut state.x, ell);
        }
        ensure_finite(&state.x, "x")?;
        ensure_finite(&state.v, "v")
    }

    /// Advances the torus coupling state along
    /// `ẋ = v, v̇ = −∇U(x), ż = w, ẇ = ∇U(τ_{-z}x) − ∇U(x)`.
    /// `z` is left unwrapped.
    pub fn advance_torus_pair(&mut self, y: &mut TorusPair, t: f64) -> Result<()> {
        check_duration(t)?;
        let Some(ell) = self.space.circumference() else {
            return Err(Error::Config("torus pair flow on a Euclidean space".into()));
        };
        if t == 0.0 {
            return Ok(());
        }
        match self.scheme {
            Scheme::ExactFree => {
                for (x, v) in y.x.iter_mut().zip(&y.v) {
                    *x = wrap_scalar(*x + v * t, ell);
                }
                for (z, w) in y.z.iter_mut().zip(&y.w) {
                    *z += w * t;
                }
            }
            Scheme::ExactHarmonic => {
                return Err(Error::Config(
                    "harmonic potentials are not defined on a torus".into(),
                ))
            }
            Scheme::Verlet(h) => {
                let potential = self.potential;
                let (grad, grad_second, second_x) =
                    (&mut self.grad, &mut self.grad_second, &mut self.second_x);
                let mut gradients = |y: &TorusPair, f: &mut [f64], g: &mut [f64]| {
                    for ((s, x), z) in second_x.iter_mut().zip(&y.x).zip(&y.z) {
                        *s = wrap_scalar(x - z, ell);
                    }
                    potential.gradient_into(&y.x, f);
                    potential.gradient_into(second_x, g);
                };
                gradients(y, grad, grad_second);
                // The gradients are stored, so the accelerations are v̇ = −f
                // and ẇ = g − f.
                let kick = |y: &mut TorusPair, dt: f64, f: &[f64], g: &[f64]| {
                    for (((v, w), fi), gi) in y.v.iter_mut().zip(y.w.iter_mut()).zip(f).zip(g) {
                        *v -= 0.5 * dt * fi;
                        *w += 0.5 * dt * (gi - fi);
                    }
                };
                let (full, rest) = split_steps(t, h);
                let steps = std::iter::repeat_n(h, full as usize)
                    .chain((rest > 0.0).then_some(rest));
                for dt in steps {
                    kick(y, dt, grad, grad_second);
                    for (x, v) in y.x.iter_mut().zip(&y.v) {
                        *x = wrap_scalar(*x + dt * v, ell);
                    }
                    for (z, w) in y.z.iter_mut().zip(&y.w) {
                        *z += dt * w;
                    }
                    gradients(y, grad, grad_second);
                    kick(y, dt, grad, grad_second);
                }
            }
        }
        for (name, block) in [("x", &y.x), ("v", &y.v), ("z", &y.z), ("w", &y.w)] {
            ensure_finite(block, name)?;
        }
        Ok(())
    }
}

fn check_duration(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "flow duration must be finite and non-negative, got {t}"
        )))
    }
}

/// Number of full steps of size `h` in `t`, and the leftover partial step.
fn split_steps(t: f64, h: f64) -> (u64, f64) {
    let full = (t / h).floor();
    let rest = t - full * h;
    (full as u64, rest.max(0.0))
}

/// `φ_t(state)` for a single copy.
pub fn flow(
    state: &PhasePoint,
    t: f64,
    potential: &Potential,
    space: &SpaceSpec,
    config: FlowConfig,
) -> Result<PhasePoint> {
    let mut out = state.clone();
    out.normalize(space)?;
    Propagator::new(space, potential, config)?.advance(&mut out, t)?;
    Ok(out)
}

/// Flow of the torus coupling ODE for duration `t`.
pub fn coupled_flow_torus(
    y: &TorusPair,
    t: f64,
    potential: &Potential,
    space: &SpaceSpec,
    config: FlowConfig,
) -> Result<TorusPair> {
    let mut out = y.clone();
    if let Some(ell) = space.circumference() {
        wrap_in_place(&mut out.x, ell);
    }
    Propagator::new(space, potential, config)?.advance_torus_pair(&mut out, t)?;
    Ok(out)
}
