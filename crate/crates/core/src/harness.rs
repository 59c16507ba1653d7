//! Replicated coupling experiments.
//!
//! An [`Experiment`] describes one coupled run completely: space, potential,
//! dynamics, coupling, initial condition, distance and replica count. Running
//! it draws every replica from its own stream, evaluates the distance on the
//! record grid and reduces the replicas in index order, so the result does not
//! depend on how many threads took part.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::andersen::{AndersenConfig, RecordGrid};
use crate::coupling::{simulate_coupling_observed, CouplingConfig, CouplingKind};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::geometry::{wrap_scalar, SpaceSpec};
use crate::metrics::{rho_squared_wah, rho_theorem, torus_params, TorusMetricParams, WahMetric};
use crate::potentials::{Potential, PotentialSpec};
use crate::rng::{replica_rng, standard_normal_fill, uniform_open01, ReplicaRng};
use crate::state::{CoupledState, PhasePoint, TorusPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Exact,
    Verlet,
}

/// Dynamics parameters; the collision rate is given either directly or per
/// particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_m: Option<f64>,
    pub beta: f64,
    pub t_end: f64,
    /// Defaults to exact where available, Verlet otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl DynamicsSpec {
    pub fn collision_rate(&self, m: usize) -> Result<f64> {
        match (self.lambda, self.lambda_per_m) {
            (Some(l), None) => Ok(l),
            (None, Some(r)) => Ok(r * m as f64),
            (Some(_), Some(_)) => Err(Error::Config(
                "give either dynamics.lambda or dynamics.lambda_per_m, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "dynamics.lambda or dynamics.lambda_per_m is required".into(),
            )),
        }
    }

    pub fn flow_config(&self, potential: &Potential) -> Result<FlowConfig> {
        match (self.flow, self.step) {
            (None, None) => Ok(FlowConfig::preferred_for(potential)),
            (Some(FlowMode::Exact), None) => Ok(FlowConfig::Exact),
            (Some(FlowMode::Exact), Some(_)) => Err(Error::Config(
                "dynamics.step only applies to the verlet flow".into(),
            )),
            (Some(FlowMode::Verlet) | None, step) => Ok(FlowConfig::Verlet { step }),
        }
    }
}

/// `γ` as a number, or `"auto"` for the torus default `1/(√β·R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Fixed(f64),
    Named(AutoGamma),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoGamma {
    Auto,
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Named(AutoGamma::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(default)]
    pub gamma: GammaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Torus: every particle difference at `ℓ/2`, equal velocities.
    Antipodal,
    /// Second copy shifted by a fixed position offset, equal velocities.
    Offset,
    /// First copy drawn from the Boltzmann–Gibbs measure, second copy at a
    /// fixed point at rest.
    StationaryVsPoint,
    /// Both copies equal.
    Identical,
}

/// A scalar applied to every coordinate, or one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl VectorSpec {
    fn expand(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            VectorSpec::Scalar(s) => Ok(vec![*s; dim]),
            VectorSpec::Vector(v) if v.len() == dim => Ok(v.clone()),
            VectorSpec::Vector(v) => Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Torus: `Σ f(r_i)`; Euclidean: `√ρ²` of the weakly anharmonic metric.
    RhoTheorem,
    /// `(1/m)·Σ √(|ζ_i|² + |w_i|²)`.
    RhoSimple,
    RhoSquaredWah,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub replicas: usize,
    pub record_step: f64,
    #[serde(default)]
    pub seed: u64,
    pub distance: DistanceKind,
    pub initial: InitialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<VectorSpec>,
    /// Window `[t₀, t₁]` for rate fits; defaults to `[0.5·T, 0.9·T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

/// Full description of a replicated coupling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub space: SpaceSpec,
    pub potential: PotentialSpec,
    pub dynamics: DynamicsSpec,
    pub coupling: CouplingSpec,
    pub experiment: ExperimentSpec,
}

/// Distance between the copies of a coupled state.
#[derive(Debug, Clone)]
pub enum Distance {
    TorusTheorem(TorusMetricParams),
    Simple { m: usize, n: usize, ell: Option<f64> },
    Wah { metric: WahMetric, squared: bool },
}

impl Distance {
    pub fn evaluate(&self, y: &CoupledState) -> f64 {
        match (self, y) {
            (Distance::TorusTheorem(p), CoupledState::Torus(pair)) => {
                rho_theorem(&pair.z, &pair.w, p)
            }
            (Distance::Simple { m, n, ell }, _) => {
                let (z, w) = match y {
                    CoupledState::Torus(p) => (&p.z, &p.w),
                    CoupledState::Euclidean { .. } => return simple_euclidean(y, *m, *n),
                };
                crate::metrics::rho_simple(z, w, ell.unwrap_or(f64::INFINITY))
            }
            (Distance::Wah { metric, squared }, CoupledState::Euclidean { .. }) => {
                let (z, w) = y.differences();
                let r2 = rho_squared_wah(&z, &w, metric).unwrap_or(f64::NAN);
                if *squared {
                    r2
                } else {
                    r2.sqrt()
                }
            }
            _ => f64::NAN,
        }
    }
}

fn simple_euclidean(y: &CoupledState, m: usize, n: usize) -> f64 {
    let CoupledState::Euclidean { first, second } = y else {
        return f64::NAN;
    };
    let mut sum = 0.0;
    for i in 0..m {
        let mut sq = 0.0;
        for k in i * n..(i + 1) * n {
            let dz = first.x[k] - second.x[k];
            let dw = first.v[k] - second.v[k];
            sq += dz * dz + dw * dw;
        }
        sum += sq.sqrt();
    }
    sum / m as f64
}

/// An [`Experiment`] with every derived quantity worked out.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub experiment: Experiment,
    pub potential: Potential,
    pub coupling: CouplingConfig,
    pub distance: Distance,
    /// Torus metric parameters, when the space is a torus.
    pub torus: Option<TorusMetricParams>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    pub fn collision_rate(&self) -> Result<f64> {
        self.dynamics.collision_rate(self.space.m)
    }

    pub fn fit_window(&self) -> (f64, f64) {
        match self.experiment.fit_window {
            Some([a, b]) => (a, b),
            None => (0.5 * self.dynamics.t_end, 0.9 * self.dynamics.t_end),
        }
    }

    pub fn record_grid(&self) -> Result<RecordGrid> {
        RecordGrid::uniform(self.dynamics.t_end, self.experiment.record_step)
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.space.validate()?;
        let potential = self.potential.build(&self.space)?;
        let lambda = self.collision_rate()?;
        let dynamics = AndersenConfig {
            lambda,
            beta: self.dynamics.beta,
            t_end: self.dynamics.t_end,
            flow: self.dynamics.flow_config(&potential)?,
            record: self.record_grid()?,
        };
        dynamics.validate()?;
        let torus = match self.space.circumference() {
            Some(ell) => {
                let constants = potential.constants();
                Some(torus_params(
                    dynamics.beta,
                    lambda,
                    self.space.m as f64,
                    ell,
                    constants.l.unwrap_or(0.0),
                    constants.j.unwrap_or(0.0),
                )?)
            }
            None => None,
        };
        let gamma = match (self.coupling.kind, self.coupling.gamma, &torus) {
            (CouplingKind::Synchronous, _, _) => 0.0,
            (CouplingKind::Mirror, GammaSpec::Fixed(g), _) => g,
            (CouplingKind::Mirror, GammaSpec::Named(AutoGamma::Auto), Some(p)) => p.gamma,
            (CouplingKind::Mirror, GammaSpec::Named(AutoGamma::Auto), None) => {
                return Err(Error::Config(
                    "gamma = \"auto\" is only defined on the torus; give a number".into(),
                ))
            }
        };
        let coupling = CouplingConfig {
            kind: self.coupling.kind,
            gamma,
            dynamics,
        };
        coupling.validate()?;
        let distance = self.distance(&potential, torus.as_ref(), lambda)?;
        if self.experiment.replicas == 0 {
            return Err(Error::Config("experiment.replicas must be at least 1".into()));
        }
        let prepared = Prepared {
            experiment: self.clone(),
            potential,
            coupling,
            distance,
            torus,
        };
        // Surface initial-condition errors at load time.
        prepared.initial_state(&mut replica_rng(self.experiment.seed, 0))?;
        Ok(prepared)
    }

    fn distance(
        &self,
        potential: &Potential,
        torus: Option<&TorusMetricParams>,
        lambda: f64,
    ) -> Result<Distance> {
        let wah = |squared| -> Result<Distance> {
            let Some(precision) = potential.precision() else {
                return Err(Error::Config(
                    "the weakly anharmonic metric needs a quadratic potential".into(),
                ));
            };
            Ok(Distance::Wah {
                metric: WahMetric::new(lambda, self.space.m as f64, precision.clone())?,
                squared,
            })
        };
        match (self.experiment.distance, torus) {
            (DistanceKind::RhoTheorem, Some(p)) => Ok(Distance::TorusTheorem(*p)),
            (DistanceKind::RhoTheorem, None) => wah(false),
            (DistanceKind::RhoSquaredWah, None) => wah(true),
            (DistanceKind::RhoSquaredWah, Some(_)) => Err(Error::Config(
                "rho_squared_wah is a Euclidean distance".into(),
            )),
            (DistanceKind::RhoSimple, _) => Ok(Distance::Simple {
                m: self.space.m,
                n: self.space.n,
                ell: self.space.circumference(),
            }),
        }
    }
}

impl Prepared {
    /// Draws one copy from the Boltzmann–Gibbs measure where it is
    /// available: Gaussian positions for quadratic potentials, uniform
    /// positions for free streaming on the torus.
    fn stationary_copy(&self, rng: &mut ReplicaRng) -> Result<PhasePoint> {
        let beta = self.coupling.dynamics.beta;
        let dim = self.experiment.space.dim();
        let x = match (&self.potential, self.experiment.space.circumference()) {
            (Potential::Quadratic { precision }, None) => precision.sample_gaussian(beta, rng),
            (Potential::Zero { .. }, Some(ell)) => (0..dim)
                .map(|_| wrap_scalar(ell * uniform_open01(rng), ell))
                .collect(),
            _ => {
                return Err(Error::Config(
                    "stationary sampling needs a quadratic potential or free streaming on a torus"
                        .into(),
                ))
            }
        };
        Ok(PhasePoint::new(x, maxwell_velocities(dim, beta, rng)))
    }

    /// Reference copy for offset and identical starts: stationary where
    /// possible, otherwise uniform on the torus or the origin.
    fn reference_copy(&self, rng: &mut ReplicaRng) -> Result<PhasePoint> {
        if let Ok(p) = self.stationary_copy(rng) {
            return Ok(p);
        }
        let beta = self.coupling.dynamics.beta;
        let dim = self.experiment.space.dim();
        let x = match self.experiment.space.circumference() {
            Some(ell) => (0..dim)
                .map(|_| wrap_scalar(ell * uniform_open01(rng), ell))
                .collect(),
            None => vec![0.0; dim],
        };
        Ok(PhasePoint::new(x, maxwell_velocities(dim, beta, rng)))
    }

    /// Initial coupled state for one replica.
    pub fn initial_state(&self, rng: &mut ReplicaRng) -> Result<CoupledState> {
        let space = &self.experiment.space;
        let spec = &self.experiment.experiment;
        let dim = space.dim();
        let ell = space.circumference();
        let (first, second) = match spec.initial {
            InitialKind::Antipodal => {
                let Some(ell) = ell else {
                    return Err(Error::Config("the antipodal start needs a torus".into()));
                };
                let first = self.reference_copy(rng)?;
                let pair = TorusPair {
                    x: first.x,
                    v: first.v,
                    z: vec![0.5 * ell; dim],
                    w: vec![0.0; dim],
                };
                return Ok(CoupledState::Torus(pair));
            }
            InitialKind::Offset => {
                let offset = spec
                    .offset
                    .as_ref()
                    .ok_or_else(|| Error::Config("the offset start needs experiment.offset".into()))?
                    .expand(dim)?;
                let first = self.reference_copy(rng)?;
                if ell.is_some() {
                    let pair = TorusPair {
                        x: first.x,
                        v: first.v,
                        z: offset,
                        w: vec![0.0; dim],
                    };
                    return Ok(CoupledState::Torus(pair));
                }
                let x = first.x.iter().zip(&offset).map(|(a, o)| a - o).collect();
                let second = PhasePoint::new(x, first.v.clone());
                (first, second)
            }
            InitialKind::StationaryVsPoint => {
                let first = self.stationary_copy(rng)?;
                let point = spec
                    .point
                    .as_ref()
                    .unwrap_or(&VectorSpec::Scalar(0.0))
                    .expand(dim)?;
                (first, PhasePoint::new(point, vec![0.0; dim]))
            }
            InitialKind::Identical => {
                let first = self.reference_copy(rng)?;
                (first.clone(), first)
            }
        };
        Ok(match ell {
            Some(ell) => CoupledState::Torus(TorusPair::from_copies(&first, &second, ell)?),
            None => CoupledState::Euclidean { first, second },
        })
    }

    /// Distances on the record grid for replica `index`.
    pub fn run_replica(&self, index: u64) -> Result<Vec<f64>> {
        let mut rng = replica_rng(self.experiment.experiment.seed, index);
        let y0 = self.initial_state(&mut rng)?;
        let grid_len = self.coupling.dynamics.record.len();
        let mut out = vec![f64::NAN; grid_len];
        let mut observer = |k: usize, _t: f64, y: &CoupledState| {
            out[k] = self.distance.evaluate(y);
        };
        simulate_coupling_observed(
            &y0,
            &self.potential,
            &self.experiment.space,
            &self.coupling,
            &mut rng,
            &mut observer,
        )?;
        if let Some(k) = out.iter().position(|d| !d.is_finite()) {
            return Err(Error::InvalidState(format!(
                "distance is not finite at grid point {k}"
            )));
        }
        Ok(out)
    }

    /// All replicas in index order; failed replicas are counted and the run
    /// fails if more than 0.1% of them abort.
    pub fn run_replicas(&self) -> Result<Vec<Vec<f64>>> {
        let total = self.experiment.experiment.replicas;
        let results: Vec<Result<Vec<f64>>> = (0..total as u64)
            .into_par_iter()
            .map(|r| self.run_replica(r))
            .collect();
        let mut ok = Vec::with_capacity(total);
        let mut aborted = 0;
        let mut first = None;
        for r in results {
            match r {
                Ok(v) => ok.push(v),
                Err(e) => {
                    aborted += 1;
                    first.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if aborted * 1000 > total || ok.is_empty() {
            return Err(Error::TooManyAborts {
                aborted,
                total,
                first: first.unwrap_or_default(),
            });
        }
        Ok(ok)
    }
}

fn maxwell_velocities<R: Rng + ?Sized>(dim: usize, beta: f64, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    standard_normal_fill(rng, &mut v);
    let sd = beta.sqrt().recip();
    v.iter_mut().for_each(|c| *c *= sd);
    v
}

/// Monte Carlo estimate of `E[distance(Y_t)]` on the record grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean; zero when fewer than two replicas.
    pub stderr: Vec<f64>,
    /// Replicas that completed.
    pub count: usize,
    pub aborted: usize,
    pub meta: serde_json::Value,
}

/// Column means and standard errors of equally long rows.
pub fn mean_and_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(width) = rows.first().map(Vec::len) else {
        return (Vec::new(), Vec::new());
    };
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for row in rows {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let stderr = if rows.len() < 2 {
        vec![0.0; width]
    } else {
        var.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    };
    (mean, stderr)
}

/// Runs `experiment` and averages the chosen distance over replicas.
pub fn estimate_rho_curve(experiment: &Experiment) -> Result<EstimateSeries> {
    let prepared = experiment.prepare()?;
    let rows = prepared.run_replicas()?;
    let (mean, stderr) = mean_and_stderr(&rows);
    Ok(EstimateSeries {
        times: prepared.coupling.dynamics.record.times().to_vec(),
        mean,
        stderr,
        count: rows.len(),
        aborted: experiment.experiment.replicas - rows.len(),
        meta: meta_for(&prepared),
    })
}

fn meta_for(prepared: &Prepared) -> serde_json::Value {
    serde_json::json!({
        "config": prepared.experiment,
        "seed": prepared.experiment.experiment.seed,
        "lambda": prepared.coupling.dynamics.lambda,
        "gamma": prepared.coupling.effective_gamma(),
        "torus_params": prepared.torus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `−log(mean)` against `t` over grid points in
/// `[t0, t1]`.
pub fn fit_decay_rate(series: &EstimateSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    let mut pts = Vec::new();
    for (&t, &m) in series.times.iter().zip(&series.mean) {
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            continue;
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::FitDomain(format!("mean {m} at t = {t} is not positive")));
        }
        pts.push((t, -m.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::FitDomain(format!(
            "window [{t0}, {t1}] holds {} grid points; need at least 2",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let rate = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        rate,
        r_squared,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    LambdaPerM,
    M,
    Gamma,
    Beta,
}

/// What each sweep point reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum SweepTarget {
    /// Fitted decay rate over the experiment's fit window.
    Rate,
    /// `E[distance]` at the given time, which must be on the record grid.
    MeanAt { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub estimate: f64,
    /// Standard error for `MeanAt`; the fit's r² is reported for `Rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    pub count: usize,
}

/// A copy of `base` with `axis` set to `value`.
pub fn with_axis(base: &Experiment, axis: SweepAxis, value: f64) -> Result<Experiment> {
    let mut e = base.clone();
    match axis {
        SweepAxis::Lambda => {
            e.dynamics.lambda = Some(value);
            e.dynamics.lambda_per_m = None;
        }
        SweepAxis::LambdaPerM => {
            e.dynamics.lambda = None;
            e.dynamics.lambda_per_m = Some(value);
        }
        SweepAxis::M => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config(format!("m must be a positive integer, got {value}")));
            }
            e.space.m = value as usize;
        }
        SweepAxis::Gamma => {
            e.coupling.gamma = GammaSpec::Fixed(value);
        }
        SweepAxis::Beta => e.dynamics.beta = value,
    }
    Ok(e)
}

/// One estimate per value of `axis`, every point sharing the base seed.
pub fn sweep(
    base: &Experiment,
    axis: SweepAxis,
    values: &[f64],
    target: SweepTarget,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let e = with_axis(base, axis, value)?;
            let series = estimate_rho_curve(&e)?;
            match target {
                SweepTarget::Rate => {
                    let fit = fit_decay_rate(&series, e.fit_window())?;
                    Ok(SweepRow {
                        value,
                        estimate: fit.rate,
                        stderr: None,
                        r_squared: Some(fit.r_squared),
                        count: series.count,
                    })
                }
                SweepTarget::MeanAt { time } => {
                    let k = grid_index(&series.times, time)?;
                    Ok(SweepRow {
                        value,
                        estimate: series.mean[k],
                        stderr: Some(series.stderr[k]),
                        r_squared: None,
                        count: series.count,
                    })
                }
            }
        })
        .collect()
}

fn grid_index(times: &[f64], time: f64) -> Result<usize> {
    times
        .iter()
        .position(|t| (t - time).abs() <= 1e-9 * time.abs().max(1.0))
        .ok_or_else(|| Error::Config(format!("time {time} is not on the record grid")))
}

/// `e^{ct}·E[distance(Y_t)]` on the grid, and a paired test of each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub rate: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean per-replica increment between consecutive grid points.
    pub increments: Vec<f64>,
    pub increment_stderr: Vec<f64>,
    /// Increments exceeding two standard errors.
    pub violations: Vec<usize>,
    pub count: usize,
}

impl SupermartingaleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `t ↦ e^{ct}·E[distance(Y_t)]` is nonincreasing up to noise.
///
/// Each replica contributes the increments `e^{c t_{k+1}} d_{k+1} − e^{c t_k} d_k`;
/// step `k` passes when their mean is at most twice its standard error.
pub fn supermartingale_check(experiment: &Experiment, rate: f64) -> Result<SupermartingaleReport> {
    let prepared = experiment.prepare()?;
    let times = prepared.coupling.dynamics.record.times().to_vec();
    supermartingale_from_rows(&prepared.run_replicas()?, &times, rate)
}

/// [`supermartingale_check`] on precomputed per-replica distances.
pub fn supermartingale_from_rows(
    rows: &[Vec<f64>],
    times: &[f64],
    rate: f64,
) -> Result<SupermartingaleReport> {
    let weights: Vec<f64> = times.iter().map(|t| (rate * t).exp()).collect();
    let scaled: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&weights).map(|(d, w)| d * w).collect())
        .collect();
    let (values, stderr) = mean_and_stderr(&scaled);
    let steps: Vec<Vec<f64>> = scaled
        .iter()
        .map(|r| r.windows(2).map(|p| p[1] - p[0]).collect())
        .collect();
    let (increments, increment_stderr) = mean_and_stderr(&steps);
    let violations = increments
        .iter()
        .zip(&increment_stderr)
        .enumerate()
        .filter(|(_, (d, se))| **d > 2.0 * **se)
        .map(|(k, _)| k)
        .collect();
    Ok(SupermartingaleReport {
        rate,
        times: times.to_vec(),
        values,
        stderr,
        increments,
        increment_stderr,
        violations,
        count: rows.len(),
    })
}
