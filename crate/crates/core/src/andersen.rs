//! Single-copy Andersen dynamics.
//!
//! A homogeneous Poisson clock of intensity `λ` fires at times `T_k`. At each
//! firing a uniformly chosen particle `I_k` gets a fresh velocity
//! `ξ_k ~ 𝒩(0, β⁻¹)ⁿ`; between firings the state follows the Hamiltonian
//! flow. The loop below is event driven: no time grid is involved in the jump
//! mechanism, and recorded samples are the right-continuous values at the
//! requested times.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Propagator};
use crate::geometry::SpaceSpec;
use crate::potentials::Potential;
use crate::rng::{exponential, standard_normal_fill, uniform_index, uniform_open01};
use crate::state::PhasePoint;

/// One firing of the collision clock.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    /// Zero-based particle index.
    pub index: usize,
    /// Fresh velocity for the selected particle.
    pub xi: Vec<f64>,
    /// Auxiliary uniform on `(0, 1)`, only consumed by couplings.
    pub u: f64,
}

/// Generator of [`JumpEvent`]s on `[0, t_end]`.
///
/// Draw order per event is fixed: gap, index, the `n` velocity components,
/// then `u`. The word count per event is therefore `3 + 2⌈n/2⌉`.
#[derive(Debug)]
pub struct JumpClock<'r, R: ?Sized> {
    rng: &'r mut R,
    lambda: f64,
    t_end: f64,
    m: usize,
    sd: f64,
    time: f64,
    done: bool,
}

impl<'r, R: Rng + ?Sized> JumpClock<'r, R> {
    pub fn new(rng: &'r mut R, lambda: f64, beta: f64, t_end: f64, m: usize) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("beta", beta)?;
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be non-negative, got {t_end}")));
        }
        if m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        Ok(JumpClock {
            rng,
            lambda,
            t_end,
            m,
            sd: beta.sqrt().recip(),
            time: 0.0,
            done: false,
        })
    }

    /// Writes the next event into `event` (whose `xi` must already have
    /// length `n`); returns false once the horizon is passed.
    pub fn next_into(&mut self, event: &mut JumpEvent) -> bool {
        if self.done {
            return false;
        }
        let gap = exponential(self.rng, self.lambda);
        let time = self.time + gap;
        if time > self.t_end || gap == 0.0 {
            // A zero gap would break strict monotonicity; it has probability
            // 2⁻⁵³-ish per draw and ends the run like passing the horizon.
            self.done = true;
            return false;
        }
        self.time = time;
        event.time = time;
        event.index = uniform_index(self.rng, self.m);
        standard_normal_fill(self.rng, &mut event.xi);
        for c in event.xi.iter_mut() {
            *c *= self.sd;
        }
        event.u = uniform_open01(self.rng);
        true
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {value}")))
    }
}

/// All jump events in `[0, t_end]`.
pub fn sample_jump_skeleton<R: Rng + ?Sized>(
    lambda: f64,
    t_end: f64,
    m: usize,
    n: usize,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<JumpEvent>> {
    let mut clock = JumpClock::new(rng, lambda, beta, t_end, m)?;
    let mut events = Vec::new();
    let mut event = JumpEvent::blank(n);
    while clock.next_into(&mut event) {
        events.push(event.clone());
    }
    Ok(events)
}

impl JumpEvent {
    pub fn blank(n: usize) -> Self {
        JumpEvent {
            time: 0.0,
            index: 0,
            xi: vec![0.0; n],
            u: 0.5,
        }
    }
}

/// `S(i, a)`: replaces the velocity block of particle `i` by `a`.
pub fn velocity_substitution(
    state: &PhasePoint,
    space: &SpaceSpec,
    i: usize,
    a: &[f64],
) -> Result<PhasePoint> {
    let mut out = state.clone();
    substitute_in_place(&mut out.v, space, i, a)?;
    Ok(out)
}

pub(crate) fn substitute_in_place(
    v: &mut [f64],
    space: &SpaceSpec,
    i: usize,
    a: &[f64],
) -> Result<()> {
    if i >= space.m {
        return Err(Error::IndexOutOfRange { index: i, m: space.m });
    }
    if a.len() != space.n {
        return Err(Error::DimensionMismatch {
            expected: space.n,
            found: a.len(),
        });
    }
    v[space.block(i)].copy_from_slice(a);
    Ok(())
}

/// Sorted sample times in `[0, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordGrid(Vec<f64>);

impl RecordGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("record times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("record times must be sorted".into()));
        }
        Ok(RecordGrid(times))
    }

    /// `0, step, 2·step, …` up to and including `t_end` (within rounding).
    pub fn uniform(t_end: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("record step must be positive, got {step}")));
        }
        let count = (t_end / step + 1e-9).floor() as usize;
        RecordGrid::new((0..=count).map(|k| (k as f64 * step).min(t_end)).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndersenConfig {
    /// Collision frequency `λ`.
    pub lambda: f64,
    /// Inverse temperature `β`.
    pub beta: f64,
    pub t_end: f64,
    pub flow: FlowConfig,
    pub record: RecordGrid,
}

impl AndersenConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("lambda", self.lambda)?;
        check_positive("beta", self.beta)?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if let Some(last) = self.record.last() {
            if last > self.t_end {
                return Err(Error::Config(format!(
                    "record time {last} lies beyond t_end = {}",
                    self.t_end
                )));
            }
        }
        Ok(())
    }
}

/// Receives samples on the record grid and, optionally, every jump.
pub trait Observer<S> {
    fn sample(&mut self, index: usize, time: f64, state: &S);

    /// Called after each jump with the left limit and the new state, but only
    /// when [`Observer::wants_jumps`] returns true.
    fn jump(&mut self, _event: &JumpEvent, _before: &S, _after: &S) {}

    fn wants_jumps(&self) -> bool {
        false
    }
}

impl<S, F: FnMut(usize, f64, &S)> Observer<S> for F {
    fn sample(&mut self, index: usize, time: f64, state: &S) {
        self(index, time, state)
    }
}

/// Samples of one run on its record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S: Clone> Observer<S> for Trajectory<S> {
    fn sample(&mut self, _index: usize, time: f64, state: &S) {
        self.times.push(time);
        self.states.push(state.clone());
    }
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
        }
    }
}

/// Shared event loop: interleaves grid samples with jumps.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_event_loop<S, R, O>(
    state: &mut S,
    config: &AndersenConfig,
    m: usize,
    n: usize,
    rng: &mut R,
    observer: &mut O,
    mut advance: impl FnMut(&mut S, f64) -> Result<()>,
    mut jump: impl FnMut(&mut S, &JumpEvent) -> Result<()>,
) -> Result<()>
where
    S: Clone,
    R: Rng + ?Sized,
    O: Observer<S> + ?Sized,
{
    config.validate()?;
    let grid = config.record.times();
    let mut clock = JumpClock::new(rng, config.lambda, config.beta, config.t_end, m)?;
    let mut event = JumpEvent::blank(n);
    let mut t = 0.0;
    let mut next = 0;
    loop {
        let fired = clock.next_into(&mut event);
        let horizon = if fired { event.time } else { config.t_end };
        // A grid time equal to a jump time records the post-jump state.
        while next < grid.len() && (grid[next] < horizon || (!fired && grid[next] <= horizon)) {
            advance(state, grid[next] - t)?;
            t = grid[next];
            observer.sample(next, t, state);
            next += 1;
        }
        if !fired {
            return Ok(());
        }
        advance(state, event.time - t)?;
        t = event.time;
        if observer.wants_jumps() {
            let before = state.clone();
            jump(state, &event)?;
            observer.jump(&event, &before, state);
        } else {
            jump(state, &event)?;
        }
    }
}

/// Runs Andersen dynamics from `initial`, reporting to `observer`.
pub fn simulate_andersen_observed<R, O>(
    initial: &PhasePoint,
    potential: &Potential,
    space: &SpaceSpec,
    config: &AndersenConfig,
    rng: &mut R,
    observer: &mut O,
) -> Result<PhasePoint>
where
    R: Rng + ?Sized,
    O: Observer<PhasePoint> + ?Sized,
{
    let mut state = initial.clone();
    state.normalize(space)?;
    let mut propagator = Propagator::new(space, potential, config.flow)?;
    run_event_loop(
        &mut state,
        config,
        space.m,
        space.n,
        rng,
        observer,
        |s, dt| propagator.advance(s, dt),
        |s, e| substitute_in_place(&mut s.v, space, e.index, &e.xi),
    )?;
    Ok(state)
}

/// Runs Andersen dynamics and collects the states on the record grid.
pub fn simulate_andersen<R: Rng + ?Sized>(
    initial: &PhasePoint,
    potential: &Potential,
    space: &SpaceSpec,
    config: &AndersenConfig,
    rng: &mut R,
) -> Result<Trajectory<PhasePoint>> {
    let mut trajectory = Trajectory::default();
    simulate_andersen_observed(initial, potential, space, config, rng, &mut trajectory)?;
    Ok(trajectory)
}
