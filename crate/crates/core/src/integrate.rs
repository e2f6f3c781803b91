//! Explicit Euler integration of mode patterns with sub-sampling, plus a
//! fixed-step RK4 reference integrator used as a ground-truth proxy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{ModeId, Pattern, TimingConfig};
use crate::state::{self, StateVec};
use crate::system::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Euler,
    ReferenceRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub method: Method,
    /// RK4 internal step is `dt / rk4_refinement`.
    pub rk4_refinement: usize,
}

impl IntegratorConfig {
    pub const DEFAULT_REFINEMENT: usize = 10;

    pub fn euler(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            method: Method::Euler,
            rk4_refinement: 1,
        }
    }

    pub fn reference(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            method: Method::ReferenceRk4,
            rk4_refinement: Self::DEFAULT_REFINEMENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.rk4_refinement == 0 {
            return Err(Error::InvalidArgument("rk4_refinement must be >= 1".into()));
        }
        Ok(())
    }
}

/// Source of the perturbation `w`, queried once per sub-step and held
/// constant on `[j dt, (j+1) dt)`.
pub trait Disturbance {
    fn sample(&mut self, step: usize, y: &[f64]) -> Vec<f64>;
}

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    /// Mode active on `[times[j], times[j+1])`.
    pub mode_ids: Vec<ModeId>,
    /// Perturbation applied on `[times[j], times[j+1])`; empty when unperturbed.
    pub perturbations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &StateVec {
        self.states.last().expect("trace is never empty")
    }
}

/// One explicit Euler step `y + h f_u(y, w)`.
pub fn euler_step(
    system: &SystemSpec,
    mode: ModeId,
    y: &[f64],
    h: f64,
    w: Option<&[f64]>,
) -> Result<StateVec> {
    let mut out = vec![0.0; y.len()];
    euler_step_into(system, mode, y, h, w, &mut out)?;
    Ok(state::unchecked(out))
}

pub(crate) fn euler_step_into(
    system: &SystemSpec,
    mode: ModeId,
    y: &[f64],
    h: f64,
    w: Option<&[f64]>,
    out: &mut [f64],
) -> Result<()> {
    system.field_into(mode, y, w, out)?;
    for (o, yi) in out.iter_mut().zip(y) {
        *o = yi + h * *o;
    }
    Ok(())
}

/// Classical RK4 over `[0, h]` using `refinement` equal sub-steps and a
/// frozen perturbation.
pub fn rk4_step(
    system: &SystemSpec,
    mode: ModeId,
    y: &[f64],
    h: f64,
    refinement: usize,
    w: Option<&[f64]>,
) -> Result<StateVec> {
    let n = y.len();
    let hh = h / refinement as f64;
    let mut cur = y.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..refinement {
        system.field_into(mode, &cur, w, &mut k1)?;
        for i in 0..n {
            tmp[i] = cur[i] + 0.5 * hh * k1[i];
        }
        system.field_into(mode, &tmp, w, &mut k2)?;
        for i in 0..n {
            tmp[i] = cur[i] + 0.5 * hh * k2[i];
        }
        system.field_into(mode, &tmp, w, &mut k3)?;
        for i in 0..n {
            tmp[i] = cur[i] + hh * k3[i];
        }
        system.field_into(mode, &tmp, w, &mut k4)?;
        for i in 0..n {
            cur[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(state::unchecked(cur))
}

fn check_pattern(system: &SystemSpec, pattern: &Pattern, timing: &TimingConfig) -> Result<()> {
    if pattern.len() != timing.k {
        return Err(Error::InvalidArgument(format!(
            "pattern length {} does not match timing k = {}",
            pattern.len(),
            timing.k
        )));
    }
    if (pattern.tau - timing.tau).abs() > 1e-12 * timing.tau {
        return Err(Error::InvalidArgument(format!(
            "pattern tau {} does not match timing tau {}",
            pattern.tau, timing.tau
        )));
    }
    for m in &pattern.modes {
        system.mode_value(*m)?;
    }
    Ok(())
}

fn run(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    perturbation: Option<&mut dyn Disturbance>,
    step: impl Fn(ModeId, &[f64], Option<&[f64]>) -> Result<StateVec>,
) -> Result<Trace> {
    match run_partial(system, pattern, y0, timing, n_periods, perturbation, step)? {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run`], but a step leaving the enclosure ends the trace instead of
/// discarding it; the error is returned alongside the prefix.
fn run_partial(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    mut perturbation: Option<&mut dyn Disturbance>,
    step: impl Fn(ModeId, &[f64], Option<&[f64]>) -> Result<StateVec>,
) -> Result<(Trace, Option<Error>)> {
    check_pattern(system, pattern, timing)?;
    if n_periods == 0 {
        return Err(Error::InvalidArgument("n_periods must be >= 1".into()));
    }
    if !pattern.repeated && n_periods > 1 {
        return Err(Error::InvalidArgument(
            "a pattern applied once covers a single period".into(),
        ));
    }
    if y0.len() != system.dim {
        return Err(Error::DimensionMismatch {
            expected: system.dim,
            got: y0.len(),
        });
    }
    let y0 = StateVec::new(y0.to_vec())?;
    if !system.enclosure.contains(&y0) {
        return Err(Error::LeftEnclosure {
            time: 0.0,
            state: y0.into_inner(),
        });
    }
    let total = n_periods * timing.steps_per_period;
    let mut trace = Trace {
        times: Vec::with_capacity(total + 1),
        states: Vec::with_capacity(total + 1),
        mode_ids: Vec::with_capacity(total),
        perturbations: Vec::new(),
    };
    trace.times.push(0.0);
    trace.states.push(y0);
    for j in 0..total {
        let mode = pattern.modes[timing.slot(j)];
        let y = trace.states.last().expect("non-empty");
        let w = perturbation.as_mut().map(|d| d.sample(j, y));
        let next = step(mode, y, w.as_deref())?;
        let t = timing.time(j + 1);
        if !system.enclosure.contains(&next) {
            let escape = Error::LeftEnclosure {
                time: t,
                state: next.into_inner(),
            };
            return Ok((trace, Some(escape)));
        }
        trace.times.push(t);
        trace.states.push(next);
        trace.mode_ids.push(mode);
        if let Some(w) = w {
            trace.perturbations.push(w);
        }
    }
    Ok((trace, None))
}

/// Euler trajectory of `pattern` (or its repetition) sampled every `dt`.
pub fn integrate_pattern(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    perturbation: Option<&mut dyn Disturbance>,
) -> Result<Trace> {
    let h = timing.dt;
    run(system, pattern, y0, timing, n_periods, perturbation, |m, y, w| {
        euler_step(system, m, y, h, w)
    })
}

/// RK4 trajectory at step `dt / refinement`, sampled on the same lattice as
/// [`integrate_pattern`].
pub fn reference_solution(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    perturbation: Option<&mut dyn Disturbance>,
    refinement: usize,
) -> Result<Trace> {
    if refinement == 0 {
        return Err(Error::InvalidArgument("rk4 refinement must be >= 1".into()));
    }
    let h = timing.dt;
    run(system, pattern, y0, timing, n_periods, perturbation, |m, y, w| {
        rk4_step(system, m, y, h, refinement, w)
    })
}

/// [`reference_solution`] that keeps the samples computed before the
/// trajectory left the enclosure, together with the `LeftEnclosure` error.
pub fn reference_prefix(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    perturbation: Option<&mut dyn Disturbance>,
    refinement: usize,
) -> Result<(Trace, Option<Error>)> {
    if refinement == 0 {
        return Err(Error::InvalidArgument("rk4 refinement must be >= 1".into()));
    }
    let h = timing.dt;
    run_partial(system, pattern, y0, timing, n_periods, perturbation, |m, y, w| {
        rk4_step(system, m, y, h, refinement, w)
    })
}

/// Dispatches on an [`IntegratorConfig`]; `config.dt` must equal `timing.dt`.
pub fn integrate_with(
    system: &SystemSpec,
    config: &IntegratorConfig,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    n_periods: usize,
    perturbation: Option<&mut dyn Disturbance>,
) -> Result<Trace> {
    config.validate()?;
    if (config.dt - timing.dt).abs() > 1e-12 * timing.dt {
        return Err(Error::InvalidArgument(
            "integrator dt differs from the timing lattice".into(),
        ));
    }
    match config.method {
        Method::Euler => integrate_pattern(system, pattern, y0, timing, n_periods, perturbation),
        Method::ReferenceRk4 => reference_solution(
            system,
            pattern,
            y0,
            timing,
            n_periods,
            perturbation,
            config.rk4_refinement,
        ),
    }
}
