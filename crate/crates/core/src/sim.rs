//! Monte Carlo ensembles of perturbed reference trajectories and
//! containment checks against a tube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{
    integrate_pattern, reference_prefix, reference_solution, Disturbance, IntegratorConfig, Trace,
};
use crate::pattern::{Pattern, TimingConfig};
use crate::state::{self, StateVec};
use crate::system::SystemSpec;
use crate::tube::Tube;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    /// Uniform on the ball of radius `omega`.
    RandomBounded { omega: f64, seed: u64 },
    /// `omega (y - c) / |y - c|` with `c` the unperturbed Euler path.
    WorstCaseRadial { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub kind: PerturbationKind,
    /// Number of sub-steps each drawn `w` is held for.
    #[serde(default = "one")]
    pub hold_steps: usize,
}

fn one() -> usize {
    1
}

impl PerturbationPlan {
    pub fn none() -> Self {
        PerturbationPlan {
            kind: PerturbationKind::None,
            hold_steps: 1,
        }
    }

    pub fn random(omega: f64, seed: u64) -> Self {
        PerturbationPlan {
            kind: PerturbationKind::RandomBounded { omega, seed },
            hold_steps: 1,
        }
    }

    pub fn radial(omega: f64) -> Self {
        PerturbationPlan {
            kind: PerturbationKind::WorstCaseRadial { omega },
            hold_steps: 1,
        }
    }

    pub fn omega(&self) -> f64 {
        match self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::RandomBounded { omega, .. } | PerturbationKind::WorstCaseRadial { omega } => omega,
        }
    }

    fn validate(&self) -> Result<()> {
        let omega = self.omega();
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("omega must be >= 0, got {omega}")));
        }
        if self.hold_steps == 0 {
            return Err(Error::InvalidArgument("hold_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Uniform sample of the closed ball of radius `radius` in dimension `d`;
/// the result never has norm above `radius`.
pub fn sample_ball(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; d];
    }
    let mut v: Vec<f64> = loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if state::norm(&v) > 0.0 {
            break v;
        }
    };
    let u: f64 = rng.random();
    let scale = radius * u.powf(1.0 / d as f64) / state::norm(&v);
    v.iter_mut().for_each(|x| *x *= scale);
    let n = state::norm(&v);
    if n > radius {
        let s = radius / n * (1.0 - f64::EPSILON);
        v.iter_mut().for_each(|x| *x *= s);
    }
    v
}

fn trace_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Held<F: FnMut(usize, &[f64]) -> Vec<f64>> {
    hold: usize,
    draw: F,
    current: Vec<f64>,
}

impl<F: FnMut(usize, &[f64]) -> Vec<f64>> Disturbance for Held<F> {
    fn sample(&mut self, step: usize, y: &[f64]) -> Vec<f64> {
        if step.is_multiple_of(self.hold) || self.current.is_empty() {
            self.current = (self.draw)(step, y);
        }
        self.current.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Seed of the initial-state draws.
    pub master_seed: u64,
    pub rk4_refinement: usize,
    /// Keep traces that leave the enclosure, truncated at the last sample
    /// inside, instead of failing the whole ensemble.
    #[serde(default)]
    pub keep_escaped: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            master_seed: 0x5eed,
            rk4_refinement: IntegratorConfig::DEFAULT_REFINEMENT,
            keep_escaped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    /// ChaCha stream shared by this member's initial-state and `w` draws.
    pub stream: u64,
    pub start: StateVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub plan: PerturbationPlan,
    pub config: EnsembleConfig,
    pub members: Vec<EnsembleMember>,
    pub traces: Vec<Trace>,
    /// Per trace, the first state outside the enclosure; always `None`
    /// unless `keep_escaped` is set.
    pub escapes: Vec<Option<Escape>>,
}

/// First state of a trace outside the enclosure, one step after its last
/// recorded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub sample: usize,
    pub time: f64,
    pub state: StateVec,
}

/// Integrates `n_traces` perturbed reference trajectories of the repeated
/// pattern from independent uniform starts in `B(z0, mu0)`.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    system: &SystemSpec,
    pattern: &Pattern,
    z0: &[f64],
    mu0: f64,
    plan: &PerturbationPlan,
    n_traces: usize,
    n_periods: usize,
    timing: &TimingConfig,
    config: &EnsembleConfig,
) -> Result<Ensemble> {
    if n_traces == 0 {
        return Err(Error::InvalidArgument("n_traces must be >= 1".into()));
    }
    if !(mu0 >= 0.0) || !mu0.is_finite() {
        return Err(Error::InvalidArgument(format!("mu0 must be >= 0, got {mu0}")));
    }
    plan.validate()?;
    if z0.len() != system.dim {
        return Err(Error::DimensionMismatch {
            expected: system.dim,
            got: z0.len(),
        });
    }
    let pattern = pattern.repeat();
    let centers = match plan.kind {
        PerturbationKind::WorstCaseRadial { .. } => {
            Some(integrate_pattern(system, &pattern, z0, timing, n_periods, None)?)
        }
        _ => None,
    };
    let members: Vec<EnsembleMember> = (0..n_traces as u64)
        .map(|stream| {
            let mut rng = trace_rng(config.master_seed, stream);
            let offset = sample_ball(&mut rng, system.dim, mu0);
            let start = z0.iter().zip(&offset).map(|(a, b)| a + b).collect();
            Ok(EnsembleMember {
                stream,
                start: StateVec::new(start)?,
            })
        })
        .collect::<Result<_>>()?;

    let d = system.perturbation_dim;
    let runs = members
        .par_iter()
        .map(|m| {
            let run = |dist: Option<&mut dyn Disturbance>| -> Result<(Trace, Option<Escape>)> {
                if !config.keep_escaped {
                    let trace = reference_solution(
                        system,
                        &pattern,
                        &m.start,
                        timing,
                        n_periods,
                        dist,
                        config.rk4_refinement,
                    )?;
                    return Ok((trace, None));
                }
                let (trace, stop) = reference_prefix(
                    system,
                    &pattern,
                    &m.start,
                    timing,
                    n_periods,
                    dist,
                    config.rk4_refinement,
                )?;
                let escape = match stop {
                    None => None,
                    Some(Error::LeftEnclosure { time, state }) => Some(Escape {
                        sample: trace.len(),
                        time,
                        state: state::unchecked(state),
                    }),
                    Some(e) => return Err(e),
                };
                Ok((trace, escape))
            };
            match plan.kind {
                PerturbationKind::None => run(None),
                PerturbationKind::RandomBounded { omega, seed } => {
                    let mut rng = trace_rng(seed, m.stream);
                    let mut dist = Held {
                        hold: plan.hold_steps,
                        draw: |_: usize, _: &[f64]| sample_ball(&mut rng, d, omega),
                        current: Vec::new(),
                    };
                    run(Some(&mut dist))
                }
                PerturbationKind::WorstCaseRadial { omega } => {
                    let centers = centers.as_ref().expect("computed above");
                    let mut dist = Held {
                        hold: plan.hold_steps,
                        draw: |step: usize, y: &[f64]| {
                            let c = &centers.states[step];
                            let mut w: Vec<f64> = y.iter().zip(c.iter()).map(|(a, b)| a - b).collect();
                            w.resize(d, 0.0);
                            let n = state::norm(&w);
                            if n > 0.0 {
                                w.iter_mut().for_each(|x| *x *= omega / n);
                            }
                            if state::norm(&w) > omega {
                                w.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
                            }
                            w
                        },
                        current: Vec::new(),
                    };
                    run(Some(&mut dist))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (traces, escapes) = runs.into_iter().unzip();
    Ok(Ensemble {
        plan: *plan,
        config: *config,
        members,
        traces,
        escapes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trace: usize,
    pub sample: usize,
    pub time: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    /// Per trace: `max_t |y(t) - c(t)| - r(t)`.
    pub margins: Vec<f64>,
    pub violations: Vec<Violation>,
    pub worst_margin: f64,
}

impl ContainmentReport {
    pub fn contained(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares every sample of every trace with the tube ball at the same
/// time. A point on the sphere counts as contained.
pub fn check_containment(traces: &[Trace], tube: &Tube) -> Result<ContainmentReport> {
    let mut margins = Vec::with_capacity(traces.len());
    let mut violations = Vec::new();
    for (ti, trace) in traces.iter().enumerate() {
        if trace.len() > tube.len() {
            return Err(Error::LatticeMismatch(format!(
                "trace {ti} has {} samples, tube only {}",
                trace.len(),
                tube.len()
            )));
        }
        let mut worst = f64::NEG_INFINITY;
        for (j, (t, y)) in trace.times.iter().zip(&trace.states).enumerate() {
            let tt = tube.time(j);
            if (t - tt).abs() > 1e-9 * tt.abs().max(tube.dt) {
                return Err(Error::LatticeMismatch(format!(
                    "trace {ti} sample {j} at t = {t}, tube at {tt}"
                )));
            }
            let ball = &tube.balls[j];
            if y.dim() != ball.dim() {
                return Err(Error::DimensionMismatch {
                    expected: ball.dim(),
                    got: y.dim(),
                });
            }
            let margin = y.distance(&ball.center) - ball.radius;
            if margin > 0.0 {
                violations.push(Violation {
                    trace: ti,
                    sample: j,
                    time: *t,
                    margin,
                });
            }
            worst = worst.max(margin);
        }
        margins.push(worst);
    }
    let worst_margin = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ContainmentReport {
        margins,
        violations,
        worst_margin,
    })
}

/// `g_j = |Y((j+1) T) - Y(j T)|` for every complete pair of periods.
pub fn period_gap(trace: &Trace, steps_per_period: usize) -> Result<Vec<f64>> {
    if steps_per_period == 0 {
        return Err(Error::InvalidArgument("steps_per_period must be >= 1".into()));
    }
    let needed = 2 * steps_per_period + 1;
    if trace.len() < needed {
        return Err(Error::TooShort {
            samples: trace.len(),
            needed,
        });
    }
    let boundaries: Vec<&StateVec> = trace.states.iter().step_by(steps_per_period).collect();
    Ok(boundaries.windows(2).map(|w| w[1].distance(w[0])).collect())
}
