//! Backward dynamic programming over a grid (the procedure `PROC_k^eps`).
//!
//! Stage `j` of the sweep holds, for every node `z`, the best value of the
//! remaining `j` sampling periods. A transition from `z` under mode `u`
//! runs the sub-sampled Euler scheme for one period `tau`, accumulates the
//! running cost along that unprojected path and hands the endpoint over to
//! the value of its nearest node. Values combine as a right fold
//! `s_1 + (s_2 + (... + (s_k + V_0)))`; averaged costs are divided by `T`
//! once at the end.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrate::{euler_step_into, integrate_pattern};
use crate::pattern::{ModeId, Pattern, TimingConfig};
use crate::state::{self, StateVec};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CostKind {
    /// `|Y(k tau) - target|`.
    TerminalDistance { target: StateVec },
    /// `(1/T) int_0^T g(Y(t)) dt` for a registered integrand `g`.
    AverageRunning { integrand: String, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub kind: CostKind,
    pub sense: Sense,
}

impl CostSpec {
    pub fn terminal(target: StateVec) -> Self {
        CostSpec {
            kind: CostKind::TerminalDistance { target },
            sense: Sense::Minimize,
        }
    }

    pub fn average(integrand: &str, horizon: f64, sense: Sense) -> Self {
        CostSpec {
            kind: CostKind::AverageRunning {
                integrand: integrand.into(),
                horizon,
            },
            sense,
        }
    }

    /// Worst possible value for this sense.
    pub fn worst(&self) -> f64 {
        match self.sense {
            Sense::Minimize => f64::INFINITY,
            Sense::Maximize => f64::NEG_INFINITY,
        }
    }

    /// Strict preference of `a` over `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.sense {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }

    pub fn validate(&self, system: &SystemSpec, timing: &TimingConfig) -> Result<()> {
        match &self.kind {
            CostKind::TerminalDistance { target } => {
                if target.dim() != system.dim {
                    return Err(Error::DimensionMismatch {
                        expected: system.dim,
                        got: target.dim(),
                    });
                }
                if !system.domain.contains(target) {
                    return Err(Error::DomainError {
                        state: target.to_vec(),
                    });
                }
            }
            CostKind::AverageRunning { integrand, horizon } => {
                system.integrand(integrand)?;
                let period = timing.period();
                if (horizon - period).abs() > 1e-9 * period {
                    return Err(Error::InvalidArgument(format!(
                        "cost horizon {horizon} differs from k * tau = {period}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Treatment of Euler paths that leave the domain `S` during a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    /// The transition is infeasible and scores the worst value.
    #[default]
    Reject,
    /// The handoff state is clamped onto `S`; sub-steps may wander inside
    /// the enclosure.
    Clamp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub domain_policy: DomainPolicy,
    /// Restrict the search to these modes; all modes when `None`.
    pub mode_subset: Option<Vec<ModeId>>,
    /// Precompute transitions when `nodes * modes` is at most this.
    pub transition_cache_limit: Option<usize>,
}

const DEFAULT_CACHE_LIMIT: usize = 8_000_000;
const NO_MODE: u16 = u16::MAX;

type IntegrandFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Result of one transition: successor node and stage cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub successor: usize,
    pub stage_cost: f64,
}

/// Immutable context shared by every transition evaluation.
struct Stepper<'a> {
    system: &'a SystemSpec,
    grid: &'a Grid,
    timing: &'a TimingConfig,
    integrand: Option<&'a IntegrandFn>,
    policy: DomainPolicy,
}

impl Stepper<'_> {
    fn run(&self, node: usize, mode: ModeId) -> Option<Transition> {
        let n = self.system.dim;
        let mut y = vec![0.0; n];
        let mut next = vec![0.0; n];
        self.grid.node_into(node, &mut y);
        let h = self.timing.dt;
        let mut stage = 0.0;
        for _ in 0..self.timing.substeps() {
            if let Some(g) = self.integrand {
                stage += g(&y) * h;
            }
            euler_step_into(self.system, mode, &y, h, None, &mut next).ok()?;
            let inside = match self.policy {
                DomainPolicy::Reject => self.system.domain.contains(&next),
                DomainPolicy::Clamp => self.system.enclosure.contains(&next),
            };
            if !inside {
                return None;
            }
            std::mem::swap(&mut y, &mut next);
        }
        if self.policy == DomainPolicy::Clamp {
            self.system.domain.clamp(&mut y);
        }
        Some(Transition {
            successor: self.grid.nearest_index_unchecked(&y),
            stage_cost: stage,
        })
    }
}

/// One DP transition from grid node `node` under `mode`, exactly as used by
/// [`dp_synthesize`]. `None` when the transition is infeasible.
pub fn transition(
    system: &SystemSpec,
    grid: &Grid,
    timing: &TimingConfig,
    cost: &CostSpec,
    policy: DomainPolicy,
    node: usize,
    mode: ModeId,
) -> Result<Option<Transition>> {
    let integrand = integrand_of(system, cost)?;
    system.mode_value(mode)?;
    if node >= grid.node_count() {
        return Err(Error::InvalidArgument(format!("node {node} out of range")));
    }
    let stepper = Stepper {
        system,
        grid,
        timing,
        integrand,
        policy,
    };
    Ok(stepper.run(node, mode))
}

/// Value of a terminal grid node (stage 0).
pub fn terminal_value(grid: &Grid, cost: &CostSpec, node: usize) -> f64 {
    match &cost.kind {
        CostKind::TerminalDistance { target } => state::distance(&grid.node(node), target),
        CostKind::AverageRunning { .. } => 0.0,
    }
}

/// Output of [`dp_synthesize`].
#[derive(Debug, Clone)]
pub struct PolicyTable {
    pub grid: Grid,
    pub timing: TimingConfig,
    pub cost: CostSpec,
    pub domain_policy: DomainPolicy,
    /// Candidate modes in search order.
    pub modes: Vec<ModeId>,
    /// Control value of each system mode.
    pub mode_values: Vec<Vec<f64>>,
    /// Optimal value per node (projected dynamics), already divided by `T`
    /// for averaged costs.
    pub values: Vec<f64>,
    /// `argmin[j][z]`: position in `modes` of the best first mode with
    /// `j + 1` periods remaining.
    argmin: Vec<Vec<u16>>,
    /// Present when transitions were precomputed.
    transitions: Option<Vec<Option<Transition>>>,
    system: SystemSpec,
}

/// A materialized table row.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub node: usize,
    /// `None` for an infeasible node.
    pub pattern: Option<Vec<ModeId>>,
    /// Cost of the pattern re-simulated from the node without projection;
    /// `None` when the node is infeasible or the replay leaves the enclosure.
    pub cost: Option<f64>,
}

impl PolicyTable {
    pub fn k(&self) -> usize {
        self.timing.k
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    fn step(&self, node: usize, slot: usize) -> Option<Transition> {
        match &self.transitions {
            Some(t) => t[node * self.modes.len() + slot],
            None => self.stepper().ok()?.run(node, self.modes[slot]),
        }
    }

    fn stepper(&self) -> Result<Stepper<'_>> {
        Ok(Stepper {
            system: &self.system,
            grid: &self.grid,
            timing: &self.timing,
            integrand: integrand_of(&self.system, &self.cost)?,
            policy: self.domain_policy,
        })
    }

    pub fn is_feasible(&self, node: usize) -> bool {
        self.values[node].is_finite()
    }

    /// Optimal pattern from `node`, recovered by forward replay.
    pub fn pattern_at(&self, node: usize) -> Result<Pattern> {
        if node >= self.values.len() {
            return Err(Error::InvalidArgument(format!("node {node} out of range")));
        }
        if !self.is_feasible(node) {
            return Err(Error::InfeasibleNode { node });
        }
        let k = self.k();
        let mut modes = Vec::with_capacity(k);
        let mut z = node;
        for remaining in (0..k).rev() {
            let slot = self.argmin[remaining][z];
            if slot == NO_MODE {
                return Err(Error::InfeasibleNode { node });
            }
            modes.push(self.modes[slot as usize]);
            z = self
                .step(z, slot as usize)
                .ok_or(Error::InfeasibleNode { node })?
                .successor;
        }
        Pattern::new(modes, self.timing.tau, false)
    }

    /// Pattern of the node nearest to `y`.
    pub fn pattern_for(&self, y: &[f64]) -> Result<Pattern> {
        self.pattern_at(self.grid.nearest_index(y)?)
    }

    pub fn entry(&self, node: usize) -> PolicyEntry {
        match self.pattern_at(node) {
            Ok(p) => {
                let y0 = self.grid.node(node);
                let cost = evaluate_pattern(&self.system, &p, &y0, &self.timing, &self.cost).ok();
                PolicyEntry {
                    node,
                    pattern: Some(p.modes),
                    cost,
                }
            }
            Err(_) => PolicyEntry {
                node,
                pattern: None,
                cost: None,
            },
        }
    }

    /// All rows, in node order.
    pub fn entries(&self) -> Vec<PolicyEntry> {
        (0..self.values.len())
            .into_par_iter()
            .map(|z| self.entry(z))
            .collect()
    }
}

fn integrand_of<'a>(
    system: &'a SystemSpec,
    cost: &CostSpec,
) -> Result<Option<&'a IntegrandFn>> {
    Ok(match &cost.kind {
        CostKind::AverageRunning { integrand, .. } => Some(system.integrand(integrand)?.as_ref()),
        CostKind::TerminalDistance { .. } => None,
    })
}

/// Backward value iteration over `k` stages on every node of `grid`.
pub fn dp_synthesize(
    system: &SystemSpec,
    grid: &Grid,
    timing: &TimingConfig,
    cost: &CostSpec,
    config: &SynthConfig,
) -> Result<PolicyTable> {
    if grid.dim() != system.dim {
        return Err(Error::DimensionMismatch {
            expected: system.dim,
            got: grid.dim(),
        });
    }
    if grid.domain() != &system.domain {
        return Err(Error::InvalidArgument(
            "grid domain must equal the system domain".into(),
        ));
    }
    cost.validate(system, timing)?;
    let modes: Vec<ModeId> = match &config.mode_subset {
        Some(subset) => {
            if subset.is_empty() {
                return Err(Error::InvalidArgument("empty mode subset".into()));
            }
            for m in subset {
                system.mode_value(*m)?;
            }
            subset.clone()
        }
        None => system.mode_ids().collect(),
    };
    if modes.len() >= NO_MODE as usize {
        return Err(Error::InvalidArgument(format!(
            "at most {} modes are supported",
            NO_MODE - 1
        )));
    }

    let stepper = Stepper {
        system,
        grid,
        timing,
        integrand: integrand_of(system, cost)?,
        policy: config.domain_policy,
    };
    let nodes = grid.node_count();
    let m = modes.len();
    let limit = config.transition_cache_limit.unwrap_or(DEFAULT_CACHE_LIMIT);
    let transitions: Option<Vec<Option<Transition>>> = if nodes.saturating_mul(m) <= limit {
        Some(
            (0..nodes * m)
                .into_par_iter()
                .map(|i| stepper.run(i / m, modes[i % m]))
                .collect(),
        )
    } else {
        None
    };
    log::info!(
        "dp: {nodes} nodes, {m} modes, {} stages, transitions {}",
        timing.k,
        if transitions.is_some() { "cached" } else { "recomputed" }
    );

    let worst = cost.worst();
    let mut value: Vec<f64> = (0..nodes).map(|z| terminal_value(grid, cost, z)).collect();
    let mut argmin = Vec::with_capacity(timing.k);
    for stage in 1..=timing.k {
        let (next_value, best): (Vec<f64>, Vec<u16>) = (0..nodes)
            .into_par_iter()
            .map(|z| {
                let mut best_v = worst;
                let mut best_u = NO_MODE;
                for (slot, &mode) in modes.iter().enumerate() {
                    let t = match &transitions {
                        Some(t) => t[z * m + slot],
                        None => stepper.run(z, mode),
                    };
                    let Some(t) = t else { continue };
                    let v = t.stage_cost + value[t.successor];
                    if cost.better(v, best_v) {
                        best_v = v;
                        best_u = slot as u16;
                    }
                }
                (best_v, best_u)
            })
            .unzip();
        log::debug!("dp: stage {stage} done");
        value = next_value;
        argmin.push(best);
    }
    if let CostKind::AverageRunning { .. } = cost.kind {
        let period = timing.period();
        value.iter_mut().for_each(|v| *v /= period);
    }
    Ok(PolicyTable {
        grid: grid.clone(),
        timing: *timing,
        cost: cost.clone(),
        domain_policy: config.domain_policy,
        modes,
        mode_values: system.modes.clone(),
        values: value,
        argmin,
        transitions,
        system: system.clone(),
    })
}

/// Cost of applying `pattern` once from `y0` with the Euler scheme, no
/// projection: terminal distance at `k tau`, or the left-endpoint rectangle
/// rule `(1/T) sum_j g(y_j) dt` over the `K` sub-steps.
pub fn evaluate_pattern(
    system: &SystemSpec,
    pattern: &Pattern,
    y0: &[f64],
    timing: &TimingConfig,
    cost: &CostSpec,
) -> Result<f64> {
    cost.validate(system, timing)?;
    let once = Pattern {
        repeated: false,
        ..pattern.clone()
    };
    let trace = integrate_pattern(system, &once, y0, timing, 1, None)?;
    match &cost.kind {
        CostKind::TerminalDistance { target } => Ok(trace.last().distance(target)),
        CostKind::AverageRunning { integrand, .. } => {
            let g = system.integrand(integrand)?;
            let sum: f64 = trace.states[..trace.len() - 1]
                .iter()
                .map(|y| g(y) * timing.dt)
                .sum();
            Ok(sum / timing.period())
        }
    }
}
