//! Guaranteed deviation bounds between exact solutions and their explicit
//! Euler approximation.
//!
//! For a mode `u` with one-sided Lipschitz constant `lambda`, Lipschitz
//! constant `L`, curvature constant `C = L sup |f_u|` and perturbation
//! coupling `gamma`, an exact solution starting within `eps` of the Euler
//! start point stays within `delta(t)` of the Euler segment for
//! `t ∈ [0, tau]`. The radicands are evaluated through
//! `e^x - 1 - x` and `e^x - 1 - x - x^2/2`, computed without cancellation,
//! which is algebraically identical to the textbook expressions.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::pattern::ModeId;
use crate::sampling;
use crate::state;
use crate::system::{Coupling, SystemSpec};

/// `|lambda|` below this routes to the `lambda = 0` formula.
pub const LAMBDA_ZERO_THRESHOLD: f64 = 1e-9;

/// Constants `(C, lambda, gamma, L)` valid for one mode on `region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub region: Hyperbox,
    pub mode: ModeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub samples: usize,
    /// Multiplicative headroom on every estimated constant.
    pub safety_margin: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            samples: 4096,
            safety_margin: 0.05,
            seed: 0x5eed,
        }
    }
}

/// Which of the three closed forms applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Contracting,
    Neutral,
    Expanding,
}

pub fn branch(lambda: f64) -> Branch {
    if lambda.abs() < LAMBDA_ZERO_THRESHOLD {
        Branch::Neutral
    } else if lambda < 0.0 {
        Branch::Contracting
    } else {
        Branch::Expanding
    }
}

/// `e^x - 1 - x`.
pub(crate) fn exp_rem2(x: f64) -> f64 {
    if x.abs() < 0.5 {
        taylor_tail(x, 2)
    } else {
        x.exp_m1() - x
    }
}

/// `e^x - 1 - x - x^2 / 2`.
pub(crate) fn exp_rem3(x: f64) -> f64 {
    if x.abs() < 0.5 {
        taylor_tail(x, 3)
    } else {
        x.exp_m1() - x - 0.5 * x * x
    }
}

/// `sum_{k >= first} x^k / k!` for small `|x|`.
fn taylor_tail(x: f64, first: u32) -> f64 {
    let mut term = 1.0f64;
    for k in 1..=first {
        term *= x / k as f64;
    }
    let mut sum = 0.0f64;
    let mut k = first;
    while term.abs() > 1e-18 * sum.abs() && k < 60 {
        sum += term;
        k += 1;
        term *= x / k as f64;
    }
    sum
}

fn check_inputs(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
    }
    Ok(())
}

fn finish(radicand: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(radicand >= 0.0) {
        return Err(Error::NegativeRadicand {
            value: radicand,
            lambda,
            t,
        });
    }
    Ok(radicand.sqrt())
}

/// Unperturbed deviation bound from raw constants.
pub fn delta_unperturbed_raw(mu0: f64, t: f64, c: f64, lambda: f64) -> Result<f64> {
    check_inputs(&[("mu0", mu0), ("t", t), ("C", c)])?;
    let c2 = c * c;
    let radicand = match branch(lambda) {
        Branch::Contracting => {
            let x = lambda * t;
            mu0 * mu0 * x.exp() - 2.0 * c2 * exp_rem3(x) / lambda.powi(4)
        }
        Branch::Neutral => mu0 * mu0 * t.exp() + 2.0 * c2 * exp_rem3(t),
        Branch::Expanding => {
            let x = 3.0 * lambda * t;
            mu0 * mu0 * x.exp() + 2.0 * c2 * exp_rem3(x) / (27.0 * lambda.powi(4))
        }
    };
    finish(radicand, lambda, t)
}

/// Perturbed deviation bound from raw constants.
pub fn delta_perturbed_raw(
    eps0: f64,
    omega: f64,
    t: f64,
    c: f64,
    lambda: f64,
    gamma: f64,
) -> Result<f64> {
    check_inputs(&[("eps0", eps0), ("omega", omega), ("t", t), ("C", c), ("gamma", gamma)])?;
    let c2 = c * c;
    let gw = gamma * omega;
    let radicand = match branch(lambda) {
        Branch::Contracting => {
            let x = lambda * t;
            -2.0 * c2 * exp_rem3(x) / lambda.powi(4)
                - 2.0 * c * gw * exp_rem2(x) / lambda.powi(3)
                - gw * gw * x.exp_m1() / (lambda * lambda)
                + eps0 * eps0 * x.exp()
        }
        Branch::Neutral => {
            2.0 * c2 * exp_rem3(t) + 2.0 * c * gw * exp_rem2(t) + gw * gw * t.exp_m1()
                + eps0 * eps0 * t.exp()
        }
        Branch::Expanding => {
            let x = 3.0 * lambda * t;
            2.0 * c2 * exp_rem3(x) / (27.0 * lambda.powi(4))
                + 2.0 * c * gw * exp_rem2(x) / (9.0 * lambda.powi(3))
                + gw * gw * x.exp_m1() / (3.0 * lambda * lambda)
                + eps0 * eps0 * x.exp()
        }
    };
    finish(radicand, lambda, t)
}

/// Radius after time `t` of a ball of initial radius `mu0`, no perturbation.
pub fn delta_unperturbed(mu0: f64, t: f64, c: &BoundConstants) -> Result<f64> {
    delta_unperturbed_raw(mu0, t, c.c, c.lambda)
}

/// Radius after time `t` of a ball of initial radius `eps0` under
/// perturbations bounded by `omega`.
pub fn delta_perturbed(eps0: f64, omega: f64, t: f64, c: &BoundConstants) -> Result<f64> {
    delta_perturbed_raw(eps0, omega, t, c.c, c.lambda, c.gamma)
}

/// `delta_perturbed(eps, omega, dt) >= eps e^{lambda dt}`.
pub fn check_hypothesis_h(eps: f64, omega: f64, dt: f64, c: &BoundConstants) -> bool {
    match delta_perturbed(eps, omega, dt, c) {
        Ok(d) => d >= eps * (c.lambda * dt).exp(),
        Err(_) => false,
    }
}

struct PointStats {
    lambda: f64,
    lipschitz: f64,
    field_norm: f64,
}

fn point_stats(system: &SystemSpec, mode: ModeId, y: &[f64]) -> Result<PointStats> {
    let j = system.jacobian(mode, y)?;
    let sym = (&j + j.transpose()) * 0.5;
    let lambda = SymmetricEigen::new(sym).eigenvalues.max();
    let gram: DMatrix<f64> = j.transpose() * &j;
    let top = SymmetricEigen::new(gram).eigenvalues.max().max(0.0);
    let f = system.field(mode, y, None)?;
    Ok(PointStats {
        lambda,
        lipschitz: top.sqrt(),
        field_norm: f.norm(),
    })
}

/// Estimates the bound constants of `mode` on `region` by sampling the
/// Jacobian on a shifted Halton lattice.
///
/// `lambda` is the largest eigenvalue of the symmetric part of the Jacobian,
/// `L` the largest spectral norm, `C = L max |f_u|`. The safety margin is
/// applied to each: `lambda + m |lambda|`, `L (1 + m)`, `C (1 + m)^2`.
pub fn estimate_constants(
    system: &SystemSpec,
    mode: ModeId,
    region: &Hyperbox,
    config: &EstimatorConfig,
) -> Result<BoundConstants> {
    if config.samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    if region.dim() != system.dim {
        return Err(Error::DimensionMismatch {
            expected: system.dim,
            got: region.dim(),
        });
    }
    system.mode_value(mode)?;
    let points = sampling::lattice(region, config.samples, config.seed);
    let stats = points
        .par_iter()
        .map(|y| point_stats(system, mode, y))
        .collect::<Result<Vec<_>>>()?;
    let (mut lambda, mut lip, mut fmax) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for s in &stats {
        lambda = lambda.max(s.lambda);
        lip = lip.max(s.lipschitz);
        fmax = fmax.max(s.field_norm);
    }
    let m = config.safety_margin;
    let lambda = lambda + m * lambda.abs();
    let lipschitz = lip * (1.0 + m);
    let c = lipschitz * fmax * (1.0 + m);
    let gamma = match system.coupling {
        Coupling::Additive => 1.0,
        Coupling::General => estimate_gamma(system, mode, &points, lambda, config)?,
    };
    Ok(BoundConstants {
        c,
        lambda,
        gamma,
        lipschitz,
        region: region.clone(),
        mode,
    })
}

/// Largest sampled value of
/// `(<f(y1,w1) - f(y2,w2), y1 - y2> - lambda |y1 - y2|^2) / (|y1 - y2| |w1 - w2|)`
/// with `w` drawn from the unit ball.
fn estimate_gamma(
    system: &SystemSpec,
    mode: ModeId,
    points: &[Vec<f64>],
    lambda: f64,
    config: &EstimatorConfig,
) -> Result<f64> {
    let d = system.perturbation_dim;
    let n = system.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut unit_ball = || -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = state::norm(&v).max(f64::MIN_POSITIVE);
        v.into_iter().map(|x| x / norm).collect()
    };
    let mut best = 0.0f64;
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for pair in points.windows(2) {
        let (y1, y2) = (&pair[0], &pair[1]);
        let dy: Vec<f64> = y1.iter().zip(y2.iter()).map(|(a, b)| a - b).collect();
        let ndy = state::norm(&dy);
        if ndy == 0.0 {
            continue;
        }
        // One aligned draw plus one random draw per pair.
        let aligned: Vec<f64> = dy.iter().take(d).map(|v| v / ndy).collect();
        for w1 in [aligned, unit_ball()] {
            let w2: Vec<f64> = w1.iter().map(|v| -v).collect();
            system.field_into(mode, y1, Some(&w1), &mut f1)?;
            system.field_into(mode, y2, Some(&w2), &mut f2)?;
            let diff: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
            let ndw = 2.0 * state::norm(&w1);
            if ndw == 0.0 {
                continue;
            }
            let q = (state::dot(&diff, &dy) - lambda * ndy * ndy) / (ndy * ndw);
            best = best.max(q);
        }
    }
    Ok(best * (1.0 + config.safety_margin))
}
