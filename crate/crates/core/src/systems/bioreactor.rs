//! Continuous-culture fermentation model with biomass `X`, substrate `S`
//! and product `P`, controlled by the feed substrate concentration `S_f`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::system::{Coupling, SystemSpec, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[allow(non_snake_case)]
pub struct BioreactorParams {
    /// Dilution rate (1/h).
    pub D: f64,
    /// Substrate inhibition constant (g/L).
    pub K_i: f64,
    /// Monod constant (g/L).
    pub K_m: f64,
    /// Product inhibition limit (g/L).
    pub P_m: f64,
    pub Y_xs: f64,
    pub alpha: f64,
    /// (1/h)
    pub beta: f64,
    /// Maximal growth rate (1/h).
    pub mu_m: f64,
    pub S_f_min: f64,
    pub S_f_max: f64,
    /// Nominal feed concentration. Not used by the dynamics.
    pub S_f_bar: f64,
}

impl Default for BioreactorParams {
    fn default() -> Self {
        BioreactorParams {
            D: 0.15,
            K_i: 22.0,
            K_m: 1.2,
            P_m: 50.0,
            Y_xs: 0.4,
            alpha: 2.2,
            beta: 0.2,
            mu_m: 0.48,
            S_f_min: 28.7,
            S_f_max: 40.0,
            S_f_bar: 32.9,
        }
    }
}

impl BioreactorParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.D, self.K_i, self.K_m, self.P_m, self.Y_xs, self.alpha, self.beta, self.mu_m,
            self.S_f_min, self.S_f_max, self.S_f_bar,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "bioreactor parameters must be positive and finite".into(),
            ));
        }
        if self.S_f_min >= self.S_f_max {
            return Err(Error::InvalidArgument("S_f_min must be below S_f_max".into()));
        }
        Ok(())
    }

    /// Specific growth rate `mu(S, P)`.
    pub fn growth_rate(&self, s: f64, p: f64) -> f64 {
        self.mu_m * (1.0 - p / self.P_m) * s / self.denominator(s)
    }

    fn denominator(&self, s: f64) -> f64 {
        self.K_m + s + s * s / self.K_i
    }
}

/// The fermentation vector field with additive perturbation on all states.
#[derive(Debug, Clone, Copy)]
pub struct Bioreactor {
    pub params: BioreactorParams,
}

impl VectorField for Bioreactor {
    fn eval(&self, mode: &[f64], y: &[f64], w: Option<&[f64]>, out: &mut [f64]) {
        let p = &self.params;
        let (x, s, prod) = (y[0], y[1], y[2]);
        let s_f = mode[0];
        let mu = p.growth_rate(s, prod);
        out[0] = -p.D * x + mu * x;
        out[1] = p.D * (s_f - s) - mu * x / p.Y_xs;
        out[2] = -p.D * prod + (p.alpha * mu + p.beta) * x;
        if let Some(w) = w {
            out[0] += w[0];
            out[1] += w[1];
            out[2] += w[2];
        }
    }

    fn jacobian(&self, _mode: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        let p = &self.params;
        let (x, s, prod) = (y[0], y[1], y[2]);
        let den = p.denominator(s);
        let inhib = 1.0 - prod / p.P_m;
        let mu = p.mu_m * inhib * s / den;
        let mu_s = p.mu_m * inhib * (p.K_m - s * s / p.K_i) / (den * den);
        let mu_p = -p.mu_m * s / (p.P_m * den);

        out[0] = -p.D + mu;
        out[1] = mu_s * x;
        out[2] = mu_p * x;

        out[3] = -mu / p.Y_xs;
        out[4] = -p.D - mu_s * x / p.Y_xs;
        out[5] = -mu_p * x / p.Y_xs;

        out[6] = p.alpha * mu + p.beta;
        out[7] = p.alpha * mu_s * x;
        out[8] = -p.D + p.alpha * mu_p * x;
        true
    }
}

/// Default domain `S = [4.8, 7.5] x [11, 26] x [17.5, 26]`.
pub fn default_domain() -> Hyperbox {
    Hyperbox::new(vec![4.8, 11.0, 17.5], vec![7.5, 26.0, 26.0]).expect("static box")
}

/// `n` values spread uniformly over `[lo, hi]`, endpoints included; a single
/// mode sits at the midpoint.
pub fn uniform_modes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Registered bioreactor system with `n_modes` feed levels.
///
/// The enclosure is the domain grown by 10% of each side on both ends.
/// Registers the running-cost integrand `productivity = D * P`.
pub fn bioreactor_spec(
    params: BioreactorParams,
    n_modes: usize,
    domain: Option<Hyperbox>,
) -> Result<SystemSpec> {
    params.validate()?;
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be >= 1".into()));
    }
    let domain = domain.unwrap_or_else(default_domain);
    if domain.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: domain.dim(),
        });
    }
    let enclosure = domain.inflate_relative(0.1);
    let modes = uniform_modes(params.S_f_min, params.S_f_max, n_modes)
        .into_iter()
        .map(|v| vec![v])
        .collect();
    let d = params.D;
    let spec = SystemSpec {
        name: "bioreactor".into(),
        dim: 3,
        perturbation_dim: 3,
        domain,
        enclosure,
        modes,
        field: Arc::new(Bioreactor { params }),
        coupling: Coupling::Additive,
        integrands: vec![("productivity".into(), Arc::new(move |y: &[f64]| d * y[2]))],
    };
    spec.validate()?;
    Ok(spec)
}
