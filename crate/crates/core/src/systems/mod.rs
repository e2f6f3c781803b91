//! Built-in system registry.

pub mod bioreactor;
pub mod linear;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::system::SystemSpec;

pub use bioreactor::{bioreactor_spec, Bioreactor, BioreactorParams};
pub use linear::{linear1d, linear2d, linear_test_spec, DiagonalLinear};

pub const REGISTERED: &[&str] = &["bioreactor", "linear1d", "linear2d"];

/// Optional adjustments applied when instantiating a registered system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    /// Number of modes (bioreactor only).
    #[serde(default)]
    pub n_modes: Option<usize>,
    /// Replacement domain `[lower, upper]`.
    #[serde(default)]
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
    /// Named numeric parameters (bioreactor: `D`, `K_i`, `mu_m`, ...).
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Instantiates a registered system by name.
pub fn by_name(name: &str, overrides: &SystemOverrides) -> Result<SystemSpec> {
    let domain = overrides
        .domain
        .as_ref()
        .map(|(lo, hi)| Hyperbox::new(lo.clone(), hi.clone()))
        .transpose()?;
    match name {
        "bioreactor" => {
            let params = bioreactor_params(&overrides.params)?;
            bioreactor_spec(params, overrides.n_modes.unwrap_or(300), domain)
        }
        "linear1d" | "linear2d" => {
            if !overrides.params.is_empty() || overrides.n_modes.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "system '{name}' accepts only a domain override"
                )));
            }
            let base = if name == "linear1d" {
                linear1d()
            } else {
                linear2d()
            };
            match domain {
                None => Ok(base),
                Some(d) => {
                    let lin = linear_field(&base);
                    linear_test_spec(name, lin.a, base.modes, d, lin.w_gain)
                }
            }
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown system '{other}'; registered: {}",
            REGISTERED.join(", ")
        ))),
    }
}

fn linear_field(spec: &SystemSpec) -> DiagonalLinear {
    let n = spec.dim;
    let mut jac = vec![0.0; n * n];
    spec.field.jacobian(&spec.modes[0], &vec![0.0; n], &mut jac);
    DiagonalLinear {
        a: (0..n).map(|i| jac[i * n + i]).collect(),
        w_gain: 1.0,
    }
}

fn bioreactor_params(overrides: &BTreeMap<String, f64>) -> Result<BioreactorParams> {
    let mut p = BioreactorParams::default();
    for (key, value) in overrides {
        let slot = match key.as_str() {
            "D" => &mut p.D,
            "K_i" => &mut p.K_i,
            "K_m" => &mut p.K_m,
            "P_m" => &mut p.P_m,
            "Y_xs" => &mut p.Y_xs,
            "alpha" => &mut p.alpha,
            "beta" => &mut p.beta,
            "mu_m" => &mut p.mu_m,
            "S_f_min" => &mut p.S_f_min,
            "S_f_max" => &mut p.S_f_max,
            "S_f_bar" => &mut p.S_f_bar,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown bioreactor parameter '{other}'"
                )))
            }
        };
        *slot = *value;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let o = SystemOverrides {
            n_modes: Some(10),
            ..Default::default()
        };
        let b = by_name("bioreactor", &o).unwrap();
        assert_eq!(b.mode_count(), 10);
        assert!(by_name("linear2d", &SystemOverrides::default()).is_ok());
        assert!(by_name("pendulum", &SystemOverrides::default()).is_err());
    }

    #[test]
    fn parameter_overrides() {
        let mut o = SystemOverrides::default();
        o.params.insert("D".into(), 0.2);
        let b = by_name("bioreactor", &o).unwrap();
        let f = b.field(crate::pattern::ModeId(0), &[0.0, 10.0, 20.0], None).unwrap();
        assert!((f[2] + 0.2 * 20.0).abs() < 1e-12);
        o.params.insert("bogus".into(), 1.0);
        assert!(by_name("bioreactor", &o).is_err());
    }

    #[test]
    fn linear_domain_override() {
        let o = SystemOverrides {
            domain: Some((vec![-1.0], vec![2.0])),
            ..Default::default()
        };
        let s = by_name("linear1d", &o).unwrap();
        assert_eq!(s.domain.upper()[0], 2.0);
        let f = s.field(crate::pattern::ModeId(2), &[1.0], None).unwrap();
        assert_eq!(f[0], 0.0);
    }
}
