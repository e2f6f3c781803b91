//! Diagonal linear systems `dy/dt = A y + b_u + g w` with closed-form
//! solutions, used as analytic test oracles.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::system::{Coupling, SystemSpec, VectorField};

#[derive(Debug, Clone)]
pub struct DiagonalLinear {
    pub a: Vec<f64>,
    /// Gain applied to the perturbation.
    pub w_gain: f64,
}

impl VectorField for DiagonalLinear {
    fn eval(&self, mode: &[f64], y: &[f64], w: Option<&[f64]>, out: &mut [f64]) {
        for i in 0..y.len() {
            out[i] = self.a[i] * y[i] + mode[i];
        }
        if let Some(w) = w {
            for i in 0..y.len() {
                out[i] += self.w_gain * w[i];
            }
        }
    }

    fn jacobian(&self, _mode: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        let n = y.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            out[i * n + i] = self.a[i];
        }
        true
    }
}

impl DiagonalLinear {
    /// Exact solution at time `t` under constant offset `b`.
    pub fn solution(&self, b: &[f64], y0: &[f64], t: f64) -> Vec<f64> {
        self.a
            .iter()
            .zip(b)
            .zip(y0)
            .map(|((a, b), y)| {
                let eq = -b / a;
                eq + (y - eq) * (a * t).exp()
            })
            .collect()
    }

    /// Exact one-sided Lipschitz constant: `max a_i`.
    pub fn lambda(&self) -> f64 {
        self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact Lipschitz constant: `max |a_i|`.
    pub fn lipschitz(&self) -> f64 {
        self.a.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

/// Linear system with diagonal `a` (all entries negative) and one offset
/// vector per mode. Registers the integrand `x1 = y_1`.
pub fn linear_test_spec(
    name: &str,
    a: Vec<f64>,
    offsets: Vec<Vec<f64>>,
    domain: Hyperbox,
    w_gain: f64,
) -> Result<SystemSpec> {
    let n = a.len();
    if n == 0 || a.iter().any(|v| !(*v < 0.0)) {
        return Err(Error::InvalidArgument(
            "linear test system needs a non-empty, strictly negative diagonal".into(),
        ));
    }
    if offsets.is_empty() || offsets.iter().any(|b| b.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "linear test system needs at least one offset of length {n}"
        )));
    }
    let enclosure = domain.inflate_relative(0.1);
    let spec = SystemSpec {
        name: name.into(),
        dim: n,
        perturbation_dim: n,
        domain,
        enclosure,
        modes: offsets,
        field: Arc::new(DiagonalLinear { a, w_gain }),
        coupling: if w_gain == 1.0 {
            Coupling::Additive
        } else {
            Coupling::General
        },
        integrands: vec![("x1".into(), Arc::new(|y: &[f64]| y[0]))],
    };
    spec.validate()?;
    Ok(spec)
}

/// `dy/dt = -y + b`, `b ∈ {0, 0.5, 1}` on `[0, 1]`.
pub fn linear1d() -> SystemSpec {
    linear_test_spec(
        "linear1d",
        vec![-1.0],
        vec![vec![0.0], vec![0.5], vec![1.0]],
        Hyperbox::new(vec![0.0], vec![1.0]).expect("static box"),
        1.0,
    )
    .expect("static system")
}

/// `A = diag(-1, -2)` with three offsets on `[0, 1]^2`.
pub fn linear2d() -> SystemSpec {
    linear_test_spec(
        "linear2d",
        vec![-1.0, -2.0],
        vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, 1.5]],
        Hyperbox::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("static box"),
        1.0,
    )
    .expect("static system")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::ModeId;

    #[test]
    fn exponential_decay() {
        let sys = DiagonalLinear {
            a: vec![-1.0],
            w_gain: 1.0,
        };
        let y = sys.solution(&[0.0], &[1.0], 1.0);
        assert!((y[0] - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(sys.lambda(), -1.0);
        assert_eq!(sys.lipschitz(), 1.0);
    }

    #[test]
    fn registered_linear_systems() {
        let s1 = linear1d();
        assert_eq!(s1.dim, 1);
        assert_eq!(s1.mode_count(), 3);
        let s2 = linear2d();
        let f = s2.field(ModeId(1), &[0.5, 0.5], None).unwrap();
        assert_eq!(f.as_slice(), &[0.5, -0.5]);
        let j = s2.jacobian(ModeId(0), &[0.2, 0.3]).unwrap();
        assert_eq!(j[(0, 0)], -1.0);
        assert_eq!(j[(1, 1)], -2.0);
        assert_eq!(j[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_unstable_diagonal() {
        let dom = Hyperbox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(linear_test_spec("bad", vec![0.5], vec![vec![0.0]], dom, 1.0).is_err());
    }
}
