//! Switched systems: a finite mode table over a shared vector field
//! `dy/dt = f_u(y, w)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::pattern::ModeId;
use crate::state::{self, StateVec};

/// Right-hand side of a switched system.
pub trait VectorField: Send + Sync {
    /// Writes `f_u(y, w)` into `out`, where `mode` is the control value of
    /// `u`. `w = None` means no perturbation.
    fn eval(&self, mode: &[f64], y: &[f64], w: Option<&[f64]>, out: &mut [f64]);

    /// Row-major Jacobian of `f_u(., 0)` at `y`. Returns `false` when no
    /// analytic Jacobian exists; callers then fall back to finite differences.
    fn jacobian(&self, _mode: &[f64], _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// How the perturbation enters the field. Drives the estimate of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `f_u(y, w) = f_u(y) + w`; gamma is exactly 1.
    Additive,
    /// Anything else; gamma is estimated by sampling.
    General,
}

pub type Integrand = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub perturbation_dim: usize,
    /// Domain `S` on which patterns are synthesized.
    pub domain: Hyperbox,
    /// Enclosure region on which bound constants are valid.
    pub enclosure: Hyperbox,
    /// Control value of each mode.
    pub modes: Vec<Vec<f64>>,
    pub field: Arc<dyn VectorField>,
    pub coupling: Coupling,
    pub integrands: Vec<(String, Integrand)>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("perturbation_dim", &self.perturbation_dim)
            .field("domain", &self.domain)
            .field("enclosure", &self.enclosure)
            .field("modes", &self.modes.len())
            .field("coupling", &self.coupling)
            .finish()
    }
}

impl SystemSpec {
    /// Checks the structural invariants: `S ⊆ T`, at least one mode.
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument("system has no modes".into()));
        }
        if self.domain.dim() != self.dim || self.enclosure.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.domain.dim(),
            });
        }
        if !self.enclosure.contains_box(&self.domain) {
            return Err(Error::InvalidArgument(
                "domain must lie inside the enclosure region".into(),
            ));
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_value(&self, mode: ModeId) -> Result<&[f64]> {
        self.modes
            .get(mode.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("mode index {} out of range", mode.0)))
    }

    pub fn mode_ids(&self) -> impl Iterator<Item = ModeId> {
        (0..self.modes.len()).map(ModeId)
    }

    /// `f_u(y, w)` with a finiteness check.
    pub fn field_into(
        &self,
        mode: ModeId,
        y: &[f64],
        w: Option<&[f64]>,
        out: &mut [f64],
    ) -> Result<()> {
        let value = self.mode_value(mode)?;
        self.field.eval(value, y, w, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { state: y.to_vec() });
        }
        Ok(())
    }

    pub fn field(&self, mode: ModeId, y: &[f64], w: Option<&[f64]>) -> Result<StateVec> {
        let mut out = vec![0.0; self.dim];
        self.field_into(mode, y, w, &mut out)?;
        Ok(state::unchecked(out))
    }

    /// Jacobian of `f_u(., 0)`, analytic when available, otherwise central
    /// differences with relative step `1e-6`.
    pub fn jacobian(&self, mode: ModeId, y: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let mut buf = vec![0.0; n * n];
        let value = self.mode_value(mode)?;
        if !self.field.jacobian(value, y, &mut buf) {
            finite_difference_jacobian(self.field.as_ref(), value, y, &mut buf);
        }
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { state: y.to_vec() });
        }
        Ok(DMatrix::from_row_slice(n, n, &buf))
    }

    pub fn integrand(&self, name: &str) -> Result<&Integrand> {
        self.integrands
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "system '{}' has no running-cost integrand '{}'",
                    self.name, name
                ))
            })
    }
}

pub(crate) fn finite_difference_jacobian(
    field: &dyn VectorField,
    mode: &[f64],
    y: &[f64],
    out: &mut [f64],
) {
    let n = y.len();
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = 1e-6 * y[j].abs().max(1.0);
        yp[j] = y[j] + h;
        field.eval(mode, &yp, None, &mut fp);
        yp[j] = y[j] - h;
        field.eval(mode, &yp, None, &mut fm);
        yp[j] = y[j];
        for i in 0..n {
            out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}
