//! Inclusion check `B((i+K) dt) ⊆ B(i dt)` on a tube and the resulting
//! limit-cycle certificate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_contains_with_margin, Ball, Hyperbox};
use crate::tube::Tube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Certified,
    NotFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Scan every sample after the period boundaries fail.
    #[serde(default)]
    pub full_scan: bool,
    /// Required slack in the inclusion test.
    #[serde(default)]
    pub margin: f64,
    /// Keep a copy of every ball in the certified window.
    #[serde(default)]
    pub store_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: Status,
    pub i: Option<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    pub dt: f64,
    pub ball_outer: Option<Ball>,
    pub ball_inner: Option<Ball>,
    pub lambda_sum: Option<f64>,
    #[serde(rename = "H_violations")]
    pub h_violations: usize,
    /// Coordinate-wise envelope of the balls over `[i dt, (i+K) dt]`.
    pub envelope: Option<Hyperbox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<Ball>>,
    /// Inclusions found but rejected because the lambda sum was not negative.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }

    /// Re-checks the stored inclusion and sign of the lambda sum.
    pub fn self_check(&self) -> bool {
        match (&self.ball_outer, &self.ball_inner, self.lambda_sum) {
            (Some(o), Some(i), Some(s)) if self.is_certified() => {
                ball_contains_with_margin(o, i, 0.0).unwrap_or(false) && s < 0.0
            }
            _ => !self.is_certified(),
        }
    }
}

fn envelope(balls: &[Ball]) -> Hyperbox {
    let n = balls[0].dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for b in balls {
        for d in 0..n {
            lo[d] = lo[d].min(b.center[d] - b.radius);
            hi[d] = hi[d].max(b.center[d] + b.radius);
        }
    }
    Hyperbox::new(lo, hi).expect("envelope is ordered")
}

/// Searches for the first `i` with `B((i+K) dt) ⊆ B(i dt)`. Period
/// boundaries `0, K, 2K, ...` are tried first; the remaining samples only
/// when `config.full_scan` is set.
pub fn certify_limit_cycle(tube: &Tube, k: usize, config: &CertifyConfig) -> Result<Certificate> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    tube.validate()?;
    if tube.len() < k + 1 {
        return Err(Error::TubeTooShort {
            samples: tube.len(),
            needed: k + 1,
        });
    }
    let last = tube.len() - 1 - k;
    let boundaries = (0..=last).step_by(k);
    let rest = (0..=last).filter(|i| i % k != 0);
    let candidates: Box<dyn Iterator<Item = usize>> = if config.full_scan {
        Box::new(boundaries.chain(rest))
    } else {
        Box::new(boundaries)
    };

    let mut diagnostics = Vec::new();
    for i in candidates {
        let outer = &tube.balls[i];
        let inner = &tube.balls[i + k];
        if !ball_contains_with_margin(outer, inner, config.margin)? {
            continue;
        }
        let lambda_sum: f64 = tube.local_lambdas[i..i + k].iter().sum();
        let h_violations = tube.h_ok[i..i + k].iter().filter(|ok| !**ok).count();
        if lambda_sum >= 0.0 {
            diagnostics.push(format!(
                "inclusion at i = {i} rejected: lambda sum {lambda_sum} >= 0 \
                 ({h_violations} steps without hypothesis H)"
            ));
            continue;
        }
        let window = &tube.balls[i..=i + k];
        return Ok(Certificate {
            status: Status::Certified,
            i: Some(i),
            k,
            dt: tube.dt,
            ball_outer: Some(outer.clone()),
            ball_inner: Some(inner.clone()),
            lambda_sum: Some(lambda_sum),
            h_violations,
            envelope: Some(envelope(window)),
            window: config.store_window.then(|| window.to_vec()),
            diagnostics,
        });
    }
    Ok(Certificate {
        status: Status::NotFound,
        i: None,
        k,
        dt: tube.dt,
        ball_outer: None,
        ball_inner: None,
        lambda_sum: None,
        h_violations: tube.h_violations(),
        envelope: None,
        window: None,
        diagnostics,
    })
}

/// Human- and machine-readable conclusions of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub i: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub radius_outer: f64,
    pub radius_inner: f64,
    pub center_shift: f64,
    pub lambda_sum: f64,
    #[serde(rename = "H_violations")]
    pub h_violations: usize,
    pub envelope: Hyperbox,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "inclusion B(t={:.6}) ⊆ B(t={:.6}) with i = {}, K = {}",
            self.t_end, self.t_start, self.i, self.k
        )?;
        writeln!(
            f,
            "radii {:.8} -> {:.8}, center shift {:.3e}, lambda sum {:.6e}, H violations {}",
            self.radius_outer, self.radius_inner, self.center_shift, self.lambda_sum, self.h_violations
        )?;
        writeln!(
            f,
            "1. the unperturbed solution under the repeated pattern converges to a limit cycle inside I"
        )?;
        writeln!(
            f,
            "2. every perturbed solution entering I stays in I for t >= {:.6}",
            self.t_start
        )?;
        write!(f, "I is enclosed by")?;
        for d in 0..self.envelope.dim() {
            write!(
                f,
                " [{:.6}, {:.6}]",
                self.envelope.lower()[d],
                self.envelope.upper()[d]
            )?;
        }
        Ok(())
    }
}

pub fn certificate_report(cert: &Certificate, tube: &Tube) -> Result<Report> {
    let (Some(i), Some(outer), Some(inner), Some(lambda_sum), Some(env)) = (
        cert.i,
        &cert.ball_outer,
        &cert.ball_inner,
        cert.lambda_sum,
        &cert.envelope,
    ) else {
        return Err(Error::NotCertified);
    };
    if !cert.is_certified() {
        return Err(Error::NotCertified);
    }
    Ok(Report {
        i,
        k: cert.k,
        t_start: tube.time(i),
        t_end: tube.time(i + cert.k),
        radius_outer: outer.radius,
        radius_inner: inner.radius,
        center_shift: outer.center.distance(&inner.center),
        lambda_sum,
        h_violations: cert.h_violations,
        envelope: env.clone(),
    })
}
