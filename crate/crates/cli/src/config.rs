//! Run configuration: one JSON document with sections
//! `system`, `grid`, `timing`, `cost`, `perturbation`, `tube`, `output`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use eulertube::bounds::EstimatorConfig;
use eulertube::certify::CertifyConfig;
use eulertube::sim::{EnsembleConfig, PerturbationKind, PerturbationPlan};
use eulertube::synth::{CostSpec, DomainPolicy, Sense, SynthConfig};
use eulertube::systems::{self, SystemOverrides};
use eulertube::tube::{TubeConfig, ZonePolicy};
use eulertube::{Grid, ModeId, StateVec, SystemSpec, TimingConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    pub timing: TimingSection,
    #[serde(default)]
    pub cost: Option<CostSection>,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub tube: Option<TubeSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default)]
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kappa: usize,
    #[serde(default)]
    pub domain_policy: DomainPolicy,
    #[serde(default)]
    pub mode_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub tau: f64,
    /// Either `dt` or `substeps` must be given.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub substeps: Option<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSection {
    TerminalDistance {
        target: Vec<f64>,
    },
    /// The horizon is always `k * tau`.
    AverageRunning {
        integrand: String,
        sense: Sense,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    #[serde(default = "random_kind")]
    pub kind: String,
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub hold_steps: usize,
    #[serde(default = "ten")]
    pub n_traces: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "ten")]
    pub rk4_refinement: usize,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        PerturbationSection {
            kind: random_kind(),
            omega: 0.0,
            seed: default_seed(),
            hold_steps: 1,
            n_traces: 10,
            master_seed: default_seed(),
            rk4_refinement: 10,
        }
    }
}

fn random_kind() -> String {
    "random_bounded".into()
}

fn default_seed() -> u64 {
    0x5eed
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeSection {
    pub z0: Vec<f64>,
    pub mu0: f64,
    pub n_periods: usize,
    /// Explicit pattern; otherwise taken from the policy table at `z0`.
    #[serde(default)]
    pub pattern: Option<Vec<usize>>,
    #[serde(default)]
    pub zone: ZonePolicy,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    #[serde(default = "policy_name")]
    pub policy: PathBuf,
    #[serde(default = "tube_name")]
    pub tube: PathBuf,
    #[serde(default = "cert_name")]
    pub certificate: PathBuf,
    #[serde(default = "traces_name")]
    pub traces: PathBuf,
    #[serde(default = "containment_name")]
    pub containment: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: out_dir(),
            policy: policy_name(),
            tube: tube_name(),
            certificate: cert_name(),
            traces: traces_name(),
            containment: containment_name(),
        }
    }
}

fn out_dir() -> PathBuf {
    "out".into()
}
fn policy_name() -> PathBuf {
    "policy.csv".into()
}
fn tube_name() -> PathBuf {
    "tube.csv".into()
}
fn cert_name() -> PathBuf {
    "certificate.json".into()
}
fn traces_name() -> PathBuf {
    "traces".into()
}
fn containment_name() -> PathBuf {
    "containment.json".into()
}

impl OutputSection {
    pub fn path(&self, name: &Path) -> PathBuf {
        self.dir.join(name)
    }
}

impl Config {
    /// Reads a config file; relative output paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        if cfg.output.dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let s = &self.system;
        if s.name.is_empty() {
            bail!("system.name is empty");
        }
        let overrides = SystemOverrides {
            n_modes: s.n_modes,
            domain: s.domain.clone(),
            params: s.params.clone(),
        };
        Ok(systems::by_name(&s.name, &overrides)?)
    }

    pub fn timing(&self) -> Result<TimingConfig> {
        let t = &self.timing;
        Ok(match (t.dt, t.substeps) {
            (Some(dt), None) => TimingConfig::from_dt(t.tau, dt, t.k)?,
            (None, Some(s)) => TimingConfig::new(t.tau, s, t.k)?,
            _ => bail!("timing needs exactly one of dt and substeps"),
        })
    }

    pub fn grid_section(&self) -> Result<&GridSection> {
        self.grid.as_ref().context("config has no grid section")
    }

    pub fn grid(&self, system: &SystemSpec) -> Result<Grid> {
        Ok(Grid::new(system.domain.clone(), self.grid_section()?.kappa)?)
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let g = self.grid_section()?;
        Ok(SynthConfig {
            domain_policy: g.domain_policy,
            mode_subset: g
                .mode_subset
                .as_ref()
                .map(|m| m.iter().copied().map(ModeId).collect()),
            transition_cache_limit: None,
        })
    }

    pub fn cost(&self, timing: &TimingConfig) -> Result<CostSpec> {
        Ok(match self.cost.as_ref().context("config has no cost section")? {
            CostSection::TerminalDistance { target } => {
                CostSpec::terminal(StateVec::new(target.clone())?)
            }
            CostSection::AverageRunning { integrand, sense } => {
                CostSpec::average(integrand, timing.period(), *sense)
            }
        })
    }

    pub fn tube_section(&self) -> Result<&TubeSection> {
        let t = self.tube.as_ref().context("config has no tube section")?;
        if t.n_periods == 0 {
            bail!("tube.n_periods must be >= 1");
        }
        Ok(t)
    }

    pub fn tube_config(&self, epsilon: Option<f64>) -> Result<TubeConfig> {
        let t = self.tube_section()?;
        Ok(TubeConfig {
            zone: t.zone,
            estimator: t.estimator,
            epsilon,
        })
    }

    pub fn perturbation_plan(&self) -> Result<PerturbationPlan> {
        let p = &self.perturbation;
        let kind = match p.kind.as_str() {
            "none" => PerturbationKind::None,
            "random_bounded" if p.omega == 0.0 => PerturbationKind::None,
            "random_bounded" => PerturbationKind::RandomBounded {
                omega: p.omega,
                seed: p.seed,
            },
            "worst_case_radial" => PerturbationKind::WorstCaseRadial { omega: p.omega },
            other => bail!(
                "unknown perturbation kind '{other}' (none, random_bounded, worst_case_radial)"
            ),
        };
        Ok(PerturbationPlan {
            kind,
            hold_steps: p.hold_steps,
        })
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            master_seed: self.perturbation.master_seed,
            rk4_refinement: self.perturbation.rk4_refinement,
            keep_escaped: false,
        }
    }
}
