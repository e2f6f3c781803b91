use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use eulertube::certify::{certificate_report, certify_limit_cycle};
use eulertube::io;
use eulertube::sim::{check_containment, run_ensemble, ContainmentReport, EnsembleConfig, Violation};
use eulertube::synth::{dp_synthesize, evaluate_pattern};
use eulertube::tube::propagate_tube_partial;
use eulertube::{Error, ModeId, Pattern, SystemSpec, TimingConfig};

use crate::config::Config;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_BLOWUP: u8 = 4;
pub const EXIT_NOT_CERTIFIED: u8 = 5;
pub const EXIT_VIOLATION: u8 = 6;

/// Exit status for an error chain; errors not raised by the library are
/// configuration or input problems.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        None => EXIT_CONFIG,
        Some(Error::InfeasibleNode { .. }) => EXIT_INFEASIBLE,
        Some(Error::ZoneGrowthExceeded { .. } | Error::LeftEnclosure { .. }) => EXIT_BLOWUP,
        Some(Error::NotCertified) => EXIT_NOT_CERTIFIED,
        Some(Error::NonFiniteField { .. } | Error::NegativeRadicand { .. }) => EXIT_FAILURE,
        Some(_) => EXIT_CONFIG,
    }
}

fn fmt_modes(system: &SystemSpec, pattern: &Pattern) -> String {
    pattern
        .modes
        .iter()
        .map(|m| {
            let v = system.modes[m.0]
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",");
            format!("{}({v})", m.0)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn synthesize(config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let cfg = Config::load(config)?;
    let system = cfg.system()?;
    let timing = cfg.timing()?;
    let grid = cfg.grid(&system)?;
    let cost = cfg.cost(&timing)?;
    let table = dp_synthesize(&system, &grid, &timing, &cost, &cfg.synth_config()?)?;
    let entries = table.entries();
    let path = out.unwrap_or_else(|| cfg.output.path(&cfg.output.policy));
    io::write_policy_table(&table, &entries, io::create(&path)?)
        .with_context(|| format!("writing {}", path.display()))?;
    let feasible = entries.iter().filter(|e| e.pattern.is_some()).count();
    println!(
        "policy table: {} ({} nodes, {feasible} feasible, epsilon {})",
        path.display(),
        grid.node_count(),
        grid.epsilon()
    );
    if let Some(t) = &cfg.tube {
        let node = grid.nearest_index(&t.z0)?;
        let pattern = table.pattern_at(node)?;
        let achieved = evaluate_pattern(&system, &pattern, &t.z0, &timing, &cost)?;
        println!("z0 representative: node {node} {:?}", grid.node(node).as_slice());
        println!("pattern: {}", fmt_modes(&system, &pattern));
        println!("grid value: {}", table.values[node]);
        println!("cost from z0: {achieved}");
    }
    Ok(EXIT_OK)
}

/// Pattern and the grid resolution it was synthesized at, if known.
fn resolve_pattern(
    cfg: &Config,
    system: &SystemSpec,
    timing: &TimingConfig,
    pattern: Option<Vec<usize>>,
    policy: Option<PathBuf>,
) -> Result<(Pattern, Option<f64>)> {
    let t = cfg.tube_section()?;
    let explicit = pattern.or_else(|| if policy.is_none() { t.pattern.clone() } else { None });
    if let Some(modes) = explicit {
        if modes.len() != timing.k {
            bail!("pattern has {} modes, timing.k is {}", modes.len(), timing.k);
        }
        if let Some(bad) = modes.iter().find(|m| **m >= system.mode_count()) {
            bail!("mode {bad} out of range (system has {} modes)", system.mode_count());
        }
        let pattern = Pattern::new(modes.into_iter().map(ModeId).collect(), timing.tau, true)?;
        let eps = cfg.grid.as_ref().and_then(|_| cfg.grid(system).ok()).map(|g| g.epsilon());
        return Ok((pattern, eps));
    }
    let path = policy.unwrap_or_else(|| cfg.output.path(&cfg.output.policy));
    let file = io::read_policy_table(io::open(&path)?)
        .with_context(|| format!("reading policy table {}", path.display()))?;
    if file.header.system != system.name {
        bail!(
            "policy table is for system '{}', config names '{}'",
            file.header.system,
            system.name
        );
    }
    if file.header.timing != *timing {
        bail!("policy table timing {:?} differs from config {:?}", file.header.timing, timing);
    }
    if file.header.mode_values != system.modes {
        bail!("policy table mode values differ from the configured system");
    }
    let pattern = file.pattern_for(&t.z0)?.repeat();
    Ok((pattern, Some(file.header.epsilon)))
}

pub fn tube(
    config: &Path,
    pattern: Option<Vec<usize>>,
    policy: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let cfg = Config::load(config)?;
    let system = cfg.system()?;
    let timing = cfg.timing()?;
    let t = cfg.tube_section()?;
    let (pattern, eps) = resolve_pattern(&cfg, &system, &timing, pattern, policy)?;
    let tcfg = cfg.tube_config(eps)?;
    println!("pattern: {}", fmt_modes(&system, &pattern));
    let run = propagate_tube_partial(
        &system,
        &pattern,
        &t.z0,
        t.mu0,
        cfg.perturbation.omega,
        &timing,
        t.n_periods,
        &tcfg,
    )?;
    info!(
        "{} zone estimates, {} cache hits, {} retries",
        run.stats.estimates, run.stats.cache_hits, run.stats.retries
    );
    let path = out.unwrap_or_else(|| cfg.output.path(&cfg.output.tube));
    io::write_tube_csv(&run.tube, io::create(&path)?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("tube: {} ({} samples)", path.display(), run.tube.len());
    let k = timing.steps_per_period;
    for (j, r) in run.tube.boundary_radii(k).iter().enumerate() {
        println!("radius at t = {}: {r}", run.tube.time(j * k));
    }
    println!("H violations: {}", run.tube.h_violations());
    match run.stop {
        None => Ok(EXIT_OK),
        Some(e) => Err(anyhow::Error::new(e).context(format!(
            "tube stopped after {} of {} samples",
            run.tube.len(),
            t.n_periods * k + 1
        ))),
    }
}

pub fn certify(
    tube: &Path,
    steps_per_period: Option<usize>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    full_scan: bool,
    margin: Option<f64>,
) -> Result<u8> {
    let cfg = config.as_deref().map(Config::load).transpose()?;
    let k = match (steps_per_period, &cfg) {
        (Some(k), _) => k,
        (None, Some(c)) => c.timing()?.steps_per_period,
        (None, None) => bail!("give --steps-per-period or --config"),
    };
    let mut ccfg = cfg
        .as_ref()
        .and_then(|c| c.tube.as_ref())
        .map(|t| t.certify)
        .unwrap_or_default();
    ccfg.full_scan |= full_scan;
    if let Some(m) = margin {
        ccfg.margin = m;
    }
    let tube_data = io::read_tube_csv(io::open(tube)?)
        .with_context(|| format!("reading tube {}", tube.display()))?;
    let cert = match certify_limit_cycle(&tube_data, k, &ccfg) {
        Err(e @ Error::TubeTooShort { .. }) => {
            println!("not certified: {e}");
            return Ok(EXIT_NOT_CERTIFIED);
        }
        other => other?,
    };
    let path = out.unwrap_or_else(|| match &cfg {
        Some(c) => c.output.path(&c.output.certificate),
        None => tube.with_file_name("certificate.json"),
    });
    io::write_json(&cert, io::create(&path)?)?;
    println!("certificate: {}", path.display());
    for d in &cert.diagnostics {
        println!("note: {d}");
    }
    if !cert.is_certified() {
        println!("no inclusion B((i+K) dt) ⊆ B(i dt) found (K = {k})");
        return Ok(EXIT_NOT_CERTIFIED);
    }
    println!("{}", certificate_report(&cert, &tube_data)?);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ContainmentDocument<'a> {
    tube: &'a Path,
    n_traces: usize,
    samples_per_trace: usize,
    samples_checked: usize,
    contained: bool,
    /// Traces that left the enclosure within the checked window.
    escaped: Vec<usize>,
    #[serde(flatten)]
    report: &'a ContainmentReport,
}

pub fn simulate(
    config: &Path,
    pattern: Option<Vec<usize>>,
    policy: Option<PathBuf>,
    tube: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let cfg = Config::load(config)?;
    let system = cfg.system()?;
    let timing = cfg.timing()?;
    let t = cfg.tube_section()?;
    let (pattern, _) = resolve_pattern(&cfg, &system, &timing, pattern, policy)?;
    let plan = cfg.perturbation_plan()?;
    let tube_data = tube
        .as_deref()
        .map(|path| {
            io::read_tube_csv(io::open(path)?)
                .with_context(|| format!("reading tube {}", path.display()))
        })
        .transpose()?;
    // Every tube ball lies in the enclosure, so a trace leaving it has left
    // the tube: keep it and score the escape.
    let ensemble_cfg = EnsembleConfig {
        keep_escaped: tube_data.is_some(),
        ..cfg.ensemble_config()
    };
    let ensemble = run_ensemble(
        &system,
        &pattern,
        &t.z0,
        t.mu0,
        &plan,
        cfg.perturbation.n_traces,
        t.n_periods,
        &timing,
        &ensemble_cfg,
    )?;
    let dir = out.unwrap_or_else(|| cfg.output.path(&cfg.output.traces));
    for (i, trace) in ensemble.traces.iter().enumerate() {
        let path = dir.join(format!("trace_{i:03}.csv"));
        io::write_trace_csv(trace, &system, io::create(&path)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{} traces in {}", ensemble.traces.len(), dir.display());
    let (Some(tube_path), Some(tube_data)) = (tube, tube_data) else {
        return Ok(EXIT_OK);
    };

    let expected = t.n_periods * timing.steps_per_period + 1;
    let checked = tube_data.len().min(expected);
    if checked < expected {
        warn!("tube covers {checked} of {expected} samples; checking that prefix only");
    }
    let mut traces = ensemble.traces;
    for tr in &mut traces {
        tr.times.truncate(checked);
        tr.states.truncate(checked);
    }
    let mut report = check_containment(&traces, &tube_data)?;
    let mut escaped = Vec::new();
    for (i, esc) in ensemble.escapes.iter().enumerate() {
        let Some(esc) = esc.as_ref().filter(|e| e.sample < checked) else {
            continue;
        };
        escaped.push(i);
        let ball = &tube_data.balls[esc.sample];
        let margin = esc.state.distance(&ball.center) - ball.radius;
        report.violations.push(Violation {
            trace: i,
            sample: esc.sample,
            time: esc.time,
            margin,
        });
        report.margins[i] = report.margins[i].max(margin);
        report.worst_margin = report.worst_margin.max(margin);
    }
    let doc = ContainmentDocument {
        tube: &tube_path,
        n_traces: traces.len(),
        samples_per_trace: expected,
        samples_checked: checked,
        contained: report.contained(),
        escaped,
        report: &report,
    };
    let path = cfg.output.path(&cfg.output.containment);
    io::write_json(&doc, io::create(&path)?)?;
    println!(
        "containment: {} ({checked} samples per trace, {} violations, {} traces left the enclosure, worst margin {})",
        path.display(),
        report.violations.len(),
        doc.escaped.len(),
        report.worst_margin
    );
    Ok(if report.contained() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}
