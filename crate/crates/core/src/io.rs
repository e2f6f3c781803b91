//! Portable file formats: tube and trace CSVs, policy tables, JSON
//! documents. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Hyperbox};
use crate::grid::Grid;
use crate::integrate::Trace;
use crate::pattern::{ModeId, Pattern, TimingConfig};
use crate::state::StateVec;
use crate::synth::{CostSpec, DomainPolicy, PolicyEntry, PolicyTable};
use crate::system::SystemSpec;
use crate::tube::Tube;

fn num(x: f64) -> String {
    format!("{x}")
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("cannot parse {what} from '{s}'")))
}

fn opt_field(s: &str) -> Option<&str> {
    let s = s.trim();
    (!s.is_empty()).then_some(s)
}

// ---------------------------------------------------------------- tube CSV

pub fn tube_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("c_{i}")));
    h.extend(["radius", "lambda_local", "gamma_local", "H_ok"].map(String::from));
    h
}

/// One row per sample; the per-step columns of row `j` describe the step
/// ending at sample `j` and are empty on row 0.
pub fn write_tube_csv<W: Write>(tube: &Tube, out: W) -> Result<()> {
    tube.validate()?;
    let n = tube.balls[0].dim();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(tube_header(n))?;
    for (j, b) in tube.balls.iter().enumerate() {
        let mut row = Vec::with_capacity(n + 5);
        row.push(num(tube.time(j)));
        row.extend(b.center.iter().map(|c| num(*c)));
        row.push(num(b.radius));
        if j == 0 {
            row.extend([String::new(), String::new(), String::new()]);
        } else {
            row.push(num(tube.local_lambdas[j - 1]));
            row.push(num(tube.local_gammas[j - 1]));
            row.push(if tube.h_ok[j - 1] { "1" } else { "0" }.into());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tube_csv<R: Read>(input: R) -> Result<Tube> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols < 6 {
        return Err(Error::Format(format!("tube CSV needs at least 6 columns, got {cols}")));
    }
    let n = cols - 5;
    let expected = tube_header(n);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "unexpected tube CSV header; expected {}",
            expected.join(",")
        )));
    }
    let mut times = Vec::new();
    let mut balls = Vec::new();
    let mut lambdas = Vec::new();
    let mut gammas = Vec::new();
    let mut h_ok = Vec::new();
    for (j, rec) in r.records().enumerate() {
        let rec = rec?;
        times.push(parse_num(&rec[0], "t")?);
        let center = (1..=n)
            .map(|i| parse_num(&rec[i], "center"))
            .collect::<Result<Vec<_>>>()?;
        let radius = parse_num(&rec[n + 1], "radius")?;
        balls.push(Ball::new(StateVec::new(center)?, radius)?);
        let (l, g, h) = (opt_field(&rec[n + 2]), opt_field(&rec[n + 3]), opt_field(&rec[n + 4]));
        match (j, l, g, h) {
            (0, None, None, None) => {}
            (0, ..) => return Err(Error::Format("row 0 must leave the per-step columns empty".into())),
            (_, Some(l), Some(g), Some(h)) => {
                lambdas.push(parse_num(l, "lambda_local")?);
                gammas.push(parse_num(g, "gamma_local")?);
                h_ok.push(match h {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => return Err(Error::Format(format!("bad H_ok value '{other}'"))),
                });
            }
            _ => return Err(Error::Format(format!("row {j} misses per-step columns"))),
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("tube CSV needs at least two rows".into()));
    }
    let t0 = times[0];
    let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Format("tube times must increase".into()));
    }
    for (j, t) in times.iter().enumerate() {
        let expect = t0 + j as f64 * dt;
        if (t - expect).abs() > 1e-9 * expect.abs().max(dt) {
            return Err(Error::Format(format!("row {j}: time {t} is off the uniform lattice")));
        }
    }
    let tube = Tube {
        t0,
        dt,
        balls,
        local_lambdas: lambdas,
        local_gammas: gammas,
        h_ok,
    };
    tube.validate()?;
    Ok(tube)
}

// --------------------------------------------------------------- trace CSV

pub fn trace_header(n: usize, m: usize, d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("y_{i}")));
    if m == 1 {
        h.push("mode_value".into());
    } else {
        h.extend((1..=m).map(|i| format!("mode_value_{i}")));
    }
    h.extend((1..=d).map(|i| format!("w_{i}")));
    h
}

/// Row `j` holds the state at `t_j` and the mode and perturbation applied
/// on `[t_j, t_{j+1})`; those columns are empty on the last row and the
/// perturbation columns are empty for unperturbed traces.
pub fn write_trace_csv<W: Write>(trace: &Trace, system: &SystemSpec, out: W) -> Result<()> {
    let n = system.dim;
    let m = system.modes.first().map_or(1, Vec::len);
    let d = system.perturbation_dim;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(n, m, d))?;
    for (j, (t, y)) in trace.times.iter().zip(&trace.states).enumerate() {
        let mut row = Vec::with_capacity(1 + n + m + d);
        row.push(num(*t));
        row.extend(y.iter().map(|v| num(*v)));
        match trace.mode_ids.get(j) {
            Some(id) => row.extend(system.mode_value(*id)?.iter().map(|v| num(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        match trace.perturbations.get(j) {
            Some(wv) => row.extend(wv.iter().map(|v| num(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), d)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the times and states of a trace CSV with `n` state columns.
pub fn read_trace_states<R: Read>(input: R, n: usize) -> Result<(Vec<f64>, Vec<StateVec>)> {
    let mut r = csv::Reader::from_reader(input);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < n + 1 {
            return Err(Error::Format("trace row too short".into()));
        }
        times.push(parse_num(&rec[0], "t")?);
        let y = (1..=n)
            .map(|i| parse_num(&rec[i], "state"))
            .collect::<Result<Vec<_>>>()?;
        states.push(StateVec::new(y)?);
    }
    Ok((times, states))
}

// ------------------------------------------------------------ policy table

/// Metadata block of a policy table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub system: String,
    pub domain: Hyperbox,
    pub kappa: usize,
    pub epsilon: f64,
    pub timing: TimingConfig,
    pub cost: CostSpec,
    pub domain_policy: DomainPolicy,
    /// Candidate modes searched by the DP.
    pub modes: Vec<ModeId>,
    /// Control value of every system mode, indexed by mode id.
    pub mode_values: Vec<Vec<f64>>,
}

impl PolicyHeader {
    pub fn of(table: &PolicyTable) -> Self {
        PolicyHeader {
            system: table.system().name.clone(),
            domain: table.grid.domain().clone(),
            kappa: table.grid.kappa(),
            epsilon: table.grid.epsilon(),
            timing: table.timing,
            cost: table.cost.clone(),
            domain_policy: table.domain_policy,
            modes: table.modes.clone(),
            mode_values: table.mode_values.clone(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let dom = Hyperbox::new(self.domain.lower().to_vec(), self.domain.upper().to_vec())?;
        Grid::new(dom, self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub header: PolicyHeader,
    pub rows: Vec<PolicyEntry>,
}

impl PolicyFile {
    pub fn pattern_at(&self, node: usize) -> Result<Pattern> {
        let row = self
            .rows
            .get(node)
            .ok_or_else(|| Error::InvalidArgument(format!("node {node} not in table")))?;
        let modes = row.pattern.clone().ok_or(Error::InfeasibleNode { node })?;
        Pattern::new(modes, self.header.timing.tau, false)
    }

    pub fn pattern_for(&self, y: &[f64]) -> Result<Pattern> {
        self.pattern_at(self.header.grid()?.nearest_index(y)?)
    }
}

const HEADER_PREFIX: &str = "# ";

pub fn policy_columns(k: usize) -> Vec<String> {
    let mut h = vec!["node_index".to_string(), "cost".to_string()];
    h.extend((1..=k).map(|i| format!("u_{i}")));
    h
}

/// Header line `# {json}`, then `node_index,cost,u_1..u_k`. Infeasible
/// nodes have empty cost and mode cells; a feasible node whose replay left
/// the enclosure has an empty cost only.
pub fn write_policy_table<W: Write>(table: &PolicyTable, entries: &[PolicyEntry], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let header = serde_json::to_string(&PolicyHeader::of(table))?;
    writeln!(out, "{HEADER_PREFIX}{header}")?;
    let k = table.k();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(policy_columns(k))?;
    for e in entries {
        let mut row = vec![e.node.to_string(), e.cost.map(num).unwrap_or_default()];
        match &e.pattern {
            Some(p) => row.extend(p.iter().map(|m| m.0.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), k)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_policy_table<R: Read>(input: R) -> Result<PolicyFile> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::Format("policy table must start with a '# {json}' header".into()))?;
    let header: PolicyHeader = serde_json::from_str(json.trim_end())?;
    let k = header.timing.k;
    let mut r = csv::Reader::from_reader(reader);
    let cols = r.headers()?.clone();
    if cols.iter().ne(policy_columns(k).iter().map(String::as_str)) {
        return Err(Error::Format("unexpected policy table columns".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let node = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad node index '{}'", &rec[0])))?;
        if node != rows.len() {
            return Err(Error::Format(format!("node {node} out of order")));
        }
        let cost = opt_field(&rec[1]).map(|s| parse_num(s, "cost")).transpose()?;
        let cells: Vec<Option<&str>> = (2..2 + k).map(|i| opt_field(&rec[i])).collect();
        let pattern = if cells.iter().all(Option::is_none) {
            None
        } else {
            let modes = cells
                .iter()
                .map(|c| {
                    let c = c.ok_or_else(|| Error::Format(format!("node {node}: missing mode")))?;
                    let id = c
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("node {node}: bad mode '{c}'")))?;
                    if id >= header.mode_values.len() {
                        return Err(Error::Format(format!("node {node}: unknown mode {id}")));
                    }
                    Ok(ModeId(id))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(modes)
        };
        rows.push(PolicyEntry { node, pattern, cost });
    }
    Ok(PolicyFile { header, rows })
}

// ------------------------------------------------------------------- JSON

pub fn write_json<T: Serialize, W: Write>(value: &T, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(input))?)
}

// ------------------------------------------------------------ path helpers

pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(File::create(path)?)
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate_pattern;
    use crate::synth::{dp_synthesize, Sense, SynthConfig};
    use crate::systems::{bioreactor_spec, linear2d, BioreactorParams};
    use proptest::prelude::*;

    fn sample_tube(values: &[f64]) -> Tube {
        let balls: Vec<Ball> = values
            .iter()
            .map(|v| Ball::new(StateVec::new(vec![*v, -v / 3.0]).unwrap(), v.abs()).unwrap())
            .collect();
        let n = balls.len() - 1;
        Tube {
            t0: 0.0,
            dt: 0.01,
            balls,
            local_lambdas: (0..n).map(|j| -0.1 * j as f64 / 7.0).collect(),
            local_gammas: vec![1.0; n],
            h_ok: (0..n).map(|j| j % 3 != 0).collect(),
        }
    }

    #[test]
    fn tube_header_layout() {
        assert_eq!(
            tube_header(3).join(","),
            "t,c_1,c_2,c_3,radius,lambda_local,gamma_local,H_ok"
        );
    }

    proptest! {
        #[test]
        fn tube_round_trip(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let tube = sample_tube(&values);
            let mut buf = Vec::new();
            write_tube_csv(&tube, &mut buf).unwrap();
            let back = read_tube_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(&back.balls, &tube.balls);
            prop_assert_eq!(&back.local_lambdas, &tube.local_lambdas);
            prop_assert_eq!(&back.h_ok, &tube.h_ok);
            prop_assert!((back.dt - tube.dt).abs() < 1e-12 * tube.dt);
        }
    }

    #[test]
    fn malformed_tube_is_rejected() {
        assert!(read_tube_csv("t,c_1,radius\n0,1,1\n".as_bytes()).is_err());
        let bad = "t,c_1,radius,lambda_local,gamma_local,H_ok\n0,1,1,,,\n0.1,1,x,-1,1,1\n";
        assert!(read_tube_csv(bad.as_bytes()).is_err());
        let gap = "t,c_1,radius,lambda_local,gamma_local,H_ok\n0,1,1,,,\n0.1,1,1,-1,1,1\n0.35,1,1,-1,1,1\n";
        assert!(read_tube_csv(gap.as_bytes()).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let sys = bioreactor_spec(BioreactorParams::default(), 3, None).unwrap();
        let timing = TimingConfig::new(1.0, 2, 2).unwrap();
        let p = Pattern::new(vec![ModeId(0), ModeId(2)], 1.0, false).unwrap();
        let tr = integrate_pattern(&sys, &p, &[6.0, 15.0, 20.0], &timing, 1, None).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &sys, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,y_1,y_2,y_3,mode_value,w_1,w_2,w_3");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,6,15,20,28.7,"));
        assert!(lines[5].ends_with(",,,,"));
        let (times, states) = read_trace_states(buf.as_slice(), 3).unwrap();
        assert_eq!(times, tr.times);
        assert_eq!(states, tr.states);
    }

    #[test]
    fn policy_round_trip() {
        let sys = linear2d();
        let grid = Grid::new(sys.domain.clone(), 4).unwrap();
        let timing = TimingConfig::new(0.5, 4, 3).unwrap();
        let cost = CostSpec::average("x1", timing.period(), Sense::Maximize);
        let table = dp_synthesize(&sys, &grid, &timing, &cost, &SynthConfig::default()).unwrap();
        let entries = table.entries();
        let mut buf = Vec::new();
        write_policy_table(&table, &entries, &mut buf).unwrap();
        let file = read_policy_table(buf.as_slice()).unwrap();
        assert_eq!(file.rows, entries);
        assert_eq!(file.header.grid().unwrap(), grid);
        for z in 0..grid.node_count() {
            assert_eq!(file.pattern_at(z).ok(), table.pattern_at(z).ok());
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "node_index,cost,u_1,u_2,u_3");
    }
}
