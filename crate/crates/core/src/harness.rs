//! End-to-end driver: true-state circuits, run configuration, the tomography
//! run itself and its CSV/JSON reports.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{run_circuit, AnsatzShape, Gate, GateKind, RotationKind};
use crate::gibbs::{random_parameters, GibbsConfig};
use crate::maxent::{outer_optimize, EpochTrace, OuterConfig};
use crate::pauli::{ic_set, measure_true_state, OperatorSet};
use crate::qmath::{DensityMatrix, StateVector};
use crate::{Error, Result};

/// Widest register the dense simulator accepts for a true state.
pub const MAX_QUBITS: usize = 8;

/// System plus ancilla qubits.
pub const MAX_ANSATZ_QUBITS: usize = 16;

pub const SEED_ENV: &str = "MAXENT_QST_SEED";

/// Builtin circuits with a fixed width; `randN` and `randN@SEED` are also
/// accepted for any width in `2..=MAX_QUBITS`.
pub const BUILTIN_NAMES: &[&str] = &[
    "bell", "ghz3", "ghz4", "ghz5", "ghz6", "w3", "rand2", "rand3", "rand4", "rand5", "rand6",
];

fn ghz_gates(n: usize) -> Vec<Gate> {
    let mut gates = vec![Gate::h(0)];
    gates.extend((1..n).map(|q| Gate::cnot(q - 1, q)));
    gates
}

/// `(|001⟩ + |010⟩ + |100⟩)/√3`.
fn w3_gates() -> Vec<Gate> {
    let theta = 2.0 * (1.0 / 3f64.sqrt()).acos();
    vec![
        Gate::ry(0, theta),
        // controlled RY(π/2) from q0 onto q1
        Gate::ry(1, PI / 4.0),
        Gate::cnot(0, 1),
        Gate::ry(1, -PI / 4.0),
        Gate::cnot(0, 1),
        Gate::cnot(1, 2),
        Gate::cnot(0, 1),
        Gate::x(0),
    ]
}

/// `n` layers of seeded RY rotations and a CNOT chain, then a last RY layer.
fn random_real_gates(n: usize, seed: u64) -> Vec<Gate> {
    let shape = AnsatzShape::new(n, 0, n, RotationKind::Ry);
    shape
        .gates(&random_parameters(shape.parameter_count(), seed))
        .expect("parameter count matches its own shape")
}

/// Gate list of a builtin circuit, or `None` when the name is not builtin.
pub fn builtin_circuit(name: &str) -> Option<(usize, Vec<Gate>)> {
    match name {
        "bell" => return Some((2, ghz_gates(2))),
        "w3" => return Some((3, w3_gates())),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("ghz") {
        let n: usize = rest.parse().ok()?;
        return (2..=MAX_QUBITS).contains(&n).then(|| (n, ghz_gates(n)));
    }
    let rest = name.strip_prefix("rand")?;
    let (width, seed) = match rest.split_once('@') {
        Some((w, s)) => (w.parse().ok()?, s.parse().ok()?),
        None => (rest.parse().ok()?, 0),
    };
    (2..=MAX_QUBITS)
        .contains(&width)
        .then(|| (width, random_real_gates(width, seed)))
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

/// Decimal angle or a multiple of π: `pi`, `-pi/2`, `3pi/4`.
fn parse_angle(text: &str) -> Option<f64> {
    if let Ok(x) = text.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    let lower = text.to_ascii_lowercase();
    let (num, den) = match lower.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok().filter(|d| *d != 0.0)?),
        None => (lower.as_str(), 1.0),
    };
    let factor = match num.strip_suffix("pi")? {
        "" | "+" => 1.0,
        "-" => -1.0,
        k => k.trim_end_matches('*').parse::<f64>().ok()?,
    };
    Some(factor * PI / den)
}

/// Parses the line-oriented circuit format: a `qubits N` header, then one
/// gate per line (`H 0`, `RY 0 1.5708`, `CNOT 0 1`). `#` starts a comment.
pub fn parse_circuit_spec(text: &str) -> Result<(usize, Vec<Gate>)> {
    let mut width = None;
    let mut gates = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokens(line);
        let Some(&(col, head)) = toks.first() else {
            continue;
        };
        let end_col = line.trim_end().chars().count() + 1;
        let Some(width) = width else {
            if !head.eq_ignore_ascii_case("qubits") {
                return Err(parse_error(line_no, col, "expected `qubits N` header"));
            }
            let &(ncol, ntok) = toks
                .get(1)
                .ok_or_else(|| parse_error(line_no, end_col, "missing qubit count"))?;
            let n: usize = ntok
                .parse()
                .ok()
                .filter(|n| (1..=MAX_QUBITS).contains(n))
                .ok_or_else(|| {
                    parse_error(line_no, ncol, format!("qubit count must be 1..={MAX_QUBITS}"))
                })?;
            if let Some(&(c, _)) = toks.get(2) {
                return Err(parse_error(line_no, c, "unexpected token"));
            }
            width = Some(n);
            continue;
        };

        let kind: GateKind = head.parse().map_err(|m: String| parse_error(line_no, col, m))?;
        let mut args = toks[1..].iter();
        let mut qubit = |what: &str| -> Result<usize> {
            let &(c, tok) = args
                .next()
                .ok_or_else(|| parse_error(line_no, end_col, format!("missing {what}")))?;
            let q: usize = tok
                .parse()
                .map_err(|_| parse_error(line_no, c, format!("bad qubit index `{tok}`")))?;
            if q >= width {
                return Err(parse_error(
                    line_no,
                    c,
                    format!("qubit {q} out of range for {width} qubits"),
                ));
            }
            Ok(q)
        };
        let gate = if kind.is_two_qubit() {
            let control = qubit("control qubit")?;
            let target = qubit("target qubit")?;
            if control == target {
                return Err(parse_error(line_no, col, "control equals target"));
            }
            match kind {
                GateKind::CZ => Gate::cz(control, target),
                _ => Gate::cnot(control, target),
            }
        } else if kind.is_rotation() {
            let target = qubit("target qubit")?;
            let &(c, tok) = args
                .next()
                .ok_or_else(|| parse_error(line_no, end_col, "missing angle"))?;
            let angle =
                parse_angle(tok).ok_or_else(|| parse_error(line_no, c, format!("bad angle `{tok}`")))?;
            Gate::rotation(kind, target, angle)
        } else {
            Gate::fixed(kind, qubit("target qubit")?)
        };
        if let Some(&(c, _)) = args.next() {
            return Err(parse_error(line_no, c, "unexpected token"));
        }
        gates.push(gate);
    }
    let width = width.ok_or_else(|| parse_error(1, 1, "missing `qubits N` header"))?;
    Ok((width, gates))
}

/// Builtin name first, then a circuit-spec file.
pub fn resolve_circuit(source: &str) -> Result<(usize, Vec<Gate>)> {
    if let Some(found) = builtin_circuit(source) {
        return Ok(found);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::InvalidConfig(format!(
            "`{source}` is neither a builtin circuit nor an existing file"
        )));
    }
    parse_circuit_spec(&fs::read_to_string(path)?)
}

pub fn true_state(source: &str) -> Result<StateVector> {
    let (width, gates) = resolve_circuit(source)?;
    run_circuit(&gates, width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin name or path to a circuit-spec file.
    pub circuit: String,
    /// Must match the circuit width when given.
    pub num_qubits: Option<usize>,
    /// Ansatz depth; the system size when absent.
    pub depth: Option<usize>,
    pub rotation: RotationKind,
    pub ancillas: usize,
    pub operator_set: OperatorSet,
    pub gibbs: GibbsConfig,
    pub outer: OuterConfig,
    pub output_dir: Option<PathBuf>,
    /// Replaces `outer.seed`, which seeds the first inner solve.
    pub seed: u64,
    /// Compare every epoch against the true state.
    pub diagnostics: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            circuit: "bell".into(),
            num_qubits: None,
            depth: None,
            rotation: RotationKind::default(),
            ancillas: 1,
            operator_set: OperatorSet::default(),
            gibbs: GibbsConfig::default(),
            outer: OuterConfig::default(),
            output_dir: None,
            seed: 0,
            diagnostics: true,
        }
    }
}

impl RunConfig {
    pub fn builtin(name: &str) -> Self {
        Self {
            circuit: name.into(),
            ..Self::default()
        }
    }

    /// Reads a JSON config. A relative circuit path is taken relative to the
    /// config file, and `MAXENT_QST_SEED` overrides the seed.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        if builtin_circuit(&cfg.circuit).is_none() && Path::new(&cfg.circuit).is_relative() {
            if let Some(dir) = path.parent() {
                let joined = dir.join(&cfg.circuit);
                if joined.exists() {
                    cfg.circuit = joined.to_string_lossy().into_owned();
                }
            }
        }
        cfg.apply_seed_env(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(cfg)
    }

    pub fn apply_seed_env(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}=`{v}` is not an integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == Some(0) {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.ancillas == 0 {
            return Err(Error::InvalidConfig("at least one ancilla is required".into()));
        }
        if let Some(n) = self.num_qubits {
            if !(1..=MAX_QUBITS).contains(&n) {
                return Err(Error::InvalidConfig(format!(
                    "num_qubits must be 1..={MAX_QUBITS}"
                )));
            }
        }
        self.gibbs.validate()?;
        self.outer.validate()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyReport {
    pub config: RunConfig,
    pub num_qubits: usize,
    pub depth: usize,
    pub operator_labels: Vec<String>,
    pub target: Vec<f64>,
    pub trace: Vec<EpochTrace>,
    pub lambda: Vec<f64>,
    pub state: DensityMatrix,
    pub final_fidelity: Option<f64>,
    pub final_trace_distance: Option<f64>,
    pub final_mse: f64,
    pub purity: f64,
    pub converged: bool,
    pub underdetermined: bool,
    pub wall_clock_seconds: f64,
}

pub fn run_tomography(cfg: &RunConfig) -> Result<TomographyReport> {
    cfg.validate()?;
    let (width, gates) = resolve_circuit(&cfg.circuit)?;
    let n = cfg.num_qubits.unwrap_or(width);
    if n != width {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: width,
        });
    }
    if width + cfg.ancillas > MAX_ANSATZ_QUBITS {
        return Err(Error::InvalidConfig(format!(
            "{width} system qubits with {} ancillas exceed {MAX_ANSATZ_QUBITS} ansatz qubits",
            cfg.ancillas
        )));
    }
    let psi = run_circuit(&gates, width)?;
    let ops = ic_set(n, cfg.operator_set.include_antisymmetric());
    let target = measure_true_state(&psi, &ops)?;
    let depth = cfg.depth.unwrap_or(n);
    let shape = AnsatzShape::new(n, cfg.ancillas, depth, cfg.rotation);
    let outer = OuterConfig {
        seed: cfg.seed,
        ..cfg.outer.clone()
    };
    let started = Instant::now();
    let result = outer_optimize(
        &target,
        &ops,
        &outer,
        &cfg.gibbs,
        shape,
        cfg.diagnostics.then_some(&psi),
    )?;
    let wall_clock_seconds = started.elapsed().as_secs_f64();
    let last = result.trace.last().expect("outer loop traces every epoch");
    Ok(TomographyReport {
        config: cfg.clone(),
        num_qubits: n,
        depth,
        operator_labels: target.labels,
        target: target.values,
        final_fidelity: last.fidelity,
        final_trace_distance: last.trace_distance,
        final_mse: last.mse,
        purity: result.state.purity(),
        lambda: result.lambda.values,
        converged: result.converged,
        underdetermined: result.underdetermined,
        state: result.state,
        trace: result.trace,
        wall_clock_seconds,
    })
}

fn fmt_optional(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trace_csv(trace: &[EpochTrace], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mse", "fidelity", "trace_distance"])?;
    for t in trace {
        w.write_record([
            t.epoch.to_string(),
            t.mse.to_string(),
            fmt_optional(t.fidelity),
            fmt_optional(t.trace_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lambda_csv(labels: &[String], lambda: &[f64], path: &Path) -> Result<()> {
    if labels.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: lambda.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["operator_label", "value"])?;
    for (label, value) in labels.iter().zip(lambda) {
        w.write_record([label.as_str(), value.to_string().as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `trace.csv`, `lambda.csv`, `state.json` and `report.json`.
pub fn emit_reports(report: &TomographyReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace_csv(&report.trace, &dir.join("trace.csv"))?;
    write_lambda_csv(&report.operator_labels, &report.lambda, &dir.join("lambda.csv"))?;
    fs::write(dir.join("state.json"), serde_json::to_string_pretty(&report.state)?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
