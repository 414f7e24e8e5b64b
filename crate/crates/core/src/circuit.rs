//! Dense statevector simulation and the layered rotation + CNOT-chain ansatz.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::qmath::{ComplexMatrix, DensityMatrix, StateVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    CNOT,
    CZ,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::CNOT | GateKind::CZ)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
        }
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "RX" => GateKind::RX,
            "RY" => GateKind::RY,
            "RZ" => GateKind::RZ,
            "CNOT" | "CX" => GateKind::CNOT,
            "CZ" => GateKind::CZ,
            _ => return Err(format!("unknown gate `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl Gate {
    pub fn fixed(kind: GateKind, target: usize) -> Self {
        debug_assert!(!kind.is_rotation() && !kind.is_two_qubit());
        Self {
            kind,
            target,
            control: None,
            angle: None,
        }
    }

    pub fn h(target: usize) -> Self {
        Self::fixed(GateKind::H, target)
    }

    pub fn x(target: usize) -> Self {
        Self::fixed(GateKind::X, target)
    }

    pub fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        debug_assert!(kind.is_rotation());
        Self {
            kind,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RY, target, angle)
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RZ, target, angle)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::CNOT,
            target,
            control: Some(control),
            angle: None,
        }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::CZ,
            target,
            control: Some(control),
            angle: None,
        }
    }

    /// Checks index bounds and the kind/operand invariants.
    pub fn validate(&self, width: usize) -> Result<()> {
        if self.target >= width {
            return Err(Error::IndexOutOfRange {
                index: self.target,
                width,
            });
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) if c >= width => {
                return Err(Error::IndexOutOfRange { index: c, width })
            }
            (true, Some(c)) if c == self.target => {
                return Err(Error::InvalidConfig(format!(
                    "{} control equals target {c}",
                    self.kind.name()
                )))
            }
            (true, None) => {
                return Err(Error::InvalidConfig(format!(
                    "{} needs a control qubit",
                    self.kind.name()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "{} takes no control qubit",
                    self.kind.name()
                )))
            }
            _ => {}
        }
        match (self.kind.is_rotation(), self.angle) {
            (true, None) => Err(Error::InvalidConfig(format!(
                "{} needs an angle",
                self.kind.name()
            ))),
            (false, Some(_)) => Err(Error::InvalidConfig(format!(
                "{} takes no angle",
                self.kind.name()
            ))),
            (true, Some(a)) if !a.is_finite() => {
                Err(Error::InvalidConfig(format!("non-finite angle {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            angle: self.angle.map(|a| -a),
            ..*self
        }
    }
}

/// Circuit-spec form: `RY 0 1.5708`, `CNOT 0 1`, `H 2`.
impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(c) = self.control {
            write!(f, " {c}")?;
        }
        write!(f, " {}", self.target)?;
        if let Some(a) = self.angle {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

fn apply_single(amps: &mut [C64], target: usize, u: [[C64; 2]; 2]) {
    let bit = 1usize << target;
    for i0 in 0..amps.len() {
        if i0 & bit != 0 {
            continue;
        }
        let i1 = i0 | bit;
        let (a, b) = (amps[i0], amps[i1]);
        amps[i0] = u[0][0] * a + u[0][1] * b;
        amps[i1] = u[1][0] * a + u[1][1] * b;
    }
}

fn apply_ry(amps: &mut [C64], target: usize, angle: f64) {
    let (s, c) = (0.5 * angle).sin_cos();
    let bit = 1usize << target;
    for i0 in 0..amps.len() {
        if i0 & bit != 0 {
            continue;
        }
        let i1 = i0 | bit;
        let (a, b) = (amps[i0], amps[i1]);
        amps[i0] = a * c - b * s;
        amps[i1] = a * s + b * c;
    }
}

fn apply_rz(amps: &mut [C64], target: usize, angle: f64) {
    let (s, c) = (0.5 * angle).sin_cos();
    let lower = C64::new(c, -s);
    let upper = C64::new(c, s);
    let bit = 1usize << target;
    for (i, z) in amps.iter_mut().enumerate() {
        *z *= if i & bit == 0 { lower } else { upper };
    }
}

fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let cbit = 1usize << control;
    let tbit = 1usize << target;
    for i in 0..amps.len() {
        if i & cbit != 0 && i & tbit == 0 {
            amps.swap(i, i | tbit);
        }
    }
}

/// Applies a validated gate in place.
pub(crate) fn apply_gate_in_place(amps: &mut [C64], g: &Gate) {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match g.kind {
        GateKind::H => {
            let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            apply_single(amps, g.target, [[s, s], [s, -s]]);
        }
        GateKind::X => apply_single(amps, g.target, [[o, l], [l, o]]),
        GateKind::Y => apply_single(amps, g.target, [[o, -i], [i, o]]),
        GateKind::Z => {
            let bit = 1usize << g.target;
            for (k, z) in amps.iter_mut().enumerate() {
                if k & bit != 0 {
                    *z = -*z;
                }
            }
        }
        GateKind::RX => {
            let (s, c) = (0.5 * g.angle.unwrap_or(0.0)).sin_cos();
            let c = C64::new(c, 0.0);
            let m = C64::new(0.0, -s);
            apply_single(amps, g.target, [[c, m], [m, c]]);
        }
        GateKind::RY => apply_ry(amps, g.target, g.angle.unwrap_or(0.0)),
        GateKind::RZ => apply_rz(amps, g.target, g.angle.unwrap_or(0.0)),
        GateKind::CNOT => apply_cnot(amps, g.control.unwrap_or(0), g.target),
        GateKind::CZ => {
            let mask = (1usize << g.target) | (1usize << g.control.unwrap_or(0));
            for (k, z) in amps.iter_mut().enumerate() {
                if k & mask == mask {
                    *z = -*z;
                }
            }
        }
    }
}

pub fn apply_gate(psi: &StateVector, g: &Gate) -> Result<StateVector> {
    g.validate(psi.num_qubits())?;
    let mut out = psi.clone();
    apply_gate_in_place(out.amplitudes_mut(), g);
    Ok(out)
}

/// Applies `gates` in order to `|0…0⟩`.
pub fn run_circuit(gates: &[Gate], width: usize) -> Result<StateVector> {
    for g in gates {
        g.validate(width)?;
    }
    let mut psi = StateVector::zero_state(width);
    for g in gates {
        apply_gate_in_place(psi.amplitudes_mut(), g);
    }
    Ok(psi)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationKind {
    /// Real amplitudes only.
    #[default]
    Ry,
    /// `RY` followed by `RZ` on every qubit.
    RyRz,
}

impl RotationKind {
    pub fn parameters_per_qubit(self) -> usize {
        match self {
            RotationKind::Ry => 1,
            RotationKind::RyRz => 2,
        }
    }
}

impl FromStr for RotationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ry" => Ok(RotationKind::Ry),
            "ry_rz" | "ryrz" | "ry+rz" => Ok(RotationKind::RyRz),
            other => Err(Error::InvalidConfig(format!("unknown rotation kind `{other}`"))),
        }
    }
}

/// Layout of the ansatz without its parameters.
///
/// `depth` repetitions of [rotation layer; CNOT chain q₀→q₁→…] followed by a
/// final rotation layer. Ancillas occupy the highest qubit indices and join
/// the chain like any other qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzShape {
    pub system_qubits: usize,
    pub ancilla_qubits: usize,
    pub depth: usize,
    pub rotation: RotationKind,
}

impl AnsatzShape {
    pub fn new(system_qubits: usize, ancilla_qubits: usize, depth: usize, rotation: RotationKind) -> Self {
        Self {
            system_qubits,
            ancilla_qubits,
            depth,
            rotation,
        }
    }

    pub fn width(&self) -> usize {
        self.system_qubits + self.ancilla_qubits
    }

    /// `(D+1)(n+m)` per rotation kind.
    pub fn parameter_count(&self) -> usize {
        (self.depth + 1) * self.width() * self.rotation.parameters_per_qubit()
    }

    pub fn with_parameters(self, parameters: Vec<f64>) -> Result<AnsatzCircuit> {
        AnsatzCircuit::new(self, parameters)
    }

    fn check(&self, parameters: &[f64]) -> Result<()> {
        if parameters.len() != self.parameter_count() {
            return Err(Error::ParameterCountMismatch {
                expected: self.parameter_count(),
                actual: parameters.len(),
            });
        }
        Ok(())
    }

    pub fn gates(&self, parameters: &[f64]) -> Result<Vec<Gate>> {
        self.check(parameters)?;
        let w = self.width();
        let per = self.rotation.parameters_per_qubit();
        let mut gates = Vec::with_capacity(self.parameter_count() + self.depth * w);
        let mut p = parameters.iter().copied();
        for layer in 0..=self.depth {
            for q in 0..w {
                gates.push(Gate::ry(q, p.next().unwrap_or_default()));
                if per == 2 {
                    gates.push(Gate::rz(q, p.next().unwrap_or_default()));
                }
            }
            if layer < self.depth {
                gates.extend((0..w.saturating_sub(1)).map(|q| Gate::cnot(q, q + 1)));
            }
        }
        Ok(gates)
    }

    /// Simulates into a reusable buffer; skips gate-list allocation.
    pub(crate) fn simulate_into(&self, parameters: &[f64], amps: &mut Vec<C64>) {
        debug_assert_eq!(parameters.len(), self.parameter_count());
        let w = self.width();
        amps.clear();
        amps.resize(1 << w, C64::new(0.0, 0.0));
        amps[0] = C64::new(1.0, 0.0);
        let mut p = parameters.iter().copied();
        for layer in 0..=self.depth {
            for q in 0..w {
                apply_ry(amps, q, p.next().unwrap_or_default());
                if self.rotation == RotationKind::RyRz {
                    apply_rz(amps, q, p.next().unwrap_or_default());
                }
            }
            if layer < self.depth {
                for q in 0..w.saturating_sub(1) {
                    apply_cnot(amps, q, q + 1);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCircuit {
    pub shape: AnsatzShape,
    pub parameters: Vec<f64>,
}

impl AnsatzCircuit {
    pub fn new(shape: AnsatzShape, parameters: Vec<f64>) -> Result<Self> {
        shape.check(&parameters)?;
        Ok(Self { shape, parameters })
    }

    pub fn zeros(shape: AnsatzShape) -> Self {
        Self {
            parameters: vec![0.0; shape.parameter_count()],
            shape,
        }
    }

    pub fn gates(&self) -> Result<Vec<Gate>> {
        self.shape.gates(&self.parameters)
    }
}

/// Statevector on all `n + m` qubits.
pub fn ansatz_state(a: &AnsatzCircuit) -> Result<StateVector> {
    a.shape.check(&a.parameters)?;
    let mut amps = Vec::new();
    a.shape.simulate_into(&a.parameters, &mut amps);
    Ok(StateVector::from_raw(a.shape.width(), amps))
}

/// `ρ = Σₐ vₐ vₐ†` where `vₐ` is the system block for ancilla pattern `a`.
pub(crate) fn reduce_over_high_qubits(amps: &[C64], system_qubits: usize) -> ComplexMatrix {
    let d = 1usize << system_qubits;
    let mut rho = ComplexMatrix::zeros(d, d);
    for block in amps.chunks_exact(d) {
        for i in 0..d {
            let bi = block[i];
            if bi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..d {
                rho[(i, j)] += bi * block[j].conj();
            }
        }
    }
    rho
}

/// System state with the ancilla register traced out.
pub fn ansatz_density(a: &AnsatzCircuit) -> Result<DensityMatrix> {
    let psi = ansatz_state(a)?;
    let rho = reduce_over_high_qubits(psi.amplitudes(), a.shape.system_qubits);
    Ok(DensityMatrix::from_matrix_unchecked(rho.hermitian_part()))
}
