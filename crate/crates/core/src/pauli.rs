//! Informationally complete operator sets, Pauli-string decompositions and
//! expectation values.
//!
//! Operator labels use 1-based basis indices: `P_1` is `|0…0⟩⟨0…0|`,
//! `S_1_2` is `|0⟩⟨1| + |1⟩⟨0|` and `A_1_2` is `−i(|0⟩⟨1| − |1⟩⟨0|)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::qmath::{kron, ComplexMatrix, DensityMatrix, StateVector, HERMITIAN_TOL};
use crate::{Error, Result};

/// Coefficients at or below this magnitude are dropped from decompositions.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let rows = match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        };
        ComplexMatrix::from_fn(2, 2, |r, c| rows[r][c])
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn phases(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }
}

/// A weighted tensor product of single-qubit Paulis.
///
/// `letters[q]` acts on qubit `q`. The textual form writes the highest qubit
/// first, so `"ZX"` is `Z` on qubit 1 and `X` on qubit 0, i.e. `kron(Z, X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    letters: Vec<Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    /// `letters[q]` acts on qubit `q`.
    pub fn new(letters: Vec<Pauli>, coefficient: f64) -> Self {
        Self {
            letters,
            coefficient,
        }
    }

    /// Parses the highest-qubit-first textual form.
    pub fn parse(text: &str, coefficient: f64) -> Result<Self> {
        let letters = text
            .chars()
            .rev()
            .enumerate()
            .map(|(k, c)| {
                Pauli::from_char(c).ok_or_else(|| Error::Parse {
                    line: 1,
                    column: text.chars().count() - k,
                    message: format!("unknown Pauli letter `{c}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty Pauli string".into(),
            });
        }
        Ok(Self::new(letters, coefficient))
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        self.letters[qubit]
    }

    /// Highest qubit first.
    pub fn label(&self) -> String {
        self.letters.iter().rev().map(|p| p.as_char()).collect()
    }

    pub fn count_y(&self) -> usize {
        self.letters.iter().filter(|&&p| p == Pauli::Y).count()
    }

    fn masks(&self) -> (usize, usize, usize) {
        let mut x = 0usize;
        let mut z = 0usize;
        for (q, p) in self.letters.iter().enumerate() {
            if p.flips() {
                x |= 1 << q;
            }
            if p.phases() {
                z |= 1 << q;
            }
        }
        (x, z, self.count_y())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·{}", self.coefficient, self.label())
    }
}

/// JSON form `{letters, coefficient}` with letters highest-qubit first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub letters: String,
    pub coefficient: f64,
}

impl From<&PauliString> for PauliTerm {
    fn from(p: &PauliString) -> Self {
        Self {
            letters: p.label(),
            coefficient: p.coefficient,
        }
    }
}

impl TryFrom<&PauliTerm> for PauliString {
    type Error = Error;

    fn try_from(t: &PauliTerm) -> Result<Self> {
        PauliString::parse(&t.letters, t.coefficient)
    }
}

/// `coefficient · (σ_{n−1} ⊗ … ⊗ σ_0)`.
pub fn pauli_matrix(p: &PauliString) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(1);
    for letter in p.letters.iter().rev() {
        m = kron(&m, &letter.matrix());
    }
    m.scale(p.coefficient)
}

/// `Σ cₚ P` for a list of strings on the same register.
pub fn sum_pauli_terms(terms: &[PauliString]) -> Result<ComplexMatrix> {
    let n = terms.first().map(PauliString::num_qubits).ok_or_else(|| {
        Error::InvalidConfig("empty Pauli term list".into())
    })?;
    let d = 1 << n;
    let mut out = ComplexMatrix::zeros(d, d);
    for t in terms {
        if t.num_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.num_qubits(),
            });
        }
        out = &out + &pauli_matrix(t);
    }
    Ok(out)
}

/// `tr(P·M)` for a unit-coefficient string, using that `P` has exactly one
/// nonzero per row: `P[r][r ⊕ x] = (−i)^{#Y} (−1)^{popcount(r ∧ z)}`.
fn pauli_trace_product(x_mask: usize, z_mask: usize, num_y: usize, m: &ComplexMatrix) -> C64 {
    let y_phase = match num_y % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..m.rows() {
        let c = r ^ x_mask;
        let v = m[(c, r)];
        if (r & z_mask).count_ones() % 2 == 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc * y_phase
}

/// Decomposes a Hermitian matrix into Pauli strings with real coefficients
/// `tr(P·M)/2^n`, in lexicographic order of the highest-qubit-first label.
pub fn pauli_decompose_matrix(m: &ComplexMatrix) -> Result<Vec<PauliString>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let d = m.rows();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    m.ensure_hermitian()?;
    let n = d.trailing_zeros() as usize;
    let mut out = Vec::new();
    for code in 0..(1usize << (2 * n)) {
        // base-4 digits, most significant digit = highest qubit
        let letters: Vec<Pauli> = (0..n)
            .map(|q| Pauli::ALL[(code >> (2 * q)) & 3])
            .collect();
        let probe = PauliString::new(letters, 1.0);
        let (x, z, y) = probe.masks();
        let c = pauli_trace_product(x, z, y, m) / d as f64;
        debug_assert!(c.im.abs() <= HERMITIAN_TOL * m.max_abs().max(1.0));
        if c.re.abs() > PRUNE_TOL {
            out.push(PauliString::new(probe.letters, c.re));
        }
    }
    Ok(out)
}

pub fn pauli_decompose(op: &HermitianOperator) -> Result<Vec<PauliString>> {
    pauli_decompose_matrix(&op.matrix)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Projector,
    SymmetricCoherence,
    AntisymmetricCoherence,
    Custom,
}

#[derive(Clone, Debug)]
pub struct HermitianOperator {
    pub label: String,
    pub kind: OperatorKind,
    matrix: ComplexMatrix,
    /// Nonzero entries, for fast traces against the sparse IC elements.
    entries: Vec<(usize, usize, C64)>,
}

impl HermitianOperator {
    pub fn new(label: impl Into<String>, kind: OperatorKind, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: matrix.cols(),
            });
        }
        let defect = matrix.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let d = matrix.rows();
        let entries = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = matrix[(i, j)];
                (v.norm() > 0.0).then_some((i, j, v))
            })
            .collect();
        Ok(Self {
            label: label.into(),
            kind,
            matrix,
            entries,
        })
    }

    pub fn custom(label: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        Self::new(label, OperatorKind::Custom, matrix)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `tr(A·M)` for any square `A` of matching dimension.
    pub fn trace_with(&self, a: &ComplexMatrix) -> C64 {
        self.entries.iter().map(|&(i, j, v)| v * a[(j, i)]).sum()
    }

    /// Adds `s·M` into `acc`.
    pub fn accumulate_into(&self, acc: &mut ComplexMatrix, s: f64) {
        for &(i, j, v) in &self.entries {
            acc[(i, j)] += v * s;
        }
    }
}

/// Operator-set choice for tomography.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSet {
    #[default]
    Full,
    SymmetricOnly,
}

impl OperatorSet {
    pub fn include_antisymmetric(self) -> bool {
        matches!(self, OperatorSet::Full)
    }
}

impl FromStr for OperatorSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(OperatorSet::Full),
            "symmetric_only" | "symmetric-only" => Ok(OperatorSet::SymmetricOnly),
            other => Err(Error::InvalidConfig(format!("unknown operator set `{other}`"))),
        }
    }
}

/// Projectors, then symmetric coherences (`i < j`), then optionally the
/// antisymmetric coherences, each group in lexicographic `(i, j)` order.
pub fn ic_set(num_qubits: usize, include_antisymmetric: bool) -> Vec<HermitianOperator> {
    assert!(num_qubits >= 1, "IC set needs at least one qubit");
    let d = 1usize << num_qubits;
    let one = C64::new(1.0, 0.0);
    let i_unit = C64::new(0.0, 1.0);
    let mut ops = Vec::with_capacity(if include_antisymmetric { d * d } else { d * (d + 1) / 2 });
    let build = |label: String, kind, entries: &[(usize, usize, C64)]| {
        let mut m = ComplexMatrix::zeros(d, d);
        for &(r, c, v) in entries {
            m[(r, c)] = v;
        }
        HermitianOperator::new(label, kind, m).expect("IC elements are Hermitian")
    };
    for i in 0..d {
        ops.push(build(format!("P_{}", i + 1), OperatorKind::Projector, &[(i, i, one)]));
    }
    for i in 0..d {
        for j in i + 1..d {
            ops.push(build(
                format!("S_{}_{}", i + 1, j + 1),
                OperatorKind::SymmetricCoherence,
                &[(i, j, one), (j, i, one)],
            ));
        }
    }
    if include_antisymmetric {
        for i in 0..d {
            for j in i + 1..d {
                ops.push(build(
                    format!("A_{}_{}", i + 1, j + 1),
                    OperatorKind::AntisymmetricCoherence,
                    &[(i, j, -i_unit), (j, i, i_unit)],
                ));
            }
        }
    }
    ops
}

/// Looks up an IC element by label, e.g. `P_1`, `S_1_2`, `A_2_4`.
pub fn ic_operator(num_qubits: usize, label: &str) -> Result<HermitianOperator> {
    ic_set(num_qubits, true)
        .into_iter()
        .find(|op| op.label == label)
        .ok_or_else(|| Error::InvalidConfig(format!("no IC operator `{label}` on {num_qubits} qubits")))
}

/// Real symmetric Hilbert–Schmidt Gram matrix `tr(Mₐ M_b)`.
pub fn gram_matrix(ops: &[HermitianOperator]) -> DMatrix<f64> {
    let k = ops.len();
    DMatrix::from_fn(k, k, |a, b| ops[a].trace_with(ops[b].matrix()).re)
}

/// Numerical rank of the Gram matrix.
pub fn frame_rank(ops: &[HermitianOperator]) -> usize {
    if ops.is_empty() {
        return 0;
    }
    let eig = SymmetricEigen::new(gram_matrix(ops));
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    eig.eigenvalues
        .iter()
        .filter(|x| x.abs() > 1e-9 * max.max(1.0))
        .count()
}

/// True when the operators span all `d²` real dimensions of Hermitian matrices.
pub fn is_informationally_complete(ops: &[HermitianOperator]) -> bool {
    ops.first()
        .is_some_and(|op| frame_rank(ops) == op.dim() * op.dim())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl MeasurementRecord {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                actual: values.len(),
            });
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Errors on the first position where the labels disagree.
    pub fn ensure_same_order(&self, other: &MeasurementRecord) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        match self.labels.iter().zip(&other.labels).position(|(a, b)| a != b) {
            Some(index) => Err(Error::OrderMismatch {
                index,
                left: self.labels[index].clone(),
                right: other.labels[index].clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.values[k])
    }
}

fn ensure_op_dim(dim: usize, op: &HermitianOperator) -> Result<()> {
    if op.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: op.dim(),
        });
    }
    Ok(())
}

/// `Re tr(ρM)`.
pub fn expectation(rho: &DensityMatrix, op: &HermitianOperator) -> Result<f64> {
    ensure_op_dim(rho.dim(), op)?;
    let v = op.trace_with(rho.matrix());
    debug_assert!(v.im.abs() <= 1e-9, "imaginary expectation {}", v.im);
    Ok(v.re)
}

/// Noise-free record of `Re tr(ρM)` over a list of operators.
pub fn measure_density(rho: &DensityMatrix, ops: &[HermitianOperator]) -> Result<MeasurementRecord> {
    let values = ops
        .iter()
        .map(|op| expectation(rho, op))
        .collect::<Result<Vec<_>>>()?;
    MeasurementRecord::new(ops.iter().map(|op| op.label.clone()).collect(), values)
}

/// Noise-free record of `⟨ψ|M|ψ⟩` over a list of operators.
pub fn measure_true_state(psi: &StateVector, ops: &[HermitianOperator]) -> Result<MeasurementRecord> {
    let a = psi.amplitudes();
    let values = ops
        .iter()
        .map(|op| {
            ensure_op_dim(psi.dim(), op)?;
            let v: C64 = op
                .entries
                .iter()
                .map(|&(i, j, m)| a[i].conj() * m * a[j])
                .sum();
            Ok(v.re)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementRecord::new(ops.iter().map(|op| op.label.clone()).collect(), values)
}
