//! The outer level: Lagrange multipliers `λ` define `H(λ) = Σ λₖ Mₖ`, the
//! inner level prepares its Gibbs state, and `λ` is updated until the state
//! reproduces the measured record.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::AnsatzShape;
use crate::gibbs::{inner_optimize, GibbsConfig};
use crate::optim::Adam;
use crate::pauli::{is_informationally_complete, frame_rank, measure_density, HermitianOperator, MeasurementRecord};
use crate::qmath::{
    fidelity_pure, hermitian_eig, trace_distance, ComplexMatrix, DensityMatrix, StateVector,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LagrangeVector {
    pub values: Vec<f64>,
}

impl LagrangeVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// How the multipliers move between epochs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaUpdate {
    /// Adam on `t − g`, the gradient of the concave dual
    /// `min_ρ F_λ(ρ) − λ·t`; one inner solve per epoch.
    #[default]
    MomentMatching,
    /// Adam on central finite differences of the MSE; `2|λ|` warm-started
    /// inner solves per epoch.
    FiniteDifference,
}

impl FromStr for LambdaUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moment_matching" | "moment-matching" => Ok(LambdaUpdate::MomentMatching),
            "finite_difference" | "finite-difference" => Ok(LambdaUpdate::FiniteDifference),
            other => Err(Error::InvalidConfig(format!("unknown lambda update `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterConfig {
    pub max_epochs: usize,
    pub mse_tolerance: f64,
    pub learning_rate: f64,
    /// Finite-difference half-width in `λ` (finite-difference mode only).
    pub gradient_step: f64,
    pub warm_start_inner: bool,
    /// Seeds the first inner solve.
    pub seed: u64,
    pub update: LambdaUpdate,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            mse_tolerance: 1e-5,
            learning_rate: 0.1,
            gradient_step: 1e-2,
            warm_start_inner: true,
            seed: 0,
            update: LambdaUpdate::default(),
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("outer: {what}")));
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.mse_tolerance > 0.0 && self.mse_tolerance < 1.0) {
            return bad("mse_tolerance must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.gradient_step > 0.0) {
            return bad("learning rate and gradient step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub lambda: Vec<f64>,
    pub mse: f64,
    pub fidelity: Option<f64>,
    pub trace_distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OuterResult {
    pub lambda: LagrangeVector,
    /// State prepared for the last traced epoch.
    pub state: DensityMatrix,
    pub trace: Vec<EpochTrace>,
    pub inner_parameters: Vec<f64>,
    pub converged: bool,
    /// The operator set does not span all Hermitian matrices.
    pub underdetermined: bool,
}

impl OuterResult {
    pub fn final_mse(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.mse)
    }
}

fn check_lengths(lambda: &LagrangeVector, ops: &[HermitianOperator]) -> Result<usize> {
    if lambda.len() != ops.len() {
        return Err(Error::LengthMismatch {
            expected: ops.len(),
            actual: lambda.len(),
        });
    }
    ops.first().map(HermitianOperator::dim).ok_or_else(|| {
        Error::InvalidConfig("empty operator set".into())
    })
}

/// `H = Σₖ λₖ Mₖ`.
pub fn effective_hamiltonian(lambda: &LagrangeVector, ops: &[HermitianOperator]) -> Result<ComplexMatrix> {
    let d = check_lengths(lambda, ops)?;
    let mut h = ComplexMatrix::zeros(d, d);
    for (op, &l) in ops.iter().zip(&lambda.values) {
        if op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: op.dim(),
            });
        }
        if l != 0.0 {
            op.accumulate_into(&mut h, l);
        }
    }
    Ok(h)
}

/// `(1/M) Σ (gₖ − tₖ)²`.
pub fn mse(generated: &MeasurementRecord, target: &MeasurementRecord) -> Result<f64> {
    generated.ensure_same_order(target)?;
    if generated.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = generated
        .values
        .iter()
        .zip(&target.values)
        .map(|(g, t)| (g - t) * (g - t))
        .sum();
    Ok(sum / generated.len() as f64)
}

fn check_record(target: &MeasurementRecord, ops: &[HermitianOperator]) -> Result<()> {
    if target.len() != ops.len() {
        return Err(Error::LengthMismatch {
            expected: ops.len(),
            actual: target.len(),
        });
    }
    for (index, (label, op)) in target.labels.iter().zip(ops).enumerate() {
        if *label != op.label {
            return Err(Error::OrderMismatch {
                index,
                left: label.clone(),
                right: op.label.clone(),
            });
        }
    }
    Ok(())
}

struct InnerSolve {
    state: DensityMatrix,
    record: MeasurementRecord,
    mse: f64,
    parameters: Vec<f64>,
}

struct Pipeline<'a> {
    target: &'a MeasurementRecord,
    ops: &'a [HermitianOperator],
    inner: GibbsConfig,
    shape: AnsatzShape,
}

impl Pipeline<'_> {
    fn solve(&self, lambda: &LagrangeVector, warm: Option<&[f64]>) -> Result<InnerSolve> {
        let h = effective_hamiltonian(lambda, self.ops)?;
        let result = inner_optimize(&h, &self.inner, self.shape, warm)?;
        let record = measure_density(&result.state, self.ops)?;
        let mse = mse(&record, self.target)?;
        Ok(InnerSolve {
            state: result.state,
            record,
            mse,
            parameters: result.parameters,
        })
    }

    fn finite_difference_gradient(
        &self,
        lambda: &LagrangeVector,
        warm: &[f64],
        step: f64,
    ) -> Result<Vec<f64>> {
        (0..lambda.len())
            .into_par_iter()
            .map(|k| {
                let mut probe = lambda.clone();
                probe.values[k] = lambda.values[k] + step;
                let up = self.solve(&probe, Some(warm))?.mse;
                probe.values[k] = lambda.values[k] - step;
                let down = self.solve(&probe, Some(warm))?.mse;
                Ok((up - down) / (2.0 * step))
            })
            .collect()
    }
}

/// Runs the two-level reconstruction from `λ = 0`.
///
/// Each epoch builds `H(λ)`, prepares its Gibbs state on the ansatz
/// (warm-started from the previous epoch when configured), measures the
/// operators and records the MSE. The loop ends once the MSE reaches
/// `mse_tolerance` or after `max_epochs` traced epochs; running out of epochs
/// is reported through `converged`, not as an error.
pub fn outer_optimize(
    target: &MeasurementRecord,
    ops: &[HermitianOperator],
    cfg: &OuterConfig,
    inner_cfg: &GibbsConfig,
    shape: AnsatzShape,
    true_state: Option<&StateVector>,
) -> Result<OuterResult> {
    cfg.validate()?;
    inner_cfg.validate()?;
    check_record(target, ops)?;
    let d = ops.first().map(HermitianOperator::dim).unwrap_or(0);
    if d != 1 << shape.system_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << shape.system_qubits,
            actual: d,
        });
    }
    if let Some(psi) = true_state {
        if psi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: psi.dim(),
            });
        }
    }
    let pipeline = Pipeline {
        target,
        ops,
        inner: GibbsConfig {
            seed: cfg.seed,
            ..inner_cfg.clone()
        },
        shape,
    };
    let underdetermined = !is_informationally_complete(ops);
    let mut lambda = LagrangeVector::zeros(ops.len());
    let mut adam = Adam::new(ops.len(), cfg.learning_rate);
    let mut trace = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut last = None;
    for epoch in 0..cfg.max_epochs {
        let start = if cfg.warm_start_inner { warm.as_deref() } else { None };
        let solve = pipeline.solve(&lambda, start)?;
        let (fidelity, distance) = match true_state {
            Some(psi) => (
                Some(fidelity_pure(&solve.state, psi)?),
                Some(trace_distance(&solve.state, &psi.to_density())?),
            ),
            None => (None, None),
        };
        trace.push(EpochTrace {
            epoch,
            lambda: lambda.values.clone(),
            mse: solve.mse,
            fidelity,
            trace_distance: distance,
        });
        warm = Some(solve.parameters.clone());
        if solve.mse <= cfg.mse_tolerance {
            converged = true;
            last = Some(solve);
            break;
        }
        if epoch + 1 < cfg.max_epochs {
            let grad = match cfg.update {
                LambdaUpdate::MomentMatching => target
                    .values
                    .iter()
                    .zip(&solve.record.values)
                    .map(|(t, g)| t - g)
                    .collect(),
                LambdaUpdate::FiniteDifference => {
                    pipeline.finite_difference_gradient(&lambda, &solve.parameters, cfg.gradient_step)?
                }
            };
            let mut next = lambda.clone();
            adam.step(&mut next.values, &grad);
            lambda = next;
        }
        last = Some(solve);
    }
    let last = last.expect("at least one epoch runs");
    Ok(OuterResult {
        lambda: LagrangeVector {
            values: trace.last().map(|t| t.lambda.clone()).unwrap_or_default(),
        },
        state: last.state,
        trace,
        inner_parameters: last.parameters,
        converged,
        underdetermined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactMaxentConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub mse_tolerance: f64,
}

impl Default for ExactMaxentConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            learning_rate: 0.05,
            mse_tolerance: 1e-12,
        }
    }
}

/// Gibbs state of `H(λ)` and the exact MSE gradient with respect to `λ`.
///
/// With `H = V diag(E) V†` and `pₐ` the Boltzmann weights,
/// `∂gⱼ/∂λₖ = Σₐᵦ (Ṁₖ)ₐᵦ (Ṁⱼ)ᵦₐ Wₐᵦ + β gⱼ gₖ` where `Ṁ = V† M V` and
/// `Wₐᵦ = (pₐ − pᵦ)/(Eₐ − Eᵦ)` (`−β pₐ` on degenerate pairs).
struct ExactObjective<'a> {
    target: &'a MeasurementRecord,
    ops: &'a [HermitianOperator],
    beta: f64,
}

struct ExactEval {
    state: DensityMatrix,
    mse: f64,
    gradient: Vec<f64>,
}

impl ExactObjective<'_> {
    fn eval(&self, lambda: &LagrangeVector) -> Result<ExactEval> {
        let h = effective_hamiltonian(lambda, self.ops)?;
        let eig = hermitian_eig(&h)?;
        let d = eig.values.len();
        let ground = eig.values[0];
        let w: Vec<f64> = eig
            .values
            .iter()
            .map(|e| (-self.beta * (e - ground)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / z).collect();
        let rho = DensityMatrix::from_matrix_unchecked(eig.reconstruct_from(&p).hermitian_part());
        let generated = measure_density(&rho, self.ops)?;
        let m = self.ops.len() as f64;
        let residual: Vec<f64> = generated
            .values
            .iter()
            .zip(&self.target.values)
            .map(|(g, t)| g - t)
            .collect();
        let mse = residual.iter().map(|r| r * r).sum::<f64>() / m;

        let r_op = effective_hamiltonian(&LagrangeVector { values: residual.clone() }, self.ops)?;
        let v = &eig.vectors;
        let r_eigen = v.adjoint().matmul(&r_op).matmul(v);
        let weighted = ComplexMatrix::from_fn(d, d, |a, b| {
            let gap = eig.values[a] - eig.values[b];
            let kernel = if gap.abs() > 1e-10 {
                (p[a] - p[b]) / gap
            } else {
                -self.beta * 0.5 * (p[a] + p[b])
            };
            r_eigen[(a, b)] * kernel
        });
        let q = v.matmul(&weighted).matmul(&v.adjoint());
        let rg: f64 = residual.iter().zip(&generated.values).map(|(r, g)| r * g).sum();
        let gradient = self
            .ops
            .iter()
            .zip(&generated.values)
            .map(|(op, g)| 2.0 / m * (op.trace_with(&q).re + self.beta * rg * g))
            .collect();
        Ok(ExactEval {
            state: rho,
            mse,
            gradient,
        })
    }
}

/// Circuit-free reference: minimizes the same MSE with `exp(−βH(λ))/Z` in
/// place of the variational inner level.
pub fn exact_maxent_reconstruct(
    target: &MeasurementRecord,
    ops: &[HermitianOperator],
    beta: f64,
) -> Result<(LagrangeVector, DensityMatrix)> {
    exact_maxent_reconstruct_with(target, ops, beta, &ExactMaxentConfig::default())
}

pub fn exact_maxent_reconstruct_with(
    target: &MeasurementRecord,
    ops: &[HermitianOperator],
    beta: f64,
    cfg: &ExactMaxentConfig,
) -> Result<(LagrangeVector, DensityMatrix)> {
    check_record(target, ops)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig("beta must be positive".into()));
    }
    let d = ops.first().map(HermitianOperator::dim).unwrap_or(0);
    if !is_informationally_complete(ops) {
        return Err(Error::SingularFrame {
            rank: frame_rank(ops),
            required: d * d,
        });
    }
    let objective = ExactObjective { target, ops, beta };
    let mut lambda = LagrangeVector::zeros(ops.len());
    let mut adam = Adam::new(ops.len(), cfg.learning_rate);
    let mut current = objective.eval(&lambda)?;
    for _ in 0..cfg.max_iterations {
        if current.mse <= cfg.mse_tolerance {
            break;
        }
        adam.step(&mut lambda.values, &current.gradient);
        current = objective.eval(&lambda)?;
    }
    Ok((lambda, current.state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::RotationKind;
    use crate::gibbs::exact_gibbs;
    use crate::optim::central_difference;
    use crate::pauli::{ic_set, measure_true_state};
    use crate::qmath::testing::*;
    use crate::qmath::{fidelity, matrix_function_hermitian};
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_lambda(rng: &mut ChaCha8Rng, len: usize) -> LagrangeVector {
        LagrangeVector {
            values: (0..len).map(|_| random_unit(rng)).collect(),
        }
    }

    fn bell() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let o = C64::new(0.0, 0.0);
        StateVector::new(2, vec![C64::new(s, 0.0), o, o, C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let ops = ic_set(1, true);
        let h = effective_hamiltonian(&LagrangeVector::zeros(4), &ops).unwrap();
        assert_eq!(h, ComplexMatrix::zeros(2, 2));
        let h = effective_hamiltonian(&LagrangeVector { values: vec![1.0, 0.0, 0.0, 0.0] }, &ops).unwrap();
        assert_eq!(h, ComplexMatrix::from_real_diagonal(&[1.0, 0.0]));
        assert!(matches!(
            effective_hamiltonian(&LagrangeVector::zeros(3), &ops),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gibbs_of_effective_hamiltonian_is_the_maxent_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let ops = ic_set(2, true);
        for _ in 0..20 {
            let lambda = random_lambda(&mut rng, ops.len());
            let h = effective_hamiltonian(&lambda, &ops).unwrap();
            let via_gibbs = exact_gibbs(&h, 1.0).unwrap();
            // exp{−Σλf}/Z assembled term by term
            let mut exponent = ComplexMatrix::zeros(4, 4);
            for (op, l) in ops.iter().zip(&lambda.values) {
                exponent = &exponent + &op.matrix().scale(-l);
            }
            let unnormalized = matrix_function_hermitian(&exponent, f64::exp).unwrap();
            let z = unnormalized.trace().re;
            let direct = unnormalized.scale(1.0 / z);
            assert!(via_gibbs.matrix().max_abs_diff(&direct) <= 1e-10);
        }
    }

    #[test]
    fn hamiltonian_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ops = ic_set(2, true);
        let l1 = random_lambda(&mut rng, 16);
        let l2 = random_lambda(&mut rng, 16);
        let (a, b) = (0.7, -1.3);
        let combo = LagrangeVector {
            values: l1.values.iter().zip(&l2.values).map(|(x, y)| a * x + b * y).collect(),
        };
        let lhs = effective_hamiltonian(&combo, &ops).unwrap();
        let h1 = effective_hamiltonian(&l1, &ops).unwrap();
        let h2 = effective_hamiltonian(&l2, &ops).unwrap();
        let rhs = &h1.scale(a) + &h2.scale(b);
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn mse_examples() {
        let labels: Vec<String> = (0..16).map(|k| format!("op{k}")).collect();
        let a = MeasurementRecord::new(labels.clone(), vec![0.25; 16]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let mut values = vec![0.25; 16];
        values[5] += 1.0;
        let b = MeasurementRecord::new(labels.clone(), values).unwrap();
        assert!((mse(&a, &b).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        let mut swapped = labels;
        swapped.swap(0, 1);
        let c = MeasurementRecord::new(swapped, vec![0.25; 16]).unwrap();
        assert!(matches!(mse(&a, &c), Err(Error::OrderMismatch { index: 0, .. })));
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ops = ic_set(2, true);
        let target = measure_true_state(&random_pure(&mut rng, 2), &ops).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let objective = ExactObjective { target: &target, ops: &ops, beta };
            let lambda = random_lambda(&mut rng, ops.len());
            let analytic = objective.eval(&lambda).unwrap().gradient;
            let numeric = central_difference(&lambda.values, 1e-5, |l| {
                objective.eval(&LagrangeVector { values: l.to_vec() }).unwrap().mse
            });
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() < 1e-8, "{a} vs {n}");
            }
        }
        // degenerate spectrum at λ = 0
        let objective = ExactObjective { target: &target, ops: &ops, beta: 1.0 };
        let analytic = objective.eval(&LagrangeVector::zeros(16)).unwrap().gradient;
        let numeric = central_difference(&[0.0; 16], 1e-5, |l| {
            objective.eval(&LagrangeVector { values: l.to_vec() }).unwrap().mse
        });
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8, "{a} vs {n}");
        }
    }

    #[test]
    fn exact_reconstruction_of_basis_and_bell_states() {
        let ops1 = ic_set(1, true);
        let zero = StateVector::zero_state(1);
        let target = measure_true_state(&zero, &ops1).unwrap();
        let (_, rho) = exact_maxent_reconstruct(&target, &ops1, 1.0).unwrap();
        assert!(fidelity_pure(&rho, &zero).unwrap() >= 0.999);

        let ops2 = ic_set(2, true);
        let target = measure_true_state(&bell(), &ops2).unwrap();
        let (_, rho) = exact_maxent_reconstruct(&target, &ops2, 1.0).unwrap();
        assert!(fidelity_pure(&rho, &bell()).unwrap() >= 0.999);
    }

    #[test]
    fn exact_reconstruction_refuses_incomplete_sets() {
        let ops = ic_set(2, false);
        let target = measure_true_state(&bell(), &ops).unwrap();
        assert!(matches!(
            exact_maxent_reconstruct(&target, &ops, 1.0),
            Err(Error::SingularFrame { rank: 10, required: 16 })
        ));
    }

    #[test]
    fn beta_lambda_scale_degeneracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ops = ic_set(2, true);
        let lambda = random_lambda(&mut rng, 16);
        let c = 2.5;
        let scaled = LagrangeVector {
            values: lambda.values.iter().map(|x| c * x).collect(),
        };
        let a = exact_gibbs(&effective_hamiltonian(&lambda, &ops).unwrap(), 1.3).unwrap();
        let b = exact_gibbs(&effective_hamiltonian(&scaled, &ops).unwrap(), 1.3 / c).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) <= 1e-10);

        let target = measure_true_state(&random_pure(&mut rng, 2), &ops).unwrap();
        let cfg = ExactMaxentConfig {
            max_iterations: 200,
            ..ExactMaxentConfig::default()
        };
        let (la, ra) = exact_maxent_reconstruct_with(&target, &ops, 1.0, &cfg).unwrap();
        let rescaled = LagrangeVector {
            values: la.values.iter().map(|x| x / c).collect(),
        };
        let rb = exact_gibbs(&effective_hamiltonian(&rescaled, &ops).unwrap(), c).unwrap();
        assert!(ra.matrix().max_abs_diff(rb.matrix()) <= 1e-10);
    }

    #[test]
    fn variational_pipeline_reconstructs_zero_state() {
        let ops = ic_set(2, true);
        let psi = StateVector::zero_state(2);
        let target = measure_true_state(&psi, &ops).unwrap();
        let shape = AnsatzShape::new(2, 1, 2, RotationKind::Ry);
        let result = outer_optimize(
            &target,
            &ops,
            &OuterConfig::default(),
            &GibbsConfig::default(),
            shape,
            Some(&psi),
        )
        .unwrap();
        let last = result.trace.last().unwrap();
        assert!(last.fidelity.unwrap() >= 0.99, "{last:?}");
        assert!(last.trace_distance.unwrap() <= 0.05);
        assert!(result.final_mse() <= result.trace[0].mse);
        assert!(!result.underdetermined);
        let f = fidelity(&result.state, &psi.to_density()).unwrap();
        assert!((f - last.fidelity.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn outer_records_its_epochs() {
        let ops = ic_set(1, true);
        let psi = StateVector::basis_state(1, 1);
        let target = measure_true_state(&psi, &ops).unwrap();
        let cfg = OuterConfig {
            max_epochs: 3,
            mse_tolerance: 1e-12,
            ..OuterConfig::default()
        };
        let shape = AnsatzShape::new(1, 1, 1, RotationKind::Ry);
        let result = outer_optimize(&target, &ops, &cfg, &GibbsConfig::default(), shape, None).unwrap();
        assert_eq!(result.trace.len(), 3);
        assert!(!result.converged);
        assert!(result.trace.iter().all(|t| t.fidelity.is_none()));
        assert_eq!(result.lambda.values, result.trace[2].lambda);
    }

    #[test]
    fn outer_flags_underdetermined_sets() {
        let ops = ic_set(1, false);
        let psi = StateVector::zero_state(1);
        let target = measure_true_state(&psi, &ops).unwrap();
        let cfg = OuterConfig {
            max_epochs: 2,
            ..OuterConfig::default()
        };
        let shape = AnsatzShape::new(1, 1, 1, RotationKind::Ry);
        let result = outer_optimize(&target, &ops, &cfg, &GibbsConfig::default(), shape, None).unwrap();
        assert!(result.underdetermined);
    }

    #[test]
    fn outer_is_deterministic() {
        let ops = ic_set(1, true);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let psi = random_pure(&mut rng, 1);
        let target = measure_true_state(&psi, &ops).unwrap();
        let cfg = OuterConfig {
            max_epochs: 15,
            seed: 5,
            ..OuterConfig::default()
        };
        let shape = AnsatzShape::new(1, 1, 1, RotationKind::RyRz);
        let run = || outer_optimize(&target, &ops, &cfg, &GibbsConfig::default(), shape, None).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn outer_rejects_mismatched_inputs() {
        let ops = ic_set(2, true);
        let target = measure_true_state(&StateVector::zero_state(2), &ops).unwrap();
        let shape = AnsatzShape::new(1, 1, 1, RotationKind::Ry);
        let err = outer_optimize(&target, &ops, &OuterConfig::default(), &GibbsConfig::default(), shape, None);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let short = MeasurementRecord::new(target.labels[..3].to_vec(), target.values[..3].to_vec()).unwrap();
        let shape = AnsatzShape::new(2, 1, 1, RotationKind::Ry);
        let err = outer_optimize(&short, &ops, &OuterConfig::default(), &GibbsConfig::default(), shape, None);
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }
}
