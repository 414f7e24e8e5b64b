//! Gibbs states: the exact thermal state, entropy truncated in the moments
//! `tr ρᵏ`, and the variational inner loop that prepares `exp(−βH)/Z` by
//! minimizing the truncated free energy over ansatz parameters.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{ansatz_density, reduce_over_high_qubits, AnsatzCircuit, AnsatzShape};
use crate::optim::{central_difference, max_abs, Adam};
use crate::qmath::{hermitian_eig, ComplexMatrix, DensityMatrix};
use crate::{Error, Result};

/// Consecutive small loss changes required to declare convergence.
pub const PATIENCE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    /// Inverse temperature.
    pub beta: f64,
    /// Entropy truncation order `K`; moments up to `tr ρ^{K+1}` are used.
    pub truncation_order: usize,
    pub max_iterations: usize,
    pub learning_rate: f64,
    /// Finite-difference half-width for parameter gradients.
    pub gradient_step: f64,
    /// Loss-change threshold for the patience-based stop.
    pub convergence_tol: f64,
    /// Stop as soon as every gradient component is below this.
    pub gradient_tol: f64,
    /// Seeds the initial parameters when no warm start is given.
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            truncation_order: 4,
            max_iterations: 300,
            learning_rate: 0.05,
            gradient_step: 1e-3,
            convergence_tol: 1e-7,
            gradient_tol: 1e-3,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("gibbs: {what}")));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.truncation_order < 1 {
            return bad("truncation order must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.gradient_step > 0.0 && self.gradient_step <= 0.1) {
            return bad("gradient step must lie in (0, 0.1]");
        }
        if !(self.convergence_tol > 0.0) || self.gradient_tol < 0.0 {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GibbsResult {
    pub parameters: Vec<f64>,
    pub state: DensityMatrix,
    pub final_loss: f64,
    /// Loss before the first update, then after each update.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn ensure_square_dim(h: &ComplexMatrix, dim: usize) -> Result<()> {
    if h.rows() != dim || h.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: h.rows(),
        });
    }
    Ok(())
}

/// `exp(−βH)/tr exp(−βH)`, with the exponent shifted by the ground energy.
pub fn exact_gibbs(h: &ComplexMatrix, beta: f64) -> Result<DensityMatrix> {
    if !h.is_square() || !h.rows().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(h.rows()));
    }
    let eig = hermitian_eig(h)?;
    let ground = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|e| (-beta * (e - ground)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let rho = eig.reconstruct_with(|e| (-beta * (e - ground)).exp() / z);
    Ok(DensityMatrix::from_matrix_unchecked(rho.hermitian_part()))
}

/// `ln tr exp(−βH)`, evaluated stably.
pub fn log_partition_function(h: &ComplexMatrix, beta: f64) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    let ground = eig.values[0];
    let shifted: f64 = eig.values.iter().map(|e| (-beta * (e - ground)).exp()).sum();
    Ok(shifted.ln() - beta * ground)
}

/// `(tr ρ², …, tr ρ^max_power)` by repeated multiplication.
pub fn state_moments(rho: &DensityMatrix, max_power: usize) -> Vec<f64> {
    assert!(max_power >= 2, "moments start at tr ρ²");
    power_traces(rho.matrix(), max_power)[1..].to_vec()
}

/// `(tr A, tr A², …, tr A^max_power)` for a Hermitian `A`.
fn power_traces(a: &ComplexMatrix, max_power: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_power);
    out.push(a.trace().re);
    let mut power = a.clone();
    for p in 2..=max_power {
        if p == max_power {
            out.push(power.trace_product(a).re);
        } else {
            power = power.matmul(a);
            out.push(power.trace().re);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Truncated entropy from power sums, `traces[j] = tr ρ^{j+1}` for
/// `j = 0..=order`:
///
/// `S_K = −Σ_{k=1..K} ((−1)^{k−1}/k) Σ_{j=0..k} C(k,j) (−1)^{k−j} tr ρ^{j+1}`.
pub fn truncated_entropy_from_traces(traces: &[f64], order: usize) -> f64 {
    assert!(traces.len() > order, "need tr ρ^1 … tr ρ^(K+1)");
    let mut s = 0.0;
    for k in 1..=order {
        let inner: f64 = (0..=k)
            .map(|j| {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                binomial(k, j) * sign * traces[j]
            })
            .sum();
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        s -= sign / k as f64 * inner;
    }
    s
}

pub fn truncated_entropy(rho: &DensityMatrix, order: usize) -> f64 {
    assert!(order >= 1, "truncation order must be at least 1");
    let traces = power_traces(rho.matrix(), order + 1);
    truncated_entropy_from_traces(&traces, order)
}

/// `tr(ρ(θ)H) − β⁻¹ S_K(ρ(θ))` with `ρ(θ)` the ancilla-reduced ansatz state.
pub fn free_energy_loss(a: &AnsatzCircuit, h: &ComplexMatrix, cfg: &GibbsConfig) -> Result<f64> {
    ensure_square_dim(h, 1 << a.shape.system_qubits)?;
    let rho = ansatz_density(a)?;
    let energy = rho.matrix().trace_product(h).re;
    Ok(energy - truncated_entropy(&rho, cfg.truncation_order) / cfg.beta)
}

/// Evaluates the truncated free energy straight from the statevector.
///
/// With `ρ = V V†` (columns of `V` are the ancilla blocks) the moments come
/// from the smaller Gram matrix `V†V`, and the energy is `Σₐ vₐ† H vₐ`.
pub(crate) struct FreeEnergyObjective<'a> {
    h: &'a ComplexMatrix,
    shape: AnsatzShape,
    beta: f64,
    order: usize,
}

impl<'a> FreeEnergyObjective<'a> {
    pub(crate) fn new(h: &'a ComplexMatrix, shape: AnsatzShape, cfg: &GibbsConfig) -> Self {
        Self {
            h,
            shape,
            beta: cfg.beta,
            order: cfg.truncation_order,
        }
    }

    pub(crate) fn eval(&self, params: &[f64], amps: &mut Vec<C64>) -> f64 {
        self.shape.simulate_into(params, amps);
        let d = 1usize << self.shape.system_qubits;
        let blocks: Vec<&[C64]> = amps.chunks_exact(d).collect();
        let mut energy = 0.0;
        for v in &blocks {
            let hv = self.h.mat_vec(v);
            energy += v
                .iter()
                .zip(&hv)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>();
        }
        let small = if blocks.len() <= d {
            let m = blocks.len();
            ComplexMatrix::from_fn(m, m, |a, b| {
                blocks[a].iter().zip(blocks[b]).map(|(x, y)| x.conj() * y).sum()
            })
        } else {
            reduce_over_high_qubits(amps, self.shape.system_qubits)
        };
        let traces = power_traces(&small, self.order + 1);
        energy - truncated_entropy_from_traces(&traces, self.order) / self.beta
    }
}

/// Variationally prepares the Gibbs state of `h`.
///
/// Adam steps on central finite-difference gradients of the truncated free
/// energy. Stops after `max_iterations`, when every gradient component is
/// below `gradient_tol`, or after [`PATIENCE`] consecutive loss changes
/// below `convergence_tol`.
pub fn inner_optimize(
    h: &ComplexMatrix,
    cfg: &GibbsConfig,
    shape: AnsatzShape,
    initial: Option<&[f64]>,
) -> Result<GibbsResult> {
    cfg.validate()?;
    h.ensure_hermitian()?;
    ensure_square_dim(h, 1 << shape.system_qubits)?;
    let mut params = match initial {
        Some(p) => {
            if p.len() != shape.parameter_count() {
                return Err(Error::ParameterCountMismatch {
                    expected: shape.parameter_count(),
                    actual: p.len(),
                });
            }
            p.to_vec()
        }
        None => random_parameters(shape.parameter_count(), cfg.seed),
    };
    let h = h.hermitian_part();
    let objective = FreeEnergyObjective::new(&h, shape, cfg);
    let mut amps = Vec::new();
    let mut loss = objective.eval(&params, &mut amps);
    let mut history = vec![loss];
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut streak = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let grad = central_difference(&params, cfg.gradient_step, |p| objective.eval(p, &mut amps));
        if max_abs(&grad) < cfg.gradient_tol {
            converged = true;
            break;
        }
        adam.step(&mut params, &grad);
        let next = objective.eval(&params, &mut amps);
        history.push(next);
        streak = if (next - loss).abs() < cfg.convergence_tol {
            streak + 1
        } else {
            0
        };
        loss = next;
        if streak >= PATIENCE {
            converged = true;
            break;
        }
    }
    let state = ansatz_density(&AnsatzCircuit::new(shape, params.clone())?)?;
    Ok(GibbsResult {
        parameters: params,
        state,
        final_loss: loss,
        iterations: history.len() - 1,
        loss_history: history,
        converged,
    })
}

/// Uniform draws in `[0, 2π)`.
pub fn random_parameters(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Per-eigenvalue form of the truncated entropy: `x Σ_{k=1..K} (1−x)^k / k`.
pub fn truncated_entropy_term(x: f64, order: usize) -> f64 {
    let u = 1.0 - x;
    x * (1..=order).map(|k| u.powi(k as i32) / k as f64).sum::<f64>()
}

fn truncated_entropy_slope(x: f64, order: usize) -> f64 {
    let u = 1.0 - x;
    let p: f64 = (1..=order).map(|k| u.powi(k as i32) / k as f64).sum();
    let dp: f64 = (1..=order).map(|k| u.powi(k as i32 - 1)).sum();
    p - x * dp
}

/// Exact minimizer of `tr(ρH) − β⁻¹ S_K(ρ)` over all density matrices.
///
/// The objective is convex and its minimizer shares the eigenbasis of `H`;
/// the eigenvalue weights follow from the stationarity condition
/// `s_K'(pᵢ) = β(Eᵢ − ν)`, solved for the multiplier `ν` by bisection.
pub fn truncated_free_energy_minimizer(
    h: &ComplexMatrix,
    beta: f64,
    order: usize,
) -> Result<DensityMatrix> {
    let eig = hermitian_eig(h)?;
    let slope_at_zero = truncated_entropy_slope(0.0, order);
    let slope_at_one = truncated_entropy_slope(1.0, order);
    // inverse of the strictly decreasing slope on [0, 1]
    let weight = |target: f64| -> f64 {
        if target >= slope_at_zero {
            return 0.0;
        }
        if target <= slope_at_one {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if truncated_entropy_slope(mid, order) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let total = |nu: f64| -> f64 { eig.values.iter().map(|e| weight(beta * (e - nu))).sum() };
    let spread = eig.values[eig.values.len() - 1] - eig.values[0];
    let mut lo = eig.values[0] - slope_at_zero / beta - spread - 1.0;
    let mut hi = eig.values[eig.values.len() - 1] - slope_at_one / beta + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let mut p: Vec<f64> = eig.values.iter().map(|e| weight(beta * (e - nu))).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    let rho = eig.reconstruct_from(&p);
    Ok(DensityMatrix::from_matrix_unchecked(rho.hermitian_part()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::RotationKind;
    use crate::pauli::{sum_pauli_terms, Pauli, PauliString};
    use crate::qmath::testing::*;
    use crate::qmath::{fidelity, trace_distance, von_neumann_entropy, StateVector};
    use rand::SeedableRng;
    use std::f64::consts::E;

    fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn gibbs_of_zero_is_maximally_mixed() {
        for beta in [0.1, 1.0, 7.0] {
            let rho = exact_gibbs(&ComplexMatrix::zeros(4, 4), beta).unwrap();
            assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        }
    }

    #[test]
    fn gibbs_of_z_closed_form() {
        let rho = exact_gibbs(&z(), 1.0).unwrap();
        let zsum = E + 1.0 / E;
        let expected = ComplexMatrix::from_real_diagonal(&[1.0 / E / zsum, E / zsum]);
        assert!(rho.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn low_temperature_gibbs_is_ground_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let h = random_hermitian(&mut rng, 4);
        let eig = hermitian_eig(&h).unwrap();
        assert!(eig.values[1] - eig.values[0] > 0.5, "needs a clear gap");
        let ground = StateVector::new(2, eig.vector(0)).unwrap().to_density();
        let rho = exact_gibbs(&h, 50.0).unwrap();
        assert!(rho.matrix().max_abs_diff(ground.matrix()) < 1e-8);
    }

    #[test]
    fn gibbs_rejects_non_hermitian() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(exact_gibbs(&m, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn moments_examples() {
        let pure = StateVector::zero_state(2).to_density();
        assert_eq!(state_moments(&pure, 5), vec![1.0; 4]);
        let mixed = DensityMatrix::maximally_mixed(1);
        let m = state_moments(&mixed, 3);
        assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn moments_match_eigenvalue_power_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            let moments = state_moments(&rho, 6);
            let eig = rho.eigenvalues();
            for (k, m) in moments.iter().enumerate() {
                let power = (k + 2) as i32;
                let oracle: f64 = eig.iter().map(|x| x.powi(power)).sum();
                assert!((m - oracle).abs() < 1e-12);
            }
            assert!(moments.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            assert!(moments.iter().all(|&m| m > 0.0 && m <= 1.0));
        }
    }

    #[test]
    fn truncated_entropy_examples() {
        let pure = StateVector::basis_state(2, 3).to_density();
        for k in 1..=8 {
            assert!(truncated_entropy(&pure, k).abs() < 1e-12);
        }
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!((truncated_entropy(&mixed, 1) - 0.5).abs() < 1e-15);
        assert!((truncated_entropy(&mixed, 2) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn binomial_expansion_matches_eigenvalue_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            let eig = rho.eigenvalues();
            for k in 1..=8 {
                let direct: f64 = eig.iter().map(|&x| truncated_entropy_term(x, k)).sum();
                assert!((truncated_entropy(&rho, k) - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let cfg = GibbsConfig::default();
        let shape = AnsatzShape::new(1, 1, 2, RotationKind::Ry);
        let zero = AnsatzCircuit::zeros(shape);
        assert!(free_energy_loss(&zero, &ComplexMatrix::zeros(2, 2), &cfg).unwrap().abs() < 1e-15);
        assert!((free_energy_loss(&zero, &z(), &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            free_energy_loss(&zero, &ComplexMatrix::zeros(4, 4), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fast_objective_matches_density_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let cfg = GibbsConfig::default();
        for (n, m) in [(1, 1), (2, 1), (2, 2), (1, 2), (2, 0)] {
            let shape = AnsatzShape::new(n, m, 2, RotationKind::RyRz);
            let h = random_hermitian(&mut rng, 1 << n);
            let objective = FreeEnergyObjective::new(&h, shape, &cfg);
            let mut amps = Vec::new();
            for _ in 0..5 {
                let params = random_parameters(shape.parameter_count(), rng.random_range(0..1000));
                let a = AnsatzCircuit::new(shape, params.clone()).unwrap();
                let slow = free_energy_loss(&a, &h, &cfg).unwrap();
                assert!((objective.eval(&params, &mut amps) - slow).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncated_entropy_converges_with_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..50 {
            let rho = random_density(&mut rng, 2);
            let exact = von_neumann_entropy(&rho);
            let errors: Vec<f64> = (1..=6).map(|k| (truncated_entropy(&rho, k) - exact).abs()).collect();
            assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errors:?}");
        }
    }

    #[test]
    fn minimizer_beats_random_parameters() {
        let cfg = GibbsConfig::default();
        let shape = AnsatzShape::new(1, 1, 1, RotationKind::Ry);
        let target = truncated_free_energy_minimizer(&z(), 1.0, 4).unwrap();
        let best = target.matrix().trace_product(&z()).re - truncated_entropy(&target, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..100 {
            let params = random_parameters(shape.parameter_count(), rng.random_range(0..u64::MAX));
            let a = AnsatzCircuit::new(shape, params).unwrap();
            assert!(free_energy_loss(&a, &z(), &cfg).unwrap() >= best - 1e-12);
        }
    }

    #[test]
    fn minimizer_is_stationary() {
        // perturbing the eigenvalue weights never lowers the truncated free energy
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let h = random_hermitian(&mut rng, 4);
        let rho = truncated_free_energy_minimizer(&h, 1.0, 4).unwrap();
        let f = |r: &DensityMatrix| r.matrix().trace_product(&h).re - truncated_entropy(r, 4);
        let base = f(&rho);
        let eig = hermitian_eig(&h).unwrap();
        for _ in 0..200 {
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0f64)).collect();
            let s: f64 = w.iter().sum();
            let t = 0.05;
            let weights: Vec<f64> = w.iter().map(|x| x / s).collect();
            let other = eig.reconstruct_from(&weights);
            let blend = &rho.matrix().scale(1.0 - t) + &other.scale(t);
            let blend = DensityMatrix::from_matrix_unchecked(blend);
            assert!(f(&blend) >= base - 1e-12);
        }
    }

    #[test]
    fn inner_loop_prepares_z_gibbs_state() {
        let cfg = GibbsConfig::default();
        let shape = AnsatzShape::new(1, 1, 2, RotationKind::Ry);
        let result = inner_optimize(&z(), &cfg, shape, None).unwrap();
        let exact = exact_gibbs(&z(), 1.0).unwrap();
        let f = fidelity(&result.state, &exact).unwrap();
        assert!(f >= 0.99, "fidelity {f}");
        assert_eq!(result.loss_history.len(), result.iterations + 1);
    }

    #[test]
    fn inner_loop_prepares_maximally_mixed_state() {
        let cfg = GibbsConfig::default();
        let shape = AnsatzShape::new(1, 1, 2, RotationKind::Ry);
        let result = inner_optimize(&ComplexMatrix::zeros(2, 2), &cfg, shape, None).unwrap();
        let t = trace_distance(&result.state, &DensityMatrix::maximally_mixed(1)).unwrap();
        assert!(t <= 0.02, "trace distance {t}");
    }

    #[test]
    fn warm_start_at_optimum_stops_quickly() {
        let cfg = GibbsConfig {
            max_iterations: 2000,
            ..GibbsConfig::default()
        };
        let shape = AnsatzShape::new(1, 1, 2, RotationKind::Ry);
        let h = sum_pauli_terms(&[
            PauliString::new(vec![Pauli::Z], 0.7),
            PauliString::new(vec![Pauli::X], -0.4),
        ])
        .unwrap();
        let first = inner_optimize(&h, &cfg, shape, None).unwrap();
        let again = inner_optimize(&h, &cfg, shape, Some(&first.parameters)).unwrap();
        assert!(again.iterations <= 5, "took {} iterations", again.iterations);
    }

    #[test]
    fn inner_loop_is_deterministic() {
        let cfg = GibbsConfig {
            seed: 9,
            max_iterations: 50,
            ..GibbsConfig::default()
        };
        let shape = AnsatzShape::new(2, 1, 2, RotationKind::Ry);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let h = random_hermitian(&mut rng, 4);
        let a = inner_optimize(&h, &cfg, shape, None).unwrap();
        let b = inner_optimize(&h, &cfg, shape, None).unwrap();
        assert_eq!(a.parameters, b.parameters);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn config_validation() {
        let ok = GibbsConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GibbsConfig { beta: 0.0, ..ok.clone() },
            GibbsConfig { truncation_order: 0, ..ok.clone() },
            GibbsConfig { learning_rate: -1.0, ..ok.clone() },
            GibbsConfig { gradient_step: 0.5, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
