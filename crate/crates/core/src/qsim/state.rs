use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Largest register simulated as a dense statevector.
pub const DEFAULT_DENSE_LIMIT: usize = 20;

const NORM_TOL: f64 = 1e-10;
const FACTOR_NORM_TOL: f64 = 1e-12;

/// Dense n-qubit statevector. Qubit 0 is the most significant bit of the
/// amplitude index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    /// Computational basis state with amplitude index `index`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_dense(n, DEFAULT_DENSE_LIMIT)?;
        let mut amps = vec![ZERO; 1 << n];
        if index >= amps.len() {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        amps[index] = ONE;
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        Self::from_amplitudes_with_limit(amps, DEFAULT_DENSE_LIMIT)
    }

    pub fn from_amplitudes_with_limit(amps: Vec<C64>, limit: usize) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let n = amps.len().trailing_zeros() as usize;
        check_dense(n, limit)?;
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { n, amps })
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_dense(n, DEFAULT_DENSE_LIMIT)?;
        let mut amps: Vec<C64> = (0..1usize << n)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        normalize(&mut amps);
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Largest elementwise |a_i − b_i| against another state of the same size.
    pub fn max_amp_diff(&self, other: &PureState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Returns the state with `gate` applied on `targets`.
    pub fn apply_gate(&self, gate: &ComplexMatrix, targets: &[usize]) -> Result<PureState> {
        if !gate.is_unitary(1e-10) {
            return Err(Error::NotUnitary {
                deviation: gate.unitary_deviation(),
            });
        }
        let mut out = self.clone();
        out.apply_gate_mut(gate, targets)?;
        Ok(out)
    }

    /// In-place gate application. Unitarity is the caller's responsibility.
    pub fn apply_gate_mut(&mut self, gate: &ComplexMatrix, targets: &[usize]) -> Result<()> {
        check_targets(targets, self.n)?;
        apply_local_gate(&mut self.amps, self.n, gate, targets)
    }

    /// ⟨ψ| obs[targets] ⊗ 𝟙 |ψ⟩.
    pub fn expectation(&self, obs: &ComplexMatrix, targets: &[usize]) -> Result<f64> {
        let dev = obs.hermitian_deviation();
        if dev > 1e-12 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let value = self.expectation_unchecked(obs, targets)?;
        if value.im.abs() > 1e-10 {
            return Err(Error::NotHermitian { deviation: value.im.abs() });
        }
        Ok(value.re)
    }

    pub(crate) fn expectation_unchecked(&self, obs: &ComplexMatrix, targets: &[usize]) -> Result<C64> {
        check_targets(targets, self.n)?;
        let k = targets.len();
        if obs.rows() != 1 << k || obs.cols() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                actual: obs.rows(),
            });
        }
        let offsets = local_offsets(self.n, targets);
        let mask = offsets.iter().fold(0, |m, &o| m | o);
        let dim = offsets.len();
        let o = obs.as_slice();
        let mut local = vec![ZERO; dim];
        let mut acc = ZERO;
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (l, &off) in offsets.iter().enumerate() {
                local[l] = self.amps[base | off];
            }
            for r in 0..dim {
                let row: C64 = o[r * dim..(r + 1) * dim]
                    .iter()
                    .zip(&local)
                    .map(|(a, b)| a * b)
                    .sum();
                acc += local[r].conj() * row;
            }
        }
        Ok(acc)
    }

    /// Born probabilities |amplitude_b|².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `shots` i.i.d. computational-basis outcomes, as amplitude indices.
    pub fn sample_computational<R: Rng + ?Sized>(&self, rng: &mut R, shots: usize) -> Result<Vec<usize>> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        let sampler = BornSampler::new(&self.probabilities());
        Ok((0..shots).map(|_| sampler.sample(rng)).collect())
    }

    /// Reduced density matrix on `support`, axes ordered as given.
    pub fn reduced_density_matrix(&self, support: &[usize]) -> Result<ComplexMatrix> {
        check_targets(support, self.n)?;
        let offsets = local_offsets(self.n, support);
        let mask = offsets.iter().fold(0, |m, &o| m | o);
        let dim = offsets.len();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (i, &oi) in offsets.iter().enumerate() {
                let a = self.amps[base | oi];
                if a == ZERO {
                    continue;
                }
                for (j, &oj) in offsets.iter().enumerate() {
                    rho[(i, j)] += a * self.amps[base | oj].conj();
                }
            }
        }
        Ok(rho)
    }
}

/// Bit value (0/1) of qubit `q` in an n-qubit amplitude index.
pub fn qubit_bit(index: usize, n: usize, q: usize) -> usize {
    (index >> (n - 1 - q)) & 1
}

/// Inverse-CDF sampler over a discrete distribution.
#[derive(Clone, Debug)]
pub struct BornSampler {
    cdf: Vec<f64>,
}

impl BornSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().unwrap_or(&0.0);
        let u = rng.gen::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        // Skip zero-probability tail entries that rounding could land on.
        let mut i = idx.min(self.cdf.len() - 1);
        while i > 0 && self.cdf[i] == self.cdf[i - 1] {
            i -= 1;
        }
        i
    }
}

/// Tensor product of single-qubit pure states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductState {
    factors: Vec<[C64; 2]>,
}

impl ProductState {
    pub fn new(factors: Vec<[C64; 2]>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("product state needs at least one qubit".into()));
        }
        for f in &factors {
            let norm_sqr = f[0].norm_sqr() + f[1].norm_sqr();
            if (norm_sqr - 1.0).abs() > FACTOR_NORM_TOL {
                return Err(Error::NotNormalized { norm_sqr });
            }
        }
        Ok(Self { factors })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            factors: vec![[ONE, ZERO]; n],
        }
    }

    /// Computational basis state, `bits[q]` giving qubit q's value.
    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            factors: bits
                .iter()
                .map(|&b| if b { [ZERO, ONE] } else { [ONE, ZERO] })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[[C64; 2]] {
        &self.factors
    }

    pub fn factor(&self, q: usize) -> [C64; 2] {
        self.factors[q]
    }

    /// Single-qubit density matrix of qubit `q`.
    pub fn qubit_density(&self, q: usize) -> ComplexMatrix {
        let f = self.factors[q];
        ComplexMatrix::outer(&f, &f)
    }

    /// Applies a single-qubit unitary to qubit `q`.
    pub fn apply_local(&mut self, q: usize, gate: &ComplexMatrix) -> Result<()> {
        if gate.rows() != 2 || gate.cols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: gate.rows(),
            });
        }
        let v = gate.matvec(&self.factors[q])?;
        self.factors[q] = [v[0], v[1]];
        Ok(())
    }
}

/// Expands a product state into a dense statevector.
pub fn dense_from_product(p: &ProductState) -> Result<PureState> {
    dense_from_product_with_limit(p, DEFAULT_DENSE_LIMIT)
}

pub fn dense_from_product_with_limit(p: &ProductState, limit: usize) -> Result<PureState> {
    check_dense(p.n(), limit)?;
    let mut amps = vec![ONE];
    for f in p.factors() {
        amps = amps
            .iter()
            .flat_map(|&a| [a * f[0], a * f[1]])
            .collect();
    }
    Ok(PureState { n: p.n(), amps })
}

pub(crate) fn check_dense(n: usize, limit: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("register must hold at least one qubit".into()));
    }
    if n > limit {
        return Err(Error::DenseLimit { n, limit });
    }
    Ok(())
}

pub(crate) fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    let bad = targets.is_empty()
        || targets.iter().any(|&t| t >= n)
        || targets
            .iter()
            .enumerate()
            .any(|(i, t)| targets[..i].contains(t));
    if bad {
        return Err(Error::InvalidTargets {
            targets: targets.to_vec(),
            n,
        });
    }
    Ok(())
}

/// Applies `gate` to `targets` of an n-qubit amplitude vector. The gate need
/// not be unitary.
pub(crate) fn apply_local_gate(amps: &mut [C64], n: usize, gate: &ComplexMatrix, targets: &[usize]) -> Result<()> {
    let k = targets.len();
    if gate.rows() != 1 << k || gate.cols() != 1 << k {
        return Err(Error::DimensionMismatch {
            expected: 1 << k,
            actual: gate.rows(),
        });
    }
    let offsets = local_offsets(n, targets);
    let mask = offsets.iter().fold(0, |m, &o| m | o);
    let dim = offsets.len();
    let g = gate.as_slice();
    let mut local = vec![ZERO; dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (l, &off) in offsets.iter().enumerate() {
            local[l] = amps[base | off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let row = &g[r * dim..(r + 1) * dim];
            amps[base | off] = row.iter().zip(&local).map(|(a, b)| a * b).sum();
        }
    }
    Ok(())
}

/// Global index offsets for every local basis index over `targets`
/// (targets[0] is the most significant local bit).
fn local_offsets(n: usize, targets: &[usize]) -> Vec<usize> {
    let k = targets.len();
    (0..1usize << k)
        .map(|l| {
            targets
                .iter()
                .enumerate()
                .filter(|(t, _)| (l >> (k - 1 - t)) & 1 == 1)
                .fold(0, |acc, (_, &q)| acc | 1 << (n - 1 - q))
        })
        .collect()
}

fn normalize(amps: &mut [C64]) {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::gates;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn hadamard_on_zero() {
        let s = PureState::zero(1).unwrap().apply_gate(&gates::hadamard(), &[0]).unwrap();
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], h, 1e-15));
        assert!(close(s.amplitudes()[1], h, 1e-15));
    }

    #[test]
    fn cnot_truth_table_control_on_qubit_zero() {
        // |10⟩: qubit 0 = 1, index 0b10
        let s = PureState::basis(2, 0b10).unwrap();
        let out = s.apply_gate(&gates::cnot(), &[0, 1]).unwrap();
        assert!(close(out.amplitudes()[0b11], ONE, 1e-15));
        // reversed targets: qubit 1 is control, |10⟩ unchanged
        let out = s.apply_gate(&gates::cnot(), &[1, 0]).unwrap();
        assert!(close(out.amplitudes()[0b10], ONE, 1e-15));
    }

    #[test]
    fn ry_matches_direct_two_by_two_product() {
        let angle = std::f64::consts::FRAC_PI_2;
        let g = gates::rotation(gates::Axis::Y, angle);
        let s = PureState::zero(1).unwrap().apply_gate(&g, &[0]).unwrap();
        // oracle: explicit matrix-vector product with (1, 0)
        let (sn, cs) = (angle / 2.0).sin_cos();
        let oracle = [C64::new(cs, 0.0), C64::new(-sn, 0.0)];
        assert!(close(s.amplitudes()[0], oracle[0], 1e-15));
        assert!(close(s.amplitudes()[1], oracle[1], 1e-15));
    }

    #[test]
    fn apply_gate_errors() {
        let s = PureState::zero(2).unwrap();
        assert!(matches!(
            s.apply_gate(&gates::cnot(), &[0, 0]),
            Err(Error::InvalidTargets { .. })
        ));
        assert!(matches!(
            s.apply_gate(&gates::cnot(), &[0, 2]),
            Err(Error::InvalidTargets { .. })
        ));
        assert!(matches!(
            s.apply_gate(&gates::hadamard(), &[0, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
        let not_unitary = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(s.apply_gate(&not_unitary, &[0]), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn expectation_basics() {
        let zero = PureState::zero(1).unwrap();
        assert!((zero.expectation(&gates::pauli_z(), &[0]).unwrap() - 1.0).abs() < 1e-15);
        let plus = zero.apply_gate(&gates::hadamard(), &[0]).unwrap();
        assert!(plus.expectation(&gates::pauli_z(), &[0]).unwrap().abs() < 1e-15);
        let bad = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(zero.expectation(&bad, &[0]), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn expectation_matches_full_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = PureState::random(3, &mut rng).unwrap();
        // oracle: tr((𝟙 ⊗ |0⟩⟨0| ⊗ 𝟙) |ψ⟩⟨ψ|) with the full 8×8 operator
        let full = gates::identity()
            .kron(&gates::projector_zero())
            .kron(&gates::identity());
        let rho = ComplexMatrix::outer(s.amplitudes(), s.amplitudes());
        let oracle = full.matmul(&rho).unwrap().trace().re;
        let got = s.expectation(&gates::projector_zero(), &[1]).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn sampling_basis_state_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PureState::basis(2, 0b01).unwrap();
        let shots = s.sample_computational(&mut rng, 1000).unwrap();
        assert!(shots.iter().all(|&b| b == 0b01));
        assert!(s.sample_computational(&mut rng, 0).is_err());
    }

    #[test]
    fn sampling_plus_state_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plus = PureState::zero(1).unwrap().apply_gate(&gates::hadamard(), &[0]).unwrap();
        let shots = plus.sample_computational(&mut rng, 100_000).unwrap();
        let p0 = shots.iter().filter(|&&b| b == 0).count() as f64 / 1e5;
        assert!((p0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampling_matches_born_distribution_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = PureState::random(3, &mut rng).unwrap();
        let shots = 1_000_000;
        let mut counts = [0usize; 8];
        for b in s.sample_computational(&mut rng, shots).unwrap() {
            counts[b] += 1;
        }
        let chi2: f64 = s
            .probabilities()
            .iter()
            .zip(counts)
            .map(|(p, c)| {
                let e = p * shots as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 7 degrees of freedom; 99.9% quantile is 24.32
        assert!(chi2 < 24.32, "chi2 = {chi2}");
    }

    #[test]
    fn dense_from_product_cases() {
        let zeros = dense_from_product(&ProductState::zero(3)).unwrap();
        assert_eq!(zeros, PureState::zero(3).unwrap());

        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let p = ProductState::new(vec![[h, h], [ONE, ZERO]]).unwrap();
        let d = dense_from_product(&p).unwrap();
        let want = [h, ZERO, h, ZERO];
        for (a, b) in d.amplitudes().iter().zip(want) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn dense_from_product_matches_iterated_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let factors: Vec<[C64; 2]> = (0..4)
            .map(|_| {
                let s = PureState::random(1, &mut rng).unwrap();
                [s.amplitudes()[0], s.amplitudes()[1]]
            })
            .collect();
        let p = ProductState::new(factors.clone()).unwrap();
        // oracle: Kronecker of column matrices
        let mut oracle = ComplexMatrix::identity(1);
        for f in &factors {
            let col = ComplexMatrix::from_vec(2, 1, f.to_vec()).unwrap();
            oracle = oracle.kron(&col);
        }
        let d = dense_from_product(&p).unwrap();
        for (i, a) in d.amplitudes().iter().enumerate() {
            assert!(close(*a, oracle[(i, 0)], 1e-14));
        }
    }

    #[test]
    fn dense_limit_enforced() {
        let p = ProductState::zero(25);
        assert!(matches!(dense_from_product(&p), Err(Error::DenseLimit { n: 25, limit: 20 })));
        assert!(matches!(PureState::zero(21), Err(Error::DenseLimit { .. })));
    }

    #[test]
    fn reduced_density_matrix_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = PureState::random(1, &mut rng).unwrap();
        let b = PureState::random(1, &mut rng).unwrap();
        let p = ProductState::new(vec![
            [a.amplitudes()[0], a.amplitudes()[1]],
            [b.amplitudes()[0], b.amplitudes()[1]],
        ])
        .unwrap();
        let d = dense_from_product(&p).unwrap();
        let rho1 = d.reduced_density_matrix(&[1]).unwrap();
        assert!(rho1.max_abs_diff(&p.qubit_density(1)) < 1e-14);
        let swapped = d.reduced_density_matrix(&[1, 0]).unwrap();
        let want = p.qubit_density(1).kron(&p.qubit_density(0));
        assert!(swapped.max_abs_diff(&want) < 1e-14);
    }
}
