//! Real Pauli-coordinate representation of few-qubit operators.
//!
//! An operator ρ on k qubits is stored through its coordinates
//! `c_P = tr(P ρ)` over the 4^k Pauli strings, so ρ = 2^{-k} Σ_P c_P P.
//! Digits are 0 = 𝟙, 1 = X, 2 = Y, 3 = Z, and the first qubit is the most
//! significant base-4 digit. Hermitian operators have real coordinates,
//! unitary conjugation acts by a real transfer matrix, and tracing a qubit out
//! keeps the coordinates whose digit on that qubit is 𝟙.

use crate::error::{Error, Result};
use crate::qsim::gates;
use crate::qsim::{ComplexMatrix, C64, ONE};

/// 2×2 Pauli matrix for a digit.
pub fn pauli_matrix(digit: usize) -> ComplexMatrix {
    match digit {
        0 => gates::identity(),
        1 => gates::pauli_x(),
        2 => gates::pauli_y(),
        3 => gates::pauli_z(),
        _ => panic!("pauli digit out of range"),
    }
}

/// Pauli string matrix for index `idx` over `k` qubits.
pub fn pauli_string(idx: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(1);
    for pos in 0..k {
        m = m.kron(&pauli_matrix(digit(idx, k, pos)));
    }
    m
}

fn digit(idx: usize, k: usize, pos: usize) -> usize {
    (idx >> (2 * (k - 1 - pos))) & 3
}

/// Inserts a zero base-4 digit at bit-pair position `s` (counted from the right).
#[inline]
fn insert_zero(r: usize, s: usize) -> usize {
    let low = r & ((1 << (2 * s)) - 1);
    ((r >> (2 * s)) << (2 * (s + 1))) | low
}

/// Monomial form of a Pauli string: row r has its single nonzero entry at
/// column `cols[r]` with value `vals[r]`.
struct Monomial {
    cols: Vec<usize>,
    vals: Vec<C64>,
}

fn monomial(idx: usize, k: usize) -> Monomial {
    let dim = 1usize << k;
    let mut cols = vec![0usize; dim];
    let mut vals = vec![ONE; dim];
    for (r, (col, val)) in cols.iter_mut().zip(vals.iter_mut()).enumerate() {
        for pos in 0..k {
            let bit = (r >> (k - 1 - pos)) & 1;
            let (cbit, v) = match digit(idx, k, pos) {
                0 => (bit, ONE),
                1 => (bit ^ 1, ONE),
                2 => (bit ^ 1, if bit == 0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) }),
                _ => (bit, if bit == 0 { ONE } else { -ONE }),
            };
            *col |= cbit << (k - 1 - pos);
            *val *= v;
        }
    }
    Monomial { cols, vals }
}

/// tr(P · m) for the Pauli string `idx`.
fn trace_with_pauli(m: &ComplexMatrix, mono: &Monomial) -> C64 {
    // tr(P m) = Σ_r P[r, c_r] m[c_r, r]
    mono.cols
        .iter()
        .zip(&mono.vals)
        .enumerate()
        .map(|(r, (&c, &v))| v * m[(c, r)])
        .sum()
}

/// Pauli coordinates of an operator on a list of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliVector {
    qubits: Vec<usize>,
    coeffs: Vec<f64>,
}

impl PauliVector {
    pub fn new(qubits: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 1 << (2 * qubits.len()) {
            return Err(Error::DimensionMismatch {
                expected: 1 << (2 * qubits.len()),
                actual: coeffs.len(),
            });
        }
        Ok(Self { qubits, coeffs })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Coordinates of a Hermitian matrix (imaginary parts dropped).
    pub fn from_matrix(m: &ComplexMatrix, qubits: Vec<usize>) -> Result<Self> {
        let k = qubits.len();
        if m.rows() != 1 << k || m.cols() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                actual: m.rows(),
            });
        }
        let coeffs = (0..1usize << (2 * k))
            .map(|idx| trace_with_pauli(m, &monomial(idx, k)).re)
            .collect();
        Ok(Self { qubits, coeffs })
    }

    /// Coordinates of ⊗_q ρ_q given each qubit's 4 coordinates.
    pub fn from_local_factors(qubits: Vec<usize>, factors: &[[f64; 4]]) -> Self {
        let mut coeffs = vec![1.0];
        for f in factors {
            coeffs = coeffs.iter().flat_map(|&c| f.map(|x| c * x)).collect();
        }
        Self { qubits, coeffs }
    }

    /// Reconstructs 2^{-k} Σ_P c_P P.
    pub fn to_matrix(&self) -> ComplexMatrix {
        let k = self.qubits.len();
        let dim = 1usize << k;
        let scale = 1.0 / dim as f64;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mono = monomial(idx, k);
            for (r, (&col, &v)) in mono.cols.iter().zip(&mono.vals).enumerate() {
                m[(r, col)] += v * (c * scale);
            }
        }
        m
    }

    /// tr(obs · ρ) for an operator on the same qubits, in the same order.
    pub fn expectation(&self, obs: &PauliVector) -> Result<f64> {
        if obs.qubits != self.qubits {
            return Err(Error::SupportMismatch(format!(
                "operator on {:?}, state on {:?}",
                obs.qubits, self.qubits
            )));
        }
        let dot: f64 = self.coeffs.iter().zip(&obs.coeffs).map(|(a, b)| a * b).sum();
        Ok(dot / (1u64 << self.qubits.len()) as f64)
    }

    /// Partial trace over the qubit at `pos`.
    pub fn trace_out(&self, pos: usize) -> Self {
        let k = self.qubits.len();
        let s = k - 1 - pos;
        let coeffs = (0..1usize << (2 * (k - 1)))
            .map(|r| self.coeffs[insert_zero(r, s)])
            .collect();
        let mut qubits = self.qubits.clone();
        qubits.remove(pos);
        Self { qubits, coeffs }
    }

    /// Conjugates by a two-qubit unitary on positions (`p0`, `p1`) and traces
    /// out whichever of the two positions has its `keep` flag unset.
    pub fn apply_two_qubit(&self, ptm: &TransferMatrix, p0: usize, p1: usize, keep: (bool, bool)) -> Self {
        let k = self.qubits.len();
        let s0 = k - 1 - p0;
        let s1 = k - 1 - p1;
        let (lo, hi) = if s0 < s1 { (s0, s1) } else { (s1, s0) };

        let mut qubits = Vec::with_capacity(k);
        for (pos, &q) in self.qubits.iter().enumerate() {
            if (pos == p0 && !keep.0) || (pos == p1 && !keep.1) {
                continue;
            }
            qubits.push(q);
        }
        let k_out = qubits.len();
        let out_pos = |q: usize| qubits.iter().position(|&x| x == q);
        let t0 = keep.0.then(|| k_out - 1 - out_pos(self.qubits[p0]).unwrap());
        let t1 = keep.1.then(|| k_out - 1 - out_pos(self.qubits[p1]).unwrap());
        let mut kept_s: Vec<usize> = [t0, t1].into_iter().flatten().collect();
        kept_s.sort_unstable();

        let in_off: Vec<usize> = (0..16)
            .map(|q| ((q >> 2) << (2 * s0)) | ((q & 3) << (2 * s1)))
            .collect();
        // output rows actually produced and their offsets
        let rows: Vec<(usize, usize)> = (0..16)
            .filter(|&p| (keep.0 || p >> 2 == 0) && (keep.1 || p & 3 == 0))
            .map(|p| {
                let off = t0.map_or(0, |t| (p >> 2) << (2 * t)) | t1.map_or(0, |t| (p & 3) << (2 * t));
                (p, off)
            })
            .collect();

        let mut coeffs = vec![0.0; 1 << (2 * k_out)];
        let mut local = [0.0f64; 16];
        for r in 0..1usize << (2 * (k - 2)) {
            let base_in = insert_zero(insert_zero(r, lo), hi);
            let base_out = kept_s.iter().fold(r, |acc, &s| insert_zero(acc, s));
            let mut any = false;
            for (l, &off) in local.iter_mut().zip(&in_off) {
                *l = self.coeffs[base_in | off];
                any |= *l != 0.0;
            }
            if !any {
                continue;
            }
            for &(p, off) in &rows {
                let row = &ptm.entries[p * 16..(p + 1) * 16];
                coeffs[base_out | off] = row.iter().zip(&local).map(|(a, b)| a * b).sum();
            }
        }
        Self { qubits, coeffs }
    }
}

/// Pauli transfer matrix R_{PQ} = ¼ tr(P U Q U†) of a two-qubit unitary.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    entries: Vec<f64>,
}

impl TransferMatrix {
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        if u.rows() != 4 || u.cols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: u.rows(),
            });
        }
        let udag = u.adjoint();
        let monos: Vec<Monomial> = (0..16).map(|i| monomial(i, 2)).collect();
        let mut entries = vec![0.0; 256];
        for (q, mono_q) in monos.iter().enumerate() {
            // U Q U†
            let mut uq = ComplexMatrix::zeros(4, 4);
            for i in 0..4 {
                for (r, (&c, &v)) in mono_q.cols.iter().zip(&mono_q.vals).enumerate() {
                    uq[(i, c)] += u[(i, r)] * v;
                }
            }
            let conj = uq.matmul(&udag)?;
            for (p, mono_p) in monos.iter().enumerate() {
                entries[p * 16 + q] = 0.25 * trace_with_pauli(&conj, mono_p).re;
            }
        }
        Ok(Self { entries })
    }

    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.entries[p * 16 + q]
    }
}

/// Coordinates (tr(𝟙ρ), tr(Xρ), tr(Yρ), tr(Zρ)) of a single-qubit pure state.
pub fn qubit_coordinates(amp: [C64; 2]) -> [f64; 4] {
    let [a, b] = amp;
    let ab = a.conj() * b;
    [
        a.norm_sqr() + b.norm_sqr(),
        2.0 * ab.re,
        2.0 * ab.im,
        a.norm_sqr() - b.norm_sqr(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::PureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_density(k: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let s = PureState::random(k, rng).unwrap();
        ComplexMatrix::outer(s.amplitudes(), s.amplitudes())
    }

    #[test]
    fn matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(3, &mut rng);
        let v = PauliVector::from_matrix(&rho, vec![0, 1, 2]).unwrap();
        assert!((v.coeffs()[0] - 1.0).abs() < 1e-14);
        assert!(v.to_matrix().max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn pauli_string_matches_monomial() {
        for idx in 0..16 {
            let m = pauli_string(idx, 2);
            let back = PauliVector::from_matrix(&m, vec![0, 1]).unwrap();
            for (j, &c) in back.coeffs().iter().enumerate() {
                let want = if j == idx { 4.0 } else { 0.0 };
                assert!((c - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn qubit_coordinates_match_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = PureState::random(1, &mut rng).unwrap();
        let amp = [s.amplitudes()[0], s.amplitudes()[1]];
        let rho = ComplexMatrix::outer(&amp, &amp);
        let v = PauliVector::from_matrix(&rho, vec![0]).unwrap();
        for (a, b) in v.coeffs().iter().zip(qubit_coordinates(amp)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_out_matches_dense_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = PureState::random(3, &mut rng).unwrap();
        let rho = ComplexMatrix::outer(s.amplitudes(), s.amplitudes());
        let v = PauliVector::from_matrix(&rho, vec![0, 1, 2]).unwrap();
        let reduced = v.trace_out(1);
        assert_eq!(reduced.qubits(), &[0, 2]);
        let want = s.reduced_density_matrix(&[0, 2]).unwrap();
        assert!(reduced.to_matrix().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn two_qubit_conjugation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = PureState::random(4, &mut rng).unwrap();
        let u = crate::ansatz::BrickTemplate::default()
            .unitary(&[0.3, -1.2, 2.0, 0.7])
            .unwrap();
        let ptm = TransferMatrix::from_unitary(&u).unwrap();
        let rho = ComplexMatrix::outer(s.amplitudes(), s.amplitudes());
        let v = PauliVector::from_matrix(&rho, vec![0, 1, 2, 3]).unwrap();
        for (p0, p1) in [(0, 1), (3, 1), (2, 0)] {
            let evolved = s.apply_gate(&u, &[p0, p1]).unwrap();
            let full = v.apply_two_qubit(&ptm, p0, p1, (true, true));
            let want = ComplexMatrix::outer(evolved.amplitudes(), evolved.amplitudes());
            assert!(full.to_matrix().max_abs_diff(&want) < 1e-13);
            for keep in [(false, true), (true, false), (false, false)] {
                let traced = v.apply_two_qubit(&ptm, p0, p1, keep);
                let support: Vec<usize> = (0..4)
                    .filter(|&q| !((q == p0 && !keep.0) || (q == p1 && !keep.1)))
                    .collect();
                assert_eq!(traced.qubits(), support.as_slice());
                let want = evolved.reduced_density_matrix(&support).unwrap();
                assert!(traced.to_matrix().max_abs_diff(&want) < 1e-13, "{p0} {p1} {keep:?}");
            }
        }
    }

    #[test]
    fn transfer_matrix_of_unitary_is_orthogonal_and_unital() {
        let u = crate::qsim::gates::cnot();
        let ptm = TransferMatrix::from_unitary(&u).unwrap();
        assert!((ptm.entry(0, 0) - 1.0).abs() < 1e-15);
        for p in 0..16 {
            for q in 0..16 {
                let dot: f64 = (0..16).map(|r| ptm.entry(r, p) * ptm.entry(r, q)).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14);
            }
        }
    }
}
