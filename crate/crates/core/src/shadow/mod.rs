//! Classical shadows from random single-qubit Pauli-basis measurements.
//!
//! Each record stores, per qubit, which basis rotation U ∈ {𝟙, H, HS†} was
//! applied and the measured bit u. The single-qubit snapshot is
//! F(U†|u⟩⟨u|U) = 3·U†|u⟩⟨u|U − 𝟙, and a record's snapshot is the tensor
//! product of these factors. Averages over records restricted to a subregister
//! give the reduced shadow state used by every estimate.

mod io;
mod planner;

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightcone::pauli::PauliVector;
use crate::lightcone::ReducedOperator;
use crate::qsim::gates;
use crate::qsim::{qubit_bit, BornSampler, ComplexMatrix, ProductState, PureState, C64};
use crate::rng::{stream, SimRng};

pub use io::{read_shadow_file, write_shadow_file, ShadowSetJson, SHADOW_MAGIC, SHADOW_VERSION};
pub use planner::{plan_samples, sample_bound, SampleBound, SamplePlan};

/// Measurement basis of one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z = 0,
    X = 1,
    Y = 2,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Basis::Z),
            1 => Some(Basis::X),
            2 => Some(Basis::Y),
            _ => None,
        }
    }

    /// Rotation applied before the computational-basis measurement.
    pub fn rotation(self) -> ComplexMatrix {
        match self {
            Basis::Z => gates::identity(),
            Basis::X => gates::hadamard(),
            Basis::Y => gates::hadamard().matmul(&gates::phase_s_dagger()).expect("2x2"),
        }
    }

    /// Pauli digit (1 = X, 2 = Y, 3 = Z) of the measured observable.
    pub fn pauli_digit(self) -> usize {
        match self {
            Basis::Z => 3,
            Basis::X => 1,
            Basis::Y => 2,
        }
    }
}

/// Packs a (basis, outcome) pair into one code in 0..6.
#[inline]
pub fn encode(basis: Basis, outcome: bool) -> u8 {
    (basis as u8) << 1 | outcome as u8
}

#[inline]
pub fn decode(code: u8) -> (Basis, bool) {
    (Basis::from_code(code >> 1).expect("valid code"), code & 1 == 1)
}

/// F(U†|u⟩⟨u|U) = 3·U†|u⟩⟨u|U − 𝟙.
pub fn single_shadow_factor(basis: Basis, outcome: bool) -> ComplexMatrix {
    let u = basis.rotation();
    let mut ket = [C64::new(0.0, 0.0); 2];
    ket[outcome as usize] = C64::new(1.0, 0.0);
    let udag = u.adjoint();
    let v = udag.matvec(&ket).expect("2x2");
    let proj = ComplexMatrix::outer(&v, &v);
    proj.scale(C64::new(3.0, 0.0))
        .sub(&ComplexMatrix::identity(2))
        .expect("2x2")
}

/// Pauli coordinates (𝟙, X, Y, Z) of a single-qubit snapshot factor.
#[inline]
fn factor_coordinates(code: u8) -> (usize, f64) {
    let (basis, outcome) = decode(code);
    (basis.pauli_digit(), if outcome { -3.0 } else { 3.0 })
}

/// One measurement record: per-qubit basis and outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowRecord {
    pub bases: Vec<Basis>,
    pub outcomes: Vec<bool>,
}

/// T shadow records of an n-qubit source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowSet {
    n: usize,
    seed: u64,
    codes: Vec<u8>,
}

impl ShadowSet {
    pub fn from_records(n: usize, seed: u64, records: &[ShadowRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParameter("a shadow set needs at least one record".into()));
        }
        let mut codes = Vec::with_capacity(n * records.len());
        for r in records {
            if r.bases.len() != n || r.outcomes.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: r.bases.len().min(r.outcomes.len()),
                });
            }
            codes.extend(r.bases.iter().zip(&r.outcomes).map(|(&b, &o)| encode(b, o)));
        }
        Ok(Self { n, seed, codes })
    }

    pub(crate) fn from_codes(n: usize, seed: u64, codes: Vec<u8>) -> Result<Self> {
        if n == 0 || codes.is_empty() || !codes.len().is_multiple_of(n) || codes.iter().any(|&c| c >= 6) {
            return Err(Error::ShadowFormat("inconsistent record codes".into()));
        }
        Ok(Self { n, seed, codes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of records T.
    pub fn len(&self) -> usize {
        self.codes.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Raw codes of record `j` (see [`encode`]).
    pub fn codes(&self, j: usize) -> &[u8] {
        &self.codes[j * self.n..(j + 1) * self.n]
    }

    pub fn record(&self, j: usize) -> ShadowRecord {
        let (bases, outcomes) = self.codes(j).iter().map(|&c| decode(c)).unzip();
        ShadowRecord { bases, outcomes }
    }

    pub fn records(&self) -> impl Iterator<Item = &[u8]> {
        self.codes.chunks_exact(self.n)
    }

    /// Concatenation of two sets over the same register.
    pub fn concat(&self, other: &ShadowSet) -> Result<ShadowSet> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let mut codes = self.codes.clone();
        codes.extend_from_slice(&other.codes);
        Ok(ShadowSet {
            n: self.n,
            seed: self.seed,
            codes,
        })
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        if support.is_empty() {
            return Err(Error::SupportMismatch("empty support".into()));
        }
        if support.iter().any(|&q| q >= self.n) || support.iter().enumerate().any(|(i, q)| support[..i].contains(q)) {
            return Err(Error::InvalidTargets {
                targets: support.to_vec(),
                n: self.n,
            });
        }
        Ok(())
    }

    /// Occurrence counts of local patterns on `support`, keyed base-6.
    fn pattern_counts(&self, support: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; 6usize.pow(support.len() as u32)];
        for rec in self.records() {
            let key = support.iter().fold(0usize, |acc, &q| acc * 6 + rec[q] as usize);
            counts[key] += 1;
        }
        counts
    }

    fn use_counting(&self, k: usize) -> bool {
        (k as u32) < 12 && 6usize.pow(k as u32) < self.len()
    }
}

/// (1/T) Σ_j ⊗_{q∈A} F(record_j at q).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedShadowState {
    pub support: Vec<usize>,
    pub matrix: ComplexMatrix,
    pub samples: usize,
}

/// Averages the snapshots of `set` restricted to `support` (axes in the given order).
pub fn reduce(set: &ShadowSet, support: &[usize]) -> Result<ReducedShadowState> {
    set.check_support(support)?;
    let k = support.len();
    let factors: Vec<ComplexMatrix> = (0..6u8).map(|c| {
        let (b, o) = decode(c);
        single_shadow_factor(b, o)
    }).collect();
    let snapshot = |codes: &mut dyn Iterator<Item = u8>| {
        codes.fold(ComplexMatrix::identity(1), |acc, c| acc.kron(&factors[c as usize]))
    };
    let dim = 1usize << k;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let mut add = |m: &ComplexMatrix, w: f64| {
        for (a, b) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *a += b * w;
        }
    };
    if set.use_counting(k) {
        for (key, &count) in set.pattern_counts(support).iter().enumerate() {
            if count == 0 {
                continue;
            }
            let mut digits: Vec<u8> = (0..k).map(|i| ((key / 6usize.pow((k - 1 - i) as u32)) % 6) as u8).collect();
            let m = snapshot(&mut digits.drain(..));
            add(&m, count as f64);
        }
    } else {
        for rec in set.records() {
            let m = snapshot(&mut support.iter().map(|&q| rec[q]));
            add(&m, 1.0);
        }
    }
    let t = set.len();
    Ok(ReducedShadowState {
        support: support.to_vec(),
        matrix: acc.scale(C64::new(1.0 / t as f64, 0.0)),
        samples: t,
    })
}

/// Sparse Pauli coordinates of one record on `k` positions: 2^k entries.
fn record_coordinates(codes: impl Iterator<Item = u8>, k: usize, idx: &mut Vec<usize>, val: &mut Vec<f64>) {
    idx.clear();
    val.clear();
    idx.push(0);
    val.push(1.0);
    for (pos, code) in codes.enumerate() {
        let (digit, coeff) = factor_coordinates(code);
        let shift = 2 * (k - 1 - pos);
        let len = idx.len();
        for i in 0..len {
            idx.push(idx[i] | digit << shift);
            val.push(val[i] * coeff);
        }
    }
}

/// Reduced shadow state on `support` in Pauli coordinates (see
/// [`crate::lightcone::pauli`]). Equivalent to [`reduce`] without forming
/// the matrix: each record contributes 2^k nonzero coordinates.
pub fn reduce_pauli(set: &ShadowSet, support: &[usize]) -> Result<PauliVector> {
    set.check_support(support)?;
    let k = support.len();
    let mut coeffs = vec![0.0; 1 << (2 * k)];
    let (mut idx, mut val) = (Vec::new(), Vec::new());
    if set.use_counting(k) {
        for (key, &count) in set.pattern_counts(support).iter().enumerate() {
            if count == 0 {
                continue;
            }
            let digits = (0..k).map(|i| ((key / 6usize.pow((k - 1 - i) as u32)) % 6) as u8);
            record_coordinates(digits, k, &mut idx, &mut val);
            for (&i, &v) in idx.iter().zip(&val) {
                coeffs[i] += v * count as f64;
            }
        }
    } else {
        for rec in set.records() {
            record_coordinates(support.iter().map(|&q| rec[q]), k, &mut idx, &mut val);
            for (&i, &v) in idx.iter().zip(&val) {
                coeffs[i] += v;
            }
        }
    }
    let t = set.len() as f64;
    coeffs.iter_mut().for_each(|c| *c /= t);
    PauliVector::new(support.to_vec(), coeffs)
}

/// tr(W̃ · ρ̂^{(j)}|_A) for every record j (unweighted).
pub fn per_record_estimates(set: &ShadowSet, op: &ReducedOperator) -> Result<Vec<f64>> {
    set.check_support(&op.support)?;
    let k = op.support.len();
    let w = PauliVector::from_matrix(&op.matrix, op.support.clone())?;
    let scale = 1.0 / (1u64 << k) as f64;
    let (mut idx, mut val) = (Vec::new(), Vec::new());
    Ok(set
        .records()
        .map(|rec| {
            record_coordinates(op.support.iter().map(|&q| rec[q]), k, &mut idx, &mut val);
            idx.iter().zip(&val).map(|(&i, &v)| v * w.coeffs()[i]).sum::<f64>() * scale
        })
        .collect())
}

/// A shadow set with its reduced states cached by support.
#[derive(Clone, Debug)]
pub struct ShadowCache {
    set: ShadowSet,
    matrices: HashMap<Vec<usize>, ReducedShadowState>,
    pauli: HashMap<Vec<usize>, PauliVector>,
}

impl ShadowCache {
    pub fn new(set: ShadowSet) -> Self {
        Self {
            set,
            matrices: HashMap::new(),
            pauli: HashMap::new(),
        }
    }

    pub fn set(&self) -> &ShadowSet {
        &self.set
    }

    /// Computes reduced matrices for the given supports (once each).
    pub fn prepare_matrices<'a>(&mut self, supports: impl IntoIterator<Item = &'a [usize]>) -> Result<()> {
        for s in supports {
            if !self.matrices.contains_key(s) {
                let r = reduce(&self.set, s)?;
                self.matrices.insert(s.to_vec(), r);
            }
        }
        Ok(())
    }

    /// Computes reduced Pauli coordinates for the given supports (once each).
    pub fn prepare_pauli<'a>(&mut self, supports: impl IntoIterator<Item = &'a [usize]>) -> Result<()> {
        for s in supports {
            if !self.pauli.contains_key(s) {
                let r = reduce_pauli(&self.set, s)?;
                self.pauli.insert(s.to_vec(), r);
            }
        }
        Ok(())
    }

    pub fn reduced(&self, support: &[usize]) -> Option<&ReducedShadowState> {
        self.matrices.get(support)
    }

    pub fn reduced_pauli(&self, support: &[usize]) -> Option<&PauliVector> {
        self.pauli.get(support)
    }

    /// Σ_i weight_i · tr(W̃_i · ρ̂_T|_{A_i}) from cached reduced matrices.
    pub fn estimate(&self, ops: &[ReducedOperator]) -> Result<f64> {
        let mut total = 0.0;
        for op in ops {
            let rho = self.matrices.get(&op.support).ok_or_else(|| {
                Error::SupportMismatch(format!("no reduced shadow cached for {:?}", op.support))
            })?;
            total += op.weight * op.matrix.trace_product(&rho.matrix)?.re;
        }
        Ok(total)
    }
}

/// Anything shadow records can be drawn from.
pub trait ShadowSource {
    fn num_qubits(&self) -> usize;

    /// A sampler writing one record's codes at a time.
    fn record_sampler(&self) -> Result<Box<dyn RecordSampler + '_>>;
}

pub trait RecordSampler: Send {
    fn sample_into(&mut self, rng: &mut SimRng, codes: &mut [u8]);
}

fn random_bases(rng: &mut SimRng, n: usize) -> Vec<Basis> {
    (0..n).map(|_| Basis::ALL[rng.gen_range(0..3)]).collect()
}

const PATTERN_CACHE_LIMIT: usize = 10;

struct DenseSampler<'a> {
    state: &'a PureState,
    rotations: [ComplexMatrix; 3],
    cache: HashMap<usize, BornSampler>,
}

impl DenseSampler<'_> {
    fn rotated_distribution(&self, bases: &[Basis]) -> BornSampler {
        let mut s = self.state.clone();
        for (q, &b) in bases.iter().enumerate() {
            if b != Basis::Z {
                s.apply_gate_mut(&self.rotations[b as usize], &[q]).expect("valid qubit");
            }
        }
        BornSampler::new(&s.probabilities())
    }
}

impl RecordSampler for DenseSampler<'_> {
    fn sample_into(&mut self, rng: &mut SimRng, codes: &mut [u8]) {
        let n = self.state.n();
        let bases = random_bases(rng, n);
        let outcome = if n <= PATTERN_CACHE_LIMIT {
            let key = bases.iter().fold(0usize, |acc, &b| acc * 3 + b as usize);
            if !self.cache.contains_key(&key) {
                let dist = self.rotated_distribution(&bases);
                self.cache.insert(key, dist);
            }
            self.cache[&key].sample(rng)
        } else {
            self.rotated_distribution(&bases).sample(rng)
        };
        for (q, (c, &b)) in codes.iter_mut().zip(&bases).enumerate() {
            *c = encode(b, qubit_bit(outcome, n, q) == 1);
        }
    }
}

impl ShadowSource for PureState {
    fn num_qubits(&self) -> usize {
        self.n()
    }

    fn record_sampler(&self) -> Result<Box<dyn RecordSampler + '_>> {
        Ok(Box::new(DenseSampler {
            state: self,
            rotations: Basis::ALL.map(Basis::rotation),
            cache: HashMap::new(),
        }))
    }
}

struct ProductSampler {
    /// Prob(outcome 0) per qubit and basis.
    p_zero: Vec<[f64; 3]>,
}

impl RecordSampler for ProductSampler {
    fn sample_into(&mut self, rng: &mut SimRng, codes: &mut [u8]) {
        for (c, p) in codes.iter_mut().zip(&self.p_zero) {
            let b = Basis::ALL[rng.gen_range(0..3)];
            let one = rng.gen::<f64>() >= p[b as usize];
            *c = encode(b, one);
        }
    }
}

impl ShadowSource for ProductState {
    fn num_qubits(&self) -> usize {
        self.n()
    }

    fn record_sampler(&self) -> Result<Box<dyn RecordSampler + '_>> {
        let rotations = Basis::ALL.map(Basis::rotation);
        let p_zero = self
            .factors()
            .iter()
            .map(|f| {
                rotations.each_ref().map(|u| {
                    let v = u.matvec(f).expect("2x2");
                    v[0].norm_sqr()
                })
            })
            .collect();
        Ok(Box::new(ProductSampler { p_zero }))
    }
}

const RECORDS_PER_STREAM: usize = 4096;

/// Draws T records from `source`. Records are generated in fixed-size blocks,
/// each with its own stream derived from `seed`, so the result does not depend
/// on the number of worker threads.
pub fn sample_shadows<S: ShadowSource + Sync + ?Sized>(source: &S, t: usize, seed: u64) -> Result<ShadowSet> {
    if t == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    let n = source.num_qubits();
    let mut codes = vec![0u8; n * t];
    codes
        .par_chunks_mut(n * RECORDS_PER_STREAM)
        .enumerate()
        .try_for_each(|(block, chunk)| -> Result<()> {
            let mut rng = stream(seed, "shadow", block as u64);
            let mut sampler = source.record_sampler()?;
            for rec in chunk.chunks_exact_mut(n) {
                sampler.sample_into(&mut rng, rec);
            }
            Ok(())
        })?;
    ShadowSet::from_codes(n, seed, codes)
}
