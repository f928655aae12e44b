//! Heisenberg-picture reduction of local observables through the brick
//! circuit.
//!
//! For a k-local term O, W_O(θ) = U(θ)† O U(θ) acts only on the qubits reached
//! by tracing O's support backward through the layout; every brick outside that
//! cone cancels against its adjoint. [`compute_lightcone`] finds the cone once
//! per (term, layout), [`contract`] builds the reduced operator W̃ on it, and
//! [`ConePropagator`] evaluates tr(W̃ ρ|_A) directly in Pauli coordinates,
//! shrinking the register layer by layer.

pub mod pauli;

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, ParamTensor};
use crate::error::{Error, Result};
use crate::qsim::gates;
use crate::qsim::{apply_local_gate, ComplexMatrix, ProductState, C64, ZERO};
use pauli::{qubit_coordinates, PauliVector, TransferMatrix};

/// Weighted k-local Hermitian term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalObservable {
    support: Vec<usize>,
    matrix: ComplexMatrix,
    weight: f64,
}

impl LocalObservable {
    pub fn new(support: Vec<usize>, matrix: ComplexMatrix, weight: f64) -> Result<Self> {
        if support.is_empty() || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::SupportMismatch(format!(
                "support {support:?} must be non-empty, sorted and distinct"
            )));
        }
        let dim = 1usize << support.len();
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.rows(),
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev >= 1e-12 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        if !weight.is_finite() {
            return Err(Error::InvalidParameter("observable weight must be finite".into()));
        }
        Ok(Self {
            support,
            matrix,
            weight,
        })
    }

    /// weight · |0⟩⟨0| on qubit `q`.
    pub fn projector_zero(q: usize, weight: f64) -> Self {
        Self {
            support: vec![q],
            matrix: gates::projector_zero(),
            weight,
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// ‖weight · matrix‖∞.
    pub fn weighted_norm(&self) -> f64 {
        self.weight.abs() * self.matrix.spectral_norm().expect("hermitian by construction")
    }

    fn pauli(&self) -> PauliVector {
        PauliVector::from_matrix(&self.matrix, self.support.clone()).expect("dimension checked")
    }
}

/// O = Σ_i O_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSum {
    terms: Vec<LocalObservable>,
}

impl ObservableSum {
    pub fn new(terms: Vec<LocalObservable>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("observable sum needs at least one term".into()));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[LocalObservable] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// max_i ‖O_i‖∞ with weights folded in.
    pub fn max_norm(&self) -> f64 {
        self.terms.iter().map(LocalObservable::weighted_norm).fold(0.0, f64::max)
    }

    /// Largest term support size.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|t| t.support.len()).max().unwrap_or(0)
    }
}

/// Backward lightcone of a support through the brick layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lightcone {
    /// Sorted subregister A.
    qubits: Vec<usize>,
    /// Placement indices of the contributing bricks, last layer first.
    bricks: Vec<usize>,
    /// `frontiers[j]`: sorted qubits carried into layer j (forward order);
    /// `frontiers[d]` is the observable's support.
    frontiers: Vec<Vec<usize>>,
}

impl Lightcone {
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn bricks(&self) -> &[usize] {
        &self.bricks
    }

    pub fn frontiers(&self) -> &[Vec<usize>] {
        &self.frontiers
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }
}

/// Traces `support` backward through the ansatz layout.
pub fn compute_lightcone(support: &[usize], ansatz: &Ansatz) -> Result<Lightcone> {
    let n = ansatz.n();
    if support.is_empty() || support.iter().any(|&q| q >= n) {
        return Err(Error::InvalidTargets {
            targets: support.to_vec(),
            n,
        });
    }
    let d = ansatz.depth();
    let mut inside = vec![false; n];
    for &q in support {
        inside[q] = true;
    }
    let mut frontiers = vec![Vec::new(); d + 1];
    frontiers[d] = sorted_members(&inside);
    let mut bricks = Vec::new();
    for layer in (0..d).rev() {
        let mut grown = inside.clone();
        for (idx, pl) in ansatz.placements().iter().enumerate() {
            if pl.layer != layer {
                continue;
            }
            let (a, b) = pl.pair;
            if inside[a] || inside[b] {
                grown[a] = true;
                grown[b] = true;
                bricks.push(idx);
            }
        }
        inside = grown;
        frontiers[layer] = sorted_members(&inside);
    }
    Ok(Lightcone {
        qubits: frontiers[0].clone(),
        bricks,
        frontiers,
    })
}

fn sorted_members(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(q, _)| q).collect()
}

/// W̃ on the cone's qubits (ascending order), without the term weight.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedOperator {
    pub support: Vec<usize>,
    pub matrix: ComplexMatrix,
    pub weight: f64,
}

/// Contracts the observable with the cone's bricks: W̃ = Ṽ† O Ṽ.
pub fn contract(obs: &LocalObservable, theta: &ParamTensor, ansatz: &Ansatz, cone: &Lightcone) -> Result<ReducedOperator> {
    if cone.frontiers.last().map(Vec::as_slice) != Some(obs.support()) {
        return Err(Error::SupportMismatch(format!(
            "cone was built for {:?}, observable acts on {:?}",
            cone.frontiers.last(),
            obs.support()
        )));
    }
    ansatz.check_params(theta)?;
    let k = cone.qubits.len();
    let dim = 1usize << k;
    let pos = |q: usize| cone.qubits.binary_search(&q).expect("brick qubit inside cone");

    let mut forward: Vec<usize> = cone.bricks.clone();
    forward.reverse();
    let placements = ansatz.placements();
    let gates: Vec<(ComplexMatrix, [usize; 2])> = forward
        .iter()
        .map(|&idx| {
            let pl = placements[idx];
            let u = ansatz.template().unitary(theta.brick(pl.block, pl.layer))?;
            Ok((u, [pos(pl.pair.0), pos(pl.pair.1)]))
        })
        .collect::<Result<_>>()?;
    let obs_targets: Vec<usize> = obs.support().iter().map(|&q| pos(q)).collect();

    // columns of Ṽ, then of O Ṽ
    let mut v_cols: Vec<Vec<C64>> = (0..dim)
        .map(|c| {
            let mut e = vec![ZERO; dim];
            e[c] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    for col in v_cols.iter_mut() {
        for (u, t) in &gates {
            apply_local_gate(col, k, u, t)?;
        }
    }
    let mut ov_cols = v_cols.clone();
    for col in ov_cols.iter_mut() {
        apply_local_gate(col, k, obs.matrix(), &obs_targets)?;
    }
    let mut w = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            w[(r, c)] = v_cols[r].iter().zip(&ov_cols[c]).map(|(a, b)| a.conj() * b).sum();
        }
    }
    Ok(ReducedOperator {
        support: cone.qubits.clone(),
        matrix: w,
        weight: obs.weight(),
    })
}

/// Cached cones for every term of an observable sum under one ansatz.
#[derive(Clone, Debug)]
pub struct ConeSet {
    ansatz: Ansatz,
    observable: ObservableSum,
    cones: Vec<Lightcone>,
    obs_pauli: Vec<PauliVector>,
}

impl ConeSet {
    pub fn new(observable: ObservableSum, ansatz: Ansatz) -> Result<Self> {
        let cones = observable
            .terms()
            .iter()
            .map(|t| compute_lightcone(t.support(), &ansatz))
            .collect::<Result<Vec<_>>>()?;
        let obs_pauli = observable.terms().iter().map(LocalObservable::pauli).collect();
        Ok(Self {
            ansatz,
            observable,
            cones,
            obs_pauli,
        })
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn observable(&self) -> &ObservableSum {
        &self.observable
    }

    pub fn cones(&self) -> &[Lightcone] {
        &self.cones
    }

    /// Reduced operators W̃_i(θ) for every term.
    pub fn contract_all(&self, theta: &ParamTensor) -> Result<Vec<ReducedOperator>> {
        self.observable
            .terms()
            .iter()
            .zip(&self.cones)
            .map(|(t, c)| contract(t, theta, &self.ansatz, c))
            .collect()
    }

    /// Per-θ propagator over all terms.
    pub fn propagator(&self, theta: &ParamTensor) -> Result<ConePropagator<'_>> {
        self.ansatz.check_params(theta)?;
        let mut ptms: Vec<Option<TransferMatrix>> = vec![None; self.ansatz.placements().len()];
        for cone in &self.cones {
            for &idx in &cone.bricks {
                if ptms[idx].is_none() {
                    let pl = self.ansatz.placements()[idx];
                    let u = self.ansatz.template().unitary(theta.brick(pl.block, pl.layer))?;
                    ptms[idx] = Some(TransferMatrix::from_unitary(&u)?);
                }
            }
        }
        Ok(ConePropagator { set: self, ptms })
    }

    /// Σ_i weight_i · tr(W̃_i(θ) · ρ|_{A_i}) for a product input, any n.
    pub fn evaluate_product(&self, theta: &ParamTensor, input: &ProductState) -> Result<f64> {
        if input.n() != self.ansatz.n() {
            return Err(Error::DimensionMismatch {
                expected: self.ansatz.n(),
                actual: input.n(),
            });
        }
        let prop = self.propagator(theta)?;
        let mut total = 0.0;
        for (i, cone) in self.cones.iter().enumerate() {
            let reduced = product_coordinates(input, cone.qubits());
            total += prop.term_expectation(i, &reduced)?;
        }
        Ok(total)
    }
}

/// Pauli coordinates of a product state restricted to `qubits`.
pub fn product_coordinates(input: &ProductState, qubits: &[usize]) -> PauliVector {
    let factors: Vec<[f64; 4]> = qubits.iter().map(|&q| qubit_coordinates(input.factor(q))).collect();
    PauliVector::from_local_factors(qubits.to_vec(), &factors)
}

/// Brick transfer matrices for one θ, shared by all terms of a [`ConeSet`].
pub struct ConePropagator<'a> {
    set: &'a ConeSet,
    ptms: Vec<Option<TransferMatrix>>,
}

impl ConePropagator<'_> {
    /// Pushes an operator on cone `term` forward through its bricks, tracing
    /// out qubits as they leave the cone; returns it on the term's support.
    pub fn propagate(&self, term: usize, input: &PauliVector) -> Result<PauliVector> {
        let cone = &self.set.cones[term];
        if input.qubits() != cone.qubits() {
            return Err(Error::SupportMismatch(format!(
                "reduced input on {:?}, cone is {:?}",
                input.qubits(),
                cone.qubits()
            )));
        }
        let placements = self.set.ansatz.placements();
        let mut state = input.clone();
        for (layer, next) in cone.frontiers.iter().skip(1).enumerate() {
            let layer_bricks: Vec<usize> = cone
                .bricks
                .iter()
                .copied()
                .filter(|&b| placements[b].layer == layer)
                .collect();
            // qubits leaving the cone without a brick at this layer
            let touched: Vec<usize> = layer_bricks
                .iter()
                .flat_map(|&b| [placements[b].pair.0, placements[b].pair.1])
                .collect();
            let idle_drops: Vec<usize> = state
                .qubits()
                .iter()
                .copied()
                .filter(|q| !touched.contains(q) && next.binary_search(q).is_err())
                .collect();
            for q in idle_drops {
                let p = state.qubits().iter().position(|&x| x == q).expect("present");
                state = state.trace_out(p);
            }
            // bricks that shed a qubit first, so later bricks see a smaller register
            let mut ordered = layer_bricks;
            ordered.sort_by_key(|&b| {
                let (a, c) = placements[b].pair;
                next.binary_search(&a).is_ok() && next.binary_search(&c).is_ok()
            });
            for b in ordered {
                let (a, c) = placements[b].pair;
                let p0 = state.qubits().iter().position(|&x| x == a).expect("brick in cone");
                let p1 = state.qubits().iter().position(|&x| x == c).expect("brick in cone");
                let keep = (next.binary_search(&a).is_ok(), next.binary_search(&c).is_ok());
                let ptm = self.ptms[b].as_ref().expect("transfer matrix built");
                state = state.apply_two_qubit(ptm, p0, p1, keep);
            }
            debug_assert_eq!(state.qubits(), next.as_slice());
        }
        Ok(state)
    }

    /// weight · tr(W̃(θ) ρ|_A) for term `term` given ρ|_A in Pauli coordinates.
    pub fn term_expectation(&self, term: usize, reduced: &PauliVector) -> Result<f64> {
        let out = self.propagate(term, reduced)?;
        let weight = self.set.observable.terms()[term].weight();
        Ok(weight * out.expectation(&self.set.obs_pauli[term])?)
    }
}

/// Σ_i weight_i · tr(W̃_i(θ) ρ|_{A_i}) for a product input.
pub fn evaluate_exact_product(obs: &ObservableSum, theta: &ParamTensor, ansatz: &Ansatz, input: &ProductState) -> Result<f64> {
    ConeSet::new(obs.clone(), ansatz.clone())?.evaluate_product(theta, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::BrickTemplate;
    use crate::qsim::{dense_from_product, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ansatz(n: usize, d: usize) -> Ansatz {
        Ansatz::new(n, d, BrickTemplate::default()).unwrap()
    }

    #[test]
    fn cone_sizes_from_locality_argument() {
        let c = compute_lightcone(&[0], &ansatz(8, 1)).unwrap();
        assert_eq!(c.qubits(), &[0, 1]);
        let c = compute_lightcone(&[0], &ansatz(8, 3)).unwrap();
        assert_eq!(c.len(), 6);
        let c = compute_lightcone(&[1], &ansatz(4, 3)).unwrap();
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn cone_matches_backward_traversal_oracle() {
        // oracle: grow the set by scanning layers from last to first over raw
        // (2i + j) mod n pairs
        for n in (4..=12).step_by(2) {
            for d in 1..=3 {
                for q in 0..n {
                    let mut set = vec![q];
                    for j in (0..d).rev() {
                        let mut next = set.clone();
                        for i in 0..n / 2 {
                            let a = (2 * i + j) % n;
                            let b = (a + 1) % n;
                            if set.contains(&a) || set.contains(&b) {
                                next.extend([a, b]);
                            }
                        }
                        next.sort_unstable();
                        next.dedup();
                        set = next;
                    }
                    let cone = compute_lightcone(&[q], &ansatz(n, d)).unwrap();
                    assert_eq!(cone.qubits(), set.as_slice());
                    assert!(cone.len() <= (2 * d).min(n));
                }
            }
        }
    }

    #[test]
    fn wrapped_cone_is_sorted() {
        let c = compute_lightcone(&[0], &ansatz(8, 2)).unwrap();
        assert_eq!(c.qubits(), &[0, 1, 6, 7]);
    }

    #[test]
    fn contract_at_zero_depth_one_is_cnot_conjugation() {
        let a = ansatz(4, 1);
        let theta = a.zero_params();
        for q in 0..2 {
            let obs = LocalObservable::projector_zero(q, 1.0);
            let cone = compute_lightcone(obs.support(), &a).unwrap();
            let w = contract(&obs, &theta, &a, &cone).unwrap();
            let p = gates::projector_zero();
            let id = gates::identity();
            let embedded = if q == 0 { p.kron(&id) } else { id.kron(&p) };
            let cx = gates::cnot();
            let want = cx.adjoint().matmul(&embedded).unwrap().matmul(&cx).unwrap();
            assert_eq!(w.support, vec![0, 1]);
            assert!(w.matrix.max_abs_diff(&want) < 1e-15);
        }
    }

    #[test]
    fn contract_matches_statevector_and_pauli_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = ansatz(6, 2);
        for _ in 0..10 {
            let theta = a.random_params(&mut rng);
            let psi = PureState::random(6, &mut rng).unwrap();
            let evolved = a.apply(&psi, &theta, false).unwrap();
            let q = rand::Rng::gen_range(&mut rng, 0..6);
            let obs = LocalObservable::projector_zero(q, 1.0);
            let set = ConeSet::new(ObservableSum::new(vec![obs.clone()]).unwrap(), a.clone()).unwrap();
            let cone = &set.cones()[0];
            let w = contract(&obs, &theta, &a, cone).unwrap();
            let rho_a = psi.reduced_density_matrix(cone.qubits()).unwrap();
            let via_contract = w.matrix.trace_product(&rho_a).unwrap().re;
            let oracle = evolved.expectation(obs.matrix(), &[q]).unwrap();
            assert!((via_contract - oracle).abs() < 1e-10);
            let prop = set.propagator(&theta).unwrap();
            let rho_pauli = PauliVector::from_matrix(&rho_a, cone.qubits().to_vec()).unwrap();
            let via_pauli = prop.term_expectation(0, &rho_pauli).unwrap();
            assert!((via_pauli - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn contract_rejects_foreign_cone() {
        let a = ansatz(6, 2);
        let cone = compute_lightcone(&[0], &a).unwrap();
        let obs = LocalObservable::projector_zero(3, 1.0);
        assert!(matches!(
            contract(&obs, &a.zero_params(), &a, &cone),
            Err(Error::SupportMismatch(_))
        ));
    }

    fn j_observable(n: usize) -> ObservableSum {
        ObservableSum::new((0..n).map(|q| LocalObservable::projector_zero(q, 1.0 / n as f64)).collect()).unwrap()
    }

    #[test]
    fn product_evaluation_at_zero_state() {
        let a = ansatz(8, 3);
        let v = evaluate_exact_product(&j_observable(8), &a.zero_params(), &a, &ProductState::zero(8)).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_evaluation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = ansatz(8, 2);
        let obs = j_observable(8);
        let set = ConeSet::new(obs.clone(), a.clone()).unwrap();
        for _ in 0..5 {
            let factors = (0..8)
                .map(|_| {
                    let s = PureState::random(1, &mut rng).unwrap();
                    [s.amplitudes()[0], s.amplitudes()[1]]
                })
                .collect();
            let input = ProductState::new(factors).unwrap();
            let theta = a.random_params(&mut rng);
            let fast = set.evaluate_product(&theta, &input).unwrap();
            let dense = a.apply(&dense_from_product(&input).unwrap(), &theta, false).unwrap();
            let oracle: f64 = obs
                .terms()
                .iter()
                .map(|t| t.weight() * dense.expectation(t.matrix(), t.support()).unwrap())
                .sum();
            assert!((fast - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn observable_validation() {
        let p = gates::projector_zero();
        assert!(LocalObservable::new(vec![1, 0], p.kron(&p), 1.0).is_err());
        assert!(LocalObservable::new(vec![0], p.kron(&p), 1.0).is_err());
        let not_herm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(LocalObservable::new(vec![0], not_herm, 1.0).is_err());
        assert!(ObservableSum::new(vec![]).is_err());
        assert!((j_observable(8).max_norm() - 0.125).abs() < 1e-15);
    }
}
