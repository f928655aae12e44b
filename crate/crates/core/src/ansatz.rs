//! Alternating layered ansatz: brick template, block layout and parameters.
//!
//! Layer `j` (0-based) places block `i` on the qubit pair
//! `((2i + j) mod n, (2i + j + 1) mod n)`, so layer 0 holds the aligned bricks
//! and each later layer is shifted by one qubit with wrap-around.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::gates::{self, Axis};
use crate::qsim::{ComplexMatrix, PureState};

/// Fixed (parameter-free) gates usable inside a brick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedGate {
    Cnot,
    Cz,
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
}

impl FixedGate {
    fn arity(self) -> usize {
        match self {
            FixedGate::Cnot | FixedGate::Cz => 2,
            _ => 1,
        }
    }

    fn matrix(self) -> ComplexMatrix {
        match self {
            FixedGate::Cnot => gates::cnot(),
            FixedGate::Cz => gates::cz(),
            FixedGate::H => gates::hadamard(),
            FixedGate::S => gates::phase_s(),
            FixedGate::Sdg => gates::phase_s_dagger(),
            FixedGate::X => gates::pauli_x(),
            FixedGate::Y => gates::pauli_y(),
            FixedGate::Z => gates::pauli_z(),
        }
    }
}

/// One gate of a brick, in application order. Slot 0 is the first qubit of
/// the block's pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum TemplateOp {
    Rotation { axis: Axis, slot: usize, param: usize },
    Fixed { gate: FixedGate, slots: Vec<usize> },
}

/// Two-qubit parameterized sub-circuit S(γ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrickTemplate {
    ops: Vec<TemplateOp>,
    param_count: usize,
}

impl Default for BrickTemplate {
    /// S(γ) = [R_Y(γ₁)⊗R_Y(γ₂)] · CNOT · [R_Y(γ₃)⊗R_Y(γ₄)], CNOT controlled by slot 0.
    fn default() -> Self {
        let ry = |slot, param| TemplateOp::Rotation {
            axis: Axis::Y,
            slot,
            param,
        };
        Self {
            ops: vec![
                ry(0, 2),
                ry(1, 3),
                TemplateOp::Fixed {
                    gate: FixedGate::Cnot,
                    slots: vec![0, 1],
                },
                ry(0, 0),
                ry(1, 1),
            ],
            param_count: 4,
        }
    }
}

impl BrickTemplate {
    pub fn new(ops: Vec<TemplateOp>) -> Result<Self> {
        let mut seen = Vec::new();
        for op in &ops {
            match op {
                TemplateOp::Rotation { slot, param, .. } => {
                    if *slot > 1 {
                        return Err(Error::InvalidParameter(format!("rotation slot {slot} is not 0 or 1")));
                    }
                    seen.push(*param);
                }
                TemplateOp::Fixed { gate, slots } => {
                    let distinct = slots.len() < 2 || slots[0] != slots[1];
                    if slots.len() != gate.arity() || slots.iter().any(|&s| s > 1) || !distinct {
                        return Err(Error::InvalidParameter(format!("bad slots {slots:?} for {gate:?}")));
                    }
                }
            }
        }
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::InvalidParameter(
                "parameter slots must cover 0..p-1 exactly once".into(),
            ));
        }
        Ok(Self {
            param_count: seen.len(),
            ops,
        })
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn ops(&self) -> &[TemplateOp] {
        &self.ops
    }

    /// The 4×4 unitary of S(γ).
    pub fn unitary(&self, gamma: &[f64]) -> Result<ComplexMatrix> {
        if gamma.len() != self.param_count {
            return Err(Error::DimensionMismatch {
                expected: self.param_count,
                actual: gamma.len(),
            });
        }
        let id = gates::identity();
        let mut u = ComplexMatrix::identity(4);
        for op in &self.ops {
            let g = match op {
                TemplateOp::Rotation { axis, slot, param } => {
                    let r = gates::rotation(*axis, gamma[*param]);
                    if *slot == 0 {
                        r.kron(&id)
                    } else {
                        id.kron(&r)
                    }
                }
                TemplateOp::Fixed { gate, slots } => {
                    let m = gate.matrix();
                    match slots.as_slice() {
                        [0] => m.kron(&id),
                        [1] => id.kron(&m),
                        [0, 1] => m,
                        _ => swap_conjugate(&m),
                    }
                }
            };
            u = g.matmul(&u)?;
        }
        Ok(u)
    }
}

/// SWAP · m · SWAP for a two-qubit gate.
fn swap_conjugate(m: &ComplexMatrix) -> ComplexMatrix {
    let perm = [0usize, 2, 1, 3];
    let mut out = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

/// Position of one brick in the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPlacement {
    /// 0-based layer index.
    pub layer: usize,
    /// 0-based block index within the layer.
    pub block: usize,
    /// (slot 0, slot 1) qubits.
    pub pair: (usize, usize),
}

/// All placements in application order: layer-major, blocks ascending.
pub fn layout(n: usize, d: usize) -> Result<Vec<BlockPlacement>> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::OddQubitCount(n));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    Ok((0..d)
        .flat_map(|layer| {
            (0..n / 2).map(move |block| {
                let a = (2 * block + layer) % n;
                BlockPlacement {
                    layer,
                    block,
                    pair: (a, (a + 1) % n),
                }
            })
        })
        .collect())
}

/// θ ∈ ℝ^{(n/2)×d×p}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    n: usize,
    d: usize,
    p: usize,
    values: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(n: usize, d: usize, p: usize) -> Result<Self> {
        Self::from_values(n, d, p, vec![0.0; n / 2 * d * p])
    }

    pub fn from_values(n: usize, d: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return Err(Error::OddQubitCount(n));
        }
        if d == 0 || p == 0 {
            return Err(Error::InvalidParameter("depth and brick parameter count must be positive".into()));
        }
        if values.len() != n / 2 * d * p {
            return Err(Error::DimensionMismatch {
                expected: n / 2 * d * p,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        Ok(Self { n, d, p, values })
    }

    /// i.i.d. uniform angles on [0, 2π).
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, d: usize, p: usize, rng: &mut R) -> Result<Self> {
        let values = (0..n / 2 * d * p).map(|_| rng.gen::<f64>() * TAU).collect();
        Self::from_values(n, d, p, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn params_per_brick(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// γ vector of block `block` in layer `layer`.
    pub fn brick(&self, block: usize, layer: usize) -> &[f64] {
        let start = (block * self.d + layer) * self.p;
        &self.values[start..start + self.p]
    }

    pub fn brick_mut(&mut self, block: usize, layer: usize) -> &mut [f64] {
        let start = (block * self.d + layer) * self.p;
        &mut self.values[start..start + self.p]
    }

    /// Same shape, new values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        Self::from_values(self.n, self.d, self.p, values.to_vec())
    }
}

/// Circuit shape shared by every θ: register size, depth and brick template.
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    n: usize,
    d: usize,
    template: BrickTemplate,
    placements: Vec<BlockPlacement>,
}

impl Ansatz {
    pub fn new(n: usize, d: usize, template: BrickTemplate) -> Result<Self> {
        let placements = layout(n, d)?;
        Ok(Self {
            n,
            d,
            template,
            placements,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn template(&self) -> &BrickTemplate {
        &self.template
    }

    pub fn placements(&self) -> &[BlockPlacement] {
        &self.placements
    }

    pub fn param_count(&self) -> usize {
        self.n / 2 * self.d * self.template.param_count()
    }

    pub fn zero_params(&self) -> ParamTensor {
        ParamTensor::zeros(self.n, self.d, self.template.param_count()).expect("valid shape")
    }

    pub fn random_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamTensor {
        ParamTensor::random_uniform(self.n, self.d, self.template.param_count(), rng).expect("valid shape")
    }

    pub fn params_from_slice(&self, values: &[f64]) -> Result<ParamTensor> {
        ParamTensor::from_values(self.n, self.d, self.template.param_count(), values.to_vec())
    }

    pub fn check_params(&self, theta: &ParamTensor) -> Result<()> {
        if theta.n() != self.n || theta.depth() != self.d || theta.params_per_brick() != self.template.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// Brick unitaries, indexed like [`Ansatz::placements`].
    pub fn brick_unitaries(&self, theta: &ParamTensor) -> Result<Vec<ComplexMatrix>> {
        self.check_params(theta)?;
        self.placements
            .iter()
            .map(|pl| self.template.unitary(theta.brick(pl.block, pl.layer)))
            .collect()
    }

    /// U(θ)|ψ⟩, or U(θ)†|ψ⟩ when `adjoint` is set.
    pub fn apply(&self, state: &PureState, theta: &ParamTensor, adjoint: bool) -> Result<PureState> {
        if state.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: state.n(),
            });
        }
        let bricks = self.brick_unitaries(theta)?;
        let mut out = state.clone();
        if adjoint {
            for (pl, u) in self.placements.iter().zip(&bricks).rev() {
                out.apply_gate_mut(&u.adjoint(), &[pl.pair.0, pl.pair.1])?;
            }
        } else {
            for (pl, u) in self.placements.iter().zip(&bricks) {
                out.apply_gate_mut(u, &[pl.pair.0, pl.pair.1])?;
            }
        }
        Ok(out)
    }
}

/// Applies the ansatz described by (`theta`, `template`) to `state`.
pub fn apply_ansatz(
    state: &PureState,
    theta: &ParamTensor,
    template: &BrickTemplate,
    adjoint: bool,
) -> Result<PureState> {
    let ansatz = Ansatz::new(theta.n(), theta.depth(), template.clone())?;
    if template.param_count() != theta.params_per_brick() {
        return Err(Error::DimensionMismatch {
            expected: template.param_count(),
            actual: theta.params_per_brick(),
        });
    }
    ansatz.apply(state, theta, adjoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_brick_at_zero_is_cnot() {
        let t = BrickTemplate::default();
        let u = t.unitary(&[0.0; 4]).unwrap();
        assert!(u.max_abs_diff(&gates::cnot()) < 1e-15);
        assert!(t.unitary(&[0.0; 3]).is_err());
    }

    #[test]
    fn default_brick_single_angle_matches_gate_product_oracle() {
        let t = BrickTemplate::default();
        for which in 0..4 {
            let mut gamma = [0.0; 4];
            gamma[which] = 0.83;
            let ry = |a: f64| gates::rotation(Axis::Y, a);
            // oracle: [RY(γ1)⊗RY(γ2)] · CNOT · [RY(γ3)⊗RY(γ4)]
            let left = ry(gamma[0]).kron(&ry(gamma[1]));
            let right = ry(gamma[2]).kron(&ry(gamma[3]));
            let oracle = left.matmul(&gates::cnot()).unwrap().matmul(&right).unwrap();
            let got = t.unitary(&gamma).unwrap();
            assert!(got.max_abs_diff(&oracle) < 1e-14, "angle {which}");
        }
    }

    #[test]
    fn brick_is_unitary_and_4pi_periodic() {
        let t = BrickTemplate::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let gamma: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let u = t.unitary(&gamma).unwrap();
            assert!(u.is_unitary(1e-12));
            for k in 0..4 {
                let mut shifted = gamma.clone();
                shifted[k] += 4.0 * std::f64::consts::PI;
                assert!(t.unitary(&shifted).unwrap().max_abs_diff(&u) < 1e-12);
            }
        }
    }

    #[test]
    fn template_validation() {
        let bad_cover = vec![TemplateOp::Rotation {
            axis: Axis::X,
            slot: 0,
            param: 1,
        }];
        assert!(BrickTemplate::new(bad_cover).is_err());
        let bad_slot = vec![TemplateOp::Fixed {
            gate: FixedGate::Cnot,
            slots: vec![1, 1],
        }];
        assert!(BrickTemplate::new(bad_slot).is_err());
        let reversed = BrickTemplate::new(vec![TemplateOp::Fixed {
            gate: FixedGate::Cnot,
            slots: vec![1, 0],
        }])
        .unwrap();
        // control on slot 1: |01⟩ → |11⟩
        let u = reversed.unitary(&[]).unwrap();
        assert_eq!(u[(0b11, 0b01)], C64::new(1.0, 0.0));
    }

    #[test]
    fn layout_examples() {
        let pairs = |n, d| layout(n, d).unwrap().iter().map(|p| p.pair).collect::<Vec<_>>();
        assert_eq!(pairs(4, 1), vec![(0, 1), (2, 3)]);
        assert_eq!(pairs(4, 2)[2..], [(1, 2), (3, 0)]);
        assert_eq!(pairs(2, 1), vec![(0, 1)]);
        assert!(matches!(layout(5, 1), Err(Error::OddQubitCount(5))));
        assert!(layout(4, 0).is_err());
    }

    #[test]
    fn layout_matches_index_enumeration() {
        // enumerate (2(i-1) + (j-1)) mod n over 1-based i, j
        for n in [2usize, 4, 6, 8, 10] {
            for d in 1..=4 {
                let got = layout(n, d).unwrap();
                let mut k = 0;
                for j in 1..=d {
                    for i in 1..=n / 2 {
                        let a = (2 * (i - 1) + (j - 1)) % n;
                        assert_eq!(got[k].pair, (a, (a + 1) % n));
                        assert_eq!((got[k].layer, got[k].block), (j - 1, i - 1));
                        k += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn each_layer_partitions_the_register() {
        for n in (2..=12).step_by(2) {
            for d in 1..=4 {
                let pl = layout(n, d).unwrap();
                for layer in 0..d {
                    let mut seen = vec![false; n];
                    for p in pl.iter().filter(|p| p.layer == layer) {
                        for q in [p.pair.0, p.pair.1] {
                            assert!(!seen[q]);
                            seen[q] = true;
                        }
                    }
                    assert!(seen.iter().all(|&s| s));
                }
            }
        }
    }

    #[test]
    fn zero_params_fix_all_zero_state() {
        let ansatz = Ansatz::new(6, 3, BrickTemplate::default()).unwrap();
        let zero = PureState::zero(6).unwrap();
        let out = ansatz.apply(&zero, &ansatz.zero_params(), false).unwrap();
        assert!(out.max_amp_diff(&zero) < 1e-15);
    }

    #[test]
    fn adjoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ansatz = Ansatz::new(6, 3, BrickTemplate::default()).unwrap();
        let s = PureState::random(6, &mut rng).unwrap();
        let theta = ansatz.random_params(&mut rng);
        let fwd = apply_ansatz(&s, &theta, ansatz.template(), false).unwrap();
        let back = apply_ansatz(&fwd, &theta, ansatz.template(), true).unwrap();
        assert!(back.max_amp_diff(&s) < 1e-9);
    }

    #[test]
    fn param_tensor_validation() {
        assert!(ParamTensor::zeros(3, 1, 4).is_err());
        assert!(ParamTensor::from_values(4, 1, 4, vec![0.0; 7]).is_err());
        assert!(ParamTensor::from_values(4, 1, 4, vec![f64::NAN; 8]).is_err());
        let t = ParamTensor::from_values(4, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.brick(1, 0), &[3.0]);
        assert_eq!(t.brick(0, 1), &[2.0]);
    }
}
