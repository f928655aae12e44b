//! State preparation and quantum autoencoder problems, with generators for
//! targets that the ansatz can reach exactly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, BrickTemplate, ParamTensor};
use crate::error::{Error, Result};
use crate::estimator::{CostFunction, Ensemble, InputSource, InputState, ObjectiveKind};
use crate::lightcone::{LocalObservable, ObservableSum};
use crate::qsim::{gates, ProductState, PureState, C64, DEFAULT_DENSE_LIMIT};
use crate::rng::stream;

/// J = (1/|Q|) Σ_{q∈Q} |0⟩_q⟨0|.
pub fn j_observable(qubits: &[usize]) -> Result<ObservableSum> {
    if qubits.is_empty() {
        return Err(Error::InvalidParameter("J needs at least one qubit".into()));
    }
    let w = 1.0 / qubits.len() as f64;
    ObservableSum::new(qubits.iter().map(|&q| LocalObservable::projector_zero(q, w)).collect())
}

/// Prepare |0…0⟩ from a target |ψ⟩: maximize f = tr(J U(θ)|ψ⟩⟨ψ|U(θ)†).
#[derive(Clone, Debug)]
pub struct StatePrepProblem {
    target: InputState,
    ansatz: Ansatz,
}

impl StatePrepProblem {
    pub fn new(target: InputState, ansatz: Ansatz) -> Result<Self> {
        if target.n() != ansatz.n() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.n(),
                actual: target.n(),
            });
        }
        Ok(Self { target, ansatz })
    }

    pub fn target(&self) -> &InputState {
        &self.target
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn n(&self) -> usize {
        self.ansatz.n()
    }

    pub fn observable(&self) -> ObservableSum {
        let all: Vec<usize> = (0..self.n()).collect();
        j_observable(&all).expect("n >= 2")
    }

    pub fn cost_function(&self) -> Result<CostFunction> {
        CostFunction::new(
            ObjectiveKind::StatePrep,
            InputSource::State(self.target.clone()),
            self.observable(),
            self.ansatz.clone(),
        )
    }

    /// 1 − |⟨0…0|U(θ)|ψ⟩|² (dense; fails above the dense limit).
    pub fn true_infidelity(&self, theta: &ParamTensor) -> Result<f64> {
        if self.n() > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n: self.n(),
                limit: DEFAULT_DENSE_LIMIT,
            });
        }
        let out = self.ansatz.apply(&self.target.to_dense()?, theta, false)?;
        Ok(1.0 - out.amplitudes()[0].norm_sqr())
    }
}

/// Compress an ensemble by driving the trash register B to |0…0⟩: maximize
/// f = tr((𝟙[A] ⊗ J[B]) U(θ) ρ U(θ)†). B is the last `n_b` qubits.
#[derive(Clone, Debug)]
pub struct AutoencoderProblem {
    ensemble: Ensemble,
    n_b: usize,
    ansatz: Ansatz,
}

impl AutoencoderProblem {
    pub fn new(ensemble: Ensemble, n_b: usize, ansatz: Ansatz) -> Result<Self> {
        if ensemble.n() != ansatz.n() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.n(),
                actual: ensemble.n(),
            });
        }
        if n_b == 0 || n_b >= ansatz.n() {
            return Err(Error::InvalidParameter(format!(
                "trash register size must lie in 1..{}, got {n_b}",
                ansatz.n()
            )));
        }
        Ok(Self { ensemble, n_b, ansatz })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn trash_qubits(&self) -> Vec<usize> {
        (self.ansatz.n() - self.n_b..self.ansatz.n()).collect()
    }

    pub fn observable(&self) -> ObservableSum {
        j_observable(&self.trash_qubits()).expect("n_b >= 1")
    }

    pub fn cost_function(&self) -> Result<CostFunction> {
        CostFunction::new(
            ObjectiveKind::Autoencoder,
            InputSource::Ensemble(self.ensemble.clone()),
            self.observable(),
            self.ansatz.clone(),
        )
    }
}

/// |ψ⟩ = U(θ*)†|0…0⟩ for uniform θ*. θ* is returned for auditing only.
pub fn gen_compatible_target<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    template: &BrickTemplate,
    rng: &mut R,
) -> Result<(PureState, ParamTensor)> {
    let ansatz = Ansatz::new(n, d, template.clone())?;
    let theta = ansatz.random_params(rng);
    let psi = ansatz.apply(&PureState::zero(n)?, &theta, true)?;
    Ok((psi, theta))
}

/// Uniform random computational basis state as a product state.
pub fn gen_basis_target<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProductState {
    let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    ProductState::from_bits(&bits)
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// Two members with p = (1/3, 2/3): |ψ_i⟩ = U(θ*)†(|φ_i⟩_A ⊗ |0…0⟩_B) with
/// orthogonal random |φ_i⟩, so cost 0 is reachable at θ*.
pub fn gen_ensemble<R: Rng + ?Sized>(
    n: usize,
    n_b: usize,
    d: usize,
    template: &BrickTemplate,
    rng: &mut R,
) -> Result<(Ensemble, ParamTensor)> {
    if n_b == 0 || n_b >= n {
        return Err(Error::InvalidParameter(format!("trash register size must lie in 1..{n}, got {n_b}")));
    }
    let ansatz = Ansatz::new(n, d, template.clone())?;
    let dim_a = 1usize << (n - n_b);
    let phi1 = random_unit(dim_a, rng);
    let mut phi2 = random_unit(dim_a, rng);
    let overlap: C64 = phi1.iter().zip(&phi2).map(|(a, b)| a.conj() * b).sum();
    for (b, a) in phi2.iter_mut().zip(&phi1) {
        *b -= overlap * a;
    }
    let norm = phi2.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    phi2.iter_mut().for_each(|a| *a /= norm);
    let theta = ansatz.random_params(rng);
    let embed = |phi: &[C64]| -> Result<PureState> {
        // A is the leading qubits, so |φ⟩_A ⊗ |0⟩_B puts φ_a at index a·2^{n_b}
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        for (a, &v) in phi.iter().enumerate() {
            amps[a << n_b] = v;
        }
        ansatz.apply(&PureState::from_amplitudes(amps)?, &theta, true)
    };
    let ensemble = Ensemble::new(vec![
        (1.0 / 3.0, embed(&phi1)?.into()),
        (2.0 / 3.0, embed(&phi2)?.into()),
    ])?;
    Ok((ensemble, theta))
}

/// Two product members with p = (1/3, 2/3) for registers beyond the dense
/// limit. Each member is a random basis string on A and |0…0⟩ on B, with the
/// same random RY(α_q) applied to every qubit of both members.
pub fn gen_product_ensemble<R: Rng + ?Sized>(n: usize, n_b: usize, rng: &mut R) -> Result<Ensemble> {
    if n_b == 0 || n_b >= n {
        return Err(Error::InvalidParameter(format!("trash register size must lie in 1..{n}, got {n_b}")));
    }
    let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut member = || -> Result<InputState> {
        let bits: Vec<bool> = (0..n).map(|q| q < n - n_b && rng.gen()).collect();
        let mut state = ProductState::from_bits(&bits);
        for (q, &a) in angles.iter().enumerate() {
            state.apply_local(q, &gates::rotation(gates::Axis::Y, a))?;
        }
        Ok(state.into())
    };
    let first = member()?;
    let second = member()?;
    Ensemble::new(vec![(1.0 / 3.0, first), (2.0 / 3.0, second)])
}

/// Which target family an instance uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// U(θ*)†|0…0⟩ (state prep) or the compatible dense ensemble (autoencoder).
    Compatible,
    /// Random basis state (state prep) or the product ensemble (autoencoder).
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    StatePrep,
    Autoencoder,
}

/// Serializable description of one problem instance; states are regenerated
/// from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub task: TaskKind,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub n_b: Option<usize>,
    pub target: TargetKind,
    #[serde(default)]
    pub template: BrickTemplate,
    pub seed: u64,
    pub index: u64,
}

/// A generated problem; the hidden optimum (if any) is kept for audits.
#[derive(Clone, Debug)]
pub enum Instance {
    StatePrep {
        problem: StatePrepProblem,
        hidden: Option<ParamTensor>,
    },
    Autoencoder {
        problem: AutoencoderProblem,
        hidden: Option<ParamTensor>,
    },
}

impl Instance {
    pub fn generate(spec: &InstanceSpec) -> Result<Self> {
        let mut rng = stream(spec.seed, "instance", spec.index);
        let ansatz = Ansatz::new(spec.n, spec.d, spec.template.clone())?;
        match spec.task {
            TaskKind::StatePrep => {
                let (target, hidden) = match spec.target {
                    TargetKind::Compatible => {
                        let (psi, theta) = gen_compatible_target(spec.n, spec.d, &spec.template, &mut rng)?;
                        (psi.into(), Some(theta))
                    }
                    TargetKind::Product => (gen_basis_target(spec.n, &mut rng).into(), None),
                };
                Ok(Instance::StatePrep {
                    problem: StatePrepProblem::new(target, ansatz)?,
                    hidden,
                })
            }
            TaskKind::Autoencoder => {
                let n_b = spec
                    .n_b
                    .ok_or_else(|| Error::InvalidParameter("autoencoder needs n_b".into()))?;
                let (ensemble, hidden) = match spec.target {
                    TargetKind::Compatible => {
                        let (e, t) = gen_ensemble(spec.n, n_b, spec.d, &spec.template, &mut rng)?;
                        (e, Some(t))
                    }
                    TargetKind::Product => (gen_product_ensemble(spec.n, n_b, &mut rng)?, None),
                };
                Ok(Instance::Autoencoder {
                    problem: AutoencoderProblem::new(ensemble, n_b, ansatz)?,
                    hidden,
                })
            }
        }
    }

    pub fn cost_function(&self) -> Result<CostFunction> {
        match self {
            Instance::StatePrep { problem, .. } => problem.cost_function(),
            Instance::Autoencoder { problem, .. } => problem.cost_function(),
        }
    }

    pub fn input(&self) -> InputSource {
        match self {
            Instance::StatePrep { problem, .. } => InputSource::State(problem.target().clone()),
            Instance::Autoencoder { problem, .. } => InputSource::Ensemble(problem.ensemble().clone()),
        }
    }

    pub fn ansatz(&self) -> &Ansatz {
        match self {
            Instance::StatePrep { problem, .. } => problem.ansatz(),
            Instance::Autoencoder { problem, .. } => problem.ansatz(),
        }
    }

    pub fn hidden(&self) -> Option<&ParamTensor> {
        match self {
            Instance::StatePrep { hidden, .. } | Instance::Autoencoder { hidden, .. } => hidden.as_ref(),
        }
    }

    /// Largest term norm ‖O_i‖∞ (weights folded in).
    pub fn max_norm(&self) -> f64 {
        match self {
            Instance::StatePrep { problem, .. } => problem.observable().max_norm(),
            Instance::Autoencoder { problem, .. } => problem.observable().max_norm(),
        }
    }

    /// Infidelity, for state preparation within the dense limit.
    pub fn true_infidelity(&self, theta: &ParamTensor) -> Option<Result<f64>> {
        match self {
            Instance::StatePrep { problem, .. } if problem.n() <= DEFAULT_DENSE_LIMIT => {
                Some(problem.true_infidelity(theta))
            }
            _ => None,
        }
    }
}
