//! Cost evaluation over three backends: exact expectation, finite shots and
//! classical shadows, plus the copy ledger each one charges.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, ParamTensor};
use crate::error::{Error, Result};
use crate::lightcone::{product_coordinates, ConeSet, ObservableSum};
use crate::optimizer::{Audit, Objective};
use crate::qsim::{dense_from_product, qubit_bit, BornSampler, ProductState, PureState};
use crate::rng::SimRng;
use crate::shadow::{RecordSampler, ShadowCache, ShadowSource};

const ENSEMBLE_TOL: f64 = 1e-12;

/// One pure input, either dense or as a product of single-qubit states.
#[derive(Clone, Debug, PartialEq)]
pub enum InputState {
    Pure(PureState),
    Product(ProductState),
}

impl InputState {
    pub fn n(&self) -> usize {
        match self {
            InputState::Pure(s) => s.n(),
            InputState::Product(s) => s.n(),
        }
    }

    /// Dense statevector (fails above the dense limit).
    pub fn to_dense(&self) -> Result<PureState> {
        match self {
            InputState::Pure(s) => Ok(s.clone()),
            InputState::Product(p) => dense_from_product(p),
        }
    }
}

impl From<PureState> for InputState {
    fn from(s: PureState) -> Self {
        InputState::Pure(s)
    }
}

impl From<ProductState> for InputState {
    fn from(s: ProductState) -> Self {
        InputState::Product(s)
    }
}

impl ShadowSource for InputState {
    fn num_qubits(&self) -> usize {
        self.n()
    }

    fn record_sampler(&self) -> Result<Box<dyn RecordSampler + '_>> {
        match self {
            InputState::Pure(s) => s.record_sampler(),
            InputState::Product(s) => s.record_sampler(),
        }
    }
}

/// Mixture Σ p_i |ψ_i⟩⟨ψ_i|.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    items: Vec<(f64, InputState)>,
}

impl Ensemble {
    pub fn new(items: Vec<(f64, InputState)>) -> Result<Self> {
        let Some((_, first)) = items.first() else {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        };
        let n = first.n();
        if let Some((_, s)) = items.iter().find(|(_, s)| s.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.n(),
            });
        }
        if items.iter().any(|(p, _)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParameter("ensemble probabilities must be positive".into()));
        }
        let total: f64 = items.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > ENSEMBLE_TOL {
            return Err(Error::InvalidParameter(format!("ensemble probabilities sum to {total}")));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[(f64, InputState)] {
        &self.items
    }

    pub fn n(&self) -> usize {
        self.items[0].1.n()
    }

    fn cdf(&self) -> Vec<f64> {
        self.items
            .iter()
            .scan(0.0, |acc, (p, _)| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

fn pick(cdf: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.gen::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Where input copies come from.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    State(InputState),
    Ensemble(Ensemble),
}

impl InputSource {
    pub fn n(&self) -> usize {
        match self {
            InputSource::State(s) => s.n(),
            InputSource::Ensemble(e) => e.n(),
        }
    }

    /// (p_i, ψ_i) pairs; a single state has probability 1.
    pub fn components(&self) -> Vec<(f64, &InputState)> {
        match self {
            InputSource::State(s) => vec![(1.0, s)],
            InputSource::Ensemble(e) => e.items.iter().map(|(p, s)| (*p, s)).collect(),
        }
    }
}

impl From<PureState> for InputSource {
    fn from(s: PureState) -> Self {
        InputSource::State(s.into())
    }
}

impl From<ProductState> for InputSource {
    fn from(s: ProductState) -> Self {
        InputSource::State(s.into())
    }
}

impl From<Ensemble> for InputSource {
    fn from(e: Ensemble) -> Self {
        InputSource::Ensemble(e)
    }
}

struct EnsembleSampler<'a> {
    cdf: Vec<f64>,
    members: Vec<Box<dyn RecordSampler + 'a>>,
}

impl RecordSampler for EnsembleSampler<'_> {
    fn sample_into(&mut self, rng: &mut SimRng, codes: &mut [u8]) {
        let i = pick(&self.cdf, rng);
        self.members[i].sample_into(rng, codes);
    }
}

impl ShadowSource for InputSource {
    fn num_qubits(&self) -> usize {
        self.n()
    }

    /// For an ensemble each record first draws a member i ~ p.
    fn record_sampler(&self) -> Result<Box<dyn RecordSampler + '_>> {
        match self {
            InputSource::State(s) => s.record_sampler(),
            InputSource::Ensemble(e) => Ok(Box::new(EnsembleSampler {
                cdf: e.cdf(),
                members: e.items.iter().map(|(_, s)| s.record_sampler()).collect::<Result<_>>()?,
            })),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    StatePrep,
    Autoencoder,
    Custom,
}

/// How the shots backend spends its K shots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotMode {
    /// K full-register shots shared by all terms.
    #[default]
    Shared,
    /// K separate shots for every term.
    PerTerm,
}

/// Copies of the input consumed and objective evaluations performed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub copies: u64,
    pub evaluations: u64,
}

/// f(θ) = Σ_i tr(O_i U(θ) ρ U(θ)†) for one input and observable.
#[derive(Clone, Debug)]
pub struct CostFunction {
    kind: ObjectiveKind,
    input: InputSource,
    cones: ConeSet,
}

impl CostFunction {
    pub const DEFAULT_LOCALITY_CAP: usize = 1;

    pub fn new(kind: ObjectiveKind, input: InputSource, observable: ObservableSum, ansatz: Ansatz) -> Result<Self> {
        Self::with_locality_cap(kind, input, observable, ansatz, Self::DEFAULT_LOCALITY_CAP)
    }

    pub fn with_locality_cap(
        kind: ObjectiveKind,
        input: InputSource,
        observable: ObservableSum,
        ansatz: Ansatz,
        cap: usize,
    ) -> Result<Self> {
        if input.n() != ansatz.n() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.n(),
                actual: input.n(),
            });
        }
        if observable.locality() > cap {
            return Err(Error::InvalidParameter(format!(
                "observable is {}-local, cap is {cap}",
                observable.locality()
            )));
        }
        let cones = ConeSet::new(observable, ansatz)?;
        Ok(Self { kind, input, cones })
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn input(&self) -> &InputSource {
        &self.input
    }

    pub fn ansatz(&self) -> &Ansatz {
        self.cones.ansatz()
    }

    pub fn observable(&self) -> &ObservableSum {
        self.cones.observable()
    }

    pub fn cones(&self) -> &ConeSet {
        &self.cones
    }

    /// Number of observable terms M.
    pub fn terms(&self) -> usize {
        self.observable().len()
    }

    /// Exact f(θ): dense simulation for dense members, the product-state
    /// lightcone path for product members.
    pub fn eval_exact(&self, theta: &ParamTensor) -> Result<f64> {
        self.ansatz().check_params(theta)?;
        let mut total = 0.0;
        for (p, state) in self.input.components() {
            let f = match state {
                InputState::Pure(s) => {
                    let out = self.ansatz().apply(s, theta, false)?;
                    let mut f = 0.0;
                    for t in self.observable().terms() {
                        f += t.weight() * out.expectation_unchecked(t.matrix(), t.support())?.re;
                    }
                    f
                }
                InputState::Product(s) => self.cones.evaluate_product(theta, s)?,
            };
            total += p * f;
        }
        Ok(total)
    }

    /// Finite-shot estimate with K shots per evaluation; charges K·M copies.
    pub fn eval_shots(
        &self,
        theta: &ParamTensor,
        k: u64,
        mode: ShotMode,
        rng: &mut SimRng,
        ledger: &mut ResourceLedger,
    ) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        self.ansatz().check_params(theta)?;
        let n = self.ansatz().n();
        let terms = self.observable().terms();
        let diagonals = terms
            .iter()
            .map(|t| {
                if !t.matrix().is_diagonal(1e-12) {
                    return Err(Error::InvalidParameter(
                        "the shots backend needs terms diagonal in the computational basis".into(),
                    ));
                }
                Ok((0..t.matrix().rows()).map(|i| t.matrix()[(i, i)].re).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let components = self.input.components();
        let cdf: Vec<f64> = components
            .iter()
            .scan(0.0, |acc, (p, _)| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let samplers = components
            .iter()
            .map(|(_, s)| {
                let out = self.ansatz().apply(&s.to_dense()?, theta, false)?;
                Ok(BornSampler::new(&out.probabilities()))
            })
            .collect::<Result<Vec<_>>>()?;
        let shot = |rng: &mut SimRng| samplers[pick(&cdf, rng)].sample(rng);
        let local = |index: usize, support: &[usize]| {
            support.iter().fold(0usize, |acc, &q| acc << 1 | qubit_bit(index, n, q))
        };
        let mut sums = vec![0.0; terms.len()];
        match mode {
            ShotMode::Shared => {
                for _ in 0..k {
                    let b = shot(rng);
                    for ((s, t), diag) in sums.iter_mut().zip(terms).zip(&diagonals) {
                        *s += diag[local(b, t.support())];
                    }
                }
            }
            ShotMode::PerTerm => {
                for ((s, t), diag) in sums.iter_mut().zip(terms).zip(&diagonals) {
                    for _ in 0..k {
                        *s += diag[local(shot(rng), t.support())];
                    }
                }
            }
        }
        ledger.copies += k * terms.len() as u64;
        ledger.evaluations += 1;
        Ok(terms.iter().zip(&sums).map(|(t, s)| t.weight() * s / k as f64).sum())
    }

    /// Caches the reduced shadow states this objective needs.
    pub fn prepare_shadows(&self, cache: &mut ShadowCache) -> Result<()> {
        if cache.set().n() != self.ansatz().n() {
            return Err(Error::DimensionMismatch {
                expected: self.ansatz().n(),
                actual: cache.set().n(),
            });
        }
        cache.prepare_pauli(self.cones.cones().iter().map(|c| c.qubits()))
    }

    /// Shadow estimate Σ_i tr(W̃_i(θ) ρ̂_T|_{A_i}) from a prepared cache.
    pub fn eval_shadow(&self, theta: &ParamTensor, cache: &ShadowCache) -> Result<f64> {
        if cache.set().n() != self.ansatz().n() {
            return Err(Error::DimensionMismatch {
                expected: self.ansatz().n(),
                actual: cache.set().n(),
            });
        }
        let prop = self.cones.propagator(theta)?;
        let mut total = 0.0;
        for (i, cone) in self.cones.cones().iter().enumerate() {
            let reduced = cache.reduced_pauli(cone.qubits()).ok_or_else(|| {
                Error::SupportMismatch(format!("no reduced shadow cached for {:?}", cone.qubits()))
            })?;
            total += prop.term_expectation(i, reduced)?;
        }
        Ok(total)
    }

    /// Exact f on a single product member via the lightcone path (any n).
    pub fn eval_product(&self, theta: &ParamTensor, input: &ProductState) -> Result<f64> {
        let prop = self.cones.propagator(theta)?;
        let mut total = 0.0;
        for (i, cone) in self.cones.cones().iter().enumerate() {
            total += prop.term_expectation(i, &product_coordinates(input, cone.qubits()))?;
        }
        Ok(total)
    }
}

/// Backend selector with its resource parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    Exact,
    Shots { k: u64, mode: ShotMode },
    Shadow { t: u64 },
}

#[allow(clippy::large_enum_variant)]
enum BackendState {
    Exact,
    Shots { k: u64, mode: ShotMode, rng: SimRng },
    Shadow(Arc<ShadowCache>),
}

type InfidelityFn = Arc<dyn Fn(&ParamTensor) -> Result<f64> + Send + Sync>;

/// A cost function bound to one backend, exposed to the optimizers as the
/// cost 1 − f.
pub struct Evaluator {
    cf: Arc<CostFunction>,
    backend: BackendState,
    ledger: ResourceLedger,
    infidelity: Option<InfidelityFn>,
}

impl Evaluator {
    pub fn exact(cf: Arc<CostFunction>) -> Self {
        Self {
            cf,
            backend: BackendState::Exact,
            ledger: ResourceLedger::default(),
            infidelity: None,
        }
    }

    pub fn shots(cf: Arc<CostFunction>, k: u64, mode: ShotMode, rng: SimRng) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Ok(Self {
            cf,
            backend: BackendState::Shots { k, mode, rng },
            ledger: ResourceLedger::default(),
            infidelity: None,
        })
    }

    /// Binds a prepared shadow cache. The ledger starts at the T copies used
    /// to create the set; evaluations never add to it.
    pub fn shadow(cf: Arc<CostFunction>, cache: Arc<ShadowCache>) -> Result<Self> {
        for cone in cf.cones().cones() {
            if cache.reduced_pauli(cone.qubits()).is_none() {
                return Err(Error::SupportMismatch(format!(
                    "shadow cache not prepared for {:?}",
                    cone.qubits()
                )));
            }
        }
        Ok(Self {
            cf,
            ledger: ResourceLedger {
                copies: cache.set().len() as u64,
                evaluations: 0,
            },
            backend: BackendState::Shadow(cache),
            infidelity: None,
        })
    }

    /// Adds a true-infidelity audit column.
    pub fn with_infidelity(mut self, f: InfidelityFn) -> Self {
        self.infidelity = Some(f);
        self
    }

    pub fn cost_function(&self) -> &CostFunction {
        &self.cf
    }

    pub fn ledger(&self) -> ResourceLedger {
        self.ledger
    }

    /// Whether copies are idealized as unlimited.
    pub fn is_infinite(&self) -> bool {
        matches!(self.backend, BackendState::Exact)
    }

    /// Backend estimate of f.
    pub fn eval_f(&mut self, theta: &ParamTensor) -> Result<f64> {
        let f = match &mut self.backend {
            BackendState::Exact => {
                self.ledger.evaluations += 1;
                self.cf.eval_exact(theta)?
            }
            BackendState::Shots { k, mode, rng } => self.cf.eval_shots(theta, *k, *mode, rng, &mut self.ledger)?,
            BackendState::Shadow(cache) => {
                self.ledger.evaluations += 1;
                self.cf.eval_shadow(theta, cache)?
            }
        };
        Ok(f)
    }

    fn params(&self, x: &[f64]) -> Result<ParamTensor> {
        self.cf.ansatz().params_from_slice(x)
    }
}

impl Objective for Evaluator {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        let theta = self.params(x)?;
        Ok(1.0 - self.eval_f(&theta)?)
    }

    fn audit(&self, x: &[f64]) -> Result<Audit> {
        let theta = self.params(x)?;
        let exact_cost = Some(1.0 - self.cf.eval_exact(&theta)?);
        let infidelity = match &self.infidelity {
            Some(f) => Some(f(&theta)?),
            None => None,
        };
        Ok(Audit { exact_cost, infidelity })
    }

    fn copies(&self) -> u64 {
        self.ledger.copies
    }

    fn evaluations(&self) -> u64 {
        self.ledger.evaluations
    }
}
