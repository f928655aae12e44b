//! Multi-instance runs, summaries and resource sweeps.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use also::ansatz::ParamTensor;
use also::estimator::Evaluator;
use also::optimizer::{powell_minimize, spsa_minimize, OptStatus, OptTrace, PowellConfig, SpsaConfig};
use also::rng::{derive_seed, rng_from_seed};
use also::shadow::{sample_shadows, ShadowCache};
use also::tasks::{Instance, InstanceSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BackendSpec, ExperimentConfig, OptimizerSpec, SweepMetric};
use crate::error::{CliError, Result};
use crate::output;

/// Seeds for instance `index`; shared by every backend so runs compare like
/// with like.
pub struct InstanceSeeds {
    pub theta0: u64,
    pub spsa: u64,
    pub shots: u64,
    pub shadows: u64,
}

impl InstanceSeeds {
    pub fn new(seed: u64, index: u64) -> Self {
        Self {
            theta0: derive_seed(seed, "theta0", index),
            spsa: derive_seed(seed, "spsa", index),
            shots: derive_seed(seed, "shots", index),
            shadows: derive_seed(seed, "shadows", index),
        }
    }
}

pub fn instance_spec(cfg: &ExperimentConfig, index: u64) -> InstanceSpec {
    InstanceSpec {
        task: cfg.task,
        n: cfg.n,
        d: cfg.d,
        n_b: cfg.n_b,
        target: cfg.target,
        template: cfg.template.template(),
        seed: cfg.seed,
        index,
    }
}

/// One optimizer run on one instance with one backend.
#[derive(Clone, Debug)]
pub struct InstanceRun {
    pub index: u64,
    pub backend: BackendSpec,
    pub trace: OptTrace,
    pub status: OptStatus,
    pub theta: Vec<f64>,
    pub wall_ms: f64,
}

/// Per-instance row of the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub index: u64,
    pub best_exact_cost: f64,
    pub final_exact_cost: f64,
    pub best_infidelity: Option<f64>,
    pub final_infidelity: Option<f64>,
    pub copies: u64,
    pub evaluations: u64,
    pub status: OptStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Stat { mean, std: var.sqrt() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub best_exact_cost: Stat,
    pub final_exact_cost: Stat,
    pub best_infidelity: Option<Stat>,
    pub final_infidelity: Option<Stat>,
    pub copies: Stat,
    pub evaluations: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendSummary {
    pub backend: BackendSpec,
    /// Exact backend: copies are idealized as unlimited and reported as 0.
    pub copies_infinite: bool,
    pub instances: Vec<InstanceRow>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub backends: Vec<BackendSummary>,
}

fn row(run: &InstanceRun) -> Result<InstanceRow> {
    let (_, best_exact_cost) = run
        .trace
        .best_exact()
        .ok_or_else(|| CliError::Numerical(format!("instance {} logged no exact cost", run.index)))?;
    let last = run.trace.last().expect("non-empty trace");
    Ok(InstanceRow {
        index: run.index,
        best_exact_cost,
        final_exact_cost: last.exact_value.unwrap_or(f64::NAN),
        best_infidelity: run.trace.best_infidelity(),
        final_infidelity: last.infidelity,
        copies: last.copies,
        evaluations: last.evaluations,
        status: run.status.clone(),
    })
}

pub fn aggregate(rows: &[InstanceRow]) -> Aggregate {
    let col = |f: &dyn Fn(&InstanceRow) -> f64| stat(&rows.iter().map(f).collect::<Vec<_>>());
    let opt = |f: &dyn Fn(&InstanceRow) -> Option<f64>| {
        rows.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| stat(&v))
    };
    Aggregate {
        best_exact_cost: col(&|r| r.best_exact_cost),
        final_exact_cost: col(&|r| r.final_exact_cost),
        best_infidelity: opt(&|r| r.best_infidelity),
        final_infidelity: opt(&|r| r.final_infidelity),
        copies: col(&|r| r.copies as f64),
        evaluations: col(&|r| r.evaluations as f64),
    }
}

/// Builds the evaluator for `backend`, sampling shadows if needed.
pub fn build_evaluator(
    instance: &Arc<Instance>,
    backend: BackendSpec,
    cfg: &ExperimentConfig,
    seeds: &InstanceSeeds,
) -> Result<Evaluator> {
    let cf = Arc::new(instance.cost_function()?);
    let ev = match backend {
        BackendSpec::Exact => Evaluator::exact(cf),
        BackendSpec::Shots(k) => Evaluator::shots(cf, k, cfg.shot_mode, rng_from_seed(seeds.shots))?,
        BackendSpec::Shadow(t) => {
            let t = usize::try_from(t).map_err(|_| CliError::Config(format!("T = {t} does not fit in memory")))?;
            let set = sample_shadows(&instance.input(), t, seeds.shadows)?;
            let mut cache = ShadowCache::new(set);
            cf.prepare_shadows(&mut cache)?;
            Evaluator::shadow(cf, Arc::new(cache))?
        }
    };
    Ok(match instance.true_infidelity(&instance.ansatz().zero_params()) {
        Some(_) => {
            let inst = instance.clone();
            ev.with_infidelity(Arc::new(move |theta: &ParamTensor| {
                inst.true_infidelity(theta).expect("dense instance")
            }))
        }
        None => ev,
    })
}

/// Optimizes one instance with one backend.
pub fn run_instance(cfg: &ExperimentConfig, backend: BackendSpec, index: u64) -> Result<InstanceRun> {
    let start = Instant::now();
    let seeds = InstanceSeeds::new(cfg.seed, index);
    let instance = Arc::new(Instance::generate(&instance_spec(cfg, index))?);
    let mut ev = build_evaluator(&instance, backend, cfg, &seeds)?;
    let theta0 = instance.ansatz().random_params(&mut rng_from_seed(seeds.theta0));
    let outcome = match cfg.optimizer {
        OptimizerSpec::Spsa { iterations, exponent } => {
            let scfg = SpsaConfig {
                log_every: cfg.log_every(),
                ..SpsaConfig::new(iterations, exponent, seeds.spsa)
            };
            spsa_minimize(&mut ev, theta0.as_slice(), &scfg)?
        }
        OptimizerSpec::Powell { tol, line_tol, .. } => {
            let pcfg = PowellConfig {
                max_evaluations: cfg.powell_cap(backend),
                tol,
                line_tol,
                ..PowellConfig::default()
            };
            powell_minimize(&mut ev, theta0.as_slice(), &pcfg)?
        }
    };
    Ok(InstanceRun {
        index,
        backend,
        trace: outcome.trace,
        status: outcome.status,
        theta: outcome.theta,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Every (backend, instance) run, sorted by backend order then instance.
pub struct RunOutput {
    pub summary: RunSummary,
    pub runs: Vec<InstanceRun>,
}

impl RunOutput {
    pub fn runs_for(&self, backend: BackendSpec) -> impl Iterator<Item = &InstanceRun> {
        self.runs.iter().filter(move |r| r.backend == backend)
    }

    pub fn aborted(&self) -> Vec<&InstanceRun> {
        self.runs
            .iter()
            .filter(|r| matches!(r.status, OptStatus::Aborted(_)))
            .collect()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let jobs: Vec<(BackendSpec, u64)> = cfg
        .backends
        .iter()
        .flat_map(|&b| (0..cfg.instances as u64).map(move |i| (b, i)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(b, i)| run_instance(cfg, b, i))
        .collect::<Result<Vec<_>>>()?;
    let mut backends = Vec::new();
    for &b in &cfg.backends {
        let rows = runs
            .iter()
            .filter(|r| r.backend == b)
            .map(row)
            .collect::<Result<Vec<_>>>()?;
        backends.push(BackendSummary {
            backend: b,
            copies_infinite: b == BackendSpec::Exact,
            aggregate: aggregate(&rows),
            instances: rows,
        });
    }
    Ok(RunOutput {
        summary: RunSummary {
            config: cfg.clone(),
            backends,
        },
        runs,
    })
}

/// Writes traces, curves, the summary and wall-clock timings under `dir`.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for b in &out.summary.backends {
        let sub = dir.join(b.backend.label());
        std::fs::create_dir_all(&sub)?;
        let runs: Vec<&InstanceRun> = out.runs_for(b.backend).collect();
        for r in &runs {
            output::write_trace(&sub.join(format!("instance_{}.csv", r.index)), &r.trace)?;
        }
        let traces: Vec<&OptTrace> = runs.iter().map(|r| &r.trace).collect();
        output::write_curve(&sub.join("curve.csv"), &traces)?;
    }
    output::write_json(&dir.join("summary.json"), &out.summary)?;
    let timing: Vec<serde_json::Value> = out
        .runs
        .iter()
        .map(|r| serde_json::json!({"backend": r.backend, "instance": r.index, "wall_ms": r.wall_ms}))
        .collect();
    output::write_json(&dir.join("timing.json"), &timing)?;
    Ok(())
}

/// First ledger value at which the running best crosses `level`.
pub fn crossing(trace: &OptTrace, metric: SweepMetric, level: f64) -> Option<u64> {
    let mut best = f64::INFINITY;
    for r in &trace.records {
        let v = match metric {
            SweepMetric::Cost => r.exact_value,
            SweepMetric::Infidelity => r.infidelity,
        };
        if let Some(v) = v {
            best = best.min(v);
        }
        if best <= level {
            return Some(r.copies);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub backend: String,
    pub metric: SweepMetric,
    pub objective: f64,
    pub reached: usize,
    pub instances: usize,
    /// Mean crossing copies over instances; empty unless every instance reached it.
    pub mean_copies: Option<f64>,
    pub copies_infinite: bool,
}

pub fn sweep_table(out: &RunOutput, metric: SweepMetric, objectives: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for b in &out.summary.backends {
        let runs: Vec<&InstanceRun> = out.runs_for(b.backend).collect();
        for &level in objectives {
            let hits: Vec<u64> = runs.iter().filter_map(|r| crossing(&r.trace, metric, level)).collect();
            rows.push(SweepRow {
                backend: b.backend.to_string(),
                metric,
                objective: level,
                reached: hits.len(),
                instances: runs.len(),
                mean_copies: (hits.len() == runs.len() && !hits.is_empty())
                    .then(|| hits.iter().map(|&c| c as f64).sum::<f64>() / hits.len() as f64),
                copies_infinite: b.copies_infinite,
            });
        }
    }
    rows
}
