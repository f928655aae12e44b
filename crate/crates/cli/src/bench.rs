//! Timing of single shadow evaluations and the `shadows` subcommands.

use std::path::Path;
use std::time::Instant;

use also::ansatz::{Ansatz, BrickTemplate};
use also::estimator::{CostFunction, ObjectiveKind};
use also::rng::{derive_seed, rng_from_seed};
use also::shadow::{self, sample_shadows, Basis, ShadowCache, ShadowSet, ShadowSetJson};
use also::tasks::{gen_basis_target, j_observable, Instance};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{instance_spec, InstanceSeeds};
use crate::output::BenchRow;

/// ⌊log₂ n⌋.
pub fn log_depth(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// Mean seconds per shadow evaluation of J at each n, on a random basis
/// target, with d = ⌊log₂ n⌋ unless `depth` is given.
pub fn bench_eval_time(ns: &[usize], depth: Option<usize>, shadows: u64, repeats: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &n in ns {
        if n < 2 || n % 2 != 0 {
            return Err(CliError::Config(format!("bench sizes must be even, got {n}")));
        }
        let d = depth.unwrap_or_else(|| log_depth(n));
        let mut rng = rng_from_seed(derive_seed(seed, "bench", n as u64));
        let target = gen_basis_target(n, &mut rng);
        let ansatz = Ansatz::new(n, d, BrickTemplate::default())?;
        let all: Vec<usize> = (0..n).collect();
        let cf = CostFunction::new(ObjectiveKind::StatePrep, target.clone().into(), j_observable(&all)?, ansatz.clone())?;
        let mut cache = ShadowCache::new(sample_shadows(&target, shadows as usize, derive_seed(seed, "bench-shadows", n as u64))?);
        cf.prepare_shadows(&mut cache)?;
        let thetas: Vec<_> = (0..repeats).map(|_| ansatz.random_params(&mut rng)).collect();
        let start = Instant::now();
        for theta in &thetas {
            std::hint::black_box(cf.eval_shadow(theta, &cache)?);
        }
        rows.push(BenchRow {
            n,
            d,
            terms: n,
            shadows,
            seconds: start.elapsed().as_secs_f64() / repeats as f64,
        });
    }
    Ok(rows)
}

/// Least-squares exponent b of seconds ≈ a·n^b.
pub fn power_law_exponent(rows: &[BenchRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.seconds > 0.0)
        .map(|r| ((r.n as f64).ln(), r.seconds.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Samples T shadows of instance `index` of `cfg` into `path`.
pub fn shadows_sample(cfg: &ExperimentConfig, index: u64, t: u64, path: &Path, json: Option<&Path>) -> Result<ShadowSet> {
    let instance = Instance::generate(&instance_spec(cfg, index))?;
    let seed = InstanceSeeds::new(cfg.seed, index).shadows;
    let set = sample_shadows(&instance.input(), t as usize, seed)?;
    shadow::write_shadow_file(&set, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    if let Some(j) = json {
        crate::output::write_json(j, &ShadowSetJson::from(&set))?;
    }
    Ok(set)
}

pub fn shadows_load(path: &Path) -> Result<ShadowSet> {
    Ok(shadow::read_shadow_file(std::io::BufReader::new(std::fs::File::open(path)?))?)
}

/// Header, per-basis frequencies and the first few records.
pub fn describe(set: &ShadowSet, records: usize) -> String {
    let mut out = format!("n = {}\nT = {}\nseed = {}\n", set.n(), set.len(), set.seed());
    let mut counts = [0u64; 3];
    let mut ones = 0u64;
    for rec in set.records() {
        for &c in rec {
            let (b, o) = shadow::decode(c);
            counts[b as usize] += 1;
            ones += o as u64;
        }
    }
    let total = (set.n() * set.len()) as f64;
    for b in Basis::ALL {
        out += &format!("basis {:?}: {:.4}\n", b, counts[b as usize] as f64 / total);
    }
    out += &format!("outcome 1: {:.4}\n", ones as f64 / total);
    let json = ShadowSetJson::from(set);
    for (j, r) in json.records.iter().take(records).enumerate() {
        out += &format!("record {j}: {r}\n");
    }
    out
}
