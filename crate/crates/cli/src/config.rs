//! Experiment configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use also::ansatz::BrickTemplate;
use also::estimator::ShotMode;
use also::tasks::{TargetKind, TaskKind};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

/// Default Powell evaluation cap for finite-shot and exact backends.
pub const VQA_POWELL_CAP: u64 = 50_000;

fn parse_count(s: &str, what: &str) -> std::result::Result<u64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{what} must be a number, got {s:?}"))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v < 1e18) {
        return Err(format!("{what} must be a positive integer, got {s:?}"));
    }
    Ok(v as u64)
}

/// `exact`, `shots:K` or `shadow:T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendSpec {
    Exact,
    Shots(u64),
    Shadow(u64),
}

impl BackendSpec {
    /// Label used for directories and report rows.
    pub fn label(&self) -> String {
        match self {
            BackendSpec::Exact => "exact".into(),
            BackendSpec::Shots(k) => format!("shots-{k}"),
            BackendSpec::Shadow(t) => format!("shadow-{t}"),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Exact => write!(f, "exact"),
            BackendSpec::Shots(k) => write!(f, "shots:{k}"),
            BackendSpec::Shadow(t) => write!(f, "shadow:{t}"),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "exact" => Ok(BackendSpec::Exact),
            Some(("shots", k)) => Ok(BackendSpec::Shots(parse_count(k, "K")?)),
            Some(("shadow", t)) => Ok(BackendSpec::Shadow(parse_count(t, "T")?)),
            _ => Err(format!("unknown backend {s:?} (expected exact, shots:K or shadow:T)")),
        }
    }
}

impl Serialize for BackendSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BackendSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `spsa:R=…,s=…` or `powell:cap=…,tol=…,line_tol=…`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerSpec {
    Spsa {
        iterations: u64,
        exponent: f64,
    },
    Powell {
        /// `None` picks the per-backend default; `Some(None)` is unlimited.
        cap: Option<Option<u64>>,
        tol: f64,
        line_tol: f64,
    },
}

impl fmt::Display for OptimizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerSpec::Spsa { iterations, exponent } => write!(f, "spsa:R={iterations},s={exponent}"),
            OptimizerSpec::Powell { cap, tol, line_tol } => {
                write!(f, "powell:")?;
                match cap {
                    Some(Some(c)) => write!(f, "cap={c},")?,
                    Some(None) => write!(f, "cap=none,")?,
                    None => {}
                }
                write!(f, "tol={tol},line_tol={line_tol}")
            }
        }
    }
}

impl FromStr for OptimizerSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let pairs = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| format!("expected key=value in optimizer spec, got {a:?}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let float = |v: &str, what: &str| -> std::result::Result<f64, String> {
            let x: f64 = v.parse().map_err(|_| format!("{what} must be a number, got {v:?}"))?;
            if !(x.is_finite() && x > 0.0) {
                return Err(format!("{what} must be positive, got {v:?}"));
            }
            Ok(x)
        };
        match name {
            "spsa" => {
                let (mut iterations, mut exponent) = (None, None);
                for (k, v) in pairs {
                    match k {
                        "R" => iterations = Some(parse_count(v, "R")?),
                        "s" => exponent = Some(float(v, "s")?),
                        _ => return Err(format!("unknown SPSA option {k:?}")),
                    }
                }
                Ok(OptimizerSpec::Spsa {
                    iterations: iterations.ok_or("SPSA needs R")?,
                    exponent: exponent.ok_or("SPSA needs s")?,
                })
            }
            "powell" => {
                let (mut cap, mut tol, mut line_tol) = (None, 1e-6, 1e-4);
                for (k, v) in pairs {
                    match k {
                        "cap" if matches!(v, "none" | "unlimited") => cap = Some(None),
                        "cap" => cap = Some(Some(parse_count(v, "cap")?)),
                        "tol" => tol = float(v, "tol")?,
                        "line_tol" => line_tol = float(v, "line_tol")?,
                        _ => return Err(format!("unknown Powell option {k:?}")),
                    }
                }
                Ok(OptimizerSpec::Powell { cap, tol, line_tol })
            }
            _ => Err(format!("unknown optimizer {name:?} (expected spsa:R=..,s=.. or powell)")),
        }
    }
}

impl Serialize for OptimizerSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OptimizerSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    /// RY⊗RY · CNOT · RY⊗RY.
    #[default]
    #[serde(rename = "ry-cnot-ry")]
    RyCnotRy,
}

impl TemplateId {
    pub fn template(self) -> BrickTemplate {
        match self {
            TemplateId::RyCnotRy => BrickTemplate::default(),
        }
    }
}

/// Which exact quantity the sweep thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    Cost,
    Infidelity,
}

fn default_target() -> TargetKind {
    TargetKind::Compatible
}

fn default_instances() -> usize {
    5
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
    #[serde(default = "default_target")]
    pub target: TargetKind,
    #[serde(default)]
    pub template: TemplateId,
    pub backends: Vec<BackendSpec>,
    pub optimizer: OptimizerSpec,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub shot_mode: ShotMode,
    /// Trace cadence; defaults to every iteration up to R = 3000, else every 1000th.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<u64>,
    /// Objective levels for `sweep`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objectives: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_metric: Option<SweepMetric>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub backends: Vec<BackendSpec>,
    pub optimizer: Option<OptimizerSpec>,
    pub instances: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub log_every: Option<u64>,
    pub objectives: Vec<f64>,
}

fn key_line(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
}

impl ExperimentConfig {
    /// Parses TOML; errors carry the offending line.
    pub fn from_toml(src: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(src).map_err(|e| CliError::Config(format!("{origin}: {}", e.to_string().trim_end())))?;
        cfg.validate_with_source(Some(src), origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src, &path.display().to_string())
    }

    /// Applies overrides; on error the config is left unchanged.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let mut next = self.clone();
        if !o.backends.is_empty() {
            next.backends = o.backends.clone();
        }
        if let Some(opt) = o.optimizer {
            next.optimizer = opt;
        }
        if let Some(i) = o.instances {
            next.instances = i;
        }
        if let Some(s) = o.seed {
            next.seed = s;
        }
        if let Some(p) = &o.output {
            next.output = p.clone();
        }
        if o.log_every.is_some() {
            next.log_every = o.log_every;
        }
        if !o.objectives.is_empty() {
            next.objectives = o.objectives.clone();
        }
        next.validate_with_source(None, "command line")?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None, "config")
    }

    fn validate_with_source(&self, src: Option<&str>, origin: &str) -> Result<()> {
        let fail = |key: &str, msg: String| {
            let at = src
                .and_then(|s| key_line(s, key))
                .map(|l| format!("{origin}:{}: ", l + 1))
                .unwrap_or_else(|| format!("{origin}: "));
            Err(CliError::Config(format!("{at}{key}: {msg}")))
        };
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return fail("n", format!("must be even and at least 2, got {}", self.n));
        }
        if self.d < 1 {
            return fail("d", "must be at least 1".into());
        }
        match (self.task, self.n_b) {
            (TaskKind::Autoencoder, None) => return fail("n_b", "required for the autoencoder task".into()),
            (TaskKind::Autoencoder, Some(b)) if b == 0 || b >= self.n => {
                return fail("n_b", format!("must lie in 1..{}, got {b}", self.n))
            }
            (TaskKind::StatePrep, Some(_)) => return fail("n_b", "only used by the autoencoder task".into()),
            _ => {}
        }
        if self.target == TargetKind::Compatible && self.n > also::qsim::DEFAULT_DENSE_LIMIT {
            return fail(
                "target",
                format!("compatible targets are dense; use \"product\" for n = {}", self.n),
            );
        }
        if self.backends.is_empty() {
            return fail("backends", "at least one backend is required".into());
        }
        if self.instances < 1 {
            return fail("instances", "must be at least 1".into());
        }
        if self.log_every == Some(0) {
            return fail("log_every", "must be at least 1".into());
        }
        if let Some(x) = self.objectives.iter().find(|x| !x.is_finite()) {
            return fail("objectives", format!("non-finite level {x}"));
        }
        Ok(())
    }

    pub fn log_every(&self) -> u64 {
        self.log_every.unwrap_or(match self.optimizer {
            OptimizerSpec::Spsa { iterations, .. } if iterations > 3000 => 1000,
            _ => 1,
        })
    }

    pub fn sweep_metric(&self) -> SweepMetric {
        self.sweep_metric.unwrap_or(match (self.task, self.n <= also::qsim::DEFAULT_DENSE_LIMIT) {
            (TaskKind::StatePrep, true) => SweepMetric::Infidelity,
            _ => SweepMetric::Cost,
        })
    }

    /// Powell cap for a backend: explicit value, else 5·10⁴ for VQA backends
    /// and unlimited for shadows.
    pub fn powell_cap(&self, backend: BackendSpec) -> Option<u64> {
        match self.optimizer {
            OptimizerSpec::Powell { cap: Some(c), .. } => c,
            _ => match backend {
                BackendSpec::Shadow(_) => None,
                _ => Some(VQA_POWELL_CAP),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
task = "state-prep"
n = 8
d = 2
backends = ["exact", "shots:10", "shadow:1e5"]
optimizer = "spsa:R=3000,s=0.5"
"#;

    #[test]
    fn parses_specs() {
        let cfg = ExperimentConfig::from_toml(BASE, "t").unwrap();
        assert_eq!(
            cfg.backends,
            vec![BackendSpec::Exact, BackendSpec::Shots(10), BackendSpec::Shadow(100_000)]
        );
        assert_eq!(
            cfg.optimizer,
            OptimizerSpec::Spsa {
                iterations: 3000,
                exponent: 0.5
            }
        );
        assert_eq!(cfg.instances, 5);
        assert_eq!(cfg.log_every(), 1);
        assert_eq!(cfg.sweep_metric(), SweepMetric::Infidelity);
        let back = ExperimentConfig::from_toml(&cfg.to_toml(), "t").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["exact", "shots:10", "shadow:500000"] {
            assert_eq!(s.parse::<BackendSpec>().unwrap().to_string(), s);
        }
        for s in ["spsa:R=9000,s=0.3", "powell:cap=50000,tol=0.000001,line_tol=0.0001", "powell:cap=none,tol=0.01,line_tol=0.001"] {
            assert_eq!(s.parse::<OptimizerSpec>().unwrap().to_string(), s);
        }
        let p: OptimizerSpec = "powell".parse().unwrap();
        assert_eq!(
            p,
            OptimizerSpec::Powell {
                cap: None,
                tol: 1e-6,
                line_tol: 1e-4
            }
        );
        for bad in ["shots", "shots:0", "shots:1.5", "shadow:-3", "magic", "exact:1"] {
            assert!(bad.parse::<BackendSpec>().is_err(), "{bad}");
        }
        for bad in ["spsa:R=10", "spsa:R=10,s=0", "spsa:R=10,s=1,q=2", "powell:cap", "adam"] {
            assert!(bad.parse::<OptimizerSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn errors_name_the_line() {
        let src = BASE.replace("\"shots:10\"", "\"shots:ten\"");
        let err = ExperimentConfig::from_toml(&src, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("K must be a number"), "{err}");

        let src = BASE.replace("n = 8", "n = 7");
        let err = ExperimentConfig::from_toml(&src, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("cfg.toml:3: n:"), "{err}");

        let src = format!("{BASE}bogus = 1\n");
        let err = ExperimentConfig::from_toml(&src, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("line 7") && err.contains("bogus"), "{err}");

        let src = BASE.replace("state-prep", "autoencoder");
        let err = ExperimentConfig::from_toml(&src, "cfg.toml").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("n_b"));
    }

    #[test]
    fn cadence_and_caps() {
        let mut cfg = ExperimentConfig::from_toml(BASE, "t").unwrap();
        cfg.optimizer = "spsa:R=9000,s=0.5".parse().unwrap();
        assert_eq!(cfg.log_every(), 1000);
        cfg.optimizer = "powell".parse().unwrap();
        assert_eq!(cfg.powell_cap(BackendSpec::Shots(1000)), Some(VQA_POWELL_CAP));
        assert_eq!(cfg.powell_cap(BackendSpec::Shadow(500_000)), None);
        cfg.optimizer = "powell:cap=10".parse().unwrap();
        assert_eq!(cfg.powell_cap(BackendSpec::Shadow(500_000)), Some(10));
    }

    #[test]
    fn overrides_are_validated() {
        let mut cfg = ExperimentConfig::from_toml(BASE, "t").unwrap();
        let o = Overrides {
            instances: Some(0),
            ..Overrides::default()
        };
        assert!(cfg.apply(&o).is_err());
        let o = Overrides {
            backends: vec![BackendSpec::Shadow(7)],
            seed: Some(3),
            ..Overrides::default()
        };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.backends, vec![BackendSpec::Shadow(7)]);
        assert_eq!(cfg.seed, 3);
    }
}
