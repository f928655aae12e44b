use std::path::Path;
use std::process::Command;

use also_cli::config::{BackendSpec, ExperimentConfig};
use also_cli::experiment::{run_experiment, stat, sweep_table, write_run, RunSummary};
use also_cli::output::read_trace;

const TINY: &str = r#"
task = "state-prep"
n = 4
d = 1
backends = ["exact", "shots:10", "shadow:2000"]
optimizer = "spsa:R=40,s=0.5"
instances = 3
seed = 7
objectives = [0.5, 0.1]
"#;

const TINY_AE: &str = r#"
task = "autoencoder"
n = 4
n_b = 2
d = 1
backends = ["shots:5", "shadow:1000"]
optimizer = "spsa:R=25,s=0.3"
instances = 2
seed = 3
"#;

fn tiny(src: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(src, "tiny").unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

fn read_summary(dir: &Path) -> RunSummary {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_traces_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(TINY, dir.path());
    let out = run_experiment(&cfg).unwrap();
    write_run(&out, dir.path()).unwrap();
    for b in &cfg.backends {
        let sub = dir.path().join(b.label());
        for i in 0..3 {
            let trace = read_trace(&sub.join(format!("instance_{i}.csv"))).unwrap();
            assert_eq!(trace.records.len(), 41);
            assert!(trace.records.windows(2).all(|w| w[0].copies <= w[1].copies));
        }
        let curve = std::fs::read_to_string(sub.join("curve.csv")).unwrap();
        let header = curve.lines().next().unwrap();
        assert_eq!(
            header,
            "iter,exact_mean,exact_lower,exact_upper,infidelity_mean,infidelity_lower,infidelity_upper,copies_mean"
        );
        for line in curve.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(v[2] <= v[1] && v[1] <= v[3]);
            assert!(v[5] <= v[4] && v[4] <= v[6]);
        }
    }
    assert!(dir.path().join("timing.json").exists());
    assert_eq!(read_summary(dir.path()), out.summary);
}

#[test]
fn summaries_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let cfg = tiny(TINY, Path::new("out"));
        write_run(&run_experiment(&cfg).unwrap(), d.path()).unwrap();
    }
    let sa = std::fs::read(a.path().join("summary.json")).unwrap();
    let sb = std::fs::read(b.path().join("summary.json")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn aggregates_recompute_from_instance_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(TINY, dir.path());
    write_run(&run_experiment(&cfg).unwrap(), dir.path()).unwrap();
    let summary = read_summary(dir.path());
    for b in &summary.backends {
        let traces: Vec<_> = (0..3)
            .map(|i| read_trace(&dir.path().join(b.backend.label()).join(format!("instance_{i}.csv"))).unwrap())
            .collect();
        let best: Vec<f64> = traces.iter().map(|t| t.best_exact().unwrap().1).collect();
        let last: Vec<f64> = traces.iter().map(|t| t.last().unwrap().exact_value.unwrap()).collect();
        let best_inf: Vec<f64> = traces.iter().map(|t| t.best_infidelity().unwrap()).collect();
        let copies: Vec<f64> = traces.iter().map(|t| t.last().unwrap().copies as f64).collect();
        let agg = &b.aggregate;
        for (s, v) in [
            (agg.best_exact_cost, &best),
            (agg.final_exact_cost, &last),
            (agg.best_infidelity.unwrap(), &best_inf),
            (agg.copies, &copies),
        ] {
            let r = stat(v);
            assert!((r.mean - s.mean).abs() < 1e-12 && (r.std - s.std).abs() < 1e-12);
        }
    }
}

#[test]
fn ledgers_follow_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&tiny(TINY, dir.path())).unwrap();
    for b in &out.summary.backends {
        let want = match b.backend {
            BackendSpec::Exact => 0,
            BackendSpec::Shots(k) => 2 * k * 40 * 4,
            BackendSpec::Shadow(t) => t,
        };
        assert!(b.instances.iter().all(|r| r.copies == want), "{}", b.backend);
        assert_eq!(b.copies_infinite, b.backend == BackendSpec::Exact);
    }
    let out = run_experiment(&tiny(TINY_AE, dir.path())).unwrap();
    for b in &out.summary.backends {
        let want = match b.backend {
            BackendSpec::Shots(k) => 2 * k * 25 * 2,
            BackendSpec::Shadow(t) => t,
            BackendSpec::Exact => unreachable!(),
        };
        assert!(b.instances.iter().all(|r| r.copies == want));
        assert!(b.aggregate.best_infidelity.is_none());
    }
}

#[test]
fn sweep_only_averages_when_every_instance_arrives() {
    let out = run_experiment(&tiny(TINY, Path::new("unused"))).unwrap();
    let rows = sweep_table(&out, also_cli::config::SweepMetric::Cost, &[2.0, -1.0]);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        if r.objective == 2.0 {
            assert_eq!(r.reached, 3);
            assert!(r.mean_copies.is_some());
        } else {
            assert_eq!(r.reached, 0);
            assert!(r.mean_copies.is_none());
        }
    }
}

fn also() -> Command {
    Command::new(env!("CARGO_BIN_EXE_also"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    let ok = also()
        .args(["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--instances", "1"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("summary.json").exists());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, TINY.replace("n = 4", "n = 5")).unwrap();
    let r = also().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("bad.toml:3"), "{err}");

    let r = also().args(["run", cfg.to_str().unwrap(), "--backend", "shots:0"]).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let r = also().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let r = also().args(["shadows", "inspect", dir.path().join("missing.bin").to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn sweep_subcommand_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("sw");
    let r = also()
        .args(["sweep", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--objectives", "0.9,0.01"])
        .output()
        .unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 2);
    assert!(table.starts_with("backend,metric,objective,reached,instances,mean_copies,copies_infinite"));
}

#[test]
fn shadow_files_round_trip_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let bin = dir.path().join("s.bin");
    let json = dir.path().join("s.json");
    let r = also()
        .args(["shadows", "sample", cfg.to_str().unwrap(), "--shadows", "500", "--out"])
        .arg(&bin)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 32 + 500 * 2);
    let again = dir.path().join("again.json");
    let r = also().args(["shadows", "inspect"]).arg(&bin).arg("--json").arg(&again).output().unwrap();
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("n = 4") && text.contains("T = 500"));
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(&again).unwrap());

    // the sampled set is the one a shadow run on instance 0 would use
    let set = also_cli::bench::shadows_load(&bin).unwrap();
    let c = tiny(TINY, dir.path());
    let seeds = also_cli::experiment::InstanceSeeds::new(c.seed, 0);
    assert_eq!(set.seed(), seeds.shadows);
}
