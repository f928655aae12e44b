//! Derivative-free minimizers: first-order SPSA and Powell's direction-set
//! method. Both only touch the objective through [`Objective::evaluate`].

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Exact quantities recomputed for reporting only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub exact_cost: Option<f64>,
    pub infidelity: Option<f64>,
}

/// A cost to minimize plus the bookkeeping the traces report.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;

    /// Exact cost (and infidelity) at `x`; does not touch the ledger.
    fn audit(&self, _x: &[f64]) -> Result<Audit> {
        Ok(Audit::default())
    }

    fn copies(&self) -> u64 {
        0
    }

    fn evaluations(&self) -> u64;
}

/// One logged row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub backend_value: f64,
    pub exact_value: Option<f64>,
    pub infidelity: Option<f64>,
    pub copies: u64,
    pub evaluations: u64,
    pub wall_ms: f64,
    pub gain_a: Option<f64>,
    pub gain_c: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub records: Vec<TraceRecord>,
}

impl OptTrace {
    /// Lowest logged exact cost and its row index.
    pub fn best_exact(&self) -> Option<(usize, f64)> {
        self.records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.exact_value.map(|v| (i, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn best_infidelity(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.infidelity).min_by(f64::total_cmp)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "kebab-case")]
pub enum OptStatus {
    Completed,
    Converged,
    /// Evaluation cap reached, possibly mid line search.
    CapReached,
    /// Non-finite value or backend failure; the trace up to that point is kept.
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct OptOutcome {
    /// Best point by exact cost when audits provide one, else the last iterate.
    pub theta: Vec<f64>,
    pub trace: OptTrace,
    pub status: OptStatus,
}

impl OptOutcome {
    pub fn is_aborted(&self) -> bool {
        matches!(self.status, OptStatus::Aborted(_))
    }
}

enum Halt {
    Cap,
    Failed(Error),
}

impl From<Error> for Halt {
    fn from(e: Error) -> Self {
        Halt::Failed(e)
    }
}

/// Checked evaluation: counts calls, enforces the cap, rejects non-finite values.
struct Counted<'a, O: Objective + ?Sized> {
    obj: &'a mut O,
    calls: u64,
    cap: Option<u64>,
    best: Option<(f64, Vec<f64>)>,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    fn new(obj: &'a mut O, cap: Option<u64>) -> Self {
        Self {
            obj,
            calls: 0,
            cap,
            best: None,
        }
    }

    fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Halt> {
        if self.cap.is_some_and(|c| self.calls >= c) {
            return Err(Halt::Cap);
        }
        self.calls += 1;
        let v = self.obj.evaluate(x)?;
        if !v.is_finite() {
            return Err(Halt::Failed(Error::NonFinite { evaluation: self.calls }));
        }
        if self.best.as_ref().is_none_or(|(b, _)| v < *b) {
            self.best = Some((v, x.to_vec()));
        }
        Ok(v)
    }
}

fn record<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    iter: u64,
    backend_value: f64,
    gains: Option<(f64, f64)>,
    start: Instant,
) -> Result<(TraceRecord, Audit)> {
    let audit = obj.audit(x)?;
    Ok((
        TraceRecord {
            iter,
            backend_value,
            exact_value: audit.exact_cost,
            infidelity: audit.infidelity,
            copies: obj.copies(),
            evaluations: obj.evaluations(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            gain_a: gains.map(|g| g.0),
            gain_c: gains.map(|g| g.1),
        },
        audit,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub iterations: u64,
    /// a_r = c_r = r^{-s}.
    pub exponent: f64,
    pub seed: u64,
    /// Log (and audit) every this many iterations; the last one is always logged.
    pub log_every: u64,
}

impl SpsaConfig {
    pub fn new(iterations: u64, exponent: f64, seed: u64) -> Self {
        Self {
            iterations,
            exponent,
            seed,
            log_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("SPSA needs R >= 1".into()));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("SPSA exponent must be positive, got {}", self.exponent)));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidParameter("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// θ_{r+1} = θ_r − a_r ĝ_r with ĝ_r = [f(θ_r + c_rΔ) − f(θ_r − c_rΔ)] / (2c_r) · Δ⁻¹
/// and Rademacher Δ. Row 0 is the start point; row r holds θ_{r} after the
/// r-th update and the mean of that iteration's two evaluations.
pub fn spsa_minimize<O: Objective + ?Sized>(obj: &mut O, theta0: &[f64], cfg: &SpsaConfig) -> Result<OptOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = rng_from_seed(cfg.seed);
    let mut theta = theta0.to_vec();
    let mut trace = OptTrace::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut keep = |trace: &mut OptTrace, rec: TraceRecord, x: &[f64]| {
        if let Some(v) = rec.exact_value {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x.to_vec()));
            }
        }
        trace.records.push(rec);
    };
    let (rec, _) = record(obj, &theta, 0, f64::NAN, None, start)?;
    keep(&mut trace, rec, &theta);
    let mut status = OptStatus::Completed;
    let (mut plus, mut minus) = (theta.clone(), theta.clone());
    let mut delta = vec![0.0; theta.len()];
    let mut counted = Counted::new(obj, None);
    for r in 1..=cfg.iterations {
        let gain = (r as f64).powf(-cfg.exponent);
        let (a, c) = (gain, gain);
        for (dlt, ((p, m), t)) in delta.iter_mut().zip(plus.iter_mut().zip(minus.iter_mut()).zip(&theta)) {
            *dlt = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            *p = t + c * *dlt;
            *m = t - c * *dlt;
        }
        let pair = counted.eval(&plus).and_then(|fp| Ok((fp, counted.eval(&minus)?)));
        let (fp, fm) = match pair {
            Ok(v) => v,
            Err(Halt::Failed(e)) => {
                status = OptStatus::Aborted(e.to_string());
                break;
            }
            Err(Halt::Cap) => unreachable!("SPSA runs uncapped"),
        };
        let scale = a * (fp - fm) / (2.0 * c);
        for (t, dlt) in theta.iter_mut().zip(&delta) {
            // Δ⁻¹ = Δ for ±1 entries
            *t -= scale * dlt;
        }
        if r % cfg.log_every == 0 || r == cfg.iterations {
            let (rec, _) = record(&*counted.obj, &theta, r, 0.5 * (fp + fm), Some((a, c)), start)?;
            keep(&mut trace, rec, &theta);
        }
    }
    let theta = best.map_or(theta, |(_, x)| x);
    Ok(OptOutcome { theta, trace, status })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowellConfig {
    /// Total evaluation cap; `None` is unlimited.
    pub max_evaluations: Option<u64>,
    /// Relative tolerance of each line search.
    pub line_tol: f64,
    /// Stop when a full cycle improves the cost by less than this (relative).
    pub tol: f64,
    /// Safety bound on direction-set cycles.
    pub max_cycles: u64,
    /// Initial bracketing step.
    pub step: f64,
}

impl Default for PowellConfig {
    fn default() -> Self {
        Self {
            max_evaluations: None,
            line_tol: 1e-4,
            tol: 1e-6,
            max_cycles: 10_000,
            step: 1.0,
        }
    }
}

impl PowellConfig {
    fn validate(&self) -> Result<()> {
        if self.max_evaluations == Some(0) {
            return Err(Error::InvalidParameter("evaluation cap must be at least 1".into()));
        }
        for (name, v) in [("line_tol", self.line_tol), ("tol", self.tol), ("step", self.step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;
const GLIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const BRACKET_ITERS: usize = 60;
const BRENT_ITERS: usize = 100;
const BRENT_FLOOR: f64 = 1e-10;

/// f along the line x0 + λ·dir.
struct Line<'c, 'a, O: Objective + ?Sized> {
    counted: &'c mut Counted<'a, O>,
    x0: &'c [f64],
    dir: &'c [f64],
    buf: Vec<f64>,
}

impl<O: Objective + ?Sized> Line<'_, '_, O> {
    fn at(&mut self, lambda: f64) -> std::result::Result<f64, Halt> {
        for ((b, x), d) in self.buf.iter_mut().zip(self.x0).zip(self.dir) {
            *b = x + lambda * d;
        }
        let buf = std::mem::take(&mut self.buf);
        let v = self.counted.eval(&buf);
        self.buf = buf;
        v
    }

    /// Downhill bracket (a, b, c) with f(b) ≤ f(a), f(c); starts from f(0) = f0.
    fn bracket(&mut self, f0: f64, step: f64) -> std::result::Result<[(f64, f64); 3], Halt> {
        let (mut ax, mut fa) = (0.0, f0);
        let (mut bx, mut fb) = (step, self.at(step)?);
        if fb > fa {
            std::mem::swap(&mut ax, &mut bx);
            std::mem::swap(&mut fa, &mut fb);
        }
        let mut cx = bx + GOLD * (bx - ax);
        let mut fc = self.at(cx)?;
        let mut iters = 0;
        while fb > fc && iters < BRACKET_ITERS {
            iters += 1;
            let r = (bx - ax) * (fb - fc);
            let q = (bx - cx) * (fb - fa);
            let denom = 2.0 * (q - r).abs().max(TINY).copysign(q - r);
            let mut u = bx - ((bx - cx) * q - (bx - ax) * r) / denom;
            let ulim = bx + GLIMIT * (cx - bx);
            let mut fu;
            if (bx - u) * (u - cx) > 0.0 {
                fu = self.at(u)?;
                if fu < fc {
                    return Ok([(bx, fb), (u, fu), (cx, fc)]);
                } else if fu > fb {
                    return Ok([(ax, fa), (bx, fb), (u, fu)]);
                }
                u = cx + GOLD * (cx - bx);
                fu = self.at(u)?;
            } else if (cx - u) * (u - ulim) > 0.0 {
                fu = self.at(u)?;
                if fu < fc {
                    bx = cx;
                    cx = u;
                    u = cx + GOLD * (cx - bx);
                    fb = fc;
                    fc = fu;
                    fu = self.at(u)?;
                }
            } else if (u - ulim) * (ulim - cx) >= 0.0 {
                u = ulim;
                fu = self.at(u)?;
            } else {
                u = cx + GOLD * (cx - bx);
                fu = self.at(u)?;
            }
            ax = bx;
            bx = cx;
            cx = u;
            fa = fb;
            fb = fc;
            fc = fu;
        }
        Ok([(ax, fa), (bx, fb), (cx, fc)])
    }

    /// Brent's parabolic/golden minimization inside a bracket.
    fn brent(&mut self, bracket: [(f64, f64); 3], tol: f64) -> std::result::Result<(f64, f64), Halt> {
        let [(ax, _), (bx, fbx), (cx, _)] = bracket;
        let (mut a, mut b) = (ax.min(cx), ax.max(cx));
        let (mut x, mut w, mut v) = (bx, bx, bx);
        let (mut fx, mut fw, mut fv) = (fbx, fbx, fbx);
        let (mut d, mut e) = (0.0f64, 0.0f64);
        for _ in 0..BRENT_ITERS {
            let xm = 0.5 * (a + b);
            let tol1 = tol * x.abs() + BRENT_FLOOR;
            let tol2 = 2.0 * tol1;
            if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
                break;
            }
            let mut golden = true;
            if e.abs() > tol1 {
                let r = (x - w) * (fx - fv);
                let mut q = (x - v) * (fx - fw);
                let mut p = (x - v) * q - (x - w) * r;
                q = 2.0 * (q - r);
                if q > 0.0 {
                    p = -p;
                }
                q = q.abs();
                let etemp = e;
                e = d;
                if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                    d = p / q;
                    let u = x + d;
                    if u - a < tol2 || b - u < tol2 {
                        d = tol1.copysign(xm - x);
                    }
                    golden = false;
                }
            }
            if golden {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            }
            let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
            let fu = self.at(u)?;
            if fu <= fx {
                if u >= x {
                    a = x;
                } else {
                    b = x;
                }
                (v, w, x) = (w, x, u);
                (fv, fw, fx) = (fw, fx, fu);
            } else {
                if u < x {
                    a = u;
                } else {
                    b = u;
                }
                if fu <= fw || w == x {
                    (v, w) = (w, u);
                    (fv, fw) = (fw, fu);
                } else if fu <= fv || v == x || v == w {
                    v = u;
                    fv = fu;
                }
            }
        }
        Ok((x, fx))
    }
}

/// Line minimization from `x` along `dir`; updates `x` in place, returns the new value.
fn line_minimize<O: Objective + ?Sized>(
    counted: &mut Counted<'_, O>,
    x: &mut [f64],
    fx: f64,
    dir: &[f64],
    cfg: &PowellConfig,
) -> std::result::Result<f64, Halt> {
    let x0 = x.to_vec();
    let mut line = Line {
        counted,
        x0: &x0,
        dir,
        buf: vec![0.0; x0.len()],
    };
    let bracket = line.bracket(fx, cfg.step)?;
    let (lambda, fmin) = line.brent(bracket, cfg.line_tol)?;
    if fmin < fx {
        for ((xi, x0i), d) in x.iter_mut().zip(&x0).zip(dir) {
            *xi = x0i + lambda * d;
        }
        Ok(fmin)
    } else {
        Ok(fx)
    }
}

/// Powell's direction-set method. One trace row per completed cycle, plus
/// the start point and a final row at the best point seen.
pub fn powell_minimize<O: Objective + ?Sized>(obj: &mut O, theta0: &[f64], cfg: &PowellConfig) -> Result<OptOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let n = theta0.len();
    let mut trace = OptTrace::default();
    let mut counted = Counted::new(obj, cfg.max_evaluations);
    let mut x = theta0.to_vec();
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let outcome: std::result::Result<OptStatus, Halt> = (|| {
        let mut fx = counted.eval(&x)?;
        let (rec, _) = record(&*counted.obj, &x, 0, fx, None, start)?;
        trace.records.push(rec);
        for cycle in 1..=cfg.max_cycles {
            let fstart = fx;
            let xstart = x.clone();
            let (mut big_i, mut big_drop) = (0, 0.0);
            for (i, dir) in dirs.iter().enumerate() {
                let before = fx;
                fx = line_minimize(&mut counted, &mut x, fx, dir, cfg)?;
                if before - fx > big_drop {
                    big_drop = before - fx;
                    big_i = i;
                }
            }
            let (rec, _) = record(&*counted.obj, &x, cycle, fx, None, start)?;
            trace.records.push(rec);
            if 2.0 * (fstart - fx) <= cfg.tol * (fstart.abs() + fx.abs()) + TINY {
                return Ok(OptStatus::Converged);
            }
            let new_dir: Vec<f64> = x.iter().zip(&xstart).map(|(a, b)| a - b).collect();
            let extrapolated: Vec<f64> = x.iter().zip(&xstart).map(|(a, b)| 2.0 * a - b).collect();
            let fe = counted.eval(&extrapolated)?;
            if fe < fstart {
                let t = 2.0 * (fstart - 2.0 * fx + fe) * (fstart - fx - big_drop).powi(2)
                    - big_drop * (fstart - fe).powi(2);
                if t < 0.0 {
                    fx = line_minimize(&mut counted, &mut x, fx, &new_dir, cfg)?;
                    dirs.remove(big_i);
                    dirs.push(new_dir);
                }
            }
        }
        Ok(OptStatus::Completed)
    })();
    let status = match outcome {
        Ok(s) => s,
        Err(Halt::Cap) => OptStatus::CapReached,
        Err(Halt::Failed(e)) => OptStatus::Aborted(e.to_string()),
    };
    let (best_value, theta) = counted.best.clone().unwrap_or((f64::NAN, x));
    let iter = trace.records.last().map_or(0, |r| r.iter + 1);
    let (rec, _) = record(&*counted.obj, &theta, iter, best_value, None, start)?;
    trace.records.push(rec);
    Ok(OptOutcome { theta, trace, status })
}
