//! First-order methods on finite sums: GD, SGD, randomized coordinate descent and SVRG.
//!
//! Each run is single-threaded and owns one random stream keyed by
//! `(seed, stream)`; parallelism happens across runs.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problems::{
    EmpiricalRisk, FiniteSum, LabeledDataset, Objective, ParamVector, ProblemInstance,
};
use crate::report::fmt_num;
use crate::rng::{self, StreamRng};

/// Iterates with `‖w‖` above this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepSchedule {
    /// `γ_t = γ`.
    Constant(f64),
    /// `γ_t = c / t` for `t ≥ 1`.
    InverseT(f64),
    /// `γ_1 = kick`, then `γ_t = min(cap, c / t)`.
    KickThenDecay { kick: f64, cap: f64, c: f64 },
}

impl StepSchedule {
    /// Step size for iteration `t ≥ 1`.
    pub fn step(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            StepSchedule::Constant(g) => g,
            StepSchedule::InverseT(c) => c / t as f64,
            StepSchedule::KickThenDecay { kick, cap, c } => {
                if t == 1 {
                    kick
                } else {
                    cap.min(c / t as f64)
                }
            }
        }
    }

    /// `Σ_{t ≤ T} γ_t`.
    pub fn partial_sum(&self, t_max: usize) -> f64 {
        (1..=t_max).map(|t| self.step(t)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(g) => g > 0.0 && g.is_finite(),
            StepSchedule::InverseT(c) => c > 0.0 && c.is_finite(),
            StepSchedule::KickThenDecay { kick, cap, c } => {
                [kick, cap, c].iter().all(|v| *v > 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "step schedule must be positive and finite: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Sgd,
    Rcd,
    Svrg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::Rcd => "rcd",
            Algorithm::Svrg => "svrg",
        }
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, Algorithm::Gd)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Algorithm::Gd),
            "sgd" => Ok(Algorithm::Sgd),
            "rcd" => Ok(Algorithm::Rcd),
            "svrg" => Ok(Algorithm::Svrg),
            other => Err(invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// What a run keeps in memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RecordMode {
    /// Full iterate history when `d·(T+1)` fits the budget, scalars otherwise.
    Auto {
        budget: usize,
    },
    Full,
    /// Per-iteration risks, gradient norms and drift; no iterates.
    Scalars,
    /// Only the final iterate.
    Final,
}

impl Default for RecordMode {
    fn default() -> Self {
        RecordMode::Auto { budget: 1 << 22 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Iterations (outer epochs for SVRG).
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub seed: u64,
    /// Stream id within the seed; replicas use distinct streams.
    pub stream: u64,
    /// SVRG inner-loop length.
    pub inner_len: usize,
    pub w0: ParamVector,
    pub record: RecordMode,
}

impl RunConfig {
    pub fn new(
        algorithm: Algorithm,
        iterations: usize,
        schedule: StepSchedule,
        w0: ParamVector,
    ) -> Self {
        Self {
            algorithm,
            iterations,
            schedule,
            seed: 0,
            stream: 0,
            inner_len: 1,
            w0,
            record: RecordMode::default(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn inner_len(mut self, m: usize) -> Self {
        self.inner_len = m;
        self
    }

    pub fn record(mut self, mode: RecordMode) -> Self {
        self.record = mode;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iteration count must be at least 1"));
        }
        if self.algorithm == Algorithm::Svrg && self.inner_len == 0 {
            return Err(invalid("SVRG inner-loop length must be at least 1"));
        }
        if self.w0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.w0.len(),
            });
        }
        if self.w0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("w0 has non-finite entries"));
        }
        self.schedule.validate()
    }

    fn keeps_iterates(&self) -> bool {
        match self.record {
            RecordMode::Full => true,
            RecordMode::Auto { budget } => self.w0.len() * (self.iterations + 1) <= budget,
            RecordMode::Scalars | RecordMode::Final => false,
        }
    }
}

/// Per-iteration record of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    /// `w_0, …, w_T` (empty unless iterates are recorded).
    pub iterates: Vec<ParamVector>,
    pub risks: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// `‖w_t − w_0‖`.
    pub drift: Vec<f64>,
    /// Sampled example (SGD) or coordinate (RCD) per step.
    pub indices: Vec<usize>,
    /// Largest norm of any gradient used in an update.
    pub max_update_grad_norm: f64,
    pub last: ParamVector,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    /// CSV with columns `t, f, grad_norm, drift` and `w_0..w_{d−1}` when iterates exist.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let d = self.last.len();
        let full = !self.iterates.is_empty();
        let mut header = vec![
            "t".to_string(),
            "f".into(),
            "grad_norm".into(),
            "drift".into(),
        ];
        if full {
            header.extend((0..d).map(|j| format!("w_{j}")));
        }
        wtr.write_record(&header)?;
        for t in 0..self.risks.len() {
            let mut row = vec![
                t.to_string(),
                fmt_num(self.risks[t]),
                fmt_num(self.grad_norms[t]),
                fmt_num(self.drift[t]),
            ];
            if full {
                row.extend(self.iterates[t].iter().map(|v| fmt_num(*v)));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct Recorder {
    keep_iterates: bool,
    scalars: bool,
    w0: ParamVector,
    traj: Trajectory,
}

impl Recorder {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            keep_iterates: cfg.keeps_iterates(),
            scalars: cfg.record != RecordMode::Final,
            w0: cfg.w0.clone(),
            traj: Trajectory::default(),
        }
    }

    fn push<O: Objective + ?Sized>(&mut self, f: &O, w: &ParamVector, grad: Option<&ParamVector>) {
        if !self.scalars {
            return;
        }
        if self.keep_iterates {
            self.traj.iterates.push(w.clone());
        }
        self.traj.risks.push(f.value(w));
        let gn = match grad {
            Some(g) => g.norm(),
            None => f.gradient(w).norm(),
        };
        self.traj.grad_norms.push(gn);
        self.traj.drift.push((w - &self.w0).norm());
    }

    fn finish(mut self, w: ParamVector) -> Trajectory {
        self.traj.last = w;
        self.traj
    }
}

fn guard(w: &ParamVector, iteration: usize) -> Result<()> {
    let norm = w.norm();
    if !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(Error::Diverged { iteration, norm });
    }
    Ok(())
}

/// Full-gradient descent on any objective.
pub fn run_gd_on<O: Objective + ?Sized>(f: &O, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate(f.dim())?;
    let mut rec = Recorder::new(cfg);
    let mut w = cfg.w0.clone();
    let mut g = f.gradient(&w);
    for t in 1..=cfg.iterations {
        rec.push(f, &w, Some(&g));
        rec.traj.max_update_grad_norm = rec.traj.max_update_grad_norm.max(g.norm());
        w.axpy(-cfg.schedule.step(t), &g, 1.0);
        guard(&w, t)?;
        g = f.gradient(&w);
    }
    rec.push(f, &w, Some(&g));
    Ok(rec.finish(w))
}

/// SGD with a caller-supplied index sampler `draw(t, rng)`; `t` starts at 1.
///
/// The sampler must consume the stream identically on coupled runs for the
/// coupling to hold. [`run`] uses a uniform draw.
pub fn run_sgd_with<F, D>(f: &F, cfg: &RunConfig, mut draw: D) -> Result<Trajectory>
where
    F: FiniteSum + ?Sized,
    D: FnMut(usize, &mut StreamRng) -> usize,
{
    cfg.validate(f.dim())?;
    let n = f.n();
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut rec = Recorder::new(cfg);
    let mut w = cfg.w0.clone();
    for t in 1..=cfg.iterations {
        rec.push(f, &w, None);
        let i = draw(t, &mut rng);
        if i >= n {
            return Err(Error::IndexOutOfRange {
                what: "example",
                index: i,
                len: n,
            });
        }
        let g = f.example_gradient(&w, i);
        rec.traj.max_update_grad_norm = rec.traj.max_update_grad_norm.max(g.norm());
        if rec.scalars {
            rec.traj.indices.push(i);
        }
        w.axpy(-cfg.schedule.step(t), &g, 1.0);
        guard(&w, t)?;
    }
    rec.push(f, &w, None);
    Ok(rec.finish(w))
}

fn run_rcd_on<F: FiniteSum + ?Sized>(f: &F, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate(f.dim())?;
    let d = f.dim();
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut rec = Recorder::new(cfg);
    let mut w = cfg.w0.clone();
    for t in 1..=cfg.iterations {
        rec.push(f, &w, None);
        let j = rng::index(&mut rng, d);
        let gj = f.coordinate_gradient(&w, j);
        rec.traj.max_update_grad_norm = rec.traj.max_update_grad_norm.max(gj.abs());
        if rec.scalars {
            rec.traj.indices.push(j);
        }
        w[j] -= cfg.schedule.step(t) * gj;
        guard(&w, t)?;
    }
    rec.push(f, &w, None);
    Ok(rec.finish(w))
}

fn run_svrg_on<F: FiniteSum + ?Sized>(f: &F, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate(f.dim())?;
    let n = f.n();
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut rec = Recorder::new(cfg);
    let mut w = cfg.w0.clone();
    for epoch in 1..=cfg.iterations {
        let snapshot = w.clone();
        let full = f.gradient(&snapshot);
        rec.push(f, &w, Some(&full));
        let gamma = cfg.schedule.step(epoch);
        for k in 0..cfg.inner_len {
            let i = rng::index(&mut rng, n);
            let mut v = f.example_gradient(&w, i);
            v -= f.example_gradient(&snapshot, i);
            v += &full;
            rec.traj.max_update_grad_norm = rec.traj.max_update_grad_norm.max(v.norm());
            w.axpy(-gamma, &v, 1.0);
            guard(&w, (epoch - 1) * cfg.inner_len + k + 1)?;
        }
    }
    rec.push(f, &w, None);
    Ok(rec.finish(w))
}

/// Dispatch on `cfg.algorithm`.
pub fn run<F: FiniteSum + ?Sized>(f: &F, cfg: &RunConfig) -> Result<Trajectory> {
    match cfg.algorithm {
        Algorithm::Gd => run_gd_on(f, cfg),
        Algorithm::Sgd => {
            let n = f.n();
            run_sgd_with(f, cfg, |_, rng| rng::index(rng, n))
        }
        Algorithm::Rcd => run_rcd_on(f, cfg),
        Algorithm::Svrg => run_svrg_on(f, cfg),
    }
}

fn expect(cfg: &RunConfig, algorithm: Algorithm) -> Result<()> {
    if cfg.algorithm != algorithm {
        return Err(invalid(format!(
            "config is for {}, called as {}",
            cfg.algorithm.name(),
            algorithm.name()
        )));
    }
    Ok(())
}

pub fn run_gd(
    problem: &ProblemInstance,
    data: &LabeledDataset,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    expect(cfg, Algorithm::Gd)?;
    run(&EmpiricalRisk::new(problem, data)?, cfg)
}

pub fn run_sgd(
    problem: &ProblemInstance,
    data: &LabeledDataset,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    expect(cfg, Algorithm::Sgd)?;
    run(&EmpiricalRisk::new(problem, data)?, cfg)
}

pub fn run_rcd(
    problem: &ProblemInstance,
    data: &LabeledDataset,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    expect(cfg, Algorithm::Rcd)?;
    run(&EmpiricalRisk::new(problem, data)?, cfg)
}

pub fn run_svrg(
    problem: &ProblemInstance,
    data: &LabeledDataset,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    expect(cfg, Algorithm::Svrg)?;
    run(&EmpiricalRisk::new(problem, data)?, cfg)
}

/// Plain GD until `‖∇f‖ ≤ tol` or `max_iter` steps; returns the final point and
/// the number of steps taken.
pub fn descend_to_tolerance<O: Objective + ?Sized>(
    f: &O,
    w0: &ParamVector,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ParamVector, usize)> {
    let mut w = w0.clone();
    for t in 0..max_iter {
        let g = f.gradient(&w);
        if g.norm() <= tol {
            return Ok((w, t));
        }
        w.axpy(-gamma, &g, 1.0);
        guard(&w, t + 1)?;
    }
    Ok((w, max_iter))
}

pub fn zeros(d: usize) -> ParamVector {
    DVector::zeros(d)
}
