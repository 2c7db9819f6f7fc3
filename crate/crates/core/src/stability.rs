//! Empirical stability of learning algorithms and the matching bound calculators.
//!
//! A [`Learner`] maps a dataset and a replica id to a model. Uniform stability
//! compares models trained on replace-one neighbors at a set of probe points;
//! pointwise hypothesis stability compares `A(S)` and `A(S \ z_i)` at `z_i`.
//! Replica `r` of a coupled measurement runs both trainings on stream `r`, so
//! randomized learners share their index sequences.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optim::{self, descend_to_tolerance, RecordMode, RunConfig, StepSchedule};
use crate::problems::{
    EmpiricalRisk, ExampleZ, LabeledDataset, Objective, ParamVector, ProblemInstance,
};
use crate::rng;

pub const CONSTANTS_NOTE: &str = "constants suppressed: O(·) evaluated with constant 1";

/// A (possibly randomized) training algorithm.
pub trait Learner: Sync {
    fn name(&self) -> String;

    fn is_randomized(&self) -> bool;

    /// Model trained on `data`; `stream` selects the random stream.
    fn train(
        &self,
        problem: &ProblemInstance,
        data: &LabeledDataset,
        stream: u64,
    ) -> Result<ParamVector>;
}

impl Learner for RunConfig {
    fn name(&self) -> String {
        self.algorithm.name().to_string()
    }

    fn is_randomized(&self) -> bool {
        self.algorithm.is_randomized()
    }

    fn train(
        &self,
        problem: &ProblemInstance,
        data: &LabeledDataset,
        stream: u64,
    ) -> Result<ParamVector> {
        let f = EmpiricalRisk::new(problem, data)?;
        let cfg = self
            .clone()
            .stream(self.stream + stream)
            .record(RecordMode::Final);
        Ok(optim::run(&f, &cfg)?.last)
    }
}

/// Exact empirical risk minimizer from the closed form.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErmOracle;

impl Learner for ErmOracle {
    fn name(&self) -> String {
        "erm".into()
    }

    fn is_randomized(&self) -> bool {
        false
    }

    fn train(
        &self,
        problem: &ProblemInstance,
        data: &LabeledDataset,
        _stream: u64,
    ) -> Result<ParamVector> {
        EmpiricalRisk::new(problem, data)?
            .known_minimizer()
            .ok_or_else(|| {
                Error::Unsupported(format!(
                    "no closed-form minimizer for {}",
                    problem.kind.name()
                ))
            })
    }
}

/// Full-gradient descent from `w0` until `‖∇f_S‖ ≤ tol`.
#[derive(Clone, Debug)]
pub struct GdToTolerance {
    pub w0: ParamVector,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Learner for GdToTolerance {
    fn name(&self) -> String {
        format!("gd(tol={:e})", self.tol)
    }

    fn is_randomized(&self) -> bool {
        false
    }

    fn train(
        &self,
        problem: &ProblemInstance,
        data: &LabeledDataset,
        _stream: u64,
    ) -> Result<ParamVector> {
        let f = EmpiricalRisk::new(problem, data)?;
        let (w, steps) = descend_to_tolerance(&f, &self.w0, self.gamma, self.tol, self.max_iter)?;
        if steps == self.max_iter && f.gradient(&w).norm() > self.tol {
            return Err(Error::Undefined(format!(
                "gradient tolerance {:e} not reached in {} steps",
                self.tol, self.max_iter
            )));
        }
        Ok(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uniform,
    Pointwise,
}

/// Probe configuration for a stability measurement.
#[derive(Clone, Debug)]
pub struct StabilityProbe {
    pub mode: Mode,
    /// Points `z` at which losses are compared (uniform mode).
    pub probes: Vec<ExampleZ>,
    pub replicas: usize,
    pub seed: u64,
    pub coupled: bool,
    /// Indices `i` to drop in pointwise mode; `None` means all.
    pub indices: Option<Vec<usize>>,
}

impl StabilityProbe {
    pub fn uniform(probes: Vec<ExampleZ>, replicas: usize) -> Self {
        Self {
            mode: Mode::Uniform,
            probes,
            replicas,
            seed: 0,
            coupled: true,
            indices: None,
        }
    }

    pub fn pointwise(replicas: usize) -> Self {
        Self {
            mode: Mode::Pointwise,
            probes: Vec::new(),
            replicas,
            seed: 0,
            coupled: true,
            indices: None,
        }
    }

    pub fn coupled(mut self, on: bool) -> Self {
        self.coupled = on;
        self
    }

    fn streams(&self, r: usize) -> (u64, u64) {
        let r = r as u64;
        if self.coupled {
            (r, r)
        } else {
            (2 * r, 2 * r + 1)
        }
    }
}

/// Grid of `per_dim²` points on `[−c, c]²` restricted to the disk `‖z‖ ≤ c`,
/// as scalar-feature examples `(x, y)`, in row-major order.
pub fn disk_grid(per_dim: usize, c: f64) -> Vec<ExampleZ> {
    let step = |k: usize| -c + 2.0 * c * k as f64 / (per_dim - 1).max(1) as f64;
    let mut out = Vec::new();
    for i in 0..per_dim {
        for j in 0..per_dim {
            let (x, y) = (step(i), step(j));
            if x * x + y * y <= c * c * (1.0 + 1e-12) {
                out.push(ExampleZ::scalar(x, y));
            }
        }
    }
    out
}

/// `count` points uniform in the ball `‖(x, y)‖ ≤ c` with `x ∈ R^feature_dim`.
pub fn random_ball_probes(feature_dim: usize, c: f64, count: usize, seed: u64) -> Vec<ExampleZ> {
    (0..count)
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let d = feature_dim + 1;
            let mut v =
                DVector::from_iterator(d, (0..d).map(|_| r.sample::<f64, _>(StandardNormal)));
            let n = v.norm();
            if n > 0.0 {
                v /= n;
            }
            v *= c * rng::unit(&mut r).powf(1.0 / d as f64);
            ExampleZ::new(
                v.rows(0, feature_dim).iter().copied().collect::<Vec<_>>(),
                v[feature_dim],
            )
        })
        .collect()
}

/// The default sup-approximation set: a 401-per-axis disk grid when `z` is
/// two-dimensional, plus 1000 random points of the ball `‖z‖ ≤ c`.
pub fn default_probes(feature_dim: usize, c: f64, seed: u64) -> Vec<ExampleZ> {
    let mut out = if feature_dim == 1 {
        disk_grid(401, c)
    } else {
        Vec::new()
    };
    out.extend(random_ball_probes(feature_dim, c, 1000, seed));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformStability {
    /// `max_z |E[ℓ(A(S); z) − ℓ(A(S′); z)]|`.
    pub value: f64,
    /// Signed mean difference at the maximizer.
    pub signed: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_y: f64,
    pub replicas: usize,
    pub probes: usize,
}

/// Weighted model pairs `(A(S), A(S′), weight)`; weights need not be normalised.
pub fn uniform_gap_weighted(
    problem: &ProblemInstance,
    pairs: &[(ParamVector, ParamVector, f64)],
    probes: &[ExampleZ],
) -> Result<UniformStability> {
    if probes.is_empty() {
        return Err(invalid("probe set is empty"));
    }
    if pairs.is_empty() {
        return Err(invalid("no model pairs"));
    }
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    if !(total > 0.0) {
        return Err(invalid("pair weights must sum to a positive value"));
    }
    for z in probes {
        if z.x.len() != problem.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: problem.feature_dim,
                got: z.x.len(),
            });
        }
    }
    let means: Vec<f64> = probes
        .par_iter()
        .map(|z| {
            pairs
                .iter()
                .map(|(a, b, w)| w * (problem.loss_unchecked(a, z) - problem.loss_unchecked(b, z)))
                .sum::<f64>()
                / total
        })
        .collect();
    let (k, signed) = means
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |(bk, bv), (k, v)| {
            if v.abs() > bv.abs() {
                (k, v)
            } else {
                (bk, bv)
            }
        });
    Ok(UniformStability {
        value: signed.abs(),
        signed,
        argmax_x: probes[k].x.iter().copied().collect(),
        argmax_y: probes[k].y,
        replicas: pairs.len(),
        probes: probes.len(),
    })
}

/// Train on `S` and `S′` for every replica (paired streams when coupled).
pub fn train_pairs<L: Learner + ?Sized>(
    problem: &ProblemInstance,
    s: &LabeledDataset,
    s_prime: &LabeledDataset,
    learner: &L,
    probe: &StabilityProbe,
) -> Result<Vec<(ParamVector, ParamVector, f64)>> {
    if !s.is_neighbor_of(s_prime) {
        return Err(invalid(
            "datasets are not neighbors (same length, at most one differing example)",
        ));
    }
    if probe.replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    let replicas = if learner.is_randomized() {
        probe.replicas
    } else {
        1
    };
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (a, b) = probe.streams(r);
            Ok((
                learner.train(problem, s, a)?,
                learner.train(problem, s_prime, b)?,
                1.0,
            ))
        })
        .collect()
}

pub fn measure_uniform_stability<L: Learner + ?Sized>(
    problem: &ProblemInstance,
    s: &LabeledDataset,
    s_prime: &LabeledDataset,
    learner: &L,
    probe: &StabilityProbe,
) -> Result<UniformStability> {
    if probe.mode != Mode::Uniform {
        return Err(invalid("probe is not in uniform mode"));
    }
    let pairs = train_pairs(problem, s, s_prime, learner, probe)?;
    uniform_gap_weighted(problem, &pairs, &probe.probes)
}

/// `E_{i, A}|ℓ(A(S); z_i) − ℓ(A(S \ z_i); z_i)|`.
pub fn measure_pointwise_stability<L: Learner + ?Sized>(
    problem: &ProblemInstance,
    s: &LabeledDataset,
    learner: &L,
    probe: &StabilityProbe,
) -> Result<f64> {
    if probe.mode != Mode::Pointwise {
        return Err(invalid("probe is not in pointwise mode"));
    }
    if s.len() < 2 {
        return Err(invalid("pointwise stability needs n ≥ 2"));
    }
    if probe.replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    let indices: Vec<usize> = probe
        .indices
        .clone()
        .unwrap_or_else(|| (0..s.len()).collect());
    let replicas = if learner.is_randomized() {
        probe.replicas
    } else {
        1
    };
    let full: Vec<ParamVector> = (0..replicas)
        .into_par_iter()
        .map(|r| learner.train(problem, s, probe.streams(r).0))
        .collect::<Result<_>>()?;
    let per_index: Vec<f64> = indices
        .par_iter()
        .map(|&i| {
            let dropped = s.drop(i)?;
            let z = s.get(i)?;
            let mut acc = 0.0;
            for (r, w) in full.iter().enumerate() {
                let wi = learner.train(problem, &dropped, probe.streams(r).1)?;
                acc += (problem.loss_unchecked(w, z) - problem.loss_unchecked(&wi, z)).abs();
            }
            Ok(acc / replicas as f64)
        })
        .collect::<Result<_>>()?;
    Ok(per_index.iter().sum::<f64>() / per_index.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    PlPointwise,
    QgPointwise,
    PlUniform,
    QgUniform,
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pl-ptwise" => Ok(Theorem::PlPointwise),
            "qg-ptwise" => Ok(Theorem::QgPointwise),
            "pl-uniform" => Ok(Theorem::PlUniform),
            "qg-uniform" => Ok(Theorem::QgUniform),
            other => Err(invalid(format!("unknown theorem `{other}`"))),
        }
    }
}

/// Inputs for the black-box bounds. Which fields are needed depends on the case.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundInputs {
    pub lipschitz: f64,
    pub mu: f64,
    pub n: u64,
    /// Loss bound `ℓ ≤ c` (QG theorems).
    pub c: Option<f64>,
    /// `‖w_S − w_S*‖` (case 1).
    pub eps: Option<f64>,
    /// `|f_S(w_S) − f_S(w_S*)|` (case 2).
    pub eps_value: Option<f64>,
    /// `‖∇f_S(w_S)‖` (case 3).
    pub eps_grad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub case: u8,
    pub inputs: BoundInputs,
    pub bound: f64,
    pub note: &'static str,
}

/// Stability bound for an algorithm converging to a global minimizer.
///
/// PL theorems: convergence term (`L ε`, `L √(ε′/μ)` or `L ε″/μ`) plus
/// `2L²/(μ(n−1))` pointwise or `2L²/(μn)` uniform. QG theorems: cases 1–2 only,
/// with `2L √(c/(μn))` in place of the ERM term.
pub fn blackbox_bound(theorem: Theorem, case: u8, inputs: BoundInputs) -> Result<BoundReport> {
    let BoundInputs {
        lipschitz: l,
        mu,
        n,
        ..
    } = inputs;
    if !(l >= 0.0 && mu > 0.0) {
        return Err(invalid("need L ≥ 0 and μ > 0"));
    }
    let qg = matches!(theorem, Theorem::QgPointwise | Theorem::QgUniform);
    let pointwise = matches!(theorem, Theorem::PlPointwise | Theorem::QgPointwise);
    let needed =
        |v: Option<f64>, what: &str| v.ok_or_else(|| invalid(format!("case {case} needs {what}")));
    let convergence = match (case, qg) {
        (1, _) => l * needed(inputs.eps, "ε (distance to the minimizer)")?,
        (2, _) => l * (needed(inputs.eps_value, "ε′ (suboptimality)")? / mu).sqrt(),
        (3, false) => l * needed(inputs.eps_grad, "ε″ (gradient norm)")? / mu,
        (3, true) => return Err(invalid("QG theorems have cases 1 and 2 only")),
        _ => return Err(invalid(format!("unknown case {case}"))),
    };
    let erm = if qg {
        let c = needed(inputs.c, "the loss bound c")?;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        2.0 * l * (c / (mu * n as f64)).sqrt()
    } else {
        let denom = if pointwise { n.saturating_sub(1) } else { n };
        if denom == 0 {
            return Err(invalid("n too small for the bound"));
        }
        2.0 * l * l / (mu * denom as f64)
    };
    Ok(BoundReport {
        theorem,
        case,
        inputs,
        bound: convergence + erm,
        note: CONSTANTS_NOTE,
    })
}

/// Distance, suboptimality and gradient norm of `w` relative to the minimizer
/// nearest to it (the projection). Distance is `None` without a projection.
pub fn convergence_measures<O: Objective + ?Sized>(
    f: &O,
    w: &ParamVector,
) -> (Option<f64>, Option<f64>, f64) {
    let dist = f.project_to_minimizers(w).map(|p| (w - p).norm());
    (dist, f.suboptimality(w), f.gradient(w).norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum GenMode {
    Uniform {
        eps: f64,
    },
    Pointwise {
        m: f64,
        n: u64,
        beta: f64,
        delta: f64,
    },
}

/// Uniform: the gap is at most `ε`. Pointwise: with probability `1 − δ`,
/// `R ≤ R_S + √((M² + 12Mnβ)/(2nδ))`; returns the square-root term.
pub fn generalization_bounds(mode: GenMode) -> Result<f64> {
    match mode {
        GenMode::Uniform { eps } => Ok(eps),
        GenMode::Pointwise { m, n, beta, delta } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(invalid(format!("δ must lie in (0, 1), got {delta}")));
            }
            if n == 0 {
                return Err(invalid("n must be positive"));
            }
            let n = n as f64;
            Ok(((m * m + 12.0 * m * n * beta) / (2.0 * n * delta)).sqrt())
        }
    }
}

/// A synthetic data distribution.
pub trait DataGenerator: Sync {
    fn sample(&self, rng: &mut rng::StreamRng) -> ExampleZ;
}

/// All mass on one example.
#[derive(Clone, Debug)]
pub struct PointMass(pub ExampleZ);

impl DataGenerator for PointMass {
    fn sample(&self, _rng: &mut rng::StreamRng) -> ExampleZ {
        self.0.clone()
    }
}

/// `x` uniform in the ball of radius `radius` in `R^d`, label 0.
#[derive(Clone, Debug)]
pub struct UniformBall {
    pub d: usize,
    pub radius: f64,
}

impl DataGenerator for UniformBall {
    fn sample(&self, r: &mut rng::StreamRng) -> ExampleZ {
        let mut v = DVector::from_iterator(
            self.d,
            (0..self.d).map(|_| r.sample::<f64, _>(StandardNormal)),
        );
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        v *= self.radius * rng::unit(r).powf(1.0 / self.d as f64);
        ExampleZ::new(v.iter().copied().collect::<Vec<_>>(), 0.0)
    }
}

/// Finite support with the given probabilities.
#[derive(Clone, Debug)]
pub struct Discrete {
    pub atoms: Vec<(ExampleZ, f64)>,
}

impl DataGenerator for Discrete {
    fn sample(&self, r: &mut rng::StreamRng) -> ExampleZ {
        let total: f64 = self.atoms.iter().map(|a| a.1).sum();
        let mut u = rng::unit(r) * total;
        for (z, p) in &self.atoms {
            if u < *p {
                return z.clone();
            }
            u -= p;
        }
        self.atoms.last().expect("nonempty support").0.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenGapReport {
    pub n: usize,
    pub trials: usize,
    pub holdout: usize,
    /// Mean of `|R_S[A(S)] − R̂[A(S)]|`.
    pub mean_abs_gap: f64,
    /// Mean of `R̂[A(S)] − R_S[A(S)]`.
    pub mean_signed_gap: f64,
    /// Standard error of the signed mean across trials.
    pub se_signed: f64,
}

/// Draw `trials` training sets of size `n`, train, and compare the training
/// risk with a Monte-Carlo estimate of the expected risk on `holdout` fresh
/// samples (shared across trials).
#[allow(clippy::too_many_arguments)]
pub fn measure_generalization_gap<L: Learner + ?Sized, G: DataGenerator + ?Sized>(
    problem: &ProblemInstance,
    generator: &G,
    learner: &L,
    n: usize,
    trials: usize,
    holdout: usize,
    seed: u64,
) -> Result<GenGapReport> {
    if n == 0 || trials == 0 || holdout == 0 {
        return Err(invalid("n, trials and holdout must be positive"));
    }
    let test: Vec<ExampleZ> = (0..holdout)
        .map(|k| generator.sample(&mut rng::stream(seed ^ 0x7e57, k as u64)))
        .collect();
    let gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let s = LabeledDataset::new(
                (0..n).map(|_| generator.sample(&mut r)).collect(),
                format!("trial{t}"),
            )?;
            let w = learner.train(problem, &s, t as u64)?;
            EmpiricalRisk::new(problem, &s)?;
            let rs = running_mean(s.examples().iter().map(|z| problem.loss_unchecked(&w, z)));
            let r_hat = running_mean(test.iter().map(|z| problem.loss_unchecked(&w, z)));
            Ok(r_hat - rs)
        })
        .collect::<Result<_>>()?;
    let k = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / k;
    let var = if gaps.len() > 1 {
        gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(GenGapReport {
        n,
        trials,
        holdout,
        mean_abs_gap: gaps.iter().map(|g| g.abs()).sum::<f64>() / k,
        mean_signed_gap: mean,
        se_signed: (var / k).sqrt(),
    })
}

/// Incremental mean; exact when all values are equal.
fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    for (k, v) in values.enumerate() {
        m += (v - m) / (k + 1) as f64;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub passed: bool,
    /// `‖π_S(w_{S′}*) − w_S*‖`.
    pub distance: f64,
}

/// Check `π_S(w_{S′}*) = w_S*` within `1e−8`, where `w_S*` is the minimizer of
/// `f_S` an algorithm started at `anchor` converges to: the projection of
/// `anchor` onto the minimizer set.
pub fn check_assumption_1(
    problem: &ProblemInstance,
    s: &LabeledDataset,
    s_prime: &LabeledDataset,
    anchor: &ParamVector,
) -> Result<AssumptionReport> {
    let f = EmpiricalRisk::new(problem, s)?;
    let g = EmpiricalRisk::new(problem, s_prime)?;
    let unsupported = || {
        Error::Unsupported(format!(
            "no minimizer projection for {}",
            problem.kind.name()
        ))
    };
    let w_s = f.project_to_minimizers(anchor).ok_or_else(unsupported)?;
    let w_sp = g.project_to_minimizers(anchor).ok_or_else(unsupported)?;
    let back = f.project_to_minimizers(&w_sp).ok_or_else(unsupported)?;
    let distance = (back - w_s).norm();
    Ok(AssumptionReport {
        passed: distance <= 1e-8,
        distance,
    })
}

/// `max ‖∇ℓ(w; z)‖` over the given points and examples: a Lipschitz constant
/// valid on the region a set of runs actually visited.
pub fn lipschitz_along(
    problem: &ProblemInstance,
    examples: &[ExampleZ],
    points: &[ParamVector],
) -> f64 {
    points
        .par_iter()
        .map(|w| {
            examples
                .iter()
                .map(|z| problem.grad_unchecked(w, z).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Convex GD divergence bound `(2L/n) Σ_{t≤T} γ_t` (valid for `γ_t ≤ 2/β`).
pub fn gd_convex_divergence_bound(
    lipschitz: f64,
    n: usize,
    schedule: &StepSchedule,
    t: usize,
) -> f64 {
    2.0 * lipschitz / n as f64 * schedule.partial_sum(t)
}

/// Strongly convex GD divergence bound `2L/(λn)` (constant `γ ≤ 1/β`).
pub fn gd_strongly_convex_divergence_bound(lipschitz: f64, lambda: f64, n: usize) -> f64 {
    2.0 * lipschitz / (lambda * n as f64)
}

/// Coupled SGD divergence bound `2γLT/n` for convex losses.
pub fn sgd_coupled_divergence_bound(lipschitz: f64, gamma: f64, t: usize, n: usize) -> f64 {
    2.0 * gamma * lipschitz * t as f64 / n as f64
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("need at least two matching points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
