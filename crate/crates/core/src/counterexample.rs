//! A one-dimensional quartic where gradient descent is unstable and SGD is not.
//!
//! The loss is `ℓ(w; (x, y)) = (w²x² + wx − y)²`. With half the data at
//! `(−1, 1)` and half at `(−1/2, 1)` the empirical risk `g` has a local maximum
//! at `ŵ ≈ 0.598` between two basins. The extra example
//! `z± = (−1/(2(ŵ ± ε)), 0)` tilts the slope at `ŵ` one way or the other,
//! so GD started near `ŵ` on `S` (with `z₋`) and on `S′` (with `z₊`) ends in
//! different basins. SGD takes its first step on a shared example with
//! probability `(n−1)/n` and leaves the window around `ŵ` before the differing
//! example matters.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optim::{self, Algorithm, RecordMode, RunConfig, StepSchedule};
use crate::problems::{
    EmpiricalRisk, ExampleZ, LabeledDataset, Objective, ParamVector, ProblemInstance,
};
use crate::rng;
use crate::stability::{default_probes, loglog_slope, uniform_gap_weighted};

/// Grid resolution of the window scans.
pub const SCAN_POINTS: usize = 100_000;

/// Slope magnitude required on the SGD window.
pub const SLOPE_FLOOR: f64 = 0.4;

/// Terminal gradient norm that counts as converged.
pub const GD_GRAD_TOL: f64 = 1e-8;

pub fn z_a() -> ExampleZ {
    ExampleZ::scalar(-1.0, 1.0)
}

/// Probe point `z* = (−1/2, 1)`; also the second data atom.
pub fn z_star() -> ExampleZ {
    ExampleZ::scalar(-0.5, 1.0)
}

/// `dℓ/dw` for scalar `w` and `z = (x, y)`.
pub fn dloss(w: f64, x: f64, y: f64) -> f64 {
    let u = w * x;
    2.0 * (u * u + u - y) * (2.0 * u + 1.0) * x
}

pub fn loss1(w: f64, x: f64, y: f64) -> f64 {
    let u = w * x;
    (u * u + u - y).powi(2)
}

/// `g(w) = ½[ℓ(w; (−1, 1)) + ℓ(w; (−1/2, 1))]`.
pub fn g(w: f64) -> f64 {
    0.5 * (loss1(w, -1.0, 1.0) + loss1(w, -0.5, 1.0))
}

/// `g′(w) = (w² − w − 1)(2w − 1) + (w²/4 − w/2 − 1)(w/2 − 1/2)`.
pub fn g_prime(w: f64) -> f64 {
    (w * w - w - 1.0) * (2.0 * w - 1.0) + (w * w / 4.0 - w / 2.0 - 1.0) * (w / 2.0 - 0.5)
}

pub fn g_second(w: f64) -> f64 {
    // Product rule on both factors of g′.
    (2.0 * w - 1.0) * (2.0 * w - 1.0)
        + 2.0 * (w * w - w - 1.0)
        + (w / 2.0 - 0.5) * (w / 2.0 - 0.5)
        + 0.5 * (w * w / 4.0 - w / 2.0 - 1.0)
}

/// Interior stationary point of `g` by bisection on `[0.5, 1]`, run to
/// machine precision.
pub fn locate_what() -> Result<f64> {
    let (mut lo, mut hi) = (0.5f64, 1.0f64);
    let (flo, fhi) = (g_prime(lo), g_prime(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::Construction(format!(
            "bisection bracket invalid: g′(0.5) = {flo}, g′(1) = {fhi}"
        )));
    }
    while hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_prime(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g_prime(lo).abs() <= g_prime(hi).abs() {
        lo
    } else {
        hi
    })
}

/// `z± = (−1/(2(ŵ ± ε)), 0)`.
pub fn z_shift(w_hat: f64, shift: f64) -> ExampleZ {
    ExampleZ::scalar(-1.0 / (2.0 * (w_hat + shift)), 0.0)
}

/// Everything the experiments need about the construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuarticLandscape {
    pub n: usize,
    pub w_hat: f64,
    /// Local minima of `g`, `w_left < ŵ < w_right`.
    pub w_left: f64,
    pub w_right: f64,
    pub eps: f64,
    /// Half-width of the window where `f_S′ < 0 < f_{S′}′`.
    pub delta: f64,
    /// Half-width of the window where the data slopes exceed 0.4 in magnitude.
    pub eta: f64,
    pub z_plus: (f64, f64),
    pub z_minus: (f64, f64),
    pub z_star: (f64, f64),
}

impl QuarticLandscape {
    /// `|ℓ(w_left; z*) − ℓ(w_right; z*)|`.
    pub fn basin_loss_gap(&self) -> f64 {
        (loss1(self.w_left, -0.5, 1.0) - loss1(self.w_right, -0.5, 1.0)).abs()
    }

    /// `d/dw f_S` with the last example `(x, 0)`: the exact mean over the dataset.
    pub fn risk_slope(&self, w: f64, x_last: f64) -> f64 {
        let n = self.n as f64;
        let half = (self.n - 1) as f64 / 2.0;
        (half * (dloss(w, -1.0, 1.0) + dloss(w, -0.5, 1.0)) + dloss(w, x_last, 0.0)) / n
    }
}

/// Minima of `g` by gradient descent from `−1` and `1.5` to `|g′| ≤ 1e−12`.
pub fn basin_minima() -> (f64, f64) {
    let descend = |mut w: f64| {
        for _ in 0..100_000 {
            let d = g_prime(w);
            if d.abs() <= 1e-12 {
                break;
            }
            w -= 0.05 * d;
        }
        w
    };
    (descend(-1.0), descend(1.5))
}

/// Largest `r ≤ radius`, one grid spacing inside the nearest failure, such
/// that `ok` holds at every grid point of `[center − r, center + r]`, scanning `SCAN_POINTS` points of
/// `[center − radius, center + radius]`.
fn symmetric_window(center: f64, radius: f64, ok: impl Fn(f64) -> bool) -> f64 {
    let spacing = 2.0 * radius / (SCAN_POINTS - 1) as f64;
    let mut r = radius;
    for k in 0..SCAN_POINTS {
        let w = center - radius + spacing * k as f64;
        if !ok(w) {
            r = r.min((w - center).abs() - spacing);
        }
    }
    r.max(0.0)
}

/// Half-width of the SGD slope window around `ŵ` (independent of `n` and `ε`).
pub fn slope_window(w_hat: f64) -> f64 {
    symmetric_window(w_hat, 0.1, |w| {
        dloss(w, -1.0, 1.0) < -SLOPE_FLOOR && dloss(w, -0.5, 1.0) > SLOPE_FLOOR
    })
}

/// `S` with `z₋` last and its neighbor `S′` with `z₊` last.
pub fn build_datasets(
    n: usize,
    eps: f64,
) -> Result<(LabeledDataset, LabeledDataset, QuarticLandscape)> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(invalid(format!("n must be odd and at least 3, got {n}")));
    }
    if !(eps > 0.0 && eps < 0.1) {
        return Err(invalid(format!("ε must lie in (0, 0.1), got {eps}")));
    }
    let w_hat = locate_what()?;
    let (w_left, w_right) = basin_minima();
    let zp = z_shift(w_hat, eps);
    let zm = z_shift(w_hat, -eps);
    let half = (n - 1) / 2;
    let mut examples: Vec<ExampleZ> = Vec::with_capacity(n);
    examples.extend(std::iter::repeat_n(z_a(), half));
    examples.extend(std::iter::repeat_n(z_star(), half));
    examples.push(zm.clone());
    let s = LabeledDataset::new(examples, format!("S(n={n},eps={eps})"))?;
    let s_prime = s.neighbor(n - 1, zp.clone())?;

    let mut land = QuarticLandscape {
        n,
        w_hat,
        w_left,
        w_right,
        eps,
        delta: 0.0,
        eta: slope_window(w_hat),
        z_plus: (zp.x[0], zp.y),
        z_minus: (zm.x[0], zm.y),
        z_star: (-0.5, 1.0),
    };
    let ok = |w: f64| land.risk_slope(w, zm.x[0]) < 0.0 && 0.0 < land.risk_slope(w, zp.x[0]);
    if !ok(w_hat) {
        return Err(Error::Construction(format!(
            "sign scan failed at ŵ for n = {n}, ε = {eps}: slopes {} and {}",
            land.risk_slope(w_hat, zm.x[0]),
            land.risk_slope(w_hat, zp.x[0])
        )));
    }
    land.delta = symmetric_window(w_hat, eps, ok);
    if !(land.delta > 0.0) {
        return Err(Error::Construction(format!(
            "empty sign window for n = {n}, ε = {eps}"
        )));
    }
    if !(land.eta > 0.0) {
        return Err(Error::Construction("empty slope window".into()));
    }
    Ok((s, s_prime, land))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GdInitRow {
    pub init: f64,
    pub w_s: f64,
    pub w_s_prime: f64,
    pub loss_s: f64,
    pub loss_s_prime: f64,
    /// `|ℓ(A(S); z*) − ℓ(A(S′); z*)|`, NaN if a run diverged.
    pub gap: f64,
    /// `sign(w_T − ŵ)` for each run; 0 if diverged.
    pub side_s: i8,
    pub side_s_prime: i8,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GdInstabilityReport {
    pub landscape: QuarticLandscape,
    pub gamma: f64,
    pub rows: Vec<GdInitRow>,
    /// Fraction of initializations with gap at least 1/2.
    pub fraction_unstable: f64,
    /// Some run hit the iteration cap before converging.
    pub inconclusive: bool,
}

fn side(w: f64, w_hat: f64) -> i8 {
    if w > w_hat {
        1
    } else if w < w_hat {
        -1
    } else {
        0
    }
}

/// Run GD with step `γ` from `w0`, doubling the horizon from `t` until the
/// gradient norm drops below [`GD_GRAD_TOL`] or `t_max` steps have run.
fn gd_to_convergence<O: Objective>(
    f: &O,
    w0: f64,
    gamma: f64,
    t: usize,
    t_max: usize,
) -> Result<(f64, usize, bool)> {
    let mut w: ParamVector = ParamVector::from_element(1, w0);
    let mut done = 0usize;
    let mut chunk = t.max(1);
    loop {
        let cfg = RunConfig::new(
            Algorithm::Gd,
            chunk,
            StepSchedule::Constant(gamma),
            w.clone(),
        )
        .record(RecordMode::Final);
        w = optim::run_gd_on(f, &cfg)?.last;
        done += chunk;
        let converged = f.gradient(&w).norm() <= GD_GRAD_TOL;
        if converged || done >= t_max {
            return Ok((w[0], done, converged));
        }
        chunk = done.min(t_max - done);
    }
}

/// GD on `S` and `S′` from `inits` points uniform in `(ŵ − δ, ŵ + δ)`.
pub fn gd_instability_experiment(
    n: usize,
    eps: f64,
    gamma: f64,
    t: usize,
    inits: usize,
    seed: u64,
) -> Result<GdInstabilityReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("γ must lie in (0, 1], got {gamma}")));
    }
    if inits == 0 {
        return Err(invalid("need at least one initialization"));
    }
    let (s, s_prime, land) = build_datasets(n, eps)?;
    let problem = ProblemInstance::quartic(1);
    let fs = EmpiricalRisk::new(&problem, &s)?;
    let fsp = EmpiricalRisk::new(&problem, &s_prime)?;
    let t_max = t.max(1) << 12;
    let rows: Vec<GdInitRow> = (0..inits)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let init = rng::uniform(&mut r, land.w_hat - land.delta, land.w_hat + land.delta);
            let a = gd_to_convergence(&fs, init, gamma, t, t_max);
            let b = gd_to_convergence(&fsp, init, gamma, t, t_max);
            match (a, b) {
                (Ok((wa, ia, ca)), Ok((wb, ib, cb))) => {
                    let (la, lb) = (loss1(wa, -0.5, 1.0), loss1(wb, -0.5, 1.0));
                    Ok(GdInitRow {
                        init,
                        w_s: wa,
                        w_s_prime: wb,
                        loss_s: la,
                        loss_s_prime: lb,
                        gap: (la - lb).abs(),
                        side_s: side(wa, land.w_hat),
                        side_s_prime: side(wb, land.w_hat),
                        iterations: ia.max(ib),
                        converged: ca && cb,
                        diverged: false,
                    })
                }
                (Err(Error::Diverged { iteration, .. }), _)
                | (_, Err(Error::Diverged { iteration, .. })) => Ok(GdInitRow {
                    init,
                    w_s: f64::NAN,
                    w_s_prime: f64::NAN,
                    loss_s: f64::NAN,
                    loss_s_prime: f64::NAN,
                    gap: f64::NAN,
                    side_s: 0,
                    side_s_prime: 0,
                    iterations: iteration,
                    converged: false,
                    diverged: true,
                }),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let unstable = rows.iter().filter(|r| r.gap >= 0.5).count();
    let inconclusive = rows.iter().any(|r| !r.diverged && !r.converged);
    Ok(GdInstabilityReport {
        landscape: land,
        gamma,
        fraction_unstable: unstable as f64 / inits as f64,
        inconclusive,
        rows,
    })
}

/// How SGD replicas are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Sampling {
    /// Every replica draws all indices uniformly.
    Plain,
    /// Stratified on the first index: `rare` replicas start on the differing
    /// example (weight `1/n` in total), `common` replicas start on a uniformly
    /// chosen shared example (weight `(n−1)/n` in total). Initial points are
    /// stratified within each group. The estimand equals the plain one.
    Stratified { rare: usize, common: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SgdConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub sampling: Sampling,
    pub seed: u64,
}

impl SgdConfig {
    /// `γ₁ = 1`, then `γ_t = min(0.02, 10/t)`, 2000 steps, 400/100 stratification.
    pub fn standard(seed: u64) -> Self {
        Self {
            iterations: 2000,
            schedule: StepSchedule::KickThenDecay {
                kick: 1.0,
                cap: 0.02,
                c: 10.0,
            },
            sampling: Sampling::Stratified {
                rare: 400,
                common: 100,
            },
            seed,
        }
    }

    pub fn replicas(&self, plain: usize) -> usize {
        match self.sampling {
            Sampling::Plain => plain,
            Sampling::Stratified { rare, common } => rare + common,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SgdStabilityReport {
    pub n: usize,
    pub replicas: usize,
    /// `max_z |E[ℓ(A(S); z) − ℓ(A(S′); z)]|` over the probe set.
    pub value: f64,
    pub signed: f64,
    pub argmax: (f64, f64),
    /// Gap at `z*` alone.
    pub gap_at_z_star: f64,
    /// Weighted probability that the first draw is the differing example.
    pub first_draw_frequency: f64,
    /// Replicas whose first draw was the differing example.
    pub first_draw_count: usize,
    /// Weighted share of pairs ending on opposite sides of `ŵ`.
    pub split_fraction: f64,
    /// Mean `|f_S′(w_T)|` over the `S` runs.
    pub mean_final_grad: f64,
    pub diverged: usize,
}

struct Replica {
    weight: f64,
    /// First index forced to the differing example, to a shared one, or free.
    first: FirstDraw,
    /// Position of the initial point within `[ŵ − η, ŵ + η]` as a fraction.
    u0: f64,
}

#[derive(Clone, Copy)]
enum FirstDraw {
    Differing,
    Shared,
    Free,
}

fn replicas_for(sampling: Sampling, n: usize, plain: usize, seed: u64) -> Vec<Replica> {
    let nf = n as f64;
    let stratified_u = |k: usize, total: usize, stream: u64| {
        let mut r = rng::stream(seed ^ 0x1417, stream);
        (k as f64 + rng::unit(&mut r)) / total as f64
    };
    match sampling {
        Sampling::Plain => (0..plain)
            .map(|k| Replica {
                weight: 1.0,
                first: FirstDraw::Free,
                u0: rng::unit(&mut rng::stream(seed ^ 0x1417, k as u64)),
            })
            .collect(),
        Sampling::Stratified { rare, common } => {
            let mut out = Vec::with_capacity(rare + common);
            for k in 0..rare {
                out.push(Replica {
                    weight: 1.0 / nf / rare as f64,
                    first: FirstDraw::Differing,
                    u0: stratified_u(k, rare, k as u64),
                });
            }
            for k in 0..common {
                out.push(Replica {
                    weight: (nf - 1.0) / nf / common as f64,
                    first: FirstDraw::Shared,
                    u0: stratified_u(k, common, (rare + k) as u64),
                });
            }
            out
        }
    }
}

/// Coupled SGD runs on `S` and `S′` from initial points in `[ŵ − η, ŵ + η]`.
pub fn sgd_stability_experiment(
    n: usize,
    eps: f64,
    cfg: &SgdConfig,
    plain_replicas: usize,
) -> Result<SgdStabilityReport> {
    cfg.schedule.validate()?;
    let (s, s_prime, land) = build_datasets(n, eps)?;
    let problem = ProblemInstance::quartic(1);
    let fs = EmpiricalRisk::new(&problem, &s)?;
    let fsp = EmpiricalRisk::new(&problem, &s_prime)?;
    let reps = replicas_for(cfg.sampling, n, plain_replicas, cfg.seed);
    if reps.is_empty() {
        return Err(invalid("need at least one replica"));
    }
    let differing = n - 1;
    let runs: Vec<Option<(ParamVector, ParamVector, f64, bool)>> = reps
        .par_iter()
        .enumerate()
        .map(|(k, rep)| {
            let w0 = land.w_hat - land.eta + 2.0 * land.eta * rep.u0;
            let run_cfg = RunConfig::new(
                Algorithm::Sgd,
                cfg.iterations,
                cfg.schedule,
                ParamVector::from_element(1, w0),
            )
            .seed(cfg.seed)
            .stream(k as u64)
            .record(RecordMode::Final);
            let draw = |t: usize, r: &mut rng::StreamRng| match (t, rep.first) {
                (1, FirstDraw::Differing) => differing,
                (1, FirstDraw::Shared) => rng::index(r, n - 1),
                _ => rng::index(r, n),
            };
            let a = optim::run_sgd_with(&fs, &run_cfg, draw);
            let b = optim::run_sgd_with(&fsp, &run_cfg, draw);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let first_is_differing = match rep.first {
                        FirstDraw::Differing => true,
                        FirstDraw::Shared => false,
                        FirstDraw::Free => {
                            let mut r = rng::stream(cfg.seed, k as u64);
                            rng::index(&mut r, n) == differing
                        }
                    };
                    Some((a.last, b.last, rep.weight, first_is_differing))
                }
                _ => None,
            }
        })
        .collect();
    let diverged = runs.iter().filter(|r| r.is_none()).count();
    let ok: Vec<_> = runs.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Undefined("every SGD replica diverged".into()));
    }
    let total: f64 = ok.iter().map(|r| r.2).sum();
    let pairs: Vec<(ParamVector, ParamVector, f64)> =
        ok.iter().map(|r| (r.0.clone(), r.1.clone(), r.2)).collect();
    let probes = default_probes(1, 2.0, cfg.seed);
    let u = uniform_gap_weighted(&problem, &pairs, &probes)?;
    let at_star = uniform_gap_weighted(&problem, &pairs, &[z_star()])?;
    let first_draw_frequency = ok.iter().filter(|r| r.3).map(|r| r.2).sum::<f64>() / total;
    let split_fraction = ok
        .iter()
        .filter(|r| side(r.0[0], land.w_hat) != side(r.1[0], land.w_hat))
        .map(|r| r.2)
        .sum::<f64>()
        / total;
    let mean_final_grad = ok
        .iter()
        .map(|r| r.2 * fs.gradient(&r.0).norm())
        .sum::<f64>()
        / total;
    Ok(SgdStabilityReport {
        n,
        replicas: reps.len(),
        value: u.value,
        signed: u.signed,
        argmax: (u.argmax_x[0], u.argmax_y),
        gap_at_z_star: at_star.value,
        first_draw_frequency,
        first_draw_count: ok.iter().filter(|r| r.3).count(),
        split_fraction,
        mean_final_grad,
        diverged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SgdSweep {
    pub rows: Vec<SgdStabilityReport>,
    /// Log-log slope of the measured stability against `n`.
    pub slope: f64,
}

pub fn sgd_sweep(
    ns: &[usize],
    eps: f64,
    cfg: &SgdConfig,
    plain_replicas: usize,
) -> Result<SgdSweep> {
    let rows = ns
        .iter()
        .map(|&n| sgd_stability_experiment(n, eps, cfg, plain_replicas))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (slope, _) = loglog_slope(&xs, &ys)?;
    Ok(SgdSweep { rows, slope })
}

/// Smallest `|w₁ − ŵ|` after one unit step on a shared example from a grid of
/// starting points in `[ŵ − η, ŵ + η]`.
pub fn min_first_step_exit(land: &QuarticLandscape, points: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for k in 0..points {
        let w0 = land.w_hat - land.eta + 2.0 * land.eta * k as f64 / (points - 1).max(1) as f64;
        for (x, y) in [(-1.0, 1.0), (-0.5, 1.0)] {
            let w1 = w0 - dloss(w0, x, y);
            worst = worst.min((w1 - land.w_hat).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w_hat_matches_printed_values() {
        let w = locate_what().unwrap();
        assert!((0.5980..=0.5981).contains(&w), "{w}");
        assert!(g_prime(w).abs() < 1e-12);
        assert!((dloss(w, -1.0, 1.0) + 0.486254).abs() <= 1e-3);
        assert!((dloss(w, -0.5, 1.0) - 0.486254).abs() <= 1e-3);
        assert!(g_second(w) < 0.0);
    }

    #[test]
    fn g_prime_is_half_the_data_gradient() {
        for w in [-1.3, -0.2, 0.4, 0.9, 2.1] {
            let direct = 0.5 * (dloss(w, -1.0, 1.0) + dloss(w, -0.5, 1.0));
            assert!((direct - g_prime(w)).abs() < 1e-12);
            let h = 1e-5;
            let fd = (g_prime(w + h) - g_prime(w - h)) / (2.0 * h);
            assert!((fd - g_second(w)).abs() < 1e-6);
        }
    }

    #[test]
    fn basins_are_far_apart_at_z_star() {
        let (_, _, land) = build_datasets(11, 0.01).unwrap();
        assert!(land.w_left < land.w_hat && land.w_hat < land.w_right);
        assert!(g_prime(land.w_left).abs() <= 1e-12 && g_prime(land.w_right).abs() <= 1e-12);
        assert!(land.basin_loss_gap() > 1.0);
    }

    #[test]
    fn datasets_have_the_stated_shape() {
        let (s, sp, land) = build_datasets(11, 0.01).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.examples().iter().filter(|z| **z == z_a()).count(), 5);
        assert_eq!(s.examples().iter().filter(|z| **z == z_star()).count(), 5);
        assert_eq!(s.differing_positions(&sp).unwrap(), vec![10]);
        assert_eq!(sp.examples()[10].x[0], land.z_plus.0);
        assert!(build_datasets(10, 0.01).is_err());
        assert!(build_datasets(11, 0.2).is_err());
    }

    #[test]
    fn closed_form_slope_matches_empirical_gradient() {
        let (s, sp, land) = build_datasets(21, 0.01).unwrap();
        let p = ProblemInstance::quartic(1);
        for w in [0.55, land.w_hat, 0.63] {
            let gs = EmpiricalRisk::new(&p, &s)
                .unwrap()
                .gradient(&ParamVector::from_element(1, w))[0];
            let gsp = EmpiricalRisk::new(&p, &sp)
                .unwrap()
                .gradient(&ParamVector::from_element(1, w))[0];
            assert!((gs - land.risk_slope(w, land.z_minus.0)).abs() < 1e-12);
            assert!((gsp - land.risk_slope(w, land.z_plus.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_mean_decomposition() {
        let (s, _, land) = build_datasets(11, 0.01).unwrap();
        let p = ProblemInstance::quartic(1);
        let f = EmpiricalRisk::new(&p, &s).unwrap();
        for w in [-0.5, 0.3, 1.7] {
            let direct = f.value(&ParamVector::from_element(1, w));
            let decomposed = 10.0 / 11.0 * g(w) + loss1(w, land.z_minus.0, 0.0) / 11.0;
            assert!((direct - decomposed).abs() < 1e-14);
        }
    }

    #[test]
    fn sign_condition_holds_on_the_window() {
        let (_, _, land) = build_datasets(51, 0.01).unwrap();
        assert!(land.delta > 0.0);
        for k in 0..=1000 {
            let w = land.w_hat - land.delta + 2.0 * land.delta * k as f64 / 1000.0;
            assert!(land.risk_slope(w, land.z_minus.0) < 0.0);
            assert!(land.risk_slope(w, land.z_plus.0) > 0.0);
        }
    }

    #[test]
    fn perturbation_bumps_have_the_stated_slopes() {
        let (_, _, land) = build_datasets(11, 0.01).unwrap();
        let (w_hat, eps) = (land.w_hat, land.eps);
        for k in 1..10_000 {
            let w = (w_hat + eps) * k as f64 / 10_000.0;
            assert!(dloss(w, land.z_plus.0, 0.0) > 0.0, "{w}");
            let v = (w_hat - eps) + (w_hat - eps) * k as f64 / 10_000.0;
            assert!(dloss(v, land.z_minus.0, 0.0) < 0.0, "{v}");
        }
    }

    #[test]
    fn slope_window_and_first_step_exit() {
        let (_, _, land) = build_datasets(11, 0.01).unwrap();
        assert!(land.eta > 0.01 && land.eta < 0.05, "{}", land.eta);
        for k in 0..=1000 {
            let w = land.w_hat - land.eta + 2.0 * land.eta * k as f64 / 1000.0;
            assert!(dloss(w, -1.0, 1.0) < -SLOPE_FLOOR);
            assert!(dloss(w, -0.5, 1.0) > SLOPE_FLOOR);
        }
        let at_center = QuarticLandscape {
            eta: 0.0,
            ..land.clone()
        };
        assert!(min_first_step_exit(&at_center, 1) > 0.4);
        // At the window edge the slope floor minus the offset is the guarantee.
        let exit = min_first_step_exit(&land, 1001);
        assert!(exit >= SLOPE_FLOOR - land.eta, "{exit}");
        assert!(exit < 0.4);
    }

    #[test]
    fn gd_small_step_separates_basins() {
        let rep = gd_instability_experiment(11, 0.01, 0.1, 200, 8, 3).unwrap();
        assert!(!rep.inconclusive);
        assert_eq!(rep.fraction_unstable, 1.0);
        for r in &rep.rows {
            assert_eq!(r.side_s, 1);
            assert_eq!(r.side_s_prime, -1);
        }
    }

    #[test]
    fn gd_gap_invariant_past_convergence() {
        let a = gd_instability_experiment(11, 0.01, 0.1, 200, 4, 5).unwrap();
        let b = gd_instability_experiment(11, 0.01, 0.1, 800, 4, 5).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.gap - y.gap).abs() < 1e-9);
        }
    }

    #[test]
    fn plain_first_draw_frequency_is_one_over_n() {
        let cfg = SgdConfig {
            iterations: 5,
            sampling: Sampling::Plain,
            ..SgdConfig::standard(11)
        };
        let rep = sgd_stability_experiment(11, 0.01, &cfg, 2000).unwrap();
        let p: f64 = 1.0 / 11.0;
        let tol = 3.0 * (p * (1.0 - p) / 2000.0).sqrt();
        assert!(
            (rep.first_draw_frequency - p).abs() <= tol,
            "{}",
            rep.first_draw_frequency
        );
    }

    #[test]
    fn stratified_weights_sum_to_one() {
        let reps = replicas_for(Sampling::Stratified { rare: 7, common: 3 }, 11, 0, 1);
        let total: f64 = reps.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let rare: f64 = reps
            .iter()
            .filter(|r| matches!(r.first, FirstDraw::Differing))
            .map(|r| r.weight)
            .sum();
        assert!((rare - 1.0 / 11.0).abs() < 1e-12);
    }
}
