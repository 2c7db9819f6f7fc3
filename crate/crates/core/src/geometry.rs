//! Sampled estimates of the geometric constants of an objective.
//!
//! Every estimator draws points from a [`RegionSampler`], evaluates them in
//! parallel, and reduces in sample order so results are reproducible from
//! `(seed, count, region)`. Estimates are witnesses, not certificates: a
//! Lipschitz estimate is the largest gradient seen, a PL estimate the smallest
//! ratio seen.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optim::descend_to_tolerance;
use crate::problems::{
    EmpiricalRisk, ExampleZ, FStarSource, LabeledDataset, Objective, ParamVector, ProblemInstance,
};
use crate::rng;

/// Samples with `f − f*` at or below this are skipped in ratio estimates.
pub const OPTIMUM_TOL: f64 = 1e-10;

/// Relative error allowed by [`grad_check`].
pub const GRAD_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn ball(center: &ParamVector, radius: f64) -> Self {
        Region::Ball {
            center: center.iter().copied().collect(),
            radius,
        }
    }

    /// Ball of radius 2 around the origin.
    pub fn default_ball(d: usize) -> Self {
        Region::Ball {
            center: vec![0.0; d],
            radius: 2.0,
        }
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Region::Box {
            lo: vec![lo; d],
            hi: vec![hi; d],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }

    /// Characteristic length (radius, or half the longest box side).
    pub fn scale(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max) / 2.0
            }
        }
    }

    pub fn contains(&self, w: &ParamVector) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let c = DVector::from_column_slice(center);
                (w - c).norm() <= radius * (1.0 + 1e-12)
            }
            Region::Box { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> ParamVector {
        match self {
            Region::Ball { center, radius } => {
                let d = center.len();
                let mut dir =
                    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let norm = dir.norm();
                if norm > 0.0 {
                    dir /= norm;
                }
                let r = radius * rng::unit(rng).powf(1.0 / d as f64);
                DVector::from_column_slice(center) + dir * r
            }
            Region::Box { lo, hi } => DVector::from_iterator(
                lo.len(),
                lo.iter().zip(hi).map(|(a, b)| rng::uniform(rng, *a, *b)),
            ),
        }
    }
}

type Predicate<'a> = &'a (dyn Fn(&ParamVector) -> bool + Sync);

/// Deterministic point cloud over a region. Point `k` comes from stream `k` of
/// `seed`, so the cloud does not depend on thread scheduling.
#[derive(Clone)]
pub struct RegionSampler<'a> {
    pub region: Region,
    pub count: usize,
    pub seed: u64,
    exclude: Option<Predicate<'a>>,
}

impl<'a> RegionSampler<'a> {
    pub fn new(region: Region, count: usize, seed: u64) -> Self {
        Self {
            region,
            count,
            seed,
            exclude: None,
        }
    }

    /// Points for which `pred` is true are dropped.
    pub fn excluding(mut self, pred: Predicate<'a>) -> Self {
        self.exclude = Some(pred);
        self
    }

    pub fn point(&self, k: usize) -> ParamVector {
        let mut r = rng::stream(self.seed, k as u64);
        self.region.draw(&mut r)
    }

    /// Accepted points in draw order and the number rejected by the predicate.
    pub fn samples(&self) -> (Vec<ParamVector>, usize) {
        let pts: Vec<ParamVector> = (0..self.count)
            .into_par_iter()
            .map(|k| self.point(k))
            .collect();
        let before = pts.len();
        let kept: Vec<_> = match self.exclude {
            Some(pred) => pts.into_iter().filter(|w| !pred(w)).collect(),
            None => pts,
        };
        let excluded = before - kept.len();
        (kept, excluded)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Lipschitz,
    Smoothness,
    PlMu,
    QgMu,
    ErrorBoundMu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Largest value found; a lower bound on the true supremum.
    UpperWitness,
    /// Smallest value found; an upper bound on the true infimum.
    LowerWitness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryEstimate {
    pub quantity: Quantity,
    pub value: f64,
    pub direction: Direction,
    #[serde(rename = "N")]
    pub samples: usize,
    /// Samples that contributed a ratio.
    pub used: usize,
    pub excluded: usize,
    pub witness: Vec<f64>,
    pub seed: u64,
    pub region: Region,
    pub f_star_source: Option<FStarSource>,
}

impl GeometryEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluate `score` on every kept sample and keep the extreme in sample order.
fn extreme<O, S>(
    f: &O,
    sampler: &RegionSampler,
    quantity: Quantity,
    direction: Direction,
    f_star_source: Option<FStarSource>,
    score: S,
) -> Result<GeometryEstimate>
where
    O: Objective + ?Sized,
    S: Fn(&ParamVector) -> Option<f64> + Sync,
{
    if sampler.count == 0 {
        return Err(invalid("sampler has no points"));
    }
    if sampler.region.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: sampler.region.dim(),
        });
    }
    let (pts, mut excluded) = sampler.samples();
    let kinks = pts.par_iter().map(|w| f.excluded(w)).collect::<Vec<_>>();
    let scores: Vec<Option<f64>> = pts
        .par_iter()
        .zip(&kinks)
        .map(|(w, &skip)| if skip { None } else { score(w) })
        .collect();
    excluded += kinks.iter().filter(|k| **k).count();
    let mut best: Option<(f64, usize)> = None;
    let mut used = 0;
    for (k, s) in scores.iter().enumerate() {
        let Some(v) = *s else { continue };
        used += 1;
        let better = match (best, direction) {
            (None, _) => true,
            (Some((b, _)), Direction::UpperWitness) => v > b,
            (Some((b, _)), Direction::LowerWitness) => v < b,
        };
        if better {
            best = Some((v, k));
        }
    }
    let Some((value, k)) = best else {
        return Err(Error::Undefined(format!(
            "{quantity:?}: no usable samples ({excluded} excluded, rest within tolerance of the optimum)"
        )));
    };
    Ok(GeometryEstimate {
        quantity,
        value,
        direction,
        samples: sampler.count,
        used,
        excluded,
        witness: pts[k].iter().copied().collect(),
        seed: sampler.seed,
        region: sampler.region.clone(),
        f_star_source,
    })
}

/// `L̂ = max ‖∇f‖` over the samples.
pub fn estimate_lipschitz<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
) -> Result<GeometryEstimate> {
    extreme(
        f,
        sampler,
        Quantity::Lipschitz,
        Direction::UpperWitness,
        None,
        |w| Some(f.gradient(w).norm()),
    )
}

/// `β̂ = max ‖∇f(u) − ∇f(v)‖ / ‖u − v‖` over short random chords starting at each sample.
pub fn estimate_smoothness<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
) -> Result<GeometryEstimate> {
    let h = 1e-3 * sampler.region.scale().max(1e-12);
    let seed = sampler.seed ^ 0x5eed_cafe;
    let d = f.dim();
    extreme(
        f,
        sampler,
        Quantity::Smoothness,
        Direction::UpperWitness,
        None,
        |u| {
            let mut r = rng::stream(
                seed,
                u.iter().fold(0u64, |a, v| a.rotate_left(7) ^ v.to_bits()),
            );
            let mut dir =
                DVector::from_iterator(d, (0..d).map(|_| r.sample::<f64, _>(StandardNormal)));
            let n = dir.norm();
            if n == 0.0 {
                return None;
            }
            dir *= h / n;
            let v = u + &dir;
            if f.excluded(&v) {
                return None;
            }
            Some((f.gradient(u) - f.gradient(&v)).norm() / dir.norm())
        },
    )
}

fn gap_fn<'o, O: Objective + ?Sized>(
    f: &'o O,
    f_star: f64,
) -> impl Fn(&ParamVector) -> f64 + Sync + 'o {
    let exact = f.min_value() == Some(f_star);
    move |w| {
        if exact {
            f.suboptimality(w).unwrap_or_else(|| f.value(w) - f_star)
        } else {
            f.value(w) - f_star
        }
    }
}

/// `μ̂_PL = min ½‖∇f‖² / (f − f*)` over samples with `f − f* > OPTIMUM_TOL`.
pub fn estimate_pl<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
    f_star: f64,
    source: FStarSource,
) -> Result<GeometryEstimate> {
    let gap = gap_fn(f, f_star);
    extreme(
        f,
        sampler,
        Quantity::PlMu,
        Direction::LowerWitness,
        Some(source),
        |w| {
            let g = gap(w);
            (g > OPTIMUM_TOL).then(|| 0.5 * f.gradient(w).norm_squared() / g)
        },
    )
}

fn require_projection<O: Objective + ?Sized>(f: &O, sampler: &RegionSampler) -> Result<()> {
    if f.project_to_minimizers(&sampler.point(0)).is_none() {
        return Err(Error::Unsupported(
            "no projection onto the minimizer set for this objective".into(),
        ));
    }
    Ok(())
}

/// `μ̂_QG = min 2(f − f*) / ‖w − w_p‖²` with `w_p` the projection onto the minimizers.
pub fn estimate_qg<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
    f_star: f64,
    source: FStarSource,
) -> Result<GeometryEstimate> {
    require_projection(f, sampler)?;
    let gap = gap_fn(f, f_star);
    extreme(
        f,
        sampler,
        Quantity::QgMu,
        Direction::LowerWitness,
        Some(source),
        |w| {
            let g = gap(w);
            let dist2 = (w - f.project_to_minimizers(w)?).norm_squared();
            (g > OPTIMUM_TOL && dist2 > 0.0).then(|| 2.0 * g / dist2)
        },
    )
}

/// `μ̂_EB = min ‖∇f‖ / ‖w − w_p‖`.
pub fn estimate_error_bound<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
) -> Result<GeometryEstimate> {
    require_projection(f, sampler)?;
    extreme(
        f,
        sampler,
        Quantity::ErrorBoundMu,
        Direction::LowerWitness,
        None,
        |w| {
            let dist = (w - f.project_to_minimizers(w)?).norm();
            (dist > 1e-12).then(|| f.gradient(w).norm() / dist)
        },
    )
}

/// Per-point outcome of a finite-difference check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckPoint {
    pub w: Vec<f64>,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub passed: bool,
    pub checked: usize,
    pub excluded: usize,
    pub max_rel_error: f64,
    /// Up to five worst points, worst first.
    pub worst: Vec<GradCheckPoint>,
}

/// Central finite-difference gradient with per-coordinate step `1e-5·max(1, |w_i|)`.
pub fn fd_gradient<O: Objective + ?Sized>(f: &O, w: &ParamVector) -> ParamVector {
    let mut g = DVector::zeros(w.len());
    let mut p = w.clone();
    for i in 0..w.len() {
        let h = 1e-5 * w[i].abs().max(1.0);
        p[i] = w[i] + h;
        let up = f.value(&p);
        p[i] = w[i] - h;
        let down = f.value(&p);
        p[i] = w[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Largest per-coordinate error `|a − fd| / max(|a|, |fd|, 1)`.
pub fn gradient_rel_error<O: Objective + ?Sized>(f: &O, w: &ParamVector) -> f64 {
    let a = f.gradient(w);
    let fd = fd_gradient(f, w);
    a.iter()
        .zip(fd.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Finite-difference validation of the analytic gradient on every sample.
/// Samples near a kink (within one difference step) are excluded.
pub fn grad_check<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
) -> Result<GradCheckReport> {
    let (pts, excluded) = sampler.samples();
    let evaluations: Vec<Option<f64>> = pts
        .par_iter()
        .map(|w| (!near_kink(f, w)).then(|| gradient_rel_error(f, w)))
        .collect();
    Ok(summarize(
        pts.iter().zip(evaluations).map(|(w, e)| (w.clone(), e)),
        excluded,
    ))
}

fn near_kink<O: Objective + ?Sized>(f: &O, w: &ParamVector) -> bool {
    if f.excluded(w) {
        return true;
    }
    // A kink inside the difference stencil spoils the quotient.
    (0..w.len()).any(|i| {
        let h = 1e-5 * w[i].abs().max(1.0);
        let mut up = w.clone();
        up[i] += h;
        let mut down = w.clone();
        down[i] -= h;
        !f.smooth_between(&up, &down)
    })
}

fn summarize(
    items: impl Iterator<Item = (ParamVector, Option<f64>)>,
    mut excluded: usize,
) -> GradCheckReport {
    let mut checked = 0;
    let mut all: Vec<GradCheckPoint> = Vec::new();
    for (w, e) in items {
        match e {
            Some(rel_error) => {
                checked += 1;
                all.push(GradCheckPoint {
                    w: w.iter().copied().collect(),
                    rel_error,
                });
            }
            None => excluded += 1,
        }
    }
    all.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
    let max_rel_error = all.first().map_or(0.0, |p| p.rel_error);
    all.truncate(5);
    GradCheckReport {
        passed: checked > 0 && max_rel_error <= GRAD_CHECK_TOL,
        checked,
        excluded,
        max_rel_error,
        worst: all,
    }
}

/// Finite-difference check of `∇ℓ(·; z)` at paired points `(w_k, z_k)`.
pub fn grad_check_loss(
    problem: &ProblemInstance,
    pairs: &[(ParamVector, ExampleZ)],
) -> Result<GradCheckReport> {
    let evaluations: Vec<Result<Option<f64>>> = pairs
        .par_iter()
        .map(|(w, z)| {
            let data = LabeledDataset::new(vec![z.clone()], "probe")?;
            let f = EmpiricalRisk::new(problem, &data)?;
            if w.len() != problem.dim {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim,
                    got: w.len(),
                });
            }
            Ok((!near_kink(&f, w)).then(|| gradient_rel_error(&f, w)))
        })
        .collect();
    let mut items = Vec::with_capacity(pairs.len());
    for ((w, _), e) in pairs.iter().zip(evaluations) {
        items.push((w.clone(), e?));
    }
    Ok(summarize(items.into_iter(), 0))
}

/// Best value over `starts` GD runs from sampled points, flagged as empirical.
pub fn multistart_f_star<O: Objective + ?Sized>(
    f: &O,
    sampler: &RegionSampler,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, ParamVector)> {
    let (starts, _) = sampler.samples();
    let ends: Vec<Option<(f64, ParamVector)>> = starts
        .par_iter()
        .map(|w0| {
            descend_to_tolerance(f, w0, gamma, tol, max_iter)
                .ok()
                .map(|(w, _)| (f.value(&w), w))
        })
        .collect();
    ends.into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::Undefined("every multistart run diverged".into()))
}
