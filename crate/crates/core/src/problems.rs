//! Per-example loss families, datasets and empirical risks.
//!
//! Every loss is written as `ℓ(w; z)` with `z = (x, y)`. The empirical risk is the
//! plain mean `f_S(w) = (1/n) Σ ℓ(w; z_i)`; composite objectives that the literature
//! writes as a sum carry a per-example `weight` so that the mean reproduces them.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg;

pub type ParamVector = DVector<f64>;

/// One training point `z = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleZ {
    pub x: DVector<f64>,
    pub y: f64,
}

impl ExampleZ {
    pub fn new(x: impl Into<Vec<f64>>, y: f64) -> Self {
        Self {
            x: DVector::from_vec(x.into()),
            y,
        }
    }

    pub fn scalar(x: f64, y: f64) -> Self {
        Self::new(vec![x], y)
    }

    /// `sqrt(‖x‖² + y²)`.
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y * self.y).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// Ordered training set. Neighbor constructions copy, so `S` and `S′` coexist.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<ExampleZ>,
    pub id: String,
}

impl LabeledDataset {
    pub fn new(examples: Vec<ExampleZ>, id: impl Into<String>) -> Result<Self> {
        if let Some(bad) = examples.iter().position(|z| !z.is_finite()) {
            return Err(invalid(format!("example {bad} has non-finite entries")));
        }
        Ok(Self {
            examples,
            id: id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[ExampleZ] {
        &self.examples
    }

    pub fn get(&self, i: usize) -> Result<&ExampleZ> {
        self.examples.get(i).ok_or(Error::IndexOutOfRange {
            what: "example",
            index: i,
            len: self.len(),
        })
    }

    /// Replace-one neighbor: same length, position `i` swapped for `z`.
    pub fn neighbor(&self, i: usize, z: ExampleZ) -> Result<Self> {
        self.get(i)?;
        let mut examples = self.examples.clone();
        examples[i] = z;
        Self::new(examples, format!("{}[{i}→z']", self.id))
    }

    /// Drop-one dataset `S \ z_i`.
    pub fn drop(&self, i: usize) -> Result<Self> {
        self.get(i)?;
        let mut examples = self.examples.clone();
        examples.remove(i);
        Self::new(examples, format!("{}\\{i}", self.id))
    }

    /// Positions where the two datasets differ, or `None` if the lengths disagree.
    pub fn differing_positions(&self, other: &Self) -> Option<Vec<usize>> {
        (self.len() == other.len()).then(|| {
            self.examples
                .iter()
                .zip(&other.examples)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect()
        })
    }

    /// Same length and at most one differing position.
    pub fn is_neighbor_of(&self, other: &Self) -> bool {
        self.differing_positions(other)
            .is_some_and(|d| d.len() <= 1)
    }
}

/// The loss families.
#[derive(Clone, Debug, PartialEq)]
pub enum LossKind {
    /// `ℓ = ½ (w − x)ᵀ A (w − x)` with `A` symmetric PSD; the label is unused.
    Quadratic { a: DMatrix<f64> },
    /// `ℓ = (u² + u − y)²`, `u = ⟨w, x⟩`.
    Quartic,
    /// `ℓ = (weight/2) (σ(⟨w, x⟩) − y)²` with the two-slope leaky ReLU `σ`.
    LeakyRelu { c1: f64, c2: f64, weight: f64 },
    /// Column loss `½‖W_ℓ⋯W₁ x_in − x_out‖²` where `x = [x_in; x_out]` and `w`
    /// stacks the layers, each flattened row-major.
    DeepLinear { depth: usize, width: usize },
    /// `ℓ = ⟨w, x⟩ − y`. A fixture with constant gradient.
    Linear,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Quadratic { .. } => "quadratic",
            LossKind::Quartic => "quartic",
            LossKind::LeakyRelu { .. } => "leaky-relu",
            LossKind::DeepLinear { .. } => "deep-linear",
            LossKind::Linear => "linear",
        }
    }
}

/// Constants declared for a problem over its feasible region. `None` means unknown.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Constants {
    pub lipschitz: Option<f64>,
    pub smoothness: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub pl: Option<f64>,
}

/// Region over which the constants are declared.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibleRegion {
    pub w_radius: Option<f64>,
    pub w_interval: Option<(f64, f64)>,
    pub z_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub kind: LossKind,
    /// Length of `w`.
    pub dim: usize,
    /// Length of `z.x`.
    pub feature_dim: usize,
    pub constants: Constants,
    pub region: FeasibleRegion,
    /// Free-form caveats (e.g. why a constant is missing).
    pub notes: Vec<String>,
}

impl ProblemInstance {
    /// Quadratic with curvature `A`. Constants are declared for `‖w‖ ≤ w_radius`
    /// and `‖x‖ ≤ z_radius`.
    pub fn quadratic(a: DMatrix<f64>, w_radius: f64, z_radius: f64) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(invalid(
                "quadratic curvature must be a nonempty square matrix",
            ));
        }
        if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
            return Err(invalid("quadratic curvature must be symmetric"));
        }
        let (lo, hi) = linalg::eigen_extremes(&a);
        if lo < -1e-12 * hi.abs().max(1.0) {
            return Err(invalid(format!(
                "quadratic curvature is indefinite (λ_min = {lo:e})"
            )));
        }
        let eig = a.clone().symmetric_eigen();
        let tol = linalg::RANK_TOL * hi.max(f64::MIN_POSITIVE);
        let smallest_positive = eig
            .eigenvalues
            .iter()
            .copied()
            .filter(|&v| v > tol)
            .fold(f64::INFINITY, f64::min);
        let d = a.nrows();
        Ok(Self {
            kind: LossKind::Quadratic { a },
            dim: d,
            feature_dim: d,
            constants: Constants {
                lipschitz: Some(hi * (w_radius + z_radius)),
                smoothness: Some(hi),
                strong_convexity: (lo > tol).then_some(lo),
                pl: smallest_positive.is_finite().then_some(smallest_positive),
            },
            region: FeasibleRegion {
                w_radius: Some(w_radius),
                w_interval: None,
                z_radius: Some(z_radius),
            },
            notes: Vec::new(),
        })
    }

    /// `ℓ = (λ/2)‖w − x‖²`.
    pub fn isotropic_quadratic(
        d: usize,
        lambda: f64,
        w_radius: f64,
        z_radius: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid("λ must be positive"));
        }
        Self::quadratic(DMatrix::identity(d, d) * lambda, w_radius, z_radius)
    }

    /// Quartic one-layer loss in dimension `m`. For `m = 1` the Lipschitz and
    /// smoothness constants come from a dense grid over `w ∈ interval`, `‖z‖ ≤ 2`.
    pub fn quartic(m: usize) -> Self {
        Self::quartic_on(m, DEFAULT_QUARTIC_INTERVAL)
    }

    pub fn quartic_on(m: usize, interval: (f64, f64)) -> Self {
        let (lipschitz, smoothness, notes) = if m == 1 {
            let (l, b) = if interval == DEFAULT_QUARTIC_INTERVAL {
                *DEFAULT_QUARTIC_CONSTANTS.get_or_init(|| quartic_grid_constants(interval, 2.0))
            } else {
                quartic_grid_constants(interval, 2.0)
            };
            (
                Some(l),
                Some(b),
                vec!["L and β from a dense grid (sampled, not certified)".into()],
            )
        } else {
            (
                None,
                None,
                vec!["grid constants only computed for m = 1".into()],
            )
        };
        Self {
            kind: LossKind::Quartic,
            dim: m,
            feature_dim: m,
            constants: Constants {
                lipschitz,
                smoothness,
                strong_convexity: None,
                pl: None,
            },
            region: FeasibleRegion {
                w_radius: None,
                w_interval: Some(interval),
                z_radius: Some(2.0),
            },
            notes,
        }
    }

    pub fn deep_linear(depth: usize, width: usize) -> Result<Self> {
        if depth == 0 || width == 0 {
            return Err(invalid("deep linear net needs depth ≥ 1 and width ≥ 1"));
        }
        Ok(Self {
            kind: LossKind::DeepLinear { depth, width },
            dim: depth * width * width,
            feature_dim: 2 * width,
            constants: Constants::default(),
            region: FeasibleRegion::default(),
            notes: vec!["PL constant depends on the layer region; see linnet".into()],
        })
    }

    pub fn linear(d: usize) -> Self {
        Self {
            kind: LossKind::Linear,
            dim: d,
            feature_dim: d,
            constants: Constants {
                smoothness: Some(0.0),
                ..Constants::default()
            },
            region: FeasibleRegion::default(),
            notes: Vec::new(),
        }
    }

    fn check(&self, w: &ParamVector, z: &ExampleZ) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        if z.x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: z.x.len(),
            });
        }
        Ok(())
    }

    fn check_data(&self, data: &LabeledDataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for z in data.examples() {
            if z.x.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    got: z.x.len(),
                });
            }
        }
        Ok(())
    }

    /// Loss without dimension checks.
    pub(crate) fn loss_unchecked(&self, w: &ParamVector, z: &ExampleZ) -> f64 {
        match &self.kind {
            LossKind::Quadratic { a } => {
                let e = w - &z.x;
                0.5 * e.dot(&(a * &e))
            }
            LossKind::Quartic => {
                let u = w.dot(&z.x);
                let r = u * u + u - z.y;
                r * r
            }
            LossKind::LeakyRelu { c1, c2, weight } => {
                let u = w.dot(&z.x);
                let s = if u > 0.0 { c1 * u } else { c2 * u };
                0.5 * weight * (s - z.y) * (s - z.y)
            }
            LossKind::DeepLinear { depth, width } => {
                let r = deep_linear_residual(w, z, *depth, *width);
                0.5 * r.norm_squared()
            }
            LossKind::Linear => w.dot(&z.x) - z.y,
        }
    }

    /// Gradient of `ℓ(·; z)` without dimension checks.
    pub(crate) fn grad_unchecked(&self, w: &ParamVector, z: &ExampleZ) -> ParamVector {
        match &self.kind {
            LossKind::Quadratic { a } => a * (w - &z.x),
            LossKind::Quartic => {
                let u = w.dot(&z.x);
                let r = u * u + u - z.y;
                &z.x * (2.0 * r * (2.0 * u + 1.0))
            }
            LossKind::LeakyRelu { c1, c2, weight } => {
                let u = w.dot(&z.x);
                let (s, ds) = if u > 0.0 {
                    (c1 * u, *c1)
                } else {
                    (c2 * u, *c2)
                };
                &z.x * (weight * (s - z.y) * ds)
            }
            LossKind::DeepLinear { depth, width } => deep_linear_example_grad(w, z, *depth, *width),
            LossKind::Linear => z.x.clone(),
        }
    }

    /// True where the loss is not differentiable (leaky-ReLU kinks).
    pub(crate) fn at_kink(&self, w: &ParamVector, z: &ExampleZ) -> bool {
        matches!(self.kind, LossKind::LeakyRelu { .. }) && w.dot(&z.x).abs() < KINK_TOL
    }
}

/// Samples with any `|⟨w, x_i⟩|` below this are treated as sitting on a kink.
pub const KINK_TOL: f64 = 1e-8;

pub const DEFAULT_QUARTIC_INTERVAL: (f64, f64) = (-2.0, 3.0);

static DEFAULT_QUARTIC_CONSTANTS: OnceLock<(f64, f64)> = OnceLock::new();

/// Max `|ℓ′|` and `|ℓ″|` of the scalar quartic over `w ∈ interval`, `x² + y² ≤ c²`.
fn quartic_grid_constants(interval: (f64, f64), c: f64) -> (f64, f64) {
    const NW: usize = 401;
    const NZ: usize = 161;
    let (lo, hi) = interval;
    let mut lip = 0.0f64;
    let mut beta = 0.0f64;
    for i in 0..NW {
        let w = lo + (hi - lo) * i as f64 / (NW - 1) as f64;
        for j in 0..NZ {
            let x = -c + 2.0 * c * j as f64 / (NZ - 1) as f64;
            for k in 0..NZ {
                let y = -c + 2.0 * c * k as f64 / (NZ - 1) as f64;
                if x * x + y * y > c * c * (1.0 + 1e-12) {
                    continue;
                }
                let u = w * x;
                let r = u * u + u - y;
                lip = lip.max((2.0 * r * (2.0 * u + 1.0) * x).abs());
                beta = beta.max((2.0 * x * x * ((2.0 * u + 1.0).powi(2) + 2.0 * r)).abs());
            }
        }
    }
    (lip, beta)
}

/// Split a flat parameter vector into `depth` row-major `width × width` layers.
pub fn unflatten_layers(w: &ParamVector, depth: usize, width: usize) -> Vec<DMatrix<f64>> {
    let k = width * width;
    (0..depth)
        .map(|j| DMatrix::from_row_slice(width, width, &w.as_slice()[j * k..(j + 1) * k]))
        .collect()
}

/// Inverse of [`unflatten_layers`].
pub fn flatten_layers(layers: &[DMatrix<f64>]) -> ParamVector {
    let mut out = Vec::with_capacity(layers.iter().map(|l| l.len()).sum());
    for l in layers {
        for r in 0..l.nrows() {
            out.extend(l.row(r).iter());
        }
    }
    DVector::from_vec(out)
}

fn deep_linear_residual(w: &ParamVector, z: &ExampleZ, depth: usize, width: usize) -> DVector<f64> {
    let layers = unflatten_layers(w, depth, width);
    let mut h = z.x.rows(0, width).into_owned();
    for l in &layers {
        h = l * h;
    }
    h - z.x.rows(width, width)
}

fn deep_linear_example_grad(
    w: &ParamVector,
    z: &ExampleZ,
    depth: usize,
    width: usize,
) -> ParamVector {
    let layers = unflatten_layers(w, depth, width);
    let x = z.x.rows(0, width).into_owned();
    // Forward activations h_0 = x, h_j = W_j h_{j-1}.
    let mut acts = Vec::with_capacity(depth + 1);
    acts.push(x);
    for l in &layers {
        let next = l * acts.last().unwrap();
        acts.push(next);
    }
    let mut back = acts[depth].clone() - z.x.rows(width, width);
    let mut grads = vec![DMatrix::zeros(width, width); depth];
    for j in (0..depth).rev() {
        grads[j] = &back * acts[j].transpose();
        back = layers[j].transpose() * back;
    }
    flatten_layers(&grads)
}

pub fn loss(problem: &ProblemInstance, w: &ParamVector, z: &ExampleZ) -> Result<f64> {
    problem.check(w, z)?;
    Ok(problem.loss_unchecked(w, z))
}

pub fn grad_loss(problem: &ProblemInstance, w: &ParamVector, z: &ExampleZ) -> Result<ParamVector> {
    problem.check(w, z)?;
    Ok(problem.grad_unchecked(w, z))
}

pub fn empirical_risk(
    problem: &ProblemInstance,
    w: &ParamVector,
    data: &LabeledDataset,
) -> Result<f64> {
    EmpiricalRisk::new(problem, data)?.value_checked(w)
}

pub fn empirical_grad(
    problem: &ProblemInstance,
    w: &ParamVector,
    data: &LabeledDataset,
) -> Result<ParamVector> {
    let f = EmpiricalRisk::new(problem, data)?;
    f.check_w(w)?;
    Ok(f.gradient(w))
}

pub fn stochastic_grad(
    problem: &ProblemInstance,
    w: &ParamVector,
    data: &LabeledDataset,
    index: usize,
) -> Result<ParamVector> {
    let z = data.get(index)?;
    grad_loss(problem, w, z)
}

pub fn coordinate_grad(
    problem: &ProblemInstance,
    w: &ParamVector,
    data: &LabeledDataset,
    coord: usize,
) -> Result<f64> {
    if coord >= problem.dim {
        return Err(Error::IndexOutOfRange {
            what: "coordinate",
            index: coord,
            len: problem.dim,
        });
    }
    Ok(empirical_grad(problem, w, data)?[coord])
}

/// Scalar objective `f: R^d → R` with an analytic gradient.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &ParamVector) -> f64;
    fn gradient(&self, w: &ParamVector) -> ParamVector;

    /// Optimal value when known.
    fn min_value(&self) -> Option<f64> {
        None
    }

    /// `f(w) − f*`, computed without cancellation where the structure allows it.
    fn suboptimality(&self, w: &ParamVector) -> Option<f64> {
        self.min_value().map(|f| self.value(w) - f)
    }

    /// Euclidean projection onto the set of global minimizers.
    fn project_to_minimizers(&self, _w: &ParamVector) -> Option<ParamVector> {
        None
    }

    /// Points where the gradient is not defined.
    fn excluded(&self, _w: &ParamVector) -> bool {
        false
    }

    /// False when a non-differentiable point may lie on the segment `[a, b]`.
    fn smooth_between(&self, _a: &ParamVector, _b: &ParamVector) -> bool {
        true
    }
}

/// Objective that is a mean of `n` per-example terms.
pub trait FiniteSum: Objective {
    fn n(&self) -> usize;
    fn example_loss(&self, w: &ParamVector, i: usize) -> f64;
    fn example_gradient(&self, w: &ParamVector, i: usize) -> ParamVector;

    fn coordinate_gradient(&self, w: &ParamVector, j: usize) -> f64 {
        self.gradient(w)[j]
    }
}

/// How the optimal value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FStarSource {
    Analytic,
    Empirical,
}

#[derive(Clone, Debug)]
enum Aux {
    None,
    Quadratic {
        mean: DVector<f64>,
        a: DMatrix<f64>,
        projector: DMatrix<f64>,
        f_star: f64,
    },
    LeakyRelu {
        x: DMatrix<f64>,
        x_pinv: DMatrix<f64>,
        target: DVector<f64>,
    },
    DeepLinear {
        f_star: f64,
        /// Unique minimizer for a single layer, flattened.
        single_layer_min: Option<ParamVector>,
    },
}

/// `f_S` for a problem and dataset, with cached structure for `f*` and projections.
#[derive(Clone, Debug)]
pub struct EmpiricalRisk<'a> {
    pub problem: &'a ProblemInstance,
    pub data: &'a LabeledDataset,
    aux: Aux,
    f_star_override: Option<(f64, FStarSource)>,
}

impl<'a> EmpiricalRisk<'a> {
    pub fn new(problem: &'a ProblemInstance, data: &'a LabeledDataset) -> Result<Self> {
        problem.check_data(data)?;
        let aux = build_aux(problem, data)?;
        Ok(Self {
            problem,
            data,
            aux,
            f_star_override: None,
        })
    }

    /// Supply `f*` for kinds without a closed form.
    pub fn with_f_star(mut self, f_star: f64, source: FStarSource) -> Self {
        self.f_star_override = Some((f_star, source));
        self
    }

    pub fn f_star_source(&self) -> Option<FStarSource> {
        if let Some((_, s)) = self.f_star_override {
            return Some(s);
        }
        match self.aux {
            Aux::Quadratic { .. } | Aux::LeakyRelu { .. } | Aux::DeepLinear { .. } => {
                Some(FStarSource::Analytic)
            }
            Aux::None => None,
        }
    }

    /// Closed-form minimizer when the objective has one (quadratics: the data mean).
    pub fn known_minimizer(&self) -> Option<ParamVector> {
        match &self.aux {
            Aux::Quadratic { mean, .. } => Some(mean.clone()),
            Aux::LeakyRelu { x_pinv, target, .. } => Some(x_pinv * target),
            Aux::DeepLinear {
                single_layer_min, ..
            } => single_layer_min.clone(),
            Aux::None => None,
        }
    }

    fn check_w(&self, w: &ParamVector) -> Result<()> {
        if w.len() != self.problem.dim {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dim,
                got: w.len(),
            });
        }
        Ok(())
    }

    pub fn value_checked(&self, w: &ParamVector) -> Result<f64> {
        self.check_w(w)?;
        Ok(self.value(w))
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }
}

fn build_aux(problem: &ProblemInstance, data: &LabeledDataset) -> Result<Aux> {
    let n = data.len() as f64;
    Ok(match &problem.kind {
        LossKind::Quadratic { a } => {
            let mut mean = DVector::zeros(problem.dim);
            for z in data.examples() {
                mean += &z.x;
            }
            mean /= n;
            let f_star = data
                .examples()
                .iter()
                .map(|z| {
                    let e = &mean - &z.x;
                    0.5 * e.dot(&(a * &e))
                })
                .sum::<f64>()
                / n;
            Aux::Quadratic {
                mean,
                a: a.clone(),
                projector: linalg::range_projector(a),
                f_star,
            }
        }
        LossKind::LeakyRelu { c1, c2, .. } => {
            let rows: Vec<_> = data.examples().iter().map(|z| z.x.transpose()).collect();
            let x = DMatrix::from_rows(&rows);
            let full_row_rank = linalg::rank(&x, linalg::RANK_TOL) == x.nrows();
            if *c1 == 0.0 || *c2 == 0.0 || !full_row_rank {
                Aux::None
            } else {
                let target = DVector::from_iterator(
                    data.len(),
                    data.examples()
                        .iter()
                        .map(|z| if z.y > 0.0 { z.y / c1 } else { z.y / c2 }),
                );
                Aux::LeakyRelu {
                    x_pinv: linalg::pinv(&x)?,
                    x,
                    target,
                }
            }
        }
        LossKind::DeepLinear { width, depth } => {
            let w = *width;
            let xs: Vec<_> = data
                .examples()
                .iter()
                .map(|z| z.x.rows(0, w).into_owned())
                .collect();
            let ys: Vec<_> = data
                .examples()
                .iter()
                .map(|z| z.x.rows(w, w).into_owned())
                .collect();
            let x = DMatrix::from_columns(&xs);
            let y = DMatrix::from_columns(&ys);
            if linalg::rank(&x, 1e-8) < w {
                Aux::None
            } else {
                let xp = linalg::pinv(&x)?;
                let resid = &y * &xp * &x - &y;
                let f_star = 0.5 * resid.norm_squared() / n;
                let single_layer_min = (*depth == 1).then(|| flatten_layers(&[&y * &xp]));
                Aux::DeepLinear {
                    f_star,
                    single_layer_min,
                }
            }
        }
        LossKind::Quartic | LossKind::Linear => Aux::None,
    })
}

impl Objective for EmpiricalRisk<'_> {
    fn dim(&self) -> usize {
        self.problem.dim
    }

    fn value(&self, w: &ParamVector) -> f64 {
        let s: f64 = self
            .data
            .examples()
            .iter()
            .map(|z| self.problem.loss_unchecked(w, z))
            .sum();
        s / self.data.len() as f64
    }

    fn gradient(&self, w: &ParamVector) -> ParamVector {
        let mut g = DVector::zeros(self.problem.dim);
        for z in self.data.examples() {
            g += self.problem.grad_unchecked(w, z);
        }
        g / self.data.len() as f64
    }

    fn min_value(&self) -> Option<f64> {
        if let Some((f, _)) = self.f_star_override {
            return Some(f);
        }
        match &self.aux {
            Aux::Quadratic { f_star, .. } => Some(*f_star),
            Aux::LeakyRelu { .. } => Some(0.0),
            Aux::DeepLinear { f_star, .. } => Some(*f_star),
            Aux::None => None,
        }
    }

    fn suboptimality(&self, w: &ParamVector) -> Option<f64> {
        match &self.aux {
            Aux::Quadratic { mean, a, .. } if self.f_star_override.is_none() => {
                let e = w - mean;
                Some(0.5 * e.dot(&(a * &e)))
            }
            _ => self.min_value().map(|f| self.value(w) - f),
        }
    }

    fn project_to_minimizers(&self, w: &ParamVector) -> Option<ParamVector> {
        match &self.aux {
            Aux::Quadratic {
                mean, projector, ..
            } => Some(w - projector * (w - mean)),
            Aux::LeakyRelu { x, x_pinv, target } => Some(w - x_pinv * (x * w - target)),
            Aux::DeepLinear {
                single_layer_min, ..
            } => single_layer_min.clone(),
            Aux::None => None,
        }
    }

    fn excluded(&self, w: &ParamVector) -> bool {
        self.data
            .examples()
            .iter()
            .any(|z| self.problem.at_kink(w, z))
    }

    fn smooth_between(&self, a: &ParamVector, b: &ParamVector) -> bool {
        if !matches!(self.problem.kind, LossKind::LeakyRelu { .. }) {
            return true;
        }
        self.data.examples().iter().all(|z| {
            let (u, v) = (a.dot(&z.x), b.dot(&z.x));
            u.abs() >= KINK_TOL && v.abs() >= KINK_TOL && (u > 0.0) == (v > 0.0)
        })
    }
}

impl FiniteSum for EmpiricalRisk<'_> {
    fn n(&self) -> usize {
        self.data.len()
    }

    fn example_loss(&self, w: &ParamVector, i: usize) -> f64 {
        self.problem.loss_unchecked(w, &self.data.examples()[i])
    }

    fn example_gradient(&self, w: &ParamVector, i: usize) -> ParamVector {
        self.problem.grad_unchecked(w, &self.data.examples()[i])
    }

    fn coordinate_gradient(&self, w: &ParamVector, j: usize) -> f64 {
        match &self.problem.kind {
            LossKind::Quadratic { a } => {
                let Aux::Quadratic { mean, .. } = &self.aux else {
                    unreachable!()
                };
                a.row(j)
                    .iter()
                    .zip((w - mean).iter())
                    .map(|(p, q)| p * q)
                    .sum()
            }
            _ => self.gradient(w)[j],
        }
    }
}

/// The leaky-ReLU composite `f(w) = (λ/2)‖σ(Xw) − y‖²` as a problem plus its dataset.
///
/// Row `i` of `X` becomes example `(x_i, y_i)`; the per-example weight `λN` makes the
/// empirical mean equal the composite. The declared PL constant is
/// `λ σ_min(X)² min(|c₁|, |c₂|)²` when `X` has full row rank and both slopes are nonzero.
pub fn leaky_relu_composite(
    lambda: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    c1: f64,
    c2: f64,
) -> Result<(ProblemInstance, LabeledDataset)> {
    if !(lambda > 0.0) {
        return Err(invalid("λ must be positive"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = x.nrows();
    let examples = (0..n)
        .map(|i| ExampleZ::new(x.row(i).iter().copied().collect::<Vec<_>>(), y[i]))
        .collect();
    let data = LabeledDataset::new(examples, "leaky-relu")?;

    let mut notes = vec!["PL holds away from kinks only".to_string()];
    let full_row_rank = linalg::rank(x, linalg::RANK_TOL) == n;
    let c = c1.abs().min(c2.abs());
    let pl = if c == 0.0 {
        notes.push("zero slope: PL constant unavailable".into());
        None
    } else if !full_row_rank {
        notes.push("X lacks full row rank: PL constant unavailable".into());
        None
    } else {
        let s = linalg::sigma_min(x);
        Some(lambda * s * s * c * c)
    };
    let cmax = c1.abs().max(c2.abs());
    let smax = linalg::sigma_max(x);
    let problem = ProblemInstance {
        kind: LossKind::LeakyRelu {
            c1,
            c2,
            weight: lambda * n as f64,
        },
        dim: x.ncols(),
        feature_dim: x.ncols(),
        constants: Constants {
            lipschitz: None,
            smoothness: Some(lambda * smax * smax * cmax * cmax),
            strong_convexity: None,
            pl,
        },
        region: FeasibleRegion::default(),
        notes,
    };
    Ok((problem, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;

    fn q() -> ProblemInstance {
        ProblemInstance::quartic(1)
    }

    #[test]
    fn quartic_plug_in_values() {
        let p = q();
        let z = ExampleZ::scalar(-1.0, 1.0);
        assert_eq!(loss(&p, &dvec(&[0.0]), &z).unwrap(), 1.0);
        assert_eq!(loss(&p, &dvec(&[1.0]), &z).unwrap(), 1.0);
        let w = 0.598_004;
        let z = ExampleZ::scalar(-1.0 / (2.0 * w), 0.0);
        assert!((loss(&p, &dvec(&[w]), &z).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = q();
        let z = ExampleZ::new(vec![1.0, 2.0], 0.0);
        assert!(matches!(
            loss(&p, &dvec(&[0.0]), &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_dataset_rejected() {
        let p = q();
        let s = LabeledDataset::new(vec![], "empty").unwrap();
        assert!(matches!(
            empirical_risk(&p, &dvec(&[0.0]), &s),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn isotropic_quadratic_symmetric_pair() {
        let p = ProblemInstance::isotropic_quadratic(2, 3.0, 2.0, 2.0).unwrap();
        let s = LabeledDataset::new(
            vec![
                ExampleZ::new(vec![1.0, 0.0], 0.0),
                ExampleZ::new(vec![-1.0, 0.0], 0.0),
            ],
            "pair",
        )
        .unwrap();
        let r = empirical_risk(&p, &dvec(&[0.0, 0.0]), &s).unwrap();
        assert!((r - 1.5).abs() < 1e-15);
        let f = EmpiricalRisk::new(&p, &s).unwrap();
        assert!((f.min_value().unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(f.suboptimality(&dvec(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn neighbor_and_drop() {
        let s = LabeledDataset::new(
            (0..4).map(|i| ExampleZ::scalar(i as f64, 1.0)).collect(),
            "s",
        )
        .unwrap();
        let t = s.neighbor(2, ExampleZ::scalar(9.0, 0.0)).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(s.differing_positions(&t).unwrap(), vec![2]);
        assert!(s.is_neighbor_of(&t));
        let same = s.neighbor(1, s.examples()[1].clone()).unwrap();
        assert_eq!(same.examples(), s.examples());
        let d = s.drop(0).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.examples(), &s.examples()[1..]);
        assert!(s.drop(4).is_err());
    }

    #[test]
    fn stochastic_and_coordinate_consistency() {
        let p = q();
        let s = LabeledDataset::new(
            vec![
                ExampleZ::scalar(-1.0, 1.0),
                ExampleZ::scalar(-0.5, 1.0),
                ExampleZ::scalar(0.3, -0.2),
            ],
            "s",
        )
        .unwrap();
        let w = dvec(&[0.7]);
        let full = empirical_grad(&p, &w, &s).unwrap();
        let mut mean = dvec(&[0.0]);
        for i in 0..3 {
            mean += stochastic_grad(&p, &w, &s, i).unwrap();
        }
        mean /= 3.0;
        assert!((mean - &full).amax() < 1e-12);
        assert_eq!(coordinate_grad(&p, &w, &s, 0).unwrap(), full[0]);
        assert!(stochastic_grad(&p, &w, &s, 3).is_err());
        assert!(coordinate_grad(&p, &w, &s, 1).is_err());
    }

    #[test]
    fn leaky_relu_declared_mu() {
        let x = DMatrix::identity(2, 2);
        let y = dvec(&[0.3, -0.4]);
        let (p, s) = leaky_relu_composite(1.0, &x, &y, 1.0, 0.5).unwrap();
        assert!((p.constants.pl.unwrap() - 0.25).abs() < 1e-15);
        let (p1, _) = leaky_relu_composite(1.0, &x, &y, 1.0, 1.0).unwrap();
        assert!((p1.constants.pl.unwrap() - 1.0).abs() < 1e-15);
        let f = EmpiricalRisk::new(&p, &s).unwrap();
        // f(w) = ½‖σ(w) − y‖² matches the composite directly.
        let w = dvec(&[0.8, -0.6]);
        let direct = 0.5 * ((0.8 - 0.3f64).powi(2) + (-0.3 + 0.4f64).powi(2));
        assert!((f.value(&w) - direct).abs() < 1e-15);
        let wstar = f.known_minimizer().unwrap();
        assert!(f.value(&wstar) < 1e-28);
        assert!(f.gradient(&wstar).amax() < 1e-12);
    }

    #[test]
    fn zero_slope_flags_missing_pl() {
        let x = DMatrix::identity(2, 2);
        let (p, _) = leaky_relu_composite(1.0, &x, &dvec(&[1.0, 1.0]), 1.0, 0.0).unwrap();
        assert!(p.constants.pl.is_none());
        assert!(p.notes.iter().any(|n| n.contains("zero slope")));
    }

    #[test]
    fn gradient_vanishes_at_known_minimizers() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = ProblemInstance::quadratic(a, 2.0, 2.0).unwrap();
        let s = LabeledDataset::new(
            vec![
                ExampleZ::new(vec![1.0, 0.2], 0.0),
                ExampleZ::new(vec![-0.4, 0.9], 0.0),
            ],
            "q",
        )
        .unwrap();
        let f = EmpiricalRisk::new(&p, &s).unwrap();
        assert!(f.gradient(&f.known_minimizer().unwrap()).amax() < 1e-12);
    }

    #[test]
    fn layer_flattening_round_trips() {
        let w = DVector::from_iterator(8, (0..8).map(|v| v as f64));
        let layers = unflatten_layers(&w, 2, 2);
        assert_eq!(layers[0][(0, 1)], 1.0);
        assert_eq!(layers[1][(1, 0)], 6.0);
        assert_eq!(flatten_layers(&layers), w);
    }

    #[test]
    fn quartic_grid_constants_are_sane() {
        let p = q();
        let l = p.constants.lipschitz.unwrap();
        let b = p.constants.smoothness.unwrap();
        // |ℓ′| at w = 3, x = -2, y = 0: u = -6, r = 30, 2·30·11·2 = 1320.
        assert!(l >= 1320.0 - 1e-9, "{l}");
        assert!(b > 0.0);
    }
}
