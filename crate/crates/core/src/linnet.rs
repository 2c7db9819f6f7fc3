//! Deep linear networks `f(W) = ½‖W_ℓ⋯W₁X − Y‖_F²`.
//!
//! Layers are square `d × d`. `X` and `Y` are `d × N` with examples as columns and
//! `X` of full row rank, so `X⁺ = Xᵀ(XXᵀ)⁻¹` and the optimal value is
//! `f* = ½‖YX⁺X − Y‖_F²`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::problems::{
    flatten_layers, unflatten_layers, ExampleZ, LabeledDataset, Objective, ParamVector,
};

/// Relative singular-value threshold for full-rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Largest accepted condition number of `XXᵀ`.
pub const MAX_CONDITION: f64 = 1e8;

/// Layers `W₁..W_ℓ` with the cached product `W = W_ℓ⋯W₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    layers: Vec<DMatrix<f64>>,
    product: DMatrix<f64>,
}

impl LayerStack {
    pub fn new(layers: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(invalid("a layer stack needs at least one layer"));
        };
        let d = first.nrows();
        for (j, l) in layers.iter().enumerate() {
            if l.nrows() != d || l.ncols() != d {
                return Err(invalid(format!(
                    "layer {} is {}×{}, expected {d}×{d}",
                    j + 1,
                    l.nrows(),
                    l.ncols()
                )));
            }
        }
        let product = chain(&layers);
        Ok(Self { layers, product })
    }

    pub fn from_flat(w: &ParamVector, depth: usize, width: usize) -> Result<Self> {
        if w.len() != depth * width * width {
            return Err(Error::DimensionMismatch {
                expected: depth * width * width,
                got: w.len(),
            });
        }
        Self::new(unflatten_layers(w, depth, width))
    }

    pub fn flatten(&self) -> ParamVector {
        flatten_layers(&self.layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.product.nrows()
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    pub fn product(&self) -> &DMatrix<f64> {
        &self.product
    }

    /// Replace layer `j` (1-based) and refresh the product.
    pub fn set_layer(&mut self, j: usize, m: DMatrix<f64>) -> Result<()> {
        self.layer_index(j)?;
        let d = self.width();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
        self.layers[j - 1] = m;
        self.product = chain(&self.layers);
        Ok(())
    }

    fn layer_index(&self, j: usize) -> Result<usize> {
        if j == 0 || j > self.depth() {
            return Err(Error::IndexOutOfRange {
                what: "layer",
                index: j,
                len: self.depth(),
            });
        }
        Ok(j - 1)
    }

    /// `τ = min_i σ_min(W_i)`.
    pub fn tau(&self) -> f64 {
        self.layers
            .iter()
            .map(linalg::sigma_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_full_rank(&self) -> bool {
        self.layers
            .iter()
            .all(|l| linalg::rank(l, RANK_TOL) == l.nrows())
    }

    /// Gaussian layers, each redrawn until `σ_min ≥ min_sigma`.
    pub fn random(depth: usize, width: usize, min_sigma: f64, rng: &mut impl Rng) -> Self {
        let layers = (0..depth)
            .map(|_| loop {
                let m = DMatrix::from_fn(width, width, |_, _| rng.sample::<f64, _>(StandardNormal));
                if linalg::sigma_min(&m) >= min_sigma {
                    break m;
                }
            })
            .collect();
        Self::new(layers).expect("square layers")
    }
}

/// `W_hi ⋯ W_lo` for the 0-based half-open range `lo..hi`; identity when empty.
fn chain_range(layers: &[DMatrix<f64>], lo: usize, hi: usize, d: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(d, d);
    for l in &layers[lo..hi] {
        p = l * p;
    }
    p
}

fn chain(layers: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = layers[0].nrows();
    chain_range(layers, 0, layers.len(), d)
}

/// Training data with the cached pseudoinverse and `C = ‖(XXᵀ)⁻¹X‖_F²`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    x_pinv: DMatrix<f64>,
    c: f64,
}

impl DataMatrices {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(invalid(format!(
                "X is {:?} but Y is {:?}",
                x.shape(),
                y.shape()
            )));
        }
        let d = x.nrows();
        if d == 0 || x.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if linalg::rank(&x, RANK_TOL) < d {
            return Err(Error::Construction(format!("X must have rank {d}")));
        }
        let gram = &x * x.transpose();
        let cond = linalg::condition_number(&gram);
        if cond > MAX_CONDITION {
            return Err(Error::Construction(format!(
                "XXᵀ is ill-conditioned (condition number {cond:e})"
            )));
        }
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Construction("XXᵀ is singular".into()))?;
        let x_pinv = x.transpose() * &gram_inv;
        let c = (gram_inv * &x).norm_squared();
        Ok(Self { x, y, x_pinv, c })
    }

    /// Gaussian `X` and `Y`; retried until the condition guard passes.
    pub fn random(d: usize, n: usize, rng: &mut impl Rng) -> Result<Self> {
        if n < d {
            return Err(invalid(format!(
                "need N ≥ d for rank d (got N = {n}, d = {d})"
            )));
        }
        for _ in 0..100 {
            let x = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(data) = Self::new(x, y) {
                return Ok(data);
            }
        }
        Err(Error::Construction(
            "could not draw well-conditioned data".into(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn x_pinv(&self) -> &DMatrix<f64> {
        &self.x_pinv
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `W* = YX⁺`.
    pub fn w_star(&self) -> DMatrix<f64> {
        &self.y * &self.x_pinv
    }

    /// `f* = ½‖YX⁺X − Y‖_F²`.
    pub fn f_star(&self) -> f64 {
        0.5 * (self.w_star() * &self.x - &self.y).norm_squared()
    }

    /// Columns `[x_k; y_k]` as examples for the deep-linear loss kind.
    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        let d = self.dim();
        let examples = (0..self.len())
            .map(|k| {
                let mut v = Vec::with_capacity(2 * d);
                v.extend(self.x.column(k).iter());
                v.extend(self.y.column(k).iter());
                ExampleZ::new(v, 0.0)
            })
            .collect();
        LabeledDataset::new(examples, "linnet")
    }

    fn check(&self, stack: &LayerStack) -> Result<()> {
        if stack.width() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: stack.width(),
            });
        }
        Ok(())
    }
}

/// `½‖W_ℓ⋯W₁X − Y‖_F²`, accumulated column by column through the layers.
pub fn linnet_loss(stack: &LayerStack, data: &DataMatrices) -> Result<f64> {
    data.check(stack)?;
    Ok(loss_unchecked(stack, data))
}

fn loss_unchecked(stack: &LayerStack, data: &DataMatrices) -> f64 {
    let mut s = 0.0;
    for k in 0..data.len() {
        let mut h: DVector<f64> = data.x.column(k).into_owned();
        for l in stack.layers() {
            h = l * h;
        }
        s += 0.5 * (h - data.y.column(k)).norm_squared();
    }
    s
}

fn residual(stack: &LayerStack, data: &DataMatrices) -> DMatrix<f64> {
    stack.product() * &data.x - &data.y
}

/// `∂f/∂W_j = W_{j+1}ᵀ⋯W_ℓᵀ (WX − Y) Xᵀ W₁ᵀ⋯W_{j−1}ᵀ` for `1 ≤ j ≤ ℓ`.
pub fn linnet_grad(stack: &LayerStack, data: &DataMatrices, j: usize) -> Result<DMatrix<f64>> {
    data.check(stack)?;
    let idx = stack.layer_index(j)?;
    Ok(grad_unchecked(
        stack,
        &(residual(stack, data) * data.x.transpose()),
        idx,
    ))
}

fn grad_unchecked(stack: &LayerStack, rxt: &DMatrix<f64>, idx: usize) -> DMatrix<f64> {
    let d = stack.width();
    let above = chain_range(stack.layers(), idx + 1, stack.depth(), d);
    let below = chain_range(stack.layers(), 0, idx, d);
    above.transpose() * rxt * below.transpose()
}

/// All layer gradients in order.
pub fn linnet_full_grad(stack: &LayerStack, data: &DataMatrices) -> Result<Vec<DMatrix<f64>>> {
    data.check(stack)?;
    let rxt = residual(stack, data) * data.x.transpose();
    Ok((0..stack.depth())
        .map(|i| grad_unchecked(stack, &rxt, i))
        .collect())
}

/// Two sides of an inequality `lhs ≥ rhs` and their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// The bound is vacuous at this point (e.g. `τ = 0`).
    pub degenerate: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, degenerate: bool) -> Self {
        Self {
            lhs,
            rhs,
            slack: lhs - rhs,
            degenerate,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// Projection bound `C‖(WX−Y)Xᵀ‖_F² ≥ ‖WX−Y‖_F² − ‖YX⁺X−Y‖_F²`.
pub fn check_projection_lemma(stack: &LayerStack, data: &DataMatrices) -> Result<InequalityReport> {
    data.check(stack)?;
    let r = residual(stack, data);
    let lhs = data.c() * (&r * data.x.transpose()).norm_squared();
    let rhs = r.norm_squared() - 2.0 * data.f_star();
    Ok(InequalityReport::new(lhs, rhs, false))
}

/// Gradient lower bound `‖∇f‖_F² ≥ ℓ τ^{2ℓ−2} ‖(WX−Y)Xᵀ‖_F²`.
pub fn check_grad_lower_bound(stack: &LayerStack, data: &DataMatrices) -> Result<InequalityReport> {
    let grads = linnet_full_grad(stack, data)?;
    let lhs: f64 = grads.iter().map(|g| g.norm_squared()).sum();
    let tau = stack.tau();
    let degenerate = !stack.is_full_rank();
    let l = stack.depth() as f64;
    let rxt = residual(stack, data) * data.x.transpose();
    let rhs = l * tau.powi(2 * stack.depth() as i32 - 2) * rxt.norm_squared();
    Ok(InequalityReport::new(lhs, rhs, degenerate))
}

/// `|‖WX−Y‖² − ‖YX⁺X−Y‖² − ‖WX−YX⁺X‖²|`.
pub fn pythagorean_residual(stack: &LayerStack, data: &DataMatrices) -> Result<f64> {
    data.check(stack)?;
    let wx = stack.product() * &data.x;
    let fit = data.w_star() * &data.x;
    let total = (&wx - &data.y).norm_squared();
    let parts = (&fit - &data.y).norm_squared() + (&wx - &fit).norm_squared();
    Ok((total - parts).abs())
}

/// PL constant `ℓ τ^{2ℓ−2} / ‖(XXᵀ)⁻¹X‖_F²` on the region `min_i σ_min(W_i) ≥ τ`.
pub fn pl_constant(depth: usize, tau: f64, data: &DataMatrices) -> Result<f64> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(invalid("τ must be positive"));
    }
    Ok(depth as f64 * tau.powi(2 * depth as i32 - 2) / data.c())
}

/// `½‖∇f‖² / (f − f*)`, or `None` at the optimum.
pub fn pl_ratio(stack: &LayerStack, data: &DataMatrices) -> Result<Option<f64>> {
    let grads = linnet_full_grad(stack, data)?;
    let g2: f64 = grads.iter().map(|g| g.norm_squared()).sum();
    // Pythagoras gives f − f* = ½‖WX − YX⁺X‖² without cancellation.
    let gap = 0.5 * (stack.product() * &data.x - data.w_star() * &data.x).norm_squared();
    Ok((gap > 1e-14).then(|| 0.5 * g2 / gap))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum CriticalPoint {
    GlobalMin {
        gap: f64,
    },
    NotCritical {
        grad_norm: f64,
    },
    /// Critical with a rank-deficient layer; the landscape theorem does not apply.
    Degenerate {
        gap: f64,
    },
    /// Full-rank critical point that is not global. Contradicts the landscape theorem.
    FullRankNonGlobal {
        gap: f64,
    },
}

/// Classify a stack by gradient norm and layer rank. Full-rank critical points
/// are expected to be global minima; `check_tol` bounds the accepted `f − f*`.
pub fn classify_critical_point(
    stack: &LayerStack,
    data: &DataMatrices,
    tol: f64,
    check_tol: f64,
) -> Result<CriticalPoint> {
    let grads = linnet_full_grad(stack, data)?;
    let grad_norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    if grad_norm > tol {
        return Ok(CriticalPoint::NotCritical { grad_norm });
    }
    let gap = linnet_loss(stack, data)? - data.f_star();
    if !stack.is_full_rank() {
        return Ok(CriticalPoint::Degenerate { gap });
    }
    Ok(if gap <= check_tol {
        CriticalPoint::GlobalMin { gap }
    } else {
        CriticalPoint::FullRankNonGlobal { gap }
    })
}

/// The loss as an [`Objective`] over flattened layers.
#[derive(Clone, Debug)]
pub struct LinnetObjective {
    pub data: DataMatrices,
    pub depth: usize,
}

impl LinnetObjective {
    pub fn new(data: DataMatrices, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        Ok(Self { data, depth })
    }

    fn stack(&self, w: &ParamVector) -> LayerStack {
        LayerStack::from_flat(w, self.depth, self.data.dim()).expect("dimension checked by caller")
    }
}

impl Objective for LinnetObjective {
    fn dim(&self) -> usize {
        self.depth * self.data.dim() * self.data.dim()
    }

    fn value(&self, w: &ParamVector) -> f64 {
        loss_unchecked(&self.stack(w), &self.data)
    }

    fn gradient(&self, w: &ParamVector) -> ParamVector {
        let s = self.stack(w);
        let rxt = residual(&s, &self.data) * self.data.x.transpose();
        let grads: Vec<_> = (0..self.depth)
            .map(|i| grad_unchecked(&s, &rxt, i))
            .collect();
        flatten_layers(&grads)
    }

    fn min_value(&self) -> Option<f64> {
        Some(self.data.f_star())
    }

    fn suboptimality(&self, w: &ParamVector) -> Option<f64> {
        let s = self.stack(w);
        Some(0.5 * (s.product() * &self.data.x - self.data.w_star() * &self.data.x).norm_squared())
    }

    /// The minimizer is unique only for a single layer.
    fn project_to_minimizers(&self, _w: &ParamVector) -> Option<ParamVector> {
        (self.depth == 1).then(|| flatten_layers(&[self.data.w_star()]))
    }
}

/// Iterations whose stack leaves the region `min_i σ_min(W_i) ≥ τ`.
pub fn region_exits(iterates: &[ParamVector], depth: usize, width: usize, tau: f64) -> Vec<usize> {
    iterates
        .iter()
        .enumerate()
        .filter(|(_, w)| {
            LayerStack::from_flat(w, depth, width)
                .map(|s| s.tau() < tau)
                .unwrap_or(true)
        })
        .map(|(t, _)| t)
        .collect()
}

/// Read a headerless row-major CSV matrix: one matrix row per line.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| invalid(format!("{}: bad number `{s}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Layers stacked vertically in one CSV: rows `(j−1)d..jd` hold `W_j`.
pub fn read_layers_csv(path: &Path) -> Result<LayerStack> {
    let m = read_matrix_csv(path)?;
    let d = m.ncols();
    if d == 0 || m.nrows() % d != 0 {
        return Err(invalid(format!(
            "{}: expected a multiple of {d} rows, got {}",
            path.display(),
            m.nrows()
        )));
    }
    let layers = (0..m.nrows() / d)
        .map(|j| m.rows(j * d, d).into_owned())
        .collect();
    LayerStack::new(layers)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for r in 0..m.nrows() {
        wtr.write_record(m.row(r).iter().map(|v| crate::report::fmt_num(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fd_gradient;
    use crate::problems::{loss, ProblemInstance};
    use crate::rng;

    fn identity_data(d: usize, y: DMatrix<f64>) -> DataMatrices {
        DataMatrices::new(DMatrix::identity(d, d), y).unwrap()
    }

    #[test]
    fn single_identity_layer_loss() {
        let data = identity_data(3, DMatrix::zeros(3, 3));
        let s = LayerStack::new(vec![DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(linnet_loss(&s, &data).unwrap(), 1.5);
        assert_eq!(linnet_grad(&s, &data, 1).unwrap(), DMatrix::identity(3, 3));
        assert!(linnet_grad(&s, &data, 2).is_err());
        assert!(linnet_grad(&s, &data, 0).is_err());
    }

    #[test]
    fn interpolating_product_has_zero_loss() {
        let mut r = rng::stream(1, 0);
        let data = DataMatrices::random(3, 3, &mut r).unwrap();
        let s = LayerStack::new(vec![data.w_star()]).unwrap();
        assert!(linnet_loss(&s, &data).unwrap() < 1e-20);
        assert!(data.f_star() < 1e-20);
    }

    #[test]
    fn problems_interface_is_bit_exact() {
        let mut r = rng::stream(2, 0);
        let data = DataMatrices::random(3, 8, &mut r).unwrap();
        let stack = LayerStack::random(2, 3, 0.1, &mut r);
        let problem = ProblemInstance::deep_linear(2, 3).unwrap();
        let set = data.to_dataset().unwrap();
        let w = stack.flatten();
        let mut sum = 0.0;
        for z in set.examples() {
            sum += loss(&problem, &w, z).unwrap();
        }
        assert_eq!(sum, linnet_loss(&stack, &data).unwrap());
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        let mut r = rng::stream(3, 0);
        let data = DataMatrices::random(3, 8, &mut r).unwrap();
        let obj = LinnetObjective::new(data, 3).unwrap();
        let stack = LayerStack::random(3, 3, 0.1, &mut r);
        let w = stack.flatten();
        let a = obj.gradient(&w);
        let fd = fd_gradient(&obj, &w);
        for (x, y) in a.iter().zip(fd.iter()) {
            assert!((x - y).abs() / x.abs().max(y.abs()).max(1.0) < 1e-6);
        }
    }

    #[test]
    fn single_layer_bound_is_tight() {
        let mut r = rng::stream(4, 0);
        let data = DataMatrices::random(3, 6, &mut r).unwrap();
        let stack = LayerStack::random(1, 3, 0.1, &mut r);
        let rep = check_grad_lower_bound(&stack, &data).unwrap();
        assert!((rep.slack).abs() <= 1e-9 * rep.lhs.max(1.0));
    }

    #[test]
    fn zero_layer_is_degenerate() {
        let data = identity_data(2, DMatrix::identity(2, 2));
        let s = LayerStack::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]).unwrap();
        let rep = check_grad_lower_bound(&s, &data).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.rhs, 0.0);
        assert!(matches!(
            classify_critical_point(&s, &data, 1e-10, 1e-6).unwrap(),
            CriticalPoint::Degenerate { .. }
        ));
    }

    #[test]
    fn worked_pl_constants() {
        let data = identity_data(2, DMatrix::zeros(2, 2));
        assert!((data.c() - 2.0).abs() < 1e-15);
        assert!((pl_constant(2, 0.5, &data).unwrap() - 0.25).abs() < 1e-15);
        assert!((pl_constant(1, 0.3, &data).unwrap() - 0.5).abs() < 1e-15);
        assert!(pl_constant(2, 0.0, &data).is_err());
    }

    #[test]
    fn rank_deficient_x_rejected() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            DataMatrices::new(x, DMatrix::zeros(2, 3)),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn product_minimizer_is_global() {
        let mut r = rng::stream(5, 0);
        let data = DataMatrices::random(3, 8, &mut r).unwrap();
        let w1 = LayerStack::random(1, 3, 0.5, &mut r).layers()[0].clone();
        let w2 = data.w_star() * w1.clone().try_inverse().unwrap();
        let s = LayerStack::new(vec![w1, w2]).unwrap();
        let class = classify_critical_point(&s, &data, 1e-8, 1e-9).unwrap();
        assert!(
            matches!(class, CriticalPoint::GlobalMin { .. }),
            "{class:?}"
        );
        assert!((linnet_loss(&s, &data).unwrap() - data.f_star()).abs() < 1e-9);
    }

    #[test]
    fn set_layer_refreshes_product() {
        let mut s =
            LayerStack::new(vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)]).unwrap();
        s.set_layer(2, DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_eq!(s.product(), &(DMatrix::identity(2, 2) * 3.0));
        assert!(s.set_layer(3, DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layers.csv");
        let mut r = rng::stream(6, 0);
        let s = LayerStack::random(2, 3, 0.1, &mut r);
        let stacked = DMatrix::from_row_iterator(
            6,
            3,
            s.layers().iter().flat_map(|l| {
                (0..3).flat_map(move |i| l.row(i).iter().copied().collect::<Vec<_>>())
            }),
        );
        write_matrix_csv(&path, &stacked).unwrap();
        let back = read_layers_csv(&path).unwrap();
        assert_eq!(back, s);
    }
}
