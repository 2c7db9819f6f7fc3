//! Convergence-rate and iteration-count tables for GD, SGD, RCD and SVRG, and
//! least-squares fits of empirical contraction factors.
//!
//! All `O(·)` expressions are evaluated with constant 1. Reports carry
//! [`CONSTANTS_NOTE`] to say so.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optim::{self, Algorithm, RecordMode, RunConfig};
use crate::problems::FiniteSum;

pub const CONSTANTS_NOTE: &str = "up to constants: O(·) evaluated with constant 1";

/// Curvature assumption: λ-strong convexity or μ-PL.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Setting {
    StronglyConvex(f64),
    Pl(f64),
}

impl Setting {
    /// `λ` or `μ`.
    pub fn kappa(self) -> f64 {
        match self {
            Setting::StronglyConvex(k) | Setting::Pl(k) => k,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::StronglyConvex(_) => "sc",
            Setting::Pl(_) => "pl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateInputs {
    pub algorithm: Algorithm,
    pub setting: Setting,
    /// `L`.
    pub lipschitz: f64,
    pub gamma: Option<f64>,
    /// Dimension, for RCD.
    pub d: Option<usize>,
    /// Inner-loop length, for SVRG.
    pub m: Option<usize>,
    pub iterations: Option<u64>,
    pub n: Option<u64>,
}

impl RateInputs {
    pub fn new(algorithm: Algorithm, setting: Setting, lipschitz: f64) -> Self {
        Self {
            algorithm,
            setting,
            lipschitz,
            gamma: None,
            d: None,
            m: None,
            iterations: None,
            n: None,
        }
    }

    pub fn gamma(mut self, g: f64) -> Self {
        self.gamma = Some(g);
        self
    }

    pub fn d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn iterations(mut self, t: u64) -> Self {
        self.iterations = Some(t);
        self
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    fn validate(&self) -> Result<()> {
        let k = self.setting.kappa();
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid(format!(
                "{} constant must be positive",
                self.setting.name()
            )));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid("L must be positive"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid("γ must be positive"));
            }
        }
        Ok(())
    }

    fn need_gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| invalid(format!("{} needs a step size γ", self.algorithm.name())))
    }

    fn need_d(&self) -> Result<usize> {
        match self.d {
            Some(d) if d >= 1 => Ok(d),
            _ => Err(invalid("RCD needs a dimension d ≥ 1")),
        }
    }

    fn need_m(&self) -> Result<usize> {
        match self.m {
            Some(m) if m >= 1 => Ok(m),
            _ => Err(invalid("SVRG needs an inner-loop length m ≥ 1")),
        }
    }

    fn need_n(&self) -> Result<u64> {
        match self.n {
            Some(n) if n >= 1 => Ok(n),
            _ => Err(invalid("sample size n ≥ 1 required")),
        }
    }
}

/// Per-step (per-epoch for SVRG) contraction factor of the table entry.
pub fn contraction_factor(inputs: &RateInputs) -> Result<f64> {
    inputs.validate()?;
    let k = inputs.setting.kappa();
    let l = inputs.lipschitz;
    Ok(match inputs.algorithm {
        Algorithm::Sgd => 1.0 - 2.0 * inputs.need_gamma()? * k,
        Algorithm::Gd => 1.0 - k / l,
        Algorithm::Rcd => 1.0 - k / (inputs.need_d()? as f64 * l),
        Algorithm::Svrg => {
            let g = inputs.need_gamma()?;
            let m = inputs.need_m()? as f64;
            let margin = 1.0 - 2.0 * l * g;
            if margin <= 0.0 {
                return Err(Error::Undefined(format!(
                    "SVRG rate needs 1 − 2Lγ > 0 (got {margin})"
                )));
            }
            1.0 / (k * g * margin * m) + 2.0 * l * g / margin
        }
    })
}

/// SGD noise floor `γL²/(2κ)`; zero for the other methods.
pub fn noise_floor(inputs: &RateInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(match inputs.algorithm {
        Algorithm::Sgd => {
            inputs.need_gamma()? * inputs.lipschitz.powi(2) / (2.0 * inputs.setting.kappa())
        }
        _ => 0.0,
    })
}

/// The rate table entry after `T` iterations.
pub fn theoretical_suboptimality(inputs: &RateInputs) -> Result<f64> {
    let t = inputs
        .iterations
        .ok_or_else(|| invalid("iteration count T required"))?;
    let rho = contraction_factor(inputs)?;
    Ok(rho.powf(t as f64) + noise_floor(inputs)?)
}

/// Step size assumed by the SGD iteration count: `γ = 1/n`, putting the noise
/// floor at half the stability target `L²/(κn)`.
pub fn sgd_step_for_stability(n: u64) -> f64 {
    1.0 / n as f64
}

/// Iterations `T` reaching stability of order `L²/(κn)`.
///
/// SGD: `Ln/κ`. GD, RCD and SVRG: `log(L/(κn)) / log ρ` with `ρ` the
/// contraction factor. The result is the ceiling.
pub fn iterations_for_stability(inputs: &RateInputs) -> Result<u64> {
    inputs.validate()?;
    let n = inputs.need_n()? as f64;
    let k = inputs.setting.kappa();
    let l = inputs.lipschitz;
    if inputs.algorithm == Algorithm::Sgd {
        return Ok((l * n / k).ceil() as u64);
    }
    let target = l / (k * n);
    if target >= 1.0 {
        return Err(Error::Undefined(format!(
            "log(L/(κn)) needs L < κn (L = {l}, κn = {})",
            k * n
        )));
    }
    let rho = contraction_factor(inputs)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Undefined(format!(
            "contraction factor {rho} outside (0, 1)"
        )));
    }
    Ok((target.ln() / rho.ln()).ceil() as u64)
}

/// `⌈log(target)/log ρ⌉` for an arbitrary accuracy target.
pub fn iterations_to_accuracy(inputs: &RateInputs, target: f64) -> Result<u64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid("target accuracy must lie in (0, 1)"));
    }
    let rho = contraction_factor(inputs)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Undefined(format!(
            "contraction factor {rho} outside (0, 1)"
        )));
    }
    Ok((target.ln() / rho.ln()).ceil() as u64)
}

/// Quantity whose decay is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RateMetric {
    /// `E[f(w_t) − f*]`.
    Suboptimality,
    /// `E‖w_t − Π(w_t)‖`, distance to the minimizer set.
    Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FitVerdict {
    Fitted,
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Fitted per-step contraction `exp(slope)`.
    pub rho: f64,
    /// Mean of the last quarter of the averaged curve.
    pub floor: f64,
    /// 95% interval for `rho` from the slope's standard error.
    pub ci: (f64, f64),
    /// Inclusive iteration window used for the fit.
    pub window: (usize, usize),
    pub points: usize,
    pub replicas: usize,
    pub seed: u64,
    pub metric: RateMetric,
    pub verdict: FitVerdict,
    /// Averaged curve the fit was taken from.
    pub curve: Vec<f64>,
}

impl RateFit {
    pub fn is_fitted(&self) -> bool {
        self.verdict == FitVerdict::Fitted
    }
}

/// Least-squares fit of `log y_t = a + t log ρ` on the geometric-decay window of
/// an averaged curve. The window runs from the first point at or below half the
/// initial value to the last point above ten times the floor.
pub fn fit_curve(curve: &[f64]) -> (f64, f64, (f64, f64), (usize, usize), usize, FitVerdict) {
    let len = curve.len();
    let tail = &curve[len - (len / 4).max(1)..];
    let floor = tail.iter().sum::<f64>() / tail.len() as f64;
    let start_val = curve[0];
    let lower = (10.0 * floor).max(1e-280 * start_val.abs().max(f64::MIN_POSITIVE));
    let start = curve.iter().position(|&v| v <= 0.5 * start_val);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut window = (0, 0);
    if let Some(s) = start {
        for (t, &v) in curve.iter().enumerate().skip(s) {
            if !(v > lower) {
                break;
            }
            pts.push((t as f64, v.ln()));
            window = (s, t);
        }
    }
    if pts.len() < 5 {
        let why = format!("only {} points in the linear regime", pts.len());
        return (
            f64::NAN,
            floor,
            (f64::NAN, f64::NAN),
            window,
            pts.len(),
            FitVerdict::Inconclusive(why),
        );
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2))
        .sum();
    let se = (resid / (k - 2.0) / sxx).sqrt();
    let ci = ((slope - 1.96 * se).exp(), (slope + 1.96 * se).exp());
    (
        slope.exp(),
        floor,
        ci,
        window,
        pts.len(),
        FitVerdict::Fitted,
    )
}

/// Run `replicas` independent copies (streams `cfg.stream + r`), average the
/// metric per iteration and fit the contraction factor.
pub fn fit_rate<F: FiniteSum + ?Sized>(
    f: &F,
    cfg: &RunConfig,
    replicas: usize,
    metric: RateMetric,
) -> Result<RateFit> {
    if replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    if f.min_value().is_none() {
        return Err(Error::Unsupported(
            "rate fit needs a known optimal value".into(),
        ));
    }
    if metric == RateMetric::Distance && f.project_to_minimizers(&cfg.w0).is_none() {
        return Err(Error::Unsupported(
            "distance metric needs a minimizer projection".into(),
        ));
    }
    let replicas = if cfg.algorithm == Algorithm::Gd {
        1
    } else {
        replicas
    };
    let curves: Vec<Result<Vec<f64>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let run_cfg = cfg.clone().stream(cfg.stream + r).record(RecordMode::Full);
            let tr = optim::run(f, &run_cfg)?;
            Ok(tr
                .iterates
                .iter()
                .map(|w| match metric {
                    RateMetric::Suboptimality => f.suboptimality(w).unwrap_or(f64::NAN),
                    RateMetric::Distance => f
                        .project_to_minimizers(w)
                        .map_or(f64::NAN, |p| (w - p).norm()),
                })
                .collect())
        })
        .collect();
    let mut mean = vec![0.0; cfg.iterations + 1];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(c?) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= replicas as f64;
    }
    let (rho, floor, ci, window, points, verdict) = fit_curve(&mean);
    Ok(RateFit {
        rho,
        floor,
        ci,
        window,
        points,
        replicas,
        seed: cfg.seed,
        metric,
        verdict,
        curve: mean,
    })
}

/// One row of the combined rate / iteration table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub algorithm: Algorithm,
    pub setting: &'static str,
    pub rate: Option<f64>,
    pub iterations: Option<u64>,
    pub note: String,
}

/// Both tables for all algorithms and both settings with shared constants.
#[allow(clippy::too_many_arguments)]
pub fn tables(
    kappa: f64,
    lipschitz: f64,
    gamma: f64,
    d: usize,
    m: usize,
    t: u64,
    n: u64,
) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for setting in [Setting::StronglyConvex(kappa), Setting::Pl(kappa)] {
        for alg in [
            Algorithm::Sgd,
            Algorithm::Gd,
            Algorithm::Rcd,
            Algorithm::Svrg,
        ] {
            let inputs = RateInputs::new(alg, setting, lipschitz)
                .gamma(gamma)
                .d(d)
                .m(m)
                .iterations(t)
                .n(n);
            let rate = theoretical_suboptimality(&inputs);
            let iters = iterations_for_stability(&inputs);
            let mut note = vec![CONSTANTS_NOTE.to_string()];
            if let Err(e) = &rate {
                note.push(format!("rate: {e}"));
            }
            if let Err(e) = &iters {
                note.push(format!("iterations: {e}"));
            }
            if alg == Algorithm::Sgd {
                note.push(format!(
                    "SGD iteration count assumes γ = 1/n = {}",
                    sgd_step_for_stability(n)
                ));
            }
            rows.push(TableRow {
                algorithm: alg,
                setting: setting.name(),
                rate: rate.ok(),
                iterations: iters.ok(),
                note: note.join("; "),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(alg: Algorithm, mu: f64, l: f64) -> RateInputs {
        RateInputs::new(alg, Setting::Pl(mu), l)
    }

    #[test]
    fn gd_rate_worked_value() {
        let v = theoretical_suboptimality(&pl(Algorithm::Gd, 1.0, 2.0).iterations(10)).unwrap();
        assert!((v - 9.765625e-4).abs() < 1e-18);
    }

    #[test]
    fn svrg_rate_worked_value() {
        let i = pl(Algorithm::Svrg, 1.0, 2.0)
            .gamma(0.05)
            .m(50)
            .iterations(3);
        assert!((contraction_factor(&i).unwrap() - 0.75).abs() < 1e-15);
        assert!((theoretical_suboptimality(&i).unwrap() - 0.421875).abs() < 1e-15);
    }

    #[test]
    fn svrg_undefined_for_large_step() {
        let i = pl(Algorithm::Svrg, 1.0, 2.0)
            .gamma(0.25)
            .m(50)
            .iterations(3);
        assert!(matches!(
            theoretical_suboptimality(&i),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn sgd_floor() {
        let i = RateInputs::new(Algorithm::Sgd, Setting::StronglyConvex(1.0), 1.0)
            .gamma(0.01)
            .iterations(1_000_000);
        assert!((theoretical_suboptimality(&i).unwrap() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn iteration_worked_values() {
        let gd = RateInputs::new(Algorithm::Gd, Setting::StronglyConvex(1.0), 2.0).n(100);
        assert_eq!(iterations_for_stability(&gd).unwrap(), 6);
        assert_eq!(
            iterations_for_stability(&pl(Algorithm::Sgd, 1.0, 2.0).n(100)).unwrap(),
            200
        );
        assert_eq!(
            iterations_for_stability(&pl(Algorithm::Rcd, 1.0, 2.0).d(4).n(100)).unwrap(),
            30
        );
    }

    #[test]
    fn ill_posed_log_rejected() {
        let gd = RateInputs::new(Algorithm::Gd, Setting::StronglyConvex(1.0), 200.0).n(100);
        let err = iterations_for_stability(&gd).unwrap_err();
        assert!(err.to_string().contains("L < κn"), "{err}");
    }

    #[test]
    fn missing_inputs_named() {
        assert!(contraction_factor(&pl(Algorithm::Rcd, 1.0, 2.0)).is_err());
        assert!(contraction_factor(&pl(Algorithm::Svrg, 1.0, 2.0).gamma(0.05)).is_err());
        assert!(theoretical_suboptimality(&pl(Algorithm::Gd, 1.0, 2.0)).is_err());
    }

    #[test]
    fn curve_fit_recovers_geometric_rate() {
        let curve: Vec<f64> = (0..60).map(|t| 3.0 * 0.8f64.powi(t) + 1e-12).collect();
        let (rho, _, ci, _, points, verdict) = fit_curve(&curve);
        assert_eq!(verdict, FitVerdict::Fitted);
        assert!((rho - 0.8).abs() < 1e-6, "{rho}");
        assert!(ci.0 <= rho && rho <= ci.1);
        assert!(points >= 5);
    }

    #[test]
    fn flat_curve_is_inconclusive() {
        let curve = vec![1.0; 20];
        assert!(matches!(fit_curve(&curve).5, FitVerdict::Inconclusive(_)));
    }

    #[test]
    fn tables_cover_all_entries() {
        let rows = tables(1.0, 2.0, 0.05, 4, 50, 10, 100);
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.rate.is_some()));
    }
}
