//! Acceptance criteria 1–13. Each test prints one `criterion N: PASS|FAIL` line
//! and fails when its criterion does.

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use plstab::counterexample::{self, SgdConfig};
use plstab::geometry;
use plstab::linalg::dvec;
use plstab::linnet::{self, DataMatrices, LayerStack, LinnetObjective};
use plstab::optim::{self, Algorithm, RecordMode, RunConfig, StepSchedule};
use plstab::problems::{
    grad_loss, leaky_relu_composite, EmpiricalRisk, ExampleZ, LabeledDataset, ParamVector,
    ProblemInstance,
};
use plstab::rates::{self, RateInputs, RateMetric, Setting};
use plstab::report::mask_timestamp;
use plstab::rng::{self, StreamRng};
use plstab::stability::{self, DataGenerator, ErmOracle, StabilityProbe, UniformBall};

fn verdict(n: u32, pass: bool, detail: impl AsRef<str>) {
    println!(
        "criterion {n}: {} ({})",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn gaussian(r: &mut StreamRng) -> f64 {
    r.sample(StandardNormal)
}

/// `QΛQᵀ` with a Haar-ish orthogonal `Q` and the given spectrum.
fn rotated(spectrum: &[f64], r: &mut StreamRng) -> DMatrix<f64> {
    let d = spectrum.len();
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(r));
    let q = g.qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn ball_data(d: usize, n: usize, r: &mut StreamRng) -> (LabeledDataset, LabeledDataset) {
    let gen = UniformBall { d, radius: 1.0 };
    let s = LabeledDataset::new((0..n).map(|_| gen.sample(r)).collect(), "S").unwrap();
    let sp = s.neighbor(n - 1, gen.sample(r)).unwrap();
    (s, sp)
}

#[test]
fn criterion_01_gd_instability() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut all = true;
    for gamma in [1.0, 0.1] {
        for n in [11, 51, 101] {
            let rep =
                counterexample::gd_instability_experiment(n, 0.01, gamma, 1000, 64, 1).unwrap();
            let diverged = rep.rows.iter().filter(|r| r.diverged).count();
            let ok = rep.fraction_unstable == 1.0 && !rep.inconclusive;
            all &= ok;
            lines.push(format!(
                "γ={gamma} n={n}: {:.0}% gap ≥ 1/2, {diverged} diverged",
                100.0 * rep.fraction_unstable
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = all && secs < 10.0;
    verdict(1, pass, format!("{}; {secs:.1}s", lines.join("; ")));
}

#[test]
fn criterion_02_sgd_stability_slope() {
    let start = Instant::now();
    let sweep =
        counterexample::sgd_sweep(&[11, 21, 41, 81], 0.01, &SgdConfig::standard(0), 500).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let values: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| format!("n={}: {:.4}", r.n, r.value))
        .collect();
    let diverged: usize = sweep.rows.iter().map(|r| r.diverged).sum();
    let pass = (-1.3..=-0.7).contains(&sweep.slope) && secs < 120.0 && diverged == 0;
    verdict(
        2,
        pass,
        format!(
            "slope {:.3}; {}; {diverged} diverged; {secs:.1}s",
            sweep.slope,
            values.join(", ")
        ),
    );
}

#[test]
fn criterion_03_w_hat() {
    let w = counterexample::locate_what().unwrap();
    let a = counterexample::dloss(w, -1.0, 1.0);
    let b = counterexample::dloss(w, -0.5, 1.0);
    let pass = (0.5980..=0.5981).contains(&w)
        && (a + 0.486254).abs() <= 1e-3
        && (b - 0.486254).abs() <= 1e-3;
    verdict(
        3,
        pass,
        format!("ŵ = {w:.9}, ℓ′(ŵ;(−1,1)) = {a:.6}, ℓ′(ŵ;(−1/2,1)) = {b:.6}"),
    );
}

/// Instance `k`: dimension 1–5, n ∈ {20, 100}, strongly convex for odd `k`.
fn convex_instance(
    k: u64,
    seed: u64,
) -> (ProblemInstance, LabeledDataset, LabeledDataset, Option<f64>) {
    let mut r = rng::stream(seed, k);
    let d = 1 + (k % 5) as usize;
    let n = if k.is_multiple_of(2) { 20 } else { 100 };
    let sc = k % 2 == 1;
    let spectrum: Vec<f64> = (0..d)
        .map(|i| {
            if !sc && i == 0 && d > 1 {
                0.0
            } else {
                rng::uniform(&mut r, if sc { 0.5 } else { 0.0 }, 2.0)
            }
        })
        .collect();
    let lambda = sc.then(|| spectrum.iter().copied().fold(f64::INFINITY, f64::min));
    let problem = ProblemInstance::quadratic(rotated(&spectrum, &mut r), 2.0, 1.0).unwrap();
    let (s, sp) = ball_data(d, n, &mut r);
    (problem, s, sp, lambda)
}

#[test]
fn criterion_04_convex_gd_divergence() {
    let t_max = 300;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for k in 0..50 {
        let (p, s, sp, lambda) = convex_instance(k, 404);
        let beta = p.constants.smoothness.unwrap();
        let gamma = 1.0 / beta;
        let schedule = StepSchedule::Constant(gamma);
        let cfg = RunConfig::new(Algorithm::Gd, t_max, schedule, optim::zeros(p.dim))
            .record(RecordMode::Full);
        let a = optim::run_gd(&p, &s, &cfg).unwrap();
        let b = optim::run_gd(&p, &sp, &cfg).unwrap();
        let visited: Vec<ParamVector> = a.iterates.iter().chain(&b.iterates).cloned().collect();
        let examples: Vec<ExampleZ> = s.examples().iter().chain(sp.examples()).cloned().collect();
        let l = stability::lipschitz_along(&p, &examples, &visited);
        let n = s.len();
        for t in 0..=t_max {
            let gap = (&a.iterates[t] - &b.iterates[t]).norm();
            let convex = stability::gd_convex_divergence_bound(l, n, &schedule, t);
            let mut bound = convex;
            if let Some(lam) = lambda {
                bound = bound.min(stability::gd_strongly_convex_divergence_bound(l, lam, n));
                if gap
                    > stability::gd_strongly_convex_divergence_bound(l, lam, n) * (1.0 + 1e-9)
                        + 1e-12
                {
                    violations += 1;
                }
            }
            if gap > convex * (1.0 + 1e-9) + 1e-12 {
                violations += 1;
            }
            if bound > 0.0 {
                worst = worst.max(gap / bound);
            }
        }
    }
    verdict(
        4,
        violations == 0,
        format!("{violations} violations over 50 instances; max ratio {worst:.3}"),
    );
}

#[test]
fn criterion_05_coupled_sgd_divergence() {
    let t_max = 200;
    let seeds = 200;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let (p, s, sp, _) = convex_instance(k, 505);
        let gamma = 1.0 / p.constants.smoothness.unwrap();
        let f = EmpiricalRisk::new(&p, &s).unwrap();
        let g = EmpiricalRisk::new(&p, &sp).unwrap();
        let mut mean = vec![0.0; t_max + 1];
        let mut visited = Vec::new();
        for r in 0..seeds {
            let cfg = RunConfig::new(
                Algorithm::Sgd,
                t_max,
                StepSchedule::Constant(gamma),
                optim::zeros(p.dim),
            )
            .seed(k)
            .stream(r)
            .record(RecordMode::Full);
            let a = optim::run(&f, &cfg).unwrap();
            let b = optim::run(&g, &cfg).unwrap();
            for (m, (x, y)) in mean.iter_mut().zip(a.iterates.iter().zip(&b.iterates)) {
                *m += (x - y).norm() / seeds as f64;
            }
            visited.extend(a.iterates);
            visited.extend(b.iterates);
        }
        let examples: Vec<ExampleZ> = s.examples().iter().chain(sp.examples()).cloned().collect();
        let l = stability::lipschitz_along(&p, &examples, &visited);
        for (t, m) in mean.iter().enumerate().skip(1) {
            let bound = stability::sgd_coupled_divergence_bound(l, gamma, t, s.len());
            if *m > bound * (1.0 + 1e-9) {
                violations += 1;
            }
            worst = worst.max(m / bound);
        }
    }
    verdict(
        5,
        violations == 0,
        format!("{violations} mean-level violations over 20 instances; max ratio {worst:.3}"),
    );
}

#[test]
fn criterion_06_rate_fits() {
    // GD on a λ-strongly convex quadratic with spectrum {λ, L} and γ = 1/L.
    let (lambda, l) = (1.0, 4.0);
    let p =
        ProblemInstance::quadratic(DMatrix::from_diagonal(&dvec(&[lambda, l])), 10.0, 1.0).unwrap();
    let s = LabeledDataset::new(vec![ExampleZ::new(vec![0.0, 0.0], 0.0)], "origin").unwrap();
    let f = EmpiricalRisk::new(&p, &s).unwrap();
    let cfg = RunConfig::new(
        Algorithm::Gd,
        60,
        StepSchedule::Constant(1.0 / l),
        dvec(&[1.0, 1.0]),
    );
    let gd = rates::fit_rate(&f, &cfg, 1, RateMetric::Distance).unwrap();
    let gd_theory = 1.0 - lambda / l;
    let gd_ok = gd.is_fitted() && ((gd.rho - gd_theory) / gd_theory).abs() < 5e-4;

    // SVRG: leaky composite with unit slopes, μ = 1 and per-example smoothness 2.
    let (lp, ls) =
        leaky_relu_composite(1.0, &DMatrix::identity(2, 2), &dvec(&[0.3, -0.7]), 1.0, 1.0).unwrap();
    let lf = EmpiricalRisk::new(&lp, &ls).unwrap();
    let svrg_cfg = RunConfig::new(
        Algorithm::Svrg,
        12,
        StepSchedule::Constant(0.05),
        dvec(&[2.0, 2.0]),
    )
    .inner_len(50)
    .seed(6);
    let svrg = rates::fit_rate(&lf, &svrg_cfg, 100, RateMetric::Suboptimality).unwrap();
    let svrg_theory = rates::contraction_factor(
        &RateInputs::new(Algorithm::Svrg, Setting::Pl(1.0), 2.0)
            .gamma(0.05)
            .m(50),
    )
    .unwrap();
    let svrg_ok = svrg.is_fitted() && svrg.rho <= 0.9375;

    // RCD on diag(1, 2, 4, 8).
    let a = DMatrix::from_diagonal(&dvec(&[1.0, 2.0, 4.0, 8.0]));
    let rp = ProblemInstance::quadratic(a, 10.0, 1.0).unwrap();
    let rs = LabeledDataset::new(vec![ExampleZ::new(vec![0.0; 4], 0.0)], "origin").unwrap();
    let rf = EmpiricalRisk::new(&rp, &rs).unwrap();
    let rcd_cfg = RunConfig::new(
        Algorithm::Rcd,
        400,
        StepSchedule::Constant(1.0 / 8.0),
        dvec(&[2.0, 0.1, 0.1, 0.1]),
    )
    .seed(7);
    let rcd = rates::fit_rate(&rf, &rcd_cfg, 200, RateMetric::Suboptimality).unwrap();
    let rcd_theory = 1.0 - 1.0 / (4.0 * 8.0);
    let rcd_ok = rcd.is_fitted() && ((rcd.rho - rcd_theory) / rcd_theory).abs() <= 0.2;

    verdict(
        6,
        gd_ok && svrg_ok && rcd_ok,
        format!(
            "GD ρ̂ = {:.6} vs {gd_theory}; SVRG ρ̂ = {:.4} ≤ 0.9375 (table {svrg_theory}); RCD ρ̂ = {:.4} vs {rcd_theory}",
            gd.rho, svrg.rho, rcd.rho
        ),
    );
}

#[test]
fn criterion_07_iteration_calculators() {
    let (mu, l, n) = (1.0, 2.0, 100u64);
    let gd = RateInputs::new(Algorithm::Gd, Setting::StronglyConvex(mu), l).n(n);
    let sgd = RateInputs::new(Algorithm::Sgd, Setting::Pl(mu), l).n(n);
    let rcd = RateInputs::new(Algorithm::Rcd, Setting::Pl(mu), l)
        .n(n)
        .d(4);
    let t_gd = rates::iterations_for_stability(&gd).unwrap();
    let t_sgd = rates::iterations_for_stability(&sgd).unwrap();
    let t_rcd = rates::iterations_for_stability(&rcd).unwrap();
    let target = l / (mu * n as f64);
    let plug =
        |inputs: RateInputs, t: u64| rates::contraction_factor(&inputs).unwrap().powf(t as f64);
    let back_gd = plug(gd.clone(), t_gd);
    let back_rcd = plug(rcd.clone(), t_rcd);
    let pass = (t_gd, t_sgd, t_rcd) == (6, 200, 30) && back_gd <= target && back_rcd <= target;
    verdict(
        7,
        pass,
        format!(
            "GD-SC {t_gd}, SGD-PL {t_sgd}, RCD-PL {t_rcd}; ρ^T = {back_gd:.4} (GD), {back_rcd:.4} (RCD) vs L/(μn) = {target}"
        ),
    );
}

#[test]
fn criterion_08_pl_constants() {
    let (lp, ls) =
        leaky_relu_composite(1.0, &DMatrix::identity(2, 2), &dvec(&[0.4, -0.3]), 1.0, 0.5).unwrap();
    let lf = EmpiricalRisk::new(&lp, &ls).unwrap();
    let sampler = geometry::RegionSampler::new(geometry::Region::default_ball(2), 10_000, 8);
    let est =
        geometry::estimate_pl(&lf, &sampler, 0.0, plstab::problems::FStarSource::Analytic).unwrap();
    let leaky_ok = est.value >= 0.25 * (1.0 - 1e-6) && est.used + est.excluded == 10_000;

    let dm = DataMatrices::new(
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.7, -1.1, 0.2, 0.9]),
    )
    .unwrap();
    let mu = linnet::pl_constant(2, 0.5, &dm).unwrap();
    let mut r = rng::stream(8, 1);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..10_000 {
        let stack = LayerStack::random(2, 2, 0.5, &mut r);
        if let Some(v) = linnet::pl_ratio(&stack, &dm).unwrap() {
            min_ratio = min_ratio.min(v);
        }
    }
    let linnet_ok = (mu - 0.25).abs() < 1e-15 && min_ratio >= 0.25 * (1.0 - 1e-6);
    verdict(
        8,
        leaky_ok && linnet_ok,
        format!(
            "leaky min ratio {:.9} over {} points ({} at kinks); linnet μ = {mu}, min ratio {min_ratio:.6}",
            est.value, est.used, est.excluded
        ),
    );
}

#[test]
fn criterion_09_linnet_lemmas() {
    let mut r = rng::stream(9, 0);
    let mut proj_min = f64::INFINITY;
    let mut pyth_max = 0.0f64;
    for _ in 0..500 {
        let dm = DataMatrices::random(3, 6, &mut r).unwrap();
        let depth = 1 + (r.random::<u32>() % 3) as usize;
        let stack = LayerStack::new(
            (0..depth)
                .map(|_| DMatrix::from_fn(3, 3, |_, _| gaussian(&mut r)))
                .collect(),
        )
        .unwrap();
        proj_min = proj_min.min(linnet::check_projection_lemma(&stack, &dm).unwrap().slack);
        pyth_max = pyth_max.max(linnet::pythagorean_residual(&stack, &dm).unwrap());
    }
    let mut grad_min = f64::INFINITY;
    for k in 0..500 {
        let dm = DataMatrices::random(3, 6, &mut r).unwrap();
        let stack = LayerStack::random(2 + k % 2, 3, 0.1, &mut r);
        grad_min = grad_min.min(linnet::check_grad_lower_bound(&stack, &dm).unwrap().slack);
    }
    let mut global = 0;
    let runs = 8;
    let mut worst_gap = 0.0f64;
    for _ in 0..runs {
        let dm = DataMatrices::random(3, 8, &mut r).unwrap();
        let stack = LayerStack::random(2, 3, 0.5, &mut r);
        let f = LinnetObjective::new(dm.clone(), 2).unwrap();
        let (w, _) =
            optim::descend_to_tolerance(&f, &stack.flatten(), 0.01, 1e-9, 2_000_000).unwrap();
        let end = LayerStack::from_flat(&w, 2, 3).unwrap();
        if let linnet::CriticalPoint::GlobalMin { gap } =
            linnet::classify_critical_point(&end, &dm, 1e-8, 1e-6).unwrap()
        {
            global += 1;
            worst_gap = worst_gap.max(gap);
        }
    }
    let pass = proj_min >= -1e-9 && grad_min >= -1e-9 && pyth_max <= 1e-9 && global == runs;
    verdict(
        9,
        pass,
        format!(
            "projection slack min {proj_min:.3e}, gradient slack min {grad_min:.3e}, Pythagoras max {pyth_max:.1e}, {global}/{runs} GD runs global (max gap {worst_gap:.1e})"
        ),
    );
}

#[test]
fn criterion_10_erm_pointwise_bound() {
    let mut r = rng::stream(10, 0);
    let spectrum = [0.5, 1.2, 2.0];
    let p = ProblemInstance::quadratic(rotated(&spectrum, &mut r), 2.0, 1.0).unwrap();
    let l = p.constants.lipschitz.unwrap();
    let lambda = p.constants.strong_convexity.unwrap();
    let gen = UniformBall { d: 3, radius: 1.0 };
    let pool: Vec<ExampleZ> = (0..160).map(|_| gen.sample(&mut r)).collect();
    let ns = [20usize, 40, 80, 160];
    let mut measured = Vec::new();
    let mut violations = 0;
    for &n in &ns {
        let s = LabeledDataset::new(pool[..n].to_vec(), format!("n{n}")).unwrap();
        let v = stability::measure_pointwise_stability(
            &p,
            &s,
            &ErmOracle,
            &StabilityProbe::pointwise(1),
        )
        .unwrap();
        if v > 2.0 * l * l / (lambda * (n - 1) as f64) {
            violations += 1;
        }
        measured.push(v);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (slope, _) = stability::loglog_slope(&xs, &measured).unwrap();
    let pass = violations == 0 && (slope + 1.0).abs() <= 0.3;
    verdict(
        10,
        pass,
        format!(
            "{violations} bound violations; slope {slope:.3}; measured [{}]",
            measured
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn criterion_11_gradient_checks() {
    let mut r = rng::stream(11, 0);
    let leaky = leaky_relu_composite(
        1.0,
        &DMatrix::identity(3, 3),
        &dvec(&[0.1, 0.2, 0.3]),
        1.0,
        0.3,
    )
    .unwrap()
    .0;
    let kinds = vec![
        ProblemInstance::isotropic_quadratic(3, 1.5, 2.0, 2.0).unwrap(),
        ProblemInstance::quadratic(rotated(&[0.0, 1.0, 3.0], &mut r), 2.0, 2.0).unwrap(),
        ProblemInstance::quartic(1),
        ProblemInstance::quartic(3),
        leaky,
        ProblemInstance::deep_linear(1, 2).unwrap(),
        ProblemInstance::deep_linear(3, 2).unwrap(),
        ProblemInstance::linear(3),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for p in &kinds {
        let pairs: Vec<(ParamVector, ExampleZ)> = (0..100)
            .map(|_| {
                let w = ParamVector::from_fn(p.dim, |_, _| rng::uniform(&mut r, -1.5, 1.5));
                let z = ExampleZ::new(
                    (0..p.feature_dim)
                        .map(|_| rng::uniform(&mut r, -1.0, 1.0))
                        .collect::<Vec<_>>(),
                    rng::uniform(&mut r, -1.0, 1.0),
                );
                (w, z)
            })
            .collect();
        assert!(grad_loss(p, &pairs[0].0, &pairs[0].1).is_ok());
        let rep = geometry::grad_check_loss(p, &pairs).unwrap();
        pass &= rep.passed && rep.checked + rep.excluded == 100 && rep.checked >= 90;
        lines.push(format!(
            "{}(d={}) {:.1e} on {}",
            p.kind.name(),
            p.dim,
            rep.max_rel_error,
            rep.checked
        ));
    }
    verdict(11, pass, lines.join(", "));
}

#[test]
fn criterion_12_sgd_drift() {
    let (s, _, land) = counterexample::build_datasets(11, 0.01).unwrap();
    let p = ProblemInstance::quartic(1);
    let f = EmpiricalRisk::new(&p, &s).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for t in [100usize, 1_000, 10_000] {
        let mut drift = 0.0;
        let mut m_hat = 0.0f64;
        for r in 0..100 {
            let w0 = ParamVector::from_element(1, land.w_hat);
            let cfg = RunConfig::new(Algorithm::Sgd, t, StepSchedule::InverseT(0.1), w0.clone())
                .seed(12)
                .stream(r)
                .record(RecordMode::Final);
            let tr = optim::run(&f, &cfg).unwrap();
            drift += (&tr.last - &w0).norm() / 100.0;
            m_hat = m_hat.max(tr.max_update_grad_norm);
        }
        let bound = 2.0 * m_hat * (t as f64).ln();
        pass &= drift <= bound;
        lines.push(format!("T={t}: {drift:.4} ≤ {bound:.4}"));
    }
    verdict(12, pass, lines.join(", "));
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_plstab"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

#[test]
fn criterion_13_determinism() {
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "rates",
            "--alg",
            "gd",
            "--setting",
            "pl",
            "--mu",
            "1",
            "--L",
            "2",
            "--T",
            "10",
        ],
        vec!["rates"],
        vec![
            "iters",
            "--alg",
            "rcd",
            "--setting",
            "pl",
            "--mu",
            "1",
            "--L",
            "2",
            "--n",
            "100",
        ],
        vec!["pl-check", "--problem", "leaky", "--samples", "500"],
        vec![
            "qg-check",
            "--problem",
            "quadratic",
            "--d",
            "3",
            "--samples",
            "500",
        ],
        vec!["grad-check", "--samples", "20"],
        vec![
            "stability",
            "--alg",
            "sgd",
            "--mode",
            "uniform",
            "--ns",
            "10,20",
            "--replicas",
            "8",
            "--T",
            "50",
        ],
        vec![
            "gen-gap",
            "--ns",
            "10,20",
            "--trials",
            "20",
            "--holdout",
            "200",
        ],
        vec![
            "counterexample",
            "--n",
            "11",
            "--gamma",
            "0.1",
            "--inits",
            "16",
        ],
        vec![
            "counterexample",
            "--experiment",
            "sgd",
            "--n",
            "11,21",
            "--replicas",
            "50",
            "--sgd-steps",
            "300",
        ],
        vec!["linnet", "--instances", "3", "--train-steps", "200"],
        vec![
            "run",
            "--problem",
            "quartic",
            "--n",
            "11",
            "--alg",
            "sgd",
            "--T",
            "50",
            "--seed",
            "4",
        ],
    ];
    let mut failures = Vec::new();
    for case in &cases {
        let (c1, a) = run_cli(case);
        let mut with_jobs = case.clone();
        with_jobs.extend(["--jobs", "3"]);
        let (c2, b) = run_cli(&with_jobs);
        if c1 != 0 || c2 != 0 || mask_timestamp(&a) != mask_timestamp(&b) || a.is_empty() {
            failures.push(case[0].to_string());
        }
    }
    verdict(
        13,
        failures.is_empty(),
        format!(
            "{} subcommand configs re-run (second run with --jobs 3); mismatches: {failures:?}",
            cases.len()
        ),
    );
}
