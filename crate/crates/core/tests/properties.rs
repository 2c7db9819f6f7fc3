use proptest::prelude::*;

use plstab::linalg::dvec;
use plstab::optim::{Algorithm, StepSchedule};
use plstab::problems::{grad_loss, loss};
use plstab::rates::{self, RateInputs, Setting};
use plstab::stability::{self, BoundInputs, Theorem};
use plstab::{ExampleZ, LabeledDataset, ParamVector, ProblemInstance};

fn central_difference(p: &ProblemInstance, w: &ParamVector, z: &ExampleZ) -> ParamVector {
    let mut g = ParamVector::zeros(w.len());
    for i in 0..w.len() {
        let h = 1e-6 * (1.0 + w[i].abs());
        let (mut a, mut b) = (w.clone(), w.clone());
        a[i] += h;
        b[i] -= h;
        g[i] = (loss(p, &a, z).unwrap() - loss(p, &b, z).unwrap()) / (2.0 * h);
    }
    g
}

proptest! {
    #[test]
    fn quartic_gradient_matches_finite_differences(w in -2.0..2.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let p = ProblemInstance::quartic(1);
        let (w, z) = (dvec(&[w]), ExampleZ::new(vec![x], y));
        let g = grad_loss(&p, &w, &z).unwrap();
        let fd = central_difference(&p, &w, &z);
        prop_assert!((&g - &fd).norm() <= 1e-5 * (1.0 + g.norm()));
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences(w in prop::array::uniform3(-1.5..1.5f64), x in prop::array::uniform3(-1.0..1.0f64)) {
        let p = ProblemInstance::isotropic_quadratic(3, 1.0, 3.0, 2.0).unwrap();
        let (w, z) = (dvec(&w), ExampleZ::new(x.to_vec(), 0.0));
        let g = grad_loss(&p, &w, &z).unwrap();
        prop_assert!((&g - central_difference(&p, &w, &z)).norm() <= 1e-5 * (1.0 + g.norm()));
    }

    #[test]
    fn suboptimality_rate_decreases_in_t(l in 1.0..10.0f64, frac in 0.01..1.0f64, t in 1u64..500) {
        let mu = l * frac;
        for alg in [Algorithm::Gd, Algorithm::Rcd] {
            let at = |t| rates::theoretical_suboptimality(&RateInputs::new(alg, Setting::Pl(mu), l).d(3).iterations(t)).unwrap();
            prop_assert!(at(t + 1) <= at(t));
        }
    }

    #[test]
    fn contraction_worsens_as_kappa_shrinks(l in 1.0..10.0f64, frac in 0.02..1.0f64) {
        let mu = l * frac;
        for alg in [Algorithm::Gd, Algorithm::Rcd] {
            let rho = |k| rates::contraction_factor(&RateInputs::new(alg, Setting::StronglyConvex(k), l).d(4)).unwrap();
            prop_assert!(rho(mu / 2.0) >= rho(mu));
        }
    }

    #[test]
    fn iteration_count_plugs_back(l in 1.0..5.0f64, frac in 0.05..1.0f64, n in 50u64..5000) {
        let mu = l * frac;
        prop_assume!(l < mu * n as f64);
        for alg in [Algorithm::Gd, Algorithm::Rcd] {
            let inputs = RateInputs::new(alg, Setting::Pl(mu), l).d(4).n(n);
            let t = rates::iterations_for_stability(&inputs).unwrap();
            let rho = rates::contraction_factor(&inputs).unwrap();
            let target = l / (mu * n as f64);
            prop_assert!(rho.powf(t as f64) <= target * (1.0 + 1e-12));
            prop_assert!(rho.powf(t as f64) <= l * l / (mu * n as f64));
            if t > 0 {
                prop_assert!(rho.powf((t - 1) as f64) > target * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn neighbor_differs_in_exactly_one_slot(n in 2usize..30, i_frac in 0.0..1.0f64, v in -1.0..1.0f64) {
        let data = LabeledDataset::new((0..n).map(|k| ExampleZ::new(vec![k as f64], 0.0)).collect(), "line").unwrap();
        let i = ((n as f64 * i_frac) as usize).min(n - 1);
        let nb = data.neighbor(i, ExampleZ::new(vec![v + 100.0], 1.0)).unwrap();
        prop_assert_eq!(nb.len(), n);
        let diffs: Vec<usize> = (0..n).filter(|&k| nb.examples()[k] != data.examples()[k]).collect();
        prop_assert_eq!(diffs, vec![i]);
    }

    #[test]
    fn pl_bounds_shrink_with_n(l in 0.1..5.0f64, mu in 0.1..5.0f64, n in 2u64..10_000, eps in 0.0..1.0f64) {
        let at = |n| {
            let inputs = BoundInputs { lipschitz: l, mu, n, eps: Some(eps), ..Default::default() };
            (
                stability::blackbox_bound(Theorem::PlPointwise, 1, inputs).unwrap().bound,
                stability::blackbox_bound(Theorem::PlUniform, 1, inputs).unwrap().bound,
            )
        };
        let (p, u) = at(n);
        let (p2, u2) = at(n + 1);
        prop_assert!(p2 <= p && u2 <= u && u <= p);
        prop_assert!(p >= l * eps + 2.0 * l * l / (mu * n as f64));
    }

    #[test]
    fn partial_sums_add_up(c in 0.01..2.0f64, t in 1usize..200) {
        let s = StepSchedule::InverseT(c);
        prop_assert!((s.partial_sum(t + 1) - s.partial_sum(t) - c / (t + 1) as f64).abs() < 1e-12);
        prop_assert!(s.partial_sum(t) <= c * (1.0 + (t as f64).ln()) + 1e-12);
    }
}
