//! Empirical contraction factors of GD, RCD and SVRG against their closed forms.

use nalgebra::DMatrix;
use plstab::linalg::dvec;
use plstab::optim::{Algorithm, RunConfig, StepSchedule};
use plstab::problems::EmpiricalRisk;
use plstab::rates::{self, RateMetric};
use plstab::{ExampleZ, LabeledDataset, ProblemInstance};

fn main() -> plstab::Result<()> {
    let a = DMatrix::from_diagonal(&dvec(&[1.0, 2.0, 4.0, 8.0]));
    let problem = ProblemInstance::quadratic(a, 10.0, 1.0)?;
    let data = LabeledDataset::new(
        vec![
            ExampleZ::new(vec![0.5, -0.5, 0.0, 0.2], 0.0),
            ExampleZ::new(vec![-0.5, 0.5, 0.0, -0.2], 0.0),
        ],
        "pair",
    )?;
    let f = EmpiricalRisk::new(&problem, &data)?;
    let w0 = dvec(&[2.0, 1.0, 1.0, 1.0]);

    let runs = [
        (Algorithm::Gd, 80, 1, 1.0 - 1.0 / 8.0),
        (Algorithm::Rcd, 400, 100, 1.0 - 1.0 / 32.0),
    ];
    for (alg, t, replicas, theory) in runs {
        let cfg = RunConfig::new(alg, t, StepSchedule::Constant(1.0 / 8.0), w0.clone()).seed(1);
        let fit = rates::fit_rate(&f, &cfg, replicas, RateMetric::Distance)?;
        println!(
            "{:<5} ρ̂ = {:.4} (95% CI {:.4}–{:.4}), closed form {theory:.4}",
            alg.name(),
            fit.rho,
            fit.ci.0,
            fit.ci.1
        );
    }

    let cfg = RunConfig::new(Algorithm::Svrg, 10, StepSchedule::Constant(0.02), w0)
        .inner_len(40)
        .seed(1);
    let fit = rates::fit_rate(&f, &cfg, 50, RateMetric::Suboptimality)?;
    println!("svrg  ρ̂ = {:.4} per epoch ({:?})", fit.rho, fit.verdict);
    Ok(())
}
