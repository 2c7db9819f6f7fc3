use nalgebra::DMatrix;
use plstab::linalg::dvec;
use plstab::optim::{Algorithm, RunConfig, StepSchedule};
use plstab::stability::{self, GenMode, UniformBall};
use plstab::ProblemInstance;

fn main() -> plstab::Result<()> {
    let problem = ProblemInstance::quadratic(DMatrix::from_diagonal(&dvec(&[1.0, 2.0])), 2.0, 1.0)?;
    let gd = RunConfig::new(
        Algorithm::Gd,
        200,
        StepSchedule::Constant(0.5),
        dvec(&[0.0, 0.0]),
    );
    let gen = UniformBall { d: 2, radius: 1.0 };

    for n in [10, 40, 160] {
        let rep = stability::measure_generalization_gap(&problem, &gen, &gd, n, 200, 5_000, 7)?;
        let eps = 2.0 * 8.0 / n as f64;
        let bound = stability::generalization_bounds(GenMode::Uniform { eps })?;
        println!(
            "n = {n:>3}  signed gap {:+.4} ± {:.4}  |gap| {:.4}  uniform bound {bound:.4}",
            rep.mean_signed_gap, rep.se_signed, rep.mean_abs_gap
        );
    }
    Ok(())
}
