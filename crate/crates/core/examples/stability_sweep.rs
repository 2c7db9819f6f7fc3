//! Pointwise stability of exact ERM on a strongly convex quadratic, compared
//! with `2L²/(λ(n−1))`, and the log-log slope in `n`.

use nalgebra::DMatrix;
use plstab::linalg::dvec;
use plstab::stability::{self, DataGenerator, ErmOracle, StabilityProbe, UniformBall};
use plstab::{rng, LabeledDataset, ProblemInstance};

fn main() -> plstab::Result<()> {
    let problem =
        ProblemInstance::quadratic(DMatrix::from_diagonal(&dvec(&[0.5, 1.0, 2.0])), 2.0, 1.0)?;
    let l = problem.constants.lipschitz.expect("declared");
    let lambda = problem.constants.strong_convexity.expect("declared");
    let gen = UniformBall { d: 3, radius: 1.0 };
    let mut r = rng::stream(3, 0);
    let pool: Vec<_> = (0..320).map(|_| gen.sample(&mut r)).collect();

    let ns = [20, 40, 80, 160, 320];
    let mut measured = Vec::new();
    for &n in &ns {
        let s = LabeledDataset::new(pool[..n].to_vec(), format!("n{n}"))?;
        let v = stability::measure_pointwise_stability(
            &problem,
            &s,
            &ErmOracle,
            &StabilityProbe::pointwise(1),
        )?;
        let bound = 2.0 * l * l / (lambda * (n - 1) as f64);
        println!("n = {n:>3}  measured {v:.4e}  bound {bound:.4e}");
        measured.push(v);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (slope, _) = stability::loglog_slope(&xs, &measured)?;
    println!("log-log slope {slope:.3}");
    Ok(())
}
