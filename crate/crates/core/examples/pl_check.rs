//! Sampled PL and QG constants of a leaky-ReLU composite against the declared value.

use nalgebra::DMatrix;
use plstab::geometry::{self, Region, RegionSampler};
use plstab::linalg::dvec;
use plstab::problems::{leaky_relu_composite, EmpiricalRisk, FStarSource};

fn main() -> plstab::Result<()> {
    let x = DMatrix::identity(2, 2);
    let (problem, data) = leaky_relu_composite(1.0, &x, &dvec(&[0.4, -0.3]), 1.0, 0.5)?;
    let f = EmpiricalRisk::new(&problem, &data)?;
    let sampler = RegionSampler::new(Region::default_ball(2), 10_000, 1);

    let pl = geometry::estimate_pl(&f, &sampler, 0.0, FStarSource::Analytic)?;
    let qg = geometry::estimate_qg(&f, &sampler, 0.0, FStarSource::Analytic)?;
    println!("declared μ = {:?}", problem.constants.pl);
    println!(
        "sampled PL = {:.6} ({} points, {} excluded)",
        pl.value, pl.used, pl.excluded
    );
    println!("sampled QG = {:.6}", qg.value);
    println!("PL witness: {:?}", pl.witness);
    Ok(())
}
