use plstab::geometry::{self, Region, RegionSampler};
use plstab::problems::{EmpiricalRisk, LabeledDataset, ProblemInstance};
use plstab::ExampleZ;

fn main() -> plstab::Result<()> {
    let data = LabeledDataset::new(
        vec![
            ExampleZ::new(vec![-1.0], 1.0),
            ExampleZ::new(vec![-0.5], 1.0),
            ExampleZ::new(vec![0.8], 0.0),
        ],
        "toy",
    )?;
    for problem in [ProblemInstance::quartic(1), ProblemInstance::linear(1)] {
        let f = EmpiricalRisk::new(&problem, &data)?;
        let report =
            geometry::grad_check(&f, &RegionSampler::new(Region::cube(1, -2.0, 2.0), 200, 3))?;
        println!(
            "{:<10} max rel error {:.2e} over {} points: {}",
            problem.kind.name(),
            report.max_rel_error,
            report.checked,
            if report.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
