//! Full-batch GD on neighbouring quartic datasets lands in different basins.

use plstab::counterexample;

fn main() -> plstab::Result<()> {
    let report = counterexample::gd_instability_experiment(11, 0.01, 0.1, 1000, 16, 0)?;
    let land = &report.landscape;
    println!(
        "ŵ = {:.10}, basins at {:.4} and {:.4}",
        land.w_hat, land.w_left, land.w_right
    );
    println!("{:>8} {:>9} {:>9} {:>8}", "init", "w_S", "w_S'", "gap");
    for row in &report.rows {
        println!(
            "{:>8.4} {:>9.4} {:>9.4} {:>8.4}",
            row.init, row.w_s, row.w_s_prime, row.gap
        );
    }
    println!("fraction with gap ≥ 1/2: {}", report.fraction_unstable);
    Ok(())
}
