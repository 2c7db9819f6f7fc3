//! SGD on the same quartic is stable: uniform stability decays like `1/n`.

use plstab::counterexample::{self, SgdConfig};

fn main() -> plstab::Result<()> {
    let sweep = counterexample::sgd_sweep(&[11, 21, 41, 81], 0.01, &SgdConfig::standard(0), 500)?;
    for row in &sweep.rows {
        println!(
            "n = {:>3}  stability {:.4}  first draw hits z_n {:.4}  split {:.4}",
            row.n, row.value, row.first_draw_frequency, row.split_fraction
        );
    }
    println!("log-log slope {:.3}", sweep.slope);
    Ok(())
}
