//! Closed-form convergence rates and the iteration counts at which the
//! optimization error matches the ERM stability term.

use plstab::optim::Algorithm;
use plstab::rates::{self, RateInputs, Setting};

fn main() -> plstab::Result<()> {
    let (kappa, l, n) = (1.0, 2.0, 100);
    println!(
        "{:<6} {:<4} {:>14} {:>10}",
        "alg", "set", "rate(T=100)", "T*"
    );
    for row in rates::tables(kappa, l, 0.05, 4, 50, 100, n) {
        let rate = row.rate.map_or("-".into(), |r| format!("{r:.4e}"));
        let iters = row.iterations.map_or("-".into(), |t| t.to_string());
        println!(
            "{:<6} {:<4} {rate:>14} {iters:>10}",
            row.algorithm.name(),
            row.setting
        );
    }

    let svrg = RateInputs::new(Algorithm::Svrg, Setting::Pl(kappa), l)
        .gamma(0.05)
        .m(50);
    println!(
        "\nSVRG per-epoch factor: {}",
        rates::contraction_factor(&svrg)?
    );
    Ok(())
}
