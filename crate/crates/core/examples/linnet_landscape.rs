//! Deep linear networks: the landscape lemmas on random stacks, then GD from a
//! well-conditioned start ending at a global minimum.

use plstab::linnet::{self, CriticalPoint, DataMatrices, LayerStack, LinnetObjective};
use plstab::optim;
use plstab::rng;

fn main() -> plstab::Result<()> {
    let mut r = rng::stream(5, 0);
    let dm = DataMatrices::random(3, 8, &mut r)?;
    let stack = LayerStack::random(2, 3, 0.5, &mut r);

    let proj = linnet::check_projection_lemma(&stack, &dm)?;
    let grad = linnet::check_grad_lower_bound(&stack, &dm)?;
    println!("projection lemma slack  {:.4}", proj.slack);
    println!("gradient bound slack    {:.4}", grad.slack);
    println!(
        "pythagorean residual    {:.2e}",
        linnet::pythagorean_residual(&stack, &dm)?
    );
    println!(
        "PL constant (τ = {:.3})  {:.4}",
        stack.tau(),
        linnet::pl_constant(2, stack.tau(), &dm)?
    );

    let f = LinnetObjective::new(dm.clone(), 2)?;
    let (w, steps) = optim::descend_to_tolerance(&f, &stack.flatten(), 0.01, 1e-9, 1_000_000)?;
    let end = LayerStack::from_flat(&w, 2, 3)?;
    match linnet::classify_critical_point(&end, &dm, 1e-8, 1e-6)? {
        CriticalPoint::GlobalMin { gap } => {
            println!("GD: global minimum after {steps} steps (gap {gap:.1e})")
        }
        other => println!("GD: {other:?} after {steps} steps"),
    }
    Ok(())
}
