//! Petersen's lemma on a small instance: the multiplier search against a
//! brute-force sweep over admissible uncertainties, and the scalar instance
//! where only the nonstrict version holds.

use ddsynth::numkern::SymMatrix;
use ddsynth::petersen::{find_multiplier, sampled_universal_check, PetersenInstance};
use nalgebra::DMatrix;

fn main() -> ddsynth::Result<()> {
    let c = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[-3.0, 0.5, 0.5, -2.0]));
    let e = DMatrix::from_row_slice(2, 1, &[1.0, 0.4]);
    let g = DMatrix::from_row_slice(1, 2, &[0.8, -1.0]);
    let inst = PetersenInstance::new(c, e, g, SymMatrix::new(DMatrix::from_element(1, 1, 1.5)))?;
    match find_multiplier(&inst, true) {
        Some(m) => println!("strict multiplier λ = {:.4}, residual eigenvalue {:.4}", m.lambda, m.residual_eig),
        None => println!("no strict multiplier"),
    }
    let check = sampled_universal_check(&inst, 10_000, true, 0);
    println!("sampled check over 10⁴ admissible F: holds = {}, worst eigenvalue {:.4}", check.holds, check.worst_value);

    // C = −1, E = G = 1, F̄ = 1/4: the worst F = 1/2 makes the inequality tight.
    let edge = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.25)?;
    println!(
        "boundary instance: strict {:?}, nonstrict {:?}",
        find_multiplier(&edge, true).map(|m| m.lambda),
        find_multiplier(&edge, false).map(|m| m.lambda)
    );
    Ok(())
}
