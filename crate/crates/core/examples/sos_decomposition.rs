//! Gram-matrix certificates: a square, a non-SOS nonnegative polynomial and a
//! 2×2 matrix polynomial.

use ddsynth::conic::SolverOptions;
use ddsynth::sospoly::poly::{MatrixPolynomial, Polynomial};
use ddsynth::sospoly::sos::{sos_decompose, sos_decompose_matrix};

fn main() -> ddsynth::Result<()> {
    let opts = SolverOptions::default();
    let p = Polynomial::parse("x1^4 - 2 * x1^2 x2 + x2^2 + 1", 2)?;
    match sos_decompose(&p, None, &opts)? {
        Some(g) => println!("{p}\n  SOS: residual {:.1e}, min Gram eigenvalue {:.2e}", g.residual(), g.min_eig()),
        None => println!("{p}\n  not SOS"),
    }

    let motzkin = Polynomial::parse("x1^4 x2^2 + x1^2 x2^4 - 3 * x1^2 x2^2 + 1", 2)?;
    println!("Motzkin is SOS: {}", sos_decompose(&motzkin, None, &opts)?.is_some());

    let m = MatrixPolynomial::from_strings(
        &[vec!["x1^2 + 1".into(), "x1".into()], vec!["x1".into(), "x1^2 + 1".into()]],
        1,
    )?;
    let g = sos_decompose_matrix(&m, &opts)?;
    println!("[[x²+1, x], [x, x²+1]] is matrix SOS: {}", g.is_some());
    Ok(())
}
