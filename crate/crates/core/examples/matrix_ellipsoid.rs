//! A matrix ellipsoid in center/shape form: membership, the parametrization
//! by norm-bounded Υ, sampling and the size measure.

use ddsynth::ellipsoid::{MatrixEllipsoid, SampleMode};
use ddsynth::numkern::SymMatrix;
use nalgebra::DMatrix;

fn main() -> ddsynth::Result<()> {
    let a = SymMatrix::new(DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]));
    let zc = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.0, 1.0, 0.2, -0.3]);
    let q = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]));
    let e = MatrixEllipsoid::from_center_shape(a, zc, q)?;
    println!("p = {}, n = {}, size measure {:.4e}", e.p(), e.n(), e.size_measure());
    println!("Zc = -𝐀⁻¹𝐁 =\n{:.4}", e.center());

    let upsilon = DMatrix::from_row_slice(3, 2, &[0.6, 0.0, 0.0, 0.6, 0.3, 0.3]);
    let z = e.point_from_upsilon(&upsilon)?;
    println!("member from Υ with ‖Υ‖ < 1, margin {:.4}", e.membership_margin(&z)?);
    println!("recovered Υ =\n{:.4}", e.upsilon_of(&z)?);

    for mode in [SampleMode::Boundary, SampleMode::Interior] {
        let worst = e
            .sample(500, mode, 1)?
            .iter()
            .map(|m| e.membership_margin(&m.z))
            .collect::<ddsynth::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        println!("{mode:?} samples: smallest margin {worst:.2e}");
    }
    Ok(())
}
