//! Continuous-time double integrator excited by a chirp.

use ddsynth::conic::SolverOptions;
use ddsynth::dataio::build_data_matrices;
use ddsynth::ellipsoid::consistency_set;
use ddsynth::linsynth::{synth_ct, verify_robust, LmiForm};
use ddsynth::numkern::{pd_inverse, spectral_abscissa};
use ddsynth::simkit::{generate_experiment, simulate_closed_loop, Controller, Disturbance, SignalSpec, SystemSpec};

fn main() -> ddsynth::Result<()> {
    let sys = SystemSpec::double_integrator_ct();
    let sig = SignalSpec::continuous_benchmark();
    let exp = generate_experiment(&sys, &sig)?;
    let set = consistency_set(&build_data_matrices(&exp, None)?)?;
    println!("center [A B] =\n{}", set.center().transpose());

    let cert = synth_ct(&set, LmiForm::BlockAbc, &SolverOptions::default())?;
    println!("K = {}", cert.k);
    println!("P^-1 = {}", pd_inverse(&cert.p)?.as_matrix());

    let (a, b) = match &sys {
        SystemSpec::LinearCt { a, b } => (a.clone(), b.clone()),
        _ => unreachable!(),
    };
    let report = verify_robust(&set, &cert, 1000, 7, Some((&a, &b)))?;
    println!(
        "robust check over {} models: worst residual {:.3e}, worst abscissa {:.4}",
        report.models_checked, report.worst_residual, report.worst_stability
    );
    println!("true closed-loop spectral abscissa {:.4}", spectral_abscissa(&cert.closed_loop(&a, &b)));

    let tr = simulate_closed_loop(&sys, &Controller::Linear(cert.k.clone()), &[1.0, -1.0], 200, 0.05, &Disturbance::None, None)?;
    println!("|x| after 10 s from (1, -1): {:.2e}", tr.final_norm());
    Ok(())
}
