//! Discrete-time double integrator: data from a noisy experiment, robust
//! gain from the consistency set, then closed-loop checks.

use ddsynth::conic::SolverOptions;
use ddsynth::dataio::{build_data_matrices, check_rank_default};
use ddsynth::ellipsoid::consistency_set;
use ddsynth::linsynth::{synth_dt, verify_robust, LmiForm};
use ddsynth::numkern::{pd_inverse, spectral_radius};
use ddsynth::simkit::{generate_experiment, simulate_closed_loop, Controller, Disturbance, SignalSpec, SystemSpec};

fn main() -> ddsynth::Result<()> {
    let sys = SystemSpec::double_integrator_dt(0.5);
    let sig = SignalSpec::discrete_benchmark();
    let exp = generate_experiment(&sys, &sig)?;
    let dm = build_data_matrices(&exp, None)?;
    let (full_rank, smin) = check_rank_default(&dm);
    println!("data rank ok: {full_rank} (sigma_min {smin:.4})");

    let set = consistency_set(&dm)?;
    println!("center [A B] =\n{}", set.center().transpose());

    let cert = synth_dt(&set, LmiForm::BlockAbc, &SolverOptions::default())?;
    println!("K = {}", cert.k);
    println!("P^-1 = {}", pd_inverse(&cert.p)?.as_matrix());

    let (a, b) = match &sys {
        SystemSpec::LinearDt { a, b } => (a.clone(), b.clone()),
        _ => unreachable!(),
    };
    let report = verify_robust(&set, &cert, 1000, 7, Some((&a, &b)))?;
    println!(
        "robust check over {} models: worst residual {:.3e}, worst spectral radius {:.4}",
        report.models_checked, report.worst_residual, report.worst_stability
    );
    println!("true closed-loop spectral radius {:.4}", spectral_radius(&cert.closed_loop(&a, &b)));

    let ctrl = Controller::Linear(cert.k.clone());
    let tr = simulate_closed_loop(&sys, &ctrl, &[1.0, -1.0], 200, 0.5, &Disturbance::None, None)?;
    println!("|x| after 200 steps from (1, -1): {:.2e}", tr.final_norm());
    Ok(())
}
