//! Noise-free data: the consistency set collapses to the true model (Q = 0)
//! and synthesis stabilizes it in both time domains.

use ddsynth::conic::SolverOptions;
use ddsynth::dataio::build_data_matrices;
use ddsynth::ellipsoid::consistency_set;
use ddsynth::linsynth::{synth_ct, synth_dt, LmiForm};
use ddsynth::numkern::{spectral_abscissa, spectral_radius};
use ddsynth::simkit::{generate_experiment, Disturbance, SignalSpec, SystemSpec};

fn main() -> ddsynth::Result<()> {
    let opts = SolverOptions::default();

    let dt = SystemSpec::double_integrator_dt(0.5);
    let sig = SignalSpec { disturbance: Disturbance::None, ..SignalSpec::discrete_benchmark() };
    let set = consistency_set(&build_data_matrices(&generate_experiment(&dt, &sig)?, None)?)?;
    println!("DT: |Q| = {:.1e}, |Zc − truth| = {:.1e}", set.shape().as_matrix().norm(), (set.center() - dt.true_model()).norm());
    let cert = synth_dt(&set, LmiForm::BlockAbc, &opts)?;
    let SystemSpec::LinearDt { a, b } = &dt else { unreachable!() };
    println!("DT: K = {:.4?}, spectral radius {:.4}", cert.k.as_slice(), spectral_radius(&cert.closed_loop(a, b)));

    let ct = SystemSpec::double_integrator_ct();
    let sig = SignalSpec { disturbance: Disturbance::None, ..SignalSpec::continuous_benchmark() };
    let set = consistency_set(&build_data_matrices(&generate_experiment(&ct, &sig)?, None)?)?;
    let cert = synth_ct(&set, LmiForm::BlockAbc, &opts)?;
    let SystemSpec::LinearCt { a, b } = &ct else { unreachable!() };
    println!("CT: K = {:.4?}, spectral abscissa {:.4}", cert.k.as_slice(), spectral_abscissa(&cert.closed_loop(a, b)));
    Ok(())
}
