//! Ellipsoidal over-approximation of the models that explain every sample of
//! a linear experiment within an instantaneous bound, versus the energy form.

use ddsynth::conic::SolverOptions;
use ddsynth::dataio::build_data_matrices;
use ddsynth::ellipsoid::{consistency_set, data_points, explains_points, overapproximate, ConsistentModel, Provenance};
use ddsynth::simkit::{generate_experiment, SignalSpec, SystemSpec};

fn main() -> ddsynth::Result<()> {
    let sys = SystemSpec::double_integrator_dt(0.5);
    let full = generate_experiment(&sys, &SignalSpec::discrete_benchmark())?;
    let delta = 0.1;
    for t in [20, 50, 100] {
        let dm = build_data_matrices(&full.truncate(t)?, None)?;
        let over = overapproximate(&data_points(&dm), delta, &SolverOptions::default())?;
        let energy = consistency_set(&dm)?;
        let truth = ConsistentModel { z: sys.true_model(), provenance: Provenance::Explicit };
        println!(
            "T = {t:3}: log size over-approx {:8.3}, energy form {:8.3}; truth inside: {}",
            over.log_size_measure(),
            energy.log_size_measure(),
            over.contains(&truth, 1e-9)?
        );
        if t == 100 {
            println!("truth explains every sample: {}", explains_points(&data_points(&dm), &sys.true_model(), delta, 1e-9));
        }
    }
    Ok(())
}
