//! Polynomial benchmark `ẋ₁ = x₁² − x₁³ + x₂`, `ẋ₂ = u`: over-approximated
//! consistency set, alternating SOS synthesis, grid verification, rollouts.

use std::time::Instant;

use ddsynth::conic::SolverOptions;
use ddsynth::dataio::build_data_matrices;
use ddsynth::ellipsoid::{consistency_set, data_points, ls_center, overapproximate};
use ddsynth::simkit::{
    benchmark_regressors, generate_experiment, simulate_closed_loop, Controller, Disturbance, LyapunovFn, SignalSpec, SystemSpec,
};
use ddsynth::sospoly::synth::{alternate_synthesis, linear_initialization, verify_poly, AlternationConfig, GridSpec};

fn main() -> ddsynth::Result<()> {
    env_logger::init();
    let sys = SystemSpec::polynomial_benchmark();
    let regs = benchmark_regressors();
    let sig = SignalSpec::polynomial_benchmark();
    let opts = SolverOptions::default();

    let exp = generate_experiment(&sys, &sig)?;
    let dm = build_data_matrices(&exp, Some(&regs))?;
    println!("least-squares center [A B]ᵀ =\n{:.4}", ls_center(&dm).transpose());

    let t = Instant::now();
    let set = overapproximate(&data_points(&dm), sig.disturbance.bound(), &opts)?;
    println!("over-approximation ({:.0} s), center =\n{:.4}", t.elapsed().as_secs_f64(), set.center().transpose());

    // Same experiment on the linearization supplies the starting V.
    let lin = sys.linearized();
    let lin_set = consistency_set(&build_data_matrices(&generate_experiment(&lin, &sig)?, None)?)?;
    let v0 = linear_initialization(&lin_set, &opts)?;
    println!("V0 = {v0}");

    let out = alternate_synthesis(&set, &regs, &AlternationConfig::new(v0))?;
    for step in &out.history {
        println!("  iteration {} {:>8}: {}", step.iteration, step.step, if step.feasible { "feasible" } else { "infeasible" });
    }
    let Some(cert) = out.certificate else {
        println!("no certificate");
        return Ok(());
    };
    println!("V = {}\nk = {}\nλ = {}", cert.v, cert.k[0], cert.lambda);

    let report = verify_poly(&set, &regs, &cert, &GridSpec::default(), 200, 0)?;
    println!(
        "grid check over {} points and {} models: worst decrease {:.3e}, violations {}",
        report.points, report.models, report.worst_decrease, report.violations
    );

    let ctrl = Controller::Polynomial(cert.k.clone());
    let v = LyapunovFn::Polynomial(cert.v.clone());
    for x0 in [[1.0, 1.0], [-1.0, 0.5], [0.5, -1.0]] {
        let tr = simulate_closed_loop(&sys, &ctrl, &x0, 60_000, 1e-4, &Disturbance::None, Some(&v))?;
        println!("x0 = {x0:?}: |x(6 s)| = {:.2e}, V decreasing: {:?}", tr.final_norm(), tr.lyapunov_decreasing(1e-12));
    }
    Ok(())
}
