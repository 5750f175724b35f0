//! Command-line front end.
//!
//! Every subcommand reads its options from flags and, optionally, from a TOML
//! file given with `--config` (flags win). The resolved options are echoed as
//! TOML in a summary JSON printed on stdout and, with `--summary`, written to a
//! file. Exit codes: 0 success, 1 error, 2 infeasible or not verified, 64 usage.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conic::SolverOptions;
use crate::dataio::{build_data_matrices, check_rank_default, load_experiment, DataMatrices, DataMode, NoiseBound, Regressors};
use crate::ellipsoid::{consistency_set, data_points, overapproximate, MatrixEllipsoid};
use crate::error::{Error, Result};
use crate::linsynth::{stability_measure, synth_ct, synth_dt, verify_robust, LinearCertificate, LmiForm, TimeDomain};
use crate::numkern::{matrix_to_rows, pd_inverse};
use crate::simkit::{
    benchmark_regressors, generate_experiment, simulate_closed_loop, Controller, Disturbance, LyapunovFn, SignalSpec, SystemSpec,
};
use crate::sospoly::poly::{MatrixPolynomial, Polynomial};
use crate::sospoly::synth::{
    alternate_synthesis, linear_initialization, squared_norm, verify_poly, AlternationConfig, DegreeConfig, GridSpec, LocalRegion,
    PolyCertificate,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

const SUMMARY_SCHEMA: &str = "ddsynth-summary/1";

#[derive(Parser, Debug)]
#[command(name = "ddsynth", version, about = "Controller synthesis from noisy open-loop data")]
struct Cli {
    /// Also write the summary JSON to this file.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an open-loop experiment and write it as CSV plus a noise sidecar.
    Generate(GenerateArgs),
    /// Build the consistency set of logged data under its energy bound.
    Ingest(SetArgs),
    /// Minimum-volume ellipsoid around the models that explain every sample.
    Overapprox(SetArgs),
    /// Robust state feedback for a discrete-time linear system.
    SynthLinDt(LinArgs),
    /// Robust state feedback for a continuous-time linear system.
    SynthLinCt(LinArgs),
    /// Polynomial state feedback by alternating SOS programs.
    SynthPoly(PolyArgs),
    /// Check a certificate against samples of the consistency set.
    Verify(VerifyArgs),
    /// Closed-loop rollout written as CSV.
    Simulate(SimArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct DataSource {
    /// Experiment CSV (`t,u..,x..,s..`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    /// TOML or JSON file with a `noise` table.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_config: Option<PathBuf>,
    /// Inline instantaneous bound `|d|² ≤ δ`, used when no noise file is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// Regressor file (`n`, `z`, `w`) or `benchmark`; switches to polynomial mode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    regressors: Option<String>,
    /// Previously written ellipsoid JSON, used instead of the data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct GenerateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// `discrete`, `continuous` or `polynomial`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Noise sidecar path; defaults to the output with extension `noise.toml`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    /// Seed of a uniform-random input.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Simulate the Jacobian linearization at the origin instead.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    linearize: Option<bool>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<SystemSpec>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    signal: Option<SignalSpec>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct SetArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    source: DataSource,
    /// `dt` or `ct` for linear data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct LinArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    source: DataSource,
    /// `block` (𝐀, 𝐁, 𝐂 blocks) or `center-shape`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<String>,
    /// True system (file or preset) for reporting the true closed loop.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct PolyArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    source: DataSource,
    /// `overapprox` (default for instantaneous bounds) or `energy`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    set_method: Option<String>,
    /// Initial Lyapunov candidate as a polynomial string.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init_v: Option<String>,
    /// Linear continuous-time experiment used to compute the initial V.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init_data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init_noise: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    /// Keep iterating up to the cap after the first certificate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    run_all: Option<bool>,
    /// Local conditions on `|x|² ≤ c`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    local_c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_lambda: Option<f64>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    degrees: Option<DegreeConfig>,
    /// Set JSON written alongside the certificate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    set_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    source: DataSource,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cert: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct SimArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// System file or preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cert: Option<PathBuf>,
    /// Comma-separated initial state.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    disturbance: Option<Disturbance>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

/// Outcome of a command before it is wrapped in the summary.
enum Outcome {
    Done(Value),
    Negative(Value),
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(format!("usage: {}", msg.into()))
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::Config(m) if m.starts_with("usage: "))
}

/// Overlays flags on the `--config` file and returns the merged options.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut merged = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let v: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::to_value(v)?
        }
        None => json!({}),
    };
    if let (Value::Object(base), Value::Object(over)) = (&mut merged, serde_json::to_value(flags)?) {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| usage(format!("invalid options: {e}")))
}

fn echo<T: Serialize>(opts: &T) -> String {
    toml::to_string(opts).unwrap_or_default()
}

fn require<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| usage(format!("missing --{name}")))
}

fn preset(name: &str) -> Option<(SystemSpec, SignalSpec)> {
    match name {
        "discrete" => Some((SystemSpec::double_integrator_dt(0.5), SignalSpec::discrete_benchmark())),
        "continuous" => Some((SystemSpec::double_integrator_ct(), SignalSpec::continuous_benchmark())),
        "polynomial" => Some((SystemSpec::polynomial_benchmark(), SignalSpec::polynomial_benchmark())),
        _ => None,
    }
}

/// System from a preset name or a TOML/JSON file.
fn load_system(spec: &str) -> Result<SystemSpec> {
    if let Some((s, _)) = preset(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(usage(format!("'{spec}' is neither a preset nor a file")));
    }
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Deserialize)]
struct RegressorFile {
    n: usize,
    z: Vec<String>,
    w: Vec<Vec<String>>,
}

fn load_regressors(spec: &str) -> Result<Regressors> {
    if spec == "benchmark" {
        return Ok(benchmark_regressors());
    }
    let text = std::fs::read_to_string(spec)?;
    let f: RegressorFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let z: Vec<Vec<String>> = f.z.into_iter().map(|s| vec![s]).collect();
    Regressors::new(MatrixPolynomial::from_strings(&z, f.n)?, MatrixPolynomial::from_strings(&f.w, f.n)?)
}

fn parse_mode(mode: Option<&str>, fallback: DataMode) -> Result<DataMode> {
    match mode {
        None => Ok(fallback),
        Some("dt") => Ok(DataMode::DiscreteTime),
        Some("ct") => Ok(DataMode::ContinuousTime),
        Some("poly") => Ok(DataMode::Polynomial),
        Some(m) => Err(usage(format!("unknown mode '{m}' (dt, ct, poly)"))),
    }
}

fn load_noise(src: &DataSource) -> Result<NoiseBound> {
    match (&src.noise_config, src.delta) {
        (Some(p), _) => NoiseBound::load(p),
        (None, Some(delta)) => Ok(NoiseBound::Instantaneous { delta }),
        (None, None) => Err(usage("missing --noise-config or --delta")),
    }
}

struct Loaded {
    dm: DataMatrices,
    noise: NoiseBound,
}

fn load_data(src: &DataSource, mode: DataMode) -> Result<Loaded> {
    let path = require(&src.data, "data")?;
    let noise = load_noise(src)?;
    let regressors = src.regressors.as_deref().map(load_regressors).transpose()?;
    let mode = if regressors.is_some() { DataMode::Polynomial } else { mode };
    let exp = load_experiment(&path, mode, noise.clone())?;
    let dm = build_data_matrices(&exp, regressors.as_ref())?;
    Ok(Loaded { dm, noise })
}

fn read_set(path: &Path) -> Result<MatrixEllipsoid> {
    MatrixEllipsoid::from_json(&std::fs::read_to_string(path)?)
}

fn set_summary(e: &MatrixEllipsoid) -> Value {
    json!({
        "n": e.n(),
        "p": e.p(),
        "log_size": e.log_size_measure(),
        "center": matrix_to_rows(e.center()),
        "shape": matrix_to_rows(e.shape().as_matrix()),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let (mut sys, mut sig) = match a.preset.as_deref() {
        Some(p) => preset(p).ok_or_else(|| usage(format!("unknown preset '{p}'")))?,
        None => (require(&a.system, "preset or [system]")?, require(&a.signal, "preset or [signal]")?),
    };
    if let Some(s) = a.system.clone().filter(|_| a.preset.is_some()) {
        sys = s;
    }
    if let Some(s) = a.signal.clone().filter(|_| a.preset.is_some()) {
        sig = s;
    }
    if a.linearize == Some(true) {
        sys = sys.linearized();
    }
    if let Some(h) = a.horizon {
        sig.horizon = h;
    }
    if let (Some(seed), crate::simkit::InputSignal::UniformRandom { seed: s, .. }) = (a.seed, &mut sig.input) {
        *s = seed;
    }
    let out = require(&a.out, "out")?;
    let exp = generate_experiment(&sys, &sig)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    exp.save_csv(&out)?;
    let noise_out = a.noise_out.clone().unwrap_or_else(|| out.with_extension("noise.toml"));
    exp.noise.save(&noise_out)?;
    let rank = build_data_matrices(&exp, sys.regressors()).map(|dm| check_rank_default(&dm));
    let result = json!({
        "data": out,
        "noise": noise_out,
        "samples": exp.len(),
        "n": exp.n(),
        "m": exp.m(),
        "rank_ok": rank.as_ref().map(|r| r.0).unwrap_or(false),
        "sigma_min": rank.as_ref().map(|r| r.1).unwrap_or(0.0),
    });
    Ok((echo(&a), Outcome::Done(result)))
}

fn cmd_set(a: &SetArgs, over: bool) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let mode = parse_mode(a.mode.as_deref(), DataMode::DiscreteTime)?;
    let data = load_data(&a.source, mode)?;
    let (rank_ok, sigma_min) = check_rank_default(&data.dm);
    let set = if over {
        let NoiseBound::Instantaneous { delta } = data.noise else {
            return Err(usage("overapprox needs an instantaneous noise bound"));
        };
        overapproximate(&data_points(&data.dm), delta, &SolverOptions::default())?
    } else {
        consistency_set(&data.dm)?
    };
    if let Some(out) = &a.out {
        write(out, &set.to_json()?)?;
    }
    let mut result = set_summary(&set);
    result["rank_ok"] = json!(rank_ok);
    result["sigma_min"] = json!(sigma_min);
    Ok((echo(&a), Outcome::Done(result)))
}

fn obtain_set(src: &DataSource, mode: DataMode) -> Result<MatrixEllipsoid> {
    match &src.set {
        Some(p) => read_set(p),
        None => consistency_set(&load_data(src, mode)?.dm),
    }
}

fn lin_result(cert: &LinearCertificate, truth: Option<&SystemSpec>) -> Value {
    let mut r = json!({
        "K": matrix_to_rows(&cert.k),
        "P": matrix_to_rows(cert.p.as_matrix()),
        "lmi_residual": cert.lmi_residual,
        "solver": { "iterations": cert.solver_iterations, "margin": cert.margin },
    });
    if let Some(SystemSpec::LinearDt { a, b } | SystemSpec::LinearCt { a, b }) = truth {
        r["true_stability"] = json!(stability_measure(cert.mode, &cert.closed_loop(a, b)));
    }
    r
}

fn cmd_synth_lin(a: &LinArgs, mode: TimeDomain) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let data_mode = match mode {
        TimeDomain::DiscreteTime => DataMode::DiscreteTime,
        TimeDomain::ContinuousTime => DataMode::ContinuousTime,
    };
    let form = match a.form.as_deref() {
        None | Some("block") => LmiForm::BlockAbc,
        Some("center-shape") => LmiForm::CenterShape,
        Some(f) => return Err(usage(format!("unknown form '{f}' (block, center-shape)"))),
    };
    let set = obtain_set(&a.source, data_mode)?;
    let truth = a.system.as_deref().map(load_system).transpose()?;
    let opts = SolverOptions::default();
    let res = match mode {
        TimeDomain::DiscreteTime => synth_dt(&set, form, &opts),
        TimeDomain::ContinuousTime => synth_ct(&set, form, &opts),
    };
    match res {
        Ok(cert) => {
            if let Some(out) = &a.out {
                write(out, &cert.to_json()?)?;
            }
            Ok((echo(&a), Outcome::Done(lin_result(&cert, truth.as_ref()))))
        }
        Err(Error::SolverInfeasible { margin }) => Ok((echo(&a), Outcome::Negative(json!({ "infeasible": true, "margin": margin })))),
        Err(e) => Err(e),
    }
}

fn cmd_synth_poly(a: &PolyArgs) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let regs = load_regressors(a.source.regressors.as_deref().ok_or_else(|| usage("missing --regressors"))?)?;
    let opts = SolverOptions::default();
    let set = match &a.source.set {
        Some(p) => read_set(p)?,
        None => {
            let data = load_data(&a.source, DataMode::Polynomial)?;
            match (a.set_method.as_deref(), &data.noise) {
                (None | Some("overapprox"), NoiseBound::Instantaneous { delta }) => {
                    overapproximate(&data_points(&data.dm), *delta, &opts)?
                }
                (Some("overapprox"), _) => return Err(usage("overapprox needs an instantaneous noise bound")),
                (None | Some("energy"), _) => consistency_set(&data.dm)?,
                (Some(m), _) => return Err(usage(format!("unknown set method '{m}' (overapprox, energy)"))),
            }
        }
    };
    if let Some(p) = &a.set_out {
        write(p, &set.to_json()?)?;
    }
    let n = set.n();
    let v0 = match (&a.init_v, &a.init_data) {
        (Some(text), _) => Polynomial::parse(text, n)?,
        (None, Some(path)) => {
            let noise = match &a.init_noise {
                Some(p) => NoiseBound::load(p)?,
                None => load_noise(&a.source)?,
            };
            let exp = load_experiment(path, DataMode::ContinuousTime, noise)?;
            linear_initialization(&consistency_set(&build_data_matrices(&exp, None)?)?, &opts)?
        }
        (None, None) => return Err(usage("missing --init-v or --init-data")),
    };
    let mut cfg = AlternationConfig::new(v0.clone());
    if let Some(d) = a.degrees {
        cfg.degrees = d;
    }
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    cfg.run_all = a.run_all.unwrap_or(false);
    if let Some(s) = a.l1_scale {
        cfg.design.l1 = squared_norm(n, s);
    }
    if let Some(e) = a.eps_lambda {
        cfg.design.eps_lambda = e;
    }
    cfg.region = a.local_c.map(|c| LocalRegion { l0: squared_norm(n, 1.0), c });
    let out = alternate_synthesis(&set, &regs, &cfg)?;
    let history = serde_json::to_value(&out.history)?;
    let Some(cert) = out.certificate else {
        return Ok((echo(&a), Outcome::Negative(json!({ "found": false, "initial_v": v0.to_string(), "history": history }))));
    };
    if let Some(p) = &a.out {
        write(p, &cert.to_json()?)?;
    }
    let (residual, min_eig) = cert.gram_quality();
    let result = json!({
        "found": true,
        "initial_v": v0.to_string(),
        "initial_scale": out.initial_scale,
        "V": cert.v.to_string(),
        "k": cert.k.iter().map(Polynomial::to_string).collect::<Vec<_>>(),
        "lambda": cert.lambda.to_string(),
        "l2": cert.l2.to_string(),
        "degrees": cert.degrees,
        "gram_residual": residual,
        "gram_min_eig": min_eig,
        "history": history,
        "set": set_summary(&set),
    });
    Ok((echo(&a), Outcome::Done(result)))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let text = std::fs::read_to_string(require(&a.cert, "cert")?)?;
    let raw: Value = serde_json::from_str(&text)?;
    let seed = a.seed.unwrap_or(0);
    if raw.get("V").is_some() {
        let cert = PolyCertificate::from_json(&text)?;
        let regs = load_regressors(a.source.regressors.as_deref().ok_or_else(|| usage("missing --regressors"))?)?;
        let set = obtain_set(&a.source, DataMode::Polynomial)?;
        let report = verify_poly(&set, &regs, &cert, &a.grid.unwrap_or_default(), a.samples.unwrap_or(200), seed)?;
        let (residual, min_eig) = cert.gram_quality();
        let mut result = serde_json::to_value(&report)?;
        result["gram_residual"] = json!(residual);
        result["gram_min_eig"] = json!(min_eig);
        let outcome = if report.ok() { Outcome::Done(result) } else { Outcome::Negative(result) };
        return Ok((echo(&a), outcome));
    }
    let cert = LinearCertificate::from_json(&text)?;
    let mode = match cert.mode {
        TimeDomain::DiscreteTime => DataMode::DiscreteTime,
        TimeDomain::ContinuousTime => DataMode::ContinuousTime,
    };
    let set = obtain_set(&a.source, mode)?;
    let truth = a.system.as_deref().map(load_system).transpose()?;
    let ab = match &truth {
        Some(SystemSpec::LinearDt { a, b } | SystemSpec::LinearCt { a, b }) => Some((a, b)),
        _ => None,
    };
    let report = verify_robust(&set, &cert, a.samples.unwrap_or(1000), seed, ab)?;
    let result = serde_json::to_value(&report)?;
    let outcome = if report.all_negative() { Outcome::Done(result) } else { Outcome::Negative(result) };
    Ok((echo(&a), outcome))
}

fn cmd_simulate(a: &SimArgs) -> Result<(String, Outcome)> {
    let a = resolve(a, a.config.as_deref())?;
    let sys = load_system(&require(&a.system, "system")?)?;
    let text = std::fs::read_to_string(require(&a.cert, "cert")?)?;
    let raw: Value = serde_json::from_str(&text)?;
    let (ctrl, lyap) = if raw.get("V").is_some() {
        let c = PolyCertificate::from_json(&text)?;
        (Controller::Polynomial(c.k.clone()), LyapunovFn::Polynomial(c.v))
    } else {
        let c = LinearCertificate::from_json(&text)?;
        (Controller::Linear(c.k.clone()), LyapunovFn::Quadratic(pd_inverse(&c.p)?.into_matrix()))
    };
    let x0: Vec<f64> = require(&a.x0, "x0")?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("bad --x0 entry '{s}'"))))
        .collect::<Result<_>>()?;
    let spacing = a.spacing.unwrap_or(if sys.is_continuous() { 0.01 } else { 1.0 });
    let horizon = a.horizon.unwrap_or(200);
    let dist = a.disturbance.clone().unwrap_or(Disturbance::None);
    let tr = simulate_closed_loop(&sys, &ctrl, &x0, horizon, spacing, &dist, Some(&lyap))?;
    if let Some(out) = &a.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        tr.save_csv(out)?;
    }
    let result = json!({
        "samples": tr.len(),
        "final_norm": tr.final_norm(),
        "diverged": tr.diverged,
        "lyapunov_decreasing": tr.lyapunov_decreasing(1e-12),
        "final_state": tr.states.column(tr.len() - 1).iter().copied().collect::<Vec<_>>(),
    });
    let outcome = if tr.diverged { Outcome::Negative(result) } else { Outcome::Done(result) };
    Ok((echo(&a), outcome))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Ingest(_) => "ingest",
        Command::Overapprox(_) => "overapprox",
        Command::SynthLinDt(_) => "synth-lin-dt",
        Command::SynthLinCt(_) => "synth-lin-ct",
        Command::SynthPoly(_) => "synth-poly",
        Command::Verify(_) => "verify",
        Command::Simulate(_) => "simulate",
    }
}

fn dispatch(c: &Command) -> Result<(String, Outcome)> {
    match c {
        Command::Generate(a) => cmd_generate(a),
        Command::Ingest(a) => cmd_set(a, false),
        Command::Overapprox(a) => cmd_set(a, true),
        Command::SynthLinDt(a) => cmd_synth_lin(a, TimeDomain::DiscreteTime),
        Command::SynthLinCt(a) => cmd_synth_lin(a, TimeDomain::ContinuousTime),
        Command::SynthPoly(a) => cmd_synth_poly(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Runs one invocation (`argv[0]` is the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let name = command_name(&cli.command);
    let t = Instant::now();
    let (status, code, config, result, error) = match dispatch(&cli.command) {
        Ok((cfg, Outcome::Done(r))) => ("ok", EXIT_OK, cfg, r, None),
        Ok((cfg, Outcome::Negative(r))) => ("negative", EXIT_NEGATIVE, cfg, r, None),
        Err(e) if is_usage(&e) => {
            eprintln!("ddsynth {name}: {e}");
            return EXIT_USAGE;
        }
        Err(e @ Error::SolverInfeasible { .. }) => ("negative", EXIT_NEGATIVE, String::new(), Value::Null, Some(e.to_string())),
        Err(e) => ("error", EXIT_ERROR, String::new(), Value::Null, Some(e.to_string())),
    };
    if let Some(msg) = &error {
        eprintln!("ddsynth {name}: {msg}");
    }
    info!("{name} finished with status {status} in {:.2} s", t.elapsed().as_secs_f64());
    let summary = json!({
        "schema": SUMMARY_SCHEMA,
        "command": name,
        "status": status,
        "exit_code": code,
        "config": config,
        "result": result,
        "error": error,
        "seconds": t.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&summary).unwrap_or_default();
    println!("{text}");
    if let Some(p) = &cli.summary {
        if let Err(e) = write(p, &text) {
            eprintln!("ddsynth: cannot write summary: {e}");
            return EXIT_ERROR;
        }
    }
    code
}
