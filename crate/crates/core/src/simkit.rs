//! Ground-truth systems, experiment generation and closed-loop rollouts.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{DataMode, ExperimentData, NoiseBound, Regressors};
use crate::error::{Error, Result};
use crate::numkern::{matrix_to_rows, rows_to_matrix};
use crate::sospoly::poly::{MatrixPolynomial, Polynomial};

/// Norm above which a rollout is reported as diverged.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// RK4 substeps per sample interval.
pub const RK4_SUBSTEPS: usize = 20;

/// The true system used to produce data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfig", into = "SystemConfig")]
pub enum SystemSpec {
    /// `x⁺ = A x + B u + d`.
    LinearDt { a: DMatrix<f64>, b: DMatrix<f64> },
    /// `ẋ = A x + B u + d`.
    LinearCt { a: DMatrix<f64>, b: DMatrix<f64> },
    /// `ẋ = A Z(x) + B W(x) u + d`.
    PolynomialCt { a: DMatrix<f64>, b: DMatrix<f64>, regressors: Regressors },
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SystemConfig {
    LinearDt {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    LinearCt {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    PolynomialCt {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        n: usize,
        z: Vec<String>,
        w: Vec<Vec<String>>,
    },
}

impl TryFrom<SystemConfig> for SystemSpec {
    type Error = Error;

    fn try_from(c: SystemConfig) -> Result<Self> {
        match c {
            SystemConfig::LinearDt { a, b } => SystemSpec::linear_dt(rows_to_matrix(&a)?, rows_to_matrix(&b)?),
            SystemConfig::LinearCt { a, b } => SystemSpec::linear_ct(rows_to_matrix(&a)?, rows_to_matrix(&b)?),
            SystemConfig::PolynomialCt { a, b, n, z, w } => {
                let zc: Vec<Vec<String>> = z.into_iter().map(|s| vec![s]).collect();
                let reg = Regressors::new(MatrixPolynomial::from_strings(&zc, n)?, MatrixPolynomial::from_strings(&w, n)?)?;
                SystemSpec::polynomial_ct(rows_to_matrix(&a)?, rows_to_matrix(&b)?, reg)
            }
        }
    }
}

impl From<SystemSpec> for SystemConfig {
    fn from(s: SystemSpec) -> Self {
        match s {
            SystemSpec::LinearDt { a, b } => SystemConfig::LinearDt { a: matrix_to_rows(&a), b: matrix_to_rows(&b) },
            SystemSpec::LinearCt { a, b } => SystemConfig::LinearCt { a: matrix_to_rows(&a), b: matrix_to_rows(&b) },
            SystemSpec::PolynomialCt { a, b, regressors } => SystemConfig::PolynomialCt {
                a: matrix_to_rows(&a),
                b: matrix_to_rows(&b),
                n: regressors.z.nvars(),
                z: regressors.z.to_strings().into_iter().map(|mut r| r.remove(0)).collect(),
                w: regressors.w.to_strings(),
            },
        }
    }
}

fn check_linear(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || a.nrows() == 0 || b.nrows() != a.nrows() || b.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

impl SystemSpec {
    pub fn linear_dt(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_linear(&a, &b)?;
        Ok(SystemSpec::LinearDt { a, b })
    }

    pub fn linear_ct(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_linear(&a, &b)?;
        Ok(SystemSpec::LinearCt { a, b })
    }

    pub fn polynomial_ct(a: DMatrix<f64>, b: DMatrix<f64>, regressors: Regressors) -> Result<Self> {
        let n = regressors.z.nvars();
        if a.nrows() != n || b.nrows() != n || a.ncols() != regressors.z.rows() || b.ncols() != regressors.w.rows() {
            return Err(Error::Dimension(format!(
                "A is {}x{} and B is {}x{}, regressors need {n}x{} and {n}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                regressors.z.rows(),
                regressors.w.rows()
            )));
        }
        Ok(SystemSpec::PolynomialCt { a, b, regressors })
    }

    /// Double integrator `ẋ = [[0,1],[0,0]]x + [0;1]u`.
    pub fn double_integrator_ct() -> Self {
        SystemSpec::LinearCt {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        }
    }

    /// Forward-Euler discretization of the double integrator with step `tau`.
    pub fn double_integrator_dt(tau: f64) -> Self {
        SystemSpec::LinearDt {
            a: DMatrix::from_row_slice(2, 2, &[1.0, tau, 0.0, 1.0]),
            b: DMatrix::from_column_slice(2, 1, &[0.0, tau]),
        }
    }

    /// `ẋ₁ = x₁² − x₁³ + x₂`, `ẋ₂ = u` with `Z = (x₂, x₁², x₂², x₁³, x₂³)`, `W = 1`.
    pub fn polynomial_benchmark() -> Self {
        let a = DMatrix::from_row_slice(2, 5, &[1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        SystemSpec::PolynomialCt { a, b, regressors: benchmark_regressors() }
    }

    pub fn n(&self) -> usize {
        match self {
            SystemSpec::LinearDt { a, .. } | SystemSpec::LinearCt { a, .. } | SystemSpec::PolynomialCt { a, .. } => a.nrows(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            SystemSpec::LinearDt { b, .. } | SystemSpec::LinearCt { b, .. } => b.ncols(),
            SystemSpec::PolynomialCt { regressors, .. } => regressors.w.cols(),
        }
    }

    pub fn mode(&self) -> DataMode {
        match self {
            SystemSpec::LinearDt { .. } => DataMode::DiscreteTime,
            SystemSpec::LinearCt { .. } => DataMode::ContinuousTime,
            SystemSpec::PolynomialCt { .. } => DataMode::Polynomial,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, SystemSpec::LinearDt { .. })
    }

    pub fn regressors(&self) -> Option<&Regressors> {
        match self {
            SystemSpec::PolynomialCt { regressors, .. } => Some(regressors),
            _ => None,
        }
    }

    /// The true model `Z⋆` (`p×n`, `[A⋆ B⋆] = Z⋆ᵀ`).
    pub fn true_model(&self) -> DMatrix<f64> {
        let (a, b) = match self {
            SystemSpec::LinearDt { a, b } | SystemSpec::LinearCt { a, b } | SystemSpec::PolynomialCt { a, b, .. } => (a, b),
        };
        let mut ab = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        ab.columns_mut(0, a.ncols()).copy_from(a);
        ab.columns_mut(a.ncols(), b.ncols()).copy_from(b);
        ab.transpose()
    }

    /// Linearization at the origin; linear systems are returned unchanged.
    pub fn linearized(&self) -> SystemSpec {
        match self {
            SystemSpec::PolynomialCt { a, b, regressors } => {
                let n = a.nrows();
                let origin = vec![0.0; n];
                let jz = DMatrix::from_fn(regressors.z.rows(), n, |i, j| regressors.z.get(i, 0).derivative(j).eval(&origin));
                let w0 = regressors.w.eval(&origin);
                let a_lin = a * jz;
                SystemSpec::LinearCt { a: a_lin, b: b * w0 }
            }
            other => other.clone(),
        }
    }

    /// Next state (DT) or vector field (CT) without disturbance.
    pub fn field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            SystemSpec::LinearDt { a, b } | SystemSpec::LinearCt { a, b } => a * x + b * u,
            SystemSpec::PolynomialCt { a, b, regressors } => {
                let xs = x.as_slice();
                let z = regressors.z.eval(xs);
                let w = regressors.w.eval(xs);
                a * z.column(0) + b * (w * u)
            }
        }
    }
}

/// `Z = (x₂, x₁², x₂², x₁³, x₂³)` and `W = 1` in two states.
pub fn benchmark_regressors() -> Regressors {
    let z = MatrixPolynomial::column(vec![
        Polynomial::from_terms(2, &[(&[0, 1], 1.0)]),
        Polynomial::from_terms(2, &[(&[2, 0], 1.0)]),
        Polynomial::from_terms(2, &[(&[0, 2], 1.0)]),
        Polynomial::from_terms(2, &[(&[3, 0], 1.0)]),
        Polynomial::from_terms(2, &[(&[0, 3], 1.0)]),
    ])
    .expect("static regressors");
    Regressors::new(z, MatrixPolynomial::identity(2, 1)).expect("static regressors")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InputSignal {
    /// Independent uniform draws per sample and channel, held over the interval.
    UniformRandom { lo: f64, hi: f64, seed: u64 },
    /// Linear chirp `amp·sin(2π(fmin + (fmax−fmin)·t/(2·t_end))·t + phase)`.
    SweepSine {
        fmin: f64,
        fmax: f64,
        amp: f64,
        #[serde(default)]
        phase: f64,
    },
    /// One row of `m` values per sample, held over the interval.
    Custom { table: Vec<Vec<f64>> },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Disturbance {
    None,
    /// `d(t) = (√δ·cos(2πft), √δ·sin(2πft), 0, …)`, so `|d(t)|² = δ` for `n ≥ 2`.
    SinCos { delta: f64, freq: f64 },
}

impl Disturbance {
    pub fn at(&self, t: f64, n: usize) -> DVector<f64> {
        let mut d = DVector::zeros(n);
        if let Disturbance::SinCos { delta, freq } = self {
            let r = delta.sqrt();
            d[0] = r * (2.0 * PI * freq * t).cos();
            if n > 1 {
                d[1] = r * (2.0 * PI * freq * t).sin();
            }
        }
        d
    }

    /// The instantaneous bound `δ` (zero without disturbance).
    pub fn bound(&self) -> f64 {
        match self {
            Disturbance::None => 0.0,
            Disturbance::SinCos { delta, .. } => *delta,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeLog {
    /// `ẋ` taken from the vector field at the sample instant.
    #[default]
    Exact,
    /// Forward difference over one RK4 substep.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub input: InputSignal,
    pub disturbance: Disturbance,
    /// Number of samples `T`.
    pub horizon: usize,
    /// Sampling period (DT) or spacing between logged instants (CT).
    pub spacing: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub derivative: DerivativeLog,
}

impl SignalSpec {
    /// Uniform input in `[−1, 1]`, `δ = 0.1`, `T = 100`, `τs = 0.5`.
    pub fn discrete_benchmark() -> Self {
        SignalSpec {
            input: InputSignal::UniformRandom { lo: -1.0, hi: 1.0, seed: 0 },
            disturbance: Disturbance::SinCos { delta: 0.1, freq: 0.4 },
            horizon: 100,
            spacing: 0.5,
            x0: None,
            derivative: DerivativeLog::Exact,
        }
    }

    /// Chirp 0 → 0.8 Hz with amplitude 2, `δ = 0.1`, 100 samples over 5 s.
    pub fn continuous_benchmark() -> Self {
        SignalSpec {
            input: InputSignal::SweepSine { fmin: 0.0, fmax: 0.8, amp: 2.0, phase: 0.0 },
            disturbance: Disturbance::SinCos { delta: 0.1, freq: 0.4 },
            horizon: 100,
            spacing: 0.05,
            x0: None,
            derivative: DerivativeLog::Exact,
        }
    }

    /// Same chirp, `δ = 0.01`, 1000 samples over 5 s, from `x0 = (0, −1.5)`
    /// so that `x₂` changes sign during the run.
    pub fn polynomial_benchmark() -> Self {
        SignalSpec {
            disturbance: Disturbance::SinCos { delta: 0.01, freq: 0.4 },
            horizon: 1000,
            spacing: 0.005,
            x0: Some(vec![0.0, -1.5]),
            ..Self::continuous_benchmark()
        }
    }

    fn t_end(&self) -> f64 {
        self.horizon as f64 * self.spacing
    }
}

/// Input values over an experiment, with uniform draws fixed up front.
struct InputPlan<'a> {
    sig: &'a SignalSpec,
    m: usize,
    held: Option<DMatrix<f64>>,
}

impl<'a> InputPlan<'a> {
    fn new(sig: &'a SignalSpec, m: usize) -> Result<Self> {
        let held = match &sig.input {
            InputSignal::UniformRandom { lo, hi, seed } => {
                if !(lo < hi) {
                    return Err(Error::Domain(format!("uniform input needs lo < hi, got [{lo}, {hi}]")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut u = DMatrix::zeros(m, sig.horizon);
                for k in 0..sig.horizon {
                    for j in 0..m {
                        u[(j, k)] = rng.random_range(*lo..*hi);
                    }
                }
                Some(u)
            }
            InputSignal::Custom { table } => {
                if table.len() < sig.horizon || table.iter().any(|r| r.len() != m) {
                    return Err(Error::Dimension(format!("custom input needs {} rows of {m} values", sig.horizon)));
                }
                Some(DMatrix::from_fn(m, sig.horizon, |j, k| table[k][j]))
            }
            _ => None,
        };
        Ok(InputPlan { sig, m, held })
    }

    /// Input at time `t` inside sample interval `k`.
    fn at(&self, k: usize, t: f64) -> DVector<f64> {
        if let Some(h) = &self.held {
            return h.column(k.min(h.ncols() - 1)).into_owned();
        }
        match self.sig.input {
            InputSignal::SweepSine { fmin, fmax, amp, phase } => {
                let f = fmin + (fmax - fmin) * t / (2.0 * self.sig.t_end());
                DVector::from_fn(self.m, |j, _| amp * (2.0 * PI * f * t + phase + PI * j as f64 / (self.m as f64 + 1.0)).sin())
            }
            _ => DVector::zeros(self.m),
        }
    }
}

fn rk4_step<F: Fn(f64, &DVector<f64>) -> DVector<f64>>(f: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = f(t, x);
    let k2 = f(t + h / 2.0, &(x + &k1 * (h / 2.0)));
    let k3 = f(t + h / 2.0, &(x + &k2 * (h / 2.0)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates over one interval with `substeps` RK4 steps.
fn integrate<F: Fn(f64, &DVector<f64>) -> DVector<f64>>(
    f: &F,
    t0: f64,
    x: &DVector<f64>,
    span: f64,
    substeps: usize,
) -> DVector<f64> {
    let h = span / substeps as f64;
    let mut cur = x.clone();
    for i in 0..substeps {
        cur = rk4_step(f, t0 + i as f64 * h, &cur, h);
    }
    cur
}

fn initial_state(sig: &SignalSpec, n: usize) -> Result<DVector<f64>> {
    match &sig.x0 {
        None => Ok(DVector::zeros(n)),
        Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::Dimension(format!("x0 has {} entries, system has {n} states", v.len()))),
    }
}

/// Runs one open-loop experiment and logs it in the dataio layout.
///
/// Discrete time steps the map exactly. Continuous time integrates with RK4
/// at `spacing / 20` and logs `ẋ = f(x) + g(x)u + d` at the sample instants.
pub fn generate_experiment(sys: &SystemSpec, sig: &SignalSpec) -> Result<ExperimentData> {
    let (n, m, t_len) = (sys.n(), sys.m(), sig.horizon);
    if t_len == 0 || !(sig.spacing > 0.0) {
        return Err(Error::Domain("experiment needs a positive horizon and spacing".into()));
    }
    let plan = InputPlan::new(sig, m)?;
    let mut x = initial_state(sig, n)?;
    let mut times = Vec::with_capacity(t_len);
    let mut inputs = DMatrix::zeros(m, t_len);
    let mut states = DMatrix::zeros(n, t_len);
    let mut succ = DMatrix::zeros(n, t_len);
    for k in 0..t_len {
        let t = k as f64 * sig.spacing;
        let u = plan.at(k, t);
        times.push(t);
        inputs.set_column(k, &u);
        states.set_column(k, &x);
        if sys.is_continuous() {
            let f = |s: f64, y: &DVector<f64>| sys.field(y, &plan.at(k, s)) + sig.disturbance.at(s, n);
            let dx = match sig.derivative {
                DerivativeLog::Exact => f(t, &x),
                DerivativeLog::FiniteDifference => {
                    let h = sig.spacing / RK4_SUBSTEPS as f64;
                    (rk4_step(&f, t, &x, h) - &x) / h
                }
            };
            succ.set_column(k, &dx);
            x = integrate(&f, t, &x, sig.spacing, RK4_SUBSTEPS);
        } else {
            x = sys.field(&x, &u) + sig.disturbance.at(t, n);
            succ.set_column(k, &x);
        }
    }
    let noise = NoiseBound::Instantaneous { delta: sig.disturbance.bound() };
    ExperimentData::new(sys.mode(), times, inputs, states, succ, noise)
}

/// State feedback applied in closed loop.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    Linear(DMatrix<f64>),
    /// One polynomial per input channel.
    Polynomial(Vec<Polynomial>),
}

impl Controller {
    pub fn m(&self) -> usize {
        match self {
            Controller::Linear(k) => k.nrows(),
            Controller::Polynomial(k) => k.len(),
        }
    }

    pub fn input(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Controller::Linear(k) => k * x,
            Controller::Polynomial(k) => DVector::from_iterator(k.len(), k.iter().map(|p| p.eval(x.as_slice()))),
        }
    }
}

/// Lyapunov function evaluated along a rollout.
#[derive(Clone, Debug, PartialEq)]
pub enum LyapunovFn {
    /// `xᵀ P⁻¹ x` given `P⁻¹`.
    Quadratic(DMatrix<f64>),
    Polynomial(Polynomial),
}

impl LyapunovFn {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            LyapunovFn::Quadratic(pinv) => (x.transpose() * pinv * x)[(0, 0)],
            LyapunovFn::Polynomial(v) => v.eval(x.as_slice()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `n × len`.
    pub states: DMatrix<f64>,
    /// `m × len`.
    pub inputs: DMatrix<f64>,
    pub lyapunov: Option<Vec<f64>>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_norm(&self) -> f64 {
        self.states.column(self.len() - 1).norm()
    }

    /// Whether the attached Lyapunov values decrease strictly until they
    /// reach `floor` (below which rounding dominates).
    pub fn lyapunov_decreasing(&self, floor: f64) -> Option<bool> {
        self.lyapunov.as_ref().map(|v| v.windows(2).all(|w| w[1] < w[0] || w[0] <= floor))
    }

    /// Writes `t,x1..xn,u1..um[,V]`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
        let (n, m) = (self.states.nrows(), self.inputs.nrows());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        if self.lyapunov.is_some() {
            header.push("V".into());
        }
        w.write_record(&header).map_err(|e| Error::Config(e.to_string()))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k]];
            row.extend(self.states.column(k).iter());
            row.extend(self.inputs.column(k).iter());
            if let Some(v) = &self.lyapunov {
                row.push(v[k]);
            }
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(|e| Error::Config(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolls the closed loop forward for `horizon` samples of length `spacing`
/// (DT: one step each; CT: RK4 at `spacing / 20` with continuous feedback).
pub fn simulate_closed_loop(
    sys: &SystemSpec,
    controller: &Controller,
    x0: &[f64],
    horizon: usize,
    spacing: f64,
    disturbance: &Disturbance,
    lyapunov: Option<&LyapunovFn>,
) -> Result<Trajectory> {
    let n = sys.n();
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, system has {n} states", x0.len())));
    }
    if controller.m() != sys.m() {
        return Err(Error::Dimension(format!("controller drives {} inputs, system has {}", controller.m(), sys.m())));
    }
    if let Controller::Linear(k) = controller {
        if k.ncols() != n {
            return Err(Error::Dimension(format!("gain has {} columns, system has {n} states", k.ncols())));
        }
    }
    let mut x = DVector::from_column_slice(x0);
    let mut times = Vec::with_capacity(horizon + 1);
    let mut xs = Vec::with_capacity(horizon + 1);
    let mut us = Vec::with_capacity(horizon + 1);
    let mut diverged = false;
    for k in 0..=horizon {
        let t = k as f64 * spacing;
        times.push(t);
        xs.push(x.clone());
        us.push(controller.input(&x));
        if k == horizon {
            break;
        }
        x = if sys.is_continuous() {
            let f = |s: f64, y: &DVector<f64>| sys.field(y, &controller.input(y)) + disturbance.at(s, n);
            integrate(&f, t, &x, spacing, RK4_SUBSTEPS)
        } else {
            sys.field(&x, &controller.input(&x)) + disturbance.at(t, n)
        };
        if !(x.norm() <= DIVERGENCE_NORM) {
            diverged = true;
            times.push(t + spacing);
            us.push(DVector::from_element(sys.m(), f64::NAN));
            xs.push(x.clone());
            break;
        }
    }
    let states = DMatrix::from_columns(&xs);
    let inputs = DMatrix::from_columns(&us);
    let lyap = lyapunov.map(|v| xs.iter().map(|x| v.eval(x)).collect());
    Ok(Trajectory { times, states, inputs, lyapunov: lyap, diverged })
}
