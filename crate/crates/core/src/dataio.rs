//! Experiment logs, data matrices and the noise energy bound.
//!
//! CSV layout: a header `t,u1..um,x1..xn,s1..sn` followed by one row per
//! sample, where `s` is the successor state (discrete time) or the measured
//! state derivative (continuous time and polynomial mode).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkern::{rows_to_matrix, singular_values, SymMatrix};
use crate::sospoly::poly::MatrixPolynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataMode {
    DiscreteTime,
    ContinuousTime,
    Polynomial,
}

/// Bound on the disturbance sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NoiseBound {
    /// `D0 D0ᵀ ⪯ ΔΔᵀ`.
    Energy {
        #[serde(rename = "Delta")]
        delta: Vec<Vec<f64>>,
    },
    /// `|d(tᵢ)|² ≤ δ` at every sample.
    Instantaneous { delta: f64 },
}

#[derive(Deserialize)]
struct NoiseFile {
    noise: NoiseBound,
}

#[derive(Serialize)]
struct NoiseFileOut<'a> {
    noise: &'a NoiseBound,
}

impl NoiseBound {
    /// Reads `noise = {...}` from a TOML or JSON sidecar (by extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parsed: NoiseFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        Ok(parsed.noise)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let out = NoiseFileOut { noise: self };
        let text = if path.extension().is_some_and(|e| e == "json") {
            serde_json::to_string_pretty(&out)?
        } else {
            toml::to_string(&out).map_err(|e| Error::Config(e.to_string()))?
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Resolves to the energy-bound matrix Δ for `t_len` samples of an `n`-state system.
    pub fn delta_matrix(&self, t_len: usize, n: usize) -> Result<DMatrix<f64>> {
        match self {
            NoiseBound::Instantaneous { delta } => {
                Ok(energy_bound_from_instantaneous(*delta, t_len, n)?.into_matrix())
            }
            NoiseBound::Energy { delta } => {
                let d = rows_to_matrix(delta)?;
                if d.nrows() != n || d.ncols() != n {
                    return Err(Error::Dimension(format!("Delta is {}x{}, expected {n}x{n}", d.nrows(), d.ncols())));
                }
                Ok(d)
            }
        }
    }
}

/// Logged open-loop experiment. Columns of the matrices are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub mode: DataMode,
    pub times: Vec<f64>,
    /// `m × T`.
    pub inputs: DMatrix<f64>,
    /// `n × T`.
    pub states: DMatrix<f64>,
    /// `n × T`: next state or state derivative.
    pub successors: DMatrix<f64>,
    pub noise: NoiseBound,
}

impl ExperimentData {
    pub fn new(
        mode: DataMode,
        times: Vec<f64>,
        inputs: DMatrix<f64>,
        states: DMatrix<f64>,
        successors: DMatrix<f64>,
        noise: NoiseBound,
    ) -> Result<Self> {
        let t = times.len();
        if t == 0 {
            return Err(Error::Dimension("experiment has no samples".into()));
        }
        if inputs.ncols() != t || states.ncols() != t || successors.ncols() != t {
            return Err(Error::Dimension(format!(
                "column counts differ: times {t}, inputs {}, states {}, successors {}",
                inputs.ncols(),
                states.ncols(),
                successors.ncols()
            )));
        }
        if states.nrows() != successors.nrows() || states.nrows() == 0 || inputs.nrows() == 0 {
            return Err(Error::Dimension("state and successor rows must match and be non-empty".into()));
        }
        if let NoiseBound::Instantaneous { delta } = noise {
            if !(delta >= 0.0) {
                return Err(Error::Domain(format!("instantaneous bound must be nonnegative, got {delta}")));
            }
        }
        Ok(ExperimentData { mode, times, inputs, states, successors, noise })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn m(&self) -> usize {
        self.inputs.nrows()
    }

    /// First `t_len` samples.
    pub fn truncate(&self, t_len: usize) -> Result<Self> {
        let t_len = t_len.min(self.len());
        Self::new(
            self.mode,
            self.times[..t_len].to_vec(),
            self.inputs.columns(0, t_len).into_owned(),
            self.states.columns(0, t_len).into_owned(),
            self.successors.columns(0, t_len).into_owned(),
            self.noise.clone(),
        )
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m()).map(|i| format!("u{i}")));
        header.extend((1..=self.n()).map(|i| format!("x{i}")));
        header.extend((1..=self.n()).map(|i| format!("s{i}")));
        w.write_record(&header).map_err(csv_io)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:?}", self.times[k])];
            row.extend(self.inputs.column(k).iter().map(|v| format!("{v:?}")));
            row.extend(self.states.column(k).iter().map(|v| format!("{v:?}")));
            row.extend(self.successors.column(k).iter().map(|v| format!("{v:?}")));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Loads an experiment CSV; the noise bound comes from a sidecar config.
pub fn load_experiment(path: &Path, mode: DataMode, noise: NoiseBound) -> Result<ExperimentData> {
    let text = std::fs::read_to_string(path)?;
    parse_experiment(&text, mode, noise)
}

pub fn parse_experiment(text: &str, mode: DataMode, noise: NoiseBound) -> Result<ExperimentData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, col: 0, msg: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Parse { row: 1, col: 1, msg: "first column must be 't'".into() });
    }
    let count = |prefix: char| header.iter().filter(|h| h.starts_with(prefix) && h[1..].parse::<usize>().is_ok()).count();
    let (m, n, ns) = (count('u'), count('x'), count('s'));
    if n == 0 || m == 0 || ns != n || header.len() != 1 + m + 2 * n {
        return Err(Error::Dimension(format!("header must be t,u1..um,x1..xn,s1..sn; got {}", header.join(","))));
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 2;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Dimension(format!("row {row} has {} cells, expected {}", rec.len(), header.len())));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("non-numeric cell '{cell}' in column '{}'", header[c]),
            })?;
            vals.push(v);
        }
        cols.push(vals);
    }
    let t = cols.len();
    let times = cols.iter().map(|c| c[0]).collect();
    let inputs = DMatrix::from_fn(m, t, |i, k| cols[k][1 + i]);
    let states = DMatrix::from_fn(n, t, |i, k| cols[k][1 + m + i]);
    let successors = DMatrix::from_fn(n, t, |i, k| cols[k][1 + m + n + i]);
    ExperimentData::new(mode, times, inputs, states, successors, noise)
}

/// Regressor pair `(Z, W)` for polynomial mode: `Z(x)` is `N×1`, `W(x)` is `M×m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Regressors {
    pub z: MatrixPolynomial,
    pub w: MatrixPolynomial,
}

impl Regressors {
    pub fn new(z: MatrixPolynomial, w: MatrixPolynomial) -> Result<Self> {
        if z.cols() != 1 {
            return Err(Error::Dimension("Z(x) must be a column".into()));
        }
        if z.nvars() != w.nvars() {
            return Err(Error::Dimension("Z and W use different variable counts".into()));
        }
        Ok(Regressors { z, w })
    }

    /// Stacked regressor column `(Z(x), W(x)u)`.
    pub fn column(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.z.eval(x).iter().copied().collect();
        let wu = self.w.eval(x) * nalgebra::DVector::from_column_slice(u);
        out.extend(wu.iter());
        out
    }

    pub fn width(&self) -> usize {
        self.z.rows() + self.w.rows()
    }
}

/// `X1`, the regressor stack `[X0; U0]` (or `[Z0; V0]`) and Δ.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrices {
    pub x1: DMatrix<f64>,
    pub stack: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub n: usize,
    /// Rows of the state part of the stack (`n` linear, `N` polynomial).
    pub state_rows: usize,
    /// Rows of the input part of the stack (`m` linear, `M` polynomial).
    pub input_rows: usize,
}

impl DataMatrices {
    pub fn from_parts(x1: DMatrix<f64>, stack: DMatrix<f64>, delta: DMatrix<f64>, state_rows: usize) -> Result<Self> {
        if x1.ncols() != stack.ncols() || x1.ncols() == 0 {
            return Err(Error::Dimension(format!("X1 has {} columns, stack has {}", x1.ncols(), stack.ncols())));
        }
        if delta.nrows() != x1.nrows() || delta.ncols() != x1.nrows() {
            return Err(Error::Dimension("Delta must be n×n".into()));
        }
        if state_rows > stack.nrows() {
            return Err(Error::Dimension("state block larger than the stack".into()));
        }
        let n = x1.nrows();
        let input_rows = stack.nrows() - state_rows;
        Ok(DataMatrices { x1, stack, delta, n, state_rows, input_rows })
    }

    pub fn samples(&self) -> usize {
        self.x1.ncols()
    }

    /// Width `p` of the regressor stack.
    pub fn p(&self) -> usize {
        self.stack.nrows()
    }

    pub fn delta_delta_t(&self) -> SymMatrix {
        SymMatrix::new(&self.delta * self.delta.transpose())
    }

    /// Disturbance sequence implied by a model `Z` (`p×n`, `[A B] = Zᵀ`).
    pub fn implied_disturbance(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        &self.x1 - z.transpose() * &self.stack
    }
}

/// Assembles the data matrices; polynomial mode requires regressors.
pub fn build_data_matrices(exp: &ExperimentData, regressors: Option<&Regressors>) -> Result<DataMatrices> {
    let t = exp.len();
    if t == 0 {
        return Err(Error::Dimension("experiment has no samples".into()));
    }
    let delta = exp.noise.delta_matrix(t, exp.n())?;
    match (exp.mode, regressors) {
        (DataMode::Polynomial, None) => Err(Error::Dimension("polynomial mode requires regressors Z and W".into())),
        (_, Some(reg)) => {
            if reg.z.nvars() != exp.n() || reg.w.cols() != exp.m() {
                return Err(Error::Dimension(format!(
                    "regressors expect {} states and {} inputs, data has {} and {}",
                    reg.z.nvars(),
                    reg.w.cols(),
                    exp.n(),
                    exp.m()
                )));
            }
            let width = reg.width();
            let mut stack = DMatrix::zeros(width, t);
            for k in 0..t {
                let x: Vec<f64> = exp.states.column(k).iter().copied().collect();
                let u: Vec<f64> = exp.inputs.column(k).iter().copied().collect();
                for (i, v) in reg.column(&x, &u).into_iter().enumerate() {
                    stack[(i, k)] = v;
                }
            }
            DataMatrices::from_parts(exp.successors.clone(), stack, delta, reg.z.rows())
        }
        (_, None) => {
            let (n, m) = (exp.n(), exp.m());
            let mut stack = DMatrix::zeros(n + m, t);
            stack.rows_mut(0, n).copy_from(&exp.states);
            stack.rows_mut(n, m).copy_from(&exp.inputs);
            DataMatrices::from_parts(exp.successors.clone(), stack, delta, n)
        }
    }
}

/// Full-row-rank test of the regressor stack: `ok ⟺ σ_min > tol`.
pub fn check_rank(dm: &DataMatrices, tol: f64) -> (bool, f64) {
    let sv = singular_values(&dm.stack);
    let smin = if dm.stack.ncols() < dm.stack.nrows() { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
    (smin > tol, smin)
}

/// [`check_rank`] with the default tolerance `1e-8·σ_max`.
pub fn check_rank_default(dm: &DataMatrices) -> (bool, f64) {
    let smax = singular_values(&dm.stack).first().copied().unwrap_or(0.0);
    check_rank(dm, (1e-8 * smax).max(f64::MIN_POSITIVE))
}

/// `Δ = √(Tδ)·I_n`.
pub fn energy_bound_from_instantaneous(delta: f64, t_len: usize, n: usize) -> Result<SymMatrix> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("instantaneous bound must be nonnegative, got {delta}")));
    }
    if t_len == 0 || n == 0 {
        return Err(Error::Domain("need at least one sample and one state".into()));
    }
    Ok(SymMatrix::identity(n).scale((t_len as f64 * delta).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sospoly::poly::Polynomial;

    fn scalar_exp(noise: NoiseBound) -> ExperimentData {
        ExperimentData::new(
            DataMode::DiscreteTime,
            vec![0.0, 1.0],
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[1.5, 0.0]),
            noise,
        )
        .unwrap()
    }

    #[test]
    fn parses_valid_file() {
        let text = "t,u1,x1,x2,s1,s2\n0,1,0,0,0.1,0.2\n1,2,0.1,0.2,0.3,0.4\n2,3,0.3,0.4,0.5,0.6\n";
        let e = parse_experiment(text, DataMode::DiscreteTime, NoiseBound::Instantaneous { delta: 0.1 }).unwrap();
        assert_eq!((e.len(), e.n(), e.m()), (3, 2, 1));
        assert_eq!(e.successors[(1, 2)], 0.6);
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let text = "t,u1,x1,s1\n0,1,0,0\n1,abc,0,0\n";
        match parse_experiment(text, DataMode::DiscreteTime, NoiseBound::Instantaneous { delta: 0.0 }) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_dimension_error() {
        let text = "t,u1,x1,s1\n0,1,0,0\n1,0,0\n";
        assert!(matches!(
            parse_experiment(text, DataMode::DiscreteTime, NoiseBound::Instantaneous { delta: 0.0 }),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let e = scalar_exp(NoiseBound::Instantaneous { delta: 0.1 });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.csv");
        e.save_csv(&path).unwrap();
        let back = load_experiment(&path, DataMode::DiscreteTime, e.noise.clone()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn noise_config_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("noise.toml");
        std::fs::write(&p, "noise = {type = \"instantaneous\", delta = 0.1}\n").unwrap();
        assert_eq!(NoiseBound::load(&p).unwrap(), NoiseBound::Instantaneous { delta: 0.1 });
        std::fs::write(&p, "noise = {type = \"energy\", Delta = [[1.0, 0.0], [0.0, 2.0]]}\n").unwrap();
        let nb = NoiseBound::load(&p).unwrap();
        assert_eq!(nb.delta_matrix(10, 2).unwrap()[(1, 1)], 2.0);
        let j = dir.path().join("noise.json");
        nb.save(&j).unwrap();
        assert_eq!(NoiseBound::load(&j).unwrap(), nb);
    }

    #[test]
    fn linear_stack_assembly() {
        let dm = build_data_matrices(&scalar_exp(NoiseBound::Instantaneous { delta: 0.0 }), None).unwrap();
        assert_eq!(dm.stack, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, -1.0]));
        assert!(check_rank_default(&dm).0);
    }

    #[test]
    fn polynomial_regressor_column() {
        let n = 2;
        let mono = |e: &[u32]| Polynomial::from_terms(n, &[(e, 1.0)]);
        let z = MatrixPolynomial::column(vec![mono(&[0, 1]), mono(&[2, 0]), mono(&[0, 2]), mono(&[3, 0]), mono(&[0, 3])]).unwrap();
        let reg = Regressors::new(z, MatrixPolynomial::identity(n, 1)).unwrap();
        assert_eq!(reg.column(&[1.0, 2.0], &[3.0]), vec![2.0, 1.0, 4.0, 1.0, 8.0, 3.0]);
        let exp = ExperimentData::new(
            DataMode::Polynomial,
            vec![0.0],
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
            DMatrix::zeros(2, 1),
            NoiseBound::Instantaneous { delta: 0.0 },
        )
        .unwrap();
        let dm = build_data_matrices(&exp, Some(&reg)).unwrap();
        assert_eq!(dm.stack.column(0).as_slice(), &[2.0, 1.0, 4.0, 1.0, 8.0, 3.0]);
        assert!(build_data_matrices(&exp, None).is_err());
    }

    #[test]
    fn empty_experiment_rejected() {
        let r = ExperimentData::new(
            DataMode::DiscreteTime,
            vec![],
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 0),
            NoiseBound::Instantaneous { delta: 0.0 },
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn rank_checks() {
        let mk = |stack: DMatrix<f64>| {
            let t = stack.ncols();
            DataMatrices::from_parts(DMatrix::zeros(1, t), stack, DMatrix::zeros(1, 1), 1).unwrap()
        };
        assert!(check_rank(&mk(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, -1.0])), 1e-9).0);
        assert!(!check_rank(&mk(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])), 1e-9).0);
        assert!(!check_rank(&mk(DMatrix::from_row_slice(2, 1, &[1.0, 2.0])), 1e-9).0);
    }

    #[test]
    fn energy_bound_values() {
        let d = energy_bound_from_instantaneous(0.1, 100, 2).unwrap();
        assert!((d[(0, 0)] - 10f64.sqrt()).abs() < 1e-12 && d[(0, 1)] == 0.0);
        assert_eq!(energy_bound_from_instantaneous(0.0, 5, 2).unwrap().as_matrix().norm(), 0.0);
        assert!((energy_bound_from_instantaneous(0.01, 1000, 2).unwrap()[(1, 1)] - 10f64.sqrt()).abs() < 1e-12);
        assert!(matches!(energy_bound_from_instantaneous(-1.0, 5, 2), Err(Error::Domain(_))));
    }
}
