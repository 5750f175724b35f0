//! Matrix ellipsoids of data-consistent dynamics.
//!
//! A set `{Z : Zᵀ𝐀Z + Zᵀ𝐁 + 𝐁ᵀZ + 𝐂 ⪯ 0}` with `[A B] = Zᵀ`, equivalently
//! `{Z : (Z − Zc)ᵀ𝐀(Z − Zc) ⪯ Q}` or `{Zc + 𝐀^{-1/2} Υ Q^{1/2} : ‖Υ‖ ≤ 1}`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conic::{self, LmiBlock, Objective, SdpProblem, SolveStatus, SolverOptions};
use crate::dataio::{check_rank_default, DataMatrices};
use crate::error::{Error, Result};
use crate::numkern::{
    matrix_to_rows, max_eig, min_eig, pd_inv_sqrt, pinv, psd_sqrt, rows_to_matrix, singular_values, spectral_norm, sym_eig,
    SymMatrix,
};

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixEllipsoid {
    big_a: SymMatrix,
    big_b: DMatrix<f64>,
    big_c: SymMatrix,
    zc: DMatrix<f64>,
    q: SymMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Center,
    BoundarySample,
    InteriorSample,
    Explicit,
}

/// A candidate model `Z` (`p×n`, so that `[A B] = Zᵀ`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistentModel {
    pub z: DMatrix<f64>,
    pub provenance: Provenance,
}

impl ConsistentModel {
    pub fn explicit(z: DMatrix<f64>) -> Self {
        ConsistentModel { z, provenance: Provenance::Explicit }
    }

    /// `[A B] = Zᵀ`, split after `state_rows` columns.
    pub fn split(&self, state_rows: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let zt = self.z.transpose();
        let a = zt.columns(0, state_rows).into_owned();
        let b = zt.columns(state_rows, zt.ncols() - state_rows).into_owned();
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Boundary,
    Interior,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidJson {
    n: usize,
    p: usize,
    #[serde(rename = "bigA")]
    big_a: Vec<Vec<f64>>,
    #[serde(rename = "bigB")]
    big_b: Vec<Vec<f64>>,
    #[serde(rename = "bigC")]
    big_c: Vec<Vec<f64>>,
}

fn pd_solve(a: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient { sigma_min: min_eig(a).unwrap_or(0.0).max(0.0).sqrt() })?;
    Ok(chol.solve(rhs))
}

impl MatrixEllipsoid {
    /// Builds from the `(𝐀, 𝐁, 𝐂)` triple, caching `Zc = −𝐀⁻¹𝐁` and `Q = 𝐁ᵀ𝐀⁻¹𝐁 − 𝐂`.
    pub fn from_abc(big_a: SymMatrix, big_b: DMatrix<f64>, big_c: SymMatrix) -> Result<Self> {
        let p = big_a.dim();
        let n = big_c.dim();
        if big_b.nrows() != p || big_b.ncols() != n {
            return Err(Error::Dimension(format!("bigB is {}x{}, expected {p}x{n}", big_b.nrows(), big_b.ncols())));
        }
        let zc = -pd_solve(&big_a, &big_b)?;
        let q = SymMatrix::new(-(big_b.transpose() * &zc) - big_c.as_matrix());
        Ok(MatrixEllipsoid { big_a, big_b, big_c, zc, q })
    }

    /// Builds from center and shape: `𝐁 = −𝐀Zc`, `𝐂 = Zcᵀ𝐀Zc − Q`.
    pub fn from_center_shape(big_a: SymMatrix, zc: DMatrix<f64>, q: SymMatrix) -> Result<Self> {
        if zc.nrows() != big_a.dim() || zc.ncols() != q.dim() {
            return Err(Error::Dimension("center/shape dimensions disagree".into()));
        }
        if big_a.as_matrix().clone().cholesky().is_none() {
            return Err(Error::RankDeficient { sigma_min: min_eig(&big_a)?.max(0.0).sqrt() });
        }
        let big_b = -(big_a.as_matrix() * &zc);
        let big_c = SymMatrix::new(zc.transpose() * big_a.as_matrix() * &zc - q.as_matrix());
        Ok(MatrixEllipsoid { big_a, big_b, big_c, zc, q })
    }

    pub fn big_a(&self) -> &SymMatrix {
        &self.big_a
    }

    pub fn big_b(&self) -> &DMatrix<f64> {
        &self.big_b
    }

    pub fn big_c(&self) -> &SymMatrix {
        &self.big_c
    }

    pub fn center(&self) -> &DMatrix<f64> {
        &self.zc
    }

    pub fn shape(&self) -> &SymMatrix {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.q.dim()
    }

    pub fn p(&self) -> usize {
        self.big_a.dim()
    }

    /// Zero band used for the shape matrix.
    pub fn shape_tol(&self) -> f64 {
        let scale = self.big_c.norm2() + spectral_norm(&(self.big_b.transpose() * &self.zc));
        1e-9 * scale.max(1.0)
    }

    /// `Q^{1/2}`, with tiny negative eigenvalues from rounding clamped.
    pub fn shape_sqrt(&self) -> Result<SymMatrix> {
        psd_sqrt(&self.q, Some(self.shape_tol()))
    }

    pub fn a_inv_sqrt(&self) -> Result<SymMatrix> {
        pd_inv_sqrt(&self.big_a)
    }

    /// Smallest eigenvalue of `Q − (Z−Zc)ᵀ𝐀(Z−Zc)`; nonnegative for members.
    pub fn membership_margin(&self, z: &DMatrix<f64>) -> Result<f64> {
        if z.shape() != self.zc.shape() {
            return Err(Error::Dimension(format!(
                "model is {}x{}, ellipsoid expects {}x{}",
                z.nrows(),
                z.ncols(),
                self.zc.nrows(),
                self.zc.ncols()
            )));
        }
        let dz = z - &self.zc;
        let m = SymMatrix::new(self.q.as_matrix() - dz.transpose() * self.big_a.as_matrix() * &dz);
        min_eig(&m)
    }

    pub fn contains(&self, z: &ConsistentModel, tol: f64) -> Result<bool> {
        Ok(self.membership_margin(&z.z)? >= -tol)
    }

    /// `Zc + 𝐀^{-1/2} Υ Q^{1/2}`.
    pub fn point_from_upsilon(&self, upsilon: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.zc + self.a_inv_sqrt()?.as_matrix() * upsilon * self.shape_sqrt()?.as_matrix())
    }

    /// The constructive `Υ = 𝐀^{1/2}(Z − Zc) T₁ Λₚ⁻¹ T₁ᵀ` over the nonzero
    /// spectrum of `Q^{1/2}`. For members, `‖Υ‖ ≤ 1` and Υ maps back to `Z`.
    pub fn upsilon_of(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let root = self.shape_sqrt()?;
        let (vals, basis) = sym_eig(&root)?;
        let cut = self.shape_tol().sqrt().max(1e-12);
        let a_half = psd_sqrt(&self.big_a, None)?;
        let dz = z - &self.zc;
        let mut proj = DMatrix::zeros(self.n(), self.n());
        for (j, &v) in vals.iter().enumerate() {
            if v > cut {
                let t = basis.column(j);
                proj += (t * t.transpose()) / v;
            }
        }
        Ok(a_half.as_matrix() * dz * proj)
    }

    /// Seeded draws `Zc + 𝐀^{-1/2} Υ Q^{1/2}`; boundary draws have `‖Υ‖ = 1`.
    pub fn sample(&self, count: usize, mode: SampleMode, seed: u64) -> Result<Vec<ConsistentModel>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_is = self.a_inv_sqrt()?;
        let q_half = self.shape_sqrt()?;
        let (p, n) = (self.p(), self.n());
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let g = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = spectral_norm(&g).max(1e-300);
            let radius = match mode {
                SampleMode::Boundary => 1.0,
                SampleMode::Interior => rng.random::<f64>(),
            };
            let ups = g * (radius / norm);
            let z = &self.zc + a_is.as_matrix() * ups * q_half.as_matrix();
            let provenance = match mode {
                SampleMode::Boundary => Provenance::BoundarySample,
                SampleMode::Interior => Provenance::InteriorSample,
            };
            out.push(ConsistentModel { z, provenance });
        }
        Ok(out)
    }

    /// `‖Zc‖ + λ_min(𝐀)^{-1/2}·‖Q^{1/2}‖`, a spectral-norm bound on every member.
    pub fn norm_bound(&self) -> Result<f64> {
        let lmin = min_eig(&self.big_a)?;
        Ok(spectral_norm(&self.zc) + spectral_norm(self.shape_sqrt()?.as_matrix()) / lmin.sqrt())
    }

    /// `log((det Q)^{p/2} (det 𝐀)^{-n/2})`; `-∞` when Q is singular.
    pub fn log_size_measure(&self) -> f64 {
        let (Ok((qv, _)), Ok((av, _))) = (sym_eig(&self.q), sym_eig(&self.big_a)) else {
            return f64::NAN;
        };
        if qv[0] <= self.shape_tol() {
            return f64::NEG_INFINITY;
        }
        let (p, n) = (self.p() as f64, self.n() as f64);
        0.5 * p * qv.iter().map(|v| v.ln()).sum::<f64>() - 0.5 * n * av.iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `(det Q)^{p/2} (det 𝐀)^{-n/2}`, zero when Q is singular.
    pub fn size_measure(&self) -> f64 {
        self.log_size_measure().exp()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EllipsoidJson {
            n: self.n(),
            p: self.p(),
            big_a: matrix_to_rows(self.big_a.as_matrix()),
            big_b: matrix_to_rows(&self.big_b),
            big_c: matrix_to_rows(self.big_c.as_matrix()),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: EllipsoidJson = serde_json::from_str(text)?;
        let a = SymMatrix::try_new(rows_to_matrix(&j.big_a)?)?;
        let c = SymMatrix::try_new(rows_to_matrix(&j.big_c)?)?;
        let b = rows_to_matrix(&j.big_b)?;
        if a.dim() != j.p || c.dim() != j.n {
            return Err(Error::Dimension("ellipsoid JSON dimensions disagree with its header".into()));
        }
        Self::from_abc(a, b, c)
    }
}

/// Consistency set of the data under the energy bound:
/// `𝐀 = SSᵀ`, `𝐁 = −S X1ᵀ`, `𝐂 = X1X1ᵀ − ΔΔᵀ` with `S` the regressor stack.
pub fn consistency_set(dm: &DataMatrices) -> Result<MatrixEllipsoid> {
    let (ok, sigma_min) = check_rank_default(dm);
    if !ok {
        return Err(Error::RankDeficient { sigma_min });
    }
    let s = &dm.stack;
    let big_a = SymMatrix::new(s * s.transpose());
    let big_b = -(s * dm.x1.transpose());
    let big_c = SymMatrix::new(&dm.x1 * dm.x1.transpose() - dm.delta_delta_t().as_matrix());
    let e = MatrixEllipsoid::from_abc(big_a, big_b, big_c)?;
    let qmin = min_eig(e.shape())?;
    if qmin < -e.shape_tol() {
        return Err(Error::DegenerateInput(format!(
            "data are inconsistent with the noise bound (shape matrix has eigenvalue {qmin:e})"
        )));
    }
    Ok(e)
}

/// Least-squares estimate `Zcᵀ = X1·S⁺`, returned as `Zc` (`p×n`).
pub fn ls_center(dm: &DataMatrices) -> DMatrix<f64> {
    (&dm.x1 * pinv(&dm.stack)).transpose()
}

/// One data point `(κ°, κ, υ)`: measured successor/derivative, state regressor, input regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub successor: Vec<f64>,
    pub state: Vec<f64>,
    pub input: Vec<f64>,
}

impl DataPoint {
    fn stacked(&self) -> Vec<f64> {
        self.state.iter().chain(&self.input).copied().collect()
    }
}

/// Splits data matrices into per-sample points.
pub fn data_points(dm: &DataMatrices) -> Vec<DataPoint> {
    (0..dm.samples())
        .map(|k| DataPoint {
            successor: dm.x1.column(k).iter().copied().collect(),
            state: dm.stack.column(k).rows(0, dm.state_rows).iter().copied().collect(),
            input: dm.stack.column(k).rows(dm.state_rows, dm.input_rows).iter().copied().collect(),
        })
        .collect()
}

/// Whether `Z` explains every point within `|d|² ≤ δ` (membership in the intersection set).
pub fn explains_points(points: &[DataPoint], z: &DMatrix<f64>, delta: f64, tol: f64) -> bool {
    points.iter().all(|pt| {
        let s = nalgebra::DVector::from_vec(pt.stacked());
        let d = nalgebra::DVector::from_column_slice(&pt.successor) - z.transpose() * s;
        d.norm_squared() <= delta + tol
    })
}

/// Equal multipliers `τ` turn the program into the energy-bound set
/// `(SSᵀ, −SX1ᵀ, X1X1ᵀ − TδI)`; `τ = 1/(2λmax(Q))` with `𝐀 = τSSᵀ/2`,
/// `𝐁 = −τSX1ᵀ/2` is then strictly feasible.
fn uniform_multiplier_start(
    stack: &DMatrix<f64>,
    points: &[DataPoint],
    delta: f64,
    a_idx: impl Fn(usize, usize) -> usize,
    b_idx: impl Fn(usize, usize) -> usize,
    t0: usize,
    nvars: usize,
) -> Option<Vec<f64>> {
    let (p, t) = stack.shape();
    let n = points[0].successor.len();
    let x1 = DMatrix::from_fn(n, t, |i, k| points[k].successor[i]);
    let aa = stack * stack.transpose();
    let bb = -(stack * x1.transpose());
    let cc = &x1 * x1.transpose() - DMatrix::identity(n, n) * (t as f64 * delta);
    let q = SymMatrix::new(bb.transpose() * aa.clone().cholesky()?.solve(&bb) - cc);
    let tau = 0.5 / max_eig(&q).ok()?.max(1e-12);
    let mut x = vec![0.0; nvars];
    for i in 0..p {
        for j in i..p {
            x[a_idx(i, j)] = 0.5 * tau * aa[(i, j)];
        }
        for j in 0..n {
            x[b_idx(i, j)] = 0.5 * tau * bb[(i, j)];
        }
    }
    for v in x.iter_mut().skip(t0) {
        *v = tau;
    }
    Some(x)
}

/// Minimum-volume matrix ellipsoid containing all models that explain every
/// point within `|d|² ≤ δ`, via the S-procedure log-det program. The result
/// has `Q = I`.
pub fn overapproximate(points: &[DataPoint], delta: f64, opts: &SolverOptions) -> Result<MatrixEllipsoid> {
    if points.is_empty() {
        return Err(Error::Dimension("need at least one data point".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("instantaneous bound must be nonnegative, got {delta}")));
    }
    let n = points[0].successor.len();
    let p = points[0].state.len() + points[0].input.len();
    if points.iter().any(|pt| pt.successor.len() != n || pt.state.len() + pt.input.len() != p) {
        return Err(Error::Dimension("data points have inconsistent sizes".into()));
    }
    let raw = DMatrix::from_fn(p, points.len(), |i, k| points[k].stacked()[i]);
    // Rows are normalized to unit RMS; the log-det optimizer is equivariant
    // under this diagonal change of coordinates.
    let scale: Vec<f64> = (0..p)
        .map(|i| {
            let rms = (raw.row(i).norm_squared() / points.len() as f64).sqrt();
            if rms > 0.0 { 1.0 / rms } else { 1.0 }
        })
        .collect();
    let stack = DMatrix::from_fn(p, points.len(), |i, k| raw[(i, k)] * scale[i]);
    let sv = singular_values(&stack);
    let smin = if points.len() < p { 0.0 } else { *sv.last().unwrap_or(&0.0) };
    if smin <= 1e-10 * sv.first().copied().unwrap_or(0.0).max(1e-300) {
        return Err(Error::DegenerateInput(format!(
            "regressors do not span all {p} directions (smallest singular value {smin:e})"
        )));
    }

    // Variables: upper triangle of 𝐀, then 𝐁 row-major, then τᵢ.
    let a_idx = |i: usize, j: usize| -> usize {
        let (i, j) = (i.min(j), i.max(j));
        i * p - i * (i + 1) / 2 + j
    };
    let na = p * (p + 1) / 2;
    let b_idx = |i: usize, j: usize| na + i * n + j;
    let nb = p * n;
    let t0 = na + nb;
    let nvars = t0 + points.len();
    let dim = n + 2 * p;
    let mut lmi = LmiBlock::new(dim);
    let mut logdet = LmiBlock::new(p);
    for i in 0..n {
        lmi.add_const(i, i, -1.0);
    }
    for i in 0..p {
        for j in i..p {
            let v = a_idx(i, j);
            lmi.add_var(v, n + i, n + j, 1.0);
            lmi.add_var(v, n + p + i, n + p + j, -1.0);
            logdet.add_var(v, i, j, 1.0);
        }
        for j in 0..n {
            let v = b_idx(i, j);
            lmi.add_var(v, n + i, j, 1.0);
            lmi.add_var(v, n + p + i, j, 1.0);
        }
    }
    for (k, pt) in points.iter().enumerate() {
        let v = t0 + k;
        let s: Vec<f64> = stack.column(k).iter().copied().collect();
        let ko = &pt.successor;
        for i in 0..n {
            for j in i..n {
                let gamma = ko[i] * ko[j] - if i == j { delta } else { 0.0 };
                lmi.add_var(v, i, j, -gamma);
            }
        }
        for i in 0..p {
            for j in 0..n {
                let beta = -s[i] * ko[j];
                lmi.add_var(v, n + i, j, -beta);
            }
            for j in i..p {
                lmi.add_var(v, n + i, n + j, -s[i] * s[j]);
            }
        }
    }
    let mut prob = SdpProblem::new(nvars);
    prob.add_block(lmi);
    let ld = prob.add_block(logdet);
    prob.objective = Objective::MaxLogDetBlock(ld);
    prob.nonneg = (t0..nvars).collect();
    let start = uniform_multiplier_start(&stack, points, delta, a_idx, b_idx, t0, nvars);
    // Hundreds of damped Newton steps are typical once T is in the thousands.
    let opts = SolverOptions { max_iters: opts.max_iters.max(600), ..opts.clone() };
    let sol = conic::solve_from(&prob, &opts, start.as_deref())?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Feasible => {}
        SolveStatus::Infeasible => return Err(Error::SolverInfeasible { margin: sol.margin }),
        SolveStatus::NumericalFailure => {
            return Err(Error::NumericalFailure(format!(
                "log-det program failed after {} iterations (worst eigenvalue {:e})",
                sol.iterations, sol.worst_eig
            )))
        }
    }
    let big_a = SymMatrix::new(DMatrix::from_fn(p, p, |i, j| sol.x[a_idx(i, j)] / (scale[i] * scale[j])));
    let big_b = DMatrix::from_fn(p, n, |i, j| sol.x[b_idx(i, j)] / scale[i]);
    let zc = -pd_solve(&big_a, &big_b)?;
    MatrixEllipsoid::from_center_shape(big_a, zc, SymMatrix::identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::DataMatrices;

    pub(crate) fn scalar_dm(delta: f64) -> DataMatrices {
        DataMatrices::from_parts(
            DMatrix::from_row_slice(1, 2, &[1.5, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, -1.0]),
            DMatrix::from_element(1, 1, delta),
            1,
        )
        .unwrap()
    }

    #[test]
    fn scalar_ideal_data() {
        let e = consistency_set(&scalar_dm(0.0)).unwrap();
        assert_eq!(e.big_a().as_matrix(), &DMatrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 2.0]));
        assert_eq!(e.big_b(), &DMatrix::from_column_slice(2, 1, &[-1.5, -1.5]));
        assert!((e.center() - DMatrix::from_column_slice(2, 1, &[0.5, 1.0])).norm() < 1e-12);
        assert!(e.shape()[(0, 0)].abs() < 1e-12);
        assert_eq!(e.size_measure(), 0.0);
        let ls = ls_center(&scalar_dm(0.0));
        assert!((ls - e.center()).norm() < 1e-12);
    }

    #[test]
    fn scalar_unit_noise_matches_projection_formula() {
        let dm = scalar_dm(1.0);
        let e = consistency_set(&dm).unwrap();
        let s = &dm.stack;
        let qp = s.transpose() * (s * s.transpose()).try_inverse().unwrap() * s;
        let alt = &dm.x1 * qp * dm.x1.transpose() - &dm.x1 * dm.x1.transpose() + &dm.delta * dm.delta.transpose();
        assert!((e.shape().as_matrix() - alt).norm() < 1e-12);
        assert!((e.shape()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_stack() {
        let dm = DataMatrices::from_parts(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            DMatrix::zeros(1, 1),
            1,
        )
        .unwrap();
        assert!(matches!(consistency_set(&dm), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn membership_basics() {
        let e = consistency_set(&scalar_dm(0.0)).unwrap();
        assert!(e.contains(&ConsistentModel::explicit(e.center().clone()), 1e-9).unwrap());
        let off = e.center() + DMatrix::from_column_slice(2, 1, &[0.1, 0.0]);
        assert!(!e.contains(&ConsistentModel::explicit(off), 1e-9).unwrap());
        assert!(e.membership_margin(&DMatrix::zeros(3, 1)).is_err());
        let s = e.sample(1, SampleMode::Interior, 0).unwrap();
        assert!((&s[0].z - e.center()).norm() < 1e-12);
    }

    #[test]
    fn boundary_samples_are_tight() {
        let e = consistency_set(&scalar_dm(1.0)).unwrap();
        for m in e.sample(100, SampleMode::Boundary, 7).unwrap() {
            assert!(e.membership_margin(&m.z).unwrap().abs() < 1e-8);
        }
        assert_eq!(e.sample(5, SampleMode::Boundary, 3).unwrap(), e.sample(5, SampleMode::Boundary, 3).unwrap());
    }

    #[test]
    fn size_measure_cases() {
        let e = MatrixEllipsoid::from_center_shape(SymMatrix::identity(2), DMatrix::zeros(2, 1), SymMatrix::identity(1))
            .unwrap();
        assert!((e.size_measure() - 1.0).abs() < 1e-12);
        let e4 = MatrixEllipsoid::from_center_shape(
            SymMatrix::identity(2),
            DMatrix::zeros(2, 1),
            SymMatrix::identity(1).scale(4.0),
        )
        .unwrap();
        assert!((e4.size_measure() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let e = consistency_set(&scalar_dm(1.0)).unwrap();
        let back = MatrixEllipsoid::from_json(&e.to_json().unwrap()).unwrap();
        assert!((back.center() - e.center()).norm() < 1e-12);
        assert!((back.shape().as_matrix() - e.shape().as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn overapprox_contains_truth_for_static_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (0.7, -0.4);
        let delta: f64 = 0.01;
        let pts: Vec<DataPoint> = (0..15)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let u: f64 = rng.random_range(-1.0..1.0);
                let d: f64 = rng.random_range(-1.0..1.0) * delta.sqrt();
                DataPoint { successor: vec![a * x + b * u + d], state: vec![x], input: vec![u] }
            })
            .collect();
        let e = overapproximate(&pts, delta, &SolverOptions::default()).unwrap();
        let truth = DMatrix::from_column_slice(2, 1, &[a, b]);
        assert!(e.contains(&ConsistentModel::explicit(truth), 1e-7).unwrap());
        assert!((e.shape().as_matrix() - DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn overapprox_rejects_unexcited_data() {
        let pts = vec![DataPoint { successor: vec![1.0], state: vec![1.0], input: vec![1.0] }; 3];
        assert!(matches!(overapproximate(&pts, 0.1, &SolverOptions::default()), Err(Error::DegenerateInput(_))));
    }
}
