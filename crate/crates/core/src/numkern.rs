//! Dense symmetric linear algebra shared by every other module.
//!
//! Everything here is a pure function of its inputs. Symmetric objects are
//! carried as [`SymMatrix`], which symmetrizes on construction so downstream
//! formulas can rely on exact symmetry.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// A dense real symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`. Panics if `m` is not square or empty.
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square() && m.nrows() >= 1, "SymMatrix requires a non-empty square matrix");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn try_new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::new(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn norm2(&self) -> f64 {
        match sym_eig(self) {
            Ok((vals, _)) => vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
            Err(_) => self.0.norm(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        matrix_to_rows(&s.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = String;
    fn try_from(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let m = rows_to_matrix(&rows).map_err(|e| e.to_string())?;
        SymMatrix::try_new(m).map_err(|e| e.to_string())
    }
}

/// Row-major nested vectors, the JSON layout used for every matrix artifact.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Sign class of a symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefinitenessClass {
    PosDef,
    PosSemiDef,
    Indefinite,
    NegSemiDef,
    NegDef,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Definiteness {
    pub class: DefinitenessClass,
    pub min_eig: f64,
    pub max_eig: f64,
    pub tol: f64,
}

impl Definiteness {
    pub fn is_psd(&self) -> bool {
        matches!(self.class, DefinitenessClass::PosDef | DefinitenessClass::PosSemiDef)
    }
}

/// Eigendecomposition with eigenvalues sorted ascending and an orthogonal basis
/// whose columns are the matching eigenvectors.
pub fn sym_eig(s: &SymMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = s.dim();
    let eig = s
        .0
        .clone()
        .try_symmetric_eigen(EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut basis = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((vals, basis))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(s: &SymMatrix) -> Result<f64> {
    let (vals, _) = sym_eig(s)?;
    Ok(vals[vals.len() - 1])
}

pub fn min_eig(s: &SymMatrix) -> Result<f64> {
    let (vals, _) = sym_eig(s)?;
    Ok(vals[0])
}

/// Default zero band for eigenvalue classification: `1e-9·max(1, ‖S‖)`.
pub fn default_tol(s: &SymMatrix) -> f64 {
    1e-9 * s.norm2().max(1.0)
}

/// Rebuilds `V·diag(f(λ))·Vᵀ`.
fn spectral_map(vals: &DVector<f64>, basis: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = vals.len();
    let mut scaled = basis.clone();
    for j in 0..n {
        let fj = f(vals[j]);
        scaled.column_mut(j).scale_mut(fj);
    }
    scaled * basis.transpose()
}

/// The unique PSD square root. Eigenvalues in `[-tol, 0)` are clamped to zero;
/// anything below `-tol` is rejected. `tol = None` uses [`default_tol`].
pub fn psd_sqrt(s: &SymMatrix, tol: Option<f64>) -> Result<SymMatrix> {
    let tol = tol.unwrap_or_else(|| default_tol(s));
    let (vals, basis) = sym_eig(s)?;
    if vals[0] < -tol {
        return Err(Error::NotPsd { min_eig: vals[0] });
    }
    Ok(SymMatrix::new(spectral_map(&vals, &basis, |v| v.max(0.0).sqrt())))
}

/// `S^{-1/2}` for positive definite `S`.
pub fn pd_inv_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    let (vals, basis) = sym_eig(s)?;
    if vals[0] <= 0.0 {
        return Err(Error::NotPsd { min_eig: vals[0] });
    }
    Ok(SymMatrix::new(spectral_map(&vals, &basis, |v| 1.0 / v.sqrt())))
}

/// Inverse of a positive definite matrix through its Cholesky factor.
pub fn pd_inverse(s: &SymMatrix) -> Result<SymMatrix> {
    let chol = s
        .0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPsd { min_eig: min_eig(s).unwrap_or(f64::NAN) })?;
    Ok(SymMatrix::new(chol.inverse()))
}

/// Moore-Penrose pseudoinverse via the SVD, with singular values below
/// `max(r, c)·ε·σ_max` treated as zero.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cutoff = (r.max(c) as f64) * f64::EPSILON * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let k = svd.singular_values.len();
    let mut out = DMatrix::zeros(c, r);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff {
            out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

/// Singular values sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Induced 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Classifies `S` from its extreme eigenvalues with `tol` as the zero band.
pub fn definiteness(s: &SymMatrix, tol: f64) -> Result<Definiteness> {
    if tol <= 0.0 {
        return Err(Error::Domain("definiteness tolerance must be positive".into()));
    }
    let (vals, _) = sym_eig(s)?;
    let min_eig = vals[0];
    let max_eig = vals[vals.len() - 1];
    let class = if min_eig > tol {
        DefinitenessClass::PosDef
    } else if max_eig < -tol {
        DefinitenessClass::NegDef
    } else if min_eig >= -tol {
        DefinitenessClass::PosSemiDef
    } else if max_eig <= tol {
        DefinitenessClass::NegSemiDef
    } else {
        DefinitenessClass::Indefinite
    };
    Ok(Definiteness { class, min_eig, max_eig, tol })
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Largest eigenvalue modulus (discrete-time stability measure).
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max)
}

/// Largest eigenvalue real part (continuous-time stability measure).
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|(re, _)| *re).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        SymMatrix::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn eig_of_diagonal() {
        let (vals, basis) = sym_eig(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(vals.as_slice(), &[4.0, 9.0]);
        assert!((basis.abs() - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn eig_of_swap() {
        let s = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let (vals, _) = sym_eig(&s).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [5, 8] {
            let s = random_sym(n, &mut rng);
            let (vals, basis) = sym_eig(&s).unwrap();
            let rec = &basis * DMatrix::from_diagonal(&vals) * basis.transpose();
            assert!((rec - s.as_matrix()).norm() <= 1e-10 * s.norm2().max(1.0));
            assert!((basis.transpose() * &basis - DMatrix::identity(n, n)).norm() < 1e-12);
            assert!(vals.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sqrt_cases() {
        let r = psd_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0]), None).unwrap();
        assert!((r.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-14);
        let z = psd_sqrt(&SymMatrix::zeros(3), None).unwrap();
        assert_eq!(z.as_matrix().norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = SymMatrix::new(g.transpose() * g);
        let r = psd_sqrt(&m, None).unwrap();
        assert!((r.as_matrix() * r.as_matrix() - m.as_matrix()).norm() <= 1e-9);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let err = psd_sqrt(&SymMatrix::from_diagonal(&[1.0, -0.5]), None).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
    }

    #[test]
    fn pinv_cases() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((pinv(&d) - &d).norm() < 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert!((&m * pinv(&m) - DMatrix::identity(2, 2)).norm() < 1e-12);
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let wp = pinv(&w);
        let formula = w.transpose() * (&w * w.transpose()).try_inverse().unwrap();
        assert!((&wp - formula).norm() < 1e-10);
        assert!((&w * &wp * &w - &w).norm() < 1e-10);
        assert!((&wp * &w * &wp - &wp).norm() < 1e-10);
        assert!(((&w * &wp).transpose() - &w * &wp).norm() < 1e-10);
        assert!(((&wp * &w).transpose() - &wp * &w).norm() < 1e-10);
    }

    #[test]
    fn classify() {
        let tol = 1e-9;
        assert_eq!(definiteness(&SymMatrix::identity(3), tol).unwrap().class, DefinitenessClass::PosDef);
        assert_eq!(
            definiteness(&SymMatrix::from_diagonal(&[1.0, 0.0]), tol).unwrap().class,
            DefinitenessClass::PosSemiDef
        );
        assert_eq!(
            definiteness(&SymMatrix::from_diagonal(&[1.0, -1.0]), tol).unwrap().class,
            DefinitenessClass::Indefinite
        );
        assert_eq!(
            definiteness(&SymMatrix::from_diagonal(&[-1.0, 0.0]), tol).unwrap().class,
            DefinitenessClass::NegSemiDef
        );
        assert_eq!(definiteness(&SymMatrix::identity(2).scale(-1.0), tol).unwrap().class, DefinitenessClass::NegDef);
        assert!(definiteness(&SymMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn symmetrizes_on_construction() {
        let s = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert_eq!(s[(0, 1)], 1.0);
    }

    #[test]
    fn stability_measures() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        assert!((spectral_abscissa(&a) + 1.0).abs() < 1e-12);
        assert!((spectral_radius(&a) - 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, proptest};

        proptest! {
            #[test]
            fn sqrt_squares_back(seed in 0u64..1000, n in 1usize..7, rank in 0usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = rank.min(n);
                let g = DMatrix::from_fn(k.max(1), n, |_, _| rng.random_range(-2.0..2.0));
                let g = if k == 0 { g * 0.0 } else { g };
                let m = SymMatrix::new(g.transpose() * g);
                let r = psd_sqrt(&m, None).unwrap();
                let err = (r.as_matrix() * r.as_matrix() - m.as_matrix()).norm();
                prop_assert!(err <= 1e-8 * m.norm2().max(1.0));
                prop_assert!(min_eig(&r).unwrap() >= -1e-12);
            }

            #[test]
            fn pinv_axioms_rank_deficient(seed in 0u64..1000, r in 1usize..6, c in 1usize..6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = r.min(c).saturating_sub(1).max(1);
                let a = DMatrix::from_fn(r, k, |_, _| rng.random_range(-1.0..1.0));
                let b = DMatrix::from_fn(k, c, |_, _| rng.random_range(-1.0..1.0));
                let m = a * b;
                let mp = pinv(&m);
                prop_assert!((&m * &mp * &m - &m).norm() <= 1e-9 * m.norm().max(1.0));
                prop_assert!((&mp * &m * &mp - &mp).norm() <= 1e-9 * mp.norm().max(1.0));
            }
        }
    }
}
