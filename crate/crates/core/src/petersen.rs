//! Executable forms of Petersen's lemma.
//!
//! For `F ∈ 𝓕 = {F : FᵀF ⪯ F̄}`, the robust inequality
//! `C + EFG + GᵀFᵀEᵀ ≺ 0 ∀F ∈ 𝓕` holds iff some `λ > 0` gives
//! `C + λEEᵀ + λ⁻¹GᵀF̄G ≺ 0` (and the nonstrict analogue under extra rank
//! conditions). The multiplier is searched on the max-eigenvalue curve, which
//! is convex in λ.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkern::{max_eig, psd_sqrt, spectral_norm, sym_eig, SymMatrix};

const LOG_LAMBDA_RANGE: (f64, f64) = (-12.0, 12.0);

#[derive(Clone, Debug)]
pub struct PetersenInstance {
    pub c: SymMatrix,
    /// `n×p`.
    pub e: DMatrix<f64>,
    /// `q×n`.
    pub g: DMatrix<f64>,
    pub fbar: SymMatrix,
    /// `Φ` with `ΦᵀΦ = F̄`.
    pub phi: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierCertificate {
    pub lambda: f64,
    /// Largest eigenvalue of `C + λEEᵀ + λ⁻¹GᵀF̄G`.
    pub residual_eig: f64,
}

impl PetersenInstance {
    pub fn new(c: SymMatrix, e: DMatrix<f64>, g: DMatrix<f64>, fbar: SymMatrix) -> Result<Self> {
        let n = c.dim();
        if e.nrows() != n || g.ncols() != n || g.nrows() != fbar.dim() {
            return Err(Error::Dimension(format!(
                "C {n}x{n}, E {}x{}, G {}x{}, F̄ {}x{} are incompatible",
                e.nrows(),
                e.ncols(),
                g.nrows(),
                g.ncols(),
                fbar.dim(),
                fbar.dim()
            )));
        }
        let phi = psd_sqrt(&fbar, None)?.into_matrix();
        Ok(PetersenInstance { c, e, g, fbar, phi })
    }

    /// Scalar instance `(C, E, G, F̄)`.
    pub fn scalar(c: f64, e: f64, g: f64, fbar: f64) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(SymMatrix::new(m(c)), m(e), m(g), SymMatrix::new(m(fbar)))
    }

    /// Columns of `F` (`p`) and rows (`q`): `F` is `p×q`.
    pub fn f_shape(&self) -> (usize, usize) {
        (self.e.ncols(), self.g.nrows())
    }

    fn eet(&self) -> DMatrix<f64> {
        &self.e * self.e.transpose()
    }

    fn gfg(&self) -> DMatrix<f64> {
        self.g.transpose() * self.fbar.as_matrix() * &self.g
    }

    /// Floating-point band separating strict from nonstrict: `1e-9·scale`.
    pub fn tol(&self) -> f64 {
        let scale = self.c.norm2().max(spectral_norm(&self.eet())).max(spectral_norm(&self.gfg()));
        1e-9 * scale.max(1.0)
    }

    /// `C + λEEᵀ + λ⁻¹GᵀF̄G`.
    pub fn multiplier_matrix(&self, lambda: f64) -> SymMatrix {
        SymMatrix::new(self.c.as_matrix() + self.eet() * lambda + self.gfg() / lambda)
    }

    /// `C + EFG + GᵀFᵀEᵀ`.
    pub fn robust_matrix(&self, f: &DMatrix<f64>) -> SymMatrix {
        let efg = &self.e * f * &self.g;
        SymMatrix::new(self.c.as_matrix() + &efg + efg.transpose())
    }

    pub fn curve(&self, lambda: f64) -> f64 {
        max_eig(&self.multiplier_matrix(lambda)).unwrap_or(f64::INFINITY)
    }

    /// Whether the nonstrict lemma's converse applies: `E ≠ 0`, `F̄ ≻ 0`, `G ≠ 0`.
    pub fn nonstrict_iff_applies(&self) -> bool {
        let fbar_pd = sym_eig(&self.fbar).map(|(v, _)| v[0] > self.tol()).unwrap_or(false);
        self.e.norm() > 0.0 && self.g.norm() > 0.0 && fbar_pd
    }
}

fn passes(value: f64, strict: bool, tol: f64) -> bool {
    if strict {
        value < -tol
    } else {
        value <= tol
    }
}

/// Checks the multiplier inequality at a given `λ`.
pub fn strict_holds_with(inst: &PetersenInstance, lambda: f64) -> Result<bool> {
    holds_with(inst, lambda, true)
}

pub fn nonstrict_holds_with(inst: &PetersenInstance, lambda: f64) -> Result<bool> {
    holds_with(inst, lambda, false)
}

fn holds_with(inst: &PetersenInstance, lambda: f64, strict: bool) -> Result<bool> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("multiplier must be positive, got {lambda}")));
    }
    Ok(passes(max_eig(&inst.multiplier_matrix(lambda))?, strict, inst.tol()))
}

/// Minimizes a function of `log λ` over `[lo, hi]`: dense grid, then golden
/// section around the best grid point. Returns `(log λ, value)`.
fn minimize_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 193;
    let step = (hi - lo) / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|i| f(lo + step * i as f64)).collect();
    let best = (0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let local_minima = (1..n - 1).filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1]).count();
    if local_minima > 1 {
        warn!("multiplier curve has {local_minima} local minima on the grid; using the best grid bracket");
    }
    let (mut a, mut b) = (lo + step * best.saturating_sub(1) as f64, lo + step * (best + 1).min(n - 1) as f64);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if vals[best] < v {
        (lo + step * best as f64, vals[best])
    } else {
        (x, v)
    }
}

/// Searches `λ > 0` minimizing `λ_max(C + λEEᵀ + λ⁻¹GᵀF̄G)`; returns a
/// certificate only when the minimum passes the strict or nonstrict test.
pub fn find_multiplier(inst: &PetersenInstance, strict: bool) -> Option<MultiplierCertificate> {
    let tol = inst.tol();
    let e_zero = inst.e.norm() == 0.0;
    let g_zero = spectral_norm(&inst.gfg()) == 0.0;
    let lambda = match (e_zero, g_zero) {
        (true, true) => 1.0,
        (true, false) => 10f64.powf(LOG_LAMBDA_RANGE.1),
        (false, true) => 10f64.powf(LOG_LAMBDA_RANGE.0),
        (false, false) => {
            let (l, _) = minimize_log(|s| inst.curve(10f64.powf(s)), LOG_LAMBDA_RANGE.0, LOG_LAMBDA_RANGE.1);
            10f64.powf(l)
        }
    };
    let residual_eig = inst.curve(lambda);
    passes(residual_eig, strict, tol).then_some(MultiplierCertificate { lambda, residual_eig })
}

/// Result of a sampled check of the robust inequality.
#[derive(Clone, Debug)]
pub struct UniversalCheck {
    pub holds: bool,
    pub worst_f: DMatrix<f64>,
    pub worst_value: f64,
}

/// Evaluates `C + EFG + GᵀFᵀEᵀ` over `count` admissible draws `F = ΥΦ`
/// (80% on `‖Υ‖ = 1`) plus deterministic worst-case candidates.
pub fn sampled_universal_check(inst: &PetersenInstance, count: usize, strict: bool, seed: u64) -> UniversalCheck {
    let (p, q) = inst.f_shape();
    let s = inst.phi.nrows();
    let tol = inst.tol();
    let mut worst_f = DMatrix::zeros(p, q);
    let mut worst_value = max_eig(&inst.robust_matrix(&worst_f)).unwrap_or(f64::INFINITY);
    let consider = |f: DMatrix<f64>, worst_f: &mut DMatrix<f64>, worst_value: &mut f64| {
        let v = max_eig(&inst.robust_matrix(&f)).unwrap_or(f64::INFINITY);
        if v > *worst_value {
            *worst_value = v;
            *worst_f = f;
        }
    };
    if inst.fbar.norm2() > 0.0 && p > 0 && q > 0 {
        for cand in worst_case_candidates(inst) {
            consider(cand, &mut worst_f, &mut worst_value);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let ups = DMatrix::from_fn(p, s, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = spectral_norm(&ups).max(1e-300);
            let radius = if rng.random::<f64>() < 0.8 { 1.0 } else { rng.random::<f64>() };
            let f = ups * (radius / norm) * &inst.phi;
            consider(f, &mut worst_f, &mut worst_value);
        }
    }
    UniversalCheck { holds: passes(worst_value, strict, tol), worst_f, worst_value }
}

/// Ascent over directions: for a direction `w`, the admissible `F`
/// maximizing `wᵀ(C + EFG + GᵀFᵀEᵀ)w` is the worst-case pair for `(Eᵀw, Gw)`.
fn worst_case_candidates(inst: &PetersenInstance) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    let Ok((_, basis)) = sym_eig(&inst.c) else { return out };
    for j in 0..basis.ncols() {
        let mut w: DVector<f64> = basis.column(j).into_owned();
        for _ in 0..8 {
            let x = inst.e.transpose() * &w;
            let y = &inst.g * &w;
            let Ok(f) = worst_case_pair(x.as_slice(), y.as_slice(), &inst.phi) else { break };
            let m = inst.robust_matrix(&f);
            out.push(f);
            let Ok((_, b)) = sym_eig(&m) else { break };
            w = b.column(b.ncols() - 1).into_owned();
        }
    }
    out
}

/// `F = x yᵀ ΦᵀΦ / (|x|·|Φy|)`, which attains `max_{FᵀF ⪯ ΦᵀΦ} (xᵀFy)² = |x|²|Φy|²`.
pub fn worst_case_pair(x: &[f64], y: &[f64], phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if phi.ncols() != y.len() {
        return Err(Error::Dimension(format!("Φ has {} columns, y has {} entries", phi.ncols(), y.len())));
    }
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let phiy = phi * &yv;
    let (nx, ny) = (xv.norm(), phiy.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::DegenerateInput("x = 0 or Φy = 0: the maximum is 0, attained by F = 0".into()));
    }
    Ok(xv * (phi.transpose() * phiy).transpose() / (nx * ny))
}

/// Searches `λ > 0` with `λ²A + λB + C ≺ 0`.
pub fn quadratic_multiplier(a: &SymMatrix, b: &SymMatrix, c: &SymMatrix) -> Option<f64> {
    let f = |s: f64| {
        let l = 10f64.powf(s);
        max_eig(&SymMatrix::new(a.as_matrix() * (l * l) + b.as_matrix() * l + c.as_matrix())).unwrap_or(f64::INFINITY)
    };
    let (s, v) = minimize_log(f, LOG_LAMBDA_RANGE.0, LOG_LAMBDA_RANGE.1);
    (v < 0.0).then(|| 10f64.powf(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_multiplier_checks() {
        let ok = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.16).unwrap();
        assert!(strict_holds_with(&ok, 0.4).unwrap());
        let edge = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.25).unwrap();
        assert!(!strict_holds_with(&edge, 0.5).unwrap());
        assert!(nonstrict_holds_with(&edge, 0.5).unwrap());
        assert!(matches!(strict_holds_with(&ok, 0.0), Err(Error::Domain(_))));
        let plain = PetersenInstance::scalar(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(strict_holds_with(&plain, 3.0).unwrap());
    }

    #[test]
    fn multiplier_search_scalar() {
        let ok = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.16).unwrap();
        let cert = find_multiplier(&ok, true).unwrap();
        assert!((cert.lambda - 0.4).abs() < 1e-4);
        assert!(cert.residual_eig <= -0.2 + 1e-9);
        let edge = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.25).unwrap();
        assert!(find_multiplier(&edge, true).is_none());
        assert!(find_multiplier(&edge, false).is_some());
        let diag = PetersenInstance::new(
            SymMatrix::identity(2).scale(-1.0),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            SymMatrix::identity(1),
        )
        .unwrap();
        assert!((find_multiplier(&diag, true).unwrap().residual_eig + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_checks_scalar() {
        let ok = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.16).unwrap();
        let r = sampled_universal_check(&ok, 1000, true, 0);
        assert!(r.holds);
        assert!((r.worst_value + 0.2).abs() < 1e-9);
        let edge = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.25).unwrap();
        let r = sampled_universal_check(&edge, 1000, true, 0);
        assert!(!r.holds);
        assert!((r.worst_f[(0, 0)] - 0.5).abs() < 1e-12);
        assert!(sampled_universal_check(&edge, 1000, false, 0).holds);
        let zero = PetersenInstance::scalar(-1.0, 1.0, 1.0, 0.0).unwrap();
        let r = sampled_universal_check(&zero, 10, true, 0);
        assert!(r.holds && r.worst_f[(0, 0)] == 0.0);
    }

    #[test]
    fn worst_case_pair_examples() {
        let phi = DMatrix::from_element(1, 1, 1.0);
        let f = worst_case_pair(&[1.0, 0.0], &[1.0], &phi).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let val = (x.transpose() * &f)[(0, 0)];
        assert!((val * val - 1.0).abs() < 1e-15);
        assert!(matches!(worst_case_pair(&[0.0, 0.0], &[1.0], &phi), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn quadratic_multiplier_scalar() {
        // λ² − 3λ + 1 < 0 on (0.38, 2.62).
        let m = |v: f64| SymMatrix::new(DMatrix::from_element(1, 1, v));
        let l = quadratic_multiplier(&m(1.0), &m(-3.0), &m(1.0)).unwrap();
        assert!(l * l - 3.0 * l + 1.0 < 0.0);
        assert!(quadratic_multiplier(&m(1.0), &m(-1.0), &m(1.0)).is_none());
    }
}
