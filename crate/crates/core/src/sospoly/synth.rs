//! Polynomial state feedback from a matrix-ellipsoid set of data-consistent
//! vector fields `ẋ = A Z(x) + B W(x) u`.
//!
//! The decrease condition is the `(1+p+n)`-square matrix polynomial
//!
//! ```text
//! M = [ ℓ2 + ∇V Zcᵀφ       ⋆      ⋆    ]
//!     [ 𝐀^{-1/2}φ         −λI     ⋆    ]      φ = [Z; W k]
//!     [ λ Q^{1/2} ∇Vᵀ      0     −4λI  ]
//! ```
//!
//! with `−M ∈ S_m`, `V − ℓ1 ∈ S` and `λ − ελ ∈ S`. `M` is bilinear in
//! `(V, k, λ)`, so each program fixes either `V` or `(k, λ)`.

use std::time::Instant;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{SdpProblem, SolverOptions};
use crate::dataio::Regressors;
use crate::ellipsoid::{MatrixEllipsoid, SampleMode};
use crate::error::{Error, Result};
use crate::linsynth::{synth_ct, LmiForm};
use crate::numkern::{max_eig, pd_inverse, SymMatrix};
use crate::petersen::worst_case_pair;
use crate::sospoly::poly::{MatrixPolynomial, MonomialBasis, Polynomial};
use crate::sospoly::sos::{sos_decompose, AffinePoly, DecisionPoly, GramCertificate, SosProgram};

/// Minimum and maximum total degree of a decision polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeWindow {
    pub min: u32,
    pub max: u32,
}

impl DegreeWindow {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::DegreeMismatch(format!("degree window {min}..{max} is empty")));
        }
        Ok(DegreeWindow { min, max })
    }
}

/// Degree windows for `V`, `k`, `λ` and `ℓ2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeConfig {
    pub v: DegreeWindow,
    pub k: DegreeWindow,
    pub lambda: DegreeWindow,
    pub l2: DegreeWindow,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        DegreeConfig {
            v: DegreeWindow { min: 2, max: 4 },
            k: DegreeWindow { min: 1, max: 3 },
            lambda: DegreeWindow { min: 0, max: 4 },
            l2: DegreeWindow { min: 2, max: 4 },
        }
    }
}

impl DegreeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("V", self.v), ("k", self.k), ("lambda", self.lambda), ("l2", self.l2)] {
            if w.min > w.max {
                return Err(Error::DegreeMismatch(format!("{name} window {}..{} is empty", w.min, w.max)));
            }
        }
        if self.v.max < 2 {
            return Err(Error::DegreeMismatch("V needs degree at least 2".into()));
        }
        if self.k.max < 1 {
            return Err(Error::DegreeMismatch("k needs degree at least 1".into()));
        }
        Ok(())
    }
}

/// Degrees actually used by one program after fitting the windows to the
/// per-row Gram bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsedDegrees {
    pub v: u32,
    pub k: u32,
    pub lambda: u32,
    pub l2: u32,
}

/// Design parameters `ℓ1`, `ελ` and the lower bound imposed on `ℓ2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyDesign {
    pub l1: Polynomial,
    pub eps_lambda: f64,
    pub l2_floor: Polynomial,
}

impl PolyDesign {
    /// `ℓ1 = 1e-3·|x|²`, `ελ = 1e-3`, `ℓ2 ⪰ 1e-6·|x|²`.
    pub fn standard(nvars: usize) -> Self {
        PolyDesign { l1: squared_norm(nvars, 1e-3), eps_lambda: 1e-3, l2_floor: squared_norm(nvars, 1e-6) }
    }
}

/// `c·|x|²`.
pub fn squared_norm(nvars: usize, c: f64) -> Polynomial {
    (0..nvars).fold(Polynomial::zero(nvars), |acc, i| {
        let xi = Polynomial::var(nvars, i);
        acc.add(&xi.mul(&xi).scale(c))
    })
}

/// `xᵀ P x`.
pub fn quadratic_form(p: &SymMatrix) -> Polynomial {
    let n = p.dim();
    let mut out = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            out = out.add(&Polynomial::var(n, i).mul(&Polynomial::var(n, j)).scale(p.as_matrix()[(i, j)]));
        }
    }
    out
}

/// Sublevel region `{ℓ0 ≤ c}` for the local conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRegion {
    pub l0: Polynomial,
    pub c: f64,
}

/// Which side of the bilinear decrease condition is held fixed.
#[derive(Clone, Debug, PartialEq)]
pub enum Fixed {
    V(Polynomial),
    KLambda { k: Vec<Polynomial>, lambda: Polynomial },
    Nothing,
}

/// Local-variant part of a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPart {
    pub s1: Polynomial,
    pub s2: Polynomial,
    pub l0: Polynomial,
    pub c: f64,
}

/// `(V, k, λ, ℓ2)` plus Gram witnesses of every SOS membership.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCertificate {
    pub v: Polynomial,
    pub k: Vec<Polynomial>,
    pub lambda: Polynomial,
    pub l2: Polynomial,
    pub l1: Polynomial,
    pub eps_lambda: f64,
    pub local: Option<LocalPart>,
    pub degrees: UsedDegrees,
    pub grams: Vec<(String, GramCertificate)>,
}

#[derive(Serialize, Deserialize)]
struct LocalJson {
    s1: String,
    s2: String,
    l0: String,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct CertJson {
    nvars: usize,
    #[serde(rename = "V")]
    v: String,
    k: Vec<String>,
    lambda: String,
    l2: String,
    l1: String,
    eps_lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    local: Option<LocalJson>,
    degrees: UsedDegrees,
    grams: Vec<(String, serde_json::Value)>,
}

impl PolyCertificate {
    pub fn nvars(&self) -> usize {
        self.v.nvars()
    }

    pub fn controller(&self) -> &[Polynomial] {
        &self.k
    }

    /// Largest coefficient mismatch and most negative Gram eigenvalue over all witnesses.
    pub fn gram_quality(&self) -> (f64, f64) {
        self.grams.iter().fold((0.0_f64, f64::INFINITY), |(r, e), (_, g)| (r.max(g.residual()), e.min(g.min_eig())))
    }

    pub fn to_json(&self) -> Result<String> {
        let j = CertJson {
            nvars: self.nvars(),
            v: self.v.to_string(),
            k: self.k.iter().map(Polynomial::to_string).collect(),
            lambda: self.lambda.to_string(),
            l2: self.l2.to_string(),
            l1: self.l1.to_string(),
            eps_lambda: self.eps_lambda,
            local: self.local.as_ref().map(|l| LocalJson {
                s1: l.s1.to_string(),
                s2: l.s2.to_string(),
                l0: l.l0.to_string(),
                c: l.c,
            }),
            degrees: self.degrees,
            grams: self.grams.iter().map(|(n, g)| Ok((n.clone(), g.to_json_value()?))).collect::<Result<_>>()?,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: CertJson = serde_json::from_str(text)?;
        let n = j.nvars;
        let parse = |s: &str| Polynomial::parse(s, n);
        Ok(PolyCertificate {
            v: parse(&j.v)?,
            k: j.k.iter().map(|s| parse(s)).collect::<Result<_>>()?,
            lambda: parse(&j.lambda)?,
            l2: parse(&j.l2)?,
            l1: parse(&j.l1)?,
            eps_lambda: j.eps_lambda,
            local: match j.local {
                Some(l) => Some(LocalPart { s1: parse(&l.s1)?, s2: parse(&l.s2)?, l0: parse(&l.l0)?, c: l.c }),
                None => None,
            },
            degrees: j.degrees,
            grams: j.grams.iter().map(|(name, v)| Ok((name.clone(), GramCertificate::from_json_value(v)?))).collect::<Result<_>>()?,
        })
    }
}

/// A polynomial that is either data or affine in decision variables.
#[derive(Clone, Debug)]
enum Lin {
    Known(Polynomial),
    Affine(AffinePoly),
}

impl Lin {
    fn affine(&self) -> AffinePoly {
        match self {
            Lin::Known(p) => AffinePoly::from_poly(p.clone()),
            Lin::Affine(a) => a.clone(),
        }
    }

    fn product(&self, other: &Lin) -> Result<Lin> {
        match (self, other) {
            (Lin::Known(p), Lin::Known(q)) => Ok(Lin::Known(p.mul(q))),
            _ => Ok(Lin::Affine(self.mul(other)?)),
        }
    }

    fn mul(&self, other: &Lin) -> Result<AffinePoly> {
        match (self, other) {
            (Lin::Known(p), Lin::Known(q)) => Ok(AffinePoly::from_poly(p.mul(q))),
            (Lin::Known(p), Lin::Affine(a)) | (Lin::Affine(a), Lin::Known(p)) => Ok(a.mul_poly(p)),
            (Lin::Affine(_), Lin::Affine(_)) => Err(Error::Bilinearity),
        }
    }
}

fn lin_sum(nvars: usize, terms: impl IntoIterator<Item = (f64, Lin)>) -> Lin {
    let mut known = Polynomial::zero(nvars);
    let mut aff: Option<AffinePoly> = None;
    for (c, t) in terms {
        if c == 0.0 {
            continue;
        }
        match t {
            Lin::Known(p) => known = known.add(&p.scale(c)),
            Lin::Affine(a) => {
                let s = a.scale(c);
                aff = Some(match aff {
                    Some(x) => x.add(&s),
                    None => s,
                });
            }
        }
    }
    match aff {
        Some(a) => Lin::Affine(a.add_poly(&known)),
        None => Lin::Known(known),
    }
}

/// Decision handle (`Ok`) or fixed data (`Err`).
type Handle<D, K> = std::result::Result<D, K>;

/// A built program together with handles to its decision polynomials.
pub struct PolyProgram {
    pub sos: SosProgram,
    pub degrees: UsedDegrees,
    v: Handle<DecisionPoly, Polynomial>,
    k: Handle<Vec<DecisionPoly>, Vec<Polynomial>>,
    lambda: Handle<DecisionPoly, Polynomial>,
    l2: DecisionPoly,
    s1: Option<DecisionPoly>,
    s2: Option<DecisionPoly>,
    l1: Polynomial,
    eps_lambda: f64,
    region: Option<LocalRegion>,
}

impl PolyProgram {
    pub fn to_sdp(&self) -> Result<SdpProblem> {
        Ok(self.sos.compile()?.sdp)
    }

    /// Solves the program and assembles the certificate.
    pub fn solve(&self, opts: &SolverOptions) -> Result<PolyCertificate> {
        let sol = self.sos.solve(opts)?;
        let d = &sol.decision;
        let pick = |h: &Handle<DecisionPoly, Polynomial>| match h {
            Ok(dp) => dp.value(d),
            Err(p) => p.clone(),
        };
        let k = match &self.k {
            Ok(dps) => dps.iter().map(|dp| dp.value(d)).collect(),
            Err(ps) => ps.clone(),
        };
        let local = self.region.as_ref().map(|r| {
            let nv = r.l0.nvars();
            LocalPart {
                s1: self.s1.as_ref().map_or_else(|| Polynomial::zero(nv), |s| s.value(d)),
                s2: self.s2.as_ref().map_or_else(|| Polynomial::zero(nv), |s| s.value(d)),
                l0: r.l0.clone(),
                c: r.c,
            }
        });
        let names = self.sos.constraints().iter().map(|c| c.name.clone());
        Ok(PolyCertificate {
            v: pick(&self.v),
            k,
            lambda: pick(&self.lambda),
            l2: self.l2.value(d),
            l1: self.l1.clone(),
            eps_lambda: self.eps_lambda,
            local,
            degrees: self.degrees,
            grams: names.zip(sol.grams).collect(),
        })
    }
}

/// Whether per-row Gram bases can carry every entry of the decrease matrix.
fn degrees_fit(dv: u32, dk: u32, dl: u32, dl2: u32, zdeg: u32, wdeg: u32) -> bool {
    let phi = zdeg.max(wdeg + dk);
    let b1 = dl2.max(dv - 1 + phi) / 2;
    let b2 = dl / 2;
    phi <= b1 + b2 && dl + dv - 1 <= b1 + b2
}

fn fit_degrees(cfg: &DegreeConfig, fixed: &Fixed, regs: &Regressors) -> Result<UsedDegrees> {
    cfg.validate()?;
    let zdeg = regs.z.degree();
    let wdeg = regs.w.degree();
    let l2 = cfg.l2.max;
    let used = match fixed {
        Fixed::Nothing => return Err(Error::Bilinearity),
        Fixed::V(v) => {
            let dv = v.degree().max(2);
            let dl = (cfg.lambda.min..=cfg.lambda.max).rev().find(|&dl| {
                (cfg.k.min..=cfg.k.max).any(|dk| degrees_fit(dv, dk, dl, l2, zdeg, wdeg))
            });
            let dl = dl.ok_or_else(|| {
                Error::DegreeMismatch(format!("no lambda degree in {:?} fits a degree-{dv} V", cfg.lambda))
            })?;
            let dk = (cfg.k.min..=cfg.k.max).rev().find(|&dk| degrees_fit(dv, dk, dl, l2, zdeg, wdeg)).unwrap_or(cfg.k.min);
            UsedDegrees { v: dv, k: dk, lambda: dl, l2 }
        }
        Fixed::KLambda { k, lambda } => {
            let dk = k.iter().map(Polynomial::degree).max().unwrap_or(1).max(1);
            let dl = lambda.degree();
            let dv = (cfg.v.min.max(2)..=cfg.v.max).rev().find(|&dv| degrees_fit(dv, dk, dl, l2, zdeg, wdeg));
            let dv = dv.ok_or_else(|| {
                Error::DegreeMismatch(format!("no V degree in {:?} fits lambda of degree {dl} and k of degree {dk}", cfg.v))
            })?;
            UsedDegrees { v: dv, k: dk, lambda: dl, l2 }
        }
    };
    debug!("degree windows {cfg:?} fitted to {used:?}");
    Ok(used)
}

/// Multiplier basis of degrees `2..=hi` (even top degree). `V(0) = 0` forces
/// `s(0) = 0`, so there is no constant term; `None` when `hi < 2`.
fn multiplier_basis(nvars: usize, hi: u32) -> Option<MonomialBasis> {
    (hi >= 2).then(|| MonomialBasis::degree_range(nvars, 2, hi - hi % 2))
}

/// Global conditions with one side fixed.
pub fn build_global_program(
    set: &MatrixEllipsoid,
    regs: &Regressors,
    degrees: &DegreeConfig,
    design: &PolyDesign,
    fixed: &Fixed,
) -> Result<PolyProgram> {
    build_program(set, regs, degrees, design, None, fixed)
}

/// Local conditions on `{ℓ0 ≤ c}` with multipliers `s1`, `s2 ∈ S`.
pub fn build_local_program(
    set: &MatrixEllipsoid,
    regs: &Regressors,
    degrees: &DegreeConfig,
    design: &PolyDesign,
    region: &LocalRegion,
    fixed: &Fixed,
) -> Result<PolyProgram> {
    if !(region.c > 0.0) {
        return Err(Error::Domain(format!("level c must be positive, got {}", region.c)));
    }
    build_program(set, regs, degrees, design, Some(region), fixed)
}

fn build_program(
    set: &MatrixEllipsoid,
    regs: &Regressors,
    degrees: &DegreeConfig,
    design: &PolyDesign,
    region: Option<&LocalRegion>,
    fixed: &Fixed,
) -> Result<PolyProgram> {
    let n = set.n();
    let p = set.p();
    let nv = regs.z.nvars();
    let m = regs.w.cols();
    if nv != n {
        return Err(Error::Dimension(format!("regressors use {nv} variables, the set has {n} outputs")));
    }
    if regs.width() != p {
        return Err(Error::Dimension(format!("regressors have width {}, the set has {p} rows", regs.width())));
    }
    if design.l1.nvars() != n || design.l2_floor.nvars() != n || region.is_some_and(|r| r.l0.nvars() != n) {
        return Err(Error::Dimension("design polynomials use a different variable count".into()));
    }
    match fixed {
        Fixed::V(v) if v.nvars() != n => return Err(Error::Dimension("fixed V has the wrong variable count".into())),
        Fixed::KLambda { k, lambda } if k.len() != m || lambda.nvars() != n || k.iter().any(|q| q.nvars() != n) => {
            return Err(Error::Dimension(format!("fixed k must have {m} entries in {n} variables")))
        }
        _ => {}
    }
    let used = fit_degrees(degrees, fixed, regs)?;
    let mut sos = SosProgram::new(n);

    let (v_h, v_lin) = match fixed {
        Fixed::V(v) => (Err(v.clone()), Lin::Known(v.clone())),
        _ => {
            let dp = sos.new_poly(MonomialBasis::degree_range(n, degrees.v.min.max(2), used.v));
            let a = dp.affine();
            (Ok(dp), Lin::Affine(a))
        }
    };
    let (k_h, k_lin): (Handle<Vec<DecisionPoly>, Vec<Polynomial>>, Vec<Lin>) = match fixed {
        Fixed::KLambda { k, .. } => (Err(k.clone()), k.iter().cloned().map(Lin::Known).collect()),
        _ => {
            let dps: Vec<DecisionPoly> =
                (0..m).map(|_| sos.new_poly(MonomialBasis::degree_range(n, degrees.k.min.max(1), used.k))).collect();
            let lins = dps.iter().map(|d| Lin::Affine(d.affine())).collect();
            (Ok(dps), lins)
        }
    };
    let (lam_h, lam_lin) = match fixed {
        Fixed::KLambda { lambda, .. } => (Err(lambda.clone()), Lin::Known(lambda.clone())),
        _ => {
            let dp = sos.new_poly(MonomialBasis::degree_range(n, degrees.lambda.min.min(used.lambda), used.lambda));
            let a = dp.affine();
            (Ok(dp), Lin::Affine(a))
        }
    };
    let l2 = sos.new_poly(MonomialBasis::degree_range(n, degrees.l2.min, used.l2));
    let l2_aff = l2.affine();

    let grad: Vec<Lin> = match &v_lin {
        Lin::Known(v) => v.grad().into_iter().map(Lin::Known).collect(),
        Lin::Affine(a) => (0..n).map(|i| Lin::Affine(a.derivative(i))).collect(),
    };

    // φ = [Z; W k]
    let mut phi: Vec<Lin> = (0..regs.z.rows()).map(|i| Lin::Known(regs.z.get(i, 0).clone())).collect();
    for r in 0..regs.w.rows() {
        let terms = (0..m)
            .map(|j| Ok((1.0, Lin::Known(regs.w.get(r, j).clone()).product(&k_lin[j])?)))
            .collect::<Result<Vec<_>>>()?;
        phi.push(lin_sum(nv, terms));
    }

    let zc = set.center();
    let a_is = set.a_inv_sqrt()?;
    let q_half = set.shape_sqrt()?;

    // ∇V Zcᵀ φ = Σ_j ∂_j V · (Σ_i Zc[i,j] φ_i)
    let mut drift = AffinePoly::zero(n);
    for (j, g) in grad.iter().enumerate() {
        let zphi = lin_sum(nv, (0..p).map(|i| (zc[(i, j)], phi[i].clone())));
        drift = drift.add(&g.mul(&zphi)?);
    }
    let dim = 1 + p + n;
    let mut entries = vec![vec![AffinePoly::zero(n); dim]; dim];
    let mut e00 = l2_aff.add(&drift).scale(-1.0);
    let mut s2_h = None;
    if let Some(r) = region {
        let d1 = used.l2.max(used.v - 1 + regs.z.degree().max(regs.w.degree() + used.k));
        if let Some(basis) = multiplier_basis(n, d1.saturating_sub(r.l0.degree())) {
            let s2 = sos.new_poly(basis);
            let shifted = r.l0.add(&Polynomial::constant(n, -r.c));
            e00 = e00.add(&s2.affine().mul_poly(&shifted));
            sos.add_sos("s2", s2.affine())?;
            s2_h = Some(s2);
        }
    }
    entries[0][0] = e00;
    for i in 0..p {
        let row = lin_sum(nv, (0..p).map(|l| (a_is.as_matrix()[(i, l)], phi[l].clone())));
        entries[0][1 + i] = row.affine().scale(-1.0);
        entries[1 + i][1 + i] = lam_lin.affine();
    }
    for j in 0..n {
        let qg = lin_sum(nv, (0..n).map(|l| (q_half.as_matrix()[(j, l)], grad[l].clone())));
        entries[0][1 + p + j] = lam_lin.mul(&qg)?.scale(-1.0);
        entries[1 + p + j][1 + p + j] = lam_lin.affine().scale(4.0);
    }
    sos.add_matrix_sos("decrease", entries, None)?;

    let mut s1_h = None;
    let mut positivity = v_lin.affine().add_poly(&design.l1.scale(-1.0));
    if let Some(r) = region {
        if let Some(basis) = multiplier_basis(n, used.v.saturating_sub(r.l0.degree())) {
            let s1 = sos.new_poly(basis);
            let shifted = r.l0.add(&Polynomial::constant(n, -r.c));
            positivity = positivity.add(&s1.affine().mul_poly(&shifted));
            sos.add_sos("s1", s1.affine())?;
            s1_h = Some(s1);
        }
    }
    sos.add_sos("positivity", positivity)?;
    sos.add_sos("multiplier", lam_lin.affine().add_poly(&Polynomial::constant(n, -design.eps_lambda)))?;
    sos.add_sos("l2", l2_aff.add_poly(&design.l2_floor.scale(-1.0)))?;

    Ok(PolyProgram {
        sos,
        degrees: used,
        v: v_h,
        k: k_h,
        lambda: lam_h,
        l2,
        s1: s1_h,
        s2: s2_h,
        l1: design.l1.clone(),
        eps_lambda: design.eps_lambda,
        region: region.cloned(),
    })
}

/// Configuration of the alternation.
#[derive(Clone, Debug)]
pub struct AlternationConfig {
    pub degrees: DegreeConfig,
    pub design: PolyDesign,
    /// Iteration cap; each iteration solves a `(k, λ)` program and a `V` program.
    pub max_iters: usize,
    pub initial_v: Polynomial,
    /// Keep iterating up to the cap after the first certificate.
    pub run_all: bool,
    pub region: Option<LocalRegion>,
    pub solver: SolverOptions,
}

impl AlternationConfig {
    pub fn new(initial_v: Polynomial) -> Self {
        let n = initial_v.nvars();
        AlternationConfig {
            degrees: DegreeConfig::default(),
            design: PolyDesign::standard(n),
            max_iters: 15,
            initial_v,
            run_all: false,
            region: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Outcome of one half-step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step: String,
    pub feasible: bool,
    pub margin: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct AlternationOutcome {
    pub certificate: Option<PolyCertificate>,
    pub history: Vec<StepRecord>,
    /// Lyapunov candidate at exit.
    pub last_v: Polynomial,
    /// Factor applied to the initial V so that it dominates `ℓ1`.
    pub initial_scale: f64,
}

impl AlternationOutcome {
    pub fn found(&self) -> bool {
        self.certificate.is_some()
    }

    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iteration + 1)
    }
}

/// Quadratic starting point `xᵀP⁻¹x` from the robust continuous-time LMI on
/// a consistency set of the linearized system, solved for maximal margin.
pub fn linear_initialization(linear_set: &MatrixEllipsoid, opts: &SolverOptions) -> Result<Polynomial> {
    let opts = SolverOptions { minimize_margin: true, ..opts.clone() };
    let cert = synth_ct(linear_set, LmiForm::BlockAbc, &opts)?;
    Ok(quadratic_form(&pd_inverse(&cert.p)?))
}

/// Smallest `2^j` with `2^j·V − ℓ1 ∈ S`. The decrease condition is invariant
/// under `(V, ℓ2, λ) → (cV, cℓ2, λ/c)`.
pub fn dominate_l1(v: &Polynomial, l1: &Polynomial, opts: &SolverOptions) -> Result<f64> {
    let mut c = 1.0;
    for _ in 0..60 {
        if sos_decompose(&v.scale(c).sub(l1), None, opts)?.is_some() {
            return Ok(c);
        }
        c *= 2.0;
    }
    Err(Error::DegenerateInput("initial V does not dominate l1 after any scaling".into()))
}

fn record(history: &mut Vec<StepRecord>, iteration: usize, step: &str, res: &Result<PolyCertificate>, t: Instant) {
    let margin = match res {
        Err(Error::SolverInfeasible { margin }) => Some(*margin),
        _ => None,
    };
    info!("iteration {iteration} {step}: {}", if res.is_ok() { "feasible" } else { "infeasible" });
    history.push(StepRecord {
        iteration,
        step: step.to_string(),
        feasible: res.is_ok(),
        margin,
        seconds: t.elapsed().as_secs_f64(),
    });
}

/// Alternates a `(k, λ, ℓ2)` program with `V` fixed and a `(V, ℓ2)` program
/// with `(k, λ)` fixed, starting from `config.initial_v`.
pub fn alternate_synthesis(set: &MatrixEllipsoid, regs: &Regressors, config: &AlternationConfig) -> Result<AlternationOutcome> {
    config.degrees.validate()?;
    let mut history = Vec::new();
    if config.max_iters == 0 {
        return Ok(AlternationOutcome { certificate: None, history, last_v: config.initial_v.clone(), initial_scale: 1.0 });
    }
    let scale = dominate_l1(&config.initial_v, &config.design.l1, &config.solver)?;
    if scale != 1.0 {
        info!("initial V scaled by {scale} to dominate l1");
    }
    let mut v = config.initial_v.scale(scale);
    let mut best: Option<PolyCertificate> = None;
    let build = |fixed: &Fixed| match &config.region {
        Some(r) => build_local_program(set, regs, &config.degrees, &config.design, r, fixed),
        None => build_global_program(set, regs, &config.degrees, &config.design, fixed),
    };
    for it in 0..config.max_iters {
        let t = Instant::now();
        let kstep = build(&Fixed::V(v.clone()))?.solve(&config.solver);
        record(&mut history, it, "k-lambda", &kstep, t);
        let cert = match kstep {
            Ok(c) => c,
            Err(Error::SolverInfeasible { .. }) | Err(Error::NumericalFailure(_)) => break,
            Err(e) => return Err(e),
        };
        let fixed = Fixed::KLambda { k: cert.k.clone(), lambda: cert.lambda.clone() };
        best = Some(cert);
        let t = Instant::now();
        let vstep = build(&fixed)?.solve(&config.solver);
        record(&mut history, it, "V", &vstep, t);
        match vstep {
            Ok(c) => {
                v = c.v.clone();
                best = Some(c);
            }
            Err(Error::SolverInfeasible { .. }) | Err(Error::NumericalFailure(_)) => {}
            Err(e) => return Err(e),
        }
        if !config.run_all {
            break;
        }
    }
    Ok(AlternationOutcome { certificate: best, history, last_v: v, initial_scale: scale })
}

/// Decrease matrix at one state, from the values `φ(x)`, `∇V(x)`, `ℓ2(x)`, `λ(x)`.
pub fn decrease_matrix_at(set: &MatrixEllipsoid, phi: &DVector<f64>, grad: &DVector<f64>, l2: f64, lambda: f64) -> Result<DMatrix<f64>> {
    let (p, n) = (set.p(), set.n());
    let dim = 1 + p + n;
    let a_phi = set.a_inv_sqrt()?.as_matrix() * phi;
    let q_g = set.shape_sqrt()?.as_matrix() * grad * lambda;
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = l2 + grad.dot(&(set.center().transpose() * phi));
    for i in 0..p {
        m[(1 + i, 0)] = a_phi[i];
        m[(0, 1 + i)] = a_phi[i];
        m[(1 + i, 1 + i)] = -lambda;
    }
    for j in 0..n {
        m[(1 + p + j, 0)] = q_g[j];
        m[(0, 1 + p + j)] = q_g[j];
        m[(1 + p + j, 1 + p + j)] = -4.0 * lambda;
    }
    Ok(m)
}

/// `∇V Zcᵀφ + ℓ2 + φᵀ𝐀⁻¹φ/λ + λ∇VQ∇Vᵀ/4`, the Schur complement of the decrease matrix.
pub fn decrease_scalar_at(set: &MatrixEllipsoid, phi: &DVector<f64>, grad: &DVector<f64>, l2: f64, lambda: f64) -> Result<f64> {
    let a_phi = set.a_inv_sqrt()?.as_matrix() * phi;
    let q_g = set.shape_sqrt()?.as_matrix() * grad;
    Ok(grad.dot(&(set.center().transpose() * phi)) + l2 + a_phi.norm_squared() / lambda + lambda * q_g.norm_squared() / 4.0)
}

/// Square grid `[lo, hi]^n` with `points` samples per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lo: -2.0, hi: 2.0, points: 21 }
    }
}

impl GridSpec {
    pub fn nodes(&self, n: usize) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = if self.points <= 1 {
            vec![0.5 * (self.lo + self.hi)]
        } else {
            (0..self.points).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64).collect()
        };
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out.into_iter().flat_map(|pt| axis.iter().map(move |&a| [pt.clone(), vec![a]].concat())).collect();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyReport {
    pub points: usize,
    pub models: usize,
    /// `min (V − ℓ1)` over the grid.
    pub positivity_margin: f64,
    /// `min (λ − ελ)` over the grid.
    pub multiplier_margin: f64,
    /// `max (⟨∇V, f⟩ + ℓ2)` over grid points and sampled models.
    pub worst_decrease: f64,
    /// Same maximum at the pointwise worst-case members.
    pub worst_case_decrease: f64,
    pub violations: usize,
}

impl PolyReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// `φ(x) = [Z(x); W(x)k(x)]`.
pub fn phi_at(regs: &Regressors, k: &[Polynomial], x: &[f64]) -> DVector<f64> {
    let kv = DVector::from_iterator(k.len(), k.iter().map(|q| q.eval(x)));
    let u_part = regs.w.eval(x) * kv;
    let z = regs.z.eval(x);
    DVector::from_iterator(z.nrows() + u_part.nrows(), z.iter().copied().chain(u_part.iter().copied()))
}

/// Grid and model-sample check of `V ≥ ℓ1`, `λ ≥ ελ` and `⟨∇V, f⟩ ≤ −ℓ2`.
/// In the local variant only grid points with `ℓ0 ≤ c` are checked.
pub fn verify_poly(
    set: &MatrixEllipsoid,
    regs: &Regressors,
    cert: &PolyCertificate,
    grid: &GridSpec,
    samples: usize,
    seed: u64,
) -> Result<PolyReport> {
    let n = cert.nvars();
    let mut models: Vec<DMatrix<f64>> = vec![set.center().clone()];
    let half = samples.div_ceil(2);
    models.extend(set.sample(half, SampleMode::Boundary, seed)?.into_iter().map(|m| m.z));
    models.extend(set.sample(samples - half, SampleMode::Interior, seed + 1)?.into_iter().map(|m| m.z));
    let grad = cert.v.grad();
    let a_is = set.a_inv_sqrt()?;
    let q_half = set.shape_sqrt()?;
    let mut report = PolyReport {
        points: 0,
        models: models.len(),
        positivity_margin: f64::INFINITY,
        multiplier_margin: f64::INFINITY,
        worst_decrease: f64::NEG_INFINITY,
        worst_case_decrease: f64::NEG_INFINITY,
        violations: 0,
    };
    for x in grid.nodes(n) {
        if let Some(l) = &cert.local {
            if l.l0.eval(&x) > l.c {
                continue;
            }
        }
        report.points += 1;
        let vx = cert.v.eval(&x);
        let pos = vx - cert.l1.eval(&x);
        let mul = cert.lambda.eval(&x) - cert.eps_lambda;
        let tol = 1e-9 * (1.0 + vx.abs());
        if pos < -tol || mul < -1e-9 {
            report.violations += 1;
        }
        report.positivity_margin = report.positivity_margin.min(pos);
        report.multiplier_margin = report.multiplier_margin.min(mul);
        let phi = phi_at(regs, &cert.k, &x);
        let g = DVector::from_iterator(n, grad.iter().map(|q| q.eval(&x)));
        let l2 = cert.l2.eval(&x);
        let check = |z: &DMatrix<f64>| {
            let f = z.transpose() * &phi;
            let val = g.dot(&f) + l2;
            let scale = g.norm() * f.norm() + l2.abs();
            (val, val > 1e-9 * (1.0 + scale))
        };
        for z in &models {
            let (val, bad) = check(z);
            report.worst_decrease = report.worst_decrease.max(val);
            if bad {
                report.violations += 1;
            }
        }
        let a = a_is.as_matrix() * &phi;
        let b = q_half.as_matrix() * &g;
        let zw = match worst_case_pair(a.as_slice(), b.as_slice(), &DMatrix::identity(n, n)) {
            Ok(ups) => set.point_from_upsilon(&ups)?,
            Err(_) => set.center().clone(),
        };
        let (val, bad) = check(&zw);
        report.worst_case_decrease = report.worst_case_decrease.max(val);
        if bad {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `max eig` of the decrease matrix over grid points, a pointwise check of `−M ⪰ 0`.
pub fn decrease_matrix_margin(set: &MatrixEllipsoid, regs: &Regressors, cert: &PolyCertificate, grid: &GridSpec) -> Result<f64> {
    let n = cert.nvars();
    let grad = cert.v.grad();
    let mut worst = f64::NEG_INFINITY;
    for x in grid.nodes(n) {
        let phi = phi_at(regs, &cert.k, &x);
        let g = DVector::from_iterator(n, grad.iter().map(|q| q.eval(&x)));
        let m = decrease_matrix_at(set, &phi, &g, cert.l2.eval(&x), cert.lambda.eval(&x))?;
        worst = worst.max(max_eig(&SymMatrix::new(m))?);
    }
    Ok(worst)
}

/// `[A B]ᵀ` regressor map as a matrix polynomial, for reporting.
pub fn closed_loop_field(z: &DMatrix<f64>, regs: &Regressors, k: &[Polynomial]) -> Result<Vec<Polynomial>> {
    let n = z.ncols();
    let nv = regs.z.nvars();
    let m = regs.w.cols();
    let mut phi: Vec<Polynomial> = (0..regs.z.rows()).map(|i| regs.z.get(i, 0).clone()).collect();
    for r in 0..regs.w.rows() {
        phi.push((0..m).fold(Polynomial::zero(nv), |acc, j| acc.add(&regs.w.get(r, j).mul(&k[j]))));
    }
    let zt = MatrixPolynomial::from_rows(
        (0..n).map(|j| (0..phi.len()).map(|i| Polynomial::constant(nv, z[(i, j)])).collect()).collect(),
    )?;
    zt.mul_vec(&phi)
}
