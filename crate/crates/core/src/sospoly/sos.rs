//! Sum-of-squares constraints compiled to LMIs.
//!
//! A (matrix) polynomial `M(x)` is SOS when `M_ij(x) = z_i(x)ᵀ G_ij z_j(x)`
//! for a PSD Gram matrix `G = [G_ij]`, where `z_i` is the monomial basis of
//! row `i`. Coefficient matching gives linear equalities between the Gram
//! entries and the decision coefficients. Every Gram entry appears in exactly
//! one equality, so each equality that contains Gram entries is solved for one
//! of them; the remaining equalities involve decision coefficients only and
//! are eliminated through an SVD nullspace. What is left is a set of LMIs
//! `G(w) ⪰ 0` in free coordinates `w`.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{self, LmiBlock, SdpProblem, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::numkern::{matrix_to_rows, min_eig, rows_to_matrix, SymMatrix};
use crate::sospoly::poly::{MatrixPolynomial, Monomial, MonomialBasis, Polynomial};

/// `c(x) + Σ_v d_v · c_v(x)`: a polynomial affine in decision variables `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly {
    nvars: usize,
    constant: Polynomial,
    terms: BTreeMap<usize, Polynomial>,
}

impl AffinePoly {
    pub fn zero(nvars: usize) -> Self {
        AffinePoly { nvars, constant: Polynomial::zero(nvars), terms: BTreeMap::new() }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        AffinePoly { nvars: p.nvars(), constant: p, terms: BTreeMap::new() }
    }

    /// `d_var · p(x)`.
    pub fn term(var: usize, p: Polynomial) -> Self {
        let mut out = Self::zero(p.nvars());
        out.terms.insert(var, p);
        out
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constant_part(&self) -> &Polynomial {
        &self.constant
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().copied()
    }

    pub fn add(&self, other: &AffinePoly) -> AffinePoly {
        let mut out = self.clone();
        out.constant = out.constant.add(&other.constant);
        for (&v, p) in &other.terms {
            let e = out.terms.entry(v).or_insert_with(|| Polynomial::zero(self.nvars));
            *e = e.add(p);
        }
        out.terms.retain(|_, p| !p.is_zero());
        out
    }

    pub fn add_poly(&self, p: &Polynomial) -> AffinePoly {
        let mut out = self.clone();
        out.constant = out.constant.add(p);
        out
    }

    pub fn sub(&self, other: &AffinePoly) -> AffinePoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> AffinePoly {
        AffinePoly {
            nvars: self.nvars,
            constant: self.constant.scale(s),
            terms: self.terms.iter().map(|(&v, p)| (v, p.scale(s))).filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn mul_poly(&self, q: &Polynomial) -> AffinePoly {
        AffinePoly {
            nvars: self.nvars,
            constant: self.constant.mul(q),
            terms: self.terms.iter().map(|(&v, p)| (v, p.mul(q))).filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn derivative(&self, i: usize) -> AffinePoly {
        AffinePoly {
            nvars: self.nvars,
            constant: self.constant.derivative(i),
            terms: self.terms.iter().map(|(&v, p)| (v, p.derivative(i))).filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    /// The polynomial obtained at decision values `d`.
    pub fn evaluate(&self, d: &[f64]) -> Polynomial {
        self.terms.iter().fold(self.constant.clone(), |acc, (&v, p)| acc.add(&p.scale(d[v])))
    }

    /// Every monomial that can carry a nonzero coefficient.
    pub fn support(&self) -> BTreeSet<Monomial> {
        let mut s: BTreeSet<Monomial> = self.constant.terms().map(|(m, _)| m.clone()).collect();
        for p in self.terms.values() {
            s.extend(p.terms().map(|(m, _)| m.clone()));
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.terms.is_empty()
    }

    /// Coefficient of `m` as `(constant, [(var, coef)])`.
    fn coefficient(&self, m: &Monomial) -> (f64, Vec<(usize, f64)>) {
        let lin = self
            .terms
            .iter()
            .map(|(&v, p)| (v, p.coefficient(m)))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        (self.constant.coefficient(m), lin)
    }
}

/// A decision polynomial `Σ d_{offset+i} · basis_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionPoly {
    pub basis: MonomialBasis,
    pub offset: usize,
}

impl DecisionPoly {
    pub fn affine(&self) -> AffinePoly {
        let n = self.basis.nvars();
        self.basis.monomials().iter().enumerate().fold(AffinePoly::zero(n), |acc, (i, m)| {
            acc.add(&AffinePoly::term(self.offset + i, Polynomial::monomial(n, m.clone(), 1.0)))
        })
    }

    pub fn value(&self, d: &[f64]) -> Polynomial {
        Polynomial::from_basis(&self.basis, &d[self.offset..self.offset + self.basis.len()])
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Row bases from the half-degree range of each diagonal entry.
pub fn auto_bases(entries: &[Vec<AffinePoly>]) -> Vec<MonomialBasis> {
    entries
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let diag = &row[i];
            let sup = diag.support();
            let nv = diag.nvars();
            if sup.is_empty() {
                return MonomialBasis::from_monomials(nv, vec![]);
            }
            let lo = sup.iter().map(Monomial::degree).min().unwrap_or(0);
            let hi = sup.iter().map(Monomial::degree).max().unwrap_or(0);
            if lo.div_ceil(2) > hi / 2 {
                return MonomialBasis::from_monomials(nv, vec![]);
            }
            MonomialBasis::degree_range(nv, lo.div_ceil(2), hi / 2)
        })
        .collect()
}

/// One SOS membership: `entries` (symmetric, square) with per-row bases.
#[derive(Clone, Debug)]
pub struct SosConstraint {
    pub name: String,
    pub entries: Vec<Vec<AffinePoly>>,
    pub bases: Vec<MonomialBasis>,
}

impl SosConstraint {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    fn gram_size(&self) -> usize {
        self.bases.iter().map(MonomialBasis::len).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.bases
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.len();
                Some(o)
            })
            .collect()
    }
}

/// PSD Gram witness for a (matrix) polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCertificate {
    pub bases: Vec<MonomialBasis>,
    pub gram: SymMatrix,
    pub target: MatrixPolynomial,
}

#[derive(Serialize, Deserialize)]
struct GramJson {
    bases: Vec<Vec<Vec<u32>>>,
    gram: Vec<Vec<f64>>,
    target: Vec<Vec<String>>,
}

impl GramCertificate {
    /// `M_ij = z_iᵀ G_ij z_j` rebuilt from the Gram matrix.
    pub fn reconstruct(&self) -> MatrixPolynomial {
        let nv = self.target.nvars();
        let dim = self.bases.len();
        let mut offs = Vec::with_capacity(dim);
        let mut acc = 0;
        for b in &self.bases {
            offs.push(acc);
            acc += b.len();
        }
        let mut out = MatrixPolynomial::zeros(nv, dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut p = Polynomial::zero(nv);
                for (a, ma) in self.bases[i].monomials().iter().enumerate() {
                    for (b, mb) in self.bases[j].monomials().iter().enumerate() {
                        p.add_term(ma.mul(mb), self.gram[(offs[i] + a, offs[j] + b)]);
                    }
                }
                out.set(i, j, p);
            }
        }
        out
    }

    /// Largest coefficient mismatch between the Gram form and the target.
    pub fn residual(&self) -> f64 {
        let rec = self.reconstruct();
        let dim = self.bases.len();
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                worst = worst.max(rec.get(i, j).max_coef_diff(self.target.get(i, j)));
            }
        }
        worst
    }

    pub fn min_eig(&self) -> f64 {
        if self.gram.dim() == 0 {
            return 0.0;
        }
        min_eig(&self.gram).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_valid(&self, coef_tol: f64, eig_tol: f64) -> bool {
        self.residual() <= coef_tol && self.min_eig() >= -eig_tol
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(GramJson {
            bases: self.bases.iter().map(|b| b.monomials().iter().map(|m| m.0.clone()).collect()).collect(),
            gram: matrix_to_rows(self.gram.as_matrix()),
            target: self.target.to_strings(),
        })?)
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let j: GramJson = serde_json::from_value(v.clone())?;
        let target = MatrixPolynomial::from_strings(&j.target, first_arity(&j.bases).unwrap_or(0))?;
        let nv = target.nvars();
        let bases =
            j.bases.into_iter().map(|b| MonomialBasis::from_monomials(nv, b.into_iter().map(Monomial).collect())).collect();
        let gram = if j.gram.is_empty() { SymMatrix::zeros(0) } else { SymMatrix::try_new(rows_to_matrix(&j.gram)?)? };
        Ok(GramCertificate { bases, gram, target })
    }
}

fn first_arity(bases: &[Vec<Vec<u32>>]) -> Option<usize> {
    bases.iter().flatten().next().map(Vec::len)
}

/// Decision polynomials plus SOS memberships.
#[derive(Clone, Debug)]
pub struct SosProgram {
    nvars: usize,
    num_dec: usize,
    constraints: Vec<SosConstraint>,
    /// Gram matrices are constrained to `G ⪰ margin·I`.
    pub gram_margin: f64,
}

/// Decision values and Gram witnesses of a solved program.
#[derive(Clone, Debug)]
pub struct SosSolution {
    pub decision: Vec<f64>,
    pub grams: Vec<GramCertificate>,
    pub margin: f64,
    pub iterations: usize,
}

/// Affine map from free coordinates to raw variables (decision then Gram).
struct Reduction {
    constant: Vec<f64>,
    coefs: Vec<Vec<(usize, f64)>>,
    num_free: usize,
}

impl Reduction {
    fn raw(&self, w: &[f64]) -> Vec<f64> {
        self.constant
            .iter()
            .zip(&self.coefs)
            .map(|(c, row)| c + row.iter().map(|&(k, a)| a * w[k]).sum::<f64>())
            .collect()
    }
}

/// Compiled program: the LMIs in free coordinates and the map back.
pub struct CompiledSos {
    pub sdp: SdpProblem,
    reduction: Reduction,
    gram_offsets: Vec<usize>,
}

impl CompiledSos {
    pub fn num_free(&self) -> usize {
        self.reduction.num_free
    }
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram { nvars, num_dec: 0, constraints: Vec::new(), gram_margin: 0.0 }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_decision(&self) -> usize {
        self.num_dec
    }

    pub fn constraints(&self) -> &[SosConstraint] {
        &self.constraints
    }

    pub fn new_poly(&mut self, basis: MonomialBasis) -> DecisionPoly {
        let p = DecisionPoly { basis, offset: self.num_dec };
        self.num_dec += p.len();
        p
    }

    /// Scalar membership `p ∈ S` with an automatic basis.
    pub fn add_sos(&mut self, name: &str, p: AffinePoly) -> Result<usize> {
        self.add_matrix_sos(name, vec![vec![p]], None)
    }

    /// Matrix membership `M ∈ S_m`; only the upper triangle of `entries` is read.
    pub fn add_matrix_sos(&mut self, name: &str, entries: Vec<Vec<AffinePoly>>, bases: Option<Vec<MonomialBasis>>) -> Result<usize> {
        let dim = entries.len();
        if dim == 0 || entries.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!("SOS constraint {name} must be square and non-empty")));
        }
        if entries.iter().flatten().any(|p| p.nvars() != self.nvars) {
            return Err(Error::Dimension(format!("SOS constraint {name} uses a different variable count")));
        }
        let mut sym = entries;
        for i in 0..dim {
            for j in 0..i {
                sym[i][j] = sym[j][i].clone();
            }
        }
        let bases = match bases {
            Some(b) if b.len() == dim => b,
            Some(_) => return Err(Error::Dimension(format!("SOS constraint {name} needs one basis per row"))),
            None => auto_bases(&sym),
        };
        self.constraints.push(SosConstraint { name: name.to_string(), entries: sym, bases });
        Ok(self.constraints.len() - 1)
    }

    /// Coefficient-matching equalities, eliminated down to free coordinates.
    pub fn compile(&self) -> Result<CompiledSos> {
        let nd = self.num_dec;
        let mut gram_offsets = Vec::with_capacity(self.constraints.len());
        let mut num_raw = nd;
        for c in &self.constraints {
            gram_offsets.push(num_raw);
            let g = c.gram_size();
            num_raw += g * (g + 1) / 2;
        }
        let mut eqs: Vec<Eq> = Vec::new();
        for (ci, c) in self.constraints.iter().enumerate() {
            let offs = c.offsets();
            let g = c.gram_size();
            let base = gram_offsets[ci];
            let upper = |r: usize, s: usize| {
                let (r, s) = (r.min(s), r.max(s));
                base + r * g - r * (r + 1) / 2 + s
            };
            for i in 0..c.dim() {
                for j in i..c.dim() {
                    let mut by_mono: BTreeMap<Monomial, BTreeMap<usize, f64>> = BTreeMap::new();
                    for (a, ma) in c.bases[i].monomials().iter().enumerate() {
                        for (b, mb) in c.bases[j].monomials().iter().enumerate() {
                            *by_mono.entry(ma.mul(mb)).or_default().entry(upper(offs[i] + a, offs[j] + b)).or_insert(0.0) +=
                                1.0;
                        }
                    }
                    let entry = &c.entries[i][j];
                    let mut monos: BTreeSet<Monomial> = by_mono.keys().cloned().collect();
                    monos.extend(entry.support());
                    for m in monos {
                        let (c0, lin) = entry.coefficient(&m);
                        let gram: Vec<(usize, f64)> =
                            by_mono.get(&m).map(|e| e.iter().map(|(&k, &v)| (k, v)).collect()).unwrap_or_default();
                        if gram.is_empty() && lin.is_empty() && c0 == 0.0 {
                            continue;
                        }
                        eqs.push(Eq { gram, dec: lin.into_iter().map(|(v, a)| (v, -a)).collect(), rhs: c0 });
                    }
                }
            }
        }

        // Decision-only equalities: d = d0 + N w0.
        let dec_only: Vec<&Eq> = eqs.iter().filter(|e| e.gram.is_empty()).collect();
        let (d0, null) = solve_dec_system(&dec_only, nd)?;
        let nw0 = null.ncols();

        // Raw variables as affine functions of free coordinates.
        let mut pivot_of: Vec<Option<usize>> = vec![None; num_raw];
        for (ei, e) in eqs.iter().enumerate() {
            if e.gram.is_empty() {
                continue;
            }
            let (pv, _) = e.gram.iter().fold((e.gram[0].0, 0.0_f64), |best, &(k, a)| if a.abs() > best.1 { (k, a.abs()) } else { best });
            pivot_of[pv] = Some(ei);
        }
        let mut free_index = vec![usize::MAX; num_raw];
        let mut num_free = nw0;
        for k in nd..num_raw {
            if pivot_of[k].is_none() {
                free_index[k] = num_free;
                num_free += 1;
            }
        }
        let mut constant = vec![0.0; num_raw];
        let mut coefs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_raw];
        for v in 0..nd {
            constant[v] = d0[v];
            coefs[v] = (0..nw0).map(|k| (k, null[(v, k)])).filter(|&(_, a)| a != 0.0).collect();
        }
        for k in nd..num_raw {
            if pivot_of[k].is_none() {
                coefs[k] = vec![(free_index[k], 1.0)];
            }
        }
        for k in nd..num_raw {
            let Some(ei) = pivot_of[k] else { continue };
            let e = &eqs[ei];
            let piv = e.gram.iter().find(|&&(g, _)| g == k).map(|&(_, a)| a).unwrap_or(1.0);
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut cst = e.rhs;
            for &(g, a) in &e.gram {
                if g != k {
                    *acc.entry(free_index[g]).or_insert(0.0) -= a;
                }
            }
            for &(v, a) in &e.dec {
                cst -= a * constant[v];
                for &(fk, fa) in &coefs[v] {
                    *acc.entry(fk).or_insert(0.0) -= a * fa;
                }
            }
            constant[k] = cst / piv;
            coefs[k] = acc.into_iter().filter(|&(_, a)| a != 0.0).map(|(fk, a)| (fk, a / piv)).collect();
        }
        let reduction = Reduction { constant, coefs, num_free };

        // LMIs: −G(w) + margin·I ⪯ 0 for every constraint.
        let mut sdp = SdpProblem::new(num_free);
        for (ci, c) in self.constraints.iter().enumerate() {
            let g = c.gram_size();
            if g == 0 {
                continue;
            }
            let base = gram_offsets[ci];
            let mut blk = LmiBlock::new(g);
            let mut idx = base;
            for r in 0..g {
                for s in r..g {
                    blk.add_const(r, s, -reduction.constant[idx] + if r == s { self.gram_margin } else { 0.0 });
                    for &(fk, a) in &reduction.coefs[idx] {
                        blk.add_var(fk, r, s, -a);
                    }
                    idx += 1;
                }
            }
            sdp.add_block(blk);
        }
        debug!(
            "SOS program: {} decision, {} raw, {} equalities, {} free, Gram sizes {:?}",
            nd,
            num_raw,
            eqs.len(),
            num_free,
            self.constraints.iter().map(SosConstraint::gram_size).collect::<Vec<_>>()
        );
        Ok(CompiledSos { sdp, reduction, gram_offsets })
    }

    /// Compiles and solves; infeasibility is reported as [`Error::SolverInfeasible`].
    pub fn solve(&self, opts: &SolverOptions) -> Result<SosSolution> {
        let compiled = self.compile()?;
        let sol = conic::solve(&compiled.sdp, opts)?;
        match sol.status {
            SolveStatus::Feasible | SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::SolverInfeasible { margin: sol.margin }),
            SolveStatus::NumericalFailure => {
                return Err(Error::NumericalFailure(format!(
                    "SOS program: worst eigenvalue {:e}, margin {:e}",
                    sol.worst_eig, sol.margin
                )))
            }
        }
        let raw = compiled.reduction.raw(&sol.x);
        let decision = raw[..self.num_dec].to_vec();
        let grams = self
            .constraints
            .iter()
            .zip(&compiled.gram_offsets)
            .map(|(c, &base)| {
                let g = c.gram_size();
                let mut m = DMatrix::zeros(g, g);
                let mut idx = base;
                for r in 0..g {
                    for s in r..g {
                        m[(r, s)] = raw[idx];
                        m[(s, r)] = raw[idx];
                        idx += 1;
                    }
                }
                let dim = c.dim();
                let mut target = MatrixPolynomial::zeros(self.nvars, dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        target.set(i, j, c.entries[i][j].evaluate(&decision));
                    }
                }
                GramCertificate { bases: c.bases.clone(), gram: SymMatrix::new(m), target }
            })
            .collect();
        Ok(SosSolution { decision, grams, margin: sol.margin, iterations: sol.iterations })
    }
}

/// `Σ gram + Σ dec = rhs`.
struct Eq {
    gram: Vec<(usize, f64)>,
    dec: Vec<(usize, f64)>,
    rhs: f64,
}

/// Particular solution and nullspace of the decision-only equalities.
fn solve_dec_system(eqs: &[&Eq], nd: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if eqs.is_empty() || nd == 0 {
        if eqs.iter().any(|e| e.rhs.abs() > 1e-12) {
            return Err(Error::SolverInfeasible { margin: f64::INFINITY });
        }
        return Ok((DVector::zeros(nd), DMatrix::identity(nd, nd)));
    }
    let rows = eqs.len().max(nd);
    let mut d = DMatrix::zeros(rows, nd);
    let mut r = DVector::zeros(rows);
    for (i, e) in eqs.iter().enumerate() {
        for &(v, a) in &e.dec {
            d[(i, v)] += a;
        }
        r[i] = e.rhs;
    }
    let svd = d.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
    let smax: f64 = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let mut x0 = DVector::zeros(nd);
    let mut null_cols = Vec::new();
    for k in 0..nd {
        let s = svd.singular_values[k];
        if s > tol {
            let coef = u.column(k).dot(&r) / s;
            x0 += vt.row(k).transpose() * coef;
        } else {
            null_cols.push(vt.row(k).transpose());
        }
    }
    let resid = (&d * &x0 - &r).amax();
    if resid > 1e-8 * (1.0 + r.amax()) {
        debug!("decision equalities inconsistent (residual {resid:e})");
        return Err(Error::SolverInfeasible { margin: resid });
    }
    let null = if null_cols.is_empty() { DMatrix::zeros(nd, 0) } else { DMatrix::from_columns(&null_cols) };
    Ok((x0, null))
}

/// Gram decomposition of a scalar polynomial; `Ok(None)` when it is not SOS
/// over the basis (default: half-degree range of `p`).
pub fn sos_decompose(p: &Polynomial, basis: Option<&MonomialBasis>, opts: &SolverOptions) -> Result<Option<GramCertificate>> {
    if let Some(b) = basis {
        if p.degree() > 2 * b.max_degree() {
            return Err(Error::BasisTooSmall { target: p.degree(), basis: b.max_degree() });
        }
    }
    let mut prog = SosProgram::new(p.nvars());
    prog.add_matrix_sos("target", vec![vec![AffinePoly::from_poly(p.clone())]], basis.map(|b| vec![b.clone()]))?;
    finish_decompose(prog, opts)
}

/// Matrix version of [`sos_decompose`] with automatic per-row bases.
pub fn sos_decompose_matrix(m: &MatrixPolynomial, opts: &SolverOptions) -> Result<Option<GramCertificate>> {
    if m.rows() != m.cols() {
        return Err(Error::Dimension("SOS target must be square".into()));
    }
    let entries = (0..m.rows()).map(|i| (0..m.cols()).map(|j| AffinePoly::from_poly(m.get(i, j).clone())).collect()).collect();
    let mut prog = SosProgram::new(m.nvars());
    prog.add_matrix_sos("target", entries, None)?;
    finish_decompose(prog, opts)
}

/// Rank-deficient Grams sit on the boundary of the cone, so phase 1 is driven
/// to a much smaller gap before deciding.
fn finish_decompose(prog: SosProgram, opts: &SolverOptions) -> Result<Option<GramCertificate>> {
    let opts = SolverOptions { gap_tol: opts.gap_tol.min(1e-11), max_iters: opts.max_iters.max(300), ..opts.clone() };
    match prog.solve(&opts) {
        Ok(mut sol) => Ok(Some(sol.grams.remove(0))),
        Err(Error::SolverInfeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn perfect_square() {
        let p = Polynomial::from_terms(1, &[(&[2], 1.0), (&[1], -2.0), (&[0], 1.0)]);
        let basis = MonomialBasis::up_to(1, 1);
        let cert = sos_decompose(&p, Some(&basis), &opts()).unwrap().expect("SOS");
        assert!(cert.residual() < 1e-9);
        assert!(cert.min_eig() >= -1e-8);
        let g = cert.gram.as_matrix();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-7 && (g[(0, 1)] + 1.0).abs() < 1e-7 && (g[(1, 1)] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn odd_polynomial_is_not_sos() {
        let p = Polynomial::var(1, 0);
        assert!(sos_decompose(&p, Some(&MonomialBasis::up_to(1, 1)), &opts()).unwrap().is_none());
        assert!(sos_decompose(&p, None, &opts()).unwrap().is_none());
    }

    #[test]
    fn motzkin_is_not_sos() {
        let p = Polynomial::from_terms(2, &[(&[4, 2], 1.0), (&[2, 4], 1.0), (&[2, 2], -3.0), (&[0, 0], 1.0)]);
        assert!(sos_decompose(&p, Some(&MonomialBasis::up_to(2, 3)), &opts()).unwrap().is_none());
    }

    #[test]
    fn basis_too_small() {
        let p = Polynomial::from_terms(1, &[(&[4], 1.0)]);
        assert!(matches!(
            sos_decompose(&p, Some(&MonomialBasis::up_to(1, 1)), &opts()),
            Err(Error::BasisTooSmall { target: 4, basis: 1 })
        ));
    }

    #[test]
    fn matrix_sos() {
        // [[1+x², x], [x, 1+x²]] = [1 x; x 1]-ish sums of squares.
        let one_x2 = Polynomial::from_terms(1, &[(&[0], 1.0), (&[2], 1.0)]);
        let x = Polynomial::var(1, 0);
        let m = MatrixPolynomial::from_rows(vec![vec![one_x2.clone(), x.clone()], vec![x, one_x2]]).unwrap();
        let cert = sos_decompose_matrix(&m, &opts()).unwrap().expect("matrix SOS");
        assert!(cert.is_valid(1e-7, 1e-8));
        let bad = MatrixPolynomial::from_rows(vec![
            vec![Polynomial::constant(1, 1.0), Polynomial::constant(1, 2.0)],
            vec![Polynomial::constant(1, 2.0), Polynomial::constant(1, 1.0)],
        ])
        .unwrap();
        assert!(sos_decompose_matrix(&bad, &opts()).unwrap().is_none());
    }

    #[test]
    fn decision_variables_are_solved() {
        // Find c with x² + c·x + 1 SOS and c ≥ 1.5 via (c − 1.5) ∈ S.
        let mut prog = SosProgram::new(1);
        let c = prog.new_poly(MonomialBasis::from_monomials(1, vec![Monomial::one(1)]));
        let cx = c.affine().mul_poly(&Polynomial::var(1, 0));
        let target = cx.add_poly(&Polynomial::from_terms(1, &[(&[2], 1.0), (&[0], 1.0)]));
        prog.add_sos("quad", target).unwrap();
        prog.add_sos("lower", c.affine().add_poly(&Polynomial::constant(1, -1.5))).unwrap();
        let sol = prog.solve(&opts()).unwrap();
        let cv = sol.decision[0];
        assert!((1.5 - 1e-7..=2.0 + 1e-7).contains(&cv), "c = {cv}");
        assert!(sol.grams.iter().all(|g| g.is_valid(1e-7, 1e-8)));
        // c ≥ 2.5 is impossible.
        let mut prog = SosProgram::new(1);
        let c = prog.new_poly(MonomialBasis::from_monomials(1, vec![Monomial::one(1)]));
        let cx = c.affine().mul_poly(&Polynomial::var(1, 0));
        prog.add_sos("quad", cx.add_poly(&Polynomial::from_terms(1, &[(&[2], 1.0), (&[0], 1.0)]))).unwrap();
        prog.add_sos("lower", c.affine().add_poly(&Polynomial::constant(1, -2.5))).unwrap();
        assert!(matches!(prog.solve(&opts()), Err(Error::SolverInfeasible { .. })));
    }

    #[test]
    fn gram_json_round_trip() {
        let p = Polynomial::from_terms(2, &[(&[2, 0], 2.0), (&[1, 1], 1.0), (&[0, 2], 3.0)]);
        let cert = sos_decompose(&p, None, &opts()).unwrap().unwrap();
        let back = GramCertificate::from_json_value(&cert.to_json_value().unwrap()).unwrap();
        assert_eq!(back.bases, cert.bases);
        assert!(back.residual() < 1e-9);
    }

    fn random_sos(rng: &mut ChaCha8Rng, nvars: usize, deg: u32) -> Polynomial {
        let basis = MonomialBasis::up_to(nvars, deg);
        let k = rng.random_range(1..=basis.len());
        (0..k).fold(Polynomial::zero(nvars), |acc, _| {
            let coefs: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = Polynomial::from_basis(&basis, &coefs);
            acc.add(&q.mul(&q))
        })
    }

    #[test]
    fn random_sums_of_squares_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let nvars = rng.random_range(1..=2);
            let deg = rng.random_range(1..=2);
            let p = random_sos(&mut rng, nvars, deg);
            let cert = sos_decompose(&p, Some(&MonomialBasis::up_to(nvars, deg)), &opts()).unwrap().expect("SOS by construction");
            assert!(cert.residual() < 1e-7 && cert.min_eig() >= -1e-8, "{p}");
        }
    }
}
