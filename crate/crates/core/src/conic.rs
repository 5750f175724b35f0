//! A small dense semidefinite-program solver.
//!
//! Problems are lists of block LMIs `F0 + Σ xᵢFᵢ ⪯ 0`, affine in scalar
//! decision variables, with an optional linear or log-det objective. The
//! solver is a primal log-barrier path-following method:
//!
//! * phase 1 minimizes `t` subject to `F(x) ⪯ tI` and reports the margin,
//! * phase 2 starts from the strictly feasible phase-1 point and follows the
//!   central path of the objective.
//!
//! Coefficient matrices are stored as upper-triangular triplets so that the
//! Gram-matrix programs produced by the SOS compiler stay cheap to assemble.
//!
//! # Text dump format
//!
//! ```text
//! sdp <num_vars> <num_blocks>
//! objective feasibility | objective minlinear <c_0> .. <c_{d-1}> | objective maxlogdet <block>
//! nonneg <k> <i_1> .. <i_k>
//! block <dim> <num_var_terms>
//! <dim rows of F0, row-major>
//! var <index> <nnz>
//! <row> <col> <value>        (nnz lines, row <= col)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkern::{max_eig, SymMatrix};

/// Upper-triangular entry `(row, col, value)` with `row <= col`.
pub type Triplet = (usize, usize, f64);

/// One block constraint `F0 + Σ xᵢFᵢ ⪯ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    dim: usize,
    f0: DMatrix<f64>,
    terms: BTreeMap<usize, BTreeMap<(usize, usize), f64>>,
}

impl LmiBlock {
    pub fn new(dim: usize) -> Self {
        LmiBlock { dim, f0: DMatrix::zeros(dim, dim), terms: BTreeMap::new() }
    }

    /// Builds a block from a dense constant and one dense coefficient per variable.
    pub fn from_dense(f0: &SymMatrix, fi: &[SymMatrix]) -> Self {
        let mut b = LmiBlock::new(f0.dim());
        b.add_const_sym(0, f0.as_matrix());
        for (i, f) in fi.iter().enumerate() {
            b.add_var_sym(i, 0, f.as_matrix());
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f0
    }

    /// Variables that appear with a nonzero coefficient.
    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().copied()
    }

    /// Coefficient of variable `var` as upper triplets.
    pub fn coefficient(&self, var: usize) -> Vec<Triplet> {
        self.terms
            .get(&var)
            .map(|m| m.iter().map(|(&(r, c), &v)| (r, c, v)).collect())
            .unwrap_or_default()
    }

    /// Adds `v` to the symmetric pair of entries `(r, c)`/`(c, r)`.
    pub fn add_const(&mut self, r: usize, c: usize, v: f64) {
        assert!(r < self.dim && c < self.dim, "entry outside block");
        self.f0[(r, c)] += v;
        if r != c {
            self.f0[(c, r)] += v;
        }
    }

    pub fn add_var(&mut self, var: usize, r: usize, c: usize, v: f64) {
        assert!(r < self.dim && c < self.dim, "entry outside block");
        if v == 0.0 {
            return;
        }
        let key = (r.min(c), r.max(c));
        *self.terms.entry(var).or_default().entry(key).or_insert(0.0) += v;
    }

    /// Places `m` at rows `r0..` and columns `c0..` plus its mirror image.
    /// The target must lie strictly below or above the diagonal.
    pub fn add_const_offdiag(&mut self, r0: usize, c0: usize, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert!(r0 + i != c0 + j, "off-diagonal placement touches the diagonal");
                self.add_const(r0 + i, c0 + j, m[(i, j)]);
            }
        }
    }

    pub fn add_var_offdiag(&mut self, var: usize, r0: usize, c0: usize, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert!(r0 + i != c0 + j, "off-diagonal placement touches the diagonal");
                self.add_var(var, r0 + i, c0 + j, m[(i, j)]);
            }
        }
    }

    /// Places symmetric `m` on the diagonal starting at `(r0, r0)`.
    pub fn add_const_sym(&mut self, r0: usize, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
                self.add_const(r0 + i, r0 + j, v);
            }
        }
    }

    pub fn add_var_sym(&mut self, var: usize, r0: usize, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
                self.add_var(var, r0 + i, r0 + j, v);
            }
        }
    }

    /// `F0 + Σ xᵢFᵢ` as a dense matrix.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.f0.clone();
        for (&var, entries) in &self.terms {
            let xv = x[var];
            if xv == 0.0 {
                continue;
            }
            for (&(r, c), &v) in entries {
                out[(r, c)] += xv * v;
                if r != c {
                    out[(c, r)] += xv * v;
                }
            }
        }
        out
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }
}

/// Objective of a semidefinite program.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Feasibility,
    MinLinear(Vec<f64>),
    /// Maximize `log det G(x)` where the indexed block is read as `G(x) ≻ 0`.
    MaxLogDetBlock(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub blocks: Vec<LmiBlock>,
    pub objective: Objective,
    pub nonneg: Vec<usize>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        SdpProblem { num_vars, blocks: Vec::new(), objective: Objective::Feasibility, nonneg: Vec::new() }
    }

    pub fn add_block(&mut self, b: LmiBlock) -> usize {
        self.blocks.push(b);
        self.blocks.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        for (k, b) in self.blocks.iter().enumerate() {
            if b.dim == 0 || b.f0.nrows() != b.dim || b.f0.ncols() != b.dim {
                return Err(Error::MalformedProblem(format!("block {k} has inconsistent dimensions")));
            }
            if let Some(v) = b.max_var() {
                if v >= self.num_vars {
                    return Err(Error::MalformedProblem(format!(
                        "block {k} references variable {v} but the problem has {} variables",
                        self.num_vars
                    )));
                }
            }
            for entries in b.terms.values() {
                if entries.keys().any(|&(r, c)| r >= b.dim || c >= b.dim) {
                    return Err(Error::MalformedProblem(format!("block {k} has an entry out of range")));
                }
            }
        }
        match &self.objective {
            Objective::MinLinear(c) if c.len() != self.num_vars => {
                return Err(Error::MalformedProblem(format!(
                    "objective has {} coefficients for {} variables",
                    c.len(),
                    self.num_vars
                )))
            }
            Objective::MaxLogDetBlock(i) if *i >= self.blocks.len() => {
                return Err(Error::MalformedProblem(format!("log-det block {i} does not exist")))
            }
            _ => {}
        }
        if let Some(&i) = self.nonneg.iter().find(|&&i| i >= self.num_vars) {
            return Err(Error::MalformedProblem(format!("nonnegative index {i} out of range")));
        }
        Ok(())
    }

    fn logdet_block(&self) -> Option<usize> {
        match self.objective {
            Objective::MaxLogDetBlock(i) => Some(i),
            _ => None,
        }
    }

    /// Writes the plain-text dump described in the module docs.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sdp {} {}", self.num_vars, self.blocks.len());
        match &self.objective {
            Objective::Feasibility => {
                let _ = writeln!(s, "objective feasibility");
            }
            Objective::MinLinear(c) => {
                let _ = write!(s, "objective minlinear");
                for v in c {
                    let _ = write!(s, " {v:e}");
                }
                s.push('\n');
            }
            Objective::MaxLogDetBlock(i) => {
                let _ = writeln!(s, "objective maxlogdet {i}");
            }
        }
        let _ = write!(s, "nonneg {}", self.nonneg.len());
        for i in &self.nonneg {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
        for b in &self.blocks {
            let _ = writeln!(s, "block {} {}", b.dim, b.terms.len());
            for i in 0..b.dim {
                let row: Vec<String> = (0..b.dim).map(|j| format!("{:e}", b.f0[(i, j)])).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
            for (var, entries) in &b.terms {
                let _ = writeln!(s, "var {var} {}", entries.len());
                for (&(r, c), v) in entries {
                    let _ = writeln!(s, "{r} {c} {v:e}");
                }
            }
        }
        s
    }

    /// Parses the output of [`SdpProblem::dump`].
    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            let (i, l) = lines
                .next()
                .ok_or_else(|| Error::MalformedProblem(format!("unexpected end of dump, expected {what}")))?;
            Ok((i + 1, l.split_whitespace().map(str::to_owned).collect()))
        };
        fn num<T: std::str::FromStr>(tok: Option<&String>, line: usize) -> Result<T> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::MalformedProblem(format!("bad number on line {line}")))
        }
        let (ln, head) = next("header")?;
        if head.first().map(String::as_str) != Some("sdp") {
            return Err(Error::MalformedProblem(format!("line {ln}: expected 'sdp' header")));
        }
        let num_vars: usize = num(head.get(1), ln)?;
        let nblocks: usize = num(head.get(2), ln)?;
        let (ln, obj) = next("objective")?;
        let objective = match obj.get(1).map(String::as_str) {
            Some("feasibility") => Objective::Feasibility,
            Some("minlinear") => {
                let c: Result<Vec<f64>> = (0..num_vars).map(|k| num(obj.get(2 + k), ln)).collect();
                Objective::MinLinear(c?)
            }
            Some("maxlogdet") => Objective::MaxLogDetBlock(num(obj.get(2), ln)?),
            _ => return Err(Error::MalformedProblem(format!("line {ln}: unknown objective"))),
        };
        let (ln, nn) = next("nonneg")?;
        let k: usize = num(nn.get(1), ln)?;
        let nonneg: Result<Vec<usize>> = (0..k).map(|j| num(nn.get(2 + j), ln)).collect();
        let mut p = SdpProblem { num_vars, blocks: Vec::new(), objective, nonneg: nonneg? };
        for _ in 0..nblocks {
            let (ln, bh) = next("block")?;
            let dim: usize = num(bh.get(1), ln)?;
            let nterms: usize = num(bh.get(2), ln)?;
            let mut b = LmiBlock::new(dim);
            for i in 0..dim {
                let (ln, row) = next("F0 row")?;
                for j in 0..dim {
                    b.f0[(i, j)] = num(row.get(j), ln)?;
                }
            }
            for _ in 0..nterms {
                let (ln, vh) = next("var")?;
                let var: usize = num(vh.get(1), ln)?;
                let nnz: usize = num(vh.get(2), ln)?;
                for _ in 0..nnz {
                    let (ln, e) = next("entry")?;
                    let r: usize = num(e.first(), ln)?;
                    let c: usize = num(e.get(1), ln)?;
                    let v: f64 = num(e.get(2), ln)?;
                    if r >= dim || c >= dim {
                        return Err(Error::MalformedProblem(format!("line {ln}: entry outside block")));
                    }
                    b.add_var(var, r, c, v);
                }
            }
            p.blocks.push(b);
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Tolerance on the largest block eigenvalue for a point to count as feasible.
    pub feas_tol: f64,
    /// Margin callers subtract to encode strict inequalities.
    pub strict_margin: f64,
    /// Newton-step cap, applied separately to each phase.
    pub max_iters: usize,
    /// Relative duality-gap target for the objective phase.
    pub gap_tol: f64,
    /// Radius of the norm ball that keeps the decision vector bounded.
    pub radius: f64,
    /// For feasibility problems: keep minimizing the phase-1 margin instead of
    /// stopping at the first strictly feasible point.
    pub minimize_margin: bool,
    /// Barrier parameter growth factor.
    pub mu: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            strict_margin: 1e-6,
            max_iters: 200,
            gap_tol: 1e-7,
            radius: 1e6,
            minimize_margin: false,
            mu: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    /// Largest eigenvalue over all constraint blocks at `x`.
    pub worst_eig: f64,
    pub objective_value: f64,
    /// Newton steps over both phases.
    pub iterations: usize,
    /// Phase-1 value of `t` at exit (negative means strictly feasible).
    pub margin: f64,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub block_max_eig: Vec<f64>,
    pub worst: f64,
    pub nonneg_violation: f64,
    pub ok: bool,
}

/// Residual report independent of solver internals. A log-det block is
/// checked as `G(x) ≻ 0`, i.e. its residual is `λ_max(−G(x))`.
pub fn verify(problem: &SdpProblem, x: &[f64], tol: f64) -> Result<VerifyReport> {
    problem.validate()?;
    if x.len() != problem.num_vars {
        return Err(Error::MalformedProblem(format!(
            "point has length {} but the problem has {} variables",
            x.len(),
            problem.num_vars
        )));
    }
    let ld = problem.logdet_block();
    let mut block_max_eig = Vec::with_capacity(problem.blocks.len());
    for (k, b) in problem.blocks.iter().enumerate() {
        let mut m = b.evaluate(x);
        if Some(k) == ld {
            m = -m;
        }
        block_max_eig.push(max_eig(&SymMatrix::new(m))?);
    }
    let worst = block_max_eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nonneg_violation = problem.nonneg.iter().map(|&i| (-x[i]).max(0.0)).fold(0.0, f64::max);
    let ok = worst <= tol && nonneg_violation <= tol;
    Ok(VerifyReport { block_max_eig, worst, nonneg_violation, ok })
}

/// Internal block with the sign convention `F(z) ⪯ 0`, barrier `−w·logdet(−F)`.
struct Compiled {
    dim: usize,
    f0: DMatrix<f64>,
    vars: Vec<(usize, Vec<Triplet>)>,
    /// True for the log-det objective block, whose barrier weight grows with `s`.
    objective: bool,
}

struct Barrier<'a> {
    blocks: Vec<Compiled>,
    nvars: usize,
    /// Variables bounded below by zero.
    nonneg: &'a [usize],
    /// Number of leading variables inside the norm ball.
    ball_vars: usize,
    radius2: f64,
    lin: Vec<f64>,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn compile(problem: &SdpProblem, with_t: bool) -> Vec<Compiled> {
    // In phase 1 the log-det block is an ordinary constraint.
    let ld = problem.logdet_block();
    problem
        .blocks
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let neg = Some(k) == ld;
            let sign = if neg { -1.0 } else { 1.0 };
            let mut vars: Vec<(usize, Vec<Triplet>)> = b
                .terms
                .iter()
                .map(|(&v, e)| (v, e.iter().map(|(&(r, c), &val)| (r, c, sign * val)).collect()))
                .collect();
            if with_t {
                vars.push((problem.num_vars, (0..b.dim).map(|i| (i, i, -1.0)).collect()));
            }
            Compiled { dim: b.dim, f0: &b.f0 * sign, vars, objective: neg && !with_t }
        })
        .collect()
}

fn block_value(b: &Compiled, z: &[f64]) -> DMatrix<f64> {
    let mut out = b.f0.clone();
    for (var, entries) in &b.vars {
        let xv = z[*var];
        if xv == 0.0 {
            continue;
        }
        for &(r, c, v) in entries {
            out[(r, c)] += xv * v;
            if r != c {
                out[(c, r)] += xv * v;
            }
        }
    }
    out
}

impl Barrier<'_> {
    fn total_rank(&self) -> f64 {
        let m: usize = self.blocks.iter().filter(|b| !b.objective).map(|b| b.dim).sum();
        (m + self.nonneg.len() + 1) as f64
    }

    /// Objective-plus-barrier value only; `None` outside the domain.
    fn value(&self, z: &[f64], s: f64) -> Option<f64> {
        let mut f = s * self.lin.iter().zip(z).map(|(c, x)| c * x).sum::<f64>();
        for &i in self.nonneg {
            if z[i] <= 0.0 {
                return None;
            }
            f -= z[i].ln();
        }
        let r = self.radius2 - z[..self.ball_vars].iter().map(|v| v * v).sum::<f64>();
        if r <= 0.0 {
            return None;
        }
        f -= r.ln();
        for b in &self.blocks {
            let w = if b.objective { 1.0 + s } else { 1.0 };
            let neg = -block_value(b, z);
            let chol = neg.cholesky()?;
            let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(b.dim).map(|d| d.ln()).sum::<f64>();
            if !logdet.is_finite() {
                return None;
            }
            f -= w * logdet;
        }
        f.is_finite().then_some(f)
    }

    fn eval(&self, z: &[f64], s: f64) -> Option<Eval> {
        let value = self.value(z, s)?;
        let d = self.nvars;
        let mut grad = DVector::from_iterator(d, self.lin.iter().map(|c| s * c));
        let mut hess = DMatrix::zeros(d, d);
        for &i in self.nonneg {
            grad[i] -= 1.0 / z[i];
            hess[(i, i)] += 1.0 / (z[i] * z[i]);
        }
        let r = self.radius2 - z[..self.ball_vars].iter().map(|v| v * v).sum::<f64>();
        for i in 0..self.ball_vars {
            grad[i] += 2.0 * z[i] / r;
            hess[(i, i)] += 2.0 / r;
            for j in 0..self.ball_vars {
                hess[(i, j)] += 4.0 * z[i] * z[j] / (r * r);
            }
        }
        for b in &self.blocks {
            let w = if b.objective { 1.0 + s } else { 1.0 };
            let neg = -block_value(b, z);
            let winv = neg.cholesky()?.inverse();
            let nb = b.vars.len();
            let mut gmats: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
            for (var, entries) in &b.vars {
                let mut tr = 0.0;
                let mut g = DMatrix::zeros(b.dim, b.dim);
                for &(r, c, v) in entries {
                    if r == c {
                        tr += v * winv[(r, r)];
                        g.ger(v, &winv.column(r), &winv.column(r), 1.0);
                    } else {
                        tr += 2.0 * v * winv[(r, c)];
                        g.ger(v, &winv.column(r), &winv.column(c), 1.0);
                        g.ger(v, &winv.column(c), &winv.column(r), 1.0);
                    }
                }
                grad[*var] += w * tr;
                gmats.push(g);
            }
            for (a, g) in gmats.iter().enumerate() {
                let va = b.vars[a].0;
                for bb in a..nb {
                    let (vb, entries) = &b.vars[bb];
                    let mut h = 0.0;
                    for &(r, c, v) in entries {
                        h += if r == c { v * g[(r, r)] } else { v * (g[(r, c)] + g[(c, r)]) };
                    }
                    hess[(va, *vb)] += w * h;
                    if va != *vb {
                        hess[(*vb, va)] += w * h;
                    }
                }
            }
        }
        Some(Eval { value, grad, hess })
    }
}

/// Solves `H Δ = −g` with a growing diagonal shift when `H` is singular.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            let dir = ch.solve(&(-grad));
            if dir.iter().all(|v| v.is_finite()) {
                return Some(dir);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

enum Centering {
    Done,
    /// The line search stalled; the iterate is still in the domain.
    Stalled,
    IterCap,
    Failed,
}

/// Damped Newton centering at barrier parameter `s`.
fn center(bar: &Barrier<'_>, z: &mut [f64], s: f64, iters: &mut usize, cap: usize, stop: &dyn Fn(&[f64]) -> bool) -> Centering {
    loop {
        if stop(z) {
            return Centering::Done;
        }
        if *iters >= cap {
            return Centering::IterCap;
        }
        let Some(ev) = bar.eval(z, s) else { return Centering::Failed };
        let Some(dir) = newton_direction(&ev.hess, &ev.grad) else { return Centering::Failed };
        let slope = ev.grad.dot(&dir);
        let dec2 = -slope;
        *iters += 1;
        if dec2 <= 1e-9 || !dec2.is_finite() {
            return Centering::Done;
        }
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Some(f) = bar.value(&trial, s) {
                if f <= ev.value + 0.25 * alpha * slope {
                    z.copy_from_slice(&trial);
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        trace!("newton s={s:e} dec2={dec2:e} alpha={alpha:e}");
        if !moved {
            return if dec2 < 1e-5 { Centering::Done } else { Centering::Stalled };
        }
    }
}

fn worst_eig_at(problem: &SdpProblem, x: &[f64]) -> f64 {
    let nonneg = problem.nonneg.iter().map(|&i| -x[i]).fold(f64::NEG_INFINITY, f64::max);
    verify(problem, x, 0.0).map(|r| r.worst.max(nonneg)).unwrap_or(f64::INFINITY)
}

/// Solves `problem`. Deterministic: identical inputs give identical iterates.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    solve_from(problem, opts, None)
}

/// As [`solve`], starting from `start`; phase 1 is skipped when `start` is
/// strictly feasible.
pub fn solve_from(problem: &SdpProblem, opts: &SolverOptions, start: Option<&[f64]>) -> Result<SdpSolution> {
    problem.validate()?;
    let d = problem.num_vars;
    let mut x = vec![0.0; d];
    for &i in &problem.nonneg {
        x[i] = 1.0;
    }
    if let Some(x0) = start {
        if x0.len() != d {
            return Err(Error::Dimension(format!("start point has {} entries, problem has {d} variables", x0.len())));
        }
        x.copy_from_slice(x0);
    }
    let mut iterations = 0;

    // Phase 1: minimize t subject to F(x) ⪯ tI.
    let start_worst = worst_eig_at(problem, &x);
    let strictly_feasible_start =
        problem.blocks.is_empty() || (start_worst < 0.0 && !opts.minimize_margin);
    let mut margin = start_worst;
    if !strictly_feasible_start {
        let mut lin = vec![0.0; d + 1];
        lin[d] = 1.0;
        let bar = Barrier {
            blocks: compile(problem, true),
            nvars: d + 1,
            nonneg: &problem.nonneg,
            ball_vars: d,
            radius2: opts.radius * opts.radius,
            lin,
        };
        let mut z = x.clone();
        z.push(start_worst.abs().max(1.0) + start_worst.max(0.0));
        let m = bar.total_rank();
        let mut s = 1.0 / z[d].abs().max(1.0);
        let mut p1_iters = 0;
        let phase1 = loop {
            let may_stop = !opts.minimize_margin || problem.objective != Objective::Feasibility;
            let stop = |z: &[f64]| may_stop && (z[d] < 0.0 || worst_eig_at(problem, &z[..d]) < 0.0);
            let c = center(&bar, &mut z, s, &mut p1_iters, opts.max_iters, &stop);
            let t = z[d];
            debug!("phase1 s={s:e} t={t:e} iters={p1_iters}");
            if stop(&z) {
                break Ok(());
            }
            if t - m / s > opts.feas_tol {
                break Err(SolveStatus::Infeasible);
            }
            if m / s < opts.gap_tol * t.abs().max(1.0) || matches!(c, Centering::Stalled) && m / s < 1e-4 {
                break if t <= opts.feas_tol { Ok(()) } else { Err(SolveStatus::Infeasible) };
            }
            match c {
                Centering::IterCap => {
                    break if t <= opts.feas_tol { Ok(()) } else { Err(SolveStatus::NumericalFailure) };
                }
                Centering::Failed => break Err(SolveStatus::NumericalFailure),
                _ => {}
            }
            s *= opts.mu;
        };
        iterations += p1_iters;
        x.copy_from_slice(&z[..d]);
        margin = z[d].min(worst_eig_at(problem, &x));
        if let Err(status) = phase1 {
            let worst = worst_eig_at(problem, &x);
            debug!("phase1 ended with {status:?}, margin {margin:e}");
            return Ok(SdpSolution { x, status, worst_eig: worst, objective_value: margin, iterations, margin });
        }
    }

    if problem.objective == Objective::Feasibility {
        let worst = worst_eig_at(problem, &x);
        let status = if worst <= opts.feas_tol { SolveStatus::Feasible } else { SolveStatus::NumericalFailure };
        return Ok(SdpSolution { x, status, worst_eig: worst, objective_value: margin, iterations, margin });
    }

    // Phase 2: follow the central path of the objective from a strictly feasible point.
    let lin = match &problem.objective {
        Objective::MinLinear(c) => c.clone(),
        _ => vec![0.0; d],
    };
    let bar = Barrier {
        blocks: compile(problem, false),
        nvars: d,
        nonneg: &problem.nonneg,
        ball_vars: d,
        radius2: opts.radius * opts.radius,
        lin,
    };
    let m = bar.total_rank()
        + problem.logdet_block().map_or(0.0, |k| problem.blocks[k].dim as f64);
    let mut s = 1.0;
    let mut p2_iters = 0;
    let mut last_good = x.clone();
    let status = loop {
        let c = center(&bar, &mut x, s, &mut p2_iters, opts.max_iters, &|_| false);
        let obj = objective_value(problem, &x);
        debug!("phase2 s={s:e} obj={obj:e} iters={p2_iters}");
        match c {
            Centering::Failed => {
                x.copy_from_slice(&last_good);
                break SolveStatus::Feasible;
            }
            Centering::IterCap => break SolveStatus::Feasible,
            _ => {}
        }
        last_good.copy_from_slice(&x);
        if m / s < opts.gap_tol * obj.abs().max(1.0) {
            break SolveStatus::Optimal;
        }
        if matches!(c, Centering::Stalled) && m / s < 1e-5 * obj.abs().max(1.0) {
            break SolveStatus::Optimal;
        }
        s *= opts.mu;
    };
    iterations += p2_iters;
    let worst = worst_eig_at(problem, &x);
    let status = if worst <= opts.feas_tol { status } else { SolveStatus::NumericalFailure };
    let objective_value = objective_value(problem, &x);
    Ok(SdpSolution { x, status, worst_eig: worst, objective_value, iterations, margin })
}

/// Value of the problem objective at `x` (`−log det G` for log-det problems,
/// the phase-1 margin is not included).
pub fn objective_value(problem: &SdpProblem, x: &[f64]) -> f64 {
    match &problem.objective {
        Objective::Feasibility => 0.0,
        Objective::MinLinear(c) => c.iter().zip(x).map(|(a, b)| a * b).sum(),
        Objective::MaxLogDetBlock(k) => {
            let g = problem.blocks[*k].evaluate(x);
            match g.cholesky() {
                Some(ch) => -2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
                None => f64::INFINITY,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_block(f0: f64, f1: f64) -> LmiBlock {
        LmiBlock::from_dense(&SymMatrix::new(DMatrix::from_element(1, 1, f0)), &[SymMatrix::new(
            DMatrix::from_element(1, 1, f1),
        )])
    }

    fn checked(p: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
        let sol = solve(p, opts).unwrap();
        if sol.is_feasible() {
            assert!(verify(p, &sol.x, opts.feas_tol).unwrap().ok, "solution fails verify: {sol:?}");
        }
        sol
    }

    #[test]
    fn feasible_scalar() {
        let mut p = SdpProblem::new(1);
        p.add_block(scalar_block(-1.0, 1.0));
        let sol = checked(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Feasible);
        assert!(sol.x[0] <= 1.0);
    }

    #[test]
    fn constant_positive_block_is_infeasible() {
        let mut p = SdpProblem::new(1);
        p.add_block(scalar_block(1.0, 0.0));
        let sol = checked(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.margin > 0.5);
    }

    #[test]
    fn min_linear_one_dimensional() {
        let mut p = SdpProblem::new(1);
        p.add_block(scalar_block(2.0, -1.0));
        p.objective = Objective::MinLinear(vec![1.0]);
        p.nonneg = vec![0];
        let sol = checked(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() <= 1e-6, "{}", sol.x[0]);
    }

    #[test]
    fn max_logdet_separable() {
        // A = diag(x1, x2) with A ⪯ diag(1, 4); maximize log det A.
        let mut p = SdpProblem::new(2);
        let mut cap = LmiBlock::new(2);
        cap.add_const(0, 0, -1.0);
        cap.add_const(1, 1, -4.0);
        cap.add_var(0, 0, 0, 1.0);
        cap.add_var(1, 1, 1, 1.0);
        p.add_block(cap);
        let mut g = LmiBlock::new(2);
        g.add_var(0, 0, 0, 1.0);
        g.add_var(1, 1, 1, 1.0);
        let k = p.add_block(g);
        p.objective = Objective::MaxLogDetBlock(k);
        let sol = checked(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 4.0).abs() < 1e-6, "{:?}", sol.x);
        assert!((-sol.objective_value - 4.0_f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn verify_reports_violation() {
        let mut p = SdpProblem::new(1);
        p.add_block(scalar_block(-1.0, 1.0));
        let r = verify(&p, &[1.5], 1e-9).unwrap();
        assert!((r.worst - 0.5).abs() < 1e-12);
        assert!(!r.ok);
        assert!(verify(&p, &[1.0, 2.0], 1e-9).is_err());
    }

    #[test]
    fn malformed_is_rejected() {
        let mut p = SdpProblem::new(1);
        let mut b = LmiBlock::new(1);
        b.add_var(3, 0, 0, 1.0);
        p.add_block(b);
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::MalformedProblem(_))));
        let mut q = SdpProblem::new(2);
        q.objective = Objective::MinLinear(vec![1.0]);
        assert!(q.validate().is_err());
    }

    #[test]
    fn margin_mode_reports_optimal_margin() {
        // x·I - diag(1, 3) ⪯ tI with |x| ≤ R: t* = ... minimized at x → -R; use a two-sided block instead.
        // Blocks [x - 1] ⪯ 0 and [-x - 1] ⪯ 0 give t* = -1 at x = 0.
        let mut p = SdpProblem::new(1);
        p.add_block(scalar_block(-1.0, 1.0));
        p.add_block(scalar_block(-1.0, -1.0));
        let opts = SolverOptions { minimize_margin: true, ..Default::default() };
        let sol = checked(&p, &opts);
        assert!((sol.margin + 1.0).abs() < 1e-5, "{}", sol.margin);
    }

    #[test]
    fn dump_round_trip() {
        let mut p = SdpProblem::new(3);
        let mut b = LmiBlock::new(2);
        b.add_const(0, 1, 0.25);
        b.add_var(0, 0, 0, 1.5);
        b.add_var(2, 1, 0, -2.0);
        p.add_block(b);
        p.add_block(scalar_block(1.0, 0.0));
        p.objective = Objective::MinLinear(vec![1.0, 0.0, -0.5]);
        p.nonneg = vec![1];
        let q = SdpProblem::load(&p.dump()).unwrap();
        assert_eq!(p, q);
        assert!(SdpProblem::load("sdp 1 1\nobjective feasibility\nnonneg 0\n").is_err());
    }

    #[test]
    fn deterministic_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_feasible(&mut rng, 4, 3);
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
    }

    fn random_feasible(rng: &mut ChaCha8Rng, d: usize, nblocks: usize) -> SdpProblem {
        let xhat: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut p = SdpProblem::new(d);
        for _ in 0..nblocks {
            let dim = rng.random_range(1..5);
            let fi: Vec<SymMatrix> = (0..d)
                .map(|_| SymMatrix::new(DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0))))
                .collect();
            let mut at = DMatrix::zeros(dim, dim);
            for (f, x) in fi.iter().zip(&xhat) {
                at += f.as_matrix() * *x;
            }
            // F0 = -Σ x̂ᵢFᵢ - (0.1 + random PSD) so the block is strictly negative at x̂.
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let f0 = -at - DMatrix::identity(dim, dim) * 0.1 - g.transpose() * g;
            p.add_block(LmiBlock::from_dense(&SymMatrix::new(f0), &fi));
        }
        p
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]
            #[test]
            fn random_feasible_instances_are_solved(seed in 0u64..10_000, d in 1usize..6, nb in 1usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = random_feasible(&mut rng, d, nb);
                let sol = checked(&p, &SolverOptions::default());
                prop_assert_eq!(sol.status, SolveStatus::Feasible);
            }
        }
    }
}
