//! Robust state-feedback synthesis for linear systems from a matrix-ellipsoid
//! consistency set.
//!
//! Both the `(𝐀, 𝐁, 𝐂)` block form and the center/shape form of the
//! discrete- and continuous-time LMIs are available; they are related by a
//! Schur complement and must agree on feasibility.

use log::debug;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{self, LmiBlock, SdpProblem, SolveStatus, SolverOptions};
use crate::ellipsoid::{ConsistentModel, MatrixEllipsoid, SampleMode};
use crate::error::{Error, Result};
use crate::numkern::{
    matrix_to_rows, max_eig, pd_inverse, rows_to_matrix, spectral_abscissa, spectral_radius, SymMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDomain {
    DiscreteTime,
    ContinuousTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmiForm {
    /// Blocks built from `𝐀`, `𝐁`, `𝐂`.
    BlockAbc,
    /// Blocks built from `𝐀`, `Zc`, `Q`.
    CenterShape,
}

/// Gain `K = Y P⁻¹` with its Lyapunov matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCertificate {
    pub k: DMatrix<f64>,
    pub p: SymMatrix,
    pub y: DMatrix<f64>,
    pub mode: TimeDomain,
    /// Largest eigenvalue of the (margin-shifted) synthesis LMI at the solution.
    pub lmi_residual: f64,
    pub solver_iterations: usize,
    pub margin: f64,
}

#[derive(Serialize, Deserialize)]
struct CertJson {
    mode: TimeDomain,
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    residuals: ResidualsJson,
    solver: SolverJson,
}

#[derive(Serialize, Deserialize)]
struct ResidualsJson {
    lmi: f64,
}

#[derive(Serialize, Deserialize)]
struct SolverJson {
    iterations: usize,
    margin: f64,
}

impl LinearCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CertJson {
            mode: self.mode,
            k: matrix_to_rows(&self.k),
            p: matrix_to_rows(self.p.as_matrix()),
            residuals: ResidualsJson { lmi: self.lmi_residual },
            solver: SolverJson { iterations: self.solver_iterations, margin: self.margin },
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: CertJson = serde_json::from_str(text)?;
        let k = rows_to_matrix(&j.k)?;
        let p = SymMatrix::try_new(rows_to_matrix(&j.p)?)?;
        if k.ncols() != p.dim() {
            return Err(Error::Dimension("K and P sizes disagree".into()));
        }
        let y = &k * p.as_matrix();
        Ok(LinearCertificate {
            k,
            p,
            y,
            mode: j.mode,
            lmi_residual: j.residuals.lmi,
            solver_iterations: j.solver.iterations,
            margin: j.solver.margin,
        })
    }

    /// Closed-loop matrix `A + BK`.
    pub fn closed_loop(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a + b * &self.k
    }
}

/// Decision layout: upper triangle of `P`, then `Y` row-major.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn p(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        i * self.n - i * (i + 1) / 2 + j
    }

    fn y(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) / 2 + i * self.n + j
    }

    fn count(&self) -> usize {
        self.n * (self.n + 1) / 2 + self.m * self.n
    }

    /// Adds `s·[P; Y]` at rows `r0..r0+n+m`, columns `c0..c0+n` (off-diagonal placement).
    fn add_py(&self, blk: &mut LmiBlock, r0: usize, c0: usize, s: f64) {
        for i in 0..self.n {
            for j in 0..self.n {
                blk.add_var(self.p(i, j), r0 + i, c0 + j, s);
            }
        }
        for i in 0..self.m {
            for j in 0..self.n {
                blk.add_var(self.y(i, j), r0 + self.n + i, c0 + j, s);
            }
        }
    }

    /// Adds `s·P` on the diagonal starting at `r0`.
    fn add_p_diag(&self, blk: &mut LmiBlock, r0: usize, s: f64) {
        for i in 0..self.n {
            for j in i..self.n {
                blk.add_var(self.p(i, j), r0 + i, r0 + j, s);
            }
        }
    }

    /// Adds `s·M·[P; Y]` at rows `r0..r0+rows(M)`, columns `c0..c0+n`.
    fn add_m_py(&self, blk: &mut LmiBlock, m: &DMatrix<f64>, r0: usize, c0: usize, s: f64) {
        for r in 0..m.nrows() {
            for j in 0..self.n {
                for k in 0..self.n {
                    blk.add_var(self.p(k, j), r0 + r, c0 + j, s * m[(r, k)]);
                }
                for k in 0..self.m {
                    blk.add_var(self.y(k, j), r0 + r, c0 + j, s * m[(r, self.n + k)]);
                }
            }
        }
    }
}

/// Margin used to turn strict LMIs into `⪯ −ε·I`, scaled by `‖Q‖` rather
/// than `‖𝐀‖`, which grows with the size of the logged states.
fn margin_for(e: &MatrixEllipsoid, opts: &SolverOptions) -> f64 {
    opts.strict_margin * e.shape().norm2().max(1.0)
}

/// The synthesis program for the chosen domain and form, with `P ⪰ εI`.
pub fn build_program(e: &MatrixEllipsoid, mode: TimeDomain, form: LmiForm, opts: &SolverOptions) -> SdpProblem {
    let n = e.n();
    let m = e.p() - n;
    let lay = Layout { n, m };
    let p = e.p();
    let eps = margin_for(e, opts);
    let mut prob = SdpProblem::new(lay.count());
    let mut main = match (mode, form) {
        (TimeDomain::DiscreteTime, LmiForm::BlockAbc) => {
            // [[−P−𝐂, 0, 𝐁ᵀ], [0, −P, [P;Y]ᵀ], [𝐁, [P;Y], −𝐀]]
            let mut b = LmiBlock::new(2 * n + p);
            b.add_const_sym(0, &(-e.big_c().as_matrix()));
            lay.add_p_diag(&mut b, 0, -1.0);
            lay.add_p_diag(&mut b, n, -1.0);
            b.add_const_offdiag(2 * n, 0, e.big_b());
            lay.add_py(&mut b, 2 * n, n, 1.0);
            b.add_const_sym(2 * n, &(-e.big_a().as_matrix()));
            b
        }
        (TimeDomain::DiscreteTime, LmiForm::CenterShape) => {
            // [[−P+Q, −Zcᵀ[P;Y], 0], [⋆, −P, [P;Y]ᵀ], [0, [P;Y], −𝐀]]
            let mut b = LmiBlock::new(2 * n + p);
            b.add_const_sym(0, e.shape().as_matrix());
            lay.add_p_diag(&mut b, 0, -1.0);
            lay.add_m_py(&mut b, &e.center().transpose(), 0, n, -1.0);
            lay.add_p_diag(&mut b, n, -1.0);
            lay.add_py(&mut b, 2 * n, n, 1.0);
            b.add_const_sym(2 * n, &(-e.big_a().as_matrix()));
            b
        }
        (TimeDomain::ContinuousTime, LmiForm::BlockAbc) => {
            // [[−𝐂, 𝐁ᵀ − [P;Y]ᵀ], [𝐁 − [P;Y], −𝐀]]
            let mut b = LmiBlock::new(n + p);
            b.add_const_sym(0, &(-e.big_c().as_matrix()));
            b.add_const_offdiag(n, 0, e.big_b());
            lay.add_py(&mut b, n, 0, -1.0);
            b.add_const_sym(n, &(-e.big_a().as_matrix()));
            b
        }
        (TimeDomain::ContinuousTime, LmiForm::CenterShape) => {
            // [[[P;Y]ᵀZc + Zcᵀ[P;Y] + Q, [P;Y]ᵀ], [[P;Y], −𝐀]]
            let mut b = LmiBlock::new(n + p);
            b.add_const_sym(0, e.shape().as_matrix());
            let zct = e.center().transpose();
            for r in 0..n {
                for j in r..n {
                    // (Zcᵀ[P;Y])_{rj} + (Zcᵀ[P;Y])_{jr}
                    for k in 0..n {
                        b.add_var(lay.p(k, j), r, j, zct[(r, k)]);
                        b.add_var(lay.p(k, r), r, j, zct[(j, k)]);
                    }
                    for k in 0..m {
                        b.add_var(lay.y(k, j), r, j, zct[(r, n + k)]);
                        b.add_var(lay.y(k, r), r, j, zct[(j, n + k)]);
                    }
                }
            }
            lay.add_py(&mut b, n, 0, 1.0);
            b.add_const_sym(n, &(-e.big_a().as_matrix()));
            b
        }
    };
    for i in 0..main.dim() {
        main.add_const(i, i, eps);
    }
    prob.add_block(main);
    let mut pos = LmiBlock::new(n);
    lay.add_p_diag(&mut pos, 0, -1.0);
    for i in 0..n {
        pos.add_const(i, i, eps);
    }
    prob.add_block(pos);
    prob
}

fn synth(e: &MatrixEllipsoid, mode: TimeDomain, form: LmiForm, opts: &SolverOptions) -> Result<LinearCertificate> {
    let n = e.n();
    if e.p() <= n {
        return Err(Error::Dimension("ellipsoid has no input columns".into()));
    }
    let m = e.p() - n;
    let lay = Layout { n, m };
    let prob = build_program(e, mode, form, opts);
    let sol = conic::solve(&prob, opts)?;
    debug!("{mode:?}/{form:?}: status {:?}, margin {:e}, {} iterations", sol.status, sol.margin, sol.iterations);
    match sol.status {
        SolveStatus::Feasible | SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::SolverInfeasible { margin: sol.margin }),
        SolveStatus::NumericalFailure => {
            return Err(Error::NumericalFailure(format!(
                "synthesis LMI solve failed (worst eigenvalue {:e}, margin {:e})",
                sol.worst_eig, sol.margin
            )))
        }
    }
    let p = SymMatrix::new(DMatrix::from_fn(n, n, |i, j| sol.x[lay.p(i, j)]));
    let y = DMatrix::from_fn(m, n, |i, j| sol.x[lay.y(i, j)]);
    let k = &y * pd_inverse(&p)?.as_matrix();
    Ok(LinearCertificate {
        k,
        p,
        y,
        mode,
        lmi_residual: sol.worst_eig,
        solver_iterations: sol.iterations,
        margin: sol.margin,
    })
}

/// Discrete-time robust synthesis: `(A+BK)P(A+BK)ᵀ − P ≺ 0` for all consistent `(A, B)`.
pub fn synth_dt(e: &MatrixEllipsoid, form: LmiForm, opts: &SolverOptions) -> Result<LinearCertificate> {
    synth(e, TimeDomain::DiscreteTime, form, opts)
}

/// Continuous-time robust synthesis: `(A+BK)P + P(A+BK)ᵀ ≺ 0` for all consistent `(A, B)`.
pub fn synth_ct(e: &MatrixEllipsoid, form: LmiForm, opts: &SolverOptions) -> Result<LinearCertificate> {
    synth(e, TimeDomain::ContinuousTime, form, opts)
}

/// Lyapunov residual of one model: the largest eigenvalue of the relevant
/// matrix inequality (negative means satisfied).
pub fn lyapunov_residual(cert: &LinearCertificate, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let acl = cert.closed_loop(a, b);
    let p = cert.p.as_matrix();
    let m = match cert.mode {
        TimeDomain::DiscreteTime => &acl * p * acl.transpose() - p,
        TimeDomain::ContinuousTime => &acl * p + p * acl.transpose(),
    };
    max_eig(&SymMatrix::new(m)).unwrap_or(f64::INFINITY)
}

/// Stability measure: spectral radius (DT) or spectral abscissa (CT).
pub fn stability_measure(mode: TimeDomain, acl: &DMatrix<f64>) -> f64 {
    match mode {
        TimeDomain::DiscreteTime => spectral_radius(acl),
        TimeDomain::ContinuousTime => spectral_abscissa(acl),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustReport {
    pub models_checked: usize,
    pub worst_residual: f64,
    pub center_residual: f64,
    pub truth_residual: Option<f64>,
    /// Worst spectral radius (DT) or abscissa (CT) over the checked models.
    pub worst_stability: f64,
    pub truth_stability: Option<f64>,
    pub violations: usize,
}

impl RobustReport {
    pub fn all_negative(&self) -> bool {
        self.violations == 0 && self.worst_residual < 0.0
    }
}

/// Evaluates the Lyapunov inequality at the center, at `samples` draws (half
/// boundary, half interior) and at an optional true model.
pub fn verify_robust(
    e: &MatrixEllipsoid,
    cert: &LinearCertificate,
    samples: usize,
    seed: u64,
    truth: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<RobustReport> {
    let n = e.n();
    let mut models = vec![ConsistentModel { z: e.center().clone(), provenance: crate::ellipsoid::Provenance::Center }];
    let nb = samples.div_ceil(2);
    models.extend(e.sample(nb, SampleMode::Boundary, seed)?);
    models.extend(e.sample(samples - nb, SampleMode::Interior, seed.wrapping_add(1))?);
    let mut worst_residual = f64::NEG_INFINITY;
    let mut worst_stability = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut center_residual = f64::NAN;
    for (i, mdl) in models.iter().enumerate() {
        let (a, b) = mdl.split(n);
        let r = lyapunov_residual(cert, &a, &b);
        if i == 0 {
            center_residual = r;
        }
        if r >= 0.0 {
            violations += 1;
        }
        worst_residual = worst_residual.max(r);
        worst_stability = worst_stability.max(stability_measure(cert.mode, &cert.closed_loop(&a, &b)));
    }
    let (truth_residual, truth_stability) = match truth {
        Some((a, b)) => {
            let r = lyapunov_residual(cert, a, b);
            if r >= 0.0 {
                violations += 1;
            }
            worst_residual = worst_residual.max(r);
            (Some(r), Some(stability_measure(cert.mode, &cert.closed_loop(a, b))))
        }
        None => (None, None),
    };
    Ok(RobustReport {
        models_checked: models.len() + usize::from(truth.is_some()),
        worst_residual,
        center_residual,
        truth_residual,
        worst_stability,
        truth_stability,
        violations,
    })
}
