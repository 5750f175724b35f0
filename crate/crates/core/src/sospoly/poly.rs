//! Sparse multivariate polynomials over `f64`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Exponent multi-index, ordered graded-lex: total degree first, then
/// `x1 > x2 > ...` within a degree (so `x1` precedes `x2`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered list of distinct monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    nvars: usize,
    monos: Vec<Monomial>,
}

impl MonomialBasis {
    /// All monomials with total degree in `lo..=hi`, graded-lex.
    pub fn degree_range(nvars: usize, lo: u32, hi: u32) -> Self {
        let mut monos = Vec::new();
        for d in lo..=hi {
            let mut level = Vec::new();
            fill(nvars, d, &mut vec![0; nvars], 0, &mut level);
            level.sort();
            monos.extend(level);
        }
        MonomialBasis { nvars, monos }
    }

    pub fn up_to(nvars: usize, deg: u32) -> Self {
        Self::degree_range(nvars, 0, deg)
    }

    pub fn from_monomials(nvars: usize, mut monos: Vec<Monomial>) -> Self {
        monos.sort();
        monos.dedup();
        MonomialBasis { nvars, monos }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monos
    }

    pub fn max_degree(&self) -> u32 {
        self.monos.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.monos.iter().map(|m| m.eval(x)))
    }
}

fn fill(nvars: usize, left: u32, cur: &mut Vec<u32>, i: usize, out: &mut Vec<Monomial>) {
    if i + 1 == nvars {
        cur[i] = left;
        out.push(Monomial(cur.clone()));
        return;
    }
    if nvars == 0 {
        if left == 0 {
            out.push(Monomial(vec![]));
        }
        return;
    }
    for e in (0..=left).rev() {
        cur[i] = e;
        fill(nvars, left - e, cur, i + 1, out);
    }
    cur[i] = 0;
}

/// A polynomial in `nvars` variables with no stored zero coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(nvars, Monomial::one(nvars), c)
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(nvars, Monomial::var(nvars, i), 1.0)
    }

    pub fn monomial(nvars: usize, m: Monomial, c: f64) -> Self {
        assert_eq!(m.nvars(), nvars, "monomial arity");
        let mut p = Self::zero(nvars);
        p.add_term(m, c);
        p
    }

    /// Builds from `(exponents, coefficient)` pairs; repeated monomials add up.
    pub fn from_terms(nvars: usize, terms: &[(&[u32], f64)]) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(Monomial(e.to_vec()), *c);
        }
        p
    }

    /// `Σ cᵢ·mᵢ` over a basis.
    pub fn from_basis(basis: &MonomialBasis, coefs: &[f64]) -> Self {
        let mut p = Self::zero(basis.nvars());
        for (m, &c) in basis.monomials().iter().zip(coefs) {
            p.add_term(m.clone(), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        assert_eq!(m.nvars(), self.nvars, "monomial arity");
        if c == 0.0 {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if *v == 0.0 {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars, "point dimension");
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::Dimension(format!("point has {} entries, polynomial has {} variables", x.len(), self.nvars)));
        }
        Ok(self.eval(x))
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut d = m.clone();
                d.0[i] -= 1;
                out.add_term(d, c * e as f64);
            }
        }
        out
    }

    pub fn grad(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        out
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn prune(&self, tol: f64) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Largest coefficient difference over the union of supports.
    pub fn max_coef_diff(&self, other: &Polynomial) -> f64 {
        let mut worst = 0.0_f64;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coefficient(m)).abs());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

impl fmt::Display for Polynomial {
    /// `coef * x1^a1 x2^a2 + ...` in graded-lex order; round-trips through `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}")?;
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
                .collect();
            if !factors.is_empty() {
                write!(f, " * {}", factors.join(" "))?;
            }
        }
        Ok(())
    }
}

impl Polynomial {
    /// Parses the text format with an explicit variable count.
    pub fn parse(text: &str, nvars: usize) -> Result<Polynomial> {
        let bad = |msg: String| Error::Parse { row: 0, col: 0, msg };
        let mut p = Polynomial::zero(nvars);
        let normalized = text.replace(" - ", " + -");
        for term in normalized.split(" + ") {
            let term = term.trim();
            if term.is_empty() {
                return Err(bad("empty term".into()));
            }
            let (coef_txt, vars_txt) = match term.split_once('*') {
                Some((c, v)) => (c.trim(), v.trim()),
                None if term.starts_with('x') => ("1", term),
                None => (term, ""),
            };
            let coef: f64 = coef_txt.parse().map_err(|_| bad(format!("bad coefficient '{coef_txt}'")))?;
            let mut m = Monomial::one(nvars);
            for factor in vars_txt.split_whitespace() {
                let (name, exp) = match factor.split_once('^') {
                    Some((n, e)) => (n, e.parse::<u32>().map_err(|_| bad(format!("bad exponent in '{factor}'")))?),
                    None => (factor, 1),
                };
                let idx: usize = name
                    .strip_prefix('x')
                    .and_then(|s| s.parse().ok())
                    .filter(|&i: &usize| i >= 1 && i <= nvars)
                    .ok_or_else(|| bad(format!("bad variable '{name}'")))?;
                m.0[idx - 1] += exp;
            }
            p.add_term(m, coef);
        }
        Ok(p)
    }
}

impl FromStr for Polynomial {
    type Err = Error;
    /// Infers the variable count from the highest index mentioned.
    fn from_str(s: &str) -> Result<Self> {
        let mut nvars = 0;
        for tok in s.split(|c: char| !c.is_ascii_alphanumeric()) {
            if let Some(i) = tok.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
                nvars = nvars.max(i);
            }
        }
        Polynomial::parse(s, nvars)
    }
}

/// A grid of polynomials, e.g. the regressors `Z(x)` (N×1) and `W(x)` (M×m).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl MatrixPolynomial {
    pub fn zeros(nvars: usize, rows: usize, cols: usize) -> Self {
        MatrixPolynomial { rows, cols, entries: vec![Polynomial::zero(nvars); rows * cols] }
    }

    /// Row-major construction.
    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("matrix polynomial rows must be non-empty and equal length".into()));
        }
        let nv = rows[0][0].nvars();
        if rows.iter().flatten().any(|p| p.nvars() != nv) {
            return Err(Error::Dimension("matrix polynomial entries use different variable counts".into()));
        }
        Ok(MatrixPolynomial { rows: r, cols: c, entries: rows.into_iter().flatten().collect() })
    }

    pub fn column(entries: Vec<Polynomial>) -> Result<Self> {
        Self::from_rows(entries.into_iter().map(|p| vec![p]).collect())
    }

    /// The `m×m` identity, the `W(x) = I` regressor.
    pub fn identity(nvars: usize, m: usize) -> Self {
        let mut out = Self::zeros(nvars, m, m);
        for i in 0..m {
            out.entries[i * m + i] = Polynomial::constant(nvars, 1.0);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.entries[0].nvars()
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    /// `M(x)·v(x)` for a column of polynomials.
    pub fn mul_vec(&self, v: &[Polynomial]) -> Result<Vec<Polynomial>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!("vector has {} entries, matrix has {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Polynomial::zero(self.nvars()), |acc, j| acc.add(&self.get(i, j).mul(&v[j])))
            })
            .collect())
    }

    /// Row-major text of every entry, used in JSON artifacts.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect()).collect()
    }

    pub fn from_strings(rows: &[Vec<String>], nvars: usize) -> Result<Self> {
        let parsed: Result<Vec<Vec<Polynomial>>> =
            rows.iter().map(|r| r.iter().map(|s| Polynomial::parse(s, nvars)).collect()).collect();
        Self::from_rows(parsed?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn graded_lex_basis() {
        let b = MonomialBasis::up_to(2, 2);
        let exps: Vec<Vec<u32>> = b.monomials().iter().map(|m| m.0.clone()).collect();
        assert_eq!(exps, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(MonomialBasis::up_to(2, 3).len(), 10);
        assert_eq!(MonomialBasis::degree_range(3, 2, 2).len(), 6);
        assert_eq!(MonomialBasis::up_to(1, 3).len(), 4);
    }

    #[test]
    fn gradient_and_eval() {
        let p = Polynomial::from_terms(2, &[(&[2, 0], 1.0), (&[0, 1], 2.0)]);
        let g = p.grad();
        assert_eq!(g[0], Polynomial::from_terms(2, &[(&[1, 0], 2.0)]));
        assert_eq!(g[1], Polynomial::constant(2, 2.0));
        let q = Polynomial::from_terms(2, &[(&[2, 1], 1.0)]);
        assert_eq!(q.eval(&[2.0, 3.0]), 12.0);
        assert!(q.try_eval(&[1.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = MonomialBasis::up_to(2, 4);
        let coefs: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Polynomial::from_basis(&basis, &coefs);
        let g = p.grad();
        let h = 1e-5;
        for _ in 0..20 {
            let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
                assert!((fd - g[i].eval(&x)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let p = Polynomial::from_terms(2, &[(&[0, 0], -1.5), (&[1, 1], 0.25), (&[3, 0], 1e-7), (&[0, 2], -3.0)]);
        let s = p.to_string();
        assert_eq!(Polynomial::parse(&s, 2).unwrap(), p);
        assert_eq!(Polynomial::parse("x1 - 2 * x2^3", 2).unwrap(), Polynomial::from_terms(2, &[(&[1, 0], 1.0), (&[0, 3], -2.0)]));
        assert_eq!(Polynomial::parse("0", 2).unwrap(), Polynomial::zero(2));
        assert!(Polynomial::parse("1 * y3", 2).is_err());
        assert_eq!("3 * x1^2 x2".parse::<Polynomial>().unwrap().nvars(), 2);
    }

    #[test]
    fn arithmetic_cancels() {
        let x = Polynomial::var(1, 0);
        let one = Polynomial::constant(1, 1.0);
        let sq = x.sub(&one).mul(&x.sub(&one));
        assert_eq!(sq, Polynomial::from_terms(1, &[(&[2], 1.0), (&[1], -2.0), (&[0], 1.0)]));
        assert!(sq.sub(&sq).is_zero());
    }

    #[test]
    fn matrix_polynomial_eval() {
        let z = MatrixPolynomial::column(vec![
            Polynomial::var(2, 1),
            Polynomial::from_terms(2, &[(&[2, 0], 1.0)]),
        ])
        .unwrap();
        let v = z.eval(&[1.0, 2.0]);
        assert_eq!(v.as_slice(), &[2.0, 1.0]);
        let round = MatrixPolynomial::from_strings(&z.to_strings(), 2).unwrap();
        assert_eq!(round, z);
    }
}
