//! Sparse multivariate polynomials over exact rationals, and matrices of them.
//!
//! Degrees stay small (bounded by the nilpotency index), so a `BTreeMap`
//! keyed by exponent vectors is plenty fast and keeps printing deterministic.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::rational::{rint, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    pub nvars: usize,
    /// exponent vector -> nonzero coefficient
    pub terms: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars);
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(e, Rational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&vec![0; self.nvars])
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    fn insert(&mut self, exps: Vec<u32>, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(e, ca * cb);
            }
        }
        out
    }

    /// Highest exponent of variable `i`.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.insert(e2, c * rint(e[i] as i64));
        }
        out
    }

    pub fn eval_rat(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.nvars);
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    term *= &point[i];
                }
            }
            acc += term;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut term = to_f64(c);
            for (i, &k) in e.iter().enumerate() {
                term *= point[i].powi(k as i32);
            }
            acc += term;
        }
        acc
    }

    /// Substitutes `point[i]` (a polynomial in a possibly different variable
    /// set) for variable `i`.
    pub fn subst(&self, point: &[Poly]) -> Poly {
        assert_eq!(point.len(), self.nvars);
        let out_vars = point.first().map_or(0, |p| p.nvars);
        assert!(point.iter().all(|p| p.nvars == out_vars));
        let mut acc = Poly::zero(out_vars);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(out_vars, c.clone());
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    term = term.mul(&point[i]);
                }
            }
            acc = acc.add(&term);
        }
        acc
    }

    /// Reinterprets in the polynomial ring on the first `keep` variables;
    /// all terms must already be free of the higher variables.
    pub fn restrict_vars(&self, keep: usize) -> Poly {
        let mut out = Poly::zero(keep);
        for (e, c) in &self.terms {
            assert!(
                e[keep..].iter().all(|&x| x == 0),
                "restrict_vars: term uses a dropped variable"
            );
            out.insert(e[..keep].to_vec(), c.clone());
        }
        out
    }

    /// Sets the variables in `vars` to zero.
    pub fn set_zero(&self, vars: &[usize]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if vars.iter().all(|&v| e[v] == 0) {
                out.insert(e.clone(), c.clone());
            }
        }
        out
    }

    /// Renders with the given variable names, e.g. `2*s1^2 - 2*s2`.
    pub fn render(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (e, c) in self.terms.iter().rev() {
            let mut factors = Vec::new();
            let abs = c.abs();
            if !abs.is_one() || e.iter().all(|&x| x == 0) {
                factors.push(abs.to_string());
            }
            for (i, &k) in e.iter().enumerate() {
                if k == 1 {
                    factors.push(names[i].clone());
                } else if k > 1 {
                    factors.push(format!("{}^{}", names[i], k));
                }
            }
            let sign = if c < &Rational::zero() { "-" } else { "+" };
            parts.push((sign, factors.join("*")));
        }
        let mut s = String::new();
        for (i, (sign, term)) in parts.iter().enumerate() {
            if i == 0 {
                if *sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(if *sign == "-" { " - " } else { " + " });
            }
            s.push_str(term);
        }
        s
    }
}

/// Row-major matrix with polynomial entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub nvars: usize,
    pub data: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            data: vec![Poly::zero(nvars); rows * cols],
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut m = Self::zeros(n, n, nvars);
        for i in 0..n {
            m[(i, i)] = Poly::one(nvars);
        }
        m
    }

    pub fn from_rat(m: &RatMatrix, nvars: usize) -> Self {
        PolyMatrix {
            rows: m.rows,
            cols: m.cols,
            nvars,
            data: m.data.iter().map(|c| Poly::constant(nvars, c.clone())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, self.nvars);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            data: self.data.iter().map(Poly::neg).collect(),
        }
    }

    pub fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.nvars, other.nvars);
        let mut out = Self::zeros(self.rows, other.cols, self.nvars);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self[(i, k)].is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    if other[(k, j)].is_zero() {
                        continue;
                    }
                    let prod = self[(i, k)].mul(&other[(k, j)]);
                    out[(i, j)] = out[(i, j)].add(&prod);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Poly::is_zero)
    }

    /// Applies a polynomial map entrywise.
    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> PolyMatrix {
        let data: Vec<Poly> = self.data.iter().map(&f).collect();
        let nvars = data.first().map_or(self.nvars, |p| p.nvars);
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars,
            data,
        }
    }

    /// Evaluates every entry at a rational point.
    pub fn eval_rat(&self, point: &[Rational]) -> RatMatrix {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|p| p.eval_rat(point)).collect(),
        }
    }

    pub fn eval_f64(&self, point: &[f64]) -> Vec<f64> {
        self.data.iter().map(|p| p.eval_f64(point)).collect()
    }

    pub fn mul_vec(&self, v: &[Poly]) -> Vec<Poly> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Poly::zero(self.nvars);
                for j in 0..self.cols {
                    if !self[(i, j)].is_zero() && !v[j].is_zero() {
                        acc = acc.add(&self[(i, j)].mul(&v[j]));
                    }
                }
                acc
            })
            .collect()
    }

    /// Exact exponential of a strictly nilpotent polynomial matrix.
    ///
    /// Requires `M^rows == 0`.
    pub fn exp_nilpotent(&self) -> Result<PolyMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut sum = PolyMatrix::identity(n, self.nvars);
        let mut power = PolyMatrix::identity(n, self.nvars);
        let mut factorial = Rational::one();
        for k in 1..=n {
            power = power.mul(self);
            if power.is_zero() {
                return Ok(sum);
            }
            if k == n {
                return Err(Error::input(format!(
                    "matrix is not nilpotent: M^{n} is nonzero"
                )));
            }
            factorial *= rint(k as i64);
            let inv = Rational::one() / &factorial;
            for (s, p) in sum.data.iter_mut().zip(power.data.iter()) {
                *s = s.add(&p.scale(&inv));
            }
        }
        Ok(sum)
    }

    /// Determinant by cofactor expansion with subset memoization; intended
    /// for the small orders that occur here.
    pub fn det(&self) -> Poly {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        assert!(n <= 16, "determinant order too large");
        if n == 0 {
            return Poly::one(self.nvars);
        }
        // dp over column subsets: minors of the top rows
        let mut memo: std::collections::HashMap<u32, Poly> = std::collections::HashMap::new();
        memo.insert(0, Poly::one(self.nvars));
        for row in 0..n {
            let mut next: std::collections::HashMap<u32, Poly> = std::collections::HashMap::new();
            for (mask, minor) in memo {
                if minor.is_zero() {
                    continue;
                }
                let mut sign = Rational::one();
                for col in 0..n {
                    let bit = 1u32 << col;
                    if mask & bit != 0 {
                        continue;
                    }
                    let entry = &self[(row, col)];
                    if !entry.is_zero() {
                        let contrib = minor.mul(entry).scale(&sign);
                        next.entry(mask | bit)
                            .and_modify(|p| *p = p.add(&contrib))
                            .or_insert(contrib);
                    }
                    sign = -sign;
                }
            }
            memo = next;
        }
        memo.remove(&((1u32 << n) - 1))
            .unwrap_or_else(|| Poly::zero(self.nvars))
    }
}

impl std::ops::Index<(usize, usize)> for PolyMatrix {
    type Output = Poly;
    fn index(&self, (i, j): (usize, usize)) -> &Poly {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for PolyMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Poly {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn s(i: usize) -> Poly {
        Poly::var(2, i)
    }

    #[test]
    fn arithmetic_and_eval() {
        // p = 2*s0^2 - 2*s1
        let p = s(0).mul(&s(0)).scale(&rint(2)).sub(&s(1).scale(&rint(2)));
        assert_eq!(p.eval_rat(&[rint(1), rint(0)]), rint(2));
        assert_eq!(p.eval_f64(&[1.0, 1.0]), 0.0);
        assert_eq!(p.degree_in(0), 2);
        assert_eq!(p.partial(0), s(0).scale(&rint(4)));
        assert_eq!(p.render(&["s1".into(), "s2".into()]), "2*s1^2 - 2*s2");
    }

    #[test]
    fn substitution() {
        // p(s0) = s0^2, substitute s0 -> t0 + t1 in a 2-var target ring
        let p = Poly::var(1, 0).mul(&Poly::var(1, 0));
        let q = p.subst(&[Poly::var(2, 0).add(&Poly::var(2, 1))]);
        let expected = Poly::var(2, 0)
            .mul(&Poly::var(2, 0))
            .add(&Poly::var(2, 0).mul(&Poly::var(2, 1)).scale(&rint(2)))
            .add(&Poly::var(2, 1).mul(&Poly::var(2, 1)));
        assert_eq!(q, expected);
    }

    #[test]
    fn exp_two_term_series() {
        // exp([[0, 2s], [0, 0]]) = [[1, 2s], [0, 1]]
        let mut m = PolyMatrix::zeros(2, 2, 1);
        m[(0, 1)] = Poly::var(1, 0).scale(&rint(2));
        let e = m.exp_nilpotent().unwrap();
        assert_eq!(e[(0, 0)], Poly::one(1));
        assert_eq!(e[(0, 1)], Poly::var(1, 0).scale(&rint(2)));
        assert_eq!(e[(1, 0)], Poly::zero(1));
        // exp(M) * exp(-M) = I
        let inv = m.neg().exp_nilpotent().unwrap();
        assert_eq!(e.mul(&inv), PolyMatrix::identity(2, 1));
    }

    #[test]
    fn determinant_matches_rational_route() {
        let mut m = PolyMatrix::zeros(3, 3, 1);
        m[(0, 0)] = Poly::one(1);
        m[(1, 0)] = Poly::var(1, 0).scale(&rat(-2, 1));
        m[(1, 1)] = Poly::one(1);
        m[(2, 0)] = Poly::var(1, 0).mul(&Poly::var(1, 0)).scale(&rint(2));
        m[(2, 1)] = Poly::var(1, 0).scale(&rint(-2));
        m[(2, 2)] = Poly::one(1);
        let d = m.det();
        assert_eq!(d, Poly::one(1));
        let point = [rat(3, 7)];
        assert_eq!(m.eval_rat(&point).det(), d.eval_rat(&point));
    }
}
