//! Nilpotent Lie algebras with rational structure constants and the
//! structural hypotheses required by the sampling pipeline.
//!
//! The basis is ordered Z_1..Z_p, A_1..A_m; the span of the Z's is the
//! ideal that acts as the constant polarization, the span of the A's is
//! the commutative complement.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::poly::{Poly, PolyMatrix};
use crate::rational::{parse_rational, rint, Rational};

/// Structure constants of a nilpotent Lie algebra over a fixed ordered
/// basis Z_1..Z_p, A_1..A_m (all indices 1-based).
///
/// Brackets are stored for i < j only; antisymmetry is synthesized.
#[derive(Debug, Clone)]
pub struct AlgebraSpec {
    pub name: String,
    pub n: usize,
    pub p_dim: usize,
    pub m_dim: usize,
    /// (i, j) with i < j  ->  coefficient vector of [X_i, X_j] as (k, c) pairs.
    pub brackets: BTreeMap<(usize, usize), Vec<(usize, Rational)>>,
}

impl AlgebraSpec {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        p_dim: usize,
        brackets: Vec<((usize, usize), Vec<(usize, Rational)>)>,
    ) -> Result<Self> {
        if p_dim == 0 || p_dim >= n {
            return Err(Error::input(format!(
                "p_dim must satisfy 0 < p_dim < dim (got p_dim={p_dim}, dim={n})"
            )));
        }
        let mut map = BTreeMap::new();
        for ((i, j), coeffs) in brackets {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::input(format!(
                    "bracket index ({i},{j}) out of range 1..={n}"
                )));
            }
            if i >= j {
                return Err(Error::input(format!(
                    "bracket ({i},{j}) must have i < j; antisymmetry is implied"
                )));
            }
            for (k, _) in &coeffs {
                if *k == 0 || *k > n {
                    return Err(Error::input(format!(
                        "bracket ({i},{j}) targets basis index {k} out of range"
                    )));
                }
            }
            let coeffs: Vec<(usize, Rational)> =
                coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            if map.insert((i, j), coeffs).is_some() {
                return Err(Error::parse(format!("duplicate bracket entry ({i},{j})")));
            }
        }
        Ok(AlgebraSpec {
            name: name.into(),
            n,
            p_dim,
            m_dim: n - p_dim,
            brackets: map,
        })
    }

    /// [X_i, X_j] as an n-vector, for any order of i, j.
    pub fn bracket_basis(&self, i: usize, j: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n];
        if i == j {
            return out;
        }
        let (a, b, sign) = if i < j { (i, j, 1) } else { (j, i, -1) };
        if let Some(coeffs) = self.brackets.get(&(a, b)) {
            for (k, c) in coeffs {
                out[*k - 1] = c * rint(sign);
            }
        }
        out
    }

    /// Bilinear antisymmetric extension of the structure constants.
    pub fn bracket(&self, x: &[Rational], y: &[Rational]) -> Result<Vec<Rational>> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::input(format!(
                "bracket expects vectors of length {}, got {} and {}",
                self.n,
                x.len(),
                y.len()
            )));
        }
        let mut out = vec![Rational::zero(); self.n];
        for ((i, j), coeffs) in &self.brackets {
            // contribution of x_i y_j - x_j y_i on [X_i, X_j]
            let f = &x[i - 1] * &y[j - 1] - &x[j - 1] * &y[i - 1];
            if f.is_zero() {
                continue;
            }
            for (k, c) in coeffs {
                out[*k - 1] += c * &f;
            }
        }
        Ok(out)
    }

    /// Basis vector X_k (1-based) as a coefficient vector.
    pub fn basis_vector(&self, k: usize) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n];
        v[k - 1] = rint(1);
        v
    }

    /// Matrix of ad(a) restricted to the ideal, in the basis Z_1..Z_p.
    ///
    /// `a` is an element of the complement, given either by its m
    /// coefficients on A_1..A_m or by a full n-vector whose Z-components
    /// must vanish. Column j holds the Z-coefficients of [a, Z_j].
    pub fn ad_restricted(&self, a_coeffs: &[Rational]) -> Result<RatMatrix> {
        let p = self.p_dim;
        let tail: &[Rational] = if a_coeffs.len() == self.m_dim {
            a_coeffs
        } else if a_coeffs.len() == self.n {
            if a_coeffs[..p].iter().any(|c| !c.is_zero()) {
                return Err(Error::input(
                    "element has nonzero components on the ideal basis".to_string(),
                ));
            }
            &a_coeffs[p..]
        } else {
            return Err(Error::input(format!(
                "expected {} complement coefficients (or a full {}-vector), got {}",
                self.m_dim,
                self.n,
                a_coeffs.len()
            )));
        };
        let mut a = vec![Rational::zero(); self.n];
        for (k, c) in tail.iter().enumerate() {
            a[p + k] = c.clone();
        }
        let mut m = RatMatrix::zeros(p, p);
        for j in 1..=p {
            let img = self.bracket(&a, &self.basis_vector(j))?;
            for (idx, c) in img.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if idx >= p {
                    return Err(Error::input(format!(
                        "ad(a) does not preserve the ideal: [a, Z_{j}] has a component on basis index {}",
                        idx + 1
                    )));
                }
                m[(idx, j - 1)] = c.clone();
            }
        }
        Ok(m)
    }

    /// Symbolic matrix of ad(s_1 A_1 + ... + s_m A_m) restricted to the
    /// ideal; entries are linear in the formal variables s_1..s_m.
    pub fn ad_restricted_symbolic(&self) -> Result<PolyMatrix> {
        let p = self.p_dim;
        let m_dim = self.m_dim;
        let mut out = PolyMatrix::zeros(p, p, m_dim);
        for k in 0..m_dim {
            let mut coeffs = vec![Rational::zero(); m_dim];
            coeffs[k] = rint(1);
            let mk = self.ad_restricted(&coeffs)?;
            let var = Poly::var(m_dim, k);
            for i in 0..p {
                for j in 0..p {
                    if !mk[(i, j)].is_zero() {
                        let term = var.scale(&mk[(i, j)]);
                        out[(i, j)] = out[(i, j)].add(&term);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix of exp(ad X_{p+k})|ideal (1-based k); exact rational entries.
    pub fn exp_ad_complement_generator(&self, k: usize) -> Result<RatMatrix> {
        let mut coeffs = vec![Rational::zero(); self.m_dim];
        coeffs[k - 1] = rint(1);
        self.ad_restricted(&coeffs)?.exp_nilpotent()
    }

    /// Checks the Jacobi identity on all basis triples and nilpotency of
    /// the algebra; whether the ideal spanned by the Z's really is an
    /// ideal is reported separately.
    pub fn verify_structure(&self) -> StructureReport {
        let mut report = StructureReport {
            jacobi_ok: true,
            first_jacobi_violation: None,
            nilpotent: true,
            p_is_ideal: true,
            passed: false,
        };
        'outer: for i in 1..=self.n {
            for j in (i + 1)..=self.n {
                for k in (j + 1)..=self.n {
                    let xi = self.basis_vector(i);
                    let xj = self.basis_vector(j);
                    let xk = self.basis_vector(k);
                    let t1 = self
                        .bracket(&xi, &self.bracket(&xj, &xk).unwrap())
                        .unwrap();
                    let t2 = self
                        .bracket(&xj, &self.bracket(&xk, &xi).unwrap())
                        .unwrap();
                    let t3 = self
                        .bracket(&xk, &self.bracket(&xi, &xj).unwrap())
                        .unwrap();
                    let ok = t1
                        .iter()
                        .zip(&t2)
                        .zip(&t3)
                        .all(|((a, b), c)| (a + b + c).is_zero());
                    if !ok {
                        report.jacobi_ok = false;
                        report.first_jacobi_violation = Some((i, j, k));
                        break 'outer;
                    }
                }
            }
        }
        report.nilpotent = self.is_nilpotent();
        report.p_is_ideal = self.p_is_ideal();
        report.passed = report.jacobi_ok && report.nilpotent;
        report
    }

    /// Lower central series terminates at zero.
    fn is_nilpotent(&self) -> bool {
        // Track a basis of the current term of the series.
        let mut current: Vec<Vec<Rational>> = (1..=self.n).map(|k| self.basis_vector(k)).collect();
        for _ in 0..=self.n {
            let mut next: Vec<Vec<Rational>> = Vec::new();
            for v in &current {
                for k in 1..=self.n {
                    let b = self.bracket(&self.basis_vector(k), v).unwrap();
                    if b.iter().any(|c| !c.is_zero()) {
                        next.push(b);
                    }
                }
            }
            if next.is_empty() {
                return true;
            }
            let next = reduce_to_basis(next);
            if next.len() == current.len() {
                // series stabilized at a nonzero algebra
                return false;
            }
            current = next;
        }
        false
    }

    fn p_is_ideal(&self) -> bool {
        for i in 1..=self.n {
            for j in 1..=self.p_dim {
                let b = self.bracket_basis(i, j);
                if b[self.p_dim..].iter().any(|c| !c.is_zero()) {
                    return false;
                }
            }
        }
        true
    }

    /// Runs the full hypothesis check: the ideal is a commutative
    /// polarization for generic functionals, the complement is commutative,
    /// the generic jump set has cardinality 2m and contains the complement
    /// indices, and the complement generators exponentiate to integer
    /// matrices on the ideal (so the integer points form a lattice).
    pub fn verify_condition1(&self, trials: usize, seed: u64) -> Result<ConditionReport> {
        let structure = self.verify_structure();
        if !structure.passed {
            return Err(Error::input(
                "structure verification failed; run verify_structure first".to_string(),
            ));
        }
        let p = self.p_dim;
        let m = self.m_dim;
        let mut diag: Vec<String> = Vec::new();

        let p_is_ideal = structure.p_is_ideal;
        if !p_is_ideal {
            diag.push("the span of Z_1..Z_p is not an ideal".into());
        }

        let mut p_commutative = true;
        'pc: for i in 1..=p {
            for j in (i + 1)..=p {
                if self.bracket_basis(i, j).iter().any(|c| !c.is_zero()) {
                    p_commutative = false;
                    diag.push(format!("[Z_{i}, Z_{j}] is nonzero; the ideal is not commutative"));
                    break 'pc;
                }
            }
        }

        let mut m_commutative = true;
        'mc: for i in (p + 1)..=self.n {
            for j in (i + 1)..=self.n {
                let b = self.bracket_basis(i, j);
                if b.iter().any(|c| !c.is_zero()) {
                    m_commutative = false;
                    let a_i = i - p;
                    let a_j = j - p;
                    if b[p..].iter().all(|c| c.is_zero()) {
                        diag.push(format!(
                            "[A_{a_i}, A_{a_j}] lands in the ideal but is nonzero; the complement is not commutative"
                        ));
                    } else {
                        diag.push(format!("[A_{a_i}, A_{a_j}] does not vanish"));
                    }
                    break 'mc;
                }
            }
        }

        // Generic jump data over random rational functionals.
        let (jump, tie) = crate::orbit::generic_jump_set(self, trials, seed);
        if let Some(msg) = tie {
            diag.push(msg);
        }
        let card = jump.indices.len();
        let m_indices_all_jump = ((p + 1)..=self.n).all(|k| jump.indices.contains(&k));
        if card != 2 * m {
            diag.push(format!(
                "generic jump set {:?} has cardinality {card}, expected {}",
                jump.indices,
                2 * m
            ));
        }
        if !m_indices_all_jump {
            diag.push(format!(
                "complement indices {:?} are not all jump indices (got {:?})",
                ((p + 1)..=self.n).collect::<Vec<_>>(),
                jump.indices
            ));
        }

        // Subordination is automatic once the ideal is commutative; check
        // maximality at sampled generic functionals: every complement
        // generator must pair nontrivially with the ideal.
        let mut p_is_constant_polarization = p_is_ideal && p_commutative;
        if p_is_constant_polarization {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x706f6c61);
            for _ in 0..trials.max(1) {
                let lam = random_rational_functional(&mut rng, self.n);
                let fun = crate::orbit::Functional::new(lam.clone());
                if crate::orbit::jump_indices(self, &fun).indices != jump.indices {
                    // off the generic stratum; skip
                    continue;
                }
                for aj in 1..=m {
                    let mut pairs_nontrivially = false;
                    for zi in 1..=p {
                        let b = self.bracket_basis(p + aj, zi);
                        let val: Rational = b
                            .iter()
                            .zip(lam.iter())
                            .map(|(c, l)| c * l)
                            .fold(Rational::zero(), |a, x| a + x);
                        if !val.is_zero() {
                            pairs_nontrivially = true;
                            break;
                        }
                    }
                    if !pairs_nontrivially {
                        p_is_constant_polarization = false;
                        diag.push(format!(
                            "A_{aj} pairs trivially with the ideal at a sampled generic functional; the ideal is not maximal"
                        ));
                        break;
                    }
                }
                if !p_is_constant_polarization {
                    break;
                }
            }
        }

        // Lattice condition: exp(ad A_k)|ideal has integer entries.
        let mut lattice_integral = true;
        for k in 1..=m {
            match self.exp_ad_complement_generator(k) {
                Ok(e) => {
                    if !e.is_integer_matrix() {
                        lattice_integral = false;
                        diag.push(format!(
                            "exp(ad A_{k}) restricted to the ideal has non-integer entries; the integer span is not preserved"
                        ));
                    }
                }
                Err(err) => {
                    lattice_integral = false;
                    diag.push(format!("exp(ad A_{k}) failed: {err}"));
                }
            }
        }

        let passed = p_is_ideal
            && p_commutative
            && m_commutative
            && m_indices_all_jump
            && p_is_constant_polarization
            && lattice_integral
            && card == 2 * m;
        Ok(ConditionReport {
            p_is_ideal,
            p_commutative,
            m_commutative,
            generic_jump_cardinality: card,
            generic_jump_set: jump.indices,
            m_indices_all_jump,
            p_is_constant_polarization,
            lattice_integral,
            passed,
            diagnostics: diag,
        })
    }
}

/// Draws a functional with independent coordinates of the form k/q,
/// k in [-1000, 1000], q in 1..=7.
pub fn random_rational_functional(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| {
            let k = rng.gen_range(-1000i64..=1000);
            let q = rng.gen_range(1i64..=7);
            crate::rational::rat(k, q)
        })
        .collect()
}

/// Extracts a maximal linearly independent subset by exact elimination.
fn reduce_to_basis(vectors: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
    let mut basis: Vec<(usize, Vec<Rational>)> = Vec::new();
    let mut kept = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for (lead, row) in &basis {
            if !w[*lead].is_zero() {
                let f = w[*lead].clone();
                for (x, b) in w.iter_mut().zip(row.iter()) {
                    let sub = &f * b;
                    *x -= sub;
                }
            }
        }
        if let Some(lead) = w.iter().position(|x| !x.is_zero()) {
            let inv = w[lead].clone();
            for x in w.iter_mut() {
                *x /= &inv;
            }
            basis.push((lead, w));
            kept.push(v);
        }
    }
    kept
}

/// Outcome of the basic structural checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StructureReport {
    pub jacobi_ok: bool,
    pub first_jacobi_violation: Option<(usize, usize, usize)>,
    pub nilpotent: bool,
    pub p_is_ideal: bool,
    pub passed: bool,
}

/// Outcome of the full hypothesis check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub p_is_ideal: bool,
    pub p_commutative: bool,
    pub m_commutative: bool,
    pub generic_jump_cardinality: usize,
    pub generic_jump_set: Vec<usize>,
    pub m_indices_all_jump: bool,
    pub p_is_constant_polarization: bool,
    pub lattice_integral: bool,
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Deserialize)]
struct BracketJson {
    i: usize,
    j: usize,
    coeffs: BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct AlgebraJson {
    name: String,
    dim: usize,
    p_dim: usize,
    brackets: Vec<BracketJson>,
}

/// Parses the JSON spec format:
/// `{"name", "dim", "p_dim", "brackets": [{"i", "j", "coeffs": {"k": "num/den" | int}}]}`.
pub fn parse_algebra_json(text: &str) -> Result<AlgebraSpec> {
    let parsed: AlgebraJson =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("algebra spec: {e}")))?;
    let mut brackets = Vec::new();
    for b in parsed.brackets {
        let mut coeffs = Vec::new();
        for (k, v) in b.coeffs {
            let k: usize = k
                .parse()
                .map_err(|_| Error::parse(format!("bracket ({},{}) has non-integer key {k:?}", b.i, b.j)))?;
            let c = match &v {
                serde_json::Value::String(s) => parse_rational(s)?,
                serde_json::Value::Number(num) => {
                    if let Some(i) = num.as_i64() {
                        rint(i)
                    } else {
                        return Err(Error::parse(format!(
                            "bracket ({},{}): coefficient {num} is not an integer; use \"num/den\"",
                            b.i, b.j
                        )));
                    }
                }
                other => {
                    return Err(Error::parse(format!(
                        "bracket ({},{}): unsupported coefficient {other}",
                        b.i, b.j
                    )))
                }
            };
            coeffs.push((k, c));
        }
        brackets.push(((b.i, b.j), coeffs));
    }
    AlgebraSpec::new(parsed.name, parsed.dim, parsed.p_dim, brackets)
}

/// Serializes back to the JSON spec format (used for content digests of
/// built-in algebras).
pub fn algebra_to_json(spec: &AlgebraSpec) -> String {
    let brackets: Vec<serde_json::Value> = spec
        .brackets
        .iter()
        .map(|((i, j), coeffs)| {
            let m: BTreeMap<String, String> = coeffs
                .iter()
                .map(|(k, c)| (k.to_string(), c.to_string()))
                .collect();
            serde_json::json!({"i": i, "j": j, "coeffs": m})
        })
        .collect();
    serde_json::json!({
        "name": spec.name,
        "dim": spec.n,
        "p_dim": spec.p_dim,
        "brackets": brackets,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::rational::rat;

    #[test]
    fn heisenberg_bracket_examples() {
        let h = corpus::get("heisenberg").unwrap();
        // [A_1, Z_2] = Z_1
        let a1 = h.basis_vector(3);
        let z2 = h.basis_vector(2);
        assert_eq!(h.bracket(&a1, &z2).unwrap(), h.basis_vector(1));
        // antisymmetry: [x, x] = 0
        let x = vec![rat(1, 2), rat(-3, 5), rat(7, 1)];
        assert!(h.bracket(&x, &x).unwrap().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn step3_bracket_example() {
        // [X_4, X_2] = 2 X_1 in the four-dimensional step-three algebra
        let a = corpus::get("dim4_step3").unwrap();
        let x4 = a.basis_vector(4);
        let x2 = a.basis_vector(2);
        let mut expect = vec![Rational::zero(); 4];
        expect[0] = rint(2);
        assert_eq!(a.bracket(&x4, &x2).unwrap(), expect);
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let h = corpus::get("heisenberg").unwrap();
        assert!(h.bracket(&[rint(1)], &h.basis_vector(1)).is_err());
    }

    #[test]
    fn ad_restricted_step3() {
        let a = corpus::get("dim4_step3").unwrap();
        let m = a.ad_restricted(&[rint(1)]).unwrap();
        assert_eq!(m, RatMatrix::from_i64(&[&[0, 2, 0], &[0, 0, 2], &[0, 0, 0]]));
    }

    #[test]
    fn ad_restricted_symbolic_remark_example() {
        let a = corpus::get("remark_5dim_example").unwrap();
        let m = a.ad_restricted_symbolic().unwrap();
        let t1 = Poly::var(2, 0);
        let t2 = Poly::var(2, 1);
        assert_eq!(m[(0, 1)], t2);
        assert_eq!(m[(0, 2)], t1);
        assert_eq!(m[(1, 2)], t2);
        assert!(m[(1, 0)].is_zero() && m[(2, 0)].is_zero() && m[(2, 1)].is_zero());
        assert!(m[(0, 0)].is_zero() && m[(1, 1)].is_zero() && m[(2, 2)].is_zero());
    }

    #[test]
    fn ad_rejects_ideal_escape() {
        // [A_1, Z_2] = A_1 itself: complement component, must be rejected
        let bad = AlgebraSpec::new(
            "bad",
            3,
            2,
            vec![((2, 3), vec![(3, rint(-1))])],
        )
        .unwrap();
        assert!(bad.ad_restricted(&[rint(1)]).is_err());
    }

    #[test]
    fn structure_pass_and_fail() {
        let h = corpus::get("heisenberg").unwrap();
        assert!(h.verify_structure().passed);

        // replace [A_1, Z_2] = Z_1 by Z_2: ad A_1 is no longer nilpotent
        let bad = AlgebraSpec::new("bad", 3, 2, vec![((2, 3), vec![(2, rint(-1))])]).unwrap();
        let rep = bad.verify_structure();
        assert!(rep.jacobi_ok);
        assert!(!rep.nilpotent);
        assert!(!rep.passed);

        let cx = corpus::get("counterexample_5dim").unwrap();
        assert!(cx.verify_structure().passed);
    }

    #[test]
    fn condition1_heisenberg_and_counterexample() {
        let h = corpus::get("heisenberg").unwrap();
        let rep = h.verify_condition1(25, 0xC0FFEE).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.generic_jump_cardinality, 2);
        assert_eq!(rep.generic_jump_set, vec![2, 3]);

        let cx = corpus::get("counterexample_5dim").unwrap();
        let rep = cx.verify_condition1(25, 0xC0FFEE).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.generic_jump_cardinality, 2);
        assert_ne!(rep.generic_jump_cardinality, 2 * cx.m_dim);
        assert!(rep
            .diagnostics
            .iter()
            .any(|d| d.contains("cardinality")));
    }

    #[test]
    fn condition1_stepk_family() {
        let a = corpus::get("stepk_m2").unwrap();
        let rep = a.verify_condition1(25, 0xC0FFEE).unwrap();
        assert!(rep.passed, "diagnostics: {:?}", rep.diagnostics);
        assert_eq!(rep.generic_jump_cardinality, 4);
    }

    #[test]
    fn condition1_rejects_non_integer_lattice() {
        // The five-dimensional illustration algebra fails only the
        // integrality of exp(ad A_2) on the ideal.
        let a = corpus::get("remark_5dim_example").unwrap();
        let rep = a.verify_condition1(25, 0xC0FFEE).unwrap();
        assert!(rep.p_is_ideal && rep.p_commutative && rep.m_commutative);
        assert!(rep.p_is_constant_polarization);
        assert_eq!(rep.generic_jump_cardinality, 4);
        assert!(!rep.lattice_integral);
        assert!(!rep.passed);
    }

    #[test]
    fn condition1_deterministic_and_stable_in_trials() {
        let h = corpus::get("heisenberg").unwrap();
        let a = h.verify_condition1(25, 7).unwrap();
        let b = h.verify_condition1(25, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for trials in [5, 25, 100] {
            assert!(h.verify_condition1(trials, 7).unwrap().passed);
        }
    }

    #[test]
    fn json_round_trip_and_duplicate_detection() {
        let text = r#"{
            "name": "heisenberg",
            "dim": 3,
            "p_dim": 2,
            "brackets": [{"i": 2, "j": 3, "coeffs": {"1": "-1"}}]
        }"#;
        let a = parse_algebra_json(text).unwrap();
        assert_eq!(a.n, 3);
        assert_eq!(a.bracket_basis(3, 2)[0], rint(1));

        let dup = r#"{
            "name": "dup",
            "dim": 3,
            "p_dim": 2,
            "brackets": [
                {"i": 2, "j": 3, "coeffs": {"1": "-1"}},
                {"i": 2, "j": 3, "coeffs": {"1": "1/2"}}
            ]
        }"#;
        let err = parse_algebra_json(dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }
}
