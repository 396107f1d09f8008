//! Coadjoint machinery: the skew pairing matrix, jump indices, the
//! cross-section of generic orbits, the unipotent action matrix, the
//! orbit map and its Jacobian, and the spectral density.

use num_traits::{Signed, Zero};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{random_rational_functional, AlgebraSpec};
use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::poly::{Poly, PolyMatrix};
use crate::rational::{to_f64, Rational};

/// Linear functional on the algebra, as exact coordinates in the dual basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Functional {
    pub coords: Vec<Rational>,
}

impl Functional {
    pub fn new(coords: Vec<Rational>) -> Self {
        Functional { coords }
    }

    pub fn zero(n: usize) -> Self {
        Functional {
            coords: vec![Rational::zero(); n],
        }
    }

    /// Applies the functional to a coefficient vector.
    pub fn apply(&self, v: &[Rational]) -> Rational {
        self.coords
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .fold(Rational::zero(), |a, x| a + x)
    }
}

/// Strictly increasing jump indices; the cardinality equals the rank of
/// the skew pairing matrix, hence the dimension of the coadjoint orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumpSet {
    pub indices: Vec<usize>,
}

impl JumpSet {
    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }
}

/// The skew matrix (j,k) -> lambda([X_j, X_k]).
pub fn m_matrix(spec: &AlgebraSpec, lambda: &Functional) -> RatMatrix {
    let n = spec.n;
    assert_eq!(lambda.coords.len(), n, "functional has wrong length");
    let mut m = RatMatrix::zeros(n, n);
    for j in 1..=n {
        for k in (j + 1)..=n {
            let v = lambda.apply(&spec.bracket_basis(j, k));
            if !v.is_zero() {
                m[(k - 1, j - 1)] = -v.clone();
                m[(j - 1, k - 1)] = v;
            }
        }
    }
    m
}

/// Jump indices of a functional: the columns at which the rank of the
/// column-truncated pairing matrix increases.
pub fn jump_indices(spec: &AlgebraSpec, lambda: &Functional) -> JumpSet {
    let m = m_matrix(spec, lambda);
    let ranks = m.prefix_ranks();
    let indices = (1..=spec.n)
        .filter(|&k| ranks[k] > ranks[k - 1])
        .collect();
    JumpSet { indices }
}

/// The jump set attained on the generic (Zariski-open) stratum, found by
/// sampling random rational functionals.
///
/// Among sampled sets of maximal cardinality the most frequent one is
/// returned; a diagnostic describes any tie between distinct sets of
/// maximal cardinality.
pub fn generic_jump_set(
    spec: &AlgebraSpec,
    trials: usize,
    seed: u64,
) -> (JumpSet, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: std::collections::BTreeMap<Vec<usize>, usize> = std::collections::BTreeMap::new();
    for _ in 0..trials.max(1) {
        let lam = Functional::new(random_rational_functional(&mut rng, spec.n));
        let e = jump_indices(spec, &lam);
        *counts.entry(e.indices).or_insert(0) += 1;
    }
    let max_card = counts.keys().map(|e| e.len()).max().unwrap_or(0);
    let maximal: Vec<(&Vec<usize>, &usize)> =
        counts.iter().filter(|(e, _)| e.len() == max_card).collect();
    let best = maximal
        .iter()
        .max_by_key(|(e, c)| (**c, std::cmp::Reverse((*e).clone())))
        .map(|(e, _)| (*e).clone())
        .unwrap_or_default();
    let diagnostic = if maximal.len() > 1 {
        Some(format!(
            "tie between {} distinct jump sets of cardinality {max_card}; reporting the most frequent",
            maximal.len()
        ))
    } else {
        None
    };
    (JumpSet { indices: best }, diagnostic)
}

/// Description of the cross-section of generic orbits: functionals
/// vanishing on the jump-index basis vectors, identified with the free
/// coordinates (the complement of the jump set).
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub n: usize,
    pub p_dim: usize,
    /// 1-based basis indices of the free coordinates (all <= p).
    pub free: Vec<usize>,
    /// 1-based jump indices.
    pub jump: Vec<usize>,
}

impl CrossSection {
    /// Embeds free coordinates into a full functional with zeros at the
    /// jump indices.
    pub fn embed(&self, sigma: &[Rational]) -> Result<Functional> {
        if sigma.len() != self.free.len() {
            return Err(Error::input(format!(
                "expected {} free coordinates, got {}",
                self.free.len(),
                sigma.len()
            )));
        }
        let mut coords = vec![Rational::zero(); self.n];
        for (idx, val) in self.free.iter().zip(sigma) {
            coords[idx - 1] = val.clone();
        }
        Ok(Functional::new(coords))
    }

    /// The ideal-dual part (first p coordinates) of an embedded point.
    pub fn embed_ideal_part(&self, sigma: &[Rational]) -> Result<Vec<Rational>> {
        Ok(self.embed(sigma)?.coords[..self.p_dim].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }
}

/// Computes the cross-section for a given jump set.
pub fn cross_section(spec: &AlgebraSpec, e: &JumpSet) -> Result<CrossSection> {
    if e.cardinality() % 2 != 0 {
        return Err(Error::input(format!(
            "jump set {:?} has odd cardinality; the skew pairing rank must be even",
            e.indices
        )));
    }
    let free: Vec<usize> = (1..=spec.n).filter(|k| !e.indices.contains(k)).collect();
    Ok(CrossSection {
        n: spec.n,
        p_dim: spec.p_dim,
        free,
        jump: e.indices.clone(),
    })
}

/// The unipotent matrix that realizes the coadjoint action of the
/// complement on the dual of the ideal: the transpose of
/// exp(-ad(t_1 A_1 + ... + t_m A_m)) restricted to the ideal.
///
/// Entries are polynomials in t_1..t_m; the value at t = 0 is the identity.
pub fn pa_matrix(spec: &AlgebraSpec) -> Result<PolyMatrix> {
    let ad = spec.ad_restricted_symbolic()?;
    Ok(ad.neg().exp_nilpotent()?.transpose())
}

/// Precomputed data for the orbit map beta(sigma, t): the action matrix,
/// its symbolic application to an embedded cross-section point, and the
/// Jacobian determinant.
#[derive(Debug, Clone)]
pub struct OrbitMap {
    pub cross: CrossSection,
    /// Action matrix in the t-variables only (m vars).
    pub pa: PolyMatrix,
    /// Components of beta as polynomials in (free coords, t): nfree + m vars.
    pub beta: Vec<Poly>,
    /// Jacobian of beta in the combined variables; square of order p.
    pub jacobian: PolyMatrix,
    /// det of the Jacobian (polynomial in free coords and t).
    pub jac_det: Poly,
    /// Spectral density: |jac_det| at t = 0, as a polynomial in the free
    /// coordinates (sign not yet taken).
    pub density: Poly,
}

/// Builds the orbit map for an algebra whose generic jump data is already
/// known to be consistent (free coordinate count + m = p).
pub fn orbit_map(spec: &AlgebraSpec, trials: usize, seed: u64) -> Result<OrbitMap> {
    let (e, _) = generic_jump_set(spec, trials, seed);
    let cross = cross_section(spec, &e)?;
    if cross.free.iter().any(|&k| k > spec.p_dim) {
        return Err(Error::rejection(format!(
            "free coordinates {:?} leave the ideal dual; the orbit map is not defined",
            cross.free
        )));
    }
    let nfree = cross.free.len();
    let m = spec.m_dim;
    let p = spec.p_dim;
    if nfree + m != p {
        return Err(Error::rejection(format!(
            "free coordinate count {nfree} plus complement dimension {m} does not equal ideal dimension {p}; \
             the orbit map is not square"
        )));
    }
    let nvars = nfree + m;
    let pa = pa_matrix(spec)?;
    // Lift the action matrix into the combined variable ring (free first).
    let lift: Vec<Poly> = (0..m).map(|k| Poly::var(nvars, nfree + k)).collect();
    let pa_lifted = pa.map(|entry| entry.subst(&lift));
    // Embedded ideal-dual vector: free coordinate j at basis index free[j].
    let mut f = vec![Poly::zero(nvars); p];
    for (j, &idx) in cross.free.iter().enumerate() {
        f[idx - 1] = Poly::var(nvars, j);
    }
    let beta = pa_lifted.mul_vec(&f);
    let mut jacobian = PolyMatrix::zeros(p, nvars, nvars);
    for (i, b) in beta.iter().enumerate() {
        for v in 0..nvars {
            jacobian[(i, v)] = b.partial(v);
        }
    }
    let jac_det = jacobian.det();
    let t_vars: Vec<usize> = (nfree..nvars).collect();
    let density = jac_det.set_zero(&t_vars).restrict_vars(nfree);
    Ok(OrbitMap {
        cross,
        pa,
        beta,
        jacobian,
        jac_det,
        density,
    })
}

impl OrbitMap {
    pub fn nfree(&self) -> usize {
        self.cross.free.len()
    }

    pub fn m_dim(&self) -> usize {
        self.beta.len() - self.nfree()
    }

    /// beta at an exact point.
    pub fn beta_rat(&self, sigma: &[Rational], t: &[Rational]) -> Result<Vec<Rational>> {
        self.check_dims(sigma.len(), t.len())?;
        let point: Vec<Rational> = sigma.iter().chain(t).cloned().collect();
        Ok(self.beta.iter().map(|b| b.eval_rat(&point)).collect())
    }

    /// beta at a floating point.
    pub fn beta_f64(&self, sigma: &[f64], t: &[f64]) -> Vec<f64> {
        let point: Vec<f64> = sigma.iter().chain(t).copied().collect();
        self.beta.iter().map(|b| b.eval_f64(&point)).collect()
    }

    /// |det J| at an exact cross-section point (t = 0).
    pub fn density_rat(&self, sigma: &[Rational]) -> Result<Rational> {
        if sigma.len() != self.nfree() {
            return Err(Error::input(format!(
                "expected {} free coordinates, got {}",
                self.nfree(),
                sigma.len()
            )));
        }
        Ok(self.density.eval_rat(sigma).abs())
    }

    pub fn density_f64(&self, sigma: &[f64]) -> f64 {
        self.density.eval_f64(sigma).abs()
    }

    fn check_dims(&self, ns: usize, nt: usize) -> Result<()> {
        if ns != self.nfree() || nt != self.m_dim() {
            return Err(Error::input(format!(
                "expected {} free and {} t coordinates, got {} and {}",
                self.nfree(),
                self.m_dim(),
                ns,
                nt
            )));
        }
        Ok(())
    }
}

/// Spectral density as a displayable object.
#[derive(Debug, Clone)]
pub struct PlancherelDensity {
    pub poly: Poly,
    pub free_names: Vec<String>,
}

impl PlancherelDensity {
    pub fn render(&self) -> String {
        format!("|{}|", self.poly.render(&self.free_names))
    }
}

pub fn plancherel_density(map: &OrbitMap) -> PlancherelDensity {
    PlancherelDensity {
        poly: map.density.clone(),
        free_names: map
            .cross
            .free
            .iter()
            .map(|k| format!("l{k}"))
            .collect(),
    }
}

/// The skew submatrix of the pairing matrix on the jump indices.
pub fn b_matrix(spec: &AlgebraSpec, lambda: &Functional, e: &JumpSet) -> RatMatrix {
    let m = m_matrix(spec, lambda);
    let k = e.indices.len();
    let mut out = RatMatrix::zeros(k, k);
    for (a, &i) in e.indices.iter().enumerate() {
        for (b, &j) in e.indices.iter().enumerate() {
            out[(a, b)] = m[(i - 1, j - 1)].clone();
        }
    }
    out
}

/// det B(lambda) as an exact rational, or a non-generic flag when it
/// vanishes. The spectral density from this route is |det B|^(1/2).
pub fn b_det(spec: &AlgebraSpec, lambda: &Functional, e: &JumpSet) -> Option<Rational> {
    let d = b_matrix(spec, lambda, e).det();
    if d.is_zero() {
        None
    } else {
        Some(d)
    }
}

/// Ratio |det B|^(1/2) / |det J_beta(.,0)| at a cross-section point, as the
/// pair (det B, density^2) for exact constancy checks.
pub fn density_ratio_squared(
    spec: &AlgebraSpec,
    map: &OrbitMap,
    sigma: &[Rational],
) -> Result<Option<Rational>> {
    let lam = map.cross.embed(sigma)?;
    let e = JumpSet {
        indices: map.cross.jump.clone(),
    };
    let Some(detb) = b_det(spec, &lam, &e) else {
        return Ok(None);
    };
    let dens = map.density_rat(sigma)?;
    if dens.is_zero() {
        return Ok(None);
    }
    Ok(Some(detb.abs() / (&dens * &dens)))
}

/// One exact Rational with |.|: helper for printing densities.
pub fn density_value_f64(d: &Rational) -> f64 {
    to_f64(d).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::rational::{rat, rint};

    fn functional_i64(v: &[i64]) -> Functional {
        Functional::new(v.iter().map(|&x| rint(x)).collect())
    }

    #[test]
    fn m_matrix_heisenberg_dual_generator() {
        let h = corpus::get("heisenberg").unwrap();
        let lam = functional_i64(&[1, 0, 0]);
        let m = m_matrix(&h, &lam);
        assert_eq!(
            m,
            RatMatrix::from_i64(&[&[0, 0, 0], &[0, 0, -1], &[0, 1, 0]])
        );
    }

    #[test]
    fn m_matrix_step3_displayed_entries() {
        let a = corpus::get("dim4_step3").unwrap();
        let lam = Functional::new(vec![rat(3, 2), rat(-1, 3), rint(5), rint(7)]);
        let m = m_matrix(&a, &lam);
        // (2,4) entry: lambda([X_2, X_4]) = -2 lambda_1
        assert_eq!(m[(1, 3)], rat(-3, 1));
        assert_eq!(m[(2, 3)], rat(2, 3));
        assert_eq!(m[(3, 1)], rat(3, 1));
        // exact skewness
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], -m[(j, i)].clone());
            }
        }
    }

    #[test]
    fn jump_indices_step3_strata() {
        let a = corpus::get("dim4_step3").unwrap();
        let e = jump_indices(&a, &functional_i64(&[1, 0, 0, 0]));
        assert_eq!(e.indices, vec![2, 4]);
        let e = jump_indices(&a, &functional_i64(&[0, 1, 0, 0]));
        assert_eq!(e.indices, vec![3, 4]);
        let e = jump_indices(&a, &Functional::zero(4));
        assert!(e.indices.is_empty());
    }

    #[test]
    fn jump_cardinality_equals_rank() {
        let a = corpus::get("remark_5dim_example").unwrap();
        let lam = Functional::new(vec![rat(2, 3), rat(-5, 7), rint(1), rint(4), rat(9, 2)]);
        let e = jump_indices(&a, &lam);
        assert_eq!(e.cardinality(), m_matrix(&a, &lam).rank());
    }

    #[test]
    fn generic_jump_sets_of_the_corpus() {
        for (key, expect) in [
            ("heisenberg", vec![2usize, 3]),
            ("heisenberg_plus_r", vec![2, 4]),
            ("dim4_step3", vec![2, 4]),
            ("remark_5dim_example", vec![2, 3, 4, 5]),
            ("counterexample_5dim", vec![3, 4]),
            ("stepk_m2", vec![2, 3, 4, 5]),
        ] {
            let spec = corpus::get(key).unwrap();
            let (e, _) = generic_jump_set(&spec, 25, 0xC0FFEE);
            assert_eq!(e.indices, expect, "{key}");
        }
    }

    #[test]
    fn cross_sections_of_the_corpus() {
        for (key, free) in [
            ("heisenberg", vec![1usize]),
            ("heisenberg_plus_r", vec![1, 3]),
            ("dim4_step3", vec![1, 3]),
            ("stepk_m3", vec![1]),
        ] {
            let spec = corpus::get(key).unwrap();
            let (e, _) = generic_jump_set(&spec, 25, 0xC0FFEE);
            let cs = cross_section(&spec, &e).unwrap();
            assert_eq!(cs.free, free, "{key}");
        }
    }

    #[test]
    fn odd_jump_set_rejected() {
        let spec = corpus::get("heisenberg").unwrap();
        let odd = JumpSet { indices: vec![2] };
        assert!(cross_section(&spec, &odd).is_err());
    }

    #[test]
    fn pa_matrix_remark_example() {
        let a = corpus::get("remark_5dim_example").unwrap();
        let pa = pa_matrix(&a).unwrap();
        let t1 = Poly::var(2, 0);
        let t2 = Poly::var(2, 1);
        assert_eq!(pa[(0, 0)], Poly::one(2));
        assert_eq!(pa[(1, 0)], t2.neg());
        assert_eq!(pa[(2, 0)], t2.mul(&t2).scale(&rat(1, 2)).sub(&t1));
        assert_eq!(pa[(2, 1)], t2.neg());
        assert_eq!(pa[(0, 1)], Poly::zero(2));
        // t = 0 gives the identity
        assert_eq!(
            pa.eval_rat(&[rint(0), rint(0)]),
            RatMatrix::identity(3)
        );
    }

    #[test]
    fn pa_matrix_heisenberg() {
        let h = corpus::get("heisenberg").unwrap();
        let pa = pa_matrix(&h).unwrap();
        assert_eq!(pa[(0, 0)], Poly::one(1));
        assert_eq!(pa[(1, 0)], Poly::var(1, 0).neg());
        assert_eq!(pa[(1, 1)], Poly::one(1));
        assert_eq!(pa[(0, 1)], Poly::zero(1));
    }

    #[test]
    fn beta_step3_closed_form() {
        // beta(l1, l3, t) = (l1, -2 t l1, 2 l1 t^2 + l3)
        let a = corpus::get("dim4_step3").unwrap();
        let map = orbit_map(&a, 25, 0xC0FFEE).unwrap();
        let sigma = [rat(3, 7), rat(-2, 5)];
        let t = [rat(1, 3)];
        let b = map.beta_rat(&sigma, &t).unwrap();
        assert_eq!(b[0], rat(3, 7));
        assert_eq!(b[1], rat(-2, 7)); // -2 * 1/3 * 3/7
        assert_eq!(b[2], rat(2, 21) + rat(-2, 5)); // 2 * 3/7 * 1/9 + l3
        // t = 0 leaves the ideal part unchanged
        let b0 = map.beta_rat(&sigma, &[rint(0)]).unwrap();
        assert_eq!(b0, map.cross.embed_ideal_part(&sigma).unwrap());
    }

    #[test]
    fn beta_heisenberg_and_jacobian_value() {
        let h = corpus::get("heisenberg").unwrap();
        let map = orbit_map(&h, 25, 0xC0FFEE).unwrap();
        let b = map.beta_rat(&[rat(5, 4)], &[rat(1, 2)]).unwrap();
        assert_eq!(b, vec![rat(5, 4), rat(-5, 8)]);
        // density |l1|
        assert_eq!(map.density_rat(&[rat(-5, 4)]).unwrap(), rat(5, 4));
    }

    #[test]
    fn jacobian_det_is_t_independent() {
        for key in ["heisenberg", "dim4_step3", "remark_5dim_example", "stepk_m2"] {
            let spec = corpus::get(key).unwrap();
            let map = orbit_map(&spec, 25, 0xC0FFEE).unwrap();
            let nfree = map.nfree();
            let t_deg: u32 = (nfree..nfree + map.m_dim())
                .map(|v| map.jac_det.degree_in(v))
                .sum();
            assert_eq!(t_deg, 0, "{key}: det depends on t");
        }
    }

    #[test]
    fn finite_difference_jacobian_matches_symbolic() {
        let a = corpus::get("dim4_step3").unwrap();
        let map = orbit_map(&a, 25, 0xC0FFEE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for _ in 0..20 {
            let pt: Vec<f64> = (0..3)
                .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                .collect();
            for i in 0..3 {
                for v in 0..3 {
                    let sym = map.jacobian[(i, v)].eval_f64(&pt);
                    let mut up = pt.clone();
                    let mut dn = pt.clone();
                    up[v] += h;
                    dn[v] -= h;
                    let beta_at = |q: &[f64]| map.beta[i].eval_f64(q);
                    let fd = (beta_at(&up) - beta_at(&dn)) / (2.0 * h);
                    let tol = 1e-6 * (1.0 + sym.abs());
                    assert!((sym - fd).abs() < tol, "entry ({i},{v}): {sym} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn b_matrix_heisenberg() {
        let h = corpus::get("heisenberg").unwrap();
        let e = JumpSet { indices: vec![2, 3] };
        let lam = Functional::new(vec![rat(7, 2), rint(0), rint(0)]);
        let b = b_matrix(&h, &lam, &e);
        assert_eq!(b[(0, 1)], rat(-7, 2));
        assert_eq!(b[(1, 0)], rat(7, 2));
        assert_eq!(b_det(&h, &lam, &e).unwrap(), rat(49, 4));
        // non-generic functional flagged
        let lam0 = Functional::new(vec![rint(0), rint(1), rint(0)]);
        assert!(b_det(&h, &lam0, &e).is_none());
    }

    #[test]
    fn density_ratio_constant_over_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        for key in ["heisenberg", "dim4_step3", "stepk_m2", "remark_5dim_example"] {
            let spec = corpus::get(key).unwrap();
            let map = orbit_map(&spec, 25, 0xC0FFEE).unwrap();
            let mut seen: Option<Rational> = None;
            let mut count = 0;
            while count < 100 {
                let sigma: Vec<Rational> = (0..map.nfree())
                    .map(|_| {
                        let k = rand::Rng::gen_range(&mut rng, -1000i64..=1000);
                        let q = rand::Rng::gen_range(&mut rng, 1i64..=7);
                        rat(k, q)
                    })
                    .collect();
                match density_ratio_squared(&spec, &map, &sigma).unwrap() {
                    None => continue,
                    Some(r) => {
                        count += 1;
                        match &seen {
                            None => seen = Some(r),
                            Some(prev) => assert_eq!(prev, &r, "{key}: ratio varies"),
                        }
                    }
                }
            }
        }
    }
}
