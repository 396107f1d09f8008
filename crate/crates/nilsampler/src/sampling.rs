//! Bandwidth bounds, fundamental-domain containment, tiling checks, and
//! automorphism-dilated lattices.

use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::AlgebraSpec;
use crate::bernstein::{sup_abs_row_sum, Enclosure};
use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::orbit::OrbitMap;
use crate::rational::{format_rational, parse_rational, rat, to_f64, Rational};

/// Product of intervals in the free coordinates of the cross-section.
///
/// Bounds are exact rationals (decimal CLI input converts exactly); empty
/// axes (lo == hi) are allowed, inverted axes are not.
#[derive(Debug, Clone)]
pub struct SpectralBox {
    pub intervals: Vec<(Rational, Rational)>,
}

impl SpectralBox {
    pub fn new(intervals: Vec<(Rational, Rational)>) -> Result<Self> {
        for (lo, hi) in &intervals {
            if lo > hi {
                return Err(Error::input(format!(
                    "box interval [{}, {}] has lo > hi",
                    format_rational(lo),
                    format_rational(hi)
                )));
            }
        }
        Ok(SpectralBox { intervals })
    }

    /// Symmetric box (-eps, eps)^dim.
    pub fn symmetric(eps: &Rational, dim: usize) -> Self {
        SpectralBox {
            intervals: vec![(-eps.clone(), eps.clone()); dim],
        }
    }

    /// Parses "lo1,hi1,lo2,hi2,..." with exact rational/decimal entries.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 2 * dim {
            return Err(Error::input(format!(
                "box has {} numbers but the cross-section needs {} (lo,hi per free coordinate)",
                parts.len(),
                2 * dim
            )));
        }
        let vals: Vec<Rational> = parts
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<_>>()?;
        Self::new(vals.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect())
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.iter().any(|(lo, hi)| lo == hi)
    }

    pub fn f64_bounds(&self) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|(lo, hi)| (to_f64(lo), to_f64(hi)))
            .collect()
    }

    /// True when the box fits inside (-eps, eps)^dim (exact comparison).
    pub fn contained_in_symmetric(&self, eps: &Rational) -> bool {
        let neg = -eps.clone();
        self.intervals.iter().all(|(lo, hi)| &neg <= lo && hi <= eps)
    }

    pub fn describe(&self) -> String {
        self.intervals
            .iter()
            .map(|(lo, hi)| format!("({}, {})", format_rational(lo), format_rational(hi)))
            .collect::<Vec<_>>()
            .join(" x ")
    }
}

/// Two-sided bound on a supremum, with the exact value when it was pinned
/// to a box corner.
#[derive(Debug, Clone, Serialize)]
pub struct NormBound {
    pub lower: f64,
    pub upper: f64,
    #[serde(serialize_with = "ser_opt_rat")]
    pub exact: Option<Rational>,
}

fn ser_opt_rat<S: serde::Serializer>(
    x: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

impl NormBound {
    fn from_enclosure(e: Enclosure) -> Self {
        NormBound {
            lower: to_f64(&e.lower),
            upper: to_f64(&e.upper),
            exact: if e.exact { Some(e.upper) } else { None },
        }
    }
}

/// Supremum over the closed unit cube of the max-row-sum matrix norm of a
/// polynomial matrix (the operator norm induced by the max-norm).
pub fn sup_inf_norm(matrix: &crate::poly::PolyMatrix, tol: f64) -> Result<NormBound> {
    if tol <= 0.0 {
        return Err(Error::input("tolerance must be positive".to_string()));
    }
    let tol_rat = parse_rational(&format!("{tol:e}")).unwrap_or_else(|_| rat(1, 1_000_000));
    Ok(NormBound::from_enclosure(sup_abs_row_sum(
        matrix, &tol_rat, 20_000,
    )))
}

/// Bandwidth bound: delta = (2 sup ||P(A(s))||_inf)^(-1) with the sup over
/// the unit cube in the complement coordinates.
///
/// The sup over the half-open cube equals the max over the closed cube by
/// continuity, and the unipotent action matrix always has sup >= 1.
pub fn delta_bound(spec: &AlgebraSpec, tol: f64) -> Result<NormBound> {
    let pa = crate::orbit::pa_matrix(spec)?;
    let sup = sup_inf_norm(&pa, tol)?;
    let two = rat(2, 1);
    Ok(NormBound {
        lower: 1.0 / (2.0 * sup.upper),
        upper: 1.0 / (2.0 * sup.lower),
        exact: sup.exact.map(|s| (&two * &s).recip()),
    })
}

/// Result of a containment or tiling check for a spectral box.
#[derive(Debug, Clone, Serialize)]
pub struct DomainCheck {
    pub contained: bool,
    /// "rigorous" when certified by the bandwidth bound, "empirical" when
    /// established only by sampling.
    pub tier: String,
    /// Spectral measure of the box (equals the Lebesgue measure of its
    /// orbit-map image over one period cell).
    pub mu_measure: f64,
    pub lebesgue_measure_of_image: f64,
    pub collision_rate: f64,
    pub samples_used: usize,
    pub tiling: Option<bool>,
    pub witness: Option<String>,
}

/// Midpoint quadrature of the spectral density |det J| over the box.
///
/// Node counts shrink with dimension to keep the sweep bounded.
pub fn mu_measure_quadrature(map: &OrbitMap, box_: &SpectralBox) -> f64 {
    let dim = box_.dim();
    let nodes_per_axis = match dim {
        0 => 1,
        1 => 4096,
        2 => 512,
        3 => 96,
        _ => 24,
    };
    let bounds = box_.f64_bounds();
    let mut cell = 1.0;
    for (lo, hi) in &bounds {
        cell *= (hi - lo) / nodes_per_axis as f64;
    }
    if cell == 0.0 {
        return 0.0;
    }
    let total_nodes: usize = pow_usize(nodes_per_axis, dim);
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut total = 0.0;
    for flat in 0..total_nodes {
        let mut rem = flat;
        for d in (0..dim).rev() {
            idx[d] = rem % nodes_per_axis;
            rem /= nodes_per_axis;
        }
        for d in 0..dim {
            let (lo, hi) = bounds[d];
            point[d] = lo + (idx[d] as f64 + 0.5) * (hi - lo) / nodes_per_axis as f64;
        }
        total += map.density_f64(&point);
    }
    total * cell
}

fn pow_usize(n: usize, d: usize) -> usize {
    (0..d).fold(1usize, |acc, _| acc.saturating_mul(n))
}

/// Checks that the orbit-map image of box x [0,1)^m lies in the centered
/// unit cube (hence in a fundamental domain of the integer lattice).
///
/// Tier one is rigorous: a box inside (-delta, delta)^dim is certified by
/// the bandwidth bound. Tier two is empirical Monte Carlo on the image.
pub fn check_containment(
    spec: &AlgebraSpec,
    map: &OrbitMap,
    box_: &SpectralBox,
    samples: usize,
    seed: u64,
) -> Result<DomainCheck> {
    check_box_dim(map, box_)?;
    let mu = mu_measure_quadrature(map, box_);
    let delta = delta_bound(spec, 1e-9)?;
    let tier_one = match &delta.exact {
        Some(exact_delta) => box_.contained_in_symmetric(exact_delta),
        None => box_
            .f64_bounds()
            .iter()
            .all(|(lo, hi)| -delta.lower <= *lo && *hi <= delta.lower),
    };
    if tier_one {
        return Ok(DomainCheck {
            contained: true,
            tier: "rigorous".to_string(),
            mu_measure: mu,
            lebesgue_measure_of_image: mu,
            collision_rate: 0.0,
            samples_used: 0,
            tiling: None,
            witness: None,
        });
    }
    // tier two: Monte Carlo over box x [0,1)^m
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = box_.f64_bounds();
    let m = map.m_dim();
    let mut contained = true;
    let mut witness = None;
    let mut sigma = vec![0.0; bounds.len()];
    let mut t = vec![0.0; m];
    for _ in 0..samples {
        for (d, (lo, hi)) in bounds.iter().enumerate() {
            sigma[d] = if lo < hi { rng.gen_range(*lo..*hi) } else { *lo };
        }
        for v in t.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let image = map.beta_f64(&sigma, &t);
        if image.iter().any(|x| x.abs() >= 0.5) {
            contained = false;
            if witness.is_none() {
                witness = Some(format!(
                    "beta({sigma:?}, {t:?}) = {image:?} leaves (-1/2,1/2)^p"
                ));
            }
        }
    }
    Ok(DomainCheck {
        contained,
        tier: "empirical".to_string(),
        mu_measure: mu,
        lebesgue_measure_of_image: mu,
        collision_rate: 0.0,
        samples_used: samples,
        tiling: None,
        witness,
    })
}

/// Estimates whether the image of box x [0,1)^m tiles the torus: the
/// Lebesgue measure of the image must be 1 and the reduction mod the
/// integer lattice must cover without collisions.
///
/// Coverage is estimated by cell occupancy on a mesh; the collision rate
/// is the image measure minus the covered measure (clamped at zero), so a
/// proper tiling yields measure 1 and collision rate 0.
pub fn check_tiling(
    spec: &AlgebraSpec,
    map: &OrbitMap,
    box_: &SpectralBox,
    samples: usize,
    seed: u64,
) -> Result<DomainCheck> {
    check_box_dim(map, box_)?;
    let mut out = check_containment(spec, map, box_, samples, seed)?;
    if box_.is_empty() {
        out.tiling = Some(false);
        return Ok(out);
    }
    let p = spec.p_dim;
    // mesh resolution: 64 cells per axis, capped at 2^24 cells in total
    let mut cells_per_axis = 64usize;
    while pow_usize(cells_per_axis, p) > (1 << 24) && cells_per_axis > 2 {
        cells_per_axis /= 2;
    }
    let total_cells = pow_usize(cells_per_axis, p);
    let mut hit = vec![false; total_cells];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7469_6c65);
    let bounds = box_.f64_bounds();
    let m = map.m_dim();
    let mut sigma = vec![0.0; bounds.len()];
    let mut t = vec![0.0; m];
    for _ in 0..samples {
        for (d, (lo, hi)) in bounds.iter().enumerate() {
            sigma[d] = rng.gen_range(*lo..*hi);
        }
        for v in t.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let image = map.beta_f64(&sigma, &t);
        let mut flat = 0usize;
        for x in &image {
            let frac = x - x.floor();
            let cell = ((frac * cells_per_axis as f64) as usize).min(cells_per_axis - 1);
            flat = flat * cells_per_axis + cell;
        }
        hit[flat] = true;
    }
    let coverage = hit.iter().filter(|h| **h).count() as f64 / total_cells as f64;
    let overlap = (out.mu_measure - coverage).max(0.0);
    out.collision_rate = overlap / out.mu_measure.max(f64::MIN_POSITIVE);
    out.samples_used = samples;
    out.tiling = Some((out.mu_measure - 1.0).abs() < 5e-3 && out.collision_rate < 1e-2);
    Ok(out)
}

fn check_box_dim(map: &OrbitMap, box_: &SpectralBox) -> Result<()> {
    if box_.dim() != map.nfree() {
        return Err(Error::input(format!(
            "box dimension {} does not match the cross-section dimension {}",
            box_.dim(),
            map.nfree()
        )));
    }
    Ok(())
}

/// Outcome of mapping the lattice generators through a linear map.
#[derive(Debug, Clone, Serialize)]
pub struct DilationReport {
    pub automorphism: bool,
    pub first_violation: Option<String>,
    /// Images of the lattice generators (basis coefficient vectors).
    pub generators: Vec<Vec<String>>,
}

/// Applies a rational matrix to the lattice generators, accepting it only
/// when it is a Lie-algebra automorphism (checked exactly on basis pairs).
///
/// The sampling property transfers to the image lattice; nothing further
/// is re-verified here.
pub fn dilate_sampling_set(spec: &AlgebraSpec, alpha: &RatMatrix) -> Result<DilationReport> {
    if alpha.rows != spec.n || alpha.cols != spec.n {
        return Err(Error::input(format!(
            "dilation matrix must be {0}x{0}",
            spec.n
        )));
    }
    if alpha.det().is_zero() {
        return Err(Error::input("dilation matrix is singular".to_string()));
    }
    let col =
        |j: usize| -> Vec<Rational> { (0..spec.n).map(|i| alpha[(i, j - 1)].clone()).collect() };
    let name = |k: usize| {
        if k <= spec.p_dim {
            format!("Z_{k}")
        } else {
            format!("A_{}", k - spec.p_dim)
        }
    };
    let mut first_violation = None;
    'outer: for i in 1..=spec.n {
        for j in (i + 1)..=spec.n {
            let lhs = spec.bracket(&col(i), &col(j))?;
            let rhs = alpha.mul_vec(&spec.bracket_basis(i, j));
            if lhs != rhs {
                first_violation = Some(format!(
                    "[alpha {}, alpha {}] != alpha [{}, {}]",
                    name(i),
                    name(j),
                    name(i),
                    name(j)
                ));
                break 'outer;
            }
        }
    }
    let automorphism = first_violation.is_none();
    let generators = if automorphism {
        (1..=spec.n)
            .map(|j| col(j).iter().map(format_rational).collect())
            .collect()
    } else {
        Vec::new()
    };
    Ok(DilationReport {
        automorphism,
        first_violation,
        generators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::orbit::orbit_map;
    use crate::rational::rint;

    fn map_for(key: &str) -> (AlgebraSpec, OrbitMap) {
        let spec = corpus::get(key).unwrap();
        let map = orbit_map(&spec, 25, 0xC0FFEE).unwrap();
        (spec, map)
    }

    #[test]
    fn sup_norm_examples() {
        // Heisenberg action matrix: sup 2, exact
        let h = corpus::get("heisenberg").unwrap();
        let pa = crate::orbit::pa_matrix(&h).unwrap();
        let b = sup_inf_norm(&pa, 1e-9).unwrap();
        assert_eq!(b.exact, Some(rint(2)));

        // identity: sup 1
        let id = crate::poly::PolyMatrix::identity(4, 1);
        let b = sup_inf_norm(&id, 1e-9).unwrap();
        assert_eq!(b.exact, Some(rint(1)));

        // step-three case: sup 5 (row sums 1, 1+2|s|, 1+2|s|+2|s|^2)
        let a = corpus::get("dim4_step3").unwrap();
        let pa = crate::orbit::pa_matrix(&a).unwrap();
        let b = sup_inf_norm(&pa, 1e-9).unwrap();
        assert_eq!(b.exact, Some(rint(5)));

        assert!(sup_inf_norm(&id, 0.0).is_err());
    }

    #[test]
    fn delta_values() {
        for (key, num, den) in [
            ("heisenberg", 1, 4),
            ("heisenberg_plus_r", 1, 4),
            ("dim4_step3", 1, 10),
            ("stepk_m2", 1, 10),
        ] {
            let spec = corpus::get(key).unwrap();
            let d = delta_bound(&spec, 1e-9).unwrap();
            assert_eq!(d.exact, Some(rat(num, den)), "{key}");
        }
    }

    #[test]
    fn sup_is_at_least_one_on_the_corpus() {
        for key in crate::corpus::BUILTIN_KEYS {
            let spec = corpus::get(key).unwrap();
            let pa = crate::orbit::pa_matrix(&spec).unwrap();
            let b = sup_inf_norm(&pa, 1e-6).unwrap();
            assert!(b.lower >= 1.0 - 1e-12, "{key}: sup < 1");
        }
    }

    #[test]
    fn containment_tier_one() {
        let (spec, map) = map_for("heisenberg");
        let box_ = SpectralBox::parse("-0.25,0.25", 1).unwrap();
        let c = check_containment(&spec, &map, &box_, 1000, 1).unwrap();
        assert!(c.contained);
        assert_eq!(c.tier, "rigorous");

        let (spec, map) = map_for("dim4_step3");
        let box_ = SpectralBox::parse("-0.1,0.1,-0.1,0.1", 2).unwrap();
        let c = check_containment(&spec, &map, &box_, 1000, 1).unwrap();
        assert!(c.contained);
        assert_eq!(c.tier, "rigorous");
    }

    #[test]
    fn containment_failure_has_witness() {
        let (spec, map) = map_for("heisenberg");
        let box_ = SpectralBox::parse("-1,1", 1).unwrap();
        let c = check_containment(&spec, &map, &box_, 20_000, 0xC0FFEE).unwrap();
        assert!(!c.contained);
        assert!(c.witness.is_some());
        // direct witness from the worked computation: beta(0.9, 0.5) = (0.9, -0.45)
        let b = map.beta_f64(&[0.9], &[0.5]);
        assert!((b[0] - 0.9).abs() < 1e-12 && (b[1] + 0.45).abs() < 1e-12);
        assert!(b[0].abs() > 0.5);
    }

    #[test]
    fn tiling_heisenberg_unit_box() {
        let (spec, map) = map_for("heisenberg");
        let box_ = SpectralBox::parse("-1,1", 1).unwrap();
        let c = check_tiling(&spec, &map, &box_, 100_000, 0xC0FFEE).unwrap();
        assert!((c.mu_measure - 1.0).abs() < 5e-3, "mu = {}", c.mu_measure);
        assert!(c.collision_rate < 1e-2);
        assert_eq!(c.tiling, Some(true));

        // quarter box: mu = 1/16, no tiling
        let small = SpectralBox::parse("-0.25,0.25", 1).unwrap();
        let c = check_tiling(&spec, &map, &small, 20_000, 0xC0FFEE).unwrap();
        assert!((c.mu_measure - 1.0 / 16.0).abs() < 1e-4);
        assert_eq!(c.tiling, Some(false));

        // empty box
        let empty = SpectralBox::parse("0.5,0.5", 1).unwrap();
        let c = check_tiling(&spec, &map, &empty, 100, 0xC0FFEE).unwrap();
        assert_eq!(c.mu_measure, 0.0);
        assert_eq!(c.tiling, Some(false));
    }

    #[test]
    fn tiling_reproducible_given_seed() {
        let (spec, map) = map_for("heisenberg");
        let box_ = SpectralBox::parse("-1,1", 1).unwrap();
        let a = check_tiling(&spec, &map, &box_, 50_000, 7).unwrap();
        let b = check_tiling(&spec, &map, &box_, 50_000, 7).unwrap();
        assert_eq!(a.collision_rate, b.collision_rate);
        assert_eq!(a.mu_measure, b.mu_measure);
    }

    #[test]
    fn monotone_containment_under_shrinking() {
        let (spec, map) = map_for("heisenberg");
        for scale in [4, 5, 8, 16] {
            let box_ = SpectralBox::symmetric(&rat(1, scale), 1);
            let c = check_containment(&spec, &map, &box_, 5_000, 3).unwrap();
            assert!(c.contained, "box 1/{scale} should be contained");
        }
    }

    #[test]
    fn box_parse_errors() {
        assert!(SpectralBox::parse("-1,1,-1,1", 1).is_err());
        assert!(SpectralBox::parse("1,-1", 1).is_err());
        assert!(SpectralBox::parse("0.5,0.5", 1).map(|b| b.is_empty()).unwrap());
    }

    #[test]
    fn dilation_examples() {
        let spec = corpus::get("heisenberg").unwrap();
        // identity accepted
        let id = RatMatrix::identity(3);
        let r = dilate_sampling_set(&spec, &id).unwrap();
        assert!(r.automorphism);
        assert_eq!(r.generators.len(), 3);

        // Z1 -> 4Z1, Z2 -> 2Z2, A1 -> 2A1: [2A1, 2Z2] = 4Z1, consistent
        let d = RatMatrix::from_i64(&[&[4, 0, 0], &[0, 2, 0], &[0, 0, 2]]);
        let r = dilate_sampling_set(&spec, &d).unwrap();
        assert!(r.automorphism);

        // swapping Z1 and Z2 only: [A1, Z1] = 0 but the image bracket is Z2
        let s = RatMatrix::from_i64(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 1]]);
        let r = dilate_sampling_set(&spec, &s).unwrap();
        assert!(!r.automorphism);
        assert!(r.first_violation.is_some());
    }
}
