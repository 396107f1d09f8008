//! Certified bounds for sup-norms of polynomial matrices over the unit
//! cube, via Bernstein coefficient enclosures with branch-and-bound
//! subdivision.
//!
//! The max-row-sum of absolute polynomial values is written pointwise as
//! max over sign vectors of a plain polynomial; the Bernstein coefficients
//! of each signed polynomial bound its range over the box, and the bound
//! is attained exactly when a maximal coefficient sits at a vertex index
//! (vertex Bernstein coefficients equal corner values). Subboxes are
//! produced by exact affine substitution, so every bound stays rational.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::{One, Zero};

use crate::poly::{Poly, PolyMatrix};
use crate::rational::{rat, Rational};

/// Two-sided enclosure of a supremum; `exact` is set when lower == upper.
#[derive(Debug, Clone)]
pub struct Enclosure {
    pub lower: Rational,
    pub upper: Rational,
    pub exact: bool,
}

/// Max Bernstein coefficient data for one polynomial over [0,1]^m.
struct BernsteinMax {
    max_coeff: Rational,
    max_vertex_coeff: Rational,
}

impl BernsteinMax {
    fn attained(&self) -> bool {
        self.max_coeff == self.max_vertex_coeff
    }
}

fn binomial(n: u32, k: u32) -> Rational {
    let mut num = Rational::one();
    for i in 0..k {
        num *= rat((n - i) as i64, (i + 1) as i64);
    }
    num
}

/// Computes the maximal Bernstein coefficient and the maximal coefficient
/// over vertex indices (which equal the polynomial's corner values).
fn bernstein_max(p: &Poly) -> BernsteinMax {
    if p.is_zero() {
        return BernsteinMax {
            max_coeff: Rational::zero(),
            max_vertex_coeff: Rational::zero(),
        };
    }
    let nvars = p.nvars;
    let degs: Vec<u32> = (0..nvars).map(|i| p.degree_in(i)).collect();
    let sizes: Vec<usize> = degs.iter().map(|&d| d as usize + 1).collect();
    let total: usize = sizes.iter().product();
    // dense power-basis coefficients
    let mut coeffs = vec![Rational::zero(); total];
    let stride = |idx: &[u32]| -> usize {
        let mut off = 0;
        for (v, &i) in idx.iter().enumerate() {
            off = off * sizes[v] + i as usize;
        }
        off
    };
    for (e, c) in &p.terms {
        coeffs[stride(e)] = c.clone();
    }
    // axis-by-axis Bernstein transform: b_i = sum_{k<=i} C(i,k)/C(d,k) a_k
    let mut suffix: usize = total;
    for v in 0..nvars {
        let d = degs[v];
        let len = sizes[v];
        suffix /= len;
        let prefix = total / (len * suffix);
        let mut table = vec![vec![Rational::zero(); len]; len];
        for (i, row) in table.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate().take(i + 1) {
                *cell = binomial(i as u32, k as u32) / binomial(d, k as u32);
            }
        }
        for a in 0..prefix {
            for b in 0..suffix {
                let at = |i: usize| a * len * suffix + i * suffix + b;
                let old: Vec<Rational> = (0..len).map(|i| coeffs[at(i)].clone()).collect();
                for i in 0..len {
                    let mut acc = Rational::zero();
                    for (k, o) in old.iter().enumerate().take(i + 1) {
                        if !o.is_zero() {
                            acc += &table[i][k] * o;
                        }
                    }
                    coeffs[at(i)] = acc;
                }
            }
        }
    }
    // scan for the maxima
    let mut max_coeff: Option<Rational> = None;
    let mut max_vertex: Option<Rational> = None;
    for (flat, c) in coeffs.iter().enumerate() {
        let mut rem = flat;
        let mut vertex = true;
        for v in (0..nvars).rev() {
            let i = rem % sizes[v];
            rem /= sizes[v];
            if i != 0 && i != degs[v] as usize {
                vertex = false;
            }
        }
        if max_coeff.as_ref().map_or(true, |m| c > m) {
            max_coeff = Some(c.clone());
        }
        if vertex && max_vertex.as_ref().map_or(true, |m| c > m) {
            max_vertex = Some(c.clone());
        }
    }
    BernsteinMax {
        max_coeff: max_coeff.unwrap_or_else(Rational::zero),
        max_vertex_coeff: max_vertex.unwrap_or_else(Rational::zero),
    }
}

/// Restricts `p` to the half of the unit cube with x_v in [h/2, (h+1)/2],
/// reparametrized back onto [0,1]^m (exact affine substitution).
fn restrict_half(p: &Poly, v: usize, h: u32) -> Poly {
    let nvars = p.nvars;
    let point: Vec<Poly> = (0..nvars)
        .map(|i| {
            if i == v {
                Poly::var(nvars, i)
                    .scale(&rat(1, 2))
                    .add(&Poly::constant(nvars, rat(h as i64, 2)))
            } else {
                Poly::var(nvars, i)
            }
        })
        .collect();
    p.subst(&point)
}

struct Node {
    poly: Poly,
    upper: Rational,
    depth: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.cmp(&other.upper)
    }
}

/// Enumerates the signed polynomials whose pointwise max equals the sum of
/// absolute entry values of `row`. Entries with single-signed coefficients
/// keep a fixed sign; only genuinely mixed entries branch.
fn signed_row_sums(row: &[&Poly]) -> Vec<Poly> {
    let nvars = row.first().map_or(0, |p| p.nvars);
    let mut fixed = Poly::zero(nvars);
    let mut mixed: Vec<&Poly> = Vec::new();
    for p in row {
        if p.is_zero() {
            continue;
        }
        let pos = p.terms.values().any(|c| c > &Rational::zero());
        let neg = p.terms.values().any(|c| c < &Rational::zero());
        if pos && neg {
            mixed.push(p);
        } else if pos {
            fixed = fixed.add(p);
        } else {
            fixed = fixed.sub(p);
        }
    }
    let mut out = vec![fixed];
    for p in mixed {
        let mut next = Vec::with_capacity(out.len() * 2);
        for g in &out {
            next.push(g.add(p));
            next.push(g.sub(p));
        }
        out = next;
    }
    out
}

/// Certified supremum of the max-absolute-row-sum of `matrix` over the
/// closed unit cube.
///
/// Returns an exact value whenever branch-and-bound pins the supremum to a
/// box corner; otherwise an enclosure with gap at most `tol` (subject to
/// the node budget).
pub fn sup_abs_row_sum(matrix: &PolyMatrix, tol: &Rational, max_nodes: usize) -> Enclosure {
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut lower = Rational::zero();
    let push = |heap: &mut BinaryHeap<Node>, lower: &mut Rational, g: Poly, depth: usize| {
        let data = bernstein_max(&g);
        if data.max_vertex_coeff > *lower {
            *lower = data.max_vertex_coeff.clone();
        }
        if !data.attained() {
            heap.push(Node {
                upper: data.max_coeff,
                poly: g,
                depth,
            });
        } else if data.max_coeff > *lower {
            *lower = data.max_coeff;
        }
    };
    for i in 0..matrix.rows {
        let row: Vec<&Poly> = (0..matrix.cols).map(|j| &matrix[(i, j)]).collect();
        for g in signed_row_sums(&row) {
            push(&mut heap, &mut lower, g, 0);
        }
    }
    let mut expanded = 0;
    while let Some(node) = heap.pop() {
        if node.upper <= lower {
            // every remaining bound is dominated by an attained value
            return Enclosure {
                lower: lower.clone(),
                upper: lower,
                exact: true,
            };
        }
        if &node.upper - &lower <= *tol || expanded >= max_nodes {
            let upper = node.upper.clone();
            return Enclosure {
                lower,
                upper,
                exact: false,
            };
        }
        expanded += 1;
        // split along the axis of highest degree
        let v = (0..node.poly.nvars)
            .max_by_key(|&i| node.poly.degree_in(i))
            .unwrap_or(0);
        for h in 0..2 {
            push(
                &mut heap,
                &mut lower,
                restrict_half(&node.poly, v, h),
                node.depth + 1,
            );
        }
    }
    Enclosure {
        lower: lower.clone(),
        upper: lower,
        exact: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rint;

    fn tol() -> Rational {
        rat(1, 1_000_000_000)
    }

    #[test]
    fn identity_matrix_sup_is_one() {
        let m = PolyMatrix::identity(3, 1);
        let e = sup_abs_row_sum(&m, &tol(), 1000);
        assert!(e.exact);
        assert_eq!(e.upper, rint(1));
    }

    #[test]
    fn single_sign_rows_hit_corners() {
        // [[1, 0], [-s, 1]]: row sums 1 and 1 + |s|, sup = 2 at s = 1
        let mut m = PolyMatrix::identity(2, 1);
        m[(1, 0)] = Poly::var(1, 0).neg();
        let e = sup_abs_row_sum(&m, &tol(), 1000);
        assert!(e.exact);
        assert_eq!(e.upper, rint(2));
    }

    #[test]
    fn mixed_sign_entry_still_exact() {
        // row (1, -2s1, 2s1^2 - 2s2): sup of 1 + 2|s1| + |2s1^2 - 2s2| = 5
        let s1 = Poly::var(2, 0);
        let s2 = Poly::var(2, 1);
        let mut m = PolyMatrix::zeros(1, 3, 2);
        m[(0, 0)] = Poly::one(2);
        m[(0, 1)] = s1.scale(&rint(-2));
        m[(0, 2)] = s1.mul(&s1).scale(&rint(2)).sub(&s2.scale(&rint(2)));
        let e = sup_abs_row_sum(&m, &tol(), 10_000);
        assert!(e.exact);
        assert_eq!(e.upper, rint(5));
    }

    #[test]
    fn interior_maximum_is_enclosed() {
        // f(s) = s - s^2 has sup 1/4 at s = 1/2, not at a corner.
        let s = Poly::var(1, 0);
        let mut m = PolyMatrix::zeros(1, 1, 1);
        m[(0, 0)] = s.sub(&s.mul(&s));
        let e = sup_abs_row_sum(&m, &tol(), 100_000);
        assert!(e.lower <= rat(1, 4) && rat(1, 4) <= e.upper);
        assert!(&e.upper - &e.lower <= tol());
    }

    #[test]
    fn enclosure_brackets_grid_evaluations() {
        let s1 = Poly::var(2, 0);
        let s2 = Poly::var(2, 1);
        let mut m = PolyMatrix::zeros(2, 2, 2);
        m[(0, 0)] = Poly::one(2);
        m[(0, 1)] = s1.mul(&s2).scale(&rint(3)).sub(&s2);
        m[(1, 0)] = s1.sub(&s1.mul(&s1).scale(&rint(2)));
        m[(1, 1)] = Poly::constant(2, rat(-1, 2));
        let e = sup_abs_row_sum(&m, &tol(), 100_000);
        let lo = crate::rational::to_f64(&e.lower);
        let hi = crate::rational::to_f64(&e.upper);
        assert!(lo <= hi);
        for i in 0..=50 {
            for j in 0..=50 {
                let pt = [i as f64 / 50.0, j as f64 / 50.0];
                let norm = (0..2)
                    .map(|r| (0..2).map(|c| m[(r, c)].eval_f64(&pt).abs()).sum::<f64>())
                    .fold(f64::MIN, f64::max);
                assert!(norm <= hi + 1e-12);
            }
        }
    }
}
