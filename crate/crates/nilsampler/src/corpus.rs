//! Built-in algebra corpus.
//!
//! Keys: "heisenberg", "heisenberg_plus_r", "dim4_step3",
//! "remark_5dim_example", "counterexample_5dim", and the parameterized
//! family "stepk_m{M}" (step M+1 in dimension 2M+1).

use crate::algebra::AlgebraSpec;
use crate::error::{Error, Result};
use crate::rational::{rint, Rational};

fn br(i: usize, j: usize, coeffs: &[(usize, i64)]) -> ((usize, usize), Vec<(usize, Rational)>) {
    (
        (i, j),
        coeffs.iter().map(|&(k, c)| (k, rint(c))).collect(),
    )
}

/// Heisenberg algebra: Z_1, Z_2, A_1 with [A_1, Z_2] = Z_1.
pub fn heisenberg() -> AlgebraSpec {
    AlgebraSpec::new("heisenberg", 3, 2, vec![br(2, 3, &[(1, -1)])]).unwrap()
}

/// Heisenberg plus a central line: Z_1, Z_2, Z_3, A_1 with [A_1, Z_2] = Z_1.
pub fn heisenberg_plus_r() -> AlgebraSpec {
    AlgebraSpec::new("heisenberg_plus_r", 4, 3, vec![br(2, 4, &[(1, -1)])]).unwrap()
}

/// Four-dimensional step-three algebra: [A_1, Z_2] = 2 Z_1, [A_1, Z_3] = 2 Z_2.
pub fn dim4_step3() -> AlgebraSpec {
    AlgebraSpec::new(
        "dim4_step3",
        4,
        3,
        vec![br(2, 4, &[(1, -2)]), br(3, 4, &[(2, -2)])],
    )
    .unwrap()
}

/// Five-dimensional illustration algebra with two complement generators:
/// [A_1, Z_3] = Z_1, [A_2, Z_2] = Z_1, [A_2, Z_3] = Z_2.
///
/// Satisfies every hypothesis except integrality of exp(ad A_2) on the
/// integer span of the ideal.
pub fn remark_5dim_example() -> AlgebraSpec {
    AlgebraSpec::new(
        "remark_5dim_example",
        5,
        3,
        vec![
            br(3, 4, &[(1, -1)]),
            br(2, 5, &[(1, -1)]),
            br(3, 5, &[(2, -1)]),
        ],
    )
    .unwrap()
}

/// Five-dimensional rejection case: [A_1, Z_3] = Z_2, [A_2, Z_3] = Z_1.
/// Generic coadjoint orbits are 2-dimensional while the complement has
/// dimension 2, so the ideal is not a polarization for any functional.
pub fn counterexample_5dim() -> AlgebraSpec {
    AlgebraSpec::new(
        "counterexample_5dim",
        5,
        3,
        vec![br(3, 4, &[(2, -1)]), br(3, 5, &[(1, -1)])],
    )
    .unwrap()
}

/// Step-(m+1) family in dimension 2m+1: p = m+1 and
/// [A_k, Z_j] = m! * Z_{j-k} for j > k.
pub fn stepk(m: usize) -> Result<AlgebraSpec> {
    if m == 0 || m > 8 {
        return Err(Error::input(format!(
            "stepk family parameter must be in 1..=8, got {m}"
        )));
    }
    let p = m + 1;
    let n = 2 * m + 1;
    let mut factorial: i64 = 1;
    for k in 2..=m as i64 {
        factorial *= k;
    }
    let mut brackets = Vec::new();
    for k in 1..=m {
        for j in 1..=p {
            if j > k {
                // stored as [Z_j, A_k] = -m! Z_{j-k}
                brackets.push(br(j, p + k, &[(j - k, -factorial)]));
            }
        }
    }
    AlgebraSpec::new(format!("stepk_m{m}"), n, p, brackets)
}

pub const BUILTIN_KEYS: [&str; 8] = [
    "heisenberg",
    "heisenberg_plus_r",
    "dim4_step3",
    "remark_5dim_example",
    "counterexample_5dim",
    "stepk_m2",
    "stepk_m3",
    "stepk_m4",
];

/// Looks up a built-in algebra by key; "stepk_m{M}" is parsed dynamically.
pub fn get(key: &str) -> Result<AlgebraSpec> {
    match key {
        "heisenberg" => Ok(heisenberg()),
        "heisenberg_plus_r" => Ok(heisenberg_plus_r()),
        "dim4_step3" => Ok(dim4_step3()),
        "remark_5dim_example" => Ok(remark_5dim_example()),
        "counterexample_5dim" => Ok(counterexample_5dim()),
        _ => {
            if let Some(m) = key.strip_prefix("stepk_m") {
                let m: usize = m
                    .parse()
                    .map_err(|_| Error::input(format!("bad stepk key {key:?}")))?;
                return stepk(m);
            }
            Err(Error::input(format!("unknown corpus key {key:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_load_and_have_valid_structure() {
        for key in BUILTIN_KEYS {
            let spec = get(key).unwrap();
            assert!(spec.verify_structure().passed, "{key}");
        }
    }

    #[test]
    fn stepk_m1_is_heisenberg() {
        let a = stepk(1).unwrap();
        assert_eq!(a.n, 3);
        assert_eq!(a.bracket_basis(3, 2), heisenberg().bracket_basis(3, 2));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(get("nope").is_err());
        assert!(get("stepk_mX").is_err());
        assert!(get("stepk_m0").is_err());
    }
}
