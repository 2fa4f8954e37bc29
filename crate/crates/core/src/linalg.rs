//! Small dense solves, generic over exact and floating scalars.

use crate::scalar::Pivot;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveError {
    /// No usable pivot for this unknown.
    Singular { column: usize },
    /// A leftover equation of an overdetermined system is not satisfied.
    Inconsistent { row: usize },
}

/// Solves `a x = b` for a (possibly overdetermined) consistent system by
/// Gaussian elimination with partial pivoting. `a` is row-major, `rows x cols`.
pub fn solve<F: Pivot>(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Result<Vec<F>, SolveError> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    assert_eq!(b.len(), rows);
    let scale = a
        .iter()
        .flatten()
        .fold(F::zero(), |m, v| if v.abs() > m { v.abs() } else { m });
    let mut perm: Vec<usize> = (0..rows).collect();

    for col in 0..cols {
        let Some(best) = (col..rows).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("comparable")
        }) else {
            return Err(SolveError::Singular { column: col });
        };
        if a[best][col].negligible(&scale) {
            return Err(SolveError::Singular { column: col });
        }
        a.swap(col, best);
        b.swap(col, best);
        perm.swap(col, best);
        let pivot = a[col][col].clone();
        for r in col + 1..rows {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / pivot.clone();
            for c in col..cols {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] -= delta;
            }
            let delta = factor * b[col].clone();
            b[r] -= delta;
        }
    }
    let rhs_scale = b.iter().fold(F::zero(), |m, v| if v.abs() > m { v.abs() } else { m });
    for r in cols..rows {
        if !b[r].negligible(&rhs_scale) {
            return Err(SolveError::Inconsistent { row: perm[r] });
        }
    }
    let mut x = vec![F::zero(); cols];
    for r in (0..cols).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..cols {
            acc -= a[r][c].clone() * x[c].clone();
        }
        x[r] = acc / a[r][r].clone();
    }
    Ok(x)
}

/// Inverse of a square matrix (row-major), column by column.
pub fn invert<F: Pivot>(a: &[Vec<F>]) -> Result<Vec<Vec<F>>, SolveError> {
    let n = a.len();
    let mut inv = vec![vec![F::zero(); n]; n];
    for j in 0..n {
        let mut e = vec![F::zero(); n];
        e[j] = F::one();
        let col = solve(a.to_vec(), e)?;
        for i in 0..n {
            inv[i][j] = col[i].clone();
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Rational};

    #[test]
    fn exact_square_system() {
        let a: Vec<Vec<Rational>> = vec![
            vec![rational(2, 1), rational(1, 1)],
            vec![rational(1, 1), rational(3, 1)],
        ];
        let x = solve(a, vec![rational(3, 1), rational(5, 1)]).unwrap();
        assert_eq!(x, vec![rational(4, 5), rational(7, 5)]);
    }

    #[test]
    fn overdetermined_consistency_is_checked() {
        let a = vec![vec![1.0], vec![2.0]];
        assert_eq!(solve(a.clone(), vec![1.0, 2.0]).unwrap(), vec![1.0]);
        assert!(matches!(solve(a, vec![1.0, 3.0]), Err(SolveError::Inconsistent { .. })));
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(solve(a, vec![1.0, 2.0]), Err(SolveError::Singular { column: 1 })));
    }

    #[test]
    fn inverse_roundtrip() {
        let a = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]];
        let inv = invert(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
