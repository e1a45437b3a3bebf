//! Dense exact linear algebra over the rationals.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{bit_size, Q};

/// Solves `A X = B` for a square non-singular `A` and any number of right-hand
/// sides (`b[i]` is row `i` of `B`).
///
/// Gaussian elimination; the pivot is the non-zero entry of smallest bit size
/// in the column, which keeps coefficient growth in check.
pub fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Vec<Q>>) -> Result<Vec<Vec<Q>>> {
    let n = a.len();
    assert_eq!(b.len(), n, "right-hand side height");
    let cols = b.first().map_or(0, Vec::len);
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| bit_size(&a[r][col]))
            .ok_or(Error::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Q::from_integer(1.into()) / &a[col][col];
        for x in a[col][col..].iter_mut() {
            *x *= &inv;
        }
        for x in b[col].iter_mut() {
            *x *= &inv;
        }
        let (pivot_a, pivot_b) = (a[col].clone(), b[col].clone());
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..n {
                if !pivot_a[c].is_zero() {
                    let delta = &factor * &pivot_a[c];
                    a[r][c] -= delta;
                }
            }
            for c in 0..cols {
                if !pivot_b[c].is_zero() {
                    let delta = &factor * &pivot_b[c];
                    b[r][c] -= delta;
                }
            }
        }
    }
    Ok(b)
}

/// Solves `A x = b` for a single right-hand side.
pub fn solve_vec(a: Vec<Vec<Q>>, b: Vec<Q>) -> Result<Vec<Q>> {
    let rows = b.into_iter().map(|x| vec![x]).collect();
    Ok(solve(a, rows)?.into_iter().map(|mut r| r.pop().expect("one column")).collect())
}
