use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

/// Exact inverse of a square rational matrix (row-major) by Gauss-Jordan
/// elimination.
pub fn invert(m: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularBasis)?;
        a.swap(col, pivot);
        let p = a[col][col].recip();
        for v in &mut a[col] {
            *v *= &p;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= &f * pv;
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}
