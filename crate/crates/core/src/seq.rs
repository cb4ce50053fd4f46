//! Row-major mixed-radix indexing of sequences over dense alphabets
//! (first letter most significant).

use crate::error::{Error, Result};

/// `kⁿ`, or an error if it does not fit in a `usize`.
pub fn space_size(k: usize, n: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(k)
            .ok_or_else(|| Error::TooLarge(format!("{k}^{n} sequences")))?;
    }
    Ok(acc)
}

pub fn index(letters: &[usize], k: usize) -> usize {
    letters.iter().fold(0, |acc, &a| acc * k + a)
}

pub fn letters(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for t in (0..n).rev() {
        out[t] = idx % k;
        idx /= k;
    }
    out
}
