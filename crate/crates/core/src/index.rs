//! Mixed-radix configuration codes.
//!
//! `(x_1, ..., x_m)` over base `B` maps to `sum_i x_i * B^(m-i)`.

use alloc::vec::Vec;

/// `base^exp`, or `None` on overflow.
pub fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Panics on overflow; callers have already validated sizes.
pub fn pow(base: usize, exp: usize) -> usize {
    checked_pow(base, exp).expect("mixed-radix size overflow")
}

pub fn encode(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// Writes the digits of `code` into `out` (most significant first).
pub fn decode_into(mut code: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = code % base;
        code /= base;
    }
}

pub fn decode(code: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = alloc::vec![0; len];
    decode_into(code, base, &mut out);
    out
}

/// Code of the sub-configuration picked out by `positions` from a full
/// digit vector.
pub fn encode_selected(digits: &[usize], positions: &[usize], base: usize) -> usize {
    positions.iter().fold(0, |acc, &p| acc * base + digits[p])
}

/// Checks that `set` is strictly increasing and every element is `< bound`.
pub fn is_sorted_subset(set: &[usize], bound: usize) -> bool {
    set.windows(2).all(|w| w[0] < w[1]) && set.iter().all(|&x| x < bound)
}

/// Returns a sorted, deduplicated copy.
pub fn sorted(set: &[usize]) -> Vec<usize> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Per-digit strides: the weight of each coordinate in the code.
pub fn strides(len: usize, base: usize) -> Vec<usize> {
    let mut out = alloc::vec![1; len];
    for i in (0..len.saturating_sub(1)).rev() {
        out[i] = out[i + 1] * base;
    }
    out
}
