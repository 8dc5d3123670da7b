//! Portable batch sampling stream.
//!
//! Any implementation that follows the three steps below reproduces the exact
//! batch sequence for a given seed:
//!
//! 1. **Word stream**: SplitMix64. `state += 0x9E3779B97F4A7C15`, then
//!    `z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!    z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)` with wrapping
//!    arithmetic. The initial state is the seed itself.
//! 2. **Uniform index below `n`**: draw words `w` until `w >= 2^64 mod n`,
//!    return `w mod n`.
//! 3. **Subset**: a uniform rank `r < C(N, b)` is unranked into the `r`-th
//!    `b`-subset of `{0, .., N-1}` in lexicographic order.

use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    inner: rand_xoshiro::SplitMix64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            inner: rand_xoshiro::SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let w = self.next_u64();
            if w >= threshold {
                return w % n;
            }
        }
    }
}

/// `C(n, k)`, or an error when it does not fit in 63 bits.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > i64::MAX as u128 {
            return Err(Error::invalid(format!(
                "C({n}, {k}) overflows the batch index space"
            )));
        }
    }
    Ok(acc as u64)
}

/// The `rank`-th `k`-subset of `{0, .., n-1}` in lexicographic order.
pub fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Result<Vec<usize>> {
    let total = binomial(n, k)?;
    if rank >= total {
        return Err(Error::invalid(format!("rank {rank} >= C({n}, {k})")));
    }
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for pos in 0..k {
        let mut c = next;
        loop {
            let count = binomial(n - 1 - c, k - 1 - pos)?;
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    Ok(out)
}

/// Inverse of [`unrank_combination`]; `combo` must be strictly increasing.
pub fn rank_combination(n: usize, combo: &[usize]) -> Result<u64> {
    let k = combo.len();
    let mut rank = 0u64;
    let mut next = 0usize;
    for (pos, &c) in combo.iter().enumerate() {
        if c >= n || c < next {
            return Err(Error::invalid(format!(
                "batch {combo:?} is not a strictly increasing subset of 0..{n}"
            )));
        }
        for skipped in next..c {
            rank += binomial(n - 1 - skipped, k - 1 - pos)?;
        }
        next = c + 1;
    }
    Ok(rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_words() {
        // Reference values of SplitMix64 seeded with 1234567.
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
        assert_eq!(rng.next_u64(), 9817491932198370423);
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2).unwrap(), 10);
        assert_eq!(binomial(3, 0).unwrap(), 1);
        assert_eq!(binomial(3, 4).unwrap(), 0);
        assert_eq!(binomial(60, 30).unwrap(), 118264581564861424);
    }

    #[test]
    fn unrank_lexicographic_order() {
        let all: Vec<_> = (0..10)
            .map(|r| unrank_combination(5, 3, r).unwrap())
            .collect();
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[1], vec![0, 1, 3]);
        assert_eq!(all[9], vec![2, 3, 4]);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        for (r, c) in all.iter().enumerate() {
            assert_eq!(rank_combination(5, c).unwrap(), r as u64);
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SplitMix64::new(7);
        for n in [1u64, 2, 3, 10, 1 << 40] {
            for _ in 0..100 {
                assert!(rng.below(n) < n);
            }
        }
    }
}
