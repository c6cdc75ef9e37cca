use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};

/// Number of nonnegative integer vectors of length `m` with coordinate sum in
/// `[1, N^2]`, i.e. `sum_{k=1}^{N^2} C(m + k - 1, k)`: how many combined
/// samples can be formed from `m` originals when the error may grow by a
/// factor of `N`.
pub fn combination_capacity(m: u64, big_n: u64) -> Result<BigUint> {
    if m == 0 || big_n == 0 {
        return Err(Error::InvalidParameter(
            "capacity needs m >= 1 and N >= 1".into(),
        ));
    }
    let terms = big_n
        .checked_mul(big_n)
        .ok_or_else(|| Error::InvalidParameter(format!("N = {big_n} is too large")))?;
    // C(m+k-1, k) = C(m+k-2, k-1) * (m+k-1) / k, starting from C(m-1, 0) = 1
    let mut term = BigUint::one();
    let mut total = BigUint::from(0u32);
    for k in 1..=terms {
        term = term * BigUint::from(m + k - 1) / BigUint::from(k);
        total += &term;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts vectors in N^m with 1 <= sum <= limit by direct enumeration.
    fn enumerate(m: usize, limit: u64) -> u64 {
        fn rec(left: usize, budget: u64) -> u64 {
            if left == 0 {
                return 1;
            }
            (0..=budget).map(|v| rec(left - 1, budget - v)).sum()
        }
        rec(m, limit) - 1
    }

    #[test]
    fn small_values() {
        assert_eq!(combination_capacity(1, 1).unwrap(), BigUint::from(1u32));
        assert_eq!(combination_capacity(2, 1).unwrap(), BigUint::from(2u32));
        assert_eq!(combination_capacity(3, 2).unwrap(), BigUint::from(34u32));
        assert!(combination_capacity(0, 1).is_err());
        assert!(combination_capacity(1, 0).is_err());
    }

    #[test]
    fn agrees_with_enumeration() {
        for m in 1..=5u64 {
            for n in 1..=3u64 {
                assert_eq!(
                    combination_capacity(m, n).unwrap(),
                    BigUint::from(enumerate(m as usize, n * n)),
                    "m={m} N={n}"
                );
            }
        }
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let c = combination_capacity(100, 8).unwrap();
        assert!(c.bits() > 128);
    }
}
