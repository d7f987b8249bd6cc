//! Exact rational scalars shared across the crate.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Arbitrary-precision rational number, always kept in lowest terms.
pub type Rat = BigRational;

/// The integer `n` as a rational.
pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// The fraction `n/d` in lowest terms.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Generalized binomial coefficient `C(x, 2) = x(x-1)/2`, valid for any
/// integer `x` (negative included).
pub fn choose2(x: i64) -> i64 {
    x * (x - 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose2_matches_binomial_on_negatives() {
        assert_eq!(choose2(0), 0);
        assert_eq!(choose2(1), 0);
        assert_eq!(choose2(2), 1);
        // C(a+1, 2) for a = -2 is (-1)(-2)/2 = 1
        assert_eq!(choose2(-1), 1);
        assert_eq!(choose2(-2), 3);
    }
}
